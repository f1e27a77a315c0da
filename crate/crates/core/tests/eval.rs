mod common;

use bitvec::prelude::*;
use dialoforge::encoding::{encode_dataset, Bits, EncodedSplit};
use dialoforge::engine::{generate_dataset, GeneratorConfig};
use dialoforge::eval::{
    compute_metrics, robustness_sweep, train_linear, train_memorizer, LinearConfig, Model, ModelKind,
    SweepConfig,
};
use dialoforge::presets::{preset_config, preset_ontology};
use proptest::prelude::*;

use common::numeric::{self, bits};

#[test]
fn metrics_match_brute_force_oracle() {
    numeric::metrics_oracle(2024, 1000).unwrap();
}

proptest! {
    #[test]
    fn metrics_ignore_row_order(
        rows in prop::collection::vec(prop::collection::vec(any::<(bool, bool)>(), 4), 1..20),
        rotate in 0usize..20,
    ) {
        let pred: Vec<Bits> = rows.iter().map(|r| bits(&r.iter().map(|x| x.0).collect::<Vec<_>>())).collect();
        let gold: Vec<Bits> = rows.iter().map(|r| bits(&r.iter().map(|x| x.1).collect::<Vec<_>>())).collect();
        let a = compute_metrics(&pred, &gold, &[]).unwrap();
        let k = rotate % pred.len();
        let (mut p2, mut g2) = (pred.clone(), gold.clone());
        p2.rotate_left(k);
        g2.rotate_left(k);
        let b = compute_metrics(&p2, &g2, &[]).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn gradients_match_central_differences() {
    let worst = numeric::worst_gradient_error(7, 100);
    assert!(worst <= 1e-5, "worst relative error {worst:e}");
}

fn clean(preset: &str, n: usize, seed: u64) -> dialoforge::encoding::EncodedDataset {
    let ont = preset_ontology(preset).unwrap();
    let cfg = GeneratorConfig {
        n_dialogues: n,
        seed,
        ..preset_config(preset).unwrap()
    };
    encode_dataset(&generate_dataset(&ont, &cfg).unwrap(), &ont, 1).unwrap()
}

#[test]
fn memorizer_reproduces_clean_simple_training_data() {
    let enc = clean("simple", 2000, 0);
    let model = Model::Memorizer(train_memorizer(&enc.train).unwrap());
    let report = model.evaluate(&enc.train, &enc.layout.actions).unwrap();
    assert_eq!(report.micro.f1, 1.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn memorizer_is_perfect_on_functional_covered_splits(
        table in prop::collection::vec((prop::collection::vec(any::<bool>(), 6), prop::collection::vec(any::<bool>(), 3)), 1..12),
        picks in prop::collection::vec(any::<prop::sample::Index>(), 1..40),
    ) {
        // Deduplicate states so the mapping is a function.
        let mut seen = std::collections::BTreeMap::new();
        for (s, t) in table {
            seen.entry(s).or_insert(t);
        }
        let entries: Vec<_> = seen.into_iter().collect();
        let mut split = EncodedSplit::default();
        for (s, t) in &entries {
            split.states.push(bits(s));
            split.targets.push(bits(t));
        }
        let model = Model::Memorizer(train_memorizer(&split).unwrap());
        let mut test = EncodedSplit::default();
        for p in &picks {
            let (s, t) = &entries[p.index(entries.len())];
            test.states.push(bits(s));
            test.targets.push(bits(t));
        }
        let report = model.evaluate(&test, &[]).unwrap();
        let positives = test.targets.iter().map(|t| t.count_ones()).sum::<usize>();
        prop_assert_eq!(report.fp + report.fn_, 0);
        if positives > 0 {
            prop_assert_eq!(report.micro.f1, 1.0);
        }
    }
}

#[test]
fn linear_loss_never_increases_and_fits_clean_data() {
    let enc = clean("simple", 600, 3);
    let cfg = LinearConfig {
        epochs: 15,
        ..LinearConfig::default()
    };
    let (model, log) = train_linear(&enc.train, &cfg).unwrap();
    assert_eq!(log.losses.len(), cfg.epochs + 1);
    assert!(log.losses.windows(2).all(|w| w[1] <= w[0]), "{:?}", log.losses);
    let report = Model::Linear(model)
        .evaluate(&enc.test, &enc.layout.actions)
        .unwrap();
    assert!(report.micro.f1 > 0.95, "{}", report.micro.f1);
}

#[test]
fn unk_only_full_noise_scores_like_the_fallback() {
    let ont = preset_ontology("simple").unwrap();
    let generator = GeneratorConfig {
        n_dialogues: 300,
        ..preset_config("simple").unwrap()
    };
    for train_only in [false, true] {
        let cfg = SweepConfig {
            rates: vec![1.0],
            seeds: vec![5],
            mode_weights: (0.0, 1.0),
            train_only,
            ..SweepConfig::default()
        };
        let result = robustness_sweep(&ont, &generator, &cfg).unwrap();
        assert_eq!(result.rows.len(), 1);
        // Every gold action becomes UNK and drops out of the targets, so the
        // only set the memorizer can learn is the empty one.
        let clean = encode_dataset(
            &generate_dataset(
                &ont,
                &GeneratorConfig {
                    seed: 5,
                    ..generator.clone()
                },
            )
            .unwrap(),
            &ont,
            1,
        )
        .unwrap();
        let width = clean.layout.target_width();
        let golds = if train_only {
            clean.test.targets.clone()
        } else {
            vec![bitvec![u8, Msb0; 0; width]; clean.test.len()]
        };
        let fallback = vec![bitvec![u8, Msb0; 0; width]; golds.len()];
        let expected = compute_metrics(&fallback, &golds, &clean.layout.actions).unwrap();
        assert_eq!(result.rows[0].metrics, expected, "train_only={train_only}");
    }
}

#[test]
fn sweep_rows_are_ordered_and_reproducible() {
    let ont = preset_ontology("simple").unwrap();
    let generator = GeneratorConfig {
        n_dialogues: 300,
        ..preset_config("simple").unwrap()
    };
    let cfg = SweepConfig {
        rates: vec![0.0, 0.5, 1.0],
        models: vec![ModelKind::Memorizer, ModelKind::Linear],
        seeds: vec![1, 2],
        linear: LinearConfig {
            epochs: 5,
            ..LinearConfig::default()
        },
        ..SweepConfig::default()
    };
    let a = robustness_sweep(&ont, &generator, &cfg).unwrap();
    assert_eq!(a.rows.len(), 3 * 2 * 2);
    let keys: Vec<(f64, ModelKind, u64)> = a.rows.iter().map(|r| (r.rate, r.model, r.seed)).collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    assert_eq!(keys, sorted);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let b = pool.install(|| robustness_sweep(&ont, &generator, &cfg)).unwrap();
    assert_eq!(a, b);
    for seed in [1, 2] {
        let f1: Vec<f64> = a
            .rows
            .iter()
            .filter(|r| r.seed == seed && r.model == ModelKind::Memorizer)
            .map(|r| r.metrics.micro.f1)
            .collect();
        assert!(f1.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {f1:?}");
    }
}
