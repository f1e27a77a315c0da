use std::collections::BTreeSet;

use dialoforge::encoding::{
    decode_state, decode_target, encode_dataset, encode_dialogue, find_conflicts, read_encoded_dir,
    write_encoded_dir, Layout, SlotRef,
};
use dialoforge::engine::{generate_dataset, generate_traced, GeneratorConfig, TopicFrame};
use dialoforge::ontology::{IntentKind, Ontology};
use dialoforge::presets::{preset_config, preset_ontology};
use dialoforge::rng::derive_seed;
use proptest::prelude::*;

fn slot_refs<'a>(
    frame: &'a TopicFrame,
    keep: impl Fn(&str) -> bool + 'a,
) -> BTreeSet<(String, String, String)> {
    frame
        .fills
        .keys()
        .filter(|s| keep(s))
        .map(|s| (frame.domain.clone(), frame.topic.clone(), s.clone()))
        .collect()
}

fn as_set(refs: &[SlotRef]) -> BTreeSet<(String, String, String)> {
    refs.iter()
        .map(|r| (r.domain.clone(), r.topic.clone(), r.slot.clone()))
        .collect()
}

/// Compare the decoded states of one generated dialogue with its trace.
fn check_against_trace(ont: &Ontology, cfg: &GeneratorConfig, seed: u64, window: usize) {
    let traced = generate_traced(ont, cfg, seed).unwrap();
    let d = &traced.dialogue;
    let layout = Layout::new(ont, window).unwrap();
    let rows = encode_dialogue(d, ont, &layout).unwrap();
    assert_eq!(rows.len(), d.turns.len());
    for (t, (state, target)) in rows.iter().enumerate() {
        let s = decode_state(state, &layout).unwrap();
        let stack = &traced.stacks[t];
        let turn = &d.turns[t];

        let filled = stack
            .top()
            .map(|f| slot_refs(f, |slot| f.fills[slot].is_some()))
            .unwrap_or_default();
        assert_eq!(as_set(&s.filled), filled, "seed {seed} turn {t}");

        // Changed: every slot of a frame that just became the top, else the
        // slots whose value differs from the previous turn.
        let prev = (t > 0).then(|| &traced.stacks[t - 1]);
        let pushed = turn
            .user_acts
            .iter()
            .any(|a| a.intent == IntentKind::InformIntent);
        let popped = prev.is_some_and(|p| p.depth() > stack.depth());
        let changed = match (stack.top(), prev.and_then(|p| p.top())) {
            (Some(top), Some(before)) if !pushed && !popped => {
                slot_refs(top, |slot| top.fills[slot] != before.fills[slot])
            }
            (Some(top), _) => slot_refs(top, |_| true),
            (None, _) => BTreeSet::new(),
        };
        assert_eq!(as_set(&s.changed), changed, "seed {seed} turn {t}");

        let intents: BTreeSet<IntentKind> = turn.user_acts.iter().map(|a| a.intent).collect();
        assert_eq!(s.intents.iter().copied().collect::<BTreeSet<_>>(), intents);

        for k in 0..window {
            let expected: BTreeSet<String> = t
                .checked_sub(k + 1)
                .map(|p| d.turns[p].system_acts.iter().cloned().collect())
                .unwrap_or_default();
            assert_eq!(
                s.previous_actions[k].iter().cloned().collect::<BTreeSet<_>>(),
                expected
            );
        }
        assert_eq!(s.deep_stack, stack.depth() > 1);
        assert_eq!(s.phase.is_some(), !stack.is_empty());

        let gold: BTreeSet<String> = turn.system_acts.iter().cloned().collect();
        let decoded: BTreeSet<String> = decode_target(target, &layout).unwrap().into_iter().collect();
        assert_eq!(decoded, gold);
    }
}

#[test]
fn decoded_states_follow_the_engine_trace() {
    for preset in ["simple", "medium", "hard"] {
        let ont = preset_ontology(preset).unwrap();
        let cfg = preset_config(preset).unwrap();
        for i in 0..100 {
            check_against_trace(&ont, &cfg, derive_seed(21, preset, i), 1 + (i as usize % 3));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn any_dialogue_decodes_to_its_trace(seed in any::<u64>(), window in 1usize..4) {
        let ont = preset_ontology("hard").unwrap();
        check_against_trace(&ont, &preset_config("hard").unwrap(), seed, window);
    }
}

#[test]
fn one_pair_per_turn() {
    let ont = preset_ontology("simple").unwrap();
    let cfg = preset_config("simple").unwrap();
    let ds = generate_dataset(&ont, &cfg).unwrap();
    assert_eq!(ds.len(), 2000);
    let enc = encode_dataset(&ds, &ont, 1).unwrap();
    let pairs = enc.train.len() + enc.val.len() + enc.test.len();
    assert_eq!(pairs, ds.total_turns());
    for split in [&enc.train, &enc.val, &enc.test] {
        assert!(split.states.iter().all(|s| s.len() == enc.layout.width()));
        assert!(split.targets.iter().all(|t| t.len() == enc.layout.target_width()));
    }
}

#[test]
fn events_off_states_determine_actions() {
    for preset in ["simple", "medium", "hard"] {
        let ont = preset_ontology(preset).unwrap();
        let cfg = GeneratorConfig {
            n_dialogues: 1500,
            ..preset_config(preset).unwrap().events_off()
        };
        let enc = encode_dataset(&generate_dataset(&ont, &cfg).unwrap(), &ont, 1).unwrap();
        assert!(find_conflicts(&enc.train).is_empty(), "{preset}");
    }
}

#[test]
fn encoded_directory_round_trip() {
    let ont = preset_ontology("medium").unwrap();
    let cfg = GeneratorConfig {
        n_dialogues: 200,
        ..preset_config("medium").unwrap()
    };
    let enc = encode_dataset(&generate_dataset(&ont, &cfg).unwrap(), &ont, 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_encoded_dir(dir.path(), &enc).unwrap();
    let back = read_encoded_dir(dir.path()).unwrap();
    assert_eq!(back.layout, enc.layout);
    assert_eq!(back.ontology_hash, enc.ontology_hash);
    assert_eq!(back.train, enc.train);
    assert_eq!(back.val, enc.val);
    assert_eq!(back.test, enc.test);
}
