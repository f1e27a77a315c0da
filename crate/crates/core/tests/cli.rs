mod common;

use std::path::Path;

use common::{cli_ok, dir_contents, run_cli};
use serde_json::Value;

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn generate_is_byte_identical_across_runs_and_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    let dirs: Vec<_> = ["a", "b", "c"].iter().map(|n| tmp.path().join(n)).collect();
    let base = [
        "generate",
        "--preset",
        "simple",
        "--seed",
        "7",
        "--dialogues",
        "400",
    ];
    cli_ok(&[&base[..], &["--out", p(&dirs[0])]].concat());
    cli_ok(&[&base[..], &["--out", p(&dirs[1]), "--jobs", "1"]].concat());
    cli_ok(&[&base[..], &["--out", p(&dirs[2]), "--jobs", "4"]].concat());
    let a = dir_contents(&dirs[0]);
    assert_eq!(
        a.keys().collect::<Vec<_>>(),
        ["manifest.json", "test.jsonl", "train.jsonl", "val.jsonl"]
    );
    assert_eq!(a, dir_contents(&dirs[1]));
    assert_eq!(a, dir_contents(&dirs[2]));
}

#[test]
fn seed_environment_overrides_the_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    cli_ok(&[
        "generate",
        "--preset",
        "simple",
        "--dialogues",
        "50",
        "--seed",
        "3",
        "--out",
        p(&a),
    ]);
    let out = run_cli(
        &[
            "generate",
            "--preset",
            "simple",
            "--dialogues",
            "50",
            "--seed",
            "1",
            "--out",
            p(&b),
        ],
        &[("DIALOFORGE_SEED", "3")],
    );
    assert!(out.status.success());
    assert_eq!(dir_contents(&a), dir_contents(&b));
    assert_eq!(manifest(&b)["seed"], 3);
}

#[test]
fn hard_preset_manifest_reports_split_sizes() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("hard");
    cli_ok(&["generate", "--preset", "hard", "--out", p(&dir)]);
    let m = manifest(&dir);
    let splits = &m["dataset"]["splits"];
    assert_eq!(splits["train"], 8438);
    assert_eq!(splits["val"], 1000);
    assert_eq!(splits["test"], 1000);
    assert_eq!(m["dataset"]["generator"]["n_dialogues"], 10438);
}

#[test]
fn full_pipeline_leaves_inputs_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    let t = |n: &str| tmp.path().join(n);
    cli_ok(&[
        "generate",
        "--preset",
        "medium",
        "--dialogues",
        "300",
        "--seed",
        "2",
        "--out",
        p(&t("clean")),
    ]);
    let clean = dir_contents(&t("clean"));

    cli_ok(&[
        "inject",
        "--in",
        p(&t("clean")),
        "--p-intent",
        "0.1",
        "--p-action",
        "0.1",
        "--p-slot",
        "0.1",
        "--mode",
        "mixed",
        "--splits",
        "train",
        "--seed",
        "4",
        "--out",
        p(&t("noisy")),
    ]);
    assert_eq!(dir_contents(&t("clean")), clean);
    let noisy = dir_contents(&t("noisy"));
    assert!(noisy.contains_key("perturbations.jsonl"));
    assert_eq!(noisy["test.jsonl"], clean["test.jsonl"]);
    assert_ne!(noisy["train.jsonl"], clean["train.jsonl"]);

    cli_ok(&["encode", "--in", p(&t("noisy")), "--out", p(&t("enc")), "--csv"]);
    assert_eq!(dir_contents(&t("noisy")), noisy);
    let enc = dir_contents(&t("enc"));
    for f in [
        "encoded/layout.json",
        "encoded/train.bin",
        "encoded/test.bin",
        "encoded/val.csv",
        "perturbations.jsonl",
    ] {
        assert!(enc.contains_key(f), "missing {f}");
    }

    for model in ["memorizer", "linear"] {
        let file = t(&format!("{model}.json"));
        cli_ok(&[
            "train",
            "--model",
            model,
            "--in",
            p(&t("enc")),
            "--out",
            p(&file),
            "--epochs",
            "5",
        ]);
        let out = cli_ok(&[
            "eval",
            "--model",
            p(&file),
            "--in",
            p(&t("enc")),
            "--split",
            "test",
            "--format",
            "json",
        ]);
        let report: Value = serde_json::from_slice(&out.stdout).unwrap();
        let f1 = report["micro"]["f1"].as_f64().unwrap();
        assert!(f1 > 0.8, "{model}: {f1}");
        let pretty = cli_ok(&["eval", "--model", p(&file), "--in", p(&t("enc"))]);
        assert!(String::from_utf8_lossy(&pretty.stdout).contains("micro"));
    }
    assert_eq!(dir_contents(&t("enc")), enc);

    // Training straight from the unencoded directory gives the same model.
    let direct = t("direct.json");
    cli_ok(&[
        "train",
        "--model",
        "memorizer",
        "--in",
        p(&t("noisy")),
        "--out",
        p(&direct),
    ]);
    let a: Value = serde_json::from_slice(&std::fs::read(&direct).unwrap()).unwrap();
    let b: Value = serde_json::from_slice(&std::fs::read(t("memorizer.json")).unwrap()).unwrap();
    assert_eq!(a["model"], b["model"]);
}

#[test]
fn coarse_sweep_has_three_rows_per_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("s1");
    cli_ok(&[
        "sweep",
        "--preset",
        "simple",
        "--rates",
        "0,0.5,1.0",
        "--models",
        "memorizer",
        "--seeds",
        "2",
        "--out",
        p(&dir),
    ]);
    let csv = std::fs::read_to_string(dir.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = |name: &str| header.iter().position(|h| *h == name).unwrap();
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    for seed in ["0", "1"] {
        let f1: Vec<f64> = rows
            .iter()
            .filter(|r| r[col("seed")] == seed)
            .map(|r| r[col("micro_f1")].parse().unwrap())
            .collect();
        assert_eq!(f1.len(), 3);
        assert!(f1.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {f1:?}");
    }
    for f in ["manifest.json", "summary.json", "sweep_long.csv"] {
        assert!(dir.join(f).exists(), "missing {f}");
    }
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"domains":[{"name":"x","topics":[{"name":"t","slots":[
            {"name":"a","category":"optional","values":["1"]}]}]}]}"#,
    )
    .unwrap();
    let out = run_cli(&["validate", p(&bad)], &[]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());

    let out = run_cli(&["validate", p(&tmp.path().join("missing.json"))], &[]);
    assert_eq!(out.status.code(), Some(2));

    let missing = tmp.path().join("nope");
    let out = run_cli(
        &["encode", "--in", p(&missing), "--out", p(&tmp.path().join("o"))],
        &[],
    );
    assert_eq!(out.status.code(), Some(2));

    for args in [&["frobnicate"][..], &["generate", "--preset", "simple"], &[]] {
        let out = run_cli(args, &[]);
        assert_eq!(out.status.code(), Some(64), "{args:?}");
    }
    let out = run_cli(
        &[
            "generate",
            "--preset",
            "simple",
            "--p-chitchat",
            "1.5",
            "--out",
            p(&tmp.path().join("g")),
        ],
        &[],
    );
    assert_eq!(out.status.code(), Some(1));
}
