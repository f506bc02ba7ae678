use std::path::Path;
use std::process::{Command, Output};

use aggrolab_core::corpus::{write_canonical, LabelSchema};
use aggrolab_core::synthetic::training_pool;

fn aggrolab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aggrolab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("AGGROLAB_RESOURCES")
        .env_remove("RUST_LOG")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_exit(o: &Output, code: i32) {
    assert_eq!(
        o.status.code(),
        Some(code),
        "stdout:\n{}\nstderr:\n{}",
        stdout(o),
        stderr(o)
    );
}

const TOY_CONFIG: &str = r#"{
  "data": {"train": "pool.csv", "validation_fraction": 0.2, "split_seed": 3},
  "model": {
    "dpcnn": {"filters": 8, "blocks": 2},
    "drnn": {"window": 4, "hidden": 6},
    "pooled_bilstm": {"hidden": 6}
  },
  "train": {"epochs": 3, "batch_size": 16, "lr": 0.003, "seed": 1}
}"#;

fn toy_workspace() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_canonical(
        &dir.path().join("pool.csv"),
        &training_pool(2),
        &LabelSchema::trac(),
    )
    .unwrap();
    std::fs::write(dir.path().join("run.json"), TOY_CONFIG).unwrap();
    dir
}

#[test]
fn ingest_writes_canonical_csv() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("raw.csv"),
        "facebook_1,you idiot,OAG\ntwitter_2,\"sure, genius\",CAG\nfacebook_3,have a nice day,NAG\nfb_4,unlabelled\n",
    )
    .unwrap();
    let o = aggrolab(
        &[
            "ingest",
            "--format",
            "trac_csv",
            "--in",
            "raw.csv",
            "--out",
            "canon.csv",
        ],
        dir.path(),
    );
    assert_exit(&o, 0);
    assert!(stdout(&o).contains("4 documents"));
    let text = std::fs::read_to_string(dir.path().join("canon.csv")).unwrap();
    assert_eq!(
        text,
        "id,text,label,source\nfacebook_1,you idiot,OAG,facebook\ntwitter_2,\"sure, genius\",CAG,twitter\nfacebook_3,have a nice day,NAG,facebook\nfb_4,unlabelled,,facebook\n"
    );

    std::fs::write(
        dir.path().join("k.jsonl"),
        "{\"content\": \"go away\", \"annotation\": {\"label\": [\"1\"]}}\n",
    )
    .unwrap();
    let o = aggrolab(
        &[
            "ingest",
            "--format",
            "kaggle_jsonl",
            "--in",
            "k.jsonl",
            "--out",
            "k.csv",
        ],
        dir.path(),
    );
    assert_exit(&o, 0);
    assert!(std::fs::read_to_string(dir.path().join("k.csv"))
        .unwrap()
        .contains("go away,AGG,twitter"));
}

#[test]
fn features_csv_has_an_id_and_24_columns() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("docs.csv"),
        "id,text,label,source\n\
         a,You are SO stupid!!! :(,OAG,facebook\n\
         b,\"oh sure, what a genius :)\",CAG,twitter\n\
         c,thanks friend <3,NAG,facebook\n\
         d,I will kill you,OAG,twitter\n\
         e,http://example.com,,other\n",
    )
    .unwrap();
    let o = aggrolab(
        &["features", "--in", "docs.csv", "--out", "f.csv"],
        dir.path(),
    );
    assert_exit(&o, 0);
    let text = std::fs::read_to_string(dir.path().join("f.csv")).unwrap();
    let rows: Vec<Vec<&str>> = text.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.len() == 25));
    assert_eq!(rows[0][0], "id");
    assert_eq!(rows[1][0], "a");
    assert!(rows[1..]
        .iter()
        .all(|r| r[1..].iter().all(|v| v.parse::<f64>().unwrap().is_finite())));

    let o = aggrolab(
        &[
            "features",
            "--in",
            "docs.csv",
            "--out",
            "k.csv",
            "--profile",
            "kaggle",
        ],
        dir.path(),
    );
    assert_exit(&o, 0);
    let text = std::fs::read_to_string(dir.path().join("k.csv")).unwrap();
    assert!(text.lines().all(|l| l.split(',').count() == 21));
}

#[test]
fn train_evaluate_and_predict_on_toy_bundles() {
    let dir = toy_workspace();
    let o = aggrolab(
        &[
            "train", "--config", "run.json", "--arch", "all", "--out", "seq",
        ],
        dir.path(),
    );
    assert_exit(&o, 0);
    for arch in ["dpcnn", "drnn", "pooled_bilstm"] {
        assert!(dir.path().join(format!("seq/{arch}.aggr")).exists());
        let log =
            std::fs::read_to_string(dir.path().join(format!("seq/{arch}_log.jsonl"))).unwrap();
        assert_eq!(log.lines().count(), 3);
    }
    assert!(dir.path().join("seq/run_config.json").exists());

    let bundles = "seq/dpcnn.aggr,seq/drnn.aggr,seq/pooled_bilstm.aggr";
    let o = aggrolab(
        &[
            "predict",
            "--bundles",
            bundles,
            "--text",
            "shut up you stupid idiot, I hate you",
        ],
        dir.path(),
    );
    assert_exit(&o, 0);
    let out = stdout(&o);
    let fields: Vec<&str> = out.trim_end().split('\t').collect();
    assert_eq!(fields.len(), 4, "{out}");
    assert!(["OAG", "CAG", "NAG"].contains(&fields[0]));
    let probs: Vec<f64> = fields[1..]
        .iter()
        .map(|f| f.split('=').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-5);

    let o = aggrolab(
        &[
            "evaluate",
            "--bundles",
            bundles,
            "--test",
            "pool.csv",
            "--report",
            "r.json",
        ],
        dir.path(),
    );
    assert_exit(&o, 0);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["documents"], 90);
    assert!(report["weighted_f1"].as_f64().unwrap() <= 1.0);
    let confusion = std::fs::read_to_string(dir.path().join("r.confusion.csv")).unwrap();
    assert!(confusion.starts_with("gold\\predicted,OAG,CAG,NAG\n"));
    assert_eq!(confusion.lines().count(), 4);

    let o = aggrolab(
        &[
            "train",
            "--config",
            "run.json",
            "--out",
            "par",
            "--parallel",
        ],
        dir.path(),
    );
    assert_exit(&o, 0);
    for arch in ["dpcnn", "drnn", "pooled_bilstm"] {
        let a = std::fs::read(dir.path().join(format!("seq/{arch}.aggr"))).unwrap();
        let b = std::fs::read(dir.path().join(format!("par/{arch}.aggr"))).unwrap();
        assert_eq!(a, b, "{arch}: concurrent training changed the weights");
    }

    let o = aggrolab(
        &[
            "train", "--config", "run.json", "--arch", "drnn", "--out", "seed9", "--seed", "9",
        ],
        dir.path(),
    );
    assert_exit(&o, 0);
    let a = std::fs::read(dir.path().join("seq/drnn.aggr")).unwrap();
    let b = std::fs::read(dir.path().join("seed9/drnn.aggr")).unwrap();
    assert_ne!(a, b);
    assert!(!dir.path().join("seed9/dpcnn.aggr").exists());
}

#[test]
fn gradcheck_prints_a_passing_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = aggrolab(&["gradcheck"], dir.path());
    assert_exit(&o, 0);
    let out = stdout(&o);
    let rows: Vec<&str> = out
        .lines()
        .skip(1)
        .filter(|l| l.ends_with("ok") || l.ends_with("FAIL"))
        .collect();
    assert_eq!(rows.len(), 100);
    for row in rows {
        let err: f64 = row.split_whitespace().nth(2).unwrap().parse().unwrap();
        assert!(err < 1e-4, "{row}");
    }
}

#[test]
fn errors_carry_exit_codes_and_a_code_prefix() {
    let dir = toy_workspace();
    let p = dir.path();
    std::fs::write(p.join("unknown_key.json"), r#"{"train": {"epoch": 3}}"#).unwrap();
    std::fs::write(p.join("bad.aggr"), b"not a bundle").unwrap();
    let cases: [(&[&str], i32); 9] = [
        (&["frobnicate"], 1),
        (&["train", "--config", "unknown_key.json"], 1),
        (&["train", "--config", "missing.json"], 1),
        (&["train", "--arch", "cnn", "--train", "pool.csv"], 1),
        (&["train", "--train", "pool.csv", "--epochs", "0"], 1),
        (&["train"], 1),
        (&["predict", "--bundles", "bad.aggr", "--text", "hi"], 1),
        (
            &[
                "evaluate",
                "--bundles",
                "none.aggr",
                "--test",
                "pool.csv",
                "--report",
                "r.json",
            ],
            1,
        ),
        (&["ingest", "--in", "nope.csv", "--out", "x.csv"], 1),
    ];
    for (args, code) in cases {
        let o = aggrolab(args, p);
        assert_exit(&o, code);
        assert!(
            stderr(&o).starts_with(&format!("code={code} ")),
            "{args:?}: {}",
            stderr(&o)
        );
    }
    let o = aggrolab(
        &[
            "ingest",
            "--in",
            "pool.csv",
            "--out",
            "missing_dir/x.csv",
            "--format",
            "canonical_csv",
        ],
        p,
    );
    assert_exit(&o, 2);
    assert!(stderr(&o).starts_with("code=2 runtime:"));
}

#[test]
fn help_lists_every_flag_with_its_default() {
    let dir = tempfile::tempdir().unwrap();
    let o = aggrolab(&["train", "--help"], dir.path());
    assert_exit(&o, 0);
    let help = stdout(&o);
    for flag in [
        "--config",
        "--arch",
        "--out",
        "--parallel",
        "--epochs",
        "--seed",
        "--batch-size",
        "--lr",
        "--patience",
        "--resources",
    ] {
        let line = help
            .lines()
            .find(|l| l.contains(flag))
            .unwrap_or_else(|| panic!("{flag} missing"));
        assert!(line.contains("default") || flag == "--parallel", "{line}");
    }
    let o = aggrolab(&["gradcheck", "--help"], dir.path());
    assert!(stdout(&o).contains("[default: 5]"));
}
