use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use anion_forge::io::KgRecord;
use serde_json::Value;

fn forge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_anion-forge"))
        .current_dir(dir)
        .env("ANION_FORGE_LOG", "warn")
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_kg(path: &Path, rows: &[(&str, &str, &str)]) {
    let lines: Vec<String> = rows
        .iter()
        .map(|(h, r, t)| {
            serde_json::to_string(&KgRecord {
                head: h.to_string(),
                relation: r.to_string(),
                tail: t.to_string(),
                split: "train".into(),
                polarity: "affirmative".into(),
                source_head: None,
                cue: None,
            })
            .unwrap()
        })
        .collect();
    fs::write(path, lines.join("\n") + "\n").unwrap();
}

fn read_jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

/// synth + pipeline + oracle labels inside `dir`; returns the run directory.
fn planted_run(dir: &Path, extra: &[&str]) -> std::path::PathBuf {
    let o = forge(dir, &["synth", "--out", ".", "--pairs", "40"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut args = vec!["pipeline", "--config", "config.json"];
    args.extend_from_slice(extra);
    let o = forge(dir, &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    dir.join("run")
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["--help"][..], &["--version"], &["pipeline", "--help"]] {
        assert_eq!(code(&forge(dir.path(), args)), 0, "{args:?}");
    }
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.jsonl"), "").unwrap();
    let o = forge(
        dir.path(),
        &["partition", "--candidates", "c.jsonl", "--out", "p.jsonl", "--threshold", "1.5"],
    );
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("outside [0, 1]"), "{}", stderr(&o));

    let o = forge(dir.path(), &["negate", "--out", "n.jsonl", "--no-such-flag"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));

    assert_eq!(code(&forge(dir.path(), &["transmogrify"])), 1);

    write_kg(&dir.path().join("kg.jsonl"), &[("PersonX plays the piano", "xAttr", "musical")]);
    let o = forge(dir.path(), &["negate", "--kg", "kg.jsonl", "--out", "n.jsonl"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--seed"), "{}", stderr(&o));

    let o = forge(dir.path(), &["negate", "--seed", "1", "--out", "n.jsonl"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("--kg"), "{}", stderr(&o));

    fs::write(dir.path().join("bad.json"), r#"{"seed": 1, "beam": 0}"#).unwrap();
    let o = forge(dir.path(), &["negate", "--config", "bad.json", "--kg", "kg.jsonl", "--out", "n.jsonl"]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn data_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("kg.jsonl"), "{\"head\": \"PersonX runs\"}\n").unwrap();
    let o = forge(dir.path(), &["negate", "--kg", "kg.jsonl", "--seed", "1", "--out", "n.jsonl"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("kg.jsonl:1:"), "{}", stderr(&o));

    let o = forge(dir.path(), &["negate", "--kg", "missing.jsonl", "--seed", "1", "--out", "n.jsonl"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn negate_writes_negations_and_a_rejection_report() {
    let dir = tempfile::tempdir().unwrap();
    write_kg(
        &dir.path().join("in.jsonl"),
        &[
            ("X plays the piano", "xAttr", "musical"),
            ("PersonX buys some shoes", "xWant", "to wear them"),
            ("PersonX never eats meat", "xAttr", "vegetarian"),
        ],
    );
    fs::write(
        dir.path().join("cues.tsv"),
        "cue\tcategory\tinsertion_rule\nnot\tsingle_word\tafter_subject\nnever\tsingle_word\tbefore_main_verb\n",
    )
    .unwrap();
    let o = forge(
        dir.path(),
        &["negate", "--kg", "in.jsonl", "--cues", "cues.tsv", "--seed", "7", "--out", "neg.jsonl"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let neg = read_jsonl(&dir.path().join("neg.jsonl"));
    let heads: Vec<&str> = neg.iter().map(|v| v["head"].as_str().unwrap()).collect();
    assert!(heads.contains(&"PersonX does not play the piano"), "{heads:?}");
    assert!(heads.contains(&"PersonX never buys some shoes"), "{heads:?}");
    assert!(neg.iter().all(|v| v["config_hash"].is_string()));

    let rejections = read_jsonl(&dir.path().join("neg.rejections.jsonl"));
    assert!(!rejections.is_empty());
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("neg.report.json")).unwrap()).unwrap();
    assert_eq!(report["produced"].as_u64().unwrap() as usize, neg.len());
    assert_eq!(report["rejected"].as_u64().unwrap() as usize, rejections.len());

    let o = forge(
        dir.path(),
        &["negate", "--kg", "in.jsonl", "--seed", "7", "--contractions", "--format", "tsv", "--out", "neg.tsv"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let tsv = fs::read_to_string(dir.path().join("neg.tsv")).unwrap();
    assert!(tsv.contains("PersonX doesn't play the piano"), "{tsv}");
}

#[test]
fn eval_refuses_partitions_from_another_config() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = planted_run(d, &[]);
    for v in read_jsonl(&run.join("partitions.jsonl")) {
        assert!(v["config_hash"].is_string());
    }
    let o = forge(d, &["synth", "--out", ".", "--pairs", "40", "--candidates", "run/candidates.jsonl"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let eval = |extra: &[&str]| {
        let mut args = vec![
            "eval", "--config", "config.json", "--partitions", "run/partitions.jsonl", "--labels", "labels.tsv",
            "--out", "e/report.json",
        ];
        args.extend_from_slice(extra);
        forge(d, &args)
    };
    let o = eval(&[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("valid"));
    // eval-only parameters are outside the hash
    assert_eq!(code(&eval(&["--permutations", "200", "--alpha", "0.01"])), 0);

    let o = eval(&["--threshold", "0.5"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("hash mismatch"), "{}", stderr(&o));
    assert_eq!(code(&eval(&["--threshold", "0.5", "--force"])), 0);
}

#[test]
fn stages_chain_by_hand() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&forge(d, &["synth", "--out", ".", "--pairs", "30"])), 0);
    let steps: [&[&str]; 5] = [
        &["contrast", "--config", "config.json", "--out", "s/dataset.jsonl"],
        &["disc-train", "--config", "config.json", "--dataset", "s/dataset.jsonl", "--out", "s/model.json"],
        &["generate", "--config", "config.json", "--out", "s/candidates.jsonl"],
        &["partition", "--config", "config.json", "--candidates", "s/candidates.jsonl", "--model", "s/model.json", "--out", "s/partitions.jsonl"],
        &["synth", "--out", "s", "--pairs", "30", "--candidates", "s/candidates.jsonl"],
    ];
    for args in steps {
        let o = forge(d, args);
        assert_eq!(code(&o), 0, "{args:?}: {}", stderr(&o));
    }
    let o = forge(
        d,
        &["eval", "--config", "config.json", "--partitions", "s/partitions.jsonl", "--labels", "s/labels.tsv", "--out", "s/report.json"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("s/report.json")).unwrap()).unwrap();
    assert!(report["config_hash"].is_string());
    assert!(d.join("s/report.txt").exists());

    fs::write(
        d.join("sentences.jsonl"),
        "{\"sentence\": \"PersonX holds a0. PersonX is seen as a1.\"}\n\n{\"sentence\": \"PersonX runs.\"}\n",
    )
    .unwrap();
    let o = forge(
        d,
        &["disc-apply", "--config", "config.json", "--model", "s/model.json", "--input", "sentences.jsonl", "--out", "scored.jsonl"],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let scored = read_jsonl(&d.join("scored.jsonl"));
    assert_eq!(scored.len(), 2);
    for v in &scored {
        let p = v["probability"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
        assert_eq!(v["valid"].as_bool().unwrap(), p >= 0.7);
    }
}

#[test]
fn external_scorer_and_generator() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    // even-length sentences are plausible
    let scorer = "awk '{ print (length($0) % 2 == 0) ? 0.9 : 0.1 }'";
    let generator = r#"while read -r line; do echo '{"candidates": [{"tail": "happy", "logp": -0.5}, {"tail": "very sad", "logp": -1.5, "ppl": 3.0}]}'; done"#;
    let run = planted_run(d, &["--external-scorer", scorer, "--external-generator", generator]);
    let parts = read_jsonl(&run.join("partitions.jsonl"));
    assert!(!parts.is_empty());
    for p in &parts {
        let all = p["all"].as_array().unwrap();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0]["tail"], "happy");
        assert_eq!(all[1]["ppl"].as_f64().unwrap(), 3.0);
        // one token plus the end marker
        assert!((all[0]["ppl"].as_f64().unwrap() - 0.25f64.exp()).abs() < 1e-12);
        let n = p["valid"].as_array().unwrap().len() + p["invalid"].as_array().unwrap().len();
        assert_eq!(n, 2);
        for c in all {
            let prob = c["probability"].as_f64().unwrap();
            assert!(prob == 0.9 || prob == 0.1);
        }
    }

    let o = forge(
        d,
        &["pipeline", "--config", "config.json", "--external-scorer", "echo nonsense", "--out", "broken"],
    );
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("external command"), "{}", stderr(&o));
}

#[test]
fn pipeline_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    planted_run(d, &["--out", "a"]);
    planted_run(d, &["--out", "b"]);
    let mut names: Vec<_> = fs::read_dir(d.join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8, "{names:?}");
    for n in names {
        assert_eq!(fs::read(d.join("a").join(&n)).unwrap(), fs::read(d.join("b").join(&n)).unwrap(), "{n:?}");
    }
}
