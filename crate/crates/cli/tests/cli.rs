use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const LIGHT_CONFIG: &str = "[[grid]]\n[grid.learn]\nepochs = 2\n";

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_publicspeak")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, cities: &str, meetings: &str) {
    ok(&["synth", "--cities", cities, "--meetings", meetings, "--seed", "3", "-o", p(dir)]);
}

#[test]
fn synth_writes_the_default_corpus() {
    let tmp = TempDir::new().unwrap();
    synth(tmp.path(), "7", "20");
    let corpus: serde_json::Value = serde_json::from_slice(&fs::read(tmp.path().join("corpus.json")).unwrap()).unwrap();
    assert_eq!(corpus["meetings"].as_array().unwrap().len(), 140);
    let tables = fs::read_to_string(tmp.path().join("tables.jsonl")).unwrap();
    assert_eq!(tables.lines().count(), 140);
    assert_eq!(fs::read_dir(tmp.path().join("locales")).unwrap().count(), 7);
}

#[test]
fn eval_and_infer_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(&d.join("data"), "2", "8");
    fs::write(d.join("light.toml"), LIGHT_CONFIG).unwrap();
    let corpus = d.join("data/corpus.json");
    let locales = d.join("data/locales");
    let tables = d.join("data/tables.jsonl");
    for run in ["a", "b"] {
        let out = d.join(run);
        ok(&[
            "eval", "--corpus", p(&corpus), "--locales", p(&locales), "--tables", p(&tables),
            "--config", p(&d.join("light.toml")), "-o", p(&out),
        ]);
        ok(&[
            "infer", "--corpus", p(&corpus), "--locales", p(&locales), "--tables", p(&tables),
            "-o", p(&out.join("infer.json")),
        ]);
    }
    for f in ["report.json", "report.txt", "predictions.csv", "infer.json"] {
        let a = fs::read(d.join("a").join(f)).unwrap();
        let b = fs::read(d.join("b").join(f)).unwrap();
        assert!(!a.is_empty(), "{f} is empty");
        assert_eq!(a, b, "{f} differs between runs");
    }
    let table = fs::read_to_string(d.join("a/report.txt")).unwrap();
    let rendered = ok(&["report", p(&d.join("a/report.json"))]);
    assert_eq!(String::from_utf8(rendered.stdout).unwrap(), table);
}

#[test]
fn binary_inference_never_outputs_hearing_remarks() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "2", "2");
    let out = ok(&[
        "infer", "--corpus", p(&d.join("corpus.json")), "--locales", p(&d.join("locales")),
        "--tables", p(&d.join("tables.jsonl")), "--arity", "2",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let meetings = v["meetings"].as_array().unwrap();
    assert_eq!(meetings.len(), 4);
    for m in meetings {
        for u in m["utterances"].as_array().unwrap() {
            assert_ne!(u["label"], "PH");
        }
    }
}

#[test]
fn loco_needs_two_cities() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "1", "4");
    let out = run(&[
        "eval", "--protocol", "loco", "--corpus", p(&d.join("corpus.json")), "--locales", p(&d.join("locales")),
        "--tables", p(&d.join("tables.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn usage_errors_exit_with_status_two() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "1", "1");
    let corpus = d.join("corpus.json");
    let missing = run(&["infer", "--corpus", p(&corpus), "--locales", p(&d.join("nope"))]);
    assert_eq!(missing.status.code(), Some(2));
    let bad_protocol = run(&["eval", "--protocol", "kfold", "--corpus", p(&corpus), "--locales", p(&d.join("locales"))]);
    assert_eq!(bad_protocol.status.code(), Some(2));
    let bad_jobs = run(&["--jobs", "0", "report", p(&corpus)]);
    assert_eq!(bad_jobs.status.code(), Some(2));
    let not_a_report = run(&["report", p(&corpus)]);
    assert_eq!(not_a_report.status.code(), Some(2));
}

#[test]
fn ingest_cleans_and_groups_segments() {
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    let raw = d.join("raw");
    fs::create_dir(&raw).unwrap();

    let empty = ok(&["ingest", p(&raw)]);
    let v: serde_json::Value = serde_json::from_slice(&empty.stdout).unwrap();
    assert_eq!(v["meetings"].as_array().unwrap().len(), 0);

    fs::write(
        raw.join("m1.json"),
        r#"{"meeting_id": "m1", "city": "x", "held_at": "2024-03-05T18:00:00", "segments": [
            {"speaker_id": "chair", "text": "Call to order."},
            {"speaker_id": "chair", "text": "Roll call please."},
            {"speaker_id": "chair", "text": "Thanks for watching!"},
            {"speaker_id": "resident", "text": "I live on Elm Street."}
        ]}"#,
    )
    .unwrap();
    let out = ok(&["ingest", p(&raw), "-o", p(&d.join("corpus.json"))]);
    assert!(out.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_slice(&fs::read(d.join("corpus.json")).unwrap()).unwrap();
    let utts = v["meetings"][0]["utterances"].as_array().unwrap();
    assert_eq!(utts.len(), 2);
    assert_eq!(utts[0]["text"], "Call to order. Roll call please.");

    fs::write(raw.join("m2.json"), "{ not json").unwrap();
    assert_eq!(run(&["ingest", p(&raw)]).status.code(), Some(2));
}

#[test]
fn guide_config_example_is_accepted() {
    let guide = fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../book/src/cli.md")).unwrap();
    let start = guide.find("```toml\n").expect("toml example") + "```toml\n".len();
    let example = &guide[start..start + guide[start..].find("```").unwrap()];
    let tmp = TempDir::new().unwrap();
    let d = tmp.path();
    synth(d, "1", "4");
    fs::write(d.join("cfg.toml"), example).unwrap();
    ok(&[
        "--config", p(&d.join("cfg.toml")), "eval", "--no-learn", "--corpus", p(&d.join("corpus.json")),
        "--locales", p(&d.join("locales")), "--tables", p(&d.join("tables.jsonl")),
    ]);
}
