use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tablelogic::synth::read_dataset;
use tablelogic::table::adjacency_triplets;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tablelogic"));
    c.env_remove("TABLELOGIC_OUT_DIR").env("RUST_LOG", "warn");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let o = run(args);
    assert!(o.status.success(), "{args:?} failed:\n{}", String::from_utf8_lossy(&o.stderr));
    o
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn manifest(p: &Path) -> Value {
    let mut m = p.as_os_str().to_owned();
    m.push(".manifest.json");
    serde_json::from_slice(&std::fs::read(PathBuf::from(m)).unwrap()).unwrap()
}

fn generate(dir: &Path, name: &str, count: &str, seed: &str) -> PathBuf {
    let out = dir.join(name);
    ok(&["generate", "--rows", "2..4", "--cols", "2..4", "--span-prob", "0.1", "--count", count, "--seed", seed, "--out", s(&out)]);
    out
}

#[test]
fn generate_twice_gives_the_same_file() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.ndjson");
    let b = dir.path().join("b.ndjson");
    for p in [&a, &b] {
        let o = ok(&["generate", "--rows", "2..8", "--cols", "2..8", "--span-prob", "0.1", "--count", "50", "--seed", "7", "--out", s(p)]);
        assert!(String::from_utf8_lossy(&o.stdout).starts_with("50 records"));
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let m = manifest(&a);
    assert_eq!(m["command"], "generate");
    assert_eq!(m["seeds"][0], 7);
    ok(&["validate", "--input", s(&a), "--out", s(&dir.path().join("v.json"))]);
}

#[test]
fn bad_span_probability_is_rejected_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.ndjson");
    let o = run(&["generate", "--span-prob", "1.5", "--count", "3", "--seed", "1", "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn missing_checkpoint_is_a_clear_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.ndjson", "2", "1");
    let o = run(&["predict", "--ckpt", "missing.bin", "--data", s(&data), "--out", s(&dir.path().join("p.ndjson"))]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("missing.bin"), "{err}");
}

#[test]
fn eval_against_itself_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.ndjson", "20", "4");
    let out = dir.path().join("r.json");
    ok(&["eval", "--pred", s(&data), "--gt", s(&data), "--out", s(&out)]);
    let r: Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    for k in ["detection_f1", "adjacency_f1", "logical_accuracy", "teds", "bleu"] {
        assert_eq!(r[k].as_f64(), Some(1.0), "{k}");
    }
    let subset = dir.path().join("sub.json");
    ok(&["eval", "--pred", s(&data), "--gt", s(&data), "--metric", "teds,logical", "--out", s(&subset)]);
    let r: Value = serde_json::from_slice(&std::fs::read(&subset).unwrap()).unwrap();
    assert!(r.get("teds").is_some() && r.get("logical_accuracy").is_some());
    assert!(r.get("bleu").is_none());
}

#[test]
fn eval_reports_mismatched_ids() {
    let dir = tempfile::tempdir().unwrap();
    let a = generate(dir.path(), "a.ndjson", "3", "1");
    let text = std::fs::read_to_string(&a).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(0, 1);
    let b = dir.path().join("b.ndjson");
    std::fs::write(&b, lines.join("\n") + "\n").unwrap();
    let o = run(&["eval", "--pred", s(&a), "--gt", s(&b), "--out", s(&dir.path().join("r.json"))]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    let ids: Vec<String> = read_dataset(&a).unwrap().into_iter().take(2).map(|r| r.id.unwrap()).collect();
    assert!(ids.iter().all(|id| err.contains(id.as_str())), "{err}");
}

#[test]
fn convert_round_trips_and_lists_triplets() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.ndjson", "30", "9");
    let markup = dir.path().join("d.markup");
    let back = dir.path().join("back.ndjson");
    let again = dir.path().join("again.markup");
    ok(&["convert", "--input", s(&data), "--to", "markup", "--out", s(&markup)]);
    ok(&["convert", "--input", s(&markup), "--to", "json", "--out", s(&back)]);
    ok(&["convert", "--input", s(&back), "--to", "markup", "--out", s(&again)]);
    assert_eq!(std::fs::read(&markup).unwrap(), std::fs::read(&again).unwrap());
    let original = read_dataset(&data).unwrap();
    let rebuilt = read_dataset(&back).unwrap();
    for (a, b) in original.iter().zip(&rebuilt) {
        let mut la = a.table.locations();
        la.sort_by_key(|l| (l.start_row, l.start_col));
        assert_eq!(la, b.table.locations());
    }

    let adj = dir.path().join("adj.ndjson");
    ok(&["convert", "--input", s(&data), "--to", "adjacency", "--out", s(&adj)]);
    let rows: Vec<Value> =
        std::fs::read_to_string(&adj).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    for (row, rec) in rows.iter().zip(&original) {
        assert_eq!(row["triplets"], serde_json::to_value(adjacency_triplets(&rec.table)).unwrap());
    }
}

#[test]
fn malformed_markup_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.markup");
    std::fs::write(&bad, "<tr><td rowspan=\"1\" colspan=\"1\"></td></tr>\n<tr><td rowspan=\"x\"></td></tr>\n").unwrap();
    let o = run(&["convert", "--input", s(&bad), "--to", "json", "--out", s(&dir.path().join("o.ndjson"))]);
    assert!(!o.status.success());
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 2") || err.contains(":2"), "{err}");
}

#[test]
fn ablation_1a_drops_both_relation_losses() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.ndjson", "2", "2");
    let out = dir.path().join("m.json");
    ok(&["train", "--data", s(&data), "--seed", "0", "--ablation", "1a", "--d", "16", "--heads", "2", "--layers", "1", "--epochs", "1", "--out", s(&out)]);
    let m = &manifest(&out)["config"]["model"];
    assert_eq!(m["enable_inter"], false);
    assert_eq!(m["enable_intra"], false);
    assert_eq!(m["enable_stacking"], true);
}

#[test]
fn train_then_predict_memorizes() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.ndjson", "4", "3");
    let ckpt = dir.path().join("m.json");
    let pred = dir.path().join("p.ndjson");
    let report = dir.path().join("r.json");
    ok(&["train", "--data", s(&data), "--seed", "0", "--d", "32", "--heads", "4", "--ff", "64", "--epochs", "600", "--out", s(&ckpt)]);
    ok(&["predict", "--ckpt", s(&ckpt), "--data", s(&data), "--out", s(&pred)]);
    ok(&["eval", "--pred", s(&pred), "--gt", s(&data), "--metric", "logical", "--out", s(&report)]);
    let r: Value = serde_json::from_slice(&std::fs::read(&report).unwrap()).unwrap();
    let acc = r["logical_accuracy"].as_f64().unwrap();
    assert!(acc >= 0.99, "memorized accuracy {acc}");
}

#[test]
fn replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = generate(dir.path(), "d.ndjson", "3", "5");
    let ckpt = dir.path().join("m.json");
    ok(&["train", "--data", s(&data), "--seed", "1", "--d", "16", "--heads", "2", "--layers", "1", "--epochs", "3", "--out", s(&ckpt)]);
    let before = std::fs::read(&ckpt).unwrap();
    let metrics = std::fs::read(dir.path().join("m.json.metrics.ndjson")).unwrap();
    let mut m = ckpt.as_os_str().to_owned();
    m.push(".manifest.json");
    ok(&["replay", "--manifest", s(&PathBuf::from(m))]);
    assert_eq!(std::fs::read(&ckpt).unwrap(), before);
    assert_eq!(std::fs::read(dir.path().join("m.json.metrics.ndjson")).unwrap(), metrics);
}
