use std::collections::HashMap;
use std::path::Path;
use std::process::{Command, Output};

use hybrid_hash::hashcore::FeatureKey;
use hybrid_hash::FrequencyDictionary;

fn hhash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hhash"))
        .args(args)
        .output()
        .expect("spawn hhash")
}

fn ok(args: &[&str]) -> String {
    let out = hhash(args);
    assert!(
        out.status.success(),
        "hhash {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn csv_rows(text: &str) -> Vec<HashMap<String, String>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().unwrap().clone();
    r.records()
        .map(|rec| header.iter().map(String::from).zip(rec.unwrap().iter().map(String::from)).collect())
        .collect()
}

fn kv(line: &str) -> HashMap<String, String> {
    line.split_whitespace()
        .map(|f| {
            let (k, v) = f.split_once('=').unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn gen(dir: &Path, events: &str, seed: &str) {
    ok(&["gen", "--events", events, "--seed", seed, "--out-dir", p(dir), "--dense", "price"]);
}

#[test]
fn gen_is_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    gen(a.path(), "1000", "7");
    gen(b.path(), "1000", "7");
    for f in ["train.txt", "eval.txt", "manifest.txt"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn gen_zero_events_writes_headers_only() {
    let d = tempfile::tempdir().unwrap();
    gen(d.path(), "0", "7");
    for f in ["train.txt", "eval.txt"] {
        let text = std::fs::read_to_string(d.path().join(f)).unwrap();
        assert_eq!(text.lines().count(), 1, "{f}");
        assert!(text.starts_with('#'));
    }
}

#[test]
fn manifest_label_mean_matches_file() {
    let d = tempfile::tempdir().unwrap();
    gen(d.path(), "3000", "11");
    let manifest = std::fs::read_to_string(d.path().join("manifest.txt")).unwrap();
    let m: HashMap<_, _> = manifest
        .lines()
        .filter_map(|l| l.split_once('='))
        .collect();
    for split in ["train", "eval"] {
        let text = std::fs::read_to_string(d.path().join(format!("{split}.txt"))).unwrap();
        let labels: Vec<u32> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split('\t').next().unwrap().parse().unwrap())
            .collect();
        let mean = labels.iter().sum::<u32>() as f64 / labels.len() as f64;
        assert_eq!(m[format!("{split}_events").as_str()].parse::<usize>().unwrap(), labels.len());
        assert_eq!(m[format!("{split}_label_mean").as_str()].parse::<f64>().unwrap(), mean);
    }
}

#[test]
fn toy_dictionary() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("toy.txt");
    std::fs::write(&input, "1\ta:x\tb:z\n0\ta:x\ta:y\n1\ta:x\tb:z\n0\ta:y\ta:w\n").unwrap();
    let out = d.path().join("toy.dict");
    let args = ["build-dict", "--input", p(&input), "--k", "3", "--bits", "8", "--out", p(&out)];
    let report = kv(ok(&args).trim());
    assert_eq!(report["k"], "3");
    assert_eq!(report["distinct"], "4");
    // a:x 3, then a:y and b:z tied at 2 (namespace "a" sorts first), a:w 1.
    let dict = FrequencyDictionary::read_from(std::fs::read(&out).unwrap().as_slice()).unwrap();
    let expected: Vec<FeatureKey> = [("a", "x"), ("a", "y"), ("b", "z")]
        .iter()
        .map(|(n, v)| FeatureKey::new(*n, *v).unwrap())
        .collect();
    assert_eq!(dict.entries(), expected.as_slice());
    assert_eq!(report["coverage"].parse::<f64>().unwrap(), 7.0 / 8.0);

    let first = std::fs::read(&out).unwrap();
    ok(&args);
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn coverage_grows_with_k() {
    let d = tempfile::tempdir().unwrap();
    gen(d.path(), "2000", "3");
    let train = d.path().join("train.txt");
    let out = d.path().join("d.dict");
    let mut last = 0.0;
    for k in ["50", "100", "150", "200", "400"] {
        let r = kv(ok(&["build-dict", "--input", p(&train), "--k", k, "--out", p(&out)]).trim());
        let c: f64 = r["coverage"].parse().unwrap();
        assert!(c >= last, "k={k}: {c} < {last}");
        last = c;
    }
}

#[test]
fn analyze_rates() {
    let rows = csv_rows(&ok(&["analyze", "--n", "4e6", "--bits", "22"]));
    let rate = |s: &str| rows.iter().find(|r| r["scheme"] == s).unwrap()["collision_rate"].parse::<f64>().unwrap();
    assert_eq!(format!("{:.2}", rate("regular")), "0.34");
    assert_eq!(rate("frequency"), 0.0);
    let rows = csv_rows(&ok(&["analyze", "--n", "1000", "--bits", "8", "--k", "1000", "--schemes", "hybrid"]));
    assert_eq!(rows[0]["collision_rate"].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn simulate_emits_one_row_per_run() {
    let rows = csv_rows(&ok(&["simulate", "--schemes", "regular,hybrid", "--n", "500", "--bits", "10", "--k", "100", "--runs", "3"]));
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let full: u64 = r["empirical_full"].parse().unwrap();
        let occupied: u64 = r["occupied_slots"].parse().unwrap();
        let hashed = if r["scheme"] == "hybrid" { 400 } else { 500 };
        assert_eq!(full + occupied, hashed, "{r:?}");
    }
    let again = csv_rows(&ok(&["simulate", "--schemes", "regular,hybrid", "--n", "500", "--bits", "10", "--k", "100", "--runs", "3"]));
    assert_eq!(rows, again);
}

#[test]
fn train_smoke_repeat_and_ratio() {
    let d = tempfile::tempdir().unwrap();
    gen(d.path(), "1000", "5");
    let (train, eval) = (d.path().join("train.txt"), d.path().join("eval.txt"));
    let base = ["train", "--train", p(&train), "--eval", p(&eval), "--k", "50", "--bits", "8", "--lr", "0.1"];

    let rows = csv_rows(&ok(&base));
    assert_eq!(rows.len(), 1);
    for col in ["train_loss", "eval_ce", "eval_rce"] {
        assert!(rows[0][col].parse::<f64>().unwrap().is_finite(), "{col}");
    }

    let mut args = base.to_vec();
    args.extend(["--repeat", "5", "--baseline", "--schemes", "hybrid,regular"]);
    let rows = csv_rows(&ok(&args));
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0]["scheme"], "frequency");
    let baseline: f64 = rows[0]["parameters"].parse().unwrap();
    for r in &rows {
        assert_eq!(r["runs"], "5");
        let (mean, std) = r["eval_rce"].split_once('±').expect("mean±std");
        for part in [mean, std] {
            assert_eq!(part.split_once('.').unwrap().1.len(), 3, "{part}");
            part.parse::<f64>().unwrap();
        }
        let ratio: f64 = r["param_ratio"].parse().unwrap();
        let expected = r["parameters"].parse::<f64>().unwrap() / baseline;
        assert!((ratio - expected).abs() <= 5e-5, "{ratio} vs {expected}");
    }
    assert_eq!(csv_rows(&ok(&args)), rows);
}

#[test]
fn saved_model_evaluates_like_training_run() {
    let d = tempfile::tempdir().unwrap();
    gen(d.path(), "1500", "9");
    let (train, eval) = (d.path().join("train.txt"), d.path().join("eval.txt"));
    let model = d.path().join("m.bin");
    let rows = csv_rows(&ok(&[
        "train", "--train", p(&train), "--eval", p(&eval), "--k", "80", "--bits", "8", "--lr", "0.2", "--model-out", p(&model),
    ]));
    let dict = d.path().join("m.bin.dict");
    assert!(dict.exists());

    let manifest = std::fs::read_to_string(d.path().join("manifest.txt")).unwrap();
    let base = manifest.lines().find_map(|l| l.strip_prefix("train_label_mean=")).unwrap();
    let r = kv(ok(&["eval", "--model", p(&model), "--dict", p(&dict), "--data", p(&eval), "--base-rate", base]).trim());
    let trained: f64 = rows[0]["eval_ce"].parse().unwrap();
    let loaded: f64 = r["cross_entropy"].parse().unwrap();
    // Checkpoints store f32 parameters.
    assert!((trained - loaded).abs() < 1e-5, "{trained} vs {loaded}");

    let preds = d.path().join("p.txt");
    ok(&["eval", "--model", p(&model), "--dict", p(&dict), "--data", p(&eval), "--predictions", p(&preds)]);
    let n = std::fs::read_to_string(&preds).unwrap().lines().count();
    assert_eq!(r["examples"].parse::<usize>().unwrap(), n);

    let out = hhash(&["eval", "--model", p(&model), "--data", p(&eval)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn bench_smoke() {
    let rows = csv_rows(&ok(&["bench", "--bits", "4", "--keys", "10", "--iterations", "1", "--k", "3", "--vocab", "20", "--dim", "2"]));
    assert_eq!(rows.len(), 3);
    for r in &rows {
        let v = |c: &str| r[c].parse::<f64>().unwrap();
        assert!(v("p10") <= v("median") && v("median") <= v("p90"), "{r:?}");
        assert!(v("median") > 0.0);
        assert_eq!(r["trials"], "7");
    }
    assert_eq!(hhash(&["bench", "--trials", "3"]).status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(hhash(&["analyze", "--n", "10", "--bits", "0"]).status.code(), Some(1));
    assert_eq!(hhash(&["analyze", "--n", "10", "--bits", "4", "--k", "11"]).status.code(), Some(1));
    assert_eq!(hhash(&["build-dict", "--input", "/nonexistent/x", "--k", "1", "--out", "/tmp/x"]).status.code(), Some(2));
    assert_eq!(hhash(&["nonsense"]).status.code(), Some(1));
    assert_eq!(hhash(&["--help"]).status.code(), Some(0));
    let out = hhash(&["train", "--train", "x", "--lr", "-1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--lr"));
}

#[test]
fn config_file_with_flag_override() {
    let d = tempfile::tempdir().unwrap();
    let conf = d.path().join("run.conf");
    std::fs::write(&conf, "# analytic sizes\nn = 1000\nbits = 8\nschemes = regular\n").unwrap();
    let rows = csv_rows(&ok(&["analyze", "--config", p(&conf)]));
    assert_eq!((rows.len(), rows[0]["bins"].as_str()), (1, "256"));
    let rows = csv_rows(&ok(&["analyze", "--config", p(&conf), "--bits", "10"]));
    assert_eq!(rows[0]["bins"], "1024");

    std::fs::write(&conf, "n = 1000\nbogus = 1\n").unwrap();
    assert_eq!(hhash(&["analyze", "--config", p(&conf), "--bits", "8"]).status.code(), Some(1));
    assert_eq!(hhash(&["analyze", "--config", "/nonexistent/c", "--bits", "8"]).status.code(), Some(2));
}
