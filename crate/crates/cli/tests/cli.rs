use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn subgnn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_subgnn")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn report(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("basis.json");
    let o = subgnn(&["verify", "basis2ign", "--seed", "1", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    assert_eq!(r["command"][1], "basis2ign");
    assert!(r["records"].as_array().unwrap().iter().all(|x| x["status"] == "PASS"));

    assert_eq!(code(&subgnn(&["verify", "no-such-suite", "--seed", "1"])), 2);
    assert_eq!(code(&subgnn(&["verify", "basis2ign"])), 2, "seed is mandatory");
    assert_eq!(code(&subgnn(&["frobnicate"])), 2);
}

#[test]
fn injected_fault_fails_the_equivariance_suite() {
    let o = subgnn(&["verify", "equivariance", "--seed", "3", "--inject-fault"]);
    assert_eq!(code(&o), 1);
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    let fixture = r["records"].as_array().unwrap().iter().find(|x| x["name"] == "layer.fault_fixture").unwrap();
    assert_eq!(fixture["status"], "FAIL");
    assert_eq!(code(&subgnn(&["verify", "equivariance", "--seed", "3"])), 0);
}

#[test]
fn generated_datasets_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let gen = |name: &str, p: &str| {
        let path = dir.path().join(name);
        let o = subgnn(&["gen-counting", "--seed", "9", "--n-graphs", "30", "--n-min", "5", "--n-max", "8", "--p", p, "--out", path.to_str().unwrap()]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        path
    };
    let (a, b) = (gen("a.jsonl", "0.3"), gen("b.jsonl", "0.3"));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(fs::read_to_string(&a).unwrap().lines().count(), 30);
    let empty = gen("e.jsonl", "0");
    for line in fs::read_to_string(&empty).unwrap().lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["y"], serde_json::json!([0.0, 0.0]));
    }
    let o = subgnn(&["gen-counting", "--seed", "9", "--patterns", "pentagon", "--out", "x.jsonl"]);
    assert_eq!(code(&o), 2);
    let o = subgnn(&["gen-counting", "--seed", "9", "--n-graphs", "3", "--out", dir.path().join("missing/x.jsonl").to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn one_epoch_training_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    let o = subgnn(&["gen-counting", "--seed", "2", "--n-graphs", "20", "--n-min", "5", "--n-max", "7", "--out", data.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    let out = dir.path().join("train.json");
    let o = subgnn(&["train", data.to_str().unwrap(), "--seed", "2", "--epochs", "1", "--max-ratio", "1e9", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&out);
    let epoch = &r["data"]["epochs"][0];
    assert!(epoch["train_mae"].as_f64().unwrap().is_finite());
    assert!(epoch["val_mae"].as_f64().unwrap().is_finite());
    let ckpt: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("train.json.ckpt.json")).unwrap()).unwrap();
    assert!(ckpt["params"].is_object());
    assert_eq!(code(&subgnn(&["train", "nowhere.jsonl", "--seed", "2"])), 1);
}

#[test]
fn separation_and_report_merging() {
    let dir = tempfile::tempdir().unwrap();
    let sep = dir.path().join("sep.json");
    let o = subgnn(&["separate", "c6_vs_2c3", "rook_vs_shrikhande", "--seed", "5", "--n-seeds", "4", "--out", sep.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&sep);
    assert_eq!(r["data"]["pairs"][0]["verdict"], "SEPARATED");
    assert_eq!(r["data"]["pairs"][1]["verdict"], "COLLAPSED");
    assert_eq!(r["data"]["pairs"][0]["wl1"], false);
    assert_eq!(r["data"]["pairs"][0]["fwl2"], true);
    assert_eq!(r["data"]["pairs"][1]["pair"], serde_json::json!(["rook_4x4", "shrikhande"]));

    let bad = dir.path().join("bad.json");
    assert_eq!(code(&subgnn(&["verify", "equivariance", "--seed", "1", "--inject-fault", "--out", bad.to_str().unwrap()])), 1);
    let merged = dir.path().join("merged.json");
    assert_eq!(code(&subgnn(&["report", sep.to_str().unwrap(), sep.to_str().unwrap(), "--out", merged.to_str().unwrap()])), 0);
    assert_eq!(report(&merged)["records"].as_array().unwrap().len(), 2 * r["records"].as_array().unwrap().len());
    assert_eq!(code(&subgnn(&["report", sep.to_str().unwrap(), bad.to_str().unwrap()])), 1);
    assert_eq!(code(&subgnn(&["report"])), 2);
}
