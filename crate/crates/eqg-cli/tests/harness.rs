//! End-to-end harness contract: exit codes, byte-identical reports per seed
//! independent of thread count, config-file handling, and sweep aggregation.

use std::path::Path;
use std::process::Command;

fn eqg() -> Command {
    Command::new(env!("CARGO_BIN_EXE_eqg"))
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).expect("report file")
}

#[test]
fn eval_smoke() {
    let out = eqg()
        .args(["eval", "theta", "--u", "0,0"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("+0.000000000000+0.000000000000i"), "{text}");

    let out = eqg().args(["eval", "kappa"]).output().unwrap();
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("+1.000000000000"));

    // u = 0 R-matrix pattern: b entries zero, c entries 1
    let out = eqg()
        .args(["eval", "rmat", "--u", "0,0", "--s", "0.9,0.2"])
        .output()
        .unwrap();
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success());
    assert!(text.contains("[0, 1.000000+0.000000i, 0, 0]") || text.contains("0, 1.000000"), "{text}");
}

#[test]
fn eval_lop_and_fuse_smoke() {
    let out = eqg()
        .args([
            "eval", "lop", "--l", "1", "--u", "0.52,0.17", "--v", "0.13,0.21",
            "--method", "gauss",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("L++") && text.contains("L--"), "{text}");

    let out = eqg()
        .args([
            "eval", "fuse", "--l", "2", "--u", "0.43,0.21", "--s", "1.05,0.27",
            "--method", "product",
        ])
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("R+_(1,2)"), "{text}");
}

#[test]
fn verify_reports_are_byte_identical_across_thread_counts() {
    let dir = std::env::temp_dir().join("eqg-harness-det");
    std::fs::create_dir_all(&dir).unwrap();
    let r1 = dir.join("r1.json");
    let r2 = dir.join("r2.json");
    let common = [
        "verify", "--suite", "theta,rmatrix", "--samples", "6", "--seed", "7",
    ];
    let st1 = eqg()
        .args(common)
        .args(["--out", r1.to_str().unwrap()])
        .env("RAYON_NUM_THREADS", "1")
        .status()
        .unwrap();
    let st2 = eqg()
        .args(common)
        .args(["--out", r2.to_str().unwrap()])
        .env("RAYON_NUM_THREADS", "8")
        .status()
        .unwrap();
    assert!(st1.success() && st2.success());
    assert_eq!(read(&r1), read(&r2), "reports must be byte-identical");
}

#[test]
fn different_seeds_differ() {
    let dir = std::env::temp_dir().join("eqg-harness-seed");
    std::fs::create_dir_all(&dir).unwrap();
    let r1 = dir.join("s1.json");
    let r2 = dir.join("s2.json");
    for (seed, path) in [("7", &r1), ("8", &r2)] {
        let st = eqg()
            .args(["verify", "--suite", "theta", "--samples", "6", "--seed", seed])
            .args(["--out", path.to_str().unwrap()])
            .status()
            .unwrap();
        assert!(st.success());
    }
    assert_ne!(read(&r1), read(&r2));
}

#[test]
fn exit_codes() {
    // 0 on pass
    let st = eqg()
        .args(["verify", "--suite", "theta", "--samples", "4"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));

    // 1 on unmeetable tolerance, with the partial report still written
    let dir = std::env::temp_dir().join("eqg-harness-exit");
    std::fs::create_dir_all(&dir).unwrap();
    let rpt = dir.join("fail.json");
    let st = eqg()
        .args([
            "verify", "--suite", "theta", "--samples", "4", "--tol", "1e-15",
            "--out", rpt.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_slice(&read(&rpt)).unwrap();
    assert!(doc["summary"]["failed"].as_u64().unwrap() > 0);
    assert!(doc["checks"].as_array().unwrap().len() > 0);

    // 2 on config errors
    let st = eqg()
        .args(["verify", "--suite", "nonsense"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
    let st = eqg()
        .args(["verify", "--suite", "theta", "--precision", "extended:99"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn config_file_and_flag_override() {
    let dir = std::env::temp_dir().join("eqg-harness-cfg");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg_path = dir.join("cfg.json");
    let cfg = serde_json::json!({
        "q": [0.35, 0.05],
        "r": [1.2, 0.1],
        "c": [0.0, 0.0],
        "trunc": 30,
        "tol": 1e-8,
        "samples": 4,
        "seed": 11,
        "suites": ["theta"],
        "precision": "double"
    });
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let rpt = dir.join("from-config.json");
    let st = eqg()
        .args([
            "verify",
            "--config",
            cfg_path.to_str().unwrap(),
            "--suite",
            "theta",
            "--out",
            rpt.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&read(&rpt)).unwrap();
    assert_eq!(doc["config"]["seed"].as_u64(), Some(11));
    assert_eq!(doc["config"]["trunc"].as_u64(), Some(30));
}

#[test]
fn one_cell_sweep_matches_verify() {
    let dir = std::env::temp_dir().join("eqg-harness-sweep");
    std::fs::create_dir_all(&dir).unwrap();
    let sw = dir.join("sweep.json");
    let vf = dir.join("verify.json");
    let st = eqg()
        .args([
            "sweep", "--grid", "q.re=0.35:0.35:1", "--suite", "theta",
            "--samples", "5", "--seed", "3", "--out", sw.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let st = eqg()
        .args([
            "verify", "--suite", "theta", "--samples", "5", "--seed", "3",
            "--out", vf.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let sweep: serde_json::Value = serde_json::from_slice(&read(&sw)).unwrap();
    let verify: serde_json::Value = serde_json::from_slice(&read(&vf)).unwrap();
    assert_eq!(sweep.as_array().unwrap().len(), 1);
    assert_eq!(sweep[0]["report"]["checks"], verify["checks"]);
}

#[test]
fn sweep_grid_and_truncation_table() {
    // 3x3 grid completes with a per-cell pass map
    let st = eqg()
        .args([
            "sweep", "--grid", "q.re=0.3:0.4:3;r.re=1.1:1.6:3", "--suite", "theta",
            "--samples", "3",
        ])
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0));
    let text = String::from_utf8(st.stdout).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 9, "{text}");

    // residual-vs-N sweep for the theta suite: max residual decreasing
    let dir = std::env::temp_dir().join("eqg-harness-trunc");
    std::fs::create_dir_all(&dir).unwrap();
    let out = dir.join("trunc.json");
    let st = eqg()
        .args([
            "sweep", "--grid", "trunc=8:40:5", "--suite", "theta", "--samples", "5",
            "--tol", "1e-1", "--out", out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    // loose tolerance so low orders still "pass": the table itself matters
    assert_eq!(st.code(), Some(0));
    let doc: serde_json::Value = serde_json::from_slice(&read(&out)).unwrap();
    let cells = doc.as_array().unwrap();
    assert_eq!(cells.len(), 5);
    let residuals: Vec<f64> = cells
        .iter()
        .map(|c| c["max_residual"].as_f64().unwrap())
        .collect();
    for w in residuals.windows(2) {
        assert!(
            w[1] <= w[0] * 1.000001,
            "truncation table not monotone: {residuals:?}"
        );
    }
}
