use betainf::io::CsvTable;
use std::path::Path;
use std::process::{Command, Output};

fn betainf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_betainf"))
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .env_remove("BETAINF_THREADS")
        .output()
        .unwrap()
}

#[test]
fn airy_zeros_artifact_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = betainf(dir.path(), &["airy", "--zeros", "10", "--out", "zeros.csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("zeros.csv")).unwrap();
    let table = CsvTable::parse(&text).unwrap();
    assert_eq!(table.rows.len(), 10);
    assert!(table.comments[0].starts_with("betainf airy"));
    assert_eq!(table.comments[1], "seed=0");
    for r in table.column_f64("residual").unwrap() {
        assert!(r.abs() < 1e-12);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("zeros.csv.manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "airy");
    assert_eq!(manifest["seed"], 0);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
}

#[test]
fn usage_and_validation_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(betainf(dir.path(), &["roots", "--bogus"]).status.code(), Some(2));
    assert_eq!(betainf(dir.path(), &["frobnicate"]).status.code(), Some(2));
    assert_eq!(betainf(dir.path(), &["roots", "--family", "laguerre:-3", "--k", "4"]).status.code(), Some(2));
    assert_eq!(betainf(dir.path(), &["kernel", "--n", "4", "--k", "2", "--binary"]).status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // Level N of a simple spectrum has no soft edge.
    let out = betainf(dir.path(), &["edge", "--spectrum", "uniform", "--n", "6", "--k", "6"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for (name, threads) in [("a.csv", "1"), ("b.csv", "3")] {
        let out = betainf(
            dir.path(),
            &["sample", "--process", "xi", "--n", "5", "--samples", "5000", "--seed", "11", "--threads", threads, "--out", name],
        );
        assert_eq!(out.status.code(), Some(0));
    }
    let a = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("b.csv")).unwrap();
    let body = |s: &str| s.lines().skip(1).map(String::from).collect::<Vec<_>>();
    assert_eq!(body(&a), body(&b));
    assert!(a.lines().nth(1).unwrap().contains("seed=11"));
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "command = roots\nfamily = hermite\nk = 3\n").unwrap();
    let out = betainf(dir.path(), &["--config", conf.to_str().unwrap(), "--k", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = CsvTable::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 4);
}

#[test]
fn converge_ladder_decreases() {
    let dir = tempfile::tempdir().unwrap();
    let out = betainf(dir.path(), &["converge", "gcorners", "--N", "100,200,400,800", "--cell", "1,1,0,0", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let errs: Vec<f64> = v["rows"].as_array().unwrap().iter().map(|r| r["rel_error"].as_f64().unwrap()).collect();
    assert_eq!(errs.len(), 4);
    assert!(errs.windows(2).all(|w| w[1] < w[0]), "{errs:?}");
}

#[test]
fn selftest_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = betainf(dir.path(), &["selftest"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let table = CsvTable::parse(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(table.rows.iter().all(|r| r[0] == "PASS"));
}

#[test]
fn binary_kernel_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = betainf(dir.path(), &["kernel", "--n", "6", "--k", "2", "--l", "5", "--binary", "--out", "k.bin"]);
    assert_eq!(out.status.code(), Some(0));
    let k = betainf::kernels::TransitionKernel::from_binary(&std::fs::read(dir.path().join("k.bin")).unwrap()).unwrap();
    let direct = betainf::kernels::diffusion_kernel(&betainf::polygrid::hermite_grid(6).unwrap(), 2, 5).unwrap();
    assert_eq!(k.data(), direct.data());
}
