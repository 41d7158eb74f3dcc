use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn normsieve(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_normsieve")).args(args).output().expect("spawn normsieve")
}

fn stdout_json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

const SYSTEM: &str = r#"{"s":2,"forms":[[1,0],[0,1]],"q":16,"a":[1,1],"fields":["gaussian","sqrt2"],"S":[[2],[2]]}"#;

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn repfn_eval_sum_of_two_squares() {
    // 25 = 5^2: ideals (5), (2+i)^2, (2-i)^2.
    let v = stdout_json(&normsieve(&["repfn", "eval", "--field", "gaussian", "--m", "25"]));
    assert_eq!(v["R"], 3);
    let v = stdout_json(&normsieve(&["repfn", "eval", "--field", "gaussian", "--m", "10", "--squarefree-outside", "2"]));
    assert_eq!(v["R"], v["R_star"]);
    let v = stdout_json(&normsieve(&["repfn", "eval", "--field", "gaussian", "--m", "3"]));
    assert_eq!(v["R"], 0);
}

#[test]
fn repfn_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let cache = dir.path().join("r.cache");
    let c = cache.to_str().unwrap();
    let a = stdout_json(&normsieve(&["repfn", "eval", "--field", "gaussian", "--m", "65", "--cache", c]));
    assert!(cache.exists());
    let b = stdout_json(&normsieve(&["repfn", "eval", "--field", "gaussian", "--m", "65", "--cache", c]));
    assert_eq!(a, b);
    assert_eq!(a["R"], 4);
}

#[test]
fn density_rho_and_beta() {
    let v = stdout_json(&normsieve(&["density", "rho", "--form", "gaussian", "--q", "4", "--a", "3"]));
    assert_eq!(v["rho"], "0");
    let v = stdout_json(&normsieve(&["density", "rho", "--form", "gaussian", "--q", "5", "--a", "1"]));
    assert_eq!(v["rho"], "4");

    let dir = tempfile::tempdir().unwrap();
    let sys = write(dir.path(), "sys.json", SYSTEM);
    let v = stdout_json(&normsieve(&["density", "beta-p", "--system", &sys, "--p", "3"]));
    assert_eq!(v["beta_p"], "64/81");
}

#[test]
fn density_series_csv() {
    let dir = tempfile::tempdir().unwrap();
    let sys = write(dir.path(), "sys.json", SYSTEM);
    let out = dir.path().join("series.csv");
    let v = stdout_json(&normsieve(&["density", "series", "--system", &sys, "--cutoff", "30", "--out", out.to_str().unwrap()]));
    let lo = v["bracket"][0].as_f64().unwrap();
    let hi = v["bracket"][1].as_f64().unwrap();
    assert!(lo <= hi);
    let mut rdr = csv::Reader::from_path(&out).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["p", "beta_p_num", "beta_p_den", "abs_gap_to_1"]);
    let ps: Vec<u64> = rdr.records().map(|r| r.unwrap()[0].parse().unwrap()).collect();
    assert_eq!(ps, vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
}

#[test]
fn wtrick_build_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ctx.json");
    let o = normsieve(&["wtrick", "build", "--T", "22027", "--S", "2", "--field", "gaussian", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let ctx = normsieve::wtrick::WTrickContext::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(ctx.big_w, 16);
    assert!(ctx.contains(1));
    assert!(!ctx.contains(0));
}

#[test]
fn nil_cert_irrational_rotation() {
    let dir = tempfile::tempdir().unwrap();
    let seq = write(dir.path(), "seq.json", r#"{"kind":"torus","dim":1,"degree":1,"coords":[{"1":1.4142135623730951}]}"#);
    let v = stdout_json(&normsieve(&["nil", "cert", "--seq", &seq, "--N", "1000", "--delta", "0.1"]));
    assert_eq!(v["outcome"], "equidistributed");
    let o = normsieve(&["nil", "cert", "--seq", &seq, "--N", "10,10", "--delta", "0.1"]);
    assert!(!o.status.success());
}

#[test]
fn experiment_reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bd.json", &format!(r#"{{"system":{SYSTEM},"cutoff":30}}"#));
    let a = normsieve(&["beta-decay", "--config", &cfg, "--seed", "3"]);
    let b = normsieve(&["beta-decay", "--config", &cfg, "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let v: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(v["seed"], 3);
    assert_eq!(v["experiment"], "beta-decay");
    assert!(v.get("wall_time_ms").is_none_or(Value::is_null));

    let csv_path = dir.path().join("bd.csv");
    let o = normsieve(&["beta-decay", "--config", &cfg, "--csv", csv_path.to_str().unwrap(), "--timing"]);
    let v = stdout_json(&o);
    assert!(v["wall_time_ms"].is_u64());
    let text = fs::read_to_string(&csv_path).unwrap();
    assert!(text.starts_with("p,beta_p_num,beta_p_den,abs_gap_to_1,scaled_gap,stabilized_at,excluded\n"));
}

#[test]
fn verify_mean_value_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "mv.json",
        r#"{"field":"gaussian","S":[2],"q":16,"A":1,"x_grid":[10000,40000],"sign":"+","archimedean":"exact"}"#,
    );
    let out = dir.path().join("mv.json.out");
    let csv_path = dir.path().join("mv.csv");
    let o = normsieve(&["verify", "mean-value", "--config", &cfg, "--out", out.to_str().unwrap(), "--csv", csv_path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = normsieve::harness::ExperimentReport::from_json(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report.rows.len(), 2);
    for r in &report.rows {
        assert!(r.rel_error < 0.05, "{r:?}");
    }
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    assert_eq!(
        rdr.headers().unwrap(),
        vec!["grid", "observed_exact", "observed", "predicted", "predicted_lo", "predicted_hi", "rel_error", "mc_std_error"]
    );
    assert_eq!(rdr.records().count(), 2);
}

#[test]
fn errors_exit_nonzero() {
    let o = normsieve(&["verify", "nb", "--config", "/definitely/not/here.json"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"field":"gaussian","S":[],"q":4,"A":4,"x_grid":[1000],"sign":"+"}"#);
    let o = normsieve(&["verify", "mean-value", "--config", &cfg]);
    assert!(!o.status.success());
}
