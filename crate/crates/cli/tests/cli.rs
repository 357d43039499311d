use std::path::Path;
use std::process::{Command, Output};

fn bmreg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bmreg")).args(args).output().expect("bmreg runs")
}

fn s(p: &Path) -> String {
    p.display().to_string()
}

fn fixture(name: &str) -> String {
    s(&Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name))
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn simulate_scenario_two_writes_requested_rows() {
    let dir = tempfile::tempdir().unwrap();
    let o = bmreg(&["simulate", "--scenario", "2", "--n", "5000", "--seed", "7", "--out", &s(dir.path())]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("pairs.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x,y"));
    assert_eq!(lines.count(), 5000);
}

#[test]
fn scenario_three_is_coles_tawn() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    bmreg(&["simulate", "--scenario", "3", "--n", "300", "--out", &s(a.path())]);
    bmreg(&["simulate", "--model", "coles-tawn:0.5,100", "--n", "300", "--out", &s(b.path())]);
    let read = |d: &Path| std::fs::read(d.join("pairs.csv")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
}

#[test]
fn seeds_change_the_sample() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    bmreg(&["simulate", "--scenario", "1", "--n", "50", "--seed", "1", "--out", &s(a.path())]);
    bmreg(&["simulate", "--scenario", "1", "--n", "50", "--seed", "2", "--out", &s(b.path())]);
    let read = |d: &Path| std::fs::read(d.join("pairs.csv")).unwrap();
    assert_ne!(read(a.path()), read(b.path()));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    assert_eq!(code(&bmreg(&["simulate", "--model", "logistic:1.5", "--out", &out])), 2);
    assert_eq!(code(&bmreg(&["simulate", "--model", "gumbel:0.5", "--out", &out])), 2);
    assert_eq!(code(&bmreg(&["simulate", "--scenario", "4", "--out", &out])), 2);
    assert_eq!(code(&bmreg(&["simulate", "--out", &out])), 2);
    assert_eq!(code(&bmreg(&["simulate", "--scenario", "1", "--bogus"])), 2);
    assert_eq!(code(&bmreg(&["fit", "--data", "x.csv", "--iterations", "10", "--burn-in", "10"])), 2);
    assert_eq!(code(&bmreg(&["manifold", "--scenario", "1", "--q", "0.5,1.2"])), 2);
    assert_eq!(code(&bmreg(&["predict", "--fit", "f", "--transform", "t.json"])), 2);

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"simulate": {"scenario": 1, "samples": 10}}"#).unwrap();
    let o = bmreg(&["simulate", "--config", &s(&cfg), "--out", &out]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("samples"));
}

#[test]
fn data_errors_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let missing = s(&dir.path().join("missing.csv"));
    assert_eq!(code(&bmreg(&["fit", "--data", &missing, "--out", &out])), 3);
    assert_eq!(code(&bmreg(&["transform", "--x", &missing, "--y", &missing, "--out", &out])), 3);

    // Ten pairs leave a single exceedance above the 95% radius.
    bmreg(&["simulate", "--scenario", "1", "--n", "10", "--out", &out]);
    let o = bmreg(&["fit", "--data", &s(&dir.path().join("pairs.csv")), "--out", &out]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("exceedances"));
}

#[test]
fn invalid_posterior_state_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    bmreg(&["simulate", "--scenario", "1", "--n", "400", "--out", &out]);
    let pairs = s(&dir.path().join("pairs.csv"));
    let o = bmreg(&["fit", "--data", &pairs, "--iterations", "200", "--burn-in", "100", "--degree", "5", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    // J = 5, d = 2 has two free weights; these logits force a negative corner.
    std::fs::write(dir.path().join("chain.jsonl"), "{\"iter\":100,\"logits\":[-20.0,20.0],\"log_post\":0.0}\n").unwrap();
    assert_eq!(code(&bmreg(&["manifold", "--fit", &out, "--x-points", "3", "--out", &out])), 4);
}

#[test]
fn print_config_shows_flags_over_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"seed": 5, "simulate": {"scenario": 2, "n": 40}}"#).unwrap();
    let o = bmreg(&["simulate", "--config", &s(&cfg), "--n", "30", "--print-config", "--out", &s(dir.path())]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["seed"], 5);
    assert_eq!(v["simulate"]["n"], 30);
    assert_eq!(v["simulate"]["scenario"], 2);
    assert!(v.get("fit").is_none());
    let rows = std::fs::read_to_string(dir.path().join("pairs.csv")).unwrap().lines().count();
    assert_eq!(rows, 31);
}

#[test]
fn fitted_pipeline_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let o = bmreg(&["transform", "--x", &fixture("index_x.csv"), "--y", &fixture("index_y.csv"), "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let sidecar: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("transform.json")).unwrap()).unwrap();
    assert_eq!(sidecar["x_label"], "index_x");
    let m = sidecar["m"].as_u64().unwrap() as usize;
    let pairs = s(&dir.path().join("pairs.csv"));
    assert_eq!(std::fs::read_to_string(&pairs).unwrap().lines().count(), m + 1);

    let o = bmreg(&["fit", "--data", &pairs, "--iterations", "1500", "--burn-in", "500", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["chain.jsonl", "density.json", "summary.json", "angles.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let chain = std::fs::read_to_string(dir.path().join("chain.jsonl")).unwrap();
    assert_eq!(chain.lines().count(), 1000);
    assert!(chain.starts_with("{\"iter\":500,"));
    let angles = std::fs::read_to_string(dir.path().join("angles.csv")).unwrap();
    assert!(angles.starts_with("# u="));

    // 0.5 is far beyond any weekly loss in the fixtures.
    let sc = s(&dir.path().join("transform.json"));
    let o = bmreg(&["predict", "--fit", &out, "--transform", &sc, "--x", "0.01,0.5", "--q", "0.9", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("outside the observed range"));
    let table = std::fs::read_to_string(dir.path().join("predict.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows[0], "q,x,x_frechet,y_frechet,y,y_lower,y_upper,extrapolated");
    assert!(rows[1].ends_with(",false"));
    assert!(rows[2].ends_with(",true"));

    let o = bmreg(&["residuals", "--fit", &out, "--data", &pairs, "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("ks_p_value"));
    let res = std::fs::read_to_string(dir.path().join("residuals.csv")).unwrap();
    assert!(res.starts_with("index,x,y,ghat,residual,theoretical\n"));

    let o = bmreg(&["manifold", "--fit", &out, "--q", "0.5,0.9", "--x-points", "10", "--out", &out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let man = std::fs::read_to_string(dir.path().join("manifold.csv")).unwrap();
    assert_eq!(man.lines().next(), Some("q,x,y,lo,hi"));
    assert_eq!(man.lines().count(), 21);
}

#[test]
fn parametric_manifold_has_no_bands() {
    let dir = tempfile::tempdir().unwrap();
    let o = bmreg(&["manifold", "--model", "logistic:0.5", "--x-points", "5", "--out", &s(dir.path())]);
    assert_eq!(code(&o), 0);
    let man = std::fs::read_to_string(dir.path().join("manifold.csv")).unwrap();
    assert_eq!(man.lines().next(), Some("q,x,y"));
    assert_eq!(man.lines().count(), 1 + 9 * 5);
}
