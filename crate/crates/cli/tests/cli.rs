use std::fs;
use std::path::Path;
use std::process::Command;

fn run(out: &Path, args: &[&str]) -> String {
    let o = Command::new(env!("CARGO_BIN_EXE_behavior-epi"))
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(o.status.success(), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn header(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

const SMALL: &str = r#"{
  "seed": 5,
  "sensitivity": { "samples": 60 },
  "stability": { "gammas": { "min": 0.5, "max": 2.0, "steps": 4 }, "r_cs": { "min": 0.5, "max": 2.0, "steps": 4 } },
  "sweeps": {
    "contact": { "axes": [ { "param": "a1", "grid": { "min": 0, "max": 8000, "steps": 3 } },
                           { "param": "a2", "grid": { "min": 0, "max": 2800, "steps": 2 } } ] },
    "influence": null,
    "split": { "axes": [ { "param": "k", "grid": { "min": 0, "max": 1, "steps": 3 } } ], "metrics": ["peak_hosp_wave1"] },
    "lockdown": { "start_days": { "min": 10, "max": 40, "steps": 4 }, "efficacies": { "min": 0.2, "max": 0.6, "steps": 2 } }
  }
}"#;

#[test]
fn simulate_writes_dated_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["simulate", "--model", "behavior-free", "--days", "20"]);
    let h = header(&dir.path().join("trajectory.csv"));
    assert!(h.starts_with("day,date,S_1,E_1"), "{h}");
    let rows: Vec<String> = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap().lines().map(String::from).collect();
    assert_eq!(rows.len(), 22);
    assert!(rows[1].starts_with("0,2020-02-29,"));
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn sweeps_and_stability() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, SMALL).unwrap();
    let c = cfg.to_str().unwrap();
    run(dir.path(), &["sweep", "--config", c, "--grid", "split"]);
    assert_eq!(header(&dir.path().join("sweep_split.csv")), "k,peak_hosp_wave1");
    run(dir.path(), &["lockdown-sweep", "--config", c]);
    let text = fs::read_to_string(dir.path().join("lockdown_sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 9);
    // Day 40 falls after the phase-2 start and is reported as a missing value.
    assert!(text.lines().filter(|l| l.starts_with("40,")).all(|l| l.ends_with(',')));
    run(dir.path(), &["stability", "--config", c]);
    assert_eq!(header(&dir.path().join("stability.csv")), "gamma,r_c,label");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("verdict.json")).unwrap()).unwrap();
    assert!(v["verdict"].is_string());
    let o = Command::new(env!("CARGO_BIN_EXE_behavior-epi"))
        .args(["--out", dir.path().to_str().unwrap(), "sweep", "--config", c, "--grid", "influence"])
        .output()
        .unwrap();
    assert!(!o.status.success());
}

#[test]
fn prcc_outputs_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), &["prcc", "--samples", "40", "--seed", "9"]);
    let text = fs::read_to_string(dir.path().join("prcc.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "parameter,response,snapshot,coefficient");
    assert_eq!(text.lines().count(), 1 + 18 * 4);
    assert!(text.contains("beta_a,peak_daily_hosp,2020-04-20,"));
    let samples = fs::read_to_string(dir.path().join("samples.csv")).unwrap();
    assert_eq!(samples.lines().count(), 41);
    let again = tempfile::tempdir().unwrap();
    run(again.path(), &["prcc", "--samples", "40", "--seed", "9"]);
    assert_eq!(text, fs::read_to_string(again.path().join("prcc.csv")).unwrap());
}

fn write_series(path: &Path) {
    use behavior_epi::calibration::{simulate, ModelKind};
    use behavior_epi::state::InitialConditions;
    let p = ModelKind::BehaviorFree.baseline();
    let tr = simulate(ModelKind::BehaviorFree, &p, &InitialConditions::default(), 400).unwrap();
    let mut s = String::from("date_of_interest,HOSPITALIZED_COUNT\n");
    let epoch = chrono::NaiveDate::from_ymd_opt(2020, 2, 29).unwrap();
    for (i, v) in tr.ih_total.iter().enumerate() {
        let d = epoch + chrono::Duration::days(i as i64);
        s.push_str(&format!("{},{}\n", d.format("%m/%d/%Y"), v.round()));
    }
    fs::write(path, s).unwrap();
}

#[test]
fn fit_then_validate() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("hosp.csv");
    write_series(&data);
    let cfg = dir.path().join("config.json");
    fs::write(
        &cfg,
        r#"{"calibration": {"behavior_free": {"model": "behavior-free", "starts": 1,
            "free": [{"param": "theta1", "lower": 0.0, "upper": 1.0, "initial": 0.6}]}}}"#,
    )
    .unwrap();
    let out = run(
        dir.path(),
        &["fit", "--model", "behavior-free", "--data", data.to_str().unwrap(), "--config", cfg.to_str().unwrap()],
    );
    assert!(out.contains("theta1"), "{out}");
    for f in ["fit_result.json", "trajectory.csv", "validation.csv", "prediction.csv"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let fit = dir.path().join("fit_result.json");
    let vdir = dir.path().join("v");
    run(
        &vdir,
        &["validate", "--fit", fit.to_str().unwrap(), "--data", data.to_str().unwrap(), "--start", "2020-09-01", "--end", "2020-10-01"],
    );
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(vdir.join("validation.json")).unwrap()).unwrap();
    assert_eq!(v["end_date"], "2020-10-01");
}

#[test]
fn report_without_data_is_partial_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.json");
    fs::write(&cfg, SMALL).unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        run(d, &["report", "--config", cfg.to_str().unwrap(), "--threads", "2"]);
    }
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 5);
    assert_eq!(m["complete"], false);
    let stages = m["stages"].as_array().unwrap();
    let status = |name: &str| stages.iter().find(|s| s["stage"] == name).unwrap()["status"].clone();
    assert_eq!(status("calibration"), "skipped");
    assert_eq!(status("contact_sweep"), "ok");
    assert_eq!(status("sensitivity"), "ok");
    for art in m["artifacts"].as_array().unwrap() {
        let f = art["file"].as_str().unwrap();
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
}
