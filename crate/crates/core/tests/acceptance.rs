//! Acceptance suite. One PASS/FAIL line per criterion; exits non-zero if any fail.
//!
//! Criterion 9 needs the public NYC hospitalization extract. Point
//! `BEHAVIOR_EPI_NYC_DATA` at the CSV (columns `date_of_interest`, `HOSPITALIZED_COUNT`).

use std::sync::Mutex;
use std::time::Instant;

use behavior_epi::analysis::{control_reproduction_number, metzler_stable, next_generation_matrix, spectral_radius};
use behavior_epi::calendar::{date, DateWindow};
use behavior_epi::calibration::{cross_validate, fit, load_series, simulate, FitConfig, HospitalizationSeries, SeriesColumns};
use behavior_epi::integrator::{integrate_with, Dynamics, SolverOptions};
use behavior_epi::params::{BEHAVIOR_FREE_THETA, TWO_GROUP_THETA};
use behavior_epi::scenarios::LockdownSweepSpec;
use behavior_epi::sensitivity::{latin_hypercube_unit, lhs_sample, prcc, run_prcc, ParamRangeTable, PrccConfig, Response};
use behavior_epi::*;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn fail(detail: impl Into<String>) -> Outcome {
    outcome(false, detail)
}

/// Worst conservation and positivity figures over every integration run here.
struct Audit {
    label: String,
    drift: f64,
    min_scaled: f64,
}

static AUDIT: Mutex<Vec<Audit>> = Mutex::new(Vec::new());

fn audit(label: &str, tr: &Trajectory) {
    let n0 = tr.initial_population;
    let mut drift: f64 = 0.0;
    let mut min_scaled = f64::INFINITY;
    for i in 0..tr.len() {
        drift = drift.max(((tr.population(i) + tr.deaths[i] - n0) / n0).abs());
        for &v in tr.states[i].as_slice() {
            min_scaled = min_scaled.min(v / n0);
        }
    }
    AUDIT.lock().unwrap().push(Audit { label: label.to_string(), drift, min_scaled });
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

// 1
fn reproduction_table() -> Outcome {
    let p = ModelParams::nyc_behavior_free();
    let expected = [2.43, 0.083, 0.961, 1.339];
    let mut worst: f64 = 0.0;
    let mut got = Vec::new();
    for (theta, want) in BEHAVIOR_FREE_THETA.iter().zip(expected) {
        let r = match control_reproduction_number(&p, *theta) {
            Ok(r) => r,
            Err(e) => return fail(e.to_string()),
        };
        worst = worst.max((r - want).abs());
        got.push(format!("{r:.4}"));
    }
    outcome(worst <= 1e-3, format!("R_c = [{}], max |diff| {worst:.2e}", got.join(", ")))
}

/// F V⁻¹ written out by hand for infected order E, Ia, Is, Ih.
fn analytic_ngm(p: &ModelParams, theta: f64) -> DMatrix<f64> {
    let mut f = DMatrix::zeros(4, 4);
    f[(0, 1)] = theta * p.beta_a;
    f[(0, 2)] = theta * p.beta_i;
    f[(0, 3)] = theta * p.beta_h;
    let mut v = DMatrix::zeros(4, 4);
    v[(0, 0)] = p.sigma_e;
    v[(1, 0)] = -(1.0 - p.r) * p.sigma_e;
    v[(1, 1)] = p.gamma_a;
    v[(2, 0)] = -p.r * p.sigma_e;
    v[(2, 2)] = p.sigma_i;
    v[(3, 2)] = -p.q * p.sigma_i;
    v[(3, 3)] = p.gamma_h + p.delta_h;
    f * v.try_inverse().expect("lower triangular with positive diagonal")
}

fn oracle_radius(m: &DMatrix<f64>) -> f64 {
    m.clone().complex_eigenvalues().iter().map(|z| (z.re * z.re + z.im * z.im).sqrt()).fold(0.0, f64::max)
}

// 2
fn next_generation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..500 {
        let mut p = ModelParams::nyc_behavior_free();
        p.beta_a = rng.random_range(0.01..2.0);
        p.beta_i = rng.random_range(0.01..2.0);
        p.beta_h = rng.random_range(0.0..1.0);
        p.sigma_e = rng.random_range(0.05..1.0);
        p.sigma_i = rng.random_range(0.02..1.0);
        p.gamma_a = rng.random_range(0.02..1.0);
        p.gamma_h = rng.random_range(0.01..1.0);
        p.delta_h = rng.random_range(0.0..1.0);
        p.r = rng.random_range(0.0..1.0);
        p.q = rng.random_range(0.0..1.0);
        let theta = rng.random_range(0.01..1.0);
        let formula = match control_reproduction_number(&p, theta) {
            Ok(r) => r,
            Err(e) => return fail(e.to_string()),
        };
        let built = match next_generation_matrix(&p, theta) {
            Ok(k) => spectral_radius(&k),
            Err(e) => return fail(e.to_string()),
        };
        let by_hand = oracle_radius(&analytic_ngm(&p, theta));
        worst = worst.max(rel(formula, built)).max(rel(formula, by_hand));
    }
    outcome(worst <= 1e-8, format!("500 draws, max relative gap {worst:.2e}"))
}

#[derive(Clone, Copy, Debug)]
enum Target {
    G1,
    G2,
    G3,
    Extinct,
}

/// Distance to the predicted equilibrium class, relative to its size.
fn distance(target: Target, st: &SystemState, n0: f64) -> f64 {
    let n = st.total();
    let (s1, s2) = (st.get(Compartment::S, 0), st.get(Compartment::S, 1));
    match target {
        Target::G1 => (n - s1) / n,
        Target::G2 => (n - s2) / n,
        Target::G3 => (n - s1 - s2) / n,
        Target::Extinct => n / n0,
    }
}

// 3
fn convergence_suite() -> Outcome {
    let base = {
        let mut p = ModelParams::nyc_two_group();
        p.theta = LockdownSchedule::constant(1.0).unwrap();
        p.beta_a = 0.1;
        p.beta_i = 0.05;
        p
    };
    let mut scenarios = Vec::new();
    scenarios.push(("gamma=3", Target::G1, base.clone()));
    let mut g2 = base.clone();
    g2.c_b = vec![vec![0.0, 1.0 / 90.0], vec![1.0 / 30.0, 0.0]];
    scenarios.push(("gamma=1/3", Target::G2, g2));
    let mut g3 = base.clone();
    g3.c_b = vec![vec![0.0, 1.0 / 30.0], vec![1.0 / 30.0, 0.0]];
    scenarios.push(("gamma=1", Target::G3, g3));
    let mut hot = base.clone();
    hot.beta_a = 1.0;
    hot.beta_i = 0.5;
    scenarios.push(("R_c=7.8", Target::Extinct, hot));

    let ics = [
        InitialConditions { k: 0.2, seed_cases: 10.0, seed_compartment: Compartment::Is, ..Default::default() },
        InitialConditions { k: 0.5, seed_cases: 1_000.0, seed_compartment: Compartment::Is, ..Default::default() },
        InitialConditions { k: 0.9, seed_cases: 100_000.0, seed_compartment: Compartment::E, ..Default::default() },
    ];
    let mut failures = Vec::new();
    let mut worst: f64 = 0.0;
    for (name, target, p) in &scenarios {
        let rc = control_reproduction_number(p, 1.0).unwrap();
        for (j, ic) in ics.iter().enumerate() {
            let st = ic.build(2).unwrap();
            let tr = match integrate_with(p, &st, 4000.0, 10.0, Dynamics::Behavior, &SolverOptions::default()) {
                Ok(tr) => tr,
                Err(e) => {
                    failures.push(format!("{name}/ic{j}: {e}"));
                    continue;
                }
            };
            audit(&format!("convergence {name} ic{j}"), &tr);
            let last = tr.last();
            let d = distance(*target, last, tr.initial_population);
            let mut ok = d < 1e-3;
            if let Target::G3 = target {
                let share = last.group_total(0) / last.total();
                ok &= share > 1e-3 && share < 1.0 - 1e-3;
            }
            if !ok {
                failures.push(format!("{name} (R_c {rc:.2}) ic{j}: {target:?} distance {d:.3e}"));
            }
            if !matches!(target, Target::Extinct) {
                worst = worst.max(d);
            }
        }
    }
    if failures.is_empty() {
        outcome(true, format!("12/12 converge, worst distance {worst:.2e}"))
    } else {
        fail(format!("{}/12 miss: {}", failures.len(), failures.join("; ")))
    }
}

// 4
fn metzler_checker() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut stable, mut unstable, mut skipped, mut disagree) = (0, 0, 0, 0);
    let mut made = 0;
    while made < 1000 {
        let n = rng.random_range(2..=12);
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut row = 0.0;
            for j in 0..n {
                if i != j && rng.random_bool(0.6) {
                    m[(i, j)] = rng.random_range(0.0..1.0);
                    row += m[(i, j)];
                }
            }
            m[(i, i)] = -row * rng.random_range(0.7..1.3) - rng.random_range(0.0..0.05);
        }
        made += 1;
        let lam = m.clone().complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
        if lam.abs() < 1e-8 {
            skipped += 1;
            continue;
        }
        match metzler_stable(&m) {
            Ok(v) if v == (lam < 0.0) => {}
            _ => disagree += 1,
        }
        if lam < 0.0 {
            stable += 1;
        } else {
            unstable += 1;
        }
    }
    outcome(
        disagree == 0 && stable > 0 && unstable > 0,
        format!("{stable} stable, {unstable} unstable, {skipped} near-marginal skipped, {disagree} disagreements"),
    )
}

// 5, after everything else has run
fn conservation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let table = ParamRangeTable::nyc();
    let base = ModelParams::nyc_two_group();
    let rows = lhs_sample(&table, 100, 5).unwrap();
    for (i, row) in rows.iter().enumerate() {
        let p = table.apply(&base, row, false).unwrap();
        let ic = InitialConditions { k: rng.random_range(0.0..1.0), ..Default::default() };
        match integrate(&p, &ic.build(2).unwrap(), 390.0, 1.0) {
            Ok(tr) => audit(&format!("random draw {i}"), &tr),
            Err(e) => return fail(format!("random draw {i}: {e}")),
        }
    }
    let log = AUDIT.lock().unwrap();
    let drift = log.iter().max_by(|a, b| a.drift.total_cmp(&b.drift)).unwrap();
    let low = log.iter().min_by(|a, b| a.min_scaled.total_cmp(&b.min_scaled)).unwrap();
    outcome(
        drift.drift <= 1e-6 && low.min_scaled >= -1e-9,
        format!(
            "{} integrations; max |N+D-N0|/N0 {:.2e} ({}), min state/N0 {:.2e} ({})",
            log.len(),
            drift.drift,
            drift.label,
            low.min_scaled,
            low.label
        ),
    )
}

// 6
fn reduction() -> Outcome {
    let bf = ModelParams::nyc_behavior_free();
    let mut two = bf.clone();
    two.a = vec![0.0, 0.0];
    two.c_b = vec![vec![0.0, 0.0], vec![0.0, 0.0]];
    let ic = InitialConditions { k: 0.5, ..Default::default() };
    let opts = SolverOptions::default().scaled(1e-2);
    let a = integrate_with(&two, &ic.build(2).unwrap(), 400.0, 1.0, Dynamics::Behavior, &opts);
    let b = integrate_with(&bf, &ic.build(1).unwrap(), 400.0, 1.0, Dynamics::BehaviorFree, &opts);
    let (a, b) = match (a, b) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return fail(e.to_string()),
    };
    audit("reduction two-group", &a);
    audit("reduction behavior-free", &b);
    let mut worst: f64 = 0.0;
    for (x, y) in a.states.iter().zip(&b.states) {
        for (u, v) in x.aggregate().as_slice().iter().zip(y.as_slice()) {
            if u != v {
                worst = worst.max((u - v).abs() / u.abs().max(v.abs()));
            }
        }
    }
    outcome(worst <= 1e-8, format!("400 days, max componentwise relative gap {worst:.2e}"))
}

fn baseline_wave1(k: f64) -> Result<WaveMetrics, String> {
    let p = ModelParams::nyc_two_group();
    let ic = InitialConditions { k, ..Default::default() };
    let w = DateWindow::first_wave();
    let cal = behavior_epi::calendar::PhaseCalendar::default();
    let end = cal.day(w.end) as f64;
    let tr = integrate(&p, &ic.build(2).map_err(|e| e.to_string())?, end, 1.0).map_err(|e| e.to_string())?;
    audit(&format!("baseline k={k}"), &tr);
    wave_metrics(&tr, (cal.day(w.start) as f64, end)).map_err(|e| e.to_string())
}

// 7
fn table_anchors() -> Outcome {
    let (m0, m1) = match (baseline_wave1(0.0), baseline_wave1(1.0)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return fail(e),
    };
    let checks = [
        ("k=0 peak", m0.peak_daily_hosp, 1630.0),
        ("k=0 mortality", m0.cum_mortality, 17_914.0),
        ("k=1 peak", m1.peak_daily_hosp, 736.0),
    ];
    let pass = checks.iter().all(|(_, got, want)| rel(*got, *want) <= 0.10);
    let detail = checks
        .iter()
        .map(|(name, got, want)| format!("{name} {got:.0} vs {want:.0} ({:+.1}%)", 100.0 * (got - want) / want))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, detail)
}

/// Daily counts whose trailing 7-day mean reproduces `target` from day `k0` on, each
/// multiplied by 1 + 0.01·z.
fn synthetic_counts(target: &[f64], seed: u64) -> Vec<f64> {
    let k0 = 14;
    let n = target.len();
    let near = |i: usize| target[(i + 3).min(n - 1)];
    let mut counts: Vec<f64> = (0..k0).map(near).collect();
    for i in k0..n {
        let prev: f64 = counts[i - 6..i].iter().sum();
        counts.push(7.0 * target[i] - prev);
    }
    // A zero-sum period-7 pattern leaves every 7-day sum unchanged; pick the one that keeps
    // counts closest to the centered target.
    let mut mean = [0.0; 7];
    let mut hits = [0.0; 7];
    for i in 0..n {
        mean[i % 7] += counts[i] - near(i);
        hits[i % 7] += 1.0;
    }
    for r in 0..7 {
        mean[r] /= hits[r];
    }
    let centre = mean.iter().sum::<f64>() / 7.0;
    for (i, c) in counts.iter_mut().enumerate() {
        *c -= mean[i % 7] - centre;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, 0.01).unwrap();
    counts.iter().map(|c| (c * (1.0 + noise.sample(&mut rng))).max(0.0)).collect()
}

// 8
fn synthetic_recovery() -> Outcome {
    let mut config = FitConfig::behavior_free();
    config.fit_window = DateWindow::new(date(2020, 3, 14), config.validation_window.end);
    let truth = config.base_params().unwrap();
    let last_day = config.calendar.day(config.fit_window.end);
    let tr = match simulate(config.model, &truth, &config.initial, last_day) {
        Ok(tr) => tr,
        Err(e) => return fail(e.to_string()),
    };
    audit("synthetic truth", &tr);
    let mut worst: f64 = 0.0;
    let mut lines = Vec::new();
    for seed in [11u64, 12, 13] {
        let counts = synthetic_counts(&tr.ih_total, seed);
        let series = match HospitalizationSeries::new(config.calendar.epoch, counts) {
            Ok(s) => s,
            Err(e) => return fail(e.to_string()),
        };
        let r = match fit(&config, &series) {
            Ok(r) => r,
            Err(e) => return fail(format!("seed {seed}: {e}")),
        };
        let errs: Vec<f64> = BEHAVIOR_FREE_THETA
            .iter()
            .enumerate()
            .map(|(i, t)| rel(r.value(&format!("theta{}", i + 1)).unwrap_or(f64::NAN), *t))
            .collect();
        let w = errs.iter().cloned().fold(0.0, f64::max);
        worst = if w.is_nan() { f64::NAN } else { worst.max(w) };
        lines.push(format!("seed {seed} max {:.2}%", 100.0 * w));
    }
    outcome(worst <= 0.05, format!("{}; worst {:.2}%", lines.join(", "), 100.0 * worst))
}

// 9
fn nyc_fit() -> Outcome {
    let path = match std::env::var("BEHAVIOR_EPI_NYC_DATA") {
        Ok(p) => p,
        Err(_) => return fail("NYC hospitalization extract not available; set BEHAVIOR_EPI_NYC_DATA to its CSV"),
    };
    let series = match load_series(&path, &SeriesColumns::default()) {
        Ok(s) => s,
        Err(e) => return fail(format!("{path}: {e}")),
    };
    let bf_cfg = FitConfig::behavior_free();
    let bf = match fit(&bf_cfg, &series) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    let theta_ok = BEHAVIOR_FREE_THETA
        .iter()
        .enumerate()
        .all(|(i, t)| bf.value(&format!("theta{}", i + 1)).is_some_and(|v| rel(v, *t) <= 0.15));
    let bf_val = match cross_validate(&bf, &series, bf_cfg.validation_window) {
        Ok(v) => v,
        Err(e) => return fail(e.to_string()),
    };
    let two_cfg = FitConfig::two_group();
    let two = match fit(&two_cfg, &series).and_then(|r| cross_validate(&r, &series, two_cfg.validation_window)) {
        Ok(v) => v,
        Err(e) => return fail(e.to_string()),
    };
    let over = bf_val.end_relative_error;
    outcome(
        theta_ok && (0.80..=1.30).contains(&over) && two.end_relative_error.abs() <= 0.15,
        format!(
            "theta {:?}, behavior-free end over-estimate {:.0}%, two-group end error {:+.1}%",
            bf.estimates.iter().map(|e| format!("{:.4}", e.value)).collect::<Vec<_>>(),
            100.0 * over,
            100.0 * two.end_relative_error
        ),
    )
}

// 10
fn prcc_suite() -> Outcome {
    let x = latin_hypercube_unit(1000, 18, 10);
    let monotone: Vec<f64> = x.iter().map(|r| (3.0 * r[0]).exp()).collect();
    let mono = match prcc(&x, &monotone) {
        Ok(c) => c[0],
        Err(e) => return fail(e.to_string()),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let noise: Vec<f64> = (0..1000).map(|_| rng.random::<f64>()).collect();
    let null = match prcc(&x, &noise) {
        Ok(c) => c.iter().map(|v| v.abs()).fold(0.0, f64::max),
        Err(e) => return fail(e.to_string()),
    };
    let t0 = Instant::now();
    let run = match run_prcc(&PrccConfig::default()) {
        Ok(r) => r,
        Err(e) => return fail(e.to_string()),
    };
    let secs = t0.elapsed().as_secs_f64();
    let april = run.result(Response::PeakDailyHosp, date(2020, 4, 20)).expect("april snapshot");
    let top = ["beta_a", "beta_i", "theta1", "sigma_e", "q"];
    let values: Vec<f64> = top.iter().map(|n| april.coefficient(n).unwrap_or(f64::NAN)).collect();
    let pipeline_ok = values.iter().all(|v| *v > 0.4);
    outcome(
        mono > 0.99 && null < 0.15 && pipeline_ok && secs < 600.0,
        format!(
            "monotone {mono:.4}, max |null| {null:.3}, April peak [{}], {} excluded, pipeline {secs:.1}s",
            top.iter().zip(&values).map(|(n, v)| format!("{n} {v:+.3}")).collect::<Vec<_>>().join(", "),
            run.excluded
        ),
    )
}

// 11
fn lockdown_anchors() -> Outcome {
    let spec = LockdownSweepSpec::default();
    let baseline_eff = 1.0 - TWO_GROUP_THETA[0];
    for (start, eff) in [(14.0, 0.5), (14.0, baseline_eff)] {
        let mut p = ModelParams::nyc_two_group();
        p.theta = spec.schedule(&p.theta, start, eff).unwrap();
        let end = spec.calendar.day(spec.wave1.end) as f64;
        match integrate(&p, &spec.initial.build(2).unwrap(), end, 1.0) {
            Ok(tr) => audit(&format!("lockdown {start}/{eff:.3}"), &tr),
            Err(e) => return fail(e.to_string()),
        }
    }
    let (half, base) = match (spec.evaluate(14.0, 0.5), spec.evaluate(14.0, baseline_eff)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return fail(e.to_string()),
    };
    outcome(
        rel(half, 14_000.0) <= 0.15 && rel(base, 22_000.0) <= 0.15,
        format!("(14 d, 0.5) {half:.0} vs 14000, baseline (14 d, {baseline_eff:.3}) {base:.0} vs 22000"),
    )
}

fn main() {
    // `cargo test` passes harness flags; only a `--list` request needs an answer.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("reproduction number table", reproduction_table),
        ("next-generation oracle", next_generation_oracle),
        ("convergence suite", convergence_suite),
        ("Metzler checker", metzler_checker),
        ("reduction equivalence", reduction),
        ("wave-1 anchors", table_anchors),
        ("synthetic calibration recovery", synthetic_recovery),
        ("NYC fit and validation", nyc_fit),
        ("PRCC suite", prcc_suite),
        ("lockdown sweep anchors", lockdown_anchors),
        ("conservation and positivity", conservation),
    ];
    let ids = [1, 2, 3, 4, 6, 7, 8, 9, 10, 11, 5];
    let mut results = Vec::new();
    for (id, (name, run)) in ids.iter().zip(criteria) {
        let t0 = Instant::now();
        let o = run();
        results.push((*id, name, o, t0.elapsed().as_secs_f64()));
    }
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    for (id, name, o, secs) in &results {
        if !o.pass {
            failed += 1;
        }
        println!("{} {id:>2} {name}: {} [{secs:.2}s]", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("{} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
