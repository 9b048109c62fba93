//! Latin hypercube sampling and partial rank correlation coefficients.

use std::io::Write;

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calendar::{date, PhaseCalendar};
use crate::integrator::{integrate, IntegrationError};
use crate::model::ModelError;
use crate::params::{LockdownSchedule, ModelParams, ThetaSegment};
use crate::state::InitialConditions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensitivityError {
    #[error("degenerate range for {0}")]
    DegenerateRange(String),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("regressor matrix is rank deficient")]
    RankDeficient,
    #[error("{excluded} of {total} samples failed to integrate (limit 1%)")]
    TooManyExclusions { excluded: usize, total: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
}

/// n × d matrix in [0, 1): each column hits every stratum [k/n, (k+1)/n) exactly once.
pub fn latin_hypercube_unit(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = vec![vec![0.0; d]; n];
    let mut strata: Vec<usize> = (0..n).collect();
    for j in 0..d {
        strata.shuffle(&mut rng);
        for (i, row) in rows.iter_mut().enumerate() {
            let u: f64 = rng.random();
            row[j] = (strata[i] as f64 + u) / n as f64;
        }
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensParam {
    Theta1,
    Theta2,
    Theta3,
    Theta4,
    #[serde(rename = "c_b12")]
    CB12,
    #[serde(rename = "c_b21")]
    CB21,
    A1,
    A2,
    Xi,
    SigmaI,
    SigmaE,
    GammaA,
    GammaH,
    DeltaH,
    BetaA,
    BetaI,
    R,
    Q,
}

impl SensParam {
    pub const ALL: [SensParam; 18] = [
        SensParam::Theta1,
        SensParam::Theta2,
        SensParam::Theta3,
        SensParam::Theta4,
        SensParam::CB12,
        SensParam::CB21,
        SensParam::A1,
        SensParam::A2,
        SensParam::Xi,
        SensParam::SigmaI,
        SensParam::SigmaE,
        SensParam::GammaA,
        SensParam::GammaH,
        SensParam::DeltaH,
        SensParam::BetaA,
        SensParam::BetaI,
        SensParam::R,
        SensParam::Q,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SensParam::Theta1 => "theta1",
            SensParam::Theta2 => "theta2",
            SensParam::Theta3 => "theta3",
            SensParam::Theta4 => "theta4",
            SensParam::CB12 => "c_b12",
            SensParam::CB21 => "c_b21",
            SensParam::A1 => "a1",
            SensParam::A2 => "a2",
            SensParam::Xi => "xi",
            SensParam::SigmaI => "sigma_i",
            SensParam::SigmaE => "sigma_e",
            SensParam::GammaA => "gamma_a",
            SensParam::GammaH => "gamma_h",
            SensParam::DeltaH => "delta_h",
            SensParam::BetaA => "beta_a",
            SensParam::BetaI => "beta_i",
            SensParam::R => "r",
            SensParam::Q => "q",
        }
    }

    fn theta_index(self) -> Option<usize> {
        match self {
            SensParam::Theta1 => Some(1),
            SensParam::Theta2 => Some(2),
            SensParam::Theta3 => Some(3),
            SensParam::Theta4 => Some(4),
            _ => None,
        }
    }

    pub fn is_theta(self) -> bool {
        self.theta_index().is_some()
    }

    pub fn get(self, p: &ModelParams) -> f64 {
        match self {
            SensParam::CB12 => p.c_b[0][1],
            SensParam::CB21 => p.c_b[1][0],
            SensParam::A1 => p.a[0],
            SensParam::A2 => p.a[1],
            SensParam::Xi => p.xi,
            SensParam::SigmaI => p.sigma_i,
            SensParam::SigmaE => p.sigma_e,
            SensParam::GammaA => p.gamma_a,
            SensParam::GammaH => p.gamma_h,
            SensParam::DeltaH => p.delta_h,
            SensParam::BetaA => p.beta_a,
            SensParam::BetaI => p.beta_i,
            SensParam::R => p.r,
            SensParam::Q => p.q,
            t => p.theta.segments()[t.theta_index().unwrap_or(0)].value,
        }
    }

    pub fn set(self, p: &mut ModelParams, v: f64) -> Result<(), ModelError> {
        match self {
            SensParam::CB12 => p.c_b[0][1] = v,
            SensParam::CB21 => p.c_b[1][0] = v,
            SensParam::A1 => p.a[0] = v,
            SensParam::A2 => p.a[1] = v,
            SensParam::Xi => p.xi = v,
            SensParam::SigmaI => p.sigma_i = v,
            SensParam::SigmaE => p.sigma_e = v,
            SensParam::GammaA => p.gamma_a = v,
            SensParam::GammaH => p.gamma_h = v,
            SensParam::DeltaH => p.delta_h = v,
            SensParam::BetaA => p.beta_a = v,
            SensParam::BetaI => p.beta_i = v,
            SensParam::R => p.r = v,
            SensParam::Q => p.q = v,
            t => p.theta = p.theta.with_value(t.theta_index().unwrap_or(0), v)?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub param: SensParam,
    pub baseline: f64,
    pub low: f64,
    pub high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRangeTable {
    pub entries: Vec<ParamRange>,
}

impl ParamRangeTable {
    /// All 18 parameters at `baseline ± spread·baseline`.
    pub fn around(base: &ModelParams, spread: f64) -> Result<Self, SensitivityError> {
        let entries = SensParam::ALL
            .iter()
            .map(|&param| {
                let b = param.get(base);
                let e = ParamRange { param, baseline: b, low: (1.0 - spread) * b, high: (1.0 + spread) * b };
                if !(e.low < e.baseline && e.baseline < e.high) {
                    return Err(SensitivityError::DegenerateRange(param.name().into()));
                }
                Ok(e)
            })
            .collect::<Result<_, _>>()?;
        Ok(Self { entries })
    }

    pub fn nyc() -> Self {
        Self::around(&ModelParams::nyc_two_group(), 0.4).expect("positive baselines")
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.entries.iter().map(|e| e.param.name()).collect()
    }

    /// Parameter set for one sample row. θ values above 1 are capped when `cap_theta`.
    pub fn apply(&self, base: &ModelParams, row: &[f64], cap_theta: bool) -> Result<ModelParams, SensitivityError> {
        if row.len() != self.entries.len() {
            return Err(SensitivityError::Dimension(format!("row of {} for {} parameters", row.len(), self.entries.len())));
        }
        let mut p = base.clone();
        let mut excess = Vec::new();
        for (e, &v) in self.entries.iter().zip(row) {
            if e.param.is_theta() && v > 1.0 {
                if !cap_theta {
                    excess.push((e.param, v));
                }
                e.param.set(&mut p, 1.0)?;
            } else {
                e.param.set(&mut p, v)?;
            }
        }
        for (param, v) in excess {
            scale_phase(&mut p, param, v)?;
        }
        Ok(p)
    }
}

/// A schedule value above 1 is expressed by multiplying the transmission rates by `v`
/// and dividing every other phase by `v`; θ·β is then as requested in every phase.
fn scale_phase(p: &mut ModelParams, param: SensParam, v: f64) -> Result<(), ModelError> {
    let idx = param.theta_index().unwrap_or(0);
    let segs = p
        .theta
        .segments()
        .iter()
        .enumerate()
        .map(|(i, s)| ThetaSegment { start_day: s.start_day, value: if i == idx { s.value } else { s.value / v } })
        .collect();
    p.theta = LockdownSchedule::new(segs)?;
    p.beta_a *= v;
    p.beta_i *= v;
    p.beta_h *= v;
    Ok(())
}

/// Scaled copy of `n` unit Latin hypercube rows onto the table's ranges.
pub fn lhs_sample(table: &ParamRangeTable, n: usize, seed: u64) -> Result<Vec<Vec<f64>>, SensitivityError> {
    if n < 2 {
        return Err(SensitivityError::TooFewSamples { need: 2, got: n });
    }
    if let Some(e) = table.entries.iter().find(|e| !(e.high > e.low)) {
        return Err(SensitivityError::DegenerateRange(e.param.name().into()));
    }
    Ok(latin_hypercube_unit(n, table.entries.len(), seed)
        .into_iter()
        .map(|row| row.iter().zip(&table.entries).map(|(u, e)| e.low + u * (e.high - e.low)).collect())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Response {
    PeakDailyHosp,
    CumulativeMortality,
}

impl Response {
    pub fn name(self) -> &'static str {
        match self {
            Response::PeakDailyHosp => "peak_daily_hosp",
            Response::CumulativeMortality => "cumulative_mortality",
        }
    }
}

/// Running peak of total Ih and cumulative deaths at one snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnapshotResponse {
    pub snapshot: NaiveDate,
    pub peak_daily_hosp: f64,
    pub cumulative_mortality: f64,
}

impl SnapshotResponse {
    pub fn get(&self, r: Response) -> f64 {
        match r {
            Response::PeakDailyHosp => self.peak_daily_hosp,
            Response::CumulativeMortality => self.cumulative_mortality,
        }
    }
}

/// Integrates from the epoch to the last snapshot and reads both responses at each snapshot.
pub fn responses(
    params: &ModelParams,
    initial: &InitialConditions,
    calendar: &PhaseCalendar,
    snapshots: &[NaiveDate],
) -> Result<Vec<SnapshotResponse>, SensitivityError> {
    let days: Vec<i64> = snapshots.iter().map(|&d| calendar.day(d)).collect();
    let last = *days.iter().max().ok_or_else(|| SensitivityError::Dimension("no snapshots".into()))?;
    if days.iter().any(|&d| d < 1) {
        return Err(SensitivityError::Dimension("snapshots must follow the epoch".into()));
    }
    let st = initial.build(params.groups())?;
    let tr = integrate(params, &st, last as f64, 1.0)?;
    Ok(snapshots
        .iter()
        .zip(days)
        .map(|(&snapshot, d)| {
            let d = d as usize;
            SnapshotResponse {
                snapshot,
                peak_daily_hosp: tr.ih_total[..=d].iter().fold(0.0, |m: f64, &v| m.max(v)),
                cumulative_mortality: tr.deaths[d],
            }
        })
        .collect())
}

/// Ranks starting at 1, ties receive their average rank.
pub fn rank(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

fn pearson(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.sum() / n, b.sum() / n);
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b.iter()) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// PRCC of every column of `x` (rows are samples) against `y`.
pub fn prcc(x: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>, SensitivityError> {
    let n = x.len();
    if n < 20 {
        return Err(SensitivityError::TooFewSamples { need: 20, got: n });
    }
    if y.len() != n {
        return Err(SensitivityError::Dimension(format!("{} responses for {n} samples", y.len())));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) || n <= d + 1 {
        return Err(SensitivityError::Dimension("ragged or too narrow sample matrix".into()));
    }
    let ranks: Vec<Vec<f64>> = (0..d).map(|j| rank(&x.iter().map(|r| r[j]).collect::<Vec<_>>())).collect();
    let ry = DVector::from_vec(rank(y));
    (0..d)
        .map(|j| {
            let mut z = DMatrix::from_element(n, d, 1.0);
            for (c, k) in (0..d).filter(|&k| k != j).enumerate() {
                for i in 0..n {
                    z[(i, c + 1)] = ranks[k][i];
                }
            }
            let svd = z.clone().svd(true, true);
            let smax = svd.singular_values.max();
            if svd.singular_values.min() <= 1e-10 * smax {
                return Err(SensitivityError::RankDeficient);
            }
            let xj = DVector::from_vec(ranks[j].clone());
            let bx = svd.solve(&xj, 0.0).map_err(|_| SensitivityError::RankDeficient)?;
            let by = svd.solve(&ry, 0.0).map_err(|_| SensitivityError::RankDeficient)?;
            let rx = &xj - &z * bx;
            let r_y = &ry - &z * by;
            Ok(pearson(&rx, &r_y))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrccResult {
    pub response: Response,
    pub snapshot: NaiveDate,
    pub coefficients: Vec<(String, f64)>,
    pub samples: usize,
}

impl PrccResult {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.coefficients.iter().find(|c| c.0 == name).map(|c| c.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrccConfig {
    pub samples: usize,
    pub seed: u64,
    pub snapshots: Vec<NaiveDate>,
    pub spread: f64,
    pub cap_theta: bool,
    pub initial: InitialConditions,
    pub calendar: PhaseCalendar,
    pub base: Option<ModelParams>,
}

impl Default for PrccConfig {
    fn default() -> Self {
        Self {
            samples: 1000,
            seed: 20200420,
            snapshots: vec![date(2020, 4, 20), date(2021, 2, 21)],
            spread: 0.4,
            cap_theta: true,
            initial: InitialConditions::default(),
            calendar: PhaseCalendar::default(),
            base: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrccRun {
    pub table: ParamRangeTable,
    pub samples: Vec<Vec<f64>>,
    /// Per sample, `None` when integration failed.
    pub responses: Vec<Option<Vec<SnapshotResponse>>>,
    pub excluded: usize,
    pub results: Vec<PrccResult>,
}

/// Samples, integrates every row in parallel, then computes PRCC per response and snapshot.
pub fn run_prcc(config: &PrccConfig) -> Result<PrccRun, SensitivityError> {
    let base = config.base.clone().unwrap_or_else(ModelParams::nyc_two_group);
    let table = ParamRangeTable::around(&base, config.spread)?;
    let samples = lhs_sample(&table, config.samples, config.seed)?;
    let responses: Vec<Option<Vec<SnapshotResponse>>> = samples
        .par_iter()
        .map(|row| {
            let p = table.apply(&base, row, config.cap_theta).ok()?;
            responses(&p, &config.initial, &config.calendar, &config.snapshots).ok()
        })
        .collect();
    let excluded = responses.iter().filter(|r| r.is_none()).count();
    if excluded * 100 > samples.len() {
        return Err(SensitivityError::TooManyExclusions { excluded, total: samples.len() });
    }
    let kept: Vec<usize> = (0..samples.len()).filter(|&i| responses[i].is_some()).collect();
    let x: Vec<Vec<f64>> = kept.iter().map(|&i| samples[i].clone()).collect();
    let names = table.names();
    let mut results = Vec::new();
    for (si, &snapshot) in config.snapshots.iter().enumerate() {
        for response in [Response::PeakDailyHosp, Response::CumulativeMortality] {
            let y: Vec<f64> = kept
                .iter()
                .map(|&i| responses[i].as_ref().map(|r| r[si].get(response)).unwrap_or(f64::NAN))
                .collect();
            let c = prcc(&x, &y)?;
            results.push(PrccResult {
                response,
                snapshot,
                coefficients: names.iter().map(|n| n.to_string()).zip(c).collect(),
                samples: x.len(),
            });
        }
    }
    Ok(PrccRun { table, samples, responses, excluded, results })
}

impl PrccRun {
    pub fn result(&self, response: Response, snapshot: NaiveDate) -> Option<&PrccResult> {
        self.results.iter().find(|r| r.response == response && r.snapshot == snapshot)
    }

    /// parameter, response, snapshot, coefficient
    pub fn write_prcc_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["parameter", "response", "snapshot", "coefficient"])?;
        for r in &self.results {
            for (name, c) in &r.coefficients {
                out.write_record([name.clone(), r.response.name().into(), r.snapshot.to_string(), c.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }

    /// One row per sample: parameters, then both responses at every snapshot (empty if excluded).
    pub fn write_samples_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = vec!["sample".into()];
        header.extend(self.table.names().iter().map(|s| s.to_string()));
        let snaps: Vec<NaiveDate> = self.results.iter().map(|r| r.snapshot).fold(Vec::new(), |mut v, d| {
            if !v.contains(&d) {
                v.push(d);
            }
            v
        });
        for d in &snaps {
            header.push(format!("peak_daily_hosp_{d}"));
            header.push(format!("cumulative_mortality_{d}"));
        }
        out.write_record(&header)?;
        for (i, row) in self.samples.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            match &self.responses[i] {
                Some(rs) => {
                    for r in rs {
                        rec.push(r.peak_daily_hosp.to_string());
                        rec.push(r.cumulative_mortality.to_string());
                    }
                }
                None => rec.extend(std::iter::repeat_n(String::new(), 2 * snaps.len())),
            }
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}
