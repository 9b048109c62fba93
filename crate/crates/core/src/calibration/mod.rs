//! Least-squares calibration of the lockdown and behavior parameters to hospitalization data.

mod optimize;
mod series;

use std::io::Write;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use optimize::{bfgs, minimize_bounded, nelder_mead, BoxTransform, Method, OptimOptions, OptimResult, Status};
pub use series::{load_series, parse_date, read_series, HospitalizationSeries, SeriesColumns};

use crate::calendar::{DateWindow, PhaseCalendar};
use crate::integrator::{integrate_with, Dynamics, IntegrationError, SolverOptions, Trajectory};
use crate::model::ModelError;
use crate::params::ModelParams;
use crate::sensitivity::latin_hypercube_unit;
use crate::state::InitialConditions;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CalibrationError {
    #[error("data error: {0}")]
    Data(String),
    #[error("missing days in series: {}", .0.join(", "))]
    Gaps(Vec<String>),
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error("no start converged to a finite objective")]
    NoConvergence,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    TwoGroup,
    BehaviorFree,
}

impl ModelKind {
    pub fn dynamics(self) -> Dynamics {
        match self {
            ModelKind::TwoGroup => Dynamics::Behavior,
            ModelKind::BehaviorFree => Dynamics::BehaviorFree,
        }
    }

    pub fn baseline(self) -> ModelParams {
        match self {
            ModelKind::TwoGroup => ModelParams::nyc_two_group(),
            ModelKind::BehaviorFree => ModelParams::nyc_behavior_free(),
        }
    }

    pub fn groups(self) -> usize {
        match self {
            ModelKind::TwoGroup => 2,
            ModelKind::BehaviorFree => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParam {
    A1,
    A2,
    #[serde(rename = "c_b12")]
    CB12,
    #[serde(rename = "c_b21")]
    CB21,
    Theta1,
    Theta2,
    Theta3,
    Theta4,
}

impl FreeParam {
    pub const ALL: [FreeParam; 8] = [
        FreeParam::A1,
        FreeParam::A2,
        FreeParam::CB12,
        FreeParam::CB21,
        FreeParam::Theta1,
        FreeParam::Theta2,
        FreeParam::Theta3,
        FreeParam::Theta4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FreeParam::A1 => "a1",
            FreeParam::A2 => "a2",
            FreeParam::CB12 => "c_b12",
            FreeParam::CB21 => "c_b21",
            FreeParam::Theta1 => "theta1",
            FreeParam::Theta2 => "theta2",
            FreeParam::Theta3 => "theta3",
            FreeParam::Theta4 => "theta4",
        }
    }

    fn theta_index(self) -> Option<usize> {
        match self {
            FreeParam::Theta1 => Some(1),
            FreeParam::Theta2 => Some(2),
            FreeParam::Theta3 => Some(3),
            FreeParam::Theta4 => Some(4),
            _ => None,
        }
    }

    fn needs_two_groups(self) -> bool {
        self.theta_index().is_none()
    }

    pub fn get(self, p: &ModelParams) -> f64 {
        match self {
            FreeParam::A1 => p.a[0],
            FreeParam::A2 => p.a[1],
            FreeParam::CB12 => p.c_b[0][1],
            FreeParam::CB21 => p.c_b[1][0],
            t => p.theta.segments()[t.theta_index().unwrap_or(0)].value,
        }
    }

    pub fn set(self, p: &mut ModelParams, v: f64) -> Result<(), ModelError> {
        match self {
            FreeParam::A1 => p.a[0] = v,
            FreeParam::A2 => p.a[1] = v,
            FreeParam::CB12 => p.c_b[0][1] = v,
            FreeParam::CB21 => p.c_b[1][0] = v,
            t => p.theta = p.theta.with_value(t.theta_index().unwrap_or(0), v)?,
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreeSpec {
    pub param: FreeParam,
    pub lower: f64,
    pub upper: f64,
    pub initial: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub model: ModelKind,
    pub free: Vec<FreeSpec>,
    pub fit_window: DateWindow,
    pub validation_window: DateWindow,
    pub calendar: PhaseCalendar,
    pub initial: InitialConditions,
    /// Fixed parameters; the model's NYC baseline when absent.
    pub base: Option<ModelParams>,
    /// Latin hypercube starts in addition to the configured initial guess.
    pub starts: usize,
    pub seed: u64,
    pub max_iterations: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self::two_group()
    }
}

fn spec(param: FreeParam, lower: f64, upper: f64, initial: f64) -> FreeSpec {
    FreeSpec { param, lower, upper, initial }
}

fn theta_specs() -> Vec<FreeSpec> {
    vec![
        spec(FreeParam::Theta1, 0.0, 1.0, 0.6),
        spec(FreeParam::Theta2, 0.0, 1.0, 0.05),
        spec(FreeParam::Theta3, 0.0, 1.0, 0.2),
        spec(FreeParam::Theta4, 0.0, 1.0, 0.3),
    ]
}

impl FitConfig {
    /// All eight behavior and lockdown parameters free.
    pub fn two_group() -> Self {
        let mut free = vec![
            spec(FreeParam::A1, 0.0, 20_000.0, 5_000.0),
            spec(FreeParam::A2, 0.0, 10_000.0, 2_000.0),
            spec(FreeParam::CB12, 1e-3, 0.2, 0.02),
            spec(FreeParam::CB21, 1e-3, 0.2, 0.02),
        ];
        free.extend(theta_specs());
        Self {
            model: ModelKind::TwoGroup,
            free,
            fit_window: DateWindow::first_wave(),
            validation_window: DateWindow::second_wave(),
            calendar: PhaseCalendar::default(),
            initial: InitialConditions::default(),
            base: None,
            starts: 8,
            seed: 20200229,
            max_iterations: 200,
        }
    }

    /// Only the four lockdown multipliers free.
    pub fn behavior_free() -> Self {
        Self { model: ModelKind::BehaviorFree, free: theta_specs(), ..Self::two_group() }
    }

    pub fn base_params(&self) -> Result<ModelParams, CalibrationError> {
        let mut p = self.base.clone().unwrap_or_else(|| self.model.baseline());
        let theta: Vec<f64> = p.theta.segments().iter().skip(1).map(|s| s.value).collect();
        if theta.len() == self.calendar.phase_starts.len() {
            p.theta = self.calendar.schedule(&theta)?;
        }
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), CalibrationError> {
        let bad = |m: String| Err(CalibrationError::Config(m));
        if self.free.is_empty() {
            return bad("no free parameters".into());
        }
        let base = self.base_params()?;
        if base.groups() != self.model.groups() {
            return bad(format!("{:?} model needs {} groups", self.model, self.model.groups()));
        }
        base.validate()?;
        for (i, s) in self.free.iter().enumerate() {
            if self.free[..i].iter().any(|o| o.param == s.param) {
                return bad(format!("{} listed twice", s.param.name()));
            }
            if s.param.needs_two_groups() && self.model != ModelKind::TwoGroup {
                return bad(format!("{} is not a parameter of the behavior-free model", s.param.name()));
            }
            if !(s.lower < s.upper) || !(s.lower..=s.upper).contains(&s.initial) {
                return bad(format!(
                    "{}: need lower < upper and initial inside ({} .. {}, initial {})",
                    s.param.name(),
                    s.lower,
                    s.upper,
                    s.initial
                ));
            }
            if s.param.theta_index().is_some() && (s.lower < 0.0 || s.upper > 1.0) {
                return bad(format!("{} bounds must lie in [0, 1]", s.param.name()));
            }
            if s.param.theta_index().is_some_and(|k| k >= base.theta.segments().len()) {
                return bad(format!("{} has no matching phase", s.param.name()));
            }
        }
        for (name, w) in [("fit", self.fit_window), ("validation", self.validation_window)] {
            if w.end < w.start {
                return bad(format!("{name} window ends before it starts"));
            }
            if w.start < self.calendar.epoch {
                return bad(format!("{name} window starts before the epoch"));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> BoxTransform {
        BoxTransform {
            lower: self.free.iter().map(|s| s.lower).collect(),
            upper: self.free.iter().map(|s| s.upper).collect(),
        }
    }

    pub fn params_at(&self, base: &ModelParams, x: &[f64]) -> Result<ModelParams, ModelError> {
        let mut p = base.clone();
        for (s, &v) in self.free.iter().zip(x) {
            s.param.set(&mut p, v)?;
        }
        Ok(p)
    }

    fn check_window_in(&self, w: DateWindow, series: &HospitalizationSeries) -> Result<(), CalibrationError> {
        if w.start < series.start() || w.end > series.end() {
            return Err(CalibrationError::Config(format!(
                "window {}..{} outside data span {}..{}",
                w.start,
                w.end,
                series.start(),
                series.end()
            )));
        }
        Ok(())
    }
}

/// Integrates `params` from the epoch through `last_day` with daily output.
pub fn simulate(
    kind: ModelKind,
    params: &ModelParams,
    initial: &InitialConditions,
    last_day: i64,
) -> Result<Trajectory, CalibrationError> {
    let st = initial.build(kind.groups())?;
    let t_end = last_day.max(1) as f64;
    Ok(integrate_with(params, &st, t_end, 1.0, kind.dynamics(), &SolverOptions::default())?)
}

/// (series index, model day) pairs of the window where the trailing mean is defined.
fn window_points(
    calendar: &PhaseCalendar,
    series: &HospitalizationSeries,
    window: DateWindow,
) -> Vec<(NaiveDate, f64, i64)> {
    series
        .dates()
        .iter()
        .zip(series.avg7())
        .filter(|(d, _)| window.contains(**d))
        .filter_map(|(d, a)| a.map(|v| (*d, v, calendar.day(*d))))
        .filter(|&(_, _, day)| day >= 0)
        .collect()
}

/// Model total Ih minus the trailing 7-day mean, for each day of the window with a defined mean.
pub fn residuals(
    config: &FitConfig,
    params: &ModelParams,
    series: &HospitalizationSeries,
    window: DateWindow,
) -> Result<Vec<f64>, CalibrationError> {
    let pts = window_points(&config.calendar, series, window);
    let last = pts.iter().map(|p| p.2).max().unwrap_or(1);
    let tr = simulate(config.model, params, &config.initial, last)?;
    Ok(pts.iter().map(|&(_, obs, day)| tr.ih_total[day as usize] - obs).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub name: String,
    pub value: f64,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartSummary {
    pub initial: Vec<f64>,
    pub initial_sse: f64,
    pub final_sse: f64,
    pub status: Status,
    pub method: Method,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionPoint {
    pub date: NaiveDate,
    pub day: i64,
    pub ih: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: ModelKind,
    pub estimates: Vec<Estimate>,
    /// Intervals come from a Gauss–Newton curvature approximation.
    pub intervals_approximate: bool,
    pub sse: f64,
    pub residual_points: usize,
    pub starts: Vec<StartSummary>,
    pub params: ModelParams,
    pub initial: InitialConditions,
    pub calendar: PhaseCalendar,
    pub fit_window: DateWindow,
    pub validation_window: DateWindow,
    pub prediction: Vec<PredictionPoint>,
    pub validation: Option<ValidationReport>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.estimates.iter().find(|e| e.name == name).map(|e| e.value)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit result serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, CalibrationError> {
        serde_json::from_str(s).map_err(|e| CalibrationError::Config(e.to_string()))
    }
}

/// Multi-start bounded least squares over the fit window.
pub fn fit(config: &FitConfig, series: &HospitalizationSeries) -> Result<FitResult, CalibrationError> {
    config.validate()?;
    config.check_window_in(config.fit_window, series)?;
    let base = config.base_params()?;
    let pts = window_points(&config.calendar, series, config.fit_window);
    if pts.len() <= config.free.len() {
        return Err(CalibrationError::Config(format!(
            "{} usable points for {} free parameters",
            pts.len(),
            config.free.len()
        )));
    }
    let last = pts.iter().map(|p| p.2).max().unwrap_or(1);
    let resid = |x: &[f64]| -> Option<Vec<f64>> {
        let p = config.params_at(&base, x).ok()?;
        let tr = simulate(config.model, &p, &config.initial, last).ok()?;
        Some(pts.iter().map(|&(_, obs, day)| tr.ih_total[day as usize] - obs).collect())
    };
    let sse = |x: &[f64]| -> f64 {
        resid(x).map(|r| r.iter().map(|v| v * v).sum()).unwrap_or(f64::INFINITY)
    };

    let bounds = config.bounds();
    let d = config.free.len();
    let mut inits = vec![config.free.iter().map(|s| s.initial).collect::<Vec<f64>>()];
    let unit = latin_hypercube_unit(config.starts, d, config.seed);
    for row in unit {
        inits.push(
            row.iter()
                .zip(&config.free)
                .map(|(&u, s)| s.lower + u * (s.upper - s.lower))
                .collect(),
        );
    }
    let opts = OptimOptions { max_iterations: config.max_iterations, ..Default::default() };
    let runs: Vec<(StartSummary, Vec<f64>)> = inits
        .par_iter()
        .map(|x0| {
            let f0 = sse(x0);
            let r = minimize_bounded(&sse, &bounds, x0, &opts);
            // Never report worse than the starting point.
            let (x, f) = if r.f <= f0 { (r.x.clone(), r.f) } else { (x0.clone(), f0) };
            let summary = StartSummary {
                initial: x0.clone(),
                initial_sse: f0,
                final_sse: f,
                status: r.status,
                method: r.method,
                iterations: r.iterations,
            };
            (summary, x)
        })
        .collect();
    let best = runs
        .iter()
        .enumerate()
        .filter(|(_, (s, _))| s.final_sse.is_finite())
        .min_by(|a, b| a.1 .0.final_sse.total_cmp(&b.1 .0.final_sse).then(a.0.cmp(&b.0)))
        .map(|(i, _)| i)
        .ok_or(CalibrationError::NoConvergence)?;
    let x = runs[best].1.clone();
    let best_sse = runs[best].0.final_sse;
    let params = config.params_at(&base, &x)?;

    let intervals = gauss_newton_intervals(&resid, &x, &bounds, best_sse, pts.len());
    let estimates = config
        .free
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let (lower, upper) = match &intervals {
                Some(iv) => (Some(iv[i].0), Some(iv[i].1)),
                None => (None, None),
            };
            Estimate { name: s.param.name().into(), value: x[i], lower, upper }
        })
        .collect();

    let horizon_end = config.fit_window.end.max(config.validation_window.end);
    let horizon = config.calendar.day(horizon_end);
    let tr = simulate(config.model, &params, &config.initial, horizon)?;
    let first = config.calendar.day(config.fit_window.start).max(0);
    let prediction = (first..=horizon)
        .map(|day| PredictionPoint { date: config.calendar.date_of(day), day, ih: tr.ih_total[day as usize].max(0.0) })
        .collect();

    let mut result = FitResult {
        model: config.model,
        estimates,
        intervals_approximate: true,
        sse: best_sse,
        residual_points: pts.len(),
        starts: runs.into_iter().map(|r| r.0).collect(),
        params,
        initial: config.initial.clone(),
        calendar: config.calendar.clone(),
        fit_window: config.fit_window,
        validation_window: config.validation_window,
        prediction,
        validation: None,
    };
    if config.check_window_in(config.validation_window, series).is_ok() {
        result.validation = Some(cross_validate(&result, series, config.validation_window)?);
    }
    Ok(result)
}

/// ±1.96 σ from σ² (JᵀJ)⁻¹ with σ² = SSE/(m − p), clipped to the bounds.
fn gauss_newton_intervals(
    resid: &(dyn Fn(&[f64]) -> Option<Vec<f64>> + Sync),
    x: &[f64],
    bounds: &BoxTransform,
    sse: f64,
    m: usize,
) -> Option<Vec<(f64, f64)>> {
    let p = x.len();
    if m <= p {
        return None;
    }
    let mut jac = nalgebra::DMatrix::zeros(m, p);
    for j in 0..p {
        let span = bounds.upper[j] - bounds.lower[j];
        let h = 1e-4 * x[j].abs().max(1e-3 * span);
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[j] = (x[j] + h).min(bounds.upper[j]);
        xm[j] = (x[j] - h).max(bounds.lower[j]);
        let (rp, rm) = (resid(&xp)?, resid(&xm)?);
        let dx = xp[j] - xm[j];
        for i in 0..m {
            jac[(i, j)] = (rp[i] - rm[i]) / dx;
        }
    }
    let cov = (jac.transpose() * &jac).try_inverse()?;
    let s2 = sse / (m - p) as f64;
    (0..p)
        .map(|j| {
            let var = s2 * cov[(j, j)];
            (var.is_finite() && var >= 0.0).then(|| {
                let half = 1.96 * var.sqrt();
                ((x[j] - half).max(bounds.lower[j]), (x[j] + half).min(bounds.upper[j]))
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRow {
    pub date: NaiveDate,
    pub observed_avg7: f64,
    pub predicted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeakInfo {
    pub date: NaiveDate,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub window: DateWindow,
    pub end_date: NaiveDate,
    pub observed_end: f64,
    pub predicted_end: f64,
    /// (predicted − observed)/observed on the last day; positive means over-estimate.
    pub end_relative_error: f64,
    /// Mean of |predicted − observed|/observed over days with observed > 0, as a fraction.
    pub mape: f64,
    pub sse: f64,
    /// Interior maximum of the prediction inside the window, if any.
    pub second_wave_peak: Option<PeakInfo>,
    pub rows: Vec<ValidationRow>,
}

impl ValidationReport {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["date", "observed_avg7", "predicted", "relative_error"])?;
        for r in &self.rows {
            let rel = if r.observed_avg7 > 0.0 { (r.predicted - r.observed_avg7) / r.observed_avg7 } else { f64::NAN };
            out.write_record([r.date.to_string(), r.observed_avg7.to_string(), r.predicted.to_string(), rel.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Continues the fitted trajectory over `window` without refitting and compares to the data.
pub fn cross_validate(
    fit: &FitResult,
    series: &HospitalizationSeries,
    window: DateWindow,
) -> Result<ValidationReport, CalibrationError> {
    let pts = window_points(&fit.calendar, series, window);
    let last = pts.last().ok_or_else(|| CalibrationError::Config(format!(
        "no observations in {}..{}",
        window.start, window.end
    )))?;
    let tr = simulate(fit.model, &fit.params, &fit.initial, last.2)?;
    let rows: Vec<ValidationRow> = pts
        .iter()
        .map(|&(date, obs, day)| ValidationRow { date, observed_avg7: obs, predicted: tr.ih_total[day as usize] })
        .collect();
    let end = rows.last().expect("non-empty window");
    let end_relative_error = if end.observed_avg7 > 0.0 {
        (end.predicted - end.observed_avg7) / end.observed_avg7
    } else {
        f64::NAN
    };
    let rel: Vec<f64> = rows
        .iter()
        .filter(|r| r.observed_avg7 > 0.0)
        .map(|r| ((r.predicted - r.observed_avg7) / r.observed_avg7).abs())
        .collect();
    let mape = if rel.is_empty() { f64::NAN } else { rel.iter().sum::<f64>() / rel.len() as f64 };
    let sse = rows.iter().map(|r| (r.predicted - r.observed_avg7).powi(2)).sum();
    let peak_i = (0..rows.len()).max_by(|&a, &b| rows[a].predicted.total_cmp(&rows[b].predicted)).unwrap_or(0);
    let second_wave_peak = (peak_i > 0 && peak_i + 1 < rows.len())
        .then(|| PeakInfo { date: rows[peak_i].date, value: rows[peak_i].predicted });
    Ok(ValidationReport {
        window,
        end_date: end.date,
        observed_end: end.observed_avg7,
        predicted_end: end.predicted,
        end_relative_error,
        mape,
        sse,
        second_wave_peak,
        rows,
    })
}

/// One row per predicted day: date, day, Ih, and the observed trailing mean where known.
pub fn write_prediction_csv<W: Write>(
    fit: &FitResult,
    series: Option<&HospitalizationSeries>,
    w: W,
) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["date", "day", "predicted_ih", "observed_avg7", "segment"])?;
    for p in &fit.prediction {
        let obs = series.and_then(|s| s.avg7_on(p.date)).map(|v| v.to_string()).unwrap_or_default();
        let seg = if fit.fit_window.contains(p.date) {
            "fit"
        } else if fit.validation_window.contains(p.date) {
            "validation"
        } else {
            ""
        };
        out.write_record([p.date.to_string(), p.day.to_string(), p.ih.to_string(), obs, seg.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calendar::date;

    fn synthetic(config: &FitConfig, params: &ModelParams, days: i64) -> HospitalizationSeries {
        // Counts whose trailing mean reproduces the model output.
        let tr = simulate(config.model, params, &config.initial, days).unwrap();
        let target = &tr.ih_total;
        let mut counts = vec![target[0]; 6];
        for i in 6..target.len() {
            let prev: f64 = counts[i - 6..i].iter().sum();
            counts.push(7.0 * target[i] - prev);
        }
        HospitalizationSeries::new(config.calendar.epoch, counts).unwrap()
    }

    #[test]
    fn free_param_accessors() {
        let mut p = ModelParams::nyc_two_group();
        for fp in FreeParam::ALL {
            fp.set(&mut p, 0.5).unwrap();
            assert_eq!(fp.get(&p), 0.5, "{}", fp.name());
        }
        assert_eq!(p.theta.segments()[0].value, 1.0);
    }

    #[test]
    fn config_validation() {
        assert!(FitConfig::two_group().validate().is_ok());
        assert!(FitConfig::behavior_free().validate().is_ok());
        let mut c = FitConfig::behavior_free();
        c.free.push(spec(FreeParam::A1, 0.0, 1.0, 0.5));
        assert!(c.validate().is_err());
        let mut c = FitConfig::two_group();
        c.free[0].initial = -1.0;
        assert!(c.validate().is_err());
        let json = serde_json::to_string(&FitConfig::two_group()).unwrap();
        let back: FitConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, FitConfig::two_group());
        let partial: FitConfig = serde_json::from_str(r#"{"model":"behavior-free","free":[]}"#).unwrap();
        assert_eq!(partial.model, ModelKind::BehaviorFree);
    }

    #[test]
    fn residuals_of_exact_and_shifted_data() {
        let config = FitConfig::behavior_free();
        let p = config.base_params().unwrap();
        let tr = simulate(config.model, &p, &config.initial, 60).unwrap();
        // Make avg7 equal the model output by back-solving counts from the trailing mean.
        let target: Vec<f64> = tr.ih_total.iter().map(|v| v + 5.0).collect();
        let mut counts = vec![target[0]; 6];
        for i in 6..target.len() {
            let prev: f64 = counts[i - 6..i].iter().sum();
            counts.push(7.0 * target[i] - prev);
        }
        let series = HospitalizationSeries::new(config.calendar.epoch, counts).unwrap();
        let w = DateWindow::new(date(2020, 2, 29), date(2020, 4, 29));
        let r = residuals(&config, &p, &series, w).unwrap();
        assert_eq!(r.len(), 61 - 6);
        assert!(r.iter().all(|v| (v + 5.0).abs() < 1e-6), "{r:?}");
    }

    #[test]
    fn recovers_single_theta() {
        let mut config = FitConfig::behavior_free();
        config.free = vec![spec(FreeParam::Theta1, 0.0, 1.0, 0.8)];
        config.starts = 2;
        config.fit_window = DateWindow::new(date(2020, 2, 29), date(2020, 4, 4));
        let truth = config.base_params().unwrap();
        let series = synthetic(&config, &truth, 60);
        let r = fit(&config, &series).unwrap();
        assert!((r.value("theta1").unwrap() - 0.45).abs() < 0.02, "{:?}", r.estimates);
        for s in &r.starts {
            assert!(r.sse <= s.initial_sse);
        }
        assert!(r.intervals_approximate);
    }
}
