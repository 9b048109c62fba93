//! Batch scenario sweeps and the full study report.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{self, AnalysisError};
use crate::calendar::{DateWindow, PhaseCalendar};
use crate::calibration::{self, CalibrationError, FitConfig, ModelKind, SeriesColumns};
use crate::integrator::{integrate, wave_metrics, IntegrationError, Trajectory, WaveMetrics};
use crate::model::ModelError;
use crate::params::{LockdownSchedule, ModelParams, ThetaSegment};
use crate::sensitivity::{self, PrccConfig, SensitivityError};
use crate::state::InitialConditions;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid sweep: {0}")]
    Spec(String),
    #[error("i/o on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Integration(#[from] IntegrationError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Sensitivity(#[from] SensitivityError),
}

/// Evenly spaced points from `min` to `max` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl Grid {
    pub fn new(min: f64, max: f64, steps: usize) -> Self {
        Self { min, max, steps }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let ok = self.min.is_finite()
            && self.max.is_finite()
            && match self.steps {
                0 => false,
                1 => self.max == self.min,
                _ => self.max > self.min,
            };
        if ok {
            Ok(())
        } else {
            Err(ScenarioError::Spec(format!("degenerate grid {self:?}")))
        }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| if i + 1 == self.steps { self.max } else { self.min + i as f64 * h })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    A1,
    A2,
    #[serde(rename = "c_b12")]
    CB12,
    #[serde(rename = "c_b21")]
    CB21,
    /// Mean transition time 1/c^B₁₂ in days.
    Tau12,
    /// Mean transition time 1/c^B₂₁ in days.
    Tau21,
    Theta1,
    Theta2,
    Theta3,
    Theta4,
    /// Share of the population starting in group 1.
    K,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::A1 => "a1",
            SweepParam::A2 => "a2",
            SweepParam::CB12 => "c_b12",
            SweepParam::CB21 => "c_b21",
            SweepParam::Tau12 => "tau12",
            SweepParam::Tau21 => "tau21",
            SweepParam::Theta1 => "theta1",
            SweepParam::Theta2 => "theta2",
            SweepParam::Theta3 => "theta3",
            SweepParam::Theta4 => "theta4",
            SweepParam::K => "k",
        }
    }

    fn apply(self, p: &mut ModelParams, ic: &mut InitialConditions, v: f64) -> Result<(), ScenarioError> {
        let bad = |what: &str| ScenarioError::Spec(format!("{what} = {v} for {}", self.name()));
        match self {
            SweepParam::A1 | SweepParam::A2 | SweepParam::CB12 | SweepParam::CB21 if p.groups() < 2 => {
                return Err(bad("two groups required"));
            }
            SweepParam::A1 => p.a[0] = v,
            SweepParam::A2 => p.a[1] = v,
            SweepParam::CB12 => p.c_b[0][1] = v,
            SweepParam::CB21 => p.c_b[1][0] = v,
            SweepParam::Tau12 | SweepParam::Tau21 => {
                if !(v > 0.0) || p.groups() < 2 {
                    return Err(bad("mean time must be positive with two groups"));
                }
                let (i, j) = if self == SweepParam::Tau12 { (0, 1) } else { (1, 0) };
                p.c_b[i][j] = 1.0 / v;
            }
            SweepParam::Theta1 => p.theta = p.theta.with_value(1, v)?,
            SweepParam::Theta2 => p.theta = p.theta.with_value(2, v)?,
            SweepParam::Theta3 => p.theta = p.theta.with_value(3, v)?,
            SweepParam::Theta4 => p.theta = p.theta.with_value(4, v)?,
            SweepParam::K => {
                if !(0.0..=1.0).contains(&v) {
                    return Err(bad("k outside [0, 1]"));
                }
                ic.k = v;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    PeakHospWave1,
    PeakHospWave2,
    CumMortWave1,
    CumMortWave2,
    Wave2Length,
}

impl Metric {
    pub const ALL: [Metric; 5] =
        [Metric::PeakHospWave1, Metric::PeakHospWave2, Metric::CumMortWave1, Metric::CumMortWave2, Metric::Wave2Length];

    pub fn name(self) -> &'static str {
        match self {
            Metric::PeakHospWave1 => "peak_hosp_wave1",
            Metric::PeakHospWave2 => "peak_hosp_wave2",
            Metric::CumMortWave1 => "cum_mort_wave1",
            Metric::CumMortWave2 => "cum_mort_wave2",
            Metric::Wave2Length => "wave2_length",
        }
    }

    fn read(self, w1: &WaveMetrics, w2: &WaveMetrics) -> Option<f64> {
        match self {
            Metric::PeakHospWave1 => Some(w1.peak_daily_hosp),
            Metric::PeakHospWave2 => Some(w2.peak_daily_hosp),
            Metric::CumMortWave1 => Some(w1.cum_mortality),
            Metric::CumMortWave2 => Some(w2.cum_mortality),
            Metric::Wave2Length => w2.wave_length,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub grid: Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WaveWindows {
    pub wave1: DateWindow,
    pub wave2: DateWindow,
}

impl Default for WaveWindows {
    fn default() -> Self {
        Self { wave1: DateWindow::first_wave(), wave2: DateWindow::second_wave() }
    }
}

impl WaveWindows {
    fn days(&self, cal: &PhaseCalendar) -> ((f64, f64), (f64, f64)) {
        let d = |x| cal.day(x) as f64;
        ((d(self.wave1.start), d(self.wave1.end)), (d(self.wave2.start), d(self.wave2.end)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    /// Applied to every cell before the swept values.
    pub overrides: BTreeMap<SweepParam, f64>,
    pub k: f64,
    pub metrics: Vec<Metric>,
    pub windows: WaveWindows,
    pub calendar: PhaseCalendar,
    pub initial: InitialConditions,
    /// Two-group NYC baseline when absent.
    pub base: Option<ModelParams>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self::contact_grid()
    }
}

impl SweepSpec {
    fn with_axes(axes: Vec<SweepAxis>) -> Self {
        Self {
            axes,
            overrides: BTreeMap::new(),
            k: 0.0,
            metrics: Metric::ALL.to_vec(),
            windows: WaveWindows::default(),
            calendar: PhaseCalendar::default(),
            initial: InitialConditions::default(),
            base: None,
        }
    }

    /// a₁ ∈ [0, 12000] × a₂ ∈ [0, 4000], 40 × 40.
    pub fn contact_grid() -> Self {
        Self::with_axes(vec![
            SweepAxis { param: SweepParam::A1, grid: Grid::new(0.0, 12_000.0, 40) },
            SweepAxis { param: SweepParam::A2, grid: Grid::new(0.0, 4_000.0, 40) },
        ])
    }

    /// Mean transition times 1/c^B₁₂ × 1/c^B₂₁ over [1, 90] days, 40 × 40.
    pub fn influence_grid() -> Self {
        Self::with_axes(vec![
            SweepAxis { param: SweepParam::Tau12, grid: Grid::new(1.0, 90.0, 40) },
            SweepAxis { param: SweepParam::Tau21, grid: Grid::new(1.0, 90.0, 40) },
        ])
    }

    /// k ∈ {0, 0.2, …, 1}.
    pub fn split_grid() -> Self {
        Self::with_axes(vec![SweepAxis { param: SweepParam::K, grid: Grid::new(0.0, 1.0, 6) }])
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.axes.is_empty() || self.axes.len() > 2 {
            return Err(ScenarioError::Spec(format!("{} axes (1 or 2 allowed)", self.axes.len())));
        }
        if self.axes.len() == 2 && self.axes[0].param == self.axes[1].param {
            return Err(ScenarioError::Spec("both axes sweep the same parameter".into()));
        }
        for a in &self.axes {
            a.grid.validate()?;
        }
        if !(0.0..=1.0).contains(&self.k) {
            return Err(ScenarioError::Spec(format!("k = {} outside [0, 1]", self.k)));
        }
        if self.metrics.is_empty() {
            return Err(ScenarioError::Spec("no metrics requested".into()));
        }
        let ((s1, e1), (s2, e2)) = self.windows.days(&self.calendar);
        if s1 < 0.0 || e1 < s1 || s2 < 0.0 || e2 < s2 {
            return Err(ScenarioError::Spec("wave windows must follow the epoch and be ordered".into()));
        }
        Ok(())
    }

    fn cell_inputs(&self, values: &[f64]) -> Result<(ModelParams, InitialConditions), ScenarioError> {
        let mut p = self.base.clone().unwrap_or_else(ModelParams::nyc_two_group);
        let mut ic = InitialConditions { k: self.k, ..self.initial.clone() };
        for (&param, &v) in &self.overrides {
            param.apply(&mut p, &mut ic, v)?;
        }
        for (axis, &v) in self.axes.iter().zip(values) {
            axis.param.apply(&mut p, &mut ic, v)?;
        }
        p.validate()?;
        Ok((p, ic))
    }

    /// Metrics for one cell, `None` entries where the cell failed or the metric is undefined.
    pub fn evaluate(&self, values: &[f64]) -> Result<Vec<Option<f64>>, ScenarioError> {
        let (p, ic) = self.cell_inputs(values)?;
        let (w1, w2) = self.windows.days(&self.calendar);
        let st = ic.build(p.groups())?;
        let tr = integrate(&p, &st, w1.1.max(w2.1), 1.0)?;
        let m1 = wave_metrics(&tr, w1)?;
        let m2 = wave_metrics(&tr, w2)?;
        Ok(self.metrics.iter().map(|m| m.read(&m1, &m2)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub values: Vec<f64>,
    pub metrics: Vec<Option<f64>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axes: Vec<SweepAxis>,
    pub metrics: Vec<Metric>,
    /// Row-major over the axes, first axis slowest.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn get(&self, values: &[f64], metric: Metric) -> Option<f64> {
        let m = self.metrics.iter().position(|&x| x == metric)?;
        self.cells.iter().find(|c| c.values == values).and_then(|c| c.metrics[m])
    }

    pub fn column(&self, metric: Metric) -> Vec<Option<f64>> {
        let m = self.metrics.iter().position(|&x| x == metric);
        self.cells.iter().map(|c| m.and_then(|m| c.metrics[m])).collect()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<&str> = self.axes.iter().map(|a| a.param.name()).collect();
        header.extend(self.metrics.iter().map(|m| m.name()));
        out.write_record(&header)?;
        for c in &self.cells {
            let mut rec: Vec<String> = c.values.iter().map(|v| v.to_string()).collect();
            rec.extend(c.metrics.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

fn grid_points(axes: &[SweepAxis]) -> Vec<Vec<f64>> {
    let mut pts = vec![Vec::new()];
    for a in axes {
        pts = pts
            .into_iter()
            .flat_map(|p| {
                a.grid.values().into_iter().map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    pts
}

/// One integration per grid cell over both waves; failed cells are kept with missing metrics.
pub fn sweep(spec: &SweepSpec) -> Result<SweepResult, ScenarioError> {
    spec.validate()?;
    // Surface configuration errors once instead of in every cell.
    let first: Vec<f64> = spec.axes.iter().map(|a| a.grid.min).collect();
    spec.cell_inputs(&first)?;
    let cells = grid_points(&spec.axes)
        .into_par_iter()
        .map(|values| match spec.evaluate(&values) {
            Ok(metrics) => SweepCell { values, metrics, error: None },
            Err(e) => SweepCell { metrics: vec![None; spec.metrics.len()], values, error: Some(e.to_string()) },
        })
        .collect();
    Ok(SweepResult { axes: spec.axes.clone(), metrics: spec.metrics.clone(), cells })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LockdownSweepSpec {
    /// Days after the epoch at which phase 1 begins.
    pub start_days: Grid,
    /// Efficacy 1 − θ during phase 1.
    pub efficacies: Grid,
    pub k: f64,
    pub wave1: DateWindow,
    pub calendar: PhaseCalendar,
    pub initial: InitialConditions,
    pub base: Option<ModelParams>,
}

impl Default for LockdownSweepSpec {
    fn default() -> Self {
        Self {
            start_days: Grid::new(3.0, 35.0, 33),
            efficacies: Grid::new(0.1, 0.9, 17),
            k: 0.0,
            wave1: DateWindow::first_wave(),
            calendar: PhaseCalendar::default(),
            initial: InitialConditions::default(),
            base: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LockdownCell {
    pub start_day: f64,
    pub efficacy: f64,
    pub cum_mortality: Option<f64>,
    pub error: Option<String>,
}

impl LockdownSweepSpec {
    pub fn validate(&self) -> Result<(), ScenarioError> {
        self.start_days.validate()?;
        self.efficacies.validate()?;
        if self.start_days.min < 0.0 || self.start_days.max > 60.0 {
            return Err(ScenarioError::Spec("start days must lie in [0, 60]".into()));
        }
        if self.efficacies.min < 0.0 || self.efficacies.max > 1.0 {
            return Err(ScenarioError::Spec("efficacies must lie in [0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.k) {
            return Err(ScenarioError::Spec(format!("k = {} outside [0, 1]", self.k)));
        }
        Ok(())
    }

    /// Phase 1 moved to `start_day` with θ₁ = 1 − efficacy; later phases stay on their dates.
    pub fn schedule(&self, base: &LockdownSchedule, start_day: f64, efficacy: f64) -> Result<LockdownSchedule, ScenarioError> {
        let segs = base.segments();
        if segs.len() < 2 {
            return Err(ScenarioError::Spec("schedule has no phase 1".into()));
        }
        let day = start_day.round();
        if (day - start_day).abs() > 1e-9 || day < 1.0 {
            return Err(ScenarioError::Spec(format!("phase 1 start {start_day} must be a positive whole day")));
        }
        if let Some(next) = segs.get(2) {
            if day >= next.start_day as f64 {
                return Err(ScenarioError::Spec(format!(
                    "phase 1 start {day} not before phase 2 start {}",
                    next.start_day
                )));
            }
        }
        let mut out: Vec<ThetaSegment> = segs.to_vec();
        out[1] = ThetaSegment { start_day: day as u32, value: 1.0 - efficacy };
        Ok(LockdownSchedule::new(out)?)
    }

    pub fn evaluate(&self, start_day: f64, efficacy: f64) -> Result<f64, ScenarioError> {
        let mut p = self.base.clone().unwrap_or_else(ModelParams::nyc_two_group);
        p.theta = self.schedule(&p.theta, start_day, efficacy)?;
        let ic = InitialConditions { k: self.k, ..self.initial.clone() };
        let st = ic.build(p.groups())?;
        let (s, e) = (self.calendar.day(self.wave1.start) as f64, self.calendar.day(self.wave1.end) as f64);
        let tr = integrate(&p, &st, e, 1.0)?;
        Ok(wave_metrics(&tr, (s, e))?.cum_mortality)
    }
}

/// Wave-1 cumulative mortality per (phase 1 start, efficacy) cell.
pub fn lockdown_sweep(spec: &LockdownSweepSpec) -> Result<Vec<LockdownCell>, ScenarioError> {
    spec.validate()?;
    let pts: Vec<(f64, f64)> = spec
        .start_days
        .values()
        .into_iter()
        .flat_map(|s| spec.efficacies.values().into_iter().map(move |e| (s, e)))
        .collect();
    Ok(pts
        .into_par_iter()
        .map(|(start_day, efficacy)| match spec.evaluate(start_day, efficacy) {
            Ok(v) => LockdownCell { start_day, efficacy, cum_mortality: Some(v), error: None },
            Err(e) => LockdownCell { start_day, efficacy, cum_mortality: None, error: Some(e.to_string()) },
        })
        .collect())
}

pub fn write_lockdown_csv<W: Write>(cells: &[LockdownCell], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["start_day", "efficacy", "cum_mort_wave1"])?;
    for c in cells {
        out.write_record([
            c.start_day.to_string(),
            c.efficacy.to_string(),
            c.cum_mortality.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimulateSection {
    pub model: ModelKind,
    /// Last simulated day.
    pub days: u32,
    pub k: f64,
    /// Overrides the model's NYC baseline.
    pub params: Option<ModelParams>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self { model: ModelKind::TwoGroup, days: 390, k: 0.0, params: None }
    }
}

impl SimulateSection {
    pub fn run(&self, initial: &InitialConditions) -> Result<Trajectory, ScenarioError> {
        if !(0.0..=1.0).contains(&self.k) || self.days == 0 {
            return Err(ScenarioError::Spec("simulate needs k in [0, 1] and at least one day".into()));
        }
        let p = self.params.clone().unwrap_or_else(|| self.model.baseline());
        let ic = InitialConditions { k: self.k, ..initial.clone() };
        Ok(calibration::simulate(self.model, &p, &ic, self.days as i64)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSection {
    pub data: Option<PathBuf>,
    pub columns: SeriesColumns,
    pub two_group: FitConfig,
    pub behavior_free: FitConfig,
}

impl Default for CalibrationSection {
    fn default() -> Self {
        Self {
            data: None,
            columns: SeriesColumns::default(),
            two_group: FitConfig::two_group(),
            behavior_free: FitConfig::behavior_free(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StabilitySection {
    pub gammas: Grid,
    pub r_cs: Grid,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self { gammas: Grid::new(0.05, 3.0, 60), r_cs: Grid::new(0.05, 3.0, 60) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepsSection {
    pub contact: Option<SweepSpec>,
    pub influence: Option<SweepSpec>,
    pub split: Option<SweepSpec>,
    pub lockdown: Option<LockdownSweepSpec>,
}

impl Default for SweepsSection {
    fn default() -> Self {
        Self {
            contact: Some(SweepSpec::contact_grid()),
            influence: Some(SweepSpec::influence_grid()),
            split: Some(SweepSpec::split_grid()),
            lockdown: Some(LockdownSweepSpec::default()),
        }
    }
}

/// Single configuration document with one section per stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StudyConfig {
    pub seed: u64,
    pub initial: InitialConditions,
    pub simulate: SimulateSection,
    pub calibration: CalibrationSection,
    pub sensitivity: Option<PrccConfig>,
    pub stability: StabilitySection,
    pub sweeps: SweepsSection,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            seed: 20200229,
            initial: InitialConditions::default(),
            simulate: SimulateSection::default(),
            calibration: CalibrationSection::default(),
            sensitivity: Some(PrccConfig::default()),
            stability: StabilitySection::default(),
            sweeps: SweepsSection::default(),
        }
    }
}

impl StudyConfig {
    pub fn from_json(s: &str) -> Result<Self, ScenarioError> {
        serde_json::from_str(s).map_err(|e| ScenarioError::Spec(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.into(), source })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Every random stage draws from the one top-level seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self.apply_seed();
        self
    }

    pub fn apply_seed(&mut self) {
        self.calibration.two_group.seed = self.seed;
        self.calibration.behavior_free.seed = self.seed;
        if let Some(s) = self.sensitivity.as_mut() {
            s.seed = self.seed.wrapping_add(1);
        }
    }

    /// Initial conditions shared by every stage unless a section overrides them.
    pub fn propagate_initial(&mut self) {
        let ic = self.initial.clone();
        self.calibration.two_group.initial = ic.clone();
        self.calibration.behavior_free.initial = ic.clone();
        if let Some(s) = self.sensitivity.as_mut() {
            s.initial = ic.clone();
        }
        for s in [&mut self.sweeps.contact, &mut self.sweeps.influence, &mut self.sweeps.split].into_iter().flatten() {
            s.initial = ic.clone();
        }
        if let Some(l) = self.sweeps.lockdown.as_mut() {
            l.initial = ic;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Skipped,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: String,
    pub status: StageStatus,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub key: String,
    pub file: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    /// False when any stage failed or was skipped.
    pub complete: bool,
    pub stages: Vec<StageRecord>,
    pub artifacts: Vec<Artifact>,
}

impl Manifest {
    pub fn artifact(&self, key: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.key == key)
    }
}

struct Bundle<'a> {
    dir: &'a Path,
    manifest: Manifest,
}

impl Bundle<'_> {
    fn create(&self, file: &str) -> Result<BufWriter<File>, ScenarioError> {
        let path = self.dir.join(file);
        File::create(&path).map(BufWriter::new).map_err(|source| ScenarioError::Io { path, source })
    }

    fn record(&mut self, key: &str, file: &str, description: &str) {
        self.manifest.artifacts.push(Artifact { key: key.into(), file: file.into(), description: description.into() });
    }

    fn stage(&mut self, name: &str, r: Result<(), ScenarioError>) {
        let (status, detail) = match r {
            Ok(()) => (StageStatus::Ok, None),
            Err(e) => (StageStatus::Failed, Some(e.to_string())),
        };
        self.manifest.stages.push(StageRecord { stage: name.into(), status, detail });
    }

    fn skip(&mut self, name: &str, why: &str) {
        self.manifest.stages.push(StageRecord { stage: name.into(), status: StageStatus::Skipped, detail: Some(why.into()) });
    }
}

/// Runs every configured stage, writing CSV/JSON files and `manifest.json` into `dir`.
pub fn run_report(config: &StudyConfig, dir: &Path) -> Result<Manifest, ScenarioError> {
    std::fs::create_dir_all(dir).map_err(|source| ScenarioError::Io { path: dir.into(), source })?;
    let mut config = config.clone();
    config.apply_seed();
    let mut b = Bundle { dir, manifest: Manifest { seed: config.seed, complete: true, stages: vec![], artifacts: vec![] } };

    let r = stage_simulate(&config, &mut b);
    b.stage("simulate", r);
    let r = stage_reproduction(&mut b);
    b.stage("reproduction_numbers", r);
    let r = stage_stability(&config, &mut b);
    b.stage("stability", r);

    match &config.calibration.data {
        Some(path) => {
            let r = stage_calibration(&config, path, &mut b);
            b.stage("calibration", r);
        }
        None => b.skip("calibration", "no data file configured"),
    }
    match &config.sensitivity {
        Some(s) => {
            let r = stage_prcc(s, &mut b);
            b.stage("sensitivity", r);
        }
        None => b.skip("sensitivity", "section absent"),
    }
    let sweeps = [
        ("contact_sweep", &config.sweeps.contact, "Wave metrics over the a1 x a2 grid"),
        ("influence_sweep", &config.sweeps.influence, "Wave metrics over mean transition times 1/c_b12 x 1/c_b21"),
        ("initial_split_sweep", &config.sweeps.split, "Wave metrics for initial group-1 shares k"),
    ];
    for (key, spec, description) in sweeps {
        match spec {
            Some(spec) => {
                let r = (|| {
                    let res = sweep(spec)?;
                    let file = format!("{key}.csv");
                    res.write_csv(b.create(&file)?)?;
                    b.record(key, &file, description);
                    Ok(())
                })();
                b.stage(key, r);
            }
            None => b.skip(key, "section absent"),
        }
    }
    match &config.sweeps.lockdown {
        Some(spec) => {
            let r = (|| {
                let cells = lockdown_sweep(spec)?;
                write_lockdown_csv(&cells, b.create("lockdown_sweep.csv")?)?;
                b.record("lockdown_sweep", "lockdown_sweep.csv", "Wave-1 mortality over phase-1 start day x efficacy");
                Ok(())
            })();
            b.stage("lockdown_sweep", r);
        }
        None => b.skip("lockdown_sweep", "section absent"),
    }

    b.manifest.complete = b.manifest.stages.iter().all(|s| s.status == StageStatus::Ok);
    let json = serde_json::to_string_pretty(&b.manifest).expect("manifest serializes");
    let mut f = b.create("manifest.json")?;
    f.write_all(json.as_bytes())
        .and_then(|_| f.flush())
        .map_err(|source| ScenarioError::Io { path: dir.join("manifest.json"), source })?;
    Ok(b.manifest)
}

fn stage_simulate(config: &StudyConfig, b: &mut Bundle) -> Result<(), ScenarioError> {
    let epoch = Some(config.calibration.two_group.calendar.epoch);
    for (model, key, description) in [
        (ModelKind::TwoGroup, "trajectory_two_group", "Baseline two-group trajectory with contact rates and group shares"),
        (ModelKind::BehaviorFree, "trajectory_behavior_free", "Baseline behavior-free trajectory"),
    ] {
        let section = SimulateSection {
            model,
            params: if model == config.simulate.model { config.simulate.params.clone() } else { None },
            ..config.simulate.clone()
        };
        let tr = section.run(&config.initial)?;
        let file = format!("{key}.csv");
        tr.write_csv(b.create(&file)?, epoch)?;
        b.record(key, &file, description);
    }
    Ok(())
}

fn stage_reproduction(b: &mut Bundle) -> Result<(), ScenarioError> {
    let mut out = csv::Writer::from_writer(b.create("reproduction_numbers.csv")?);
    out.write_record(["model", "phase", "theta", "r_c"])?;
    for model in [ModelKind::TwoGroup, ModelKind::BehaviorFree] {
        let p = model.baseline();
        let name = serde_json::to_value(model).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default();
        for (i, seg) in p.theta.segments().iter().enumerate().skip(1) {
            let rc = analysis::control_reproduction_number(&p, seg.value)?;
            out.write_record([name.clone(), i.to_string(), seg.value.to_string(), rc.to_string()])?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    b.record("reproduction_numbers", "reproduction_numbers.csv", "Control reproduction number per lockdown phase");
    Ok(())
}

fn stage_stability(config: &StudyConfig, b: &mut Bundle) -> Result<(), ScenarioError> {
    config.stability.gammas.validate()?;
    config.stability.r_cs.validate()?;
    let cells = analysis::stability_region(&config.stability.gammas.values(), &config.stability.r_cs.values());
    analysis::write_region_csv(&cells, b.create("stability_region.csv")?)?;
    b.record("stability_region", "stability_region.csv", "Attracting equilibrium over (influence ratio, R_c)");
    let p = ModelParams::nyc_two_group();
    let theta = p.theta.segments()[1].value;
    let v = analysis::g1dfe_stability(&p, theta)?;
    let mut f = b.create("stability_verdict.json")?;
    f.write_all(v.to_json().as_bytes())
        .and_then(|_| f.flush())
        .map_err(|source| ScenarioError::Io { path: b.dir.join("stability_verdict.json"), source })?;
    b.record("stability_verdict", "stability_verdict.json", "G1DFE conditions and eigenvalue check at phase-1 theta");
    Ok(())
}

fn stage_calibration(config: &StudyConfig, data: &Path, b: &mut Bundle) -> Result<(), ScenarioError> {
    let series = calibration::load_series(data, &config.calibration.columns)?;
    for (fc, tag) in [(&config.calibration.two_group, "two_group"), (&config.calibration.behavior_free, "behavior_free")] {
        let res = calibration::fit(fc, &series)?;
        let file = format!("fit_{tag}.json");
        let mut f = b.create(&file)?;
        f.write_all(res.to_json().as_bytes())
            .and_then(|_| f.flush())
            .map_err(|source| ScenarioError::Io { path: b.dir.join(&file), source })?;
        b.record(&format!("fitted_parameters_{tag}"), &file, "Estimates, intervals, SSE and starts");
        let file = format!("prediction_{tag}.csv");
        calibration::write_prediction_csv(&res, Some(&series), b.create(&file)?)?;
        b.record(&format!("fit_and_prediction_{tag}"), &file, "Fitted and predicted Ih against the observed trailing mean");
        if let Some(v) = &res.validation {
            let file = format!("validation_{tag}.csv");
            v.write_csv(b.create(&file)?)?;
            b.record(&format!("validation_{tag}"), &file, "Second-wave cross-validation");
        }
    }
    Ok(())
}

fn stage_prcc(cfg: &PrccConfig, b: &mut Bundle) -> Result<(), ScenarioError> {
    let run = sensitivity::run_prcc(cfg)?;
    run.write_prcc_csv(b.create("prcc.csv")?)?;
    b.record("prcc", "prcc.csv", "Partial rank correlation per parameter, response and snapshot");
    run.write_samples_csv(b.create("prcc_samples.csv")?)?;
    b.record("prcc_samples", "prcc_samples.csv", "Latin hypercube samples and their responses");
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_values_hit_endpoints() {
        let g = Grid::new(0.0, 1.0, 6);
        assert_eq!(g.values(), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert!(Grid::new(1.0, 1.0, 1).validate().is_ok());
        assert!(Grid::new(1.0, 1.0, 3).validate().is_err());
        assert!(Grid::new(0.0, 1.0, 0).validate().is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = SweepSpec::contact_grid();
        assert!(s.validate().is_ok());
        s.k = 1.5;
        assert!(s.validate().is_err());
        let mut s = SweepSpec::contact_grid();
        s.axes[1].param = SweepParam::A1;
        assert!(s.validate().is_err());
        let mut s = SweepSpec::split_grid();
        s.axes.clear();
        assert!(s.validate().is_err());
    }

    #[test]
    fn lockdown_schedule_shift() {
        let spec = LockdownSweepSpec::default();
        let base = ModelParams::nyc_two_group().theta;
        let s = spec.schedule(&base, 7.0, 0.5).unwrap();
        assert_eq!(s.segments()[1], ThetaSegment { start_day: 7, value: 0.5 });
        assert_eq!(s.segments()[2], base.segments()[2]);
        assert!(spec.schedule(&base, 36.0, 0.5).is_err());
        assert!(spec.schedule(&base, 0.0, 0.5).is_err());
    }

    #[test]
    fn failed_cells_are_missing() {
        let mut s = SweepSpec::split_grid();
        s.axes = vec![SweepAxis { param: SweepParam::Theta1, grid: Grid::new(0.5, 1.5, 2) }];
        s.metrics = vec![Metric::PeakHospWave1];
        let r = sweep(&s).unwrap();
        assert!(r.cells[0].metrics[0].is_some());
        assert!(r.cells[1].metrics[0].is_none() && r.cells[1].error.is_some());
    }

    #[test]
    fn config_sections_default() {
        let c = StudyConfig::from_json(r#"{"seed": 7, "sweeps": {"contact": null}}"#).unwrap();
        assert_eq!(c.seed, 7);
        assert!(c.sweeps.contact.is_none() && c.sweeps.lockdown.is_some());
        let c = c.with_seed(11);
        assert_eq!(c.calibration.two_group.seed, 11);
        assert_eq!(c.sensitivity.unwrap().seed, 12);
    }
}
