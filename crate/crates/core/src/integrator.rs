//! Adaptive Dormand–Prince 5(4) integration with dense daily output.
//!
//! Cumulative deaths are carried as one extra solution component so that
//! N(t) + D(t) = N(0) is a genuine check on the numerics rather than an identity.

use std::io::Write;

use chrono::{Days, NaiveDate};
use thiserror::Error;

use crate::model::{behavior_free_into, rhs_into, ModelError};
use crate::params::ModelParams;
use crate::state::{Compartment, SystemState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntegrationError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("step size underflow at t = {t} (h = {h:e})")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("step limit {0} exceeded")]
    TooManySteps(usize),
    #[error("compartment {index} reached {value:e} at t = {t}, below the clamp tolerance")]
    NegativeCompartment { t: f64, index: usize, value: f64 },
    #[error("non-finite solution at t = {0}")]
    NonFinite(f64),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

/// Which right-hand side to advance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dynamics {
    /// Full n-group behavior model.
    #[default]
    Behavior,
    /// Independent single-group implementation without behavior terms.
    BehaviorFree,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rtol: f64,
    /// Absolute tolerance is `atol_scale * N(0)`.
    pub atol_scale: f64,
    /// Negative values down to `-clamp_scale * N(0)` are set to zero; below that is an error.
    pub clamp_scale: f64,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol_scale: 1e-11, clamp_scale: 1e-9, max_steps: 5_000_000 }
    }
}

impl SolverOptions {
    pub fn scaled(self, factor: f64) -> Self {
        Self { rtol: self.rtol * factor, atol_scale: self.atol_scale * factor, ..self }
    }
}

/// Daily (or `stride`-spaced) solution with derived series.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SystemState>,
    pub ih_total: Vec<f64>,
    pub deaths: Vec<f64>,
    /// c^A_i(t) per output time, per group.
    pub contact: Vec<Vec<f64>>,
    /// N_i(t)/N(t) per output time, per group.
    pub group_share: Vec<Vec<f64>>,
    pub initial_population: f64,
    pub steps: usize,
}

impl Trajectory {
    /// Builds a trajectory from snapshots, deriving the per-time series. `a` are the behavior exponents.
    pub fn from_parts(
        times: Vec<f64>,
        states: Vec<SystemState>,
        deaths: Vec<f64>,
        a: &[f64],
    ) -> Result<Self, IntegrationError> {
        if times.len() != states.len() || times.len() != deaths.len() || times.is_empty() {
            return Err(IntegrationError::InvalidInput("mismatched trajectory lengths".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(IntegrationError::InvalidInput("times must increase".into()));
        }
        let mut ih_total = Vec::with_capacity(times.len());
        let mut contact = Vec::with_capacity(times.len());
        let mut group_share = Vec::with_capacity(times.len());
        for st in &states {
            if st.groups() != a.len() {
                return Err(IntegrationError::InvalidInput("group count mismatch".into()));
            }
            let n = st.total();
            let ih = st.class_total(Compartment::Ih);
            ih_total.push(ih);
            if n > 0.0 {
                contact.push(a.iter().map(|&ai| (-ai * ih / n).exp()).collect());
                group_share.push((0..st.groups()).map(|g| st.group_total(g) / n).collect());
            } else {
                contact.push(vec![1.0; a.len()]);
                group_share.push(vec![0.0; a.len()]);
            }
        }
        let initial_population = states[0].total() + deaths[0];
        Ok(Self { times, states, ih_total, deaths, contact, group_share, initial_population, steps: 0 })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn groups(&self) -> usize {
        self.states[0].groups()
    }

    pub fn population(&self, i: usize) -> f64 {
        self.states[i].total()
    }

    pub fn infected_total(&self, i: usize) -> f64 {
        self.states[i].infected_total()
    }

    pub fn last(&self) -> &SystemState {
        self.states.last().expect("non-empty trajectory")
    }

    /// Index of the output point at time `t`, if it lies on the grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let i = self.times.partition_point(|&x| x < t - 1e-9);
        (i < self.times.len() && (self.times[i] - t).abs() <= 1e-9).then_some(i)
    }

    /// Writes one row per output time. With an epoch, a `date` column is added.
    pub fn write_csv<W: Write>(&self, w: W, epoch: Option<NaiveDate>) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.groups();
        let mut header = vec!["day".to_string()];
        if epoch.is_some() {
            header.push("date".into());
        }
        for g in 1..=n {
            for c in Compartment::ALL {
                header.push(format!("{}_{g}", c.label()));
            }
        }
        header.extend(["Ih_total", "deaths", "population", "infected"].map(String::from));
        header.extend((1..=n).map(|g| format!("contact_{g}")));
        header.extend((1..=n).map(|g| format!("share_{g}")));
        out.write_record(&header)?;
        for i in 0..self.len() {
            let t = self.times[i];
            let mut row = vec![format_num(t)];
            if let Some(e) = epoch {
                row.push(day_to_date(e, t).map(|d| d.to_string()).unwrap_or_default());
            }
            let st = &self.states[i];
            for g in 0..n {
                for c in Compartment::ALL {
                    row.push(format_num(st.get(c, g)));
                }
            }
            row.push(format_num(self.ih_total[i]));
            row.push(format_num(self.deaths[i]));
            row.push(format_num(st.total()));
            row.push(format_num(st.infected_total()));
            row.extend(self.contact[i].iter().map(|&v| format_num(v)));
            row.extend(self.group_share[i].iter().map(|&v| format_num(v)));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub(crate) fn format_num(v: f64) -> String {
    format!("{v}")
}

/// Calendar date `t` days after `epoch` (fractional days truncated).
pub fn day_to_date(epoch: NaiveDate, t: f64) -> Option<NaiveDate> {
    if t < 0.0 {
        return None;
    }
    epoch.checked_add_days(Days::new(t.floor() as u64))
}

/// Integrates the behavior model from `initial` (taken at t = 0 of the schedule) to `t_end`.
pub fn integrate(
    params: &ModelParams,
    initial: &SystemState,
    t_end: f64,
    output_stride: f64,
) -> Result<Trajectory, IntegrationError> {
    integrate_with(params, initial, t_end, output_stride, Dynamics::Behavior, &SolverOptions::default())
}

pub fn integrate_with(
    params: &ModelParams,
    initial: &SystemState,
    t_end: f64,
    output_stride: f64,
    dynamics: Dynamics,
    opts: &SolverOptions,
) -> Result<Trajectory, IntegrationError> {
    params.validate()?;
    let groups = initial.groups();
    match dynamics {
        Dynamics::Behavior if groups != params.groups() => {
            return Err(ModelError::Dimension { expected: 6 * params.groups(), got: 6 * groups }.into())
        }
        Dynamics::BehaviorFree if groups != 1 => {
            return Err(ModelError::Dimension { expected: 6, got: 6 * groups }.into())
        }
        _ => {}
    }
    let t0 = initial.t;
    if !(t_end > t0) || !(output_stride > 0.0) {
        return Err(IntegrationError::InvalidInput(format!(
            "need t_end > t0 and stride > 0 (t0 = {t0}, t_end = {t_end}, stride = {output_stride})"
        )));
    }
    let n0 = initial.total();
    if !(n0 > 0.0) {
        return Err(ModelError::Domain("initial population must be positive".into()).into());
    }
    if initial.as_slice().iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(ModelError::Domain("initial state has negative compartments".into()).into());
    }

    let dim = 6 * groups;
    let mut y: Vec<f64> = initial.as_slice().to_vec();
    y.push(0.0);

    let n_out = ((t_end - t0) / output_stride + 1e-9).floor() as usize + 1;
    let out_times: Vec<f64> = (0..n_out).map(|k| t0 + k as f64 * output_stride).collect();
    let mut recorded: Vec<Vec<f64>> = Vec::with_capacity(n_out);

    let mut bounds = vec![t0];
    bounds.extend(params.theta.breakpoints(t_end).into_iter().filter(|&b| b > t0));
    bounds.push(t_end);

    let delta_h = params.delta_h;
    let mut solver = Dopri5::new(dim + 1, opts, n0);
    let mut next_out = 0usize;
    for seg in bounds.windows(2) {
        let (ta, tb) = (seg[0], seg[1]);
        let theta = params.theta.value_at(ta);
        let f = |y: &[f64], dy: &mut [f64]| {
            match dynamics {
                Dynamics::Behavior => rhs_into(params, theta, groups, &y[..dim], &mut dy[..dim]),
                Dynamics::BehaviorFree => behavior_free_into(params, theta, &y[..dim], &mut dy[..dim]),
            }
            let o = Compartment::Ih.offset() * groups;
            dy[dim] = delta_h * y[o..o + groups].iter().sum::<f64>();
        };
        solver.advance(&f, &mut y, ta, tb, &out_times, &mut next_out, &mut recorded)?;
    }
    while recorded.len() < out_times.len() {
        recorded.push(y.clone());
    }

    let mut states = Vec::with_capacity(n_out);
    let mut deaths = Vec::with_capacity(n_out);
    for (t, mut v) in out_times.iter().zip(recorded) {
        deaths.push(v.pop().unwrap_or(0.0));
        states.push(SystemState::from_vec(groups, *t, v)?);
    }
    let a = match dynamics {
        Dynamics::Behavior => params.a.clone(),
        Dynamics::BehaviorFree => vec![0.0],
    };
    let mut traj = Trajectory::from_parts(out_times, states, deaths, &a)?;
    traj.initial_population = n0;
    traj.steps = solver.steps;
    Ok(traj)
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Dopri5 {
    k: [Vec<f64>; 7],
    ytmp: Vec<f64>,
    ynew: Vec<f64>,
    rcont: [Vec<f64>; 5],
    rtol: f64,
    atol: f64,
    clamp: f64,
    max_steps: usize,
    steps: usize,
}

impl Dopri5 {
    fn new(dim: usize, opts: &SolverOptions, n0: f64) -> Self {
        let v = || vec![0.0; dim];
        Self {
            k: std::array::from_fn(|_| v()),
            ytmp: v(),
            ynew: v(),
            rcont: std::array::from_fn(|_| v()),
            rtol: opts.rtol,
            atol: opts.atol_scale * n0,
            clamp: opts.clamp_scale * n0,
            max_steps: opts.max_steps,
            steps: 0,
        }
    }

    fn norm(&self, v: &[f64], y: &[f64]) -> f64 {
        let s: f64 = v
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let sc = self.atol + self.rtol * b.abs();
                (a / sc).powi(2)
            })
            .sum();
        (s / v.len() as f64).sqrt()
    }

    fn initial_step<F: Fn(&[f64], &mut [f64])>(&mut self, f: &F, y: &[f64], span: f64) -> f64 {
        let d0 = self.norm(y, y);
        let d1 = self.norm(&self.k[0], y);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span);
        for i in 0..y.len() {
            self.ytmp[i] = y[i] + h0 * self.k[0][i];
        }
        f(&self.ytmp, &mut self.k[1]);
        let diff: Vec<f64> = self.k[1].iter().zip(&self.k[0]).map(|(a, b)| a - b).collect();
        let d2 = self.norm(&diff, y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(0.2)
        };
        (100.0 * h0).min(h1).min(span)
    }

    /// Integrates `y` from `ta` to `tb` with a fresh start, recording outputs in (ta, tb].
    #[allow(clippy::too_many_arguments)]
    fn advance<F: Fn(&[f64], &mut [f64])>(
        &mut self,
        f: &F,
        y: &mut Vec<f64>,
        ta: f64,
        tb: f64,
        out_times: &[f64],
        next_out: &mut usize,
        recorded: &mut Vec<Vec<f64>>,
    ) -> Result<(), IntegrationError> {
        let dim = y.len();
        while *next_out < out_times.len() && out_times[*next_out] <= ta + 1e-12 {
            recorded.push(y.clone());
            *next_out += 1;
        }
        f(y, &mut self.k[0]);
        let mut h = self.initial_step(f, y, tb - ta);
        let mut t = ta;
        let mut fac_old: f64 = 1e-4;
        let mut last_rejected = false;
        while t < tb {
            if self.steps >= self.max_steps {
                return Err(IntegrationError::TooManySteps(self.max_steps));
            }
            if h < 1e-12 * t.abs().max(1.0) {
                return Err(IntegrationError::StepSizeUnderflow { t, h });
            }
            let last = t + 1.01 * h >= tb;
            if last {
                h = tb - t;
            }
            self.stages(f, y, h);
            self.steps += 1;
            let mut err_v = std::mem::take(&mut self.ytmp);
            for i in 0..dim {
                err_v[i] = h
                    * (E1 * self.k[0][i] + E3 * self.k[2][i] + E4 * self.k[3][i] + E5 * self.k[4][i]
                        + E6 * self.k[5][i]
                        + E7 * self.k[6][i]);
            }
            let s: f64 = (0..dim)
                .map(|i| {
                    let sc = self.atol + self.rtol * y[i].abs().max(self.ynew[i].abs());
                    (err_v[i] / sc).powi(2)
                })
                .sum();
            self.ytmp = err_v;
            let err = (s / dim as f64).sqrt();
            if !err.is_finite() {
                h *= 0.1;
                last_rejected = true;
                continue;
            }
            // PI step-size control.
            let fac11 = err.powf(0.2 - 0.04 * 0.75);
            let mut fac = fac11 / fac_old.powf(0.04);
            fac = (fac / 0.9).clamp(0.1, 5.0);
            let h_new = h / fac;
            if err <= 1.0 {
                fac_old = err.max(1e-4);
                let t_new = if last { tb } else { t + h };
                self.dense(y, h);
                while *next_out < out_times.len() && out_times[*next_out] <= t_new + 1e-9 * t_new.abs().max(1.0) {
                    let to = out_times[*next_out];
                    let th = ((to - t) / h).clamp(0.0, 1.0);
                    let th1 = 1.0 - th;
                    let v: Vec<f64> = (0..dim)
                        .map(|i| {
                            let r = &self.rcont;
                            let x = r[0][i] + th * (r[1][i] + th1 * (r[2][i] + th * (r[3][i] + th1 * r[4][i])));
                            if x < 0.0 && x >= -self.clamp { 0.0 } else { x }
                        })
                        .collect();
                    recorded.push(v);
                    *next_out += 1;
                }
                std::mem::swap(y, &mut self.ynew);
                let mut clamped = false;
                for (i, v) in y.iter_mut().enumerate() {
                    if !v.is_finite() {
                        return Err(IntegrationError::NonFinite(t_new));
                    }
                    if *v < 0.0 {
                        if *v < -self.clamp {
                            return Err(IntegrationError::NegativeCompartment { t: t_new, index: i, value: *v });
                        }
                        *v = 0.0;
                        clamped = true;
                    }
                }
                if clamped {
                    f(y, &mut self.k[0]);
                } else {
                    self.k.swap(0, 6);
                }
                t = t_new;
                h = if last_rejected { h_new.min(h) } else { h_new };
                last_rejected = false;
            } else {
                h /= (fac11 / 0.9).min(5.0);
                last_rejected = true;
            }
        }
        Ok(())
    }

    fn stages<F: Fn(&[f64], &mut [f64])>(&mut self, f: &F, y: &[f64], h: f64) {
        let n = y.len();
        let (k, yt) = (&mut self.k, &mut self.ytmp);
        for i in 0..n {
            yt[i] = y[i] + h * A21 * k[0][i];
        }
        f(yt, &mut k[1]);
        for i in 0..n {
            yt[i] = y[i] + h * (A31 * k[0][i] + A32 * k[1][i]);
        }
        f(yt, &mut k[2]);
        for i in 0..n {
            yt[i] = y[i] + h * (A41 * k[0][i] + A42 * k[1][i] + A43 * k[2][i]);
        }
        f(yt, &mut k[3]);
        for i in 0..n {
            yt[i] = y[i] + h * (A51 * k[0][i] + A52 * k[1][i] + A53 * k[2][i] + A54 * k[3][i]);
        }
        f(yt, &mut k[4]);
        for i in 0..n {
            yt[i] = y[i] + h * (A61 * k[0][i] + A62 * k[1][i] + A63 * k[2][i] + A64 * k[3][i] + A65 * k[4][i]);
        }
        f(yt, &mut k[5]);
        for i in 0..n {
            self.ynew[i] =
                y[i] + h * (A71 * k[0][i] + A73 * k[2][i] + A74 * k[3][i] + A75 * k[4][i] + A76 * k[5][i]);
        }
        f(&self.ynew, &mut k[6]);
    }

    fn dense(&mut self, y: &[f64], h: f64) {
        let k = &self.k;
        for i in 0..y.len() {
            let dy = self.ynew[i] - y[i];
            let bspl = h * k[0][i] - dy;
            self.rcont[0][i] = y[i];
            self.rcont[1][i] = dy;
            self.rcont[2][i] = bspl;
            self.rcont[3][i] = dy - h * k[6][i] - bspl;
            self.rcont[4][i] = h
                * (D1 * k[0][i] + D3 * k[2][i] + D4 * k[3][i] + D5 * k[4][i] + D6 * k[5][i] + D7 * k[6][i]);
        }
    }
}

/// Peak, mortality and wave length on a calendar window.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WaveMetrics {
    pub peak_daily_hosp: f64,
    pub peak_day: f64,
    pub cum_mortality: f64,
    pub wave_length: Option<f64>,
}

/// Total infected below which a wave counts as over.
pub const WAVE_END_THRESHOLD: f64 = 200.0;

pub fn wave_metrics(traj: &Trajectory, window: (f64, f64)) -> Result<WaveMetrics, IntegrationError> {
    wave_metrics_with_threshold(traj, window, WAVE_END_THRESHOLD)
}

pub fn wave_metrics_with_threshold(
    traj: &Trajectory,
    (start, end): (f64, f64),
    threshold: f64,
) -> Result<WaveMetrics, IntegrationError> {
    if !(end >= start) || traj.is_empty() {
        return Err(IntegrationError::InvalidInput(format!("empty window [{start}, {end}]")));
    }
    let (first, last) = (traj.times[0], *traj.times.last().unwrap());
    if start < first - 1e-9 || end > last + 1e-9 {
        return Err(IntegrationError::InvalidInput(format!(
            "window [{start}, {end}] outside trajectory span [{first}, {last}]"
        )));
    }
    let idx: Vec<usize> = (0..traj.len())
        .filter(|&i| traj.times[i] >= start - 1e-9 && traj.times[i] <= end + 1e-9)
        .collect();
    let (&i0, &i1) = match (idx.first(), idx.last()) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(IntegrationError::InvalidInput(format!("no output points in [{start}, {end}]"))),
    };
    let mut peak_i = i0;
    for i in i0..=i1 {
        if traj.ih_total[i] > traj.ih_total[peak_i] {
            peak_i = i;
        }
    }
    let reached = (i0..=peak_i).any(|i| traj.infected_total(i) >= threshold);
    let wave_length = (peak_i + 1..=i1)
        .find(|&i| reached && traj.infected_total(i) < threshold)
        .map(|i| traj.times[i] - start);
    Ok(WaveMetrics {
        peak_daily_hosp: traj.ih_total[peak_i],
        peak_day: traj.times[peak_i],
        cum_mortality: traj.deaths[i1],
        wave_length,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::LockdownSchedule;
    use crate::state::InitialConditions;

    #[test]
    fn exponential_decay_is_accurate() {
        // Behavior-free system with only Ih populated decays at rate gamma_h + delta_h.
        let mut p = ModelParams::nyc_behavior_free();
        p.theta = LockdownSchedule::constant(1.0).unwrap();
        let st = SystemState::from_vec(1, 0.0, vec![1e6, 0.0, 0.0, 0.0, 1000.0, 0.0]).unwrap();
        let tr = integrate_with(&p, &st, 10.0, 1.0, Dynamics::BehaviorFree, &SolverOptions::default()).unwrap();
        let rate = p.gamma_h + p.delta_h;
        for (t, s) in tr.times.iter().zip(&tr.states) {
            let exact = 1000.0 * (-rate * t).exp();
            let err = (s.get(Compartment::Ih, 0) - exact).abs();
            assert!(err < 1e-8 * 1.001e6, "t = {t}, err = {err}");
        }
        let deaths = 1000.0 * p.delta_h / rate * (1.0 - (-rate * 10.0f64).exp());
        let err = (tr.deaths[10] - deaths).abs();
        assert!(err < 1e-8 * 1.001e6, "deaths err = {err}");
    }

    #[test]
    fn disease_free_stays_constant() {
        let mut p = ModelParams::nyc_two_group();
        p.c_b = vec![vec![0.0; 2]; 2];
        let ic = InitialConditions { seed_cases: 0.0, k: 0.3, ..Default::default() };
        let st = ic.build(2).unwrap();
        let tr = integrate(&p, &st, 50.0, 1.0).unwrap();
        assert_eq!(tr.len(), 51);
        for s in &tr.states {
            assert_eq!(s.as_slice(), st.as_slice());
        }
        let m = wave_metrics(&tr, (0.0, 50.0)).unwrap();
        assert_eq!(m.peak_daily_hosp, 0.0);
        assert_eq!(m.wave_length, None);
    }

    #[test]
    fn triangular_pulse_metrics() {
        let a = [0.0];
        let mut states = Vec::new();
        let times: Vec<f64> = (0..=40).map(f64::from).collect();
        for &t in &times {
            let ih = (20.0 - (t - 17.0).abs() * 2.0).max(0.0) * 10.0;
            states.push(SystemState::from_vec(1, t, vec![1e4, 0.0, 0.0, 0.0, ih, 0.0]).unwrap());
        }
        let deaths = times.iter().map(|t| t * 0.5).collect();
        let tr = Trajectory::from_parts(times, states, deaths, &a).unwrap();
        let m = wave_metrics(&tr, (5.0, 35.0)).unwrap();
        assert_eq!(m.peak_day, 17.0);
        assert_eq!(m.peak_daily_hosp, 200.0);
        assert_eq!(m.cum_mortality, 17.5);
        // infected falls below 200 right after the apex
        assert_eq!(m.wave_length, Some(13.0));
        assert!(wave_metrics(&tr, (30.0, 20.0)).is_err());
        assert!(wave_metrics(&tr, (0.0, 50.0)).is_err());
    }

    #[test]
    fn csv_has_stable_header() {
        let p = ModelParams::nyc_two_group();
        let st = InitialConditions::default().build(2).unwrap();
        let tr = integrate(&p, &st, 3.0, 1.0).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf, NaiveDate::from_ymd_opt(2020, 2, 29)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let header = lines.next().unwrap();
        assert!(header.starts_with("day,date,S_1,E_1,Ia_1,Is_1,Ih_1,R_1,S_2"));
        assert!(header.ends_with("contact_1,contact_2,share_1,share_2"));
        assert!(lines.next().unwrap().starts_with("0,2020-02-29,"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn rejects_bad_input() {
        let p = ModelParams::nyc_two_group();
        let st = InitialConditions::default().build(2).unwrap();
        assert!(integrate(&p, &st, 0.0, 1.0).is_err());
        assert!(integrate(&p, &SystemState::zeros(2), 10.0, 1.0).is_err());
        let one = InitialConditions::default().build(1).unwrap();
        assert!(integrate(&p, &one, 10.0, 1.0).is_err());
    }
}
