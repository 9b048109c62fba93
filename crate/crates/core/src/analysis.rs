//! Reproduction numbers, disease-free equilibria and their stability.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{behavior_free_into, rhs_into, ModelError};
use crate::params::ModelParams;
use crate::state::{Compartment, SystemState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("operation needs {expected} groups, parameters have {got}")]
    WrongGroups { expected: usize, got: usize },
    #[error("zero denominator: {0}")]
    ZeroDenominator(&'static str),
    #[error("matrix is not Metzler: entry ({row}, {col}) = {value}")]
    NotMetzler { row: usize, col: usize, value: f64 },
    #[error("matrix must be square and non-empty")]
    NotSquare,
    #[error("invalid equilibrium: {0}")]
    InvalidEquilibrium(String),
}

/// θ · (rβi/σi + (1−r)βa/γa + rqβh/(γh+δh)).
pub fn control_reproduction_number(params: &ModelParams, theta: f64) -> Result<f64, AnalysisError> {
    if params.sigma_i == 0.0 {
        return Err(AnalysisError::ZeroDenominator("sigma_i"));
    }
    if params.gamma_a == 0.0 {
        return Err(AnalysisError::ZeroDenominator("gamma_a"));
    }
    let hosp_exit = params.gamma_h + params.delta_h;
    if hosp_exit == 0.0 {
        return Err(AnalysisError::ZeroDenominator("gamma_h + delta_h"));
    }
    let p = params;
    Ok(theta
        * (p.r * p.beta_i / p.sigma_i
            + (1.0 - p.r) * p.beta_a / p.gamma_a
            + p.r * p.q * p.beta_h / hosp_exit))
}

pub fn basic_reproduction_number(params: &ModelParams) -> Result<f64, AnalysisError> {
    control_reproduction_number(params, 1.0)
}

/// R_c for each segment of the lockdown schedule, keyed by start day.
pub fn phase_reproduction_numbers(params: &ModelParams) -> Result<Vec<(u32, f64)>, AnalysisError> {
    params
        .theta
        .segments()
        .iter()
        .map(|s| Ok((s.start_day, control_reproduction_number(params, s.value)?)))
        .collect()
}

/// Γ = c^B_12 / c^B_21.
pub fn influence_ratio(params: &ModelParams) -> Result<f64, AnalysisError> {
    require_two_groups(params)?;
    let (c12, c21) = (params.c_b[0][1], params.c_b[1][0]);
    if c21 == 0.0 {
        return Err(AnalysisError::ZeroDenominator("c_b[1][0]"));
    }
    Ok(c12 / c21)
}

fn require_two_groups(params: &ModelParams) -> Result<(), AnalysisError> {
    if params.groups() != 2 {
        return Err(AnalysisError::WrongGroups { expected: 2, got: params.groups() });
    }
    Ok(())
}

/// K = F V⁻¹ of the behavior-free linearization at the disease-free state, with F and V
/// read off a central-difference Jacobian of the behavior-free right-hand side.
/// Infected order: E, Ia, Is, Ih.
pub fn next_generation_matrix(params: &ModelParams, theta: f64) -> Result<DMatrix<f64>, AnalysisError> {
    let infected = [1usize, 2, 3, 4];
    let base = [1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
    let h = 1e-6;
    let mut jac = DMatrix::zeros(4, 4);
    let (mut fp, mut fm) = ([0.0; 6], [0.0; 6]);
    for (col, &j) in infected.iter().enumerate() {
        let (mut yp, mut ym) = (base, base);
        yp[j] += h;
        ym[j] -= h;
        behavior_free_into(params, theta, &yp, &mut fp);
        behavior_free_into(params, theta, &ym, &mut fm);
        for (row, &i) in infected.iter().enumerate() {
            jac[(row, col)] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    // New infections only enter E; everything else is transition.
    let mut f = DMatrix::zeros(4, 4);
    for col in 0..4 {
        f[(0, col)] = jac[(0, col)].max(0.0);
    }
    let v = &f - &jac;
    let v_inv = v.try_inverse().ok_or(AnalysisError::ZeroDenominator("transition matrix"))?;
    Ok(f * v_inv)
}

/// max |λ| over the complex spectrum.
pub fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DfeKind {
    #[serde(rename = "G1DFE")]
    G1,
    #[serde(rename = "G2DFE")]
    G2,
    #[serde(rename = "G3DFE")]
    G3,
    #[serde(rename = "TDFE")]
    Trivial,
}

impl DfeKind {
    pub fn label(self) -> &'static str {
        match self {
            DfeKind::G1 => "G1DFE",
            DfeKind::G2 => "G2DFE",
            DfeKind::G3 => "G3DFE",
            DfeKind::Trivial => "TDFE",
        }
    }
}

/// Disease-free equilibrium (kp, (1−k)p, 0, …, 0) of the two-group model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DfePoint {
    pub kind: DfeKind,
    pub k: f64,
    pub p: f64,
}

impl DfePoint {
    pub fn new(k: f64, p: f64) -> Result<Self, AnalysisError> {
        if !(0.0..=1.0).contains(&k) || !(p >= 0.0) {
            return Err(AnalysisError::InvalidEquilibrium(format!("k = {k}, p = {p}")));
        }
        let kind = if p == 0.0 {
            DfeKind::Trivial
        } else if k == 1.0 {
            DfeKind::G1
        } else if k == 0.0 {
            DfeKind::G2
        } else {
            DfeKind::G3
        };
        Ok(Self { kind, k, p })
    }

    pub fn to_state(&self) -> SystemState {
        let mut st = SystemState::zeros(2);
        st.set(Compartment::S, 0, self.k * self.p);
        st.set(Compartment::S, 1, (1.0 - self.k) * self.p);
        st
    }
}

/// Reordered two-group variables: non-disease classes first.
pub const REORDERED: [(Compartment, usize); 12] = [
    (Compartment::S, 0),
    (Compartment::S, 1),
    (Compartment::R, 0),
    (Compartment::R, 1),
    (Compartment::E, 0),
    (Compartment::E, 1),
    (Compartment::Ia, 0),
    (Compartment::Ia, 1),
    (Compartment::Is, 0),
    (Compartment::Is, 1),
    (Compartment::Ih, 0),
    (Compartment::Ih, 1),
];

fn slot(c: Compartment, g: usize) -> usize {
    REORDERED.iter().position(|&x| x == (c, g)).expect("listed compartment")
}

/// Analytic Jacobian of the reordered two-group system at a non-trivial DFE.
pub fn jacobian_at_dfe(params: &ModelParams, dfe: &DfePoint, theta: f64) -> Result<DMatrix<f64>, AnalysisError> {
    require_two_groups(params)?;
    if dfe.kind == DfeKind::Trivial {
        return Err(AnalysisError::InvalidEquilibrium("trivial equilibrium has N = 0".into()));
    }
    let p = params;
    let (c12, c21) = (p.c_b[0][1], p.c_b[1][0]);
    let k = [dfe.k, 1.0 - dfe.k];
    let mut j = DMatrix::zeros(12, 12);
    let mut set = |(rc, rg): (Compartment, usize), (cc, cg): (Compartment, usize), v: f64| {
        j[(slot(rc, rg), slot(cc, cg))] += v;
    };
    use Compartment::*;

    // Influence on classes that vanish at the DFE: F_X = c12 k1 X2 − c21 k2 X1 into group 1.
    for x in [E, Ia, Is, Ih, R] {
        set((x, 0), (x, 1), c12 * k[0]);
        set((x, 0), (x, 0), -c21 * k[1]);
        set((x, 1), (x, 0), c21 * k[1]);
        set((x, 1), (x, 1), -c12 * k[0]);
    }
    // Influence on susceptibles, which carry the whole population.
    let cross = (c12 - c21) * k[0] * k[1];
    for g in 0..2 {
        for x in Compartment::ALL {
            let d = match (g, x) {
                (0, S) => (c12 - c21) * k[1] * k[1],
                (0, _) => c12 * k[1] - cross,
                (_, S) => (c12 - c21) * k[0] * k[0],
                _ => -c21 * k[0] - cross,
            };
            set((S, 0), (x, g), d);
            set((S, 1), (x, g), -d);
        }
    }
    // Infection: at the DFE c^A = 1 and S_i/N = k_i.
    for i in 0..2 {
        for jg in 0..2 {
            for (x, beta) in [(Ia, p.beta_a), (Is, p.beta_i), (Ih, p.beta_h)] {
                let v = theta * k[i] * beta;
                set((E, i), (x, jg), v);
                set((S, i), (x, jg), -v);
            }
        }
    }
    for g in 0..2 {
        set((S, g), (R, g), p.xi);
        set((E, g), (E, g), -p.sigma_e);
        set((Ia, g), (E, g), (1.0 - p.r) * p.sigma_e);
        set((Ia, g), (Ia, g), -p.gamma_a);
        set((Is, g), (E, g), p.r * p.sigma_e);
        set((Is, g), (Is, g), -p.sigma_i);
        set((Ih, g), (Is, g), p.q * p.sigma_i);
        set((Ih, g), (Ih, g), -(p.gamma_h + p.delta_h));
        set((R, g), (Ia, g), p.gamma_a);
        set((R, g), (Is, g), (1.0 - p.q) * p.sigma_i);
        set((R, g), (Ih, g), p.gamma_h);
        set((R, g), (R, g), -p.xi);
    }
    Ok(j)
}

/// Central-difference Jacobian of the reordered two-group system at `state` with fixed θ.
/// Step is `1e-6 · max(|x|, N)` per coordinate.
pub fn numerical_jacobian(params: &ModelParams, state: &SystemState, theta: f64) -> Result<DMatrix<f64>, AnalysisError> {
    require_two_groups(params)?;
    if state.groups() != 2 {
        return Err(AnalysisError::WrongGroups { expected: 2, got: state.groups() });
    }
    let n = state.total();
    if !(n > 0.0) {
        return Err(ModelError::Domain("total population must be positive".into()).into());
    }
    let base = state.as_slice().to_vec();
    let (mut fp, mut fm) = (vec![0.0; 12], vec![0.0; 12]);
    let mut jac = DMatrix::zeros(12, 12);
    for (col, &(cc, cg)) in REORDERED.iter().enumerate() {
        let idx = state.index(cc, cg);
        let h = 1e-6 * base[idx].abs().max(n);
        let (mut yp, mut ym) = (base.clone(), base.clone());
        yp[idx] += h;
        ym[idx] -= h;
        rhs_into(params, theta, 2, &yp, &mut fp);
        rhs_into(params, theta, 2, &ym, &mut fm);
        for (row, &(rc, rg)) in REORDERED.iter().enumerate() {
            let r = state.index(rc, rg);
            jac[(row, col)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    Ok(jac)
}

fn check_metzler(m: &DMatrix<f64>) -> Result<(), AnalysisError> {
    if m.nrows() != m.ncols() || m.nrows() == 0 {
        return Err(AnalysisError::NotSquare);
    }
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            let v = m[(r, c)];
            if r != c && (v < 0.0 || !v.is_finite()) {
                return Err(AnalysisError::NotMetzler { row: r, col: c, value: v });
            }
        }
    }
    Ok(())
}

/// Metzler stability by repeated 1×1-pivot Schur complements.
///
/// A Metzler matrix is Hurwitz iff the leading entry is negative and the Schur complement
/// D − C a⁻¹ B (itself Metzler) is Hurwitz. A pivot ≥ 0 means not stable.
pub fn metzler_stable(m: &DMatrix<f64>) -> Result<bool, AnalysisError> {
    check_metzler(m)?;
    let mut cur = m.clone();
    loop {
        let a = cur[(0, 0)];
        if a >= 0.0 {
            return Ok(false);
        }
        let size = cur.nrows();
        if size == 1 {
            return Ok(true);
        }
        let mut next = DMatrix::zeros(size - 1, size - 1);
        for r in 1..size {
            for c in 1..size {
                next[(r - 1, c - 1)] = cur[(r, c)] - cur[(r, 0)] * cur[(0, c)] / a;
            }
        }
        cur = next;
    }
}

/// Largest real part over the spectrum.
pub fn max_real_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionValue {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
}

impl ConditionValue {
    fn greater(lhs: f64, rhs: f64) -> Self {
        Self { holds: lhs > rhs, lhs, rhs }
    }
    fn less(lhs: f64, rhs: f64) -> Self {
        Self { holds: lhs < rhs, lhs, rhs }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conditions {
    /// c^B_12 > c^B_21.
    pub c1: ConditionValue,
    /// (1−r)βaθ/γa < 1.
    pub c2: ConditionValue,
    /// rβiθ/σi + (1−r)βaθ/γa < 1.
    pub c3: ConditionValue,
    /// R_c < 1.
    pub c4: ConditionValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Stable,
    MarginallyStable,
    Unstable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub equilibrium: DfePoint,
    pub theta: f64,
    pub conditions: Conditions,
    /// Metzler verdict on the disease block of the Jacobian.
    pub metzler_stable: bool,
    pub eigen_max_real_part: f64,
    pub eigen_min_real_part: f64,
    /// Eigenvalues with |Re| ≤ 1e-10 · spectral scale.
    pub zero_modes: usize,
    pub verdict: Verdict,
    /// Verdict reached from the spectrum alone.
    pub eigen_verdict: Verdict,
}

impl StabilityVerdict {
    pub fn eigen_agrees(&self) -> bool {
        self.verdict == self.eigen_verdict
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("verdict serializes")
    }
}

/// Stability of the all-in-group-1 equilibrium at lockdown level θ.
pub fn g1dfe_stability(params: &ModelParams, theta: f64) -> Result<StabilityVerdict, AnalysisError> {
    require_two_groups(params)?;
    let p = params;
    let (c12, c21) = (p.c_b[0][1], p.c_b[1][0]);
    let rc = control_reproduction_number(p, theta)?;
    let asym = (1.0 - p.r) * p.beta_a * theta / p.gamma_a;
    let conditions = Conditions {
        c1: ConditionValue::greater(c12, c21),
        c2: ConditionValue::less(asym, 1.0),
        c3: ConditionValue::less(p.r * p.beta_i * theta / p.sigma_i + asym, 1.0),
        c4: ConditionValue::less(rc, 1.0),
    };
    let dfe = DfePoint::new(1.0, 1.0)?;
    let jac = jacobian_at_dfe(p, &dfe, theta)?;
    let disease = jac.view((4, 4), (8, 8)).into_owned();
    let metzler = metzler_stable(&disease)?;
    let eig = jac.complex_eigenvalues();
    let scale = eig.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let max_re = eig.iter().map(|z| z.re).fold(f64::NEG_INFINITY, f64::max);
    let min_re = eig.iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    let zero_tol = 1e-10 * scale;
    let zero_modes = eig.iter().filter(|z| z.re.abs() <= zero_tol).count();
    let eigen_verdict = if max_re > zero_tol || zero_modes > 1 {
        Verdict::Unstable
    } else if zero_modes == 1 {
        Verdict::MarginallyStable
    } else {
        Verdict::Stable
    };
    let verdict = if conditions.c1.holds && conditions.c4.holds {
        Verdict::MarginallyStable
    } else {
        Verdict::Unstable
    };
    Ok(StabilityVerdict {
        equilibrium: dfe,
        theta,
        conditions,
        metzler_stable: metzler,
        eigen_max_real_part: max_re,
        eigen_min_real_part: min_re,
        zero_modes,
        verdict,
        eigen_verdict,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionCell {
    pub gamma: f64,
    pub r_c: f64,
    pub label: DfeKind,
}

/// Which equilibrium attracts: extinction above the threshold, otherwise decided by Γ.
pub fn classify(gamma: f64, r_c: f64) -> DfeKind {
    if r_c >= 1.0 {
        DfeKind::Trivial
    } else if (gamma - 1.0).abs() <= 1e-12 {
        DfeKind::G3
    } else if gamma > 1.0 {
        DfeKind::G1
    } else {
        DfeKind::G2
    }
}

/// Labels every (Γ, R_c) pair of the grid, Γ-major.
pub fn stability_region(gammas: &[f64], r_cs: &[f64]) -> Vec<RegionCell> {
    gammas
        .par_iter()
        .flat_map_iter(|&gamma| r_cs.iter().map(move |&r_c| RegionCell { gamma, r_c, label: classify(gamma, r_c) }))
        .collect()
}

pub fn write_region_csv<W: Write>(cells: &[RegionCell], w: W) -> Result<(), csv::Error> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["gamma", "r_c", "label"])?;
    for c in cells {
        out.write_record([c.gamma.to_string(), c.r_c.to_string(), c.label.label().to_string()])?;
    }
    out.flush()?;
    Ok(())
}
