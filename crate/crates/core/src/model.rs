//! Right-hand side of the n-group behavior model and its behavior-free reduction.

use thiserror::Error;

use crate::params::ModelParams;
use crate::state::{index, Compartment, SystemState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("state has {got} entries, expected {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("domain error: {0}")]
    Domain(String),
}

/// exp(-a * Ih / N).
pub fn contact_modifier(a: f64, ih_total: f64, n: f64) -> Result<f64, ModelError> {
    if !(n > 0.0) {
        return Err(ModelError::Domain(format!("population {n} must be positive")));
    }
    if a < 0.0 || ih_total < 0.0 {
        return Err(ModelError::Domain(format!("a = {a}, Ih = {ih_total} must be >= 0")));
    }
    Ok((-a * ih_total / n).exp())
}

fn check_state(params: &ModelParams, state: &SystemState) -> Result<f64, ModelError> {
    if state.groups() != params.groups() {
        return Err(ModelError::Dimension { expected: 6 * params.groups(), got: state.as_slice().len() });
    }
    let n = state.total();
    if !(n > 0.0) {
        return Err(ModelError::Domain(format!("total population {n} must be positive")));
    }
    let tol = 1e-9 * n;
    if let Some(v) = state.as_slice().iter().find(|&&v| v < -tol || !v.is_finite()) {
        return Err(ModelError::Domain(format!("compartment value {v} is negative")));
    }
    Ok(n)
}

/// Per-susceptible infection rate of `group`.
pub fn force_of_infection(
    params: &ModelParams,
    state: &SystemState,
    group: usize,
) -> Result<f64, ModelError> {
    let n = check_state(params, state)?;
    if group >= state.groups() {
        return Err(ModelError::Domain(format!("group {group} out of range")));
    }
    let theta = params.theta.value_at(state.t);
    let lam = infection_pressure(params, state.groups(), state.as_slice(), n, theta);
    let ih = state.class_total(Compartment::Ih);
    Ok(lam * (-params.a[group] * ih / n).exp())
}

/// θ/N · Σ_j c^A_j (βa Ia_j + βi Is_j + βh Ih_j), still to be multiplied by c^A_i.
fn infection_pressure(p: &ModelParams, groups: usize, y: &[f64], n: f64, theta: f64) -> f64 {
    let ih: f64 = (0..groups).map(|j| y[index(groups, Compartment::Ih, j)]).sum();
    let mut sum = 0.0;
    for j in 0..groups {
        let ca = (-p.a[j] * ih / n).exp();
        sum += ca
            * (p.beta_a * y[index(groups, Compartment::Ia, j)]
                + p.beta_i * y[index(groups, Compartment::Is, j)]
                + p.beta_h * y[index(groups, Compartment::Ih, j)]);
    }
    theta * sum / n
}

/// Net influence flow for every compartment of every group, in the state layout.
pub fn influence_flux(params: &ModelParams, state: &SystemState) -> Result<SystemState, ModelError> {
    let n = check_state(params, state)?;
    let mut out = vec![0.0; state.as_slice().len()];
    add_influence(params, state.groups(), state.as_slice(), n, &mut out);
    SystemState::from_vec(state.groups(), state.t, out)
}

fn add_influence(p: &ModelParams, groups: usize, y: &[f64], n: f64, dy: &mut [f64]) {
    if groups < 2 {
        return;
    }
    let sizes: Vec<f64> = (0..groups)
        .map(|i| Compartment::ALL.iter().map(|&c| y[index(groups, c, i)]).sum())
        .collect();
    // up[i]: per-capita rate of moving from i to i+1; down[i]: from i to i-1.
    let mut up = vec![0.0; groups];
    let mut down = vec![0.0; groups];
    for i in 0..groups {
        for (j, &nj) in sizes.iter().enumerate() {
            let c = p.c_b[j][i] * nj / n;
            if j > i {
                up[i] += c;
            } else if j < i {
                down[i] += c;
            }
        }
    }
    for c in Compartment::ALL {
        for i in 0..groups {
            let x = |g: usize| y[index(groups, c, g)];
            let mut net = -x(i) * (up[i] + down[i]);
            if i > 0 {
                net += x(i - 1) * up[i - 1];
            }
            if i + 1 < groups {
                net += x(i + 1) * down[i + 1];
            }
            dy[index(groups, c, i)] += net;
        }
    }
}

/// Unchecked right-hand side with a fixed θ. `n` is the total population.
pub(crate) fn rhs_into(p: &ModelParams, theta: f64, groups: usize, y: &[f64], dy: &mut [f64]) {
    let n: f64 = y.iter().sum();
    let pressure = infection_pressure(p, groups, y, n, theta);
    let ih: f64 = (0..groups).map(|j| y[index(groups, Compartment::Ih, j)]).sum();
    for i in 0..groups {
        let g = |c| y[index(groups, c, i)];
        let (s, e, ia, is, h, r) = (
            g(Compartment::S),
            g(Compartment::E),
            g(Compartment::Ia),
            g(Compartment::Is),
            g(Compartment::Ih),
            g(Compartment::R),
        );
        let lam = pressure * (-p.a[i] * ih / n).exp();
        let inf = lam * s;
        dy[index(groups, Compartment::S, i)] = p.xi * r - inf;
        dy[index(groups, Compartment::E, i)] = inf - p.sigma_e * e;
        dy[index(groups, Compartment::Ia, i)] = (1.0 - p.r) * p.sigma_e * e - p.gamma_a * ia;
        dy[index(groups, Compartment::Is, i)] = p.r * p.sigma_e * e - p.sigma_i * is;
        dy[index(groups, Compartment::Ih, i)] = p.q * p.sigma_i * is - (p.gamma_h + p.delta_h) * h;
        dy[index(groups, Compartment::R, i)] =
            p.gamma_a * ia + (1.0 - p.q) * p.sigma_i * is + p.gamma_h * h - p.xi * r;
    }
    add_influence(p, groups, y, n, dy);
}

/// Time derivative of the full n-group system at `state`.
pub fn rhs(params: &ModelParams, state: &SystemState) -> Result<SystemState, ModelError> {
    check_state(params, state)?;
    let mut dy = vec![0.0; state.as_slice().len()];
    let theta = params.theta.value_at(state.t);
    rhs_into(params, theta, state.groups(), state.as_slice(), &mut dy);
    SystemState::from_vec(state.groups(), state.t, dy)
}

/// Single-group system with no contact modifier and no influence terms. Ignores `a` and `c_b`.
pub fn rhs_behavior_free(params: &ModelParams, state: &SystemState) -> Result<SystemState, ModelError> {
    if state.groups() != 1 {
        return Err(ModelError::Dimension { expected: 6, got: state.as_slice().len() });
    }
    let n = state.total();
    if !(n > 0.0) {
        return Err(ModelError::Domain(format!("total population {n} must be positive")));
    }
    if state.as_slice().iter().any(|&v| v < -1e-9 * n) {
        return Err(ModelError::Domain("negative compartment".into()));
    }
    let theta = params.theta.value_at(state.t);
    let mut dy = [0.0; 6];
    behavior_free_into(params, theta, state.as_slice(), &mut dy);
    SystemState::from_vec(1, state.t, dy.to_vec())
}

pub(crate) fn behavior_free_into(p: &ModelParams, theta: f64, y: &[f64], dy: &mut [f64]) {
    let [s, e, ia, is, h, r] = [y[0], y[1], y[2], y[3], y[4], y[5]];
    let n = s + e + ia + is + h + r;
    let inf = theta * (p.beta_a * ia + p.beta_i * is + p.beta_h * h) * s / n;
    dy[0] = p.xi * r - inf;
    dy[1] = inf - p.sigma_e * e;
    dy[2] = (1.0 - p.r) * p.sigma_e * e - p.gamma_a * ia;
    dy[3] = p.r * p.sigma_e * e - p.sigma_i * is;
    dy[4] = p.q * p.sigma_i * is - (p.gamma_h + p.delta_h) * h;
    dy[5] = p.gamma_a * ia + (1.0 - p.q) * p.sigma_i * is + p.gamma_h * h - p.xi * r;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::LockdownSchedule;

    fn state2(vals: [[f64; 6]; 2]) -> SystemState {
        let mut st = SystemState::zeros(2);
        for (g, row) in vals.iter().enumerate() {
            for (c, &v) in Compartment::ALL.iter().zip(row) {
                st.set(*c, g, v);
            }
        }
        st
    }

    #[test]
    fn contact_modifier_values() {
        assert_eq!(contact_modifier(0.0, 1000.0, 8e6).unwrap(), 1.0);
        assert_eq!(contact_modifier(2800.0, 0.0, 8e6).unwrap(), 1.0);
        let v = contact_modifier(2800.0, 8000.0, 8e6).unwrap();
        assert!((v - 0.060_810_062_625_217_96).abs() < 1e-12);
        assert!(contact_modifier(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn homogeneous_force_of_infection() {
        let mut p = ModelParams::nyc_behavior_free();
        p.theta = LockdownSchedule::constant(1.0).unwrap();
        let mut st = SystemState::zeros(1);
        st.set(Compartment::S, 0, 50.0);
        st.set(Compartment::Ia, 0, 50.0);
        assert!((force_of_infection(&p, &st, 0).unwrap() - p.beta_a / 2.0).abs() < 1e-15);
        st.set(Compartment::Ia, 0, 0.0);
        assert_eq!(force_of_infection(&p, &st, 0).unwrap(), 0.0);
    }

    #[test]
    fn two_group_force_matches_scalar_transcription() {
        let p = ModelParams::nyc_two_group();
        let mut st = state2([
            [1.0e6, 2.0e3, 1.5e3, 1.0e3, 800.0, 5.0e4],
            [7.0e6, 9.0e3, 4.0e3, 3.0e3, 1200.0, 2.0e5],
        ]);
        st.t = 20.0;
        let n = st.total();
        let ih = 2000.0;
        let ca1 = (-8000.0 * ih / n).exp();
        let ca2 = (-2800.0 * ih / n).exp();
        let sum = ca1 * (0.625 * 1.5e3 + 0.375 * 1.0e3) + ca2 * (0.625 * 4.0e3 + 0.375 * 3.0e3);
        let expect1 = 0.74664 * ca1 / n * sum;
        let expect2 = 0.74664 * ca2 / n * sum;
        assert!((force_of_infection(&p, &st, 0).unwrap() - expect1).abs() <= 1e-12 * expect1);
        assert!((force_of_infection(&p, &st, 1).unwrap() - expect2).abs() <= 1e-12 * expect2);
    }

    #[test]
    fn influence_two_group_transcription() {
        let p = ModelParams::nyc_two_group();
        let st = state2([[0.0, 10.0, 0.0, 0.0, 0.0, 300.0], [1000.0, 0.0, 5.0, 0.0, 0.0, 0.0]]);
        let n = st.total();
        let n1 = st.group_total(0);
        let f = influence_flux(&p, &st).unwrap();
        let expect = p.c_b[0][1] * 1000.0 * n1 / n;
        assert!((f.get(Compartment::S, 0) - expect).abs() < 1e-12);
        assert!((f.get(Compartment::S, 1) + expect).abs() < 1e-12);
        let r_out = p.c_b[1][0] * 300.0 * st.group_total(1) / n;
        assert!((f.get(Compartment::R, 0) + r_out).abs() < 1e-12);
    }

    #[test]
    fn influence_vanishes_in_symmetric_case() {
        let mut p = ModelParams::nyc_two_group();
        p.c_b = vec![vec![0.0, 0.05], vec![0.05, 0.0]];
        let row = [100.0, 5.0, 3.0, 2.0, 1.0, 7.0];
        let f = influence_flux(&p, &state2([row, row])).unwrap();
        assert!(f.as_slice().iter().all(|v| v.abs() < 1e-12));
        p.c_b = vec![vec![0.0; 2]; 2];
        let f = influence_flux(&p, &state2([row, [9.0; 6]])).unwrap();
        assert!(f.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn disease_free_is_equilibrium() {
        let mut p = ModelParams::nyc_two_group();
        p.c_b = vec![vec![0.0; 2]; 2];
        let st = state2([[100.0, 0.0, 0.0, 0.0, 0.0, 0.0], [300.0, 0.0, 0.0, 0.0, 0.0, 0.0]]);
        assert!(rhs(&p, &st).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn empty_population_rejected() {
        let p = ModelParams::nyc_two_group();
        assert!(matches!(rhs(&p, &SystemState::zeros(2)), Err(ModelError::Domain(_))));
        let mut st = state2([[100.0; 6], [100.0; 6]]);
        st.set(Compartment::E, 1, -1.0);
        assert!(rhs(&p, &st).is_err());
    }

    #[test]
    fn one_group_instance_matches_behavior_free() {
        let p = ModelParams::nyc_behavior_free();
        let mut st = SystemState::from_vec(1, 40.0, vec![7e6, 3e4, 2e4, 1e4, 3e3, 5e5]).unwrap();
        let a = rhs(&p, &st).unwrap();
        let b = rhs_behavior_free(&p, &st).unwrap();
        for (x, y) in a.as_slice().iter().zip(b.as_slice()) {
            assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
        st.set(Compartment::Ia, 0, 0.0);
        st.set(Compartment::Is, 0, 0.0);
        st.set(Compartment::Ih, 0, 0.0);
        st.set(Compartment::E, 0, 0.0);
        st.set(Compartment::R, 0, 0.0);
        assert!(rhs_behavior_free(&p, &st).unwrap().as_slice().iter().all(|&v| v == 0.0));
    }
}
