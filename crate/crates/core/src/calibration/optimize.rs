//! Box-bounded minimization: BFGS on an arcsine-transformed space, with a Nelder–Mead fallback.

use serde::{Deserialize, Serialize};

/// Maps a box to an unbounded space via x = lo + (hi − lo)(sin u + 1)/2.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxTransform {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxTransform {
    pub fn to_internal(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| (2.0 * (v - lo) / (hi - lo) - 1.0).clamp(-1.0, 1.0).asin())
            .collect()
    }

    pub fn to_external(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(&v, (&lo, &hi))| lo + (hi - lo) * (v.sin() + 1.0) / 2.0)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    /// Line search could not decrease the objective further.
    Stalled,
    MaxIterations,
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Bfgs,
    NelderMead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub status: Status,
    pub method: Method,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub max_iterations: usize,
    /// Relative objective change regarded as converged.
    pub ftol: f64,
    pub gtol: f64,
    /// Central-difference step in the internal space.
    pub fd_step: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self { max_iterations: 200, ftol: 1e-10, gtol: 1e-8, fd_step: 1e-5 }
    }
}

struct Counted<'a> {
    f: &'a (dyn Fn(&[f64]) -> f64 + Sync),
    evals: usize,
}

impl Counted<'_> {
    fn call(&mut self, x: &[f64]) -> f64 {
        self.evals += 1;
        let v = (self.f)(x);
        if v.is_nan() { f64::INFINITY } else { v }
    }

    fn gradient(&mut self, x: &[f64], h: f64) -> Option<Vec<f64>> {
        let mut g = vec![0.0; x.len()];
        let mut xp = x.to_vec();
        for i in 0..x.len() {
            let step = h * x[i].abs().max(1.0);
            xp[i] = x[i] + step;
            let fp = self.call(&xp);
            xp[i] = x[i] - step;
            let fm = self.call(&xp);
            xp[i] = x[i];
            if !(fp.is_finite() && fm.is_finite()) {
                return None;
            }
            g[i] = (fp - fm) / (2.0 * step);
        }
        Some(g)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Unconstrained BFGS with central-difference gradients and Armijo backtracking.
pub fn bfgs(f: &(dyn Fn(&[f64]) -> f64 + Sync), x0: &[f64], opts: &OptimOptions) -> OptimResult {
    let n = x0.len();
    let mut fun = Counted { f, evals: 0 };
    let mut x = x0.to_vec();
    let mut fx = fun.call(&x);
    let fail = |x: Vec<f64>, f: f64, it, ev| OptimResult { x, f, iterations: it, evaluations: ev, status: Status::Failed, method: Method::Bfgs };
    if !fx.is_finite() {
        return fail(x, fx, 0, fun.evals);
    }
    let Some(mut g) = fun.gradient(&x, opts.fd_step) else {
        return fail(x, fx, 0, fun.evals);
    };
    let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    // Initial inverse Hessian: a first step of length ~0.1 in the internal space.
    let mut h: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.1 / gnorm.max(1e-300) } else { 0.0 }).collect())
        .collect();
    let mut first_update = true;
    let mut small_changes = 0;
    let mut status = Status::MaxIterations;
    let mut it = 0;
    while it < opts.max_iterations {
        it += 1;
        let gmax = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if gmax <= opts.gtol * fx.abs().max(1.0) {
            status = Status::Converged;
            break;
        }
        let mut p: Vec<f64> = (0..n).map(|i| -dot(&h[i], &g)).collect();
        let mut slope = dot(&g, &p);
        if !(slope < 0.0) {
            for (i, row) in h.iter_mut().enumerate() {
                row.iter_mut().enumerate().for_each(|(j, v)| *v = if i == j { 0.1 / gmax } else { 0.0 });
            }
            p = g.iter().map(|v| -v * 0.1 / gmax).collect();
            slope = dot(&g, &p);
        }
        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..40 {
            let xn: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + alpha * b).collect();
            let fnew = fun.call(&xn);
            if fnew.is_finite() && fnew <= fx + 1e-4 * alpha * slope {
                accepted = Some((xn, fnew));
                break;
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew)) = accepted else {
            status = Status::Stalled;
            break;
        };
        let Some(gn) = fun.gradient(&xn, opts.fd_step) else {
            x = xn;
            fx = fnew;
            status = Status::Stalled;
            break;
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if first_update {
                let scale = sy / dot(&y, &y);
                for (i, row) in h.iter_mut().enumerate() {
                    row.iter_mut().enumerate().for_each(|(j, v)| *v = if i == j { scale } else { 0.0 });
                }
                first_update = false;
            }
            let rho = 1.0 / sy;
            let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], &y)).collect();
            let yhy = dot(&y, &hy);
            for i in 0..n {
                for j in 0..n {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j]) + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        let rel = (fx - fnew).abs() / fx.abs().max(1e-300);
        x = xn;
        g = gn;
        fx = fnew;
        if rel <= opts.ftol {
            small_changes += 1;
            if small_changes >= 2 {
                status = Status::Converged;
                break;
            }
        } else {
            small_changes = 0;
        }
    }
    OptimResult { x, f: fx, iterations: it, evaluations: fun.evals, status, method: Method::Bfgs }
}

/// Nelder–Mead simplex with standard coefficients; initial simplex edges of length `step`.
pub fn nelder_mead(f: &(dyn Fn(&[f64]) -> f64 + Sync), x0: &[f64], step: f64, opts: &OptimOptions) -> OptimResult {
    let n = x0.len();
    let mut fun = Counted { f, evals: 0 };
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += step;
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| fun.call(v)).collect();
    let max_evals = opts.max_iterations * 20 * n.max(1);
    let mut it = 0;
    let mut status = Status::MaxIterations;
    while fun.evals < max_evals {
        it += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        let (best, worst) = (values[0], values[n]);
        if best.is_finite() && (worst - best).abs() <= opts.ftol * best.abs().max(1e-300) {
            status = Status::Converged;
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };
        let xr = along(-1.0);
        let fr = fun.call(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = fun.call(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = along(-0.5);
                let fc = fun.call(&xc);
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = fun.call(&xc);
                (xc, fc)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    simplex[i] = (0..n).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                    values[i] = fun.call(&simplex[i]);
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    let status = if values[best].is_finite() { status } else { Status::Failed };
    OptimResult {
        x: simplex[best].clone(),
        f: values[best],
        iterations: it,
        evaluations: fun.evals,
        status,
        method: Method::NelderMead,
    }
}

/// BFGS in the transformed space; falls back to Nelder–Mead when BFGS fails or makes no progress.
/// Returned `x` is in the original (bounded) space.
pub fn minimize_bounded(
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    bounds: &BoxTransform,
    x0: &[f64],
    opts: &OptimOptions,
) -> OptimResult {
    let g = |u: &[f64]| f(&bounds.to_external(u));
    let u0 = bounds.to_internal(x0);
    let f0 = g(&u0);
    let mut res = bfgs(&g, &u0, opts);
    if res.status == Status::Failed || !(res.f < f0) {
        let nm = nelder_mead(&g, &u0, 0.1, opts);
        if nm.f < res.f || res.status == Status::Failed {
            let evals = res.evaluations;
            res = nm;
            res.evaluations += evals;
        }
    }
    res.x = bounds.to_external(&res.x);
    res
}
