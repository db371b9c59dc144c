//! Diagonal-quadratic interpolation model on the 2d+1 coordinate design and
//! its exact trust-region subproblem.
//!
//! The design is `[center, center + D e_1, ..., center + D e_d,
//! center - D e_1, ..., center - D e_d]`. Interpolating a diagonal quadratic
//! through those values has the closed-form central-difference solution, so no
//! linear solve is needed and the system residual is zero to rounding.

use crate::error::{Error, Result};

/// Ordered evaluation sites for one model fit.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignSet {
    pub center: Vec<f64>,
    pub radius: f64,
    pub points: Vec<Vec<f64>>,
}

/// Coordinate design around `center` with displacement `delta`.
pub fn design_points(center: &[f64], delta: f64) -> DesignSet {
    let d = center.len();
    let mut points = Vec::with_capacity(2 * d + 1);
    points.push(center.to_vec());
    for sign in [1.0, -1.0] {
        for j in 0..d {
            let mut p = center.to_vec();
            p[j] += sign * delta;
            points.push(p);
        }
    }
    DesignSet {
        center: center.to_vec(),
        radius: delta,
        points,
    }
}

/// Fitted surrogate: intercept, gradient, and diagonal Hessian at the center.
#[derive(Debug, Clone, PartialEq)]
pub struct DqModel {
    pub intercept: f64,
    pub grad: Vec<f64>,
    pub diag_hess: Vec<f64>,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl DqModel {
    pub fn dim(&self) -> usize {
        self.grad.len()
    }

    /// Model value at `theta`.
    pub fn eval(&self, theta: &[f64]) -> f64 {
        let mut v = self.intercept;
        for (j, (g, h)) in self.grad.iter().zip(&self.diag_hess).enumerate() {
            let s = theta[j] - self.center[j];
            v += g * s + 0.5 * h * s * s;
        }
        v
    }

    /// Euclidean norm of the model gradient at the center.
    pub fn gradient_norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

/// Interpolate `values` (in design order) by a diagonal quadratic.
///
/// `grad_j = (f(+) - f(-)) / 2D` and `hess_j = (f(+) + f(-) - 2 f(0)) / D^2`.
pub fn fit_dq_model(values: &[f64], center: &[f64], delta: f64) -> Result<DqModel> {
    let d = center.len();
    if values.len() != 2 * d + 1 {
        return Err(Error::InvalidInput(format!(
            "need {} values for dimension {d}, got {}",
            2 * d + 1,
            values.len()
        )));
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidInput(format!(
            "radius must be positive, got {delta}"
        )));
    }
    for &v in values {
        if !v.is_finite() {
            return Err(Error::NonFinite {
                context: "model fit",
                value: v,
            });
        }
    }
    let f0 = values[0];
    let mut grad = Vec::with_capacity(d);
    let mut hess = Vec::with_capacity(d);
    for j in 0..d {
        let fp = values[1 + j];
        let fm = values[1 + d + j];
        grad.push((fp - fm) / (2.0 * delta));
        hess.push((fp + fm - 2.0 * f0) / (delta * delta));
    }
    Ok(DqModel {
        intercept: f0,
        grad,
        diag_hess: hess,
        center: center.to_vec(),
        radius: delta,
    })
}

/// Euclidean norm of the model gradient.
pub fn model_gradient_norm(model: &DqModel) -> f64 {
    model.gradient_norm()
}

// Step length along each coordinate for multiplier `nu`, ignoring hard-case
// coordinates (handled by the caller).
fn step_for_multiplier(grad: &[f64], hess: &[f64], nu: f64) -> Vec<f64> {
    grad.iter()
        .zip(hess)
        .map(|(&g, &h)| {
            let denom = h + nu;
            if denom.abs() < f64::MIN_POSITIVE {
                0.0
            } else {
                -g / denom
            }
        })
        .collect()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Exact global minimizer of the model over the closed ball of `model.radius`.
///
/// Diagonal Hessians make the secular equation one-dimensional: the step is
/// `s_j = -g_j / (h_j + nu)` with `nu >= max(0, -min h_j)` chosen by bisection
/// so `|s| = radius`, unless the unconstrained minimizer is interior. When the
/// gradient vanishes on every coordinate attaining the most negative
/// curvature, the boundary is reached along the first such axis in the
/// negative direction, which is the lexicographically smallest of the tied
/// minimizers.
pub fn solve_subproblem(model: &DqModel) -> Vec<f64> {
    let d = model.dim();
    let delta = model.radius;
    let g = &model.grad;
    let h = &model.diag_hess;

    let h_min = h.iter().cloned().fold(f64::INFINITY, f64::min);
    let grad_zero = g.iter().all(|&gj| gj == 0.0);

    // Stationary model with no negative curvature: the center already
    // minimizes.
    if grad_zero && h_min >= 0.0 {
        return model.center.clone();
    }

    // Interior Newton point when the model is convex.
    if h_min > 0.0 {
        let s = step_for_multiplier(g, h, 0.0);
        if norm(&s) <= delta {
            return add(&model.center, &s);
        }
    }

    let nu_lb = (-h_min).max(0.0);

    // Hard case: every coordinate at the minimal curvature has zero gradient,
    // so nu = nu_lb leaves slack to the boundary that must be filled along one
    // of those axes.
    let hard_coords: Vec<usize> = (0..d)
        .filter(|&j| g[j] == 0.0 && h[j] == h_min && h_min < 0.0)
        .collect();
    let regular_at_lb_bounded = (0..d).all(|j| g[j] == 0.0 || h[j] + nu_lb > 0.0);
    if !hard_coords.is_empty() && regular_at_lb_bounded {
        let mut s = step_for_multiplier(g, h, nu_lb);
        for &j in &hard_coords {
            s[j] = 0.0;
        }
        let interior = norm(&s);
        if interior <= delta {
            let fill = (delta * delta - interior * interior).sqrt();
            s[hard_coords[0]] = -fill;
            return add(&model.center, &s);
        }
    }

    // Secular equation |s(nu)| = delta; |s| is strictly decreasing in nu on
    // (nu_lb, inf), so bracket and bisect.
    let mut lo = nu_lb;
    let mut hi = nu_lb + 1.0;
    let g_norm = norm(g);
    // |s(nu)| <= |g| / (nu - nu_lb); grow hi until the step is inside.
    while norm(&step_for_multiplier(g, h, hi)) > delta {
        hi = hi * 2.0 + g_norm / delta;
        if !hi.is_finite() {
            break;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if norm(&step_for_multiplier(g, h, mid)) > delta {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi.max(1.0) {
            break;
        }
    }
    let mut s = step_for_multiplier(g, h, hi);
    // Polish boundary solutions so the radius equation holds to 1e-10;
    // solutions that converged strictly inside the ball (possible when a
    // zero-gradient, zero-curvature coordinate meets nu_lb = 0) stay put.
    let ns = norm(&s);
    if ns > 0.0 && delta - ns <= 1e-6 * delta && (ns - delta).abs() > 1e-10 * delta {
        let scale = delta / ns;
        for sj in &mut s {
            *sj *= scale;
        }
    }
    add(&model.center, &s)
}

fn add(center: &[f64], step: &[f64]) -> Vec<f64> {
    center.iter().zip(step).map(|(c, s)| c + s).collect()
}

/// Decrease guaranteed by a Cauchy step: `0.5 |g| min(Delta, |g| / |H|)` with
/// the convention `|g| / 0 = inf`.
pub fn cauchy_decrease_bound(model: &DqModel) -> f64 {
    let g_norm = model.gradient_norm();
    let h_norm = model
        .diag_hess
        .iter()
        .map(|h| h.abs())
        .fold(0.0f64, f64::max);
    let ratio = if h_norm == 0.0 {
        f64::INFINITY
    } else {
        g_norm / h_norm
    };
    0.5 * g_norm * model.radius.min(ratio)
}
