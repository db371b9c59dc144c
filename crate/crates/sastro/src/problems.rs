//! Benchmark problems: three analytic toys on truncated Gaussian noise and a
//! CARA-utility option portfolio with Black-Scholes payoff smoothing.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::normal;
use crate::sampling::{InverseMap, TruncatedGaussianAxis};

pub type Oracle = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// A stochastic minimization problem `min_theta E[F(theta, X)]`.
#[derive(Clone)]
pub struct Problem {
    pub name: String,
    /// Decision dimension.
    pub d: usize,
    /// Noise dimension (uniform input dimension of the map).
    pub q: usize,
    pub oracle: Oracle,
    pub map: InverseMap,
    pub theta0: Vec<f64>,
    /// High-precision objective, never charged to the sampling budget.
    pub true_objective: Option<ScalarField>,
    pub true_gradient: Option<VectorField>,
    /// Known optimal value, when available.
    pub f_star: Option<f64>,
}

impl std::fmt::Debug for Problem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem")
            .field("name", &self.name)
            .field("d", &self.d)
            .field("q", &self.q)
            .field("theta0", &self.theta0)
            .field("f_star", &self.f_star)
            .finish()
    }
}

impl Problem {
    pub fn true_objective_at(&self, theta: &[f64]) -> Option<f64> {
        self.true_objective.as_ref().map(|f| f(theta))
    }
}

const TOY_TRUNC: f64 = 5.0;

/// Mean and variance of a standard Gaussian truncated to `[a, b]`.
fn truncated_std_moments(a: f64, b: f64) -> (f64, f64) {
    let z = normal::cdf(b) - normal::cdf(a);
    let pa = normal::pdf(a);
    let pb = normal::pdf(b);
    let mean = (pa - pb) / z;
    let var = 1.0 + (a * pa - b * pb) / z - mean * mean;
    (mean, var)
}

fn toy_map() -> InverseMap {
    InverseMap::truncated_std_gaussian(1, -TOY_TRUNC, TOY_TRUNC)
}

fn norm_sq(theta: &[f64]) -> f64 {
    theta.iter().map(|t| t * t).sum()
}

/// `E[|theta|^2 + 2X]` with symmetric truncated Gaussian noise; optimum 0 at
/// the origin.
pub fn make_ex1() -> Problem {
    Problem {
        name: "ex1".into(),
        d: 2,
        q: 1,
        oracle: Arc::new(|theta, x| norm_sq(theta) + 2.0 * x[0]),
        map: toy_map(),
        theta0: vec![2.0, 2.0],
        true_objective: Some(Arc::new(norm_sq)),
        true_gradient: Some(Arc::new(|theta: &[f64]| {
            theta.iter().map(|t| 2.0 * t).collect()
        })),
        f_star: Some(0.0),
    }
}

/// `E[|theta|^2 (1 + X)]`; multiplicative noise, optimum 0 at the origin.
pub fn make_ex2() -> Problem {
    Problem {
        name: "ex2".into(),
        d: 2,
        q: 1,
        oracle: Arc::new(|theta, x| norm_sq(theta) * (1.0 + x[0])),
        map: toy_map(),
        theta0: vec![2.0, 2.0],
        true_objective: Some(Arc::new(norm_sq)),
        true_gradient: Some(Arc::new(|theta: &[f64]| {
            theta.iter().map(|t| 2.0 * t).collect()
        })),
        f_star: Some(0.0),
    }
}

/// `E[|X - theta|^2]` with the scalar noise broadcast across both
/// coordinates; optimum `2 Var(X)` at the origin.
pub fn make_ex3() -> Problem {
    let (_, var) = truncated_std_moments(-TOY_TRUNC, TOY_TRUNC);
    Problem {
        name: "ex3".into(),
        d: 2,
        q: 1,
        oracle: Arc::new(|theta, x| theta.iter().map(|t| (x[0] - t) * (x[0] - t)).sum()),
        map: toy_map(),
        theta0: vec![2.0, 2.0],
        true_objective: Some(Arc::new(move |theta: &[f64]| norm_sq(theta) + 2.0 * var)),
        true_gradient: Some(Arc::new(|theta: &[f64]| {
            theta.iter().map(|t| 2.0 * t).collect()
        })),
        f_star: Some(2.0 * var),
    }
}

/// Black-Scholes value of a European option.
pub fn bs_price(s: f64, k: f64, r: f64, sigma: f64, t: f64, is_call: bool) -> Result<f64> {
    if !(s > 0.0 && k > 0.0 && sigma > 0.0 && t > 0.0) {
        return Err(Error::InvalidDistribution(format!(
            "Black-Scholes inputs must be positive: s={s}, k={k}, sigma={sigma}, t={t}"
        )));
    }
    let st = sigma * t.sqrt();
    let d1 = ((s / k).ln() + (r + 0.5 * sigma * sigma) * t) / st;
    let d2 = d1 - st;
    let df = (-r * t).exp();
    Ok(if is_call {
        s * normal::cdf(d1) - k * df * normal::cdf(d2)
    } else {
        k * df * normal::cdf(-d2) - s * normal::cdf(-d1)
    })
}

// Maximum over spot of the call value minus intrinsic payoff. By put-call
// parity the call gap dominates the put gap for r >= 0, so a maturity chosen
// against it smooths both payoffs within the same tolerance. The largest gap
// sits at the money; a coarse grid bracket plus golden-section refinement
// locates it.
fn max_smoothing_gap(k: f64, r: f64, sigma: f64, t: f64) -> f64 {
    let gap = |s: f64| -> f64 { bs_price(s, k, r, sigma, t, true).unwrap() - (s - k).max(0.0) };
    let lo = k * 0.25;
    let hi = k * 4.0;
    let grid = 2000usize;
    let mut best = (lo, gap(lo));
    for i in 1..=grid {
        let s = lo + (hi - lo) * i as f64 / grid as f64;
        let g = gap(s);
        if g > best.1 {
            best = (s, g);
        }
    }
    // Golden-section refinement around the best grid cell.
    let width = (hi - lo) / grid as f64;
    let (mut a, mut b) = ((best.0 - width).max(lo), (best.0 + width).min(hi));
    let phi = 0.618_033_988_749_894_9;
    for _ in 0..80 {
        let x1 = b - phi * (b - a);
        let x2 = a + phi * (b - a);
        if gap(x1) >= gap(x2) {
            b = x2;
        } else {
            a = x1;
        }
    }
    gap(0.5 * (a + b)).max(best.1)
}

/// Largest maturity at which the Black-Scholes smoothing of the terminal
/// payoff deviates from it by less than `tol_frac` of the strike, located by
/// bisection to 1e-6 on the maturity.
pub fn smoother_maturity(k: f64, r: f64, sigma: f64, tol_frac: f64) -> Result<f64> {
    if !(tol_frac > 0.0) {
        return Err(Error::InvalidInput(format!(
            "smoothing tolerance must be positive, got {tol_frac}"
        )));
    }
    let tol = tol_frac * k;
    // The at-the-money time value grows like sigma sqrt(t), so a bracket
    // always exists.
    let mut lo = 1e-12;
    let mut hi = 1e-4;
    while max_smoothing_gap(k, r, sigma, hi) < tol {
        hi *= 2.0;
        if hi > 1e4 {
            return Ok(hi);
        }
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if max_smoothing_gap(k, r, sigma, mid) < tol {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Market, contract, and preference constants of the portfolio problem.
#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioParams {
    /// CARA risk aversion.
    pub alpha: f64,
    pub r: f64,
    /// Drift of the log-return.
    pub mu_tilde: f64,
    /// Volatility of the log-return.
    pub sigma_tilde: f64,
    pub s0: f64,
    /// Contract maturity.
    pub tau: f64,
    pub k_put: f64,
    pub k_call: f64,
    /// Half-width of the log-return truncation in volatilities.
    pub truncation_sds: f64,
    /// Fixed holding in the futures leg; negative values are long.
    pub theta_bar: f64,
    pub theta0: Vec<f64>,
}

impl Default for PortfolioParams {
    fn default() -> Self {
        PortfolioParams {
            alpha: 0.8,
            r: 0.002,
            mu_tilde: 0.05,
            sigma_tilde: 0.4,
            s0: 1.0,
            tau: 1.0,
            k_put: 0.96,
            k_call: 1.07,
            truncation_sds: 10.0,
            theta_bar: -1.0,
            theta0: vec![0.0, 0.0],
        }
    }
}

const QUAD_INTERVALS: usize = 10_000;

// Composite Simpson nodes and weights against the truncated normal density.
fn truncated_normal_quadrature(mean: f64, sd: f64, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let n = QUAD_INTERVALS;
    let h = (b - a) / n as f64;
    let z = normal::cdf((b - mean) / sd) - normal::cdf((a - mean) / sd);
    let mut nodes = Vec::with_capacity(n + 1);
    let mut weights = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let x = a + h * i as f64;
        let simpson = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        nodes.push(x);
        weights.push(simpson * h / 3.0 * normal::pdf_scaled(x, mean, sd) / z);
    }
    (nodes, weights)
}

// Deterministic Nelder-Mead used to locate the portfolio optimum of the
// quadrature objective.
fn nelder_mead<F: Fn(&[f64]) -> f64>(f: F, start: &[f64], scale: f64) -> (Vec<f64>, f64) {
    let d = start.len();
    let mut simplex: Vec<Vec<f64>> = (0..=d)
        .map(|i| {
            let mut p = start.to_vec();
            if i > 0 {
                p[i - 1] += scale;
            }
            p
        })
        .collect();
    let mut values: Vec<f64> = simplex.iter().map(|p| f(p)).collect();
    for _ in 0..2000 {
        let mut idx: Vec<usize> = (0..=d).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        let (best, worst, second) = (idx[0], idx[d], idx[d - 1]);
        if (values[worst] - values[best]).abs() <= 1e-12 * (1.0 + values[best].abs()) {
            break;
        }
        let centroid: Vec<f64> = (0..d)
            .map(|j| idx[..d].iter().map(|&i| simplex[i][j]).sum::<f64>() / d as f64)
            .collect();
        let reflect: Vec<f64> = (0..d)
            .map(|j| centroid[j] + (centroid[j] - simplex[worst][j]))
            .collect();
        let fr = f(&reflect);
        if fr < values[best] {
            let expand: Vec<f64> = (0..d)
                .map(|j| centroid[j] + 2.0 * (centroid[j] - simplex[worst][j]))
                .collect();
            let fe = f(&expand);
            if fe < fr {
                simplex[worst] = expand;
                values[worst] = fe;
            } else {
                simplex[worst] = reflect;
                values[worst] = fr;
            }
        } else if fr < values[second] {
            simplex[worst] = reflect;
            values[worst] = fr;
        } else {
            let contract: Vec<f64> = (0..d)
                .map(|j| centroid[j] + 0.5 * (simplex[worst][j] - centroid[j]))
                .collect();
            let fc = f(&contract);
            if fc < values[worst] {
                simplex[worst] = contract;
                values[worst] = fc;
            } else {
                for &i in &idx[1..] {
                    let p: Vec<f64> = (0..d)
                        .map(|j| 0.5 * (simplex[i][j] + simplex[best][j]))
                        .collect();
                    values[i] = f(&p);
                    simplex[i] = p;
                }
            }
        }
    }
    let mut best = 0;
    for i in 1..=d {
        if values[i] < values[best] {
            best = i;
        }
    }
    (simplex[best].clone(), values[best])
}

/// CARA-utility portfolio with smoothed option payoffs.
///
/// Noise is the truncated Gaussian log-return; the spot is `s0 exp(x)`.
/// Each option's terminal payoff is replaced by its Black-Scholes value at
/// the smoothing maturity and charged its trade-date premium.
pub fn make_portfolio(params: PortfolioParams) -> Result<Problem> {
    let p = params.clone();
    let a = p.mu_tilde - p.truncation_sds * p.sigma_tilde;
    let b = p.mu_tilde + p.truncation_sds * p.sigma_tilde;
    let premium_put = bs_price(p.s0, p.k_put, p.r, p.sigma_tilde, p.tau, false)?;
    let premium_call = bs_price(p.s0, p.k_call, p.r, p.sigma_tilde, p.tau, true)?;
    let t_put = smoother_maturity(p.k_put, p.r, p.sigma_tilde, 0.01)?;
    let t_call = smoother_maturity(p.k_call, p.r, p.sigma_tilde, 0.01)?;

    let g_put = {
        let (k, r, sd) = (p.k_put, p.r, p.sigma_tilde);
        move |spot: f64| bs_price(spot, k, r, sd, t_put, false).unwrap() - premium_put
    };
    let g_call = {
        let (k, r, sd) = (p.k_call, p.r, p.sigma_tilde);
        move |spot: f64| bs_price(spot, k, r, sd, t_call, true).unwrap() - premium_call
    };

    let oracle: Oracle = {
        let (alpha, s0, theta_bar) = (p.alpha, p.s0, p.theta_bar);
        let (g_put, g_call) = (g_put, g_call);
        Arc::new(move |theta: &[f64], x: &[f64]| {
            let spot = s0 * x[0].exp();
            let wealth = theta[0] * g_put(spot) + theta[1] * g_call(spot) - theta_bar * (spot - s0);
            (-alpha * wealth).exp()
        })
    };

    // Quadrature tables for the exact objective: payoff legs evaluated once
    // per node.
    let (nodes, weights) = truncated_normal_quadrature(p.mu_tilde, p.sigma_tilde, a, b);
    let legs: Vec<(f64, f64, f64, f64)> = nodes
        .iter()
        .zip(&weights)
        .map(|(&x, &w)| {
            let spot = p.s0 * x.exp();
            (g_put(spot), g_call(spot), spot - p.s0, w)
        })
        .collect();
    let legs = Arc::new(legs);

    let true_objective: ScalarField = {
        let legs = Arc::clone(&legs);
        let (alpha, theta_bar) = (p.alpha, p.theta_bar);
        Arc::new(move |theta: &[f64]| {
            legs.iter()
                .map(|&(gp, gc, gf, w)| {
                    w * (-alpha * (theta[0] * gp + theta[1] * gc - theta_bar * gf)).exp()
                })
                .sum()
        })
    };
    let true_gradient: VectorField = {
        let legs = Arc::clone(&legs);
        let (alpha, theta_bar) = (p.alpha, p.theta_bar);
        Arc::new(move |theta: &[f64]| {
            let mut g = vec![0.0; 2];
            for &(gp, gc, gf, w) in legs.iter() {
                let v = w * (-alpha * (theta[0] * gp + theta[1] * gc - theta_bar * gf)).exp();
                g[0] += -alpha * gp * v;
                g[1] += -alpha * gc * v;
            }
            g
        })
    };

    // Locate the optimum of the quadrature objective: coarse grid, then a
    // simplex polish from the best cell.
    let f_star = {
        let f = &true_objective;
        let mut best = (vec![0.0, 0.0], f(&[0.0, 0.0]));
        let span = 4.0;
        let steps = 16;
        for i in 0..=steps {
            for j in 0..=steps {
                let t = [
                    -span + 2.0 * span * i as f64 / steps as f64,
                    -span + 2.0 * span * j as f64 / steps as f64,
                ];
                let v = f(&t);
                if v < best.1 {
                    best = (t.to_vec(), v);
                }
            }
        }
        let (_, v) = nelder_mead(|t| f(t), &best.0, 0.25);
        v.min(best.1)
    };

    Ok(Problem {
        name: "portfolio".into(),
        d: 2,
        q: 1,
        oracle,
        map: InverseMap::TruncatedGaussian(vec![TruncatedGaussianAxis {
            mean: p.mu_tilde,
            sd: p.sigma_tilde,
            a,
            b,
        }]),
        theta0: p.theta0,
        true_objective: Some(true_objective),
        true_gradient: Some(true_gradient),
        f_star: Some(f_star),
    })
}

/// Names resolvable by [`by_name`].
pub fn registry() -> &'static [&'static str] {
    &["ex1", "ex2", "ex3", "portfolio", "portfolio2"]
}

fn build(name: &str) -> Result<Problem> {
    match name {
        "ex1" => Ok(make_ex1()),
        "ex2" => Ok(make_ex2()),
        "ex3" => Ok(make_ex3()),
        "portfolio" => make_portfolio(PortfolioParams::default()),
        "portfolio2" => {
            let params = PortfolioParams {
                theta0: vec![1.0, 1.0],
                ..PortfolioParams::default()
            };
            let mut p = make_portfolio(params)?;
            p.name = "portfolio2".into();
            Ok(p)
        }
        other => Err(Error::UnknownName {
            kind: "problem",
            name: other.into(),
        }),
    }
}

/// Look up a benchmark problem. `portfolio2` is the portfolio started from
/// the second initial guess `(1, 1)`.
///
/// Construction is deterministic; the portfolio's optimum search is cached
/// process-wide, so repeated lookups are cheap.
pub fn by_name(name: &str) -> Result<Problem> {
    use std::collections::HashMap;
    use std::sync::{Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<String, Problem>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(p) = cache.lock().unwrap().get(name) {
        return Ok(p.clone());
    }
    let built = build(name)?;
    cache
        .lock()
        .unwrap()
        .entry(name.to_string())
        .or_insert_with(|| built.clone());
    Ok(built)
}
