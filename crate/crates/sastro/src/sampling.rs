//! Equiprobable stratification of the unit hypercube and inverse-transform
//! maps into the noise space.
//!
//! The hypercube `(0,1]^q` is partitioned into `ell = m^q` half-open boxes of
//! side `1/m`, each carrying probability `1/ell` under the uniform law. Draws
//! land in a chosen box and are pushed through an inverse map (componentwise
//! quantiles, a truncated-Gaussian quantile, a factor construction, or a
//! user-supplied transform) to produce noise samples.

use std::sync::Arc;

use rand_chacha::rand_core::RngCore;

use crate::error::{Error, Result};
use crate::normal;
use crate::rng::uniform_oc;

/// Exact integer q-th root, if one exists.
pub fn integer_root(ell: usize, q: usize) -> Option<usize> {
    if ell == 0 || q == 0 {
        return None;
    }
    let guess = (ell as f64).powf(1.0 / q as f64).round() as usize;
    (guess.saturating_sub(2)..=guess + 2).find(|&m| m > 0 && m.checked_pow(q as u32) == Some(ell))
}

/// Equiprobable partition of `(0,1]^q` into `ell = m^q` boxes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StrataGrid {
    q: usize,
    ell: usize,
    m: usize,
}

impl StrataGrid {
    pub fn new(ell: usize, q: usize) -> Result<Self> {
        let m = integer_root(ell, q).ok_or(Error::InvalidStrataCount { ell, q })?;
        Ok(StrataGrid { q, ell, m })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    /// Total number of strata.
    pub fn ell(&self) -> usize {
        self.ell
    }

    /// Splits per axis.
    pub fn m(&self) -> usize {
        self.m
    }

    /// Left endpoint of stratum `index`, counting lexicographically.
    pub fn left_endpoint(&self, index: usize) -> Vec<f64> {
        debug_assert!(index < self.ell);
        let mut coords = vec![0.0; self.q];
        let mut rem = index;
        for j in (0..self.q).rev() {
            coords[j] = (rem % self.m) as f64 / self.m as f64;
            rem /= self.m;
        }
        coords
    }

    /// Index of the stratum containing `u`, or `None` outside `(0,1]^q`.
    pub fn stratum_of(&self, u: &[f64]) -> Option<usize> {
        if u.len() != self.q {
            return None;
        }
        let mut index = 0usize;
        for &c in u {
            if !(c > 0.0 && c <= 1.0) {
                return None;
            }
            // Half-open boxes (l, l + 1/m]: the box owning c has left end
            // ceil(c*m) - 1.
            let cell = (c * self.m as f64).ceil() as usize - 1;
            index = index * self.m + cell.min(self.m - 1);
        }
        Some(index)
    }
}

/// Left endpoints of all strata, lexicographically ordered.
pub fn strata_left_endpoints(ell: usize, q: usize) -> Result<Vec<Vec<f64>>> {
    let grid = StrataGrid::new(ell, q)?;
    Ok((0..ell).map(|i| grid.left_endpoint(i)).collect())
}

/// Admissible total sample sizes `{nbar * m^q : m = 1, 2, ...}`.
#[derive(Debug, Clone, Copy)]
pub struct AdmissibleSizes {
    pub nbar: usize,
    pub q: usize,
}

impl AdmissibleSizes {
    pub fn new(nbar: usize, q: usize) -> Self {
        AdmissibleSizes { nbar, q }
    }

    pub fn contains(&self, n: usize) -> bool {
        n >= self.nbar
            && n.is_multiple_of(self.nbar)
            && integer_root(n / self.nbar, self.q).is_some()
    }

    /// Smallest admissible size >= `target` (a real-valued floor).
    pub fn first_at_least(&self, target: f64) -> usize {
        let mut m = 1usize;
        loop {
            let n = self.nbar * m.pow(self.q as u32);
            if n as f64 >= target {
                return n;
            }
            m += 1;
        }
    }
}

/// Smallest element of `{nbar * m^q}` strictly greater than `n`.
pub fn next_admissible(n: usize, nbar: usize, q: usize) -> usize {
    let sizes = AdmissibleSizes::new(nbar, q);
    sizes.first_at_least(n as f64 + 1.0)
}

/// Deterministic point placement inside a stratum: `u = left + v / m` with
/// `v` in `(0,1]^q`, so the result lies in the half-open box `(left, left+1/m]`.
pub fn stratum_point(left: &[f64], m: usize, v: &[f64]) -> Vec<f64> {
    debug_assert_eq!(left.len(), v.len());
    left.iter()
        .zip(v)
        .map(|(&l, &vi)| l + vi / m as f64)
        .collect()
}

/// Uniform draw inside the stratum with the given left endpoint.
pub fn sample_in_stratum(left: &[f64], m: usize, rng: &mut impl RngCore) -> Vec<f64> {
    let v: Vec<f64> = left.iter().map(|_| uniform_oc(rng)).collect();
    stratum_point(left, m, &v)
}

/// Quantile of a Gaussian truncated to `[a, b]`.
///
/// Evaluates `mean + sd * Phi^{-1}(Phi(alpha) + u (Phi(beta) - Phi(alpha)))`
/// with standardized bounds `alpha`, `beta`; the derivative of the result is
/// finite on the whole closed interval `u in [0, 1]`.
pub fn truncated_quantile(u: f64, mean: f64, sd: f64, a: f64, b: f64) -> Result<f64> {
    if !(a < b) {
        return Err(Error::InvalidDistribution(format!(
            "degenerate truncation range [{a}, {b}]"
        )));
    }
    if !(sd > 0.0) {
        return Err(Error::InvalidDistribution(format!("non-positive sd {sd}")));
    }
    let alpha = (a - mean) / sd;
    let beta = (b - mean) / sd;
    let pa = normal::cdf(alpha);
    let pb = normal::cdf(beta);
    let p = pa + u * (pb - pa);
    let x = if p <= 0.0 {
        alpha
    } else if p >= 1.0 {
        beta
    } else {
        normal::inv_cdf(p).clamp(alpha, beta)
    };
    Ok(mean + sd * x)
}

/// Per-axis parameters of a truncated-Gaussian margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedGaussianAxis {
    pub mean: f64,
    pub sd: f64,
    pub a: f64,
    pub b: f64,
}

type QuantileFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type MapFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Inverse-transform map from `(0,1]^q` into the noise support.
#[derive(Clone)]
pub enum InverseMap {
    /// Independent truncated-Gaussian margins; the inverse derivative is
    /// finite on the closed cube.
    TruncatedGaussian(Vec<TruncatedGaussianAxis>),
    /// Componentwise quantile functions (independent margins), each strictly
    /// increasing on (0,1].
    Quantile(Vec<QuantileFn>),
    /// Factor construction `X_i = Y_i + sum_m beta[i][m] Z_m` with standard
    /// Gaussian `Y`, `Z`; consumes `q = x_dim + n_factors` uniforms and
    /// outputs `x_dim` coordinates.
    FactorGaussian { loadings: Vec<Vec<f64>> },
    /// Arbitrary user-supplied transform with explicit input dimension.
    Custom { q: usize, map: MapFn },
}

impl InverseMap {
    /// Identity map: the noise is uniform on `(0,1]^q`.
    pub fn uniform(q: usize) -> Self {
        InverseMap::Quantile((0..q).map(|_| Arc::new(|u: f64| u) as QuantileFn).collect())
    }

    /// One truncated standard Gaussian axis per dimension.
    pub fn truncated_std_gaussian(q: usize, a: f64, b: f64) -> Self {
        InverseMap::TruncatedGaussian(vec![
            TruncatedGaussianAxis {
                mean: 0.0,
                sd: 1.0,
                a,
                b
            };
            q
        ])
    }

    /// Uniform input dimension.
    pub fn q(&self) -> usize {
        match self {
            InverseMap::TruncatedGaussian(axes) => axes.len(),
            InverseMap::Quantile(margins) => margins.len(),
            InverseMap::FactorGaussian { loadings } => {
                loadings.len() + loadings.first().map_or(0, Vec::len)
            }
            InverseMap::Custom { q, .. } => *q,
        }
    }

    /// Output dimension (differs from `q` only for the factor kind).
    pub fn out_dim(&self) -> usize {
        match self {
            InverseMap::FactorGaussian { loadings } => loadings.len(),
            _ => self.q(),
        }
    }

    /// Map a uniform vector into the noise space.
    pub fn apply(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.out_dim()];
        self.apply_into(u, &mut out)?;
        Ok(out)
    }

    /// Allocation-free variant of [`InverseMap::apply`].
    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        if u.len() != self.q() {
            return Err(Error::InvalidInput(format!(
                "uniform vector has dimension {}, map expects {}",
                u.len(),
                self.q()
            )));
        }
        for (i, &ui) in u.iter().enumerate() {
            if !(ui > 0.0 && ui <= 1.0) {
                return Err(Error::DomainError {
                    index: i,
                    value: ui,
                });
            }
        }
        match self {
            InverseMap::TruncatedGaussian(axes) => {
                for ((o, &ui), ax) in out.iter_mut().zip(u).zip(axes) {
                    *o = truncated_quantile(ui, ax.mean, ax.sd, ax.a, ax.b)?;
                }
            }
            InverseMap::Quantile(margins) => {
                for ((o, &ui), f) in out.iter_mut().zip(u).zip(margins) {
                    *o = f(ui);
                }
            }
            InverseMap::FactorGaussian { loadings } => {
                let x_dim = loadings.len();
                let z: Vec<f64> = u[x_dim..].iter().map(|&ui| normal::inv_cdf(ui)).collect();
                for i in 0..x_dim {
                    let y = normal::inv_cdf(u[i]);
                    *out.get_mut(i).unwrap() = y + loadings[i]
                        .iter()
                        .zip(&z)
                        .map(|(b, zi)| b * zi)
                        .sum::<f64>();
                }
            }
            InverseMap::Custom { map, .. } => {
                out.copy_from_slice(&map(u));
            }
        }
        Ok(())
    }
}

impl std::fmt::Debug for InverseMap {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InverseMap::TruncatedGaussian(axes) => {
                f.debug_tuple("TruncatedGaussian").field(axes).finish()
            }
            InverseMap::Quantile(m) => write!(f, "Quantile(q={})", m.len()),
            InverseMap::FactorGaussian { loadings } => f
                .debug_struct("FactorGaussian")
                .field("loadings", loadings)
                .finish(),
            InverseMap::Custom { q, .. } => write!(f, "Custom(q={q})"),
        }
    }
}

/// Smallest admissible strata count delivering a `c`-fold variance-decay
/// speedup: the ceiling of `c^{q/2}` rounded up to the next perfect q-th
/// power.
pub fn strata_for_speedup(c: f64, q: usize) -> usize {
    let target = c.powf(q as f64 / 2.0).ceil().max(1.0) as usize;
    let mut m = 1usize;
    loop {
        let ell = m.pow(q as u32);
        if ell >= target {
            return ell;
        }
        m += 1;
    }
}
