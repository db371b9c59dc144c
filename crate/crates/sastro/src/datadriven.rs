//! Discrete inverse map over a fixed dataset.
//!
//! Rows are ordered by their score on the leading principal component of the
//! column-centered data; the sorted ranks are identified with the left
//! endpoints `{0, 1/n, ..., (n-1)/n}` of the unit interval, so a uniform draw
//! floors to an endpoint and pulls back to one row. Sampling is with
//! replacement through a one-dimensional uniform interface regardless of the
//! row dimension.

use std::path::Path;

use rand_chacha::rand_core::RngCore;

use crate::error::{Error, Result};
use crate::estimator::{Regime, SamplingSchedule};
use crate::rng::uniform_oc;

/// PCA-ordered dataset with its rank-to-row permutation.
#[derive(Debug, Clone)]
pub struct DiscreteMap {
    data: Vec<Vec<f64>>,
    /// `order[rank]` is the row index with the rank-th smallest score.
    order: Vec<usize>,
    /// First-principal-component scores, in original row order.
    scores: Vec<f64>,
    /// Leading eigenvector of the covariance (sign-fixed).
    component: Vec<f64>,
}

impl DiscreteMap {
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn component(&self) -> &[f64] {
        &self.component
    }

    /// Interval endpoints `{0, 1/n, ..., (n-1)/n}`.
    pub fn endpoints(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.len()).map(|i| i as f64 / n).collect()
    }

    /// Row of the given score rank (0-based).
    pub fn row_by_rank(&self, rank: usize) -> &[f64] {
        &self.data[self.order[rank]]
    }

    /// Rank selected by a uniform draw: the largest endpoint at or below `u`.
    pub fn rank_of(&self, u: f64) -> usize {
        let n = self.len();
        ((u * n as f64).floor() as usize).min(n - 1)
    }
}

// Power iteration on the covariance of column-centered data; q is small so
// the dense q x q product is cheap.
#[allow(clippy::needless_range_loop)]
fn leading_eigenvector(centered: &[Vec<f64>], q: usize) -> Result<Vec<f64>> {
    let n = centered.len() as f64;
    let mut cov = vec![vec![0.0; q]; q];
    for row in centered {
        for i in 0..q {
            for j in i..q {
                cov[i][j] += row[i] * row[j];
            }
        }
    }
    for i in 0..q {
        for j in i..q {
            cov[i][j] /= n - 1.0;
            cov[j][i] = cov[i][j];
        }
    }
    let trace: f64 = (0..q).map(|i| cov[i][i]).sum();
    if trace <= 0.0 || !trace.is_finite() {
        return Err(Error::InvalidInput(
            "dataset has zero covariance; a principal direction is undefined".into(),
        ));
    }

    let mut v = vec![1.0 / (q as f64).sqrt(); q];
    for it in 0..10_000 {
        let mut w = vec![0.0; q];
        for i in 0..q {
            for j in 0..q {
                w[i] += cov[i][j] * v[j];
            }
        }
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            // v is in the null space; restart from a coordinate direction.
            v = vec![0.0; q];
            v[it % q] = 1.0;
            continue;
        }
        for x in &mut w {
            *x /= norm;
        }
        let diff: f64 = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let diff_neg: f64 = v
            .iter()
            .zip(&w)
            .map(|(a, b)| (a + b) * (a + b))
            .sum::<f64>()
            .sqrt();
        v = w;
        if diff.min(diff_neg) < 1e-10 {
            break;
        }
    }
    // Sign convention: the largest-magnitude loading is positive.
    let (mut max_i, mut max_a) = (0, 0.0);
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > max_a {
            max_a = x.abs();
            max_i = i;
        }
    }
    if v[max_i] < 0.0 {
        for x in &mut v {
            *x = -*x;
        }
    }
    Ok(v)
}

/// Build the map: center columns, extract the leading principal direction by
/// power iteration, and sort rows by score (ties keep original row order).
pub fn build_discrete_map(data: Vec<Vec<f64>>) -> Result<DiscreteMap> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least two rows to build a discrete map, got {n}"
        )));
    }
    let q = data[0].len();
    if q == 0 || data.iter().any(|r| r.len() != q) {
        return Err(Error::InvalidInput(
            "rows must share a positive dimension".into(),
        ));
    }
    let mut means = vec![0.0; q];
    for row in &data {
        for (m, &x) in means.iter_mut().zip(row) {
            *m += x;
        }
    }
    for m in &mut means {
        *m /= n as f64;
    }
    let centered: Vec<Vec<f64>> = data
        .iter()
        .map(|row| row.iter().zip(&means).map(|(x, m)| x - m).collect())
        .collect();
    let component = leading_eigenvector(&centered, q)?;
    let scores: Vec<f64> = centered
        .iter()
        .map(|row| row.iter().zip(&component).map(|(x, c)| x * c).sum())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    Ok(DiscreteMap {
        data,
        order,
        scores,
        component,
    })
}

/// Draw `n_hat` rows with replacement through the uniform interface.
pub fn sample_discrete(map: &DiscreteMap, n_hat: usize, rng: &mut impl RngCore) -> Vec<Vec<f64>> {
    (0..n_hat)
        .map(|_| map.row_by_rank(map.rank_of(uniform_oc(rng))).to_vec())
        .collect()
}

/// Plain mean and unbiased variance of the oracle over `nbar` discrete draws.
pub fn estimate_discrete<F>(
    theta: &[f64],
    oracle: F,
    map: &DiscreteMap,
    nbar: usize,
    rng: &mut impl RngCore,
) -> Result<(f64, f64)>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if nbar < 2 {
        return Err(Error::InsufficientSamples { need: 2, got: nbar });
    }
    let values: Vec<f64> = (0..nbar)
        .map(|_| oracle(theta, map.row_by_rank(map.rank_of(uniform_oc(rng)))))
        .collect();
    let mean = values.iter().sum::<f64>() / nbar as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nbar as f64 - 1.0);
    Ok((mean, var))
}

/// Deflation schedule for runs driven by the discrete map. No guarantee
/// backs any particular choice here; this mirrors the no-stratification
/// power schedule.
pub fn default_dm_schedule() -> SamplingSchedule {
    SamplingSchedule::new(Regime::NsChebyshev)
}

/// Read a numeric dataset from delimited text (comma or whitespace).
///
/// A single leading non-numeric row is treated as a header. Any other
/// malformed row fails with its 1-based line number.
pub fn load_dataset(path: &Path) -> Result<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)?;
    parse_dataset(&text)
}

pub fn parse_dataset(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width: Option<usize> = None;
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = if trimmed.contains(',') {
            trimmed.split(',').map(str::trim).collect()
        } else {
            trimmed.split_whitespace().collect()
        };
        let parsed: std::result::Result<Vec<f64>, _> =
            fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(row) => {
                if let Some(w) = width {
                    if row.len() != w {
                        return Err(Error::Parse {
                            line: line_no,
                            message: format!("expected {w} columns, found {}", row.len()),
                        });
                    }
                } else {
                    width = Some(row.len());
                }
                rows.push(row);
            }
            Err(_) if rows.is_empty() && width.is_none() => {
                // Header row.
                continue;
            }
            Err(_) => {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("non-numeric field in row: {trimmed:?}"),
                });
            }
        }
    }
    Ok(rows)
}
