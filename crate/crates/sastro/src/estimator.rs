//! Stratified sampling estimates and the adaptive sample-size rule.
//!
//! An estimate at sample size `n` splits `(0,1]^q` into `ell = n / nbar`
//! equiprobable strata, draws `nbar` points per stratum, maps them into the
//! noise space, and averages the oracle. The pooled per-stratum variance feeds
//! the stopping rule
//! `sqrt(max(sigma2_min, pooled) / n) <= kappa_as * Delta^gamma / sqrt(lambda_k)`,
//! which is scanned over the admissible ladder `{nbar * m^q}` starting at the
//! first size >= `lambda_k`. Each candidate size is evaluated with fresh
//! draws; every oracle call, including rejected rounds, is counted.

use crate::error::{Error, Result};
use crate::rng::{uniform_oc, StreamKey};
use crate::sampling::{AdmissibleSizes, InverseMap, StrataGrid};

/// Tail/growth regime selecting the deflation schedule `(lambda_k, gamma)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    /// Bounded inverse-map gradient (truncated or compact supports).
    StratBounded,
    /// Sub-exponential margins, polynomially growing oracle.
    StratSePo,
    /// Sub-exponential margins, exponentially growing oracle.
    StratSeEx,
    /// Sub-Gaussian margins, polynomially growing oracle.
    StratSgPo,
    /// Sub-Gaussian margins, exponentially growing oracle.
    StratSgEx,
    /// No stratification, power deflation (Chebyshev-style guarantee).
    NsChebyshev,
    /// No stratification, logarithmic deflation (Bernstein-style guarantee).
    NsBernstein,
    /// Fixed sample size; the rule is bypassed entirely.
    Fixed,
}

impl Regime {
    /// Whether estimates under this regime stratify the hypercube.
    pub fn stratifies(&self) -> bool {
        matches!(
            self,
            Regime::StratBounded
                | Regime::StratSePo
                | Regime::StratSeEx
                | Regime::StratSgPo
                | Regime::StratSgEx
        )
    }
}

/// Constants of the adaptive sampling rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingSchedule {
    pub regime: Regime,
    /// Exponent slack in the power schedules.
    pub delta: f64,
    /// Extra slack in the sub-exponential/sub-Gaussian gamma.
    pub varrho: f64,
    /// Minimal sub-exponential decay rate (SE/EX regime only).
    pub kappa_min: f64,
    /// Maximal exponential growth rate of the oracle (SE/EX regime only).
    pub b_max: f64,
    /// Scale of the rule threshold.
    pub kappa_as: f64,
    /// Variance floor inside the rule.
    pub sigma2_min: f64,
    /// Hard cap on any single sample size demanded by the rule.
    pub n_cap: usize,
    /// Optional cap on oracle calls spent within one adaptive estimate.
    pub call_cap: Option<u64>,
    /// Sample size used by the `Fixed` regime.
    pub fixed_n: usize,
}

impl SamplingSchedule {
    pub fn new(regime: Regime) -> Self {
        SamplingSchedule {
            regime,
            delta: 0.2,
            varrho: 0.1,
            kappa_min: 1.0,
            b_max: 0.0,
            kappa_as: 1.0,
            sigma2_min: 1e-6,
            n_cap: 10_000_000,
            call_cap: None,
            fixed_n: 100,
        }
    }
}

/// Deflation pair `(lambda_k, gamma)` for iteration `k` and noise dimension
/// `q`.
///
/// Power schedules evaluate at `k + 1` and the logarithmic schedule at
/// `k + 2`, so the floor is positive from the first iteration; the asymptotic
/// rates are unchanged.
pub fn lambda_gamma(schedule: &SamplingSchedule, k: usize, q: usize) -> Result<(f64, f64)> {
    let qf = q as f64;
    let kp = (k + 1) as f64;
    let d = schedule.delta;
    match schedule.regime {
        Regime::StratBounded => Ok((kp.powf((1.0 + d) * qf / (qf + 2.0)), 2.0 * qf / (qf + 2.0))),
        Regime::StratSePo | Regime::StratSgPo | Regime::StratSgEx => Ok((
            kp.powf((1.0 + d) * qf / (qf + 1.0)),
            (4.0 + schedule.varrho) * qf / (2.0 * (qf + 1.0)),
        )),
        Regime::StratSeEx => {
            let kappa = schedule.kappa_min;
            let b = schedule.b_max;
            if kappa <= 2.0 * b {
                return Err(Error::InvalidSchedule(format!(
                    "sub-exponential/exponential regime needs kappa_min > 2 b_max, got {kappa} <= {}",
                    2.0 * b
                )));
            }
            let denom = (qf + 1.0) * kappa - 2.0 * b;
            Ok((
                kp.powf((1.0 + d) * qf * kappa / denom),
                2.0 * qf * kappa / denom,
            ))
        }
        Regime::NsChebyshev => Ok((kp.powf(1.0 + d), 2.0)),
        Regime::NsBernstein => Ok((((k + 2) as f64).ln().powf(1.0 + d), 2.0)),
        Regime::Fixed => Err(Error::InvalidSchedule(
            "fixed-size sampling has no deflation schedule".into(),
        )),
    }
}

/// One completed estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateResult {
    /// Stratified (or plain) sample mean.
    pub mean: f64,
    /// Pooled per-stratum variance `(1/ell) sum sigma_hat^2`, not scaled by
    /// `n` and not floored.
    pub pooled_variance: f64,
    /// Total samples in the returned estimate.
    pub n: usize,
    /// Strata used.
    pub ell: usize,
    /// Every oracle evaluation consumed, including discarded rounds.
    pub oracle_calls: u64,
}

/// Stratified estimate at fixed total size `n` with `nbar` points per
/// stratum (`ell = n / nbar` strata).
pub fn stratified_estimate<F>(
    theta: &[f64],
    n: usize,
    nbar: usize,
    map: &InverseMap,
    oracle: F,
    key: StreamKey,
) -> Result<EstimateResult>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if nbar < 2 {
        return Err(Error::InsufficientSamples { need: 2, got: nbar });
    }
    let q = map.q();
    if !n.is_multiple_of(nbar) {
        return Err(Error::InvalidInput(format!(
            "total size {n} is not a multiple of the per-stratum size {nbar}"
        )));
    }
    let ell = n / nbar;
    let grid = StrataGrid::new(ell, q)?;
    let m = grid.m();

    let mut mean_sum = 0.0;
    let mut var_sum = 0.0;
    let mut u = vec![0.0; q];
    let mut x = vec![0.0; map.out_dim()];
    let mut values = vec![0.0; nbar];
    for s in 0..ell {
        let left = grid.left_endpoint(s);
        let mut rng = key.stratum_rng(s as u64);
        let mut f_sum = 0.0;
        for value in values.iter_mut() {
            for (uj, lj) in u.iter_mut().zip(&left) {
                *uj = lj + uniform_oc(&mut rng) / m as f64;
            }
            map.apply_into(&u, &mut x)?;
            *value = oracle(theta, &x);
            f_sum += *value;
        }
        let f_bar = f_sum / nbar as f64;
        let ss: f64 = values.iter().map(|v| (v - f_bar) * (v - f_bar)).sum();
        mean_sum += f_bar;
        var_sum += ss / (nbar as f64 - 1.0);
    }
    Ok(EstimateResult {
        mean: mean_sum / ell as f64,
        pooled_variance: var_sum / ell as f64,
        n,
        ell,
        oracle_calls: n as u64,
    })
}

/// Single-stratum estimate: plain Monte Carlo mean and variance of `n` draws.
pub fn plain_estimate<F>(
    theta: &[f64],
    n: usize,
    map: &InverseMap,
    oracle: F,
    key: StreamKey,
) -> Result<EstimateResult>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    stratified_estimate(theta, n, n, map, oracle, key)
}

/// Left-hand side of the stopping rule at size `n`.
fn rule_lhs(pooled: f64, sigma2_min: f64, n: usize) -> f64 {
    (pooled.max(sigma2_min) / n as f64).sqrt()
}

/// Adaptive estimate: the smallest admissible `n >= lambda_k` whose floored
/// standard error clears `kappa_as * Delta^gamma / sqrt(lambda_k)`.
///
/// Candidate sizes walk the ladder `{nbar * m^q}`; each candidate is estimated
/// from scratch with fresh draws on its own sub-stream. Stratifying regimes
/// use `ell = n / nbar` strata, the no-stratification regimes pool all `n`
/// draws into one stratum while stepping through the same ladder.
pub fn adaptive_estimate<F>(
    theta: &[f64],
    k: usize,
    delta_tr: f64,
    schedule: &SamplingSchedule,
    nbar: usize,
    map: &InverseMap,
    oracle: F,
    key: StreamKey,
) -> Result<EstimateResult>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if !(delta_tr > 0.0) {
        return Err(Error::InvalidInput(format!(
            "trust-region radius must be positive, got {delta_tr}"
        )));
    }
    let q = map.q();
    let (lambda, gamma) = lambda_gamma(schedule, k, q)?;
    let threshold = schedule.kappa_as * delta_tr.powf(gamma) / lambda.sqrt();

    let sizes = AdmissibleSizes::new(nbar, q);
    let mut n = sizes.first_at_least(lambda);
    let mut calls: u64 = 0;
    let mut last: Option<EstimateResult> = None;
    let mut round_key = key;
    loop {
        if n > schedule.n_cap || schedule.call_cap.is_some_and(|cap| calls >= cap) {
            return Err(Error::BudgetExhausted {
                partial: last.map(|mut e| {
                    e.oracle_calls = calls;
                    e
                }),
                oracle_calls: calls,
                n_cap: schedule.n_cap,
            });
        }
        let mut est = if schedule.regime.stratifies() {
            stratified_estimate(theta, n, nbar, map, &oracle, round_key)?
        } else {
            plain_estimate(theta, n, map, &oracle, round_key)?
        };
        calls += est.oracle_calls;
        if rule_lhs(est.pooled_variance, schedule.sigma2_min, n) <= threshold {
            est.oracle_calls = calls;
            return Ok(est);
        }
        last = Some(est);
        n = sizes.first_at_least(n as f64 + 1.0);
        round_key = round_key.next_round();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_map() -> InverseMap {
        InverseMap::uniform(1)
    }

    #[test]
    fn lambda_gamma_bounded_example() {
        let mut s = SamplingSchedule::new(Regime::StratBounded);
        s.delta = 0.2;
        let (l, g) = lambda_gamma(&s, 7, 1).unwrap();
        assert!((l - 8f64.powf(0.4)).abs() < 1e-12);
        assert!((l - 2.2974).abs() < 1e-4);
        assert!((g - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_gamma_ns_example() {
        let mut s = SamplingSchedule::new(Regime::NsChebyshev);
        s.delta = 0.2;
        let (l, g) = lambda_gamma(&s, 7, 1).unwrap();
        assert!((l - 8f64.powf(1.2)).abs() < 1e-12);
        assert!((l - 12.1257).abs() < 1e-4);
        assert_eq!(g, 2.0);
    }

    #[test]
    fn lambda_gamma_se_ex_example() {
        let mut s = SamplingSchedule::new(Regime::StratSeEx);
        s.delta = 0.0;
        s.kappa_min = 4.0;
        s.b_max = 1.0;
        let (_, g) = lambda_gamma(&s, 0, 1).unwrap();
        assert!((g - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn lambda_gamma_rejects_slow_decay() {
        let mut s = SamplingSchedule::new(Regime::StratSeEx);
        s.kappa_min = 2.0;
        s.b_max = 1.0;
        assert!(matches!(
            lambda_gamma(&s, 0, 1),
            Err(Error::InvalidSchedule(_))
        ));
    }

    #[test]
    fn lambda_gamma_bernstein_is_logarithmic() {
        let mut s = SamplingSchedule::new(Regime::NsBernstein);
        s.delta = 0.2;
        let (l, g) = lambda_gamma(&s, 0, 1).unwrap();
        assert!((l - 2f64.ln().powf(1.2)).abs() < 1e-12);
        assert_eq!(g, 2.0);
    }

    #[test]
    fn lambda_is_nondecreasing_in_k() {
        for regime in [
            Regime::StratBounded,
            Regime::StratSePo,
            Regime::StratSgEx,
            Regime::NsChebyshev,
            Regime::NsBernstein,
        ] {
            let s = SamplingSchedule::new(regime);
            let mut prev = 0.0;
            for k in 0..50 {
                let (l, _) = lambda_gamma(&s, k, 2).unwrap();
                assert!(l >= prev, "{regime:?} not monotone at k={k}");
                prev = l;
            }
        }
    }

    #[test]
    fn constant_oracle_has_zero_variance() {
        let est =
            stratified_estimate(&[], 8, 2, &uniform_map(), |_, _| 4.25, StreamKey::new(1)).unwrap();
        assert_eq!(est.mean, 4.25);
        assert_eq!(est.pooled_variance, 0.0);
        assert_eq!(est.ell, 4);
        assert_eq!(est.oracle_calls, 8);
    }

    #[test]
    fn nbar_one_is_rejected() {
        assert!(matches!(
            stratified_estimate(&[], 4, 1, &uniform_map(), |_, _| 0.0, StreamKey::new(1)),
            Err(Error::InsufficientSamples { .. })
        ));
    }

    /// Empirical variance of repeated estimates of E[X], X ~ U(0,1].
    fn empirical_variance(n: usize, nbar: usize, reps: usize) -> f64 {
        let map = uniform_map();
        let mut sum = 0.0;
        let mut sq = 0.0;
        for r in 0..reps {
            let est = stratified_estimate(
                &[],
                n,
                nbar,
                &map,
                |_, x| x[0],
                StreamKey::with(1000 + r as u64, 0, 0, 0),
            )
            .unwrap();
            sum += est.mean;
            sq += est.mean * est.mean;
        }
        let mean = sum / reps as f64;
        sq / reps as f64 - mean * mean
    }

    #[test]
    fn stratified_variance_matches_closed_form() {
        // Var = 1/(12 n ell^2) for F = x on uniform noise.
        let reps = 10_000;
        let v = empirical_variance(8, 2, reps);
        let want = 1.0 / (12.0 * 8.0 * 16.0);
        assert!((v - want).abs() < 0.05 * want, "var {v}, want {want}");
        assert!((want - 6.510e-4).abs() < 1e-6);
    }

    #[test]
    fn single_stratum_variance_matches_closed_form() {
        let reps = 10_000;
        let v = empirical_variance(8, 8, reps);
        let want = 1.0 / 96.0;
        assert!((v - want).abs() < 0.05 * want, "var {v}, want {want}");
    }

    #[test]
    fn estimates_are_unbiased() {
        for (n, nbar) in [(8, 2), (16, 2), (16, 4), (32, 32)] {
            let reps = 10_000;
            let map = uniform_map();
            let mut sum = 0.0;
            for r in 0..reps {
                sum += stratified_estimate(
                    &[],
                    n,
                    nbar,
                    &map,
                    |_, x| x[0],
                    StreamKey::with(r as u64, 1, 0, 0),
                )
                .unwrap()
                .mean;
            }
            let mean = sum / reps as f64;
            let ell = n / nbar;
            let se = (1.0 / (12.0 * n as f64 * (ell * ell) as f64) / reps as f64).sqrt();
            assert!(
                (mean - 0.5).abs() < 4.0 * se,
                "biased at (n={n}, nbar={nbar}): {mean}"
            );
        }
    }

    #[test]
    fn variance_shrinks_with_more_strata() {
        let reps = 10_000;
        let v1 = empirical_variance(8, 8, reps); // ell = 1
        let v2 = empirical_variance(8, 4, reps); // ell = 2
        let v4 = empirical_variance(8, 2, reps); // ell = 4
        assert!(v4 < v2 && v2 < v1, "ordering failed: {v4} {v2} {v1}");
    }

    #[test]
    fn plain_estimate_mean_of_uniform() {
        let est =
            plain_estimate(&[], 100_000, &uniform_map(), |_, x| x[0], StreamKey::new(7)).unwrap();
        let se = (1.0f64 / (12.0 * 1e5)).sqrt();
        assert!((est.mean - 0.5).abs() < 3.0 * se);
        assert_eq!(est.ell, 1);
    }

    #[test]
    fn plain_matches_stratified_single_stratum_bitwise() {
        let key = StreamKey::with(3, 5, 2, 1);
        let a = plain_estimate(&[1.0], 64, &uniform_map(), |t, x| t[0] * x[0], key).unwrap();
        let b =
            stratified_estimate(&[1.0], 64, 64, &uniform_map(), |t, x| t[0] * x[0], key).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adaptive_stops_exactly_at_floored_threshold() {
        // Constant oracle, variance floored to 1: with kappa_as = 1, Delta = 1
        // and lambda = 4 the rule first holds at n = 4 (sqrt(1/4) = 1/sqrt(4)).
        let mut s = SamplingSchedule::new(Regime::NsChebyshev);
        s.delta = 1.0; // lambda_1 = (1+1)^2 = 4
        s.sigma2_min = 1.0;
        s.kappa_as = 1.0;
        let est = adaptive_estimate(
            &[],
            1,
            1.0,
            &s,
            2,
            &uniform_map(),
            |_, _| 0.0,
            StreamKey::new(1),
        )
        .unwrap();
        assert_eq!(est.n, 4);
        assert_eq!(est.oracle_calls, 4);
    }

    #[test]
    fn adaptive_with_tiny_floor_stops_at_lambda() {
        let mut s = SamplingSchedule::new(Regime::StratBounded);
        s.delta = 0.2;
        s.sigma2_min = 1e-12;
        // k = 80, q = 1: lambda = 81^0.4 ~ 5.8 -> first admissible n = 6.
        let est = adaptive_estimate(
            &[],
            80,
            1.0,
            &s,
            2,
            &uniform_map(),
            |_, _| 2.0,
            StreamKey::new(2),
        )
        .unwrap();
        assert_eq!(est.n, 6);
        assert_eq!(est.ell, 3);
    }

    #[test]
    fn halving_radius_scales_demand_by_two_pow_two_gamma() {
        // With the variance pinned at the floor the solved inequality gives
        // n >= sigma2 * lambda / (kappa Delta^gamma)^2, so halving Delta
        // multiplies the demand by 2^(2 gamma): 4 when gamma = 1 (bounded
        // regime at q = 2), 16 when gamma = 2.
        let mut s = SamplingSchedule::new(Regime::StratBounded);
        s.delta = 1.0;
        s.sigma2_min = 1.0;
        let map2 = InverseMap::uniform(2);
        let demand = |delta_tr: f64| {
            adaptive_estimate(
                &[],
                3,
                delta_tr,
                &s,
                2,
                &map2,
                |_, _| 0.0,
                StreamKey::new(3),
            )
            .unwrap()
            .n
        };
        // q = 2 bounded: gamma = 1, lambda = 4^1 = ... (k+1 = 4, exponent
        // (1+1)*2/4 = 1) -> lambda = 4; n >= 4 sigma / Delta^2.
        let n1 = demand(1.0);
        let n2 = demand(0.5);
        assert_eq!(n1, 8); // first admissible {2,8,18,...} >= 4
        assert_eq!(n2, 18); // demand 16 -> next admissible 18
        assert!(
            n2 >= 4 * n1 / 2 && n2 <= 3 * n1,
            "demand did not scale: {n1} -> {n2}"
        );

        let mut ns = SamplingSchedule::new(Regime::NsChebyshev);
        ns.delta = 0.0;
        ns.sigma2_min = 1.0;
        let d1 = adaptive_estimate(
            &[],
            3,
            1.0,
            &ns,
            2,
            &uniform_map(),
            |_, _| 0.0,
            StreamKey::new(4),
        )
        .unwrap()
        .n;
        let d2 = adaptive_estimate(
            &[],
            3,
            0.5,
            &ns,
            2,
            &uniform_map(),
            |_, _| 0.0,
            StreamKey::new(4),
        )
        .unwrap()
        .n;
        // gamma = 2: demand lambda sigma / Delta^4 = 4 -> 64.
        assert_eq!(d1, 4);
        assert_eq!(d2, 64);
    }

    #[test]
    fn returned_size_is_feasible_and_admissible() {
        let mut s = SamplingSchedule::new(Regime::StratBounded);
        s.sigma2_min = 1e-4;
        let map = uniform_map();
        for k in [0, 3, 10, 40] {
            for delta_tr in [2.0, 0.6, 0.2] {
                let est = adaptive_estimate(
                    &[],
                    k,
                    delta_tr,
                    &s,
                    2,
                    &map,
                    |_, x| x[0],
                    StreamKey::with(9, k as u64, 0, 0),
                )
                .unwrap();
                let (lambda, gamma) = lambda_gamma(&s, k, 1).unwrap();
                assert!(est.n as f64 >= lambda);
                assert!(AdmissibleSizes::new(2, 1).contains(est.n));
                assert!(
                    rule_lhs(est.pooled_variance, s.sigma2_min, est.n)
                        <= s.kappa_as * delta_tr.powf(gamma) / lambda.sqrt()
                );
            }
        }
    }

    #[test]
    fn demand_monotone_in_radius_and_iteration() {
        let mut s = SamplingSchedule::new(Regime::StratBounded);
        s.sigma2_min = 1.0; // dominate the (zero) sample variance
        let map = uniform_map();
        let demand = |k: usize, delta_tr: f64| {
            adaptive_estimate(&[], k, delta_tr, &s, 2, &map, |_, _| 1.0, StreamKey::new(5))
                .unwrap()
                .n
        };
        // Demand is non-increasing in Delta, so it must not drop as the
        // radius shrinks.
        let mut prev = 0;
        for delta_tr in [2.0, 1.0, 0.5, 0.25] {
            let n = demand(5, delta_tr);
            assert!(n >= prev, "demand fell from {prev} to {n} as Delta shrank");
            prev = n;
        }
        let mut prev = 0;
        for k in [1, 4, 16, 64] {
            let n = demand(k, 1.0);
            assert!(n >= prev, "n must not decrease with k");
            prev = n;
        }
    }

    #[test]
    fn call_and_size_caps_trip_budget_error() {
        let mut s = SamplingSchedule::new(Regime::NsChebyshev);
        s.sigma2_min = 1.0;
        s.n_cap = 50;
        // Demanded n is lambda/Delta^4 >> 50.
        let err = adaptive_estimate(
            &[],
            3,
            0.05,
            &s,
            2,
            &uniform_map(),
            |_, _| 0.0,
            StreamKey::new(6),
        )
        .unwrap_err();
        match err {
            Error::BudgetExhausted {
                partial,
                oracle_calls,
                ..
            } => {
                assert!(partial.is_some());
                assert!(oracle_calls > 0);
            }
            other => panic!("expected budget exhaustion, got {other}"),
        }

        let mut s = SamplingSchedule::new(Regime::NsChebyshev);
        s.sigma2_min = 1.0;
        s.call_cap = Some(30);
        let err = adaptive_estimate(
            &[],
            3,
            0.05,
            &s,
            2,
            &uniform_map(),
            |_, _| 0.0,
            StreamKey::new(6),
        )
        .unwrap_err();
        assert!(matches!(err, Error::BudgetExhausted { .. }));
    }

    #[test]
    fn variance_order_slopes() {
        // Expected decay rates along the admissible ladder:
        // q=1 stratified -> slope -3, q=2 stratified -> slope -2,
        // single-stratum baseline -> slope -1.
        fn slope(points: &[(f64, f64)]) -> f64 {
            let n = points.len() as f64;
            let sx: f64 = points.iter().map(|p| p.0).sum();
            let sy: f64 = points.iter().map(|p| p.1).sum();
            let sxx: f64 = points.iter().map(|p| p.0 * p.0).sum();
            let sxy: f64 = points.iter().map(|p| p.0 * p.1).sum();
            (n * sxy - sx * sy) / (n * sxx - sx * sx)
        }
        let reps = 3000;

        let mut pts = Vec::new();
        for m in [2usize, 4, 8, 16] {
            let n = 2 * m;
            let v = {
                let map = InverseMap::uniform(1);
                let mut sum = 0.0;
                let mut sq = 0.0;
                for r in 0..reps {
                    let e = stratified_estimate(
                        &[],
                        n,
                        2,
                        &map,
                        |_, x| x[0],
                        StreamKey::with(40_000 + r as u64, m as u64, 0, 0),
                    )
                    .unwrap();
                    sum += e.mean;
                    sq += e.mean * e.mean;
                }
                sq / reps as f64 - (sum / reps as f64).powi(2)
            };
            pts.push(((n as f64).ln(), v.ln()));
        }
        let s1 = slope(&pts);
        assert!((s1 + 3.0).abs() < 0.15, "q=1 slope {s1}");

        let map2 = InverseMap::uniform(2);
        let mut pts = Vec::new();
        for m in [2usize, 3, 4, 6] {
            let n = 2 * m * m;
            let mut sum = 0.0;
            let mut sq = 0.0;
            for r in 0..reps {
                let e = stratified_estimate(
                    &[],
                    n,
                    2,
                    &map2,
                    |_, x| x[0] + x[1],
                    StreamKey::with(80_000 + r as u64, m as u64, 0, 0),
                )
                .unwrap();
                sum += e.mean;
                sq += e.mean * e.mean;
            }
            let v = sq / reps as f64 - (sum / reps as f64).powi(2);
            pts.push(((n as f64).ln(), v.ln()));
        }
        let s2 = slope(&pts);
        assert!((s2 + 2.0).abs() < 0.15, "q=2 slope {s2}");

        let map = InverseMap::uniform(1);
        let mut pts = Vec::new();
        for n in [4usize, 8, 16, 32] {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for r in 0..reps {
                let e = plain_estimate(
                    &[],
                    n,
                    &map,
                    |_, x| x[0],
                    StreamKey::with(120_000 + r as u64, n as u64, 0, 0),
                )
                .unwrap();
                sum += e.mean;
                sq += e.mean * e.mean;
            }
            let v = sq / reps as f64 - (sum / reps as f64).powi(2);
            pts.push(((n as f64).ln(), v.ln()));
        }
        let s0 = slope(&pts);
        assert!((s0 + 1.0).abs() < 0.1, "baseline slope {s0}");
    }
}
