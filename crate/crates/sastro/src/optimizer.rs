//! The trust-region loop: adaptive estimation at the coordinate design,
//! diagonal-quadratic model fit, exact subproblem, acceptance test, radius
//! update, and budget accounting.

use crate::error::{Error, Result};
use crate::estimator::{
    adaptive_estimate, lambda_gamma, plain_estimate, EstimateResult, Regime, SamplingSchedule,
};
use crate::model::{design_points, fit_dq_model, solve_subproblem};
use crate::problems::Problem;
use crate::rng::StreamKey;

/// Solver flavor: stratified adaptive, two no-stratification adaptive
/// baselines, and a fixed-sample-size baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Sastrodf,
    AstrodfC,
    AstrodfB,
    Trodf,
}

impl Variant {
    fn check_schedule(&self, schedule: &SamplingSchedule) -> Result<()> {
        let ok = match self {
            Variant::Sastrodf => schedule.regime.stratifies(),
            Variant::AstrodfC => schedule.regime == Regime::NsChebyshev,
            Variant::AstrodfB => schedule.regime == Regime::NsBernstein,
            Variant::Trodf => schedule.regime == Regime::Fixed,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "variant {self:?} is incompatible with regime {:?}",
                schedule.regime
            )))
        }
    }

    fn tag(&self, nbar: usize) -> String {
        match self {
            Variant::Sastrodf => format!("SASTRODF-{nbar}"),
            Variant::AstrodfC => "ASTRODF-C".into(),
            Variant::AstrodfB => "ASTRODF-B".into(),
            Variant::Trodf => "TRODF".into(),
        }
    }
}

/// Trust-region constants and run caps.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionConfig {
    pub delta0: f64,
    pub delta_max: f64,
    /// Acceptance threshold on the estimated-vs-model reduction ratio.
    pub eta: f64,
    /// Scale of the gradient-size condition `Delta <= eta_tilde |grad M|`.
    pub eta_tilde: f64,
    /// Radius expansion factor (> 1).
    pub gamma_up: f64,
    /// Radius contraction factor (in (0,1)).
    pub gamma_down: f64,
    pub k_max: usize,
    /// Total oracle-call budget.
    pub w_max: u64,
    /// Optional stationarity stop on the true gradient, when the problem
    /// exposes one. Off by default.
    pub grad_tol: Option<f64>,
}

impl Default for TrustRegionConfig {
    fn default() -> Self {
        TrustRegionConfig {
            delta0: 1.0,
            delta_max: 100.0,
            eta: 0.1,
            eta_tilde: 10.0,
            gamma_up: 2.0,
            gamma_down: 0.5,
            k_max: 2000,
            w_max: 200_000,
            grad_tol: None,
        }
    }
}

impl TrustRegionConfig {
    fn validate(&self) -> Result<()> {
        if !(self.gamma_down > 0.0 && self.gamma_down < 1.0 && self.gamma_up > 1.0) {
            return Err(Error::InvalidInput(format!(
                "need 0 < gamma_down < 1 < gamma_up, got {} and {}",
                self.gamma_down, self.gamma_up
            )));
        }
        if !(self.delta0 > 0.0 && self.delta0 <= self.delta_max) {
            return Err(Error::InvalidInput(format!(
                "need 0 < delta0 <= delta_max, got {} and {}",
                self.delta0, self.delta_max
            )));
        }
        if !(self.eta > 0.0 && self.eta < 1.0 && self.eta_tilde > 0.0) {
            return Err(Error::InvalidInput(format!(
                "need eta in (0,1) and eta_tilde > 0, got {} and {}",
                self.eta, self.eta_tilde
            )));
        }
        Ok(())
    }
}

/// Why a run stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TerminalReason {
    Budget,
    Iterations,
    Stationarity,
}

/// One iteration of the loop.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub k: usize,
    /// Incumbent after this iteration's update.
    pub theta: Vec<f64>,
    /// Radius in force during the iteration.
    pub delta: f64,
    /// Acceptance ratio; absent when the model reduction was degenerate or
    /// the candidate was never estimated.
    pub rho: Option<f64>,
    pub accepted: bool,
    /// Final sample size per point: 2d+1 design points then the candidate
    /// (0 when the candidate was skipped or estimation aborted).
    pub n_per_point: Vec<usize>,
    /// Pooled variance per point, aligned with `n_per_point` (NaN when
    /// unavailable).
    pub pooled_var_per_point: Vec<f64>,
    /// Rule floor `lambda_k` in force (0 for the fixed-size variant).
    pub lambda: f64,
    /// Cumulative oracle calls through this iteration.
    pub w_cum: u64,
    /// Estimated objective at the incumbent.
    pub f_tilde_incumbent: f64,
    /// High-precision objective at the incumbent (NaN when unavailable).
    pub true_f_incumbent: f64,
}

/// Full run history.
#[derive(Debug, Clone)]
pub struct RunTrace {
    pub records: Vec<IterationRecord>,
    pub seed: u64,
    pub variant: String,
    pub terminal: TerminalReason,
}

impl RunTrace {
    pub fn final_theta(&self) -> Option<&[f64]> {
        self.records.last().map(|r| r.theta.as_slice())
    }
}

/// Estimated-over-model reduction ratio; `None` when the model reduction is
/// too small to divide by, which callers treat as an unsuccessful step.
pub fn acceptance_ratio(
    f_center: f64,
    f_candidate: f64,
    m_center: f64,
    m_candidate: f64,
) -> Option<f64> {
    let denom = m_center - m_candidate;
    if denom < 1e-12 * (1.0 + m_center.abs()) {
        None
    } else {
        Some((f_center - f_candidate) / denom)
    }
}

/// Radius update: expand on success (ratio above `eta` and radius below the
/// gradient scale), shrink otherwise.
pub fn update_radius(
    delta: f64,
    rho: Option<f64>,
    grad_norm: f64,
    config: &TrustRegionConfig,
) -> (f64, bool) {
    let success = rho.is_some_and(|r| r >= config.eta) && delta <= config.eta_tilde * grad_norm;
    if success {
        ((config.gamma_up * delta).min(config.delta_max), true)
    } else {
        (config.gamma_down * delta, false)
    }
}

struct PointEstimate {
    est: Option<EstimateResult>,
    calls: u64,
    exhausted: bool,
}

fn estimate_point<F>(
    theta: &[f64],
    k: usize,
    delta: f64,
    schedule: &SamplingSchedule,
    nbar: usize,
    problem: &Problem,
    oracle: &F,
    key: StreamKey,
) -> Result<PointEstimate>
where
    F: Fn(&[f64], &[f64]) -> f64,
{
    if schedule.regime == Regime::Fixed {
        let est = plain_estimate(theta, schedule.fixed_n, &problem.map, oracle, key)?;
        let calls = est.oracle_calls;
        return Ok(PointEstimate {
            est: Some(est),
            calls,
            exhausted: false,
        });
    }
    match adaptive_estimate(theta, k, delta, schedule, nbar, &problem.map, oracle, key) {
        Ok(est) => {
            let calls = est.oracle_calls;
            Ok(PointEstimate {
                est: Some(est),
                calls,
                exhausted: false,
            })
        }
        Err(Error::BudgetExhausted {
            partial,
            oracle_calls,
            ..
        }) => Ok(PointEstimate {
            est: partial,
            calls: oracle_calls,
            exhausted: true,
        }),
        Err(e) => Err(e),
    }
}

/// Run the trust-region loop on `problem` until the call budget or iteration
/// cap binds.
///
/// Each iteration estimates the 2d+1 design points, fits the diagonal
/// quadratic, minimizes it over the ball, estimates the candidate, and applies
/// the acceptance test. Every oracle call, including rejected stopping-rule
/// rounds, lands in `w_cum`. A candidate that coincides with the center is
/// treated as unsuccessful without being estimated.
pub fn run(
    problem: &Problem,
    config: &TrustRegionConfig,
    schedule: &SamplingSchedule,
    variant: Variant,
    nbar: usize,
    seed: u64,
) -> Result<RunTrace> {
    config.validate()?;
    variant.check_schedule(schedule)?;
    if variant != Variant::Trodf && nbar < 2 {
        return Err(Error::InsufficientSamples { need: 2, got: nbar });
    }
    // Cap the calls any single adaptive estimate may burn, so a run cannot
    // overshoot its budget by more than one iteration's evaluations.
    let mut schedule = *schedule;
    if schedule.regime != Regime::Fixed {
        schedule.call_cap = Some(match schedule.call_cap {
            Some(cap) => cap.min(config.w_max),
            None => config.w_max,
        });
    }

    let d = problem.d;
    let oracle = |theta: &[f64], x: &[f64]| (problem.oracle)(theta, x);
    let true_f = |theta: &[f64]| problem.true_objective_at(theta).unwrap_or(f64::NAN);

    let mut theta = problem.theta0.clone();
    let mut delta = config.delta0;
    let mut w: u64 = 0;
    let mut records: Vec<IterationRecord> = Vec::new();
    let mut true_f_cache = true_f(&theta);
    let mut terminal = TerminalReason::Iterations;

    let mut k = 0;
    while k < config.k_max {
        if w >= config.w_max {
            terminal = TerminalReason::Budget;
            break;
        }
        let lambda = if schedule.regime == Regime::Fixed {
            0.0
        } else {
            lambda_gamma(&schedule, k, problem.q)?.0
        };

        let design = design_points(&theta, delta);
        let mut n_per_point = vec![0usize; 2 * d + 2];
        let mut pooled = vec![f64::NAN; 2 * d + 2];
        let mut values = Vec::with_capacity(2 * d + 1);
        let mut iter_calls: u64 = 0;
        let mut exhausted = false;

        for (i, point) in design.points.iter().enumerate() {
            let key = StreamKey::with(seed, k as u64, i as u64, 0);
            let pe = estimate_point(point, k, delta, &schedule, nbar, problem, &oracle, key)?;
            iter_calls += pe.calls;
            if let Some(est) = &pe.est {
                n_per_point[i] = est.n;
                pooled[i] = est.pooled_variance;
                values.push(est.mean);
            }
            if pe.exhausted {
                exhausted = true;
                break;
            }
        }

        if exhausted {
            w += iter_calls;
            records.push(IterationRecord {
                k,
                theta: theta.clone(),
                delta,
                rho: None,
                accepted: false,
                n_per_point,
                pooled_var_per_point: pooled,
                lambda,
                w_cum: w,
                f_tilde_incumbent: values.first().copied().unwrap_or(f64::NAN),
                true_f_incumbent: true_f_cache,
            });
            terminal = TerminalReason::Budget;
            return Ok(RunTrace {
                records,
                seed,
                variant: variant.tag(nbar),
                terminal,
            });
        }

        let model = fit_dq_model(&values, &theta, delta)?;
        let grad_norm = model.gradient_norm();
        let candidate = solve_subproblem(&model);

        let (rho, accepted, delta_next, f_tilde_incumbent) = if candidate == theta {
            // Zero step: nothing to estimate, the iteration fails.
            (None, false, config.gamma_down * delta, values[0])
        } else {
            let key = StreamKey::with(seed, k as u64, (2 * d + 1) as u64, 0);
            let pe = estimate_point(&candidate, k, delta, &schedule, nbar, problem, &oracle, key)?;
            iter_calls += pe.calls;
            if pe.exhausted {
                if let Some(est) = &pe.est {
                    n_per_point[2 * d + 1] = est.n;
                    pooled[2 * d + 1] = est.pooled_variance;
                }
                w += iter_calls;
                records.push(IterationRecord {
                    k,
                    theta: theta.clone(),
                    delta,
                    rho: None,
                    accepted: false,
                    n_per_point,
                    pooled_var_per_point: pooled,
                    lambda,
                    w_cum: w,
                    f_tilde_incumbent: values[0],
                    true_f_incumbent: true_f_cache,
                });
                return Ok(RunTrace {
                    records,
                    seed,
                    variant: variant.tag(nbar),
                    terminal: TerminalReason::Budget,
                });
            }
            let cand_est = pe.est.expect("non-exhausted estimate present");
            n_per_point[2 * d + 1] = cand_est.n;
            pooled[2 * d + 1] = cand_est.pooled_variance;
            let rho = acceptance_ratio(
                values[0],
                cand_est.mean,
                model.eval(&theta),
                model.eval(&candidate),
            );
            let (delta_next, accepted) = update_radius(delta, rho, grad_norm, config);
            let f_inc = if accepted { cand_est.mean } else { values[0] };
            (rho, accepted, delta_next, f_inc)
        };

        if accepted {
            theta = candidate;
            true_f_cache = true_f(&theta);
        }
        w += iter_calls;
        records.push(IterationRecord {
            k,
            theta: theta.clone(),
            delta,
            rho,
            accepted,
            n_per_point,
            pooled_var_per_point: pooled,
            lambda,
            w_cum: w,
            f_tilde_incumbent,
            true_f_incumbent: true_f_cache,
        });
        delta = delta_next;
        k += 1;

        if let (Some(tol), Some(grad)) = (config.grad_tol, problem.true_gradient.as_ref()) {
            let g = grad(&theta);
            if g.iter().map(|x| x * x).sum::<f64>().sqrt() <= tol {
                terminal = TerminalReason::Stationarity;
                break;
            }
        }
    }
    if terminal != TerminalReason::Stationarity {
        terminal = if w >= config.w_max {
            TerminalReason::Budget
        } else {
            TerminalReason::Iterations
        };
    }
    Ok(RunTrace {
        records,
        seed,
        variant: variant.tag(nbar),
        terminal,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{by_name, make_ex1, Problem};
    use crate::sampling::InverseMap;
    use std::sync::atomic::{AtomicU64, Ordering};
    use std::sync::Arc;

    #[test]
    fn acceptance_ratio_examples() {
        let r = acceptance_ratio(1.0, 0.5, 1.0, 0.4).unwrap();
        assert!((r - 0.5 / 0.6).abs() < 1e-12);
        assert_eq!(acceptance_ratio(3.0, 3.0, 1.0, 0.5), Some(0.0));
        assert_eq!(acceptance_ratio(1.0, 0.9, 1.0, 1.0 - 1e-15), None);
    }

    #[test]
    fn update_radius_examples() {
        let config = TrustRegionConfig {
            eta: 0.1,
            eta_tilde: 10.0,
            gamma_up: 2.0,
            gamma_down: 0.5,
            delta_max: 10.0,
            ..TrustRegionConfig::default()
        };
        assert_eq!(update_radius(0.1, Some(0.9), 1.0, &config), (0.2, true));
        assert_eq!(update_radius(0.1, Some(0.05), 1.0, &config), (0.05, false));
        // Gradient-size condition fails: 5 > 10 * 0.01.
        assert_eq!(update_radius(5.0, Some(0.9), 0.01, &config), (2.5, false));
        assert_eq!(update_radius(0.1, None, 1.0, &config), (0.05, false));
        // Expansion clips at delta_max.
        assert_eq!(update_radius(8.0, Some(0.9), 100.0, &config), (10.0, true));
    }

    fn deterministic_quadratic() -> Problem {
        Problem {
            name: "det".into(),
            d: 2,
            q: 1,
            oracle: Arc::new(|theta: &[f64], _x: &[f64]| theta.iter().map(|t| t * t).sum::<f64>()),
            map: InverseMap::uniform(1),
            theta0: vec![3.0, -1.0],
            true_objective: Some(Arc::new(|theta: &[f64]| {
                theta.iter().map(|t| t * t).sum::<f64>()
            })),
            true_gradient: Some(Arc::new(|theta: &[f64]| {
                theta.iter().map(|t| 2.0 * t).collect()
            })),
            f_star: Some(0.0),
        }
    }

    fn strat_schedule() -> SamplingSchedule {
        SamplingSchedule::new(Regime::StratBounded)
    }

    #[test]
    fn deterministic_problem_descends_monotonically() {
        let problem = deterministic_quadratic();
        let mut schedule = strat_schedule();
        schedule.sigma2_min = 1e-12;
        let config = TrustRegionConfig {
            w_max: 20_000,
            ..TrustRegionConfig::default()
        };
        let trace = run(&problem, &config, &schedule, Variant::Sastrodf, 2, 0).unwrap();
        let mut last_f = (problem.true_objective.as_ref().unwrap())(&problem.theta0);
        for rec in &trace.records {
            assert!(rec.delta <= config.delta_max);
            if rec.accepted {
                assert!(rec.true_f_incumbent <= last_f + 1e-12);
                last_f = rec.true_f_incumbent;
            } else {
                assert_eq!(rec.true_f_incumbent, last_f);
            }
        }
        let final_f = trace.records.last().unwrap().true_f_incumbent;
        assert!(final_f < 1e-3, "final objective {final_f}");
    }

    #[test]
    fn incumbent_moves_only_on_accepted_iterations() {
        let problem = make_ex1();
        let schedule = strat_schedule();
        let config = TrustRegionConfig {
            w_max: 30_000,
            ..TrustRegionConfig::default()
        };
        let trace = run(&problem, &config, &schedule, Variant::Sastrodf, 2, 3).unwrap();
        let mut incumbent = problem.theta0.clone();
        for rec in &trace.records {
            if rec.accepted {
                incumbent = rec.theta.clone();
            } else {
                assert_eq!(rec.theta, incumbent, "incumbent drifted at k={}", rec.k);
            }
        }
    }

    #[test]
    fn budget_accounting_matches_counting_oracle() {
        let counter = Arc::new(AtomicU64::new(0));
        let inner = make_ex1();
        let c = Arc::clone(&counter);
        let orig = Arc::clone(&inner.oracle);
        let problem = Problem {
            oracle: Arc::new(move |t: &[f64], x: &[f64]| {
                c.fetch_add(1, Ordering::Relaxed);
                orig(t, x)
            }),
            ..inner
        };
        let config = TrustRegionConfig {
            w_max: 25_000,
            ..TrustRegionConfig::default()
        };
        let trace = run(
            &problem,
            &config,
            &strat_schedule(),
            Variant::Sastrodf,
            2,
            1,
        )
        .unwrap();
        let w_final = trace.records.last().unwrap().w_cum;
        assert_eq!(w_final, counter.load(Ordering::Relaxed));
        let mut prev = 0;
        for rec in &trace.records {
            assert!(rec.w_cum > prev, "w_cum must strictly increase");
            prev = rec.w_cum;
        }
    }

    #[test]
    fn sample_sizes_respect_floor_and_ladder() {
        use crate::sampling::AdmissibleSizes;
        let problem = make_ex1();
        let config = TrustRegionConfig {
            w_max: 30_000,
            ..TrustRegionConfig::default()
        };
        let trace = run(
            &problem,
            &config,
            &strat_schedule(),
            Variant::Sastrodf,
            2,
            5,
        )
        .unwrap();
        let ladder = AdmissibleSizes::new(2, 1);
        for rec in &trace.records {
            for &n in &rec.n_per_point {
                if n > 0 {
                    assert!(n as f64 >= rec.lambda, "n={n} below lambda={}", rec.lambda);
                    assert!(ladder.contains(n));
                }
            }
        }
    }

    #[test]
    fn trodf_runs_are_bit_reproducible() {
        let problem = by_name("ex1").unwrap();
        let mut schedule = SamplingSchedule::new(Regime::Fixed);
        schedule.fixed_n = 50;
        let config = TrustRegionConfig {
            w_max: 10_000,
            ..TrustRegionConfig::default()
        };
        let a = run(&problem, &config, &schedule, Variant::Trodf, 2, 9).unwrap();
        let b = run(&problem, &config, &schedule, Variant::Trodf, 2, 9).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.theta, rb.theta);
            assert_eq!(ra.w_cum, rb.w_cum);
            assert_eq!(
                ra.f_tilde_incumbent.to_bits(),
                rb.f_tilde_incumbent.to_bits()
            );
        }
    }

    #[test]
    fn ex1_closes_most_of_the_gap_within_budget() {
        let problem = make_ex1();
        let config = TrustRegionConfig {
            w_max: 100_000,
            ..TrustRegionConfig::default()
        };
        let trace = run(
            &problem,
            &config,
            &strat_schedule(),
            Variant::Sastrodf,
            2,
            0,
        )
        .unwrap();
        let f0 = (problem.true_objective.as_ref().unwrap())(&problem.theta0);
        let final_f = trace.records.last().unwrap().true_f_incumbent;
        assert!(
            final_f < 0.05 * f0,
            "gap {final_f} not below 5% of f(theta0) = {f0}"
        );
    }

    #[test]
    fn convergence_trend_on_toys() {
        // Median true gradient norm at exhaustion drops below 10% of its
        // value at the start, across seeds.
        for problem in [
            by_name("ex1").unwrap(),
            by_name("ex2").unwrap(),
            by_name("ex3").unwrap(),
        ] {
            let grad = problem.true_gradient.as_ref().unwrap();
            let g0: f64 = grad(&problem.theta0)
                .iter()
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt();
            let mut finals: Vec<f64> = (0..20)
                .map(|seed| {
                    let config = TrustRegionConfig {
                        w_max: 50_000,
                        ..TrustRegionConfig::default()
                    };
                    let trace = run(
                        &problem,
                        &config,
                        &strat_schedule(),
                        Variant::Sastrodf,
                        2,
                        seed,
                    )
                    .unwrap();
                    let theta = trace.final_theta().unwrap();
                    grad(theta).iter().map(|g| g * g).sum::<f64>().sqrt()
                })
                .collect();
            finals.sort_by(f64::total_cmp);
            let median = 0.5 * (finals[9] + finals[10]);
            assert!(
                median < 0.1 * g0,
                "{}: median final gradient {median} vs initial {g0}",
                problem.name
            );
        }
    }

    #[test]
    fn variant_schedule_mismatch_is_rejected() {
        let problem = make_ex1();
        let config = TrustRegionConfig::default();
        assert!(run(
            &problem,
            &config,
            &SamplingSchedule::new(Regime::NsChebyshev),
            Variant::Sastrodf,
            2,
            0
        )
        .is_err());
        assert!(run(
            &problem,
            &config,
            &SamplingSchedule::new(Regime::Fixed),
            Variant::AstrodfC,
            2,
            0
        )
        .is_err());
    }

    #[test]
    fn stationarity_stop_fires_when_enabled() {
        let problem = deterministic_quadratic();
        let mut schedule = strat_schedule();
        schedule.sigma2_min = 1e-12;
        let config = TrustRegionConfig {
            grad_tol: Some(0.5),
            w_max: 1_000_000,
            ..TrustRegionConfig::default()
        };
        let trace = run(&problem, &config, &schedule, Variant::Sastrodf, 2, 0).unwrap();
        assert_eq!(trace.terminal, TerminalReason::Stationarity);
    }
}
