//! Experiment engine: macro-replications over problems and solver variants,
//! budget-indexed convergence summaries with an 80% band, solvability
//! profiles, and the CSV/config file formats behind the CLI.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::{Regime, SamplingSchedule};
use crate::optimizer::{run, RunTrace, TrustRegionConfig, Variant};
use crate::problems::by_name;

/// Harness-level variant name, carrying the per-stratum size for the
/// stratified solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VariantSpec {
    pub variant: Variant,
    pub regime: Regime,
    pub nbar: usize,
}

/// Resolve a variant name: `SASTRODF-<n>`, `ASTRODF-C`, `ASTRODF-B`, `TRODF`.
pub fn parse_variant(name: &str, default_nbar: usize) -> Result<VariantSpec> {
    if let Some(suffix) = name.strip_prefix("SASTRODF-") {
        let nbar: usize = suffix.parse().map_err(|_| Error::UnknownName {
            kind: "variant",
            name: name.into(),
        })?;
        if nbar < 2 {
            return Err(Error::InvalidInput(format!(
                "per-stratum size must be at least 2, got {nbar}"
            )));
        }
        return Ok(VariantSpec {
            variant: Variant::Sastrodf,
            regime: Regime::StratBounded,
            nbar,
        });
    }
    match name {
        "SASTRODF" => Ok(VariantSpec {
            variant: Variant::Sastrodf,
            regime: Regime::StratBounded,
            nbar: default_nbar,
        }),
        "ASTRODF-C" => Ok(VariantSpec {
            variant: Variant::AstrodfC,
            regime: Regime::NsChebyshev,
            nbar: default_nbar,
        }),
        "ASTRODF-B" => Ok(VariantSpec {
            variant: Variant::AstrodfB,
            regime: Regime::NsBernstein,
            nbar: default_nbar,
        }),
        "TRODF" => Ok(VariantSpec {
            variant: Variant::Trodf,
            regime: Regime::Fixed,
            nbar: default_nbar,
        }),
        other => Err(Error::UnknownName {
            kind: "variant",
            name: other.into(),
        }),
    }
}

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub problems: Vec<String>,
    pub variants: Vec<String>,
    pub reps: usize,
    pub w_max: u64,
    pub seed: u64,
    /// Budget checkpoints for curve interpolation; strictly increasing.
    pub budget_grid: Vec<u64>,
    pub gap_fraction: f64,
    pub out_dir: PathBuf,
    /// Rule constants shared by all adaptive variants.
    pub delta: f64,
    pub varrho: f64,
    pub kappa_as: f64,
    pub sigma2_min: f64,
    /// Default per-stratum size for variants that do not pin one.
    pub nbar: usize,
    /// Sample size of the fixed-size baseline.
    pub fixed_n: usize,
    pub trust_region: TrustRegionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let w_max = 200_000;
        ExperimentConfig {
            problems: vec![],
            variants: vec![],
            reps: 20,
            w_max,
            seed: 0,
            budget_grid: default_budget_grid(w_max),
            gap_fraction: 0.1,
            out_dir: PathBuf::from("results"),
            delta: 0.2,
            varrho: 0.1,
            kappa_as: 1.0,
            sigma2_min: 1e-6,
            nbar: 2,
            fixed_n: 100,
            trust_region: TrustRegionConfig {
                w_max,
                ..TrustRegionConfig::default()
            },
        }
    }
}

/// 50 geometrically spaced checkpoints from 100 (or lower for tiny budgets)
/// up to exactly `w_max`.
pub fn default_budget_grid(w_max: u64) -> Vec<u64> {
    let lo = 100.min(w_max.max(1)) as f64;
    let hi = w_max.max(1) as f64;
    let mut grid: Vec<u64> = (0..50)
        .map(|i| (lo * (hi / lo).powf(i as f64 / 49.0)).round() as u64)
        .collect();
    grid.push(w_max);
    grid.sort_unstable();
    grid.dedup();
    grid
}

impl ExperimentConfig {
    pub fn schedule_for(&self, spec: &VariantSpec) -> SamplingSchedule {
        let mut s = SamplingSchedule::new(spec.regime);
        s.delta = self.delta;
        s.varrho = self.varrho;
        s.kappa_as = self.kappa_as;
        s.sigma2_min = self.sigma2_min;
        s.fixed_n = self.fixed_n;
        s
    }

    fn validate(&self) -> Result<()> {
        if self.reps == 0 {
            return Err(Error::InvalidInput("reps must be at least 1".into()));
        }
        if self.w_max == 0 {
            return Err(Error::InvalidInput("wmax must be positive".into()));
        }
        if !self.budget_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidInput(
                "budget_grid must be strictly increasing".into(),
            ));
        }
        Ok(())
    }
}

/// Parse the flat `key = value` experiment file. Unknown keys are rejected.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut grid_explicit = false;
    let mut wmax_seen = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: line_no,
            message: format!("expected key = value, found {line:?}"),
        })?;
        let key = key.trim();
        let value = value.trim();
        let bad = |message: String| Error::Parse {
            line: line_no,
            message,
        };
        let parse_f64 = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| bad(format!("expected a number for {key}, found {v:?}")))
        };
        let parse_u64 = |v: &str| {
            v.parse::<u64>()
                .map_err(|_| bad(format!("expected an integer for {key}, found {v:?}")))
        };
        match key {
            "problems" => {
                cfg.problems = value.split(',').map(|s| s.trim().to_string()).collect();
            }
            "variants" => {
                cfg.variants = value.split(',').map(|s| s.trim().to_string()).collect();
            }
            "reps" => cfg.reps = parse_u64(value)? as usize,
            "wmax" => {
                cfg.w_max = parse_u64(value)?;
                cfg.trust_region.w_max = cfg.w_max;
                wmax_seen = true;
            }
            "seed" => cfg.seed = parse_u64(value)?,
            "budget_grid" => {
                cfg.budget_grid = value
                    .split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<u64>()
                            .map_err(|_| bad(format!("bad budget grid entry {s:?}")))
                    })
                    .collect::<Result<Vec<u64>>>()?;
                grid_explicit = true;
            }
            "gap_fraction" => cfg.gap_fraction = parse_f64(value)?,
            "out_dir" => cfg.out_dir = PathBuf::from(value),
            "delta" => cfg.delta = parse_f64(value)?,
            "varrho" => cfg.varrho = parse_f64(value)?,
            "kappa_as" => cfg.kappa_as = parse_f64(value)?,
            "sigma2_min" => cfg.sigma2_min = parse_f64(value)?,
            "nbar" => cfg.nbar = parse_u64(value)? as usize,
            "fixed_n" => cfg.fixed_n = parse_u64(value)? as usize,
            "delta0" => cfg.trust_region.delta0 = parse_f64(value)?,
            "delta_max" => cfg.trust_region.delta_max = parse_f64(value)?,
            "eta" => cfg.trust_region.eta = parse_f64(value)?,
            "eta_tilde" => cfg.trust_region.eta_tilde = parse_f64(value)?,
            "gamma_up" => cfg.trust_region.gamma_up = parse_f64(value)?,
            "gamma_down" => cfg.trust_region.gamma_down = parse_f64(value)?,
            "k_max" => cfg.trust_region.k_max = parse_u64(value)? as usize,
            other => {
                return Err(bad(format!("unknown key {other:?}")));
            }
        }
    }
    if !grid_explicit && wmax_seen {
        cfg.budget_grid = default_budget_grid(cfg.w_max);
    }
    Ok(cfg)
}

/// Mean and 10th/90th percentile of the interpolated objective at one budget
/// checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub problem: String,
    pub variant: String,
    pub budget: u64,
    pub mean_f: f64,
    pub p10_f: f64,
    pub p90_f: f64,
}

/// Per-(problem, variant) budget curves.
#[derive(Debug, Clone, Default)]
pub struct CurveSummary {
    pub rows: Vec<SummaryRow>,
}

/// One finished run plus everything the profiles need.
#[derive(Debug, Clone)]
pub struct TraceData {
    pub problem: String,
    pub variant: String,
    pub rep: usize,
    /// `(w_cum, true objective at the incumbent)` per iteration.
    pub points: Vec<(u64, f64)>,
    /// High-precision objective at the initial guess.
    pub f_theta0: f64,
    pub f_star: Option<f64>,
}

/// Linear-interpolation percentile of a sorted slice.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < n {
        sorted[i] * (1.0 - frac) + sorted[i + 1] * frac
    } else {
        sorted[n - 1]
    }
}

/// Value of a trace at budget `g`: the objective of the last iteration with
/// `w_cum <= g`, or the starting objective before any iteration completes.
pub fn interpolate_at(points: &[(u64, f64)], f_theta0: f64, g: u64) -> f64 {
    let mut value = f_theta0;
    for &(w, f) in points {
        if w <= g {
            value = f;
        } else {
            break;
        }
    }
    value
}

fn format_field(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Trace CSV: `rep,k,w_cum,delta,rho,accepted,f_tilde,f_true,theta_1..theta_d`.
pub fn trace_csv(trace: &RunTrace, rep: usize, d: usize) -> String {
    let mut out = String::new();
    out.push_str("rep,k,w_cum,delta,rho,accepted,f_tilde,f_true");
    for j in 1..=d {
        let _ = write!(out, ",theta_{j}");
    }
    out.push('\n');
    for rec in &trace.records {
        let rho = rec.rho.map_or(String::new(), |r| format!("{r}"));
        let _ = write!(
            out,
            "{rep},{},{},{},{rho},{},{},{}",
            rec.k,
            rec.w_cum,
            rec.delta,
            u8::from(rec.accepted),
            format_field(rec.f_tilde_incumbent),
            format_field(rec.true_f_incumbent),
        );
        for t in &rec.theta {
            let _ = write!(out, ",{t}");
        }
        out.push('\n');
    }
    out
}

fn trace_file_name(problem: &str, variant: &str, rep: usize) -> String {
    format!("trace_{problem}_{variant}_rep{rep}.csv")
}

/// Execute the full grid of runs, write one trace CSV per run plus a summary
/// CSV, and return the summary with the traces.
///
/// Replications run in parallel on independent seeded streams; results are
/// keyed by replication index before any aggregation, so output is identical
/// to a sequential sweep.
pub fn run_experiment(config: &ExperimentConfig) -> Result<(CurveSummary, Vec<TraceData>)> {
    config.validate()?;
    std::fs::create_dir_all(&config.out_dir)?;
    let mut summary = CurveSummary::default();
    let mut all_traces: Vec<TraceData> = Vec::new();

    for problem_name in &config.problems {
        let problem = Arc::new(by_name(problem_name)?);
        let f_theta0 = problem.true_objective_at(&problem.theta0).ok_or_else(|| {
            Error::InvalidInput(format!(
                "problem {problem_name} exposes no true objective for curve interpolation"
            ))
        })?;
        for variant_name in &config.variants {
            let spec = parse_variant(variant_name, config.nbar)?;
            let schedule = config.schedule_for(&spec);
            let tr = config.trust_region.clone();
            let runs: Vec<Result<RunTrace>> = (0..config.reps)
                .into_par_iter()
                .map(|rep| {
                    run(
                        &problem,
                        &tr,
                        &schedule,
                        spec.variant,
                        spec.nbar,
                        config.seed + rep as u64,
                    )
                })
                .collect();

            let mut interpolated: Vec<Vec<f64>> = Vec::with_capacity(config.reps);
            for (rep, result) in runs.into_iter().enumerate() {
                let trace = result?;
                let csv = trace_csv(&trace, rep, problem.d);
                let path = config
                    .out_dir
                    .join(trace_file_name(problem_name, variant_name, rep));
                std::fs::write(path, csv)?;
                let points: Vec<(u64, f64)> = trace
                    .records
                    .iter()
                    .map(|r| (r.w_cum, r.true_f_incumbent))
                    .collect();
                interpolated.push(
                    config
                        .budget_grid
                        .iter()
                        .map(|&g| interpolate_at(&points, f_theta0, g))
                        .collect(),
                );
                all_traces.push(TraceData {
                    problem: problem_name.clone(),
                    variant: variant_name.clone(),
                    rep,
                    points,
                    f_theta0,
                    f_star: problem.f_star,
                });
            }

            for (gi, &g) in config.budget_grid.iter().enumerate() {
                let mut vals: Vec<f64> = interpolated.iter().map(|row| row[gi]).collect();
                vals.sort_by(f64::total_cmp);
                let mean = vals.iter().sum::<f64>() / vals.len() as f64;
                summary.rows.push(SummaryRow {
                    problem: problem_name.clone(),
                    variant: variant_name.clone(),
                    budget: g,
                    mean_f: mean,
                    p10_f: percentile(&vals, 0.10),
                    p90_f: percentile(&vals, 0.90),
                });
            }
        }
    }

    let mut csv = String::from("problem,variant,budget,mean_f,p10_f,p90_f\n");
    for row in &summary.rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            row.problem, row.variant, row.budget, row.mean_f, row.p10_f, row.p90_f
        );
    }
    std::fs::write(config.out_dir.join("summary.csv"), csv)?;
    Ok((summary, all_traces))
}

/// One point of a solvability curve.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileRow {
    pub variant: String,
    pub budget_fraction: f64,
    pub fraction_solved: f64,
}

/// Earliest budget at which a trace closes the gap to within
/// `gap_fraction` of the initial gap; `None` when it never does.
pub fn budget_to_threshold(trace: &TraceData, gap_fraction: f64) -> Option<u64> {
    let f_star = trace.f_star?;
    let threshold = f_star + gap_fraction * (trace.f_theta0 - f_star);
    trace
        .points
        .iter()
        .find(|&&(_, f)| f <= threshold)
        .map(|&(w, _)| w)
}

/// Fraction of (problem, replication) pairs solved per variant as a function
/// of the fraction of `w_max` spent, on a 101-point fraction grid. Traces
/// without a known optimum are skipped with a warning.
pub fn solvability_profile(traces: &[TraceData], gap_fraction: f64, w_max: u64) -> Vec<ProfileRow> {
    let mut per_variant: BTreeMap<&str, Vec<Option<u64>>> = BTreeMap::new();
    let mut warned: Vec<&str> = Vec::new();
    for t in traces {
        if t.f_star.is_none() {
            if !warned.contains(&t.problem.as_str()) {
                warned.push(&t.problem);
                eprintln!(
                    "warning: problem {} has no known optimum; excluded from the profile",
                    t.problem
                );
            }
            continue;
        }
        per_variant
            .entry(t.variant.as_str())
            .or_default()
            .push(budget_to_threshold(t, gap_fraction));
    }
    let mut rows = Vec::new();
    for (variant, hits) in per_variant {
        let total = hits.len() as f64;
        for i in 0..=100u32 {
            let b = i as f64 / 100.0;
            let cutoff = (b * w_max as f64).floor() as u64;
            let solved = hits
                .iter()
                .filter(|h| h.is_some_and(|w| w <= cutoff))
                .count() as f64;
            rows.push(ProfileRow {
                variant: variant.to_string(),
                budget_fraction: b,
                fraction_solved: solved / total,
            });
        }
    }
    rows
}

/// Serialize profile rows: `variant,budget_fraction,fraction_solved`.
pub fn profile_csv(rows: &[ProfileRow]) -> String {
    let mut out = String::from("variant,budget_fraction,fraction_solved\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{}",
            r.variant, r.budget_fraction, r.fraction_solved
        );
    }
    out
}

/// Load every `trace_*.csv` under `dir`, reconstructing problem and variant
/// from the file names.
pub fn read_traces(dir: &Path) -> Result<Vec<TraceData>> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("trace_") && n.ends_with(".csv"))
        })
        .collect();
    entries.sort();
    let mut traces = Vec::new();
    for path in entries {
        let name = path.file_stem().unwrap().to_str().unwrap();
        let body = name.strip_prefix("trace_").unwrap();
        let (head, rep_part) = body.rsplit_once("_rep").ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("trace file name {name:?} lacks a _rep suffix"),
        })?;
        let rep: usize = rep_part.parse().map_err(|_| Error::Parse {
            line: 0,
            message: format!("bad replication index in {name:?}"),
        })?;
        let (problem_name, variant) = head.split_once('_').ok_or_else(|| Error::Parse {
            line: 0,
            message: format!("trace file name {name:?} lacks a problem_variant pair"),
        })?;
        let problem = by_name(problem_name)?;
        let f_theta0 = problem
            .true_objective_at(&problem.theta0)
            .unwrap_or(f64::NAN);
        let text = std::fs::read_to_string(&path)?;
        let mut points = Vec::new();
        for (idx, line) in text.lines().enumerate().skip(1) {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() < 8 {
                return Err(Error::Parse {
                    line: idx + 1,
                    message: format!("trace row has {} fields, need at least 8", fields.len()),
                });
            }
            let w: u64 = fields[2].parse().map_err(|_| Error::Parse {
                line: idx + 1,
                message: format!("bad w_cum {:?}", fields[2]),
            })?;
            let f: f64 = if fields[7].is_empty() {
                f64::NAN
            } else {
                fields[7].parse().map_err(|_| Error::Parse {
                    line: idx + 1,
                    message: format!("bad f_true {:?}", fields[7]),
                })?
            };
            points.push((w, f));
        }
        traces.push(TraceData {
            problem: problem_name.to_string(),
            variant: variant.to_string(),
            rep,
            points,
            f_theta0,
            f_star: problem.f_star,
        });
    }
    Ok(traces)
}
