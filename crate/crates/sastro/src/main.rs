//! Command-line front end: single runs, multi-replication experiments, and
//! solvability profiles over stored traces.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sastro::harness::{
    self, parse_config, parse_variant, profile_csv, read_traces, run_experiment,
    solvability_profile, ExperimentConfig,
};
use sastro::optimizer::{run, TrustRegionConfig};
use sastro::problems;

#[derive(Parser)]
#[command(
    name = "sastro",
    about = "Stratified adaptive-sampling trust-region optimizer"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimization and write its trace CSV.
    Run(RunArgs),
    /// Run a full experiment described by a key=value config file.
    Experiment {
        /// Path to the config file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Build solvability profiles from a directory of trace CSVs.
    Profile {
        /// Directory containing trace_*.csv files.
        #[arg(long)]
        traces: PathBuf,
        /// Optimality-gap fraction counting as solved.
        #[arg(long, default_value_t = 0.1)]
        gap: f64,
        /// Total budget the traces were run with; defaults to the largest
        /// budget observed in the traces.
        #[arg(long)]
        wmax: Option<u64>,
        /// Output CSV path (defaults to profile.csv inside the trace dir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Problem name: ex1, ex2, ex3, portfolio, portfolio2.
    #[arg(long)]
    problem: String,
    /// Variant: SASTRODF-<nbar>, ASTRODF-C, ASTRODF-B, TRODF.
    #[arg(long)]
    variant: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200_000)]
    wmax: u64,
    /// Per-stratum sample size (also the ladder step of the adaptive rule).
    #[arg(long, default_value_t = 2)]
    nbar: usize,
    /// Exponent slack of the deflation schedule.
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// Gamma slack of the sub-exponential/sub-Gaussian schedules.
    #[arg(long, default_value_t = 0.1)]
    varrho: f64,
    /// Threshold scale of the adaptive rule.
    #[arg(long, default_value_t = 1.0)]
    kappa: f64,
    /// Variance floor inside the rule.
    #[arg(long, default_value_t = 1e-6)]
    sigma2_min: f64,
    /// Sample size of the fixed-size baseline.
    #[arg(long, default_value_t = 100)]
    fixed_n: usize,
    /// Initial trust-region radius.
    #[arg(long, default_value_t = 1.0)]
    delta0: f64,
    /// Iteration cap.
    #[arg(long, default_value_t = 2000)]
    kmax: usize,
    /// Output directory for the trace CSV.
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

fn run_single(args: &RunArgs) -> sastro::Result<()> {
    let problem = problems::by_name(&args.problem)?;
    let spec = parse_variant(&args.variant, args.nbar)?;
    let cfg = ExperimentConfig {
        delta: args.delta,
        varrho: args.varrho,
        kappa_as: args.kappa,
        sigma2_min: args.sigma2_min,
        fixed_n: args.fixed_n,
        ..ExperimentConfig::default()
    };
    let schedule = cfg.schedule_for(&spec);
    let tr = TrustRegionConfig {
        delta0: args.delta0,
        k_max: args.kmax,
        w_max: args.wmax,
        ..TrustRegionConfig::default()
    };
    let trace = run(&problem, &tr, &schedule, spec.variant, spec.nbar, args.seed)?;
    std::fs::create_dir_all(&args.out)?;
    let path = args
        .out
        .join(format!("trace_{}_{}_rep0.csv", args.problem, args.variant));
    std::fs::write(&path, harness::trace_csv(&trace, 0, problem.d))?;
    let last = trace.records.last();
    println!(
        "{} on {}: {} iterations, w = {}, terminal = {:?}",
        trace.variant,
        args.problem,
        trace.records.len(),
        last.map_or(0, |r| r.w_cum),
        trace.terminal,
    );
    if let Some(rec) = last {
        let theta: Vec<String> = rec.theta.iter().map(|t| format!("{t:.6}")).collect();
        println!(
            "final theta = [{}], f_tilde = {:.6}, f_true = {:.6}",
            theta.join(", "),
            rec.f_tilde_incumbent,
            rec.true_f_incumbent,
        );
    }
    println!("trace written to {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run_single(args),
        Command::Experiment { config } => (|| {
            let text = std::fs::read_to_string(config)?;
            let cfg = parse_config(&text)?;
            let (summary, _) = run_experiment(&cfg)?;
            println!(
                "wrote {} summary rows and {} trace files to {}",
                summary.rows.len(),
                cfg.problems.len() * cfg.variants.len() * cfg.reps,
                cfg.out_dir.display()
            );
            Ok(())
        })(),
        Command::Profile {
            traces,
            gap,
            wmax,
            out,
        } => (|| {
            let data = read_traces(traces)?;
            if data.is_empty() {
                return Err(sastro::Error::InvalidInput(format!(
                    "no trace_*.csv files under {}",
                    traces.display()
                )));
            }
            let w_max = wmax.unwrap_or_else(|| {
                data.iter()
                    .flat_map(|t| t.points.iter().map(|p| p.0))
                    .max()
                    .unwrap_or(1)
            });
            let rows = solvability_profile(&data, *gap, w_max);
            let csv = profile_csv(&rows);
            let path = out.clone().unwrap_or_else(|| traces.join("profile.csv"));
            std::fs::write(&path, csv)?;
            println!(
                "profile over {} traces written to {}",
                data.len(),
                path.display()
            );
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
