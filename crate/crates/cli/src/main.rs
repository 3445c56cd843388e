use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use hsim::config::ExperimentConfig;
use hsim::engine::run_schedule;
use hsim::estimators::EstimatorId;
use hsim::model::Family;
use hsim::oracle::{self, ExactMoments, RootProblem, TwoSampleEstimator};
use hsim::regime::{supports, RegimeKind};
use hsim::report::write_outputs;
use hsim::{Error, Result};

/// Simulate and check estimators of hidden population sizes.
#[derive(Parser)]
#[command(name = "hsim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a TOML file.
    Run {
        config: PathBuf,
        /// Worker threads (0 = all cores). Overrides the config.
        #[arg(long)]
        threads: Option<usize>,
        /// Output directory. Overrides the config.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Replications per cell. Overrides the config.
        #[arg(long)]
        replications: Option<u64>,
        /// Master seed. Overrides the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Run sequentially on the calling thread.
        #[arg(long)]
        sequential: bool,
    },
    /// List families, regimes and estimators.
    List {
        #[arg(value_enum, default_value_t = ListWhat::All)]
        what: ListWhat,
    },
    /// Exact small-instance results.
    Oracle {
        #[command(subcommand)]
        which: OracleCommand,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ListWhat {
    All,
    Families,
    Regimes,
    Estimators,
}

#[derive(Subcommand)]
enum OracleCommand {
    /// Moments of a serial-number estimator over all n-subsets of {1..N}.
    ExactTank { population: u64, sample: u64, estimator: String },
    /// Moments of lp, chapman or mbm-conditional over the overlap law.
    ExactTwoSample { population: u64, n1: u64, n2: u64, estimator: String },
    /// Moments of the cluster Horvitz-Thompson estimator.
    ExactHt {
        sample: u64,
        #[arg(required = true, num_args = 1..)]
        cluster_sizes: Vec<u64>,
    },
    /// Moments of the k-sample capture-recapture MLE.
    ExactCrck {
        population: u64,
        #[arg(required = true, num_args = 2..)]
        sizes: Vec<u64>,
    },
    /// Reference root of the capture-recapture MLE equation.
    RootDarroch {
        distinct: u64,
        #[arg(required = true, num_args = 2..)]
        sizes: Vec<u64>,
    },
    /// Reference root of the zero-truncated Poisson mean equation.
    RootZtp { mean: f64 },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Run { config, threads, output, replications, seed, sequential } => {
            run(config, threads, output, replications, seed, sequential)
        }
        Command::List { what } => {
            list(what);
            Ok(())
        }
        Command::Oracle { which } => run_oracle(which),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}

fn run(
    path: PathBuf,
    threads: Option<usize>,
    output: Option<PathBuf>,
    replications: Option<u64>,
    seed: Option<u64>,
    sequential: bool,
) -> Result<()> {
    let mut cfg = ExperimentConfig::from_path(&path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(r) = replications {
        if r < 2 {
            return Err(Error::Parameter("--replications must be >= 2".into()));
        }
        cfg.replications = r;
    }
    let schedule = cfg.schedule()?;
    let mut opts = cfg.run_options(threads);
    if sequential {
        opts = opts.sequential();
    }
    eprintln!(
        "running {}: {} cells x {} estimators, {} replications",
        cfg.id,
        schedule.cells.len(),
        cfg.estimators.len(),
        cfg.replications
    );
    let cells = run_schedule(&schedule, &cfg.estimators, &opts)?;
    let dir = output.or_else(|| cfg.output.clone()).unwrap_or_else(|| PathBuf::from("out").join(&cfg.id));
    let paths = write_outputs(&dir, &cfg, &schedule, &cells)?;
    for c in cells.iter().filter(|c| c.degenerate) {
        eprintln!("warning: cell t={} {} is degenerate (no defined estimates)", c.t, c.estimator);
    }
    println!("{}", paths.cells.display());
    println!("{}", paths.summary.display());
    Ok(())
}

fn list(what: ListWhat) {
    let all = matches!(what, ListWhat::All);
    if all || matches!(what, ListWhat::Families) {
        for f in Family::ALL {
            println!("family {f}");
        }
    }
    if all || matches!(what, ListWhat::Regimes) {
        for r in [RegimeKind::FinitePopulation, RegimeKind::Infill, RegimeKind::Outfill, RegimeKind::OutfillGrowingK] {
            let fams: Vec<&str> = Family::ALL.iter().filter(|&&f| supports(f, r)).map(|f| f.as_str()).collect();
            println!("regime {} ({})", r.as_str(), fams.join(", "));
        }
    }
    if all || matches!(what, ListWhat::Estimators) {
        for id in EstimatorId::ALL {
            println!("estimator {} ({})", id.as_str(), id.family());
        }
    }
}

fn print_moments(m: &ExactMoments, target: u64) {
    let bias = m.expectation.minus(target);
    println!(
        "E={} bias={} var={} support={} defined={}",
        m.expectation, bias, m.variance, m.support_size, m.defined_probability
    );
}

fn run_oracle(which: OracleCommand) -> Result<()> {
    match which {
        OracleCommand::ExactTank { population, sample, estimator } => {
            let m = oracle::exact_tank_moments(population, sample, &estimator)?;
            print_moments(&m, population);
        }
        OracleCommand::ExactTwoSample { population, n1, n2, estimator } => {
            let est = TwoSampleEstimator::parse(&estimator)
                .ok_or_else(|| Error::Parameter(format!("unknown two-sample estimator {estimator:?}")))?;
            let m = oracle::exact_two_sample_moments(population, n1, n2, est)?;
            print_moments(&m, population);
        }
        OracleCommand::ExactHt { sample, cluster_sizes } => {
            let m = oracle::exact_ht_moments(&cluster_sizes, sample)?;
            print_moments(&m, cluster_sizes.iter().sum());
        }
        OracleCommand::ExactCrck { population, sizes } => {
            let m = oracle::exact_crck_moments(population, &sizes)?;
            println!(
                "E={} bias={} var={} mse={} undefined={}",
                m.mean,
                m.mean - population as f64,
                m.variance,
                m.mse,
                m.undefined_probability
            );
        }
        OracleCommand::RootDarroch { distinct, sizes } => {
            let p = RootProblem::Darroch { distinct, sizes };
            let (lo, hi) = p.default_bracket()?;
            println!("{}", oracle::reference_root_solve(&p, lo, hi)?);
        }
        OracleCommand::RootZtp { mean } => {
            if mean.is_nan() || mean <= 1.0 || mean.is_infinite() {
                return Err(Error::Parameter(format!("mean {mean} must be finite and > 1")));
            }
            let p = RootProblem::ZtpMean { mean };
            let (lo, hi) = p.default_bracket()?;
            println!("{}", oracle::reference_root_solve(&p, lo, hi)?);
        }
    }
    Ok(())
}
