use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand as ClapSubcommand};
use riskbounds_cli::config::{load, Overrides, Subcommand};
use riskbounds_cli::output::write_artifacts;
use riskbounds_cli::run::run;

/// Exit status when a requested check failed.
const EXIT_CHECK_FAILED: u8 = 1;
/// Exit status for an invalid configuration.
const EXIT_CONFIG: u8 = 2;
/// Exit status when the run itself errored.
const EXIT_RUN: u8 = 3;

#[derive(Parser)]
#[command(
    name = "riskbounds",
    version,
    about = "Monte Carlo checks of excess-risk bounds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapSubcommand)]
enum Command {
    /// Local entropy profile and fixed points of a class
    Entropy(Common),
    /// Net ERM trials with the per-trial decomposition check
    NetErm(Common),
    /// Compression-scheme trials against a bound (default k/(n+1))
    Compress(Common),
    /// Hard-margin SVM scheme trials against a bound (default k/(n+1))
    Svm(Common),
    /// Any learner against a chosen bound
    Experiment(Common),
    /// Validity, stability and homogeneity audit of a scheme
    Audit(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment config
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for outputs (default: results)
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Master seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Table format: csv or json
    #[arg(long)]
    format: Option<String>,
    /// Compression scheme: intervals, rectangles, svm, halving, perceptron, prefix
    #[arg(long)]
    scheme: Option<String>,
    /// Bound to verify, e.g. k_over_n_plus_1
    #[arg(long)]
    bound: Option<String>,
    /// Sample sizes, comma separated
    #[arg(long, value_delimiter = ',')]
    n: Option<Vec<usize>>,
    /// Trials per sample size
    #[arg(long)]
    trials: Option<usize>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (sub, common) = match cli.command {
        Command::Entropy(c) => (Subcommand::Entropy, c),
        Command::NetErm(c) => (Subcommand::NetErm, c),
        Command::Compress(c) => (Subcommand::Compress, c),
        Command::Svm(c) => (Subcommand::Svm, c),
        Command::Experiment(c) => (Subcommand::Experiment, c),
        Command::Audit(c) => (Subcommand::Audit, c),
    };

    if let Some(jobs) = common.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
        {
            eprintln!("error: cannot start {jobs} workers: {e}");
            return ExitCode::from(EXIT_RUN);
        }
    }

    let text = match &common.config {
        Some(path) => match std::fs::read_to_string(path) {
            Ok(t) => Some(t),
            Err(e) => {
                eprintln!("error: reading {}: {e}", path.display());
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => None,
    };
    let overrides = Overrides {
        seed: common.seed,
        trials: common.trials,
        n_grid: common.n,
        scheme: common.scheme,
        bound: common.bound,
        out_dir: common.out_dir,
        format: common.format,
    };
    let cfg = match load(text.as_deref(), Some(sub), &overrides) {
        Ok(c) => c,
        Err(errors) => {
            for e in &errors.0 {
                eprintln!("config error: {e}");
            }
            return ExitCode::from(EXIT_CONFIG);
        }
    };

    let result = run(&cfg).and_then(|outcome| {
        let written =
            write_artifacts(&cfg.output.dir, &outcome.artifacts).context("writing outputs")?;
        Ok((outcome, written))
    });
    let (outcome, written) = match result {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(EXIT_RUN);
        }
    };

    print!("{}", outcome.summary);
    for c in &outcome.checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    for path in &written {
        println!("wrote {}", path.display());
    }
    if outcome.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}
