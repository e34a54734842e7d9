use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use climfs_cli::{CliError, Experiment, FitOptions};

#[derive(Parser)]
#[command(name = "climfs", version, about = "Multi-view feature selection with adaptive imputation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output root; overrides `out_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replaces every seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate or load the dataset and apply the missing-data scenario.
    Simulate(Common),
    /// Fit every configured method.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Exit with status 4 if any fit stops at the iteration cap.
        #[arg(long)]
        strict: bool,
        /// Continue from existing checkpoints.
        #[arg(long)]
        resume: bool,
    },
    /// Cluster the selected features and report ACC / NMI.
    Evaluate(Common),
    /// Check the structural bounds on fitted states.
    Diagnose(Common),
    /// Fit and evaluate the full model against its ablations.
    Ablate(Common),
}

fn experiment(c: Common) -> Result<Experiment, CliError> {
    Experiment::load(&c.config, c.out, c.seed)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(c) => {
            let path = experiment(c)?.simulate()?;
            println!("dataset written to {}", path.display());
        }
        Command::Fit { common, strict, resume } => {
            for s in experiment(common)?.fit(FitOptions { strict, resume })? {
                let iters: Vec<usize> = s.parts.iter().map(|p| p.iterations).collect();
                let status = if s.converged() { "converged" } else { "not converged" };
                println!("{}: {status}, iterations {iters:?}", s.method);
            }
        }
        Command::Evaluate(c) => {
            for r in experiment(c)?.evaluate()? {
                let e = &r.report;
                println!(
                    "{} ratio {}: ACC {:.4} ± {:.4}, NMI {:.4} ± {:.4}",
                    r.method, e.feature_ratio, e.acc_mean, e.acc_std, e.nmi_mean, e.nmi_std
                );
            }
        }
        Command::Diagnose(c) => {
            for r in experiment(c)?.diagnose()? {
                let violations: usize = r.reports.iter().map(|t| t.total_violations).sum();
                println!("{}: converged {}, {violations} bound violations", r.method, r.converged);
            }
        }
        Command::Ablate(c) => {
            for r in experiment(c)?.ablate()? {
                let e = &r.report;
                println!("{} ratio {}: ACC {:.4}, NMI {:.4}", r.method, e.feature_ratio, e.acc_mean, e.nmi_mean);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
