use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use elastic_flow::config::{load_config, ParsedConfig};
use elastic_flow::convergence::{run_sweep, SweepConfig};
use elastic_flow::flow::run_strided;
use elastic_flow::geometry::{make_initial_curve, set_stencil_corruption};
use elastic_flow::output::{report_text, write_report, write_trajectory};
use elastic_flow::verify::{verify, VerifyOptions, DEFAULT_SEED};
use elastic_flow::{FlowError, Result};

#[derive(Parser)]
#[command(name = "elastic-flow", version, about = "Regularized elastic flow of open plane curves")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one curve and write snapshots and diagnostics.
    Simulate {
        #[arg(short = 'c', long = "config")]
        config: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
        /// Keep every `stride`-th step as a snapshot (the last step is always kept).
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        stride: u64,
    },
    /// Run the ε ladder against the curvature-flow reference.
    Sweep {
        #[arg(short = 'c', long = "config")]
        config: PathBuf,
        #[arg(short = 'o', long = "out")]
        out: PathBuf,
    },
    /// Run the acceptance suite and print one line per criterion.
    Verify {
        /// Run only the criteria with this tag.
        #[arg(long)]
        filter: Option<String>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, hide = true)]
        corrupt_stencil: bool,
    },
}

fn simulate(config: &Path, out: &Path, stride: usize) -> Result<()> {
    let doc = match load_config(config)? {
        ParsedConfig::Flow(doc) => doc,
        ParsedConfig::Sweep(_) => {
            return Err(FlowError::BadParams("config has a [sweep] section; use `sweep`".into()))
        }
    };
    let curve = make_initial_curve(&doc.initial, doc.flow.n)?;
    let traj = run_strided(&curve, &doc.flow, stride)?;
    let paths = write_trajectory(&traj, out)?;
    println!(
        "{:?} at t = {} after {} steps; {} snapshots in {}",
        traj.terminated_by,
        traj.final_time(),
        traj.last_state().step_index,
        paths.len(),
        out.display()
    );
    Ok(())
}

fn sweep(config: &Path, out: &Path) -> Result<()> {
    let (sweep, initial): (SweepConfig, _) = match load_config(config)? {
        ParsedConfig::Sweep(doc) => (doc.sweep, doc.initial),
        ParsedConfig::Flow(_) => return Err(FlowError::BadParams("config has no [sweep] section".into())),
    };
    let curve = make_initial_curve(&initial, sweep.base.n)?;
    let report = run_sweep(&curve, &sweep)?;
    write_report(&report, out)?;
    print!("{}", report_text(&report));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { config, out, stride } => simulate(&config, &out, stride as usize).map(|_| true),
        Command::Sweep { config, out } => sweep(&config, &out).map(|_| true),
        Command::Verify { filter, seed, corrupt_stencil } => {
            set_stencil_corruption(corrupt_stencil);
            verify(&VerifyOptions { filter, seed }).map(|report| {
                print!("{}", report.to_text());
                report.all_passed()
            })
        }
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
