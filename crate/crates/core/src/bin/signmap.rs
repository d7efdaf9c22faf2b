use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use signmap::config::PipelineConfig;
use signmap::pipeline::{self, Backend};

/// Offline placard mapping over recorded or simulated keyframe datasets.
#[derive(Parser)]
#[command(name = "signmap", version)]
struct Cli {
    /// Pipeline configuration (TOML). Defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print the full default configuration and exit.
    #[arg(long)]
    print_config: bool,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset.
    Simulate {
        /// World spec (JSON); the built-in template when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Dataset directory to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge submaps and build the occupancy maps.
    Map {
        #[arg(long)]
        dataset: PathBuf,
        /// Work directory for stage outputs.
        #[arg(long)]
        out: PathBuf,
    },
    /// Localize and read every confident detection.
    Semantics {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Backend::Mock)]
        backend: Backend,
    },
    /// Filter, cluster and label observations.
    Aggregate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Score landmarks against the dataset's ground truth.
    Evaluate {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Hand-made `landmark_id,reference_id` CSV instead of automatic matching.
        #[arg(long)]
        correspondence: Option<PathBuf>,
    },
    /// Draw the annotated map.
    Render {
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return Ok(());
    }
    let command = cli.command.context("no command given (try --help)")?;
    match command {
        Command::Simulate { spec, seed, out } => {
            pipeline::cmd_simulate(spec.as_deref(), seed, &out)
        }
        Command::Map { dataset, out } => {
            let s = pipeline::cmd_map(&dataset, &cfg, &out)?;
            println!(
                "{} keyframes mapped, {} loss events",
                s.keyframes,
                s.merges.len()
            );
            if !s.unmerged_submaps.is_empty() {
                println!("unmerged submaps: {:?}", s.unmerged_submaps);
            }
            Ok(())
        }
        Command::Semantics {
            dataset,
            out,
            backend,
        } => {
            let n = pipeline::cmd_semantics(&dataset, &cfg, backend, &out)?;
            println!("{n} observations");
            Ok(())
        }
        Command::Aggregate { out } => {
            let a = pipeline::cmd_aggregate(&cfg, &out)?;
            println!(
                "{} landmarks, {} observations discarded",
                a.landmarks.len(),
                a.discarded.len()
            );
            Ok(())
        }
        Command::Evaluate {
            dataset,
            out,
            correspondence,
        } => {
            let r = pipeline::cmd_evaluate(&dataset, &cfg, correspondence.as_deref(), &out)?;
            print!("{}", r.to_text());
            Ok(())
        }
        Command::Render { out } => pipeline::cmd_render(&out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
