use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use psbml::commands::{self, ModeshiftArgs, TrainArgs};
use psbml::datagen::Kind;
use psbml::dataset::LabelColumn;
use psbml::experiments::{run_experiment, Config, Experiment, RunOptions};

#[derive(Parser)]
#[command(name = "psbml", version, about = "Parallel spatial boosting on a toroidal grid of learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the grid learner on a CSV dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// Label column: `last`, a 0-based index or a header name.
        #[arg(long, default_value = "last")]
        label: LabelColumn,
        /// `key=value` file with grid.*, learner, nb.*, tree.*, ada.* keys.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit a Gaussian mixture and locate its (boundary-weighted) modes.
    Modeshift {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value = "last")]
        label: LabelColumn,
        /// `none`, `circle:cx,cy,r,sigma`, `line:axis,offset,sigma` or `point:x1,..,xD,var`.
        #[arg(long, default_value = "none")]
        weights: String,
        #[arg(long)]
        components: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Initialise components at quantiles along this axis instead of k-means++.
        #[arg(long)]
        quantile_axis: Option<usize>,
        #[arg(long, default_value_t = 0)]
        restarts: usize,
        /// Fit the mixture to weighted points instead of weighting the density.
        #[arg(long)]
        weighted_fit: bool,
    },
    /// Write a synthetic dataset and its `.meta` sidecar.
    Generate {
        #[arg(long)]
        kind: Kind,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scripted experiment protocol.
    Experiment {
        #[arg(long)]
        name: Experiment,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: Option<&PathBuf>) -> psbml::Result<Config> {
    path.map_or_else(|| Ok(Config::default()), Config::load)
}

fn run(cli: Cli) -> psbml::Result<()> {
    match cli.command {
        Command::Train {
            data,
            label,
            config,
            seed,
            threads,
            out,
        } => {
            let args = TrainArgs {
                data,
                label,
                config: load_config(config.as_ref())?,
                seed,
                threads,
                out,
            };
            let (res, files) = commands::train(&args)?;
            println!(
                "best epoch {} (validation error {:.4}); wrote {} files to {}",
                res.best_epoch,
                res.best_validation_error(),
                files.len(),
                args.out.display()
            );
        }
        Command::Modeshift {
            data,
            label,
            weights,
            components,
            seed,
            out,
            quantile_axis,
            restarts,
            weighted_fit,
        } => {
            let mut args = ModeshiftArgs::new(data, &weights, components, seed, out);
            args.label = label;
            args.quantile_axis = quantile_axis;
            args.restarts = restarts;
            args.weighted_fit = weighted_fit;
            let (modes, _) = commands::modeshift(&args)?;
            if modes.unconverged > 0 {
                eprintln!("warning: {} start(s) did not converge and were dropped", modes.unconverged);
            }
            print!("{}", modes.to_csv());
        }
        Command::Generate { kind, n, seed, out } => {
            let d = commands::generate(kind, n, seed, &out)?;
            println!("wrote {} instances to {}", d.len(), out.display());
        }
        Command::Experiment {
            name,
            config,
            seed,
            threads,
            out,
        } => {
            let cfg = load_config(config.as_ref())?;
            let outcome = run_experiment(name, &cfg, &RunOptions::new(seed, threads).with_out(out))?;
            print!("{}", outcome.summary.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
