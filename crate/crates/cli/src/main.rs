use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stochhom_cli::{
    list_experiments, load_config, merged_config, run_experiment, validate_config, CliError,
    Config, RunOptions,
};

#[derive(Parser)]
#[command(
    name = "stochhom",
    version,
    about = "Stochastic conservation law homogenization experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its outputs and manifest.
    Run {
        experiment: String,
        /// INI or JSON configuration laid over the experiment defaults; a
        /// run manifest also works.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output root; the run writes to <out>/<experiment>/.
        #[arg(long, env = "STOCHHOM_OUT", default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// List the registered experiments.
    List,
    /// Parse a configuration and validate the problem it describes.
    Validate {
        #[arg(long)]
        config: PathBuf,
        /// Lay the configuration over this experiment's defaults first.
        #[arg(long)]
        experiment: Option<String>,
    },
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::List => {
            for (name, desc) in list_experiments() {
                println!("{name:<22} {desc}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { config, experiment } => {
            let user = load_config(&config)?;
            let cfg = match experiment {
                Some(e) => merged_config(&e, &user, &RunOptions::default())?,
                None => user,
            };
            let setup = validate_config(&cfg)?;
            print!("{}", setup.report);
            println!("ok: {:?}", setup.spec);
            Ok(ExitCode::SUCCESS)
        }
        Command::Run {
            experiment,
            config,
            out,
            seed,
            paths,
            threads,
        } => {
            let user = match config {
                Some(p) => load_config(&p)?,
                None => Config::default(),
            };
            let opts = RunOptions {
                seed,
                paths,
                threads,
            };
            let m = run_experiment(&experiment, &user, &opts, &out)?;
            for a in &m.assertions {
                let show = |v: Option<f64>| v.map_or("nan".to_string(), |v| format!("{v:.3e}"));
                println!(
                    "{} {}: {} ({} {})",
                    if a.passed { "PASS" } else { "FAIL" },
                    a.name,
                    show(a.value),
                    a.detail.trim_start_matches("value "),
                    show(a.threshold)
                );
            }
            println!(
                "{} in {:.2} s -> {}",
                m.experiment,
                m.wall_seconds,
                out.join(&m.experiment).display()
            );
            Ok(if m.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
