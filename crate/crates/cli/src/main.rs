use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use neutral_orbits::config::ExperimentConfig;
use neutral_orbits::plot::{plot, PlotKind};
use neutral_orbits::presets::{names, preset};
use neutral_orbits::report::num;
use neutral_orbits::{run, CliError};

#[derive(Parser)]
#[command(name = "neutral-orbits", version, about = "Experiments on interval maps with several neutral fixed points")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Override the config's output directory.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        /// Override the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Render a CSV table written by `run` as SVG.
    Plot {
        csv: PathBuf,
        #[arg(value_enum)]
        kind: PlotKind,
        /// Output file; defaults to the CSV path with an `.svg` extension.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a shipped configuration; `list` prints the names.
    Preset { name: String },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Run {
            config,
            output_dir,
            workers,
        } => {
            let mut cfg = ExperimentConfig::from_path(&config)?;
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            if workers.is_some() {
                cfg.workers = workers;
            }
            let report = run(&cfg)?;
            for c in &report.checks {
                println!(
                    "{}  {}: {} (accept {})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    num(c.value),
                    c.accept
                );
            }
            println!("report: {}", cfg.output_dir.join("report.json").display());
            Ok(report.exit_code())
        }
        Command::Plot { csv, kind, out } => {
            let path = plot(&csv, kind, out.as_deref())?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Preset { name } => {
            if name == "list" {
                for n in names() {
                    println!("{n}");
                }
            } else {
                println!("{}", serde_json::to_string_pretty(&preset(&name)?)?);
            }
            Ok(0)
        }
    }
}
