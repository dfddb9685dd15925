use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mmw_manet::config::ScenarioConfig;
use mmw_manet::propagation::UmaCoefficients;
use mmw_manet::scenario::{self, ScenarioError};

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "manetsim",
    version,
    about = "MANET simulator: Wi-Fi omni vs mmWave directional"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every cell of the scenario grid; output goes under $MANET_OUT (default `results`).
    Run { config: PathBuf },
    /// Run the transmit-power sweep and write seed-averaged `sweep.csv`.
    Sweep { config: PathBuf },
    /// Print the long-form path-loss table as CSV on stdout.
    Pathloss {
        /// Carrier frequencies in Hz.
        #[arg(long, value_delimiter = ',', default_values_t = [2.4e9, 28e9])]
        freqs: Vec<f64>,
        /// Distances in metres (≥ 1). Defaults to 10..=1000 in 10 m steps.
        #[arg(long, value_delimiter = ',')]
        dists: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_values_t = ["friis".to_string(), "friis_dir".into(), "rma".into(), "ci".into()])]
        models: Vec<String>,
        /// UMa coefficients `a,b,e`; required when `uma` is among the models.
        #[arg(long)]
        uma_coeffs: Option<String>,
    },
    /// Parse and validate a config, then print the grid size.
    Validate { config: PathBuf },
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ScenarioError> for Failure {
    fn from(e: ScenarioError) -> Self {
        match e {
            ScenarioError::Config(_) | ScenarioError::Propagation(_) => Failure::Config(e.to_string()),
            ScenarioError::Run { .. } | ScenarioError::Io { .. } => Failure::Runtime(e.to_string()),
        }
    }
}

fn read_config(path: &Path) -> Result<(), Failure> {
    fs::metadata(path)
        .map(|_| ())
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config } => {
            read_config(&config)?;
            let dir = scenario::run_scenario(&config, &scenario::output_root())?;
            println!("{}", dir.display());
        }
        Command::Sweep { config } => {
            read_config(&config)?;
            let dir = scenario::sweep_scenario(&config, &scenario::output_root())?;
            println!("{}", dir.display());
        }
        Command::Pathloss {
            freqs,
            dists,
            models,
            uma_coeffs,
        } => {
            let dists = if dists.is_empty() {
                (1..=100).map(|k| 10.0 * k as f64).collect()
            } else {
                dists
            };
            let uma = uma_coeffs
                .as_deref()
                .map(UmaCoefficients::parse)
                .transpose()
                .map_err(|e| Failure::Config(format!("--uma-coeffs: {e}")))?;
            let table = scenario::pathloss_table(&freqs, &dists, &models, uma.as_ref())
                .map_err(|e| Failure::Config(e.to_string()))?;
            print!("{table}");
        }
        Command::Validate { config } => {
            let text =
                fs::read_to_string(&config).map_err(|e| Failure::Config(format!("{}: {e}", config.display())))?;
            let cfg = ScenarioConfig::parse(&text).map_err(|e| Failure::Config(e.to_string()))?;
            println!(
                "ok: {} cells, {} sweep cells",
                cfg.cells().len(),
                cfg.sweep_cells().len()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("runtime error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}
