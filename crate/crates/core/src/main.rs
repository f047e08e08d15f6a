use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use warpgeo::chart::CATALOG;
use warpgeo::cli::{load_config, point_dump, run, RunOptions};
use warpgeo::oracle::DerivativeMode;

/// Closed-form geometry of coupled warped products, checked against a
/// coordinate oracle.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load and validate a config without evaluating anything.
    Check { config: PathBuf },
    /// Run every configured task over the sample points.
    Run {
        config: PathBuf,
        /// Multiply every tolerance by this factor.
        #[arg(long, default_value_t = 1.0)]
        tolerance_scale: f64,
        /// Use central differences in the oracle (tolerances relaxed 100x).
        #[arg(long)]
        fd_oracle: bool,
        /// CSV report path; overrides the config's output.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Dump every object at one product point.
    Point {
        config: PathBuf,
        /// Product coordinates, base first, comma separated.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        at: Vec<f64>,
        #[arg(long)]
        fd_oracle: bool,
    },
    /// List the built-in charts.
    Catalog,
}

const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Catalog => {
            for (name, description) in CATALOG {
                println!("{name:<14} {description}");
            }
            ExitCode::SUCCESS
        }
        Command::Check { config } => match load_config(&config) {
            Ok(cfg) => {
                let tasks: Vec<&str> = cfg.tasks.iter().map(|t| t.name()).collect();
                println!(
                    "ok: variant {}, dims {}+{}, tasks {}",
                    cfg.spec.variant(),
                    cfg.spec.m1(),
                    cfg.spec.m2(),
                    tasks.join(", ")
                );
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(EXIT_CONFIG)
            }
        },
        Command::Run {
            config,
            tolerance_scale,
            fd_oracle,
            out,
        } => {
            let cfg = match load_config(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            if !(tolerance_scale > 0.0 && tolerance_scale.is_finite()) {
                eprintln!("error: --tolerance-scale must be positive");
                return ExitCode::from(EXIT_CONFIG);
            }
            let report = match run(&cfg, RunOptions { tolerance_scale, fd_oracle }) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            print!("{}", report.render_table());
            if let Some(path) = out.or(cfg.csv) {
                if let Err(e) = std::fs::write(&path, report.to_csv()) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(EXIT_CONFIG);
                }
            }
            ExitCode::from(report.exit_code() as u8)
        }
        Command::Point { config, at, fd_oracle } => {
            let mode = if fd_oracle { DerivativeMode::CentralDifference } else { DerivativeMode::Dual };
            match load_config(&config).and_then(|cfg| point_dump(&cfg, &at, mode)) {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_CONFIG)
                }
            }
        }
    }
}
