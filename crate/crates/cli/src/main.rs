//! `hlab`: run homogenization studies and inspect their reports.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hlab_core::correctors::resolving_spacing;
use hlab_core::lab::{load_config, load_report};
use hlab_core::{
    capacity_estimate, classify_regime_with, harmonic_capacity, run_study, solve_cell_corrector, CapacityMethod,
    CellProblem, Error,
};

#[derive(Parser)]
#[command(name = "hlab", version, about = "Homogenization lab for perforated domains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a config file.
    Run {
        config: PathBuf,
        /// Override the report directory of the config.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Harmonic capacity of the ball of radius `r` in R^n.
    Capacity {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        r: f64,
        #[arg(long, value_enum, default_value_t = Method::Numeric)]
        method: Method,
    },
    /// Solve one periodic cell corrector.
    Cell {
        #[arg(long, default_value_t = 3)]
        n: usize,
        #[arg(long, default_value_t = 3.0)]
        alpha: f64,
        #[arg(long)]
        eps: f64,
        /// Right-hand side, or `auto` for cap(B_1).
        #[arg(long, default_value = "auto")]
        k: String,
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
        /// Grid steps per hole radius.
        #[arg(long, default_value_t = 6.0)]
        resolution: f64,
    },
    /// Print a stored report.
    Report {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Analytic,
    Numeric,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
    Plot,
}

enum Failure {
    Assertion,
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion) => ExitCode::from(1),
        Err(Failure::Lib(e)) => {
            eprintln!("hlab: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { config, output } => {
            let mut cfg = load_config(&config)?;
            if output.is_some() {
                cfg.output = output;
            }
            let report = run_study(&cfg)?;
            print!("{}", report.to_csv());
            for v in &report.verdicts {
                println!("{} {}: {}", if v.pass { "PASS" } else { "FAIL" }, v.name, v.detail);
            }
            for row in &report.rows {
                if let Some(e) = &row.error {
                    eprintln!("row eps={}: {e}", row.eps);
                }
            }
            if let Some(dir) = &cfg.output {
                eprintln!("reports written to {}", dir.display());
            }
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Assertion)
            }
        }
        Command::Capacity { n, r, method } => {
            let method = match method {
                Method::Analytic => CapacityMethod::Analytic,
                Method::Numeric => CapacityMethod::Numeric,
            };
            println!("{}", harmonic_capacity(r, n, method)?);
            Ok(())
        }
        Command::Cell {
            n,
            alpha,
            eps,
            k,
            c0,
            resolution,
        } => {
            let spec = classify_regime_with(n, alpha, c0)?;
            let k = match k.as_str() {
                "auto" => harmonic_capacity(1.0, n, CapacityMethod::Analytic)?,
                s => s
                    .parse()
                    .map_err(|_| Error::Config(format!("k: expected a number or auto, got '{s}'")))?,
            };
            let a = spec.hole_radius(eps, c0);
            let problem = CellProblem {
                n,
                eps,
                hole_radius: a,
                k,
                h: resolving_spacing(eps, a, resolution),
            };
            let sol = solve_cell_corrector(&problem, 1e-8, 8)?;
            println!("regime\t{:?}", spec.regime);
            println!("hole_radius\t{a}");
            println!("h\t{}", problem.h);
            println!("cells\t{}", sol.cells());
            println!("min_w\t{}", sol.min_w);
            println!("hole_flux\t{}", sol.hole_flux);
            println!("residual\t{:e}", sol.residual);
            match capacity_estimate(&sol) {
                Ok(c) => println!("capacity_estimate\t{c}"),
                Err(e) => println!("capacity_estimate\tunavailable ({e})"),
            }
            Ok(())
        }
        Command::Report { dir, format } => {
            let report = load_report(&dir)?;
            let text = match format {
                Format::Csv => report.to_csv(),
                Format::Json => report.to_json()?,
                Format::Plot => report.to_plotdata(),
            };
            print!("{text}");
            if !text.ends_with('\n') {
                println!();
            }
            Ok(())
        }
    }
}
