//! Batch front end: dataset ingestion, mixture fitting with model selection,
//! MAP classification and the population-loss report.
//!
//! Exit codes: 0 success, 2 input error, 3 numeric failure, 4 configuration
//! error. `LCCMIX_OUTPUT_DIR` overrides the default output directory and
//! `LCCMIX_THREADS` the worker count; everything else is flags.

mod artifact;
mod commands;
mod csvio;
mod errors;

use std::path::PathBuf;

use clap::{Args as ClapArgs, Parser, Subcommand};

use lccmix_core::estimation::FitConfig;
use lccmix_core::model::{CovarianceStructure, Proportions};
use lccmix_core::selection::Criterion;

use crate::errors::{CliError, CliResult};

#[derive(Parser)]
#[command(
    name = "lccmix",
    version,
    about = "Gaussian mixture clustering by likelihood and assignment-confidence contrasts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ClapArgs, Clone)]
struct CsvArgs {
    /// Field delimiter.
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Treat the first row as data, not as a header.
    #[arg(long)]
    no_header: bool,
    /// Comma-separated zero-based column indices to keep.
    #[arg(long)]
    columns: Option<String>,
}

impl CsvArgs {
    fn to_options(&self) -> CliResult<csvio::CsvOptions> {
        if !self.delimiter.is_ascii() {
            return Err(CliError::config("delimiter must be an ASCII character"));
        }
        let columns = match &self.columns {
            None => None,
            Some(text) => Some(
                text.split(',')
                    .map(|s| {
                        s.trim()
                            .parse::<usize>()
                            .map_err(|_| CliError::config(format!("bad column index '{s}'")))
                    })
                    .collect::<CliResult<Vec<usize>>>()?,
            ),
        };
        Ok(csvio::CsvOptions {
            delimiter: self.delimiter as u8,
            has_header: !self.no_header,
            columns,
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Fit every K in a range with both estimators and select K per criterion.
    Fit {
        /// Input CSV file.
        data: PathBuf,
        #[arg(long, default_value_t = 1)]
        k_min: usize,
        #[arg(long, default_value_t = 3)]
        k_max: usize,
        /// Covariance structure: spherical | diag | diag-eqvol | full.
        #[arg(long, default_value = "diag")]
        model: String,
        /// Proportion constraint: free | equal.
        #[arg(long, default_value = "free")]
        proportions: String,
        /// Criterion to report: aic | bic | icl-map | icl-tau | lcc-icl | all.
        #[arg(long, default_value = "all")]
        criterion: String,
        #[arg(long, default_value_t = 10)]
        restarts: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Override the data-scaled covariance eigenvalue floor.
        #[arg(long)]
        var_floor: Option<f64>,
        /// Override the mixing-weight floor.
        #[arg(long)]
        prop_floor: Option<f64>,
        /// Where artifacts and tables go; default `.`, overridable by
        /// LCCMIX_OUTPUT_DIR.
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[command(flatten)]
        csv: CsvArgs,
    },
    /// Classify a dataset with a fitted model artifact.
    Classify {
        /// Model artifact produced by `fit`.
        artifact: PathBuf,
        /// Input CSV file.
        data: PathBuf,
        /// Write the labels CSV here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        csv: CsvArgs,
    },
    /// Population-level minimizers and the population-best class count.
    Population {
        /// Sampling density as weight,mean,variance triples separated by
        /// semicolons; standard normal when omitted.
        #[arg(long)]
        truth_mixture: Option<String>,
        /// Component-count range, two values.
        #[arg(long, num_args = 2, default_values_t = [1, 2])]
        k_range: Vec<usize>,
    },
}

fn parse_criteria(text: &str) -> CliResult<Vec<Criterion>> {
    if text == "all" {
        return Ok(Criterion::ALL.to_vec());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(CliError::from))
        .collect()
}

fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os("LCCMIX_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

#[cfg(feature = "parallel")]
fn init_threads() -> CliResult<()> {
    if let Ok(text) = std::env::var("LCCMIX_THREADS") {
        let threads: usize = text
            .parse()
            .map_err(|_| CliError::config(format!("bad LCCMIX_THREADS value '{text}'")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::config(format!("thread pool: {e}")))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn init_threads() -> CliResult<()> {
    Ok(())
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Fit {
            data,
            k_min,
            k_max,
            model,
            proportions,
            criterion,
            restarts,
            seed,
            max_iter,
            tol,
            var_floor,
            prop_floor,
            output_dir: dir_flag,
            csv,
        } => {
            let structure: CovarianceStructure = model.parse()?;
            let proportions: Proportions = proportions.parse()?;
            let criteria = parse_criteria(&criterion)?;
            if restarts == 0 || max_iter == 0 || !(tol > 0.0) {
                return Err(CliError::config(
                    "restarts and max-iter must be positive, tol > 0",
                ));
            }
            let dataset = csvio::read_csv(&data, &csv.to_options()?)?;
            eprintln!(
                "loaded {} observations x {} columns ({}) from {}",
                dataset.matrix.n_rows(),
                dataset.matrix.n_cols(),
                dataset.column_names.join(", "),
                dataset.source.display()
            );
            let options = commands::fit::FitOptions {
                k_min,
                k_max,
                structure,
                proportions,
                criteria,
                config: FitConfig {
                    n_restarts: restarts,
                    max_em_iters: max_iter,
                    em_tol: tol,
                    seed,
                    ..FitConfig::default()
                },
                var_floor,
                prop_floor,
                output_dir: output_dir(dir_flag),
            };
            let report = commands::fit::run(&dataset.matrix, &options)?;
            for (criterion, k) in &report.selections {
                println!("{criterion}: K = {k}");
            }
            eprintln!("wrote {} files", report.written.len());
            Ok(())
        }
        Command::Classify {
            artifact,
            data,
            output,
            csv,
        } => {
            let model = artifact::read_artifact(&artifact)?;
            let dataset = csvio::read_csv(&data, &csv.to_options()?)?;
            let table = commands::classify::run(&model, &dataset.matrix)?;
            match output {
                Some(path) => std::fs::write(path, table)?,
                None => print!("{table}"),
            }
            Ok(())
        }
        Command::Population {
            truth_mixture,
            k_range,
        } => {
            let options = commands::population::PopulationOptions {
                truth: truth_mixture,
                k_min: k_range[0],
                k_max: k_range[1],
            };
            let report = commands::population::run(&options)?;
            print!("{report}");
            Ok(())
        }
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // help and version requests are successes, everything else is a
            // configuration error (exit 4)
            use clap::error::ErrorKind;
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                std::process::exit(0);
            }
            eprint!("{err}");
            std::process::exit(4);
        }
    };
    if let Err(err) = init_threads() {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
