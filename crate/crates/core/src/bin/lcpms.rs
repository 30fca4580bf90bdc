use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use lcpms::config::{parse_config, RunConfig};
use lcpms::models::build_model_bank;
use lcpms::output::{emit_figure_data, emit_results, emit_trace};
use lcpms::selection::{GammaBounds, SelectionContext, TraceStep};
use lcpms::simulation::{derive_seed, generate, run_cell, run_table, DgpSpec, Engine, TableSpec};
use lcpms::{oracle, Error, KernelSpec};

#[derive(Parser)]
#[command(name = "lcpms", version, about = "Localized conformal model selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment matrix and write the results table as CSV.
    Table {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use the brute-force reference pipeline.
        #[arg(long)]
        naive: bool,
    },
    /// Write per-test-point intervals and selections for one replication.
    Figure {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        naive: bool,
    },
    /// Print the prediction set at one covariate value as JSON.
    Predict {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, allow_hyphen_values = true)]
        x: f64,
        #[arg(long)]
        naive: bool,
    },
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config { .. } | Error::Json(_) => 2,
        Error::Io { .. } => 4,
        _ => 3,
    }
}

fn load(path: &Path, naive: bool) -> Result<RunConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if naive {
        cfg.table.engine = Engine::Naive;
    }
    Ok(cfg)
}

fn output_path(cli: Option<PathBuf>, cfg: &RunConfig) -> Result<PathBuf, Error> {
    cli.or_else(|| cfg.output.clone())
        .ok_or_else(|| Error::Config {
            field: "output".into(),
            message: "no output path given (use --out or the `output` field)".into(),
        })
}

fn first_cell(cfg: &RunConfig) -> (usize, f64, f64) {
    cfg.table.cells()[0]
}

#[derive(Serialize)]
struct Prediction<'a> {
    x: f64,
    union: &'a [(f64, f64)],
    measure: f64,
    bounds: GammaBounds,
    trace: &'a [TraceStep],
    models: Vec<String>,
}

fn predict(cfg: &RunConfig, x: f64) -> Result<(), Error> {
    let (n, sigma, bw) = first_cell(cfg);
    let cell = cfg.table.dgp(n, sigma, bw);
    let dgp = DgpSpec {
        seed: derive_seed(cell.seed, &[0]),
        ..cell
    };
    let samples = generate(&dgp)?;
    let models = build_model_bank(&cfg.table.bank, &samples.train)?;
    let kernel = KernelSpec::new(cfg.table.kernel_family, bw)?;
    let result = match cfg.table.engine {
        Engine::Fast => SelectionContext::new(&samples.calib, &models, kernel)?.predict(
            &[x],
            cfg.table.alpha,
            &cfg.table.grid,
        )?,
        Engine::Naive => {
            oracle::naive_lcpms(
                &samples.calib,
                &[x],
                cfg.table.alpha,
                &cfg.table.grid,
                &models,
                &kernel,
            )?
            .result
        }
    };
    let out = Prediction {
        x,
        union: result.union.parts(),
        measure: result.union.measure(),
        bounds: result.bounds,
        trace: &result.trace.steps,
        models: models.iter().map(|m| m.label()).collect(),
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Table { config, out, naive } => {
            let cfg = load(&config, naive)?;
            let path = output_path(out, &cfg)?;
            let rows = run_table(&cfg.table)?;
            emit_results(&rows, &path)
        }
        Command::Figure { config, out, naive } => {
            let cfg = load(&config, naive)?;
            let path = output_path(out, &cfg)?;
            let (n, sigma, bw) = first_cell(&cfg);
            // only the first replication is plotted
            let table = TableSpec {
                n_reps: 1,
                ..cfg.table.clone()
            };
            let cell = run_cell(&table, n, sigma, bw, true).map_err(|e| Error::Cell {
                n,
                sigma,
                bw,
                source: Box::new(e),
            })?;
            emit_figure_data(&cell.first_points, &path)?;
            emit_trace(&cell.first_points, &path.with_extension("trace.csv"))
        }
        Command::Predict { config, x, naive } => {
            let cfg = load(&config, naive)?;
            predict(&cfg, x)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
