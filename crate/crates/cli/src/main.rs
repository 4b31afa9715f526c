use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use evodt::bench::{
    grid_search, load_experiment_data, markdown_table, read_csv, run_experiment, train_model,
    write_csv, Algorithm, ExperimentConfig,
};
use evodt::dataset::{apply_normalizer, default_cache_dir, fit_normalizer, Registry};
use evodt::Error;

/// Exit status for bad arguments or configuration.
const EXIT_USAGE: u8 = 1;
/// Exit status for unreadable, missing or malformed data.
const EXIT_DATA: u8 = 2;
/// Exit status for failures during training.
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(
    name = "evodt",
    version,
    about = "Evolutionary decision trees and tree ensembles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Download a built-in dataset into the cache.
    Fetch {
        dataset: String,
        #[arg(long)]
        cache: Option<PathBuf>,
    },
    /// Train on a whole dataset and write the model as JSON.
    Train(RunArgs),
    /// Run stratified cross-validation and write per-fold results as CSV.
    Bench(RunArgs),
    /// Nested cross-validated search over a JSON grid of config values.
    Gridsearch {
        #[command(flatten)]
        run: RunArgs,
        /// JSON object mapping dotted config keys to lists of values.
        #[arg(long)]
        grid: PathBuf,
    },
    /// Summarize a results CSV.
    Report {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "md")]
        format: Format,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Md,
    Csv,
}

/// Experiment settings. Flags override values from `--config`.
#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in dataset key or CSV path.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    algo: Option<String>,
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    trees: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    /// DE generations and ES iterations.
    #[arg(long)]
    generations: Option<usize>,
    /// DE population size.
    #[arg(long)]
    pop: Option<usize>,
    /// DE mutation scale and ES step size.
    #[arg(long)]
    alpha: Option<f64>,
    /// ES perturbation scale.
    #[arg(long)]
    sigma: Option<f64>,
    /// DE crossover rate.
    #[arg(long)]
    cr: Option<f64>,
    /// ES offsets per iteration.
    #[arg(long)]
    offsets: Option<usize>,
    #[arg(long)]
    folds: Option<usize>,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    #[arg(long)]
    parallel: bool,
    /// Dataset download cache.
    #[arg(long)]
    cache: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig, Error> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.dataset {
            cfg.dataset = v.clone();
        }
        if let Some(v) = &self.algo {
            cfg.algorithm = v.parse::<Algorithm>()?;
        }
        set(&mut cfg.depth, self.depth);
        set(&mut cfg.trees, self.trees);
        set(&mut cfg.rounds, self.rounds);
        set(&mut cfg.de.generations, self.generations);
        set(&mut cfg.es.iterations, self.generations);
        set(&mut cfg.de.population_size, self.pop);
        set(&mut cfg.de.alpha, self.alpha);
        set(&mut cfg.es.alpha, self.alpha);
        set(&mut cfg.es.sigma, self.sigma);
        set(&mut cfg.de.cr, self.cr);
        set(&mut cfg.es.n_offsets, self.offsets);
        set(&mut cfg.folds, self.folds);
        set(&mut cfg.seeds, self.seeds.clone());
        cfg.parallel |= self.parallel;
        if self.cache.is_some() {
            cfg.cache_dir = self.cache.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidConfig(_) | Error::Json(_) => EXIT_USAGE,
        Error::Io { .. }
        | Error::Parse { .. }
        | Error::InvalidData(_)
        | Error::UnknownDataset(_)
        | Error::Network { .. }
        | Error::Checksum { .. }
        | Error::Csv(_)
        | Error::DimensionMismatch { .. } => EXIT_DATA,
        _ => EXIT_RUNTIME,
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Fetch { dataset, cache } => {
            let dir = cache.unwrap_or_else(default_cache_dir);
            let path = Registry::from_env().fetch(&dataset, &dir)?;
            println!("{}", path.display());
        }
        Command::Train(args) => {
            let cfg = args.config()?;
            let (name, data) = load_experiment_data(&cfg)?;
            let stats = fit_normalizer(&data)?;
            let train = apply_normalizer(&data, &stats)?;
            let model = train_model(&cfg, &train, cfg.seeds[0])?;
            eprintln!(
                "{name}: {} trained, training accuracy {:.4}",
                cfg.algorithm,
                model.accuracy(&train)?
            );
            let model = model.with_normalization(stats)?;
            emit(args.out.as_deref(), &(model.to_json()? + "\n"))?;
        }
        Command::Bench(args) => {
            let cfg = args.config()?;
            let records = run_experiment(&cfg)?;
            let mut csv = Vec::new();
            write_csv(&records, &mut csv)?;
            emit(args.out.as_deref(), &String::from_utf8_lossy(&csv))?;
            eprint!("{}", markdown_table(&records));
        }
        Command::Gridsearch { run, grid } => {
            let cfg = run.config()?;
            let text = std::fs::read_to_string(&grid).map_err(|e| Error::io(&grid, e))?;
            let grid: BTreeMap<String, Vec<serde_json::Value>> = serde_json::from_str(&text)?;
            let result = grid_search(&cfg, &grid)?;
            eprint!("{}", result.markdown());
            let doc = serde_json::json!({
                "best_params": result.points[result.best].params,
                "best_config": result.best_config,
                "points": result.points,
                "nested": result.nested,
            });
            emit(
                run.out.as_deref(),
                &(serde_json::to_string_pretty(&doc)? + "\n"),
            )?;
        }
        Command::Report { input, format, out } => {
            let file = std::fs::File::open(&input).map_err(|e| Error::io(&input, e))?;
            let records = read_csv(file)?;
            let text = match format {
                Format::Md => markdown_table(&records),
                Format::Csv => {
                    let mut buf = Vec::new();
                    write_csv(&records, &mut buf)?;
                    String::from_utf8_lossy(&buf).into_owned()
                }
            };
            emit(out.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
