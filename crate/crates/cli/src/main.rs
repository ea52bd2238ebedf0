use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use nn_abduce::bnb::BranchConfig;
use nn_abduce::explain::{ExplainStats, Explanation};
use nn_abduce::instances::{ingest_csv, InstanceSet};
use nn_abduce::interval::{box_propagate, AttributeAssignment};
use nn_abduce::report::{
    bench_rows, bounds_rows, write_csv, CsvRecord, ExplainRow, RunRecord, VerifyRow,
};
use nn_abduce::synth::random_instance;
use nn_abduce::{AttributeOrder, EngineConfig, Error, Explainer, Mode, Model, TightBoundsMode};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const INPUT_ERROR: u8 = 2;
const SOLVER_ERROR: u8 = 3;

/// Minimal abductive explanations for ReLU network predictions.
#[derive(Parser)]
#[command(name = "nn-abduce", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Explain every instance; one CSV row per instance.
    Explain {
        #[command(flatten)]
        data: Data,
        #[arg(long, default_value = "improved")]
        mode: Mode,
        #[command(flatten)]
        engine: Engine,
    },
    /// Tight and Box bounds of every neuron over the whole domain.
    Bounds {
        model: PathBuf,
        #[arg(long = "tight-bounds", default_value = "milp")]
        tight_bounds: TightBoundsMode,
        /// Report pre-activation intervals instead of post-activation ones.
        #[arg(long)]
        pre: bool,
    },
    /// Run both modes on the same instances and compare them.
    Bench {
        #[command(flatten)]
        data: Data,
        #[command(flatten)]
        engine: Engine,
    },
    /// Explain, then check sufficiency by sampling and minimality by witnesses.
    Verify {
        #[command(flatten)]
        data: Data,
        #[arg(long, default_value = "improved")]
        mode: Mode,
        /// Sampled completions per instance.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[command(flatten)]
        engine: Engine,
    },
}

#[derive(Args)]
struct Data {
    /// Model JSON file.
    model: PathBuf,
    /// Instance CSV file; optional with --random.
    instances: Option<PathBuf>,
    /// Draw this many instances uniformly from the model's domain instead.
    #[arg(long, conflicts_with = "instances")]
    random: Option<usize>,
    /// Seed for --random and for verification sampling.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct Engine {
    #[arg(long = "tight-bounds", default_value = "milp")]
    tight_bounds: TightBoundsMode,
    /// `asc` or a comma-separated permutation of attribute indices.
    #[arg(long, default_value = "asc")]
    order: AttributeOrder,
    /// Worker threads across instances.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Per-query solver budget; an attribute whose query times out is kept.
    #[arg(long = "time-budget-ms")]
    time_budget_ms: Option<u64>,
    /// Feasibility and integrality tolerance of the solver.
    #[arg(long, default_value_t = 1e-6)]
    tolerance: f64,
}

impl Engine {
    fn config(&self) -> EngineConfig {
        let mut branch = BranchConfig {
            integrality_tol: self.tolerance,
            time_budget: self.time_budget_ms.map(Duration::from_millis),
            ..BranchConfig::default()
        };
        branch.lp.feasibility_tol = self.tolerance;
        EngineConfig {
            tight_bounds: self.tight_bounds,
            order: self.order.clone(),
            branch,
        }
    }
}

/// A failure together with the exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Solver(_) | Error::TooManyBinaries { .. } => SOLVER_ERROR,
            _ => INPUT_ERROR,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Self {
            code: INPUT_ERROR,
            message: e.to_string(),
        }
    }
}

fn load(data: &Data) -> Result<(Model, InstanceSet), Failure> {
    let model = Model::load(&data.model)?;
    let set = match (&data.instances, data.random) {
        (Some(path), _) => ingest_csv(path)?,
        (None, Some(n)) => {
            let mut rng = ChaCha8Rng::seed_from_u64(data.seed);
            InstanceSet {
                rows: (0..n)
                    .map(|_| random_instance(&mut rng, &model.domain))
                    .collect(),
                labels: None,
            }
        }
        (None, None) => {
            return Err(Failure {
                code: INPUT_ERROR,
                message: "an instance file or --random is required".into(),
            })
        }
    };
    set.check_width(model.network.input_dim())?;
    for (i, row) in set.rows.iter().enumerate() {
        model
            .domain
            .check_instance(row)
            .map_err(|e| Failure::from(Error::Instances(format!("row {}: {e}", i + 1))))?;
    }
    Ok((model, set))
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, Failure> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Failure {
            code: INPUT_ERROR,
            message: format!("cannot start {jobs} workers: {e}"),
        })
}

/// Explains every row in order, possibly in parallel. The first failing row
/// aborts the run with its row number in the message.
fn explain_all(
    explainer: &Explainer,
    set: &InstanceSet,
    mode: Mode,
    jobs: usize,
) -> Result<Vec<(Explanation, ExplainStats)>, Failure> {
    pool(jobs)?.install(|| {
        set.rows
            .par_iter()
            .enumerate()
            .map(|(i, x)| {
                explainer.explain(x, mode).map_err(|e| {
                    let mut f = Failure::from(e);
                    f.message = format!("row {}: {}", i + 1, f.message);
                    f
                })
            })
            .collect()
    })
}

fn emit<T: CsvRecord>(rows: &[T]) -> Result<(), Failure> {
    let stdout = io::stdout();
    let mut lock = stdout.lock();
    write_csv(&mut lock, rows)?;
    lock.flush()?;
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Explain { data, mode, engine } => {
            let (model, set) = load(&data)?;
            let explainer = Explainer::new(model, engine.config())?;
            let runs = explain_all(&explainer, &set, mode, engine.jobs)?;
            let rows: Vec<_> = runs
                .iter()
                .enumerate()
                .map(|(i, (e, s))| ExplainRow::new(i, mode, e, s))
                .collect();
            emit(&rows)
        }
        Command::Bounds {
            model,
            tight_bounds,
            pre,
        } => {
            let model = Model::load(model)?;
            let config = EngineConfig {
                tight_bounds,
                ..EngineConfig::default()
            };
            let explainer = Explainer::new(model, config)?;
            let m = explainer.model();
            let boxed = box_propagate(
                &m.network,
                &AttributeAssignment::all_free(m.network.input_dim()),
                &m.domain,
            )?;
            emit(&bounds_rows(explainer.tight_bounds(), &boxed, pre))
        }
        Command::Bench { data, engine } => {
            let (model, set) = load(&data)?;
            let name = data
                .model
                .file_stem()
                .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
            let dataset = data
                .instances
                .as_ref()
                .and_then(|p| p.file_stem())
                .map_or_else(
                    || "random".to_string(),
                    |s| s.to_string_lossy().into_owned(),
                );
            let explainer = Explainer::new(model, engine.config())?;
            let record = |mode| -> Result<RunRecord, Failure> {
                Ok(RunRecord {
                    dataset: dataset.clone(),
                    network: name.clone(),
                    mode,
                    runs: explain_all(&explainer, &set, mode, engine.jobs)?,
                })
            };
            let baseline = record(Mode::Baseline)?;
            let ours = record(Mode::Improved)?;
            emit(&bench_rows(&baseline, &ours))
        }
        Command::Verify {
            data,
            mode,
            samples,
            engine,
        } => {
            let (model, set) = load(&data)?;
            let explainer = Explainer::new(model, engine.config())?;
            let runs = explain_all(&explainer, &set, mode, engine.jobs)?;
            let mut rows = Vec::with_capacity(runs.len());
            for (i, (e, _)) in runs.iter().enumerate() {
                let report = explainer.verify(
                    &set.rows[i],
                    e,
                    samples,
                    data.seed.wrapping_add(i as u64),
                    engine.tolerance,
                )?;
                rows.push(VerifyRow::new(i, e, &report));
            }
            emit(&rows)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
