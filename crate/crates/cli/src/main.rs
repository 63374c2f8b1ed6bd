use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use graphda_core::datagen::{write_dataset_csv, write_truth_csv};
use graphda_core::harness::{
    self, format_summary, write_rows_csv, write_summary_csv, Criterion, DatasetKind, MU_VALUES,
    SPARSITIES,
};
use graphda_core::io::{read_edge_list, read_pcst_instance, read_vector, write_edge_list};
use graphda_core::metrics::Summary;
use graphda_core::{
    benchmark_dataset, exact_top_s, pcst_objective, restrict, solve_pcst, BenchmarkSpec, Error,
    ExperimentConfig, HeadLowerBound, LearnerKind, LossKind, PcstInstance, ProjectionConfig,
    Projector, ResultRow,
};

const THREADS_ENV: &str = "GRAPHDA_THREADS";

/// Online graph dual averaging experiments.
#[derive(Parser, Debug)]
#[command(name = "graphda", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Global {
    /// Base seed; trial k uses seed + k.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Worker threads (default: $GRAPHDA_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file (directory for gen-data); stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write one trial's graph, ground truth and splits to a directory.
    GenData {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Solve a prize-collecting Steiner forest instance.
    Pcst {
        instance: PathBuf,
        #[arg(long, default_value_t = 1)]
        g: usize,
        #[arg(long, default_value_t = 1.0)]
        cost_scale: f64,
    },
    /// Project a vector onto the graph model or onto s-sparse vectors.
    Project(ProjectArgs),
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the mean±std table here.
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Repeat the experiment along one axis.
    Sweep {
        #[arg(long, value_enum)]
        kind: SweepKind,
        /// Comma-separated values (default: the standard sweep).
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Tune one learner on one trial and print the chosen point.
    Tune {
        #[arg(long)]
        learner: LearnerKind,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        trial: usize,
    },
    /// Aggregate a per-trial CSV into mean±std per method.
    Report { input: PathBuf },
}

#[derive(Args, Debug)]
struct ProjectArgs {
    #[arg(long)]
    vector: PathBuf,
    /// Edge list; required for head and tail.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 1)]
    g: usize,
    #[arg(long, default_value_t = 0.1)]
    omega: f64,
    #[arg(long, default_value_t = 20)]
    max_iter: usize,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Mode {
    Head,
    Tail,
    TopS,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SweepKind {
    Sparsity,
    Samples,
    Mu,
    Images,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("graphda: error: {msg}");
            ExitCode::FAILURE
        }
    }
}

/// Flags first, then the config file on top.
fn load_config(global: &Global, path: Option<&Path>) -> Result<ExperimentConfig, Error> {
    let mut cfg = ExperimentConfig::default();
    if let Some(seed) = global.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = global.trials {
        cfg.trials = trials;
    }
    cfg.threads = match global.threads {
        Some(n) => Some(n),
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => Some(
                v.parse()
                    .map_err(|_| Error::Config(format!("{THREADS_ENV}={v:?} is not a count")))?,
            ),
            Err(_) => None,
        },
    };
    cfg.output = global.out.clone();
    if let Some(path) = path {
        let text = std::fs::read_to_string(path)?;
        cfg.apply_text(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn dispatch(cli: Cli) -> Result<(), Error> {
    let global = &cli.global;
    match cli.command {
        Command::GenData { config, trial } => {
            let cfg = load_config(global, config.as_deref())?;
            let dir = cfg
                .output
                .clone()
                .ok_or_else(|| Error::Config("gen-data needs --out <dir>".into()))?;
            gen_data(&cfg, trial, &dir)
        }
        Command::Pcst { instance, g, cost_scale } => {
            let (graph, prizes) = read_pcst_instance(&instance)?;
            let inst = PcstInstance::new(&graph, &prizes, g).with_cost_scale(cost_scale);
            let forest = solve_pcst(&inst)?;
            let mut out = output(global.out.as_deref())?;
            writeln!(out, "objective {:?}", pcst_objective(&graph, &prizes, &forest, cost_scale)?)?;
            writeln!(out, "nodes {}", join(forest.nodes.indices()))?;
            for &e in &forest.edges {
                let edge = graph.edge(e);
                writeln!(out, "edge {} {} {:?}", edge.u, edge.v, edge.cost)?;
            }
            out.flush()?;
            Ok(())
        }
        Command::Project(args) => project(global, &args),
        Command::Run { config, summary } => {
            let cfg = load_config(global, config.as_deref())?;
            let rows = match cfg.dataset {
                DatasetKind::Benchmark => harness::run_benchmark_experiment(&cfg)?,
                DatasetKind::Images => harness::run_mnist_experiment(&cfg, &image_sizes(&cfg))?,
            };
            emit(&cfg, &rows, summary.as_deref())
        }
        Command::Sweep { kind, values, config, summary } => {
            let cfg = load_config(global, config.as_deref())?;
            let rows = match kind {
                SweepKind::Sparsity => {
                    let s: Vec<usize> = if values.is_empty() {
                        SPARSITIES.to_vec()
                    } else {
                        values.iter().map(|&v| v as usize).collect()
                    };
                    harness::run_sparsity_sweep(&cfg, &s)?
                }
                SweepKind::Samples => {
                    let t: Vec<u64> = if values.is_empty() {
                        (1..=10).map(|k| k * 100).collect()
                    } else {
                        values.iter().map(|&v| v as u64).collect()
                    };
                    harness::run_sample_sweep(&cfg, &t)?
                }
                SweepKind::Mu => {
                    let mus = if values.is_empty() { MU_VALUES.to_vec() } else { values };
                    harness::run_mu_sweep(&cfg, &mus)?
                }
                SweepKind::Images => {
                    let n: Vec<u64> = if values.is_empty() {
                        image_sizes(&cfg)
                    } else {
                        values.iter().map(|&v| v as u64).collect()
                    };
                    harness::run_mnist_experiment(&cfg, &n)?
                }
            };
            emit(&cfg, &rows, summary.as_deref())
        }
        Command::Tune { learner, config, trial } => {
            let cfg = load_config(global, config.as_deref())?;
            let spec = BenchmarkSpec { seed: cfg.seed.wrapping_add(trial as u64), ..cfg.benchmark.clone() };
            let (graph, data) = benchmark_dataset(&spec)?;
            let grid = cfg.grid(learner);
            let points = grid.points(&cfg.base);
            let selections = cfg.install(|| {
                harness::tune(
                    learner,
                    &points,
                    learner.needs_graph().then_some(&graph),
                    &data.train,
                    &data.validate,
                    LossKind::Logistic,
                    cfg.criterion.unwrap_or(Criterion::Accuracy),
                    &[data.train.0.len() as u64],
                )
            })??;
            let sel = &selections[0];
            let mut out = output(cfg.output.as_deref())?;
            writeln!(
                out,
                "{learner} {} validation {:.6} (grid point {} of {})",
                grid.describe(&sel.hyper),
                sel.validation_score,
                sel.grid_index + 1,
                points.len()
            )?;
            out.flush()?;
            Ok(())
        }
        Command::Report { input } => report(&input, global.out.as_deref()),
    }
}

fn image_sizes(cfg: &ExperimentConfig) -> Vec<u64> {
    if cfg.checkpoints.is_empty() {
        (1..=20).map(|k| k * 50).collect()
    } else {
        cfg.checkpoints.clone()
    }
}

fn emit(cfg: &ExperimentConfig, rows: &[ResultRow], summary: Option<&Path>) -> Result<(), Error> {
    let mut out = output(cfg.output.as_deref())?;
    write_rows_csv(&mut out, rows)?;
    out.flush()?;
    if let Some(path) = summary {
        write_summary_csv(BufWriter::new(File::create(path)?), rows)?;
    }
    eprint!("{}", format_summary(rows));
    Ok(())
}

fn join(v: &[usize]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join(" ")
}

fn project(global: &Global, a: &ProjectArgs) -> Result<(), Error> {
    let w = read_vector(&a.vector)?;
    let support = match a.mode {
        Mode::TopS => exact_top_s(&w, a.s),
        Mode::Head | Mode::Tail => {
            let path = a
                .graph
                .as_ref()
                .ok_or_else(|| Error::Config("head/tail projection needs --graph".into()))?;
            let graph = read_edge_list(path)?;
            let p = graph.node_count();
            let cfg = match a.mode {
                Mode::Head => {
                    ProjectionConfig::head(p, a.s, a.g, a.omega, a.max_iter, HeadLowerBound::HalfNodes)?
                }
                _ => ProjectionConfig::tail(p, a.s, a.g, a.omega, a.max_iter)?,
            };
            Projector::new().model_support(&w, &graph, &cfg)?
        }
    };
    let projected = restrict(&w, &support)?;
    let mut out = output(global.out.as_deref())?;
    writeln!(out, "support {}", join(support.indices()))?;
    for v in projected.iter() {
        writeln!(out, "{v:?}")?;
    }
    out.flush()?;
    Ok(())
}

fn gen_data(cfg: &ExperimentConfig, trial: usize, dir: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(dir)?;
    let spec = BenchmarkSpec { seed: cfg.seed.wrapping_add(trial as u64), ..cfg.benchmark.clone() };
    let (graph, data) = benchmark_dataset(&spec)?;
    write_edge_list(BufWriter::new(File::create(dir.join("graph.txt"))?), &graph)?;
    write_truth_csv(File::create(dir.join("truth.csv"))?, &data.truth)?;
    for (name, samples) in [
        ("train.csv", &data.train.0),
        ("validate.csv", &data.validate.0),
        ("test.csv", &data.test.0),
    ] {
        write_dataset_csv(BufWriter::new(File::create(dir.join(name))?), samples)?;
    }
    Ok(())
}

/// Groups rows by (method, t, sweep) and summarises every numeric column.
fn report(input: &Path, out: Option<&Path>) -> Result<(), Error> {
    let mut reader = csv::Reader::from_path(input)?;
    let header = reader.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Config(format!("{}: no `{name}` column", input.display())))
    };
    let keys = [col("method")?, col("t")?, col("sweep")?];
    let skip = [col("trial")?, col("params")?];
    let values: Vec<usize> = (0..header.len())
        .filter(|i| !keys.contains(i) && !skip.contains(i))
        .collect();
    let mut groups: Vec<(Vec<String>, Vec<Vec<f64>>)> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let key: Vec<String> = keys.iter().map(|&i| record[i].to_string()).collect();
        let nums: Vec<f64> = values
            .iter()
            .map(|&i| record[i].parse().unwrap_or(f64::NAN))
            .collect();
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, rows)) => rows.push(nums),
            None => groups.push((key, vec![nums])),
        }
    }
    let mut w = csv::Writer::from_writer(output(out)?);
    let mut head = vec!["method", "t", "sweep", "trials"];
    head.extend(values.iter().map(|&i| &header[i]));
    w.write_record(&head)?;
    for (key, rows) in &groups {
        let mut rec = key.clone();
        rec.push(rows.len().to_string());
        for j in 0..values.len() {
            let column: Vec<f64> = rows.iter().map(|r| r[j]).filter(|v| !v.is_nan()).collect();
            rec.push(match Summary::of(&column) {
                Ok(s) => s.display(),
                Err(_) => String::new(),
            });
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
