//! Experiment orchestration: grid tuning on validation data, trial loops,
//! sweeps and CSV emission.
//!
//! A unit of work is one learner trained with one grid point for one trial;
//! units run in parallel, each strictly sequential inside. Grid selection is
//! an order-independent reduction (best score, then lowest grid index), so
//! output does not depend on the number of threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::datagen::{
    benchmark_dataset, image_mask, load_idx, make_wstar, regression_dataset, stream_rng,
    synthetic_digits, BenchmarkSpec, Dataset, IdxData, Image, TestSplit, TrainSplit,
    ValidationSplit, WStarStrategy,
};
use crate::error::{Error, Result};
use crate::graph::{build_grid_graph, DenseVector, Graph};
use crate::metrics::{
    accuracy, classification_metrics, feature_metrics, mean_squared_error, score_samples,
    ClassReport, FeatureReport, Summary,
};
use crate::online::{
    run_stream, write_snapshot, DualMode, HyperParams, Learner, LearnerKind, LossKind,
};
use crate::projection::HeadLowerBound;

pub const RDA_LAMBDAS: [f64; 14] = [
    0.0001, 0.0005, 0.001, 0.005, 0.01, 0.03, 0.05, 0.1, 0.3, 0.5, 1.0, 3.0, 5.0, 10.0,
];
pub const RDA_GAMMAS: [f64; 9] = [1.0, 5.0, 10.0, 50.0, 100.0, 500.0, 1000.0, 5000.0, 10000.0];
pub const RDA_RHOS: [f64; 12] = [
    0.0, 0.00001, 0.000005, 0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0,
];
pub const ADAM_ALPHAS: [f64; 8] = [0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5];
pub const ADAGRAD_VALUES: [f64; 16] = [
    0.0001, 0.0005, 0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0, 500.0,
    1000.0, 5000.0,
];
pub const SPARSITIES: [usize; 34] = [
    5, 10, 15, 20, 25, 26, 30, 35, 40, 45, 46, 50, 55, 60, 65, 70, 75, 80, 85, 90, 92, 95, 100,
    105, 110, 115, 120, 125, 130, 132, 135, 140, 145, 150,
];
/// Step sizes for the gradient-step learners.
pub const STEP_SIZES: [f64; 7] = [0.001, 0.005, 0.01, 0.05, 0.1, 0.5, 1.0];
/// `mu` values of the signal-strength sweep.
pub const MU_VALUES: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Sparsity grid `{30, 32, ..., 100}` of the image experiments.
pub fn image_sparsities() -> Vec<usize> {
    (30..=100).step_by(2).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Param {
    Sparsity,
    Gamma,
    Lambda,
    Rho,
    Eta,
    Alpha,
}

impl Param {
    pub fn name(self) -> &'static str {
        match self {
            Param::Sparsity => "s",
            Param::Gamma => "gamma",
            Param::Lambda => "lambda",
            Param::Rho => "rho",
            Param::Eta => "eta",
            Param::Alpha => "alpha",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "s" | "sparsity" => Param::Sparsity,
            "gamma" => Param::Gamma,
            "lambda" => Param::Lambda,
            "rho" => Param::Rho,
            "eta" => Param::Eta,
            "alpha" => Param::Alpha,
            _ => return Err(Error::Config(format!("unknown grid parameter {s:?}"))),
        })
    }

    fn apply(self, h: &mut HyperParams, v: f64) {
        match self {
            Param::Sparsity => h.sparsity = v as usize,
            Param::Gamma => h.gamma = v,
            Param::Lambda => h.lambda = v,
            Param::Rho => h.rho = v,
            Param::Eta => h.eta = v,
            Param::Alpha => h.alpha = v,
        }
    }

    fn get(self, h: &HyperParams) -> f64 {
        match self {
            Param::Sparsity => h.sparsity as f64,
            Param::Gamma => h.gamma,
            Param::Lambda => h.lambda,
            Param::Rho => h.rho,
            Param::Eta => h.eta,
            Param::Alpha => h.alpha,
        }
    }
}

/// Cartesian product of parameter axes; the first axis varies slowest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub axes: Vec<(Param, Vec<f64>)>,
}

fn floats(v: &[usize]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

impl Grid {
    pub fn new(axes: Vec<(Param, Vec<f64>)>) -> Result<Self> {
        for (p, values) in &axes {
            if values.is_empty() {
                return Err(Error::Empty("grid axis"));
            }
            if *p == Param::Sparsity && values.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
                return Err(Error::Config("sparsity values must be positive integers".into()));
            }
        }
        Ok(Self { axes })
    }

    /// Default search grid for `kind`.
    pub fn standard(kind: LearnerKind) -> Self {
        let axes = match kind {
            LearnerKind::L1Rda => vec![
                (Param::Lambda, RDA_LAMBDAS.to_vec()),
                (Param::Gamma, RDA_GAMMAS.to_vec()),
                (Param::Rho, RDA_RHOS.to_vec()),
            ],
            LearnerKind::AdaGrad => vec![
                (Param::Eta, ADAGRAD_VALUES.to_vec()),
                (Param::Lambda, ADAGRAD_VALUES.to_vec()),
            ],
            LearnerKind::Adam => vec![(Param::Alpha, ADAM_ALPHAS.to_vec())],
            LearnerKind::DaIht | LearnerKind::GraphDa => vec![
                (Param::Sparsity, floats(&SPARSITIES)),
                (Param::Gamma, RDA_GAMMAS.to_vec()),
            ],
            LearnerKind::StoIht | LearnerKind::GraphStoIht => vec![
                (Param::Sparsity, floats(&SPARSITIES)),
                (Param::Gamma, STEP_SIZES.to_vec()),
            ],
        };
        Self { axes }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn points(&self, base: &HyperParams) -> Vec<HyperParams> {
        let mut out = vec![*base];
        for (param, values) in &self.axes {
            out = out
                .iter()
                .flat_map(|h| {
                    values.iter().map(move |&v| {
                        let mut h = *h;
                        param.apply(&mut h, v);
                        h
                    })
                })
                .collect();
        }
        out
    }

    /// Replaces (or adds) one axis.
    pub fn with_axis(mut self, param: Param, values: Vec<f64>) -> Self {
        match self.axes.iter_mut().find(|(p, _)| *p == param) {
            Some(axis) => axis.1 = values,
            None => self.axes.push((param, values)),
        }
        self
    }

    /// `name=value` pairs of the grid parameters of `h`.
    pub fn describe(&self, h: &HyperParams) -> String {
        self.axes
            .iter()
            .map(|(p, _)| format!("{}={}", p.name(), p.get(h)))
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// Which side of the validation set a selection optimises.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Criterion {
    /// Validation accuracy of `w_T`.
    Accuracy,
    /// Negative validation mean squared error of `w_T`.
    NegativeMse,
}

impl Criterion {
    pub fn for_loss(loss: LossKind) -> Self {
        match loss {
            LossKind::Logistic => Criterion::Accuracy,
            LossKind::LeastSquares => Criterion::NegativeMse,
        }
    }

    fn score(self, w: &[f64], validate: &ValidationSplit) -> f64 {
        let s = match self {
            Criterion::Accuracy => accuracy(w, &validate.0),
            Criterion::NegativeMse => -mean_squared_error(w, &validate.0),
        };
        if s.is_nan() {
            f64::NEG_INFINITY
        } else {
            s
        }
    }
}

/// The grid point chosen for one training-prefix length.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub t: u64,
    pub grid_index: usize,
    pub hyper: HyperParams,
    pub validation_score: f64,
    pub w: DenseVector,
    pub w_bar: DenseVector,
    /// Online misses over the first `t` training samples.
    pub online_misses: u64,
    /// Wall-clock seconds of the full training pass of the chosen point.
    pub seconds: f64,
}

fn better(a: Selection, b: Selection) -> Selection {
    match a.validation_score.total_cmp(&b.validation_score) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal if a.grid_index <= b.grid_index => a,
        _ => b,
    }
}

/// Trains one pass per grid point and, for every length in `checkpoints`, picks
/// the point whose prefix model scores best on the validation split. Ties go
/// to the earlier grid point. Test data is not an input.
#[allow(clippy::too_many_arguments)]
pub fn tune(
    kind: LearnerKind,
    points: &[HyperParams],
    graph: Option<&Graph>,
    train: &TrainSplit,
    validate: &ValidationSplit,
    loss: LossKind,
    criterion: Criterion,
    checkpoints: &[u64],
) -> Result<Vec<Selection>> {
    if points.is_empty() {
        return Err(Error::Empty("hyperparameter grid"));
    }
    let n = train.0.len() as u64;
    if let Some(&t) = checkpoints.iter().find(|&&t| t == 0 || t > n) {
        return Err(Error::invalid(format!("checkpoint {t} outside 1..={n}")));
    }
    let p = train.0.first().map_or(0, |s| s.x.len());
    let per_point = |(index, h): (usize, &HyperParams)| -> Result<Vec<Selection>> {
        let start = std::time::Instant::now();
        let mut learner = Learner::new(kind, *h, p, graph)?;
        let traj = run_stream(&mut learner, &train.0, loss, checkpoints)?;
        let seconds = start.elapsed().as_secs_f64();
        Ok(traj
            .checkpoints
            .into_iter()
            .map(|c| Selection {
                t: c.t,
                grid_index: index,
                hyper: *h,
                validation_score: criterion.score(&c.w, validate),
                online_misses: traj.misses.get(c.t as usize - 1).copied().unwrap_or(0),
                seconds,
                w: c.w,
                w_bar: c.w_bar,
            })
            .collect())
    };
    points
        .par_iter()
        .enumerate()
        .map(per_point)
        .try_reduce_with(|a, b| Ok(a.into_iter().zip(b).map(|(x, y)| better(x, y)).collect()))
        .expect("grid is nonempty")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Benchmark,
    Images,
}

/// Everything needed to run an experiment; parsed from a flat `key = value` file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetKind,
    pub benchmark: BenchmarkSpec,
    pub learners: Vec<LearnerKind>,
    pub grids: BTreeMap<LearnerKind, Grid>,
    pub trials: usize,
    pub seed: u64,
    /// Training-prefix lengths to report; empty means the full stream.
    pub checkpoints: Vec<u64>,
    pub base: HyperParams,
    /// Overrides the loss-dependent default.
    pub criterion: Option<Criterion>,
    pub strategy: WStarStrategy,
    pub idx_path: Option<PathBuf>,
    pub image_ids: Vec<usize>,
    pub image_threshold: f64,
    pub output: Option<PathBuf>,
    pub snapshot_dir: Option<PathBuf>,
    pub threads: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let learners = LearnerKind::ALL.to_vec();
        let grids = learners.iter().map(|&k| (k, Grid::standard(k))).collect();
        Self {
            dataset: DatasetKind::Benchmark,
            benchmark: BenchmarkSpec::default(),
            learners,
            grids,
            trials: 20,
            seed: 0,
            checkpoints: Vec::new(),
            base: HyperParams::default(),
            criterion: None,
            strategy: WStarStrategy::Constant,
            idx_path: None,
            image_ids: (0..10).collect(),
            image_threshold: 0.0,
            output: None,
            snapshot_dir: None,
            threads: None,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    v.parse()
        .map_err(|e| Error::Config(format!("{key}: cannot parse {v:?}: {e}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(key, s))
        .collect()
}

/// Inclusive range `a..b:step` or a comma list.
fn parse_values(key: &str, v: &str) -> Result<Vec<f64>> {
    if let Some((range, step)) = v.split_once(':') {
        let (a, b) = range
            .split_once("..")
            .ok_or_else(|| Error::Config(format!("{key}: expected `a..b:step`")))?;
        let (a, b, step): (f64, f64, f64) =
            (parse_num(key, a.trim())?, parse_num(key, b.trim())?, parse_num(key, step.trim())?);
        if step <= 0.0 {
            return Err(Error::Config(format!("{key}: step must be positive")));
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| a + step * i as f64).collect());
    }
    parse_list(key, v)
}

impl ExperimentConfig {
    /// Applies `key = value` lines on top of `self`. `#` starts a comment.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(&std::fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, v: &str) -> Result<()> {
        let b = &mut self.benchmark;
        match key {
            "dataset" => {
                self.dataset = match v {
                    "benchmark" => DatasetKind::Benchmark,
                    "images" | "mnist" => DatasetKind::Images,
                    _ => return Err(Error::Config(format!("unknown dataset {v:?}"))),
                }
            }
            "rows" => b.rows = parse_num(key, v)?,
            "cols" => b.cols = parse_num(key, v)?,
            "subgraph_size" => b.subgraph_size = parse_num(key, v)?,
            "mu" => b.mu = parse_num(key, v)?,
            "n_train" => b.n_train = parse_num(key, v)?,
            "n_validate" => b.n_validate = parse_num(key, v)?,
            "n_test" => b.n_test = parse_num(key, v)?,
            "trials" => self.trials = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "checkpoints" => {
                self.checkpoints = parse_values(key, v)?.into_iter().map(|x| x as u64).collect()
            }
            "learners" => {
                self.learners = v
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<_>>()?
            }
            "components" => self.base.components = parse_num(key, v)?,
            "budget" => self.base.budget = Some(parse_num(key, v)?),
            "omega" => self.base.omega = parse_num(key, v)?,
            "max_iter" => self.base.max_iter = parse_num(key, v)?,
            "delta" => self.base.delta = parse_num(key, v)?,
            "head_lower" => {
                self.base.head_lower = match v {
                    "half" => HeadLowerBound::HalfNodes,
                    "sparsity" => HeadLowerBound::Sparsity,
                    n => HeadLowerBound::Fixed(parse_num(key, n)?),
                }
            }
            "dual_mode" => {
                self.base.dual_mode = match v {
                    "averaged" => DualMode::Averaged,
                    "sum" => DualMode::Sum,
                    _ => return Err(Error::Config(format!("unknown dual_mode {v:?}"))),
                }
            }
            "criterion" => {
                self.criterion = Some(match v {
                    "accuracy" => Criterion::Accuracy,
                    "mse" => Criterion::NegativeMse,
                    _ => return Err(Error::Config(format!("unknown criterion {v:?}"))),
                })
            }
            "strategy" => self.strategy = v.parse()?,
            "idx_path" => self.idx_path = Some(v.into()),
            "image_ids" => self.image_ids = parse_list(key, v)?,
            "image_threshold" => self.image_threshold = parse_num(key, v)?,
            "output" => self.output = Some(v.into()),
            "snapshot_dir" => self.snapshot_dir = Some(v.into()),
            "threads" => self.threads = Some(parse_num(key, v)?),
            _ => {
                // grid.<learner>.<param> = values
                let parts: Vec<&str> = key.split('.').collect();
                let ["grid", learner, param] = parts.as_slice() else {
                    return Err(Error::Config(format!("unknown key {key:?}")));
                };
                let kind: LearnerKind = learner.parse()?;
                let param = Param::parse(param)?;
                let values = parse_values(key, v)?;
                let grid = self.grids.remove(&kind).unwrap_or_else(|| Grid::standard(kind));
                self.grids.insert(kind, Grid::new(grid.with_axis(param, values).axes)?);
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::Config("trials must be >= 1".into()));
        }
        if self.learners.is_empty() {
            return Err(Error::Config("no learners listed".into()));
        }
        for kind in &self.learners {
            if self.grid(*kind).is_empty() {
                return Err(Error::Config(format!("empty grid for {kind}")));
            }
        }
        Ok(())
    }

    pub fn grid(&self, kind: LearnerKind) -> Grid {
        self.grids.get(&kind).cloned().unwrap_or_else(|| Grid::standard(kind))
    }

    /// Runs `f` inside a pool with the configured thread count.
    pub fn install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> Result<T> {
        match self.threads {
            Some(n) => {
                let pool = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                Ok(pool.install(f))
            }
            None => Ok(f()),
        }
    }

    fn trial_seed(&self, trial: usize) -> u64 {
        self.seed.wrapping_add(trial as u64)
    }
}

/// Test-set evaluation of one selected model.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub method: LearnerKind,
    pub trial: usize,
    /// Training samples seen.
    pub t: u64,
    /// Sweep coordinate (e.g. `mu` or fixed `s`), if any.
    pub sweep: Option<f64>,
    pub params: String,
    pub validation_score: f64,
    pub feature: FeatureReport,
    pub feature_bar: FeatureReport,
    /// Classification only.
    pub class: Option<ClassReport>,
    pub class_bar: Option<ClassReport>,
    pub online_misses: Option<u64>,
    /// Regression only.
    pub mse: Option<f64>,
    pub mse_bar: Option<f64>,
    /// Not written to CSV, which must be byte-reproducible.
    pub seconds: f64,
}

fn evaluate(
    kind: LearnerKind,
    trial: usize,
    sel: &Selection,
    grid: &Grid,
    data: &Dataset,
    loss: LossKind,
    sweep: Option<f64>,
) -> Result<ResultRow> {
    let test: &TestSplit = &data.test;
    let wstar = &data.truth.wstar;
    let class = |w: &[f64]| -> Result<ClassReport> {
        let (scores, labels) = score_samples(w, &test.0);
        classification_metrics(&scores, &labels)
    };
    let classification = loss == LossKind::Logistic;
    Ok(ResultRow {
        method: kind,
        trial,
        t: sel.t,
        sweep,
        params: grid.describe(&sel.hyper),
        validation_score: sel.validation_score,
        feature: feature_metrics(&sel.w, wstar, 0.0)?,
        feature_bar: feature_metrics(&sel.w_bar, wstar, 0.0)?,
        class: if classification { Some(class(&sel.w)?) } else { None },
        class_bar: if classification { Some(class(&sel.w_bar)?) } else { None },
        online_misses: classification.then_some(sel.online_misses),
        mse: (!classification).then(|| mean_squared_error(&sel.w, &test.0)),
        mse_bar: (!classification).then(|| mean_squared_error(&sel.w_bar, &test.0)),
        seconds: sel.seconds,
    })
}

fn dump_snapshots(dir: &Path, row: &ResultRow, sel: &Selection) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let stem = snapshot_stem(row);
    for (suffix, w) in [("w", &sel.w), ("wbar", &sel.w_bar)] {
        let file = std::fs::File::create(dir.join(format!("{stem}.{suffix}.txt")))?;
        write_snapshot(std::io::BufWriter::new(file), w, sel.t)?;
    }
    Ok(())
}

/// File stem under which the snapshots of `row` are written.
pub fn snapshot_stem(row: &ResultRow) -> String {
    let sweep = row.sweep.map_or(String::new(), |v| format!("-x{v}"));
    format!("{}-trial{}-t{}{}", row.method, row.trial, row.t, sweep)
}

/// Tunes and evaluates every learner on one dataset.
fn run_learners(
    cfg: &ExperimentConfig,
    trial: usize,
    graph: &Graph,
    data: &Dataset,
    loss: LossKind,
    sweep: Option<f64>,
) -> Result<Vec<ResultRow>> {
    let n = data.train.0.len() as u64;
    let checkpoints = if cfg.checkpoints.is_empty() {
        vec![n]
    } else {
        cfg.checkpoints.clone()
    };
    let mut rows = Vec::new();
    for &kind in &cfg.learners {
        let grid = cfg.grid(kind);
        let points = grid.points(&cfg.base);
        let graph = kind.needs_graph().then_some(graph);
        let selections = tune(
            kind,
            &points,
            graph,
            &data.train,
            &data.validate,
            loss,
            cfg.criterion.unwrap_or(Criterion::for_loss(loss)),
            &checkpoints,
        )?;
        for sel in &selections {
            let row = evaluate(kind, trial, sel, &grid, data, loss, sweep)?;
            if let Some(dir) = &cfg.snapshot_dir {
                dump_snapshots(dir, &row, sel)?;
            }
            rows.push(row);
        }
    }
    Ok(rows)
}

fn sort_rows(rows: &mut [ResultRow]) {
    rows.sort_by(|a, b| {
        a.sweep
            .unwrap_or(0.0)
            .total_cmp(&b.sweep.unwrap_or(0.0))
            .then(a.method.cmp(&b.method))
            .then(a.t.cmp(&b.t))
            .then(a.trial.cmp(&b.trial))
    });
}

/// Planted-subgraph classification: per trial a fresh dataset, grid tuning on
/// the validation split, then test evaluation of `w_T` and the average iterate.
pub fn run_benchmark_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    run_benchmark_at(cfg, None)
}

fn run_benchmark_at(cfg: &ExperimentConfig, sweep: Option<f64>) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let trial_rows = cfg.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|trial| {
                let spec = BenchmarkSpec { seed: cfg.trial_seed(trial), ..cfg.benchmark.clone() };
                let (graph, data) = benchmark_dataset(&spec)?;
                run_learners(cfg, trial, &graph, &data, LossKind::Logistic, sweep)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut rows: Vec<ResultRow> = trial_rows.into_iter().flatten().collect();
    sort_rows(&mut rows);
    Ok(rows)
}

/// Benchmark experiment with the sparsity of every sparsity-tuned learner fixed
/// to each value in turn; rows carry the value in `sweep`.
pub fn run_sparsity_sweep(cfg: &ExperimentConfig, sparsities: &[usize]) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &s in sparsities {
        let mut c = cfg.clone();
        for kind in c.learners.clone() {
            let grid = c.grid(kind);
            if grid.axes.iter().any(|(p, _)| *p == Param::Sparsity) {
                c.grids.insert(kind, grid.with_axis(Param::Sparsity, vec![s as f64]));
            }
        }
        rows.extend(run_benchmark_at(&c, Some(s as f64))?);
    }
    Ok(rows)
}

/// Collapses sweep rows to one row per (method, trial, t): the highest
/// validation score, earliest sweep value on ties. Applied to a sparsity sweep
/// this equals tuning over the grid with the sparsity axis first.
pub fn best_over_sweep(rows: &[ResultRow]) -> Vec<ResultRow> {
    let mut best: Vec<ResultRow> = Vec::new();
    for r in rows {
        let slot = best
            .iter_mut()
            .find(|b| (b.method, b.trial, b.t) == (r.method, r.trial, r.t));
        match slot {
            None => best.push(ResultRow { sweep: None, ..r.clone() }),
            Some(b) if r.validation_score > b.validation_score => {
                *b = ResultRow { sweep: None, ..r.clone() }
            }
            _ => {}
        }
    }
    sort_rows(&mut best);
    best
}

/// Accuracy against training-set size, from nested prefixes of one stream.
pub fn run_sample_sweep(cfg: &ExperimentConfig, sizes: &[u64]) -> Result<Vec<ResultRow>> {
    let mut c = cfg.clone();
    c.checkpoints = sizes.to_vec();
    c.benchmark.n_train = sizes.iter().copied().max().unwrap_or(0) as usize;
    run_benchmark_experiment(&c)
}

/// Benchmark experiment at each signal strength.
pub fn run_mu_sweep(cfg: &ExperimentConfig, mus: &[f64]) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::new();
    for &mu in mus {
        let mut c = cfg.clone();
        c.benchmark.mu = mu;
        rows.extend(run_benchmark_at(&c, Some(mu))?);
    }
    Ok(rows)
}

/// Images for the regression experiment: IDX file if configured, else the
/// synthetic digits.
pub fn load_images(cfg: &ExperimentConfig) -> Result<Vec<Image>> {
    let all = match &cfg.idx_path {
        Some(path) => match load_idx(path)? {
            IdxData::Images(images) => images,
            IdxData::Labels(_) => {
                return Err(Error::Config(format!("{} holds labels, not images", path.display())))
            }
        },
        None => synthetic_digits(),
    };
    cfg.image_ids
        .iter()
        .map(|&i| {
            all.get(i)
                .cloned()
                .ok_or_else(|| Error::Config(format!("image id {i} out of range ({})", all.len())))
        })
        .collect()
}

/// Noiseless linear regression with `w*` supported on an image; trial `k` uses
/// image `k mod #images`. Rows are reported at each checkpoint `n`.
pub fn run_mnist_experiment(cfg: &ExperimentConfig, sizes: &[u64]) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let images = load_images(cfg)?;
    if images.is_empty() {
        return Err(Error::Empty("image list"));
    }
    let mut c = cfg.clone();
    c.checkpoints = sizes.to_vec();
    let n_train = sizes.iter().copied().max().unwrap_or(0) as usize;
    let trial_rows = c.install(|| {
        (0..c.trials)
            .into_par_iter()
            .map(|trial| {
                let image = &images[trial % images.len()];
                let graph = build_grid_graph(image.rows, image.cols, 1.0);
                let p = graph.node_count();
                let seed = c.trial_seed(trial);
                let mask = image_mask(image, c.image_threshold);
                let truth = make_wstar(
                    c.strategy,
                    p,
                    &mask,
                    Some(&image.intensities()),
                    &mut stream_rng(seed, 5),
                )?;
                let data = regression_dataset(
                    truth,
                    n_train,
                    c.benchmark.n_validate,
                    c.benchmark.n_test,
                    seed,
                );
                run_learners(&c, trial, &graph, &data, LossKind::LeastSquares, None)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let mut rows: Vec<ResultRow> = trial_rows.into_iter().flatten().collect();
    sort_rows(&mut rows);
    Ok(rows)
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or(String::new(), |v| v.to_string())
}

fn num(v: f64) -> String {
    format!("{v:.6}")
}

pub const CLASSIFICATION_COLUMNS: [&str; 21] = [
    "method", "trial", "t", "sweep", "params", "validation", "pre", "rec", "f1", "auc_w",
    "auc_wbar", "acc_w", "acc_wbar", "miss_w", "miss_wbar", "nr_w", "nr_wbar", "online_miss",
    "pre_wbar", "rec_wbar", "f1_wbar",
];

pub const REGRESSION_COLUMNS: [&str; 14] = [
    "method", "trial", "t", "sweep", "params", "validation", "pre", "rec", "f1", "nr_w",
    "nr_wbar", "mse_w", "mse_wbar", "f1_wbar",
];

/// One CSV row per (method, trial, t, sweep).
pub fn write_rows_csv(out: impl std::io::Write, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let classification = rows.first().is_none_or(|r| r.class.is_some());
    if classification {
        w.write_record(CLASSIFICATION_COLUMNS)?;
    } else {
        w.write_record(REGRESSION_COLUMNS)?;
    }
    for r in rows {
        let head = [
            r.method.to_string(),
            r.trial.to_string(),
            r.t.to_string(),
            opt(r.sweep),
            r.params.clone(),
            num(r.validation_score),
            num(r.feature.precision),
            num(r.feature.recall),
            num(r.feature.f1),
        ];
        let mut rec: Vec<String> = head.to_vec();
        match (&r.class, &r.class_bar) {
            (Some(c), Some(cb)) => rec.extend([
                opt(c.auc.map(num)),
                opt(cb.auc.map(num)),
                num(c.accuracy),
                num(cb.accuracy),
                c.miss.to_string(),
                cb.miss.to_string(),
                num(r.feature.nonzero_ratio),
                num(r.feature_bar.nonzero_ratio),
                opt(r.online_misses),
                num(r.feature_bar.precision),
                num(r.feature_bar.recall),
                num(r.feature_bar.f1),
            ]),
            _ => rec.extend([
                num(r.feature.nonzero_ratio),
                num(r.feature_bar.nonzero_ratio),
                opt(r.mse.map(num)),
                opt(r.mse_bar.map(num)),
                num(r.feature_bar.f1),
            ]),
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// (sweep value, samples seen, method).
pub type GroupKey = (Option<f64>, u64, LearnerKind);

/// Rows grouped by (sweep, t, method) in emission order.
pub fn group_rows(rows: &[ResultRow]) -> Vec<(GroupKey, Vec<&ResultRow>)> {
    let mut groups: Vec<(GroupKey, Vec<&ResultRow>)> = Vec::new();
    for r in rows {
        let key = (r.sweep, r.t, r.method);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, g)) => g.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
}

/// Mean of `f` over the rows of one group.
pub fn mean_of(rows: &[&ResultRow], f: impl Fn(&ResultRow) -> f64) -> f64 {
    rows.iter().map(|r| f(r)).sum::<f64>() / rows.len().max(1) as f64
}

/// Table-shaped summary: `mean±std` per metric for every group.
pub fn write_summary_csv(out: impl std::io::Write, rows: &[ResultRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let classification = rows.first().is_none_or(|r| r.class.is_some());
    type Field = (&'static str, fn(&ResultRow) -> f64);
    let mut fields: Vec<Field> = vec![
        ("pre", |r| r.feature.precision),
        ("rec", |r| r.feature.recall),
        ("f1", |r| r.feature.f1),
    ];
    if classification {
        fields.extend::<[Field; 8]>([
            ("auc_w", |r| r.class.and_then(|c| c.auc).unwrap_or(f64::NAN)),
            ("auc_wbar", |r| r.class_bar.and_then(|c| c.auc).unwrap_or(f64::NAN)),
            ("acc_w", |r| r.class.map_or(f64::NAN, |c| c.accuracy)),
            ("acc_wbar", |r| r.class_bar.map_or(f64::NAN, |c| c.accuracy)),
            ("miss_w", |r| r.class.map_or(f64::NAN, |c| c.miss as f64)),
            ("miss_wbar", |r| r.class_bar.map_or(f64::NAN, |c| c.miss as f64)),
            ("nr_w", |r| r.feature.nonzero_ratio),
            ("nr_wbar", |r| r.feature_bar.nonzero_ratio),
        ]);
        fields.push(("online_miss", |r| r.online_misses.unwrap_or(0) as f64));
    } else {
        fields.extend::<[Field; 4]>([
            ("nr_w", |r| r.feature.nonzero_ratio),
            ("nr_wbar", |r| r.feature_bar.nonzero_ratio),
            ("mse_w", |r| r.mse.unwrap_or(f64::NAN)),
            ("mse_wbar", |r| r.mse_bar.unwrap_or(f64::NAN)),
        ]);
    }
    let mut header = vec!["method".to_string(), "t".into(), "sweep".into(), "trials".into()];
    header.extend(fields.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header)?;
    for ((sweep, t, method), group) in group_rows(rows) {
        let mut rec = vec![method.to_string(), t.to_string(), opt(sweep), group.len().to_string()];
        for (_, f) in &fields {
            let values: Vec<f64> = group.iter().map(|r| f(r)).collect();
            rec.push(Summary::of(&values)?.display());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Human-readable table of group means.
pub fn format_summary(rows: &[ResultRow]) -> String {
    let mut s = String::new();
    for ((sweep, t, method), g) in group_rows(rows) {
        let sweep = sweep.map_or(String::new(), |v| format!(" x={v}"));
        let _ = write!(s, "{method:<14} t={t}{sweep} f1={:.3}", mean_of(&g, |r| r.feature.f1));
        if g[0].class.is_some() {
            let _ = write!(
                s,
                " acc={:.3} nr={:.4}",
                mean_of(&g, |r| r.class.map_or(0.0, |c| c.accuracy)),
                mean_of(&g, |r| r.feature.nonzero_ratio)
            );
        } else {
            let _ = write!(s, " mse={:.4}", mean_of(&g, |r| r.mse.unwrap_or(0.0)));
        }
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::online::{read_snapshot, Sample};

    fn small_config() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(
            "rows = 6\ncols = 6\nsubgraph_size = 5\nmu = 1.0\n\
             n_train = 40\nn_validate = 30\nn_test = 30\ntrials = 2\n\
             learners = graph-da, da-iht, l1-rda, adam\n\
             grid.graph-da.s = 4,5\ngrid.graph-da.gamma = 1,10\n\
             grid.da-iht.s = 5\ngrid.l1-rda.lambda = 0.01,0.1\n\
             grid.l1-rda.gamma = 1\ngrid.l1-rda.rho = 0\n",
        )
        .unwrap();
        cfg
    }

    #[test]
    fn standard_grids() {
        assert_eq!(Grid::standard(LearnerKind::L1Rda).len(), 14 * 9 * 12);
        assert_eq!(Grid::standard(LearnerKind::AdaGrad).len(), 256);
        assert_eq!(Grid::standard(LearnerKind::Adam).len(), 8);
        assert_eq!(SPARSITIES.len(), 34);
        assert!(RDA_RHOS.contains(&0.000005));
        assert_eq!(image_sparsities().len(), 36);
        let grid = Grid::new(vec![(Param::Sparsity, vec![3.0, 4.0]), (Param::Gamma, vec![1.0, 2.0])])
            .unwrap();
        let pts = grid.points(&HyperParams::default());
        let pairs: Vec<(usize, f64)> = pts.iter().map(|h| (h.sparsity, h.gamma)).collect();
        assert_eq!(pairs, vec![(3, 1.0), (3, 2.0), (4, 1.0), (4, 2.0)]);
        assert_eq!(grid.describe(&pts[1]), "s=3;gamma=2");
        assert!(Grid::new(vec![(Param::Sparsity, vec![2.5])]).is_err());
        assert!(Grid::new(vec![(Param::Gamma, vec![])]).is_err());
    }

    #[test]
    fn config_parsing() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(
            "# comment\ntrials = 3\nseed=9\nmu = 0.5\ncheckpoints = 100..300:100\n\
             grid.graph-da.s = 20..30:5\nhead_lower = sparsity\nlearners = adam,graph-da\n",
        )
        .unwrap();
        assert_eq!((cfg.trials, cfg.seed, cfg.benchmark.mu), (3, 9, 0.5));
        assert_eq!(cfg.checkpoints, vec![100, 200, 300]);
        assert_eq!(cfg.grid(LearnerKind::GraphDa).axes[0].1, vec![20.0, 25.0, 30.0]);
        assert_eq!(cfg.base.head_lower, HeadLowerBound::Sparsity);
        assert_eq!(cfg.learners, vec![LearnerKind::Adam, LearnerKind::GraphDa]);
        for bad in ["trials", "nope = 1", "trials = x", "grid.adam.zeta = 1", "grid.sgd.alpha = 1"] {
            assert!(ExperimentConfig::default().apply_text(bad).is_err(), "{bad}");
        }
        let mut zero = ExperimentConfig::default();
        zero.trials = 0;
        assert!(zero.validate().is_err());
    }

    fn toy_splits(n: usize, seed: u64) -> (TrainSplit, ValidationSplit) {
        let cfg = small_config();
        let spec = BenchmarkSpec { seed, n_train: n, ..cfg.benchmark };
        let (_, d) = benchmark_dataset(&spec).unwrap();
        (d.train, d.validate)
    }

    #[test]
    fn singleton_grid_is_chosen() {
        let (train, validate) = toy_splits(20, 1);
        let h = HyperParams { sparsity: 3, ..HyperParams::default() };
        let sel = tune(
            LearnerKind::DaIht,
            &[h],
            None,
            &train,
            &validate,
            LossKind::Logistic,
            Criterion::Accuracy,
            &[20],
        )
        .unwrap();
        assert_eq!(sel.len(), 1);
        assert_eq!(sel[0].hyper, h);
        assert!(tune(LearnerKind::DaIht, &[], None, &train, &validate, LossKind::Logistic, Criterion::Accuracy, &[20]).is_err());
        assert!(tune(LearnerKind::DaIht, &[h], None, &train, &validate, LossKind::Logistic, Criterion::Accuracy, &[21]).is_err());
    }

    #[test]
    fn ties_go_to_first_grid_point() {
        let (train, validate) = toy_splits(10, 2);
        // gamma only rescales DA-IHT iterates, so validation accuracy ties
        let points: Vec<HyperParams> = [5.0, 1.0, 2.0]
            .iter()
            .map(|&gamma| HyperParams { sparsity: 4, gamma, ..HyperParams::default() })
            .collect();
        let sel = tune(
            LearnerKind::DaIht,
            &points,
            None,
            &train,
            &validate,
            LossKind::Logistic,
            Criterion::Accuracy,
            &[1, 10],
        )
        .unwrap();
        assert_eq!(sel[0].grid_index, 0);
        assert_eq!(sel[0].hyper.gamma, 5.0);
    }

    #[test]
    fn tuning_never_reads_test_data() {
        let cfg = small_config();
        let spec = BenchmarkSpec { seed: 4, ..cfg.benchmark.clone() };
        let (graph, clean) = benchmark_dataset(&spec).unwrap();
        let mut poisoned = clean.clone();
        // a test split of the wrong dimension would make any read fail
        poisoned.test = TestSplit(vec![Sample::new(vec![f64::NAN], 1.0)]);
        let a = run_learners(&cfg, 0, &graph, &clean, LossKind::Logistic, None).unwrap();
        for kind in &cfg.learners {
            let grid = cfg.grid(*kind);
            let points = grid.points(&cfg.base);
            let g = kind.needs_graph().then_some(&graph);
            let sel = tune(*kind, &points, g, &poisoned.train, &poisoned.validate, LossKind::Logistic, Criterion::Accuracy, &[40]).unwrap();
            let row = a.iter().find(|r| r.method == *kind).unwrap();
            assert_eq!(grid.describe(&sel[0].hyper), row.params);
        }
    }

    #[test]
    fn output_is_independent_of_thread_count() {
        let mut cfg = small_config();
        let mut outputs = Vec::new();
        for threads in [1, 3] {
            cfg.threads = Some(threads);
            let rows = run_benchmark_experiment(&cfg).unwrap();
            let mut buf = Vec::new();
            write_rows_csv(&mut buf, &rows).unwrap();
            write_summary_csv(&mut buf, &rows).unwrap();
            outputs.push(buf);
        }
        assert_eq!(outputs[0], outputs[1]);
        let text = String::from_utf8(outputs.pop().unwrap()).unwrap();
        assert!(text.starts_with(&CLASSIFICATION_COLUMNS.join(",")));
        assert_eq!(text.lines().filter(|l| l.starts_with("graph-da,0,")).count(), 1);
    }

    #[test]
    fn snapshots_reproduce_reported_metrics() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small_config();
        cfg.trials = 1;
        cfg.snapshot_dir = Some(dir.path().to_path_buf());
        let rows = run_benchmark_experiment(&cfg).unwrap();
        let spec = BenchmarkSpec { seed: cfg.trial_seed(0), ..cfg.benchmark.clone() };
        let (_, data) = benchmark_dataset(&spec).unwrap();
        for row in &rows {
            let stem = snapshot_stem(row);
            let text = std::fs::read_to_string(dir.path().join(format!("{stem}.w.txt"))).unwrap();
            let (w, t) = read_snapshot(&text).unwrap();
            assert_eq!(t, row.t);
            assert_eq!(feature_metrics(&w, &data.truth.wstar, 0.0).unwrap(), row.feature);
            let (scores, labels) = score_samples(&w, &data.test.0);
            assert_eq!(Some(classification_metrics(&scores, &labels).unwrap()), row.class);
        }
    }

    #[test]
    fn sweeps_have_expected_shape() {
        let mut cfg = small_config();
        cfg.trials = 1;
        cfg.learners = vec![LearnerKind::DaIht, LearnerKind::Adam];
        let rows = run_sparsity_sweep(&cfg, &[3, 5]).unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows.iter().filter(|r| r.method == LearnerKind::DaIht).all(|r| r.params.starts_with(&format!("s={}", r.sweep.unwrap()))));
        let rows = run_sample_sweep(&cfg, &[10, 20, 30]).unwrap();
        assert_eq!(rows.iter().map(|r| r.t).collect::<Vec<_>>(), vec![10, 20, 30, 10, 20, 30]);
        let rows = run_mu_sweep(&cfg, &[0.0, 2.0]).unwrap();
        assert_eq!(rows.len(), 4);
        for r in &rows {
            let acc = r.class.unwrap().accuracy;
            assert!((0.0..=1.0).contains(&acc));
        }
    }

    #[test]
    fn sweep_collapse_equals_grid_tuning() {
        let mut cfg = small_config();
        cfg.learners = vec![LearnerKind::GraphDa, LearnerKind::DaIht];
        cfg.grids.insert(LearnerKind::DaIht, Grid::standard(LearnerKind::DaIht).with_axis(Param::Sparsity, vec![3.0, 4.0, 5.0, 6.0]));
        let sweep = run_sparsity_sweep(&cfg, &[3, 4, 5, 6]).unwrap();
        let mut direct = cfg.clone();
        direct.grids.insert(LearnerKind::GraphDa, cfg.grid(LearnerKind::GraphDa).with_axis(Param::Sparsity, vec![3.0, 4.0, 5.0, 6.0]));
        let tuned = run_benchmark_experiment(&direct).unwrap();
        let csv = |rows: &[ResultRow]| {
            let mut buf = Vec::new();
            write_rows_csv(&mut buf, rows).unwrap();
            String::from_utf8(buf).unwrap()
        };
        assert_eq!(csv(&best_over_sweep(&sweep)), csv(&tuned));
    }

    #[test]
    fn image_regression_runs() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text(
            "dataset = images\nlearners = da-iht, l1-rda\ntrials = 2\nimage_ids = 1, 7\n\
             n_validate = 20\nn_test = 20\ngrid.da-iht.s = 30\ngrid.da-iht.gamma = 10\n\
             grid.l1-rda.lambda = 0.1\ngrid.l1-rda.gamma = 10\ngrid.l1-rda.rho = 0\n",
        )
        .unwrap();
        let rows = run_mnist_experiment(&cfg, &[20, 40]).unwrap();
        assert_eq!(rows.len(), 8);
        assert!(rows.iter().all(|r| r.class.is_none() && r.mse.is_some()));
        let mut buf = Vec::new();
        write_rows_csv(&mut buf, &rows).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with(&REGRESSION_COLUMNS.join(",")));
        cfg.image_ids = vec![10];
        assert!(run_mnist_experiment(&cfg, &[20]).is_err());
    }
}
