//! Losses and online learners: graph dual averaging and its baselines.
//!
//! Every learner consumes one sample per step. The dual-averaging family
//! (GraphDA, DA-IHT, l1-RDA) keeps the running gradient sum and rebuilds the
//! iterate from it; the stochastic family (StoIHT, GraphStoIHT, AdaGrad, Adam)
//! updates the iterate in place.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::graph::{dot, DenseVector, Graph};
use crate::projection::{
    exact_top_s, HeadLowerBound, ProjectionConfig, Projector, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE,
};

/// One labelled observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: DenseVector,
    pub y: f64,
}

impl Sample {
    pub fn new(x: impl Into<DenseVector>, y: f64) -> Self {
        Self { x: x.into(), y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LossKind {
    Logistic,
    LeastSquares,
}

impl LossKind {
    pub fn loss_grad(self, w: &[f64], sample: &Sample) -> Result<(f64, DenseVector)> {
        match self {
            LossKind::Logistic => logistic_loss_grad(w, sample),
            LossKind::LeastSquares => least_squares_loss_grad(w, sample),
        }
    }
}

fn check_dim(w: &[f64], sample: &Sample) -> Result<()> {
    if w.len() != sample.x.len() {
        return Err(Error::invalid(format!(
            "model has {} coordinates, sample has {}",
            w.len(),
            sample.x.len()
        )));
    }
    Ok(())
}

/// `log(1 + exp(z))` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic loss `log(1 + exp(-y <w, x>))` and its gradient; `y` must be ±1.
pub fn logistic_loss_grad(w: &[f64], sample: &Sample) -> Result<(f64, DenseVector)> {
    check_dim(w, sample)?;
    let y = sample.y;
    if y != 1.0 && y != -1.0 {
        return Err(Error::invalid(format!("logistic label must be +1 or -1, got {y}")));
    }
    let margin = y * dot(w, &sample.x);
    let coef = -y * sigmoid(-margin);
    let grad = sample.x.iter().map(|&xi| coef * xi).collect();
    Ok((softplus(-margin), grad))
}

/// Squared residual `(y - <w, x>)^2` and its gradient.
pub fn least_squares_loss_grad(w: &[f64], sample: &Sample) -> Result<(f64, DenseVector)> {
    check_dim(w, sample)?;
    let r = sample.y - dot(w, &sample.x);
    let grad = sample.x.iter().map(|&xi| -2.0 * r * xi).collect();
    Ok((r * r, grad))
}

/// Prediction rule for miss counting: ties go to the negative class.
pub fn predict_label(w: &[f64], x: &[f64]) -> f64 {
    if dot(w, x) > 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LearnerKind {
    GraphDa,
    DaIht,
    L1Rda,
    AdaGrad,
    Adam,
    StoIht,
    GraphStoIht,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 7] = [
        LearnerKind::GraphDa,
        LearnerKind::DaIht,
        LearnerKind::L1Rda,
        LearnerKind::AdaGrad,
        LearnerKind::Adam,
        LearnerKind::StoIht,
        LearnerKind::GraphStoIht,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LearnerKind::GraphDa => "graph-da",
            LearnerKind::DaIht => "da-iht",
            LearnerKind::L1Rda => "l1-rda",
            LearnerKind::AdaGrad => "adagrad",
            LearnerKind::Adam => "adam",
            LearnerKind::StoIht => "sto-iht",
            LearnerKind::GraphStoIht => "graph-sto-iht",
        }
    }

    pub fn needs_graph(self) -> bool {
        matches!(self, LearnerKind::GraphDa | LearnerKind::GraphStoIht)
    }

    pub fn is_dual_averaging(self) -> bool {
        matches!(self, LearnerKind::GraphDa | LearnerKind::DaIht | LearnerKind::L1Rda)
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LearnerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        Ok(match key.as_str() {
            "graphda" => LearnerKind::GraphDa,
            "daiht" => LearnerKind::DaIht,
            "l1rda" | "rda" => LearnerKind::L1Rda,
            "adagrad" => LearnerKind::AdaGrad,
            "adam" => LearnerKind::Adam,
            "stoiht" => LearnerKind::StoIht,
            "graphstoiht" => LearnerKind::GraphStoIht,
            _ => return Err(Error::invalid(format!("unknown learner {s:?}"))),
        })
    }
}

/// How the dual-averaging learners turn the gradient sum into a search point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DualMode {
    /// `sum / (t + 1)`.
    #[default]
    Averaged,
    /// The raw sum.
    Sum,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperParams {
    pub gamma: f64,
    pub lambda: f64,
    pub rho: f64,
    pub eta: f64,
    /// AdaGrad's diagonal offset.
    pub delta: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub sparsity: usize,
    pub components: usize,
    /// Forest cost bound of the model; `None` means `s - g`.
    pub budget: Option<f64>,
    pub omega: f64,
    pub max_iter: usize,
    pub head_lower: HeadLowerBound,
    pub dual_mode: DualMode,
}

impl Default for HyperParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            lambda: 0.0,
            rho: 0.0,
            eta: 1.0,
            delta: 1e-8,
            alpha: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            sparsity: 1,
            components: 1,
            budget: None,
            omega: DEFAULT_TOLERANCE,
            max_iter: DEFAULT_MAX_ITER,
            head_lower: HeadLowerBound::HalfNodes,
            dual_mode: DualMode::Averaged,
        }
    }
}

impl HyperParams {
    pub fn budget(&self) -> f64 {
        self.budget
            .unwrap_or(self.sparsity.saturating_sub(self.components) as f64)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("gamma", self.gamma),
            ("eta", self.eta),
            ("delta", self.delta),
            ("alpha", self.alpha),
            ("epsilon", self.epsilon),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("lambda", self.lambda), ("rho", self.rho), ("omega", self.omega)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be nonnegative, got {v}")));
            }
        }
        for (name, v) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&v) {
                return Err(Error::invalid(format!("{name} must lie in [0, 1), got {v}")));
            }
        }
        if self.sparsity == 0 || self.components == 0 || self.components > self.sparsity {
            return Err(Error::invalid(format!(
                "need 1 <= g <= s, got s = {}, g = {}",
                self.sparsity, self.components
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::invalid("max_iter must be >= 1"));
        }
        Ok(())
    }

    pub fn head_config(&self, p: usize) -> Result<ProjectionConfig> {
        ProjectionConfig::head(
            p,
            self.sparsity,
            self.components,
            self.omega,
            self.max_iter,
            self.head_lower,
        )
    }

    pub fn tail_config(&self, p: usize) -> Result<ProjectionConfig> {
        ProjectionConfig::tail(p, self.sparsity, self.components, self.omega, self.max_iter)
    }
}

/// Mutable per-stream state shared by all learners.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnerState {
    pub w: DenseVector,
    /// Sum of all gradients consumed so far.
    pub dual_sum: DenseVector,
    /// Gradients consumed so far.
    pub t: u64,
    /// AdaGrad squared-gradient sums, or Adam's first moment.
    pub aux1: DenseVector,
    /// Adam's second moment.
    pub aux2: DenseVector,
    /// Sum of the iterates after each step.
    pub running_sum_w: DenseVector,
}

impl LearnerState {
    pub fn new(p: usize) -> Self {
        Self {
            w: DenseVector::zeros(p),
            dual_sum: DenseVector::zeros(p),
            t: 0,
            aux1: DenseVector::zeros(p),
            aux2: DenseVector::zeros(p),
            running_sum_w: DenseVector::zeros(p),
        }
    }

    pub fn dim(&self) -> usize {
        self.w.len()
    }

    /// Average of the iterates produced so far (zero before the first step).
    pub fn average(&self) -> DenseVector {
        if self.t == 0 {
            return DenseVector::zeros(self.dim());
        }
        let n = self.t as f64;
        self.running_sum_w.iter().map(|v| v / n).collect()
    }

    fn check(&self, grad: &[f64]) -> Result<()> {
        if grad.len() != self.dim() {
            return Err(Error::invalid(format!(
                "gradient has {} coordinates, state has {}",
                grad.len(),
                self.dim()
            )));
        }
        Ok(())
    }

    fn accumulate(&mut self, grad: &[f64]) {
        for (s, g) in self.dual_sum.iter_mut().zip(grad) {
            *s += g;
        }
    }

    fn dual_point(&self, mode: DualMode) -> Vec<f64> {
        match mode {
            DualMode::Averaged => {
                let n = (self.t + 1) as f64;
                self.dual_sum.iter().map(|v| v / n).collect()
            }
            DualMode::Sum => self.dual_sum.to_vec(),
        }
    }

    fn finish(&mut self) {
        self.t += 1;
        for (s, w) in self.running_sum_w.iter_mut().zip(self.w.iter()) {
            *s += w;
        }
    }
}

fn set_from_support(w: &mut DenseVector, values: &[f64], support: &crate::graph::Support) {
    w.iter_mut().for_each(|v| *v = 0.0);
    for &i in support.indices() {
        w[i] = values[i];
    }
}

/// GraphDA: head-project the averaged gradient, then tail-project `-(sqrt t / gamma) b`.
#[allow(clippy::too_many_arguments)]
pub fn graphda_step(
    state: &mut LearnerState,
    grad: &[f64],
    graph: &Graph,
    head: &ProjectionConfig,
    tail: &ProjectionConfig,
    gamma: f64,
    mode: DualMode,
    projector: &mut Projector,
) -> Result<()> {
    state.check(grad)?;
    state.accumulate(grad);
    let scale = -(state.t as f64).sqrt() / gamma;
    if scale == 0.0 {
        // the tail projection of the zero vector is empty
        state.w.iter_mut().for_each(|v| *v = 0.0);
    } else {
        let avg = state.dual_point(mode);
        let (_, b) = projector.model_project(&avg, graph, head)?;
        let z: Vec<f64> = b.iter().map(|v| scale * v).collect();
        let support = projector.model_support(&z, graph, tail)?;
        set_from_support(&mut state.w, &z, &support);
    }
    state.finish();
    Ok(())
}

/// DA-IHT: GraphDA with both projections replaced by exact top-`s` selection.
pub fn da_iht_step(
    state: &mut LearnerState,
    grad: &[f64],
    s: usize,
    gamma: f64,
    mode: DualMode,
) -> Result<()> {
    state.check(grad)?;
    state.accumulate(grad);
    let scale = -(state.t as f64).sqrt() / gamma;
    let avg = state.dual_point(mode);
    // Top-s of the head output is top-s of the average itself.
    let support = exact_top_s(&avg, s);
    let z: Vec<f64> = avg.iter().map(|v| scale * v).collect();
    set_from_support(&mut state.w, &z, &support);
    if scale == 0.0 {
        state.w.iter_mut().for_each(|v| *v = 0.0);
    }
    state.finish();
    Ok(())
}

/// Enhanced l1-RDA with threshold `lambda + gamma rho / sqrt t`.
pub fn l1_rda_step(
    state: &mut LearnerState,
    grad: &[f64],
    lambda: f64,
    gamma: f64,
    rho: f64,
) -> Result<()> {
    state.check(grad)?;
    state.accumulate(grad);
    state.t += 1;
    let t = state.t as f64;
    let threshold = lambda + gamma * rho / t.sqrt();
    let scale = -t.sqrt() / gamma;
    for (w, s) in state.w.iter_mut().zip(state.dual_sum.iter()) {
        let g = s / t;
        *w = if g.abs() <= threshold {
            0.0
        } else {
            scale * (g - threshold * g.signum())
        };
    }
    state.t -= 1;
    state.finish();
    Ok(())
}

/// Diagonal AdaGrad with l1 soft-thresholding.
pub fn adagrad_step(
    state: &mut LearnerState,
    grad: &[f64],
    eta: f64,
    lambda: f64,
    delta: f64,
) -> Result<()> {
    state.check(grad)?;
    state.accumulate(grad);
    for i in 0..grad.len() {
        state.aux1[i] += grad[i] * grad[i];
        let h = delta + state.aux1[i].sqrt();
        let u = state.w[i] - eta / h * grad[i];
        state.w[i] = u.signum() * (u.abs() - eta * lambda / h).max(0.0);
    }
    state.finish();
    Ok(())
}

/// Bias-corrected Adam.
pub fn adam_step(
    state: &mut LearnerState,
    grad: &[f64],
    alpha: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
) -> Result<()> {
    state.check(grad)?;
    state.accumulate(grad);
    let k = (state.t + 1) as i32;
    let c1 = 1.0 - beta1.powi(k);
    let c2 = 1.0 - beta2.powi(k);
    for i in 0..grad.len() {
        let g = grad[i];
        state.aux1[i] = beta1 * state.aux1[i] + (1.0 - beta1) * g;
        state.aux2[i] = beta2 * state.aux2[i] + (1.0 - beta2) * g * g;
        let m = state.aux1[i] / c1;
        let v = state.aux2[i] / c2;
        state.w[i] -= alpha * m / (v.sqrt() + epsilon);
    }
    state.finish();
    Ok(())
}

/// StoIHT with block size one: a gradient step followed by hard thresholding.
pub fn stoiht_step(state: &mut LearnerState, grad: &[f64], s: usize, gamma: f64) -> Result<()> {
    state.check(grad)?;
    state.accumulate(grad);
    let z: Vec<f64> = state.w.iter().zip(grad).map(|(w, g)| w - gamma * g).collect();
    let support = exact_top_s(&z, s);
    set_from_support(&mut state.w, &z, &support);
    state.finish();
    Ok(())
}

/// GraphStoIHT: head-project the gradient, step, tail-project.
#[allow(clippy::too_many_arguments)]
pub fn graphstoiht_step(
    state: &mut LearnerState,
    grad: &[f64],
    graph: &Graph,
    head: &ProjectionConfig,
    tail: &ProjectionConfig,
    gamma: f64,
    projector: &mut Projector,
) -> Result<()> {
    state.check(grad)?;
    state.accumulate(grad);
    let (_, b) = projector.model_project(grad, graph, head)?;
    let z: Vec<f64> = state.w.iter().zip(b.iter()).map(|(w, b)| w - gamma * b).collect();
    let support = projector.model_support(&z, graph, tail)?;
    set_from_support(&mut state.w, &z, &support);
    state.finish();
    Ok(())
}

/// A learner bound to its hyperparameters and (for graph learners) a graph.
#[derive(Debug)]
pub struct Learner<'g> {
    kind: LearnerKind,
    hyper: HyperParams,
    graph: Option<&'g Graph>,
    head: Option<ProjectionConfig>,
    tail: Option<ProjectionConfig>,
    projector: Projector,
    pub state: LearnerState,
}

impl<'g> Learner<'g> {
    pub fn new(kind: LearnerKind, hyper: HyperParams, p: usize, graph: Option<&'g Graph>) -> Result<Self> {
        hyper.validate()?;
        let (mut head, mut tail) = (None, None);
        if kind.needs_graph() {
            let g = graph.ok_or_else(|| Error::invalid(format!("{kind} needs a graph")))?;
            if g.node_count() != p {
                return Err(Error::invalid(format!(
                    "graph has {} nodes, model has {p} coordinates",
                    g.node_count()
                )));
            }
            head = Some(hyper.head_config(p)?);
            tail = Some(hyper.tail_config(p)?);
        }
        Ok(Self {
            kind,
            hyper,
            graph,
            head,
            tail,
            projector: Projector::new(),
            state: LearnerState::new(p),
        })
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    pub fn step(&mut self, grad: &[f64]) -> Result<()> {
        let h = &self.hyper;
        let st = &mut self.state;
        match self.kind {
            LearnerKind::GraphDa => graphda_step(
                st,
                grad,
                self.graph.expect("checked in new"),
                self.head.as_ref().expect("checked in new"),
                self.tail.as_ref().expect("checked in new"),
                h.gamma,
                h.dual_mode,
                &mut self.projector,
            ),
            LearnerKind::DaIht => da_iht_step(st, grad, h.sparsity, h.gamma, h.dual_mode),
            LearnerKind::L1Rda => l1_rda_step(st, grad, h.lambda, h.gamma, h.rho),
            LearnerKind::AdaGrad => adagrad_step(st, grad, h.eta, h.lambda, h.delta),
            LearnerKind::Adam => adam_step(st, grad, h.alpha, h.beta1, h.beta2, h.epsilon),
            LearnerKind::StoIht => stoiht_step(st, grad, h.sparsity, h.gamma),
            LearnerKind::GraphStoIht => graphstoiht_step(
                st,
                grad,
                self.graph.expect("checked in new"),
                self.head.as_ref().expect("checked in new"),
                self.tail.as_ref().expect("checked in new"),
                h.gamma,
                &mut self.projector,
            ),
        }
    }
}

/// Model state captured after `t` samples.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub t: u64,
    pub w: DenseVector,
    pub w_bar: DenseVector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub w: DenseVector,
    pub w_bar: DenseVector,
    /// Cumulative misses after each sample (classification only).
    pub misses: Vec<u64>,
    /// Loss of the pre-update model on each sample.
    pub losses: Vec<f64>,
    pub checkpoints: Vec<Checkpoint>,
}

impl Trajectory {
    pub fn total_misses(&self) -> u64 {
        self.misses.last().copied().unwrap_or(0)
    }
}

/// Single pass over `samples`; snapshots are taken after each step count in `checkpoints`.
pub fn run_stream(
    learner: &mut Learner<'_>,
    samples: &[Sample],
    loss: LossKind,
    checkpoints: &[u64],
) -> Result<Trajectory> {
    let mut misses = Vec::new();
    let mut losses = Vec::with_capacity(samples.len());
    let mut snaps = Vec::new();
    let mut missed = 0u64;
    for (i, sample) in samples.iter().enumerate() {
        let w = &learner.state.w;
        check_dim(w, sample)?;
        if loss == LossKind::Logistic {
            if predict_label(w, &sample.x) != sample.y {
                missed += 1;
            }
            misses.push(missed);
        }
        let (value, grad) = loss.loss_grad(w, sample)?;
        losses.push(value);
        learner.step(&grad)?;
        let t = (i + 1) as u64;
        if checkpoints.contains(&t) {
            snaps.push(Checkpoint {
                t,
                w: learner.state.w.clone(),
                w_bar: learner.state.average(),
            });
        }
    }
    Ok(Trajectory {
        w: learner.state.w.clone(),
        w_bar: learner.state.average(),
        misses,
        losses,
        checkpoints: snaps,
    })
}

/// Writes a model snapshot: header `p <dim> t <step>`, then one value per line.
pub fn write_snapshot(mut out: impl Write, w: &[f64], t: u64) -> Result<()> {
    writeln!(out, "p {} t {}", w.len(), t)?;
    for v in w {
        writeln!(out, "{v:?}")?;
    }
    Ok(())
}

/// Parses a snapshot written by [`write_snapshot`].
pub fn read_snapshot(text: &str) -> Result<(DenseVector, u64)> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let bad = |line: usize, message: String| Error::Format {
        path: "<snapshot>".into(),
        line: line + 1,
        message,
    };
    let (n, header) = lines.next().ok_or(Error::Empty("snapshot"))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    let (p, t) = match fields.as_slice() {
        ["p", p, "t", t] => (
            p.parse::<usize>().map_err(|e| bad(n, format!("bad dimension: {e}")))?,
            t.parse::<u64>().map_err(|e| bad(n, format!("bad step: {e}")))?,
        ),
        _ => return Err(bad(n, format!("expected `p <dim> t <step>`, got {header:?}"))),
    };
    let mut values = Vec::with_capacity(p);
    for (n, line) in lines {
        values.push(
            line.trim()
                .parse::<f64>()
                .map_err(|e| bad(n, format!("bad value: {e}")))?,
        );
    }
    if values.len() != p {
        return Err(bad(n, format!("header says {p} values, found {}", values.len())));
    }
    Ok((values.into(), t))
}
