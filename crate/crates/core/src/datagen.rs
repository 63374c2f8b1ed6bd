//! Synthetic benchmark data on grid graphs, linear-regression data from image
//! masks, and IDX (MNIST) file parsing.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::graph::{build_grid_graph, DenseVector, Graph, Support};
use crate::online::Sample;

/// Sizes of the planted subgraphs in the benchmark datasets.
pub const BENCHMARK_SUBGRAPH_SIZES: [usize; 4] = [26, 46, 92, 132];

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkSpec {
    pub rows: usize,
    pub cols: usize,
    pub subgraph_size: usize,
    pub mu: f64,
    pub n_train: usize,
    pub n_validate: usize,
    pub n_test: usize,
    pub seed: u64,
}

impl Default for BenchmarkSpec {
    fn default() -> Self {
        Self {
            rows: 33,
            cols: 33,
            subgraph_size: 26,
            mu: 0.3,
            n_train: 400,
            n_validate: 400,
            n_test: 400,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub wstar: DenseVector,
    pub support: Support,
}

impl GroundTruth {
    /// `mu` on `support`, zero elsewhere.
    pub fn indicator(p: usize, support: Support, mu: f64) -> Self {
        let mut wstar = DenseVector::zeros(p);
        for &i in support.indices() {
            wstar[i] = mu;
        }
        Self { wstar, support }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WStarStrategy {
    Normalized,
    Constant,
    Gaussian,
}

impl std::str::FromStr for WStarStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normalized" => Ok(WStarStrategy::Normalized),
            "constant" => Ok(WStarStrategy::Constant),
            "gaussian" => Ok(WStarStrategy::Gaussian),
            _ => Err(Error::invalid(format!("unknown w* strategy {s:?}"))),
        }
    }
}

impl WStarStrategy {
    pub fn name(self) -> &'static str {
        match self {
            WStarStrategy::Normalized => "normalized",
            WStarStrategy::Constant => "constant",
            WStarStrategy::Gaussian => "gaussian",
        }
    }
}

/// Independent rng for one named stream of one experiment seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn normal(rng: &mut impl Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Connected support of exactly `size` nodes, grown by randomized breadth-first
/// expansion: each step adds a uniformly chosen node of the current frontier.
pub fn gen_connected_subgraph(graph: &Graph, size: usize, seed: u64) -> Result<Support> {
    let p = graph.node_count();
    if size == 0 || size > p {
        return Err(Error::invalid(format!("subgraph size {size} outside 1..={p}")));
    }
    let (labels, count) = graph.component_labels();
    let mut comp_size = vec![0usize; count];
    for &l in &labels {
        comp_size[l] += 1;
    }
    let starts: Vec<usize> = (0..p).filter(|&v| comp_size[labels[v]] >= size).collect();
    if starts.is_empty() {
        return Err(Error::Infeasible(format!(
            "no connected component has {size} nodes"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = *starts.choose(&mut rng).expect("nonempty");
    let mut chosen = vec![start];
    let mut inside = HashSet::from([start]);
    let mut frontier: Vec<usize> = Vec::new();
    let mut queued: HashSet<usize> = HashSet::new();
    let mut push_nbrs = |v: usize, frontier: &mut Vec<usize>, inside: &HashSet<usize>| {
        for &(u, _) in graph.neighbors(v) {
            if !inside.contains(&u) && queued.insert(u) {
                frontier.push(u);
            }
        }
    };
    push_nbrs(start, &mut frontier, &inside);
    while chosen.len() < size {
        let k = rng.gen_range(0..frontier.len());
        let v = frontier.swap_remove(k);
        inside.insert(v);
        chosen.push(v);
        push_nbrs(v, &mut frontier, &inside);
    }
    Ok(Support::from_indices(chosen))
}

fn check_label(y: f64) -> Result<()> {
    if y == 1.0 || y == -1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("label must be +1 or -1, got {y}")))
    }
}

/// Standard normal features; positives get mean `mu` on the planted support.
pub fn gen_classification_sample(
    truth: &GroundTruth,
    mu: f64,
    y: f64,
    rng: &mut impl Rng,
) -> Result<Sample> {
    check_label(y)?;
    let mut x: Vec<f64> = (0..truth.wstar.len()).map(|_| normal(rng)).collect();
    if y == 1.0 {
        for &i in truth.support.indices() {
            x[i] += mu;
        }
    }
    Ok(Sample::new(x, y))
}

/// Ground truth supported on `mask` following `strategy`. `intensities` is a
/// full-length vector (e.g. pixel values) and is required for `Normalized`.
pub fn make_wstar(
    strategy: WStarStrategy,
    p: usize,
    mask: &Support,
    intensities: Option<&[f64]>,
    rng: &mut impl Rng,
) -> Result<GroundTruth> {
    if mask.indices().last().is_some_and(|&i| i >= p) {
        return Err(Error::invalid(format!("mask index outside 0..{p}")));
    }
    let mut wstar = DenseVector::zeros(p);
    match strategy {
        WStarStrategy::Constant => {
            for &i in mask.indices() {
                wstar[i] = 1.0;
            }
        }
        WStarStrategy::Gaussian => {
            for &i in mask.indices() {
                wstar[i] = normal(rng);
            }
        }
        WStarStrategy::Normalized => {
            let values = intensities
                .ok_or_else(|| Error::invalid("normalized w* needs pixel intensities"))?;
            if values.len() != p {
                return Err(Error::invalid(format!(
                    "{} intensities for dimension {p}",
                    values.len()
                )));
            }
            let max = mask.indices().iter().map(|&i| values[i]).fold(0.0, f64::max);
            if max <= 0.0 {
                return Err(Error::invalid("mask has no positive intensity"));
            }
            for &i in mask.indices() {
                wstar[i] = values[i] / max;
            }
        }
    }
    let support = Support::from_indices(
        mask.indices().iter().copied().filter(|&i| wstar[i] != 0.0).collect(),
    );
    Ok(GroundTruth { wstar, support })
}

/// Noiseless linear observation `y = <x, w*>` with standard normal `x`.
pub fn gen_regression_sample(truth: &GroundTruth, rng: &mut impl Rng) -> Sample {
    let x: Vec<f64> = (0..truth.wstar.len()).map(|_| normal(rng)).collect();
    let y = crate::graph::dot(&x, &truth.wstar);
    Sample::new(x, y)
}

/// Samples that may be used for training.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSplit(pub Vec<Sample>);

/// Samples used only to pick hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationSplit(pub Vec<Sample>);

/// Held-out samples for final reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct TestSplit(pub Vec<Sample>);

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub truth: GroundTruth,
    pub train: TrainSplit,
    pub validate: ValidationSplit,
    pub test: TestSplit,
}

const TRAIN_STREAM: u64 = 1;
const VALIDATE_STREAM: u64 = 2;
const TEST_STREAM: u64 = 3;
const TRUTH_STREAM: u64 = 4;

fn classification_split(truth: &GroundTruth, mu: f64, n: usize, mut rng: ChaCha8Rng) -> Vec<Sample> {
    (0..n)
        .map(|_| {
            let y = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
            gen_classification_sample(truth, mu, y, &mut rng).expect("label is valid")
        })
        .collect()
}

/// Planted-subgraph classification data; the grid is returned alongside.
pub fn benchmark_dataset(spec: &BenchmarkSpec) -> Result<(Graph, Dataset)> {
    let graph = build_grid_graph(spec.rows, spec.cols, 1.0);
    let support = gen_connected_subgraph(
        &graph,
        spec.subgraph_size,
        stream_rng(spec.seed, TRUTH_STREAM).gen(),
    )?;
    let truth = GroundTruth::indicator(graph.node_count(), support, spec.mu);
    let split = |n, stream| classification_split(&truth, spec.mu, n, stream_rng(spec.seed, stream));
    let train = TrainSplit(split(spec.n_train, TRAIN_STREAM));
    let validate = ValidationSplit(split(spec.n_validate, VALIDATE_STREAM));
    let test = TestSplit(split(spec.n_test, TEST_STREAM));
    Ok((graph, Dataset { truth, train, validate, test }))
}

/// Regression data for a fixed ground truth.
pub fn regression_dataset(
    truth: GroundTruth,
    n_train: usize,
    n_validate: usize,
    n_test: usize,
    seed: u64,
) -> Dataset {
    let split = |n, stream| {
        let mut rng = stream_rng(seed, stream);
        (0..n).map(|_| gen_regression_sample(&truth, &mut rng)).collect::<Vec<_>>()
    };
    let train = TrainSplit(split(n_train, TRAIN_STREAM));
    let validate = ValidationSplit(split(n_validate, VALIDATE_STREAM));
    let test = TestSplit(split(n_test, TEST_STREAM));
    Dataset { truth, train, validate, test }
}

/// Grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Image {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn intensities(&self) -> Vec<f64> {
        self.pixels.iter().map(|&v| v as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IdxData {
    Images(Vec<Image>),
    Labels(Vec<u8>),
}

const IDX_IMAGES: u32 = 0x0000_0803;
const IDX_LABELS: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let chunk = bytes.get(offset..offset + 4).ok_or_else(|| Error::Parse {
        offset: bytes.len(),
        message: format!("header truncated: expected 4 bytes at offset {offset}"),
    })?;
    Ok(u32::from_be_bytes(chunk.try_into().expect("length 4")))
}

/// Decodes an IDX image (`0x00000803`) or label (`0x00000801`) file.
pub fn parse_idx(bytes: &[u8]) -> Result<IdxData> {
    let magic = be_u32(bytes, 0)?;
    let (dims, header) = match magic {
        IDX_IMAGES => (3, 16),
        IDX_LABELS => (1, 8),
        _ => {
            return Err(Error::Parse {
                offset: 0,
                message: format!("bad magic number 0x{magic:08x}"),
            })
        }
    };
    let sizes: Vec<usize> = (0..dims)
        .map(|d| be_u32(bytes, 4 + 4 * d).map(|v| v as usize))
        .collect::<Result<_>>()?;
    let expected: usize = sizes.iter().product();
    let payload = &bytes[header..];
    if payload.len() != expected {
        return Err(Error::Parse {
            offset: header + payload.len().min(expected),
            message: format!(
                "payload has {} bytes, header implies {expected}",
                payload.len()
            ),
        });
    }
    Ok(match magic {
        IDX_IMAGES => {
            let (rows, cols) = (sizes[1], sizes[2]);
            let images = if rows * cols == 0 {
                vec![Image { rows, cols, pixels: Vec::new() }; sizes[0]]
            } else {
                payload
                    .chunks(rows * cols)
                    .map(|c| Image { rows, cols, pixels: c.to_vec() })
                    .collect()
            };
            IdxData::Images(images)
        }
        _ => IdxData::Labels(payload.to_vec()),
    })
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxData> {
    parse_idx(&std::fs::read(path)?)
}

/// Pixels brighter than `threshold`, in grid-node order.
pub fn image_mask(image: &Image, threshold: f64) -> Support {
    Support::from_indices(
        image
            .pixels
            .iter()
            .enumerate()
            .filter(|(_, &v)| v as f64 > threshold)
            .map(|(i, _)| i)
            .collect(),
    )
}

/// Seven-segment layout: a top, b upper right, c lower right, d bottom,
/// e lower left, f upper left, g middle.
const SEGMENTS: [&str; 10] = [
    "abcdef", "bc", "abged", "abgcd", "fgbc", "afgcd", "afgedc", "abc", "abcdefg", "abcdfg",
];

/// Connected 28x28 stroke images of the ten digits, used when no MNIST files are
/// available. Stroke centres are brighter than their edges.
pub fn synthetic_digits() -> Vec<Image> {
    const SIDE: usize = 28;
    let (left, right, top, mid, bottom) = (9usize, 18usize, 4usize, 13usize, 22usize);
    (0..10)
        .map(|d| {
            let mut pixels = vec![0u8; SIDE * SIDE];
            let mut paint = |r: usize, c: usize, v: u8| {
                let px = &mut pixels[r * SIDE + c];
                *px = (*px).max(v);
            };
            for seg in SEGMENTS[d].chars() {
                // (row0, col0, row1, col1) of the stroke centre line
                let (r0, c0, r1, c1) = match seg {
                    'a' => (top, left, top, right),
                    'b' => (top, right, mid, right),
                    'c' => (mid, right, bottom, right),
                    'd' => (bottom, left, bottom, right),
                    'e' => (mid, left, bottom, left),
                    'f' => (top, left, mid, left),
                    _ => (mid, left, mid, right),
                };
                for r in r0..=r1 {
                    for c in c0..=c1 {
                        paint(r, c, 255);
                        // second pixel of stroke width, dimmer
                        if r0 == r1 {
                            paint(r + 1, c, 160);
                        } else {
                            paint(r, c + 1, 160);
                        }
                    }
                }
            }
            Image { rows: SIDE, cols: SIDE, pixels }
        })
        .collect()
}

/// Writes `y,x_0,...,x_{p-1}` rows.
pub fn write_dataset_csv(out: impl Write, samples: &[Sample]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let p = samples.first().map_or(0, |s| s.x.len());
    let mut header = vec!["y".to_string()];
    header.extend((0..p).map(|i| format!("x_{i}")));
    w.write_record(&header)?;
    for s in samples {
        let mut row = vec![format!("{:?}", s.y)];
        row.extend(s.x.iter().map(|v| format!("{v:?}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `index,value` rows for the nonzeros of `w*`.
pub fn write_truth_csv(out: impl Write, truth: &GroundTruth) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "value"])?;
    for &i in truth.support.indices() {
        w.write_record([i.to_string(), format!("{:?}", truth.wstar[i])])?;
    }
    w.flush()?;
    Ok(())
}
