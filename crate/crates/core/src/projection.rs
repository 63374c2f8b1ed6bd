//! Head and tail projections onto the weighted graph model, and exact
//! top-`s` hard thresholding for the complete-graph model.
//!
//! Both graph projections binary-search a multiplier on the edge costs and
//! solve a prize-collecting forest problem with prizes `w_i^2` at each probe,
//! stopping once the forest size falls strictly inside `(s_low, s_high)`.

use crate::error::{Error, Result};
use crate::graph::{restrict, DenseVector, Graph, Support};
use crate::pcst::{PcstInstance, PcstSolver};

pub const DEFAULT_TOLERANCE: f64 = 0.1;
pub const DEFAULT_MAX_ITER: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionConfig {
    pub sparsity_low: usize,
    pub sparsity_high: usize,
    pub components: usize,
    pub max_iter: usize,
    pub tolerance: f64,
}

/// Lower forest-size bound used by the head projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum HeadLowerBound {
    /// `floor(p / 2)` nodes.
    #[default]
    HalfNodes,
    /// The model sparsity `s` itself.
    Sparsity,
    Fixed(usize),
}

fn upper_from(low: usize, tolerance: f64) -> usize {
    // 10 * 1.1 must give 11, not 12
    ((low as f64) * (1.0 + tolerance) - 1e-9).ceil() as usize
}

impl ProjectionConfig {
    pub fn new(
        sparsity_low: usize,
        sparsity_high: usize,
        components: usize,
        max_iter: usize,
    ) -> Result<Self> {
        if sparsity_low == 0 || sparsity_low > sparsity_high {
            return Err(Error::invalid(format!(
                "need 1 <= s_low <= s_high, got {sparsity_low}, {sparsity_high}"
            )));
        }
        if components == 0 || max_iter == 0 {
            return Err(Error::invalid("components and max_iter must be >= 1"));
        }
        Ok(Self {
            sparsity_low,
            sparsity_high,
            components,
            max_iter,
            tolerance: sparsity_high as f64 / sparsity_low as f64 - 1.0,
        })
    }

    /// Tail defaults: `s_low = s`, `s_high = ceil(s (1 + omega))`, capped at `p`.
    pub fn tail(p: usize, s: usize, components: usize, tolerance: f64, max_iter: usize) -> Result<Self> {
        let low = s.min(p);
        let mut cfg = Self::new(low, upper_from(low, tolerance).min(p).max(low), components, max_iter)?;
        cfg.tolerance = tolerance;
        Ok(cfg)
    }

    /// Head defaults: `s_low` per `lower`, `s_high = ceil(s_low (1 + omega))`.
    pub fn head(
        p: usize,
        s: usize,
        components: usize,
        tolerance: f64,
        max_iter: usize,
        lower: HeadLowerBound,
    ) -> Result<Self> {
        let low = match lower {
            HeadLowerBound::HalfNodes => (p / 2).max(1),
            HeadLowerBound::Sparsity => s,
            HeadLowerBound::Fixed(n) => n,
        }
        .min(p);
        let mut cfg = Self::new(low, upper_from(low, tolerance).min(p).max(low), components, max_iter)?;
        cfg.tolerance = tolerance;
        Ok(cfg)
    }
}

/// Reusable projection workspace.
#[derive(Debug, Default)]
pub struct Projector {
    solver: PcstSolver,
    prizes: Vec<f64>,
}

impl Projector {
    pub fn new() -> Self {
        Self::default()
    }

    /// Support chosen by the binary search over cost scaling.
    pub fn model_support(&mut self, w: &[f64], graph: &Graph, cfg: &ProjectionConfig) -> Result<Support> {
        if w.len() != graph.node_count() {
            return Err(Error::invalid(format!(
                "vector of length {} for a graph with {} nodes",
                w.len(),
                graph.node_count()
            )));
        }
        self.prizes.clear();
        self.prizes.extend(w.iter().map(|v| v * v));
        let max_prize = self.prizes.iter().cloned().fold(0.0, f64::max);
        if max_prize == 0.0 {
            return Ok(Support::empty());
        }

        let (mut low, mut high) = (0.0f64, max_prize);
        let mut round = 0;
        loop {
            let mid = (low + high) / 2.0;
            let forest = self.solve(graph, mid, cfg.components)?;
            let size = forest.len();
            if cfg.sparsity_low < size && size < cfg.sparsity_high {
                return Ok(forest);
            }
            if size > cfg.sparsity_high {
                low = mid;
            } else {
                high = mid;
            }
            round += 1;
            if round > cfg.max_iter {
                break;
            }
        }
        self.solve(graph, high, cfg.components)
    }

    fn solve(&mut self, graph: &Graph, scale: f64, components: usize) -> Result<Support> {
        let instance = PcstInstance::new(graph, &self.prizes, components).with_cost_scale(scale);
        Ok(self.solver.solve(&instance)?.nodes)
    }

    pub fn model_project(
        &mut self,
        w: &[f64],
        graph: &Graph,
        cfg: &ProjectionConfig,
    ) -> Result<(Support, DenseVector)> {
        let support = self.model_support(w, graph, cfg)?;
        let projected = restrict(w, &support)?;
        Ok((support, projected))
    }
}

pub fn model_project(w: &[f64], graph: &Graph, cfg: &ProjectionConfig) -> Result<(Support, DenseVector)> {
    Projector::new().model_project(w, graph, cfg)
}

/// Head projection with `s_low = floor(p / 2)`.
pub fn head_project(
    w: &[f64],
    graph: &Graph,
    s: usize,
    components: usize,
    tolerance: f64,
    max_iter: usize,
) -> Result<(Support, DenseVector)> {
    let cfg = ProjectionConfig::head(
        graph.node_count(),
        s,
        components,
        tolerance,
        max_iter,
        HeadLowerBound::HalfNodes,
    )?;
    model_project(w, graph, &cfg)
}

/// Tail projection with `s_low = s`.
pub fn tail_project(
    w: &[f64],
    graph: &Graph,
    s: usize,
    components: usize,
    tolerance: f64,
    max_iter: usize,
) -> Result<(Support, DenseVector)> {
    let cfg = ProjectionConfig::tail(graph.node_count(), s, components, tolerance, max_iter)?;
    model_project(w, graph, &cfg)
}

/// Indices of the `s` largest magnitudes; ties go to the lower index.
pub fn exact_top_s(w: &[f64], s: usize) -> Support {
    let s = s.min(w.len());
    if s == 0 {
        return Support::empty();
    }
    let mut idx: Vec<usize> = (0..w.len()).collect();
    let by_magnitude = |&a: &usize, &b: &usize| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b));
    if s < idx.len() {
        idx.select_nth_unstable_by(s - 1, by_magnitude);
        idx.truncate(s);
    }
    Support::from_indices(idx)
}

/// Restriction of `w` to [`exact_top_s`].
pub fn hard_threshold(w: &[f64], s: usize) -> DenseVector {
    let support = exact_top_s(w, s);
    let mut out = DenseVector::zeros(w.len());
    for &i in support.indices() {
        out[i] = w[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_grid_graph, build_toy_graph, enumerate_model_supports, Graph, WgmConfig};
    use crate::pcst::{brute_force_pcst, PcstInstance};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn energy(w: &[f64], s: &Support) -> f64 {
        s.indices().iter().map(|&i| w[i] * w[i]).sum()
    }

    fn complete_graph(p: usize) -> Graph {
        let mut t = Vec::new();
        for u in 0..p {
            for v in (u + 1)..p {
                t.push((u, v, 1.0));
            }
        }
        Graph::from_triples(p, &t).unwrap()
    }

    #[test]
    fn upper_bound_rounding() {
        assert_eq!(upper_from(10, 0.1), 11);
        assert_eq!(upper_from(26, 0.1), 29);
        assert_eq!(upper_from(544, 0.1), 599);
        let head = ProjectionConfig::head(1089, 26, 1, 0.1, 20, HeadLowerBound::HalfNodes).unwrap();
        assert_eq!((head.sparsity_low, head.sparsity_high), (544, 599));
        let tail = ProjectionConfig::tail(1089, 26, 1, 0.1, 20).unwrap();
        assert_eq!((tail.sparsity_low, tail.sparsity_high), (26, 29));
    }

    #[test]
    fn zero_vector_projects_to_empty() {
        let g = build_toy_graph();
        for (s, w) in [head_project(&[0.0; 6], &g, 3, 1, 0.1, 20), tail_project(&[0.0; 6], &g, 3, 1, 0.1, 20)]
            .into_iter()
            .map(Result::unwrap)
        {
            assert!(s.is_empty());
            assert_eq!(&*w, &[0.0; 6]);
        }
    }

    #[test]
    fn length_mismatch_is_an_error() {
        let g = build_toy_graph();
        assert!(head_project(&[1.0; 5], &g, 3, 1, 0.1, 20).is_err());
    }

    #[test]
    fn recovers_connected_indicator_on_toy_graph() {
        let g = build_toy_graph();
        let mut w = [0.0; 6];
        for i in [0, 1, 4] {
            w[i] = 1.0;
        }
        let cfg = ProjectionConfig::new(2, 4, 1, 20).unwrap();
        let (support, projected) = model_project(&w, &g, &cfg).unwrap();
        assert_eq!(support.indices(), &[0, 1, 4]);
        assert_eq!(&*projected, &w);

        // Oracle sweep: for every scale that yields a 3-node forest, the brute
        // force optimum is the same set.
        let prizes: Vec<f64> = w.iter().map(|v| v * v).collect();
        for k in 1..200 {
            let scale = k as f64 / 200.0;
            let exact = brute_force_pcst(&PcstInstance::new(&g, &prizes, 1).with_cost_scale(scale)).unwrap();
            if exact.len() == 3 {
                assert_eq!(exact.nodes.indices(), &[0, 1, 4]);
            }
        }
    }

    #[test]
    fn tail_keeps_connected_sparse_signal() {
        let g = build_grid_graph(6, 6, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        // a 2x3 block
        let block = [7, 8, 9, 13, 14, 15];
        let mut w = vec![0.0; 36];
        for &i in &block {
            w[i] = rng.gen_range(0.5..2.0);
        }
        let (support, projected) = tail_project(&w, &g, 6, 1, 0.1, 20).unwrap();
        assert!(Support::from_indices(block.to_vec()).is_subset_of(&support));
        let resid: f64 = w.iter().zip(projected.iter()).map(|(a, b)| (a - b).powi(2)).sum();
        assert_eq!(resid, 0.0);
    }

    #[test]
    fn head_energy_ratio_on_toy_graph() {
        let g = build_toy_graph();
        let model = enumerate_model_supports(&g, &WgmConfig::new(3, 1, 3.0).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let w: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let (h, projected) = head_project(&w, &g, 3, 1, 0.1, 20).unwrap();
            let total: f64 = w.iter().map(|v| v * v).sum();
            assert!(projected.norm_squared() <= total + 1e-12);
            let best = model.iter().map(|s| energy(&w, s)).fold(0.0, f64::max);
            let ratio = energy(&w, &h) / best;
            assert!(ratio > 0.0, "head captured no energy");
        }
    }

    #[test]
    fn supports_have_at_most_g_components() {
        let g = build_grid_graph(10, 10, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut projector = Projector::new();
        for _ in 0..40 {
            let w: Vec<f64> = (0..100).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let comps = rng.gen_range(1..4);
            let s = rng.gen_range(3..30);
            let cfg = ProjectionConfig::tail(100, s, comps, 0.1, 20).unwrap();
            let support = projector.model_support(&w, &g, &cfg).unwrap();
            assert!(g.induced_spanning_forest(&support).components <= comps);
        }
    }

    #[test]
    fn support_invariant_under_scaling() {
        let g = build_grid_graph(8, 8, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let mut projector = Projector::new();
        for _ in 0..20 {
            let w: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let cfg = ProjectionConfig::tail(64, 8, 1, 0.1, 20).unwrap();
            let base = projector.model_support(&w, &g, &cfg).unwrap();
            for alpha in [-3.0, 0.5, 1e-3, 250.0] {
                let scaled: Vec<f64> = w.iter().map(|v| v * alpha).collect();
                assert_eq!(projector.model_support(&scaled, &g, &cfg).unwrap(), base);
            }
        }
    }

    #[test]
    fn top_s_examples() {
        assert_eq!(exact_top_s(&[0.5, -2.0, 1.0, 0.0], 2).indices(), &[1, 2]);
        assert_eq!(exact_top_s(&[0.0, 3.0, 0.0, 0.0], 3).indices(), &[0, 1, 2]);
        assert_eq!(exact_top_s(&[1.0, -1.0, 1.0], 2).indices(), &[0, 1]);
        assert_eq!(&*hard_threshold(&[0.5, -2.0, 1.0, 0.0], 1), &[0.0, -2.0, 0.0, 0.0]);
    }

    #[test]
    fn top_s_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..300 {
            let w: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = rng.gen_range(1..=5);
            let top = exact_top_s(&w, s);
            let mut best = 0.0f64;
            for mask in 0u32..(1 << 12) {
                if mask.count_ones() as usize <= s {
                    let e: f64 = (0..12).filter(|i| mask & (1 << i) != 0).map(|i| w[i] * w[i]).sum();
                    best = best.max(e);
                }
            }
            assert_eq!(energy(&w, &top), best);
        }
    }

    #[test]
    fn complete_graph_model_projection_is_top_s() {
        let p = 10;
        let g = complete_graph(p);
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..50 {
            let w: Vec<f64> = (0..p).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = rng.gen_range(2..6);
            let cfg = ProjectionConfig::new(s, s + 1, 1, 40).unwrap();
            let support = model_project(&w, &g, &cfg).unwrap().0;
            let top = exact_top_s(&w, support.len().min(s));
            assert!(energy(&w, &support) + 1e-12 >= energy(&w, &top));
        }
    }
}
