//! Undirected cost-weighted graphs, supports, and the weighted graph model.
//!
//! A support belongs to the `(G, s, g, B)` weighted graph model when it has at
//! most `s` nodes and the subgraph it induces can be spanned by a forest with
//! at most `g` trees and total edge cost at most `B`.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::union_find::UnionFind;

/// Largest graph `enumerate_model_supports` will walk exhaustively.
pub const ENUMERATION_NODE_LIMIT: usize = 16;

/// A dense real vector indexed by graph node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DenseVector(Vec<f64>);

impl DenseVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }
}

impl Deref for DenseVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DenseVector {
    fn from(values: Vec<f64>) -> Self {
        Self(values)
    }
}

impl FromIterator<f64> for DenseVector {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Sorted, duplicate-free set of node indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Support(Vec<usize>);

impl Support {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Builds a support from arbitrary indices, sorting and deduplicating them.
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        Self(indices)
    }

    /// Like [`Support::from_indices`] but rejects indices outside `0..len`.
    pub fn checked(indices: Vec<usize>, len: usize) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= len) {
            return Err(Error::invalid(format!(
                "support index {bad} out of range for length {len}"
            )));
        }
        Ok(Self::from_indices(indices))
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.0.binary_search(&index).is_ok()
    }

    pub fn intersection_len(&self, other: &Support) -> usize {
        let (mut i, mut j, mut n) = (0, 0, 0);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    n += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        n
    }

    /// Membership mask of length `len`.
    pub fn mask(&self, len: usize) -> Vec<bool> {
        let mut mask = vec![false; len];
        for &i in &self.0 {
            mask[i] = true;
        }
        mask
    }

    pub fn is_subset_of(&self, other: &Support) -> bool {
        self.intersection_len(other) == self.len()
    }
}

impl From<Support> for Vec<usize> {
    fn from(s: Support) -> Self {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub cost: f64,
}

/// Immutable undirected graph with nonnegative edge costs.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<Edge>,
    // CSR adjacency: neighbors of `n` are `adj[offsets[n]..offsets[n + 1]]`
    // as (neighbor, edge index) pairs.
    offsets: Vec<usize>,
    adj: Vec<(usize, usize)>,
}

impl Graph {
    pub fn new(node_count: usize, edges: Vec<Edge>) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::invalid("graph must have at least one node"));
        }
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for (i, e) in edges.iter().enumerate() {
            if e.u >= node_count || e.v >= node_count {
                return Err(Error::invalid(format!(
                    "edge {i} ({}, {}) references a node outside 0..{node_count}",
                    e.u, e.v
                )));
            }
            if e.u == e.v {
                return Err(Error::invalid(format!("edge {i} is a self-loop on {}", e.u)));
            }
            if !(e.cost >= 0.0) || !e.cost.is_finite() {
                return Err(Error::invalid(format!(
                    "edge {i} has invalid cost {}",
                    e.cost
                )));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(Error::invalid(format!(
                    "edge {i} duplicates the pair ({}, {})",
                    e.u, e.v
                )));
            }
        }

        let mut degree = vec![0usize; node_count];
        for e in &edges {
            degree[e.u] += 1;
            degree[e.v] += 1;
        }
        let mut offsets = Vec::with_capacity(node_count + 1);
        offsets.push(0);
        for d in &degree {
            offsets.push(offsets.last().unwrap() + d);
        }
        let mut fill = offsets[..node_count].to_vec();
        let mut adj = vec![(0, 0); offsets[node_count]];
        for (i, e) in edges.iter().enumerate() {
            adj[fill[e.u]] = (e.v, i);
            fill[e.u] += 1;
            adj[fill[e.v]] = (e.u, i);
            fill[e.v] += 1;
        }

        Ok(Self {
            node_count,
            edges,
            offsets,
            adj,
        })
    }

    /// Convenience constructor from `(u, v, cost)` triples.
    pub fn from_triples(node_count: usize, triples: &[(usize, usize, f64)]) -> Result<Self> {
        Self::new(
            node_count,
            triples
                .iter()
                .map(|&(u, v, cost)| Edge { u, v, cost })
                .collect(),
        )
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge(&self, index: usize) -> &Edge {
        &self.edges[index]
    }

    /// `(neighbor, edge index)` pairs incident to `node`.
    pub fn neighbors(&self, node: usize) -> &[(usize, usize)] {
        &self.adj[self.offsets[node]..self.offsets[node + 1]]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.offsets[node + 1] - self.offsets[node]
    }

    /// Component label per node (labels are dense, in order of first node).
    pub fn component_labels(&self) -> (Vec<usize>, usize) {
        let mut label = vec![usize::MAX; self.node_count];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.node_count {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = count;
            stack.push(start);
            while let Some(n) = stack.pop() {
                for &(m, _) in self.neighbors(n) {
                    if label[m] == usize::MAX {
                        label[m] = count;
                        stack.push(m);
                    }
                }
            }
            count += 1;
        }
        (label, count)
    }

    /// Minimum spanning forest of the subgraph induced by `nodes`.
    pub fn induced_spanning_forest(&self, nodes: &Support) -> SpanningForest {
        let in_set = nodes.mask(self.node_count);
        let mut candidate: Vec<usize> = (0..self.edges.len())
            .filter(|&i| in_set[self.edges[i].u] && in_set[self.edges[i].v])
            .collect();
        candidate.sort_by(|&a, &b| {
            self.edges[a]
                .cost
                .total_cmp(&self.edges[b].cost)
                .then(a.cmp(&b))
        });
        let mut uf = UnionFind::new(self.node_count);
        let mut edges = Vec::new();
        let mut cost = 0.0;
        for i in candidate {
            let e = &self.edges[i];
            if uf.union(e.u, e.v) {
                cost += e.cost;
                edges.push(i);
            }
        }
        edges.sort_unstable();
        SpanningForest {
            components: nodes.len() - edges.len(),
            edges,
            cost,
        }
    }
}

/// Result of [`Graph::induced_spanning_forest`].
#[derive(Debug, Clone, PartialEq)]
pub struct SpanningForest {
    pub edges: Vec<usize>,
    pub cost: f64,
    pub components: usize,
}

/// Parameters of the `(G, s, g, B)` weighted graph model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WgmConfig {
    pub sparsity: usize,
    pub components: usize,
    pub budget: f64,
}

impl WgmConfig {
    pub fn new(sparsity: usize, components: usize, budget: f64) -> Result<Self> {
        if sparsity == 0 || components == 0 || components > sparsity {
            return Err(Error::invalid(format!(
                "need 1 <= g <= s, got s = {sparsity}, g = {components}"
            )));
        }
        if !(budget >= 0.0) {
            return Err(Error::invalid(format!("budget must be >= 0, got {budget}")));
        }
        Ok(Self {
            sparsity,
            components,
            budget,
        })
    }
}

/// 4-neighbour lattice with nodes numbered row-major.
pub fn build_grid_graph(rows: usize, cols: usize, unit_cost: f64) -> Graph {
    assert!(rows >= 1 && cols >= 1, "grid dimensions must be positive");
    let mut edges = Vec::with_capacity(rows * (cols - 1) + cols * (rows - 1));
    for r in 0..rows {
        for c in 0..cols {
            let n = r * cols + c;
            if c + 1 < cols {
                edges.push(Edge {
                    u: n,
                    v: n + 1,
                    cost: unit_cost,
                });
            }
            if r + 1 < rows {
                edges.push(Edge {
                    u: n,
                    v: n + cols,
                    cost: unit_cost,
                });
            }
        }
    }
    Graph::new(rows * cols, edges).expect("lattice edges are valid")
}

/// The six-node, seven-edge unit-cost example graph.
///
/// Nodes `w1..w6` map to indices `0..5`.
pub fn build_toy_graph() -> Graph {
    Graph::from_triples(
        6,
        &[
            (5, 3, 1.0),
            (3, 4, 1.0),
            (1, 2, 1.0),
            (2, 3, 1.0),
            (4, 0, 1.0),
            (0, 1, 1.0),
            (1, 4, 1.0),
        ],
    )
    .expect("toy graph is valid")
}

/// Zeroes every coordinate outside `support`.
pub fn restrict(w: &[f64], support: &Support) -> Result<DenseVector> {
    if let Some(&last) = support.indices().last() {
        if last >= w.len() {
            return Err(Error::invalid(format!(
                "support index {last} out of range for vector of length {}",
                w.len()
            )));
        }
    }
    let mut out = DenseVector::zeros(w.len());
    for &i in support.indices() {
        out[i] = w[i];
    }
    Ok(out)
}

/// Indices with `|w_i| > tolerance`.
pub fn support_of(w: &[f64], tolerance: f64) -> Support {
    Support(
        w.iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > tolerance)
            .map(|(i, _)| i)
            .collect(),
    )
}

pub fn is_in_wgm(support: &Support, graph: &Graph, cfg: &WgmConfig) -> bool {
    if support.len() > cfg.sparsity {
        return false;
    }
    if support.is_empty() {
        return true;
    }
    let forest = graph.induced_spanning_forest(support);
    forest.components <= cfg.components && forest.cost <= cfg.budget
}

/// Every support in the model, found by walking all `2^p` subsets.
///
/// Ordered by increasing bitmask, so the empty set comes first.
pub fn enumerate_model_supports(graph: &Graph, cfg: &WgmConfig) -> Result<Vec<Support>> {
    let p = graph.node_count();
    if p > ENUMERATION_NODE_LIMIT {
        return Err(Error::TooLarge {
            nodes: p,
            limit: ENUMERATION_NODE_LIMIT,
        });
    }
    let mut out = Vec::new();
    for mask in 0u32..(1u32 << p) {
        if mask.count_ones() as usize > cfg.sparsity {
            continue;
        }
        let support = Support((0..p).filter(|i| mask & (1 << i) != 0).collect());
        if is_in_wgm(&support, graph, cfg) {
            out.push(support);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn toy_cfg() -> WgmConfig {
        WgmConfig::new(3, 1, 3.0).unwrap()
    }

    #[test]
    fn grid_sizes() {
        let g = build_grid_graph(33, 33, 1.0);
        assert_eq!((g.node_count(), g.edge_count()), (1089, 2112));
        let g = build_grid_graph(1, 1, 1.0);
        assert_eq!((g.node_count(), g.edge_count()), (1, 0));
        let g = build_grid_graph(2, 2, 1.0);
        assert_eq!((g.node_count(), g.edge_count()), (4, 4));
        let g = build_grid_graph(3, 5, 2.5);
        assert_eq!(g.edge_count(), 3 * 4 + 5 * 2);
        assert!(g.edges().iter().all(|e| e.cost == 2.5));
    }

    #[test]
    fn toy_graph_shape() {
        let g = build_toy_graph();
        assert_eq!((g.node_count(), g.edge_count()), (6, 7));
        assert!(g.edges().iter().all(|e| e.cost == 1.0));
        assert_eq!(g.degree(3), 3);
        let (_, components) = g.component_labels();
        assert_eq!(components, 1);
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(Graph::from_triples(2, &[(0, 0, 1.0)]).is_err());
        assert!(Graph::from_triples(2, &[(0, 2, 1.0)]).is_err());
        assert!(Graph::from_triples(2, &[(0, 1, -1.0)]).is_err());
        assert!(Graph::from_triples(2, &[(0, 1, 1.0), (1, 0, 2.0)]).is_err());
        assert!(Graph::from_triples(0, &[]).is_err());
    }

    #[test]
    fn restrict_examples() {
        let s = Support::from_indices(vec![0, 2]);
        assert_eq!(&*restrict(&[1.0, 2.0, 3.0], &s).unwrap(), &[1.0, 0.0, 3.0]);
        assert_eq!(&*restrict(&[0.0; 3], &s).unwrap(), &[0.0; 3]);
        let full = Support::from_indices(vec![0, 1, 2]);
        assert_eq!(&*restrict(&[1.0, 2.0, 3.0], &full).unwrap(), &[1.0, 2.0, 3.0]);
        let bad = Support::from_indices(vec![5]);
        assert!(matches!(
            restrict(&[1.0], &bad),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn support_examples() {
        assert_eq!(support_of(&[0.0, 0.5, 0.0, -0.1], 0.0).indices(), &[1, 3]);
        assert!(support_of(&[0.0; 4], 0.0).is_empty());
        assert_eq!(support_of(&[1e-12, 1.0], 1e-9).indices(), &[1]);
    }

    #[test]
    fn toy_model_membership() {
        let g = build_toy_graph();
        let cfg = toy_cfg();
        assert!(is_in_wgm(&Support::from_indices(vec![0, 1, 4]), &g, &cfg));
        assert!(!is_in_wgm(&Support::from_indices(vec![1, 4, 5]), &g, &cfg));
        assert!(!is_in_wgm(&Support::from_indices(vec![2, 3, 4, 5]), &g, &cfg));
        assert!(is_in_wgm(&Support::empty(), &g, &cfg));
    }

    #[test]
    fn enumeration_examples() {
        let g = build_toy_graph();
        let all = enumerate_model_supports(&g, &toy_cfg()).unwrap();
        assert!(all.contains(&Support::from_indices(vec![0, 1, 4])));
        for i in 0..6 {
            assert!(all.contains(&Support::from_indices(vec![i])));
        }

        let cfg = WgmConfig::new(1, 1, 0.0).unwrap();
        let all = enumerate_model_supports(&g, &cfg).unwrap();
        let mut expected = vec![Support::empty()];
        expected.extend((0..6).map(|i| Support::from_indices(vec![i])));
        assert_eq!(all, expected);

        let big = build_grid_graph(4, 5, 1.0);
        assert!(matches!(
            enumerate_model_supports(&big, &cfg),
            Err(Error::TooLarge { nodes: 20, limit: 16 })
        ));
    }

    #[test]
    fn wgm_config_validation() {
        assert!(WgmConfig::new(0, 1, 1.0).is_err());
        assert!(WgmConfig::new(2, 3, 1.0).is_err());
        assert!(WgmConfig::new(2, 1, -1.0).is_err());
    }

    fn small_graph() -> impl Strategy<Value = Graph> {
        (2usize..=8).prop_flat_map(|p| {
            let pairs: Vec<(usize, usize)> = (0..p)
                .flat_map(|u| ((u + 1)..p).map(move |v| (u, v)))
                .collect();
            let n = pairs.len();
            (
                Just(p),
                Just(pairs),
                proptest::collection::vec(any::<bool>(), n),
                proptest::collection::vec(0.0f64..3.0, n),
            )
                .prop_map(|(p, pairs, keep, costs)| {
                    let triples: Vec<_> = pairs
                        .iter()
                        .zip(&keep)
                        .zip(&costs)
                        .filter(|((_, k), _)| **k)
                        .map(|((&(u, v), _), &c)| (u, v, c))
                        .collect();
                    Graph::from_triples(p, &triples).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn restrict_is_idempotent(w in proptest::collection::vec(-10.0f64..10.0, 1..20), seed in any::<u64>()) {
            let idx: Vec<usize> = (0..w.len()).filter(|i| (seed >> (i % 64)) & 1 == 1).collect();
            let s = Support::from_indices(idx);
            let once = restrict(&w, &s).unwrap();
            let twice = restrict(&once, &s).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn projection_energy_identity(w in proptest::collection::vec(-10.0f64..10.0, 1..20), seed in any::<u64>()) {
            let idx: Vec<usize> = (0..w.len()).filter(|i| (seed >> (i % 64)) & 1 == 1).collect();
            let s = Support::from_indices(idx);
            let p = restrict(&w, &s).unwrap();
            let total: f64 = w.iter().map(|v| v * v).sum();
            let kept = p.norm_squared();
            let resid: f64 = w.iter().zip(p.iter()).map(|(a, b)| (a - b).powi(2)).sum();
            prop_assert!(((total - kept) - resid).abs() <= 1e-12 * total.max(1.0));
        }

        #[test]
        fn wgm_monotone_in_budget_and_sparsity(g in small_graph(), mask in any::<u16>(), s in 1usize..8, extra_s in 0usize..4, b in 0.0f64..6.0, extra_b in 0.0f64..3.0) {
            let p = g.node_count();
            let support = Support::from_indices((0..p).filter(|i| mask & (1 << i) != 0).collect());
            let cfg = WgmConfig::new(s, 1, b).unwrap();
            let looser = WgmConfig::new(s + extra_s, 1, b + extra_b).unwrap();
            if is_in_wgm(&support, &g, &cfg) {
                prop_assert!(is_in_wgm(&support, &g, &looser));
            }
        }

        #[test]
        fn enumeration_agrees_with_membership(g in small_graph(), s in 1usize..5, comps in 1usize..3, b in 0.0f64..5.0) {
            prop_assume!(comps <= s);
            let cfg = WgmConfig::new(s, comps, b).unwrap();
            let listed = enumerate_model_supports(&g, &cfg).unwrap();
            let p = g.node_count();
            let mut k = 0;
            for mask in 0u32..(1 << p) {
                let support = Support::from_indices((0..p).filter(|i| mask & (1 << i) != 0).collect());
                let member = is_in_wgm(&support, &g, &cfg);
                prop_assert_eq!(member, listed.contains(&support));
                k += member as usize;
            }
            prop_assert_eq!(k, listed.len());
        }
    }
}
