//! Prize-collecting Steiner forest.
//!
//! [`solve_pcst`] runs unrooted Goemans-Williamson moat growth followed by
//! pruning; [`brute_force_pcst`] is the exhaustive reference used to check
//! the approximation guarantee on small graphs.

mod growth;
mod indexed_heap;
mod pairing_heap;

use crate::error::{Error, Result};
use crate::graph::{Graph, Support};
use crate::union_find::UnionFind;

use growth::Growth;

/// Largest graph `brute_force_pcst` will enumerate.
pub const BRUTE_FORCE_NODE_LIMIT: usize = 12;

/// Relative tolerance for event times and slack comparisons.
const SLACK_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct PcstInstance<'a> {
    pub graph: &'a Graph,
    pub prizes: &'a [f64],
    pub target_components: usize,
    /// Multiplier applied to every edge cost.
    pub cost_scale: f64,
}

impl<'a> PcstInstance<'a> {
    pub fn new(graph: &'a Graph, prizes: &'a [f64], target_components: usize) -> Self {
        Self {
            graph,
            prizes,
            target_components,
            cost_scale: 1.0,
        }
    }

    pub fn with_cost_scale(mut self, cost_scale: f64) -> Self {
        self.cost_scale = cost_scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.prizes.len() != self.graph.node_count() {
            return Err(Error::invalid(format!(
                "{} prizes for a graph with {} nodes",
                self.prizes.len(),
                self.graph.node_count()
            )));
        }
        if let Some(p) = self.prizes.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::invalid(format!("prizes must be finite and >= 0, got {p}")));
        }
        if self.target_components == 0 {
            return Err(Error::invalid("target component count must be >= 1"));
        }
        if !(self.cost_scale >= 0.0) || !self.cost_scale.is_finite() {
            return Err(Error::invalid(format!(
                "cost scale must be finite and >= 0, got {}",
                self.cost_scale
            )));
        }
        Ok(())
    }
}

/// A node set together with graph edges forming a forest over it.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Forest {
    pub nodes: Support,
    /// Sorted edge indices into the graph.
    pub edges: Vec<usize>,
}

impl Forest {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Checks the forest invariants and returns its tree count.
    pub fn validate(&self, graph: &Graph) -> Result<usize> {
        let p = graph.node_count();
        if self.nodes.indices().last().is_some_and(|&i| i >= p) {
            return Err(Error::invalid("forest node outside the graph"));
        }
        let mut uf = UnionFind::new(p);
        for &e in &self.edges {
            if e >= graph.edge_count() {
                return Err(Error::invalid(format!("forest edge {e} not in graph")));
            }
            let edge = graph.edge(e);
            if !self.nodes.contains(edge.u) || !self.nodes.contains(edge.v) {
                return Err(Error::invalid(format!(
                    "forest edge {e} has an endpoint outside the node set"
                )));
            }
            if !uf.union(edge.u, edge.v) {
                return Err(Error::invalid(format!("forest edge {e} closes a cycle")));
            }
        }
        Ok(self.nodes.len() - self.edges.len())
    }

    pub fn edge_cost(&self, graph: &Graph) -> f64 {
        self.edges.iter().map(|&e| graph.edge(e).cost).sum()
    }
}

/// `cost_scale * (forest edge cost) + (prize of nodes outside the forest)`.
pub fn pcst_objective(graph: &Graph, prizes: &[f64], forest: &Forest, cost_scale: f64) -> Result<f64> {
    if prizes.len() != graph.node_count() {
        return Err(Error::invalid("prize vector length differs from node count"));
    }
    forest.validate(graph)?;
    let total: f64 = prizes.iter().sum();
    let collected: f64 = forest.nodes.indices().iter().map(|&i| prizes[i]).sum();
    Ok(cost_scale * forest.edge_cost(graph) + (total - collected))
}

/// Reusable solver; keeps its buffers between calls.
#[derive(Debug, Default)]
pub struct PcstSolver {
    growth: Growth,
    local_edges: Vec<(u32, u32, f64)>,
    local_to_graph: Vec<usize>,
}

impl PcstSolver {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn solve(&mut self, instance: &PcstInstance<'_>) -> Result<Forest> {
        instance.validate()?;
        let graph = instance.graph;
        let scale = instance.cost_scale;
        let prizes = instance.prizes;
        if prizes.iter().all(|&p| p == 0.0) {
            return Ok(Forest::empty());
        }

        // Contract zero-cost edges so no moat event happens at zero width.
        let has_zero = scale == 0.0 || graph.edges().iter().any(|e| e.cost == 0.0);
        let contraction = has_zero.then(|| Contraction::new(graph, scale, prizes));
        let (local_prizes, node_map): (std::borrow::Cow<'_, [f64]>, Option<&[usize]>) =
            match &contraction {
                Some(c) => (c.prizes.as_slice().into(), Some(c.super_of.as_slice())),
                None => (prizes.into(), None),
            };

        self.local_edges.clear();
        self.local_to_graph.clear();
        let mut max_cost: f64 = 0.0;
        for (i, e) in graph.edges().iter().enumerate() {
            let cost = e.cost * scale;
            if cost <= 0.0 {
                continue;
            }
            let (u, v) = match node_map {
                Some(map) => (map[e.u], map[e.v]),
                None => (e.u, e.v),
            };
            if u == v {
                continue;
            }
            max_cost = max_cost.max(cost);
            self.local_edges.push((u as u32, v as u32, cost));
            self.local_to_graph.push(i);
        }

        let max_prize = local_prizes.iter().cloned().fold(0.0, f64::max);
        let tolerance = SLACK_TOLERANCE * max_prize.max(max_cost);
        let grown = self.growth.run(
            &local_prizes,
            &self.local_edges,
            instance.target_components,
            tolerance,
        );

        let kept = prune(
            &local_prizes,
            &self.local_edges,
            &grown.tree_edges,
            instance.target_components,
        );

        let mut nodes = Vec::new();
        let mut edges: Vec<usize> = kept.edges.iter().map(|&e| self.local_to_graph[e]).collect();
        match &contraction {
            Some(c) => {
                for &s in &kept.nodes {
                    nodes.extend_from_slice(&c.members[s]);
                    edges.extend_from_slice(&c.inner_edges[s]);
                }
            }
            None => nodes.extend_from_slice(&kept.nodes),
        }
        edges.sort_unstable();
        Ok(Forest {
            nodes: Support::from_indices(nodes),
            edges,
        })
    }
}

/// Goemans-Williamson growth plus pruning. Deterministic.
pub fn solve_pcst(instance: &PcstInstance<'_>) -> Result<Forest> {
    PcstSolver::new().solve(instance)
}

struct Contraction {
    super_of: Vec<usize>,
    prizes: Vec<f64>,
    members: Vec<Vec<usize>>,
    inner_edges: Vec<Vec<usize>>,
}

impl Contraction {
    fn new(graph: &Graph, scale: f64, prizes: &[f64]) -> Self {
        let p = graph.node_count();
        let mut uf = UnionFind::new(p);
        let mut zero_edges = Vec::new();
        for (i, e) in graph.edges().iter().enumerate() {
            if e.cost * scale <= 0.0 && uf.union(e.u, e.v) {
                zero_edges.push(i);
            }
        }
        let mut super_of = vec![usize::MAX; p];
        let mut root_id = vec![usize::MAX; p];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for (n, slot) in super_of.iter_mut().enumerate() {
            let r = uf.find(n);
            if root_id[r] == usize::MAX {
                root_id[r] = members.len();
                members.push(Vec::new());
            }
            *slot = root_id[r];
            members[root_id[r]].push(n);
        }
        let mut local_prizes = vec![0.0; members.len()];
        for (n, &s) in super_of.iter().enumerate() {
            local_prizes[s] += prizes[n];
        }
        let mut inner_edges = vec![Vec::new(); members.len()];
        for e in zero_edges {
            inner_edges[super_of[graph.edge(e).u]].push(e);
        }
        Self {
            super_of,
            prizes: local_prizes,
            members,
            inner_edges,
        }
    }
}

struct Pruned {
    nodes: Vec<usize>,
    edges: Vec<usize>,
}

/// Prunes the grown forest.
///
/// Within each tree, subtrees whose collected prize is less than the cost of
/// the edge attaching them are cut, rooted at the node that leaves the most
/// net prize. Of the resulting trees, the `target` with the largest
/// prize-minus-cost are kept (only those with positive value).
fn prune(prizes: &[f64], edges: &[(u32, u32, f64)], tree_edges: &[usize], target: usize) -> Pruned {
    let n = prizes.len();
    let mut degree = vec![0usize; n];
    for &e in tree_edges {
        degree[edges[e].0 as usize] += 1;
        degree[edges[e].1 as usize] += 1;
    }
    let mut offsets = vec![0usize; n + 1];
    for i in 0..n {
        offsets[i + 1] = offsets[i] + degree[i];
    }
    let mut fill = offsets[..n].to_vec();
    let mut adj = vec![(0usize, 0usize); offsets[n]];
    for &e in tree_edges {
        let (u, v, _) = edges[e];
        let (u, v) = (u as usize, v as usize);
        adj[fill[u]] = (v, e);
        fill[u] += 1;
        adj[fill[v]] = (u, e);
        fill[v] += 1;
    }
    let neighbors = |x: usize| &adj[offsets[x]..offsets[x + 1]];

    let mut seen = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut parent = vec![(usize::MAX, usize::MAX); n];
    let mut down = vec![0.0f64; n];
    let mut full = vec![0.0f64; n];

    // (value, best root, tree id) per tree
    let mut trees: Vec<(f64, usize)> = Vec::new();
    for start in 0..n {
        if seen[start] {
            continue;
        }
        // BFS order from the lowest-index node
        order.clear();
        order.push(start);
        seen[start] = true;
        parent[start] = (usize::MAX, usize::MAX);
        let mut head = 0;
        while head < order.len() {
            let x = order[head];
            head += 1;
            for &(y, e) in neighbors(x) {
                if !seen[y] {
                    seen[y] = true;
                    parent[y] = (x, e);
                    order.push(y);
                }
            }
        }
        for &x in order.iter().rev() {
            down[x] = prizes[x];
            for &(y, e) in neighbors(x) {
                if parent[y] == (x, e) {
                    down[x] += (down[y] - edges[e].2).max(0.0);
                }
            }
        }
        full[start] = down[start];
        for &x in order.iter().skip(1) {
            let (px, e) = parent[x];
            let cost = edges[e].2;
            let from_parent = full[px] - (down[x] - cost).max(0.0);
            full[x] = down[x] + (from_parent - cost).max(0.0);
        }
        let mut best = start;
        for &x in &order {
            if full[x] > full[best] || (full[x] == full[best] && x < best) {
                best = x;
            }
        }
        trees.push((full[best], best));
    }

    trees.retain(|t| t.0 > 0.0);
    trees.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    trees.truncate(target);

    let mut out = Pruned {
        nodes: Vec::new(),
        edges: Vec::new(),
    };
    // Re-root each kept tree at its best node and keep profitable branches.
    for &(_, root) in &trees {
        order.clear();
        order.push(root);
        parent[root] = (usize::MAX, usize::MAX);
        let mut head = 0;
        while head < order.len() {
            let x = order[head];
            head += 1;
            for &(y, e) in neighbors(x) {
                if parent[x].0 != y || parent[x].1 != e {
                    parent[y] = (x, e);
                    order.push(y);
                }
            }
        }
        for &x in order.iter().rev() {
            down[x] = prizes[x];
            for &(y, e) in neighbors(x) {
                if parent[y] == (x, e) {
                    down[x] += (down[y] - edges[e].2).max(0.0);
                }
            }
        }
        let mut stack = vec![root];
        while let Some(x) = stack.pop() {
            out.nodes.push(x);
            for &(y, e) in neighbors(x) {
                if parent[y] == (x, e) && down[y] - edges[e].2 >= 0.0 {
                    out.edges.push(e);
                    stack.push(y);
                }
            }
        }
    }
    out
}

/// Exact minimizer of the prize-collecting objective by subset enumeration.
///
/// Ties are broken towards fewer nodes, then the lexicographically smaller
/// node list.
pub fn brute_force_pcst(instance: &PcstInstance<'_>) -> Result<Forest> {
    instance.validate()?;
    let graph = instance.graph;
    let p = graph.node_count();
    if p > BRUTE_FORCE_NODE_LIMIT {
        return Err(Error::TooLarge {
            nodes: p,
            limit: BRUTE_FORCE_NODE_LIMIT,
        });
    }
    let total: f64 = instance.prizes.iter().sum();
    let tol = 1e-12 * total.max(1.0);
    let mut best = (total, Forest::empty());
    for mask in 1u32..(1u32 << p) {
        let nodes = Support::from_indices((0..p).filter(|i| mask & (1 << i) != 0).collect());
        let span = graph.induced_spanning_forest(&nodes);
        if span.components > instance.target_components {
            continue;
        }
        let collected: f64 = nodes.indices().iter().map(|&i| instance.prizes[i]).sum();
        let value = instance.cost_scale * span.cost + (total - collected);
        let better = value < best.0 - tol
            || (value <= best.0 + tol
                && (nodes.len(), nodes.indices()) < (best.1.len(), best.1.nodes.indices()));
        if better {
            best = (
                value,
                Forest {
                    nodes,
                    edges: span.edges,
                },
            );
        }
    }
    Ok(best.1)
}
