//! Goemans-Williamson moat growth for the unrooted prize-collecting forest.
//!
//! Every edge is split into two halves ("parts"), one per endpoint. A part
//! lives in the pairing heap of the cluster currently holding its endpoint,
//! keyed by a lower bound on the time the edge becomes tight. When a part
//! surfaces, the exact slack is recomputed from the moat loads of both
//! endpoints and the part is either merged on or rescheduled. Heaps of
//! inactive clusters are frozen and shifted forward when they are absorbed.

use super::indexed_heap::{make_key, time_of, IndexedMinHeap};
use super::pairing_heap::{PairingArena, NIL};

#[derive(Debug, Clone, Copy)]
struct Cluster {
    created: f64,
    /// Remaining potential at creation time.
    potential: f64,
    /// Time growth stopped (deactivation or absorption); infinite while growing.
    ended: f64,
    active: bool,
    heap: u32,
    up: u32,
    up_sum: f64,
}

impl Cluster {
    fn moat(&self, now: f64) -> f64 {
        now.min(self.ended) - self.created
    }
}

/// Output of the growth phase on a (possibly contracted) instance.
#[derive(Debug, Default)]
pub(crate) struct GrowthResult {
    /// Indices into the instance edge list, in merge order.
    pub tree_edges: Vec<usize>,
}

/// Reusable buffers for repeated solves.
#[derive(Debug, Default)]
pub(crate) struct Growth {
    clusters: Vec<Cluster>,
    arena: PairingArena,
    part_node: Vec<u32>,
    /// Earliest edge event per active cluster.
    edge_events: IndexedMinHeap,
    /// Deactivation time per active cluster.
    deactivations: IndexedMinHeap,
    path: Vec<u32>,
}

impl Growth {
    /// Runs moat growth until at most `target` clusters are active.
    ///
    /// `edges` must have strictly positive costs.
    pub fn run(
        &mut self,
        prizes: &[f64],
        edges: &[(u32, u32, f64)],
        target: usize,
        tolerance: f64,
    ) -> GrowthResult {
        let n = prizes.len();
        self.clusters.clear();
        self.arena.clear();
        self.part_node.clear();
        self.part_node.resize(2 * edges.len(), NIL);
        self.edge_events.reset(2 * n);
        self.deactivations.reset(2 * n);

        for (i, &p) in prizes.iter().enumerate() {
            self.clusters.push(Cluster {
                created: 0.0,
                potential: p,
                ended: f64::INFINITY,
                active: true,
                heap: NIL,
                up: i as u32,
                up_sum: 0.0,
            });
            self.deactivations.set(i as u32, make_key(p, i as u64));
        }
        for (e, &(u, v, cost)) in edges.iter().enumerate() {
            debug_assert!(cost > 0.0);
            for (side, node) in [(0u32, u), (1, v)] {
                let part = 2 * e as u32 + side;
                let c = &mut self.clusters[node as usize];
                let (root, id) = self.arena.insert(c.heap, cost / 2.0, part);
                c.heap = root;
                self.part_node[part as usize] = id;
            }
        }
        for c in 0..n as u32 {
            self.refresh(c);
        }

        let mut active = n;
        let mut result = GrowthResult::default();
        while active > target {
            let edge_next = self.edge_events.peek();
            let deact_next = self.deactivations.peek();
            let (c, now) = match (edge_next, deact_next) {
                (None, None) => break,
                (Some((c, key)), d) if d.is_none_or(|(_, dk)| time_of(key) <= time_of(dk)) => {
                    (c as usize, time_of(key))
                }
                (_, Some((c, key))) => {
                    let c = c as usize;
                    let cl = &mut self.clusters[c];
                    cl.active = false;
                    cl.ended = time_of(key);
                    self.deactivations.remove(c as u32);
                    self.edge_events.remove(c as u32);
                    active -= 1;
                    continue;
                }
                _ => unreachable!(),
            };

            let top = self.clusters[c].heap;
            let (_, part) = self.arena.peek(top).expect("announced heap is nonempty");
            self.clusters[c].heap = self.arena.pop(top);
            if self.part_node[part as usize] != top {
                // superseded by a later reschedule
                self.refresh(c as u32);
                continue;
            }
            self.part_node[part as usize] = NIL;

            let e = (part / 2) as usize;
            let (u, v, cost) = edges[e];
            let (here, there) = if part % 2 == 0 { (u, v) } else { (v, u) };
            let (root_here, load_here) = self.load(here, now);
            let (root_there, load_there) = self.load(there, now);
            debug_assert_eq!(root_here as usize, c);
            if root_here == root_there {
                self.refresh(c as u32);
                continue;
            }

            let remaining = cost - load_here - load_there;
            let other = self.clusters[root_there as usize];
            let next = if other.active {
                now + remaining / 2.0
            } else {
                now + remaining
            };
            if remaining <= tolerance || next <= now {
                self.merge(root_here, root_there, now, &mut active);
                result.tree_edges.push(e);
                continue;
            }

            let other_part = part ^ 1;
            self.schedule(root_here, part, next);
            if other.active {
                self.schedule(root_there, other_part, next);
                self.refresh(root_there);
            } else {
                // Fires the moment the frozen side is absorbed by an active cluster.
                self.schedule(root_there, other_part, other.ended);
            }
            self.refresh(c as u32);
        }
        result
    }

    fn schedule(&mut self, cluster: u32, part: u32, key: f64) {
        let cl = &mut self.clusters[cluster as usize];
        let (root, id) = self.arena.insert(cl.heap, key, part);
        cl.heap = root;
        self.part_node[part as usize] = id;
    }

    /// Re-announces an active cluster's earliest edge event.
    fn refresh(&mut self, cluster: u32) {
        let cl = &self.clusters[cluster as usize];
        if !cl.active {
            return;
        }
        match self.arena.peek(cl.heap) {
            Some((key, part)) => self
                .edge_events
                .set(cluster, make_key(key, ((part as u64 / 2) << 32) | cluster as u64)),
            None => self.edge_events.remove(cluster),
        }
    }

    /// Root cluster of `node` and the total moat width covering it.
    fn load(&mut self, node: u32, now: f64) -> (u32, f64) {
        self.path.clear();
        let mut x = node;
        while self.clusters[x as usize].up != x {
            self.path.push(x);
            x = self.clusters[x as usize].up;
        }
        let root = x;
        for i in (0..self.path.len()).rev() {
            let p = self.path[i] as usize;
            let up = self.clusters[p].up;
            if up != root {
                let add = self.clusters[up as usize].up_sum;
                self.clusters[p].up_sum += add;
                self.clusters[p].up = root;
            }
        }
        let below = if node == root {
            0.0
        } else {
            self.clusters[node as usize].up_sum
        };
        (root, below + self.clusters[root as usize].moat(now))
    }

    fn merge(&mut self, a: u32, b: u32, now: f64, active: &mut usize) {
        let id = self.clusters.len() as u32;
        self.edge_events.grow(id as usize + 1);
        self.deactivations.grow(id as usize + 1);
        let mut potential = 0.0;
        let mut heap = NIL;
        for x in [a, b] {
            let cl = self.clusters[x as usize];
            if cl.active {
                potential += (cl.created + cl.potential - now).max(0.0);
                *active -= 1;
                self.edge_events.remove(x);
                self.deactivations.remove(x);
            } else {
                self.arena.add_all(cl.heap, now - cl.ended);
            }
            heap = self.arena.meld(heap, cl.heap);
            let c = &mut self.clusters[x as usize];
            if c.active {
                c.ended = now;
                c.active = false;
            }
            c.up_sum = c.moat(now);
            c.up = id;
            c.heap = NIL;
        }
        self.clusters.push(Cluster {
            created: now,
            potential,
            ended: f64::INFINITY,
            active: true,
            heap,
            up: id,
            up_sum: 0.0,
        });
        *active += 1;
        self.deactivations.set(id, make_key(now + potential, id as u64));
        self.refresh(id);
    }
}
