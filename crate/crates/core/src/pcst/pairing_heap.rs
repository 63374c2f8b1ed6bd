//! Arena-backed pairing heaps supporting meld and add-to-all in O(1).
//!
//! Many heaps share one arena; a heap is identified by its root index. Each
//! node stores its key relative to the accumulated `child_offset` of its
//! ancestors, so shifting a whole heap only touches the root.

pub(crate) const NIL: u32 = u32::MAX;

#[derive(Debug, Clone, Copy)]
struct Node {
    key: f64,
    tag: u32,
    child_offset: f64,
    child: u32,
    sibling: u32,
}

#[derive(Debug, Default)]
pub(crate) struct PairingArena {
    nodes: Vec<Node>,
    scratch: Vec<u32>,
}

impl PairingArena {
    pub fn clear(&mut self) {
        self.nodes.clear();
    }

    #[inline]
    fn less(&self, a: u32, b: u32) -> bool {
        let (na, nb) = (&self.nodes[a as usize], &self.nodes[b as usize]);
        match na.key.total_cmp(&nb.key) {
            std::cmp::Ordering::Less => true,
            std::cmp::Ordering::Greater => false,
            std::cmp::Ordering::Equal => na.tag < nb.tag,
        }
    }

    /// Makes the larger of two roots a child of the smaller.
    fn link(&mut self, a: u32, b: u32) -> u32 {
        let (top, sub) = if self.less(b, a) { (b, a) } else { (a, b) };
        let offset = self.nodes[top as usize].child_offset;
        let first = self.nodes[top as usize].child;
        let s = &mut self.nodes[sub as usize];
        s.key -= offset;
        s.child_offset -= offset;
        s.sibling = first;
        self.nodes[top as usize].child = sub;
        top
    }

    pub fn meld(&mut self, a: u32, b: u32) -> u32 {
        match (a, b) {
            (NIL, x) | (x, NIL) => x,
            _ => self.link(a, b),
        }
    }

    /// Inserts `(key, tag)` into `root`; returns `(new_root, node)`.
    pub fn insert(&mut self, root: u32, key: f64, tag: u32) -> (u32, u32) {
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            key,
            tag,
            child_offset: 0.0,
            child: NIL,
            sibling: NIL,
        });
        (self.meld(root, id), id)
    }

    /// Adds `delta` to every key in the heap rooted at `root`.
    pub fn add_all(&mut self, root: u32, delta: f64) {
        if root != NIL {
            let n = &mut self.nodes[root as usize];
            n.key += delta;
            n.child_offset += delta;
        }
    }

    pub fn peek(&self, root: u32) -> Option<(f64, u32)> {
        (root != NIL).then(|| {
            let n = &self.nodes[root as usize];
            (n.key, n.tag)
        })
    }

    /// Removes the root; returns the new root.
    pub fn pop(&mut self, root: u32) -> u32 {
        let offset = self.nodes[root as usize].child_offset;
        let mut scratch = std::mem::take(&mut self.scratch);
        scratch.clear();
        let mut c = self.nodes[root as usize].child;
        while c != NIL {
            let n = &mut self.nodes[c as usize];
            let next = n.sibling;
            n.key += offset;
            n.child_offset += offset;
            n.sibling = NIL;
            scratch.push(c);
            c = next;
        }
        self.nodes[root as usize].child = NIL;

        // two-pass pairing
        let mut paired = 0;
        let mut i = 0;
        while i < scratch.len() {
            let merged = if i + 1 < scratch.len() {
                self.link(scratch[i], scratch[i + 1])
            } else {
                scratch[i]
            };
            scratch[paired] = merged;
            paired += 1;
            i += 2;
        }
        let mut result = NIL;
        for k in (0..paired).rev() {
            result = self.meld(result, scratch[k]);
        }
        self.scratch = scratch;
        result
    }
}
