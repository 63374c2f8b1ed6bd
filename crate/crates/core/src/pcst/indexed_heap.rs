//! Binary min-heap over ids `0..capacity` with in-place key updates.

const ABSENT: u32 = u32::MAX;

#[derive(Debug, Default)]
pub(crate) struct IndexedMinHeap {
    heap: Vec<u32>,
    pos: Vec<u32>,
    keys: Vec<u128>,
}

/// Order-preserving map from `f64` to `u64`.
#[inline]
pub(crate) fn ordered_bits(x: f64) -> u64 {
    let b = x.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

#[inline]
pub(crate) fn time_of(key: u128) -> f64 {
    let b = (key >> 64) as u64;
    f64::from_bits(if b >> 63 == 1 { b & !(1 << 63) } else { !b })
}

#[inline]
pub(crate) fn make_key(time: f64, tie: u64) -> u128 {
    ((ordered_bits(time) as u128) << 64) | tie as u128
}

impl IndexedMinHeap {
    pub fn reset(&mut self, capacity: usize) {
        self.heap.clear();
        self.pos.clear();
        self.pos.resize(capacity, ABSENT);
        self.keys.clear();
        self.keys.resize(capacity, 0);
    }

    pub fn grow(&mut self, capacity: usize) {
        if self.pos.len() < capacity {
            self.pos.resize(capacity, ABSENT);
            self.keys.resize(capacity, 0);
        }
    }

    pub fn peek(&self) -> Option<(u32, u128)> {
        self.heap.first().map(|&id| (id, self.keys[id as usize]))
    }

    pub fn set(&mut self, id: u32, key: u128) {
        let i = id as usize;
        let old = self.keys[i];
        self.keys[i] = key;
        if self.pos[i] == ABSENT {
            self.pos[i] = self.heap.len() as u32;
            self.heap.push(id);
            self.sift_up(self.heap.len() - 1);
        } else if key < old {
            self.sift_up(self.pos[i] as usize);
        } else {
            self.sift_down(self.pos[i] as usize);
        }
    }

    pub fn remove(&mut self, id: u32) {
        let p = self.pos[id as usize];
        if p == ABSENT {
            return;
        }
        let p = p as usize;
        self.pos[id as usize] = ABSENT;
        let last = self.heap.pop().unwrap();
        if p < self.heap.len() {
            self.heap[p] = last;
            self.pos[last as usize] = p as u32;
            self.sift_up(p);
            let p = self.pos[last as usize] as usize;
            self.sift_down(p);
        }
    }

    fn sift_up(&mut self, mut i: usize) {
        let id = self.heap[i];
        let key = self.keys[id as usize];
        while i > 0 {
            let parent = (i - 1) / 2;
            let pid = self.heap[parent];
            if self.keys[pid as usize] <= key {
                break;
            }
            self.heap[i] = pid;
            self.pos[pid as usize] = i as u32;
            i = parent;
        }
        self.heap[i] = id;
        self.pos[id as usize] = i as u32;
    }

    fn sift_down(&mut self, mut i: usize) {
        let n = self.heap.len();
        let id = self.heap[i];
        let key = self.keys[id as usize];
        loop {
            let left = 2 * i + 1;
            if left >= n {
                break;
            }
            let right = left + 1;
            let mut child = left;
            if right < n && self.keys[self.heap[right] as usize] < self.keys[self.heap[left] as usize] {
                child = right;
            }
            let cid = self.heap[child];
            if self.keys[cid as usize] >= key {
                break;
            }
            self.heap[i] = cid;
            self.pos[cid as usize] = i as u32;
            i = child;
        }
        self.heap[i] = id;
        self.pos[id as usize] = i as u32;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::collections::BTreeMap;

    #[test]
    fn key_encoding_preserves_order() {
        let xs = [-3.5, -0.0, 0.0, 1e-300, 0.5, 2.0, 1e300];
        for w in xs.windows(2) {
            assert!(ordered_bits(w[0]) <= ordered_bits(w[1]));
        }
        for &x in &xs {
            assert_eq!(time_of(make_key(x, 7)), x);
        }
    }

    #[test]
    fn agrees_with_ordered_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut heap = IndexedMinHeap::default();
        heap.reset(64);
        let mut shadow: BTreeMap<u32, u128> = BTreeMap::new();
        for _ in 0..5000 {
            let id = rng.gen_range(0..64u32);
            match rng.gen_range(0..3) {
                0 | 1 => {
                    let k = rng.gen_range(0..1000u128) * 64 + id as u128;
                    heap.set(id, k);
                    shadow.insert(id, k);
                }
                _ => {
                    heap.remove(id);
                    shadow.remove(&id);
                }
            }
            let expect = shadow.iter().map(|(&i, &k)| (k, i)).min();
            assert_eq!(heap.peek().map(|(i, k)| (k, i)), expect);
        }
    }
}
