//! Lazy funnelsort.
//!
//! An input of `n` elements is cut into `k = ⌈n^{1/d}⌉` segments, each
//! sorted recursively, and the sorted segments are merged by a `k`-merger.
//! The merger mirrors the k-partitioner: a `⌈√k⌉`-way merger on top of
//! middle buffers of `max(⌈k^{d/2}⌉, 16)` elements, each filled by a smaller
//! merger below it. Buffers are refilled on demand: a node whose buffer is
//! empty merges from its children until the buffer is full or both children
//! are exhausted.
//!
//! Recursion levels alternate between the data region and one scratch
//! region of the same size, so every level reads and writes each element
//! exactly once outside the merger.

use crate::arena::{Element, Memory, Region};
use crate::cachesim::{AccessHook, NoTrace};
use crate::error::Result;
use crate::partitioner::middle_buffer_len;

/// Inputs of at most this many elements are sorted by binary insertion.
pub const BASE_CASE: usize = 64;

fn ceil_sqrt(k: usize) -> usize {
    let mut r = (k as f64).sqrt() as usize;
    while r * r > k {
        r -= 1;
    }
    while r * r < k {
        r += 1;
    }
    r
}

fn split(k: usize) -> (usize, usize) {
    let group = k.div_ceil(ceil_sqrt(k));
    (group, k.div_ceil(group))
}

fn group_len(k: usize, group: usize, j: usize) -> usize {
    group.min(k - j * group)
}

/// Cells needed for the internal buffers of a `k`-merger.
pub fn merger_layout_len(k: usize, d: u32) -> usize {
    if k <= 2 {
        return 0;
    }
    let (group, groups) = split(k);
    let mid = middle_buffer_len(k, d);
    let mut len = merger_layout_len(groups, d);
    for j in 0..groups {
        let s = group_len(k, group, j);
        if s >= 2 {
            len += mid + merger_layout_len(s, d);
        }
    }
    len
}

#[derive(Debug, Clone, Copy)]
enum Source {
    Node(u32),
    Run(u32),
}

#[derive(Debug, Clone, Copy)]
struct MergeNode {
    buf: usize,
    cap: usize,
    head: usize,
    len: usize,
    done: bool,
    left: Source,
    right: Source,
}

struct Merger {
    nodes: Vec<MergeNode>,
    /// `(next, end)` cursors of the input runs.
    runs: Vec<(usize, usize)>,
    d: u32,
}

impl Merger {
    fn build(runs: &[Region], d: u32, layout: usize) -> (Self, Source) {
        let mut m = Merger {
            nodes: Vec::with_capacity(runs.len()),
            runs: runs.iter().map(|r| (r.start, r.end())).collect(),
            d,
        };
        let inputs: Vec<Source> = (0..runs.len() as u32).map(Source::Run).collect();
        let root = m.build_rec(&inputs, layout);
        (m, root)
    }

    fn build_rec(&mut self, inputs: &[Source], base: usize) -> Source {
        let k = inputs.len();
        match k {
            1 => inputs[0],
            2 => {
                self.nodes.push(MergeNode {
                    buf: 0,
                    cap: 0,
                    head: 0,
                    len: 0,
                    done: false,
                    left: inputs[0],
                    right: inputs[1],
                });
                Source::Node((self.nodes.len() - 1) as u32)
            }
            _ => {
                let (group, groups) = split(k);
                let mid = middle_buffer_len(k, self.d);
                let mut cursor = base + merger_layout_len(groups, self.d);
                let mut mids = Vec::with_capacity(groups);
                for j in 0..groups {
                    if group_len(k, group, j) >= 2 {
                        mids.push(cursor);
                        cursor += mid;
                    } else {
                        mids.push(usize::MAX);
                    }
                }
                let mut heads = Vec::with_capacity(groups);
                for (j, &mid_at) in mids.iter().enumerate() {
                    let s = group_len(k, group, j);
                    let lo = j * group;
                    if s == 1 {
                        heads.push(inputs[lo]);
                        continue;
                    }
                    let t = self.build_rec(&inputs[lo..lo + s], cursor);
                    cursor += merger_layout_len(s, self.d);
                    if let Source::Node(r) = t {
                        let n = &mut self.nodes[r as usize];
                        n.buf = mid_at;
                        n.cap = mid;
                    }
                    heads.push(t);
                }
                self.build_rec(&heads, base)
            }
        }
    }

    fn peek<T: Element, H: AccessHook>(&mut self, mem: &mut Memory<T, H>, s: Source) -> Option<T> {
        match s {
            Source::Run(r) => {
                let (next, end) = self.runs[r as usize];
                (next < end).then(|| mem.get(next))
            }
            Source::Node(c) => {
                let c = c as usize;
                let n = self.nodes[c];
                if n.head < n.len {
                    return Some(mem.get(n.buf + n.head));
                }
                if n.done {
                    return None;
                }
                self.fill(mem, c);
                let n = self.nodes[c];
                (n.len > 0).then(|| mem.get(n.buf))
            }
        }
    }

    fn advance(&mut self, s: Source) {
        match s {
            Source::Run(r) => self.runs[r as usize].0 += 1,
            Source::Node(c) => self.nodes[c as usize].head += 1,
        }
    }

    /// Refills the (fully consumed) buffer of node `c`.
    fn fill<T: Element, H: AccessHook>(&mut self, mem: &mut Memory<T, H>, c: usize) {
        let MergeNode {
            buf,
            cap,
            left,
            right,
            ..
        } = self.nodes[c];
        let mut len = 0;
        let mut lh = self.peek(mem, left);
        let mut rh = self.peek(mem, right);
        while len < cap {
            let take_left = match (&lh, &rh) {
                (None, None) => {
                    self.nodes[c].done = true;
                    break;
                }
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (Some(x), Some(y)) => !mem.less(y, x),
            };
            if take_left {
                mem.set(buf + len, lh.unwrap());
                self.advance(left);
                lh = self.peek(mem, left);
            } else {
                mem.set(buf + len, rh.unwrap());
                self.advance(right);
                rh = self.peek(mem, right);
            }
            len += 1;
        }
        if lh.is_none() && rh.is_none() {
            self.nodes[c].done = true;
        }
        let n = &mut self.nodes[c];
        n.head = 0;
        n.len = len;
    }
}

// binary insertion: about lg(n!) comparisons
fn insertion_sort<T: Element, H: AccessHook>(mem: &mut Memory<T, H>, r: Region) {
    for i in r.start + 1..r.end() {
        let x = mem.get(i);
        let (mut lo, mut hi) = (r.start, i);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let y = mem.get(mid);
            if mem.less(&x, &y) {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        for j in (lo..i).rev() {
            let y = mem.get(j);
            mem.set(j + 1, y);
        }
        if lo != i {
            mem.set(lo, x);
        }
    }
}

fn segments(n: usize, d: u32) -> usize {
    let k = (n as f64).powf(1.0 / d as f64).ceil() as usize;
    let k = k.clamp(2, n);
    let seg = n.div_ceil(k);
    n.div_ceil(seg)
}

/// Sorts the contents of `a`; the result lands in `a` if `into_a`, else in
/// `b`. Both regions have the same length; the other one is scratch.
fn sort_rec<T: Element, H: AccessHook>(
    mem: &mut Memory<T, H>,
    a: Region,
    b: Region,
    into_a: bool,
    d: u32,
) -> Result<()> {
    let n = a.len;
    if n <= BASE_CASE {
        insertion_sort(mem, a);
        if !into_a {
            mem.copy(a, b.start);
        }
        return Ok(());
    }
    let k = segments(n, d);
    let seg = n.div_ceil(k);
    let (src, dst) = if into_a { (b, a) } else { (a, b) };
    let mut runs = Vec::with_capacity(k);
    for i in 0..k {
        let off = i * seg;
        let len = seg.min(n - off);
        // segment results go to `src`, which is `a` exactly when `into_a` is false
        sort_rec(mem, a.slice(off, len), b.slice(off, len), !into_a, d)?;
        runs.push(src.slice(off, len));
    }
    let mark = mem.mark();
    let layout = mem.alloc(merger_layout_len(k, d))?;
    let (mut merger, root) = Merger::build(&runs, d, layout.start);
    let Source::Node(r) = root else {
        unreachable!("k >= 2 always yields a merge node")
    };
    let node = &mut merger.nodes[r as usize];
    node.buf = dst.start;
    node.cap = n;
    merger.fill(mem, r as usize);
    debug_assert_eq!(merger.nodes[r as usize].len, n);
    mem.release(mark);
    Ok(())
}

/// Sorts `region` in place, using `region.len` scratch cells on the stack.
pub fn funnelsort_in<T: Element, H: AccessHook>(
    mem: &mut Memory<T, H>,
    region: Region,
    d: u32,
) -> Result<()> {
    if region.len <= 1 {
        return Ok(());
    }
    let mark = mem.mark();
    let scratch = mem.alloc(region.len)?;
    let res = sort_rec(mem, region, scratch, true, d);
    mem.release(mark);
    res
}

/// Returns a sorted copy of `s` (structural exponent `d = 3`).
pub fn funnelsort<T: Element>(s: &[T]) -> Vec<T> {
    funnelsort_with(s, 3).expect("default arena holds any slice that fits in memory")
}

pub fn funnelsort_with<T: Element>(s: &[T], d: u32) -> Result<Vec<T>> {
    let mut mem = Memory::<T, NoTrace>::untraced();
    let r = mem.load(s)?;
    funnelsort_in(&mut mem, r, d)?;
    Ok(mem.peek_region(r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cachesim::CacheModel;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sorts_example_array() {
        let s = [67u64, 30, 45, 33, 15, 99, 26, 90, 55, 9, 96, 45, 95, 31, 3];
        assert_eq!(
            funnelsort(&s),
            vec![3, 9, 15, 26, 30, 31, 33, 45, 45, 55, 67, 90, 95, 96, 99]
        );
        assert_eq!(funnelsort::<u64>(&[]), Vec::<u64>::new());
        assert_eq!(funnelsort(&[7u64]), vec![7]);
    }

    #[test]
    fn random_inputs_match_std_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for round in 0..300 {
            let n = match round % 3 {
                0 => rng.gen_range(0..200),
                1 => rng.gen_range(200..5000),
                _ => rng.gen_range(5000..40_000),
            };
            let u = if round % 2 == 0 { 16 } else { u64::MAX };
            let s: Vec<u64> = (0..n).map(|_| rng.gen_range(0..u)).collect();
            let d = rng.gen_range(2..=4);
            let mut want = s.clone();
            want.sort_unstable();
            assert_eq!(funnelsort_with(&s, d).unwrap(), want, "n={n} d={d}");
        }
    }

    #[test]
    fn large_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let s: Vec<u64> = (0..1 << 20).map(|_| rng.gen()).collect();
        let mut want = s.clone();
        want.sort_unstable();
        assert_eq!(funnelsort(&s), want);
    }

    #[test]
    fn presorted_and_reversed() {
        let asc: Vec<u64> = (0..10_000).collect();
        let desc: Vec<u64> = asc.iter().rev().copied().collect();
        assert_eq!(funnelsort(&asc), asc);
        assert_eq!(funnelsort(&desc), asc);
        assert_eq!(funnelsort(&vec![3u64; 5000]), vec![3u64; 5000]);
    }

    #[test]
    fn merger_space_is_polynomial_in_k() {
        for k in [4usize, 16, 64, 256, 1024] {
            let l = merger_layout_len(k, 3);
            assert!(l as f64 <= 4.0 * (k as f64).powi(2) + 64.0 * k as f64, "k={k} len={l}");
        }
    }

    #[test]
    fn in_cache_sort_costs_a_few_scans() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 2048;
        let s: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
        let mut mem = Memory::new(CacheModel::new(1 << 16, 64).unwrap());
        let r = mem.load(&s).unwrap();
        funnelsort_in(&mut mem, r, 3).unwrap();
        let misses = mem.hook().misses();
        assert!(misses <= 4 * (n as u64 / 64), "misses={misses}");
    }
}
