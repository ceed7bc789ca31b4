//! Cache-oblivious k-partitioner.
//!
//! A k-partitioner is a tree of `k - 1` binary partitioning nodes that
//! distributes a batch of elements around `k - 1` sorted pivots into `k`
//! output buckets. It is built recursively: a `⌈√k⌉`-way partitioner on
//! top, one middle buffer per top output, and a smaller partitioner below
//! each middle buffer. Middle buffers of a k-way level hold
//! `max(⌈k^{d/2}⌉, 16)` elements.
//!
//! The node headers (one pivot cell per node) and all internal buffers are
//! laid out in a single arena region in recursive order: top part, then the
//! middle buffers, then the bottom parts.
//!
//! Elements flow top-down. A node routes `x < pivot` left and `x >= pivot`
//! right. When a child's buffer fills up the child is flushed completely
//! before its parent continues, and after the batch is consumed a top-down
//! pass empties every buffer, so nothing is left inside the tree when
//! [`Partitioner::distribute`] returns.

use crate::arena::{Element, Memory, Region};
use crate::cachesim::{AccessHook, NoTrace};
use crate::error::{Error, Result};

/// Smallest internal buffer, in elements.
pub const MIN_BUFFER: usize = 16;

/// Capacity of the middle buffers of a `k`-way recursion level.
pub fn middle_buffer_len(k: usize, d: u32) -> usize {
    let c = (k as f64).powf(d as f64 / 2.0).ceil();
    let c = if c >= (usize::MAX >> 2) as f64 {
        usize::MAX >> 2
    } else {
        c as usize
    };
    c.max(MIN_BUFFER)
}

/// `(group, groups)`: bottoms cover `group` buckets each (the last one may
/// cover fewer) and the top partitioner is `groups`-way.
fn split(k: usize) -> (usize, usize) {
    let top = ceil_sqrt(k);
    let group = k.div_ceil(top);
    (group, k.div_ceil(group))
}

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

fn group_len(k: usize, group: usize, j: usize) -> usize {
    group.min(k - j * group)
}

/// Cells needed for the headers and internal buffers of a `k`-partitioner.
pub fn layout_len(k: usize, d: u32) -> usize {
    match k {
        0 | 1 => 0,
        2 => 1,
        _ => {
            let (group, groups) = split(k);
            let mid = middle_buffer_len(k, d);
            let mut len = layout_len(groups, d);
            for j in 0..groups {
                let s = group_len(k, group, j);
                if s >= 2 {
                    len += mid + layout_len(s, d);
                }
            }
            len
        }
    }
}

/// Recursive structure of a k-partitioner, for inspection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    /// A single output, no node.
    Pass,
    /// One binary node.
    Node,
    Composite {
        top: Box<Shape>,
        /// Capacities of the middle buffers, `None` where a bottom is a
        /// single bucket fed directly.
        middle: Vec<Option<usize>>,
        bottoms: Vec<Shape>,
    },
}

impl Shape {
    pub fn of(k: usize, d: u32) -> Shape {
        match k {
            0 | 1 => Shape::Pass,
            2 => Shape::Node,
            _ => {
                let (group, groups) = split(k);
                let mid = middle_buffer_len(k, d);
                let sizes: Vec<usize> = (0..groups).map(|j| group_len(k, group, j)).collect();
                Shape::Composite {
                    top: Box::new(Shape::of(groups, d)),
                    middle: sizes.iter().map(|&s| (s >= 2).then_some(mid)).collect(),
                    bottoms: sizes.iter().map(|&s| Shape::of(s, d)).collect(),
                }
            }
        }
    }

    pub fn nodes(&self) -> usize {
        match self {
            Shape::Pass => 0,
            Shape::Node => 1,
            Shape::Composite { top, bottoms, .. } => {
                top.nodes() + bottoms.iter().map(Shape::nodes).sum::<usize>()
            }
        }
    }
}

/// An append-only output bucket backed by arena cells `[start, start + cap)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bucket {
    pub start: usize,
    pub cap: usize,
    pub len: usize,
}

impl Bucket {
    pub fn new(start: usize, cap: usize) -> Self {
        Self { start, cap, len: 0 }
    }

    pub fn region(&self) -> Region {
        Region::new(self.start, self.len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Node(u32),
    Bucket(u32),
}

#[derive(Debug, Clone, Copy)]
struct Node {
    /// Arena cell holding this node's pivot.
    header: usize,
    buf: usize,
    cap: usize,
    fill: usize,
    left: Target,
    right: Target,
    inverted: bool,
}

/// A k-partitioner built over an arena layout region.
#[derive(Debug, Clone)]
pub struct Partitioner {
    nodes: Vec<Node>,
    root: Target,
    k: usize,
    d: u32,
}

impl Partitioner {
    /// Builds a partitioner for the sorted pivots in `pivots`, allocating its
    /// layout on top of the element stack.
    pub fn new<T: Element, H: AccessHook>(
        mem: &mut Memory<T, H>,
        pivots: Region,
        d: u32,
    ) -> Result<Self> {
        let layout = mem.alloc(layout_len(pivots.len + 1, d))?;
        Self::build_at(mem, pivots, d, layout)
    }

    /// Builds into an existing layout region of at least
    /// [`layout_len`]`(pivots.len + 1, d)` cells, checking pivot order.
    pub fn build_at<T: Element, H: AccessHook>(
        mem: &mut Memory<T, H>,
        pivots: Region,
        d: u32,
        layout: Region,
    ) -> Result<Self> {
        for i in 1..pivots.len {
            let a = mem.get(pivots.start + i - 1);
            let b = mem.get(pivots.start + i);
            if mem.less(&b, &a) {
                return Err(Error::UnsortedPivots { index: i });
            }
        }
        Ok(Self::build_trusted(mem, pivots, d, layout, None))
    }

    /// Builds without checking pivot order. `inverted` names a node (in
    /// build order) whose routing is reversed.
    pub(crate) fn build_trusted<T: Element, H: AccessHook>(
        mem: &mut Memory<T, H>,
        pivots: Region,
        d: u32,
        layout: Region,
        inverted: Option<usize>,
    ) -> Self {
        let k = pivots.len + 1;
        assert!(layout.len >= layout_len(k, d), "partitioner layout too small");
        let mut p = Partitioner {
            nodes: Vec::with_capacity(k - 1),
            root: Target::Bucket(0),
            k,
            d,
        };
        let outputs: Vec<Target> = (0..k as u32).map(Target::Bucket).collect();
        let pivot_cells: Vec<usize> = (0..pivots.len).map(|i| pivots.start + i).collect();
        p.root = p.build_rec(mem, &outputs, &pivot_cells, layout.start);
        if let Some(i) = inverted {
            if let Some(n) = p.nodes.get_mut(i) {
                n.inverted = true;
            }
        }
        p
    }

    fn build_rec<T: Element, H: AccessHook>(
        &mut self,
        mem: &mut Memory<T, H>,
        outputs: &[Target],
        pivots: &[usize],
        base: usize,
    ) -> Target {
        let k = outputs.len();
        debug_assert_eq!(pivots.len() + 1, k);
        match k {
            1 => outputs[0],
            2 => {
                let v = mem.get(pivots[0]);
                mem.set(base, v);
                self.nodes.push(Node {
                    header: base,
                    buf: 0,
                    cap: 0,
                    fill: 0,
                    left: outputs[0],
                    right: outputs[1],
                    inverted: false,
                });
                Target::Node((self.nodes.len() - 1) as u32)
            }
            _ => {
                let (group, groups) = split(k);
                let mid = middle_buffer_len(k, self.d);
                let mut cursor = base + layout_len(groups, self.d);
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
                for j in 0..groups {
                    let s = group_len(k, group, j);
                    let lo = j * group;
                    if s == 1 {
                        heads.push(outputs[lo]);
                        continue;
                    }
                    let t = self.build_rec(
                        mem,
                        &outputs[lo..lo + s],
                        &pivots[lo..lo + s - 1],
                        cursor,
                    );
                    cursor += layout_len(s, self.d);
                    if let Target::Node(r) = t {
                        let n = &mut self.nodes[r as usize];
                        n.buf = mids[j];
                        n.cap = mid;
                    }
                    heads.push(t);
                }
                let top_pivots: Vec<usize> =
                    (1..groups).map(|j| pivots[j * group - 1]).collect();
                self.build_rec(mem, &heads, &top_pivots, base)
            }
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Elements currently held in internal buffers.
    pub fn buffered(&self) -> usize {
        self.nodes.iter().map(|n| n.fill).sum()
    }

    /// Routes every element of `batch` into `out` (one bucket per output, in
    /// pivot order). All internal buffers are empty on return.
    pub fn distribute<T: Element, H: AccessHook>(
        &mut self,
        mem: &mut Memory<T, H>,
        batch: Region,
        out: &mut [Bucket],
    ) -> Result<()> {
        assert_eq!(out.len(), self.k, "one bucket per partitioner output");
        match self.root {
            Target::Bucket(b) => {
                for i in batch.start..batch.end() {
                    let x = mem.get(i);
                    push_bucket(mem, out, b as usize, x)?;
                }
            }
            Target::Node(r) => {
                let node = self.nodes[r as usize];
                let pivot = mem.get(node.header);
                for i in batch.start..batch.end() {
                    let x = mem.get(i);
                    self.route(mem, out, &node, &pivot, x)?;
                }
                self.flush_all(mem, out, self.root)?;
            }
        }
        Ok(())
    }

    #[inline]
    fn route<T: Element, H: AccessHook>(
        &mut self,
        mem: &mut Memory<T, H>,
        out: &mut [Bucket],
        node: &Node,
        pivot: &T,
        x: T,
    ) -> Result<()> {
        let left = mem.less(&x, pivot) != node.inverted;
        let t = if left { node.left } else { node.right };
        match t {
            Target::Bucket(b) => push_bucket(mem, out, b as usize, x),
            Target::Node(c) => {
                let c = c as usize;
                let n = &mut self.nodes[c];
                let at = n.buf + n.fill;
                n.fill += 1;
                let full = n.fill == n.cap;
                mem.set(at, x);
                if full {
                    self.flush(mem, out, c)?;
                }
                Ok(())
            }
        }
    }

    fn flush<T: Element, H: AccessHook>(
        &mut self,
        mem: &mut Memory<T, H>,
        out: &mut [Bucket],
        c: usize,
    ) -> Result<()> {
        let node = self.nodes[c];
        if node.fill == 0 {
            return Ok(());
        }
        let pivot = mem.get(node.header);
        for i in node.buf..node.buf + node.fill {
            let x = mem.get(i);
            self.route(mem, out, &node, &pivot, x)?;
        }
        self.nodes[c].fill = 0;
        Ok(())
    }

    fn flush_all<T: Element, H: AccessHook>(
        &mut self,
        mem: &mut Memory<T, H>,
        out: &mut [Bucket],
        t: Target,
    ) -> Result<()> {
        if let Target::Node(c) = t {
            self.flush(mem, out, c as usize)?;
            let n = self.nodes[c as usize];
            self.flush_all(mem, out, n.left)?;
            self.flush_all(mem, out, n.right)?;
        }
        Ok(())
    }
}

#[inline]
fn push_bucket<T: Element, H: AccessHook>(
    mem: &mut Memory<T, H>,
    out: &mut [Bucket],
    b: usize,
    x: T,
) -> Result<()> {
    let bucket = &mut out[b];
    if bucket.len == bucket.cap {
        return Err(Error::BucketOverflow {
            bucket: b,
            capacity: bucket.cap,
        });
    }
    let at = bucket.start + bucket.len;
    bucket.len += 1;
    mem.set(at, x);
    Ok(())
}

/// Partitions `batch` around sorted `pivots` into `pivots.len() + 1` buckets.
pub fn partition_slice<T: Element>(pivots: &[T], batch: &[T], d: u32) -> Result<Vec<Vec<T>>> {
    let mut mem = Memory::<T, NoTrace>::untraced();
    let pr = mem.load(pivots)?;
    let br = mem.load(batch)?;
    let mut part = Partitioner::new(&mut mem, pr, d)?;
    let k = pivots.len() + 1;
    let mut out = Vec::with_capacity(k);
    for _ in 0..k {
        let r = mem.alloc(batch.len())?;
        out.push(Bucket::new(r.start, r.len));
    }
    part.distribute(&mut mem, br, &mut out)?;
    Ok(out.iter().map(|b| mem.peek_region(b.region())).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EXAMPLE: [u64; 15] = [67, 30, 45, 33, 15, 99, 26, 90, 55, 9, 96, 45, 95, 31, 3];

    /// Bucket index by binary search: the number of pivots `<= x`.
    fn classify(pivots: &[u64], batch: &[u64]) -> Vec<Vec<u64>> {
        let mut out = vec![Vec::new(); pivots.len() + 1];
        for &x in batch {
            out[pivots.partition_point(|&p| p <= x)].push(x);
        }
        out
    }

    fn sorted(mut v: Vec<u64>) -> Vec<u64> {
        v.sort_unstable();
        v
    }

    #[test]
    fn example_batch() {
        let got = partition_slice(&[30, 55, 95], &EXAMPLE, 3).unwrap();
        let got: Vec<_> = got.into_iter().map(sorted).collect();
        assert_eq!(
            got,
            vec![
                vec![3, 9, 15, 26],
                vec![30, 31, 33, 45, 45],
                vec![55, 67, 90],
                vec![95, 96, 99]
            ]
        );
    }

    #[test]
    fn no_pivots_passes_through_in_order() {
        let got = partition_slice(&[], &EXAMPLE, 3).unwrap();
        assert_eq!(got, vec![EXAMPLE.to_vec()]);
        assert_eq!(Shape::of(1, 3), Shape::Pass);
    }

    #[test]
    fn four_way_has_three_nodes() {
        let mut mem = Memory::<u64>::untraced();
        let pr = mem.load(&[30, 55, 95]).unwrap();
        let p = Partitioner::new(&mut mem, pr, 3).unwrap();
        assert_eq!(p.node_count(), 3);
        assert_eq!(p.k(), 4);
    }

    #[test]
    fn sixteen_way_structure() {
        let shape = Shape::of(16, 2);
        let Shape::Composite {
            top,
            middle,
            bottoms,
        } = &shape
        else {
            panic!("expected a composite partitioner");
        };
        // top sqrt(16)-partitioner, 4 middle buffers of 16^{2/2}, 4 bottom 4-partitioners
        assert_eq!(top.nodes(), 3);
        assert_eq!(middle, &vec![Some(16); 4]);
        assert_eq!(bottoms.len(), 4);
        assert!(bottoms.iter().all(|b| b.nodes() == 3));
        assert_eq!(shape.nodes(), 15);
    }

    #[test]
    fn node_count_is_k_minus_one() {
        for k in 1..200 {
            assert_eq!(Shape::of(k, 3).nodes(), k - 1, "k={k}");
            let mut mem = Memory::<u64>::untraced();
            let pivots: Vec<u64> = (0..k as u64 - 1).collect();
            let pr = mem.load(&pivots).unwrap();
            let p = Partitioner::new(&mut mem, pr, 3).unwrap();
            assert_eq!(p.node_count(), k - 1);
        }
    }

    #[test]
    fn rejects_unsorted_pivots() {
        assert!(matches!(
            partition_slice(&[5u64, 3], &[1], 3),
            Err(Error::UnsortedPivots { index: 1 })
        ));
    }

    #[test]
    fn bucket_overflow_is_an_error() {
        let mut mem = Memory::<u64>::untraced();
        let pr = mem.load(&[10]).unwrap();
        let br = mem.load(&[1, 2, 3, 20]).unwrap();
        let mut p = Partitioner::new(&mut mem, pr, 3).unwrap();
        let r = mem.alloc(4).unwrap();
        let mut out = [Bucket::new(r.start, 2), Bucket::new(r.start + 2, 2)];
        assert!(matches!(
            p.distribute(&mut mem, br, &mut out),
            Err(Error::BucketOverflow { bucket: 0, .. })
        ));
    }

    #[test]
    fn fuzz_against_binary_search() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for round in 0..1000 {
            let k = rng.gen_range(1..=64);
            let n = rng.gen_range(0..=4096);
            let universe = if round % 3 == 0 { 20 } else { 1_000_000 };
            let mut pivots: Vec<u64> = (0..k - 1).map(|_| rng.gen_range(0..universe)).collect();
            pivots.sort_unstable();
            let batch: Vec<u64> = (0..n).map(|_| rng.gen_range(0..universe)).collect();
            let d = rng.gen_range(2..=4);
            let got = partition_slice(&pivots, &batch, d).unwrap();
            let want = classify(&pivots, &batch);
            for (g, w) in got.into_iter().zip(want) {
                assert_eq!(sorted(g), sorted(w));
            }
        }
    }

    #[test]
    fn buffers_empty_after_distribute() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut mem = Memory::<u64>::untraced();
        let mut pivots: Vec<u64> = (0..40).map(|_| rng.gen()).collect();
        pivots.sort_unstable();
        let batch: Vec<u64> = (0..10_000).map(|_| rng.gen()).collect();
        let pr = mem.load(&pivots).unwrap();
        let br = mem.load(&batch).unwrap();
        let mut p = Partitioner::new(&mut mem, pr, 3).unwrap();
        let mut out: Vec<Bucket> = (0..41)
            .map(|_| {
                let r = mem.alloc(batch.len()).unwrap();
                Bucket::new(r.start, r.len)
            })
            .collect();
        p.distribute(&mut mem, br, &mut out).unwrap();
        assert_eq!(p.buffered(), 0);
        assert_eq!(out.iter().map(|b| b.len).sum::<usize>(), batch.len());
        for (i, b) in out.iter().enumerate() {
            for x in mem.peek_region(b.region()) {
                assert!(i == 0 || pivots[i - 1] <= x);
                assert!(i == 40 || x <= pivots[i]);
            }
        }
    }

    #[test]
    fn working_space_is_polynomial_in_k() {
        for d in 2..=4u32 {
            let ratio = |k: usize| layout_len(k, d) as f64 / (k as f64).powf((d + 1) as f64 / 2.0);
            let worst = (4..=4096).map(ratio).fold(0.0, f64::max);
            // ⌈⌉ slack and the 16-element floor only matter for small k
            assert!(worst < 40.0, "d={d} worst={worst}");
            assert!(ratio(4096) < 4.0, "d={d} ratio={}", ratio(4096));
        }
    }

    #[test]
    fn comparisons_scale_with_lg_k() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for &(k, n) in &[(8usize, 4096usize), (64, 1 << 16), (256, 1 << 17)] {
            let mut pivots: Vec<u64> = (0..k - 1).map(|_| rng.gen()).collect();
            pivots.sort_unstable();
            let batch: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
            let mut mem = Memory::<u64>::untraced();
            let pr = mem.load(&pivots).unwrap();
            let br = mem.load(&batch).unwrap();
            let layout = mem.alloc(layout_len(k, 3)).unwrap();
            let mut p = Partitioner::build_trusted(&mut mem, pr, 3, layout, None);
            let mut out: Vec<Bucket> = (0..k)
                .map(|_| {
                    let r = mem.alloc(n).unwrap();
                    Bucket::new(r.start, r.len)
                })
                .collect();
            let before = mem.comparisons();
            p.distribute(&mut mem, br, &mut out).unwrap();
            let per = (mem.comparisons() - before) as f64 / (n as f64 * (k as f64).log2());
            assert!(per <= 1.5, "k={k} per-element-level={per}");
        }
    }
}
