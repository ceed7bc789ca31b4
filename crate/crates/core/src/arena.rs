//! Stack-disciplined, traced working memory.
//!
//! Every algorithm in this crate keeps its element data in a [`Memory`]:
//! one LIFO stack of elements and one LIFO stack of machine words (ranks,
//! gap sizes, weights). Both stacks live in a single element-granular address
//! space, words above elements, and every read or write is reported to the
//! memory's [`AccessHook`]. Comparisons made through [`Memory::less`] are
//! counted.

use crate::cachesim::{AccessHook, NoTrace};
use crate::error::{Error, Result};

/// Values the algorithms can select and sort.
pub trait Element: Copy + Ord + Default {}

impl<T: Copy + Ord + Default> Element for T {}

/// A contiguous run of cells in one of the two stacks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Region {
    pub start: usize,
    pub len: usize,
}

impl Region {
    pub const fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    pub const fn end(&self) -> usize {
        self.start + self.len
    }

    pub const fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Sub-region `[offset, offset + len)` relative to this region's start.
    pub fn slice(&self, offset: usize, len: usize) -> Region {
        debug_assert!(offset + len <= self.len);
        Region::new(self.start + offset, len)
    }

    pub fn split_at(&self, mid: usize) -> (Region, Region) {
        (self.slice(0, mid), self.slice(mid, self.len - mid))
    }
}

/// Stack positions to roll back to with [`Memory::release`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Mark {
    cells: usize,
    words: usize,
}

/// Ceilings for the two stacks, in cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ArenaLimits {
    pub cells: usize,
    pub words: usize,
}

impl ArenaLimits {
    /// Generous ceilings for multiple selection of `q` ranks over `n` elements.
    pub fn for_problem(n: usize, q: usize) -> Self {
        let depth = usize::BITS - n.max(2).leading_zeros();
        Self {
            cells: 16 * n + q + 4096,
            words: (q + 2) * (2 * depth as usize + 8) + 1024,
        }
    }
}

impl Default for ArenaLimits {
    fn default() -> Self {
        Self {
            cells: 1 << 26,
            words: 1 << 22,
        }
    }
}

/// Comparisons performed through an instrumented comparator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ComparisonCounter {
    count: u64,
}

impl ComparisonCounter {
    #[inline(always)]
    pub fn bump(&mut self) {
        self.count += 1;
    }

    pub fn get(&self) -> u64 {
        self.count
    }
}

/// Structural events recorded while recording is enabled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event<T> {
    /// One invocation of the multiple-selection recursion.
    Level {
        depth: u32,
        n: usize,
        q: usize,
        delta: usize,
        sorted: bool,
        /// Global rank of the element just below this subproblem.
        rank_offset: usize,
    },
    /// Multi-partition finished with `k` buckets.
    Partitioned { n: usize, delta: usize, k: usize },
    /// Bucket sizes in logical order, before a batch is distributed.
    Batch { sizes: Vec<usize> },
    /// An overflowing bucket of `size` was split.
    Split {
        size: usize,
        left: usize,
        right: usize,
    },
    /// A recursive subproblem strictly between global ranks `lo` and `hi`.
    Recurse {
        depth: u32,
        lo: usize,
        hi: usize,
        content: Vec<T>,
    },
    Report { rank: usize },
}

/// Working memory shared by all algorithms of one run.
pub struct Memory<T, H = NoTrace> {
    cells: Vec<T>,
    top: usize,
    cell_high: usize,
    words: Vec<u64>,
    wtop: usize,
    word_high: usize,
    limits: ArenaLimits,
    word_base: u64,
    hook: H,
    comparisons: ComparisonCounter,
    events: Option<Vec<Event<T>>>,
}

impl<T: Element> Memory<T, NoTrace> {
    pub fn untraced() -> Self {
        Self::new(NoTrace)
    }
}

impl<T: Element, H: AccessHook> Memory<T, H> {
    pub fn new(hook: H) -> Self {
        Self::with_limits(hook, ArenaLimits::default())
    }

    pub fn with_limits(hook: H, limits: ArenaLimits) -> Self {
        const ALIGN: usize = 1 << 16;
        let word_base = limits.cells.div_ceil(ALIGN).max(1) * ALIGN;
        Self {
            cells: Vec::new(),
            top: 0,
            cell_high: 0,
            words: Vec::new(),
            wtop: 0,
            word_high: 0,
            limits,
            word_base: word_base as u64,
            hook,
            comparisons: ComparisonCounter::default(),
            events: None,
        }
    }

    pub fn limits(&self) -> ArenaLimits {
        self.limits
    }

    pub fn hook(&self) -> &H {
        &self.hook
    }

    pub fn hook_mut(&mut self) -> &mut H {
        &mut self.hook
    }

    pub fn into_hook(self) -> H {
        self.hook
    }

    pub fn comparisons(&self) -> u64 {
        self.comparisons.get()
    }

    /// Highest element and word stack depths reached so far.
    pub fn high_water(&self) -> (usize, usize) {
        (self.cell_high, self.word_high)
    }

    pub fn mark(&self) -> Mark {
        Mark {
            cells: self.top,
            words: self.wtop,
        }
    }

    /// Pops both stacks back to `mark`.
    pub fn release(&mut self, mark: Mark) {
        assert!(
            mark.cells <= self.top && mark.words <= self.wtop,
            "arena released out of order"
        );
        self.top = mark.cells;
        self.wtop = mark.words;
    }

    pub fn alloc(&mut self, len: usize) -> Result<Region> {
        if self.top + len > self.limits.cells {
            return Err(Error::ArenaOverflow {
                requested: len,
                used: self.top,
                limit: self.limits.cells,
            });
        }
        let r = Region::new(self.top, len);
        self.top += len;
        if self.top > self.cells.len() {
            self.cells.resize(self.top, T::default());
        }
        self.cell_high = self.cell_high.max(self.top);
        Ok(r)
    }

    pub fn alloc_words(&mut self, len: usize) -> Result<Region> {
        if self.wtop + len > self.limits.words {
            return Err(Error::ArenaOverflow {
                requested: len,
                used: self.wtop,
                limit: self.limits.words,
            });
        }
        let r = Region::new(self.wtop, len);
        self.wtop += len;
        if self.wtop > self.words.len() {
            self.words.resize(self.wtop, 0);
        }
        self.word_high = self.word_high.max(self.wtop);
        Ok(r)
    }

    /// Places `data` in fresh cells without reporting any access: the input
    /// is considered to already reside in memory.
    pub fn load(&mut self, data: &[T]) -> Result<Region> {
        let r = self.alloc(data.len())?;
        self.cells[r.start..r.end()].copy_from_slice(data);
        Ok(r)
    }

    pub fn load_words(&mut self, data: &[u64]) -> Result<Region> {
        let r = self.alloc_words(data.len())?;
        self.words[r.start..r.end()].copy_from_slice(data);
        Ok(r)
    }

    #[inline(always)]
    pub fn get(&mut self, i: usize) -> T {
        debug_assert!(i < self.top);
        self.hook.access(i as u64, 1);
        self.cells[i]
    }

    #[inline(always)]
    pub fn set(&mut self, i: usize, v: T) {
        debug_assert!(i < self.top);
        self.hook.access(i as u64, 1);
        self.cells[i] = v;
    }

    #[inline]
    pub fn swap(&mut self, i: usize, j: usize) {
        let a = self.get(i);
        let b = self.get(j);
        self.set(i, b);
        self.set(j, a);
    }

    /// Copies `src` onto `dst` front to back; the regions must not overlap.
    pub fn copy(&mut self, src: Region, dst: usize) {
        debug_assert!(dst + src.len <= src.start || src.end() <= dst);
        for i in 0..src.len {
            let v = self.get(src.start + i);
            self.set(dst + i, v);
        }
    }

    #[inline(always)]
    pub fn wget(&mut self, i: usize) -> u64 {
        debug_assert!(i < self.wtop);
        self.hook.access(self.word_base + i as u64, 1);
        self.words[i]
    }

    #[inline(always)]
    pub fn wset(&mut self, i: usize, v: u64) {
        debug_assert!(i < self.wtop);
        self.hook.access(self.word_base + i as u64, 1);
        self.words[i] = v;
    }

    /// Counted element comparison `a < b`.
    #[inline(always)]
    pub fn less(&mut self, a: &T, b: &T) -> bool {
        self.comparisons.bump();
        a < b
    }

    /// Counted comparison of word values.
    #[inline(always)]
    pub fn less_word(&mut self, a: u64, b: u64) -> bool {
        self.comparisons.bump();
        a < b
    }

    /// Reads a cell without tracing; for inspection outside the algorithms.
    pub fn peek(&self, i: usize) -> T {
        self.cells[i]
    }

    pub fn peek_region(&self, r: Region) -> Vec<T> {
        self.cells[r.start..r.end()].to_vec()
    }

    pub fn peek_words(&self, r: Region) -> Vec<u64> {
        self.words[r.start..r.end()].to_vec()
    }

    /// Starts collecting [`Event`]s (clearing any collected so far).
    pub fn record_events(&mut self) {
        self.events = Some(Vec::new());
    }

    pub fn take_events(&mut self) -> Vec<Event<T>> {
        self.events.take().unwrap_or_default()
    }

    pub fn recording(&self) -> bool {
        self.events.is_some()
    }

    #[inline]
    pub(crate) fn emit(&mut self, event: impl FnOnce(&Self) -> Event<T>) {
        if self.events.is_some() {
            let e = event(self);
            if let Some(log) = self.events.as_mut() {
                log.push(e);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cachesim::CacheModel;

    #[test]
    fn stack_discipline() {
        let mut mem: Memory<u64> = Memory::untraced();
        let a = mem.load(&[1, 2, 3]).unwrap();
        let m = mem.mark();
        let b = mem.alloc(5).unwrap();
        assert_eq!(b.start, a.end());
        mem.release(m);
        let c = mem.alloc(2).unwrap();
        assert_eq!(c.start, b.start);
        assert_eq!(mem.high_water().0, 8);
    }

    #[test]
    #[should_panic]
    fn release_out_of_order_panics() {
        let mut mem: Memory<u64> = Memory::untraced();
        let m0 = mem.mark();
        mem.alloc(4).unwrap();
        let m1 = mem.mark();
        mem.release(m0);
        mem.release(m1);
    }

    #[test]
    fn overflow_is_reported() {
        let mut mem: Memory<u64> = Memory::with_limits(
            NoTrace,
            ArenaLimits {
                cells: 10,
                words: 2,
            },
        );
        mem.alloc(8).unwrap();
        assert!(matches!(
            mem.alloc(3),
            Err(Error::ArenaOverflow { limit: 10, .. })
        ));
        assert!(mem.alloc_words(3).is_err());
    }

    #[test]
    fn accesses_reach_the_hook() {
        let mut mem: Memory<u64, CacheModel> = Memory::new(CacheModel::new(64, 8).unwrap());
        let r = mem.load(&(0..32).collect::<Vec<_>>()).unwrap();
        assert_eq!(mem.hook().misses(), 0);
        let mut s = 0;
        for i in 0..r.len {
            s += mem.get(r.start + i);
        }
        assert_eq!(s, 496);
        assert_eq!(mem.hook().misses(), 4);
        let w = mem.load_words(&[9]).unwrap();
        assert_eq!(mem.wget(w.start), 9);
        assert_eq!(mem.hook().misses(), 5);
        assert!(mem.less(&1, &2));
        assert!(!mem.less_word(2, 2));
        assert_eq!(mem.comparisons(), 2);
    }
}
