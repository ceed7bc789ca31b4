//! Ideal-cache instrumentation.
//!
//! Algorithms touch memory only through [`crate::arena::Memory`], which
//! forwards every element access to an [`AccessHook`]. The hook decides what
//! to do with it: nothing ([`NoTrace`]), simulate a fully associative LRU
//! cache ([`CacheModel`]), or dump the raw trace ([`TraceWriter`]). The
//! algorithms never see the cache parameters.

use std::io::{self, Write};

use crate::arena::{ArenaLimits, Element, Memory};
use crate::error::{Error, Result};

/// Receives every element-granular memory access.
pub trait AccessHook {
    fn access(&mut self, addr: u64, len: u64);
}

/// Discards accesses.
#[derive(Debug, Default, Clone, Copy)]
pub struct NoTrace;

impl AccessHook for NoTrace {
    #[inline(always)]
    fn access(&mut self, _addr: u64, _len: u64) {}
}

impl<H: AccessHook + ?Sized> AccessHook for &mut H {
    #[inline]
    fn access(&mut self, addr: u64, len: u64) {
        (**self).access(addr, len)
    }
}

impl<A: AccessHook, B: AccessHook> AccessHook for (A, B) {
    #[inline]
    fn access(&mut self, addr: u64, len: u64) {
        self.0.access(addr, len);
        self.1.access(addr, len);
    }
}

const NONE: u32 = u32::MAX;

/// Fully associative LRU cache of `M` elements split into blocks of `B` elements.
///
/// Resident blocks form an intrusive doubly linked list over a fixed slot
/// array, and a dense block-to-slot table makes lookups O(1). The table grows
/// with the highest block id seen, which is fine for the dense arena address
/// space used here.
#[derive(Debug, Clone)]
pub struct CacheModel {
    m: u64,
    b: u64,
    shift: Option<u32>,
    slots: usize,
    block_of: Vec<u64>,
    prev: Vec<u32>,
    next: Vec<u32>,
    head: u32,
    tail: u32,
    used: usize,
    slot_of_block: Vec<u32>,
    last_block: u64,
    misses: u64,
    accesses: u64,
}

impl CacheModel {
    pub fn new(m: u64, b: u64) -> Result<Self> {
        if b == 0 || m < b {
            return Err(Error::CacheGeometry { m, b });
        }
        let slots = (m / b) as usize;
        Ok(Self {
            m,
            b,
            shift: b.is_power_of_two().then(|| b.trailing_zeros()),
            slots,
            block_of: vec![0; slots],
            prev: vec![NONE; slots],
            next: vec![NONE; slots],
            head: NONE,
            tail: NONE,
            used: 0,
            slot_of_block: Vec::new(),
            last_block: u64::MAX,
            misses: 0,
            accesses: 0,
        })
    }

    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn b(&self) -> u64 {
        self.b
    }

    pub fn misses(&self) -> u64 {
        self.misses
    }

    /// Element accesses observed (a range access counts once per element).
    pub fn accesses(&self) -> u64 {
        self.accesses
    }

    /// Number of blocks currently resident.
    pub fn resident(&self) -> usize {
        self.used
    }

    pub fn is_resident(&self, block: u64) -> bool {
        self.slot(block) != NONE
    }

    /// Forgets all resident blocks but keeps the counters.
    pub fn flush(&mut self) {
        for s in 0..self.used {
            let blk = self.block_of[s] as usize;
            self.slot_of_block[blk] = NONE;
        }
        self.prev.fill(NONE);
        self.next.fill(NONE);
        self.head = NONE;
        self.tail = NONE;
        self.used = 0;
        self.last_block = u64::MAX;
    }

    #[inline]
    fn block(&self, addr: u64) -> u64 {
        match self.shift {
            Some(s) => addr >> s,
            None => addr / self.b,
        }
    }

    #[inline]
    fn slot(&self, block: u64) -> u32 {
        self.slot_of_block
            .get(block as usize)
            .copied()
            .unwrap_or(NONE)
    }

    fn unlink(&mut self, s: u32) {
        let (p, n) = (self.prev[s as usize], self.next[s as usize]);
        if p != NONE {
            self.next[p as usize] = n;
        } else {
            self.head = n;
        }
        if n != NONE {
            self.prev[n as usize] = p;
        } else {
            self.tail = p;
        }
    }

    fn push_front(&mut self, s: u32) {
        self.prev[s as usize] = NONE;
        self.next[s as usize] = self.head;
        if self.head != NONE {
            self.prev[self.head as usize] = s;
        }
        self.head = s;
        if self.tail == NONE {
            self.tail = s;
        }
    }

    fn touch_block(&mut self, block: u64) {
        if block == self.last_block {
            return;
        }
        self.last_block = block;
        let s = self.slot(block);
        if s != NONE {
            if s != self.head {
                self.unlink(s);
                self.push_front(s);
            }
            return;
        }
        self.misses += 1;
        let s = if self.used < self.slots {
            self.used += 1;
            (self.used - 1) as u32
        } else {
            let victim = self.tail;
            self.unlink(victim);
            let old = self.block_of[victim as usize] as usize;
            self.slot_of_block[old] = NONE;
            victim
        };
        let idx = block as usize;
        if idx >= self.slot_of_block.len() {
            let grow = (idx + 1).max(self.slot_of_block.len() * 2);
            self.slot_of_block.resize(grow, NONE);
        }
        self.slot_of_block[idx] = s;
        self.block_of[s as usize] = block;
        self.push_front(s);
    }
}

impl AccessHook for CacheModel {
    #[inline]
    fn access(&mut self, addr: u64, len: u64) {
        if len == 0 {
            return;
        }
        self.accesses += len;
        let first = self.block(addr);
        let last = self.block(addr + len - 1);
        for blk in first..=last {
            self.touch_block(blk);
        }
    }
}

/// Several cache geometries fed from one run.
#[derive(Debug, Clone, Default)]
pub struct CacheSet {
    pub models: Vec<CacheModel>,
}

impl CacheSet {
    pub fn new(geometries: &[(u64, u64)]) -> Result<Self> {
        let models = geometries
            .iter()
            .map(|&(m, b)| CacheModel::new(m, b))
            .collect::<Result<_>>()?;
        Ok(Self { models })
    }
}

impl AccessHook for CacheSet {
    #[inline]
    fn access(&mut self, addr: u64, len: u64) {
        for m in &mut self.models {
            m.access(addr, len);
        }
    }
}

/// Magic header of the binary trace format.
pub const TRACE_MAGIC: &[u8; 6] = b"COTR1\n";

/// Writes accesses as little-endian `(address: u64, length: u32)` records
/// after a [`TRACE_MAGIC`] header. Ranges longer than `u32::MAX` are split.
pub struct TraceWriter<W: Write> {
    out: W,
    records: u64,
    error: Option<io::Error>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut out: W) -> io::Result<Self> {
        out.write_all(TRACE_MAGIC)?;
        Ok(Self {
            out,
            records: 0,
            error: None,
        })
    }

    pub fn records(&self) -> u64 {
        self.records
    }

    /// Flushes and returns the sink, or the first write error encountered.
    pub fn finish(mut self) -> io::Result<W> {
        if let Some(e) = self.error.take() {
            return Err(e);
        }
        self.out.flush()?;
        Ok(self.out)
    }
}

impl<W: Write> AccessHook for TraceWriter<W> {
    fn access(&mut self, mut addr: u64, mut len: u64) {
        if self.error.is_some() {
            return;
        }
        while len > 0 {
            let chunk = len.min(u32::MAX as u64);
            let mut rec = [0u8; 12];
            rec[..8].copy_from_slice(&addr.to_le_bytes());
            rec[8..].copy_from_slice(&(chunk as u32).to_le_bytes());
            if let Err(e) = self.out.write_all(&rec) {
                self.error = Some(e);
                return;
            }
            self.records += 1;
            addr += chunk;
            len -= chunk;
        }
    }
}

/// Parses a trace produced by [`TraceWriter`].
pub fn read_trace(bytes: &[u8]) -> Option<Vec<(u64, u32)>> {
    let body = bytes.strip_prefix(TRACE_MAGIC.as_slice())?;
    if body.len() % 12 != 0 {
        return None;
    }
    Some(
        body.chunks_exact(12)
            .map(|c| {
                let addr = u64::from_le_bytes(c[..8].try_into().unwrap());
                let len = u32::from_le_bytes(c[8..].try_into().unwrap());
                (addr, len)
            })
            .collect(),
    )
}

/// Counters of one simulated run.
#[derive(Debug, Clone)]
pub struct TracedRun<R> {
    pub result: R,
    /// Misses per geometry, in the order given.
    pub misses: Vec<u64>,
    /// Block accesses seen by the first geometry (0 without geometries).
    pub accesses: u64,
    pub comparisons: u64,
    /// Peak `(cells, words)` stack usage.
    pub high_water: (usize, usize),
}

/// Runs `f` in a fresh arena observed by one LRU cache per geometry.
/// Data loaded by `f` through [`Memory::load`] is not charged.
pub fn run_traced<T: Element, R>(
    geometries: &[(u64, u64)],
    limits: ArenaLimits,
    f: impl FnOnce(&mut Memory<T, CacheSet>) -> Result<R>,
) -> Result<TracedRun<R>> {
    let mut mem = Memory::with_limits(CacheSet::new(geometries)?, limits);
    let result = f(&mut mem)?;
    let comparisons = mem.comparisons();
    let high_water = mem.high_water();
    let set = mem.into_hook();
    Ok(TracedRun {
        result,
        misses: set.models.iter().map(CacheModel::misses).collect(),
        accesses: set.models.first().map_or(0, CacheModel::accesses),
        comparisons,
        high_water,
    })
}
