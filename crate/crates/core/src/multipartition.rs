//! Partitioning into buckets of at most `Δ` elements separated by pivots.
//!
//! Elements are distributed in batches of `Δ` through a k-partitioner built
//! from the current pivots. After each batch, every bucket holding more
//! than `Δ` elements is split at its median, which becomes a new pivot.
//! Before a batch all buckets hold at most `Δ` elements, so no bucket ever
//! exceeds `2Δ`.
//!
//! Memory is one stack allocation: the pivot registry, space for the
//! largest partitioner needed, then `⌊2N/Δ⌋` bucket slots of capacity `2Δ`.
//! A split leaves the lower half in its slot and moves the upper half to
//! the next free slot, so slots are in arbitrary order; a small
//! logical-to-physical index (plain metadata, not traced) keeps pivot order.

use num_bigint::BigUint;

use crate::arena::{Element, Event, Memory, Region};
use crate::cachesim::{AccessHook, NoTrace};
use crate::error::{Error, Result};
use crate::partitioner::{layout_len, Bucket, Partitioner};
use crate::select::select_in;

/// Whether `(2N)^d <= Δ^{d+1}` and `1 <= Δ <= N`, in exact arithmetic.
pub fn precondition_holds(n: usize, delta: usize, d: u32) -> bool {
    if delta == 0 || delta > n {
        return false;
    }
    BigUint::from(2 * n as u128).pow(d) <= BigUint::from(delta).pow(d + 1)
}

/// Result of a multi-partition: pivots and buckets, both in logical order.
#[derive(Debug, Clone)]
pub struct Partition {
    /// `k - 1` sorted pivots.
    pub pivots: Region,
    /// `k` buckets; bucket `i` holds elements between pivots `i - 1` and `i`.
    pub buckets: Vec<Region>,
}

impl Partition {
    pub fn k(&self) -> usize {
        self.buckets.len()
    }
}

/// Partitions `s` into buckets of size at most `delta`, checking the size
/// precondition. The result lives on top of the element stack; take a
/// [`Memory::mark`] beforehand to free it.
pub fn multi_partition_in<T: Element, H: AccessHook>(
    mem: &mut Memory<T, H>,
    s: Region,
    delta: usize,
    d: u32,
) -> Result<Partition> {
    if !precondition_holds(s.len, delta, d) {
        return Err(Error::PartitionPrecondition {
            n: s.len,
            delta,
            d,
        });
    }
    multi_partition_unchecked(mem, s, delta, d, None)
}

/// Same as [`multi_partition_in`] without the size precondition (only
/// `delta >= 1` is required). Bucket sizes still respect `delta`, but the
/// bound on the bucket count, and hence the slot supply, may not hold.
pub fn multi_partition_unchecked<T: Element, H: AccessHook>(
    mem: &mut Memory<T, H>,
    s: Region,
    delta: usize,
    d: u32,
    inverted_node: Option<usize>,
) -> Result<Partition> {
    if delta == 0 {
        return Err(Error::PartitionPrecondition {
            n: s.len,
            delta,
            d,
        });
    }
    let n = s.len;
    let slots = (2 * n / delta).max(1);
    let part_len = (1..=slots).map(|k| layout_len(k, d)).max().unwrap_or(0);
    let registry = mem.alloc(slots - 1)?;
    let layout = mem.alloc(part_len)?;
    let slot_cap = 2 * delta;
    let slot_area = mem.alloc(slots * slot_cap)?;
    let slot_start = |slot: usize| slot_area.start + slot * slot_cap;

    // logical bucket order -> physical slot, and fill per physical slot
    let mut logical: Vec<usize> = vec![0];
    let mut fill: Vec<usize> = vec![0; slots];
    let mut used_slots = 1;

    let mut at = 0;
    while at < n {
        let batch = s.slice(at, delta.min(n - at));
        at += batch.len;
        mem.emit(|_| Event::Batch {
            sizes: logical.iter().map(|&p| fill[p]).collect(),
        });

        let k = logical.len();
        let pivots = registry.slice(0, k - 1);
        let mut part = Partitioner::build_trusted(mem, pivots, d, layout, inverted_node);
        let mut out: Vec<Bucket> = logical
            .iter()
            .map(|&p| Bucket {
                start: slot_start(p),
                cap: slot_cap,
                len: fill[p],
            })
            .collect();
        part.distribute(mem, batch, &mut out)?;
        for (b, &p) in out.iter().zip(&logical) {
            fill[p] = b.len;
        }

        let mut i = 0;
        while i < logical.len() {
            let slot = logical[i];
            let size = fill[slot];
            if size <= delta {
                i += 1;
                continue;
            }
            if used_slots == slots {
                return Err(Error::SlotsExhausted { slots });
            }
            let region = Region::new(slot_start(slot), size);
            let rank = size.div_ceil(2);
            let pivot = select_in(mem, region, rank)?;
            let upper = region.slice(rank, size - rank);
            let fresh = used_slots;
            used_slots += 1;
            mem.copy(upper, slot_start(fresh));
            fill[slot] = rank - 1;
            fill[fresh] = upper.len;

            // open a hole at logical position i in the pivot registry
            let count = logical.len() - 1;
            for j in (i..count).rev() {
                let v = mem.get(registry.start + j);
                mem.set(registry.start + j + 1, v);
            }
            mem.set(registry.start + i, pivot);
            logical.insert(i + 1, fresh);
            mem.emit(|_| Event::Split {
                size,
                left: rank - 1,
                right: upper.len,
            });
            i += 2;
        }
    }

    let k = logical.len();
    mem.emit(|_| Event::Partitioned { n, delta, k });
    Ok(Partition {
        pivots: registry.slice(0, k - 1),
        buckets: logical
            .iter()
            .map(|&p| Region::new(slot_start(p), fill[p]))
            .collect(),
    })
}

/// Slice convenience: returns `(pivots, buckets)` in logical order.
pub fn multi_partition<T: Element>(s: &[T], delta: usize, d: u32) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let mut mem = Memory::<T, NoTrace>::untraced();
    let r = mem.load(s)?;
    let p = multi_partition_in(&mut mem, r, delta, d)?;
    Ok((
        mem.peek_region(p.pivots),
        p.buckets.iter().map(|&b| mem.peek_region(b)).collect(),
    ))
}
