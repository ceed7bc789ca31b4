//! Deterministic linear-time selection (median of medians, groups of five)
//! with a three-way partition, and weighted selection built on the same
//! recursion.
//!
//! Everything runs in place over arena regions. [`select_in`] leaves the
//! region arranged as `[< or = p | p | = or > p]` with `p` at offset `k - 1`,
//! so callers can keep working on either side as a contiguous slice.

use crate::arena::{Element, Memory, Region};
use crate::cachesim::{AccessHook, NoTrace};
use crate::error::{Error, Result};

/// Regions at most this long are finished by insertion sort.
pub const BASE_CASE: usize = 16;

/// Indexed, traced view over one kind of cell, ordered by [`Cells::lt`].
trait Cells {
    type Item: Copy;
    fn read(&mut self, i: usize) -> Self::Item;
    fn write(&mut self, i: usize, v: Self::Item);
    fn lt(&mut self, a: &Self::Item, b: &Self::Item) -> bool;

    fn swap(&mut self, i: usize, j: usize) {
        if i != j {
            let a = self.read(i);
            let b = self.read(j);
            self.write(i, b);
            self.write(j, a);
        }
    }
}

struct Elems<'a, T, H>(&'a mut Memory<T, H>);

impl<T: Element, H: AccessHook> Cells for Elems<'_, T, H> {
    type Item = T;

    #[inline(always)]
    fn read(&mut self, i: usize) -> T {
        self.0.get(i)
    }

    #[inline(always)]
    fn write(&mut self, i: usize, v: T) {
        self.0.set(i, v)
    }

    #[inline(always)]
    fn lt(&mut self, a: &T, b: &T) -> bool {
        self.0.less(a, b)
    }
}

/// `(value, weight)` pairs stored as consecutive words; item `i` lives at
/// words `base + 2i` and `base + 2i + 1`. Ordered by value only.
struct Pairs<'a, T, H> {
    mem: &'a mut Memory<T, H>,
    base: usize,
}

impl<T: Element, H: AccessHook> Cells for Pairs<'_, T, H> {
    type Item = (u64, u64);

    #[inline(always)]
    fn read(&mut self, i: usize) -> (u64, u64) {
        let w = self.base + 2 * i;
        (self.mem.wget(w), self.mem.wget(w + 1))
    }

    #[inline(always)]
    fn write(&mut self, i: usize, v: (u64, u64)) {
        let w = self.base + 2 * i;
        self.mem.wset(w, v.0);
        self.mem.wset(w + 1, v.1);
    }

    #[inline(always)]
    fn lt(&mut self, a: &(u64, u64), b: &(u64, u64)) -> bool {
        self.mem.less_word(a.0, b.0)
    }
}

fn insertion_sort<C: Cells>(c: &mut C, lo: usize, hi: usize) {
    for i in lo + 1..hi {
        let x = c.read(i);
        let mut j = i;
        while j > lo {
            let y = c.read(j - 1);
            if !c.lt(&x, &y) {
                break;
            }
            c.write(j, y);
            j -= 1;
        }
        if j != i {
            c.write(j, x);
        }
    }
}

/// Moves the median of each full group of five in `[lo, hi)` to the front
/// of the range and returns the number of groups.
fn medians_to_front<C: Cells>(c: &mut C, lo: usize, hi: usize) -> usize {
    let groups = (hi - lo) / 5;
    for g in 0..groups {
        let base = lo + 5 * g;
        let vals = [
            c.read(base),
            c.read(base + 1),
            c.read(base + 2),
            c.read(base + 3),
            c.read(base + 4),
        ];
        let mut idx = [0usize, 1, 2, 3, 4];
        for i in 1..5 {
            let mut j = i;
            while j > 0 && c.lt(&vals[idx[j]], &vals[idx[j - 1]]) {
                idx.swap(j, j - 1);
                j -= 1;
            }
        }
        c.swap(lo + g, base + idx[2]);
    }
    groups
}

/// Dutch-flag partition of `[lo, hi)` around `p`; returns `(lt, gt)` with
/// `[lo, lt) < p`, `[lt, gt) == p`, `[gt, hi) > p`.
fn partition3_cells<C: Cells>(c: &mut C, lo: usize, hi: usize, p: &C::Item) -> (usize, usize) {
    let (mut lt, mut i, mut gt) = (lo, lo, hi);
    while i < gt {
        let x = c.read(i);
        if c.lt(&x, p) {
            if lt != i {
                let y = c.read(lt);
                c.write(lt, x);
                c.write(i, y);
            }
            lt += 1;
            i += 1;
        } else if c.lt(p, &x) {
            gt -= 1;
            let y = c.read(gt);
            c.write(gt, x);
            c.write(i, y);
        } else {
            i += 1;
        }
    }
    (lt, gt)
}

/// Selects the item of rank `k` (1-based) within `[lo, hi)`, leaving it at
/// `lo + k - 1` with smaller-or-equal items before and larger-or-equal after.
fn select_cells<C: Cells>(c: &mut C, mut lo: usize, mut hi: usize, mut k: usize) -> C::Item {
    debug_assert!(k >= 1 && k <= hi - lo);
    loop {
        let n = hi - lo;
        if n <= BASE_CASE {
            insertion_sort(c, lo, hi);
            return c.read(lo + k - 1);
        }
        let groups = medians_to_front(c, lo, hi);
        let p = select_cells(c, lo, lo + groups, groups.div_ceil(2));
        let (lt, gt) = partition3_cells(c, lo, hi, &p);
        let target = lo + k - 1;
        if target < lt {
            hi = lt;
        } else if target < gt {
            return p;
        } else {
            k -= gt - lo;
            lo = gt;
        }
    }
}

/// Selects the element of rank `k` in `region` in place and returns it.
///
/// Afterwards `region[..k-1]` holds the `k - 1` smallest elements (in any
/// order), `region[k-1]` the selected one and `region[k..]` the rest.
pub fn select_in<T: Element, H: AccessHook>(
    mem: &mut Memory<T, H>,
    region: Region,
    k: usize,
) -> Result<T> {
    if k == 0 || k > region.len {
        return Err(Error::KOutOfRange {
            k,
            len: region.len,
        });
    }
    Ok(select_cells(
        &mut Elems(mem),
        region.start,
        region.end(),
        k,
    ))
}

/// Three-way partitions `region` around `pivot` in place and returns the
/// sizes of the less-than and equal parts.
pub fn partition3_in<T: Element, H: AccessHook>(
    mem: &mut Memory<T, H>,
    region: Region,
    pivot: T,
) -> (usize, usize) {
    let (lt, gt) = partition3_cells(&mut Elems(mem), region.start, region.end(), &pivot);
    (lt - region.start, gt - lt)
}

/// Weighted selection over `(value, weight)` pairs stored in the word
/// region `items` (two words per item, value first).
///
/// Returns the `k`-th smallest value for the smallest `k` whose `k` smallest
/// items weigh at least `target`. Values compare by value only; equal values
/// take consecutive ranks in arbitrary order. The region is permuted.
pub fn weighted_select_in<T: Element, H: AccessHook>(
    mem: &mut Memory<T, H>,
    items: Region,
    target: u64,
) -> Result<u64> {
    debug_assert!(items.len % 2 == 0);
    let count = items.len / 2;
    let mut c = Pairs {
        mem,
        base: items.start,
    };
    let total: u128 = (0..count).map(|i| c.read(i).1 as u128).sum();
    if count == 0 || total < target as u128 {
        return Err(Error::InsufficientWeight { total, target });
    }

    let (mut lo, mut hi) = (0, count);
    let mut want = target as u128;
    loop {
        let n = hi - lo;
        if n <= BASE_CASE {
            insertion_sort(&mut c, lo, hi);
            let mut acc = 0u128;
            for i in lo..hi {
                let (v, w) = c.read(i);
                acc += w as u128;
                if acc >= want {
                    return Ok(v);
                }
            }
            unreachable!("weight mass checked up front");
        }
        let groups = medians_to_front(&mut c, lo, hi);
        let p = select_cells(&mut c, lo, lo + groups, groups.div_ceil(2));
        let (lt, gt) = partition3_cells(&mut c, lo, hi, &p);
        let below: u128 = (lo..lt).map(|i| c.read(i).1 as u128).sum();
        if lt > lo && below >= want {
            hi = lt;
            continue;
        }
        let equal: u128 = (lt..gt).map(|i| c.read(i).1 as u128).sum();
        if below + equal >= want {
            return Ok(p.0);
        }
        want -= below + equal;
        lo = gt;
    }
}

/// Selects the rank-`k` element of `s`, returning `(s_le, p, s_ge)` with
/// `|s_le| = k - 1`.
pub fn select<T: Element>(s: &[T], k: usize) -> Result<(Vec<T>, T, Vec<T>)> {
    let mut mem = Memory::<T, NoTrace>::untraced();
    let r = mem.load(s)?;
    let p = select_in(&mut mem, r, k)?;
    let (le, rest) = r.split_at(k - 1);
    Ok((mem.peek_region(le), p, mem.peek_region(rest.slice(1, rest.len - 1))))
}

pub fn partition3<T: Element>(s: &[T], pivot: T) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut mem = Memory::<T, NoTrace>::untraced();
    let r = mem
        .load(s)
        .expect("default arena holds any slice that fits in memory");
    let (l, e) = partition3_in(&mut mem, r, pivot);
    (
        mem.peek_region(r.slice(0, l)),
        mem.peek_region(r.slice(l, e)),
        mem.peek_region(r.slice(l + e, r.len - l - e)),
    )
}

pub fn weighted_select(items: &[(u64, u64)], target: u64) -> Result<u64> {
    let mut mem = Memory::<u64, NoTrace>::untraced();
    let flat: Vec<u64> = items.iter().flat_map(|&(v, w)| [v, w]).collect();
    let r = mem.load_words(&flat)?;
    weighted_select_in(&mut mem, r, target)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EXAMPLE: [u64; 15] = [67, 30, 45, 33, 15, 99, 26, 90, 55, 9, 96, 45, 95, 31, 3];

    fn sorted(s: &[u64]) -> Vec<u64> {
        let mut v = s.to_vec();
        v.sort_unstable();
        v
    }

    fn check_select(s: &[u64], k: usize) {
        let (le, p, ge) = select(s, k).unwrap();
        let oracle = sorted(s);
        assert_eq!(p, oracle[k - 1]);
        assert_eq!(le.len(), k - 1);
        assert_eq!(ge.len(), s.len() - k);
        assert!(le.iter().all(|&x| x <= p));
        assert!(ge.iter().all(|&x| x >= p));
        let mut all = le;
        all.push(p);
        all.extend(ge);
        assert_eq!(sorted(&all), oracle);
    }

    #[test]
    fn selects_from_example_array() {
        let (le, p, ge) = select(&EXAMPLE, 8).unwrap();
        assert_eq!(p, 45);
        assert_eq!(le.len(), 7);
        assert_eq!(ge.len(), 7);
        for k in 1..=15 {
            check_select(&EXAMPLE, k);
        }
    }

    #[test]
    fn singleton_and_bounds() {
        assert_eq!(select(&[42u64], 1).unwrap(), (vec![], 42, vec![]));
        assert!(matches!(select(&[1u64, 2], 0), Err(Error::KOutOfRange { .. })));
        assert!(matches!(select(&[1u64, 2], 3), Err(Error::KOutOfRange { .. })));
        assert!(select::<u64>(&[], 1).is_err());
    }

    #[test]
    fn random_small_instances_match_sort() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for round in 0..2000 {
            let n = rng.gen_range(1..=64);
            let universe = if round % 2 == 0 { 8 } else { u64::MAX };
            let s: Vec<u64> = (0..n).map(|_| rng.gen_range(0..universe)).collect();
            check_select(&s, rng.gen_range(1..=n));
        }
    }

    #[test]
    fn oracle_exact_on_ten_thousand_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for round in 0..10_000 {
            let n = rng.gen_range(1..=4096);
            let s: Vec<u64> = if round % 2 == 0 {
                let u = rng.gen_range(1..=n as u64 / 2 + 1);
                (0..n).map(|_| rng.gen_range(0..u)).collect()
            } else {
                (0..n).map(|_| rng.gen()).collect()
            };
            let k = rng.gen_range(1..=n);
            let (le, p, _) = select(&s, k).unwrap();
            assert_eq!(p, sorted(&s)[k - 1]);
            assert_eq!(le.len(), k - 1);
        }
    }

    #[test]
    fn adversarial_shapes() {
        for n in [17usize, 100, 1000] {
            let asc: Vec<u64> = (0..n as u64).collect();
            let desc: Vec<u64> = asc.iter().rev().copied().collect();
            let flat = vec![5u64; n];
            let organ: Vec<u64> = (0..n as u64).map(|i| i.min(n as u64 - i)).collect();
            for s in [&asc, &desc, &flat, &organ] {
                for k in [1, n / 3, n / 2, n] {
                    check_select(s, k.max(1));
                }
            }
        }
    }

    #[test]
    fn three_way_partition() {
        assert_eq!(partition3(&[2u64, 1, 2, 3], 2), (vec![1], vec![2, 2], vec![3]));
        assert_eq!(partition3::<u64>(&[], 7), (vec![], vec![], vec![]));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let n = rng.gen_range(0..=256);
            let s: Vec<u64> = (0..n).map(|_| rng.gen_range(0..10)).collect();
            let p = rng.gen_range(0..10);
            let (l, e, g) = partition3(&s, p);
            assert_eq!(l.len(), s.iter().filter(|&&x| x < p).count());
            assert_eq!(e.len(), s.iter().filter(|&&x| x == p).count());
            assert_eq!(g.len(), s.iter().filter(|&&x| x > p).count());
            assert!(l.iter().all(|&x| x < p) && e.iter().all(|&x| x == p));
            assert!(g.iter().all(|&x| x > p));
        }
    }

    /// Sort by value, scan cumulative weights.
    fn weighted_oracle(items: &[(u64, u64)], target: u64) -> Option<u64> {
        let mut v = items.to_vec();
        v.sort_by_key(|&(x, _)| x);
        let mut acc = 0u128;
        for (x, w) in v {
            acc += w as u128;
            if acc >= target as u128 {
                return Some(x);
            }
        }
        None
    }

    #[test]
    fn weighted_example_gaps() {
        let gaps = [1u64, 1, 1, 5, 8];
        let items: Vec<_> = gaps.iter().map(|&g| (g, g)).collect();
        assert_eq!(weighted_select(&items, 9).unwrap(), 8);
        assert_eq!(weighted_select(&items, 8).unwrap(), 5);
        assert_eq!(weighted_select(&[(7, 3)], 3).unwrap(), 7);
        assert_eq!(weighted_select(&[(7, 3)], 0).unwrap(), 7);
        assert!(matches!(
            weighted_select(&[(7, 3)], 4),
            Err(Error::InsufficientWeight { .. })
        ));
        assert_eq!(weighted_select(&[(1, 0), (2, 5)], 0).unwrap(), 1);
        assert_eq!(weighted_select(&[(1, 0), (2, 5)], 3).unwrap(), 2);
    }

    #[test]
    fn weighted_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for round in 0..3000 {
            let n = if round < 2000 {
                rng.gen_range(1..=64)
            } else {
                rng.gen_range(1..=2000)
            };
            let vmax = if round % 3 == 0 { 6 } else { 1000 };
            let items: Vec<(u64, u64)> = (0..n)
                .map(|_| (rng.gen_range(0..vmax), rng.gen_range(0..20)))
                .collect();
            let total: u64 = items.iter().map(|x| x.1).sum();
            let target = rng.gen_range(0..=total);
            assert_eq!(
                weighted_select(&items, target).ok(),
                weighted_oracle(&items, target),
                "{items:?} {target}"
            );
        }
    }

    #[test]
    fn unit_weights_agree_with_select() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let n = rng.gen_range(1..=300);
            let s: Vec<u64> = (0..n).map(|_| rng.gen_range(0..50)).collect();
            let k = rng.gen_range(1..=n);
            let items: Vec<_> = s.iter().map(|&x| (x, 1)).collect();
            assert_eq!(
                weighted_select(&items, k as u64).unwrap(),
                select(&s, k).unwrap().1
            );
        }
    }

    #[test]
    fn comparisons_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let s: Vec<u64> = (0..5000).map(|_| rng.gen()).collect();
        let run = || {
            let mut mem = Memory::<u64>::untraced();
            let r = mem.load(&s).unwrap();
            select_in(&mut mem, r, 1234).unwrap();
            mem.comparisons()
        };
        assert_eq!(run(), run());
    }
}
