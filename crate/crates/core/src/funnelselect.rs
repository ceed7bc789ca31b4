//! Deterministic cache-oblivious multiple selection.
//!
//! Each level picks a gap-size threshold `Δ` by weighted selection over the
//! gaps between consecutive query ranks. Large gaps relative to `N` mean
//! sorting is cheap enough; otherwise the input is split by
//! [`multi_partition_unchecked`] into buckets of at most `Δ` elements, each
//! bucket's outermost queries are answered with two linear-time selections
//! and the inner queries recurse on the slice between them.

use num_bigint::BigUint;

use crate::arena::{Element, Event, Memory, Region};
use crate::cachesim::{AccessHook, NoTrace};
use crate::config::Config;
use crate::error::{Error, Result};
use crate::funnelsort::funnelsort_in;
use crate::multipartition::{multi_partition_unchecked, precondition_holds};
use crate::ranks::validate_ranks;
use crate::select::{select_in, weighted_select_in};

/// The answered queries as `(rank, element)` pairs in increasing rank order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionReport<T> {
    pub entries: Vec<(usize, T)>,
}

impl<T: Copy> SelectionReport<T> {
    pub fn values(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.1).collect()
    }

    pub fn ranks(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.0).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Threshold `Δ`: the smallest gap whose cumulative weight (gaps weighted by
/// their size, smallest first) reaches `N/2 + 1`. `gaps` must sum to `N + 1`.
pub fn choose_delta(gaps: &[usize]) -> usize {
    let mut mem = Memory::<u64, NoTrace>::untraced();
    let words: Vec<u64> = gaps.iter().flat_map(|&g| [g as u64, g as u64]).collect();
    let region = mem.load_words(&words).expect("gap list fits the word stack");
    let n = gaps.iter().sum::<usize>() - 1;
    weighted_select_in(&mut mem, region, target_weight(n)).expect("gaps sum to N + 1") as usize
}

// 2 * mass >= N + 2, in integers
fn target_weight(n: usize) -> u64 {
    (n as u64 + 2).div_ceil(2)
}

/// Whether a subproblem of `n` elements with threshold `delta` is answered by
/// sorting: `(2N)^d >= Δ^{d+1}` or `N^{1 + 1/(1+ε)} >= Δ²`.
pub fn base_case_predicate(n: usize, delta: usize, cfg: &Config) -> bool {
    if n <= 1 || delta <= 1 {
        return true;
    }
    let d = cfg.d();
    if BigUint::from(2 * n as u128).pow(d) >= BigUint::from(delta).pow(d + 1) {
        return true;
    }
    let eps = cfg.epsilon();
    let lhs = (1.0 + 1.0 / (1.0 + eps)) * (n as f64).ln();
    let rhs = 2.0 * (delta as f64).ln();
    if (lhs - rhs).abs() > 1e-9 * rhs.max(1.0) {
        return lhs > rhs;
    }
    match as_fraction(eps) {
        // ε = a/b: N^{(a+2b)/(a+b)} >= Δ²  <=>  N^{a+2b} >= Δ^{2(a+b)}
        Some((a, b)) => BigUint::from(n).pow(a + 2 * b) >= BigUint::from(delta).pow(2 * (a + b)),
        None => lhs >= rhs,
    }
}

fn as_fraction(x: f64) -> Option<(u32, u32)> {
    (1..=64u32).find_map(|b| {
        let a = (x * b as f64).round();
        (a >= 1.0 && a <= 4096.0 && (a / b as f64 - x).abs() < 1e-12).then_some((a as u32, b))
    })
}

/// Answers `ranks` (strictly increasing, in `1..=n`) over `elements`.
/// The input is copied; the slice is not modified.
pub fn multiselect<T: Element>(
    elements: &[T],
    ranks: &[usize],
    cfg: &Config,
) -> Result<SelectionReport<T>> {
    validate_ranks(ranks, elements.len())?;
    let limits = crate::arena::ArenaLimits::for_problem(elements.len(), ranks.len());
    let mut mem = Memory::with_limits(NoTrace, limits);
    let s = mem.load(elements)?;
    multiselect_in(&mut mem, s, ranks, cfg)
}

/// Arena-level entry point: answers `ranks` over region `s`, which is
/// permuted. Ranks and the report are placed on the stacks and freed again.
pub fn multiselect_in<T: Element, H: AccessHook>(
    mem: &mut Memory<T, H>,
    s: Region,
    ranks: &[usize],
    cfg: &Config,
) -> Result<SelectionReport<T>> {
    validate_ranks(ranks, s.len)?;
    let mark = mem.mark();
    let words: Vec<u64> = ranks.iter().map(|&r| r as u64).collect();
    let rank_region = mem.load_words(&words)?;
    let report = mem.alloc(ranks.len())?;
    let result = funnelselect_in(mem, s, rank_region, report, cfg).map(|()| SelectionReport {
        entries: ranks.iter().copied().zip(mem.peek_region(report)).collect(),
    });
    mem.release(mark);
    result
}

/// Runs the recursion on `s` with sorted ranks in the word region `ranks`,
/// writing the answers in rank order to `report`.
pub fn funnelselect_in<T: Element, H: AccessHook>(
    mem: &mut Memory<T, H>,
    s: Region,
    ranks: Region,
    report: Region,
    cfg: &Config,
) -> Result<()> {
    debug_assert_eq!(ranks.len, report.len);
    let mut out = Reporter {
        region: report,
        next: 0,
    };
    level(mem, s, ranks, 0, 0, cfg, &mut out)
}

struct Reporter {
    region: Region,
    next: usize,
}

impl Reporter {
    fn put<T: Element, H: AccessHook>(&mut self, mem: &mut Memory<T, H>, v: T, rank: usize) {
        mem.set(self.region.start + self.next, v);
        self.next += 1;
        mem.emit(|_| Event::Report { rank });
    }
}

fn fault(cfg: &Config) -> Option<usize> {
    #[cfg(feature = "fault-injection")]
    {
        cfg.fault.map(|crate::config::Fault::InvertedNode(i)| i)
    }
    #[cfg(not(feature = "fault-injection"))]
    {
        let _ = cfg;
        None
    }
}

fn level<T: Element, H: AccessHook>(
    mem: &mut Memory<T, H>,
    s: Region,
    ranks: Region,
    offset: usize,
    depth: u32,
    cfg: &Config,
    out: &mut Reporter,
) -> Result<()> {
    let q = ranks.len;
    if q == 0 {
        return Ok(());
    }
    let n = s.len;
    let mark = mem.mark();

    // gaps as (value, weight) pairs
    let gaps = mem.alloc_words(2 * (q + 1))?;
    let mut prev = 0;
    for i in 0..=q {
        let r = if i < q { mem.wget(ranks.start + i) } else { n as u64 + 1 };
        mem.wset(gaps.start + 2 * i, r - prev);
        mem.wset(gaps.start + 2 * i + 1, r - prev);
        prev = r;
    }
    let delta = weighted_select_in(mem, gaps, target_weight(n))? as usize;
    mem.release(mark);

    let sorted = base_case_predicate(n, delta, cfg);
    mem.emit(|_| Event::Level {
        depth,
        n,
        q,
        delta,
        sorted,
        rank_offset: offset,
    });

    if sorted {
        funnelsort_in(mem, s, cfg.d())?;
        for i in 0..q {
            let r = mem.wget(ranks.start + i) as usize;
            let v = mem.get(s.start + r - 1);
            out.put(mem, v, offset + r);
        }
        return Ok(());
    }

    if !precondition_holds(n, delta, cfg.d()) {
        return Err(Error::PartitionPrecondition { n, delta, d: cfg.d() });
    }
    let part = multi_partition_unchecked(mem, s, delta, cfg.d(), fault(cfg))?;
    let k = part.k();

    // one merged pass over buckets and queries
    let mut j = 0;
    let mut below = 0; // rank of the pivot preceding bucket i
    for (i, &bucket) in part.buckets.iter().enumerate() {
        let pivot_rank = below + bucket.len + 1;
        let first = j;
        while j < q && (mem.wget(ranks.start + j) as usize) < pivot_rank {
            j += 1;
        }
        let count = j - first;
        if count > 0 {
            let r_max = mem.wget(ranks.start + j - 1) as usize - below;
            let p_max = select_in(mem, bucket, r_max)?;
            if count > 1 {
                let r_min = mem.wget(ranks.start + first) as usize - below;
                let p_min = select_in(mem, bucket.slice(0, r_max - 1), r_min)?;
                out.put(mem, p_min, offset + below + r_min);
                if count > 2 {
                    let inner = bucket.slice(r_min, r_max - r_min - 1);
                    let sub_mark = mem.mark();
                    let sub_ranks = mem.alloc_words(count - 2)?;
                    for t in 0..count - 2 {
                        let r = mem.wget(ranks.start + first + 1 + t);
                        mem.wset(sub_ranks.start + t, r - (below + r_min) as u64);
                    }
                    let lo = offset + below + r_min;
                    mem.emit(|m| Event::Recurse {
                        depth,
                        lo,
                        hi: offset + below + r_max,
                        content: m.peek_region(inner),
                    });
                    level(mem, inner, sub_ranks, lo, depth + 1, cfg, out)?;
                    mem.release(sub_mark);
                }
            }
            out.put(mem, p_max, offset + below + r_max);
        }
        if i + 1 < k && j < q && mem.wget(ranks.start + j) as usize == pivot_rank {
            let p = mem.get(part.pivots.start + i);
            out.put(mem, p, offset + pivot_rank);
            j += 1;
        }
        below = pivot_rank;
    }
    debug_assert_eq!(j, q);
    mem.release(mark);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const EXAMPLE: [u64; 15] = [67, 30, 45, 33, 15, 99, 26, 90, 55, 9, 96, 45, 95, 31, 3];

    fn oracle(s: &[u64], ranks: &[usize]) -> Vec<u64> {
        let mut t = s.to_vec();
        t.sort_unstable();
        ranks.iter().map(|&r| t[r - 1]).collect()
    }

    fn random_ranks(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
        let q = match rng.gen_range(0..4) {
            0 => 1,
            1 => rng.gen_range(1..=n),
            2 => (n as f64).sqrt().ceil() as usize,
            _ => rng.gen_range(1..=n.min(40)),
        };
        let mut r: Vec<usize> = rand::seq::index::sample(rng, n, q.min(n))
            .into_iter()
            .map(|x| x + 1)
            .collect();
        r.sort_unstable();
        r
    }

    #[test]
    fn example_array() {
        let rep = multiselect(&EXAMPLE, &[1, 2, 3, 8], &Config::default()).unwrap();
        assert_eq!(rep.values(), vec![3, 9, 15, 45]);
        assert_eq!(rep.ranks(), vec![1, 2, 3, 8]);
    }

    #[test]
    fn no_queries_no_comparisons() {
        let mut mem = Memory::<u64>::untraced();
        let s = mem.load(&EXAMPLE).unwrap();
        let rep = multiselect_in(&mut mem, s, &[], &Config::default()).unwrap();
        assert!(rep.is_empty());
        assert_eq!(mem.comparisons(), 0);
    }

    #[test]
    fn invalid_queries() {
        let cfg = Config::default();
        assert!(matches!(
            multiselect(&EXAMPLE, &[0], &cfg),
            Err(Error::RankOutOfRange { .. })
        ));
        assert!(multiselect(&EXAMPLE, &[16], &cfg).is_err());
        assert!(matches!(
            multiselect(&EXAMPLE, &[3, 3], &cfg),
            Err(Error::RanksNotIncreasing { .. })
        ));
    }

    #[test]
    fn delta_examples() {
        assert_eq!(choose_delta(&[1, 1, 1, 5, 8]), 8);
        assert_eq!(choose_delta(&[16]), 16);
        assert_eq!(choose_delta(&[7; 9]), 7);
    }

    #[test]
    fn delta_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..2000 {
            let n = rng.gen_range(1..500);
            let ranks = random_ranks(&mut rng, n);
            let mut gaps = Vec::new();
            let mut prev = 0;
            for &r in ranks.iter().chain([n + 1].iter()) {
                gaps.push(r - prev);
                prev = r;
            }
            let mut sorted = gaps.clone();
            sorted.sort_unstable();
            let mut acc = 0;
            let want = sorted
                .iter()
                .copied()
                .find(|&g| {
                    acc += g;
                    2 * acc >= n + 2
                })
                .unwrap();
            assert_eq!(choose_delta(&gaps), want);
            let light: usize = gaps.iter().filter(|&&g| g < want).sum();
            assert!(2 * light < n + 2);
        }
    }

    #[test]
    fn predicate_examples() {
        let cfg = Config::default();
        assert!(base_case_predicate(15, 8, &cfg));
        assert!(!base_case_predicate(1 << 30, 1 << 30, &cfg));
        assert!(base_case_predicate(1, 1, &cfg));
        // second disjunct alone: (2N)^2 < Δ^3 here, but N^{3/2} >= Δ² at ε = 1
        let d2 = |eps: f64| Config::new(eps).unwrap().with_d(2).unwrap();
        assert!(base_case_predicate(1 << 24, 1 << 17, &d2(1.0)));
        assert!(!base_case_predicate(1 << 24, 1 << 17, &d2(2.0)));
        // exact tie: N = 2^12, Δ = 2^9, ε = 1: N^3 = Δ^4 = 2^36
        assert!(base_case_predicate(1 << 12, 1 << 9, &d2(1.0)));
        assert!(!base_case_predicate(1 << 12, (1 << 9) + 1, &d2(1.0)));
    }

    #[test]
    fn matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let cfg = Config::default();
        for round in 0..400 {
            let n = rng.gen_range(1..=1 << 13);
            let s: Vec<u64> = match round % 5 {
                0 => vec![7; n],
                1 => (0..n as u64).collect(),
                2 => (0..n as u64).rev().collect(),
                3 => (0..n).map(|_| rng.gen_range(0..8)).collect(),
                _ => (0..n).map(|_| rng.gen()).collect(),
            };
            let ranks = random_ranks(&mut rng, n);
            let rep = multiselect(&s, &ranks, &cfg).unwrap();
            assert_eq!(rep.values(), oracle(&s, &ranks), "round {round}");
        }
    }

    #[test]
    fn other_exponents() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for d in [2, 4, 6] {
            let cfg = Config::default().with_d(d).unwrap();
            for _ in 0..40 {
                let n = rng.gen_range(1..=1 << 14);
                let s: Vec<u64> = (0..n).map(|_| rng.gen_range(0..1000)).collect();
                let ranks = random_ranks(&mut rng, n);
                assert_eq!(multiselect(&s, &ranks, &cfg).unwrap().values(), oracle(&s, &ranks));
            }
        }
    }

    #[test]
    fn recursion_on_clusters() {
        // two tight query clusters far apart; all other gaps are huge
        let n = 1 << 16;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
        let ranks = vec![20_000, 20_010, 20_020, 20_030, 50_000, 50_007, 50_014];
        let mut mem = Memory::<u64>::untraced();
        mem.record_events();
        let r = mem.load(&s).unwrap();
        let rep = multiselect_in(&mut mem, r, &ranks, &Config::default()).unwrap();
        assert_eq!(rep.values(), oracle(&s, &ranks));
        let events = mem.take_events();
        let top = events.iter().find_map(|e| match e {
            Event::Level { depth: 0, sorted, delta, .. } => Some((*sorted, *delta)),
            _ => None,
        });
        let (sorted, delta) = top.unwrap();
        assert!(!sorted);
        let recursions: Vec<(usize, usize)> = events
            .iter()
            .filter_map(|e| match e {
                Event::Recurse { depth: 0, lo, hi, .. } => Some((*lo, *hi)),
                _ => None,
            })
            .collect();
        assert_eq!(recursions, vec![(20_000, 20_030), (50_000, 50_014)]);
        for (lo, hi) in recursions {
            assert!(hi - lo - 1 <= delta - 2);
        }
        let reported: Vec<usize> = events
            .iter()
            .filter_map(|e| match e {
                Event::Report { rank } => Some(*rank),
                _ => None,
            })
            .collect();
        assert_eq!(reported, ranks);
    }

    #[test]
    fn recursion_content_is_the_rank_slice() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let cfg = Config::default();
        for _ in 0..60 {
            let n = rng.gen_range(1000..=1 << 15);
            let s: Vec<u64> = (0..n).map(|_| rng.gen_range(0..5000)).collect();
            let ranks = random_ranks(&mut rng, n);
            let mut sorted = s.clone();
            sorted.sort_unstable();
            let mut mem = Memory::<u64>::untraced();
            mem.record_events();
            let r = mem.load(&s).unwrap();
            multiselect_in(&mut mem, r, &ranks, &cfg).unwrap();
            let mut last = 0;
            for e in mem.take_events() {
                match e {
                    Event::Recurse { lo, hi, mut content, .. } => {
                        content.sort_unstable();
                        assert_eq!(content, sorted[lo..hi - 1]);
                    }
                    Event::Report { rank } => {
                        assert!(rank > last);
                        last = rank;
                    }
                    _ => {}
                }
            }
        }
    }
}
