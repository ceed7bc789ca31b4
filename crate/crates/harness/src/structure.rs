//! Checks on the recursion recorded by an instrumented run.

use std::fmt::Debug;

use funnelselect::{multiselect_in, ArenaLimits, CacheSet, Config, Event, Memory, NoTrace};

use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct LevelInfo {
    n: usize,
    delta: usize,
    sorted: bool,
    mass: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StructureReport {
    pub levels: usize,
    pub sorted_levels: usize,
    pub recursions: usize,
    pub max_depth: u32,
    /// Elements handed to recursive calls, summed over all levels.
    pub recursed_mass: usize,
    pub violations: Vec<String>,
}

impl StructureReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Verifies the event stream of one run over input `s` with global `ranks`:
///
/// * the subproblems spawned by one level hold fewer than half its elements;
/// * each subproblem has at most `Δ - 2` elements, `Δ` being its parent's;
/// * every gap a subproblem covers is smaller than `Δ`;
/// * a subproblem holds exactly the elements of its rank interval;
/// * answers are reported once each, in increasing rank order.
pub fn check_events<T: Ord + Copy + Debug>(
    s: &[T],
    ranks: &[usize],
    events: &[Event<T>],
) -> StructureReport {
    let mut sorted = s.to_vec();
    sorted.sort_unstable();
    let mut rep = StructureReport::default();
    let mut levels: Vec<LevelInfo> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let mut reported = Vec::with_capacity(ranks.len());

    for e in events {
        match e {
            Event::Level {
                depth,
                n,
                delta,
                sorted: base,
                ..
            } => {
                stack.truncate(*depth as usize);
                if stack.len() != *depth as usize {
                    rep.violations.push(format!("level at depth {depth} without a parent"));
                    continue;
                }
                stack.push(levels.len());
                levels.push(LevelInfo {
                    n: *n,
                    delta: *delta,
                    sorted: *base,
                    mass: 0,
                });
                rep.max_depth = rep.max_depth.max(*depth);
            }
            Event::Recurse {
                depth,
                lo,
                hi,
                content,
            } => {
                rep.recursions += 1;
                let Some(&parent) = stack.get(*depth as usize) else {
                    rep.violations.push(format!("subproblem ({lo}, {hi}) without a level"));
                    continue;
                };
                let size = hi - lo - 1;
                let p = &mut levels[parent];
                p.mass += size;
                rep.recursed_mass += size;
                if size + 2 > p.delta {
                    rep.violations.push(format!(
                        "subproblem ({lo}, {hi}) of size {size} exceeds delta - 2 = {}",
                        p.delta as isize - 2
                    ));
                }
                match (ranks.binary_search(lo), ranks.binary_search(hi)) {
                    (Ok(a), Ok(b)) => {
                        let widest = ranks[a..=b].windows(2).map(|w| w[1] - w[0]).max();
                        if widest.is_some_and(|g| g >= p.delta) {
                            rep.violations.push(format!(
                                "subproblem ({lo}, {hi}) spans a gap of {} >= delta {}",
                                widest.unwrap_or(0),
                                p.delta
                            ));
                        }
                    }
                    _ => rep
                        .violations
                        .push(format!("subproblem ({lo}, {hi}) not bounded by queries")),
                }
                let mut c = content.clone();
                c.sort_unstable();
                if *hi > sorted.len() + 1 || c[..] != sorted[*lo..hi - 1] {
                    rep.violations
                        .push(format!("subproblem ({lo}, {hi}) holds the wrong elements"));
                }
            }
            Event::Report { rank } => reported.push(*rank),
            _ => {}
        }
    }

    for (i, l) in levels.iter().enumerate() {
        if l.sorted {
            rep.sorted_levels += 1;
            if l.mass > 0 {
                rep.violations.push(format!("sorted level {i} recursed"));
            }
        } else if 2 * l.mass >= l.n {
            rep.violations.push(format!(
                "level {i}: {} of {} elements recursed",
                l.mass, l.n
            ));
        }
    }
    rep.levels = levels.len();
    if reported != ranks {
        rep.violations
            .push("reported ranks differ from the queries".to_string());
    }
    rep
}

/// Runs an instance with event recording and checks its structure.
pub fn run_and_check(s: &[u64], ranks: &[usize], cfg: &Config) -> Result<(Vec<u64>, StructureReport)> {
    let mut mem = Memory::with_limits(NoTrace, ArenaLimits::for_problem(s.len(), ranks.len()));
    mem.record_events();
    let region = mem.load(s)?;
    let report = multiselect_in(&mut mem, region, ranks, cfg)?;
    let events = mem.take_events();
    Ok((report.values(), check_events(s, ranks, &events)))
}

/// Everything an algorithm decision could leak into.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub values: Vec<u64>,
    pub comparisons: u64,
    pub events: Vec<Event<u64>>,
}

/// Runs an instance once untraced and once under simulated caches.
pub fn observe_both(
    s: &[u64],
    ranks: &[usize],
    cfg: &Config,
    caches: &[(u64, u64)],
) -> Result<(Observation, Observation)> {
    let limits = ArenaLimits::for_problem(s.len(), ranks.len());
    let mut plain = Memory::with_limits(NoTrace, limits);
    let mut traced = Memory::with_limits(CacheSet::new(caches)?, limits);
    plain.record_events();
    traced.record_events();
    let r = plain.load(s)?;
    let a = multiselect_in(&mut plain, r, ranks, cfg)?;
    let r = traced.load(s)?;
    let b = multiselect_in(&mut traced, r, ranks, cfg)?;
    Ok((
        Observation {
            values: a.values(),
            comparisons: plain.comparisons(),
            events: plain.take_events(),
        },
        Observation {
            values: b.values(),
            comparisons: traced.comparisons(),
            events: traced.take_events(),
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detects_oversized_and_misplaced_subproblems() {
        let s: Vec<u64> = (1..=20).collect();
        let ranks = [2, 5, 9, 19];
        let level = Event::Level {
            depth: 0,
            n: 20,
            q: 4,
            delta: 5,
            sorted: false,
            rank_offset: 0,
        };
        let good = vec![
            level.clone(),
            Event::Report { rank: 2 },
            Event::Recurse {
                depth: 0,
                lo: 2,
                hi: 9,
                content: vec![3, 4, 5, 6, 7, 8],
            },
        ];
        let rep = check_events(&s, &ranks, &good);
        // size 6 > delta - 2, a gap of 4 < 5 is fine, reports incomplete
        assert_eq!(rep.violations.len(), 2, "{:?}", rep.violations);

        let wrong = vec![
            level,
            Event::Recurse {
                depth: 0,
                lo: 5,
                hi: 9,
                content: vec![6, 7, 9],
            },
            Event::Report { rank: 2 },
            Event::Report { rank: 5 },
            Event::Report { rank: 9 },
            Event::Report { rank: 19 },
        ];
        let rep = check_events(&s, &ranks, &wrong);
        assert_eq!(rep.violations.len(), 1, "{:?}", rep.violations);
        assert!(rep.violations[0].contains("wrong elements"));
    }

    #[test]
    fn real_run_is_clean() {
        let s: Vec<u64> = (0..50_000u64).map(|i| i.wrapping_mul(0x9e37_79b9_7f4a_7c15) >> 40).collect();
        let ranks: Vec<usize> = (0..30).map(|i| 10_000 + 7 * i).chain([40_000]).collect();
        let (_, rep) = run_and_check(&s, &ranks, &Config::default()).unwrap();
        assert!(rep.ok(), "{:?}", rep.violations);
        assert!(rep.recursions > 0);
    }
}
