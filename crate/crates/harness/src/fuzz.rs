//! Randomized comparison of the algorithm against the oracle.

use funnelselect::Config;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::oracle::oracle_multiselect;
use crate::structure::run_and_check;
use crate::workload::{ceil_sqrt, cluster_window};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    pub elements: Vec<u64>,
    pub ranks: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Random,
    FewDistinct,
    AllEqual,
    Sorted,
    Reversed,
    Sawtooth,
}

const SHAPES: [Shape; 6] = [
    Shape::Random,
    Shape::FewDistinct,
    Shape::AllEqual,
    Shape::Sorted,
    Shape::Reversed,
    Shape::Sawtooth,
];

/// The instance of round `round`; rounds cycle through all input shapes.
pub fn instance(seed: u64, round: u64, max_n: usize) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ round.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    let max_n = max_n.max(1);
    let n = if rng.gen_bool(0.25) {
        rng.gen_range(1..=max_n.min(64))
    } else {
        rng.gen_range(1..=max_n)
    };
    let shape = SHAPES[(round % SHAPES.len() as u64) as usize];
    let elements: Vec<u64> = match shape {
        Shape::Random => (0..n).map(|_| rng.gen()).collect(),
        Shape::FewDistinct => {
            let u = rng.gen_range(1..=16);
            (0..n).map(|_| rng.gen_range(0..u)).collect()
        }
        Shape::AllEqual => vec![rng.gen(); n],
        Shape::Sorted => (0..n as u64).map(|i| i / 2).collect(),
        Shape::Reversed => (0..n as u64).rev().collect(),
        Shape::Sawtooth => {
            let period = rng.gen_range(1..=64);
            (0..n as u64).map(|i| i % period).collect()
        }
    };
    let ranks = random_ranks(&mut rng, n);
    Instance { elements, ranks }
}

fn random_ranks(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    let pick = |rng: &mut ChaCha8Rng, lo: usize, width: usize, q: usize| {
        let mut r: Vec<usize> = sample(rng, width, q.min(width))
            .into_iter()
            .map(|x| lo + x)
            .collect();
        r.sort_unstable();
        r
    };
    match rng.gen_range(0..8) {
        0 => vec![],
        1 => vec![rng.gen_range(1..=n)],
        2 => (1..=n).collect(),
        3 => {
            let q = ceil_sqrt(n);
            pick(rng, 1, n, q)
        }
        4 => {
            let q = rng.gen_range(1..=n);
            pick(rng, 1, n, q)
        }
        5 => {
            let w = cluster_window(n).max(1);
            let lo = rng.gen_range(1..=n - w + 1);
            pick(rng, lo, w, ceil_sqrt(n))
        }
        6 => {
            let q = rng.gen_range(1..=n.min(32));
            if rng.gen_bool(0.5) {
                (1..=q).collect()
            } else {
                (n - q + 1..=n).collect()
            }
        }
        _ => {
            let q = rng.gen_range(1..=n.min(8));
            pick(rng, 1, n, q)
        }
    }
}

/// `None` if the instance passes, otherwise what went wrong.
pub fn check_instance(inst: &Instance, cfg: &Config, structure: bool) -> Option<String> {
    let want = oracle_multiselect(&inst.elements, &inst.ranks).values();
    match run_and_check(&inst.elements, &inst.ranks, cfg) {
        Err(e) => Some(format!("error: {e}")),
        Ok((got, _)) if got != want => Some(format!(
            "mismatch: first differing answer at query {}",
            got.iter().zip(&want).position(|(a, b)| a != b).unwrap_or(0)
        )),
        Ok((_, rep)) if structure && !rep.ok() => Some(format!("structure: {}", rep.violations[0])),
        Ok(_) => None,
    }
}

/// Halves the instance while it keeps failing: the first half of the
/// elements, with the queries that still fit (or rank 1 if none do).
pub fn shrink(inst: &Instance, cfg: &Config, structure: bool) -> Instance {
    let mut cur = inst.clone();
    while cur.elements.len() > 1 {
        let half = cur.elements.len() / 2;
        let mut ranks: Vec<usize> = cur.ranks.iter().copied().filter(|&r| r <= half).collect();
        if ranks.is_empty() {
            ranks.push(1);
        }
        let next = Instance {
            elements: cur.elements[..half].to_vec(),
            ranks,
        };
        if check_instance(&next, cfg, structure).is_none() {
            break;
        }
        cur = next;
    }
    cur
}

#[derive(Debug, Clone)]
pub struct Failure {
    pub round: u64,
    pub original_n: usize,
    pub reason: String,
    pub reproducer: Instance,
}

#[derive(Debug, Clone)]
pub struct FuzzSummary {
    pub rounds: u64,
    pub failure: Option<Failure>,
}

impl FuzzSummary {
    pub fn passed(&self) -> bool {
        self.failure.is_none()
    }
}

/// Runs `rounds` instances, stopping at the first failure.
pub fn fuzz(rounds: u64, max_n: usize, seed: u64, cfg: &Config, structure: bool) -> FuzzSummary {
    for round in 0..rounds {
        let inst = instance(seed, round, max_n);
        if let Some(reason) = check_instance(&inst, cfg, structure) {
            let reproducer = shrink(&inst, cfg, structure);
            return FuzzSummary {
                rounds: round + 1,
                failure: Some(Failure {
                    round,
                    original_n: inst.elements.len(),
                    reason,
                    reproducer,
                }),
            };
        }
    }
    FuzzSummary {
        rounds,
        failure: None,
    }
}
