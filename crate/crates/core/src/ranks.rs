//! Query ranks, the gap profile they induce, and the entropy measures built
//! on top of it.
//!
//! Ranks are 1-based throughout the public API. A query set over `n`
//! elements is implicitly bracketed by the sentinels `r_0 = 0` and
//! `r_{q+1} = n + 1`, so the gaps always sum to `n + 1`.

use crate::error::{Error, Result};

/// A validated, strictly increasing set of 1-based query ranks over `n` elements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RankQuerySet {
    ranks: Vec<usize>,
    n: usize,
}

impl RankQuerySet {
    pub fn new(ranks: Vec<usize>, n: usize) -> Result<Self> {
        validate_ranks(&ranks, n)?;
        Ok(Self { ranks, n })
    }

    /// The query set asking for every rank `1..=n`.
    pub fn all(n: usize) -> Self {
        Self {
            ranks: (1..=n).collect(),
            n,
        }
    }

    pub fn empty(n: usize) -> Self {
        Self {
            ranks: Vec::new(),
            n,
        }
    }

    pub fn ranks(&self) -> &[usize] {
        &self.ranks
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.ranks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranks.is_empty()
    }

    pub fn into_ranks(self) -> Vec<usize> {
        self.ranks
    }
}

pub(crate) fn validate_ranks(ranks: &[usize], n: usize) -> Result<()> {
    let mut prev = 0usize;
    for (index, &rank) in ranks.iter().enumerate() {
        if rank == 0 || rank > n {
            return Err(Error::RankOutOfRange {
                index,
                rank: rank as u64,
                n,
            });
        }
        if index > 0 && rank <= prev {
            return Err(Error::RanksNotIncreasing {
                index,
                prev: prev as u64,
                rank: rank as u64,
            });
        }
        prev = rank;
    }
    Ok(())
}

/// Gap sizes `Δ_1..Δ_{q+1}` between consecutive query ranks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GapProfile {
    gaps: Vec<usize>,
    n: usize,
}

impl GapProfile {
    pub fn gaps(&self) -> &[usize] {
        &self.gaps
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Query-rank entropy `Σ Δ_i lg(N/Δ_i)`, see [`entropy_b`].
    pub fn entropy(&self) -> f64 {
        entropy_b(self)
    }
}

pub fn compute_gaps(queries: &RankQuerySet) -> GapProfile {
    let n = queries.n;
    let mut gaps = Vec::with_capacity(queries.len() + 1);
    let mut prev = 0;
    for &r in queries.ranks.iter().chain(std::iter::once(&(n + 1))) {
        gaps.push(r - prev);
        prev = r;
    }
    GapProfile { gaps, n }
}

/// Query-rank entropy in bits times elements.
///
/// Each summand `Δ_i lg(N/Δ_i)` is clamped at zero: the trailing sentinel
/// makes a single all-covering gap `Δ = N + 1`, whose raw term is slightly
/// negative even though no comparisons are needed.
pub fn entropy_b(profile: &GapProfile) -> f64 {
    if profile.n == 0 {
        return 0.0;
    }
    let n = profile.n as f64;
    profile
        .gaps
        .iter()
        .map(|&g| {
            let g = g as f64;
            (g * (n / g).log2()).max(0.0)
        })
        .sum()
}

/// I/O entropy `B / (B_block · lg(M / B_block))`, in block transfers.
pub fn entropy_io(entropy: f64, m: u64, b: u64) -> Result<f64> {
    if b == 0 || m <= b {
        return Err(Error::CacheGeometry { m, b });
    }
    let b_f = b as f64;
    Ok(entropy / (b_f * (m as f64 / b_f).log2()))
}
