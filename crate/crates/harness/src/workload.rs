use std::fmt;
use std::str::FromStr;

use funnelselect::RankQuerySet;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    /// One random rank.
    Single,
    /// `q` evenly spaced ranks (default `q = ⌈√n⌉`).
    Uniform,
    /// `⌈√n⌉` random ranks inside a random window of `⌈n / lg n⌉` positions.
    Clustered,
    /// Ranks `1..=q`.
    Head,
    /// Every rank.
    Sorting,
}

impl Distribution {
    pub const ALL: [Distribution; 5] = [
        Distribution::Single,
        Distribution::Uniform,
        Distribution::Clustered,
        Distribution::Head,
        Distribution::Sorting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Distribution::Single => "single",
            Distribution::Uniform => "uniform",
            Distribution::Clustered => "clustered",
            Distribution::Head => "head",
            Distribution::Sorting => "sorting",
        }
    }
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Distribution {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self> {
        Distribution::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| HarnessError::Workload(format!("unknown distribution {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub n: usize,
    pub distribution: Distribution,
    /// Query count for `uniform` and `head`; ignored otherwise.
    pub q: Option<usize>,
    pub seed: u64,
    /// Fraction of keys that duplicate another, in `[0, 1]`.
    #[serde(default)]
    pub duplicates: f64,
}

impl WorkloadSpec {
    pub fn new(n: usize, distribution: Distribution, seed: u64) -> Self {
        Self {
            n,
            distribution,
            q: None,
            seed,
            duplicates: 0.0,
        }
    }
}

pub fn ceil_sqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt() as usize;
    while r * r < n {
        r += 1;
    }
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    r
}

/// Window width of the clustered distribution, `⌈n / lg n⌉` (`n` for `n < 2`).
pub fn cluster_window(n: usize) -> usize {
    if n < 2 {
        return n;
    }
    ((n as f64) / (n as f64).log2()).ceil() as usize
}

/// Keys from `[0, 2^63)`; a duplicate fraction `f > 0` folds them into a
/// universe of `⌈n (1 - f)⌉` values.
pub fn generate_keys(n: usize, duplicates: f64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut keys: Vec<u64> = (0..n).map(|_| rng.gen_range(0..1u64 << 63)).collect();
    if duplicates > 0.0 {
        let universe = ((n as f64 * (1.0 - duplicates)).ceil() as u64).max(1);
        for k in &mut keys {
            *k %= universe;
        }
    }
    keys
}

/// Deterministic in `spec.seed`.
pub fn generate(spec: &WorkloadSpec) -> Result<(Vec<u64>, RankQuerySet)> {
    let n = spec.n;
    if !(0.0..=1.0).contains(&spec.duplicates) {
        return Err(HarnessError::Workload(format!(
            "duplicate fraction {} outside [0, 1]",
            spec.duplicates
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let keys = generate_keys(n, spec.duplicates, &mut rng);
    // Query positions come from their own stream and are drawn as fractions
    // of n, so one seed puts its queries at the same relative place for
    // every n.
    let mut qrng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x7175_6572_6965_7321);
    let at = |u: f64, len: usize| ((u * len as f64) as usize).min(len.saturating_sub(1));
    let q = spec.q.unwrap_or(match spec.distribution {
        Distribution::Single => 1,
        Distribution::Sorting => n,
        _ => ceil_sqrt(n),
    });
    if q > n {
        return Err(HarnessError::Workload(format!("q = {q} exceeds n = {n}")));
    }
    let ranks: Vec<usize> = match spec.distribution {
        Distribution::Single if n == 0 => vec![],
        Distribution::Single => vec![1 + at(qrng.gen(), n)],
        Distribution::Uniform => (1..=q).map(|i| i * (n + 1) / (q + 1)).collect(),
        Distribution::Clustered => {
            let q = ceil_sqrt(n);
            let w = cluster_window(n);
            let start = at(qrng.gen(), n - w + 1);
            let mut r: Vec<usize> = sample(&mut qrng, w, q.min(w))
                .into_iter()
                .map(|x| start + x + 1)
                .collect();
            r.sort_unstable();
            r
        }
        Distribution::Head => (1..=q).collect(),
        Distribution::Sorting => (1..=n).collect(),
    };
    let queries = RankQuerySet::new(ranks, n)?;
    Ok((keys, queries))
}
