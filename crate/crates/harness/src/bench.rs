//! Cache-simulated measurements and the benchmark CSV.

use std::io::Write;
use std::time::Instant;

use funnelselect::{
    compute_gaps, entropy_b, entropy_io, funnelsort_in, multiselect_in, run_traced, select_in,
    ArenaLimits, Config, RankQuerySet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::workload::{generate, Distribution, WorkloadSpec};
use crate::{HarnessError, Result};

/// Cache geometries `(M, B)` in elements used when none are configured.
pub const DEFAULT_CACHES: [(u64, u64); 2] = [(4096, 64), (65536, 256)];

pub const CSV_HEADER: &str =
    "workload,n,q,M,B,entropy_B,entropy_IO,comparisons,misses,arena_hw,ratio_cmp,ratio_io,seed,wall_ms";

/// Counters of one simulated run; `misses` follows the requested geometries.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub n: usize,
    pub q: usize,
    pub entropy: f64,
    pub comparisons: u64,
    pub misses: Vec<u64>,
    /// Peak cells plus words on the arena stacks.
    pub arena_hw: usize,
    pub wall_ms: f64,
}

impl Measurement {
    /// `comparisons / (B + N)`.
    pub fn ratio_cmp(&self) -> f64 {
        self.comparisons as f64 / (self.entropy + self.n as f64)
    }

    /// `misses / (B_IO + N/B)` for geometry `i` of `caches`.
    pub fn ratio_io(&self, caches: &[(u64, u64)], i: usize) -> f64 {
        let (m, b) = caches[i];
        let eio = entropy_io(self.entropy, m, b).expect("valid geometry");
        self.misses[i] as f64 / (eio + self.n as f64 / b as f64)
    }
}

fn traced<R>(
    n: usize,
    q: usize,
    caches: &[(u64, u64)],
    f: impl FnOnce(&mut funnelselect::Memory<u64, funnelselect::CacheSet>) -> funnelselect::Result<R>,
) -> Result<(funnelselect::TracedRun<R>, f64)> {
    let start = Instant::now();
    let run = run_traced(caches, ArenaLimits::for_problem(n, q), f)?;
    Ok((run, start.elapsed().as_secs_f64() * 1e3))
}

/// Multiple selection on keys `s` for `queries`.
pub fn measure_queries(
    s: &[u64],
    queries: &RankQuerySet,
    cfg: &Config,
    caches: &[(u64, u64)],
) -> Result<Measurement> {
    let ranks = queries.ranks();
    let (run, wall_ms) = traced(s.len(), ranks.len(), caches, |mem| {
        let r = mem.load(s)?;
        multiselect_in(mem, r, ranks, cfg)
    })?;
    Ok(Measurement {
        n: s.len(),
        q: ranks.len(),
        entropy: entropy_b(&compute_gaps(queries)),
        comparisons: run.comparisons,
        misses: run.misses,
        arena_hw: run.high_water.0 + run.high_water.1,
        wall_ms,
    })
}

pub fn measure_workload(spec: &WorkloadSpec, cfg: &Config, caches: &[(u64, u64)]) -> Result<Measurement> {
    let (s, queries) = generate(spec)?;
    measure_queries(&s, &queries, cfg, caches)
}

fn random_keys(n: usize, seed: u64) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(0..1u64 << 63)).collect()
}

/// Linear-time selection of the median of `n` random keys.
pub fn measure_select(n: usize, seed: u64, caches: &[(u64, u64)]) -> Result<Measurement> {
    let s = random_keys(n, seed);
    let k = n.div_ceil(2);
    let (run, wall_ms) = traced(n, 1, caches, |mem| {
        let r = mem.load(&s)?;
        select_in(mem, r, k)
    })?;
    Ok(Measurement {
        n,
        q: 1,
        entropy: entropy_b(&compute_gaps(&RankQuerySet::new(vec![k], n)?)),
        comparisons: run.comparisons,
        misses: run.misses,
        arena_hw: run.high_water.0 + run.high_water.1,
        wall_ms,
    })
}

/// Funnelsort of `n` random keys.
pub fn measure_funnelsort(n: usize, seed: u64, d: u32, caches: &[(u64, u64)]) -> Result<Measurement> {
    let s = random_keys(n, seed);
    let (run, wall_ms) = traced(n, n, caches, |mem| {
        let r = mem.load(&s)?;
        funnelsort_in(mem, r, d)?;
        Ok(mem.peek_region(r))
    })?;
    let mut want = s;
    want.sort_unstable();
    if run.result != want {
        return Err(HarnessError::Workload("funnelsort produced unsorted output".into()));
    }
    Ok(Measurement {
        n,
        q: n,
        entropy: entropy_b(&compute_gaps(&RankQuerySet::all(n))),
        comparisons: run.comparisons,
        misses: run.misses,
        arena_hw: run.high_water.0 + run.high_water.1,
        wall_ms,
    })
}

/// `(N/B)(1 + log_M N)`, the sorting I/O scale.
pub fn sort_scale(n: usize, m: u64, b: u64) -> f64 {
    let n = n as f64;
    n / b as f64 * (1.0 + n.ln() / (m as f64).ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorkloadEntry {
    pub distribution: Distribution,
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub q: Option<usize>,
    #[serde(default)]
    pub duplicates: f64,
}

/// Benchmark matrix, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_caches")]
    pub caches: Vec<(u64, u64)>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub d: Option<u32>,
    #[serde(rename = "workload", default)]
    pub workloads: Vec<WorkloadEntry>,
}

fn default_seeds() -> Vec<u64> {
    vec![1]
}

fn default_caches() -> Vec<(u64, u64)> {
    DEFAULT_CACHES.to_vec()
}

fn default_epsilon() -> f64 {
    1.0
}

impl BenchConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn config(&self) -> Result<Config> {
        let c = Config::new(self.epsilon)?;
        Ok(match self.d {
            Some(d) => c.with_d(d)?,
            None => c,
        })
    }
}

impl Default for BenchConfig {
    /// Single, uniform, clustered and sorting workloads over `N = 2^12..2^20`.
    fn default() -> Self {
        let sizes: Vec<usize> = (12..=20).step_by(2).map(|e| 1 << e).collect();
        Self {
            seeds: default_seeds(),
            caches: default_caches(),
            epsilon: 1.0,
            d: None,
            workloads: [
                Distribution::Single,
                Distribution::Uniform,
                Distribution::Clustered,
                Distribution::Sorting,
            ]
            .into_iter()
            .map(|distribution| WorkloadEntry {
                distribution,
                sizes: sizes.clone(),
                q: None,
                duplicates: 0.0,
            })
            .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[allow(non_snake_case)]
pub struct BenchRecord {
    pub workload: String,
    pub n: usize,
    pub q: usize,
    pub M: u64,
    pub B: u64,
    pub entropy_B: f64,
    pub entropy_IO: f64,
    pub comparisons: u64,
    pub misses: u64,
    pub arena_hw: usize,
    pub ratio_cmp: f64,
    pub ratio_io: f64,
    pub seed: u64,
    pub wall_ms: f64,
}

/// One row per (workload, size, seed, geometry), in configuration order.
/// With `deterministic`, wall times are written as 0 so output is
/// reproducible byte for byte.
pub fn run_bench(bc: &BenchConfig, deterministic: bool) -> Result<Vec<BenchRecord>> {
    let cfg = bc.config()?;
    let mut rows = Vec::new();
    for w in &bc.workloads {
        for &n in &w.sizes {
            for &seed in &bc.seeds {
                let spec = WorkloadSpec {
                    n,
                    distribution: w.distribution,
                    q: w.q,
                    seed,
                    duplicates: w.duplicates,
                };
                let m = measure_workload(&spec, &cfg, &bc.caches)?;
                for (i, &(cm, cb)) in bc.caches.iter().enumerate() {
                    rows.push(BenchRecord {
                        workload: w.distribution.to_string(),
                        n,
                        q: m.q,
                        M: cm,
                        B: cb,
                        entropy_B: m.entropy,
                        entropy_IO: entropy_io(m.entropy, cm, cb)?,
                        comparisons: m.comparisons,
                        misses: m.misses[i],
                        arena_hw: m.arena_hw,
                        ratio_cmp: m.ratio_cmp(),
                        ratio_io: m.ratio_io(&bc.caches, i),
                        seed,
                        wall_ms: if deterministic { 0.0 } else { m.wall_ms },
                    });
                }
            }
        }
    }
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[BenchRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(CSV_HEADER.split(','))?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_record_fields() {
        let mut buf = Vec::new();
        let row = BenchRecord {
            workload: "single".into(),
            n: 1,
            q: 1,
            M: 4096,
            B: 64,
            entropy_B: 0.0,
            entropy_IO: 0.0,
            comparisons: 0,
            misses: 0,
            arena_hw: 0,
            ratio_cmp: 0.0,
            ratio_io: 0.0,
            seed: 0,
            wall_ms: 0.0,
        };
        write_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        let mut empty = Vec::new();
        write_csv(&[], &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap().trim_end(), CSV_HEADER);
    }

    #[test]
    fn parses_toml() {
        let bc = BenchConfig::from_toml(
            r#"
            seeds = [1, 2]
            caches = [[1024, 32]]
            [[workload]]
            distribution = "head"
            sizes = [100, 200]
            q = 10
            "#,
        )
        .unwrap();
        assert_eq!(bc.caches, vec![(1024, 32)]);
        assert_eq!(bc.workloads[0].distribution, Distribution::Head);
        assert_eq!(bc.epsilon, 1.0);
        assert!(BenchConfig::from_toml("bogus = 1").is_err());
        let rows = run_bench(&bc, true).unwrap();
        assert_eq!(rows.len(), 4);
        assert_eq!(rows, run_bench(&bc, true).unwrap());
    }

    #[test]
    fn select_misses_are_linear_scale() {
        let m = measure_select(1 << 14, 1, &[(4096, 64)]).unwrap();
        assert!(m.misses[0] as f64 <= 40.0 * (1.0 + (1 << 14) as f64 / 64.0));
        assert!(m.comparisons > 0);
    }
}
