//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes plain strings and numbers and returns a JSON string;
//! errors come back as `{"error": "..."}`.

use funnelselect::multipartition::multi_partition;
use funnelselect::{
    compute_gaps, entropy_b, entropy_io, multiselect_in, run_traced, ArenaLimits, Config, Event,
    Memory, RankQuerySet,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn parse_list<T: std::str::FromStr>(text: &str, what: &str) -> Result<Vec<T>, String> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse().map_err(|_| format!("bad {what} {t:?}")))
        .collect()
}

fn to_json<T: Serialize>(r: Result<T, String>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).expect("plain data serializes"),
        Err(e) => serde_json::json!({ "error": e }).to_string(),
    }
}

#[derive(Debug, Serialize)]
pub struct Level {
    pub depth: u32,
    pub n: usize,
    pub q: usize,
    pub delta: usize,
    pub sorted: bool,
    pub rank_offset: usize,
}

#[derive(Debug, Serialize)]
pub struct Subproblem {
    pub depth: u32,
    pub lo: usize,
    pub hi: usize,
}

#[derive(Debug, Serialize)]
pub struct SelectionView {
    pub ranks: Vec<usize>,
    pub values: Vec<u64>,
    pub comparisons: u64,
    pub entropy: f64,
    pub levels: Vec<Level>,
    pub subproblems: Vec<Subproblem>,
    pub splits: usize,
}

/// Answers `ranks` over `keys` and describes the recursion it took.
pub fn select_view(keys: &str, ranks: &str, epsilon: f64) -> Result<SelectionView, String> {
    let keys: Vec<u64> = parse_list(keys, "key")?;
    let ranks: Vec<usize> = parse_list(ranks, "rank")?;
    let queries = RankQuerySet::new(ranks, keys.len()).map_err(|e| e.to_string())?;
    let cfg = Config::new(epsilon).map_err(|e| e.to_string())?;
    let mut mem = Memory::untraced();
    mem.record_events();
    let s = mem.load(&keys).map_err(|e| e.to_string())?;
    let report = multiselect_in(&mut mem, s, queries.ranks(), &cfg).map_err(|e| e.to_string())?;
    let mut view = SelectionView {
        ranks: report.ranks(),
        values: report.values(),
        comparisons: mem.comparisons(),
        entropy: entropy_b(&compute_gaps(&queries)),
        levels: Vec::new(),
        subproblems: Vec::new(),
        splits: 0,
    };
    for e in mem.take_events() {
        match e {
            Event::Level {
                depth,
                n,
                q,
                delta,
                sorted,
                rank_offset,
            } => view.levels.push(Level {
                depth,
                n,
                q,
                delta,
                sorted,
                rank_offset,
            }),
            Event::Recurse { depth, lo, hi, .. } => view.subproblems.push(Subproblem { depth, lo, hi }),
            Event::Split { .. } => view.splits += 1,
            _ => {}
        }
    }
    Ok(view)
}

#[derive(Debug, Serialize)]
pub struct CurvePoint {
    pub n: usize,
    pub q: usize,
    pub comparisons: u64,
    pub misses: u64,
    pub ratio_cmp: f64,
    pub ratio_io: f64,
}

/// Misses and comparisons for `n = 2^8, 2^9, .., max_n` with `q` evenly
/// spaced ranks (`q = 0` means `⌈√n⌉`) under an `(m, b)` LRU cache.
pub fn miss_curve(max_n: usize, q: usize, m: u64, b: u64, seed: u64) -> Result<Vec<CurvePoint>, String> {
    if max_n > 1 << 22 {
        return Err("max n is limited to 2^22 in the browser".into());
    }
    let cfg = Config::default();
    let mut out = Vec::new();
    let mut n = 256;
    while n <= max_n {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keys: Vec<u64> = (0..n).map(|_| rng.gen()).collect();
        let qn = if q == 0 { (n as f64).sqrt().ceil() as usize } else { q.min(n) };
        let ranks: Vec<usize> = (1..=qn).map(|i| i * (n + 1) / (qn + 1)).collect();
        let queries = RankQuerySet::new(ranks, n).map_err(|e| e.to_string())?;
        let run = run_traced(&[(m, b)], ArenaLimits::for_problem(n, qn), |mem| {
            let s = mem.load(&keys)?;
            multiselect_in(mem, s, queries.ranks(), &cfg)
        })
        .map_err(|e| e.to_string())?;
        let entropy = entropy_b(&compute_gaps(&queries));
        let eio = entropy_io(entropy, m, b).map_err(|e| e.to_string())?;
        out.push(CurvePoint {
            n,
            q: qn,
            comparisons: run.comparisons,
            misses: run.misses[0],
            ratio_cmp: run.comparisons as f64 / (entropy + n as f64),
            ratio_io: run.misses[0] as f64 / (eio + n as f64 / b as f64),
        });
        n *= 2;
    }
    Ok(out)
}

#[derive(Debug, Serialize)]
pub struct PartitionView {
    pub pivots: Vec<u64>,
    pub buckets: Vec<Vec<u64>>,
}

/// Splits `keys` into buckets of at most `delta` elements around pivots.
pub fn partition_view(keys: &str, delta: usize) -> Result<PartitionView, String> {
    let keys: Vec<u64> = parse_list(keys, "key")?;
    let (pivots, buckets) = multi_partition(&keys, delta, Config::default().d()).map_err(|e| e.to_string())?;
    Ok(PartitionView { pivots, buckets })
}

#[wasm_bindgen]
pub fn multiselect_json(keys: &str, ranks: &str, epsilon: f64) -> String {
    to_json(select_view(keys, ranks, epsilon))
}

#[wasm_bindgen]
pub fn miss_curve_json(max_n: u32, q: u32, m: u32, b: u32, seed: u32) -> String {
    to_json(miss_curve(max_n as usize, q as usize, m as u64, b as u64, seed as u64))
}

#[wasm_bindgen]
pub fn partition_json(keys: &str, delta: u32) -> String {
    to_json(partition_view(keys, delta as usize))
}
