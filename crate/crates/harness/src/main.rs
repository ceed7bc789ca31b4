use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use funnelselect::cachesim::TraceWriter;
use funnelselect::{
    compute_gaps, entropy_b, multiselect_in, AccessHook, ArenaLimits, CacheSet, Config, Memory,
    RankQuerySet,
};
use funnelselect_harness::bench::{run_bench, write_csv, BenchConfig};
use funnelselect_harness::fuzz::fuzz;
use funnelselect_harness::io::{parse_rank_arg, read_keys, write_keys, write_ranks};
use funnelselect_harness::workload::{generate_keys, Distribution, WorkloadSpec};
use funnelselect_harness::{generate, oracle_multiselect, HarnessError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Parser)]
#[command(name = "funnelselect", version, about = "Cache-oblivious multiple selection: run, fuzz, bench")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Answer rank queries on one input.
    Run(RunArgs),
    /// Compare against the sorting oracle on random instances.
    Fuzz(FuzzArgs),
    /// Run a benchmark matrix under simulated caches and write CSV.
    Bench(BenchArgs),
    /// Write a generated workload to a key file and a rank file.
    Gen(GenArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Tall-cache constant; determines the structural exponent d.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    /// Override the exponent derived from epsilon.
    #[arg(long)]
    d: Option<u32>,
}

impl ModelArgs {
    fn config(&self) -> Result<Config, HarnessError> {
        let c = Config::new(self.epsilon)?;
        Ok(match self.d {
            Some(d) => c.with_d(d)?,
            None => c,
        })
    }
}

#[derive(Args)]
struct RunArgs {
    /// Number of keys (required for random input).
    #[arg(long)]
    n: Option<usize>,
    /// Comma-separated ranks, or @file with one rank per line.
    #[arg(long)]
    ranks: String,
    /// Key file (little-endian u64) or random:SEED.
    #[arg(long, default_value = "random:0")]
    input: String,
    #[command(flatten)]
    model: ModelArgs,
    /// Print `rank element` pairs and run statistics.
    #[arg(long)]
    print_report: bool,
    /// Simulated cache MxB (elements); repeatable.
    #[arg(long = "cache", value_parser = parse_cache)]
    caches: Vec<(u64, u64)>,
    /// Compare with the oracle and exit 1 on mismatch.
    #[arg(long)]
    check: bool,
    /// Dump the access trace to this file.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct FuzzArgs {
    #[arg(long, default_value_t = 1000)]
    rounds: u64,
    #[arg(long, default_value_t = 4096)]
    max_n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[command(flatten)]
    model: ModelArgs,
    /// Skip the recursion structure checks.
    #[arg(long)]
    no_structure: bool,
    /// Write a failing reproducer as DIR/keys.bin and DIR/ranks.txt.
    #[arg(long)]
    repro_dir: Option<PathBuf>,
    /// Invert the routing of this partitioner node (mutation testing).
    #[cfg(feature = "fault-injection")]
    #[arg(long)]
    plant_fault: Option<usize>,
}

#[derive(Args)]
struct BenchArgs {
    /// TOML benchmark matrix; a built-in matrix is used if omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output if omitted.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Cache geometry MxB in elements; repeatable, overrides the config.
    #[arg(long = "cache", value_parser = parse_cache)]
    caches: Vec<(u64, u64)>,
    /// Write wall_ms as 0 so the CSV is reproducible byte for byte.
    #[arg(long)]
    deterministic: bool,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value = "uniform")]
    distribution: String,
    #[arg(long)]
    q: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.0)]
    duplicates: f64,
    #[arg(long)]
    keys_out: PathBuf,
    #[arg(long)]
    ranks_out: PathBuf,
}

fn parse_cache(s: &str) -> Result<(u64, u64), String> {
    let (m, b) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected MxB, got {s:?}"))?;
    let m = m.trim().parse().map_err(|e| format!("M: {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("B: {e}"))?;
    Ok((m, b))
}

enum Failure {
    Usage(String),
    Mismatch(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Core(
                funnelselect::Error::ArenaOverflow { .. }
                | funnelselect::Error::BucketOverflow { .. }
                | funnelselect::Error::SlotsExhausted { .. }
                | funnelselect::Error::PartitionPrecondition { .. },
            ) => Failure::Mismatch(e.to_string()),
            e => Failure::Usage(e.to_string()),
        }
    }
}

impl From<funnelselect::Error> for Failure {
    fn from(e: funnelselect::Error) -> Self {
        HarnessError::from(e).into()
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn load_input(args: &RunArgs) -> Result<Vec<u64>, Failure> {
    if let Some(seed) = args.input.strip_prefix("random:") {
        let seed: u64 = seed
            .parse()
            .map_err(|e| Failure::Usage(format!("bad seed in --input: {e}")))?;
        let n = args
            .n
            .ok_or_else(|| Failure::Usage("--n is required with random input".into()))?;
        return Ok(generate_keys(n, 0.0, &mut ChaCha8Rng::seed_from_u64(seed)));
    }
    let keys = read_keys(args.input.as_ref())?;
    if let Some(n) = args.n {
        if n != keys.len() {
            return Err(Failure::Usage(format!(
                "--n {n} but {} holds {} keys",
                args.input,
                keys.len()
            )));
        }
    }
    Ok(keys)
}

struct Outcome {
    values: Vec<u64>,
    comparisons: u64,
    high_water: (usize, usize),
}

fn select_with<H: AccessHook>(
    mut mem: Memory<u64, H>,
    keys: &[u64],
    ranks: &[usize],
    cfg: &Config,
) -> Result<(Outcome, H), Failure> {
    let r = mem.load(keys)?;
    let rep = multiselect_in(&mut mem, r, ranks, cfg)?;
    let out = Outcome {
        values: rep.values(),
        comparisons: mem.comparisons(),
        high_water: mem.high_water(),
    };
    Ok((out, mem.into_hook()))
}

fn cmd_run(args: RunArgs) -> Result<(), Failure> {
    let cfg = args.model.config()?;
    let keys = load_input(&args)?;
    let ranks = parse_rank_arg(&args.ranks)?;
    let queries = RankQuerySet::new(ranks, keys.len())?;
    let ranks = queries.ranks();
    let limits = ArenaLimits::for_problem(keys.len(), ranks.len());
    let caches = CacheSet::new(&args.caches)?;

    let (out, caches) = match &args.trace {
        Some(path) => {
            let writer = TraceWriter::new(BufWriter::new(File::create(path)?))?;
            let (out, (caches, writer)) =
                select_with(Memory::with_limits((caches, writer), limits), &keys, ranks, &cfg)?;
            writer.finish()?;
            (out, caches)
        }
        None => select_with(Memory::with_limits(caches, limits), &keys, ranks, &cfg)?,
    };

    let stdout = io::stdout();
    let mut w = stdout.lock();
    if args.print_report {
        for (r, v) in ranks.iter().zip(&out.values) {
            writeln!(w, "{r}\t{v}")?;
        }
        let entropy = entropy_b(&compute_gaps(&queries));
        writeln!(
            w,
            "# n={} q={} d={} entropy_B={entropy:.3} comparisons={} arena_hw={}",
            keys.len(),
            ranks.len(),
            cfg.d(),
            out.comparisons,
            out.high_water.0 + out.high_water.1
        )?;
        for m in &caches.models {
            writeln!(w, "# M={} B={} misses={} accesses={}", m.m(), m.b(), m.misses(), m.accesses())?;
        }
    } else {
        for v in &out.values {
            writeln!(w, "{v}")?;
        }
    }
    if args.check && out.values != oracle_multiselect(&keys, ranks).values() {
        return Err(Failure::Mismatch("result differs from the oracle".into()));
    }
    Ok(())
}

fn cmd_fuzz(args: FuzzArgs) -> Result<(), Failure> {
    #[allow(unused_mut)]
    let mut cfg = args.model.config()?;
    #[cfg(feature = "fault-injection")]
    if let Some(node) = args.plant_fault {
        cfg = cfg.with_fault(funnelselect::Fault::InvertedNode(node));
    }
    let summary = fuzz(args.rounds, args.max_n, args.seed, &cfg, !args.no_structure);
    match summary.failure {
        None => {
            println!("PASS {} rounds (max n {}, seed {})", summary.rounds, args.max_n, args.seed);
            Ok(())
        }
        Some(f) => {
            let r = &f.reproducer;
            println!(
                "FAIL round {} (n = {}): {}",
                f.round, f.original_n, f.reason
            );
            println!("reproducer: n = {}, ranks = {:?}", r.elements.len(), r.ranks);
            if r.elements.len() <= 64 {
                println!("keys = {:?}", r.elements);
            }
            if let Some(dir) = &args.repro_dir {
                std::fs::create_dir_all(dir)?;
                write_keys(&dir.join("keys.bin"), &r.elements)?;
                write_ranks(&dir.join("ranks.txt"), &r.ranks)?;
                println!("written to {}", dir.display());
            }
            Err(Failure::Mismatch(f.reason))
        }
    }
}

fn cmd_bench(args: BenchArgs) -> Result<(), Failure> {
    let mut bc = match &args.config {
        Some(path) => BenchConfig::from_toml(&std::fs::read_to_string(path)?)?,
        None => BenchConfig::default(),
    };
    if !args.caches.is_empty() {
        bc.caches = args.caches.clone();
    }
    let rows = run_bench(&bc, args.deterministic)?;
    match &args.csv {
        Some(path) => write_csv(&rows, BufWriter::new(File::create(path)?))?,
        None => write_csv(&rows, io::stdout().lock())?,
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<(), Failure> {
    let spec = WorkloadSpec {
        n: args.n,
        distribution: args.distribution.parse::<Distribution>()?,
        q: args.q,
        seed: args.seed,
        duplicates: args.duplicates,
    };
    let (keys, queries) = generate(&spec)?;
    write_keys(&args.keys_out, &keys)?;
    write_ranks(&args.ranks_out, queries.ranks())?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Cmd::Run(a) => cmd_run(a),
        Cmd::Fuzz(a) => cmd_fuzz(a),
        Cmd::Bench(a) => cmd_bench(a),
        Cmd::Gen(a) => cmd_gen(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Mismatch(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
