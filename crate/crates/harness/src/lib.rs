//! Correctness and measurement tooling around the `funnelselect` crate:
//! a sort-based oracle, seeded workload generators, a shrinking fuzzer,
//! checks on the recorded recursion, and cache-simulated benchmarks.

pub mod bench;
pub mod fuzz;
pub mod io;
pub mod oracle;
pub mod structure;
pub mod workload;

pub use oracle::oracle_multiselect;
pub use workload::{generate, Distribution, WorkloadSpec};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] funnelselect::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("config: {0}")]
    Config(String),
    #[error("workload: {0}")]
    Workload(String),
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
