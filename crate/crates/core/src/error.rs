use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("rank {rank} at position {index} is outside 1..={n}")]
    RankOutOfRange { index: usize, rank: u64, n: usize },

    #[error("ranks must be strictly increasing (position {index}: {prev} then {rank})")]
    RanksNotIncreasing { index: usize, prev: u64, rank: u64 },

    #[error("rank {k} is outside 1..={len}")]
    KOutOfRange { k: usize, len: usize },

    #[error("total weight {total} is below target {target}")]
    InsufficientWeight { total: u128, target: u64 },

    #[error("pivots are not sorted (position {index})")]
    UnsortedPivots { index: usize },

    #[error("bucket {bucket} overflowed its capacity of {capacity}")]
    BucketOverflow { bucket: usize, capacity: usize },

    #[error("multi-partition requires (2N)^d <= D^(d+1) and D <= N (N={n}, D={delta}, d={d})")]
    PartitionPrecondition { n: usize, delta: usize, d: u32 },

    #[error("multi-partition ran out of bucket slots ({slots})")]
    SlotsExhausted { slots: usize },

    #[error("arena overflow: {requested} cells requested with {used} of {limit} in use")]
    ArenaOverflow { requested: usize, used: usize, limit: usize },

    #[error("invalid cache geometry M={m} B={b}")]
    CacheGeometry { m: u64, b: u64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
