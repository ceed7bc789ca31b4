//! Deterministic cache-oblivious multiple selection, its building blocks,
//! and an ideal-cache simulator to measure them.
//!
//! All algorithms run inside a [`Memory`] arena whose every element access
//! can be observed by an [`AccessHook`], such as an LRU [`CacheModel`].
//! None of them ever sees the cache parameters.
//!
//! ```
//! use funnelselect::{multiselect, Config};
//!
//! let s = [67u64, 30, 45, 33, 15, 99, 26, 90, 55, 9, 96, 45, 95, 31, 3];
//! let report = multiselect(&s, &[1, 2, 3, 8], &Config::default()).unwrap();
//! assert_eq!(report.values(), vec![3, 9, 15, 45]);
//! ```

pub mod arena;
pub mod cachesim;
pub mod config;
pub mod error;
pub mod funnelselect;
pub mod funnelsort;
pub mod multipartition;
pub mod partitioner;
pub mod ranks;
pub mod select;

pub use arena::{ArenaLimits, Element, Event, Memory, Region};
pub use cachesim::{run_traced, AccessHook, CacheModel, CacheSet, NoTrace, TracedRun};
#[cfg(feature = "fault-injection")]
pub use config::Fault;
pub use config::Config;
pub use error::{Error, Result};
pub use funnelselect::{multiselect, multiselect_in, SelectionReport};
pub use funnelsort::{funnelsort, funnelsort_in};
pub use ranks::{compute_gaps, entropy_b, entropy_io, GapProfile, RankQuerySet};
pub use select::{select, select_in};
