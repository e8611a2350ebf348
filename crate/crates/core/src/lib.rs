//! Cycle-level model of a multiport GPU memory hierarchy.
//!
//! The crate simulates a small SIMT GPU whose cores sit on top of a banked
//! cache hierarchy (per-socket L1 I/D, per-cluster L2, optional device L3)
//! terminated by a multi-channel HBM model. Port counts between levels are
//! derived from the HBM channel count, and every reduced port boundary is
//! resolved by a configurable arbitration policy.
//!
//! The crate is `no_std` (alloc required); all IO, file formats and the CLI
//! live in the companion `memsim-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod cache;
pub mod config;
pub mod cores;
pub mod engine;
pub mod hbm;
pub mod interconnect;
pub mod protocol;
pub mod rng;
pub mod stats;
pub mod workloads;

pub use config::{
    ArbitrationPolicy, CacheLevelConfig, ConfigError, HierarchyConfig, MemoryConfig,
    TopologyConfig, ValidatedConfig,
};
pub use engine::{run, sweep, SimError, Simulation, SweepPoint, SweepRow};
pub use protocol::{AccessKind, MemRequest, MemResponse, SourcePath};
pub use stats::SimStats;
pub use workloads::{builtin_suite, WorkloadSpec};

/// Simulation time in cycles.
pub type Cycle = u64;
/// Byte address.
pub type Addr = u64;
/// Unique request identifier.
pub type ReqId = u64;
