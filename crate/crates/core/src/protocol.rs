//! Memory transaction types and address-to-bank/channel mapping.
//!
//! Every boundary in the hierarchy exchanges [`MemRequest`] values at cache
//! line granularity. Banks and channels are line-interleaved: consecutive
//! lines map to consecutive banks, which maximizes parallelism for the
//! contiguous and strided streams the workloads produce. This module is the
//! single place to swap in an alternative hash.

use crate::{Addr, Cycle, ReqId};

/// Identifies the core (and warp) a request originated from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SourcePath {
    pub cluster: usize,
    pub socket: usize,
    pub core: usize,
    pub warp: usize,
}

/// Cache level labels used for routing and stats.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LevelId {
    L1I,
    L1D,
    L2,
    L3,
}

impl LevelId {
    pub fn name(self) -> &'static str {
        match self {
            LevelId::L1I => "l1i",
            LevelId::L1D => "l1d",
            LevelId::L2 => "l2",
            LevelId::L3 => "l3",
        }
    }
}

/// Who receives the response for a request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Requester {
    /// A core load/store; a load response unblocks the issuing warp.
    Core(SourcePath),
    /// A periodic instruction fetch; the response is consumed silently.
    CoreFetch(SourcePath),
    /// A cache refill or writeback issued by bank `bank` of the cache
    /// instance at (`level`, `cluster`, `socket`).
    Cache {
        level: LevelId,
        cluster: usize,
        socket: usize,
        bank: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessKind {
    Read,
    Write,
    /// Full-line dirty eviction sent downstream; installs or updates without
    /// fetching.
    Writeback,
}

impl AccessKind {
    pub fn is_write(self) -> bool {
        !matches!(self, AccessKind::Read)
    }
}

/// A cache-line-granularity memory transaction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemRequest {
    pub id: ReqId,
    pub address: Addr,
    pub kind: AccessKind,
    /// Originating core, kept across refills for tracing.
    pub source: SourcePath,
    /// Component the response must be delivered to.
    pub requester: Requester,
    /// `address` with the low `log2(line_size)` bits cleared.
    pub line_address: Addr,
    pub issue_cycle: Cycle,
}

impl MemRequest {
    pub fn new(
        id: ReqId,
        address: Addr,
        kind: AccessKind,
        source: SourcePath,
        requester: Requester,
        line_size: u64,
        issue_cycle: Cycle,
    ) -> Self {
        Self {
            id,
            address,
            kind,
            source,
            requester,
            line_address: line_align(address, line_size),
            issue_cycle,
        }
    }

    pub fn is_write(&self) -> bool {
        self.kind.is_write()
    }
}

/// Completion of an outstanding request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemResponse {
    pub request: MemRequest,
    pub fill_cycle: Cycle,
}

impl MemResponse {
    pub fn request_id(&self) -> ReqId {
        self.request.id
    }

    pub fn line_address(&self) -> Addr {
        self.request.line_address
    }
}

/// Clear the low `log2(line_size)` bits of `address`.
#[inline]
pub fn line_align(address: Addr, line_size: u64) -> Addr {
    debug_assert!(line_size.is_power_of_two());
    address & !(line_size - 1)
}

/// Line-interleaved bank selector: `(address / line_size) mod num_banks`.
/// Stable for every address within one line.
#[inline]
pub fn bank_index(address: Addr, line_size: u64, num_banks: usize) -> usize {
    debug_assert!(line_size.is_power_of_two());
    debug_assert!(num_banks >= 1);
    ((address / line_size) % num_banks as u64) as usize
}

/// Same line-interleaved formula applied over HBM channels.
#[inline]
pub fn channel_index(address: Addr, line_size: u64, num_channels: usize) -> usize {
    bank_index(address, line_size, num_channels)
}
