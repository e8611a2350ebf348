//! Aggregated simulation counters.

use alloc::string::String;
use alloc::vec::Vec;

use crate::cache::CacheStats;
use crate::cores::CoreStats;
use crate::hbm::ChannelStats;
use crate::protocol::SourcePath;
use crate::{Addr, Cycle, ReqId};

/// Grant counters for one arbitrated boundary.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BoundaryStats {
    pub name: String,
    pub grants_per_input: Vec<u64>,
    pub grants_per_output: Vec<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SharedPortStats {
    pub icache_grants: u64,
    pub dcache_grants: u64,
}

/// One core-issued request, recorded when tracing is enabled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceRecord {
    pub cycle: Cycle,
    pub id: ReqId,
    pub address: Addr,
    pub is_write: bool,
    pub source: SourcePath,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimStats {
    pub cycles: Cycle,
    pub retired: u64,
    pub issued_requests: u64,
    pub completed_requests: u64,
    pub max_outstanding: u64,
    pub l1i: CacheStats,
    pub l1d: CacheStats,
    pub l2: CacheStats,
    pub l3: CacheStats,
    pub l3_enabled: bool,
    pub channels: Vec<ChannelStats>,
    pub boundaries: Vec<BoundaryStats>,
    pub shared_port: SharedPortStats,
    pub core: CoreStats,
    pub trace: Vec<TraceRecord>,
}

impl SimStats {
    pub fn ipc(&self) -> f64 {
        if self.cycles == 0 {
            0.0
        } else {
            self.retired as f64 / self.cycles as f64
        }
    }

    /// Mean fraction of cycles each channel spent servicing requests.
    pub fn channel_util_mean(&self) -> f64 {
        if self.cycles == 0 || self.channels.is_empty() {
            return 0.0;
        }
        let total: u64 = self.channels.iter().map(|c| c.busy_cycles).sum();
        total as f64 / (self.cycles as f64 * self.channels.len() as f64)
    }
}
