//! Synthetic SIMT core: round-robin warp scheduler, memory coalescer and
//! instruction stream consumption.
//!
//! A core dispatches at most one instruction per cycle from the scheduled
//! warp. Compute instructions occupy only their warp; memory instructions
//! coalesce per-thread addresses into line requests and issue them through
//! the core's single DCache lane, one per cycle. Loads block their warp
//! until every response returns; stores are posted and retire once all
//! their requests are accepted. Instruction traffic is modeled as a
//! periodic line fetch from a per-core code region.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::cache::{BankedCache, IdAllocator};
use crate::protocol::{line_align, AccessKind, MemRequest, Requester, SourcePath};
use crate::{Addr, Cycle};

/// Start of the per-core instruction address region, above any data
/// footprint.
pub const ICACHE_REGION_BASE: Addr = 0x4000_0000;
/// Bytes of code address space per core before the fetch cursor wraps.
pub const ICACHE_REGION_SIZE: Addr = 0x1_0000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    /// Occupies the warp for the given number of cycles, then retires.
    Compute(u64),
    /// Per-thread byte addresses; blocks the warp until all lines return.
    Load(Vec<Addr>),
    /// Per-thread byte addresses; posted, retires on acceptance.
    Store(Vec<Addr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WarpStatus {
    Ready,
    ComputeUntil(Cycle),
    /// Load outstanding: responses still expected.
    WaitingMem { outstanding: usize },
    /// Store issuing: requests not yet accepted by the DCache.
    WaitingStore { remaining: usize },
    Finished,
}

#[derive(Debug, Clone)]
pub struct WarpState {
    pub program: Vec<Instruction>,
    pub pc: usize,
    pub status: WarpStatus,
    pub retired: u64,
}

impl WarpState {
    fn new(program: Vec<Instruction>) -> Self {
        let status = if program.is_empty() {
            WarpStatus::Finished
        } else {
            WarpStatus::Ready
        };
        Self {
            program,
            pc: 0,
            status,
            retired: 0,
        }
    }
}

/// Merge per-thread accesses into one request per distinct line, preserving
/// first-occurrence order.
pub fn coalesce(addresses: &[Addr], line_size: u64) -> Vec<Addr> {
    let mut lines: Vec<Addr> = Vec::new();
    for &addr in addresses {
        let line = line_align(addr, line_size);
        if !lines.contains(&line) {
            lines.push(line);
        }
    }
    lines
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CoreStats {
    pub issued_requests: u64,
    pub coalesced_away: u64,
    pub ifetches: u64,
    pub issue_stall_cycles: u64,
}

/// Remaining line requests of the memory instruction currently owning the
/// LSU.
#[derive(Debug, Clone)]
struct LsuState {
    warp: usize,
    is_store: bool,
    pending: VecDeque<Addr>,
}

#[derive(Debug, Clone)]
pub struct CoreModel {
    path: SourcePath,
    global_index: usize,
    pub warps: Vec<WarpState>,
    rr_next: usize,
    lsu: Option<LsuState>,
    retired_total: u64,
    since_fetch: u64,
    fetch_interval: u64,
    fetch_cursor: u64,
    pub stats: CoreStats,
}

impl CoreModel {
    pub fn new(
        cluster: usize,
        socket: usize,
        core: usize,
        global_index: usize,
        fetch_interval: u64,
        programs: Vec<Vec<Instruction>>,
    ) -> Self {
        Self {
            path: SourcePath {
                cluster,
                socket,
                core,
                warp: 0,
            },
            global_index,
            warps: programs.into_iter().map(WarpState::new).collect(),
            rr_next: 0,
            lsu: None,
            retired_total: 0,
            since_fetch: 0,
            fetch_interval,
            fetch_cursor: 0,
            stats: CoreStats::default(),
        }
    }

    pub fn retired(&self) -> u64 {
        self.retired_total
    }

    pub fn is_finished(&self) -> bool {
        self.warps.iter().all(|w| w.status == WarpStatus::Finished)
    }

    fn source(&self, warp: usize) -> SourcePath {
        SourcePath {
            warp,
            ..self.path
        }
    }

    fn retire(&mut self, warp: usize) {
        let w = &mut self.warps[warp];
        w.retired += 1;
        w.status = if w.pc >= w.program.len() {
            WarpStatus::Finished
        } else {
            WarpStatus::Ready
        };
        self.retired_total += 1;
        self.since_fetch += 1;
    }

    /// Next schedulable warp in round-robin order after the last scheduled
    /// one. Warps whose next instruction needs the LSU are skipped while the
    /// LSU is busy.
    pub fn schedule_warp(&self, now: Cycle) -> Option<usize> {
        let n = self.warps.len();
        (0..n)
            .map(|k| (self.rr_next + k) % n)
            .find(|&i| self.is_schedulable(i, now))
    }

    fn is_schedulable(&self, warp: usize, _now: Cycle) -> bool {
        let w = &self.warps[warp];
        if w.status != WarpStatus::Ready {
            return false;
        }
        match &w.program[w.pc] {
            Instruction::Compute(_) => true,
            Instruction::Load(_) | Instruction::Store(_) => self.lsu.is_none(),
        }
    }

    /// One core cycle: unblock finished compute, drain the LSU by one
    /// request, dispatch one instruction, and issue periodic ICache fetches.
    /// Newly created requests are appended to `issued`.
    pub fn step(
        &mut self,
        now: Cycle,
        dcache: &mut BankedCache,
        icache: &mut BankedCache,
        ids: &mut IdAllocator,
        issued: &mut Vec<MemRequest>,
    ) {
        for i in 0..self.warps.len() {
            if let WarpStatus::ComputeUntil(done) = self.warps[i].status {
                if done <= now {
                    self.retire(i);
                }
            }
        }

        self.drain_lsu(now, dcache, ids, issued);

        if let Some(warp) = self.schedule_warp(now) {
            self.dispatch(warp, now, dcache, ids, issued);
        }

        self.fetch_instructions(now, icache, ids, issued);
    }

    fn drain_lsu(
        &mut self,
        now: Cycle,
        dcache: &mut BankedCache,
        ids: &mut IdAllocator,
        issued: &mut Vec<MemRequest>,
    ) {
        let Some(lsu) = &mut self.lsu else { return };
        let Some(&addr) = lsu.pending.front() else {
            self.lsu = None;
            return;
        };
        let bank = dcache.bank_for(addr);
        if !dcache.can_accept(bank) {
            self.stats.issue_stall_cycles += 1;
            return;
        }
        let warp = lsu.warp;
        let is_store = lsu.is_store;
        lsu.pending.pop_front();
        let empty = lsu.pending.is_empty();
        if empty {
            self.lsu = None;
        }
        let req = MemRequest::new(
            ids.next(),
            addr,
            if is_store {
                AccessKind::Write
            } else {
                AccessKind::Read
            },
            self.source(warp),
            Requester::Core(self.source(warp)),
            dcache.line_size(),
            now,
        );
        issued.push(req.clone());
        dcache.accept(bank, req).expect("bank routed by dcache hash");
        self.stats.issued_requests += 1;
        if is_store {
            if let WarpStatus::WaitingStore { remaining } = self.warps[warp].status {
                if remaining <= 1 {
                    self.retire(warp);
                } else {
                    self.warps[warp].status = WarpStatus::WaitingStore {
                        remaining: remaining - 1,
                    };
                }
            }
        }
    }

    fn dispatch(
        &mut self,
        warp: usize,
        now: Cycle,
        dcache: &mut BankedCache,
        ids: &mut IdAllocator,
        issued: &mut Vec<MemRequest>,
    ) {
        let instr = self.warps[warp].program[self.warps[warp].pc].clone();
        match instr {
            Instruction::Compute(duration) => {
                self.warps[warp].pc += 1;
                self.warps[warp].status = WarpStatus::ComputeUntil(now + duration);
                self.rr_next = (warp + 1) % self.warps.len();
            }
            Instruction::Load(addrs) | Instruction::Store(addrs) => {
                let is_store = matches!(
                    self.warps[warp].program[self.warps[warp].pc],
                    Instruction::Store(_)
                );
                let lines = coalesce(&addrs, dcache.line_size());
                // The first request must be accepted this cycle, otherwise
                // the warp stays Ready and retries the whole instruction.
                let bank = dcache.bank_for(lines[0]);
                if !dcache.can_accept(bank) {
                    self.stats.issue_stall_cycles += 1;
                    return;
                }
                self.stats.coalesced_away += (addrs.len() - lines.len()) as u64;
                self.warps[warp].pc += 1;
                self.rr_next = (warp + 1) % self.warps.len();
                let count = lines.len();
                if is_store {
                    self.warps[warp].status = WarpStatus::WaitingStore { remaining: count };
                } else {
                    self.warps[warp].status = WarpStatus::WaitingMem { outstanding: count };
                }
                self.lsu = Some(LsuState {
                    warp,
                    is_store,
                    pending: lines.into_iter().collect(),
                });
                self.drain_lsu(now, dcache, ids, issued);
            }
        }
    }

    fn fetch_instructions(
        &mut self,
        now: Cycle,
        icache: &mut BankedCache,
        ids: &mut IdAllocator,
        issued: &mut Vec<MemRequest>,
    ) {
        if self.since_fetch < self.fetch_interval {
            return;
        }
        let line = icache.line_size();
        let offset = (self.fetch_cursor * line) % ICACHE_REGION_SIZE;
        let addr = ICACHE_REGION_BASE + self.global_index as u64 * ICACHE_REGION_SIZE + offset;
        let bank = icache.bank_for(addr);
        if !icache.can_accept(bank) {
            return; // retry next cycle
        }
        let req = MemRequest::new(
            ids.next(),
            addr,
            AccessKind::Read,
            self.source(0),
            Requester::CoreFetch(self.source(0)),
            line,
            now,
        );
        issued.push(req.clone());
        icache.accept(bank, req).expect("bank routed by icache hash");
        self.since_fetch -= self.fetch_interval;
        self.fetch_cursor += 1;
        self.stats.ifetches += 1;
    }

    /// A load response arrived for `warp`; retires the load when it is the
    /// last outstanding line.
    pub fn complete_load(&mut self, warp: usize) {
        match self.warps[warp].status {
            WarpStatus::WaitingMem { outstanding } => {
                if outstanding <= 1 {
                    self.retire(warp);
                } else {
                    self.warps[warp].status = WarpStatus::WaitingMem {
                        outstanding: outstanding - 1,
                    };
                }
            }
            other => panic!("load response for warp in state {other:?}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::LevelId;

    #[test]
    fn coalesce_same_line() {
        assert_eq!(coalesce(&[0, 4, 8, 12], 64), vec![0]);
    }

    #[test]
    fn coalesce_distinct_lines() {
        assert_eq!(coalesce(&[0, 64, 128, 192], 64), vec![0, 64, 128, 192]);
    }

    #[test]
    fn coalesce_duplicates_merged() {
        assert_eq!(coalesce(&[0, 0, 64, 64], 64), vec![0, 64]);
    }

    #[test]
    fn coalesce_preserves_first_occurrence_order() {
        assert_eq!(coalesce(&[128, 0, 130, 64], 64), vec![128, 0, 64]);
    }

    fn caches() -> (BankedCache, BankedCache) {
        (
            BankedCache::new(LevelId::L1D, 0, 0, 64, 4, 16, 4, 4, 2, false),
            BankedCache::new(LevelId::L1I, 0, 0, 64, 1, 16, 2, 4, 2, true),
        )
    }

    fn core_with(programs: Vec<Vec<Instruction>>) -> CoreModel {
        CoreModel::new(0, 0, 0, 0, 16, programs)
    }

    #[test]
    fn round_robin_scheduling() {
        let core = core_with(vec![
            vec![Instruction::Compute(1)],
            vec![Instruction::Compute(1)],
        ]);
        // rr_next starts at 0; after scheduling warp 0 the pointer moves on.
        assert_eq!(core.schedule_warp(0), Some(0));
    }

    #[test]
    fn all_blocked_schedules_none() {
        let mut core = core_with(vec![vec![Instruction::Compute(5)]]);
        let (mut d, mut i) = caches();
        let mut ids = IdAllocator::default();
        let mut issued = Vec::new();
        core.step(0, &mut d, &mut i, &mut ids, &mut issued);
        assert_eq!(core.schedule_warp(1), None);
    }

    #[test]
    fn compute_retires_after_duration() {
        let mut core = core_with(vec![vec![Instruction::Compute(1)]]);
        let (mut d, mut i) = caches();
        let mut ids = IdAllocator::default();
        let mut issued = Vec::new();
        core.step(0, &mut d, &mut i, &mut ids, &mut issued);
        assert_eq!(core.retired(), 0);
        core.step(1, &mut d, &mut i, &mut ids, &mut issued);
        assert_eq!(core.retired(), 1);
        assert!(core.is_finished());
    }

    #[test]
    fn load_issues_and_blocks_until_response() {
        let mut core = core_with(vec![vec![Instruction::Load(vec![0, 4, 8, 12])]]);
        let (mut d, mut i) = caches();
        let mut ids = IdAllocator::default();
        let mut issued = Vec::new();
        core.step(0, &mut d, &mut i, &mut ids, &mut issued);
        assert_eq!(issued.len(), 1, "four thread addresses coalesce to one line");
        assert_eq!(
            core.warps[0].status,
            WarpStatus::WaitingMem { outstanding: 1 }
        );
        core.complete_load(0);
        assert_eq!(core.retired(), 1);
        assert!(core.is_finished());
    }

    #[test]
    fn store_retires_on_acceptance() {
        let mut core = core_with(vec![vec![Instruction::Store(vec![0, 4])]]);
        let (mut d, mut i) = caches();
        let mut ids = IdAllocator::default();
        let mut issued = Vec::new();
        core.step(0, &mut d, &mut i, &mut ids, &mut issued);
        assert_eq!(core.retired(), 1, "posted store retires without a response");
        assert!(core.is_finished());
    }

    #[test]
    fn ifetch_issued_after_interval() {
        let programs = vec![vec![Instruction::Compute(1); 20]];
        let mut core = CoreModel::new(0, 0, 0, 0, 4, programs);
        let (mut d, mut i) = caches();
        let mut ids = IdAllocator::default();
        let mut issued = Vec::new();
        for now in 0..30 {
            core.step(now, &mut d, &mut i, &mut ids, &mut issued);
        }
        assert!(core.stats.ifetches >= 4, "periodic fetches: {}", core.stats.ifetches);
        assert!(issued
            .iter()
            .any(|r| matches!(r.requester, Requester::CoreFetch(_))));
    }
}
