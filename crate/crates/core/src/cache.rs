//! Banked, set-associative, non-blocking cache with per-bank MSHRs.
//!
//! Used at L1 (I and D), L2 and L3. Banks are line-interleaved and fully
//! independent: each owns its tag slice, MSHR file, input queue and miss
//! queue, and accepts one access per cycle.
//!
//! Replacement is LRU with write-back/write-allocate. The victim is chosen
//! and evicted when the miss is issued (the way is reserved for the incoming
//! line), not when the fill returns. An access whose LRU victim is still
//! waiting on its own fill stalls until that fill lands. This keeps the tag
//! array evolving strictly in per-bank access order, so the miss count for
//! any trace equals that of a single-cycle functional LRU model with the
//! same geometry regardless of fill timing.

use alloc::string::String;
use alloc::vec::Vec;
use alloc::{collections::VecDeque, vec};
use core::fmt;

use crate::protocol::{AccessKind, LevelId, MemRequest, Requester};
use crate::{Addr, Cycle};

/// Per-bank input queue depth.
pub const INPUT_QUEUE_DEPTH: usize = 8;

/// Outcome of one bank access.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessOutcome {
    Hit { ready_cycle: Cycle },
    MissIssued,
    MissMerged,
    /// Writeback absorbed (installed or merged into a pending fill).
    WritebackDone { ready_cycle: Cycle },
    StallMshrFull,
    StallQueueFull,
    /// The LRU victim way is reserved for an outstanding fill.
    StallVictimPending,
}

impl AccessOutcome {
    pub fn is_stall(self) -> bool {
        matches!(
            self,
            AccessOutcome::StallMshrFull
                | AccessOutcome::StallQueueFull
                | AccessOutcome::StallVictimPending
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CacheError {
    /// A request was routed to a bank that does not own its address.
    BankMismatch { level: String, bank: usize },
    /// A fill arrived with no matching MSHR entry.
    OrphanFill { level: String, line_address: Addr },
    /// Write request delivered to a read-only (instruction) cache.
    WriteToReadOnly { level: String },
}

impl fmt::Display for CacheError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CacheError::BankMismatch { level, bank } => {
                write!(f, "{level}: request routed to wrong bank {bank}")
            }
            CacheError::OrphanFill {
                level,
                line_address,
            } => write!(f, "{level}: fill for line {line_address:#x} has no MSHR"),
            CacheError::WriteToReadOnly { level } => {
                write!(f, "{level}: write issued to read-only cache")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CacheStats {
    pub accesses: u64,
    pub hits: u64,
    pub misses: u64,
    pub merges: u64,
    pub stall_cycles: u64,
    pub writebacks_issued: u64,
    pub writebacks_received: u64,
}

impl CacheStats {
    pub fn hit_rate(&self) -> f64 {
        let demand = self.hits + self.misses + self.merges;
        if demand == 0 {
            0.0
        } else {
            (self.hits + self.merges) as f64 / demand as f64
        }
    }

    pub fn merge(&mut self, other: &CacheStats) {
        self.accesses += other.accesses;
        self.hits += other.hits;
        self.misses += other.misses;
        self.merges += other.merges;
        self.stall_cycles += other.stall_cycles;
        self.writebacks_issued += other.writebacks_issued;
        self.writebacks_received += other.writebacks_received;
    }
}

#[derive(Debug, Clone, Copy)]
struct Way {
    line: u64,
    valid: bool,
    /// Fill outstanding; tag reserved, data not yet present.
    pending: bool,
    dirty: bool,
    /// Write merged while the fill was outstanding.
    pending_dirty: bool,
    recency: u64,
}

impl Way {
    fn empty() -> Self {
        Self {
            line: 0,
            valid: false,
            pending: false,
            dirty: false,
            pending_dirty: false,
            recency: 0,
        }
    }
}

#[derive(Debug, Clone)]
struct MshrEntry {
    line: u64,
    set: usize,
    way: usize,
    waiters: Vec<MemRequest>,
}

/// Downstream request waiting for a grant, visible to the arbiter once
/// `ready` is reached (tag-lookup latency).
#[derive(Debug, Clone)]
struct QueuedMiss {
    req: MemRequest,
    ready: Cycle,
}

#[derive(Debug, Clone)]
struct CacheBank {
    sets: Vec<Vec<Way>>,
    mshrs: Vec<MshrEntry>,
    miss_queue: VecDeque<QueuedMiss>,
    input_queue: VecDeque<MemRequest>,
    seq: u64,
}

/// Monotonic request-id source shared across the simulation.
#[derive(Debug, Clone, Default)]
pub struct IdAllocator {
    next: u64,
}

impl IdAllocator {
    pub fn next(&mut self) -> u64 {
        let id = self.next;
        self.next += 1;
        id
    }

    pub fn issued(&self) -> u64 {
        self.next
    }
}

/// A completed request and the cycle its response becomes visible upstream.
pub type Completion = (MemRequest, Cycle);

#[derive(Debug, Clone)]
pub struct BankedCache {
    level: LevelId,
    cluster: usize,
    socket: usize,
    line_size: u64,
    num_banks: usize,
    sets_per_bank: usize,
    mshr_per_bank: usize,
    miss_queue_depth: usize,
    hit_latency: Cycle,
    read_only: bool,
    banks: Vec<CacheBank>,
    pub stats: CacheStats,
}

impl BankedCache {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        level: LevelId,
        cluster: usize,
        socket: usize,
        line_size: u64,
        num_banks: usize,
        sets_per_bank: usize,
        ways: usize,
        mshr_per_bank: usize,
        hit_latency: Cycle,
        read_only: bool,
    ) -> Self {
        assert!(line_size.is_power_of_two());
        assert!(num_banks >= 1 && sets_per_bank >= 1 && ways >= 1 && mshr_per_bank >= 1);
        let bank = CacheBank {
            sets: vec![vec![Way::empty(); ways]; sets_per_bank],
            mshrs: Vec::with_capacity(mshr_per_bank),
            miss_queue: VecDeque::new(),
            input_queue: VecDeque::new(),
            seq: 0,
        };
        Self {
            level,
            cluster,
            socket,
            line_size,
            num_banks,
            sets_per_bank,
            mshr_per_bank,
            miss_queue_depth: 2 * mshr_per_bank,
            hit_latency,
            read_only,
            banks: vec![bank; num_banks],
            stats: CacheStats::default(),
        }
    }

    pub fn from_level_config(
        level: LevelId,
        cluster: usize,
        socket: usize,
        cfg: &crate::config::CacheLevelConfig,
        read_only: bool,
    ) -> Self {
        Self::new(
            level,
            cluster,
            socket,
            cfg.line_size,
            cfg.num_banks,
            cfg.sets_per_bank(),
            cfg.ways,
            cfg.mshr_per_bank,
            cfg.hit_latency,
            read_only,
        )
    }

    pub fn level(&self) -> LevelId {
        self.level
    }

    pub fn num_banks(&self) -> usize {
        self.num_banks
    }

    pub fn hit_latency(&self) -> Cycle {
        self.hit_latency
    }

    pub fn line_size(&self) -> u64 {
        self.line_size
    }

    fn line_number(&self, addr: Addr) -> u64 {
        addr / self.line_size
    }

    pub fn bank_for(&self, addr: Addr) -> usize {
        (self.line_number(addr) % self.num_banks as u64) as usize
    }

    fn set_for(&self, line: u64) -> usize {
        ((line / self.num_banks as u64) % self.sets_per_bank as u64) as usize
    }

    fn requester(&self, bank: usize) -> Requester {
        Requester::Cache {
            level: self.level,
            cluster: self.cluster,
            socket: self.socket,
            bank,
        }
    }

    pub fn can_accept(&self, bank: usize) -> bool {
        self.banks[bank].input_queue.len() < INPUT_QUEUE_DEPTH
    }

    /// Queue an incoming request at its bank. Caller must route with
    /// [`BankedCache::bank_for`] and check [`BankedCache::can_accept`].
    pub fn accept(&mut self, bank: usize, req: MemRequest) -> Result<(), CacheError> {
        if self.bank_for(req.address) != bank {
            return Err(CacheError::BankMismatch {
                level: String::from(self.level.name()),
                bank,
            });
        }
        debug_assert!(self.can_accept(bank));
        self.banks[bank].input_queue.push_back(req);
        Ok(())
    }

    /// Process one queued access per bank. Returns upstream completions
    /// (hits and absorbed writebacks).
    pub fn process(
        &mut self,
        now: Cycle,
        ids: &mut IdAllocator,
    ) -> Result<Vec<Completion>, CacheError> {
        let mut completions = Vec::new();
        for bank in 0..self.num_banks {
            let Some(req) = self.banks[bank].input_queue.front().cloned() else {
                continue;
            };
            let outcome = self.access(bank, &req, now, ids)?;
            if outcome.is_stall() {
                self.stats.stall_cycles += 1;
                continue;
            }
            self.banks[bank].input_queue.pop_front();
            match outcome {
                AccessOutcome::Hit { ready_cycle }
                | AccessOutcome::WritebackDone { ready_cycle } => {
                    completions.push((req, ready_cycle));
                }
                _ => {}
            }
        }
        Ok(completions)
    }

    /// Look up one request in its bank. Mutates tag/MSHR state on hit, merge
    /// or issued miss; stalls leave the bank untouched.
    pub fn access(
        &mut self,
        bank_idx: usize,
        req: &MemRequest,
        now: Cycle,
        ids: &mut IdAllocator,
    ) -> Result<AccessOutcome, CacheError> {
        if self.bank_for(req.address) != bank_idx {
            return Err(CacheError::BankMismatch {
                level: String::from(self.level.name()),
                bank: bank_idx,
            });
        }
        if self.read_only && req.is_write() {
            return Err(CacheError::WriteToReadOnly {
                level: String::from(self.level.name()),
            });
        }
        if req.kind == AccessKind::Writeback {
            return self.receive_writeback(bank_idx, req, now, ids);
        }

        let line = self.line_number(req.address);
        let set_idx = self.set_for(line);
        let hit_latency = self.hit_latency;
        let requester = self.requester(bank_idx);
        let line_size = self.line_size;
        let seq = {
            let bank = &mut self.banks[bank_idx];
            bank.seq += 1;
            bank.seq
        };

        let bank = &mut self.banks[bank_idx];
        if let Some(way) = bank.sets[set_idx].iter_mut().find(|w| w.valid && w.line == line) {
            way.recency = seq;
            if way.pending {
                way.pending_dirty |= req.is_write();
                let mshr = bank
                    .mshrs
                    .iter_mut()
                    .find(|m| m.line == line)
                    .expect("pending way without MSHR");
                mshr.waiters.push(req.clone());
                self.stats.accesses += 1;
                self.stats.merges += 1;
                return Ok(AccessOutcome::MissMerged);
            }
            way.dirty |= req.is_write();
            self.stats.accesses += 1;
            self.stats.hits += 1;
            return Ok(AccessOutcome::Hit {
                ready_cycle: now + hit_latency,
            });
        }

        // Miss path: reserve a way now so replacement follows access order.
        if bank.mshrs.len() >= self.mshr_per_bank {
            return Ok(AccessOutcome::StallMshrFull);
        }
        let victim = Self::pick_victim(&bank.sets[set_idx]);
        let needs_writeback = {
            let w = &bank.sets[set_idx][victim];
            if w.valid && w.pending {
                return Ok(AccessOutcome::StallVictimPending);
            }
            w.valid && w.dirty
        };
        let slots = 1 + usize::from(needs_writeback);
        if bank.miss_queue.len() + slots > self.miss_queue_depth {
            return Ok(AccessOutcome::StallQueueFull);
        }

        if needs_writeback {
            let victim_line = bank.sets[set_idx][victim].line;
            let wb_addr = victim_line * line_size;
            let wb = MemRequest::new(
                ids.next(),
                wb_addr,
                AccessKind::Writeback,
                req.source,
                requester,
                line_size,
                now,
            );
            bank.miss_queue.push_back(QueuedMiss {
                req: wb,
                ready: now + hit_latency,
            });
            self.stats.writebacks_issued += 1;
        }

        let way = &mut bank.sets[set_idx][victim];
        *way = Way {
            line,
            valid: true,
            pending: true,
            dirty: false,
            pending_dirty: req.is_write(),
            recency: seq,
        };

        let refill = MemRequest::new(
            ids.next(),
            req.line_address,
            AccessKind::Read,
            req.source,
            requester,
            line_size,
            now,
        );
        bank.mshrs.push(MshrEntry {
            line,
            set: set_idx,
            way: victim,
            waiters: vec![req.clone()],
        });
        bank.miss_queue.push_back(QueuedMiss {
            req: refill,
            ready: now + hit_latency,
        });
        self.stats.accesses += 1;
        self.stats.misses += 1;
        Ok(AccessOutcome::MissIssued)
    }

    /// Full-line put from an upper level: update or install without fetching.
    fn receive_writeback(
        &mut self,
        bank_idx: usize,
        req: &MemRequest,
        now: Cycle,
        ids: &mut IdAllocator,
    ) -> Result<AccessOutcome, CacheError> {
        let line = self.line_number(req.address);
        let set_idx = self.set_for(line);
        let hit_latency = self.hit_latency;
        let requester = self.requester(bank_idx);
        let line_size = self.line_size;
        let bank = &mut self.banks[bank_idx];
        if let Some(way) = bank.sets[set_idx].iter_mut().find(|w| w.valid && w.line == line) {
            if way.pending {
                way.pending_dirty = true;
            } else {
                way.dirty = true;
            }
            self.stats.writebacks_received += 1;
            return Ok(AccessOutcome::WritebackDone {
                ready_cycle: now + hit_latency,
            });
        }
        let victim = Self::pick_victim(&bank.sets[set_idx]);
        let needs_writeback = {
            let w = &bank.sets[set_idx][victim];
            if w.valid && w.pending {
                return Ok(AccessOutcome::StallVictimPending);
            }
            w.valid && w.dirty
        };
        if needs_writeback && bank.miss_queue.len() >= self.miss_queue_depth {
            return Ok(AccessOutcome::StallQueueFull);
        }
        bank.seq += 1;
        let seq = bank.seq;
        if needs_writeback {
            let victim_line = bank.sets[set_idx][victim].line;
            let wb = MemRequest::new(
                ids.next(),
                victim_line * line_size,
                AccessKind::Writeback,
                req.source,
                requester,
                line_size,
                now,
            );
            bank.miss_queue.push_back(QueuedMiss {
                req: wb,
                ready: now + hit_latency,
            });
            self.stats.writebacks_issued += 1;
        }
        bank.sets[set_idx][victim] = Way {
            line,
            valid: true,
            pending: false,
            dirty: true,
            pending_dirty: false,
            recency: seq,
        };
        self.stats.writebacks_received += 1;
        Ok(AccessOutcome::WritebackDone {
            ready_cycle: now + hit_latency,
        })
    }

    fn pick_victim(set: &[Way]) -> usize {
        if let Some(idx) = set.iter().position(|w| !w.valid) {
            return idx;
        }
        set.iter()
            .enumerate()
            .min_by_key(|(_, w)| w.recency)
            .map(|(i, _)| i)
            .expect("nonempty set")
    }

    /// Install a returned line: the MSHR's reserved way becomes valid and all
    /// merged waiters complete together.
    pub fn fill(
        &mut self,
        bank_idx: usize,
        line_address: Addr,
        now: Cycle,
    ) -> Result<Vec<Completion>, CacheError> {
        let line = self.line_number(line_address);
        let hit_latency = self.hit_latency;
        let bank = &mut self.banks[bank_idx];
        let pos = bank.mshrs.iter().position(|m| m.line == line).ok_or(
            CacheError::OrphanFill {
                level: String::from(self.level.name()),
                line_address,
            },
        )?;
        let entry = bank.mshrs.swap_remove(pos);
        let way = &mut bank.sets[entry.set][entry.way];
        debug_assert!(way.valid && way.pending && way.line == line);
        way.pending = false;
        way.dirty = way.pending_dirty;
        way.pending_dirty = false;
        Ok(entry
            .waiters
            .into_iter()
            .map(|req| (req, now + hit_latency))
            .collect())
    }

    /// Miss-queue head for `bank` if its tag-lookup latency has elapsed.
    pub fn output_pending(&self, bank: usize, now: Cycle) -> Option<&MemRequest> {
        self.banks[bank]
            .miss_queue
            .front()
            .filter(|q| q.ready <= now)
            .map(|q| &q.req)
    }

    /// Pop up to `budget` granted requests from a bank's miss queue in FIFO
    /// order.
    pub fn drain_miss_queue(&mut self, bank: usize, budget: usize, now: Cycle) -> Vec<MemRequest> {
        let mut out = Vec::new();
        for _ in 0..budget {
            let ready = self.banks[bank]
                .miss_queue
                .front()
                .map_or(false, |q| q.ready <= now);
            if !ready {
                break;
            }
            out.push(self.banks[bank].miss_queue.pop_front().unwrap().req);
        }
        out
    }

    /// Any queued input, outstanding miss or undrained output left?
    pub fn has_work(&self) -> bool {
        self.banks.iter().any(|b| {
            !b.input_queue.is_empty() || !b.mshrs.is_empty() || !b.miss_queue.is_empty()
        })
    }

    pub fn outstanding_misses(&self) -> usize {
        self.banks.iter().map(|b| b.mshrs.len()).sum()
    }
}
