//! Simulation engine: builds the hierarchy from a validated configuration
//! and advances it cycle by cycle.
//!
//! Every cycle runs six phases in a fixed order: (1) HBM channels tick,
//! (2) responses and fills propagate upward, (3) cores issue, (4) cache
//! banks each process one queued access, (5) port boundaries arbitrate and
//! move requests downward, (6) counters commit. Requests granted in phase 5
//! land in downstream input queues and are processed the following cycle.
//! The run is a pure function of (config, workload, seed).

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::cache::{BankedCache, CacheError, Completion, IdAllocator};
use crate::config::{validate, ArbitrationPolicy, ConfigError, HierarchyConfig, ValidatedConfig};
use crate::cores::{CoreModel, Instruction};
use crate::hbm::HbmChannel;
use crate::interconnect::{Arbiter, LaneOwner, SharedPortArbiter};
use crate::protocol::{AccessKind, LevelId, MemRequest, Requester};
use crate::stats::{BoundaryStats, SharedPortStats, SimStats, TraceRecord};
use crate::workloads::{generate, WorkloadError, WorkloadSpec};
use crate::Cycle;

#[derive(Debug, Clone, PartialEq)]
pub enum SimError {
    Config(ConfigError),
    Workload(WorkloadError),
    Cache(CacheError),
    CycleCapExceeded { cap: u64, retired: u64 },
    /// No request, retirement or grant made progress for a full detection
    /// window while work remained outstanding.
    Deadlock { cycle: Cycle, outstanding: u64 },
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config(e) => write!(f, "configuration error: {e}"),
            SimError::Workload(e) => write!(f, "workload error: {e}"),
            SimError::Cache(e) => write!(f, "cache protocol error: {e}"),
            SimError::CycleCapExceeded { cap, retired } => {
                write!(f, "cycle cap of {cap} exceeded ({retired} instructions retired)")
            }
            SimError::Deadlock { cycle, outstanding } => write!(
                f,
                "no forward progress by cycle {cycle} with {outstanding} requests outstanding"
            ),
        }
    }
}

impl From<ConfigError> for SimError {
    fn from(e: ConfigError) -> Self {
        SimError::Config(e)
    }
}

impl From<WorkloadError> for SimError {
    fn from(e: WorkloadError) -> Self {
        SimError::Workload(e)
    }
}

impl From<CacheError> for SimError {
    fn from(e: CacheError) -> Self {
        SimError::Cache(e)
    }
}

/// An upward response waiting for its delivery cycle. Min-ordered by
/// (ready, seq) so delivery order is total and deterministic.
#[derive(Debug, Clone)]
struct PendingResp {
    ready: Cycle,
    seq: u64,
    req: MemRequest,
}

impl PartialEq for PendingResp {
    fn eq(&self, other: &Self) -> bool {
        self.ready == other.ready && self.seq == other.seq
    }
}

impl Eq for PendingResp {}

impl PartialOrd for PendingResp {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PendingResp {
    fn cmp(&self, other: &Self) -> Ordering {
        // Reversed: BinaryHeap is a max-heap, we want the earliest response.
        other
            .ready
            .cmp(&self.ready)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct SocketState {
    cores: Vec<CoreModel>,
    l1i: BankedCache,
    l1d: BankedCache,
    i_arb: Arbiter,
    d_arb: Arbiter,
    shared: SharedPortArbiter,
}

struct ClusterState {
    sockets: Vec<SocketState>,
    l2: BankedCache,
    l2_arb: Arbiter,
}

struct L3State {
    cache: BankedCache,
    arb: Arbiter,
}

pub struct Simulation {
    v: ValidatedConfig,
    clusters: Vec<ClusterState>,
    l3: Option<L3State>,
    mem_arb: Option<Arbiter>,
    hbm: Vec<HbmChannel>,
    ids: IdAllocator,
    responses: BinaryHeap<PendingResp>,
    resp_seq: u64,
    completed: u64,
    moves: u64,
    cycle: Cycle,
    max_outstanding: u64,
    trace_enabled: bool,
    trace: Vec<TraceRecord>,
}

impl Simulation {
    pub fn new(v: &ValidatedConfig, spec: &WorkloadSpec) -> Result<Self, SimError> {
        let programs = generate(
            spec,
            v.topology(),
            v.config().l1_dcache.line_size,
            v.config().seed,
        )?;
        Self::with_programs(v, programs)
    }

    /// Build a simulation over explicit per-warp instruction streams, ordered
    /// cluster-major then socket, core, warp.
    pub fn with_programs(
        v: &ValidatedConfig,
        programs: Vec<Vec<Instruction>>,
    ) -> Result<Self, SimError> {
        let cfg = v.config();
        let plan = v.plan();
        let topo = v.topology();
        assert_eq!(
            programs.len(),
            topo.total_warps(),
            "one program per warp required"
        );
        let policy = cfg.arbitration;
        let strict = cfg.source_rr_strict;
        let arb = |inputs: usize, outputs: usize| {
            Arbiter::new(policy, inputs, outputs, strict).expect("boundary validated")
        };

        let mut programs = programs.into_iter();
        let mut clusters = Vec::with_capacity(topo.num_clusters);
        for ci in 0..topo.num_clusters {
            let mut sockets = Vec::with_capacity(topo.sockets_per_cluster);
            for si in 0..topo.sockets_per_cluster {
                let mut cores = Vec::with_capacity(topo.cores_per_socket);
                for ki in 0..topo.cores_per_socket {
                    let global = (ci * topo.sockets_per_cluster + si) * topo.cores_per_socket + ki;
                    let warp_programs: Vec<Vec<Instruction>> =
                        (&mut programs).take(topo.warps_per_core).collect();
                    cores.push(CoreModel::new(
                        ci,
                        si,
                        ki,
                        global,
                        topo.icache_fetch_interval,
                        warp_programs,
                    ));
                }
                sockets.push(SocketState {
                    cores,
                    l1i: BankedCache::from_level_config(LevelId::L1I, ci, si, &cfg.l1_icache, true),
                    l1d: BankedCache::from_level_config(LevelId::L1D, ci, si, &cfg.l1_dcache, false),
                    i_arb: arb(plan.l1i_banks, plan.l1i_out),
                    d_arb: arb(plan.l1d_banks, plan.l1d_out),
                    shared: SharedPortArbiter::new(plan.l1i_out, plan.l1d_out),
                });
            }
            clusters.push(ClusterState {
                sockets,
                l2: BankedCache::from_level_config(LevelId::L2, ci, 0, &cfg.l2, false),
                l2_arb: arb(plan.l2_banks, plan.l2_out),
            });
        }

        let l3 = cfg.l3.enabled.then(|| L3State {
            cache: BankedCache::from_level_config(LevelId::L3, 0, 0, &cfg.l3, false),
            arb: arb(plan.l3_banks, plan.l3_out),
        });
        let mem_arb = (plan.mem_inputs > plan.channels)
            .then(|| arb(plan.mem_inputs, plan.channels));
        let hbm = (0..plan.channels)
            .map(|_| {
                HbmChannel::new(
                    cfg.memory.channel_latency,
                    cfg.memory.channel_queue_depth,
                    cfg.memory.requests_per_channel_per_cycle,
                )
            })
            .collect();

        Ok(Self {
            v: v.clone(),
            clusters,
            l3,
            mem_arb,
            hbm,
            ids: IdAllocator::default(),
            responses: BinaryHeap::new(),
            resp_seq: 0,
            completed: 0,
            moves: 0,
            cycle: 0,
            max_outstanding: 0,
            trace_enabled: false,
            trace: Vec::new(),
        })
    }

    pub fn enable_trace(&mut self) {
        self.trace_enabled = true;
    }

    pub fn cycle(&self) -> Cycle {
        self.cycle
    }

    fn total_retired(&self) -> u64 {
        self.clusters
            .iter()
            .flat_map(|c| &c.sockets)
            .flat_map(|s| &s.cores)
            .map(|k| k.retired())
            .sum()
    }

    fn done(&self) -> bool {
        self.ids.issued() == self.completed
            && self
                .clusters
                .iter()
                .all(|c| c.sockets.iter().all(|s| s.cores.iter().all(|k| k.is_finished())))
    }

    fn push_response(&mut self, ready: Cycle, req: MemRequest) {
        let seq = self.resp_seq;
        self.resp_seq += 1;
        self.responses.push(PendingResp { ready, seq, req });
    }

    fn push_completions(&mut self, completions: Vec<Completion>) {
        for (req, ready) in completions {
            self.push_response(ready, req);
        }
    }

    /// Deliver one response to its requester. Fills may schedule further
    /// upward responses after the receiving cache's hit latency.
    fn deliver(&mut self, req: MemRequest, now: Cycle) -> Result<(), CacheError> {
        self.completed += 1;
        match req.requester {
            Requester::Core(p) => {
                if req.kind == AccessKind::Read {
                    self.clusters[p.cluster].sockets[p.socket].cores[p.core].complete_load(p.warp);
                }
            }
            Requester::CoreFetch(_) => {}
            Requester::Cache {
                level,
                cluster,
                socket,
                bank,
            } => {
                // A writeback response is only an acknowledgement.
                if req.kind == AccessKind::Writeback {
                    return Ok(());
                }
                let completions = match level {
                    LevelId::L1I => {
                        self.clusters[cluster].sockets[socket].l1i.fill(bank, req.line_address, now)?
                    }
                    LevelId::L1D => {
                        self.clusters[cluster].sockets[socket].l1d.fill(bank, req.line_address, now)?
                    }
                    LevelId::L2 => self.clusters[cluster].l2.fill(bank, req.line_address, now)?,
                    LevelId::L3 => self
                        .l3
                        .as_mut()
                        .expect("fill addressed to disabled L3")
                        .cache
                        .fill(bank, req.line_address, now)?,
                };
                self.push_completions(completions);
            }
        }
        Ok(())
    }

    /// Advance one cycle through the six phases.
    pub fn step(&mut self) -> Result<(), CacheError> {
        let now = self.cycle;

        // Phase 1: HBM channels tick, ascending channel order.
        let mut returned = Vec::new();
        for channel in &mut self.hbm {
            returned.extend(channel.tick(now));
        }
        for resp in returned {
            self.push_response(now, resp.request);
        }

        // Phase 2: deliver every response that is due.
        while self
            .responses
            .peek()
            .map_or(false, |r| r.ready <= now)
        {
            let resp = self.responses.pop().unwrap();
            self.deliver(resp.req, now)?;
        }

        // Phase 3: cores issue into their socket's L1 input queues.
        let mut issued = Vec::new();
        {
            let ids = &mut self.ids;
            for cluster in &mut self.clusters {
                for socket in &mut cluster.sockets {
                    let SocketState {
                        cores, l1i, l1d, ..
                    } = socket;
                    for core in cores {
                        core.step(now, l1d, l1i, ids, &mut issued);
                    }
                }
            }
        }
        if self.trace_enabled {
            for req in &issued {
                self.trace.push(TraceRecord {
                    cycle: now,
                    id: req.id,
                    address: req.address,
                    is_write: req.is_write(),
                    source: req.source,
                });
            }
        }

        // Phase 4: every cache bank processes one queued access.
        let mut completions = Vec::new();
        {
            let ids = &mut self.ids;
            for cluster in &mut self.clusters {
                for socket in &mut cluster.sockets {
                    completions.extend(socket.l1i.process(now, ids)?);
                    completions.extend(socket.l1d.process(now, ids)?);
                }
                completions.extend(cluster.l2.process(now, ids)?);
            }
            if let Some(l3) = &mut self.l3 {
                completions.extend(l3.cache.process(now, ids)?);
            }
        }
        self.push_completions(completions);

        // Phase 5: arbitrate boundaries and move requests one level down.
        for ci in 0..self.clusters.len() {
            for si in 0..self.clusters[ci].sockets.len() {
                self.move_socket_down(ci, si, now)?;
            }
        }
        self.move_l2_down(now)?;
        self.move_l3_down(now);

        // Phase 6: counters commit.
        let outstanding = self.ids.issued() - self.completed;
        self.max_outstanding = self.max_outstanding.max(outstanding);
        self.cycle += 1;
        Ok(())
    }

    /// L1 I/D miss queues compete for the socket's combined output lanes,
    /// then granted requests enter the cluster L2.
    ///
    /// Arbitration runs in two stages: a tentative pass (on cloned arbiters)
    /// finds which lanes would carry a request, the shared-port arbiter
    /// assigns contended lanes, and the committed pass runs with the losing
    /// lanes masked. Each input demands exactly one output, so the committed
    /// winners are the tentative winners restricted to the allowed lanes.
    fn move_socket_down(&mut self, ci: usize, si: usize, now: Cycle) -> Result<(), CacheError> {
        let d_out = self.v.plan().l1d_out;
        let i_out = self.v.plan().l1i_out;
        let cluster = &mut self.clusters[ci];
        let l2 = &mut cluster.l2;
        let socket = &mut cluster.sockets[si];

        let d_pending: Vec<Option<usize>> = (0..socket.l1d.num_banks())
            .map(|b| socket.l1d.output_pending(b, now).map(|_| b % d_out))
            .collect();
        let i_pending: Vec<Option<usize>> = (0..socket.l1i.num_banks())
            .map(|b| socket.l1i.output_pending(b, now).map(|_| b % i_out))
            .collect();

        let d_tentative = socket.d_arb.clone().arbitrate_all(&d_pending);
        let i_tentative = socket.i_arb.clone().arbitrate_all(&i_pending);
        let d_lane: Vec<bool> = (0..d_out)
            .map(|o| d_tentative.iter().any(|g| g.1 == o))
            .collect();
        let i_lane: Vec<bool> = (0..i_out)
            .map(|o| i_tentative.iter().any(|g| g.1 == o))
            .collect();
        let lanes = socket.shared.grant(&i_lane, &d_lane);

        let d_allowed: Vec<bool> = (0..d_out)
            .map(|o| matches!(lanes.get(o), Some(Some(LaneOwner::DCache(_)))))
            .collect();
        let i_allowed: Vec<bool> = (0..i_out)
            .map(|o| matches!(lanes.get(o), Some(Some(LaneOwner::ICache(_)))))
            .collect();
        let d_grants = socket.d_arb.arbitrate(&d_pending, &d_allowed);
        let i_grants = socket.i_arb.arbitrate(&i_pending, &i_allowed);

        for (lane, owner) in lanes.iter().enumerate() {
            let (grant, cache) = match owner {
                Some(LaneOwner::DCache(_)) => (
                    d_grants.iter().find(|g| g.1 == lane),
                    &mut socket.l1d,
                ),
                Some(LaneOwner::ICache(_)) => (
                    i_grants.iter().find(|g| g.1 == lane),
                    &mut socket.l1i,
                ),
                None => continue,
            };
            let Some((bank, _)) = grant else { continue };
            let Some(head) = cache.output_pending(bank, now) else {
                continue;
            };
            let target = l2.bank_for(head.address);
            // A full downstream queue withholds the transfer; the request
            // stays at the head of its miss queue and is re-granted later.
            if !l2.can_accept(target) {
                continue;
            }
            let req = cache.drain_miss_queue(bank, 1, now).remove(0);
            l2.accept(target, req)?;
            self.moves += 1;
        }
        Ok(())
    }

    /// Per-cluster L2 miss queues feed the L3 when present, otherwise the
    /// memory boundary (arbitrated when the lane count exceeds the channel
    /// count, directly wired otherwise).
    fn move_l2_down(&mut self, now: Cycle) -> Result<(), CacheError> {
        let l2_out = self.v.plan().l2_out;
        let channels = self.v.plan().channels;
        let pendings: Vec<Vec<Option<usize>>> = self
            .clusters
            .iter()
            .map(|cl| {
                (0..cl.l2.num_banks())
                    .map(|b| cl.l2.output_pending(b, now).map(|_| b % l2_out))
                    .collect()
            })
            .collect();

        if self.l3.is_some() {
            for ci in 0..self.clusters.len() {
                let grants = self.clusters[ci].l2_arb.arbitrate_all(&pendings[ci]);
                for (bank, _lane) in grants.iter() {
                    let l3 = self.l3.as_mut().unwrap();
                    let head = self.clusters[ci].l2.output_pending(bank, now).unwrap();
                    let target = l3.cache.bank_for(head.address);
                    if !l3.cache.can_accept(target) {
                        continue;
                    }
                    let req = self.clusters[ci].l2.drain_miss_queue(bank, 1, now).remove(0);
                    l3.cache.accept(target, req)?;
                    self.moves += 1;
                }
            }
        } else if self.mem_arb.is_some() {
            // Tentative cluster grants nominate global lanes; the memory
            // arbiter picks channels; clusters commit with losers masked.
            let mem_inputs = self.v.plan().mem_inputs;
            let mut mem_pending = vec![None; mem_inputs];
            for (ci, cluster) in self.clusters.iter().enumerate() {
                let tentative = cluster.l2_arb.clone().arbitrate_all(&pendings[ci]);
                for (_, lane) in tentative.iter() {
                    let global = ci * l2_out + lane;
                    mem_pending[global] = Some(global % channels);
                }
            }
            let space: Vec<bool> = self.hbm.iter().map(|c| c.has_space()).collect();
            let mem_grants = self
                .mem_arb
                .as_mut()
                .unwrap()
                .arbitrate(&mem_pending, &space);
            for ci in 0..self.clusters.len() {
                let allowed: Vec<bool> = (0..l2_out)
                    .map(|lane| mem_grants.output_for(ci * l2_out + lane).is_some())
                    .collect();
                let grants = self.clusters[ci].l2_arb.arbitrate(&pendings[ci], &allowed);
                for (bank, lane) in grants.iter() {
                    let channel = mem_grants
                        .output_for(ci * l2_out + lane)
                        .expect("granted lane has a channel");
                    let req = self.clusters[ci].l2.drain_miss_queue(bank, 1, now).remove(0);
                    let accepted = self.hbm[channel].try_enqueue(req, now);
                    debug_assert!(accepted, "channel space checked before grant");
                    self.moves += 1;
                }
            }
        } else {
            // Lane count within the channel count: lanes wire straight
            // through, gated only by channel queue space.
            for ci in 0..self.clusters.len() {
                let allowed: Vec<bool> = (0..l2_out)
                    .map(|lane| self.hbm[ci * l2_out + lane].has_space())
                    .collect();
                let grants = self.clusters[ci].l2_arb.arbitrate(&pendings[ci], &allowed);
                for (bank, lane) in grants.iter() {
                    let req = self.clusters[ci].l2.drain_miss_queue(bank, 1, now).remove(0);
                    let accepted = self.hbm[ci * l2_out + lane].try_enqueue(req, now);
                    debug_assert!(accepted, "channel space checked before grant");
                    self.moves += 1;
                }
            }
        }
        Ok(())
    }

    /// L3 miss queues feed the channels positionally; `l3_out <= channels`
    /// always holds, so no further arbitration is needed.
    fn move_l3_down(&mut self, now: Cycle) {
        let Some(l3) = &mut self.l3 else { return };
        let l3_out = self.v.plan().l3_out;
        let pending: Vec<Option<usize>> = (0..l3.cache.num_banks())
            .map(|b| l3.cache.output_pending(b, now).map(|_| b % l3_out))
            .collect();
        let allowed: Vec<bool> = (0..l3_out).map(|lane| self.hbm[lane].has_space()).collect();
        let grants = l3.arb.arbitrate(&pending, &allowed);
        for (bank, lane) in grants.iter() {
            let req = l3.cache.drain_miss_queue(bank, 1, now).remove(0);
            let accepted = self.hbm[lane].try_enqueue(req, now);
            debug_assert!(accepted, "channel space checked before grant");
            self.moves += 1;
        }
    }

    fn deadlock_window(&self) -> u64 {
        let cfg = self.v.config();
        cfg.memory.channel_latency
            + cfg.l1_icache.hit_latency
            + cfg.l1_dcache.hit_latency
            + cfg.l2.hit_latency
            + cfg.l3.hit_latency
            + 1024
    }

    /// Run to completion, the cycle cap, or a detected deadlock.
    pub fn run(&mut self) -> Result<SimStats, SimError> {
        let cap = self.v.config().cycle_cap;
        let window = self.deadlock_window();
        let mut last_token = (0u64, 0u64, 0u64, 0u64);
        let mut idle = 0u64;
        while !self.done() {
            if self.cycle >= cap {
                return Err(SimError::CycleCapExceeded {
                    cap,
                    retired: self.total_retired(),
                });
            }
            self.step()?;
            let token = (
                self.ids.issued(),
                self.completed,
                self.total_retired(),
                self.moves,
            );
            if token == last_token {
                idle += 1;
                if idle > window {
                    return Err(SimError::Deadlock {
                        cycle: self.cycle,
                        outstanding: self.ids.issued() - self.completed,
                    });
                }
            } else {
                idle = 0;
                last_token = token;
            }
        }
        Ok(self.collect_stats())
    }

    fn collect_stats(&mut self) -> SimStats {
        let mut stats = SimStats {
            cycles: self.cycle,
            retired: self.total_retired(),
            issued_requests: self.ids.issued(),
            completed_requests: self.completed,
            max_outstanding: self.max_outstanding,
            l3_enabled: self.l3.is_some(),
            channels: self.hbm.iter().map(|c| c.stats).collect(),
            trace: core::mem::take(&mut self.trace),
            ..SimStats::default()
        };
        let boundary = |name: String, arb: &Arbiter| BoundaryStats {
            name,
            grants_per_input: arb.grants_per_input.clone(),
            grants_per_output: arb.grants_per_output.clone(),
        };
        for (ci, cluster) in self.clusters.iter().enumerate() {
            for (si, socket) in cluster.sockets.iter().enumerate() {
                stats.l1i.merge(&socket.l1i.stats);
                stats.l1d.merge(&socket.l1d.stats);
                stats
                    .boundaries
                    .push(boundary(format!("l1d[c{ci}s{si}]"), &socket.d_arb));
                stats
                    .boundaries
                    .push(boundary(format!("l1i[c{ci}s{si}]"), &socket.i_arb));
                stats.shared_port = SharedPortStats {
                    icache_grants: stats.shared_port.icache_grants + socket.shared.icache_grants,
                    dcache_grants: stats.shared_port.dcache_grants + socket.shared.dcache_grants,
                };
                for core in &socket.cores {
                    stats.core.issued_requests += core.stats.issued_requests;
                    stats.core.coalesced_away += core.stats.coalesced_away;
                    stats.core.ifetches += core.stats.ifetches;
                    stats.core.issue_stall_cycles += core.stats.issue_stall_cycles;
                }
            }
            stats.l2.merge(&cluster.l2.stats);
            stats
                .boundaries
                .push(boundary(format!("l2[c{ci}]"), &cluster.l2_arb));
        }
        if let Some(l3) = &self.l3 {
            stats.l3.merge(&l3.cache.stats);
            stats.boundaries.push(boundary(String::from("l3"), &l3.arb));
        }
        if let Some(mem) = &self.mem_arb {
            stats.boundaries.push(boundary(String::from("mem"), mem));
        }
        stats
    }
}

/// Validate-and-run convenience for a single workload.
pub fn run(v: &ValidatedConfig, spec: &WorkloadSpec) -> Result<SimStats, SimError> {
    Simulation::new(v, spec)?.run()
}

/// One configuration variation within a sweep. Unset fields keep the base
/// configuration's value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SweepPoint {
    pub label: String,
    pub mem_ports: Option<usize>,
    pub arbitration: Option<ArbitrationPolicy>,
    pub l3_enabled: Option<bool>,
}

/// Result of one (point, workload) cell of a sweep. A failed point records
/// its error without aborting the remaining cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub label: String,
    pub workload: String,
    pub mem_ports: usize,
    pub arbitration: ArbitrationPolicy,
    pub seed: u64,
    pub result: Result<SimStats, SimError>,
}

/// Overlay a sweep point on a base configuration.
pub fn apply_point(base: &HierarchyConfig, point: &SweepPoint) -> HierarchyConfig {
    let mut cfg = base.clone();
    if let Some(channels) = point.mem_ports {
        cfg.memory.num_channels = channels;
    }
    if let Some(policy) = point.arbitration {
        cfg.arbitration = policy;
    }
    if let Some(enabled) = point.l3_enabled {
        cfg.l3.enabled = enabled;
    }
    cfg
}

/// Run every (point, workload) combination sequentially, points outermost.
pub fn sweep(
    base: &HierarchyConfig,
    points: &[SweepPoint],
    suite: &[WorkloadSpec],
) -> Vec<SweepRow> {
    let mut rows = Vec::with_capacity(points.len() * suite.len());
    for point in points {
        let cfg = apply_point(base, point);
        let validated = validate(&cfg);
        for spec in suite {
            let result = match &validated {
                Ok(v) => run(v, spec),
                Err(e) => Err(SimError::Config(e.clone())),
            };
            rows.push(SweepRow {
                label: point.label.clone(),
                workload: spec.name.clone(),
                mem_ports: cfg.memory.num_channels,
                arbitration: cfg.arbitration,
                seed: cfg.seed,
                result,
            });
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::TopologyConfig;
    use crate::workloads::find;

    fn tiny_config() -> HierarchyConfig {
        let mut cfg = HierarchyConfig::default();
        cfg.topology = TopologyConfig {
            num_clusters: 1,
            sockets_per_cluster: 1,
            cores_per_socket: 1,
            warps_per_core: 1,
            threads_per_warp: 1,
            icache_fetch_interval: 1_000_000,
        };
        cfg.l1_dcache.num_banks = 1;
        cfg.l1_icache.num_banks = 1;
        cfg
    }

    #[test]
    fn single_load_end_to_end_latency() {
        let v = validate(&tiny_config()).unwrap();
        let mut sim =
            Simulation::with_programs(&v, vec![vec![Instruction::Load(vec![0])]]).unwrap();
        let stats = sim.run().unwrap();
        assert_eq!(stats.retired, 1);
        // Hand trace with default latencies (L1 2, L2 10, HBM 100):
        // issue@0, L1 lookup ready@2, hop to L2, lookup ready@13, hop to
        // HBM@13, service starts@14, response@114, L2 fill visible@124,
        // L1 fill visible@126, warp retires@126 -> 127 simulated cycles.
        assert_eq!(stats.cycles, 127);
        // Core load + L1 refill + L2 refill.
        assert_eq!(stats.issued_requests, 3);
        assert_eq!(stats.completed_requests, 3);
        assert_eq!(stats.l1d.misses, 1);
        assert_eq!(stats.l2.misses, 1);
    }

    #[test]
    fn run_is_deterministic() {
        let mut spec = find("vecadd").unwrap();
        spec.instructions_per_warp = 48;
        let v = validate(&HierarchyConfig::default()).unwrap();
        let a = run(&v, &spec).unwrap();
        let b = run(&v, &spec).unwrap();
        assert_eq!(a, b);
        assert!(a.cycles > 0 && a.retired > 0);
    }

    #[test]
    fn conservation_every_request_completes() {
        let mut spec = find("transpose").unwrap();
        spec.instructions_per_warp = 64;
        let v = validate(&HierarchyConfig::default()).unwrap();
        let stats = run(&v, &spec).unwrap();
        assert_eq!(stats.issued_requests, stats.completed_requests);
        let warps = v.topology().total_warps() as u64;
        assert_eq!(stats.retired, warps * 64);
    }

    #[test]
    fn cache_resident_loads_approach_ideal_ipc() {
        // One core, four warps alternating compute and same-line loads.
        // After the cold miss every access hits, so warps overlap the
        // 2-cycle hit latency and dispatch stays near one per cycle.
        let mut cfg = tiny_config();
        cfg.topology.warps_per_core = 4;
        let v = validate(&cfg).unwrap();
        let program: Vec<Instruction> = (0..200)
            .map(|i| {
                if i % 2 == 0 {
                    Instruction::Compute(1)
                } else {
                    Instruction::Load(vec![0])
                }
            })
            .collect();
        let mut sim = Simulation::with_programs(&v, vec![program; 4]).unwrap();
        let stats = sim.run().unwrap();
        assert!(
            stats.ipc() > 0.8,
            "expected near-ideal IPC, got {}",
            stats.ipc()
        );
    }

    #[test]
    fn sweep_covers_points_and_workloads() {
        let mut base = HierarchyConfig::default();
        base.cycle_cap = 2_000_000;
        let mut spec = find("vecadd").unwrap();
        spec.instructions_per_warp = 32;
        let points = vec![
            SweepPoint {
                label: String::from("p8"),
                mem_ports: Some(8),
                ..SweepPoint::default()
            },
            SweepPoint {
                label: String::from("p4"),
                mem_ports: Some(4),
                ..SweepPoint::default()
            },
        ];
        let rows = sweep(&base, &points, &[spec]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].mem_ports, 8);
        assert_eq!(rows[1].mem_ports, 4);
        assert!(rows
            .iter()
            .all(|r| r.result.as_ref().unwrap().ipc() > 0.0));
    }

    #[test]
    fn cycle_cap_reported() {
        let mut cfg = tiny_config();
        cfg.cycle_cap = 10;
        let v = validate(&cfg).unwrap();
        let mut sim =
            Simulation::with_programs(&v, vec![vec![Instruction::Load(vec![0])]]).unwrap();
        assert!(matches!(
            sim.run(),
            Err(SimError::CycleCapExceeded { cap: 10, .. })
        ));
    }
}
