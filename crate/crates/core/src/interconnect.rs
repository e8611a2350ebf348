//! Port-boundary logic: direct mapping, the three arbitration strategies,
//! and the L1 ICache/DCache shared-port arbiter.
//!
//! An [`Arbiter`] resolves one boundary where `num_inputs` request lanes
//! compete for `num_outputs` ports. Inputs are banked upstream, so each
//! input demands a fixed output (`input % num_outputs`) unless the caller
//! supplies an explicit demand. Grants never exceed one per input and one
//! per output per cycle.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::config::ArbitrationPolicy;

/// Grants issued for one cycle: `(input, output)` pairs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GrantSet {
    grants: Vec<(usize, usize)>,
}

impl GrantSet {
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.grants.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.grants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grants.is_empty()
    }

    pub fn output_for(&self, input: usize) -> Option<usize> {
        self.grants.iter().find(|g| g.0 == input).map(|g| g.1)
    }

    fn push(&mut self, input: usize, output: usize) {
        debug_assert!(self.grants.iter().all(|g| g.0 != input && g.1 != output));
        self.grants.push((input, output));
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArbiterError {
    /// Direct policy used with unequal port counts.
    PolicyMisuse { inputs: usize, outputs: usize },
    /// Inputs do not split into groups of `num_outputs`, or the output slice
    /// does not divide among groups (distributed round-robin).
    GroupIndivisible {
        inputs: usize,
        outputs: usize,
        groups: usize,
    },
}

impl fmt::Display for ArbiterError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArbiterError::PolicyMisuse { inputs, outputs } => write!(
                f,
                "direct mapping needs equal port counts ({inputs} inputs, {outputs} outputs)"
            ),
            ArbiterError::GroupIndivisible {
                inputs,
                outputs,
                groups,
            } => write!(
                f,
                "{inputs} inputs / {outputs} outputs do not divide into {groups} groups"
            ),
        }
    }
}

/// Per-boundary arbitration state machine.
#[derive(Debug, Clone)]
pub struct Arbiter {
    policy: ArbitrationPolicy,
    num_inputs: usize,
    num_outputs: usize,
    num_groups: usize,
    group_size: usize,
    /// Outputs owned by each group under distributed round-robin.
    window: usize,
    /// Next group to serve (source round-robin).
    rr_group_pointer: usize,
    /// Per-output next-input pointers (crossbar).
    rr_per_output: Vec<usize>,
    /// Rotating eligible-input offset within each group (distributed).
    rr_window_offset: usize,
    /// Serve the pointed-at group even when idle instead of skipping ahead.
    strict_slicing: bool,
    pub grants_per_input: Vec<u64>,
    pub grants_per_output: Vec<u64>,
}

impl Arbiter {
    pub fn new(
        policy: ArbitrationPolicy,
        num_inputs: usize,
        num_outputs: usize,
        strict_slicing: bool,
    ) -> Result<Self, ArbiterError> {
        assert!(num_inputs >= 1 && num_outputs >= 1);
        if policy == ArbitrationPolicy::Direct && num_inputs != num_outputs {
            return Err(ArbiterError::PolicyMisuse {
                inputs: num_inputs,
                outputs: num_outputs,
            });
        }
        let grouped = matches!(
            policy,
            ArbitrationPolicy::SourceRoundRobin | ArbitrationPolicy::DistributedRoundRobin
        );
        if grouped && num_inputs % num_outputs != 0 {
            return Err(ArbiterError::GroupIndivisible {
                inputs: num_inputs,
                outputs: num_outputs,
                groups: 0,
            });
        }
        let num_groups = if num_inputs % num_outputs == 0 {
            num_inputs / num_outputs
        } else {
            1
        };
        if policy == ArbitrationPolicy::DistributedRoundRobin && num_outputs % num_groups != 0 {
            return Err(ArbiterError::GroupIndivisible {
                inputs: num_inputs,
                outputs: num_outputs,
                groups: num_groups,
            });
        }
        let group_size = num_inputs / num_groups;
        let window = if policy == ArbitrationPolicy::DistributedRoundRobin {
            num_outputs / num_groups
        } else {
            0
        };
        Ok(Self {
            policy,
            num_inputs,
            num_outputs,
            num_groups,
            group_size,
            window,
            rr_group_pointer: 0,
            rr_per_output: vec![0; num_outputs],
            rr_window_offset: 0,
            strict_slicing,
            grants_per_input: vec![0; num_inputs],
            grants_per_output: vec![0; num_outputs],
        })
    }

    pub fn policy(&self) -> ArbitrationPolicy {
        self.policy
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn num_outputs(&self) -> usize {
        self.num_outputs
    }

    pub fn num_groups(&self) -> usize {
        self.num_groups
    }

    /// Compute grants for one cycle.
    ///
    /// `pending[i]` carries the output demanded by input `i`, or `None` when
    /// the input is idle. Banked callers demand `i % num_outputs`; the
    /// round-robin policies route positionally and ignore the demand value.
    /// `allowed[o]` masks outputs withheld by a later arbitration stage;
    /// round-robin pointers advance as if the mask were absent so masking a
    /// port does not perturb the rotation.
    pub fn arbitrate(&mut self, pending: &[Option<usize>], allowed: &[bool]) -> GrantSet {
        debug_assert_eq!(pending.len(), self.num_inputs);
        debug_assert_eq!(allowed.len(), self.num_outputs);
        let grants = match self.policy {
            ArbitrationPolicy::Direct => self.arbitrate_direct(pending, allowed),
            ArbitrationPolicy::Crossbar => self.arbitrate_crossbar(pending, allowed),
            ArbitrationPolicy::SourceRoundRobin => self.arbitrate_source_rr(pending, allowed),
            ArbitrationPolicy::DistributedRoundRobin => {
                self.arbitrate_distributed_rr(pending, allowed)
            }
        };
        for &(i, o) in &grants.grants {
            self.grants_per_input[i] += 1;
            self.grants_per_output[o] += 1;
        }
        grants
    }

    /// Convenience wrapper with every output available.
    pub fn arbitrate_all(&mut self, pending: &[Option<usize>]) -> GrantSet {
        let allowed = vec![true; self.num_outputs];
        self.arbitrate(pending, &allowed)
    }

    /// Identity wiring: input `i` to output `i` whenever pending.
    fn arbitrate_direct(&self, pending: &[Option<usize>], allowed: &[bool]) -> GrantSet {
        let mut grants = GrantSet::default();
        for (i, p) in pending.iter().enumerate() {
            if p.is_some() && allowed[i] {
                grants.push(i, i);
            }
        }
        grants
    }

    /// Per-output round-robin among the inputs demanding that output.
    fn arbitrate_crossbar(&mut self, pending: &[Option<usize>], allowed: &[bool]) -> GrantSet {
        let mut grants = GrantSet::default();
        let mut taken = vec![false; self.num_inputs];
        for output in 0..self.num_outputs {
            let ptr = self.rr_per_output[output];
            let winner = (0..self.num_inputs)
                .map(|k| (ptr + k) % self.num_inputs)
                .find(|&i| !taken[i] && pending[i] == Some(output));
            if let Some(i) = winner {
                // A masked output issues no grant and leaves the pointer in
                // place, so the winner keeps its turn for the retry.
                if allowed[output] {
                    taken[i] = true;
                    grants.push(i, output);
                    self.rr_per_output[output] = (i + 1) % self.num_inputs;
                }
            }
        }
        grants
    }

    /// Serve one whole source group per cycle, rotating over groups and
    /// skipping idle ones unless strict slicing is configured.
    fn arbitrate_source_rr(&mut self, pending: &[Option<usize>], allowed: &[bool]) -> GrantSet {
        let mut grants = GrantSet::default();
        let group = if self.strict_slicing {
            let g = self.rr_group_pointer;
            self.rr_group_pointer = (g + 1) % self.num_groups;
            Some(g)
        } else {
            (0..self.num_groups)
                .map(|k| (self.rr_group_pointer + k) % self.num_groups)
                .find(|&g| {
                    (0..self.group_size).any(|j| pending[g * self.group_size + j].is_some())
                })
        };
        if let Some(g) = group {
            for j in 0..self.group_size {
                let input = g * self.group_size + j;
                if pending[input].is_some() && allowed[j] {
                    grants.push(input, j);
                }
            }
            if !self.strict_slicing && !grants.is_empty() {
                self.rr_group_pointer = (g + 1) % self.num_groups;
            }
        }
        grants
    }

    /// Each group owns a fixed output slice; a window of `window` consecutive
    /// inputs per group is eligible each cycle and the window advances
    /// unconditionally.
    fn arbitrate_distributed_rr(&mut self, pending: &[Option<usize>], allowed: &[bool]) -> GrantSet {
        let mut grants = GrantSet::default();
        for g in 0..self.num_groups {
            for k in 0..self.window {
                let local = (self.rr_window_offset + k) % self.group_size;
                let input = g * self.group_size + local;
                let output = g * self.window + k;
                if pending[input].is_some() && allowed[output] {
                    grants.push(input, output);
                }
            }
        }
        self.rr_window_offset = (self.rr_window_offset + self.window) % self.group_size;
        grants
    }
}

/// Which cache owns a combined L1 output lane this cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneOwner {
    ICache(usize),
    DCache(usize),
}

/// Round-robin sharing of the low `min(icache_ports, dcache_ports)` L1
/// output lanes between ICache and DCache; the remaining lanes belong
/// exclusively to the wider cache.
#[derive(Debug, Clone)]
pub struct SharedPortArbiter {
    icache_ports: usize,
    dcache_ports: usize,
    /// Per shared lane: true when the ICache has the next turn.
    icache_turn: Vec<bool>,
    pub icache_grants: u64,
    pub dcache_grants: u64,
}

impl SharedPortArbiter {
    pub fn new(icache_ports: usize, dcache_ports: usize) -> Self {
        let shared = icache_ports.min(dcache_ports);
        Self {
            icache_ports,
            dcache_ports,
            icache_turn: vec![true; shared],
            icache_grants: 0,
            dcache_grants: 0,
        }
    }

    pub fn combined_lanes(&self) -> usize {
        self.icache_ports.max(self.dcache_ports)
    }

    pub fn shared_lanes(&self) -> usize {
        self.icache_ports.min(self.dcache_ports)
    }

    /// Assign each combined lane for this cycle given per-lane pending flags
    /// from both caches. At most one grant per lane; the toggle flips on
    /// every contended grant.
    pub fn grant(&mut self, icache_pending: &[bool], dcache_pending: &[bool]) -> Vec<Option<LaneOwner>> {
        debug_assert_eq!(icache_pending.len(), self.icache_ports);
        debug_assert_eq!(dcache_pending.len(), self.dcache_ports);
        let shared = self.shared_lanes();
        let mut lanes = Vec::with_capacity(self.combined_lanes());
        for lane in 0..self.combined_lanes() {
            let owner = if lane < shared {
                let i = icache_pending[lane];
                let d = dcache_pending[lane];
                match (i, d) {
                    (true, true) => {
                        let turn = self.icache_turn[lane];
                        self.icache_turn[lane] = !turn;
                        if turn {
                            Some(LaneOwner::ICache(lane))
                        } else {
                            Some(LaneOwner::DCache(lane))
                        }
                    }
                    (true, false) => Some(LaneOwner::ICache(lane)),
                    (false, true) => Some(LaneOwner::DCache(lane)),
                    (false, false) => None,
                }
            } else if self.dcache_ports >= self.icache_ports {
                dcache_pending[lane].then_some(LaneOwner::DCache(lane))
            } else {
                icache_pending[lane].then_some(LaneOwner::ICache(lane))
            };
            match owner {
                Some(LaneOwner::ICache(_)) => self.icache_grants += 1,
                Some(LaneOwner::DCache(_)) => self.dcache_grants += 1,
                None => {}
            }
            lanes.push(owner);
        }
        lanes
    }
}
