//! Simulation configuration: topology, cache geometry, memory channels and
//! the port-derivation rules.
//!
//! Port counts flow from the memory upward: every cache level exposes as many
//! input ports (and banks) as it has incoming request lanes, and its output
//! port count is clamped to the HBM channel count. Boundaries where the input
//! count exceeds the output count need arbitration; boundaries with equal
//! counts are direct-mapped.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Core grouping: clusters of sockets of cores, each core running warps of
/// threads. Cores in a socket share the L1; sockets in a cluster share the L2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TopologyConfig {
    pub num_clusters: usize,
    pub sockets_per_cluster: usize,
    pub cores_per_socket: usize,
    pub warps_per_core: usize,
    pub threads_per_warp: usize,
    /// One ICache line fetch is issued per this many retired instructions
    /// per core.
    pub icache_fetch_interval: u64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            num_clusters: 2,
            sockets_per_cluster: 1,
            cores_per_socket: 4,
            warps_per_core: 4,
            threads_per_warp: 4,
            icache_fetch_interval: 16,
        }
    }
}

impl TopologyConfig {
    pub fn total_cores(&self) -> usize {
        self.num_clusters * self.sockets_per_cluster * self.cores_per_socket
    }

    pub fn total_warps(&self) -> usize {
        self.total_cores() * self.warps_per_core
    }
}

/// Geometry of one cache level. `num_banks`, `input_ports` and `output_ports`
/// for L2/L3 are derived during validation; for L1 the bank count is the
/// input port count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheLevelConfig {
    pub enabled: bool,
    pub capacity_bytes: u64,
    pub ways: usize,
    pub line_size: u64,
    pub num_banks: usize,
    pub mshr_per_bank: usize,
    pub hit_latency: u64,
    pub input_ports: usize,
    pub output_ports: usize,
}

impl CacheLevelConfig {
    pub fn sets_per_bank(&self) -> usize {
        (self.capacity_bytes / (self.ways as u64 * self.line_size * self.num_banks as u64))
            as usize
    }
}

/// HBM device: independent fixed-latency channels with bounded queues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MemoryConfig {
    pub num_channels: usize,
    pub channel_latency: u64,
    pub requests_per_channel_per_cycle: usize,
    pub channel_queue_depth: usize,
}

impl Default for MemoryConfig {
    fn default() -> Self {
        Self {
            num_channels: 8,
            channel_latency: 100,
            requests_per_channel_per_cycle: 1,
            channel_queue_depth: 16,
        }
    }
}

/// Policy applied at every reduced port boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ArbitrationPolicy {
    /// One-to-one wiring; legal only when input and output counts match.
    Direct,
    /// Any input can reach any output; conflicts resolved per-output
    /// round-robin (Arb-A).
    Crossbar,
    /// One source group is served per cycle, rotating over groups (Arb-B).
    SourceRoundRobin,
    /// Each group owns a fixed output slice; a rotating window selects which
    /// of its inputs are eligible each cycle (Arb-C).
    DistributedRoundRobin,
}

impl ArbitrationPolicy {
    pub fn name(self) -> &'static str {
        match self {
            ArbitrationPolicy::Direct => "direct",
            ArbitrationPolicy::Crossbar => "crossbar",
            ArbitrationPolicy::SourceRoundRobin => "source-rr",
            ArbitrationPolicy::DistributedRoundRobin => "distributed-rr",
        }
    }
}

/// Full raw configuration prior to validation.
#[derive(Debug, Clone, PartialEq)]
pub struct HierarchyConfig {
    pub topology: TopologyConfig,
    pub l1_icache: CacheLevelConfig,
    pub l1_dcache: CacheLevelConfig,
    pub l2: CacheLevelConfig,
    pub l3: CacheLevelConfig,
    pub memory: MemoryConfig,
    pub arbitration: ArbitrationPolicy,
    /// When set, SourceRoundRobin serves the group at the pointer even if it
    /// is idle (strict time slicing) instead of skipping to a busy group.
    pub source_rr_strict: bool,
    pub seed: u64,
    pub cycle_cap: u64,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        let topo = TopologyConfig::default();
        Self {
            topology: topo,
            l1_icache: CacheLevelConfig {
                enabled: true,
                capacity_bytes: 16 * 1024,
                ways: 2,
                line_size: 64,
                num_banks: 1,
                mshr_per_bank: 4,
                hit_latency: 2,
                input_ports: 1,
                output_ports: 0,
            },
            l1_dcache: CacheLevelConfig {
                enabled: true,
                capacity_bytes: 16 * 1024,
                ways: 4,
                line_size: 64,
                num_banks: topo.cores_per_socket,
                mshr_per_bank: 4,
                hit_latency: 2,
                input_ports: topo.cores_per_socket,
                output_ports: 0,
            },
            l2: CacheLevelConfig {
                enabled: true,
                capacity_bytes: 128 * 1024,
                ways: 8,
                line_size: 64,
                num_banks: 0,
                mshr_per_bank: 4,
                hit_latency: 10,
                input_ports: 0,
                output_ports: 0,
            },
            l3: CacheLevelConfig {
                enabled: false,
                capacity_bytes: 512 * 1024,
                ways: 16,
                line_size: 64,
                num_banks: 0,
                mshr_per_bank: 4,
                hit_latency: 20,
                input_ports: 0,
                output_ports: 0,
            },
            memory: MemoryConfig::default(),
            arbitration: ArbitrationPolicy::Crossbar,
            source_rr_strict: false,
            seed: 1,
            cycle_cap: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConfigError {
    ZeroField(&'static str),
    NonPowerOfTwo(&'static str),
    /// Direct policy at a boundary with unequal port counts.
    PortMismatch {
        boundary: String,
        inputs: usize,
        outputs: usize,
    },
    /// Group math does not divide for the selected round-robin policy.
    GroupIndivisible {
        boundary: String,
        inputs: usize,
        outputs: usize,
        groups: usize,
    },
    /// Capacity not divisible by ways * line_size * num_banks.
    GeometryIndivisible(&'static str),
    InvalidChannelCount(usize),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::ZeroField(name) => write!(f, "field `{name}` must be at least 1"),
            ConfigError::NonPowerOfTwo(name) => {
                write!(f, "field `{name}` must be a power of two")
            }
            ConfigError::PortMismatch {
                boundary,
                inputs,
                outputs,
            } => write!(
                f,
                "direct policy requires equal port counts at `{boundary}` ({inputs} inputs, {outputs} outputs)"
            ),
            ConfigError::GroupIndivisible {
                boundary,
                inputs,
                outputs,
                groups,
            } => write!(
                f,
                "boundary `{boundary}` ({inputs} inputs, {outputs} outputs) does not divide into {groups} groups for the selected policy"
            ),
            ConfigError::GeometryIndivisible(level) => write!(
                f,
                "cache `{level}`: capacity must be divisible by ways * line_size * num_banks"
            ),
            ConfigError::InvalidChannelCount(n) => {
                write!(f, "num_channels must be one of 1, 2, 4, 8, 16 (got {n})")
            }
        }
    }
}

/// Derived output-port count for one boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DerivedPorts {
    pub count: usize,
    pub direct_mapped: bool,
}

/// Clamp a level's output ports to what the downstream side can accept.
/// Equal counts are flagged direct-mapped.
pub fn derive_output_ports(input_ports: usize, downstream_ports: usize) -> DerivedPorts {
    debug_assert!(input_ports >= 1 && downstream_ports >= 1);
    let count = input_ports.min(downstream_ports);
    DerivedPorts {
        count,
        direct_mapped: count == input_ports && count == downstream_ports,
    }
}

/// One port boundary in the hierarchy where an arbiter may be needed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundarySpec {
    pub name: String,
    pub inputs: usize,
    pub outputs: usize,
    /// Contiguous source groups of size `inputs / groups`.
    pub groups: usize,
    pub direct_mapped: bool,
}

/// Fully derived port counts for every level and boundary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PortPlan {
    /// L1 DCache banks (= input ports) and output lanes, per socket.
    pub l1d_banks: usize,
    pub l1d_out: usize,
    /// L1 ICache banks and output lanes, per socket.
    pub l1i_banks: usize,
    pub l1i_out: usize,
    /// Combined per-socket L1 output lanes toward L2 (= max of I/D lanes).
    pub socket_lanes: usize,
    /// Lanes shared between ICache and DCache (= min of I/D lanes).
    pub shared_lanes: usize,
    pub l2_banks: usize,
    pub l2_out: usize,
    pub l3_banks: usize,
    pub l3_out: usize,
    /// Request lanes arriving at the memory boundary.
    pub mem_inputs: usize,
    pub channels: usize,
    pub boundaries: Vec<BoundarySpec>,
}

/// An immutable, validated configuration with all derived ports filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedConfig {
    config: HierarchyConfig,
    plan: PortPlan,
}

impl ValidatedConfig {
    pub fn config(&self) -> &HierarchyConfig {
        &self.config
    }

    pub fn plan(&self) -> &PortPlan {
        &self.plan
    }

    pub fn topology(&self) -> &TopologyConfig {
        &self.config.topology
    }
}

fn check_nonzero(value: usize, name: &'static str) -> Result<(), ConfigError> {
    if value == 0 {
        Err(ConfigError::ZeroField(name))
    } else {
        Ok(())
    }
}

fn check_level(
    cfg: &CacheLevelConfig,
    name: &'static str,
    line_name: &'static str,
) -> Result<(), ConfigError> {
    if !cfg.enabled {
        return Ok(());
    }
    check_nonzero(cfg.capacity_bytes as usize, name)?;
    check_nonzero(cfg.ways, name)?;
    check_nonzero(cfg.num_banks, name)?;
    check_nonzero(cfg.mshr_per_bank, name)?;
    if !cfg.line_size.is_power_of_two() {
        return Err(ConfigError::NonPowerOfTwo(line_name));
    }
    if cfg.capacity_bytes % (cfg.ways as u64 * cfg.line_size * cfg.num_banks as u64) != 0
        || cfg.sets_per_bank() == 0
    {
        return Err(ConfigError::GeometryIndivisible(name));
    }
    Ok(())
}

/// Check that a boundary is legal under `policy` and describe it.
fn boundary(
    name: String,
    inputs: usize,
    outputs: usize,
    policy: ArbitrationPolicy,
) -> Result<BoundarySpec, ConfigError> {
    debug_assert!(inputs >= outputs);
    let direct_mapped = inputs == outputs;
    if policy == ArbitrationPolicy::Direct && !direct_mapped {
        return Err(ConfigError::PortMismatch {
            boundary: name,
            inputs,
            outputs,
        });
    }
    let needs_groups = matches!(
        policy,
        ArbitrationPolicy::SourceRoundRobin | ArbitrationPolicy::DistributedRoundRobin
    );
    if needs_groups && inputs % outputs != 0 {
        return Err(ConfigError::GroupIndivisible {
            boundary: name,
            inputs,
            outputs,
            groups: 0,
        });
    }
    let groups = if inputs % outputs == 0 {
        inputs / outputs
    } else {
        1
    };
    if policy == ArbitrationPolicy::DistributedRoundRobin && outputs % groups != 0 {
        return Err(ConfigError::GroupIndivisible {
            boundary: name,
            inputs,
            outputs,
            groups,
        });
    }
    Ok(BoundarySpec {
        name,
        inputs,
        outputs,
        groups,
        direct_mapped,
    })
}

/// Validate a raw configuration, deriving every bank and port count from the
/// memory upward. Validation is idempotent: re-validating the embedded config
/// of a [`ValidatedConfig`] yields the same result.
pub fn validate(raw: &HierarchyConfig) -> Result<ValidatedConfig, ConfigError> {
    let mut cfg = raw.clone();
    let topo = &cfg.topology;
    check_nonzero(topo.num_clusters, "topology.num_clusters")?;
    check_nonzero(topo.sockets_per_cluster, "topology.sockets_per_cluster")?;
    check_nonzero(topo.cores_per_socket, "topology.cores_per_socket")?;
    check_nonzero(topo.warps_per_core, "topology.warps_per_core")?;
    check_nonzero(topo.threads_per_warp, "topology.threads_per_warp")?;
    check_nonzero(topo.icache_fetch_interval as usize, "topology.icache_fetch_interval")?;

    let mem = &cfg.memory;
    if !matches!(mem.num_channels, 1 | 2 | 4 | 8 | 16) {
        return Err(ConfigError::InvalidChannelCount(mem.num_channels));
    }
    check_nonzero(mem.channel_latency as usize, "memory.channel_latency")?;
    check_nonzero(
        mem.requests_per_channel_per_cycle,
        "memory.requests_per_channel_per_cycle",
    )?;
    check_nonzero(mem.channel_queue_depth, "memory.channel_queue_depth")?;
    let channels = mem.num_channels;

    if !cfg.l1_icache.enabled || !cfg.l1_dcache.enabled || !cfg.l2.enabled {
        return Err(ConfigError::ZeroField("l1/l2 levels cannot be disabled"));
    }

    // L1 bank counts are the configured input port counts and must be powers
    // of two; the shared-port arbiter handles odd combined totals.
    for (level, name) in [(&mut cfg.l1_dcache, "l1d"), (&mut cfg.l1_icache, "l1i")] {
        if level.num_banks == 0 {
            level.num_banks = if name == "l1d" { topo.cores_per_socket } else { 1 };
        }
        if !level.num_banks.is_power_of_two() {
            return Err(ConfigError::NonPowerOfTwo("l1 port count"));
        }
        level.input_ports = level.num_banks;
    }

    let l1d_ports = derive_output_ports(cfg.l1_dcache.input_ports, channels);
    cfg.l1_dcache.output_ports = l1d_ports.count;
    let l1i_ports = derive_output_ports(cfg.l1_icache.input_ports, channels);
    cfg.l1_icache.output_ports = l1i_ports.count;

    let socket_lanes = cfg.l1_dcache.output_ports.max(cfg.l1_icache.output_ports);
    let shared_lanes = cfg.l1_dcache.output_ports.min(cfg.l1_icache.output_ports);

    // L2 input ports and banks expand to match the incoming request lanes.
    cfg.l2.num_banks = socket_lanes * topo.sockets_per_cluster;
    cfg.l2.input_ports = cfg.l2.num_banks;
    let l2_ports = derive_output_ports(cfg.l2.input_ports, channels);
    cfg.l2.output_ports = l2_ports.count;

    let mem_inputs;
    if cfg.l3.enabled {
        cfg.l3.num_banks = cfg.l2.output_ports * topo.num_clusters;
        cfg.l3.input_ports = cfg.l3.num_banks;
        let l3_ports = derive_output_ports(cfg.l3.input_ports, channels);
        cfg.l3.output_ports = l3_ports.count;
        mem_inputs = cfg.l3.output_ports;
    } else {
        cfg.l3.num_banks = 0;
        cfg.l3.input_ports = 0;
        cfg.l3.output_ports = 0;
        mem_inputs = cfg.l2.output_ports * topo.num_clusters;
    }

    check_level(&cfg.l1_dcache, "l1d", "l1d.line_size")?;
    check_level(&cfg.l1_icache, "l1i", "l1i.line_size")?;
    check_level(&cfg.l2, "l2", "l2.line_size")?;
    check_level(&cfg.l3, "l3", "l3.line_size")?;

    let policy = cfg.arbitration;
    let mut boundaries = Vec::new();
    boundaries.push(boundary(
        String::from("l1d"),
        cfg.l1_dcache.input_ports,
        cfg.l1_dcache.output_ports,
        policy,
    )?);
    boundaries.push(boundary(
        String::from("l1i"),
        cfg.l1_icache.input_ports,
        cfg.l1_icache.output_ports,
        policy,
    )?);
    boundaries.push(boundary(
        String::from("l2"),
        cfg.l2.input_ports,
        cfg.l2.output_ports,
        policy,
    )?);
    if cfg.l3.enabled {
        boundaries.push(boundary(
            String::from("l3"),
            cfg.l3.input_ports,
            cfg.l3.output_ports,
            policy,
        )?);
    }
    if mem_inputs > channels {
        boundaries.push(boundary(String::from("mem"), mem_inputs, channels, policy)?);
    }

    let plan = PortPlan {
        l1d_banks: cfg.l1_dcache.num_banks,
        l1d_out: cfg.l1_dcache.output_ports,
        l1i_banks: cfg.l1_icache.num_banks,
        l1i_out: cfg.l1_icache.output_ports,
        socket_lanes,
        shared_lanes,
        l2_banks: cfg.l2.num_banks,
        l2_out: cfg.l2.output_ports,
        l3_banks: cfg.l3.num_banks,
        l3_out: cfg.l3.output_ports,
        mem_inputs,
        channels,
        boundaries,
    };

    Ok(ValidatedConfig { config: cfg, plan })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_output_ports_examples() {
        assert_eq!(
            derive_output_ports(32, 8),
            DerivedPorts {
                count: 8,
                direct_mapped: false
            }
        );
        assert_eq!(
            derive_output_ports(4, 8),
            DerivedPorts {
                count: 4,
                direct_mapped: false
            }
        );
        assert_eq!(
            derive_output_ports(8, 8),
            DerivedPorts {
                count: 8,
                direct_mapped: true
            }
        );
    }

    #[test]
    fn default_config_validates() {
        let v = validate(&HierarchyConfig::default()).unwrap();
        // Hand-applied derivation chain: 4 dcache banks, 8 channels.
        assert_eq!(v.config().l1_dcache.output_ports, 4);
        assert_eq!(v.config().l1_icache.output_ports, 1);
        assert_eq!(v.plan().socket_lanes, 4);
        assert_eq!(v.plan().shared_lanes, 1);
        assert_eq!(v.plan().l2_banks, 4);
        assert_eq!(v.plan().l2_out, 4);
        // L3 disabled by default: 2 clusters * 4 lanes feed 8 channels.
        assert_eq!(v.plan().mem_inputs, 8);
        assert_eq!(v.plan().channels, 8);
    }

    #[test]
    fn four_channel_config_reduces_at_memory() {
        let mut cfg = HierarchyConfig::default();
        cfg.memory.num_channels = 4;
        let v = validate(&cfg).unwrap();
        assert_eq!(v.plan().l2_out, 4);
        assert_eq!(v.plan().mem_inputs, 8);
        assert_eq!(v.plan().channels, 4);
        let mem = v.plan().boundaries.iter().find(|b| b.name == "mem").unwrap();
        assert_eq!((mem.inputs, mem.outputs, mem.groups), (8, 4, 2));
    }

    #[test]
    fn l3_enabled_reduces_at_l3() {
        let mut cfg = HierarchyConfig::default();
        cfg.memory.num_channels = 4;
        cfg.l3.enabled = true;
        let v = validate(&cfg).unwrap();
        assert_eq!(v.plan().l3_banks, 8);
        assert_eq!(v.plan().l3_out, 4);
        assert_eq!(v.plan().mem_inputs, 4);
        assert!(v.plan().boundaries.iter().all(|b| b.name != "mem"));
    }

    #[test]
    fn direct_policy_with_unequal_ports_rejected() {
        let mut cfg = HierarchyConfig::default();
        cfg.memory.num_channels = 4;
        cfg.arbitration = ArbitrationPolicy::Direct;
        match validate(&cfg) {
            Err(ConfigError::PortMismatch { inputs, outputs, .. }) => {
                assert_eq!((inputs, outputs), (8, 4));
            }
            other => panic!("expected PortMismatch, got {other:?}"),
        }
    }

    #[test]
    fn direct_policy_with_equal_ports_accepted() {
        let mut cfg = HierarchyConfig::default();
        cfg.arbitration = ArbitrationPolicy::Direct;
        validate(&cfg).unwrap();
    }

    #[test]
    fn distributed_rr_group_indivisible() {
        // 1 channel, 2 clusters: the memory boundary is 2 inputs, 1 output,
        // 2 groups; 1 output does not divide into 2 group slices.
        let mut cfg = HierarchyConfig::default();
        cfg.memory.num_channels = 1;
        cfg.arbitration = ArbitrationPolicy::DistributedRoundRobin;
        match validate(&cfg) {
            Err(ConfigError::GroupIndivisible { .. }) => {}
            other => panic!("expected GroupIndivisible, got {other:?}"),
        }
    }

    #[test]
    fn zero_field_rejected() {
        let mut cfg = HierarchyConfig::default();
        cfg.topology.warps_per_core = 0;
        assert_eq!(
            validate(&cfg),
            Err(ConfigError::ZeroField("topology.warps_per_core"))
        );
    }

    #[test]
    fn bad_channel_count_rejected() {
        let mut cfg = HierarchyConfig::default();
        cfg.memory.num_channels = 3;
        assert_eq!(validate(&cfg), Err(ConfigError::InvalidChannelCount(3)));
    }

    #[test]
    fn validation_is_idempotent() {
        let v1 = validate(&HierarchyConfig::default()).unwrap();
        let v2 = validate(v1.config()).unwrap();
        assert_eq!(v1, v2);
    }

    #[test]
    fn output_ports_are_min_of_input_and_downstream() {
        for ch in [1usize, 2, 4, 8, 16] {
            let mut cfg = HierarchyConfig::default();
            cfg.memory.num_channels = ch;
            cfg.l3.enabled = true;
            let v = validate(&cfg).unwrap();
            let c = v.config();
            assert_eq!(c.l1_dcache.output_ports, c.l1_dcache.input_ports.min(ch));
            assert_eq!(c.l2.output_ports, c.l2.input_ports.min(ch));
            assert_eq!(c.l3.output_ports, c.l3.input_ports.min(ch));
        }
    }
}
