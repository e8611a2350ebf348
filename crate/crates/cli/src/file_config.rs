//! JSON configuration file format.
//!
//! Every section and field is optional; omitted fields fall back to the
//! built-in defaults. Unknown keys are rejected with a diagnostic naming the
//! offending key. An optional `workload` section defines a custom workload
//! selectable by name alongside the builtin suite.

use std::fmt;
use std::path::Path;

use memsim_core::config::{ArbitrationPolicy, HierarchyConfig};
use memsim_core::workloads::{AccessPattern, WorkloadSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug)]
pub enum ConfigFileError {
    Io { path: String, message: String },
    Parse { path: String, message: String },
    BadValue { field: &'static str, message: String },
}

impl fmt::Display for ConfigFileError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigFileError::Io { path, message } => write!(f, "cannot read `{path}`: {message}"),
            ConfigFileError::Parse { path, message } => {
                write!(f, "cannot parse `{path}`: {message}")
            }
            ConfigFileError::BadValue { field, message } => {
                write!(f, "bad value for `{field}`: {message}")
            }
        }
    }
}

impl std::error::Error for ConfigFileError {}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_clusters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sockets_per_cluster: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cores_per_socket: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warps_per_core: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads_per_warp: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub icache_fetch_interval: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CacheSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity_bytes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ways: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line_size: Option<u64>,
    /// L1 only; L2/L3 bank counts are derived from the port plan.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_banks: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mshr_per_bank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hit_latency: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MemorySection {
    /// HBM channel count; each channel is one memory port.
    #[serde(
        default,
        alias = "num_channels",
        skip_serializing_if = "Option::is_none"
    )]
    pub mem_ports: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_latency: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub requests_per_channel_per_cycle: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_queue_depth: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArbitrationSection {
    /// `direct`, `crossbar`, `source-rr` or `distributed-rr`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_rr_strict: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadSection {
    pub name: String,
    /// `contiguous`, `strided`, `transpose` or `irregular`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rows: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cols: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern_seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compute_per_mem: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub store_fraction: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instructions_per_warp: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub footprint_bytes: Option<u64>,
}

/// Root of the config file. Sections mirror the simulator configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<TopologySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1i: Option<CacheSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l1d: Option<CacheSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l2: Option<CacheSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l3: Option<CacheSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<MemorySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arbitration: Option<ArbitrationSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cycle_cap: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workload: Option<WorkloadSection>,
}

pub fn parse_policy(name: &str) -> Result<ArbitrationPolicy, ConfigFileError> {
    match name {
        "direct" => Ok(ArbitrationPolicy::Direct),
        "crossbar" => Ok(ArbitrationPolicy::Crossbar),
        "source-rr" => Ok(ArbitrationPolicy::SourceRoundRobin),
        "distributed-rr" => Ok(ArbitrationPolicy::DistributedRoundRobin),
        other => Err(ConfigFileError::BadValue {
            field: "arbitration.policy",
            message: format!(
                "`{other}` is not one of direct, crossbar, source-rr, distributed-rr"
            ),
        }),
    }
}

impl FileConfig {
    /// Overlay this file on the built-in defaults.
    pub fn to_hierarchy(&self) -> Result<HierarchyConfig, ConfigFileError> {
        let mut cfg = HierarchyConfig::default();
        if let Some(t) = &self.topology {
            let topo = &mut cfg.topology;
            overlay(&mut topo.num_clusters, t.num_clusters);
            overlay(&mut topo.sockets_per_cluster, t.sockets_per_cluster);
            overlay(&mut topo.cores_per_socket, t.cores_per_socket);
            overlay(&mut topo.warps_per_core, t.warps_per_core);
            overlay(&mut topo.threads_per_warp, t.threads_per_warp);
            overlay(&mut topo.icache_fetch_interval, t.icache_fetch_interval);
            // L1 bank counts track the topology unless set explicitly below.
            cfg.l1_dcache.num_banks = 0;
            cfg.l1_icache.num_banks = 0;
        }
        for (section, level) in [
            (&self.l1i, &mut cfg.l1_icache),
            (&self.l1d, &mut cfg.l1_dcache),
            (&self.l2, &mut cfg.l2),
            (&self.l3, &mut cfg.l3),
        ] {
            let Some(s) = section else { continue };
            overlay(&mut level.enabled, s.enabled);
            overlay(&mut level.capacity_bytes, s.capacity_bytes);
            overlay(&mut level.ways, s.ways);
            overlay(&mut level.line_size, s.line_size);
            overlay(&mut level.num_banks, s.num_banks);
            overlay(&mut level.mshr_per_bank, s.mshr_per_bank);
            overlay(&mut level.hit_latency, s.hit_latency);
        }
        if let Some(m) = &self.memory {
            overlay(&mut cfg.memory.num_channels, m.mem_ports);
            overlay(&mut cfg.memory.channel_latency, m.channel_latency);
            overlay(
                &mut cfg.memory.requests_per_channel_per_cycle,
                m.requests_per_channel_per_cycle,
            );
            overlay(&mut cfg.memory.channel_queue_depth, m.channel_queue_depth);
        }
        if let Some(a) = &self.arbitration {
            if let Some(policy) = &a.policy {
                cfg.arbitration = parse_policy(policy)?;
            }
            overlay(&mut cfg.source_rr_strict, a.source_rr_strict);
        }
        overlay(&mut cfg.seed, self.seed);
        overlay(&mut cfg.cycle_cap, self.cycle_cap);
        Ok(cfg)
    }

    /// The custom workload defined by this file, if any.
    pub fn custom_workload(&self) -> Result<Option<WorkloadSpec>, ConfigFileError> {
        let Some(w) = &self.workload else {
            return Ok(None);
        };
        let pattern = match w.pattern.as_deref().unwrap_or("contiguous") {
            "contiguous" => AccessPattern::Contiguous,
            "strided" => AccessPattern::Strided(w.stride.unwrap_or(192)),
            "transpose" => AccessPattern::Transpose {
                rows: w.rows.unwrap_or(1024),
                cols: w.cols.unwrap_or(1024),
            },
            "irregular" => AccessPattern::Irregular {
                seed: w.pattern_seed.unwrap_or(1),
            },
            other => {
                return Err(ConfigFileError::BadValue {
                    field: "workload.pattern",
                    message: format!(
                        "`{other}` is not one of contiguous, strided, transpose, irregular"
                    ),
                })
            }
        };
        Ok(Some(WorkloadSpec {
            name: w.name.clone(),
            pattern,
            compute_per_mem: w.compute_per_mem.unwrap_or(1.0),
            store_fraction: w.store_fraction.unwrap_or(0.0),
            instructions_per_warp: w.instructions_per_warp.unwrap_or(512),
            footprint_bytes: w.footprint_bytes.unwrap_or(4 * 1024 * 1024),
        }))
    }

    /// Fully populated file mirroring `cfg`; loading it back is an identity.
    pub fn from_hierarchy(cfg: &HierarchyConfig) -> Self {
        let cache = |c: &memsim_core::config::CacheLevelConfig, with_banks: bool| CacheSection {
            enabled: Some(c.enabled),
            capacity_bytes: Some(c.capacity_bytes),
            ways: Some(c.ways),
            line_size: Some(c.line_size),
            num_banks: with_banks.then_some(c.num_banks),
            mshr_per_bank: Some(c.mshr_per_bank),
            hit_latency: Some(c.hit_latency),
        };
        FileConfig {
            topology: Some(TopologySection {
                num_clusters: Some(cfg.topology.num_clusters),
                sockets_per_cluster: Some(cfg.topology.sockets_per_cluster),
                cores_per_socket: Some(cfg.topology.cores_per_socket),
                warps_per_core: Some(cfg.topology.warps_per_core),
                threads_per_warp: Some(cfg.topology.threads_per_warp),
                icache_fetch_interval: Some(cfg.topology.icache_fetch_interval),
            }),
            l1i: Some(cache(&cfg.l1_icache, true)),
            l1d: Some(cache(&cfg.l1_dcache, true)),
            l2: Some(cache(&cfg.l2, false)),
            l3: Some(cache(&cfg.l3, false)),
            memory: Some(MemorySection {
                mem_ports: Some(cfg.memory.num_channels),
                channel_latency: Some(cfg.memory.channel_latency),
                requests_per_channel_per_cycle: Some(cfg.memory.requests_per_channel_per_cycle),
                channel_queue_depth: Some(cfg.memory.channel_queue_depth),
            }),
            arbitration: Some(ArbitrationSection {
                policy: Some(cfg.arbitration.name().to_string()),
                source_rr_strict: Some(cfg.source_rr_strict),
            }),
            seed: Some(cfg.seed),
            cycle_cap: Some(cfg.cycle_cap),
            workload: None,
        }
    }
}

fn overlay<T>(target: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *target = v;
    }
}

pub fn load_file(path: &Path) -> Result<FileConfig, ConfigFileError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigFileError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    serde_json::from_str(&text).map_err(|e| ConfigFileError::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn save_file(path: &Path, file: &FileConfig) -> Result<(), ConfigFileError> {
    let text = serde_json::to_string_pretty(file).expect("config serializes");
    std::fs::write(path, text).map_err(|e| ConfigFileError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_yields_defaults() {
        let file: FileConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(file.to_hierarchy().unwrap(), HierarchyConfig::default());
    }

    #[test]
    fn mem_ports_maps_to_channels() {
        let file: FileConfig =
            serde_json::from_str(r#"{"memory": {"mem_ports": 4}}"#).unwrap();
        assert_eq!(file.to_hierarchy().unwrap().memory.num_channels, 4);
        let alias: FileConfig =
            serde_json::from_str(r#"{"memory": {"num_channels": 2}}"#).unwrap();
        assert_eq!(alias.to_hierarchy().unwrap().memory.num_channels, 2);
    }

    #[test]
    fn unknown_key_names_offender() {
        let err = serde_json::from_str::<FileConfig>(r#"{"memroy": {}}"#).unwrap_err();
        assert!(err.to_string().contains("memroy"), "{err}");
    }

    #[test]
    fn policy_names_parse() {
        for (name, policy) in [
            ("direct", ArbitrationPolicy::Direct),
            ("crossbar", ArbitrationPolicy::Crossbar),
            ("source-rr", ArbitrationPolicy::SourceRoundRobin),
            ("distributed-rr", ArbitrationPolicy::DistributedRoundRobin),
        ] {
            assert_eq!(parse_policy(name).unwrap(), policy);
            assert_eq!(policy.name(), name);
        }
        assert!(parse_policy("fancy").is_err());
    }

    #[test]
    fn round_trip_is_identity() {
        let mut cfg = HierarchyConfig::default();
        cfg.memory.num_channels = 4;
        cfg.l3.enabled = true;
        cfg.arbitration = ArbitrationPolicy::SourceRoundRobin;
        cfg.seed = 42;
        let file = FileConfig::from_hierarchy(&cfg);
        let text = serde_json::to_string(&file).unwrap();
        let reloaded: FileConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(file, reloaded);
        assert_eq!(reloaded.to_hierarchy().unwrap(), cfg);
    }

    #[test]
    fn custom_workload_section() {
        let file: FileConfig = serde_json::from_str(
            r#"{"workload": {"name": "mine", "pattern": "strided", "stride": 256,
                 "compute_per_mem": 2.0, "instructions_per_warp": 64}}"#,
        )
        .unwrap();
        let spec = file.custom_workload().unwrap().unwrap();
        assert_eq!(spec.name, "mine");
        assert_eq!(spec.pattern, AccessPattern::Strided(256));
        assert_eq!(spec.instructions_per_warp, 64);
    }
}
