//! Deterministic workload generators.
//!
//! Each workload is a characterization, not a kernel: a memory access
//! pattern plus a compute-to-memory instruction ratio. The five builtin
//! specs mirror a small GPU benchmark suite split into compute-bound
//! (conv3, sgemm) and memory-bound (bfs, transpose, vecadd) entries.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::config::TopologyConfig;
use crate::cores::Instruction;
use crate::rng::hash_words;
use crate::Addr;

/// Bytes accessed per thread per memory instruction.
pub const ELEMENT_BYTES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AccessPattern {
    /// Consecutive per-thread addresses; consecutive instructions walk
    /// consecutive lines (vecadd/sgemm-like).
    Contiguous,
    /// Per-warp base addresses spaced by `stride` bytes (conv3-like).
    Strided(u64),
    /// Column-major reads over a row-major `rows x cols` element matrix.
    Transpose { rows: u64, cols: u64 },
    /// Uniform draws over the footprint from a seeded generator (BFS-like).
    Irregular { seed: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSpec {
    pub name: String,
    pub pattern: AccessPattern,
    /// Compute instructions per memory instruction.
    pub compute_per_mem: f64,
    /// Fraction of memory instructions that are stores.
    pub store_fraction: f64,
    pub instructions_per_warp: usize,
    pub footprint_bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WorkloadError {
    InvalidSpec(&'static str),
    UnknownWorkload(String),
}

impl fmt::Display for WorkloadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WorkloadError::InvalidSpec(why) => write!(f, "invalid workload spec: {why}"),
            WorkloadError::UnknownWorkload(name) => write!(f, "unknown workload `{name}`"),
        }
    }
}

impl WorkloadSpec {
    fn check(&self, line_size: u64) -> Result<(), WorkloadError> {
        if self.footprint_bytes < line_size {
            return Err(WorkloadError::InvalidSpec("footprint smaller than a line"));
        }
        if self.instructions_per_warp == 0 {
            return Err(WorkloadError::InvalidSpec("zero instructions per warp"));
        }
        if self.compute_per_mem < 0.0 {
            return Err(WorkloadError::InvalidSpec("negative compute_per_mem"));
        }
        if !(0.0..=1.0).contains(&self.store_fraction) {
            return Err(WorkloadError::InvalidSpec("store_fraction outside [0,1]"));
        }
        if let AccessPattern::Strided(stride) = self.pattern {
            if stride < ELEMENT_BYTES {
                return Err(WorkloadError::InvalidSpec("stride smaller than element"));
            }
        }
        if let AccessPattern::Transpose { rows, cols } = self.pattern {
            if rows == 0 || cols == 0 {
                return Err(WorkloadError::InvalidSpec("empty transpose matrix"));
            }
        }
        Ok(())
    }
}

/// Per-thread addresses of memory instruction `mem_idx` of `warp`.
fn addresses(
    spec: &WorkloadSpec,
    warp: u64,
    total_warps: u64,
    mem_idx: u64,
    threads: u64,
    seed: u64,
) -> Vec<Addr> {
    let footprint = spec.footprint_bytes;
    match spec.pattern {
        AccessPattern::Contiguous => {
            // Global-thread-index interleave: at each step the whole machine
            // covers one dense chunk, so adjacent warps touch adjacent lines.
            let base =
                (mem_idx * total_warps + warp) * threads * ELEMENT_BYTES % footprint;
            (0..threads)
                .map(|t| (base + t * ELEMENT_BYTES) % footprint)
                .collect()
        }
        AccessPattern::Strided(stride) => {
            let base = (warp * stride + mem_idx * total_warps * stride) % footprint;
            (0..threads)
                .map(|t| (base + t * ELEMENT_BYTES) % footprint)
                .collect()
        }
        AccessPattern::Transpose { rows, cols } => (0..threads)
            .map(|t| {
                let k = (mem_idx * total_warps + warp) * threads + t;
                let col = (k / rows) % cols;
                let row = k % rows;
                (row * cols + col) * ELEMENT_BYTES % footprint
            })
            .collect(),
        AccessPattern::Irregular { seed: pattern_seed } => {
            let elements = footprint / ELEMENT_BYTES;
            (0..threads)
                .map(|t| {
                    hash_words(&[seed, pattern_seed, warp, mem_idx, t]) % elements * ELEMENT_BYTES
                })
                .collect()
        }
    }
}

/// Generate per-warp instruction streams. A pure function of
/// `(spec, topology, seed)`; identical inputs yield bit-identical streams.
pub fn generate(
    spec: &WorkloadSpec,
    topology: &TopologyConfig,
    line_size: u64,
    seed: u64,
) -> Result<Vec<Vec<Instruction>>, WorkloadError> {
    spec.check(line_size)?;
    let total_warps = topology.total_warps() as u64;
    let threads = topology.threads_per_warp as u64;
    let mem_fraction = 1.0 / (1.0 + spec.compute_per_mem);
    let mut programs = Vec::with_capacity(total_warps as usize);
    for warp in 0..total_warps {
        let mut program = Vec::with_capacity(spec.instructions_per_warp);
        let mut mem_carry = 0.0f64;
        let mut store_carry = 0.0f64;
        let mut mem_idx = 0u64;
        for _ in 0..spec.instructions_per_warp {
            mem_carry += mem_fraction;
            if mem_carry >= 1.0 - 1e-12 {
                mem_carry -= 1.0;
                let addrs = addresses(spec, warp, total_warps, mem_idx, threads, seed);
                mem_idx += 1;
                store_carry += spec.store_fraction;
                if store_carry >= 1.0 - 1e-12 {
                    store_carry -= 1.0;
                    program.push(Instruction::Store(addrs));
                } else {
                    program.push(Instruction::Load(addrs));
                }
            } else {
                program.push(Instruction::Compute(1));
            }
        }
        programs.push(program);
    }
    Ok(programs)
}

/// The five builtin workload characterizations.
pub fn builtin_suite() -> Vec<WorkloadSpec> {
    let base = |name: &str, pattern, compute_per_mem, store_fraction| WorkloadSpec {
        name: String::from(name),
        pattern,
        compute_per_mem,
        store_fraction,
        instructions_per_warp: 512,
        footprint_bytes: 4 * 1024 * 1024,
    };
    let suite = [
        base("conv3", AccessPattern::Strided(192), 8.0, 0.0),
        base("sgemm", AccessPattern::Contiguous, 8.0, 0.0),
        base(
            "bfs",
            AccessPattern::Irregular {
                seed: 0xbf5_bf5_bf5,
            },
            0.5,
            0.0,
        ),
        base(
            "transpose",
            AccessPattern::Transpose {
                rows: 1024,
                cols: 1024,
            },
            1.0,
            0.5,
        ),
        base("vecadd", AccessPattern::Contiguous, 1.0, 1.0 / 3.0),
    ];
    suite.into_iter().collect()
}

/// Look up a builtin workload by name.
pub fn find(name: &str) -> Result<WorkloadSpec, WorkloadError> {
    builtin_suite()
        .into_iter()
        .find(|w| w.name == name)
        .ok_or_else(|| WorkloadError::UnknownWorkload(String::from(name)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo() -> TopologyConfig {
        TopologyConfig::default()
    }

    #[test]
    fn suite_has_five_entries() {
        let suite = builtin_suite();
        assert_eq!(suite.len(), 5);
        let names: Vec<&str> = suite.iter().map(|w| w.name.as_str()).collect();
        assert_eq!(names, vec!["conv3", "sgemm", "bfs", "transpose", "vecadd"]);
    }

    #[test]
    fn compute_bound_have_higher_ratio() {
        let conv3 = find("conv3").unwrap();
        let vecadd = find("vecadd").unwrap();
        assert!(vecadd.compute_per_mem < conv3.compute_per_mem);
        assert!(matches!(
            find("bfs").unwrap().pattern,
            AccessPattern::Irregular { .. }
        ));
    }

    #[test]
    fn contiguous_first_load_is_consecutive() {
        let spec = find("sgemm").unwrap();
        let progs = generate(&spec, &topo(), 64, 1).unwrap();
        let first_mem = progs[0]
            .iter()
            .find_map(|i| match i {
                Instruction::Load(a) | Instruction::Store(a) => Some(a.clone()),
                _ => None,
            })
            .unwrap();
        assert_eq!(first_mem, vec![0, 4, 8, 12]);
    }

    #[test]
    fn strided_warp_bases_are_spaced() {
        let mut spec = find("conv3").unwrap();
        spec.pattern = AccessPattern::Strided(192);
        let progs = generate(&spec, &topo(), 64, 1).unwrap();
        for (w, expect) in [(0usize, 0u64), (1, 192)] {
            let first = progs[w]
                .iter()
                .find_map(|i| match i {
                    Instruction::Load(a) | Instruction::Store(a) => Some(a[0]),
                    _ => None,
                })
                .unwrap();
            assert_eq!(first, expect);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = find("bfs").unwrap();
        let a = generate(&spec, &topo(), 64, 7).unwrap();
        let b = generate(&spec, &topo(), 64, 7).unwrap();
        assert_eq!(a, b);
        let c = generate(&spec, &topo(), 64, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn memory_fraction_matches_ratio() {
        for name in ["conv3", "sgemm", "bfs", "transpose", "vecadd"] {
            let spec = find(name).unwrap();
            let progs = generate(&spec, &topo(), 64, 1).unwrap();
            let total = progs[0].len() as f64;
            let mem = progs[0]
                .iter()
                .filter(|i| !matches!(i, Instruction::Compute(_)))
                .count() as f64;
            let expect = 1.0 / (1.0 + spec.compute_per_mem);
            assert!(
                (mem / total - expect).abs() <= 1.5 / total,
                "{name}: mem fraction {} vs expected {expect}",
                mem / total
            );
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        let mut spec = find("vecadd").unwrap();
        spec.footprint_bytes = 16;
        assert!(matches!(
            generate(&spec, &topo(), 64, 1),
            Err(WorkloadError::InvalidSpec(_))
        ));
        let mut spec = find("conv3").unwrap();
        spec.pattern = AccessPattern::Strided(2);
        assert!(matches!(
            generate(&spec, &topo(), 64, 1),
            Err(WorkloadError::InvalidSpec(_))
        ));
    }

    #[test]
    fn unknown_workload_error_lists_name() {
        match find("nope") {
            Err(WorkloadError::UnknownWorkload(n)) => assert_eq!(n, "nope"),
            other => panic!("unexpected: {other:?}"),
        }
    }
}
