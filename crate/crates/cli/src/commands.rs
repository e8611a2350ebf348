//! Command implementations behind the `memsim` binary.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use memsim_core::config::{validate, ConfigError, HierarchyConfig};
use memsim_core::engine::{apply_point, run, SimError, Simulation, SweepPoint, SweepRow};
use memsim_core::workloads::{builtin_suite, WorkloadSpec};
use memsim_core::SimStats;

use crate::file_config::{load_file, ConfigFileError, FileConfig};
use crate::report;

#[derive(Debug)]
pub enum CliError {
    File(ConfigFileError),
    Config(ConfigError),
    Sim(SimError),
    UnknownWorkload { name: String, valid: Vec<String> },
    BadSeed(String),
    Io { path: String, message: String },
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::File(e) => write!(f, "{e}"),
            CliError::Config(e) => write!(f, "invalid configuration: {e}"),
            CliError::Sim(e) => write!(f, "simulation failed: {e}"),
            CliError::UnknownWorkload { name, valid } => write!(
                f,
                "unknown workload `{name}`; valid workloads: {}",
                valid.join(", ")
            ),
            CliError::BadSeed(v) => write!(f, "MEMSIM_SEED must be an integer, got `{v}`"),
            CliError::Io { path, message } => write!(f, "cannot write `{path}`: {message}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<ConfigFileError> for CliError {
    fn from(e: ConfigFileError) -> Self {
        CliError::File(e)
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e)
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::Sim(e)
    }
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct CommonOpts {
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub cycle_cap: Option<u64>,
    pub out_dir: PathBuf,
    pub jobs: usize,
    pub no_svg: bool,
}

/// Load the base configuration and apply seed/cap overrides. Precedence:
/// `--seed` flag, then MEMSIM_SEED, then the config file, then the default.
pub fn load_base(opts: &CommonOpts) -> Result<(HierarchyConfig, Option<WorkloadSpec>), CliError> {
    let file = match &opts.config {
        Some(path) => load_file(path)?,
        None => FileConfig::default(),
    };
    let mut cfg = file.to_hierarchy()?;
    let custom = file.custom_workload()?;
    if let Ok(value) = std::env::var("MEMSIM_SEED") {
        cfg.seed = value.parse().map_err(|_| CliError::BadSeed(value))?;
    }
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(cap) = opts.cycle_cap {
        cfg.cycle_cap = cap;
    }
    Ok((cfg, custom))
}

fn resolve_workload(
    name: &str,
    custom: &Option<WorkloadSpec>,
) -> Result<WorkloadSpec, CliError> {
    if let Some(spec) = custom {
        if spec.name == name {
            return Ok(spec.clone());
        }
    }
    let suite = builtin_suite();
    if let Some(spec) = suite.iter().find(|w| w.name == name) {
        return Ok(spec.clone());
    }
    let mut valid: Vec<String> = suite.into_iter().map(|w| w.name).collect();
    if let Some(spec) = custom {
        valid.push(spec.name.clone());
    }
    Err(CliError::UnknownWorkload {
        name: name.to_string(),
        valid,
    })
}

fn write_out(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    Ok(path)
}

fn print_summary(workload: &str, cfg: &HierarchyConfig, stats: &SimStats) {
    println!("workload:          {workload}");
    println!("mem_ports:         {}", cfg.memory.num_channels);
    println!("arbitration:       {}", cfg.arbitration.name());
    println!("seed:              {}", cfg.seed);
    println!("cycles:            {}", stats.cycles);
    println!("retired:           {}", stats.retired);
    println!("ipc:               {}", report::fmt_f64(stats.ipc()));
    println!("l1i hit rate:      {}", report::fmt_f64(stats.l1i.hit_rate()));
    println!("l1d hit rate:      {}", report::fmt_f64(stats.l1d.hit_rate()));
    println!("l2 hit rate:       {}", report::fmt_f64(stats.l2.hit_rate()));
    if stats.l3_enabled {
        println!("l3 hit rate:       {}", report::fmt_f64(stats.l3.hit_rate()));
    }
    for (i, ch) in stats.channels.iter().enumerate() {
        let util = if stats.cycles == 0 {
            0.0
        } else {
            ch.busy_cycles as f64 / stats.cycles as f64
        };
        println!(
            "channel {i} util:    {} ({} requests)",
            report::fmt_f64(util),
            ch.serviced
        );
    }
    println!("max outstanding:   {}", stats.max_outstanding);
}

/// Run one workload on one configuration, print a summary and write one CSV
/// row (plus an optional per-request trace).
pub fn cmd_run(
    opts: &CommonOpts,
    workload: &str,
    trace: Option<&Path>,
) -> Result<(), CliError> {
    let (cfg, custom) = load_base(opts)?;
    let spec = resolve_workload(workload, &custom)?;
    let v = validate(&cfg)?;
    let mut sim = Simulation::new(&v, &spec)?;
    if trace.is_some() {
        sim.enable_trace();
    }
    let stats = sim.run()?;
    print_summary(&spec.name, &cfg, &stats);
    if let Some(path) = trace {
        let doc = report::trace_document(&stats.trace);
        std::fs::write(path, doc).map_err(|e| CliError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
    }
    let row = SweepRow {
        label: String::from("run"),
        workload: spec.name.clone(),
        mem_ports: cfg.memory.num_channels,
        arbitration: cfg.arbitration,
        seed: cfg.seed,
        result: Ok(stats),
    };
    let csv = report::csv_document("run", std::slice::from_ref(&row));
    let path = write_out(&opts.out_dir, "run.csv", &csv)?;
    println!("csv:               {}", path.display());
    Ok(())
}

/// Run every (point, workload) cell, farming cells out to up to `jobs`
/// worker threads. Row order matches the sequential sweep exactly.
pub fn parallel_sweep(
    base: &HierarchyConfig,
    points: &[SweepPoint],
    suite: &[WorkloadSpec],
    jobs: usize,
) -> Vec<SweepRow> {
    if jobs <= 1 {
        return memsim_core::engine::sweep(base, points, suite);
    }
    let cells: Vec<(usize, usize)> = (0..points.len())
        .flat_map(|p| (0..suite.len()).map(move |w| (p, w)))
        .collect();
    let results: Mutex<Vec<Option<SweepRow>>> = Mutex::new((0..cells.len()).map(|_| None).collect());
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(cells.len()) {
            scope.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::Relaxed);
                if i >= cells.len() {
                    break;
                }
                let (pi, wi) = cells[i];
                let point = &points[pi];
                let spec = &suite[wi];
                let cfg = apply_point(base, point);
                let result = match validate(&cfg) {
                    Ok(v) => run(&v, spec),
                    Err(e) => Err(SimError::Config(e)),
                };
                let row = SweepRow {
                    label: point.label.clone(),
                    workload: spec.name.clone(),
                    mem_ports: cfg.memory.num_channels,
                    arbitration: cfg.arbitration,
                    seed: cfg.seed,
                    result,
                };
                results.lock().unwrap()[i] = Some(row);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every cell computed"))
        .collect()
}

const PORT_AXIS: [usize; 4] = [1, 2, 4, 8];

fn failures_section(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    for row in rows {
        if let Err(e) = &row.result {
            out.push_str(&format!(
                "- `{} / {}` failed: {e}\n",
                row.label, row.workload
            ));
        }
    }
    if out.is_empty() {
        out
    } else {
        format!("\n## Failed cells\n\n{out}")
    }
}

/// Sweep memory ports over {1, 2, 4, 8} for the builtin suite; emit raw and
/// relative (normalized to 1 port) CSV, a markdown table and an SVG chart.
pub fn cmd_sweep_ports(opts: &CommonOpts) -> Result<(), CliError> {
    let (base, _) = load_base(opts)?;
    let points: Vec<SweepPoint> = PORT_AXIS
        .iter()
        .map(|&p| SweepPoint {
            label: format!("ports-{p}"),
            mem_ports: Some(p),
            ..SweepPoint::default()
        })
        .collect();
    let suite = builtin_suite();
    let rows = parallel_sweep(&base, &points, &suite, opts.jobs);

    let raw_csv = report::csv_document("sweep-ports", &rows);
    write_out(&opts.out_dir, "sweep_ports.csv", &raw_csv)?;

    let ipc_of = |workload: &str, ports: usize| -> Option<f64> {
        rows.iter()
            .find(|r| r.workload == workload && r.mem_ports == ports)
            .and_then(|r| r.result.as_ref().ok())
            .map(|s| s.ipc())
    };

    // Relative-IPC CSV, normalized per workload to the 1-port run.
    let mut rel_csv = String::from("experiment,workload,mem_ports,ipc,relative_ipc\n");
    for spec in &suite {
        let base_ipc = ipc_of(&spec.name, 1);
        for &p in &PORT_AXIS {
            if let (Some(ipc), Some(base_ipc)) = (ipc_of(&spec.name, p), base_ipc) {
                rel_csv.push_str(&format!(
                    "sweep-ports,{},{},{},{}\n",
                    spec.name,
                    p,
                    report::fmt_f64(ipc),
                    report::fmt_f64(ipc / base_ipc)
                ));
            }
        }
    }
    // Geometric-mean relative speedup per port count across workloads.
    for &p in &PORT_AXIS {
        let rels: Vec<f64> = suite
            .iter()
            .filter_map(|s| Some(ipc_of(&s.name, p)? / ipc_of(&s.name, 1)?))
            .collect();
        if rels.len() == suite.len() {
            rel_csv.push_str(&format!(
                "sweep-ports,geomean,{},{},{}\n",
                p,
                report::fmt_f64(report::geometric_mean(
                    &suite
                        .iter()
                        .filter_map(|s| ipc_of(&s.name, p))
                        .collect::<Vec<_>>()
                )),
                report::fmt_f64(report::geometric_mean(&rels))
            ));
        }
    }
    write_out(&opts.out_dir, "sweep_ports_relative.csv", &rel_csv)?;

    // Markdown: workloads down, port counts across, IPC (relative).
    let mut header = vec![String::from("workload")];
    header.extend(PORT_AXIS.iter().map(|p| format!("{p} port(s)")));
    let mut md_rows = Vec::new();
    for spec in &suite {
        let base_ipc = ipc_of(&spec.name, 1);
        let mut row = vec![spec.name.clone()];
        for &p in &PORT_AXIS {
            row.push(match (ipc_of(&spec.name, p), base_ipc) {
                (Some(ipc), Some(b)) => format!(
                    "{} ({}x)",
                    report::fmt_f64(ipc),
                    report::fmt_f64(ipc / b)
                ),
                _ => String::from("failed"),
            });
        }
        md_rows.push(row);
    }
    let mut gm_row = vec![String::from("geomean speedup")];
    for &p in &PORT_AXIS {
        let rels: Vec<f64> = suite
            .iter()
            .filter_map(|s| Some(ipc_of(&s.name, p)? / ipc_of(&s.name, 1)?))
            .collect();
        gm_row.push(if rels.len() == suite.len() {
            format!("{}x", report::fmt_f64(report::geometric_mean(&rels)))
        } else {
            String::from("failed")
        });
    }
    md_rows.push(gm_row);
    let mut md = String::from("# Memory port sweep\n\nIPC by HBM channel count, speedup relative to one port in parentheses.\n\n");
    md.push_str(&report::markdown_table(&header, &md_rows));
    md.push_str(&failures_section(&rows));
    write_out(&opts.out_dir, "sweep_ports.md", &md)?;

    if !opts.no_svg {
        let series: Vec<String> = PORT_AXIS.iter().map(|p| format!("{p} port(s)")).collect();
        let groups: Vec<(String, Vec<f64>)> = suite
            .iter()
            .map(|s| {
                (
                    s.name.clone(),
                    PORT_AXIS
                        .iter()
                        .map(|&p| ipc_of(&s.name, p).unwrap_or(0.0))
                        .collect(),
                )
            })
            .collect();
        let svg = report::svg_grouped_bars("IPC by memory port count", &series, &groups);
        write_out(&opts.out_dir, "sweep_ports.svg", &svg)?;
    }
    println!(
        "sweep-ports: {} cells -> {}",
        rows.len(),
        opts.out_dir.display()
    );
    Ok(())
}

/// Compare the three arbitration policies at 4 memory ports with the L3
/// enabled, mirroring the policies-by-workloads matrix shape.
pub fn cmd_sweep_arb(opts: &CommonOpts) -> Result<(), CliError> {
    use memsim_core::config::ArbitrationPolicy as P;
    let (base, _) = load_base(opts)?;
    if !base.l3.enabled {
        eprintln!("warning: enabling L3 for the arbitration experiment");
    }
    if base.memory.num_channels != 4 {
        eprintln!("warning: forcing mem_ports=4 for the arbitration experiment");
    }
    let policies = [P::Crossbar, P::SourceRoundRobin, P::DistributedRoundRobin];
    let points: Vec<SweepPoint> = policies
        .iter()
        .map(|&p| SweepPoint {
            label: p.name().to_string(),
            mem_ports: Some(4),
            arbitration: Some(p),
            l3_enabled: Some(true),
        })
        .collect();
    let suite = builtin_suite();
    let rows = parallel_sweep(&base, &points, &suite, opts.jobs);

    let csv = report::csv_document("sweep-arb", &rows);
    write_out(&opts.out_dir, "sweep_arb.csv", &csv)?;

    let ipc_of = |policy: P, workload: &str| -> Option<f64> {
        rows.iter()
            .find(|r| r.arbitration == policy && r.workload == workload)
            .and_then(|r| r.result.as_ref().ok())
            .map(|s| s.ipc())
    };

    // Matrix: policies down, workloads across; best per workload bolded.
    let mut header = vec![String::from("policy")];
    header.extend(suite.iter().map(|s| s.name.clone()));
    let best: Vec<Option<f64>> = suite
        .iter()
        .map(|s| {
            policies
                .iter()
                .filter_map(|&p| ipc_of(p, &s.name))
                .fold(None, |acc: Option<f64>, v| {
                    Some(acc.map_or(v, |a| a.max(v)))
                })
        })
        .collect();
    let mut md_rows = Vec::new();
    for &policy in &policies {
        let mut row = vec![policy.name().to_string()];
        for (wi, spec) in suite.iter().enumerate() {
            row.push(match ipc_of(policy, &spec.name) {
                Some(ipc) => {
                    let cell = report::fmt_f64(ipc);
                    if Some(ipc) == best[wi] {
                        format!("**{cell}**")
                    } else {
                        cell
                    }
                }
                None => String::from("failed"),
            });
        }
        md_rows.push(row);
    }
    let mut spread_row = vec![String::from("max/min")];
    for spec in &suite {
        let ipcs: Vec<f64> = policies
            .iter()
            .filter_map(|&p| ipc_of(p, &spec.name))
            .collect();
        spread_row.push(if ipcs.len() == policies.len() {
            let max = ipcs.iter().cloned().fold(f64::MIN, f64::max);
            let min = ipcs.iter().cloned().fold(f64::MAX, f64::min);
            report::fmt_f64(max / min)
        } else {
            String::from("failed")
        });
    }
    md_rows.push(spread_row);
    let mut md = String::from(
        "# Arbitration policy comparison\n\nIPC at 4 memory ports with the L3 enabled; best per workload in bold, max/min spread in the last row.\n\n",
    );
    md.push_str(&report::markdown_table(&header, &md_rows));
    md.push_str(&failures_section(&rows));
    write_out(&opts.out_dir, "sweep_arb.md", &md)?;

    if !opts.no_svg {
        let series: Vec<String> = policies.iter().map(|p| p.name().to_string()).collect();
        let groups: Vec<(String, Vec<f64>)> = suite
            .iter()
            .map(|s| {
                (
                    s.name.clone(),
                    policies
                        .iter()
                        .map(|&p| ipc_of(p, &s.name).unwrap_or(0.0))
                        .collect(),
                )
            })
            .collect();
        let svg = report::svg_grouped_bars("IPC by arbitration policy", &series, &groups);
        write_out(&opts.out_dir, "sweep_arb.svg", &svg)?;
    }
    println!(
        "sweep-arb: {} cells -> {}",
        rows.len(),
        opts.out_dir.display()
    );
    Ok(())
}
