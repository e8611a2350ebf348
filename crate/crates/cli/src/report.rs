//! Report emission: CSV rows, markdown tables, per-request traces and
//! hand-emitted SVG bar charts. CSV is the stable contract; markdown and SVG
//! are derived conveniences.

use std::fmt::Write as _;

use memsim_core::engine::SweepRow;
use memsim_core::stats::TraceRecord;

/// Stable column set, one row per run.
pub const CSV_HEADER: &str = "experiment,workload,mem_ports,arbitration,seed,cycles,retired,ipc,\
l1d_hit_rate,l2_hit_rate,l3_hit_rate,channel_util_mean,max_outstanding";

/// Fixed-precision float formatting so identical runs emit identical bytes.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

/// One CSV line for a finished run; `experiment` labels the producing
/// command.
pub fn csv_line(experiment: &str, row: &SweepRow) -> Option<String> {
    let stats = row.result.as_ref().ok()?;
    Some(format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{}",
        experiment,
        row.workload,
        row.mem_ports,
        row.arbitration.name(),
        row.seed,
        stats.cycles,
        stats.retired,
        fmt_f64(stats.ipc()),
        fmt_f64(stats.l1d.hit_rate()),
        fmt_f64(stats.l2.hit_rate()),
        fmt_f64(stats.l3.hit_rate()),
        fmt_f64(stats.channel_util_mean()),
        stats.max_outstanding,
    ))
}

/// Full CSV document. Failed cells are skipped and flagged by a trailing
/// incompleteness marker so a partial file is never mistaken for a complete
/// one.
pub fn csv_document(experiment: &str, rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    let mut failed = 0;
    for row in rows {
        match csv_line(experiment, row) {
            Some(line) => {
                out.push_str(&line);
                out.push('\n');
            }
            None => failed += 1,
        }
    }
    if failed > 0 {
        let _ = writeln!(out, "# incomplete: {failed} cell(s) failed");
    }
    out
}

/// Per-request trace in the protocol CSV format.
pub fn trace_document(records: &[TraceRecord]) -> String {
    let mut out = String::from("cycle,id,address,is_write,cluster,socket,core,warp\n");
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{:#x},{},{},{},{},{}",
            r.cycle,
            r.id,
            r.address,
            u8::from(r.is_write),
            r.source.cluster,
            r.source.socket,
            r.source.core,
            r.source.warp,
        );
    }
    out
}

/// Pipe-delimited markdown table.
pub fn markdown_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(
        out,
        "|{}|",
        header.iter().map(|_| " --- ").collect::<Vec<_>>().join("|")
    );
    for row in rows {
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
    out
}

/// Grouped bar chart: one group per label, one bar per series entry.
/// Values are linear from zero; the chart is self-contained markup.
pub fn svg_grouped_bars(
    title: &str,
    series_names: &[String],
    groups: &[(String, Vec<f64>)],
) -> String {
    let width = 860.0;
    let height = 420.0;
    let margin_left = 60.0;
    let margin_bottom = 60.0;
    let margin_top = 50.0;
    let plot_w = width - margin_left - 20.0;
    let plot_h = height - margin_top - margin_bottom;
    let max_value = groups
        .iter()
        .flat_map(|(_, vs)| vs.iter().copied())
        .fold(0.0_f64, f64::max)
        .max(1e-9);
    let palette = ["#4878a8", "#e49444", "#5fa05a", "#c05b5b"];

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{width}" height="{height}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{title}</text>"#,
        width / 2.0
    );
    // Axes.
    let x0 = margin_left;
    let y0 = margin_top + plot_h;
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{y0}" x2="{}" y2="{y0}" stroke="black"/>"#,
        x0 + plot_w
    );
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{margin_top}" x2="{x0}" y2="{y0}" stroke="black"/>"#
    );
    // Y ticks at quarters.
    for k in 0..=4 {
        let v = max_value * k as f64 / 4.0;
        let y = y0 - plot_h * k as f64 / 4.0;
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{y}" x2="{x0}" y2="{y}" stroke="black"/><text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{}</text>"#,
            x0 - 4.0,
            x0 - 8.0,
            y + 4.0,
            fmt_f64(v)
        );
    }
    let group_w = plot_w / groups.len().max(1) as f64;
    let bar_w = group_w * 0.8 / series_names.len().max(1) as f64;
    for (gi, (label, values)) in groups.iter().enumerate() {
        let gx = x0 + gi as f64 * group_w + group_w * 0.1;
        for (si, v) in values.iter().enumerate() {
            let h = plot_h * v / max_value;
            let x = gx + si as f64 * bar_w;
            let y = y0 - h;
            let color = palette[si % palette.len()];
            let _ = writeln!(
                out,
                r#"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{h:.2}" fill="{color}"/>"#,
                bar_w * 0.92
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{label}</text>"#,
            x0 + gi as f64 * group_w + group_w / 2.0,
            y0 + 18.0
        );
    }
    // Legend.
    for (si, name) in series_names.iter().enumerate() {
        let lx = x0 + si as f64 * 140.0;
        let ly = height - 18.0;
        let color = palette[si % palette.len()];
        let _ = writeln!(
            out,
            r#"<rect x="{lx}" y="{}" width="12" height="12" fill="{color}"/><text x="{}" y="{}" font-family="sans-serif" font-size="12">{name}</text>"#,
            ly - 11.0,
            lx + 16.0,
            ly
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Geometric mean of strictly positive values.
pub fn geometric_mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let log_sum: f64 = values.iter().map(|v| v.ln()).sum();
    (log_sum / values.len() as f64).exp()
}
