use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use super::{BenchError, Report, Row};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Markdown,
    Json,
}

impl FromStr for Format {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Format::Csv),
            "md" | "markdown" => Ok(Format::Markdown),
            "json" => Ok(Format::Json),
            _ => Err(BenchError::InvalidSpec(format!("unknown format {s:?}"))),
        }
    }
}

pub const CSV_HEADER: [&str; 11] = [
    "config",
    "version",
    "mtu",
    "tls_bytes",
    "transport_bytes",
    "network_bytes",
    "link_bytes",
    "frames",
    "savings_tls_pct",
    "savings_total_pct",
    "savings_vs_rfc7924_total_pct",
];

#[derive(Serialize)]
struct CsvRow<'a> {
    config: String,
    version: &'a str,
    mtu: usize,
    tls_bytes: f64,
    transport_bytes: f64,
    network_bytes: f64,
    link_bytes: f64,
    frames: f64,
    savings_tls_pct: Option<f64>,
    savings_total_pct: Option<f64>,
    savings_vs_rfc7924_total_pct: Option<f64>,
}

fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

fn csv_row(r: &Row) -> CsvRow<'static> {
    CsvRow {
        config: format!("{}:{}", r.cell.mode.label(), r.cell.chain.label()),
        version: r.cell.version.label(),
        mtu: r.cell.mtu,
        tls_bytes: round2(r.mean.tls),
        transport_bytes: round2(r.mean.transport),
        network_bytes: round2(r.mean.network),
        link_bytes: round2(r.mean.link),
        frames: round2(r.mean.frames),
        savings_tls_pct: r.savings_vs_vanilla.map(|s| round2(s.tls)),
        savings_total_pct: r.savings_vs_vanilla.map(|s| round2(s.total)),
        savings_vs_rfc7924_total_pct: r.savings_vs_rfc7924.map(|s| round2(s.total)),
    }
}

fn render_csv(report: &Report) -> Result<String, BenchError> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(CSV_HEADER)?;
    for r in &report.rows {
        w.serialize(csv_row(r))?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn pct(s: Option<f64>) -> String {
    s.map_or_else(|| "-".into(), |v| format!("{v:.2}%"))
}

/// One table per (version, chain), rows grouped by configuration.
fn render_markdown(report: &Report) -> String {
    let mut groups: Vec<(&str, &str)> = Vec::new();
    for r in &report.rows {
        let g = (r.cell.version.label(), r.cell.chain.label());
        if !groups.contains(&g) {
            groups.push(g);
        }
    }
    let mut out = String::from("# Handshake bytes per configuration\n");
    for (version, chain) in groups {
        let _ = write!(
            out,
            "\n## TLS {version}, {chain}\n\n| config | MTU | TLS B | transport B | network B | link B | frames | saved vs vanilla (TLS) | saved vs vanilla (total) | saved vs rfc7924 (total) |\n|---|---:|---:|---:|---:|---:|---:|---:|---:|---:|\n"
        );
        for r in report
            .rows
            .iter()
            .filter(|r| r.cell.version.label() == version && r.cell.chain.label() == chain)
        {
            let _ = writeln!(
                out,
                "| {} | {} | {:.0} | {:.0} | {:.0} | {:.0} | {:.0} | {} | {} | {} |",
                r.cell.mode.label(),
                r.cell.mtu,
                r.mean.tls,
                r.mean.transport,
                r.mean.network,
                r.mean.link,
                r.mean.frames,
                pct(r.savings_vs_vanilla.map(|s| s.tls)),
                pct(r.savings_vs_vanilla.map(|s| s.total)),
                pct(r.savings_vs_rfc7924.map(|s| s.total)),
            );
        }
    }
    out
}

pub fn render(report: &Report, format: Format) -> Result<String, BenchError> {
    match format {
        Format::Csv => render_csv(report),
        Format::Markdown => Ok(render_markdown(report)),
        Format::Json => Ok(serde_json::to_string_pretty(report)?),
    }
}

pub fn emit(report: &Report, format: Format, path: &Path) -> Result<(), BenchError> {
    std::fs::write(path, render(report, format)?)?;
    Ok(())
}
