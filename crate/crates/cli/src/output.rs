//! Output emission: every artifact carries the schema version, the
//! master seed and the resolved-config fingerprint, in all three
//! formats.

use std::io::Write;
use std::path::Path;

use crate::config::RunConfig;

pub struct Report {
    /// Structured result payload.
    pub result: serde_json::Value,
    /// Tabular view: header + rows (used by csv and table formats).
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn emit(cfg: &RunConfig, report: &Report, out: Option<&Path>) -> std::io::Result<()> {
    let format = cfg.get("format").unwrap_or("json");
    let text = match format {
        "csv" => render_csv(cfg, report),
        "table" => render_table(cfg, report),
        _ => render_json(cfg, report),
    };
    match out {
        Some(path) => std::fs::write(path, text),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())
        }
    }
}

fn render_json(cfg: &RunConfig, report: &Report) -> String {
    let envelope = serde_json::json!({
        "schema": 1,
        "command": cfg.get("subcommand").unwrap_or(""),
        "seed": cfg.get("seed").and_then(|s| s.parse::<u64>().ok()).unwrap_or(0),
        "fingerprint": cfg.fingerprint(),
        "config": cfg.to_json(),
        "result": report.result,
    });
    let mut text = serde_json::to_string_pretty(&envelope).expect("envelope serializes");
    text.push('\n');
    text
}

fn render_csv(cfg: &RunConfig, report: &Report) -> String {
    let mut out = String::new();
    out.push_str("# schema=1\n");
    out.push_str(&format!("# fingerprint={}\n", cfg.fingerprint()));
    for (k, v) in cfg.entries() {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out.push_str(&report.columns.join(","));
    out.push('\n');
    for row in &report.rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn render_table(cfg: &RunConfig, report: &Report) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{} (schema 1, seed {}, fingerprint {})\n",
        cfg.get("subcommand").unwrap_or(""),
        cfg.get("seed").unwrap_or("0"),
        cfg.fingerprint()
    ));
    let config_line: Vec<String> = cfg
        .entries()
        .filter(|(k, _)| !matches!(*k, "subcommand"))
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    out.push_str(&format!("config: {}\n\n", config_line.join(" ")));
    if report.rows.is_empty() {
        out.push_str(&serde_json::to_string_pretty(&report.result).unwrap());
        out.push('\n');
        return out;
    }
    let mut widths: Vec<usize> = report.columns.iter().map(|c| c.len()).collect();
    for row in &report.rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let fmt_row = |cells: &[String], widths: &[usize]| -> String {
        cells
            .iter()
            .zip(widths)
            .map(|(c, w)| format!("{c:>w$}", w = w))
            .collect::<Vec<_>>()
            .join("  ")
    };
    out.push_str(&fmt_row(&report.columns, &widths));
    out.push('\n');
    for row in &report.rows {
        out.push_str(&fmt_row(row, &widths));
        out.push('\n');
    }
    out
}
