//! CSV writers for result tables and per-test-point figure data.

use std::path::Path;

use crate::error::{Error, Result};
use crate::simulation::{PointRecord, ResultRow};

pub const RESULTS_HEADER: &str =
    "n,sigma,localizer_bw,ensemble_len,best_single,coverage,best_single_index,n_reps";
pub const FIGURE_HEADER: &str = "x,true_mean,union_parts,selected_model,gamma_lo,gamma_hi";
pub const TRACE_HEADER: &str = "x,gamma,selected_model,lo,hi";

/// Rounds to 4 decimals and drops trailing zeros (`0.1000` -> `0.1`, `2.0000` -> `2`).
pub fn fmt4(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".to_string()
    } else {
        s
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn format_results(rows: &[ResultRow]) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Empty("result rows"));
    }
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.n,
            fmt4(r.sigma),
            fmt4(r.localizer_bw),
            fmt4(r.ensemble_len),
            fmt4(r.best_single_len),
            fmt4(r.ensemble_coverage),
            r.best_single_index,
            r.n_reps
        ));
    }
    Ok(out)
}

/// Writes the results table. Rows are assumed sorted by `(n, sigma, localizer_bw)`.
pub fn emit_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_file(path, &format_results(rows)?)
}

/// Reads a results table written by [`emit_results`].
pub fn parse_results(text: &str) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != RESULTS_HEADER {
        return Err(Error::InvalidDataset(format!(
            "unexpected header {header:?}"
        )));
    }
    let num = |s: &str| -> Result<f64> {
        s.parse()
            .map_err(|_| Error::InvalidDataset(format!("bad number `{s}`")))
    };
    let int = |s: &str| -> Result<usize> {
        s.parse()
            .map_err(|_| Error::InvalidDataset(format!("bad integer `{s}`")))
    };
    reader
        .records()
        .map(|rec| {
            let rec = rec?;
            Ok(ResultRow {
                n: int(&rec[0])?,
                sigma: num(&rec[1])?,
                localizer_bw: num(&rec[2])?,
                ensemble_len: num(&rec[3])?,
                best_single_len: num(&rec[4])?,
                ensemble_coverage: num(&rec[5])?,
                best_single_index: int(&rec[6])?,
                n_reps: int(&rec[7])?,
            })
        })
        .collect()
}

/// `lo:hi` tokens joined by `|`.
pub fn format_union_parts(parts: &[(f64, f64)]) -> String {
    parts
        .iter()
        .map(|&(lo, hi)| format!("{}:{}", fmt4(lo), fmt4(hi)))
        .collect::<Vec<_>>()
        .join("|")
}

/// Figure data; model indices are 1-based.
pub fn format_figure(records: &[PointRecord]) -> Result<String> {
    if records.is_empty() {
        return Err(Error::Empty("figure records"));
    }
    let mut out = String::from(FIGURE_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            fmt4(r.x),
            fmt4(r.true_mean),
            format_union_parts(r.union.parts()),
            r.selected_model + 1,
            fmt4(r.gamma_lo),
            fmt4(r.gamma_hi)
        ));
    }
    Ok(out)
}

pub fn emit_figure_data(records: &[PointRecord], path: &Path) -> Result<()> {
    write_file(path, &format_figure(records)?)
}

/// Full per-level selection trace of every record.
pub fn format_trace(records: &[PointRecord]) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in records {
        for s in &r.trace.steps {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                fmt4(r.x),
                fmt4(s.gamma),
                s.model + 1,
                fmt4(s.interval.lower()),
                fmt4(s.interval.upper())
            ));
        }
    }
    out
}

pub fn emit_trace(records: &[PointRecord], path: &Path) -> Result<()> {
    write_file(path, &format_trace(records))
}
