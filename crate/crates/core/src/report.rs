//! Report files: grid CSVs, per-trial JSON, sweep tables, and a
//! human-readable summary mirroring the 9-column (3 ranges × Acc/Benign/
//! Error) layout. All writers are deterministic: identical inputs produce
//! identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::data::GlycemicRange;
use crate::error::{Error, Result};
use crate::experiment::{CrossReport, ExperimentReport, SweepRow, TrialReport};
use crate::pred_ega::PredEgaGrid;

fn fmt_pct(v: Option<f64>) -> String {
    v.map(|p| format!("{p:.2}")).unwrap_or_default()
}

/// Grid CSV: `range,accurate_pct,benign_pct,erroneous_pct,n_points,n_excluded`.
pub fn grid_csv(grid: &PredEgaGrid) -> String {
    let mut out = String::from("range,accurate_pct,benign_pct,erroneous_pct,n_points,n_excluded\n");
    for range in GlycemicRange::ALL {
        let s = grid.range(range);
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            range.label(),
            fmt_pct(s.accurate_pct),
            fmt_pct(s.benign_pct),
            fmt_pct(s.erroneous_pct),
            s.n_points,
            s.n_excluded
        );
    }
    out
}

/// Bar-chart data for external plotting: one
/// `range,method,category,percentage` row per grid cell.
pub fn bar_chart_csv(method: &str, grid: &PredEgaGrid) -> String {
    let mut out = String::from("range,method,category,percentage\n");
    for range in GlycemicRange::ALL {
        let s = grid.range(range);
        for (cat, pct) in [
            ("accurate", s.accurate_pct),
            ("benign", s.benign_pct),
            ("erroneous", s.erroneous_pct),
        ] {
            let _ = writeln!(out, "{},{},{},{}", range.label(), method, cat, fmt_pct(pct));
        }
    }
    out
}

/// Paper-style 9-column text table; one row per labeled grid.
pub fn text_table(rows: &[(String, &PredEgaGrid)]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<24} | {:^26} | {:^26} | {:^26}",
        "", "hypoglycemia (<=70)", "euglycemia (70-180)", "hyperglycemia (>180)"
    );
    let _ = writeln!(
        out,
        "{:<24} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8} | {:>8} {:>8} {:>8}",
        "method", "acc", "benign", "error", "acc", "benign", "error", "acc", "benign", "error"
    );
    let _ = writeln!(out, "{}", "-".repeat(24 + 3 * 29));
    for (label, grid) in rows {
        let mut line = format!("{label:<24}");
        for range in GlycemicRange::ALL {
            let s = grid.range(range);
            let _ = write!(
                line,
                " | {:>8} {:>8} {:>8}",
                fmt_pct(s.accurate_pct),
                fmt_pct(s.benign_pct),
                fmt_pct(s.erroneous_pct)
            );
        }
        let _ = writeln!(out, "{line}");
    }
    out
}

/// Per-trial accurate percentages, the data behind box plots:
/// `trial,hypo_accurate_pct,eu_accurate_pct,hyper_accurate_pct`.
pub fn trials_csv(trials: &[TrialReport]) -> String {
    let mut out = String::from("trial,hypo_accurate_pct,eu_accurate_pct,hyper_accurate_pct\n");
    for (i, t) in trials.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            i,
            fmt_pct(t.grid.hypo.accurate_pct),
            fmt_pct(t.grid.eu.accurate_pct),
            fmt_pct(t.grid.hyper.accurate_pct)
        );
    }
    out
}

/// Sweep table CSV, rows in ranked order.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "rank,n_hypo,n_eu,n_hyper,q,\
         hypo_accurate_pct,hypo_benign_pct,hypo_erroneous_pct,\
         eu_accurate_pct,eu_benign_pct,eu_erroneous_pct,\
         hyper_accurate_pct,hyper_benign_pct,hyper_erroneous_pct\n",
    );
    for (rank, row) in rows.iter().enumerate() {
        let mut line = format!(
            "{},{},{},{},{}",
            rank + 1,
            row.point.n_hypo,
            row.point.n_eu,
            row.point.n_hyper,
            row.point.q
        );
        for range in GlycemicRange::ALL {
            let s = row.grid.range(range);
            let _ = write!(
                line,
                ",{},{},{}",
                fmt_pct(s.accurate_pct),
                fmt_pct(s.benign_pct),
                fmt_pct(s.erroneous_pct)
            );
        }
        let _ = writeln!(out, "{line}");
    }
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Writes the full experiment report: `grid.csv`, `summary.txt`,
/// `bar_chart.csv`, `trials.csv`, and `trials/trial_NNNN.json`. Returns the
/// paths written. Re-emission produces the same bytes.
pub fn emit_experiment_report(
    out_dir: &Path,
    label: &str,
    report: &ExperimentReport,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();

    let grid_path = out_dir.join("grid.csv");
    write_file(&grid_path, &grid_csv(&report.averaged))?;
    written.push(grid_path);

    let summary_path = out_dir.join("summary.txt");
    write_file(
        &summary_path,
        &text_table(&[(label.to_string(), &report.averaged)]),
    )?;
    written.push(summary_path);

    let bars_path = out_dir.join("bar_chart.csv");
    write_file(&bars_path, &bar_chart_csv(label, &report.averaged))?;
    written.push(bars_path);

    let trials_path = out_dir.join("trials.csv");
    write_file(&trials_path, &trials_csv(&report.trials))?;
    written.push(trials_path);

    for (i, trial) in report.trials.iter().enumerate() {
        let path = out_dir.join(format!("trials/trial_{i:04}.json"));
        let json = serde_json::to_string_pretty(trial)
            .map_err(|e| Error::Data(format!("serializing trial {i}: {e}")))?;
        write_file(&path, &(json + "\n"))?;
        written.push(path);
    }
    Ok(written)
}

/// Writes a cross-dataset report: `grid.csv`, `summary.txt`, `cross.json`.
pub fn emit_cross_report(
    out_dir: &Path,
    label: &str,
    report: &CrossReport,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();

    let grid_path = out_dir.join("grid.csv");
    write_file(&grid_path, &grid_csv(&report.grid))?;
    written.push(grid_path);

    let summary_path = out_dir.join("summary.txt");
    write_file(
        &summary_path,
        &text_table(&[(label.to_string(), &report.grid)]),
    )?;
    written.push(summary_path);

    let json_path = out_dir.join("cross.json");
    let json = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Data(format!("serializing cross report: {e}")))?;
    write_file(&json_path, &(json + "\n"))?;
    written.push(json_path);
    Ok(written)
}

/// Writes the ranked sweep table plus a text summary of the best row.
pub fn emit_sweep_report(out_dir: &Path, rows: &[SweepRow]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let table_path = out_dir.join("sweep.csv");
    write_file(&table_path, &sweep_csv(rows))?;
    written.push(table_path);

    let labeled: Vec<(String, &PredEgaGrid)> = rows
        .iter()
        .map(|r| {
            (
                format!(
                    "n=({},{},{}) q={}",
                    r.point.n_hypo, r.point.n_eu, r.point.n_hyper, r.point.q
                ),
                &r.grid,
            )
        })
        .collect();
    let summary_path = out_dir.join("sweep_summary.txt");
    write_file(&summary_path, &text_table(&labeled))?;
    written.push(summary_path);
    Ok(written)
}
