//! JSON reports and CSV side tables.
//!
//! The JSON report echoes the configuration, carries every verification
//! report, and ends with a `runtime` block (wall time, workers). Everything
//! outside `runtime` depends only on the configuration and the seed, so two
//! runs can be compared once it is removed.

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ScenarioConfig, SCHEMA_VERSION};
use crate::scenarios::{verdict_rows, Outcome};

pub fn report_json(config: &ScenarioConfig, outcome: &Outcome, wall: Duration) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "scenario": config.scenario.name(),
        "seed": config.budgets.seed,
        "replicates": config.budgets.replicates,
        "passed": outcome.passed(),
        "config": config,
        "reports": outcome.reports,
        "details": outcome.details,
        "runtime": {
            "wall_seconds": wall.as_secs_f64(),
            "workers": config.budgets.workers,
        },
    })
}

/// `out.json` → `out.<suffix>.csv`
pub fn side_table_path(report: &Path, suffix: &str) -> PathBuf {
    let stem = report
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "report".into());
    report.with_file_name(format!("{stem}.{suffix}.csv"))
}

#[derive(Serialize)]
struct TermRow<'a> {
    report: usize,
    identity: &'a str,
    term: &'a str,
    k: usize,
    multiplicity: usize,
    mean: f64,
    std_error: f64,
    replicates: usize,
}

#[derive(Serialize)]
struct VerdictRow<'a> {
    report: usize,
    check: &'a str,
    lhs: f64,
    lhs_std_error: f64,
    rhs: f64,
    rhs_std_error: f64,
    z_score: f64,
    passed: bool,
}

fn write_rows<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> std::io::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for row in rows {
        w.serialize(row).map_err(std::io::Error::other)?;
    }
    w.flush()
}

/// Writes the JSON report and its CSV side tables; returns the files written.
pub fn write_all(path: &Path, report: &Value, outcome: &Outcome) -> std::io::Result<Vec<PathBuf>> {
    let mut text = serde_json::to_string_pretty(report).map_err(std::io::Error::other)?;
    text.push('\n');
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    let mut written = vec![path.to_path_buf()];

    if !outcome.reports.is_empty() {
        let verdicts = side_table_path(path, "checks");
        let mut rows = Vec::new();
        for (i, r) in outcome.reports.iter().enumerate() {
            for (name, lhs, rhs, z, passed) in verdict_rows(r) {
                rows.push((i, name, lhs, rhs, z, passed));
            }
        }
        write_rows(
            &verdicts,
            rows.iter().map(|(i, name, lhs, rhs, z, passed)| VerdictRow {
                report: *i,
                check: name,
                lhs: lhs.mean,
                lhs_std_error: lhs.std_error,
                rhs: rhs.mean,
                rhs_std_error: rhs.std_error,
                z_score: *z,
                passed: *passed,
            }),
        )?;
        written.push(verdicts);
    }

    if outcome.reports.iter().any(|r| !r.terms.is_empty()) {
        let terms = side_table_path(path, "terms");
        write_rows(
            &terms,
            outcome.reports.iter().enumerate().flat_map(|(i, r)| {
                r.terms.iter().map(move |t| TermRow {
                    report: i,
                    identity: &r.identity,
                    term: &t.label,
                    k: t.k,
                    multiplicity: t.multiplicity,
                    mean: t.estimate.mean,
                    std_error: t.estimate.std_error,
                    replicates: t.estimate.replicates,
                })
            }),
        )?;
        written.push(terms);
    }

    if !outcome.paths.is_empty() {
        let paths = side_table_path(path, "paths");
        write_rows(&paths, &outcome.paths)?;
        written.push(paths);
    }
    Ok(written)
}

/// Console summary: the listing, then one line per gated check.
pub fn summary_lines(outcome: &Outcome) -> Vec<String> {
    let mut lines = outcome.listing.clone();
    for r in &outcome.reports {
        for (name, lhs, rhs, z, passed) in verdict_rows(r) {
            lines.push(format!(
                "{} {name}: lhs {:.6} ± {:.2e}, rhs {:.6} ± {:.2e}, z = {:.2}",
                if passed { "PASS" } else { "FAIL" },
                lhs.mean,
                lhs.std_error,
                rhs.mean,
                rhs.std_error,
                z
            ));
        }
        for note in &r.notes {
            lines.push(format!("  note: {note}"));
        }
    }
    lines
}
