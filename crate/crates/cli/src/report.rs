//! Report emission: CSV data files, a key-value summary and the JSON record.
//!
//! Data files (`*.csv`, `summary.txt`, `failures.txt`) depend only on the
//! numeric content of the record. Wall-clock time is kept in `record.json`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::runner::{RunError, RunRecord};

pub const RECORD_FILE: &str = "record.json";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const FAILURES_FILE: &str = "failures.txt";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn write(dir: &Path, name: &str, body: &str, written: &mut Vec<PathBuf>) -> Result<(), RunError> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(io_err(&path))?;
    written.push(path);
    Ok(())
}

/// One row per (t, seed), `t`-major.
pub fn series_csv(series: &homlab::EstimateSeries) -> String {
    let mut out = String::from("seed,t,value,normalized\n");
    for (k, &t) in series.schedule.iter().enumerate() {
        for (i, &seed) in series.seeds.iter().enumerate() {
            let _ = writeln!(
                out,
                "{seed},{t},{},{}",
                series.values[k][i], series.normalized[k][i]
            );
        }
    }
    out
}

pub fn convergence_csv(record: &RunRecord) -> String {
    let mut out = String::from("series,t,mean,std,se,median,n\n");
    for (j, s) in record.series.iter().enumerate() {
        for st in &s.stats {
            let _ = writeln!(
                out,
                "{j},{},{},{},{},{},{}",
                st.t,
                st.mean,
                st.std,
                st.se,
                st.median,
                s.seeds.len()
            );
        }
    }
    out
}

pub fn summary_text(record: &RunRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "version = {}", record.version);
    let _ = writeln!(out, "kind = {}", record.kind);
    let _ = writeln!(out, "digest = {}", record.digest);
    let _ = writeln!(
        out,
        "status = {}",
        if record.passed() { "PASS" } else { "FAIL" }
    );
    for (j, s) in record.series.iter().enumerate() {
        let _ = writeln!(out, "series.{j}.label = {}", s.label);
        let _ = writeln!(out, "series.{j}.schedule = {:?}", s.schedule);
        let _ = writeln!(out, "series.{j}.seeds = {}", s.seeds.len());
        let _ = writeln!(out, "series.{j}.estimate = {}", s.point_estimate);
        let _ = writeln!(out, "series.{j}.error_bar = {}", s.error_bar);
        let _ = writeln!(out, "series.{j}.median = {}", s.point_median);
        if let Some(r) = s.concentration_ratio {
            let _ = writeln!(out, "series.{j}.concentration_ratio = {r}");
        }
        if !s.truncated.is_empty() {
            let _ = writeln!(out, "series.{j}.truncated = {:?}", s.truncated);
        }
    }
    for c in &record.calibrations {
        let _ = writeln!(
            out,
            "kappa.{}.{} = {} (strip {})",
            c.neighborhood, c.nu, c.kappa, c.strip_length
        );
    }
    for c in &record.checks {
        let _ = writeln!(out, "{}", c.line());
    }
    out
}

fn table_csv(table: &homlab::HomDensityTable) -> String {
    let mut out = String::from("query,estimate,error_bar,lower,upper,within\n");
    for e in &table.entries {
        let _ = writeln!(
            out,
            "\"{}\",{},{},{},{},{}",
            e.query, e.estimate, e.error_bar, e.lower, e.upper, e.within
        );
    }
    out
}

/// Write all report files into `dir`, creating it if needed. Returns the
/// paths written, in a fixed order.
pub fn emit_report(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>, RunError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for (j, s) in record.series.iter().enumerate() {
        write(
            dir,
            &format!("series_{j:02}.csv"),
            &series_csv(s),
            &mut written,
        )?;
    }
    for (j, t) in record.tables.iter().enumerate() {
        write(
            dir,
            &format!("table_{j:02}_{}.csv", t.kind),
            &table_csv(t),
            &mut written,
        )?;
    }
    if !record.calibrations.is_empty() {
        let mut out = String::from("nu,neighborhood,strip_length,kappa\n");
        for c in &record.calibrations {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                c.nu, c.neighborhood, c.strip_length, c.kappa
            );
        }
        write(dir, "calibration.csv", &out, &mut written)?;
    }
    if !record.series.is_empty() {
        write(
            dir,
            CONVERGENCE_FILE,
            &convergence_csv(record),
            &mut written,
        )?;
    }
    write(dir, SUMMARY_FILE, &summary_text(record), &mut written)?;
    let failures = record.failures();
    let stale = dir.join(FAILURES_FILE);
    if failures.is_empty() {
        if stale.exists() {
            fs::remove_file(&stale).map_err(io_err(&stale))?;
        }
    } else {
        let body: String = failures.iter().map(|c| c.line() + "\n").collect();
        write(dir, FAILURES_FILE, &body, &mut written)?;
    }
    let json = serde_json::to_string_pretty(record).map_err(|e| RunError::Record(e.to_string()))?;
    write(dir, RECORD_FILE, &json, &mut written)?;
    Ok(written)
}

pub fn load_record(dir: &Path) -> Result<RunRecord, RunError> {
    let path = dir.join(RECORD_FILE);
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    serde_json::from_str(&text).map_err(|e| RunError::Record(format!("{}: {e}", path.display())))
}
