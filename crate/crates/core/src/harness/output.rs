use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::laws::{fit_exponent, ExponentFit, ScalingSeries};
use crate::mobility::write_summary_csv;
use crate::{Error, Result};

use super::scenarios::{median, CodedRow};
use super::{Check, Row, SweepResult};

pub const RESULTS_HEADER: &str = "scenario,n,repeat,seed,metric,value";
pub const SUMMARY_HEADER: &str = "scenario,check,relation,observed,expected,tolerance,stderr,r_squared,pass";

pub fn write_rows_csv<W: Write>(rows: &[Row], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{RESULTS_HEADER}")?;
    for r in rows {
        writeln!(w, "{},{},{},{},{},{}", r.scenario, r.n, r.repeat, r.seed, r.metric, r.value)?;
    }
    Ok(())
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_checks_csv<W: Write>(scenario: &str, checks: &[Check], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for c in checks {
        writeln!(
            w,
            "{scenario},{},{},{},{},{},{},{},{}",
            c.name,
            c.relation,
            c.observed,
            c.expected,
            c.tolerance,
            opt(c.stderr),
            opt(c.r_squared),
            if c.pass { "pass" } else { "fail" }
        )?;
    }
    Ok(())
}

fn create(path: PathBuf) -> Result<(BufWriter<File>, PathBuf)> {
    let f = File::create(&path).map_err(|source| Error::Io {
        path: path.clone(),
        source,
    })?;
    Ok((BufWriter::new(f), path))
}

fn write_file(dir: &Path, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let (mut w, path) = create(dir.join(name))?;
    body(&mut w)
        .and_then(|()| w.flush())
        .map_err(|source| Error::Io { path, source })
}

/// Write `results.csv`, `summary.csv`, `fits.csv` and `failures.csv` into
/// `dir`, plus `coded_multicast.csv` or `mobility.csv` when the scenario
/// produces them. Output is a pure function of the result.
pub fn write_results(result: &SweepResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let scenario = result.config.scenario.name();
    write_file(dir, "results.csv", |w| write_rows_csv(&result.rows, w))?;
    write_file(dir, "summary.csv", |w| write_checks_csv(scenario, &result.checks, w))?;
    write_file(dir, "fits.csv", |w| {
        writeln!(w, "scenario,metric,points,exponent,intercept,stderr,r_squared,mean_exponent")?;
        for f in &result.fits {
            writeln!(
                w,
                "{scenario},{},{},{},{},{},{},{}",
                f.metric, f.points, f.median.exponent, f.median.intercept, f.median.stderr, f.median.r_squared, f.mean_exponent
            )?;
        }
        Ok(())
    })?;
    write_file(dir, "failures.csv", |w| {
        writeln!(w, "scenario,n,repeat,seed,error")?;
        for f in &result.failures {
            let msg = f.error.replace(['"', '\n'], " ");
            writeln!(w, "{scenario},{},{},{},\"{msg}\"", f.n, f.repeat, f.seed)?;
        }
        Ok(())
    })?;
    if !result.coded.is_empty() {
        write_file(dir, "coded_multicast.csv", |w| {
            writeln!(w, "{}", CodedRow::CSV_HEADER)?;
            for row in &result.coded {
                writeln!(w, "{}", row.csv_row())?;
            }
            Ok(())
        })?;
    }
    if !result.mobility.is_empty() {
        write_file(dir, "mobility.csv", |w| write_summary_csv(&result.mobility, w))?;
    }
    Ok(())
}

#[derive(Deserialize)]
struct CsvRow {
    scenario: String,
    n: u64,
    repeat: u32,
    seed: u64,
    metric: String,
    value: f64,
}

/// Read a `results.csv`.
pub fn read_results_csv(path: &Path) -> Result<Vec<Row>> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?
        .iter()
        .collect::<Vec<_>>()
        .join(",");
    if headers != RESULTS_HEADER {
        return Err(Error::Csv(format!(
            "{}: expected header '{RESULTS_HEADER}', found '{headers}'",
            path.display()
        )));
    }
    rdr.deserialize::<CsvRow>()
        .map(|rec| {
            let r = rec.map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
            Ok(Row {
                scenario: r.scenario.parse()?,
                n: r.n,
                repeat: r.repeat,
                seed: r.seed,
                metric: r.metric,
                value: r.value,
            })
        })
        .collect()
}

/// Fit the per-n medians of `metric` on a log-log scale.
pub fn fit_metric(rows: &[Row], metric: &str) -> Result<ExponentFit> {
    let mut available: Vec<&str> = rows.iter().map(|r| r.metric.as_str()).collect();
    available.sort_unstable();
    available.dedup();
    if !available.contains(&metric) {
        return Err(Error::InvalidParameter(format!(
            "metric '{metric}' not found; available: {}",
            available.join(", ")
        )));
    }
    let mut series = ScalingSeries::new(metric);
    for (n, mut v) in super::values_by_n(rows, metric) {
        series.push(n as f64, median(&mut v));
    }
    fit_exponent(&series)
}
