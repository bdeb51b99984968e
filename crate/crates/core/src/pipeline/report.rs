//! CSV tables and the run manifest.
//!
//! Floats are written with 17 significant digits so that the files
//! round-trip exactly. Nothing written here depends on the wall clock
//! except `timing.csv`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::experiment::{ExperimentReport, Variant};
use super::ExperimentConfig;
use crate::series::Series;
use crate::spa::LossKind;

/// Top-level files written by [`write_report`], besides `forecasts/`.
pub const REPORT_FILES: [&str; 5] = [
    "accuracy.csv",
    "spa_pvalues.csv",
    "timing.csv",
    "lags.csv",
    "run-manifest.txt",
];

/// SHA-256 over `date,value` lines of the series.
pub fn data_checksum(series: &Series) -> String {
    let mut hasher = Sha256::new();
    for (d, v) in series.timestamps().iter().zip(series.values()) {
        hasher.update(format!("{d},{v}\n").as_bytes());
    }
    hasher
        .finalize()
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Model and strategy columns.
fn ids(v: Variant) -> String {
    format!("{},{}", v.technique().label(), v.strategy_label())
}

fn accuracy_csv(r: &ExperimentReport) -> String {
    let mut out = String::from("metric,horizon,model,strategy,run,value,status\n");
    for kind in LossKind::ALL {
        for &h in &r.config.horizons {
            for &v in &r.variants {
                for c in r.cells_for(h, v) {
                    let (value, status) = match &c.outcome {
                        Ok(s) => (num(s.metric(kind)), "ok".to_string()),
                        Err(e) => (String::new(), format!("failed: {}", e.replace([',', '\n'], ";"))),
                    };
                    let _ = writeln!(out, "{},{h},{},{},{value},{status}", kind.label(), ids(v), c.run);
                }
                let med = r.median_metric(h, v, kind);
                let status = if med.is_some() { "ok" } else { "failed" };
                let _ = writeln!(out, "{},{h},{},median,{},{status}", kind.label(), ids(v), opt(med));
            }
        }
    }
    out
}

fn spa_csv(r: &ExperimentReport) -> String {
    let mut out = String::from("loss,horizon,base_model,base_strategy,run,statistic,p_consistent,p_lower,p_upper\n");
    for kind in LossKind::ALL {
        for &h in &r.config.horizons {
            for &v in &r.variants {
                let rows: Vec<_> = r
                    .spa
                    .iter()
                    .filter(|s| s.loss == kind && s.horizon == h && s.base == v)
                    .collect();
                for s in &rows {
                    let _ = writeln!(
                        out,
                        "{},{h},{},{},{},{},{},{}",
                        kind.label(),
                        ids(v),
                        s.run,
                        num(s.statistic),
                        num(s.p_value),
                        num(s.p_lower),
                        num(s.p_upper)
                    );
                }
                if !rows.is_empty() {
                    let _ = writeln!(
                        out,
                        "{},{h},{},median,,{},,",
                        kind.label(),
                        ids(v),
                        opt(r.median_spa(h, kind, v))
                    );
                }
            }
        }
    }
    out
}

fn timing_csv(r: &ExperimentReport) -> String {
    let mut out = String::from("model,strategy,horizon,run,seconds\n");
    for &h in &r.config.horizons {
        for &v in &r.variants {
            for c in r.cells_for(h, v) {
                let _ = writeln!(out, "{},{h},{},{:.6}", ids(v), c.run, c.seconds);
            }
            if let Some(m) = r.median_seconds(h, v) {
                let _ = writeln!(out, "{},{h},median,{m:.6}", ids(v));
            }
        }
    }
    out
}

fn lags_csv(r: &ExperimentReport) -> String {
    let mut out = String::from("model,strategy,horizon,run,component,target,lags\n");
    for &h in &r.config.horizons {
        for &v in &r.variants {
            for c in r.cells_for(h, v) {
                let Ok(s) = &c.outcome else { continue };
                for rec in &s.lags {
                    let lags = rec
                        .lags
                        .as_ref()
                        .map_or_else(|| "persistence".to_string(), ToString::to_string);
                    let _ = writeln!(
                        out,
                        "{},{h},{},{},{},{lags}",
                        ids(v),
                        c.run,
                        rec.component,
                        rec.target
                    );
                }
            }
        }
    }
    out
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: &'a str,
    data_sha256: &'a str,
    n_observations: usize,
    /// `run horizon variant seed`; seeds can exceed the TOML integer range.
    cell_seeds: Vec<String>,
    config: &'a ExperimentConfig,
}

fn manifest(r: &ExperimentReport) -> io::Result<String> {
    let m = Manifest {
        version: env!("CARGO_PKG_VERSION"),
        data_sha256: &r.data_sha256,
        n_observations: r.n_observations,
        cell_seeds: r
            .cells
            .iter()
            .map(|c| format!("{} {} {} {}", c.run, c.horizon, c.variant.label(), c.seed))
            .collect(),
        config: &r.config,
    };
    let body = toml::to_string(&m).map_err(io::Error::other)?;
    Ok(format!("# msfc run manifest\n{body}"))
}

fn forecast_csv(r: &ExperimentReport, predicted: &[f64]) -> String {
    let mut out = String::from("date,actual,predicted\n");
    for ((d, a), p) in r.holdout_dates.iter().zip(&r.holdout_actual).zip(predicted) {
        let _ = writeln!(out, "{d},{},{}", num(*a), num(*p));
    }
    out
}

/// Write every report file under `dir`, creating it if needed.
pub fn write_report(report: &ExperimentReport, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir.join("forecasts"))?;
    fs::write(dir.join("accuracy.csv"), accuracy_csv(report))?;
    fs::write(dir.join("spa_pvalues.csv"), spa_csv(report))?;
    fs::write(dir.join("timing.csv"), timing_csv(report))?;
    fs::write(dir.join("lags.csv"), lags_csv(report))?;
    fs::write(dir.join("run-manifest.txt"), manifest(report)?)?;
    for &h in &report.config.horizons {
        for &v in &report.variants {
            if let Some(pred) = report.median_forecast(h, v) {
                let path = dir.join("forecasts").join(format!("{}_H{h}.csv", v.label()));
                fs::write(path, forecast_csv(report, &pred))?;
            }
        }
    }
    Ok(())
}
