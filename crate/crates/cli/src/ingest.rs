//! Price file ingestion.
//!
//! Accepts a CSV whose first column is a date and second a price. Lines
//! whose first field is not a date (titles, source notes, headers) are
//! skipped. Rows with a date but no usable price are dropped and reported
//! by line number.

use std::fs;
use std::path::Path;

use chrono::NaiveDate;
use log::warn;
use msfc_core::series::Series;

use crate::error::CliError;

const DATE_FORMATS: [&str; 3] = ["%Y-%m-%d", "%b %d, %Y", "%m/%d/%Y"];

pub fn parse_date(s: &str) -> Option<NaiveDate> {
    let s = s.trim();
    DATE_FORMATS
        .iter()
        .find_map(|f| NaiveDate::parse_from_str(s, f).ok())
}

#[derive(Debug, Clone, PartialEq)]
pub struct DroppedRow {
    /// 1-based line number in the file.
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub series: Series,
    pub dropped: Vec<DroppedRow>,
    /// Non-data lines skipped.
    pub skipped: usize,
    pub resorted: bool,
}

impl Ingested {
    pub fn summary(&self) -> String {
        let ts = self.series.timestamps();
        let vals = self.series.values();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        format!(
            "{} observations, {} to {}, prices {lo:.2} to {hi:.2}, {} dropped rows",
            self.series.len(),
            ts[0],
            ts[ts.len() - 1],
            self.dropped.len()
        )
    }
}

pub fn ingest(path: &Path) -> Result<Ingested, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Data(format!("{}: {e} (check the --data path)", path.display())))?;
    let mut rows: Vec<(NaiveDate, f64, u64)> = Vec::new();
    let mut dropped = Vec::new();
    let mut skipped = 0;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let line = record.position().map_or(0, |p| p.line());
        let Some(date) = record.get(0).and_then(parse_date) else {
            skipped += 1;
            continue;
        };
        match record.get(1).map(str::parse::<f64>) {
            Some(Ok(v)) if v.is_finite() => rows.push((date, v, line)),
            _ => {
                let raw = record.get(1).unwrap_or("");
                warn!("line {line}: dropping {date} with unusable price {raw:?}");
                dropped.push(DroppedRow {
                    line,
                    reason: format!("unusable price {raw:?}"),
                });
            }
        }
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no dated price rows found (expected a date column followed by a price column)",
            path.display()
        )));
    }
    let resorted = rows.windows(2).any(|w| w[1].0 < w[0].0);
    if resorted {
        warn!("{}: dates are out of order; sorting by date", path.display());
        rows.sort_by_key(|r| r.0);
    }
    let dups: Vec<String> = rows
        .windows(2)
        .filter(|w| w[0].0 == w[1].0)
        .map(|w| format!("{} (lines {} and {})", w[0].0, w[0].2, w[1].2))
        .collect();
    if !dups.is_empty() {
        return Err(CliError::Data(format!(
            "{}: duplicate dates {}; remove the repeated rows",
            path.display(),
            dups.join(", ")
        )));
    }
    let (dates, values) = rows.into_iter().map(|(d, v, _)| (d, v)).unzip();
    let series = Series::new(dates, values)?;
    Ok(Ingested {
        series,
        dropped,
        skipped,
        resorted,
    })
}

/// Write `date,price` rows that [`ingest`] reads back unchanged.
pub fn write_series(series: &Series, path: &Path) -> Result<(), CliError> {
    let mut out = String::from("date,price\n");
    for (d, v) in series.timestamps().iter().zip(series.values()) {
        out.push_str(&format!("{d},{v}\n"));
    }
    fs::write(path, out).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, body: &str) -> std::path::PathBuf {
        let p = dir.path().join("prices.csv");
        fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn parses_all_date_formats() {
        let want = NaiveDate::from_ymd_opt(2000, 1, 7).unwrap();
        for s in ["2000-01-07", "Jan 07, 2000", "Jan 7, 2000", "01/07/2000"] {
            assert_eq!(parse_date(s), Some(want), "{s}");
        }
        assert_eq!(parse_date("Date"), None);
    }

    #[test]
    fn skips_metadata_and_drops_blank_prices() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "Back to Contents,Data 1: Weekly\nSourcekey,RWTC\nDate,Price\n\
             \"Jan 07, 2000\",25.5\n\"Jan 14, 2000\",\n\"Jan 21, 2000\",27.1\n",
        );
        let got = ingest(&p).unwrap();
        assert_eq!(got.series.values(), &[25.5, 27.1]);
        assert_eq!(got.skipped, 3);
        assert_eq!(got.dropped.len(), 1);
        assert_eq!(got.dropped[0].line, 5);
    }

    #[test]
    fn resorts_and_rejects_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "date,price\n2000-01-14,2\n2000-01-07,1\n");
        let got = ingest(&p).unwrap();
        assert!(got.resorted);
        assert_eq!(got.series.values(), &[1.0, 2.0]);
        let p = write(&dir, "date,price\n2000-01-07,1\n2000-01-07,2\n");
        let err = ingest(&p).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("lines 2 and 3"), "{err}");
    }

    #[test]
    fn empty_and_missing_files_are_data_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "");
        assert_eq!(ingest(&p).unwrap_err().exit_code(), 2);
        assert_eq!(ingest(&dir.path().join("nope.csv")).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn round_trip_is_idempotent() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "x\n01/14/2000,0.1\n01/07/2000,26.123456789012345\n");
        let first = ingest(&p).unwrap();
        let q = dir.path().join("again.csv");
        write_series(&first.series, &q).unwrap();
        assert_eq!(ingest(&q).unwrap().series, first.series);
    }
}
