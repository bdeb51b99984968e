//! Plot data: two-column CSVs and gnuplot script stubs.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::info;
use msfc_core::pipeline::ExperimentReport;

use crate::error::CliError;

/// Write `plots/<model>_<strategy>_H<h>.csv` and a matching `.gp` script for
/// each variant and horizon with a forecast. Returns the number of CSVs.
pub fn emit_plot_data(report: &ExperimentReport, out_dir: &Path) -> Result<usize, CliError> {
    let dir = out_dir.join("plots");
    let mut written = 0;
    for &h in &report.config.horizons {
        for &v in &report.variants {
            let Some(pred) = report.median_forecast(h, v) else {
                continue;
            };
            if written == 0 {
                fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
            }
            let stem = format!("{}_H{h}", v.label());
            let mut csv = String::from("actual,predicted\n");
            for (a, p) in report.holdout_actual.iter().zip(&pred) {
                let _ = writeln!(csv, "{a:.16e},{p:.16e}");
            }
            let script = format!(
                "set datafile separator ','\nset key autotitle columnhead\n\
                 set title '{} H={h}'\nset xlabel 'holdout week'\n\
                 plot '{stem}.csv' using 0:1 with lines title 'actual', \\\n     \
                 '' using 0:2 with lines title 'predicted'\n",
                v.label()
            );
            let csv_path = dir.join(format!("{stem}.csv"));
            fs::write(&csv_path, csv).map_err(|e| CliError::io(&csv_path, e))?;
            let gp_path = dir.join(format!("{stem}.gp"));
            fs::write(&gp_path, script).map_err(|e| CliError::io(&gp_path, e))?;
            written += 1;
        }
    }
    if written == 0 {
        info!("no completed forecasts; no plot data written");
    }
    Ok(written)
}
