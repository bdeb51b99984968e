//! Batch front end: ingest a weekly price file, decompose it, forecast with
//! one model or run the full comparison, and write report files.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 data or file
//! error, 3 numerical failure.

pub mod config;
pub mod error;
pub mod ingest;
pub mod plot;

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{info, warn};
use msfc_core::emd::{decompose, BoundaryMode};
use msfc_core::metrics::{ds_hits, mase_terms, smape_terms, EvaluationFrame};
use msfc_core::pipeline::{
    forecast_holdout, run_experiment, write_report, DecompositionScope, ExperimentConfig, ExperimentReport,
    Technique, Variant,
};
use msfc_core::seed::derive_seed;
use msfc_core::series::Series;
use msfc_core::spa::{spa_matrix, LossKind, LossSeries, SpaConfig};
use msfc_core::strategies::StrategyKind;

use crate::config::{env_seed, ConfigFile};
use crate::error::CliError;
use crate::ingest::{ingest, Ingested};

pub use crate::plot::emit_plot_data;

#[derive(Debug, Parser)]
#[command(name = "msfc", version, about = "Multi-step-ahead forecasting with EMD ensembles")]
pub struct Cli {
    /// Worker threads for experiment cells.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Log progress (-v) or details (-vv) to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the IMFs and residue of a series to imfs.csv.
    Decompose(DecomposeArgs),
    /// Holdout forecasts of one model, strategy and horizon.
    Forecast(ForecastArgs),
    /// Every model, strategy and horizon over seeded runs, with SPA tests.
    Experiment(ExperimentArgs),
    /// SPA p-values from forecast files written by `experiment` or `forecast`.
    Spa(SpaArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// Price CSV: a date column then a price column.
    #[arg(long)]
    pub data: PathBuf,
    /// TOML configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    pub out_dir: PathBuf,
    /// Base seed; overrides MSFC_SEED and the config file.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_boundary(s: &str) -> Result<BoundaryMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "sbm" => Ok(BoundaryMode::Sbm),
        "truncate" => Ok(BoundaryMode::Truncate),
        "mirror" => Ok(BoundaryMode::Mirror),
        _ => Err(format!("unknown boundary {s:?} (expected sbm, truncate or mirror)")),
    }
}

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    #[command(flatten)]
    pub common: Common,
    /// Envelope extension past the series ends.
    #[arg(long, value_parser = parse_boundary)]
    pub boundary: Option<BoundaryMode>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub common: Common,
    /// random_walk, fnn, emd_fnn or emd_sbm_fnn.
    #[arg(long)]
    pub model: Technique,
    /// iterated, direct or mimo; ignored by the random walk.
    #[arg(long, default_value = "mimo")]
    pub strategy: StrategyKind,
    /// Steps ahead, 1 to 52 weeks.
    #[arg(long)]
    pub horizon: usize,
    /// rolling, estimation or full.
    #[arg(long)]
    pub decomposition_scope: Option<DecompositionScope>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(flatten)]
    pub common: Common,
    /// Run a single horizon instead of the configured set.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Bootstrap replicates for the SPA tests.
    #[arg(long)]
    pub bootstrap_b: Option<usize>,
    /// rolling, estimation or full.
    #[arg(long)]
    pub decomposition_scope: Option<DecompositionScope>,
}

#[derive(Debug, Args)]
pub struct SpaArgs {
    #[command(flatten)]
    pub common: Common,
    /// Directory of `<model>_<strategy>_H<h>.csv` forecast files.
    #[arg(long)]
    pub forecasts: PathBuf,
    /// Bootstrap replicates.
    #[arg(long)]
    pub bootstrap_b: Option<usize>,
}

/// Parse `argv` and run. Returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Decompose(a) => cmd_decompose(a),
        Command::Forecast(a) => cmd_forecast(a),
        Command::Experiment(a) => cmd_experiment(a, cli.jobs),
        Command::Spa(a) => cmd_spa(a),
    }
}

fn load_data(path: &Path) -> Result<Ingested, CliError> {
    let data = ingest(path)?;
    if data.resorted {
        println!("note: {} was not in date order and has been sorted", path.display());
    }
    for d in &data.dropped {
        println!("warning: line {}: {}; row dropped", d.line, d.reason);
    }
    println!("{}: {}", path.display(), data.summary());
    Ok(data)
}

/// Configuration for `series` with seed overrides applied. Precedence:
/// `--seed`, then `MSFC_SEED`, then the file.
fn experiment_config(common: &Common, file: &ConfigFile, series: &Series) -> Result<ExperimentConfig, CliError> {
    let mut cfg = file.resolve(series.len());
    if let Some(seed) = common.seed.or(env_seed()?) {
        cfg.base_seed = seed;
        cfg.spa.seed = seed;
    }
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

fn write_file(path: &Path, body: String) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| CliError::io(path, e))
}

fn cmd_decompose(a: &DecomposeArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(a.common.config.as_deref())?;
    let data = load_data(&a.common.data)?;
    let mut sift = file.sift;
    if let Some(b) = a.boundary {
        sift.boundary_mode = b;
    }
    sift.validate().map_err(CliError::Usage)?;
    let dec = decompose(data.series.values(), &sift)?;
    let mut out = String::from("date,value");
    for k in 1..=dec.imfs.len() {
        let _ = write!(out, ",imf{k}");
    }
    out.push_str(",residue\n");
    for (t, (d, v)) in data.series.timestamps().iter().zip(data.series.values()).enumerate() {
        let _ = write!(out, "{d},{v:.16e}");
        for imf in &dec.imfs {
            let _ = write!(out, ",{:.16e}", imf.samples[t]);
        }
        let _ = writeln!(out, ",{:.16e}", dec.residue[t]);
    }
    create_dir(&a.common.out_dir)?;
    let path = a.common.out_dir.join("imfs.csv");
    write_file(&path, out)?;
    let iters: Vec<String> = dec.imfs.iter().map(|i| i.iterations.to_string()).collect();
    println!(
        "{} IMFs plus residue (sifting iterations: {}) written to {}",
        dec.imfs.len(),
        iters.join(" "),
        path.display()
    );
    Ok(())
}

fn frame_for(series: &Series, n_est: usize, predicted: &[f64]) -> Result<EvaluationFrame, String> {
    let v = series.values();
    EvaluationFrame::new(
        v[n_est..].to_vec(),
        predicted.to_vec(),
        v[n_est - 1..v.len() - 1].to_vec(),
        v[..n_est].to_vec(),
    )
    .map_err(|e| e.to_string())
}

fn cmd_forecast(a: &ForecastArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(a.common.config.as_deref())?;
    let data = load_data(&a.common.data)?;
    let mut cfg = experiment_config(&a.common, &file, &data.series)?;
    if let Some(scope) = a.decomposition_scope {
        cfg.decomposition_scope = scope;
    }
    cfg.horizons = vec![a.horizon];
    cfg.validate()?;
    let variant = match a.model {
        Technique::RandomWalk => Variant::RandomWalk,
        t => Variant::Model(t, a.strategy),
    };
    let f = forecast_holdout(&data.series, &cfg, variant, a.horizon, cfg.base_seed)?;
    let dir = a.common.out_dir.join("forecasts");
    create_dir(&dir)?;
    let path = dir.join(format!("{}_H{}.csv", variant.label(), a.horizon));
    let mut out = String::from("date,actual,predicted\n");
    for ((d, x), p) in f.dates.iter().zip(&f.actual).zip(&f.predicted) {
        let _ = writeln!(out, "{d},{x:.16e},{p:.16e}");
    }
    write_file(&path, out)?;
    println!("{} lead-{} forecasts written to {}", f.predicted.len(), a.horizon, path.display());
    match frame_for(&data.series, cfg.split.n_estimation, &f.predicted) {
        Ok(frame) => {
            let mean = |x: Vec<f64>| x.iter().sum::<f64>() / x.len() as f64;
            let smape = smape_terms(&frame, cfg.smape_form).map(mean);
            let mase = mase_terms(&frame).map(mean);
            let show = |r: Result<f64, _>| r.map_or_else(|e: msfc_core::metrics::MetricError| format!("n/a ({e})"), |x| format!("{x:.3}"));
            println!(
                "SMAPE {}  MASE {}  DS {:.3}",
                show(smape),
                show(mase),
                mean(ds_hits(&frame))
            );
        }
        Err(e) => println!("metrics unavailable: {e}"),
    }
    Ok(())
}

fn summary_table(report: &ExperimentReport) -> String {
    let mut out = String::new();
    for kind in LossKind::ALL {
        let _ = write!(out, "\nmedian {} by horizon\n{:<28}", kind.label(), "model");
        for h in &report.config.horizons {
            let _ = write!(out, "{:>9}", format!("H={h}"));
        }
        out.push('\n');
        for &v in &report.variants {
            let _ = write!(out, "{:<28}", v.label());
            for &h in &report.config.horizons {
                let cell = report
                    .median_metric(h, v, kind)
                    .map_or_else(|| "failed".to_string(), |x| format!("{x:.3}"));
                let _ = write!(out, "{cell:>9}");
            }
            out.push('\n');
        }
    }
    out
}

fn cmd_experiment(a: &ExperimentArgs, jobs: Option<usize>) -> Result<(), CliError> {
    let file = ConfigFile::load(a.common.config.as_deref())?;
    let data = load_data(&a.common.data)?;
    let mut cfg = experiment_config(&a.common, &file, &data.series)?;
    if let Some(h) = a.horizon {
        cfg.horizons = vec![h];
    }
    if let Some(b) = a.bootstrap_b {
        cfg.spa.n_bootstrap = b;
    }
    if let Some(scope) = a.decomposition_scope {
        cfg.decomposition_scope = scope;
    }
    let jobs = jobs.or(file.experiment.jobs).unwrap_or(1);
    info!("running {} cells on {jobs} threads", cfg.n_seeded_runs * cfg.horizons.len() * cfg.variants().len());
    let report = run_experiment(&data.series, &cfg, jobs)?;
    let failed = report.cells.iter().filter(|c| c.outcome.is_err()).count();
    if failed > 0 {
        warn!("{failed} cells failed; see accuracy.csv");
    }
    let dir = &a.common.out_dir;
    write_report(&report, dir).map_err(|e| CliError::io(dir, e))?;
    let plots = emit_plot_data(&report, dir)?;
    if plots == 0 {
        println!("note: no completed forecasts, so no plot data was written");
    }
    print!("{}", summary_table(&report));
    println!("\nreport written to {} ({failed} failed cells)", dir.display());
    Ok(())
}

/// Forecast files grouped by horizon: label -> (dates, actual, predicted).
type ForecastFiles = BTreeMap<usize, BTreeMap<String, (Vec<String>, Vec<f64>)>>;

fn read_forecasts(dir: &Path) -> Result<ForecastFiles, CliError> {
    let mut out = ForecastFiles::new();
    let entries = fs::read_dir(dir).map_err(|e| CliError::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
    paths.sort();
    for path in paths {
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        if path.extension().and_then(|e| e.to_str()) != Some("csv") {
            continue;
        }
        let Some((label, h)) = stem.rsplit_once("_H") else { continue };
        let Ok(h) = h.parse::<usize>() else { continue };
        let mut reader = csv::Reader::from_path(&path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        let (mut dates, mut pred) = (Vec::new(), Vec::new());
        for rec in reader.records() {
            let rec = rec.map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            let p = rec.get(2).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| {
                CliError::Data(format!(
                    "{}: expected columns date,actual,predicted",
                    path.display()
                ))
            })?;
            dates.push(rec.get(0).unwrap_or("").to_string());
            pred.push(p);
        }
        out.entry(h).or_default().insert(label.to_string(), (dates, pred));
    }
    Ok(out)
}

fn cmd_spa(a: &SpaArgs) -> Result<(), CliError> {
    let file = ConfigFile::load(a.common.config.as_deref())?;
    let data = load_data(&a.common.data)?;
    let cfg = experiment_config(&a.common, &file, &data.series)?;
    let spa = SpaConfig {
        n_bootstrap: a.bootstrap_b.unwrap_or(cfg.spa.n_bootstrap),
        ..cfg.spa
    };
    spa.validate().map_err(CliError::Usage)?;
    let groups = read_forecasts(&a.forecasts)?;
    if groups.is_empty() {
        return Err(CliError::Data(format!(
            "{}: no <model>_<strategy>_H<h>.csv files found",
            a.forecasts.display()
        )));
    }
    let series = &data.series;
    let index: BTreeMap<String, usize> = series
        .timestamps()
        .iter()
        .enumerate()
        .map(|(i, d)| (d.to_string(), i))
        .collect();
    let mut out = String::from("loss,horizon,base,statistic,p_consistent,p_lower,p_upper\n");
    for (&h, models) in &groups {
        let mut losses: Vec<Vec<LossSeries>> = vec![Vec::new(); LossKind::ALL.len()];
        for (label, (dates, pred)) in models {
            let idx: Vec<usize> = dates
                .iter()
                .map(|d| {
                    index.get(d).copied().filter(|&i| i > 0).ok_or_else(|| {
                        CliError::Data(format!("{label}_H{h}: date {d} is not in the data file (or is its first row)"))
                    })
                })
                .collect::<Result<_, _>>()?;
            let v = series.values();
            let frame = EvaluationFrame::new(
                idx.iter().map(|&i| v[i]).collect(),
                pred.clone(),
                idx.iter().map(|&i| v[i - 1]).collect(),
                v[..idx[0]].to_vec(),
            )
            .map_err(|e| CliError::Data(format!("{label}_H{h}: {e}")))?;
            let metric = |e: msfc_core::metrics::MetricError| CliError::Numerical(format!("{label}_H{h}: {e}"));
            losses[0].push(LossSeries::new(label.clone(), smape_terms(&frame, cfg.smape_form).map_err(metric)?));
            losses[1].push(LossSeries::new(label.clone(), mase_terms(&frame).map_err(metric)?));
            losses[2].push(LossSeries::new(label.clone(), ds_hits(&frame).iter().map(|d| 1.0 - d).collect()));
        }
        for (l, kind) in LossKind::ALL.iter().enumerate() {
            if losses[l].len() < 2 {
                warn!("H={h}: fewer than two models; skipping");
                continue;
            }
            let run_cfg = SpaConfig {
                seed: derive_seed(spa.seed, &[0, h as u64, l as u64]),
                ..spa
            };
            let results = spa_matrix(&losses[l], &run_cfg).map_err(|e| match e {
                msfc_core::spa::SpaError::LengthMismatch => {
                    CliError::Data(format!("H={h}: forecast files cover different weeks"))
                }
                other => other.into(),
            })?;
            println!("\n{} H={h}: SPA p-values (base model vs the rest)", kind.label());
            for r in results {
                println!("  {:<28} {:.3}", r.base_id, r.p_value);
                let _ = writeln!(
                    out,
                    "{},{h},{},{:.16e},{:.16e},{:.16e},{:.16e}",
                    kind.label(),
                    r.base_id,
                    r.statistic,
                    r.p_value,
                    r.p_lower,
                    r.p_upper
                );
            }
        }
    }
    create_dir(&a.common.out_dir)?;
    let path = a.common.out_dir.join("spa_pvalues.csv");
    write_file(&path, out)?;
    println!("\nwritten to {}", path.display());
    Ok(())
}
