//! Seeded runs of every model variant at every horizon, scored on the
//! holdout and compared with SPA tests.

use std::time::Instant;

use chrono::NaiveDate;
use log::{info, warn};
use rayon::prelude::*;

use super::ensemble::{emd_ensemble_train, EnsembleConfig, LagRecord, SingleSeriesModel};
use super::{random_walk_forecast, DsReference, ExperimentConfig, PipelineError, Technique};
use crate::metrics::{ds_hits, mase_terms, smape_terms, EvaluationFrame};
use crate::seed::{derive_seed, label_id};
use crate::series::{fit_scaler, MinMaxScaler, Series, SeriesError};
use crate::spa::{spa_matrix, LossKind, LossSeries, SpaConfig};
use crate::strategies::{FnnRegressor, StrategyKind};

/// A column of the comparison: the random walk or a technique under a
/// strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    RandomWalk,
    Model(Technique, StrategyKind),
}

impl Variant {
    pub fn technique(self) -> Technique {
        match self {
            Variant::RandomWalk => Technique::RandomWalk,
            Variant::Model(t, _) => t,
        }
    }

    pub fn strategy(self) -> Option<StrategyKind> {
        match self {
            Variant::RandomWalk => None,
            Variant::Model(_, s) => Some(s),
        }
    }

    pub fn strategy_label(self) -> &'static str {
        self.strategy().map_or("naive", StrategyKind::label)
    }

    /// `<technique>_<strategy>`, e.g. `emd_sbm_fnn_mimo`.
    pub fn label(self) -> String {
        format!("{}_{}", self.technique().label(), self.strategy_label())
    }
}

/// Holdout scores of one variant in one run at one horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct CellScores {
    /// Lead-`H` predictions for each holdout week, original scale.
    pub predicted: Vec<f64>,
    pub smape: f64,
    pub mase: f64,
    pub ds: f64,
    /// Per-observation losses in [`LossKind::ALL`] order.
    pub losses: Vec<Vec<f64>>,
    pub lags: Vec<LagRecord>,
}

impl CellScores {
    pub fn metric(&self, kind: LossKind) -> f64 {
        match kind {
            LossKind::Smape => self.smape,
            LossKind::Mase => self.mase,
            LossKind::Ds => self.ds,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub run: usize,
    pub horizon: usize,
    pub variant: Variant,
    pub seed: u64,
    /// Wall time for lag selection, cross-validation, training and holdout
    /// forecasting. Zero for the random walk.
    pub seconds: f64,
    pub outcome: Result<CellScores, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaRecord {
    pub run: usize,
    pub horizon: usize,
    pub loss: LossKind,
    pub base: Variant,
    pub statistic: f64,
    pub p_value: f64,
    pub p_lower: f64,
    pub p_upper: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub variants: Vec<Variant>,
    pub holdout_dates: Vec<NaiveDate>,
    pub holdout_actual: Vec<f64>,
    pub data_sha256: String,
    pub n_observations: usize,
    pub cells: Vec<CellResult>,
    pub spa: Vec<SpaRecord>,
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let m = xs.len() / 2;
    Some(if xs.len() % 2 == 1 {
        xs[m]
    } else {
        0.5 * (xs[m - 1] + xs[m])
    })
}

impl ExperimentReport {
    pub fn cells_for(&self, horizon: usize, variant: Variant) -> impl Iterator<Item = &CellResult> {
        self.cells
            .iter()
            .filter(move |c| c.horizon == horizon && c.variant == variant)
    }

    fn scores_for(&self, horizon: usize, variant: Variant) -> impl Iterator<Item = &CellScores> {
        self.cells_for(horizon, variant).filter_map(|c| c.outcome.as_ref().ok())
    }

    /// Across-run median of a metric over successful runs.
    pub fn median_metric(&self, horizon: usize, variant: Variant, kind: LossKind) -> Option<f64> {
        median(self.scores_for(horizon, variant).map(|s| s.metric(kind)).collect())
    }

    /// Week-by-week across-run median of the lead-`H` predictions.
    pub fn median_forecast(&self, horizon: usize, variant: Variant) -> Option<Vec<f64>> {
        let runs: Vec<&CellScores> = self.scores_for(horizon, variant).collect();
        if runs.is_empty() {
            return None;
        }
        let n = runs[0].predicted.len();
        (0..n)
            .map(|t| median(runs.iter().map(|s| s.predicted[t]).collect()))
            .collect()
    }

    pub fn median_seconds(&self, horizon: usize, variant: Variant) -> Option<f64> {
        median(
            self.cells_for(horizon, variant)
                .filter(|c| c.outcome.is_ok())
                .map(|c| c.seconds)
                .collect(),
        )
    }

    /// Across-run median of the consistent SPA p-value with `base` as the
    /// benchmark.
    pub fn median_spa(&self, horizon: usize, loss: LossKind, base: Variant) -> Option<f64> {
        median(
            self.spa
                .iter()
                .filter(|r| r.horizon == horizon && r.loss == loss && r.base == base)
                .map(|r| r.p_value)
                .collect(),
        )
    }
}

/// Shared state of one experiment.
struct Context<'a> {
    config: &'a ExperimentConfig,
    values: &'a [f64],
    z: Vec<f64>,
    scaler: MinMaxScaler,
    n_est: usize,
}

fn cell_seed(base: u64, run: usize, horizon: usize, variant: Variant) -> u64 {
    // Techniques share seeds so that the two EMD variants differ only in
    // their boundary handling.
    derive_seed(
        base,
        &[run as u64, horizon as u64, label_id(variant.strategy_label())],
    )
}

impl<'a> Context<'a> {
    fn new(series: &'a Series, config: &'a ExperimentConfig) -> Result<(Self, Series), PipelineError> {
        config.validate()?;
        let (estimation, holdout) = series.split(config.split)?;
        let scaler = match fit_scaler(&estimation) {
            Ok(s) => s,
            Err(SeriesError::DegenerateScale { value }) => {
                warn!("estimation sample is constant at {value}; forecasting on the original scale");
                MinMaxScaler::new(value, value + 1.0)?
            }
            Err(e) => return Err(e.into()),
        };
        let ctx = Context {
            config,
            values: series.values(),
            z: scaler.transform_all(series.values()),
            scaler,
            n_est: config.split.n_estimation,
        };
        Ok((ctx, holdout))
    }
}

/// Lead-`H` holdout forecasts of one variant.
#[derive(Debug, Clone, PartialEq)]
pub struct HoldoutForecast {
    pub dates: Vec<NaiveDate>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
    pub lags: Vec<LagRecord>,
}

/// Train one variant on the estimation sample and forecast every holdout
/// week from `horizon` weeks earlier.
pub fn forecast_holdout(
    series: &Series,
    config: &ExperimentConfig,
    variant: Variant,
    horizon: usize,
    seed: u64,
) -> Result<HoldoutForecast, PipelineError> {
    let config = ExperimentConfig {
        pooled_leads: false,
        ..config.clone()
    };
    let (ctx, holdout) = Context::new(series, &config)?;
    let (paths, _, lags) = ctx.paths(variant, horizon, seed)?;
    Ok(HoldoutForecast {
        dates: holdout.timestamps().to_vec(),
        actual: holdout.values().to_vec(),
        predicted: paths.iter().map(|p| p[horizon - 1]).collect(),
        lags,
    })
}

type Forecaster<'a> = Box<dyn Fn(&[f64]) -> Result<Vec<f64>, PipelineError> + 'a>;

impl Context<'_> {
    fn regressor(&self) -> FnnRegressor {
        FnnRegressor {
            hidden_grid: self.config.hidden_grid.clone(),
            train: self.config.train,
            ..Default::default()
        }
    }

    /// Train the variant and return a forecaster on the normalised scale.
    fn build(
        &self,
        variant: Variant,
        horizon: usize,
        seed: u64,
    ) -> Result<(Forecaster<'_>, Vec<LagRecord>), PipelineError> {
        let (technique, kind) = match variant {
            Variant::RandomWalk => {
                return Ok((Box::new(move |h| Ok(random_walk_forecast(h, horizon))), Vec::new()));
            }
            Variant::Model(t, k) => (t, k),
        };
        let regressor = self.regressor();
        match technique.boundary() {
            None => {
                let m = SingleSeriesModel::train(
                    &self.z[..self.n_est],
                    kind,
                    horizon,
                    &self.config.selection,
                    &regressor,
                    seed,
                );
                let lags = m.lags.clone();
                Ok((Box::new(move |h| m.forecast(h)), lags))
            }
            Some(boundary) => {
                let ens_cfg = EnsembleConfig {
                    sift: self.config.sift.with_boundary(boundary),
                    scope: self.config.decomposition_scope,
                    aggregation: self.config.aggregation_mode,
                    selection: self.config.selection,
                };
                let aggregator = FnnRegressor::fixed(self.config.aggregator_hidden, self.config.train);
                let (ens, lags) = emd_ensemble_train(
                    &self.z,
                    self.n_est,
                    kind,
                    horizon,
                    &ens_cfg,
                    &regressor,
                    &aggregator,
                    seed,
                )?;
                Ok((Box::new(move |h| ens.forecast(h)), lags))
            }
        }
    }

    fn run_cell(&self, run: usize, horizon: usize, variant: Variant) -> CellResult {
        let seed = cell_seed(self.config.base_seed, run, horizon, variant);
        let start = Instant::now();
        let outcome = self.score(variant, horizon, seed);
        let seconds = if variant == Variant::RandomWalk {
            0.0
        } else {
            start.elapsed().as_secs_f64()
        };
        match &outcome {
            Ok(s) => info!(
                "run {run} H={horizon} {}: SMAPE {:.4} MASE {:.4} DS {:.4} ({seconds:.1}s)",
                variant.label(),
                s.smape,
                s.mase,
                s.ds
            ),
            Err(e) => warn!("run {run} H={horizon} {} failed: {e}", variant.label()),
        }
        CellResult {
            run,
            horizon,
            variant,
            seed,
            seconds,
            outcome: outcome.map_err(|e| e.to_string()),
        }
    }

    /// Train `variant` and forecast `horizon` steps from every origin that
    /// the evaluation needs. Returns the paths on the original scale, the
    /// first origin and the lag records.
    fn paths(
        &self,
        variant: Variant,
        horizon: usize,
        seed: u64,
    ) -> Result<(Vec<Vec<f64>>, usize, Vec<LagRecord>), PipelineError> {
        let (forecaster, lags) = self.build(variant, horizon, seed)?;
        let n = self.values.len();
        let lo = self.n_est - horizon;
        let hi = if self.config.pooled_leads { n - 2 } else { n - 1 - horizon };
        let paths = (lo..=hi)
            .map(|o| Ok(self.scaler.inverse_all(&forecaster(&self.z[..=o])?)))
            .collect::<Result<Vec<_>, PipelineError>>()?;
        Ok((paths, lo, lags))
    }

    fn score(&self, variant: Variant, horizon: usize, seed: u64) -> Result<CellScores, PipelineError> {
        let (paths, lo, lags) = self.paths(variant, horizon, seed)?;
        let n = self.values.len();
        let pooled = self.config.pooled_leads;
        let at = |t: usize, lead: usize| paths[t - lead - lo][lead - 1];
        let predicted: Vec<f64> = (self.n_est..n).map(|t| at(t, horizon)).collect();
        let leads: Vec<usize> = if pooled { (1..=horizon).collect() } else { vec![horizon] };
        let (mut actual, mut pred, mut prev) = (Vec::new(), Vec::new(), Vec::new());
        for &lead in &leads {
            for t in self.n_est..n {
                actual.push(self.values[t]);
                pred.push(at(t, lead));
                prev.push(match self.config.ds_reference {
                    DsReference::Previous => self.values[t - 1],
                    DsReference::Origin => self.values[t - lead],
                });
            }
        }
        let frame = EvaluationFrame::new(actual, pred, prev, self.values[..self.n_est].to_vec())?;
        let smape_loss = smape_terms(&frame, self.config.smape_form)?;
        let mase_loss = mase_terms(&frame)?;
        let hits = ds_hits(&frame);
        let mean = |x: &[f64]| x.iter().sum::<f64>() / x.len() as f64;
        Ok(CellScores {
            predicted,
            smape: mean(&smape_loss),
            mase: mean(&mase_loss),
            ds: mean(&hits),
            losses: vec![smape_loss, mase_loss, hits.iter().map(|d| 1.0 - d).collect()],
            lags,
        })
    }
}

fn spa_for(
    cells: &[CellResult],
    run: usize,
    horizon: usize,
    loss_index: usize,
    config: &SpaConfig,
) -> Result<Vec<SpaRecord>, PipelineError> {
    let loss = LossKind::ALL[loss_index];
    let (variants, models): (Vec<Variant>, Vec<LossSeries>) = cells
        .iter()
        .filter(|c| c.run == run && c.horizon == horizon)
        .filter_map(|c| {
            let s = c.outcome.as_ref().ok()?;
            Some((c.variant, LossSeries::new(c.variant.label(), s.losses[loss_index].clone())))
        })
        .unzip();
    if models.len() < 2 {
        return Ok(Vec::new());
    }
    let cfg = SpaConfig {
        seed: derive_seed(config.seed, &[run as u64, horizon as u64, loss_index as u64]),
        ..*config
    };
    Ok(spa_matrix(&models, &cfg)?
        .into_iter()
        .zip(variants)
        .map(|(r, base)| SpaRecord {
            run,
            horizon,
            loss,
            base,
            statistic: r.statistic,
            p_value: r.p_value,
            p_lower: r.p_lower,
            p_upper: r.p_upper,
        })
        .collect())
}

/// Run every (run, horizon, variant) cell on `jobs` threads. Results do not
/// depend on `jobs`.
pub fn run_experiment(
    series: &Series,
    config: &ExperimentConfig,
    jobs: usize,
) -> Result<ExperimentReport, PipelineError> {
    if jobs == 0 {
        return Err(PipelineError::InvalidConfig("jobs must be >= 1".into()));
    }
    let (ctx, holdout) = Context::new(series, config)?;
    let variants = config.variants();
    let mut tasks = Vec::new();
    for run in 0..config.n_seeded_runs {
        for &h in &config.horizons {
            tasks.extend(variants.iter().map(|&v| (run, h, v)));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
    let (cells, spa) = pool.install(|| {
        let cells: Vec<CellResult> = tasks
            .par_iter()
            .map(|&(run, h, v)| ctx.run_cell(run, h, v))
            .collect();
        let mut spa_tasks = Vec::new();
        for run in 0..config.n_seeded_runs {
            for &h in &config.horizons {
                spa_tasks.extend((0..LossKind::ALL.len()).map(|l| (run, h, l)));
            }
        }
        let spa = spa_tasks
            .par_iter()
            .map(|&(run, h, l)| spa_for(&cells, run, h, l, &config.spa))
            .collect::<Result<Vec<_>, _>>();
        (cells, spa)
    });
    Ok(ExperimentReport {
        config: config.clone(),
        variants,
        holdout_dates: holdout.timestamps().to_vec(),
        holdout_actual: holdout.values().to_vec(),
        data_sha256: super::data_checksum(series),
        n_observations: series.len(),
        cells,
        spa: spa?.into_iter().flatten().collect(),
    })
}
