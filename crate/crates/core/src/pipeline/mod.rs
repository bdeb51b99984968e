//! Model zoo, EMD ensemble forecaster and experiment runner.
//!
//! Four techniques are compared: a random walk, a plain network on the
//! normalised series, and two EMD ensembles that differ only in how the
//! sifting envelopes are extended past the series ends (truncated for
//! `EmdFnn`, slope-based for `EmdSbmFnn`). Every non-naive technique runs
//! under each multi-step strategy.

mod ensemble;
mod experiment;
mod report;

pub use ensemble::{
    align_components, emd_ensemble_train, fit_channel, select_channel_lags, ChannelModel, EmdEnsemble,
    EnsembleConfig, LagRecord, SingleSeriesModel,
};
pub use experiment::{
    forecast_holdout, run_experiment, CellResult, CellScores, ExperimentReport, HoldoutForecast, SpaRecord, Variant,
};
pub use report::{data_checksum, write_report, REPORT_FILES};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::emd::{BoundaryMode, EmdError, SiftConfig};
use crate::feature_select::{SelectError, SelectionConfig};
use crate::metrics::{MetricError, SmapeForm};
use crate::nnet::TrainConfig;
use crate::series::{SeriesError, SplitSpec};
use crate::spa::{SpaConfig, SpaError};
use crate::strategies::{StrategyError, StrategyKind};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Emd(#[from] EmdError),
    #[error(transparent)]
    Select(#[from] SelectError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Spa(#[from] SpaError),
    #[error("invalid experiment configuration: {0}")]
    InvalidConfig(String),
    #[error("writing report: {0}")]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    /// True for failures of the numerical machinery rather than of inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            PipelineError::Emd(_) | PipelineError::Strategy(_) | PipelineError::Spa(_) | PipelineError::Metric(_)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Technique {
    RandomWalk,
    Fnn,
    EmdFnn,
    EmdSbmFnn,
}

impl Technique {
    pub const ALL: [Technique; 4] = [
        Technique::RandomWalk,
        Technique::Fnn,
        Technique::EmdFnn,
        Technique::EmdSbmFnn,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Technique::RandomWalk => "random_walk",
            Technique::Fnn => "fnn",
            Technique::EmdFnn => "emd_fnn",
            Technique::EmdSbmFnn => "emd_sbm_fnn",
        }
    }

    /// Envelope boundary handling, for the EMD techniques.
    pub fn boundary(self) -> Option<BoundaryMode> {
        match self {
            Technique::EmdFnn => Some(BoundaryMode::Truncate),
            Technique::EmdSbmFnn => Some(BoundaryMode::Sbm),
            _ => None,
        }
    }
}

impl fmt::Display for Technique {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Technique {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|t| t.label() == norm)
            .ok_or_else(|| format!("unknown model {s:?} (expected random_walk, fnn, emd_fnn or emd_sbm_fnn)"))
    }
}

/// One model variant at one horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelSpec {
    pub technique: Technique,
    /// Ignored by the random walk.
    pub strategy: StrategyKind,
    pub horizon: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecompositionScope {
    /// Decompose the last `n_estimation` observations before each origin.
    #[serde(alias = "estimation_only")]
    Estimation,
    /// Decompose everything observed up to each origin.
    #[default]
    #[serde(alias = "rolling_origin")]
    Rolling,
    /// Decompose the whole series once.
    #[serde(alias = "full_series")]
    Full,
}

impl FromStr for DecompositionScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "estimation" | "estimation_only" => Ok(Self::Estimation),
            "rolling" | "rolling_origin" => Ok(Self::Rolling),
            "full" | "full_series" => Ok(Self::Full),
            _ => Err(format!("unknown decomposition scope {s:?} (expected rolling, estimation or full)")),
        }
    }
}

impl DecompositionScope {
    pub fn label(self) -> &'static str {
        match self {
            Self::Estimation => "estimation",
            Self::Rolling => "rolling",
            Self::Full => "full",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AggregationMode {
    /// A network maps the component values at a time step to the series.
    #[default]
    Fnn,
    /// Component forecasts are summed.
    Summation,
}

/// Actual value the direction of a lead-`H` forecast is judged against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DsReference {
    /// The observation one step before the target.
    #[default]
    Previous,
    /// The last observation at the forecast origin.
    Origin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub horizons: Vec<usize>,
    pub split: SplitSpec,
    pub base_seed: u64,
    pub n_seeded_runs: usize,
    pub decomposition_scope: DecompositionScope,
    pub aggregation_mode: AggregationMode,
    pub techniques: Vec<Technique>,
    pub strategies: Vec<StrategyKind>,
    /// Hidden-unit candidates for cross-validation.
    pub hidden_grid: Vec<usize>,
    pub aggregator_hidden: usize,
    /// Score all leads `1..=H` together instead of lead `H` only.
    pub pooled_leads: bool,
    pub ds_reference: DsReference,
    pub smape_form: SmapeForm,
    pub sift: SiftConfig,
    pub train: TrainConfig,
    pub spa: SpaConfig,
    pub selection: SelectionConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            horizons: vec![4, 8, 12, 16, 20, 24],
            split: SplitSpec::default(),
            base_seed: 0,
            n_seeded_runs: 5,
            decomposition_scope: DecompositionScope::default(),
            aggregation_mode: AggregationMode::default(),
            techniques: Technique::ALL.to_vec(),
            strategies: StrategyKind::ALL.to_vec(),
            hidden_grid: vec![5, 10, 15, 20],
            aggregator_hidden: 15,
            pooled_leads: false,
            ds_reference: DsReference::default(),
            smape_form: SmapeForm::default(),
            sift: SiftConfig::default(),
            train: TrainConfig::default(),
            spa: SpaConfig::default(),
            selection: SelectionConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::InvalidConfig(m));
        if self.horizons.is_empty() || self.horizons.iter().any(|&h| h == 0 || h > 52) {
            return bad(format!("horizons must be non-empty and within 1..=52, got {:?}", self.horizons));
        }
        if self.n_seeded_runs == 0 {
            return bad("n_seeded_runs must be >= 1".into());
        }
        if self.techniques.is_empty() {
            return bad("at least one technique is required".into());
        }
        if self.strategies.is_empty() && self.techniques.iter().any(|&t| t != Technique::RandomWalk) {
            return bad("network techniques need at least one strategy".into());
        }
        if self.hidden_grid.is_empty() || self.hidden_grid.contains(&0) || self.aggregator_hidden == 0 {
            return bad("hidden_grid entries and aggregator_hidden must be >= 1".into());
        }
        for seed in [self.base_seed, self.train.seed, self.spa.seed] {
            if seed > i64::MAX as u64 {
                return bad(format!("seeds must be below 2^63, got {seed}"));
            }
        }
        if self.split.n_estimation == 0 || self.split.n_holdout == 0 {
            return bad("split sizes must be >= 1".into());
        }
        if let Some(&h) = self.horizons.iter().max() {
            if h > self.split.n_estimation {
                return bad(format!("horizon {h} exceeds the estimation sample"));
            }
        }
        self.sift.validate().map_err(PipelineError::InvalidConfig)?;
        self.train.validate().map_err(PipelineError::InvalidConfig)?;
        self.spa.validate().map_err(PipelineError::InvalidConfig)?;
        self.selection.validate().map_err(PipelineError::InvalidConfig)?;
        Ok(())
    }

    /// Every (technique, strategy) pair in run order. The random walk
    /// appears once.
    pub fn variants(&self) -> Vec<Variant> {
        let mut out = Vec::new();
        for &t in &self.techniques {
            if t == Technique::RandomWalk {
                out.push(Variant::RandomWalk);
            } else {
                out.extend(self.strategies.iter().map(|&s| Variant::Model(t, s)));
            }
        }
        out
    }
}

/// The last observed value repeated `horizon` times.
pub fn random_walk_forecast(history: &[f64], horizon: usize) -> Vec<f64> {
    let last = *history.last().expect("history is non-empty");
    vec![last; horizon]
}
