//! TOML configuration with `[experiment]`, `[sift]`, `[train]`, `[spa]` and
//! `[selection]` sections. Unknown keys are rejected; values are range
//! checked once the series length is known.

use std::path::Path;

use msfc_core::emd::SiftConfig;
use msfc_core::feature_select::SelectionConfig;
use msfc_core::metrics::SmapeForm;
use msfc_core::nnet::TrainConfig;
use msfc_core::pipeline::{AggregationMode, DecompositionScope, DsReference, ExperimentConfig, Technique};
use msfc_core::series::SplitSpec;
use msfc_core::spa::SpaConfig;
use msfc_core::strategies::StrategyKind;
use serde::Deserialize;

use crate::error::CliError;

/// Default holdout length; matches 208 weeks of a 626-week sample.
const DEFAULT_HOLDOUT: usize = 208;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub horizons: Option<Vec<usize>>,
    pub n_estimation: Option<usize>,
    pub n_holdout: Option<usize>,
    pub base_seed: Option<u64>,
    pub n_seeded_runs: Option<usize>,
    pub decomposition_scope: Option<DecompositionScope>,
    pub aggregation_mode: Option<AggregationMode>,
    pub techniques: Option<Vec<Technique>>,
    pub strategies: Option<Vec<StrategyKind>>,
    pub hidden_grid: Option<Vec<usize>>,
    pub aggregator_hidden: Option<usize>,
    pub pooled_leads: Option<bool>,
    pub ds_reference: Option<DsReference>,
    pub smape_form: Option<SmapeForm>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: ExperimentSection,
    pub sift: SiftConfig,
    pub train: TrainConfig,
    pub spa: SpaConfig,
    pub selection: SelectionConfig,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("{}: {e} (check the --config path)", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| format!("invalid configuration: {e}"))
    }

    /// Resolve into an experiment configuration for a series of `n`
    /// observations. Without explicit sizes the holdout is 208 weeks, or a
    /// third of a shorter series.
    pub fn resolve(&self, n: usize) -> ExperimentConfig {
        let e = &self.experiment;
        let default_holdout = if n >= 3 * DEFAULT_HOLDOUT { DEFAULT_HOLDOUT } else { n / 3 };
        let split = match (e.n_estimation, e.n_holdout) {
            (Some(est), Some(hold)) => SplitSpec::new(est, hold),
            (Some(est), None) => SplitSpec::new(est, n.saturating_sub(est)),
            (None, Some(hold)) => SplitSpec::new(n.saturating_sub(hold), hold),
            (None, None) => SplitSpec::new(n - default_holdout, default_holdout),
        };
        let d = ExperimentConfig::default();
        ExperimentConfig {
            horizons: e.horizons.clone().unwrap_or(d.horizons),
            split,
            base_seed: e.base_seed.unwrap_or(d.base_seed),
            n_seeded_runs: e.n_seeded_runs.unwrap_or(d.n_seeded_runs),
            decomposition_scope: e.decomposition_scope.unwrap_or(d.decomposition_scope),
            aggregation_mode: e.aggregation_mode.unwrap_or(d.aggregation_mode),
            techniques: e.techniques.clone().unwrap_or(d.techniques),
            strategies: e.strategies.clone().unwrap_or(d.strategies),
            hidden_grid: e.hidden_grid.clone().unwrap_or(d.hidden_grid),
            aggregator_hidden: e.aggregator_hidden.unwrap_or(d.aggregator_hidden),
            pooled_leads: e.pooled_leads.unwrap_or(d.pooled_leads),
            ds_reference: e.ds_reference.unwrap_or(d.ds_reference),
            smape_form: e.smape_form.unwrap_or(d.smape_form),
            sift: self.sift,
            train: self.train,
            spa: self.spa,
            selection: self.selection,
        }
    }
}

/// Seed from `MSFC_SEED`, if set.
pub fn env_seed() -> Result<Option<u64>, CliError> {
    match std::env::var("MSFC_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("MSFC_SEED={s:?} is not a non-negative integer"))),
        Err(_) => Ok(None),
    }
}
