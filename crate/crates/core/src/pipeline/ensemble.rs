//! Per-component forecasting and recombination.

use log::{debug, warn};

use super::{AggregationMode, DecompositionScope, PipelineError};
use crate::emd::{decompose, Decomposition, SiftConfig};
use crate::feature_select::{select_lags, Criterion, LagSet, SelectionConfig};
use crate::seed::derive_seed;
use crate::series::{LagMatrix, TargetMode};
use crate::strategies::{train_strategy, Predictor, Regressor, StrategyKind, StrategyModel};

/// Lags chosen for one component and one target layout.
#[derive(Debug, Clone, PartialEq)]
pub struct LagRecord {
    /// `series`, `imf<k>` (1-based) or `residue`.
    pub component: String,
    /// `t+1`, `t+h` or `t+1..t+H`.
    pub target: String,
    /// `None` when the component fell back to persistence.
    pub lags: Option<LagSet>,
}

/// Multi-output targets are scored with the delta test; single targets,
/// including MIMO at `H = 1`, with partial mutual information.
fn criterion_for(kind: StrategyKind, horizon: usize) -> Criterion {
    if kind == StrategyKind::Mimo && horizon > 1 {
        Criterion::DeltaTest
    } else {
        Criterion::Pmi
    }
}

/// Lag sets for `kind`: one for iterated and MIMO, `horizon` for direct.
pub fn select_channel_lags(
    values: &[f64],
    kind: StrategyKind,
    horizon: usize,
    config: &SelectionConfig,
    seed: u64,
) -> Result<Vec<LagSet>, PipelineError> {
    let pick = |mode: TargetMode, h: u64| -> Result<LagSet, PipelineError> {
        let sel = select_lags(values, mode, criterion_for(kind, horizon), config, derive_seed(seed, &[h]))?;
        Ok(sel.lags)
    };
    Ok(match kind {
        StrategyKind::Iterated => vec![pick(TargetMode::Single, 1)?],
        StrategyKind::Mimo if horizon == 1 => vec![pick(TargetMode::Single, 1)?],
        StrategyKind::Mimo => vec![pick(TargetMode::Multi(horizon), 1)?],
        StrategyKind::Direct if config.share_direct_lags => {
            vec![pick(TargetMode::Direct(1), 1)?; horizon]
        }
        StrategyKind::Direct => (1..=horizon)
            .map(|h| pick(TargetMode::Direct(h), h as u64))
            .collect::<Result<_, _>>()?,
    })
}

fn target_labels(kind: StrategyKind, horizon: usize) -> Vec<String> {
    match kind {
        StrategyKind::Iterated => vec!["t+1".into()],
        StrategyKind::Mimo if horizon == 1 => vec!["t+1".into()],
        StrategyKind::Mimo => vec![format!("t+1..t+{horizon}")],
        StrategyKind::Direct => (1..=horizon).map(|h| format!("t+{h}")).collect(),
    }
}

/// A component forecaster.
#[derive(Debug)]
pub enum ChannelModel {
    Fitted(StrategyModel),
    /// Last value repeated; used when a component cannot be modelled.
    Persistence { horizon: usize },
}

impl ChannelModel {
    pub fn forecast(&self, history: &[f64]) -> Result<Vec<f64>, PipelineError> {
        match self {
            ChannelModel::Fitted(m) => Ok(m.forecast(history)?),
            ChannelModel::Persistence { horizon } => Ok(super::random_walk_forecast(history, *horizon)),
        }
    }
}

/// Select lags and train one strategy on `values`, falling back to
/// persistence if either step fails.
pub fn fit_channel(
    values: &[f64],
    label: &str,
    kind: StrategyKind,
    horizon: usize,
    selection: &SelectionConfig,
    regressor: &dyn Regressor,
    seed: u64,
) -> (ChannelModel, Vec<LagRecord>) {
    let fitted = select_channel_lags(values, kind, horizon, selection, seed).and_then(|lags| {
        let model = train_strategy(kind, values, &lags, horizon, regressor, seed)?;
        Ok((model, lags))
    });
    let labels = target_labels(kind, horizon);
    match fitted {
        Ok((model, lags)) => {
            let records = labels
                .into_iter()
                .zip(lags)
                .map(|(target, lags)| LagRecord {
                    component: label.to_string(),
                    target,
                    lags: Some(lags),
                })
                .collect();
            (ChannelModel::Fitted(model), records)
        }
        Err(e) => {
            warn!("component {label}: {e}; using persistence");
            let records = labels
                .into_iter()
                .map(|target| LagRecord {
                    component: label.to_string(),
                    target,
                    lags: None,
                })
                .collect();
            (ChannelModel::Persistence { horizon }, records)
        }
    }
}

/// A network on the undecomposed series.
#[derive(Debug)]
pub struct SingleSeriesModel {
    pub model: ChannelModel,
    pub lags: Vec<LagRecord>,
}

impl SingleSeriesModel {
    pub fn train(
        values: &[f64],
        kind: StrategyKind,
        horizon: usize,
        selection: &SelectionConfig,
        regressor: &dyn Regressor,
        seed: u64,
    ) -> Self {
        let (model, lags) = fit_channel(values, "series", kind, horizon, selection, regressor, seed);
        Self { model, lags }
    }

    pub fn forecast(&self, history: &[f64]) -> Result<Vec<f64>, PipelineError> {
        self.model.forecast(history)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub sift: SiftConfig,
    pub scope: DecompositionScope,
    pub aggregation: AggregationMode,
    pub selection: SelectionConfig,
}

/// Map a decomposition onto `n_channels` channels (IMFs then residue).
/// Surplus IMFs are folded into the residue channel and missing ones are
/// zero.
pub fn align_components(dec: &Decomposition, n_channels: usize) -> Vec<Vec<f64>> {
    let n = dec.residue.len();
    let slots = n_channels - 1;
    let found = dec.imfs.len();
    if found != slots {
        debug!("component count drift: trained on {slots} IMFs, found {found}");
    }
    let mut out: Vec<Vec<f64>> = (0..slots)
        .map(|k| dec.imfs.get(k).map_or_else(|| vec![0.0; n], |imf| imf.samples.clone()))
        .collect();
    let mut residue = dec.residue.clone();
    for imf in dec.imfs.iter().skip(slots) {
        for (r, v) in residue.iter_mut().zip(&imf.samples) {
            *r += v;
        }
    }
    out.push(residue);
    out
}

fn channels_of(dec: &Decomposition) -> Vec<Vec<f64>> {
    align_components(dec, dec.imfs.len() + 1)
}

fn channel_label(c: usize, n_channels: usize) -> String {
    if c + 1 == n_channels {
        "residue".to_string()
    } else {
        format!("imf{}", c + 1)
    }
}

/// Component models plus the rule that recombines their forecasts.
pub struct EmdEnsemble {
    channels: Vec<ChannelModel>,
    aggregator: Option<Box<dyn Predictor>>,
    sift: SiftConfig,
    scope: DecompositionScope,
    n_estimation: usize,
    horizon: usize,
    /// Components of the whole series for the full scope.
    full: Option<Vec<Vec<f64>>>,
}

impl std::fmt::Debug for EmdEnsemble {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EmdEnsemble")
            .field("channels", &self.channels)
            .field("aggregator", &self.aggregator.is_some())
            .field("scope", &self.scope)
            .field("horizon", &self.horizon)
            .finish()
    }
}

/// Decompose the first `n_estimation` values of `series` (all of it for the
/// full scope), fit a strategy per component and, in network aggregation
/// mode, a network from component values to the series.
#[allow(clippy::too_many_arguments)]
pub fn emd_ensemble_train(
    series: &[f64],
    n_estimation: usize,
    kind: StrategyKind,
    horizon: usize,
    config: &EnsembleConfig,
    regressor: &dyn Regressor,
    aggregator: &dyn Regressor,
    seed: u64,
) -> Result<(EmdEnsemble, Vec<LagRecord>), PipelineError> {
    if n_estimation == 0 || n_estimation > series.len() {
        return Err(PipelineError::InvalidConfig(format!(
            "estimation length {n_estimation} outside 1..={}",
            series.len()
        )));
    }
    let (full, train_channels) = match config.scope {
        DecompositionScope::Full => {
            let all = channels_of(&decompose(series, &config.sift)?);
            let head = all.iter().map(|c| c[..n_estimation].to_vec()).collect();
            (Some(all), head)
        }
        _ => (None, channels_of(&decompose(&series[..n_estimation], &config.sift)?)),
    };
    let n_channels = train_channels.len();
    let mut channels = Vec::with_capacity(n_channels);
    let mut records = Vec::new();
    for (c, values) in train_channels.iter().enumerate() {
        let label = channel_label(c, n_channels);
        let (model, lags) = fit_channel(
            values,
            &label,
            kind,
            horizon,
            &config.selection,
            regressor,
            derive_seed(seed, &[c as u64]),
        );
        channels.push(model);
        records.extend(lags);
    }
    let aggregator = match config.aggregation {
        AggregationMode::Summation => None,
        AggregationMode::Fnn => {
            let inputs = (0..n_estimation)
                .map(|t| train_channels.iter().map(|c| c[t]).collect())
                .collect();
            let targets = series[..n_estimation].iter().map(|&z| vec![z]).collect();
            let data = LagMatrix::from_rows(inputs, targets)?;
            Some(aggregator.fit(&data, derive_seed(seed, &[u64::MAX]))?)
        }
    };
    Ok((
        EmdEnsemble {
            channels,
            aggregator,
            sift: config.sift,
            scope: config.scope,
            n_estimation,
            horizon,
            full,
        },
        records,
    ))
}

impl EmdEnsemble {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Component histories as seen at the end of `history`.
    fn component_histories(&self, history: &[f64]) -> Result<Vec<Vec<f64>>, PipelineError> {
        let n = self.channels.len();
        match (self.scope, &self.full) {
            (DecompositionScope::Full, Some(full)) => {
                if history.len() > full[0].len() {
                    return Err(PipelineError::InvalidConfig(
                        "history extends past the decomposed series".into(),
                    ));
                }
                Ok(full.iter().map(|c| c[..history.len()].to_vec()).collect())
            }
            (DecompositionScope::Estimation, _) => {
                let start = history.len().saturating_sub(self.n_estimation);
                Ok(align_components(&decompose(&history[start..], &self.sift)?, n))
            }
            _ => Ok(align_components(&decompose(history, &self.sift)?, n)),
        }
    }

    /// Forecast the `horizon` values after `history`.
    pub fn forecast(&self, history: &[f64]) -> Result<Vec<f64>, PipelineError> {
        let comps = self.component_histories(history)?;
        let paths = self
            .channels
            .iter()
            .zip(&comps)
            .map(|(m, c)| m.forecast(c))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((0..self.horizon)
            .map(|h| {
                let step: Vec<f64> = paths.iter().map(|p| p[h]).collect();
                match &self.aggregator {
                    None => step.iter().sum(),
                    Some(agg) => agg.predict(&step)[0],
                }
            })
            .collect())
    }
}
