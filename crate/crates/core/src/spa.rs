//! Test for superior predictive ability with the stationary bootstrap.
//!
//! For a base model 0 and competitors k, the loss differentials are
//! `f_{k,t} = L_{0,t} − L_{k,t}`. The statistic is the largest studentised
//! mean differential (floored at zero); its null distribution comes from
//! recentred stationary-bootstrap means. Lower, consistent and upper
//! p-values are all reported, the consistent one being primary.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::{ds_hits, mase_terms, smape_terms, EvaluationFrame, MetricError, SmapeForm};
use crate::seed::rng_for;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaError {
    #[error("need at least {need} models, got {got}")]
    TooFewModels { need: usize, got: usize },
    #[error("loss series differ in length")]
    LengthMismatch,
    #[error("loss series are empty")]
    Empty,
    #[error("non-finite loss for model {model}")]
    NonFinite { model: String },
    #[error("invalid SPA configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpaConfig {
    pub n_bootstrap: usize,
    /// Expected block length q of the stationary bootstrap.
    pub mean_block_length: f64,
    pub seed: u64,
}

impl Default for SpaConfig {
    fn default() -> Self {
        Self {
            n_bootstrap: 10_000,
            mean_block_length: 4.0,
            seed: 0,
        }
    }
}

impl SpaConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_bootstrap < 100 {
            return Err(format!("n_bootstrap must be >= 100, got {}", self.n_bootstrap));
        }
        if !(self.mean_block_length >= 1.0) {
            return Err(format!(
                "mean_block_length must be >= 1, got {}",
                self.mean_block_length
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Smape,
    Mase,
    Ds,
}

impl LossKind {
    pub const ALL: [LossKind; 3] = [LossKind::Smape, LossKind::Mase, LossKind::Ds];

    pub fn label(self) -> &'static str {
        match self {
            LossKind::Smape => "SMAPE",
            LossKind::Mase => "MASE",
            LossKind::Ds => "DS",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossSeries {
    pub model_id: String,
    pub losses: Vec<f64>,
}

impl LossSeries {
    pub fn new(model_id: impl Into<String>, losses: Vec<f64>) -> Self {
        Self {
            model_id: model_id.into(),
            losses,
        }
    }
}

/// Per-observation losses whose mean is the matching metric (for DS, one
/// minus the metric), so that smaller is better for every kind.
pub fn per_observation_losses(
    model_id: impl Into<String>,
    frame: &EvaluationFrame,
    kind: LossKind,
) -> Result<LossSeries, SpaError> {
    let losses = match kind {
        LossKind::Smape => smape_terms(frame, SmapeForm::Plain)?,
        LossKind::Mase => mase_terms(frame)?,
        LossKind::Ds => ds_hits(frame).into_iter().map(|d| 1.0 - d).collect(),
    };
    Ok(LossSeries::new(model_id, losses))
}

/// Blocks `(start, len)` of one stationary-bootstrap resample. Starts are
/// uniform, lengths geometric with mean `q`, and the final block is cut to
/// fill exactly `n` positions.
pub fn stationary_bootstrap_blocks(n: usize, q: f64, rng: &mut ChaCha8Rng) -> Vec<(usize, usize)> {
    let geo = Geometric::new(1.0 / q.max(1.0)).expect("1/q lies in (0, 1]");
    let mut blocks = Vec::new();
    let mut filled = 0;
    while filled < n {
        let start = rng.random_range(0..n);
        let len = (1 + geo.sample(rng) as usize).min(n - filled);
        blocks.push((start, len));
        filled += len;
    }
    blocks
}

fn indices_from_blocks(n: usize, blocks: &[(usize, usize)]) -> Vec<usize> {
    blocks
        .iter()
        .flat_map(|&(start, len)| (start..start + len).map(move |i| i % n))
        .collect()
}

/// One resample of `0..n`, wrapping circularly inside blocks.
pub fn stationary_bootstrap_indices(n: usize, q: f64, seed: u64) -> Vec<usize> {
    let mut rng = rng_for(seed, &[]);
    indices_from_blocks(n, &stationary_bootstrap_blocks(n, q, &mut rng))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaResult {
    pub base_id: String,
    pub statistic: f64,
    /// Consistent p-value.
    pub p_value: f64,
    pub p_lower: f64,
    pub p_upper: f64,
    /// Mean differential `f̄_k` per competitor.
    pub per_model_means: Vec<f64>,
    /// Bootstrap standard deviation of `√N f̄_k` per competitor.
    pub omega: Vec<f64>,
}

/// Bootstrap means of every model's losses, `means[b][model]`.
struct BootstrapMeans {
    n: usize,
    sample: Vec<f64>,
    replicates: Vec<Vec<f64>>,
}

impl BootstrapMeans {
    fn new(models: &[LossSeries], config: &SpaConfig) -> Result<Self, SpaError> {
        let n = models[0].losses.len();
        if n == 0 {
            return Err(SpaError::Empty);
        }
        if models.iter().any(|m| m.losses.len() != n) {
            return Err(SpaError::LengthMismatch);
        }
        if let Some(m) = models.iter().find(|m| m.losses.iter().any(|l| !l.is_finite())) {
            return Err(SpaError::NonFinite {
                model: m.model_id.clone(),
            });
        }
        config.validate().map_err(SpaError::InvalidConfig)?;
        let q = config.mean_block_length.min(n as f64);
        let mean = |l: &[f64], idx: Option<&[usize]>| -> f64 {
            match idx {
                None => l.iter().sum::<f64>() / n as f64,
                Some(idx) => idx.iter().map(|&i| l[i]).sum::<f64>() / n as f64,
            }
        };
        let sample = models.iter().map(|m| mean(&m.losses, None)).collect();
        let replicates = (0..config.n_bootstrap)
            .map(|b| {
                let mut rng = rng_for(config.seed, &[b as u64]);
                let idx = indices_from_blocks(n, &stationary_bootstrap_blocks(n, q, &mut rng));
                models.iter().map(|m| mean(&m.losses, Some(&idx))).collect()
            })
            .collect();
        Ok(Self {
            n,
            sample,
            replicates,
        })
    }

    fn test(&self, base: usize, ids: &[&str]) -> SpaResult {
        let n = self.n as f64;
        let root_n = n.sqrt();
        let b_count = self.replicates.len() as f64;
        let comps: Vec<usize> = (0..self.sample.len()).filter(|&k| k != base).collect();

        let fbar: Vec<f64> = comps.iter().map(|&k| self.sample[base] - self.sample[k]).collect();
        let omega: Vec<f64> = comps
            .iter()
            .zip(&fbar)
            .map(|(&k, f)| {
                let ss: f64 = self
                    .replicates
                    .iter()
                    .map(|r| (root_n * (r[base] - r[k] - f)).powi(2))
                    .sum();
                (ss / b_count).sqrt()
            })
            .collect();

        let statistic = fbar
            .iter()
            .zip(&omega)
            .filter_map(|(&f, &w)| match (w > 0.0, f) {
                (true, _) => Some(root_n * f / w),
                (false, f) if f > 0.0 => Some(f64::INFINITY),
                (false, f) if f < 0.0 => Some(f64::NEG_INFINITY),
                _ => None,
            })
            .fold(0.0, f64::max);

        let threshold = (2.0 * n.ln().ln().max(0.0) / n).sqrt();
        let centre = |f: f64, w: f64| -> [f64; 3] {
            let consistent = if f >= -w * threshold { f } else { 0.0 };
            [f.max(0.0), consistent, f]
        };
        let centres: Vec<[f64; 3]> = fbar.iter().zip(&omega).map(|(&f, &w)| centre(f, w)).collect();

        let mut exceed = [0usize; 3];
        for r in &self.replicates {
            let mut t_star = [0.0f64; 3];
            for ((&k, &w), c) in comps.iter().zip(&omega).zip(&centres) {
                if w > 0.0 {
                    let fb = r[base] - r[k];
                    for v in 0..3 {
                        t_star[v] = t_star[v].max(root_n * (fb - c[v]) / w);
                    }
                }
            }
            for v in 0..3 {
                if t_star[v] >= statistic {
                    exceed[v] += 1;
                }
            }
        }
        let p = |v: usize| exceed[v] as f64 / b_count;
        SpaResult {
            base_id: ids[base].to_string(),
            statistic,
            p_value: p(1),
            p_lower: p(0),
            p_upper: p(2),
            per_model_means: fbar,
            omega,
        }
    }
}

/// Is any competitor better than `base`? Small p-values say yes.
pub fn spa_test(
    base: &LossSeries,
    competitors: &[LossSeries],
    config: &SpaConfig,
) -> Result<SpaResult, SpaError> {
    if competitors.is_empty() {
        return Err(SpaError::TooFewModels { need: 2, got: 1 });
    }
    let models: Vec<LossSeries> = std::iter::once(base).chain(competitors).cloned().collect();
    let ids: Vec<&str> = models.iter().map(|m| m.model_id.as_str()).collect();
    Ok(BootstrapMeans::new(&models, config)?.test(0, &ids))
}

/// One SPA result per model taken as base against all the others. The
/// bootstrap resamples are shared across bases.
pub fn spa_matrix(models: &[LossSeries], config: &SpaConfig) -> Result<Vec<SpaResult>, SpaError> {
    if models.len() < 2 {
        return Err(SpaError::TooFewModels {
            need: 2,
            got: models.len(),
        });
    }
    let boot = BootstrapMeans::new(models, config)?;
    let ids: Vec<&str> = models.iter().map(|m| m.model_id.as_str()).collect();
    Ok((0..models.len()).map(|b| boot.test(b, &ids)).collect())
}
