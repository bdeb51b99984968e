//! Lag selection.
//!
//! Candidates are lagged copies of a series (lags `1..=max_lag`). Single-output
//! targets are screened with partial mutual information, multi-output targets
//! with the Delta test. Both criteria are driven by the same forward-backward
//! search, which can re-admit lags that an earlier pass discarded.

mod delta;
mod pmi;

pub use delta::{delta_test, delta_test_k};
pub use pmi::{mutual_information, pmi_score};

use std::collections::HashSet;
use std::fmt;

use log::{info, warn};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_for;
use crate::series::{build_lag_matrix, SeriesError, TargetMode};

/// Largest admissible lag.
pub const MAX_LAG: usize = 36;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectError {
    #[error("lag set is empty")]
    EmptyLagSet,
    #[error("lag {lag} outside 1..={max}")]
    LagOutOfRange { lag: usize, max: usize },
    #[error("{what} has zero variance")]
    DegenerateInput { what: &'static str },
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("columns have inconsistent lengths")]
    ShapeMismatch,
    #[error("partial mutual information needs a single target column, got {got}")]
    MultiOutputPmi { got: usize },
    #[error(transparent)]
    Series(#[from] SeriesError),
}

/// Sorted, duplicate-free set of lags in `1..=MAX_LAG`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct LagSet(Vec<usize>);

impl LagSet {
    pub fn new(mut lags: Vec<usize>) -> Result<Self, SelectError> {
        lags.sort_unstable();
        lags.dedup();
        match (lags.first(), lags.last()) {
            (None, _) => Err(SelectError::EmptyLagSet),
            (Some(0), _) => Err(SelectError::LagOutOfRange { lag: 0, max: MAX_LAG }),
            (_, Some(&hi)) if hi > MAX_LAG => Err(SelectError::LagOutOfRange {
                lag: hi,
                max: MAX_LAG,
            }),
            _ => Ok(Self(lags)),
        }
    }

    /// Lags `1..=d`, clamped to `1..=MAX_LAG`.
    pub fn contiguous(d: usize) -> Self {
        Self((1..=d.clamp(1, MAX_LAG)).collect())
    }

    pub fn max_lag(&self) -> usize {
        *self.0.last().expect("lag sets are non-empty")
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, lag: usize) -> bool {
        self.0.binary_search(&lag).is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

impl TryFrom<Vec<usize>> for LagSet {
    type Error = SelectError;

    fn try_from(v: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(v)
    }
}

impl From<LagSet> for Vec<usize> {
    fn from(l: LagSet) -> Self {
        l.0
    }
}

/// Space-separated lags, e.g. `1 2 7`.
impl fmt::Display for LagSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, lag) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{lag}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Pmi,
    DeltaTest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// Largest lag offered to the search.
    pub max_lag: usize,
    /// Target-shuffled surrogates per significance test (PMI only).
    pub n_surrogates: usize,
    /// Surrogate quantile a PMI score must reach to be significant.
    pub surrogate_quantile: f64,
    /// Nearest neighbours averaged by the Delta test.
    pub neighbours: usize,
    /// Select once at h = 1 and reuse the lags for every direct model.
    pub share_direct_lags: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            max_lag: MAX_LAG,
            n_surrogates: 100,
            surrogate_quantile: 0.95,
            neighbours: 1,
            share_direct_lags: false,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_lag == 0 || self.max_lag > MAX_LAG {
            return Err(format!("max_lag must be in 1..={MAX_LAG}, got {}", self.max_lag));
        }
        if self.n_surrogates == 0 {
            return Err("n_surrogates must be >= 1".into());
        }
        if !(self.surrogate_quantile > 0.0 && self.surrogate_quantile < 1.0) {
            return Err(format!(
                "surrogate_quantile must be in (0, 1), got {}",
                self.surrogate_quantile
            ));
        }
        if self.neighbours == 0 {
            return Err("neighbours must be >= 1".into());
        }
        Ok(())
    }
}

/// Candidate input columns, each tagged with the lag it represents.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidatePool {
    lags: Vec<usize>,
    columns: Vec<Vec<f64>>,
}

impl CandidatePool {
    pub fn new(lags: Vec<usize>, columns: Vec<Vec<f64>>) -> Result<Self, SelectError> {
        if lags.len() != columns.len() || columns.is_empty() {
            return Err(SelectError::ShapeMismatch);
        }
        let n = columns[0].len();
        if columns.iter().any(|c| c.len() != n) {
            return Err(SelectError::ShapeMismatch);
        }
        if let Some(&lag) = lags.iter().find(|&&l| l == 0 || l > MAX_LAG) {
            return Err(SelectError::LagOutOfRange { lag, max: MAX_LAG });
        }
        Ok(Self { lags, columns })
    }

    /// Lags `1..=max_lag` of `values` with the targets implied by `mode`.
    pub fn from_series(
        values: &[f64],
        max_lag: usize,
        mode: TargetMode,
    ) -> Result<(Self, Vec<Vec<f64>>), SelectError> {
        let lags = LagSet::contiguous(max_lag);
        let m = build_lag_matrix(values, &lags, mode)?;
        let columns = (0..m.n_inputs())
            .map(|j| (0..m.rows()).map(|r| m.input(r)[j]).collect())
            .collect();
        let targets = (0..m.n_targets())
            .map(|k| (0..m.rows()).map(|r| m.target(r)[k]).collect())
            .collect();
        Ok((Self::new(lags.as_slice().to_vec(), columns)?, targets))
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn samples(&self) -> usize {
        self.columns[0].len()
    }

    pub fn lag(&self, c: usize) -> usize {
        self.lags[c]
    }

    pub fn column(&self, c: usize) -> &[f64] {
        &self.columns[c]
    }
}

/// Outcome of a forward-backward search.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub lags: LagSet,
    /// Forward plus backward passes executed.
    pub passes: usize,
    /// True when nothing was selected and `{1}` was substituted.
    pub fell_back: bool,
}

/// Set-level criterion shared by the search. Indices refer to pool columns.
pub(crate) trait SearchCriterion {
    /// Index into `remaining` of the best addition, if it passes.
    fn best_addition(&mut self, selected: &[usize], remaining: &[usize], pass: usize)
        -> Option<usize>;
    /// Index into `selected` of a member to drop, if any.
    fn worst_member(&mut self, selected: &[usize], pass: usize) -> Option<usize>;
}

fn variance(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
}

pub(crate) fn quantile(sorted: &[f64], q: f64) -> f64 {
    // Linear interpolation between order statistics.
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub(crate) fn shuffled_index(n: usize, seed: u64, parts: &[u64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, parts));
    idx
}

/// Pass budget: four passes per admissible lag.
pub fn pass_cap(pool_size: usize) -> usize {
    4 * pool_size.max(1)
}

fn run_search(pool: &CandidatePool, crit: &mut dyn SearchCriterion) -> Selection {
    let usable: Vec<usize> = (0..pool.len())
        .filter(|&c| variance(pool.column(c)) > 0.0)
        .collect();
    let cap = pass_cap(pool.len());
    let mut selected: Vec<usize> = Vec::new();
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut passes = 0;
    while passes < cap {
        let mut changed = false;

        let remaining: Vec<usize> =
            usable.iter().copied().filter(|c| !selected.contains(c)).collect();
        if !remaining.is_empty() {
            passes += 1;
            if let Some(k) = crit.best_addition(&selected, &remaining, passes) {
                selected.push(remaining[k]);
                selected.sort_unstable_by_key(|&c| pool.lag(c));
                changed = true;
            }
        }

        if !selected.is_empty() && passes < cap {
            passes += 1;
            if let Some(k) = crit.worst_member(&selected, passes) {
                selected.remove(k);
                changed = true;
            }
        }

        // A revisited set would repeat the same moves forever.
        if !changed || !seen.insert(selected.clone()) {
            break;
        }
    }

    let lags: Vec<usize> = selected.iter().map(|&c| pool.lag(c)).collect();
    match LagSet::new(lags) {
        Ok(lags) => Selection {
            lags,
            passes,
            fell_back: false,
        },
        Err(_) => {
            info!("lag selection found no informative lag; falling back to {{1}}");
            Selection {
                lags: LagSet::contiguous(1),
                passes,
                fell_back: true,
            }
        }
    }
}

/// Forward-backward search over the pool.
///
/// PMI admits the best candidate when its score reaches the configured
/// quantile of scores against shuffled targets, and drops a member whose
/// score given the rest falls below its own surrogate quantile. The Delta
/// test admits or drops whichever lag lowers the noise estimate the most,
/// requiring a strict decrease.
pub fn forward_backward_search(
    pool: &CandidatePool,
    targets: &[Vec<f64>],
    criterion: Criterion,
    config: &SelectionConfig,
    seed: u64,
) -> Result<Selection, SelectError> {
    if targets.is_empty() {
        return Err(SelectError::ShapeMismatch);
    }
    let n = pool.samples();
    if targets.iter().any(|t| t.len() != n) {
        return Err(SelectError::ShapeMismatch);
    }
    match criterion {
        Criterion::Pmi => {
            if targets.len() != 1 {
                return Err(SelectError::MultiOutputPmi { got: targets.len() });
            }
            if n < pmi::MIN_SAMPLES {
                return Err(SelectError::TooFewSamples {
                    need: pmi::MIN_SAMPLES,
                    got: n,
                });
            }
            if n < 100 {
                warn!("partial mutual information on only {n} samples");
            }
            if variance(&targets[0]) == 0.0 {
                warn!("constant target; lag selection falls back to {{1}}");
                return Ok(Selection {
                    lags: LagSet::contiguous(1),
                    passes: 0,
                    fell_back: true,
                });
            }
            let mut crit = pmi::PmiSearch::new(pool, &targets[0], config, seed);
            Ok(run_search(pool, &mut crit))
        }
        Criterion::DeltaTest => {
            if n < 2 {
                return Err(SelectError::TooFewSamples { need: 2, got: n });
            }
            let mut crit = delta::DeltaSearch::new(pool, targets, config.neighbours);
            Ok(run_search(pool, &mut crit))
        }
    }
}

/// Select lags of `values` for the target layout `mode`.
pub fn select_lags(
    values: &[f64],
    mode: TargetMode,
    criterion: Criterion,
    config: &SelectionConfig,
    seed: u64,
) -> Result<Selection, SelectError> {
    let (pool, targets) = CandidatePool::from_series(values, config.max_lag, mode)?;
    forward_backward_search(&pool, &targets, criterion, config, seed)
}
