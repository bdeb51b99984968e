//! Price series container, sample splitting, scaling and lag matrices.

use chrono::{Duration, NaiveDate};
use thiserror::Error;

use crate::feature_select::LagSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeriesError {
    #[error("series needs at least {min} observations, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("timestamps and values differ in length ({timestamps} vs {values})")]
    LengthMismatch { timestamps: usize, values: usize },
    #[error("timestamps not strictly increasing at position {position}")]
    NonMonotone { position: usize },
    #[error("non-finite value at position {position}")]
    NonFinite { position: usize },
    #[error("invalid split: {estimation} + {holdout} does not partition {total} observations")]
    InvalidSplit {
        estimation: usize,
        holdout: usize,
        total: usize,
    },
    #[error("cannot fit a scaler on a constant sample (value {value})")]
    DegenerateScale { value: f64 },
    #[error("insufficient data: {needed} observations required, {available} available")]
    InsufficientData { needed: usize, available: usize },
}

/// A dated univariate series with strictly increasing timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    timestamps: Vec<NaiveDate>,
    values: Vec<f64>,
}

impl Series {
    pub fn new(timestamps: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self, SeriesError> {
        if values.len() < 2 {
            return Err(SeriesError::TooShort {
                min: 2,
                got: values.len(),
            });
        }
        Self::validated(timestamps, values)
    }

    /// Weekly dates starting at `start`; convenient for synthetic data.
    pub fn weekly(start: NaiveDate, values: Vec<f64>) -> Result<Self, SeriesError> {
        let timestamps = (0..values.len())
            .map(|i| start + Duration::weeks(i as i64))
            .collect();
        Self::new(timestamps, values)
    }

    // Segments produced by `split` may hold a single observation.
    fn validated(timestamps: Vec<NaiveDate>, values: Vec<f64>) -> Result<Self, SeriesError> {
        if timestamps.len() != values.len() {
            return Err(SeriesError::LengthMismatch {
                timestamps: timestamps.len(),
                values: values.len(),
            });
        }
        if values.is_empty() {
            return Err(SeriesError::TooShort { min: 1, got: 0 });
        }
        if let Some(position) = values.iter().position(|v| !v.is_finite()) {
            return Err(SeriesError::NonFinite { position });
        }
        if let Some(w) = timestamps.windows(2).position(|w| w[1] <= w[0]) {
            return Err(SeriesError::NonMonotone { position: w + 1 });
        }
        Ok(Self { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> &[NaiveDate] {
        &self.timestamps
    }

    /// Split into estimation and holdout segments, estimation first.
    pub fn split(&self, spec: SplitSpec) -> Result<(Series, Series), SeriesError> {
        spec.check(self.len())?;
        let n = spec.n_estimation;
        let est = Self::validated(self.timestamps[..n].to_vec(), self.values[..n].to_vec())?;
        let hold = Self::validated(self.timestamps[n..].to_vec(), self.values[n..].to_vec())?;
        Ok((est, hold))
    }

    /// Concatenate two segments; the inverse of [`Series::split`].
    pub fn concat(&self, later: &Series) -> Result<Series, SeriesError> {
        let mut ts = self.timestamps.clone();
        ts.extend_from_slice(&later.timestamps);
        let mut vs = self.values.clone();
        vs.extend_from_slice(&later.values);
        Self::validated(ts, vs)
    }
}

/// Sizes of the estimation and holdout samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SplitSpec {
    pub n_estimation: usize,
    pub n_holdout: usize,
}

impl SplitSpec {
    pub const fn new(n_estimation: usize, n_holdout: usize) -> Self {
        Self {
            n_estimation,
            n_holdout,
        }
    }

    pub fn check(&self, total: usize) -> Result<(), SeriesError> {
        if self.n_estimation == 0 || self.n_holdout == 0 || self.n_estimation + self.n_holdout != total
        {
            return Err(SeriesError::InvalidSplit {
                estimation: self.n_estimation,
                holdout: self.n_holdout,
                total,
            });
        }
        Ok(())
    }
}

impl Default for SplitSpec {
    /// 418 estimation weeks (2000-01-07..2008-01-04) and 208 holdout weeks.
    fn default() -> Self {
        Self::new(418, 208)
    }
}

/// Linear map of `[lo, hi]` onto `[0, 1]`.
///
/// Values outside the fitted range map outside `[0, 1]`; this happens for
/// holdout prices above the estimation-sample maximum and is not an error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinMaxScaler {
    lo: f64,
    hi: f64,
}

impl MinMaxScaler {
    pub fn new(lo: f64, hi: f64) -> Result<Self, SeriesError> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(SeriesError::DegenerateScale { value: lo });
        }
        Ok(Self { lo, hi })
    }

    pub fn fit(values: &[f64]) -> Result<Self, SeriesError> {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if values.is_empty() {
            return Err(SeriesError::TooShort { min: 2, got: 0 });
        }
        Self::new(lo, hi)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn transform(&self, x: f64) -> f64 {
        (x - self.lo) / (self.hi - self.lo)
    }

    pub fn inverse(&self, z: f64) -> f64 {
        z * (self.hi - self.lo) + self.lo
    }

    pub fn transform_all(&self, xs: &[f64]) -> Vec<f64> {
        xs.iter().map(|&x| self.transform(x)).collect()
    }

    pub fn inverse_all(&self, zs: &[f64]) -> Vec<f64> {
        zs.iter().map(|&z| self.inverse(z)).collect()
    }
}

/// Fit the scaler on the estimation sample only.
pub fn fit_scaler(estimation: &Series) -> Result<MinMaxScaler, SeriesError> {
    MinMaxScaler::fit(estimation.values())
}

/// What each lag-matrix row predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetMode {
    /// The next value.
    Single,
    /// The next `H` values.
    Multi(usize),
    /// The value `h` steps ahead.
    Direct(usize),
}

impl TargetMode {
    /// Furthest step ahead read by a row.
    pub fn reach(&self) -> usize {
        match *self {
            TargetMode::Single => 1,
            TargetMode::Multi(h) | TargetMode::Direct(h) => h,
        }
    }

    pub fn n_targets(&self) -> usize {
        match *self {
            TargetMode::Multi(h) => h,
            _ => 1,
        }
    }
}

/// Supervised rows built from lagged reads of one series.
///
/// Row `r` has origin `o = origins[r]`; its inputs are `x[o + 1 - lag]` for
/// each lag in ascending order (most recent first), and its targets are read
/// at `o + 1 ..= o + reach`.
#[derive(Debug, Clone, PartialEq)]
pub struct LagMatrix {
    n_inputs: usize,
    n_targets: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
    origins: Vec<usize>,
}

impl LagMatrix {
    /// Assemble from explicit rows.
    pub fn from_rows(
        inputs: Vec<Vec<f64>>,
        targets: Vec<Vec<f64>>,
    ) -> Result<Self, SeriesError> {
        if inputs.len() != targets.len() || inputs.is_empty() {
            return Err(SeriesError::InsufficientData {
                needed: 1,
                available: inputs.len().min(targets.len()),
            });
        }
        let n_inputs = inputs[0].len();
        let n_targets = targets[0].len();
        let origins = (0..inputs.len()).collect();
        let mut flat_in = Vec::with_capacity(inputs.len() * n_inputs);
        let mut flat_t = Vec::with_capacity(targets.len() * n_targets);
        for (x, y) in inputs.iter().zip(&targets) {
            if x.len() != n_inputs || y.len() != n_targets {
                return Err(SeriesError::LengthMismatch {
                    timestamps: x.len(),
                    values: y.len(),
                });
            }
            flat_in.extend_from_slice(x);
            flat_t.extend_from_slice(y);
        }
        Ok(Self {
            n_inputs,
            n_targets,
            inputs: flat_in,
            targets: flat_t,
            origins,
        })
    }

    pub fn rows(&self) -> usize {
        self.origins.len()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_targets(&self) -> usize {
        self.n_targets
    }

    pub fn input(&self, row: usize) -> &[f64] {
        &self.inputs[row * self.n_inputs..(row + 1) * self.n_inputs]
    }

    pub fn target(&self, row: usize) -> &[f64] {
        &self.targets[row * self.n_targets..(row + 1) * self.n_targets]
    }

    pub fn origins(&self) -> &[usize] {
        &self.origins
    }

    /// Rows at the given positions, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> LagMatrix {
        let mut inputs = Vec::with_capacity(rows.len() * self.n_inputs);
        let mut targets = Vec::with_capacity(rows.len() * self.n_targets);
        let mut origins = Vec::with_capacity(rows.len());
        for &r in rows {
            inputs.extend_from_slice(self.input(r));
            targets.extend_from_slice(self.target(r));
            origins.push(self.origins[r]);
        }
        LagMatrix {
            n_inputs: self.n_inputs,
            n_targets: self.n_targets,
            inputs,
            targets,
            origins,
        }
    }
}

/// Number of rows `build_lag_matrix` yields, or `None` when there are none.
pub fn lag_row_count(len: usize, max_lag: usize, reach: usize) -> Option<usize> {
    (len + 1).checked_sub(max_lag + reach).filter(|&n| n > 0)
}

pub fn build_lag_matrix(
    values: &[f64],
    lags: &LagSet,
    mode: TargetMode,
) -> Result<LagMatrix, SeriesError> {
    let max_lag = lags.max_lag();
    let reach = mode.reach();
    let rows = lag_row_count(values.len(), max_lag, reach).ok_or(SeriesError::InsufficientData {
        needed: max_lag + reach,
        available: values.len(),
    })?;
    let n_inputs = lags.len();
    let n_targets = mode.n_targets();
    let mut inputs = Vec::with_capacity(rows * n_inputs);
    let mut targets = Vec::with_capacity(rows * n_targets);
    let mut origins = Vec::with_capacity(rows);
    for origin in max_lag - 1..max_lag - 1 + rows {
        inputs.extend(lags.iter().map(|lag| values[origin + 1 - lag]));
        match mode {
            TargetMode::Single => targets.push(values[origin + 1]),
            TargetMode::Direct(h) => targets.push(values[origin + h]),
            TargetMode::Multi(h) => targets.extend_from_slice(&values[origin + 1..=origin + h]),
        }
        origins.push(origin);
    }
    Ok(LagMatrix {
        n_inputs,
        n_targets,
        inputs,
        targets,
        origins,
    })
}

/// Lagged inputs for a forecast made at the end of `history`.
pub fn lag_inputs(history: &[f64], lags: &LagSet) -> Result<Vec<f64>, SeriesError> {
    if history.len() < lags.max_lag() {
        return Err(SeriesError::InsufficientData {
            needed: lags.max_lag(),
            available: history.len(),
        });
    }
    let end = history.len();
    Ok(lags.iter().map(|lag| history[end - lag]).collect())
}
