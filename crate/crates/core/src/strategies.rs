//! Iterated, direct and MIMO multi-step strategies.
//!
//! The strategies only need something that fits a [`LagMatrix`] and
//! predicts from an input vector, so they are generic over [`Regressor`].
//! Two regressors ship here: a single-hidden-layer network chosen by
//! cross-validation and an exact linear least-squares fit used as an oracle.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::feature_select::LagSet;
use crate::nnet::{cross_validate, train_lm, CvPlan, FnnConfig, FnnModel, NnetError, TrainConfig};
use crate::seed::derive_seed;
use crate::series::{build_lag_matrix, lag_inputs, LagMatrix, SeriesError, TargetMode};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Nnet(#[from] NnetError),
    #[error("regressor supports at most {max} outputs, MIMO needs {needed}")]
    Capability { needed: usize, max: usize },
    #[error("direct strategy needs one lag set per horizon step ({expected}), got {got}")]
    LagsPerHorizon { expected: usize, got: usize },
    #[error("horizon must be >= 1")]
    ZeroHorizon,
    #[error("model fit failed: {0}")]
    Fit(String),
}

pub trait Predictor: Send + Sync {
    fn predict(&self, x: &[f64]) -> Vec<f64>;
}

pub trait Regressor: Sync {
    fn fit(&self, data: &LagMatrix, seed: u64) -> Result<Box<dyn Predictor>, StrategyError>;

    /// Largest target width the regressor can fit jointly.
    fn max_outputs(&self) -> usize {
        usize::MAX
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Iterated,
    Direct,
    Mimo,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::Iterated, StrategyKind::Direct, StrategyKind::Mimo];

    pub fn label(self) -> &'static str {
        match self {
            StrategyKind::Iterated => "iterated",
            StrategyKind::Direct => "direct",
            StrategyKind::Mimo => "mimo",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|k| k.label().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown strategy {s:?} (expected iterated, direct or mimo)"))
    }
}

/// A trained strategy: one model for iterated and MIMO, `H` for direct.
pub struct StrategyModel {
    kind: StrategyKind,
    models: Vec<Box<dyn Predictor>>,
    lags: Vec<LagSet>,
    horizon: usize,
}

impl std::fmt::Debug for StrategyModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StrategyModel")
            .field("kind", &self.kind)
            .field("models", &self.models.len())
            .field("lags", &self.lags)
            .field("horizon", &self.horizon)
            .finish()
    }
}

impl StrategyModel {
    /// Wrap already-trained predictors.
    pub fn from_parts(
        kind: StrategyKind,
        models: Vec<Box<dyn Predictor>>,
        lags: Vec<LagSet>,
        horizon: usize,
    ) -> Result<Self, StrategyError> {
        if horizon == 0 {
            return Err(StrategyError::ZeroHorizon);
        }
        let expected = if kind == StrategyKind::Direct { horizon } else { 1 };
        if models.len() != expected || lags.len() != expected {
            return Err(StrategyError::LagsPerHorizon {
                expected,
                got: models.len().min(lags.len()),
            });
        }
        Ok(Self {
            kind,
            models,
            lags,
            horizon,
        })
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_models(&self) -> usize {
        self.models.len()
    }

    pub fn lags(&self) -> &[LagSet] {
        &self.lags
    }

    /// Observations a forecast needs from the end of the history.
    pub fn max_lag(&self) -> usize {
        self.lags.iter().map(LagSet::max_lag).max().unwrap_or(1)
    }

    /// `horizon` values following the end of `history`.
    pub fn forecast(&self, history: &[f64]) -> Result<Vec<f64>, StrategyError> {
        match self.kind {
            StrategyKind::Iterated => forecast_iterated(self, history, self.horizon),
            StrategyKind::Direct => forecast_direct(self, history),
            StrategyKind::Mimo => forecast_mimo(self, history),
        }
    }
}

fn check_horizon(h: usize) -> Result<(), StrategyError> {
    if h == 0 {
        Err(StrategyError::ZeroHorizon)
    } else {
        Ok(())
    }
}

/// One-step model applied recursively.
pub fn train_iterated(
    values: &[f64],
    lags: &LagSet,
    regressor: &dyn Regressor,
    seed: u64,
) -> Result<StrategyModel, StrategyError> {
    train_iterated_h(values, lags, 1, regressor, seed)
}

fn train_iterated_h(
    values: &[f64],
    lags: &LagSet,
    horizon: usize,
    regressor: &dyn Regressor,
    seed: u64,
) -> Result<StrategyModel, StrategyError> {
    check_horizon(horizon)?;
    let data = build_lag_matrix(values, lags, TargetMode::Single)?;
    let model = regressor.fit(&data, derive_seed(seed, &[1]))?;
    StrategyModel::from_parts(StrategyKind::Iterated, vec![model], vec![lags.clone()], horizon)
}

/// Feed each prediction back as the newest observation.
pub fn forecast_iterated(model: &StrategyModel, history: &[f64], horizon: usize) -> Result<Vec<f64>, StrategyError> {
    let lags = &model.lags[0];
    let max_lag = lags.max_lag();
    if history.len() < max_lag {
        return Err(SeriesError::InsufficientData {
            needed: max_lag,
            available: history.len(),
        }
        .into());
    }
    let mut window = history[history.len() - max_lag..].to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let x = lag_inputs(&window, lags)?;
        let y = model.models[0].predict(&x)[0];
        out.push(y);
        window.remove(0);
        window.push(y);
    }
    Ok(out)
}

/// One model per step `h`, each trained on targets `h` steps ahead.
pub fn train_direct(
    values: &[f64],
    lags_per_h: &[LagSet],
    horizon: usize,
    regressor: &dyn Regressor,
    seed: u64,
) -> Result<StrategyModel, StrategyError> {
    check_horizon(horizon)?;
    if lags_per_h.len() != horizon {
        return Err(StrategyError::LagsPerHorizon {
            expected: horizon,
            got: lags_per_h.len(),
        });
    }
    let models = lags_per_h
        .iter()
        .enumerate()
        .map(|(i, lags)| {
            let h = i + 1;
            let data = build_lag_matrix(values, lags, TargetMode::Direct(h))?;
            regressor.fit(&data, derive_seed(seed, &[h as u64]))
        })
        .collect::<Result<Vec<_>, _>>()?;
    StrategyModel::from_parts(StrategyKind::Direct, models, lags_per_h.to_vec(), horizon)
}

/// Every step predicted from observed values only.
pub fn forecast_direct(model: &StrategyModel, history: &[f64]) -> Result<Vec<f64>, StrategyError> {
    model
        .models
        .iter()
        .zip(&model.lags)
        .map(|(m, lags)| Ok(m.predict(&lag_inputs(history, lags)?)[0]))
        .collect()
}

/// A single model with `horizon` joint outputs.
pub fn train_mimo(
    values: &[f64],
    lags: &LagSet,
    horizon: usize,
    regressor: &dyn Regressor,
    seed: u64,
) -> Result<StrategyModel, StrategyError> {
    check_horizon(horizon)?;
    if regressor.max_outputs() < horizon {
        return Err(StrategyError::Capability {
            needed: horizon,
            max: regressor.max_outputs(),
        });
    }
    let data = build_lag_matrix(values, lags, TargetMode::Multi(horizon))?;
    let model = regressor.fit(&data, derive_seed(seed, &[1]))?;
    StrategyModel::from_parts(StrategyKind::Mimo, vec![model], vec![lags.clone()], horizon)
}

pub fn forecast_mimo(model: &StrategyModel, history: &[f64]) -> Result<Vec<f64>, StrategyError> {
    let x = lag_inputs(history, &model.lags[0])?;
    let mut y = model.models[0].predict(&x);
    y.truncate(model.horizon);
    Ok(y)
}

/// Train `kind` with `lags[0]` for iterated/MIMO or one set per step for
/// direct.
pub fn train_strategy(
    kind: StrategyKind,
    values: &[f64],
    lags: &[LagSet],
    horizon: usize,
    regressor: &dyn Regressor,
    seed: u64,
) -> Result<StrategyModel, StrategyError> {
    let first = lags.first().ok_or(StrategyError::LagsPerHorizon {
        expected: 1,
        got: 0,
    })?;
    match kind {
        StrategyKind::Iterated => train_iterated_h(values, first, horizon, regressor, seed),
        StrategyKind::Direct => train_direct(values, lags, horizon, regressor, seed),
        StrategyKind::Mimo => train_mimo(values, first, horizon, regressor, seed),
    }
}

/// Forecasts from a run of origins. Origin `o` means `values[..=o]` is
/// observed and the forecast covers `o+1 ..= o+H`.
#[derive(Debug, Clone, PartialEq)]
pub struct HorizonForecastSet {
    pub origins: Vec<usize>,
    pub forecasts: Vec<Vec<f64>>,
    pub horizon: usize,
}

impl HorizonForecastSet {
    /// Prediction at lead `lead` (1-based) from each origin.
    pub fn at_lead(&self, lead: usize) -> Vec<f64> {
        self.forecasts.iter().map(|f| f[lead - 1]).collect()
    }
}

pub fn rolling_forecasts(
    model: &StrategyModel,
    values: &[f64],
    origins: &[usize],
) -> Result<HorizonForecastSet, StrategyError> {
    let forecasts = origins
        .iter()
        .map(|&o| model.forecast(&values[..=o]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(HorizonForecastSet {
        origins: origins.to_vec(),
        forecasts,
        horizon: model.horizon,
    })
}

/// Exact least squares with an intercept, one column of coefficients per
/// output.
#[derive(Debug, Clone, Copy, Default)]
pub struct LinearRegressor;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearPredictor {
    /// `n_outputs × (n_inputs + 1)`; the last column is the intercept.
    pub coefficients: DMatrix<f64>,
}

impl Predictor for LinearPredictor {
    fn predict(&self, x: &[f64]) -> Vec<f64> {
        let ni = x.len();
        self.coefficients
            .row_iter()
            .map(|row| row.iter().take(ni).zip(x).map(|(c, v)| c * v).sum::<f64>() + row[ni])
            .collect()
    }
}

impl Regressor for LinearRegressor {
    fn fit(&self, data: &LagMatrix, _seed: u64) -> Result<Box<dyn Predictor>, StrategyError> {
        let (n, ni, no) = (data.rows(), data.n_inputs(), data.n_targets());
        let x = DMatrix::from_fn(n, ni + 1, |r, c| if c < ni { data.input(r)[c] } else { 1.0 });
        let y = DMatrix::from_fn(n, no, |r, k| data.target(r)[k]);
        let svd = x.svd(true, true);
        let beta = svd
            .solve(&y, 1e-12)
            .map_err(|e| StrategyError::Fit(e.to_string()))?;
        Ok(Box::new(LinearPredictor {
            coefficients: beta.transpose(),
        }))
    }
}

/// Network size picked by cross-validation, then retrained on all rows.
#[derive(Debug, Clone, PartialEq)]
pub struct FnnRegressor {
    pub hidden_grid: Vec<usize>,
    pub train: TrainConfig,
    pub folds: usize,
}

impl Default for FnnRegressor {
    fn default() -> Self {
        Self {
            hidden_grid: vec![5, 10, 15, 20],
            train: TrainConfig::default(),
            folds: CvPlan::DEFAULT_FOLDS,
        }
    }
}

impl FnnRegressor {
    pub fn fixed(n_hidden: usize, train: TrainConfig) -> Self {
        Self {
            hidden_grid: vec![n_hidden],
            train,
            folds: CvPlan::DEFAULT_FOLDS,
        }
    }
}

pub struct FnnPredictor(pub FnnModel);

impl Predictor for FnnPredictor {
    fn predict(&self, x: &[f64]) -> Vec<f64> {
        self.0.forward_unchecked(x)
    }
}

impl Regressor for FnnRegressor {
    fn fit(&self, data: &LagMatrix, seed: u64) -> Result<Box<dyn Predictor>, StrategyError> {
        let grid = self
            .hidden_grid
            .iter()
            .map(|&h| FnnConfig::new(data.n_inputs(), h, data.n_targets()))
            .collect::<Result<Vec<_>, _>>()?;
        let tc = TrainConfig { seed, ..self.train };
        let chosen = cross_validate(data, &grid, &tc, &CvPlan::blocked(data.rows(), self.folds))?;
        let (model, _) = train_lm(data, chosen.selected, &tc)?;
        Ok(Box::new(FnnPredictor(model)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::{Arc, Mutex};

    /// Predicts the most recent input for every output.
    struct Persistence(usize);

    impl Predictor for Persistence {
        fn predict(&self, x: &[f64]) -> Vec<f64> {
            vec![x[0]; self.0]
        }
    }

    struct PersistenceRegressor;

    impl Regressor for PersistenceRegressor {
        fn fit(&self, data: &LagMatrix, _: u64) -> Result<Box<dyn Predictor>, StrategyError> {
            Ok(Box::new(Persistence(data.n_targets())))
        }
    }

    struct SingleOutputOnly;

    impl Regressor for SingleOutputOnly {
        fn fit(&self, _: &LagMatrix, _: u64) -> Result<Box<dyn Predictor>, StrategyError> {
            Ok(Box::new(Persistence(1)))
        }

        fn max_outputs(&self) -> usize {
            1
        }
    }

    fn ar1(n: usize, phi: f64) -> Vec<f64> {
        let mut x = vec![1.0];
        for _ in 1..n {
            x.push(phi * x.last().unwrap());
        }
        x
    }

    fn coefficient(model: &StrategyModel) -> f64 {
        // Probe the linear model: f(1) - f(0).
        model.models[0].predict(&[1.0])[0] - model.models[0].predict(&[0.0])[0]
    }

    #[test]
    fn constant_series_predicts_constant() {
        let x = vec![4.2; 40];
        let lags = LagSet::new(vec![1, 3]).unwrap();
        let m = train_iterated(&x, &lags, &LinearRegressor, 0).unwrap();
        let f = forecast_iterated(&m, &x, 5).unwrap();
        assert!(f.iter().all(|v| (v - 4.2).abs() < 1e-10));
    }

    #[test]
    fn ar1_coefficient_recovered() {
        let x = ar1(60, 0.8);
        let m = train_iterated(&x, &LagSet::contiguous(1), &LinearRegressor, 0).unwrap();
        assert!((coefficient(&m) - 0.8).abs() <= 1e-10);
        let f = forecast_iterated(&m, &[2.0, 1.0], 3).unwrap();
        for (a, b) in f.iter().zip([0.8, 0.64, 0.512]) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn lag_matrix_rows_for_estimation_sample() {
        let x: Vec<f64> = (0..418).map(|v| (v as f64 * 0.1).sin()).collect();
        let m = build_lag_matrix(&x, &LagSet::contiguous(36), TargetMode::Single).unwrap();
        assert_eq!(m.rows(), 382);
    }

    #[test]
    fn identity_model_is_a_fixed_point() {
        let m = train_iterated(&[1.0, 3.0, 7.0], &LagSet::contiguous(1), &PersistenceRegressor, 0).unwrap();
        assert_eq!(forecast_iterated(&m, &[5.0, 7.0], 4).unwrap(), vec![7.0; 4]);
    }

    #[test]
    fn iterated_feeds_back_predictions() {
        // Observed values are >= 0 and the recorder's own outputs are < 0,
        // so each call logs how many fed-back predictions it received.
        struct Recorder(Arc<Mutex<Vec<usize>>>);
        impl Predictor for Recorder {
            fn predict(&self, x: &[f64]) -> Vec<f64> {
                self.0.lock().unwrap().push(x.iter().filter(|v| **v < 0.0).count());
                vec![-1.0]
            }
        }
        let d = 5;
        let log = Arc::new(Mutex::new(Vec::new()));
        let rec = Box::new(Recorder(Arc::clone(&log)));
        let model =
            StrategyModel::from_parts(StrategyKind::Iterated, vec![rec], vec![LagSet::contiguous(d)], 8).unwrap();
        let history: Vec<f64> = (0..10).map(f64::from).collect();
        forecast_iterated(&model, &history, 8).unwrap();
        let expected: Vec<usize> = (1..=8).map(|h| (h - 1).min(d)).collect();
        assert_eq!(*log.lock().unwrap(), expected);
    }

    #[test]
    fn direct_on_linear_trend() {
        let x: Vec<f64> = (0..=100).map(f64::from).collect();
        let lags = vec![LagSet::contiguous(1); 3];
        let m = train_direct(&x, &lags, 3, &LinearRegressor, 0).unwrap();
        assert_eq!(m.n_models(), 3);
        let f = forecast_direct(&m, &x).unwrap();
        for (a, b) in f.iter().zip([101.0, 102.0, 103.0]) {
            assert!((a - b).abs() <= 1e-8);
        }
        let m24 = train_direct(&x, &vec![LagSet::contiguous(2); 24], 24, &LinearRegressor, 0).unwrap();
        assert_eq!(m24.n_models(), 24);
    }

    #[test]
    fn direct_and_mimo_ignore_old_history() {
        let x: Vec<f64> = (0..80).map(|t| (t as f64 * 0.3).sin() + 0.01 * t as f64).collect();
        let lags = LagSet::new(vec![1, 4]).unwrap();
        let direct = train_direct(&x, &vec![lags.clone(); 4], 4, &LinearRegressor, 0).unwrap();
        let mimo = train_mimo(&x, &lags, 4, &LinearRegressor, 0).unwrap();
        let mut altered = x.clone();
        for v in altered.iter_mut().take(80 - 4) {
            *v = -99.0;
        }
        assert_eq!(forecast_direct(&direct, &x).unwrap(), forecast_direct(&direct, &altered).unwrap());
        assert_eq!(forecast_mimo(&mimo, &x).unwrap(), forecast_mimo(&mimo, &altered).unwrap());
    }

    #[test]
    fn strategies_agree_on_noiseless_ar() {
        // y_t = 0.6 y_{t-1} + 0.3 y_{t-2} + 0.5
        let mut y = vec![3.0, -1.0];
        for t in 2..200 {
            y.push(0.6 * y[t - 1] + 0.3 * y[t - 2] + 0.5);
        }
        let lags = LagSet::contiguous(2);
        let h = 6;
        let hist = &y[..150];
        let mut truth = hist.to_vec();
        for _ in 0..h {
            let n = truth.len();
            truth.push(0.6 * truth[n - 1] + 0.3 * truth[n - 2] + 0.5);
        }
        let truth = &truth[150..];
        for kind in StrategyKind::ALL {
            let m = train_strategy(kind, hist, &vec![lags.clone(); h], h, &LinearRegressor, 3).unwrap();
            let f = m.forecast(hist).unwrap();
            for (a, b) in f.iter().zip(truth) {
                assert!((a - b).abs() <= 1e-6, "{kind:?}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn mimo_equals_direct_for_linear_oracle() {
        let x: Vec<f64> = (0..120).map(|t| (t as f64 * 0.21).sin() * 2.0 + (t as f64 * 0.05).cos()).collect();
        // Two sinusoids follow an exact order-4 linear recursion.
        let lags = LagSet::contiguous(4);
        let direct = train_direct(&x, &vec![lags.clone(); 4], 4, &LinearRegressor, 0).unwrap();
        let mimo = train_mimo(&x, &lags, 4, &LinearRegressor, 0).unwrap();
        let (a, b) = (forecast_direct(&direct, &x).unwrap(), forecast_mimo(&mimo, &x).unwrap());
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() <= 1e-9);
        }
        for h in [4, 8, 12, 16, 20, 24] {
            let m = train_mimo(&x, &lags, h, &LinearRegressor, 0).unwrap();
            assert_eq!(forecast_mimo(&m, &x).unwrap().len(), h);
        }
    }

    #[test]
    fn mimo_requires_multi_output_support() {
        let x: Vec<f64> = (0..30).map(f64::from).collect();
        let err = train_mimo(&x, &LagSet::contiguous(1), 3, &SingleOutputOnly, 0).unwrap_err();
        assert_eq!(err, StrategyError::Capability { needed: 3, max: 1 });
    }

    #[test]
    fn unit_horizon_strategies_identical_with_fnn() {
        let x: Vec<f64> = (0..90).map(|t| 0.5 + 0.4 * (t as f64 * 0.4).sin()).collect();
        let reg = FnnRegressor::fixed(
            4,
            TrainConfig {
                max_epochs: 15,
                n_restarts: 1,
                ..Default::default()
            },
        );
        let lags = LagSet::new(vec![1, 2]).unwrap();
        let forecasts: Vec<Vec<f64>> = StrategyKind::ALL
            .iter()
            .map(|&k| train_strategy(k, &x, &[lags.clone()], 1, &reg, 42).unwrap().forecast(&x).unwrap())
            .collect();
        assert_eq!(forecasts[0], forecasts[1]);
        assert_eq!(forecasts[0], forecasts[2]);
    }

    #[test]
    fn rolling_forecast_origins() {
        let x: Vec<f64> = (0..20).map(f64::from).collect();
        let m = train_mimo(&x, &LagSet::contiguous(1), 2, &PersistenceRegressor, 0).unwrap();
        let set = rolling_forecasts(&m, &x, &[5, 6, 7]).unwrap();
        assert_eq!(set.forecasts, vec![vec![5.0, 5.0], vec![6.0, 6.0], vec![7.0, 7.0]]);
        assert_eq!(set.at_lead(2), vec![5.0, 6.0, 7.0]);
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("MIMO".parse::<StrategyKind>().unwrap(), StrategyKind::Mimo);
        assert!("rectify".parse::<StrategyKind>().is_err());
    }
}
