//! Multi-step-ahead time-series forecasting.
//!
//! The crate is organised bottom-up:
//!
//! - [`series`]: the price series container, estimation/holdout split, min-max
//!   scaling and lag-matrix construction.
//! - [`emd`]: empirical mode decomposition with cubic-spline envelopes and a
//!   slope-based boundary extension for the end effect.
//! - [`nnet`]: single-hidden-layer feed-forward networks trained with
//!   Levenberg–Marquardt, plus blocked k-fold model selection.
//! - [`strategies`]: iterated, direct and MIMO multi-step strategies over any
//!   [`strategies::Regressor`].
//! - [`feature_select`]: lag selection by partial mutual information or the
//!   Delta test, driven by a forward-backward search.
//! - [`metrics`] and [`spa`]: SMAPE, MASE, directional symmetry and the
//!   superior predictive ability test with the stationary bootstrap.
//! - [`pipeline`]: the model zoo, the EMD ensemble forecaster and the
//!   experiment runner that produces accuracy, SPA and timing tables.

pub mod emd;
pub mod feature_select;
pub mod metrics;
pub mod nnet;
pub mod pipeline;
pub mod seed;
pub mod series;
pub mod spa;
pub mod strategies;
