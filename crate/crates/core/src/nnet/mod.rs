//! Single-hidden-layer feed-forward networks.
//!
//! Hidden units are logistic, outputs are identity. All parameters live in
//! one packed vector: for each hidden unit `j` its input weights followed by
//! its bias, then for each output `k` its hidden weights followed by its
//! bias. Training is Levenberg–Marquardt ([`train_lm`]) and model size is
//! picked by blocked k-fold cross-validation ([`cross_validate`]).

mod cv;
mod lm;

pub use cv::{cross_validate, cross_validate_par, CvOutcome, CvPlan};
pub use lm::{train_lm, train_once, TrainConfig, TrainReport};

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seed::rng_for;
use crate::series::LagMatrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnetError {
    #[error("expected input of length {expected}, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("invalid network configuration: {0}")]
    InvalidConfig(String),
    #[error("training needs at least 2 rows, got {got}")]
    TooFewRows { got: usize },
    #[error("training diverged on every restart")]
    Divergence,
    #[error("malformed model text: {0}")]
    Parse(String),
    #[error("cross-validation grid is empty")]
    EmptyGrid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FnnConfig {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub n_outputs: usize,
}

impl FnnConfig {
    pub const DEFAULT_HIDDEN: usize = 15;

    pub fn new(n_inputs: usize, n_hidden: usize, n_outputs: usize) -> Result<Self, NnetError> {
        if n_inputs == 0 || n_hidden == 0 || n_outputs == 0 {
            return Err(NnetError::InvalidConfig(format!(
                "all layer sizes must be >= 1 (got {n_inputs}-{n_hidden}-{n_outputs})"
            )));
        }
        Ok(Self {
            n_inputs,
            n_hidden,
            n_outputs,
        })
    }

    pub fn n_hidden_params(&self) -> usize {
        self.n_hidden * (self.n_inputs + 1)
    }

    pub fn n_params(&self) -> usize {
        self.n_hidden_params() + self.n_outputs * (self.n_hidden + 1)
    }
}

pub(crate) fn logistic(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnnModel {
    config: FnnConfig,
    params: Vec<f64>,
}

impl FnnModel {
    pub fn zeros(config: FnnConfig) -> Self {
        Self {
            config,
            params: vec![0.0; config.n_params()],
        }
    }

    pub fn from_params(config: FnnConfig, params: Vec<f64>) -> Result<Self, NnetError> {
        if params.len() != config.n_params() {
            return Err(NnetError::Shape {
                expected: config.n_params(),
                got: params.len(),
            });
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> FnnConfig {
        self.config
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn w1_index(&self, j: usize, i: usize) -> usize {
        j * (self.config.n_inputs + 1) + i
    }

    pub fn b1_index(&self, j: usize) -> usize {
        j * (self.config.n_inputs + 1) + self.config.n_inputs
    }

    pub fn w2_index(&self, k: usize, j: usize) -> usize {
        self.config.n_hidden_params() + k * (self.config.n_hidden + 1) + j
    }

    pub fn b2_index(&self, k: usize) -> usize {
        self.config.n_hidden_params() + k * (self.config.n_hidden + 1) + self.config.n_hidden
    }

    pub(crate) fn w2(&self, k: usize, j: usize) -> f64 {
        self.params[self.w2_index(k, j)]
    }

    fn check(&self, x: &[f64]) -> Result<(), NnetError> {
        if x.len() == self.config.n_inputs {
            Ok(())
        } else {
            Err(NnetError::Shape {
                expected: self.config.n_inputs,
                got: x.len(),
            })
        }
    }

    /// Hidden activations for one input.
    pub(crate) fn hidden(&self, x: &[f64], out: &mut [f64]) {
        let stride = self.config.n_inputs + 1;
        for (j, s) in out.iter_mut().enumerate() {
            let row = &self.params[j * stride..(j + 1) * stride];
            let a = row[..stride - 1].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + row[stride - 1];
            *s = logistic(a);
        }
    }

    pub(crate) fn output_from_hidden(&self, s: &[f64], out: &mut [f64]) {
        let nh = self.config.n_hidden;
        let base = self.config.n_hidden_params();
        for (k, y) in out.iter_mut().enumerate() {
            let row = &self.params[base + k * (nh + 1)..base + (k + 1) * (nh + 1)];
            *y = row[..nh].iter().zip(s).map(|(w, v)| w * v).sum::<f64>() + row[nh];
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnetError> {
        self.check(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut s = vec![0.0; self.config.n_hidden];
        let mut y = vec![0.0; self.config.n_outputs];
        self.hidden(x, &mut s);
        self.output_from_hidden(&s, &mut y);
        y
    }

    /// Sum of squared errors over every row and output.
    pub fn sse(&self, data: &LagMatrix) -> f64 {
        (0..data.rows())
            .map(|r| {
                self.forward_unchecked(data.input(r))
                    .iter()
                    .zip(data.target(r))
                    .map(|(y, t)| (t - y).powi(2))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Jacobian of the errors `e = t − y` with respect to every parameter.
    /// Rows are grouped by sample, `n_outputs` rows each.
    pub fn jacobian(&self, batch: &[&[f64]]) -> Result<DMatrix<f64>, NnetError> {
        let FnnConfig {
            n_inputs: ni,
            n_hidden: nh,
            n_outputs: no,
        } = self.config;
        let mut jac = DMatrix::zeros(batch.len() * no, self.config.n_params());
        let mut s = vec![0.0; nh];
        for (r, x) in batch.iter().enumerate() {
            self.check(x)?;
            self.hidden(x, &mut s);
            for k in 0..no {
                let row = r * no + k;
                for j in 0..nh {
                    let back = -self.w2(k, j) * s[j] * (1.0 - s[j]);
                    for i in 0..ni {
                        jac[(row, self.w1_index(j, i))] = back * x[i];
                    }
                    jac[(row, self.b1_index(j))] = back;
                    jac[(row, self.w2_index(k, j))] = -s[j];
                }
                jac[(row, self.b2_index(k))] = -1.0;
            }
        }
        Ok(jac)
    }

    /// Dimensions header then weights, one layer row per line, each value
    /// printed with 17 significant digits.
    pub fn to_text(&self) -> String {
        let FnnConfig {
            n_inputs: ni,
            n_hidden: nh,
            n_outputs: no,
        } = self.config;
        let row = |vals: &mut dyn Iterator<Item = f64>| {
            vals.map(|v| format!("{v:.16e}")).collect::<Vec<_>>().join(" ")
        };
        let mut out = format!("fnn {ni} {nh} {no}\n");
        for j in 0..nh {
            out += &row(&mut (0..ni).map(|i| self.params[self.w1_index(j, i)]));
            out.push('\n');
        }
        out += &row(&mut (0..nh).map(|j| self.params[self.b1_index(j)]));
        out.push('\n');
        for k in 0..no {
            out += &row(&mut (0..nh).map(|j| self.w2(k, j)));
            out.push('\n');
        }
        out += &row(&mut (0..no).map(|k| self.params[self.b2_index(k)]));
        out.push('\n');
        out
    }

    pub fn from_text(text: &str) -> Result<Self, NnetError> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| NnetError::Parse("empty input".into()))?
            .split_whitespace()
            .collect();
        let dims: Vec<usize> = match header.as_slice() {
            ["fnn", a, b, c] => [a, b, c]
                .iter()
                .map(|v| v.parse().map_err(|_| NnetError::Parse(format!("bad dimension {v:?}"))))
                .collect::<Result<_, _>>()?,
            _ => return Err(NnetError::Parse("header must be `fnn n_in n_hidden n_out`".into())),
        };
        let config = FnnConfig::new(dims[0], dims[1], dims[2])?;
        let mut model = Self::zeros(config);
        let mut read_row = |len: usize| -> Result<Vec<f64>, NnetError> {
            let line = lines.next().ok_or_else(|| NnetError::Parse("truncated model".into()))?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|v| v.parse().map_err(|_| NnetError::Parse(format!("bad number {v:?}"))))
                .collect::<Result<_, _>>()?;
            if vals.len() != len {
                return Err(NnetError::Parse(format!("expected {len} values, got {}", vals.len())));
            }
            Ok(vals)
        };
        let (ni, nh, no) = (dims[0], dims[1], dims[2]);
        let w1: Vec<Vec<f64>> = (0..nh).map(|_| read_row(ni)).collect::<Result<_, _>>()?;
        let b1 = read_row(nh)?;
        let w2: Vec<Vec<f64>> = (0..no).map(|_| read_row(nh)).collect::<Result<_, _>>()?;
        let b2 = read_row(no)?;
        for j in 0..nh {
            for i in 0..ni {
                let idx = model.w1_index(j, i);
                model.params[idx] = w1[j][i];
            }
            let idx = model.b1_index(j);
            model.params[idx] = b1[j];
        }
        for k in 0..no {
            for j in 0..nh {
                let idx = model.w2_index(k, j);
                model.params[idx] = w2[k][j];
            }
            let idx = model.b2_index(k);
            model.params[idx] = b2[k];
        }
        if model.params.iter().any(|v| !v.is_finite()) {
            return Err(NnetError::Parse("non-finite weight".into()));
        }
        Ok(model)
    }
}

/// Weights uniform in ±1/√fan_in, biases zero.
pub fn init_weights(config: FnnConfig, seed: u64) -> FnnModel {
    let mut rng = rng_for(seed, &[]);
    let mut model = FnnModel::zeros(config);
    let b1 = 1.0 / (config.n_inputs as f64).sqrt();
    let b2 = 1.0 / (config.n_hidden as f64).sqrt();
    for j in 0..config.n_hidden {
        for i in 0..config.n_inputs {
            let idx = model.w1_index(j, i);
            model.params[idx] = rng.random_range(-b1..=b1);
        }
    }
    for k in 0..config.n_outputs {
        for j in 0..config.n_hidden {
            let idx = model.w2_index(k, j);
            model.params[idx] = rng.random_range(-b2..=b2);
        }
    }
    model
}
