//! Levenberg–Marquardt training.
//!
//! Each epoch solves `(JᵀJ + μI) δ = Jᵀe` for the error Jacobian `J`. The
//! normal matrix is never formed from `J` directly: with one hidden layer it
//! factors into a hidden block, a block-diagonal output block shared by every
//! output, and a coupling term, so the output block is eliminated with a
//! small Schur complement. This keeps multi-output training as cheap as
//! single-output training.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{init_weights, FnnConfig, FnnModel, NnetError};
use crate::seed::derive_seed;
use crate::series::LagMatrix;

/// Damping beyond which an epoch is abandoned.
const MU_MAX: f64 = 1e10;
/// Rejected steps allowed per epoch.
const MAX_REJECTIONS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub mu_init: f64,
    pub mu_increase: f64,
    pub mu_decrease: f64,
    pub max_epochs: usize,
    pub sse_tolerance: f64,
    pub seed: u64,
    pub n_restarts: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            mu_init: 1e-3,
            mu_increase: 10.0,
            mu_decrease: 0.1,
            max_epochs: 200,
            sse_tolerance: 1e-8,
            seed: 0,
            n_restarts: 3,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.mu_init > 0.0 && self.mu_init.is_finite()) {
            return Err(format!("mu_init must be positive, got {}", self.mu_init));
        }
        if !(self.mu_increase > 1.0) {
            return Err(format!("mu_increase must be > 1, got {}", self.mu_increase));
        }
        if !(self.mu_decrease > 0.0 && self.mu_decrease < 1.0) {
            return Err(format!("mu_decrease must be in (0, 1), got {}", self.mu_decrease));
        }
        if self.max_epochs == 0 || self.n_restarts == 0 {
            return Err("max_epochs and n_restarts must be >= 1".into());
        }
        if !(self.sse_tolerance >= 0.0) {
            return Err("sse_tolerance must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub sse: f64,
    pub epochs: usize,
    /// SSE after initialisation followed by the SSE of every accepted step.
    pub accepted_sse: Vec<f64>,
}

/// Per-epoch sufficient statistics for the normal equations.
pub(crate) struct NormalEquations {
    cfg: FnnConfig,
    /// Hidden-block Gram matrix, already weighted by `W2ᵀW2`.
    a: DMatrix<f64>,
    /// Hidden/output coupling before weighting by `W2`.
    t: DMatrix<f64>,
    /// Output-block Gram matrix shared by every output.
    d: DMatrix<f64>,
    g2: DMatrix<f64>,
    w2: DMatrix<f64>,
    grad_h: DVector<f64>,
    grad_o: DMatrix<f64>,
}

impl NormalEquations {
    pub(crate) fn new(model: &FnnModel, data: &LagMatrix) -> Self {
        let cfg = model.config();
        let (ni, nh, no) = (cfg.n_inputs, cfg.n_hidden, cfg.n_outputs);
        let stride = ni + 1;
        let ph = cfg.n_hidden_params();
        let n = data.rows();

        let w2 = DMatrix::from_fn(no, nh, |k, j| model.w2(k, j));
        let g2 = w2.tr_mul(&w2);

        // Rows of `p` are d ⊗ x̃ per sample, rows of `z` are [s; 1].
        let mut p = DMatrix::zeros(n, ph);
        let mut z = DMatrix::zeros(n, nh + 1);
        let mut e = DMatrix::zeros(n, no);
        let mut grad_h = DVector::zeros(ph);
        let mut s = vec![0.0; nh];
        let mut y = vec![0.0; no];
        for r in 0..n {
            let x = data.input(r);
            model.hidden(x, &mut s);
            model.output_from_hidden(&s, &mut y);
            for (k, (&t, &yk)) in data.target(r).iter().zip(&y).enumerate() {
                e[(r, k)] = t - yk;
            }
            for j in 0..nh {
                let dj = s[j] * (1.0 - s[j]);
                let back: f64 = (0..no).map(|k| e[(r, k)] * w2[(k, j)]).sum::<f64>() * dj;
                for i in 0..ni {
                    p[(r, j * stride + i)] = dj * x[i];
                    grad_h[j * stride + i] += back * x[i];
                }
                p[(r, j * stride + ni)] = dj;
                grad_h[j * stride + ni] += back;
                z[(r, j)] = s[j];
            }
            z[(r, nh)] = 1.0;
        }

        let mut a = p.tr_mul(&p);
        for jj in 0..nh {
            for j in 0..nh {
                let w = g2[(j, jj)];
                a.view_mut((j * stride, jj * stride), (stride, stride))
                    .scale_mut(w);
            }
        }
        Self {
            cfg,
            a,
            t: p.tr_mul(&z),
            d: z.tr_mul(&z),
            g2,
            w2,
            grad_h,
            grad_o: z.tr_mul(&e),
        }
    }

    /// Step `δ` with `θ + δ` the damped Gauss–Newton update, in packed
    /// parameter order. `None` when the damped system is not positive
    /// definite in floating point.
    pub(crate) fn solve(&self, mu: f64) -> Option<Vec<f64>> {
        let (ni, nh, no) = (self.cfg.n_inputs, self.cfg.n_hidden, self.cfg.n_outputs);
        let stride = ni + 1;
        let ph = self.cfg.n_hidden_params();

        let mut dmu = self.d.clone();
        for i in 0..=nh {
            dmu[(i, i)] += mu;
        }
        let dinv = dmu.cholesky()?.inverse();

        // Schur complement of the output block.
        let td = &self.t * &dinv;
        let coupling = &td * self.t.transpose();
        let mut s = self.a.clone();
        for jj in 0..nh {
            for j in 0..nh {
                let w = self.g2[(j, jj)];
                let mut blk = s.view_mut((j * stride, jj * stride), (stride, stride));
                blk -= coupling.view((j * stride, jj * stride), (stride, stride)) * w;
            }
        }
        for i in 0..ph {
            s[(i, i)] += mu;
        }

        let q = &dinv * &self.grad_o; // (nh+1) × no
        let r = &self.w2.transpose() * q.transpose(); // nh × (nh+1)
        let mut rhs = self.grad_h.clone();
        for j in 0..nh {
            for i in 0..stride {
                let row = j * stride + i;
                rhs[row] -= self.t.row(row).dot(&r.row(j));
            }
        }
        let dh = s.cholesky()?.solve(&rhs);

        let mut v = DMatrix::zeros(nh, nh + 1);
        for j in 0..nh {
            for i in 0..stride {
                let row = j * stride + i;
                let mut vr = v.row_mut(j);
                vr += self.t.row(row) * dh[row];
            }
        }
        let wv = &self.w2 * &v; // no × (nh+1)
        let back = &dinv * wv.transpose(); // (nh+1) × no

        let mut step = Vec::with_capacity(self.cfg.n_params());
        step.extend(dh.iter().copied());
        for k in 0..no {
            step.extend((0..=nh).map(|m| q[(m, k)] - back[(m, k)]));
        }
        Some(step)
    }
}

/// One training run from a seeded initialisation.
pub fn train_once(
    data: &LagMatrix,
    config: FnnConfig,
    tc: &TrainConfig,
    seed: u64,
) -> Result<(FnnModel, TrainReport), NnetError> {
    let mut model = init_weights(config, seed);
    let mut sse = model.sse(data);
    if !sse.is_finite() {
        return Err(NnetError::Divergence);
    }
    let mut mu = tc.mu_init;
    let mut accepted_sse = vec![sse];
    let mut epochs = 0;
    while epochs < tc.max_epochs && sse > tc.sse_tolerance {
        epochs += 1;
        let ne = NormalEquations::new(&model, data);
        let mut accepted = false;
        for _ in 0..MAX_REJECTIONS {
            if let Some(step) = ne.solve(mu) {
                let mut trial = model.clone();
                for (p, d) in trial.params_mut().iter_mut().zip(&step) {
                    *p += d;
                }
                let trial_sse = trial.sse(data);
                if trial_sse.is_finite() && trial_sse < sse {
                    model = trial;
                    sse = trial_sse;
                    accepted_sse.push(sse);
                    mu *= tc.mu_decrease;
                    accepted = true;
                    break;
                }
            }
            mu *= tc.mu_increase;
            if mu > MU_MAX {
                break;
            }
        }
        if !accepted {
            break;
        }
    }
    Ok((
        model,
        TrainReport {
            sse,
            epochs,
            accepted_sse,
        },
    ))
}

/// Best of `tc.n_restarts` runs by training SSE. Restart `r` is seeded from
/// `tc.seed` and `r`.
pub fn train_lm(
    data: &LagMatrix,
    config: FnnConfig,
    tc: &TrainConfig,
) -> Result<(FnnModel, TrainReport), NnetError> {
    if data.rows() < 2 {
        return Err(NnetError::TooFewRows { got: data.rows() });
    }
    if data.n_inputs() != config.n_inputs || data.n_targets() != config.n_outputs {
        return Err(NnetError::InvalidConfig(format!(
            "data is {}-in/{}-out but network is {}-in/{}-out",
            data.n_inputs(),
            data.n_targets(),
            config.n_inputs,
            config.n_outputs
        )));
    }
    if data.rows() * 10 < config.n_params() {
        warn!(
            "training {} parameters on only {} rows",
            config.n_params(),
            data.rows()
        );
    }
    let mut best: Option<(FnnModel, TrainReport)> = None;
    for r in 0..tc.n_restarts {
        match train_once(data, config, tc, derive_seed(tc.seed, &[r as u64])) {
            Ok(run) => {
                if best.as_ref().is_none_or(|(_, b)| run.1.sse < b.sse) {
                    best = Some(run);
                }
            }
            Err(e) => warn!("restart {r} failed: {e}"),
        }
    }
    best.ok_or(NnetError::Divergence)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use rand::Rng;

    fn matrix(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> LagMatrix {
        LagMatrix::from_rows(inputs, targets).unwrap()
    }

    fn random_problem(seed: u64, n: usize, ni: usize, no: usize) -> LagMatrix {
        let mut rng = rng_for(seed, &[]);
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..ni).map(|_| rng.random::<f64>()).collect()).collect();
        let targets = inputs
            .iter()
            .map(|x| (0..no).map(|k| (x.iter().sum::<f64>() * (k + 1) as f64).sin()).collect())
            .collect();
        matrix(inputs, targets)
    }

    #[test]
    fn structured_step_matches_dense_solve() {
        for (seed, ni, nh, no) in [(1u64, 3, 4, 1), (2, 2, 5, 3), (3, 1, 1, 4), (4, 4, 3, 2)] {
            let data = random_problem(seed, 25, ni, no);
            let model = init_weights(FnnConfig::new(ni, nh, no).unwrap(), seed);
            let rows: Vec<&[f64]> = (0..data.rows()).map(|r| data.input(r)).collect();
            let jac = model.jacobian(&rows).unwrap();
            let e = DVector::from_iterator(
                data.rows() * no,
                (0..data.rows()).flat_map(|r| {
                    let y = model.forward(data.input(r)).unwrap();
                    data.target(r).iter().zip(y).map(|(t, y)| t - y).collect::<Vec<_>>()
                }),
            );
            for mu in [1e-3, 0.5, 10.0] {
                let mut lhs = jac.tr_mul(&jac);
                for i in 0..lhs.nrows() {
                    lhs[(i, i)] += mu;
                }
                // θ_new = θ − (JᵀJ + μI)⁻¹ Jᵀe
                let dense = -lhs.cholesky().unwrap().solve(&jac.tr_mul(&e));
                let fast = NormalEquations::new(&model, &data).solve(mu).unwrap();
                for (a, b) in dense.iter().zip(&fast) {
                    assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn fits_noiseless_linear_target() {
        let inputs: Vec<Vec<f64>> = (0..100).map(|i| vec![i as f64 / 99.0]).collect();
        let targets = inputs.iter().map(|x| vec![0.3 * x[0] + 0.1]).collect();
        let data = matrix(inputs, targets);
        let (_, report) = train_lm(&data, FnnConfig::new(1, 15, 1).unwrap(), &TrainConfig::default()).unwrap();
        assert!(report.sse <= 1e-4, "sse {}", report.sse);
    }

    #[test]
    fn fits_repeated_single_row() {
        let data = matrix(vec![vec![0.2, 0.7]; 6], vec![vec![0.9]; 6]);
        let (model, report) = train_lm(&data, FnnConfig::new(2, 3, 1).unwrap(), &TrainConfig::default()).unwrap();
        assert!(report.sse <= 1e-10, "sse {}", report.sse);
        assert!((model.forward(&[0.2, 0.7]).unwrap()[0] - 0.9).abs() <= 1e-5);
    }

    #[test]
    fn accepted_sse_strictly_decreases() {
        for seed in 0..6u64 {
            let data = random_problem(seed, 40, 2, 1 + (seed % 3) as usize);
            let tc = TrainConfig {
                seed,
                max_epochs: 60,
                ..Default::default()
            };
            let cfg = FnnConfig::new(2, 6, data.n_targets()).unwrap();
            let (_, report) = train_once(&data, cfg, &tc, seed).unwrap();
            assert!(report.accepted_sse.windows(2).all(|w| w[1] < w[0]));
        }
    }

    #[test]
    fn beats_constant_predictor_on_smooth_target() {
        let inputs: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64 / 49.0]).collect();
        let targets: Vec<Vec<f64>> = inputs.iter().map(|x| vec![(4.0 * x[0]).sin() + x[0] * x[0]]).collect();
        let mean = targets.iter().map(|t| t[0]).sum::<f64>() / 50.0;
        let baseline: f64 = targets.iter().map(|t| (t[0] - mean).powi(2)).sum();
        let data = matrix(inputs, targets);
        let (_, report) = train_lm(&data, FnnConfig::new(1, 15, 1).unwrap(), &TrainConfig::default()).unwrap();
        assert!(report.sse < baseline);
    }

    #[test]
    fn restarts_are_deterministic() {
        let data = random_problem(5, 30, 3, 2);
        let cfg = FnnConfig::new(3, 4, 2).unwrap();
        let tc = TrainConfig {
            seed: 77,
            max_epochs: 30,
            ..Default::default()
        };
        let a = train_lm(&data, cfg, &tc).unwrap();
        let b = train_lm(&data, cfg, &tc).unwrap();
        assert_eq!(a.0, b.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let one = matrix(vec![vec![1.0]], vec![vec![1.0]]);
        assert_eq!(
            train_lm(&one, FnnConfig::new(1, 2, 1).unwrap(), &TrainConfig::default()),
            Err(NnetError::TooFewRows { got: 1 })
        );
        let data = random_problem(1, 10, 2, 1);
        assert!(train_lm(&data, FnnConfig::new(3, 2, 1).unwrap(), &TrainConfig::default()).is_err());
    }
}
