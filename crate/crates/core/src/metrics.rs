//! Point-forecast accuracy: SMAPE, MASE and directional symmetry.
//!
//! All three work on an [`EvaluationFrame`] holding holdout actuals, the
//! predictions at one lead time, the actual value preceding each target, and
//! the estimation sample used to scale MASE.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("frame columns differ in length")]
    LengthMismatch,
    #[error("frame is empty")]
    Empty,
    #[error("non-finite value in {column}")]
    NonFinite { column: &'static str },
    #[error("SMAPE is undefined at row {row}: actual + predicted = 0")]
    UndefinedSmape { row: usize },
    #[error("MASE scale is zero: estimation sample is constant")]
    ZeroScale,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationFrame {
    actual: Vec<f64>,
    predicted: Vec<f64>,
    prev_actual: Vec<f64>,
    estimation: Vec<f64>,
}

impl EvaluationFrame {
    pub fn new(
        actual: Vec<f64>,
        predicted: Vec<f64>,
        prev_actual: Vec<f64>,
        estimation: Vec<f64>,
    ) -> Result<Self, MetricError> {
        if actual.is_empty() {
            return Err(MetricError::Empty);
        }
        if predicted.len() != actual.len() || prev_actual.len() != actual.len() {
            return Err(MetricError::LengthMismatch);
        }
        for (column, v) in [
            ("actual", &actual),
            ("predicted", &predicted),
            ("prev_actual", &prev_actual),
            ("estimation", &estimation),
        ] {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(MetricError::NonFinite { column });
            }
        }
        Ok(Self {
            actual,
            predicted,
            prev_actual,
            estimation,
        })
    }

    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }

    pub fn actual(&self) -> &[f64] {
        &self.actual
    }

    pub fn predicted(&self) -> &[f64] {
        &self.predicted
    }

    pub fn prev_actual(&self) -> &[f64] {
        &self.prev_actual
    }

    pub fn estimation(&self) -> &[f64] {
        &self.estimation
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmapeForm {
    /// |a − p| / (a + p), averaged and times 100.
    #[default]
    Plain,
    /// 2|a − p| / (|a| + |p|), averaged and times 100.
    Conventional,
}

/// Per-row SMAPE terms (already times 100).
pub fn smape_terms(frame: &EvaluationFrame, form: SmapeForm) -> Result<Vec<f64>, MetricError> {
    frame
        .actual
        .iter()
        .zip(&frame.predicted)
        .enumerate()
        .map(|(row, (&a, &p))| {
            let (num, den) = match form {
                SmapeForm::Plain => ((a - p).abs(), a + p),
                SmapeForm::Conventional => (2.0 * (a - p).abs(), a.abs() + p.abs()),
            };
            if den == 0.0 {
                // 0/0 at a perfect zero forecast is still undefined.
                Err(MetricError::UndefinedSmape { row })
            } else {
                Ok(num / den * 100.0)
            }
        })
        .collect()
}

pub fn smape(frame: &EvaluationFrame) -> Result<f64, MetricError> {
    smape_with(frame, SmapeForm::Plain)
}

pub fn smape_with(frame: &EvaluationFrame, form: SmapeForm) -> Result<f64, MetricError> {
    Ok(mean(&smape_terms(frame, form)?))
}

/// In-sample one-step naive mean absolute difference.
pub fn naive_scale(estimation: &[f64]) -> Result<f64, MetricError> {
    if estimation.len() < 2 {
        return Err(MetricError::ZeroScale);
    }
    let total: f64 = estimation.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    let scale = total / (estimation.len() - 1) as f64;
    if scale > 0.0 {
        Ok(scale)
    } else {
        Err(MetricError::ZeroScale)
    }
}

/// Per-row scaled absolute errors.
pub fn mase_terms(frame: &EvaluationFrame) -> Result<Vec<f64>, MetricError> {
    let scale = naive_scale(&frame.estimation)?;
    Ok(frame
        .actual
        .iter()
        .zip(&frame.predicted)
        .map(|(a, p)| (a - p).abs() / scale)
        .collect())
}

pub fn mase(frame: &EvaluationFrame) -> Result<f64, MetricError> {
    Ok(mean(&mase_terms(frame)?))
}

/// Per-row direction hits: 1 when the predicted and realised changes from
/// the previous actual do not disagree in sign (a zero product counts).
pub fn ds_hits(frame: &EvaluationFrame) -> Vec<f64> {
    frame
        .actual
        .iter()
        .zip(&frame.predicted)
        .zip(&frame.prev_actual)
        .map(|((a, p), prev)| f64::from(u8::from((a - prev) * (p - prev) >= 0.0)))
        .collect()
}

pub fn ds(frame: &EvaluationFrame) -> f64 {
    mean(&ds_hits(frame))
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use proptest::prelude::*;
    use rand::Rng;

    fn frame(a: &[f64], p: &[f64], prev: &[f64], est: &[f64]) -> EvaluationFrame {
        EvaluationFrame::new(a.to_vec(), p.to_vec(), prev.to_vec(), est.to_vec()).unwrap()
    }

    #[test]
    fn smape_examples() {
        let f = frame(&[100.0], &[100.0], &[99.0], &[1.0, 2.0]);
        assert_eq!(smape(&f).unwrap(), 0.0);
        let f = frame(&[100.0], &[110.0], &[99.0], &[1.0, 2.0]);
        assert!((smape(&f).unwrap() - 10.0 / 210.0 * 100.0).abs() < 1e-12);
        assert!((smape(&f).unwrap() - 4.761_904_761_904_762).abs() < 1e-12);
        let f = frame(&[50.0, 100.0], &[60.0, 90.0], &[1.0, 1.0], &[1.0, 2.0]);
        let expected = (10.0 / 110.0 + 10.0 / 190.0) / 2.0 * 100.0;
        assert!((smape(&f).unwrap() - expected).abs() < 1e-12);
        assert!((smape(&f).unwrap() - 7.177).abs() < 1e-3);
        // Conventional form doubles the plain form for positive data.
        assert!((smape_with(&f, SmapeForm::Conventional).unwrap() - 2.0 * expected).abs() < 1e-12);
    }

    #[test]
    fn smape_zero_denominator() {
        let f = frame(&[1.0, -2.0], &[3.0, 2.0], &[0.0, 0.0], &[1.0, 2.0]);
        assert_eq!(smape(&f), Err(MetricError::UndefinedSmape { row: 1 }));
    }

    #[test]
    fn mase_examples() {
        let f = frame(&[5.0], &[4.0], &[4.0], &[1.0, 2.0, 3.0]);
        assert_eq!(mase(&f).unwrap(), 1.0);
        let f = frame(&[5.0], &[5.0], &[4.0], &[1.0, 2.0, 3.0]);
        assert_eq!(mase(&f).unwrap(), 0.0);
        let f = frame(&[5.0], &[4.0], &[4.0], &[2.0, 2.0, 2.0]);
        assert_eq!(mase(&f), Err(MetricError::ZeroScale));
    }

    #[test]
    fn ds_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        let prev = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(ds(&frame(&a, &a, &prev, &[0.0, 1.0])), 1.0);
        let down = [-1.0, 0.0, 1.0, 2.0];
        assert_eq!(ds(&frame(&a, &down, &prev, &[0.0, 1.0])), 0.0);
        // Zero realised change counts as a hit.
        assert_eq!(ds(&frame(&[10.0], &[9.0], &[10.0], &[0.0, 1.0])), 1.0);
    }

    #[test]
    fn frame_validation() {
        assert_eq!(
            EvaluationFrame::new(vec![], vec![], vec![], vec![]),
            Err(MetricError::Empty)
        );
        assert_eq!(
            EvaluationFrame::new(vec![1.0], vec![1.0, 2.0], vec![1.0], vec![]),
            Err(MetricError::LengthMismatch)
        );
        assert_eq!(
            EvaluationFrame::new(vec![f64::NAN], vec![1.0], vec![1.0], vec![]),
            Err(MetricError::NonFinite { column: "actual" })
        );
    }

    // Independent implementations written directly from the definitions.
    fn brute_smape(a: &[f64], p: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..a.len() {
            s += (a[i] - p[i]).abs() / (a[i] + p[i]);
        }
        s / a.len() as f64 * 100.0
    }

    fn brute_mase(a: &[f64], p: &[f64], est: &[f64]) -> f64 {
        let mut scale = 0.0;
        for i in 1..est.len() {
            scale += (est[i] - est[i - 1]).abs();
        }
        scale /= (est.len() - 1) as f64;
        let mut s = 0.0;
        for i in 0..a.len() {
            s += (a[i] - p[i]).abs();
        }
        s / a.len() as f64 / scale
    }

    fn brute_ds(a: &[f64], p: &[f64], prev: &[f64]) -> f64 {
        let mut hits = 0usize;
        for i in 0..a.len() {
            if (a[i] - prev[i]) * (p[i] - prev[i]) >= 0.0 {
                hits += 1;
            }
        }
        hits as f64 / a.len() as f64
    }

    #[test]
    fn oracle_agreement_on_random_frames() {
        let mut rng = rng_for(2024, &[]);
        for _ in 0..100 {
            let m = rng.random_range(1..60);
            let n = rng.random_range(2..80);
            let mut draw = |k: usize| -> Vec<f64> { (0..k).map(|_| rng.random_range(10.0..150.0)).collect() };
            let (a, p, prev, est) = (draw(m), draw(m), draw(m), draw(n));
            let f = frame(&a, &p, &prev, &est);
            assert!((smape(&f).unwrap() - brute_smape(&a, &p)).abs() <= 1e-12);
            assert!((mase(&f).unwrap() - brute_mase(&a, &p, &est)).abs() <= 1e-12);
            assert!((ds(&f) - brute_ds(&a, &p, &prev)).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn bounds_permutation_and_scaling(
            rows in proptest::collection::vec((1.0f64..200.0, 1.0f64..200.0, 1.0f64..200.0), 1..40),
            est in proptest::collection::vec(1.0f64..200.0, 3..40),
            shift in 0usize..40,
            factor in 0.01f64..100.0,
        ) {
            let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
            let p: Vec<f64> = rows.iter().map(|r| r.1).collect();
            let prev: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let f = frame(&a, &p, &prev, &est);
            let (s, d) = (smape(&f).unwrap(), ds(&f));
            prop_assert!(s >= 0.0);
            prop_assert!((0.0..=1.0).contains(&d));
            let m = mase(&f);
            if let Ok(m) = m {
                prop_assert!(m >= 0.0);
                let sc = |v: &[f64]| v.iter().map(|x| x * factor).collect::<Vec<_>>();
                let g = frame(&sc(&a), &sc(&p), &sc(&prev), &sc(&est));
                prop_assert!((mase(&g).unwrap() - m).abs() <= 1e-9 * m.max(1.0));
            }

            let n = a.len();
            let rot = |v: &[f64]| (0..n).map(|i| v[(i + shift) % n]).collect::<Vec<_>>();
            let g = frame(&rot(&a), &rot(&p), &rot(&prev), &est);
            prop_assert!((smape(&g).unwrap() - s).abs() <= 1e-9);
            prop_assert!((ds(&g) - d).abs() <= 1e-12);
        }
    }
}
