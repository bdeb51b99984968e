//! Blocked k-fold cross-validation over a grid of network sizes.

use std::ops::Range;

use rayon::prelude::*;

use super::{train_lm, FnnConfig, NnetError, TrainConfig};
use crate::seed::derive_seed;
use crate::series::LagMatrix;

/// Contiguous validation blocks over time-ordered rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CvPlan {
    folds: Vec<Range<usize>>,
}

impl CvPlan {
    pub const DEFAULT_FOLDS: usize = 5;

    /// `k` blocks whose sizes differ by at most one, larger blocks first.
    pub fn blocked(rows: usize, k: usize) -> Self {
        let k = k.clamp(1, rows.max(1));
        let (base, extra) = (rows / k, rows % k);
        let mut start = 0;
        let folds = (0..k)
            .map(|f| {
                let len = base + usize::from(f < extra);
                let r = start..start + len;
                start += len;
                r
            })
            .collect();
        Self { folds }
    }

    pub fn folds(&self) -> &[Range<usize>] {
        &self.folds
    }

    fn split(&self, fold: usize, data: &LagMatrix) -> (LagMatrix, LagMatrix) {
        let hold = &self.folds[fold];
        let train: Vec<usize> = (0..data.rows()).filter(|r| !hold.contains(r)).collect();
        let valid: Vec<usize> = hold.clone().collect();
        (data.select_rows(&train), data.select_rows(&valid))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub selected: FnnConfig,
    /// Mean validation SSE per grid entry; empty when the grid had one entry.
    pub scores: Vec<f64>,
}

fn fold_score(
    data: &LagMatrix,
    config: FnnConfig,
    tc: &TrainConfig,
    plan: &CvPlan,
    g: usize,
    f: usize,
) -> f64 {
    let (train, valid) = plan.split(f, data);
    let tc = TrainConfig {
        seed: derive_seed(tc.seed, &[g as u64, f as u64]),
        ..*tc
    };
    match train_lm(&train, config, &tc) {
        Ok((model, _)) => model.sse(&valid),
        Err(_) => f64::INFINITY,
    }
}

fn pick(grid: &[FnnConfig], scores: Vec<f64>) -> CvOutcome {
    let mut best = 0;
    for g in 1..grid.len() {
        let (s, b) = (scores[g], scores[best]);
        let better = s < b || (s == b && grid[g].n_hidden < grid[best].n_hidden);
        if better {
            best = g;
        }
    }
    CvOutcome {
        selected: grid[best],
        scores,
    }
}

fn check(grid: &[FnnConfig], data: &LagMatrix) -> Result<Option<CvOutcome>, NnetError> {
    match grid {
        [] => Err(NnetError::EmptyGrid),
        [only] => Ok(Some(CvOutcome {
            selected: *only,
            scores: Vec::new(),
        })),
        _ if data.rows() < 2 * CvPlan::DEFAULT_FOLDS => Err(NnetError::TooFewRows { got: data.rows() }),
        _ => Ok(None),
    }
}

fn mean_scores(grid: &[FnnConfig], plan: &CvPlan, per_cell: &[f64]) -> Vec<f64> {
    let k = plan.folds().len();
    (0..grid.len())
        .map(|g| per_cell[g * k..(g + 1) * k].iter().sum::<f64>() / k as f64)
        .collect()
}

/// Grid entry with the lowest mean validation SSE. Ties go to fewer hidden
/// units, then to the earlier grid entry. Fold `f` of entry `g` trains with
/// a seed derived from `tc.seed`, `g` and `f`.
pub fn cross_validate(
    data: &LagMatrix,
    grid: &[FnnConfig],
    tc: &TrainConfig,
    plan: &CvPlan,
) -> Result<CvOutcome, NnetError> {
    if let Some(done) = check(grid, data)? {
        return Ok(done);
    }
    let k = plan.folds().len();
    let cells: Vec<f64> = (0..grid.len() * k)
        .map(|c| fold_score(data, grid[c / k], tc, plan, c / k, c % k))
        .collect();
    Ok(pick(grid, mean_scores(grid, plan, &cells)))
}

/// [`cross_validate`] with folds trained concurrently on the current rayon
/// pool. Results are identical to the sequential version.
pub fn cross_validate_par(
    data: &LagMatrix,
    grid: &[FnnConfig],
    tc: &TrainConfig,
    plan: &CvPlan,
) -> Result<CvOutcome, NnetError> {
    if let Some(done) = check(grid, data)? {
        return Ok(done);
    }
    let k = plan.folds().len();
    let cells: Vec<f64> = (0..grid.len() * k)
        .into_par_iter()
        .map(|c| fold_score(data, grid[c / k], tc, plan, c / k, c % k))
        .collect();
    Ok(pick(grid, mean_scores(grid, plan, &cells)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn noisy_linear(seed: u64, n: usize) -> LagMatrix {
        let mut rng = rng_for(seed, &[]);
        let inputs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
        let targets = inputs
            .iter()
            .map(|x| {
                let e: f64 = rng.sample(StandardNormal);
                vec![0.6 * x[0] + 0.2 + 0.1 * e]
            })
            .collect();
        LagMatrix::from_rows(inputs, targets).unwrap()
    }

    #[test]
    fn singleton_grid_returned_without_training() {
        let data = noisy_linear(1, 3);
        let cfg = FnnConfig::new(1, 15, 1).unwrap();
        let out = cross_validate(&data, &[cfg], &TrainConfig::default(), &CvPlan::blocked(3, 5)).unwrap();
        assert_eq!(out.selected, cfg);
        assert!(out.scores.is_empty());
        assert_eq!(
            cross_validate(&data, &[], &TrainConfig::default(), &CvPlan::blocked(3, 5)),
            Err(NnetError::EmptyGrid)
        );
    }

    #[test]
    fn matched_capacity_beats_overfit() {
        let grid = [FnnConfig::new(1, 40, 1).unwrap(), FnnConfig::new(1, 1, 1).unwrap()];
        let mut matched = 0;
        for rep in 0..5u64 {
            let data = noisy_linear(100 + rep, 40);
            let tc = TrainConfig {
                seed: rep,
                max_epochs: 100,
                ..Default::default()
            };
            let out = cross_validate(&data, &grid, &tc, &CvPlan::blocked(40, 5)).unwrap();
            if out.selected.n_hidden == 1 {
                matched += 1;
            }
        }
        assert!(matched >= 4, "matched {matched}/5");
    }

    #[test]
    fn ties_prefer_fewer_hidden_units() {
        let grid = [
            FnnConfig::new(1, 10, 1).unwrap(),
            FnnConfig::new(1, 5, 1).unwrap(),
            FnnConfig::new(1, 5, 1).unwrap(),
        ];
        let out = pick(&grid, vec![1.0, 1.0, 1.0]);
        assert_eq!(out.selected.n_hidden, 5);
        let out = pick(&grid, vec![0.5, 1.0, 1.0]);
        assert_eq!(out.selected.n_hidden, 10);
    }

    #[test]
    fn concurrent_matches_sequential() {
        let data = noisy_linear(8, 30);
        let grid = [FnnConfig::new(1, 2, 1).unwrap(), FnnConfig::new(1, 4, 1).unwrap()];
        let tc = TrainConfig {
            seed: 3,
            max_epochs: 20,
            n_restarts: 1,
            ..Default::default()
        };
        let plan = CvPlan::blocked(30, 5);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let par = pool.install(|| cross_validate_par(&data, &grid, &tc, &plan)).unwrap();
        assert_eq!(par, cross_validate(&data, &grid, &tc, &plan).unwrap());
    }

    proptest! {
        #[test]
        fn folds_partition_rows(rows in 1usize..500, k in 1usize..8) {
            let plan = CvPlan::blocked(rows, k);
            let mut next = 0;
            for f in plan.folds() {
                prop_assert_eq!(f.start, next);
                next = f.end;
            }
            prop_assert_eq!(next, rows);
            let sizes: Vec<usize> = plan.folds().iter().map(|f| f.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
