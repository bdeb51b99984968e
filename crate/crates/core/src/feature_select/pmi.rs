//! Partial mutual information with Gaussian kernels.
//!
//! Conditional expectations are Nadaraya–Watson estimates on the already
//! selected columns; mutual information of the two residuals is the sample
//! average of the log density ratio from product-kernel density estimates.
//! Every bandwidth follows the Gaussian reference rule `1.06 σ n^(-1/5)`.

use super::{quantile, shuffled_index, CandidatePool, SearchCriterion, SelectError, SelectionConfig};

pub(crate) const MIN_SAMPLES: usize = 30;

fn std_dev(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

fn bandwidth(x: &[f64]) -> f64 {
    1.06 * std_dev(x) * (x.len() as f64).powf(-0.2)
}

/// Dense Gaussian kernel matrix and its row sums.
struct Kernel {
    k: Vec<f64>,
    rows: Vec<f64>,
}

impl Kernel {
    fn new(x: &[f64]) -> Self {
        let n = x.len();
        let h = bandwidth(x);
        let c = -0.5 / (h * h);
        let mut k = vec![0.0; n * n];
        for i in 0..n {
            k[i * n + i] = 1.0;
            for j in 0..i {
                let v = (c * (x[i] - x[j]).powi(2)).exp();
                k[i * n + j] = v;
                k[j * n + i] = v;
            }
        }
        let rows = k.chunks_exact(n).map(|r| r.iter().sum()).collect();
        Self { k, rows }
    }

    /// Kernel of the same samples relabelled by `perm`. Built once per
    /// surrogate so every candidate reads it contiguously.
    fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.rows.len();
        let mut k = Vec::with_capacity(n * n);
        for &pi in perm {
            let row = &self.k[pi * n..(pi + 1) * n];
            k.extend(perm.iter().map(|&pj| row[pj]));
        }
        let rows = perm.iter().map(|&p| self.rows[p]).collect();
        Self { k, rows }
    }
}

/// Mutual information between the samples behind `u` and `v`.
fn mi_kernels(u: &Kernel, v: &Kernel) -> f64 {
    let n = u.rows.len();
    let nf = n as f64;
    let mut total = 0.0;
    for i in 0..n {
        let ku = &u.k[i * n..(i + 1) * n];
        let kv = &v.k[i * n..(i + 1) * n];
        let joint = ku.iter().zip(kv).map(|(a, b)| a * b).sum::<f64>();
        total += (nf * joint / (u.rows[i] * v.rows[i])).ln();
    }
    total / nf
}

/// [`mi_kernels`] against `v` relabelled by `perm`, without building the
/// permuted kernel. Cheaper when the relabelling is used once.
fn mi_kernels_permuted(u: &Kernel, v: &Kernel, perm: &[usize]) -> f64 {
    let n = u.rows.len();
    let nf = n as f64;
    let mut total = 0.0;
    for (i, &pi) in perm.iter().enumerate() {
        let ku = &u.k[i * n..(i + 1) * n];
        let kv = &v.k[pi * n..(pi + 1) * n];
        let joint = ku.iter().zip(perm).map(|(a, &pj)| a * kv[pj]).sum::<f64>();
        total += (nf * joint / (u.rows[i] * v.rows[pi])).ln();
    }
    total / nf
}

/// Nadaraya–Watson smoother over a set of conditioning columns.
struct Smoother {
    w: Vec<f64>,
    rows: Vec<f64>,
}

impl Smoother {
    fn new(columns: &[&[f64]]) -> Option<Self> {
        let kernels: Vec<Kernel> = columns.iter().map(|c| Kernel::new(c)).collect();
        Self::from_kernels(&kernels.iter().collect::<Vec<_>>())
    }

    /// Product kernel of the per-column Gaussian weights.
    fn from_kernels(kernels: &[&Kernel]) -> Option<Self> {
        let (first, rest) = kernels.split_first()?;
        let n = first.rows.len();
        let mut w = first.k.clone();
        for k in rest {
            for (a, b) in w.iter_mut().zip(&k.k) {
                *a *= b;
            }
        }
        let rows = w.chunks_exact(n).map(|r| r.iter().sum()).collect();
        Some(Self { w, rows })
    }

    fn residual(this: Option<&Self>, y: &[f64]) -> Vec<f64> {
        let n = y.len();
        match this {
            None => {
                let mean = y.iter().sum::<f64>() / n as f64;
                y.iter().map(|v| v - mean).collect()
            }
            Some(s) => (0..n)
                .map(|i| {
                    let row = &s.w[i * n..(i + 1) * n];
                    y[i] - row.iter().zip(y).map(|(w, v)| w * v).sum::<f64>() / s.rows[i]
                })
                .collect(),
        }
    }
}

fn check_column(x: &[f64], what: &'static str) -> Result<(), SelectError> {
    if std_dev(x) > 0.0 {
        Ok(())
    } else {
        Err(SelectError::DegenerateInput { what })
    }
}

/// Kernel estimate of I(X; Y) in nats.
pub fn mutual_information(x: &[f64], y: &[f64]) -> Result<f64, SelectError> {
    pmi_score(x, &[], y)
}

/// Partial mutual information of `candidate` and `target` given `selected`.
pub fn pmi_score(candidate: &[f64], selected: &[&[f64]], target: &[f64]) -> Result<f64, SelectError> {
    let n = target.len();
    if candidate.len() != n || selected.iter().any(|c| c.len() != n) {
        return Err(SelectError::ShapeMismatch);
    }
    if n < MIN_SAMPLES {
        return Err(SelectError::TooFewSamples {
            need: MIN_SAMPLES,
            got: n,
        });
    }
    check_column(candidate, "candidate")?;
    check_column(target, "target")?;
    for col in selected {
        check_column(col, "conditioning column")?;
    }
    let smoother = Smoother::new(selected);
    let u = Smoother::residual(smoother.as_ref(), candidate);
    let v = Smoother::residual(smoother.as_ref(), target);
    if std_dev(&u) == 0.0 || std_dev(&v) == 0.0 {
        return Ok(0.0);
    }
    Ok(mi_kernels(&Kernel::new(&u), &Kernel::new(&v)))
}

pub(crate) struct PmiSearch<'a> {
    pool: &'a CandidatePool,
    target: &'a [f64],
    n_surrogates: usize,
    quantile: f64,
    seed: u64,
    /// Per-candidate weight matrices, built on first use. The candidate
    /// columns never change during a search, so neither do these.
    column_kernels: Vec<Option<Kernel>>,
}

impl<'a> PmiSearch<'a> {
    pub(crate) fn new(
        pool: &'a CandidatePool,
        target: &'a [f64],
        config: &SelectionConfig,
        seed: u64,
    ) -> Self {
        Self {
            pool,
            target,
            n_surrogates: config.n_surrogates,
            quantile: config.surrogate_quantile,
            seed,
            column_kernels: (0..pool.len()).map(|_| None).collect(),
        }
    }

    fn smoother(&mut self, members: impl Iterator<Item = usize>) -> Option<Smoother> {
        let members: Vec<usize> = members.collect();
        for &c in &members {
            if self.column_kernels[c].is_none() {
                self.column_kernels[c] = Some(Kernel::new(self.pool.column(c)));
            }
        }
        let kernels: Vec<&Kernel> = members
            .iter()
            .filter_map(|&c| self.column_kernels[c].as_ref())
            .collect();
        Smoother::from_kernels(&kernels)
    }

    fn permutations(&self, pass: usize, tag: u64) -> Vec<Vec<usize>> {
        let n = self.target.len();
        (0..self.n_surrogates)
            .map(|s| shuffled_index(n, self.seed, &[pass as u64, tag, s as u64]))
            .collect()
    }

    fn threshold(&self, mut scores: Vec<f64>) -> f64 {
        scores.sort_by(f64::total_cmp);
        quantile(&scores, self.quantile)
    }
}

fn spread(x: &[f64]) -> bool {
    std_dev(x) > 0.0
}

impl SearchCriterion for PmiSearch<'_> {
    fn best_addition(&mut self, selected: &[usize], remaining: &[usize], pass: usize) -> Option<usize> {
        let smoother = self.smoother(selected.iter().copied());
        let v = Smoother::residual(smoother.as_ref(), self.target);
        if !spread(&v) {
            return None;
        }
        let kv = Kernel::new(&v);
        let mut best: Option<(usize, f64)> = None;
        let mut kernels = Vec::with_capacity(remaining.len());
        for (k, &c) in remaining.iter().enumerate() {
            let u = Smoother::residual(smoother.as_ref(), self.pool.column(c));
            if !spread(&u) {
                continue;
            }
            let ku = Kernel::new(&u);
            let score = mi_kernels(&ku, &kv);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((k, score));
            }
            kernels.push(ku);
        }
        // Surrogate statistic is the best score over all candidates, which
        // matches the statistic being tested.
        let surrogate_max = self
            .permutations(pass, 0)
            .iter()
            .map(|p| {
                let kvp = kv.permuted(p);
                kernels.iter().map(|ku| mi_kernels(ku, &kvp)).fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let (k, score) = best?;
        (score > self.threshold(surrogate_max)).then_some(k)
    }

    fn worst_member(&mut self, selected: &[usize], pass: usize) -> Option<usize> {
        let mut worst: Option<(usize, f64)> = None;
        for (i, &c) in selected.iter().enumerate() {
            let others = selected.iter().copied().filter(|&o| o != c);
            let smoother = self.smoother(others);
            let v = Smoother::residual(smoother.as_ref(), self.target);
            let u = Smoother::residual(smoother.as_ref(), self.pool.column(c));
            let margin = if spread(&u) && spread(&v) {
                let (ku, kv) = (Kernel::new(&u), Kernel::new(&v));
                let score = mi_kernels(&ku, &kv);
                let null: Vec<f64> = self
                    .permutations(pass, 1 + i as u64)
                    .iter()
                    .map(|p| mi_kernels_permuted(&ku, &kv, p))
                    .collect();
                score - self.threshold(null)
            } else {
                // Fully explained by the other members.
                f64::NEG_INFINITY
            };
            if margin <= 0.0 && worst.is_none_or(|(_, m)| margin < m) {
                worst = Some((i, margin));
            }
        }
        worst.map(|(i, _)| i)
    }
}

#[cfg(test)]
mod tests {
    use super::super::tests::noise;
    use super::*;

    #[test]
    fn independent_noise_has_small_mi() {
        let x = noise(1000, 1);
        let y = noise(1000, 2);
        let mi = mutual_information(&x, &y).unwrap();
        assert!(mi <= 0.05, "mi {mi}");
    }

    #[test]
    fn self_information_dominates_pool() {
        let cols: Vec<Vec<f64>> = (0..6).map(|s| noise(200, 40 + s)).collect();
        let target = cols[3].clone();
        let scores: Vec<f64> = cols
            .iter()
            .map(|c| mutual_information(c, &target).unwrap())
            .collect();
        let best = scores
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(best, 3);
    }

    #[test]
    fn informative_candidate_outscores_noise() {
        let mut wins = 0;
        for trial in 0..100u64 {
            let x1 = noise(200, 100 + trial);
            let x2 = noise(200, 300 + trial);
            let e = noise(200, 500 + trial);
            let y: Vec<f64> = x1.iter().zip(&e).map(|(a, b)| a + 0.5 * b).collect();
            if mutual_information(&x1, &y).unwrap() > mutual_information(&x2, &y).unwrap() {
                wins += 1;
            }
        }
        assert!(wins >= 95, "wins {wins}");
    }

    #[test]
    fn conditioning_removes_explained_information() {
        let x1 = noise(300, 7);
        let x2 = noise(300, 8);
        // Candidate is a noisy copy of x1; once x1 is conditioned on, it adds
        // little about a target that depends only on x1.
        let cand: Vec<f64> = x1.iter().zip(&x2).map(|(a, b)| a + 0.05 * b).collect();
        let e = noise(300, 9);
        let y: Vec<f64> = x1.iter().zip(&e).map(|(a, b)| (2.0 * a).sin() + 0.3 * b).collect();
        let raw = mutual_information(&cand, &y).unwrap();
        let partial = pmi_score(&cand, &[&x1], &y).unwrap();
        assert!(partial < 0.25 * raw, "raw {raw} partial {partial}");
    }

    #[test]
    fn degenerate_inputs_rejected() {
        let x = noise(50, 1);
        assert_eq!(
            mutual_information(&[1.0; 50], &x),
            Err(SelectError::DegenerateInput { what: "candidate" })
        );
        assert!(matches!(
            mutual_information(&x[..10], &x[..10]),
            Err(SelectError::TooFewSamples { .. })
        ));
    }

    #[test]
    fn permuted_kernel_relabels_samples() {
        let x = noise(80, 3);
        let y: Vec<f64> = x.iter().map(|v| v.sin()).collect();
        let (kx, ky) = (Kernel::new(&x), Kernel::new(&y));
        let id: Vec<usize> = (0..80).collect();
        assert_eq!(mi_kernels(&kx, &ky), mi_kernels(&kx, &ky.permuted(&id)));
        let perm = shuffled_index(80, 11, &[]);
        assert_eq!(mi_kernels(&kx, &ky.permuted(&perm)), mi_kernels_permuted(&kx, &ky, &perm));
        let relabelled: Vec<f64> = perm.iter().map(|&p| y[p]).collect();
        let direct = Kernel::new(&relabelled);
        let via = ky.permuted(&perm);
        for (a, b) in direct.k.iter().zip(&via.k) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
