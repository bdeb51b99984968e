//! Empirical mode decomposition.
//!
//! Sifting subtracts the mean of the upper and lower cubic-spline envelopes
//! until the Huang SD criterion drops below a threshold. Near the ends of the
//! series the envelopes are anchored by synthetic extrema placed according to
//! [`BoundaryMode`]; the slope-based mode extrapolates the line through the
//! two outermost extrema of each kind.

mod spline;

pub use spline::{CubicSpline, SplineEnd};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EmdError {
    #[error("spline needs at least 2 knots, got {got}")]
    InsufficientKnots { got: usize },
    #[error("signal needs at least 2 maxima and 2 minima to sift ({maxima} maxima, {minima} minima)")]
    NotSiftable { maxima: usize, minima: usize },
    #[error("signal of length {got} is too short to decompose (minimum {min})")]
    TooShort { min: usize, got: usize },
    #[error("decomposition components have inconsistent lengths")]
    CorruptDecomposition,
}

/// A local extremum. Synthetic boundary extrema may sit at negative indices
/// or at indices past the end of the signal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Extremum {
    pub index: isize,
    pub value: f64,
}

impl Extremum {
    pub fn new(index: isize, value: f64) -> Self {
        Self { index, value }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryMode {
    /// Slope-based extension.
    #[default]
    Sbm,
    /// Reflect the outermost extremum of each kind about the end sample.
    Mirror,
    /// No extension; the spline's end segments are extrapolated.
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SiftConfig {
    pub sd_threshold: f64,
    pub max_sift_iterations: usize,
    pub max_imfs: usize,
    pub boundary_mode: BoundaryMode,
}

impl Default for SiftConfig {
    fn default() -> Self {
        Self {
            sd_threshold: 0.3,
            max_sift_iterations: 10,
            max_imfs: 12,
            boundary_mode: BoundaryMode::Sbm,
        }
    }
}

impl SiftConfig {
    pub fn with_boundary(mut self, mode: BoundaryMode) -> Self {
        self.boundary_mode = mode;
        self
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.sd_threshold > 0.0) {
            return Err(format!("sd_threshold must be > 0, got {}", self.sd_threshold));
        }
        if self.max_sift_iterations == 0 || self.max_imfs == 0 {
            return Err("max_sift_iterations and max_imfs must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Imf {
    pub samples: Vec<f64>,
    /// Sifting iterations spent on this component.
    pub iterations: usize,
}

/// IMFs ordered from highest to lowest frequency, plus the residue.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition {
    pub imfs: Vec<Imf>,
    pub residue: Vec<f64>,
}

impl Decomposition {
    /// IMFs followed by the residue.
    pub fn components(&self) -> Vec<&[f64]> {
        self.imfs
            .iter()
            .map(|imf| imf.samples.as_slice())
            .chain(std::iter::once(self.residue.as_slice()))
            .collect()
    }

    pub fn n_components(&self) -> usize {
        self.imfs.len() + 1
    }
}

/// Interior extrema. A plateau flanked by strictly lower (higher) samples
/// yields one maximum (minimum) at its centre, the left one for even runs.
pub fn find_extrema(signal: &[f64]) -> (Vec<Extremum>, Vec<Extremum>) {
    let n = signal.len();
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    if n < 3 {
        return (maxima, minima);
    }
    let mut i = 1;
    while i < n - 1 {
        let v = signal[i];
        let mut j = i;
        while j + 1 < n && signal[j + 1] == v {
            j += 1;
        }
        if j == n - 1 {
            break;
        }
        let (left, right) = (signal[i - 1], signal[j + 1]);
        let centre = ((i + j) / 2) as isize;
        if left < v && right < v {
            maxima.push(Extremum::new(centre, v));
        } else if left > v && right > v {
            minima.push(Extremum::new(centre, v));
        }
        i = j + 1;
    }
    (maxima, minima)
}

fn is_monotone(signal: &[f64]) -> bool {
    signal.windows(2).all(|w| w[1] >= w[0]) || signal.windows(2).all(|w| w[1] <= w[0])
}

/// Extrema after boundary extension.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedExtrema {
    pub maxima: Vec<Extremum>,
    pub minima: Vec<Extremum>,
    /// Set when too few extrema forced endpoint replication.
    pub fallback: bool,
}

fn endpoint_fallback(
    maxima: &[Extremum],
    minima: &[Extremum],
    signal: &[f64],
) -> ExtendedExtrema {
    let n = signal.len();
    let first = Extremum::new(0, signal[0]);
    let last = Extremum::new(n as isize - 1, signal[n - 1]);
    let wrap = |inner: &[Extremum]| {
        let mut v = Vec::with_capacity(inner.len() + 2);
        v.push(first);
        v.extend(inner.iter().copied().filter(|e| e.index > 0 && e.index < n as isize - 1));
        v.push(last);
        v
    };
    ExtendedExtrema {
        maxima: wrap(maxima),
        minima: wrap(minima),
        fallback: true,
    }
}

// Continue the line through the two outermost extrema past the end in whole
// steps of their spacing until the new point lies outside the signal.
fn slope_left(ext: &[Extremum]) -> Extremum {
    let (a, b) = (ext[0], ext[1]);
    let gap = b.index - a.index;
    let steps = a.index / gap + 1;
    Extremum::new(a.index - steps * gap, a.value - steps as f64 * (b.value - a.value))
}

fn slope_right(ext: &[Extremum], n: usize) -> Extremum {
    let (a, b) = (ext[ext.len() - 1], ext[ext.len() - 2]);
    let gap = a.index - b.index;
    let steps = (n as isize - 1 - a.index) / gap + 1;
    Extremum::new(a.index + steps * gap, a.value + steps as f64 * (a.value - b.value))
}

fn line_at(p: Extremum, q: Extremum, at: isize) -> f64 {
    p.value + (q.value - p.value) * (at - p.index) as f64 / (q.index - p.index) as f64
}

/// Slope-based boundary extension.
///
/// For each kind, a synthetic extremum is added beyond each end on the line
/// through the two outermost same-kind extrema. If an end sample then lies
/// above the implied upper envelope (or below the lower one) it is added as
/// an extremum of that kind as well.
pub fn extend_extrema_sbm(
    maxima: &[Extremum],
    minima: &[Extremum],
    signal: &[f64],
) -> ExtendedExtrema {
    let n = signal.len();
    if n < 4 || maxima.len() < 2 || minima.len() < 2 {
        return endpoint_fallback(maxima, minima, signal);
    }
    let first = Extremum::new(0, signal[0]);
    let last = Extremum::new(n as isize - 1, signal[n - 1]);

    let extend = |ext: &[Extremum], upper: bool| {
        let left = slope_left(ext);
        let right = slope_right(ext, n);
        let violates = |end: Extremum, envelope: f64| {
            if upper {
                end.value > envelope
            } else {
                end.value < envelope
            }
        };
        let mut out = Vec::with_capacity(ext.len() + 4);
        out.push(left);
        if violates(first, line_at(left, ext[0], 0)) {
            out.push(first);
        }
        out.extend_from_slice(ext);
        if violates(last, line_at(ext[ext.len() - 1], right, last.index)) {
            out.push(last);
        }
        out.push(right);
        out
    };

    ExtendedExtrema {
        maxima: extend(maxima, true),
        minima: extend(minima, false),
        fallback: false,
    }
}

fn extend_extrema_mirror(
    maxima: &[Extremum],
    minima: &[Extremum],
    signal: &[f64],
) -> ExtendedExtrema {
    let n = signal.len();
    if maxima.is_empty() || minima.is_empty() {
        return endpoint_fallback(maxima, minima, signal);
    }
    let far = 2 * (n as isize - 1);
    let mirror = |ext: &[Extremum]| {
        let (a, z) = (ext[0], ext[ext.len() - 1]);
        let mut out = Vec::with_capacity(ext.len() + 2);
        out.push(Extremum::new(-a.index, a.value));
        out.extend_from_slice(ext);
        out.push(Extremum::new(far - z.index, z.value));
        out
    };
    ExtendedExtrema {
        maxima: mirror(maxima),
        minima: mirror(minima),
        fallback: false,
    }
}

/// Natural cubic spline through the extrema, evaluated at `0..n`.
pub fn spline_envelope(extrema: &[Extremum], n: usize) -> Result<Vec<f64>, EmdError> {
    spline_envelope_with(extrema, n, SplineEnd::Natural)
}

pub fn spline_envelope_with(
    extrema: &[Extremum],
    n: usize,
    end: SplineEnd,
) -> Result<Vec<f64>, EmdError> {
    let mut knots = extrema.to_vec();
    knots.sort_by_key(|e| e.index);
    knots.dedup_by_key(|e| e.index);
    if knots.len() < 2 {
        return Err(EmdError::InsufficientKnots { got: knots.len() });
    }
    let (x, y) = knots.iter().map(|e| (e.index as f64, e.value)).unzip();
    Ok(CubicSpline::new(x, y, end)?.eval_grid(n))
}

fn envelopes(
    signal: &[f64],
    maxima: Vec<Extremum>,
    minima: Vec<Extremum>,
    mode: BoundaryMode,
) -> Result<(Vec<f64>, Vec<f64>), EmdError> {
    let ext = match mode {
        BoundaryMode::Sbm => extend_extrema_sbm(&maxima, &minima, signal),
        BoundaryMode::Mirror => extend_extrema_mirror(&maxima, &minima, signal),
        BoundaryMode::Truncate => ExtendedExtrema {
            maxima,
            minima,
            fallback: false,
        },
    };
    let n = signal.len();
    Ok((
        spline_envelope(&ext.maxima, n)?,
        spline_envelope(&ext.minima, n)?,
    ))
}

/// Extract one IMF by repeated envelope-mean subtraction.
pub fn sift(signal: &[f64], config: &SiftConfig) -> Result<Imf, EmdError> {
    let (maxima, minima) = find_extrema(signal);
    if maxima.len() < 2 || minima.len() < 2 {
        return Err(EmdError::NotSiftable {
            maxima: maxima.len(),
            minima: minima.len(),
        });
    }
    let mut h = signal.to_vec();
    let mut extrema = (maxima, minima);
    let mut iterations = 0;
    while iterations < config.max_sift_iterations {
        let (maxima, minima) = extrema;
        let (upper, lower) = envelopes(&h, maxima, minima, config.boundary_mode)?;
        let mut num = 0.0;
        let mut den = 0.0;
        let next: Vec<f64> = h
            .iter()
            .zip(upper.iter().zip(&lower))
            .map(|(&v, (&u, &l))| {
                let m = 0.5 * (u + l);
                num += m * m;
                den += v * v;
                v - m
            })
            .collect();
        h = next;
        iterations += 1;
        let sd = if den > 0.0 { num / den } else { 0.0 };
        if sd < config.sd_threshold {
            break;
        }
        extrema = find_extrema(&h);
        if extrema.0.len() < 2 || extrema.1.len() < 2 {
            break;
        }
    }
    Ok(Imf {
        samples: h,
        iterations,
    })
}

pub const MIN_DECOMPOSE_LEN: usize = 8;

/// Sift successive residues until the residue is monotone, has fewer than two
/// extrema of either kind, or `max_imfs` components have been extracted.
pub fn decompose(signal: &[f64], config: &SiftConfig) -> Result<Decomposition, EmdError> {
    if signal.len() < MIN_DECOMPOSE_LEN {
        return Err(EmdError::TooShort {
            min: MIN_DECOMPOSE_LEN,
            got: signal.len(),
        });
    }
    let mut residue = signal.to_vec();
    let mut imfs = Vec::new();
    while imfs.len() < config.max_imfs && !is_monotone(&residue) {
        // Any sifting failure ends the decomposition; what is left is residue.
        let Ok(imf) = sift(&residue, config) else {
            break;
        };
        for (r, c) in residue.iter_mut().zip(&imf.samples) {
            *r -= c;
        }
        imfs.push(imf);
    }
    Ok(Decomposition { imfs, residue })
}

pub fn reconstruct(dec: &Decomposition) -> Result<Vec<f64>, EmdError> {
    let n = dec.residue.len();
    if dec.imfs.iter().any(|imf| imf.samples.len() != n) {
        return Err(EmdError::CorruptDecomposition);
    }
    let mut out = dec.residue.clone();
    for imf in &dec.imfs {
        for (o, v) in out.iter_mut().zip(&imf.samples) {
            *o += v;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine(n: usize, period: f64) -> Vec<f64> {
        (0..n).map(|t| (2.0 * PI * t as f64 / period).sin()).collect()
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn extrema_single_oscillation() {
        let (mx, mn) = find_extrema(&[0.0, 1.0, 0.0, -1.0, 0.0]);
        assert_eq!(mx, vec![Extremum::new(1, 1.0)]);
        assert_eq!(mn, vec![Extremum::new(3, -1.0)]);
    }

    #[test]
    fn extrema_of_ramp_are_empty() {
        let ramp: Vec<f64> = (0..20).map(|v| v as f64).collect();
        let (mx, mn) = find_extrema(&ramp);
        assert!(mx.is_empty() && mn.is_empty());
    }

    #[test]
    fn plateau_uses_left_centre() {
        let (mx, mn) = find_extrema(&[0.0, 1.0, 1.0, 0.0]);
        assert_eq!(mx, vec![Extremum::new(1, 1.0)]);
        assert!(mn.is_empty());
        let (mx, _) = find_extrema(&[0.0, 2.0, 2.0, 2.0, 0.0]);
        assert_eq!(mx, vec![Extremum::new(2, 2.0)]);
        // A plateau reaching the end is not interior.
        let (mx, _) = find_extrema(&[0.0, 1.0, 1.0]);
        assert!(mx.is_empty());
    }

    #[test]
    fn sbm_equal_maxima_extends_flat() {
        let signal = vec![0.0; 100];
        let maxima = vec![Extremum::new(10, 1.0), Extremum::new(50, 1.0), Extremum::new(90, 1.0)];
        let minima = vec![Extremum::new(30, -1.0), Extremum::new(70, -1.0)];
        let ext = extend_extrema_sbm(&maxima, &minima, &signal);
        assert!(!ext.fallback);
        assert_eq!(ext.maxima[0], Extremum::new(-30, 1.0));
        // Originals preserved.
        assert_eq!(&ext.maxima[1..4], &maxima[..]);
        assert!(ext.maxima.last().unwrap().index >= 100);
        assert!(ext.minima[0].index < 0);
        assert!(ext.minima.last().unwrap().index >= 100);
    }

    #[test]
    fn sbm_linear_extrapolation() {
        let signal = vec![0.0; 60];
        let maxima = vec![Extremum::new(5, 2.0), Extremum::new(25, 3.0)];
        let minima = vec![Extremum::new(15, -1.0), Extremum::new(35, -1.0)];
        let ext = extend_extrema_sbm(&maxima, &minima, &signal);
        assert_eq!(ext.maxima[0], Extremum::new(-15, 1.0));
        // Right: 25 + 20 = 45 < 60, so two steps: index 65, value 3 + 2*1.
        assert_eq!(*ext.maxima.last().unwrap(), Extremum::new(65, 5.0));
    }

    #[test]
    fn sbm_guard_inserts_violating_endpoint() {
        // End sample far above the extrapolated maxima line.
        let mut signal = vec![0.0; 40];
        signal[0] = 10.0;
        let maxima = vec![Extremum::new(8, 1.0), Extremum::new(18, 1.0)];
        let minima = vec![Extremum::new(13, -1.0), Extremum::new(23, -1.0)];
        let ext = extend_extrema_sbm(&maxima, &minima, &signal);
        assert!(ext.maxima.contains(&Extremum::new(0, 10.0)));
        assert!(!ext.minima.contains(&Extremum::new(0, 10.0)));
    }

    #[test]
    fn sbm_fallback_replicates_endpoints() {
        let ramp: Vec<f64> = (0..10).map(|v| v as f64).collect();
        let ext = extend_extrema_sbm(&[], &[], &ramp);
        assert!(ext.fallback);
        assert_eq!(ext.maxima, vec![Extremum::new(0, 0.0), Extremum::new(9, 9.0)]);
        assert_eq!(ext.minima, ext.maxima);
    }

    #[test]
    fn envelope_passes_through_knots() {
        let knots = vec![
            Extremum::new(-4, 0.3),
            Extremum::new(3, 1.0),
            Extremum::new(11, 0.7),
            Extremum::new(20, 1.4),
            Extremum::new(33, 0.2),
        ];
        let env = spline_envelope(&knots, 30).unwrap();
        for k in &knots[1..4] {
            assert!((env[k.index as usize] - k.value).abs() <= 1e-12);
        }
        assert!(matches!(
            spline_envelope(&knots[..1], 10),
            Err(EmdError::InsufficientKnots { got: 1 })
        ));
    }

    #[test]
    fn envelope_two_knots_linear() {
        let env = spline_envelope(&[Extremum::new(0, 0.0), Extremum::new(10, 5.0)], 11).unwrap();
        for (k, v) in env.iter().enumerate() {
            assert!((v - 0.5 * k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_reproduces_cubic_with_not_a_knot_end() {
        let p = |t: f64| 1e-4 * t.powi(3) - 0.01 * t * t + 0.2 * t + 3.0;
        let knots: Vec<Extremum> = [-6, 4, 13, 21, 30, 44]
            .iter()
            .map(|&i| Extremum::new(i, p(i as f64)))
            .collect();
        let env = spline_envelope_with(&knots, 40, SplineEnd::NotAKnot).unwrap();
        for (k, v) in env.iter().enumerate() {
            assert!((v - p(k as f64)).abs() <= 1e-9);
        }
    }

    #[test]
    fn sift_pure_sinusoid() {
        let x = sine(626, 626.0 / 20.0);
        let imf = sift(&x, &SiftConfig::default()).unwrap();
        let lo = 626 / 10;
        let hi = 626 - lo;
        let worst = (lo..hi).map(|t| (imf.samples[t] - x[t]).abs()).fold(0.0, f64::max);
        assert!(worst <= 0.01, "max residue {worst}");
    }

    #[test]
    fn sift_separates_trend() {
        let s = sine(626, 50.0);
        let x: Vec<f64> = s.iter().enumerate().map(|(t, v)| v + 0.002 * t as f64).collect();
        let imf = sift(&x, &SiftConfig::default()).unwrap();
        let lo = 626 / 10;
        let hi = 626 - lo;
        assert!(corr(&imf.samples[lo..hi], &s[lo..hi]) > 0.99);
    }

    #[test]
    fn constant_signal_is_not_siftable() {
        assert!(matches!(
            sift(&[2.0; 50], &SiftConfig::default()),
            Err(EmdError::NotSiftable { .. })
        ));
        let dec = decompose(&[2.0; 50], &SiftConfig::default()).unwrap();
        assert!(dec.imfs.is_empty());
        assert_eq!(dec.residue, vec![2.0; 50]);
    }

    #[test]
    fn ramp_has_no_imfs() {
        let ramp: Vec<f64> = (0..100).map(|v| 0.1 * v as f64).collect();
        let dec = decompose(&ramp, &SiftConfig::default()).unwrap();
        assert!(dec.imfs.is_empty());
        assert_eq!(dec.residue, ramp);
    }

    #[test]
    fn two_tone_signal_separates() {
        let fast = sine(626, 10.0);
        let slow = sine(626, 100.0);
        let x: Vec<f64> = fast.iter().zip(&slow).map(|(a, b)| a + b).collect();
        let dec = decompose(&x, &SiftConfig::default()).unwrap();
        assert!(dec.imfs.len() >= 2);
        let (lo, hi) = (63, 563);
        assert!(corr(&dec.imfs[0].samples[lo..hi], &fast[lo..hi]) > 0.95);
    }

    #[test]
    fn reconstruct_identities() {
        let dec = Decomposition {
            imfs: vec![],
            residue: vec![1.0, 2.0],
        };
        assert_eq!(reconstruct(&dec).unwrap(), vec![1.0, 2.0]);
        let dec = Decomposition {
            imfs: vec![Imf {
                samples: vec![0.5, -0.5],
                iterations: 1,
            }],
            residue: vec![0.0, 0.0],
        };
        assert_eq!(reconstruct(&dec).unwrap(), vec![0.5, -0.5]);
        let bad = Decomposition {
            imfs: vec![Imf {
                samples: vec![0.5],
                iterations: 1,
            }],
            residue: vec![0.0, 0.0],
        };
        assert_eq!(reconstruct(&bad), Err(EmdError::CorruptDecomposition));
    }

    fn boundary_rmse(mode: BoundaryMode) -> f64 {
        let s = sine(626, 50.0);
        let x: Vec<f64> = s.iter().enumerate().map(|(t, v)| v + 0.002 * t as f64).collect();
        let imf = sift(&x, &SiftConfig::default().with_boundary(mode)).unwrap();
        let ends: Vec<usize> = (0..25).chain(601..626).collect();
        let sse: f64 = ends.iter().map(|&t| (imf.samples[t] - s[t]).powi(2)).sum();
        (sse / ends.len() as f64).sqrt()
    }

    #[test]
    fn sbm_reduces_end_effect() {
        let sbm = boundary_rmse(BoundaryMode::Sbm);
        let truncate = boundary_rmse(BoundaryMode::Truncate);
        assert!(sbm < truncate, "sbm {sbm} truncate {truncate}");
    }

    #[test]
    fn every_boundary_mode_decomposes() {
        let x: Vec<f64> = (0..300)
            .map(|t| (t as f64 * 0.37).sin() + 0.5 * (t as f64 * 0.05).cos())
            .collect();
        for mode in [BoundaryMode::Sbm, BoundaryMode::Mirror, BoundaryMode::Truncate] {
            let dec = decompose(&x, &SiftConfig::default().with_boundary(mode)).unwrap();
            assert!(!dec.imfs.is_empty());
            let back = reconstruct(&dec).unwrap();
            let err = back.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-12);
        }
    }

    #[test]
    fn decomposition_is_deterministic() {
        let x: Vec<f64> = (0..200).map(|t| ((t * t) as f64 * 0.013).sin()).collect();
        let cfg = SiftConfig::default();
        assert_eq!(decompose(&x, &cfg).unwrap(), decompose(&x, &cfg).unwrap());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]

        #[test]
        fn reconstruction_is_exact(
            values in proptest::collection::vec(-50.0f64..50.0, 8..160)
        ) {
            let dec = decompose(&values, &SiftConfig::default()).unwrap();
            let back = reconstruct(&dec).unwrap();
            let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
            let err = back.iter().zip(&values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            proptest::prop_assert!(err / scale <= 1e-8);
        }

        #[test]
        fn envelopes_hit_extrema(
            values in proptest::collection::vec(-5.0f64..5.0, 12..120)
        ) {
            let (mx, mn) = find_extrema(&values);
            proptest::prop_assume!(mx.len() >= 2 && mn.len() >= 2);
            let ext = extend_extrema_sbm(&mx, &mn, &values);
            let upper = spline_envelope(&ext.maxima, values.len()).unwrap();
            let lower = spline_envelope(&ext.minima, values.len()).unwrap();
            for e in &mx {
                proptest::prop_assert!((upper[e.index as usize] - e.value).abs() <= 1e-12);
            }
            for e in &mn {
                proptest::prop_assert!((lower[e.index as usize] - e.value).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn short_signal_rejected() {
        assert!(matches!(
            decompose(&[1.0; 7], &SiftConfig::default()),
            Err(EmdError::TooShort { .. })
        ));
    }
}
