//! Interpolating cubic splines on the sample grid.

use super::EmdError;

/// End condition of the interpolating spline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SplineEnd {
    /// Zero second derivative at both end knots.
    #[default]
    Natural,
    /// Third derivative continuous across the second and second-to-last knots.
    /// Reproduces cubic polynomials exactly.
    NotAKnot,
}

/// Cubic spline in second-derivative form.
///
/// Outside the knot range the end segments' cubics are continued, which is
/// exactly the extrapolation that produces the end effect when no boundary
/// extension is applied.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    /// `x` must be strictly increasing.
    pub fn new(x: Vec<f64>, y: Vec<f64>, end: SplineEnd) -> Result<Self, EmdError> {
        let n = x.len();
        if n < 2 || y.len() != n {
            return Err(EmdError::InsufficientKnots { got: n.min(y.len()) });
        }
        debug_assert!(x.windows(2).all(|w| w[1] > w[0]));
        let m = match (end, n) {
            (_, 2) => vec![0.0; 2],
            (SplineEnd::Natural, _) => natural_moments(&x, &y),
            (SplineEnd::NotAKnot, 3) => {
                let (h0, h1) = (x[1] - x[0], x[2] - x[1]);
                let r = 6.0 * ((y[2] - y[1]) / h1 - (y[1] - y[0]) / h0);
                vec![r / (3.0 * (h0 + h1)); 3]
            }
            (SplineEnd::NotAKnot, _) => not_a_knot_moments(&x, &y),
        };
        Ok(Self { x, y, m })
    }

    fn eval_segment(&self, i: usize, t: f64) -> f64 {
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - t) / h;
        let b = (t - self.x[i]) / h;
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) * h * h / 6.0
    }

    pub fn eval(&self, t: f64) -> f64 {
        let last = self.x.len() - 2;
        let i = match self.x.partition_point(|&k| k <= t) {
            0 => 0,
            p => (p - 1).min(last),
        };
        self.eval_segment(i, t)
    }

    /// Values at `0, 1, …, n-1`.
    pub fn eval_grid(&self, n: usize) -> Vec<f64> {
        let last = self.x.len() - 2;
        let mut seg = 0;
        (0..n)
            .map(|k| {
                let t = k as f64;
                while seg < last && self.x[seg + 1] <= t {
                    seg += 1;
                }
                self.eval_segment(seg, t)
            })
            .collect()
    }
}

fn natural_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let k = n - 2;
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for r in 0..k {
        let i = r + 1;
        sub[r] = h[i - 1];
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        sup[r] = h[i];
        rhs[r] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
    }
    let interior = solve_tridiagonal(&sub, &diag, &sup, &rhs);
    let mut m = Vec::with_capacity(n);
    m.push(0.0);
    m.extend(interior);
    m.push(0.0);
    m
}

fn not_a_knot_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let k = n - 2;
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for r in 0..k {
        let i = r + 1;
        sub[r] = h[i - 1];
        diag[r] = 2.0 * (h[i - 1] + h[i]);
        sup[r] = h[i];
        rhs[r] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
    }
    // M0 = ((h0 + h1) M1 - h0 M2) / h1, substituted into the first row.
    let (h0, h1) = (h[0], h[1]);
    diag[0] += h0 * (h0 + h1) / h1;
    sup[0] -= h0 * h0 / h1;
    // M_{n-1} = ((h_{n-3} + h_{n-2}) M_{n-2} - h_{n-2} M_{n-3}) / h_{n-3}.
    let (ha, hb) = (h[n - 3], h[n - 2]);
    diag[k - 1] += hb * (ha + hb) / ha;
    sub[k - 1] -= hb * hb / ha;
    let interior = solve_tridiagonal(&sub, &diag, &sup, &rhs);
    let m_first = ((h0 + h1) * interior[0] - h0 * interior[1]) / h1;
    let m_last = ((ha + hb) * interior[k - 1] - hb * interior[k - 2]) / ha;
    let mut m = Vec::with_capacity(n);
    m.push(m_first);
    m.extend(interior);
    m.push(m_last);
    m
}

/// Thomas algorithm; `sub[0]` and `sup[k-1]` are ignored.
fn solve_tridiagonal(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let k = diag.len();
    let mut c = vec![0.0; k];
    let mut d = vec![0.0; k];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..k {
        let denom = diag[i] - sub[i] * c[i - 1];
        c[i] = if i + 1 < k { sup[i] / denom } else { 0.0 };
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / denom;
    }
    let mut out = vec![0.0; k];
    out[k - 1] = d[k - 1];
    for i in (0..k - 1).rev() {
        out[i] = d[i] - c[i] * out[i + 1];
    }
    out
}
