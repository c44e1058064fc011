//! Reference computations for the acceptance criteria, written without the
//! library's numerics.

use nalgebra::{DMatrix, DVector};

/// Gaussian elimination with partial pivoting.
pub fn solve(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut x = b.clone();
    for k in 0..n {
        let piv = (k..n).max_by(|&i, &j| a[(i, k)].abs().total_cmp(&a[(j, k)].abs())).unwrap();
        a.swap_rows(k, piv);
        x.swap_rows(k, piv);
        for i in k + 1..n {
            let f = a[(i, k)] / a[(k, k)];
            for j in k..n {
                a[(i, j)] -= f * a[(k, j)];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[(k, j)] * x[j]).sum();
        x[k] = (x[k] - s) / a[(k, k)];
    }
    x
}

pub fn inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let e = DVector::from_fn(n, |i, _| if i == j { 1.0 } else { 0.0 });
        out.set_column(j, &solve(m, &e));
    }
    out
}

/// Composite Simpson on `[a, b]` with `cells` panels.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, cells: usize) -> f64 {
    let h = (b - a) / cells as f64;
    let mut s = 0.0;
    for k in 0..cells {
        let x0 = a + k as f64 * h;
        s += f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h);
    }
    s * h / 6.0
}

/// CDF of a positive variable tabulated from its log-density on a grid
/// uniform in `ln x`.
pub struct LogGridCdf {
    knots: Vec<f64>,
    cum: Vec<f64>,
}

impl LogGridCdf {
    pub fn new<F: Fn(f64) -> f64>(log_density: F, ln_lo: f64, ln_hi: f64, cells: usize) -> Self {
        // Integrate exp(logf(e^u) + u) du, shifted by the maximum for range.
        let g = |u: f64| log_density(u.exp()) + u;
        let shift = (0..=cells * 2)
            .map(|k| g(ln_lo + (ln_hi - ln_lo) * k as f64 / (2 * cells) as f64))
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let h = (ln_hi - ln_lo) / cells as f64;
        let mut knots = vec![ln_lo.exp()];
        let mut cum = vec![0.0];
        let mut acc = 0.0;
        for k in 0..cells {
            let u0 = ln_lo + k as f64 * h;
            acc += simpson(|u| (g(u) - shift).exp(), u0, u0 + h, 1);
            knots.push((u0 + h).exp());
            cum.push(acc);
        }
        for c in cum.iter_mut() {
            *c /= acc;
        }
        Self { knots, cum }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.knots[0] {
            return 0.0;
        }
        let k = self.knots.partition_point(|&t| t < x);
        if k >= self.knots.len() {
            return 1.0;
        }
        let (x0, x1) = (self.knots[k - 1].ln(), self.knots[k].ln());
        let w = (x.ln() - x0) / (x1 - x0);
        self.cum[k - 1] + w * (self.cum[k] - self.cum[k - 1])
    }
}

/// One-sample Kolmogorov–Smirnov distance.
pub fn ks<F: Fn(f64) -> f64>(draws: &[f64], cdf: F) -> f64 {
    let mut s = draws.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    s.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
        })
        .fold(0.0, f64::max)
}

pub fn normal_cdf(x: f64, mean: f64, var: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-(x - mean) / (2.0 * var).sqrt())
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() - 1) as f64
}

/// Log-density of the generalized inverse Gaussian law
/// `x^{γ−1} exp{−½(a²/x + b²x)}` without its normalizing constant.
pub fn gig_log_kernel(x: f64, gamma: f64, a: f64, b: f64) -> f64 {
    (gamma - 1.0) * x.ln() - 0.5 * (a * a / x + b * b * x)
}
