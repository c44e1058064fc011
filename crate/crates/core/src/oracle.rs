//! Independent numerical oracles for tests: naive elimination, adaptive
//! quadrature and empirical distribution distances. Nothing here calls into
//! the library's factorization or special functions.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(m: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut x = b.clone();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap())
            .unwrap();
        a.swap_rows(col, piv);
        x.swap_rows(col, piv);
        for row in col + 1..n {
            let f = a[(row, col)] / a[(col, col)];
            for k in col..n {
                a[(row, k)] -= f * a[(col, k)];
            }
            x[row] -= f * x[col];
        }
    }
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[(row, k)] * x[k]).sum();
        x[row] = (x[row] - s) / a[(row, row)];
    }
    x
}

/// Inverse by Gauss-Jordan elimination.
pub fn gauss_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        out.set_column(j, &gauss_solve(m, &e));
    }
    out
}

/// Determinant via elimination with partial pivoting.
pub fn gauss_det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut a = m.clone();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[(i, col)].abs().partial_cmp(&a[(j, col)].abs()).unwrap())
            .unwrap();
        if piv != col {
            a.swap_rows(col, piv);
            det = -det;
        }
        det *= a[(col, col)];
        for row in col + 1..n {
            let f = a[(row, col)] / a[(col, col)];
            for k in col..n {
                a[(row, k)] -= f * a[(col, k)];
            }
        }
    }
    det
}

/// Dense multivariate normal log-density through an explicit inverse.
pub fn dense_mvn_logpdf(x: &DVector<f64>, mean: &DVector<f64>, cov: &DMatrix<f64>) -> f64 {
    let n = x.len() as f64;
    let r = x - mean;
    let q = (r.transpose() * gauss_inverse(cov) * &r)[(0, 0)];
    -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + gauss_det(cov).ln() + q)
}

const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const G_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * G_WEIGHTS[3];
    for i in 0..7 {
        let dx = h * GK_NODES[i];
        let s = f(c - dx) + f(c + dx);
        kronrod += GK_WEIGHTS[i] * s;
        if i % 2 == 1 {
            gauss += G_WEIGHTS[i / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
}

/// Adaptive Gauss-Kronrod (7/15) quadrature on a finite interval with a
/// tolerance relative to the magnitude of the integral.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (v, err) = gk15(f, a, b);
        // Stop at the tolerance or once the error estimate is round-off.
        if err <= tol || err <= 64.0 * f64::EPSILON * v.abs() || depth > 40 {
            return v;
        }
        let m = 0.5 * (a + b);
        rec(f, a, m, 0.5 * tol, depth + 1) + rec(f, m, b, 0.5 * tol, depth + 1)
    }
    let pieces = 64;
    let h = (b - a) / pieces as f64;
    let scale: f64 = (0..pieces)
        .map(|i| gk15(&f, a + h * i as f64, a + h * (i + 1) as f64).0.abs())
        .sum();
    let tol = (rel_tol * scale).max(f64::MIN_POSITIVE);
    (0..pieces)
        .map(|i| rec(&f, a + h * i as f64, a + h * (i + 1) as f64, tol / pieces as f64, 0))
        .sum()
}

/// Integrate a density on (0, ∞) by substituting `x = eᵘ` over `[lo, hi]`
/// in log space.
pub fn integrate_positive<F: Fn(f64) -> f64>(f: F, log_lo: f64, log_hi: f64, tol: f64) -> f64 {
    integrate(|u| f(u.exp()) * u.exp(), log_lo, log_hi, tol)
}

/// Tabulated CDF of a density on (0, ∞), built by log-space quadrature on a
/// fine grid and normalized numerically.
pub struct TabulatedCdf {
    grid: Vec<f64>,
    cdf: Vec<f64>,
}

impl TabulatedCdf {
    pub fn from_log_density<F: Fn(f64) -> f64>(logf: F, log_lo: f64, log_hi: f64, cells: usize) -> Self {
        // Shift by the maximum on the grid so the exponentials stay finite.
        let h = (log_hi - log_lo) / cells as f64;
        let shift = (0..=cells * 4)
            .map(|i| {
                let u = log_lo + (log_hi - log_lo) * i as f64 / (cells * 4) as f64;
                logf(u.exp()) + u
            })
            .fold(f64::NEG_INFINITY, f64::max);
        let mut grid = Vec::with_capacity(cells + 1);
        let mut cdf = Vec::with_capacity(cells + 1);
        let mut acc = 0.0;
        grid.push(log_lo.exp());
        cdf.push(0.0);
        for i in 0..cells {
            let a = log_lo + h * i as f64;
            let (v, _) = gk15(&|u: f64| (logf(u.exp()) + u - shift).exp(), a, a + h);
            acc += v;
            grid.push((a + h).exp());
            cdf.push(acc);
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Self { grid, cdf }
    }

    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.grid[0] {
            return 0.0;
        }
        if x >= *self.grid.last().unwrap() {
            return 1.0;
        }
        let i = self.grid.partition_point(|&g| g <= x);
        let (x0, x1) = (self.grid[i - 1], self.grid[i]);
        let t = (x.ln() - x0.ln()) / (x1.ln() - x0.ln());
        self.cdf[i - 1] + t * (self.cdf[i] - self.cdf[i - 1])
    }

    /// Mean of the tabulated law, by the trapezoid rule on the CDF.
    pub fn mean(&self) -> f64 {
        // E[X] = ∫ (1 − F(x)) dx over the tabulated support.
        let mut m = self.grid[0];
        for i in 1..self.grid.len() {
            let w = self.grid[i] - self.grid[i - 1];
            m += w * (1.0 - 0.5 * (self.cdf[i] + self.cdf[i - 1]));
        }
        m
    }
}

/// One-sample Kolmogorov distance between draws and a CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(draws: &[f64], cdf: F) -> f64 {
    let mut xs = draws.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Two-sample Kolmogorov distance.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_by(|p, q| p.partial_cmp(q).unwrap());
    xb.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= x {
            i += 1;
        }
        while j < xb.len() && xb[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

pub fn covariance(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (xs.len() - 1) as f64
}
