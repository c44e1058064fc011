//! Generalized inverse Gaussian law with density
//!
//! ```text
//! f(x; γ, a, b) = (b/a)^γ x^{γ−1} exp{−½(a²/x + b²x)} / (2 K_γ(ab)),   x > 0.
//! ```
//!
//! Sampling follows Hörmann & Leydold (2014): the standardized variate
//! `y = x b/a` has density ∝ `y^{λ−1} exp{−(ω/2)(y + 1/y)}` with `ω = ab`.
//! Negative orders are handled through `X ~ GIG(−λ) ⇔ 1/X ~ GIG(λ)` in the
//! standardized form. Three exact rejection schemes cover the parameter
//! space: ratio-of-uniforms with mode shift, ratio-of-uniforms without shift,
//! and a piecewise envelope for small `ω` with `λ < 1`.

use rand::Rng;

use super::bessel::ln_bessel_k;
use crate::error::{Error, Result};

/// `GIG(γ, a, b)`: `a` multiplies `x⁻¹` (as `a²`), `b` multiplies `x` (as `b²`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GigParams {
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
}

impl GigParams {
    pub fn new(gamma: f64, a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite() && b > 0.0 && b.is_finite() && gamma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "GIG needs finite order and positive a, b; got ({gamma}, {a}, {b})"
            )));
        }
        Ok(Self { gamma, a, b })
    }

    /// Log normalizing constant `γ ln(b/a) − ln 2 − ln K_γ(ab)`.
    pub fn log_norm(&self) -> f64 {
        self.gamma * (self.b / self.a).ln()
            - std::f64::consts::LN_2
            - ln_bessel_k(self.gamma, self.a * self.b).expect("validated parameters")
    }

    /// `E[Xᵏ] = (a/b)ᵏ K_{γ+k}(ab) / K_γ(ab)`.
    pub fn moment(&self, k: f64) -> f64 {
        let w = self.a * self.b;
        let lk = ln_bessel_k(self.gamma + k, w).expect("validated parameters")
            - ln_bessel_k(self.gamma, w).expect("validated parameters");
        (k * (self.a / self.b).ln() + lk).exp()
    }

    pub fn mean(&self) -> f64 {
        self.moment(1.0)
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.moment(2.0) - m * m
    }
}

/// Log-density of `GIG(γ, a, b)` at `x > 0`.
pub fn gig_logpdf(x: f64, p: &GigParams) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::InvalidParameter(format!("GIG support is x > 0, got {x}")));
    }
    Ok(p.log_norm() + (p.gamma - 1.0) * x.ln() - 0.5 * (p.a * p.a / x + p.b * p.b * x))
}

/// Unnormalized log-density without the Bessel constant; enough for ratios.
pub fn gig_log_kernel(x: f64, p: &GigParams) -> f64 {
    (p.gamma - 1.0) * x.ln() - 0.5 * (p.a * p.a / x + p.b * p.b * x)
}

/// Mode of the standardized density `y^{λ−1} exp{−(ω/2)(y + 1/y)}`.
fn standard_mode(lambda: f64, omega: f64) -> f64 {
    if lambda >= 1.0 {
        ((lambda - 1.0) + ((lambda - 1.0).powi(2) + omega * omega).sqrt()) / omega
    } else {
        omega / (((1.0 - lambda).powi(2) + omega * omega).sqrt() + (1.0 - lambda))
    }
}

/// Exact draw from `GIG(γ, a, b)`.
pub fn sample_gig<R: Rng + ?Sized>(p: &GigParams, rng: &mut R) -> f64 {
    let omega = p.a * p.b;
    let scale = p.a / p.b;
    let lambda = p.gamma.abs();
    let y = if lambda > 2.0 || omega > 3.0 {
        rou_shift(lambda, omega, rng)
    } else if lambda >= 1.0 - 2.25 * omega * omega || omega > 0.2 {
        rou_noshift(lambda, omega, rng)
    } else {
        small_omega(lambda, omega, rng)
    };
    if p.gamma < 0.0 {
        scale / y
    } else {
        scale * y
    }
}

fn uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.random::<f64>()
}

/// Ratio-of-uniforms without mode shift (Dagpunar / Lehner).
fn rou_noshift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = standard_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);
    let ym = ((lambda + 1.0) + ((lambda + 1.0).powi(2) + omega * omega).sqrt()) / omega;
    let um = (0.5 * (lambda + 1.0) * ym.ln() - s * (ym + 1.0 / ym) - nc).exp();
    loop {
        let u = um * uniform(rng);
        let v = uniform(rng);
        let x = u / v;
        if v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

/// Ratio-of-uniforms with mode shift; the bounding rectangle comes from the
/// roots of a cubic.
fn rou_shift<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let t = 0.5 * (lambda - 1.0);
    let s = 0.25 * omega;
    let xm = standard_mode(lambda, omega);
    let nc = t * xm.ln() - s * (xm + 1.0 / xm);

    let a = -(2.0 * (lambda + 1.0) / omega + xm);
    let b = 2.0 * (lambda - 1.0) * xm / omega - 1.0;
    let c = xm;
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let fi = (-q / (2.0 * (-(p * p * p) / 27.0).sqrt())).acos();
    let fak = 2.0 * (-p / 3.0).sqrt();
    let y1 = fak * (fi / 3.0).cos() - a / 3.0;
    let y2 = fak * (fi / 3.0 + 4.0 / 3.0 * std::f64::consts::PI).cos() - a / 3.0;
    let uplus = (y1 - xm) * (t * y1.ln() - s * (y1 + 1.0 / y1) - nc).exp();
    let uminus = (y2 - xm) * (t * y2.ln() - s * (y2 + 1.0 / y2) - nc).exp();
    loop {
        let u = uminus + uniform(rng) * (uplus - uminus);
        let v = uniform(rng);
        let x = u / v + xm;
        if x > 0.0 && v.ln() <= t * x.ln() - s * (x + 1.0 / x) - nc {
            return x;
        }
    }
}

/// Rejection from a three-piece envelope for `0 ≤ λ < 1` and small `ω`,
/// where the density is not T-concave.
fn small_omega<R: Rng + ?Sized>(lambda: f64, omega: f64, rng: &mut R) -> f64 {
    let xm = standard_mode(lambda, omega);
    let x0 = omega / (1.0 - lambda);
    let k0 = ((lambda - 1.0) * xm.ln() - 0.5 * omega * (xm + 1.0 / xm)).exp();
    let area0 = k0 * x0;
    let two_over_omega = 2.0 / omega;
    // ln(x0^λ) and the integral of k1·x^{λ−1} over [x0, 2/ω], written with
    // expm1 so λ → 0 joins the logarithmic case continuously.
    let x0_pow = (lambda * x0.ln()).exp();
    let (k1, area1, k2, area2) = if x0 >= two_over_omega {
        let k2 = x0.powf(lambda - 1.0);
        (0.0, 0.0, k2, k2 * 2.0 * (-omega * x0 / 2.0).exp() / omega)
    } else {
        let k1 = (-omega).exp();
        let log_ratio = (two_over_omega / x0).ln();
        let area1 = if lambda == 0.0 {
            k1 * log_ratio
        } else {
            k1 * x0_pow * (lambda * log_ratio).exp_m1() / lambda
        };
        let k2 = two_over_omega.powf(lambda - 1.0);
        (k1, area1, k2, k2 * 2.0 * (-1.0f64).exp() / omega)
    };
    let total = area0 + area1 + area2;
    let tail_start = x0.max(two_over_omega);
    loop {
        let mut v = total * uniform(rng);
        let (x, hx) = if v <= area0 {
            (x0 * v / area0, k0)
        } else {
            v -= area0;
            if v <= area1 {
                let x = if lambda == 0.0 {
                    x0 * (v / k1).exp()
                } else {
                    x0 * ((lambda * v / (k1 * x0_pow)).ln_1p() / lambda).exp()
                };
                (x, k1 * x.powf(lambda - 1.0))
            } else {
                v -= area1;
                let x = -two_over_omega
                    * ((-omega / 2.0 * tail_start).exp() - omega / (2.0 * k2) * v).ln();
                (x, k2 * (-omega / 2.0 * x).exp())
            }
        };
        let u = uniform(rng) * hx;
        if u.ln() <= (lambda - 1.0) * x.ln() - omega / 2.0 * (x + 1.0 / x) {
            return x;
        }
    }
}
