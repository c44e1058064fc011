//! Isotropic correlation kernels and correlation-matrix assembly.

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::ln_gamma;

use crate::data::{DistanceMatrix, Location};
use crate::error::{Error, Result};
use crate::rng::ln_bessel_k;

/// Correlation kernel with its parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelSpec {
    /// `exp(−h/range)`.
    Exponential { range: f64 },
    /// `2^{1−ν}/Γ(ν) (h/range)^ν K_ν(h/range)` with smoothness `ν`.
    Matern { range: f64, smoothness: f64 },
}

impl KernelSpec {
    pub fn exponential(range: f64) -> Result<Self> {
        let k = KernelSpec::Exponential { range };
        k.validate()?;
        Ok(k)
    }

    pub fn matern(range: f64, smoothness: f64) -> Result<Self> {
        let k = KernelSpec::Matern { range, smoothness };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        match *self {
            KernelSpec::Exponential { range } if ok(range) => Ok(()),
            KernelSpec::Matern { range, smoothness } if ok(range) && ok(smoothness) => Ok(()),
            _ => Err(Error::InvalidParameter(format!("kernel parameters must be positive: {self:?}"))),
        }
    }

    pub fn range(&self) -> f64 {
        match *self {
            KernelSpec::Exponential { range } | KernelSpec::Matern { range, .. } => range,
        }
    }

    pub fn smoothness(&self) -> Option<f64> {
        match *self {
            KernelSpec::Exponential { .. } => None,
            KernelSpec::Matern { smoothness, .. } => Some(smoothness),
        }
    }

    /// Number of free kernel parameters (θ₁ only, or θ₁ and θ₂).
    pub fn n_params(&self) -> usize {
        match self {
            KernelSpec::Exponential { .. } => 1,
            KernelSpec::Matern { .. } => 2,
        }
    }

    /// Parameters as a vector `(θ₁[, θ₂])`.
    pub fn params(&self) -> Vec<f64> {
        match *self {
            KernelSpec::Exponential { range } => vec![range],
            KernelSpec::Matern { range, smoothness } => vec![range, smoothness],
        }
    }

    /// Same kernel family with new parameters.
    pub fn with_params(&self, theta: &[f64]) -> Result<Self> {
        let k = match self {
            KernelSpec::Exponential { .. } => KernelSpec::Exponential { range: theta[0] },
            KernelSpec::Matern { .. } => KernelSpec::Matern { range: theta[0], smoothness: theta[1] },
        };
        k.validate()?;
        Ok(k)
    }

    /// Correlation at distance `h`. Parameters are assumed validated.
    pub fn corr(&self, h: f64) -> f64 {
        match *self {
            KernelSpec::Exponential { range } => (-h / range).exp(),
            KernelSpec::Matern { range, smoothness } => matern_value(h, range, smoothness),
        }
    }
}

pub fn exponential_corr(h: f64, range: f64) -> Result<f64> {
    check_distance(h)?;
    KernelSpec::exponential(range).map(|k| k.corr(h))
}

pub fn matern_corr(h: f64, range: f64, smoothness: f64) -> Result<f64> {
    check_distance(h)?;
    KernelSpec::matern(range, smoothness).map(|k| k.corr(h))
}

fn check_distance(h: f64) -> Result<()> {
    if h >= 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("distance must be non-negative, got {h}")))
    }
}

fn matern_value(h: f64, range: f64, nu: f64) -> f64 {
    if h == 0.0 {
        return 1.0;
    }
    let u = h / range;
    // Far in the tail the log form is exact enough and avoids 0·∞.
    let lk = ln_bessel_k(nu, u).expect("positive argument");
    let l = (1.0 - nu) * std::f64::consts::LN_2 - ln_gamma(nu) + nu * u.ln() + lk;
    l.exp().min(1.0)
}

/// `C_θ` with entries `corr(d_ij)`; unit diagonal, exactly symmetric.
pub fn build_corr_matrix(d: &DistanceMatrix, k: &KernelSpec) -> DMatrix<f64> {
    let n = d.n();
    let mut c = DMatrix::identity(n, n);
    for j in 0..n {
        for i in 0..j {
            let v = k.corr(d.get(i, j));
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

/// Correlations between a new site and each data location.
pub fn cross_corr(site: &Location, locations: &[Location], k: &KernelSpec) -> DVector<f64> {
    DVector::from_iterator(locations.len(), locations.iter().map(|l| k.corr(site.distance(l))))
}
