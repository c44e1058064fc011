//! Seeded generation and density evaluation for the laws the model uses.
//!
//! All randomness flows through [`RngState`], a ChaCha8 stream with an
//! explicit seed and stream number. Parallel chains take distinct streams of
//! the same seed, so no OS entropy is ever consulted.

pub mod bessel;
pub mod gig;

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::SpdFactor;

pub use bessel::{bessel_k, ln_bessel_k};
pub use gig::{gig_log_kernel, gig_logpdf, sample_gig, GigParams};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Deterministic generator with explicit seed and stream.
#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, stream, inner }
    }

    /// Independent generator on another stream of the same seed.
    pub fn split(&self, stream: u64) -> Self {
        Self::with_stream(self.seed, stream)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }
}

impl RngCore for RngState {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

/// Standard normal draw.
pub fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

pub fn sample_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| sample_normal(rng))
}

/// How the factor passed to [`sample_mvn`] is to be read.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MvnForm {
    /// The factor is of the covariance: `x = m + L z`.
    Covariance,
    /// The factor is of the precision: `x = m + L⁻ᵀ z`.
    Precision,
}

/// Multivariate normal draw with mean `mean` and the given factor.
pub fn sample_mvn<R: Rng + ?Sized>(
    mean: &DVector<f64>,
    factor: &SpdFactor,
    form: MvnForm,
    rng: &mut R,
) -> DVector<f64> {
    let n = factor.dim();
    let mut z = sample_normal_vec(n, rng);
    match form {
        MvnForm::Covariance => z = factor.lower() * z,
        MvnForm::Precision => factor.solve_upper_mut(z.as_mut_slice()),
    }
    z + mean
}

/// Gamma draw with shape–rate parameterization (mean `shape/rate`).
pub fn sample_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> Result<f64> {
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return Err(Error::InvalidParameter(format!("Gamma({shape}, {rate}) needs positive parameters")));
    }
    let g = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::InvalidParameter(format!("Gamma({shape}, {rate}): {e}")))?;
    Ok(g.sample(rng))
}

/// Exponential draw with the given rate (mean `1/rate`).
pub fn sample_exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<f64> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::InvalidParameter(format!("Exp rate must be positive, got {rate}")));
    }
    let e = Exp::new(rate).map_err(|e| Error::InvalidParameter(format!("Exp({rate}): {e}")))?;
    Ok(e.sample(rng))
}

pub fn normal_logpdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (LN_2PI + var.ln() + (x - mean) * (x - mean) / var)
}

/// Inverse-gamma log-density with shape `a` and rate `b`:
/// `b^a/Γ(a) x^{−a−1} e^{−b/x}`.
pub fn inv_gamma_logpdf(x: f64, a: f64, b: f64) -> f64 {
    a * b.ln() - statrs::function::gamma::ln_gamma(a) - (a + 1.0) * x.ln() - b / x
}

pub fn exponential_logpdf(x: f64, rate: f64) -> f64 {
    rate.ln() - rate * x
}
