//! Parameters, latent state, priors and the likelihoods every sampler block
//! and the DIC computation evaluate.

use nalgebra::{DMatrix, DVector};

use crate::correlation::{build_corr_matrix, KernelSpec};
use crate::data::{median_distance, pairwise_distances, DistanceMatrix, SpatialDataset};
use crate::error::{Error, Result};
use crate::linalg::{add_diagonal, spd_factor};
use crate::rng::{exponential_logpdf, gig_logpdf, inv_gamma_logpdf, GigParams};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Model parameters `η = (β, σ², ω², τ², θ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Params {
    pub beta: DVector<f64>,
    pub sigma2: f64,
    pub omega2: f64,
    pub tau2: f64,
    pub kernel: KernelSpec,
}

impl Params {
    pub fn validate(&self, p: usize, variant: ModelVariant) -> Result<()> {
        if self.beta.len() != p {
            return Err(Error::InvalidParameter(format!(
                "beta has length {}, design has {p} columns",
                self.beta.len()
            )));
        }
        if self.beta.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter("beta must be finite".into()));
        }
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !pos(self.sigma2) || !pos(self.omega2) {
            return Err(Error::InvalidParameter(format!(
                "sigma2 and omega2 must be positive, got {} and {}",
                self.sigma2, self.omega2
            )));
        }
        match variant {
            ModelVariant::MeasurementError if !pos(self.tau2) => {
                return Err(Error::InvalidParameter(format!("tau2 must be positive, got {}", self.tau2)))
            }
            ModelVariant::Naive if self.tau2 != 0.0 => {
                return Err(Error::InvalidParameter("the naive model fixes tau2 = 0".into()))
            }
            _ => {}
        }
        self.kernel.validate()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma2.sqrt()
    }

    pub fn tau(&self) -> f64 {
        self.tau2.sqrt()
    }
}

/// `Σ_{j ∈ mask} β_j²`.
pub fn masked_beta_sq(beta: &DVector<f64>, mask: &[bool]) -> f64 {
    beta.iter().zip(mask).filter(|(_, &m)| m).map(|(b, _)| b * b).sum()
}

/// Latent fields: the unit-variance spatial field `ε` and the standardized
/// measurement-error field `V` (zero outside the error-prone columns).
#[derive(Clone, Debug, PartialEq)]
pub struct LatentState {
    pub epsilon: DVector<f64>,
    pub v: DMatrix<f64>,
}

impl LatentState {
    pub fn zeros(n: usize, p: usize) -> Self {
        Self { epsilon: DVector::zeros(n), v: DMatrix::zeros(n, p) }
    }

    /// `Vβ`.
    pub fn v_beta(&self, beta: &DVector<f64>) -> DVector<f64> {
        &self.v * beta
    }

    pub fn validate(&self, data: &SpatialDataset) -> Result<()> {
        if self.epsilon.len() != data.n() || self.v.nrows() != data.n() || self.v.ncols() != data.p() {
            return Err(Error::InvalidParameter("latent state does not match the dataset".into()));
        }
        for (j, &m) in data.error_mask().iter().enumerate() {
            if !m && self.v.column(j).iter().any(|&x| x != 0.0) {
                return Err(Error::InvalidParameter(format!("V column {j} is not error-prone but nonzero")));
            }
        }
        if self.epsilon.iter().chain(self.v.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("latent state must be finite".into()));
        }
        Ok(())
    }
}

/// Prior constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hyperparams {
    /// Prior variance of each β_j.
    pub c1: f64,
    /// Inverse-gamma shape and rate for σ².
    pub c2: f64,
    pub c3: f64,
    /// GIG `a` and `b` for ω².
    pub c4: f64,
    pub c5: f64,
    /// GIG `a` and `b` for τ² (order 0).
    pub c6: f64,
    pub c7: f64,
    /// θ₁ ~ Exp(c8 / med(d)).
    pub c8: f64,
    /// θ₂ ~ Exp(c9).
    pub c9: f64,
    /// GIG order for ω².
    pub gamma_gig: f64,
}

impl Default for Hyperparams {
    /// Vague defaults; `θ₁` has prior mean `med_d`. The simulation study
    /// rescales `c₈`, see [`crate::simulation::study_hyperparams`].
    fn default() -> Self {
        Self {
            c1: 10.0,
            c2: 1.1,
            c3: 0.11,
            c4: 0.05,
            c5: 2.0,
            c6: 0.09,
            c7: 2.0,
            c8: 1.0,
            c9: 1.0,
            gamma_gig: 0.001,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        let cs = [self.c1, self.c2, self.c3, self.c4, self.c5, self.c6, self.c7, self.c8, self.c9];
        if cs.iter().all(|&c| c > 0.0 && c.is_finite()) && self.gamma_gig.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("hyperparameters must be positive: {self:?}")))
        }
    }

    pub fn omega2_prior(&self) -> GigParams {
        GigParams { gamma: self.gamma_gig, a: self.c4, b: self.c5 }
    }

    pub fn tau2_prior(&self) -> GigParams {
        GigParams { gamma: 0.0, a: self.c6, b: self.c7 }
    }
}

/// Measurement-error model, or the naive model that ignores the error.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelVariant {
    MeasurementError,
    Naive,
}

impl ModelVariant {
    pub fn name(&self) -> &'static str {
        match self {
            ModelVariant::MeasurementError => "mem",
            ModelVariant::Naive => "naive",
        }
    }
}

/// Log-prior split by parameter block.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PriorComponents {
    pub beta: f64,
    pub sigma2: f64,
    pub omega2: f64,
    pub tau2: f64,
    pub theta1: f64,
    pub theta2: f64,
}

impl PriorComponents {
    pub fn total(&self) -> f64 {
        self.beta + self.sigma2 + self.omega2 + self.tau2 + self.theta1 + self.theta2
    }
}

pub fn log_prior_components(
    params: &Params,
    hyper: &Hyperparams,
    med_d: f64,
    variant: ModelVariant,
) -> Result<PriorComponents> {
    let p = params.beta.len() as f64;
    let beta = -0.5 * (p * (LN_2PI + hyper.c1.ln()) + params.beta.norm_squared() / hyper.c1);
    let sigma2 = inv_gamma_logpdf(params.sigma2, hyper.c2, hyper.c3);
    let omega2 = gig_logpdf(params.omega2, &hyper.omega2_prior())?;
    let tau2 = match variant {
        ModelVariant::MeasurementError => gig_logpdf(params.tau2, &hyper.tau2_prior())?,
        ModelVariant::Naive => 0.0,
    };
    let theta1 = exponential_logpdf(params.kernel.range(), hyper.c8 / med_d);
    let theta2 = params.kernel.smoothness().map_or(0.0, |s| exponential_logpdf(s, hyper.c9));
    Ok(PriorComponents { beta, sigma2, omega2, tau2, theta1, theta2 })
}

pub fn log_prior(params: &Params, hyper: &Hyperparams, med_d: f64, variant: ModelVariant) -> Result<f64> {
    log_prior_components(params, hyper, med_d, variant).map(|c| c.total())
}

/// Log-density of `y ~ N(μβ, σ²[C + (ω² + τ² β_mᵀβ_m) I])` for a given
/// correlation matrix.
pub fn marginal_loglik_with_corr(
    params: &Params,
    y: &DVector<f64>,
    mu: &DMatrix<f64>,
    mask: &[bool],
    corr: &DMatrix<f64>,
) -> Result<f64> {
    let n = y.len();
    let nugget = params.omega2 + params.tau2 * masked_beta_sq(&params.beta, mask);
    let mut cov = corr.clone();
    add_diagonal(&mut cov, nugget);
    let f = spd_factor(&cov)?;
    let r = y - mu * &params.beta;
    let q = f.quad_form(&r) / params.sigma2;
    Ok(-0.5 * (n as f64 * (LN_2PI + params.sigma2.ln()) + f.log_det() + q))
}

/// Marginal log-likelihood with both latent fields integrated out.
pub fn marginal_loglik(params: &Params, data: &SpatialDataset) -> Result<f64> {
    let d = pairwise_distances(data.locations())?;
    let c = build_corr_matrix(&d, &params.kernel);
    marginal_loglik_with_corr(params, data.y(), data.mu(), data.error_mask(), &c)
}

/// Residuals `d_i = y_i − μ_iᵀβ − σε_i − στ v_iᵀβ`.
pub fn residuals(params: &Params, latent: &LatentState, data: &SpatialDataset) -> DVector<f64> {
    let s = params.sigma();
    let mut d = data.y() - data.mu() * &params.beta - &latent.epsilon * s;
    if params.tau2 > 0.0 {
        d -= latent.v_beta(&params.beta) * (s * params.tau());
    }
    d
}

/// White-noise log-likelihood given both latent fields: `Σ log N(d_i; 0, σ²ω²)`.
pub fn conditional_loglik(params: &Params, latent: &LatentState, data: &SpatialDataset) -> f64 {
    let d = residuals(params, latent, data);
    let var = params.sigma2 * params.omega2;
    -0.5 * (d.len() as f64 * (LN_2PI + var.ln()) + d.norm_squared() / var)
}

/// A dataset with its distances and median distance, shared by every
/// evaluation in a fit.
#[derive(Clone, Debug)]
pub struct SpatialModel {
    data: SpatialDataset,
    dist: DistanceMatrix,
    med_d: f64,
    variant: ModelVariant,
}

impl SpatialModel {
    /// The naive variant drops the error mask so no parameter touches `V`.
    pub fn new(data: SpatialDataset, variant: ModelVariant) -> Result<Self> {
        let data = match variant {
            ModelVariant::MeasurementError => {
                if !data.has_error_prone() {
                    return Err(Error::InvalidData(
                        "the measurement-error model needs at least one error-prone covariate".into(),
                    ));
                }
                data
            }
            ModelVariant::Naive => data.without_error_mask(),
        };
        let dist = pairwise_distances(data.locations())?;
        let med_d = median_distance(&dist)?;
        Ok(Self { data, dist, med_d, variant })
    }

    pub fn data(&self) -> &SpatialDataset {
        &self.data
    }

    pub fn distances(&self) -> &DistanceMatrix {
        &self.dist
    }

    pub fn med_d(&self) -> f64 {
        self.med_d
    }

    pub fn variant(&self) -> ModelVariant {
        self.variant
    }

    /// Replace the response, keeping locations and covariates.
    pub fn set_response(&mut self, y: DVector<f64>) -> Result<()> {
        self.data = self.data.with_response(y)?;
        Ok(())
    }

    pub fn corr_matrix(&self, kernel: &KernelSpec) -> DMatrix<f64> {
        build_corr_matrix(&self.dist, kernel)
    }

    pub fn marginal_loglik(&self, params: &Params) -> Result<f64> {
        let c = self.corr_matrix(&params.kernel);
        marginal_loglik_with_corr(params, self.data.y(), self.data.mu(), self.data.error_mask(), &c)
    }

    pub fn conditional_loglik(&self, params: &Params, latent: &LatentState) -> f64 {
        conditional_loglik(params, latent, &self.data)
    }

    pub fn log_prior(&self, params: &Params, hyper: &Hyperparams) -> Result<f64> {
        log_prior(params, hyper, self.med_d, self.variant)
    }
}
