//! Metropolis-within-Gibbs sampler over `(ε, V, β, σ², ω², τ², θ)`.
//!
//! Each sweep first updates τ² (random walk) and σ² (exact draw) with ε and
//! `V` integrated out, then draws ε and `V` jointly given everything else.
//! β and ω² follow from their full conditionals given the latent fields, and
//! the kernel parameters take random-walk steps given ε. Random walks are
//! Gaussian on the log scale; their step sizes adapt toward a fixed
//! acceptance rate during burn-in only and are frozen afterwards.
//!
//! The latent-conditional σ², τ² and ε blocks remain available as free
//! functions.
//!
//! Each block is also exposed as a free function of explicit inputs so it can
//! be checked in isolation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;

use crate::correlation::{build_corr_matrix, KernelSpec};
use crate::data::{DistanceMatrix, SpatialDataset};
use crate::error::{Error, Result};
use crate::linalg::{add_diagonal, spd_factor, SpdFactor};
use crate::model::{masked_beta_sq, Hyperparams, LatentState, ModelVariant, Params, SpatialModel};
use crate::rng::{sample_gamma, sample_gig, sample_mvn, sample_normal, sample_normal_vec, GigParams, MvnForm, RngState};

/// Acceptance rate the burn-in adaptation aims for.
pub const TARGET_ACCEPTANCE: f64 = 0.35;

const MIN_STEP: f64 = 1e-3;
const MAX_STEP: f64 = 5.0;

/// Standard deviations of the log-scale random-walk proposals.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepSizes {
    pub tau2: f64,
    pub theta1: f64,
    pub theta2: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        Self { tau2: 0.5, theta1: 0.3, theta2: 0.3 }
    }
}

impl StepSizes {
    fn validate(&self) -> Result<()> {
        let all = [self.tau2, self.theta1, self.theta2];
        if all.iter().all(|&s| s >= 0.0 && s.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("step sizes must be non-negative: {self:?}")))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SamplerConfig {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub n_chains: usize,
    pub steps: StepSizes,
    /// Adapt step sizes during burn-in.
    pub adapt: bool,
    pub seed: u64,
}

impl Default for SamplerConfig {
    /// The simulation-study schedule: 75,000 sweeps, the first 25,000
    /// discarded, every 10th kept.
    fn default() -> Self {
        Self {
            n_iter: 75_000,
            burn_in: 25_000,
            thin: 10,
            n_chains: 1,
            steps: StepSizes::default(),
            adapt: true,
            seed: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iter == 0 || self.burn_in >= self.n_iter {
            return Err(Error::InvalidParameter(format!(
                "need burn_in < n_iter, got {} and {}",
                self.burn_in, self.n_iter
            )));
        }
        if self.thin == 0 || self.n_chains == 0 {
            return Err(Error::InvalidParameter("thin and n_chains must be at least 1".into()));
        }
        self.steps.validate()
    }

    /// Number of stored draws per chain.
    pub fn n_stored(&self) -> usize {
        (self.n_iter - self.burn_in) / self.thin
    }
}

/// Fraction of accepted proposals per MH block; `None` for blocks the
/// variant does not run.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AcceptanceRates {
    pub tau2: Option<f64>,
    pub theta1: Option<f64>,
    pub theta2: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Draw {
    pub iteration: usize,
    pub params: Params,
    pub latent: LatentState,
}

/// Stored post-burn-in draws of one chain.
#[derive(Clone, Debug)]
pub struct Chain {
    pub draws: Vec<Draw>,
    pub acceptance: AcceptanceRates,
    pub config: SamplerConfig,
    pub variant: ModelVariant,
    /// Stream of the master seed this chain ran on.
    pub stream: u64,
    /// Step sizes after adaptation.
    pub steps: StepSizes,
    pub names: Vec<String>,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    /// Trace of the named parameter (see [`eta_names`]).
    pub fn trace(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.names.iter().position(|n| n == name)?;
        Some(self.draws.iter().map(|d| eta_values(&d.params, self.variant)[k]).collect())
    }

    /// One row of `η` values per stored draw, columns as [`Chain::names`].
    pub fn eta_rows(&self) -> Vec<Vec<f64>> {
        self.draws.iter().map(|d| eta_values(&d.params, self.variant)).collect()
    }
}

/// Names of the scalar components of `η`: `beta_<column>`, `sigma2`,
/// `omega2`, `tau2` (measurement-error model only), `theta1`, `theta2`
/// (Matérn only).
pub fn eta_names(columns: &[String], kernel: &KernelSpec, variant: ModelVariant) -> Vec<String> {
    let mut out: Vec<String> = columns.iter().map(|c| format!("beta_{c}")).collect();
    out.push("sigma2".into());
    out.push("omega2".into());
    if variant == ModelVariant::MeasurementError {
        out.push("tau2".into());
    }
    out.push("theta1".into());
    if kernel.n_params() == 2 {
        out.push("theta2".into());
    }
    out
}

pub fn eta_values(params: &Params, variant: ModelVariant) -> Vec<f64> {
    let mut out: Vec<f64> = params.beta.iter().copied().collect();
    out.push(params.sigma2);
    out.push(params.omega2);
    if variant == ModelVariant::MeasurementError {
        out.push(params.tau2);
    }
    out.extend(params.kernel.params());
    out
}

/// Inverse of [`eta_values`] given the kernel family.
pub fn params_from_eta(values: &[f64], p: usize, kernel: &KernelSpec, variant: ModelVariant) -> Result<Params> {
    let expect = p + 2 + usize::from(variant == ModelVariant::MeasurementError) + kernel.n_params();
    if values.len() != expect {
        return Err(Error::InvalidParameter(format!("expected {expect} values, got {}", values.len())));
    }
    let beta = DVector::from_row_slice(&values[..p]);
    let mut k = p;
    let sigma2 = values[k];
    let omega2 = values[k + 1];
    k += 2;
    let tau2 = if variant == ModelVariant::MeasurementError {
        k += 1;
        values[k - 1]
    } else {
        0.0
    };
    let kernel = kernel.with_params(&values[k..])?;
    Ok(Params { beta, sigma2, omega2, tau2, kernel })
}

fn v_beta(params: &Params, latent: &LatentState) -> DVector<f64> {
    if params.tau2 > 0.0 {
        latent.v_beta(&params.beta)
    } else {
        DVector::zeros(latent.epsilon.len())
    }
}

fn epsilon_z(data: &SpatialDataset, params: &Params, latent: &LatentState) -> DVector<f64> {
    let s = params.sigma();
    let w = v_beta(params, latent);
    (data.y() - data.mu() * &params.beta - w * (s * params.tau())) / (params.omega2 * s)
}

/// `A₁ = C⁻¹ + I/ω²` and `z*` with `z_i = (y_i − μ_iᵀβ − στ v_iᵀβ)/(ω²σ)`.
pub fn epsilon_conditional(
    data: &SpatialDataset,
    params: &Params,
    latent: &LatentState,
    corr_inv: &DMatrix<f64>,
) -> (DMatrix<f64>, DVector<f64>) {
    let z = epsilon_z(data, params, latent);
    let mut a1 = corr_inv.clone();
    add_diagonal(&mut a1, 1.0 / params.omega2);
    (a1, z)
}

/// Draw `ε ~ N(A₁⁻¹z*, A₁⁻¹)`.
pub fn sample_epsilon<R: Rng + ?Sized>(
    data: &SpatialDataset,
    params: &Params,
    latent: &LatentState,
    corr_inv: &DMatrix<f64>,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (a1, z) = epsilon_conditional(data, params, latent, corr_inv);
    let f = spd_factor(&a1)?;
    let mean = f.solve(&z);
    Ok(sample_mvn(&mean, &f, MvnForm::Precision, rng))
}

/// The same law as [`sample_epsilon`] drawn from `C` and its factor, without
/// forming `C⁻¹`. With `u = ω²z*`, `ε₀ ~ N(0, C)` and `e ~ N(0, ω²I)`,
/// `ε₀ + C(C + ω²I)⁻¹(u − ε₀ − e)` has mean `A₁⁻¹z*` and covariance
/// `C − C(C + ω²I)⁻¹C = A₁⁻¹`.
pub fn sample_epsilon_cov<R: Rng + ?Sized>(
    data: &SpatialDataset,
    params: &Params,
    latent: &LatentState,
    corr: &DMatrix<f64>,
    corr_factor: &SpdFactor,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let n = data.n();
    let u = epsilon_z(data, params, latent) * params.omega2;
    let eps0 = corr_factor.lower() * sample_normal_vec(n, rng);
    let sd = params.omega2.sqrt();
    let resid = DVector::from_fn(n, |i, _| u[i] - eps0[i] - sd * sample_normal(rng));
    let mut k = corr.clone();
    add_diagonal(&mut k, params.omega2);
    let alpha = spd_factor(&k)?.solve(&resid);
    Ok(eps0 + corr * alpha)
}

/// Per-site precision `A₂` and precision-weighted mean `r*` of `w = Vβ`.
///
/// Each `w_i` has prior `N(0, β_mᵀβ_m)` (the rows of `V` are standard normal
/// on the error-prone columns), and the residual
/// `r_i = (y_i − μ_iᵀβ − σε_i)/(στ)` observes it with precision `τ²/ω²`, so
/// `A₂ = τ²/ω² + 1/β_mᵀβ_m` and `r* = (τ²/ω²) r`. `None` when every
/// error-prone coefficient is zero.
pub fn v_conditional(
    data: &SpatialDataset,
    params: &Params,
    latent: &LatentState,
) -> Option<(f64, DVector<f64>)> {
    let bb = masked_beta_sq(&params.beta, data.error_mask());
    if !(bb > 0.0) {
        return None;
    }
    let st = params.sigma() * params.tau();
    let r = (data.y() - data.mu() * &params.beta - &latent.epsilon * params.sigma()) / st;
    let ratio = params.tau2 / params.omega2;
    Some((ratio + 1.0 / bb, r * ratio))
}

/// Rows of `V` given `w = Vβ`: each row is its conditional law given the
/// linear constraint, `v_i = w_i β_m/(β_mᵀβ_m) + (I − β_mβ_mᵀ/β_mᵀβ_m) z_i`.
/// The first term is the minimum-norm solution; the projected noise restores
/// the spread orthogonal to `β_m`. With one error-prone column the noise term
/// vanishes and `V = w/β_j`.
pub fn recover_v<R: Rng + ?Sized>(
    w: &DVector<f64>,
    beta: &DVector<f64>,
    mask: &[bool],
    rng: &mut R,
) -> DMatrix<f64> {
    let n = w.len();
    let cols: Vec<usize> = (0..mask.len()).filter(|&j| mask[j]).collect();
    let bb: f64 = cols.iter().map(|&j| beta[j] * beta[j]).sum();
    let mut v = DMatrix::zeros(n, mask.len());
    for i in 0..n {
        for &j in &cols {
            v[(i, j)] = w[i] * beta[j] / bb;
        }
        if cols.len() > 1 {
            let z: Vec<f64> = cols.iter().map(|_| sample_normal(rng)).collect();
            let proj: f64 = cols.iter().zip(&z).map(|(&j, zj)| beta[j] * zj).sum::<f64>() / bb;
            for (&j, zj) in cols.iter().zip(&z) {
                v[(i, j)] += zj - beta[j] * proj;
            }
        }
    }
    v
}

/// Draw `w = Vβ` and recover `V`. `None` (leave `V` as is) when every
/// error-prone coefficient is zero.
pub fn sample_v<R: Rng + ?Sized>(
    data: &SpatialDataset,
    params: &Params,
    latent: &LatentState,
    rng: &mut R,
) -> Option<DMatrix<f64>> {
    let (a2, r_star) = v_conditional(data, params, latent)?;
    let sd = (1.0 / a2).sqrt();
    let w = DVector::from_fn(r_star.len(), |i, _| r_star[i] / a2 + sd * sample_normal(rng));
    Some(recover_v(&w, &params.beta, data.error_mask(), rng))
}

/// `A₃ = T*ᵀT*/(σ²ω²) + I/c₁` and `F = T*ᵀt/(σ²ω²)` with `T* = μ + στV`,
/// `t = y − σε`.
pub fn beta_conditional(
    data: &SpatialDataset,
    params: &Params,
    latent: &LatentState,
    hyper: &Hyperparams,
) -> (DMatrix<f64>, DVector<f64>) {
    let s = params.sigma();
    let t_star = if params.tau2 > 0.0 {
        data.mu() + &latent.v * (s * params.tau())
    } else {
        data.mu().clone()
    };
    let t = data.y() - &latent.epsilon * s;
    let scale = 1.0 / (params.sigma2 * params.omega2);
    let mut a3 = t_star.tr_mul(&t_star) * scale;
    add_diagonal(&mut a3, 1.0 / hyper.c1);
    let f = t_star.tr_mul(&t) * scale;
    (a3, f)
}

pub fn sample_beta<R: Rng + ?Sized>(
    data: &SpatialDataset,
    params: &Params,
    latent: &LatentState,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<DVector<f64>> {
    let (a3, f) = beta_conditional(data, params, latent, hyper);
    let fac = spd_factor(&a3)?;
    let mean = fac.solve(&f);
    Ok(sample_mvn(&mean, &fac, MvnForm::Precision, rng))
}

/// Log acceptance ratio of a log-scale random walk from `x` to `x_new`
/// for a target density on `x` (the Jacobian of `log x` included).
pub fn mh_log_ratio<F: Fn(f64) -> f64>(log_target: &F, x: f64, x_new: f64) -> f64 {
    log_target(x_new) - log_target(x) + x_new.ln() - x.ln()
}

/// One log-scale random-walk step.
pub fn mh_log_scale_step<F: Fn(f64) -> f64, R: Rng + ?Sized>(
    x: f64,
    log_target: &F,
    step: f64,
    rng: &mut R,
) -> (f64, bool) {
    let x_new = x * (step * sample_normal(rng)).exp();
    let u: f64 = rng.random();
    let lr = mh_log_ratio(log_target, x, x_new);
    if x_new > 0.0 && x_new.is_finite() && u.ln() < lr {
        (x_new, true)
    } else {
        (x, false)
    }
}

/// Unnormalized log full conditional of σ²:
/// `−(n/2 + c₂ + 1) ln σ² − Σ(q*_i − q_i/σ)²/(2ω²) − c₃/σ²` with
/// `q = y − μβ`, `q* = ε + τVβ`.
pub fn sigma2_log_target(
    sigma2: f64,
    data: &SpatialDataset,
    params: &Params,
    latent: &LatentState,
    hyper: &Hyperparams,
) -> f64 {
    let q = data.y() - data.mu() * &params.beta;
    let q_star = &latent.epsilon + v_beta(params, latent) * params.tau();
    sigma2_kernel(sigma2, &q, &q_star, params.omega2, hyper)
}

fn sigma2_kernel(sigma2: f64, q: &DVector<f64>, q_star: &DVector<f64>, omega2: f64, hyper: &Hyperparams) -> f64 {
    let n = q.len() as f64;
    let s = sigma2.sqrt();
    let ss: f64 = q.iter().zip(q_star.iter()).map(|(a, b)| (b - a / s).powi(2)).sum();
    -(0.5 * n + hyper.c2 + 1.0) * sigma2.ln() - ss / (2.0 * omega2) - hyper.c3 / sigma2
}

pub fn mh_sigma2<R: Rng + ?Sized>(
    data: &SpatialDataset,
    params: &Params,
    latent: &LatentState,
    hyper: &Hyperparams,
    step: f64,
    rng: &mut R,
) -> (f64, bool) {
    let q = data.y() - data.mu() * &params.beta;
    let q_star = &latent.epsilon + v_beta(params, latent) * params.tau();
    let target = |s2: f64| sigma2_kernel(s2, &q, &q_star, params.omega2, hyper);
    mh_log_scale_step(params.sigma2, &target, step, rng)
}

/// `ω² | … ~ GIG(γ − n/2, √d*, c₅)` with `d* = c₄² + Σd_i²/σ²`.
pub fn omega2_conditional(
    data: &SpatialDataset,
    params: &Params,
    latent: &LatentState,
    hyper: &Hyperparams,
) -> GigParams {
    let d = crate::model::residuals(params, latent, data);
    let d_star = hyper.c4 * hyper.c4 + d.norm_squared() / params.sigma2;
    GigParams { gamma: hyper.gamma_gig - 0.5 * data.n() as f64, a: d_star.sqrt(), b: hyper.c5 }
}

pub fn sample_omega2<R: Rng + ?Sized>(
    data: &SpatialDataset,
    params: &Params,
    latent: &LatentState,
    hyper: &Hyperparams,
    rng: &mut R,
) -> f64 {
    sample_gig(&omega2_conditional(data, params, latent, hyper), rng)
}

/// Unnormalized log full conditional of τ²:
/// `−ln τ² − ½[c₆²/τ² + c₇²τ² + Σ(r*_i − τ v_iᵀβ)²/ω²]` with
/// `r* = (y − μβ − σε)/σ`.
pub fn tau2_log_target(
    tau2: f64,
    data: &SpatialDataset,
    params: &Params,
    latent: &LatentState,
    hyper: &Hyperparams,
) -> f64 {
    let r_star = (data.y() - data.mu() * &params.beta) / params.sigma() - &latent.epsilon;
    let w = latent.v_beta(&params.beta);
    tau2_kernel(tau2, &r_star, &w, params.omega2, hyper)
}

fn tau2_kernel(tau2: f64, r_star: &DVector<f64>, w: &DVector<f64>, omega2: f64, hyper: &Hyperparams) -> f64 {
    let t = tau2.sqrt();
    let ss: f64 = r_star.iter().zip(w.iter()).map(|(r, wi)| (r - t * wi).powi(2)).sum();
    -tau2.ln() - 0.5 * (hyper.c6 * hyper.c6 / tau2 + hyper.c7 * hyper.c7 * tau2 + ss / omega2)
}

pub fn mh_tau2<R: Rng + ?Sized>(
    data: &SpatialDataset,
    params: &Params,
    latent: &LatentState,
    hyper: &Hyperparams,
    step: f64,
    rng: &mut R,
) -> (f64, bool) {
    let r_star = (data.y() - data.mu() * &params.beta) / params.sigma() - &latent.epsilon;
    let w = latent.v_beta(&params.beta);
    let target = |t2: f64| tau2_kernel(t2, &r_star, &w, params.omega2, hyper);
    mh_log_scale_step(params.tau2, &target, step, rng)
}

/// Nugget `ω² + τ²β_mᵀβ_m` of `(y − μβ)/σ` once ε and `V` are integrated out.
pub fn marginal_nugget(data: &SpatialDataset, params: &Params) -> f64 {
    let me = if params.tau2 > 0.0 { params.tau2 * masked_beta_sq(&params.beta, data.error_mask()) } else { 0.0 };
    params.omega2 + me
}

/// Factor of `K = C + (ω² + τ²β_mᵀβ_m)I`.
pub fn marginal_factor(data: &SpatialDataset, params: &Params, corr: &DMatrix<f64>) -> Result<SpdFactor> {
    let mut k = corr.clone();
    add_diagonal(&mut k, marginal_nugget(data, params));
    spd_factor(&k)
}

/// Log density of τ² given `(β, σ², ω², θ)` with ε and `V` integrated out,
/// `−½ ln|K| − qᵀK⁻¹q/(2σ²)` plus the GIG prior kernel, with `q = y − μβ`,
/// and the factor of `K` it used.
pub fn tau2_marginal_log_target(
    tau2: f64,
    data: &SpatialDataset,
    params: &Params,
    corr: &DMatrix<f64>,
    hyper: &Hyperparams,
) -> Result<(f64, SpdFactor)> {
    let p = Params { tau2, ..params.clone() };
    let f = marginal_factor(data, &p, corr)?;
    let q = data.y() - data.mu() * &params.beta;
    let prior = -tau2.ln() - 0.5 * (hyper.c6 * hyper.c6 / tau2 + hyper.c7 * hyper.c7 * tau2);
    Ok((-0.5 * f.log_det() - 0.5 * f.quad_form(&q) / params.sigma2 + prior, f))
}

/// Log-scale random walk on τ² under [`tau2_marginal_log_target`]. Returns
/// the new τ², the factor of `K` at it, and whether the move was accepted.
pub fn mh_tau2_marginal<R: Rng + ?Sized>(
    data: &SpatialDataset,
    params: &Params,
    corr: &DMatrix<f64>,
    hyper: &Hyperparams,
    step: f64,
    rng: &mut R,
) -> Result<(f64, SpdFactor, bool)> {
    let old = params.tau2;
    let (current, f) = tau2_marginal_log_target(old, data, params, corr, hyper)?;
    let new = old * (step * sample_normal(rng)).exp();
    let u: f64 = rng.random();
    if new > 0.0 && new.is_finite() {
        if let Ok((lt, g)) = tau2_marginal_log_target(new, data, params, corr, hyper) {
            if u.ln() < lt - current + new.ln() - old.ln() {
                return Ok((new, g, true));
            }
        }
    }
    Ok((old, f, false))
}

/// σ² given `(β, ω², τ², θ)` with ε and `V` integrated out:
/// `IG(c₂ + n/2, c₃ + qᵀK⁻¹q/2)`, `q = y − μβ`, from the factor of `K`.
pub fn sample_sigma2_marginal<R: Rng + ?Sized>(
    data: &SpatialDataset,
    params: &Params,
    k_factor: &SpdFactor,
    hyper: &Hyperparams,
    rng: &mut R,
) -> Result<f64> {
    let q = data.y() - data.mu() * &params.beta;
    let shape = hyper.c2 + 0.5 * data.n() as f64;
    let rate = hyper.c3 + 0.5 * k_factor.quad_form(&q);
    Ok(1.0 / sample_gamma(shape, rate, rng)?)
}

/// ε given `(β, σ², ω², τ², θ)` with `V` integrated out. With
/// `u = (y − μβ)/σ`, `ε₀ ~ N(0, C)` and `e ~ N(0, dI)` for the nugget `d`,
/// `ε₀ + CK⁻¹(u − ε₀ − e)` has law `N(CK⁻¹u, C − CK⁻¹C)`.
pub fn sample_epsilon_marginal<R: Rng + ?Sized>(
    data: &SpatialDataset,
    params: &Params,
    corr: &DMatrix<f64>,
    corr_factor: &SpdFactor,
    k_factor: &SpdFactor,
    rng: &mut R,
) -> DVector<f64> {
    let n = data.n();
    let u = (data.y() - data.mu() * &params.beta) / params.sigma();
    let eps0 = corr_factor.lower() * sample_normal_vec(n, rng);
    let sd = marginal_nugget(data, params).sqrt();
    let resid = DVector::from_fn(n, |i, _| u[i] - eps0[i] - sd * sample_normal(rng));
    eps0 + corr * k_factor.solve(&resid)
}

fn theta_log_prior(kernel: &KernelSpec, hyper: &Hyperparams, med_d: f64) -> f64 {
    let mut lp = -(hyper.c8 / med_d) * kernel.range();
    if let Some(s) = kernel.smoothness() {
        lp -= hyper.c9 * s;
    }
    lp
}

/// Unnormalized log full conditional of the kernel parameters,
/// `−½ ln|C_θ| − ½ εᵀC_θ⁻¹ε` plus the exponential priors, with the factor of
/// `C_θ` it was computed from.
pub fn theta_log_target(
    kernel: &KernelSpec,
    epsilon: &DVector<f64>,
    dist: &DistanceMatrix,
    hyper: &Hyperparams,
    med_d: f64,
) -> Result<(f64, SpdFactor)> {
    let f = spd_factor(&build_corr_matrix(dist, kernel))?;
    let lt = theta_target_from_factor(&f, kernel, epsilon, hyper, med_d);
    Ok((lt, f))
}

fn theta_target_from_factor(
    f: &SpdFactor,
    kernel: &KernelSpec,
    epsilon: &DVector<f64>,
    hyper: &Hyperparams,
    med_d: f64,
) -> f64 {
    -0.5 * f.log_det() - 0.5 * f.quad_form(epsilon) + theta_log_prior(kernel, hyper, med_d)
}

/// Outcome of the kernel-parameter block.
#[derive(Clone, Debug)]
pub struct ThetaUpdate {
    pub kernel: KernelSpec,
    /// Acceptance flags for θ₁ and (Matérn) θ₂.
    pub accepted: [bool; 2],
    /// Factor of `C_θ` at the returned kernel.
    pub factor: SpdFactor,
}

/// Log-scale random walk on each kernel parameter in turn; a proposal whose
/// correlation matrix cannot be factored is rejected.
pub fn mh_theta<R: Rng + ?Sized>(
    kernel: &KernelSpec,
    epsilon: &DVector<f64>,
    dist: &DistanceMatrix,
    hyper: &Hyperparams,
    med_d: f64,
    steps: &StepSizes,
    rng: &mut R,
) -> Result<ThetaUpdate> {
    let (_, f) = theta_log_target(kernel, epsilon, dist, hyper, med_d)?;
    Ok(mh_theta_from(kernel, f, epsilon, dist, hyper, med_d, steps, rng))
}

#[allow(clippy::too_many_arguments)]
fn mh_theta_from<R: Rng + ?Sized>(
    kernel: &KernelSpec,
    factor: SpdFactor,
    epsilon: &DVector<f64>,
    dist: &DistanceMatrix,
    hyper: &Hyperparams,
    med_d: f64,
    steps: &StepSizes,
    rng: &mut R,
) -> ThetaUpdate {
    let mut kernel = *kernel;
    let mut factor = factor;
    let mut current = theta_target_from_factor(&factor, &kernel, epsilon, hyper, med_d);
    let mut accepted = [false; 2];
    for (j, step) in [steps.theta1, steps.theta2].into_iter().enumerate().take(kernel.n_params()) {
        let mut theta = kernel.params();
        let old = theta[j];
        let new = old * (step * sample_normal(rng)).exp();
        let u: f64 = rng.random();
        theta[j] = new;
        let Ok(proposal) = kernel.with_params(&theta) else { continue };
        let Ok((lt, f)) = theta_log_target(&proposal, epsilon, dist, hyper, med_d) else { continue };
        if u.ln() < lt - current + new.ln() - old.ln() {
            kernel = proposal;
            factor = f;
            current = lt;
            accepted[j] = true;
        }
    }
    ThetaUpdate { kernel, accepted, factor }
}

/// Acceptance flags of one sweep; `None` for blocks not run.
#[derive(Clone, Copy, Debug, Default)]
pub struct SweepStats {
    pub tau2: Option<bool>,
    pub theta1: Option<bool>,
    pub theta2: Option<bool>,
}

/// Sampler state: current parameters and latent fields plus `C_θ` and its
/// factor at the current kernel.
#[derive(Clone, Debug)]
pub struct GibbsSampler {
    model: SpatialModel,
    hyper: Hyperparams,
    params: Params,
    latent: LatentState,
    corr: DMatrix<f64>,
    corr_factor: SpdFactor,
    steps: StepSizes,
}

impl GibbsSampler {
    pub fn new(
        model: SpatialModel,
        hyper: Hyperparams,
        params: Params,
        latent: LatentState,
        steps: StepSizes,
    ) -> Result<Self> {
        hyper.validate()?;
        steps.validate()?;
        let mut params = params;
        let mut latent = latent;
        if model.variant() == ModelVariant::Naive {
            params.tau2 = 0.0;
            latent.v.fill(0.0);
        }
        params.validate(model.data().p(), model.variant())?;
        latent.validate(model.data())?;
        let corr = model.corr_matrix(&params.kernel);
        let corr_factor = spd_factor(&corr)?;
        Ok(Self { model, hyper, params, latent, corr, corr_factor, steps })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    pub fn latent(&self) -> &LatentState {
        &self.latent
    }

    pub fn model(&self) -> &SpatialModel {
        &self.model
    }

    pub fn steps(&self) -> &StepSizes {
        &self.steps
    }

    pub fn steps_mut(&mut self) -> &mut StepSizes {
        &mut self.steps
    }

    pub fn set_response(&mut self, y: DVector<f64>) -> Result<()> {
        self.model.set_response(y)
    }

    /// Draw a response from the white-noise likelihood at the current state:
    /// `y = μβ + σε + στVβ + σω ρ`.
    pub fn simulate_response<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let p = &self.params;
        let data = self.model.data();
        let s = p.sigma();
        let mut y = data.mu() * &p.beta + &self.latent.epsilon * s + v_beta(p, &self.latent) * (s * p.tau());
        let noise_sd = s * p.omega2.sqrt();
        for yi in y.iter_mut() {
            *yi += noise_sd * sample_normal(rng);
        }
        y
    }

    /// One sweep. τ² and σ² are updated with ε and `V` integrated out, then
    /// ε and `V` are drawn from their joint conditional, then β, ω² and θ
    /// given the latent fields.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<SweepStats> {
        let mem = self.model.variant() == ModelVariant::MeasurementError;
        let mut stats = SweepStats::default();
        let data = self.model.data();

        let k_factor = if mem {
            let (t2, f, acc) = mh_tau2_marginal(data, &self.params, &self.corr, &self.hyper, self.steps.tau2, rng)?;
            self.params.tau2 = t2;
            stats.tau2 = Some(acc);
            f
        } else {
            marginal_factor(data, &self.params, &self.corr)?
        };

        self.params.sigma2 = sample_sigma2_marginal(data, &self.params, &k_factor, &self.hyper, rng)?;

        self.latent.epsilon = sample_epsilon_marginal(data, &self.params, &self.corr, &self.corr_factor, &k_factor, rng);
        if mem {
            if let Some(v) = sample_v(data, &self.params, &self.latent, rng) {
                self.latent.v = v;
            }
        }

        self.params.beta = sample_beta(self.model.data(), &self.params, &self.latent, &self.hyper, rng)?;

        self.params.omega2 = sample_omega2(self.model.data(), &self.params, &self.latent, &self.hyper, rng);
        if !(self.params.omega2 > 0.0 && self.params.omega2.is_finite()) {
            return Err(Error::Degenerate(format!("omega2 draw {}", self.params.omega2)));
        }

        let upd = mh_theta_from(
            &self.params.kernel,
            self.corr_factor.clone(),
            &self.latent.epsilon,
            self.model.distances(),
            &self.hyper,
            self.model.med_d(),
            &self.steps,
            rng,
        );
        stats.theta1 = Some(upd.accepted[0]);
        if self.params.kernel.n_params() == 2 {
            stats.theta2 = Some(upd.accepted[1]);
        }
        if upd.accepted.iter().any(|&a| a) {
            self.params.kernel = upd.kernel;
            self.corr = self.model.corr_matrix(&self.params.kernel);
            self.corr_factor = upd.factor;
        }
        Ok(stats)
    }
}

/// Initial latent fields with i.i.d. `N(0, variance)` entries (ε, and `V`
/// on the error-prone columns).
pub fn initial_latent<R: Rng + ?Sized>(data: &SpatialDataset, variance: f64, rng: &mut R) -> LatentState {
    let sd = variance.sqrt();
    let n = data.n();
    let epsilon = DVector::from_fn(n, |_, _| sd * sample_normal(rng));
    let mut v = DMatrix::zeros(n, data.p());
    for (j, &m) in data.error_mask().iter().enumerate() {
        if m {
            for i in 0..n {
                v[(i, j)] = sd * sample_normal(rng);
            }
        }
    }
    LatentState { epsilon, v }
}

#[derive(Default)]
struct Counter {
    accepted: usize,
    total: usize,
}

impl Counter {
    fn record(&mut self, flag: Option<bool>) {
        if let Some(a) = flag {
            self.total += 1;
            self.accepted += usize::from(a);
        }
    }

    fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.accepted as f64 / self.total as f64)
    }
}

fn adapt(step: &mut f64, flag: Option<bool>, iteration: usize) {
    if let Some(a) = flag {
        let gain = ((iteration + 1) as f64).powf(-0.6);
        let log_step = step.ln() + gain * (f64::from(u8::from(a)) - TARGET_ACCEPTANCE);
        *step = log_step.exp().clamp(MIN_STEP, MAX_STEP);
    }
}

/// Run one chain from the given state. Acceptance rates are counted after
/// burn-in.
pub fn run_chain(
    model: &SpatialModel,
    hyper: &Hyperparams,
    init: &Params,
    init_latent: &LatentState,
    config: &SamplerConfig,
    rng: &mut RngState,
) -> Result<Chain> {
    config.validate()?;
    let mut sampler = GibbsSampler::new(model.clone(), *hyper, init.clone(), init_latent.clone(), config.steps)?;
    let variant = model.variant();
    let names = eta_names(model.data().names(), &init.kernel, variant);
    let mut draws = Vec::with_capacity(config.n_stored());
    let mut counters: [Counter; 3] = Default::default();
    for it in 0..config.n_iter {
        let stats = sampler
            .sweep(rng)
            .map_err(|e| Error::Sampler { iteration: it, source: Box::new(e) })?;
        if it < config.burn_in {
            if config.adapt {
                let steps = sampler.steps_mut();
                adapt(&mut steps.tau2, stats.tau2, it);
                adapt(&mut steps.theta1, stats.theta1, it);
                adapt(&mut steps.theta2, stats.theta2, it);
            }
            continue;
        }
        for (c, f) in counters.iter_mut().zip([stats.tau2, stats.theta1, stats.theta2]) {
            c.record(f);
        }
        if (it - config.burn_in + 1) % config.thin == 0 {
            draws.push(Draw { iteration: it + 1, params: sampler.params().clone(), latent: sampler.latent().clone() });
        }
    }
    Ok(Chain {
        draws,
        acceptance: AcceptanceRates {
            tau2: counters[0].rate(),
            theta1: counters[1].rate(),
            theta2: counters[2].rate(),
        },
        config: *config,
        variant,
        stream: rng.stream(),
        steps: *sampler.steps(),
        names,
    })
}

/// Run `config.n_chains` chains in parallel. Chain `k` uses stream `k` of
/// `config.seed` and draws its own initial latent fields with variance
/// `latent_init_var`.
pub fn run_chains(
    model: &SpatialModel,
    hyper: &Hyperparams,
    init: &Params,
    latent_init_var: f64,
    config: &SamplerConfig,
) -> Result<Vec<Chain>> {
    config.validate()?;
    (0..config.n_chains)
        .into_par_iter()
        .map(|k| {
            let mut rng = RngState::with_stream(config.seed, k as u64);
            let latent = initial_latent(model.data(), latent_init_var, &mut rng);
            run_chain(model, hyper, init, &latent, config, &mut rng)
        })
        .collect()
}
