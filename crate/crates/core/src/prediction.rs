//! Posterior predictive distribution at unobserved sites.
//!
//! Given `η`, the response at a new site `s₀` and the data are jointly
//! Gaussian with data covariance `σ²K`, `K = C_θ + (ω² + τ²β_mᵀβ_m)I`, cross
//! covariance `σ²r` (`r` the correlations between `s₀` and the data) and
//! spatial-plus-nugget variance `σ²(1 + ω²)` at `s₀`. For each stored draw
//! the prediction is
//!
//! `y₀ = μ₀ᵀβ + rᵀK⁻¹(y − μβ) + στ v₀ᵀβ + √(σ²(1 + ω² − rᵀK⁻¹r)) z`
//!
//! with a fresh `v₀ ~ N(0, I)` on the error-prone columns and `z ~ N(0, 1)`.
//! The latent fields `(ε, V)` of the fit are integrated out exactly, so only
//! the `η` draws are needed.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::correlation::{build_corr_matrix, cross_corr};
use crate::data::{pairwise_distances, write_numeric_csv, DistanceMatrix, Location, SpatialDataset};
use crate::diagnostics::{kahan_sum, quantile_sorted};
use crate::error::{Error, Result};
use crate::linalg::{add_diagonal, spd_factor};
use crate::model::{masked_beta_sq, Params};
use crate::rng::{sample_normal, RngState};

pub const DEFAULT_PROBS: [f64; 3] = [0.05, 0.5, 0.95];

/// New sites and their covariate rows (intercept column included).
#[derive(Clone, Debug, PartialEq)]
pub struct PredictionRequest {
    locations: Vec<Location>,
    mu: DMatrix<f64>,
}

impl PredictionRequest {
    pub fn new(locations: Vec<Location>, mu: DMatrix<f64>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::InvalidData("prediction needs at least one site".into()));
        }
        if mu.nrows() != locations.len() {
            return Err(Error::InvalidData(format!(
                "{} covariate rows for {} prediction sites",
                mu.nrows(),
                locations.len()
            )));
        }
        if mu.iter().chain(locations.iter().flat_map(|l| [&l.x, &l.y])).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("prediction inputs must be finite".into()));
        }
        Ok(Self { locations, mu })
    }

    /// Covariates without the intercept; a column of ones is prepended.
    pub fn from_covariates(locations: Vec<Location>, covariates: &DMatrix<f64>) -> Result<Self> {
        let m = covariates.nrows();
        let mu = DMatrix::from_fn(m, covariates.ncols() + 1, |i, j| if j == 0 { 1.0 } else { covariates[(i, j - 1)] });
        Self::new(locations, mu)
    }

    /// The hold-out part of a dataset.
    pub fn from_dataset(data: &SpatialDataset) -> Self {
        Self { locations: data.locations().to_vec(), mu: data.mu().clone() }
    }

    pub fn locations(&self) -> &[Location] {
        &self.locations
    }

    pub fn mu(&self) -> &DMatrix<f64> {
        &self.mu
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    fn check_against(&self, data: &SpatialDataset) -> Result<()> {
        if self.mu.ncols() != data.p() {
            return Err(Error::InvalidData(format!(
                "prediction covariates have {} columns, the data {}",
                self.mu.ncols(),
                data.p()
            )));
        }
        for (k, s) in self.locations.iter().enumerate() {
            if let Some(i) = data.locations().iter().position(|l| l.distance(s) <= 0.0) {
                return Err(Error::InvalidData(format!("prediction site {k} coincides with data row {i}")));
            }
        }
        Ok(())
    }
}

/// Moments of `y₀` given one draw of `η`, split into the part that does not
/// involve `v₀` and the measurement-error variance `σ²τ²β_mᵀβ_m`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DrawMoments {
    /// `μ₀ᵀβ + rᵀK⁻¹(y − μβ)`.
    pub mean: f64,
    /// `σ²(1 + ω² − rᵀK⁻¹r)`.
    pub variance: f64,
    pub me_variance: f64,
}

impl DrawMoments {
    pub fn total_variance(&self) -> f64 {
        self.variance + self.me_variance
    }
}

/// Per-site conditional moments for one draw.
pub fn conditional_moments(data: &SpatialDataset, params: &Params, req: &PredictionRequest) -> Result<Vec<DrawMoments>> {
    req.check_against(data)?;
    let dist = pairwise_distances(data.locations())?;
    moments_with(data, &dist, params, req)
}

fn moments_with(
    data: &SpatialDataset,
    dist: &DistanceMatrix,
    params: &Params,
    req: &PredictionRequest,
) -> Result<Vec<DrawMoments>> {
    params.validate(data.p(), variant_of(params))?;
    let b = masked_beta_sq(&params.beta, data.error_mask());
    let mut k = build_corr_matrix(dist, &params.kernel);
    add_diagonal(&mut k, params.omega2 + params.tau2 * b);
    let f = spd_factor(&k)?;
    let alpha = f.solve(&(data.y() - data.mu() * &params.beta));
    let me_variance = params.sigma2 * params.tau2 * b;
    req.locations
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let mut r = cross_corr(s, data.locations(), &params.kernel);
            let mean = (req.mu.row(i) * &params.beta)[0] + r.dot(&alpha);
            f.solve_lower_mut(r.as_mut_slice());
            let variance = params.sigma2 * (1.0 + params.omega2 - r.norm_squared());
            if !(variance > 0.0) {
                return Err(Error::Degenerate(format!("predictive variance {variance} at site {i}")));
            }
            Ok(DrawMoments { mean, variance, me_variance })
        })
        .collect()
}

fn variant_of(params: &Params) -> crate::model::ModelVariant {
    if params.tau2 > 0.0 {
        crate::model::ModelVariant::MeasurementError
    } else {
        crate::model::ModelVariant::Naive
    }
}

/// Predictive draws summarized at one site.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictiveSummary {
    pub location: Location,
    pub mean: f64,
    pub sd: f64,
    /// `(probability, quantile)` pairs.
    pub quantiles: Vec<(f64, f64)>,
    pub n_draws: usize,
}

/// Stream for a site, derived from its coordinates so that the draws at a
/// site do not depend on which other sites are requested.
fn site_stream(s: &Location) -> u64 {
    let mut z = s.x.to_bits() ^ s.y.to_bits().rotate_left(29) ^ 0x9e37_79b9_7f4a_7c15;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Predictive summaries at each requested site over the given draws.
pub fn predict_at(
    data: &SpatialDataset,
    draws: &[Params],
    req: &PredictionRequest,
    probs: &[f64],
    seed: u64,
) -> Result<Vec<PredictiveSummary>> {
    if draws.is_empty() {
        return Err(Error::InvalidData("no posterior draws to predict from".into()));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParameter("quantile probabilities must lie in [0, 1]".into()));
    }
    req.check_against(data)?;
    let dist = pairwise_distances(data.locations())?;
    let mask: Vec<usize> = (0..data.p()).filter(|&j| data.error_mask()[j]).collect();
    let m = req.len();
    let mut rngs: Vec<RngState> = req.locations.iter().map(|s| RngState::with_stream(seed, site_stream(s))).collect();
    let mut samples = vec![Vec::with_capacity(draws.len()); m];
    for params in draws {
        let moments = moments_with(data, &dist, params, req)?;
        let st = params.sigma() * params.tau();
        for (i, mo) in moments.iter().enumerate() {
            let rng = &mut rngs[i];
            let me: f64 = mask.iter().map(|&j| params.beta[j] * sample_normal(rng)).sum();
            samples[i].push(mo.mean + st * me + mo.variance.sqrt() * sample_normal(rng));
        }
    }
    Ok(samples
        .into_iter()
        .zip(&req.locations)
        .map(|(mut ys, &location)| {
            let n = ys.len() as f64;
            let mean = kahan_sum(ys.iter().copied()) / n;
            let var = if ys.len() > 1 { kahan_sum(ys.iter().map(|y| (y - mean) * (y - mean))) / (n - 1.0) } else { 0.0 };
            ys.sort_by(f64::total_cmp);
            PredictiveSummary {
                location,
                mean,
                sd: var.sqrt(),
                quantiles: probs.iter().map(|&p| (p, quantile_sorted(&ys, p))).collect(),
                n_draws: ys.len(),
            }
        })
        .collect())
}

/// Rectangular grid, enumerated row-major (x fastest, then y).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(Error::InvalidParameter("grid needs at least 2 nodes per axis".into()));
        }
        if !(self.x_max > self.x_min && self.y_max > self.y_min) || ![self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("grid ranges must be finite and increasing".into()));
        }
        Ok(())
    }

    pub fn nodes(&self) -> Vec<Location> {
        let step = |lo: f64, hi: f64, n: usize, k: usize| lo + (hi - lo) * k as f64 / (n - 1) as f64;
        (0..self.ny)
            .flat_map(|j| (0..self.nx).map(move |i| (i, j)))
            .map(|(i, j)| Location::new(step(self.x_min, self.x_max, self.nx, i), step(self.y_min, self.y_max, self.ny, j)))
            .collect()
    }
}

/// Covariates at grid nodes, excluding the intercept.
#[derive(Clone, Debug, PartialEq)]
pub enum CovariateSurface {
    /// The same values at every node.
    Constant(Vec<f64>),
    /// One row per node in grid order.
    PerNode(DMatrix<f64>),
}

impl CovariateSurface {
    fn values(&self, m: usize) -> Result<DMatrix<f64>> {
        match self {
            CovariateSurface::Constant(v) => Ok(DMatrix::from_fn(m, v.len(), |_, j| v[j])),
            CovariateSurface::PerNode(x) if x.nrows() == m => Ok(x.clone()),
            CovariateSurface::PerNode(x) => {
                Err(Error::InvalidData(format!("covariate surface has {} rows for {m} grid nodes", x.nrows())))
            }
        }
    }
}

pub fn predict_grid(
    data: &SpatialDataset,
    draws: &[Params],
    grid: &GridSpec,
    surface: &CovariateSurface,
    probs: &[f64],
    seed: u64,
) -> Result<Vec<PredictiveSummary>> {
    grid.validate()?;
    let nodes = grid.nodes();
    let req = PredictionRequest::from_covariates(nodes.clone(), &surface.values(nodes.len())?)?;
    predict_at(data, draws, &req, probs, seed)
}

/// Column name for a quantile probability, e.g. `q05`, `q50`, `q97.5`.
pub fn quantile_label(p: f64) -> String {
    let pct = p * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("q{:02}", pct.round() as i64)
    } else {
        format!("q{pct}")
    }
}

/// CSV with columns `x, y, mean, sd` and one column per quantile.
pub fn write_summaries_csv(path: &Path, summaries: &[PredictiveSummary]) -> Result<()> {
    let mut header: Vec<String> = ["x", "y", "mean", "sd"].map(String::from).to_vec();
    if let Some(s) = summaries.first() {
        header.extend(s.quantiles.iter().map(|&(p, _)| quantile_label(p)));
    }
    let rows = summaries.iter().map(|s| {
        let mut r = vec![s.location.x, s.location.y, s.mean, s.sd];
        r.extend(s.quantiles.iter().map(|&(_, q)| q));
        r
    });
    write_numeric_csv(path, &header, rows)
}

/// Root mean squared error of predictive means against observed values.
pub fn rmse(summaries: &[PredictiveSummary], observed: &DVector<f64>) -> Result<f64> {
    if summaries.len() != observed.len() || summaries.is_empty() {
        return Err(Error::InvalidData("prediction and observation counts differ".into()));
    }
    let ss = kahan_sum(summaries.iter().zip(observed.iter()).map(|(s, y)| (s.mean - y) * (s.mean - y)));
    Ok((ss / summaries.len() as f64).sqrt())
}
