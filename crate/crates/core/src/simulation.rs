//! Synthetic data for the simulation study: a Gaussian field on a
//! pseudo-regular layout, measurement-error contamination of the covariate,
//! and the hold-out split.
//!
//! The response is generated from the error-free covariate,
//! `y = β₀ + β₁x + σε + σωρ`. Contamination then replaces `x` by the
//! calibrated surrogate `μ = E[X | W]` of a noisy reading `W = X + U`, scaled
//! so that `x − μ = στ v` with `v ~ N(0, 1)` independent of `μ`. That is the
//! decomposition the measurement-error model assumes, so fitting it to the
//! contaminated data is fitting the true model.

use nalgebra::{DMatrix, DVector};

use crate::correlation::{build_corr_matrix, KernelSpec};
use crate::data::{pairwise_distances, Location, SpatialDataset};
use crate::error::{Error, Result};
use crate::linalg::spd_factor;
use crate::model::Hyperparams;
use crate::rng::{sample_mvn, sample_normal, MvnForm, RngState};

/// Hold-out sites of the simulation study.
pub const HOLDOUT_SITES: [(f64, f64); 11] = [
    (14.143578, 8.449528),
    (13.610791, 17.782726),
    (9.004231, 24.223948),
    (8.507509, 37.369297),
    (18.034563, 27.378832),
    (24.829648, 20.148889),
    (22.677188, 38.815286),
    (33.783750, 39.866913),
    (33.151787, 23.054762),
    (43.535390, 36.435227),
    (38.923097, 13.050401),
];

/// Seed of the frozen 97-site layout.
pub const LAYOUT_SEED: u64 = 97;

/// Median pairwise distance of the built-in layout.
pub const LAYOUT_MEDIAN_DISTANCE: f64 = 25.597828896652416;

/// Priors of the simulation study. Its range prior is `θ ~ Exp(1)`, which in
/// the `Exp(c₈/med_d)` form on the built-in layout means `c₈ = med_d`.
pub fn study_hyperparams() -> Hyperparams {
    Hyperparams { c8: LAYOUT_MEDIAN_DISTANCE, ..Hyperparams::default() }
}
const LAYOUT_CSV: &str = include_str!("../data/layout97.csv");

pub fn holdout_locations() -> Vec<Location> {
    HOLDOUT_SITES.iter().map(|&(x, y)| Location::new(x, y)).collect()
}

/// Pseudo-regular layout on `[0, side]²`: one uniformly jittered point in
/// the central 70% of each cell of a `cells × cells` grid, after which the
/// `drop` points nearest to any of `avoid` are removed.
pub fn jittered_grid(side: f64, cells: usize, drop: usize, avoid: &[Location], seed: u64) -> Vec<Location> {
    let mut rng = RngState::new(seed);
    let h = side / cells as f64;
    let mut pts = Vec::with_capacity(cells * cells);
    for i in 0..cells {
        for j in 0..cells {
            let x = h * (i as f64 + 0.15 + 0.7 * rng.uniform());
            let y = h * (j as f64 + 0.15 + 0.7 * rng.uniform());
            pts.push(Location::new(x, y));
        }
    }
    let nearest = |p: &Location| avoid.iter().map(|a| a.distance(p)).fold(f64::INFINITY, f64::min);
    for _ in 0..drop.min(pts.len()) {
        let k = (0..pts.len())
            .min_by(|&a, &b| nearest(&pts[a]).total_cmp(&nearest(&pts[b])))
            .expect("non-empty");
        pts.remove(k);
    }
    pts
}

/// The frozen 97 fitting sites, as produced by
/// `jittered_grid(50, 10, 3, holdout_locations(), LAYOUT_SEED)`.
pub fn builtin_layout() -> Vec<Location> {
    LAYOUT_CSV
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let mut it = l.split(',').map(|v| v.trim().parse::<f64>().expect("frozen layout"));
            Location::new(it.next().expect("x"), it.next().expect("y"))
        })
        .collect()
}

/// The 108 study sites: the 97 fitting sites followed by the 11 hold-out sites.
pub fn builtin_sites() -> Vec<Location> {
    let mut all = builtin_layout();
    all.extend(holdout_locations());
    all
}

/// Generating values of the simulation study.
#[derive(Clone, Debug, PartialEq)]
pub struct SimSpec {
    pub locations: Vec<Location>,
    pub beta0: f64,
    pub beta1: f64,
    pub sigma2: f64,
    pub omega2: f64,
    pub kernel: KernelSpec,
    /// Law of the error-free covariate (variance, not sd).
    pub x_mean: f64,
    pub x_var: f64,
    /// Relative measurement-error scale `τ`.
    pub tau: f64,
    pub holdout: Vec<Location>,
}

impl Default for SimSpec {
    fn default() -> Self {
        Self {
            locations: builtin_sites(),
            beta0: 0.5,
            beta1: 2.0,
            sigma2: 1.0,
            omega2: 1.1,
            kernel: KernelSpec::Exponential { range: 1.2 },
            x_mean: 3.0,
            x_var: 0.2,
            tau: 0.1f64.sqrt(),
            holdout: holdout_locations(),
        }
    }
}

impl SimSpec {
    pub fn validate(&self) -> Result<()> {
        let pos = |v: f64| v > 0.0 && v.is_finite();
        if !(self.sigma2 >= 0.0 && self.omega2 >= 0.0 && pos(self.x_var) && self.tau >= 0.0) {
            return Err(Error::InvalidParameter("simulation variances must be non-negative".into()));
        }
        if !(self.beta0.is_finite() && self.beta1.is_finite() && self.x_mean.is_finite()) {
            return Err(Error::InvalidParameter("simulation coefficients must be finite".into()));
        }
        self.kernel.validate()?;
        let sv2 = self.sigma2 * self.tau * self.tau;
        if sv2 >= self.x_var {
            return Err(Error::InvalidParameter(format!(
                "measurement-error variance σ²τ² = {sv2} must be below the covariate variance {}",
                self.x_var
            )));
        }
        for h in &self.holdout {
            if !self.locations.iter().any(|l| same_site(l, h)) {
                return Err(Error::InvalidParameter(format!("hold-out site ({}, {}) is not a location", h.x, h.y)));
            }
        }
        Ok(())
    }
}

/// Field simulated on every site, before contamination.
#[derive(Clone, Debug)]
pub struct SimulatedField {
    /// Dataset whose covariate column is the error-free `x`.
    pub dataset: SpatialDataset,
    pub x: DVector<f64>,
    pub epsilon: DVector<f64>,
    pub rho: DVector<f64>,
}

/// Draw `x ~ N(mean, var)`, `ε ~ N(0, C_θ)`, `ρ ~ N(0, I)` and
/// `y = β₀ + β₁x + σε + σωρ`.
pub fn simulate_field(spec: &SimSpec, rng: &mut RngState) -> Result<SimulatedField> {
    spec.validate()?;
    let n = spec.locations.len();
    let sd_x = spec.x_var.sqrt();
    let x = DVector::from_fn(n, |_, _| spec.x_mean + sd_x * sample_normal(rng));
    let d = pairwise_distances(&spec.locations)?;
    let f = spd_factor(&build_corr_matrix(&d, &spec.kernel))?;
    let epsilon = sample_mvn(&DVector::zeros(n), &f, MvnForm::Covariance, rng);
    let rho = DVector::from_fn(n, |_, _| sample_normal(rng));
    let s = spec.sigma2.sqrt();
    let w = spec.omega2.sqrt();
    let y: Vec<f64> = (0..n)
        .map(|i| spec.beta0 + spec.beta1 * x[i] + s * epsilon[i] + s * w * rho[i])
        .collect();
    let dataset = SpatialDataset::from_covariates(
        spec.locations.clone(),
        y,
        DMatrix::from_column_slice(n, 1, x.as_slice()),
        vec!["x".into()],
        &[false],
    )?;
    Ok(SimulatedField { dataset, x, epsilon, rho })
}

/// Quantities used to generate data, kept apart from anything a fit reads.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthRecord {
    pub x: DVector<f64>,
    /// Standardized error `v = (x − μ)/(στ)`; zero when `τ = 0`.
    pub v: DVector<f64>,
    pub sigma: f64,
    pub tau: f64,
}

/// Replace the covariate by its calibrated surrogate. With `s_v = στ`, the
/// reading is `W = x + U`, `U ~ N(0, s_u²)`, `s_u² = var_x s_v²/(var_x − s_v²)`,
/// and `μ = m + k(W − m)` with `k = var_x/(var_x + s_u²)`. The response is
/// untouched and the covariate column is marked error-prone.
pub fn contaminate(field: &SimulatedField, spec: &SimSpec, rng: &mut RngState) -> Result<(SpatialDataset, TruthRecord)> {
    spec.validate()?;
    let sigma = spec.sigma2.sqrt();
    let sv2 = spec.sigma2 * spec.tau * spec.tau;
    let n = field.x.len();
    let (mu, v) = if sv2 == 0.0 {
        (field.x.clone(), DVector::zeros(n))
    } else {
        let su2 = spec.x_var * sv2 / (spec.x_var - sv2);
        let k = spec.x_var / (spec.x_var + su2);
        let su = su2.sqrt();
        let mu = DVector::from_fn(n, |i, _| {
            let w = field.x[i] + su * sample_normal(rng);
            spec.x_mean + k * (w - spec.x_mean)
        });
        let v = (&field.x - &mu) / sv2.sqrt();
        (mu, v)
    };
    let data = SpatialDataset::from_covariates(
        field.dataset.locations().to_vec(),
        field.dataset.y().iter().copied().collect(),
        DMatrix::from_column_slice(n, 1, mu.as_slice()),
        vec!["x".into()],
        &[true],
    )?;
    Ok((data, TruthRecord { x: field.x.clone(), v, sigma, tau: spec.tau }))
}

fn same_site(a: &Location, b: &Location) -> bool {
    (a.x - b.x).abs() <= 1e-9 && (a.y - b.y).abs() <= 1e-9
}

/// Split off the rows at the hold-out sites. Row order is kept within each
/// part; the test part is `None` for an empty hold-out list.
pub fn holdout_split(data: &SpatialDataset, holdout: &[Location]) -> Result<(SpatialDataset, Option<SpatialDataset>)> {
    let mut test_rows = Vec::with_capacity(holdout.len());
    for h in holdout {
        let Some(i) = data.locations().iter().position(|l| same_site(l, h)) else {
            return Err(Error::InvalidData(format!("hold-out site ({}, {}) is not in the dataset", h.x, h.y)));
        };
        test_rows.push(i);
    }
    if test_rows.is_empty() {
        return Ok((data.clone(), None));
    }
    let mut sorted = test_rows.clone();
    sorted.sort_unstable();
    let train_rows: Vec<usize> = (0..data.n()).filter(|i| sorted.binary_search(i).is_err()).collect();
    let train = data.select(&train_rows)?;
    if sorted.len() < 2 {
        return Err(Error::InvalidData("a hold-out set needs at least two sites".into()));
    }
    Ok((train, Some(data.select(&sorted)?)))
}

/// Output of one simulation-study replicate.
#[derive(Clone, Debug)]
pub struct StudyData {
    pub train: SpatialDataset,
    pub test: Option<SpatialDataset>,
    /// Truth for every site, in the order of `spec.locations`.
    pub truth: TruthRecord,
    /// Row of each training site in `spec.locations`.
    pub train_rows: Vec<usize>,
}

/// Simulate, contaminate and split.
pub fn simulate_study(spec: &SimSpec, rng: &mut RngState) -> Result<StudyData> {
    let field = simulate_field(spec, rng)?;
    let (observed, truth) = contaminate(&field, spec, rng)?;
    let (train, test) = holdout_split(&observed, &spec.holdout)?;
    let train_rows = (0..observed.n())
        .filter(|&i| !spec.holdout.iter().any(|h| same_site(&observed.locations()[i], h)))
        .collect();
    Ok(StudyData { train, test, truth, train_rows })
}
