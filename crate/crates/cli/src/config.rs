//! Run configuration, read from TOML.
//!
//! Relative paths are resolved against the directory of the config file.
//! Every section except `seed` has defaults. They follow the simulation study
//! except `priors.c8`, which keeps the layout-relative default of 1.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use spatial_mem::correlation::KernelSpec;
use spatial_mem::data::{Location, Schema};
use spatial_mem::mcmc::{SamplerConfig, StepSizes};
use spatial_mem::model::{Hyperparams, ModelVariant, Params};
use spatial_mem::prediction::GridSpec;
use spatial_mem::simulation::{builtin_sites, holdout_locations, SimSpec};

use crate::error::CliError;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub priors: PriorSection,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub predict: PredictSection,
    #[serde(default)]
    pub sensitivity: SensitivitySection,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "family", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelConfig {
    Exponential { range: f64 },
    Matern { range: f64, smoothness: f64 },
}

impl KernelConfig {
    pub fn spec(&self) -> Result<KernelSpec, CliError> {
        let k = match *self {
            KernelConfig::Exponential { range } => KernelSpec::exponential(range),
            KernelConfig::Matern { range, smoothness } => KernelSpec::matern(range, smoothness),
        };
        k.map_err(|e| CliError::Config(format!("kernel: {e}")))
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(untagged)]
pub enum SiteList {
    /// `"builtin"` or `"none"` for hold-out sites, `"builtin"` or a CSV path
    /// with `x,y` columns for the layout.
    Named(String),
    Points(Vec<[f64; 2]>),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub layout: SiteList,
    pub beta: [f64; 2],
    pub sigma2: f64,
    pub omega2: f64,
    pub kernel: KernelConfig,
    /// Mean and variance (not sd) of the error-free covariate.
    pub x_mean: f64,
    pub x_var: f64,
    pub tau: f64,
    pub holdout: SiteList,
}

impl Default for SimulateSection {
    fn default() -> Self {
        Self {
            layout: SiteList::Named("builtin".into()),
            beta: [0.5, 2.0],
            sigma2: 1.0,
            omega2: 1.1,
            kernel: KernelConfig::Exponential { range: 1.2 },
            x_mean: 3.0,
            x_var: 0.2,
            tau: 0.1f64.sqrt(),
            holdout: SiteList::Named("builtin".into()),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    /// Defaults to `<output_dir>/train.csv`.
    pub train: Option<PathBuf>,
    /// Defaults to `<output_dir>/test.csv`.
    pub test: Option<PathBuf>,
    /// Defaults to `<output_dir>/truth.csv`; only written by `simulate`.
    pub truth: Option<PathBuf>,
    pub easting: String,
    pub northing: String,
    pub response: String,
    pub covariates: Vec<String>,
    pub error_prone: Vec<String>,
}

impl Default for DataSection {
    fn default() -> Self {
        Self {
            train: None,
            test: None,
            truth: None,
            easting: "east".into(),
            northing: "north".into(),
            response: "y".into(),
            covariates: vec!["mu".into()],
            error_prone: vec!["mu".into()],
        }
    }
}

impl DataSection {
    pub fn schema(&self) -> Schema {
        let covs: Vec<&str> = self.covariates.iter().map(String::as_str).collect();
        let err: Vec<&str> = self.error_prone.iter().map(String::as_str).collect();
        Schema::new(&self.easting, &self.northing, &self.response, &covs, &err)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum VariantConfig {
    Mem,
    Naive,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub variant: VariantConfig,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self { variant: VariantConfig::Mem }
    }
}

impl ModelSection {
    pub fn variant(&self) -> ModelVariant {
        match self.variant {
            VariantConfig::Mem => ModelVariant::MeasurementError,
            VariantConfig::Naive => ModelVariant::Naive,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PriorSection {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub c8: f64,
    pub c9: f64,
    pub gamma: f64,
}

impl Default for PriorSection {
    fn default() -> Self {
        let h = Hyperparams::default();
        Self { c1: h.c1, c2: h.c2, c3: h.c3, c4: h.c4, c5: h.c5, c6: h.c6, c7: h.c7, c8: h.c8, c9: h.c9, gamma: h.gamma_gig }
    }
}

impl PriorSection {
    pub fn hyperparams(&self) -> Result<Hyperparams, CliError> {
        let h = Hyperparams {
            c1: self.c1,
            c2: self.c2,
            c3: self.c3,
            c4: self.c4,
            c5: self.c5,
            c6: self.c6,
            c7: self.c7,
            c8: self.c8,
            c9: self.c9,
            gamma_gig: self.gamma,
        };
        h.validate().map_err(|e| CliError::Config(format!("priors: {e}")))?;
        Ok(h)
    }
}

/// Prior overrides for a sensitivity alternative.
#[derive(Clone, Copy, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct PriorOverrides {
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub c3: Option<f64>,
    pub c4: Option<f64>,
    pub c5: Option<f64>,
    pub c6: Option<f64>,
    pub c7: Option<f64>,
    pub c8: Option<f64>,
    pub c9: Option<f64>,
    pub gamma: Option<f64>,
}

impl PriorOverrides {
    pub fn apply(&self, base: &PriorSection) -> PriorSection {
        PriorSection {
            c1: self.c1.unwrap_or(base.c1),
            c2: self.c2.unwrap_or(base.c2),
            c3: self.c3.unwrap_or(base.c3),
            c4: self.c4.unwrap_or(base.c4),
            c5: self.c5.unwrap_or(base.c5),
            c6: self.c6.unwrap_or(base.c6),
            c7: self.c7.unwrap_or(base.c7),
            c8: self.c8.unwrap_or(base.c8),
            c9: self.c9.unwrap_or(base.c9),
            gamma: self.gamma.unwrap_or(base.gamma),
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct InitSection {
    /// Intercept first.
    pub beta: Vec<f64>,
    pub sigma2: f64,
    pub omega2: f64,
    /// Ignored by the naive variant.
    pub tau2: f64,
    /// Kernel family of the fit and its initial parameters.
    pub theta: KernelConfig,
    /// Variance of the i.i.d. normal initial latent fields.
    pub latent_variance: f64,
}

impl Default for InitSection {
    fn default() -> Self {
        Self {
            beta: vec![1.5, 3.0],
            sigma2: 2.8,
            omega2: 3.0,
            tau2: 0.1,
            theta: KernelConfig::Exponential { range: 5.0 },
            latent_variance: 0.31,
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct InitOverrides {
    pub beta: Option<Vec<f64>>,
    pub sigma2: Option<f64>,
    pub omega2: Option<f64>,
    pub tau2: Option<f64>,
    pub theta: Option<KernelConfig>,
    pub latent_variance: Option<f64>,
}

impl InitOverrides {
    pub fn apply(&self, base: &InitSection) -> InitSection {
        InitSection {
            beta: self.beta.clone().unwrap_or_else(|| base.beta.clone()),
            sigma2: self.sigma2.unwrap_or(base.sigma2),
            omega2: self.omega2.unwrap_or(base.omega2),
            tau2: self.tau2.unwrap_or(base.tau2),
            theta: self.theta.unwrap_or(base.theta),
            latent_variance: self.latent_variance.unwrap_or(base.latent_variance),
        }
    }
}

impl InitSection {
    pub fn params(&self, p: usize, variant: ModelVariant) -> Result<Params, CliError> {
        if self.beta.len() != p {
            return Err(CliError::Config(format!(
                "init.beta has {} values but the model has {p} coefficients (intercept included)",
                self.beta.len()
            )));
        }
        if !(self.latent_variance > 0.0 && self.latent_variance.is_finite()) {
            return Err(CliError::Config("init.latent_variance must be positive".into()));
        }
        let params = Params {
            beta: DVector::from_vec(self.beta.clone()),
            sigma2: self.sigma2,
            omega2: self.omega2,
            tau2: if variant == ModelVariant::Naive { 0.0 } else { self.tau2 },
            kernel: self.theta.spec()?,
        };
        params.validate(p, variant).map_err(|e| CliError::Config(format!("init: {e}")))?;
        Ok(params)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub n_iter: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub chains: usize,
    pub adapt: bool,
    pub step_tau2: f64,
    pub step_theta1: f64,
    pub step_theta2: f64,
    pub psrf_threshold: f64,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let c = SamplerConfig::default();
        Self {
            n_iter: c.n_iter,
            burn_in: c.burn_in,
            thin: c.thin,
            chains: 4,
            adapt: c.adapt,
            step_tau2: c.steps.tau2,
            step_theta1: c.steps.theta1,
            step_theta2: c.steps.theta2,
            psrf_threshold: 1.1,
        }
    }
}

impl SamplerSection {
    pub fn config(&self, seed: u64) -> Result<SamplerConfig, CliError> {
        let c = SamplerConfig {
            n_iter: self.n_iter,
            burn_in: self.burn_in,
            thin: self.thin,
            n_chains: self.chains,
            steps: StepSizes {
                tau2: self.step_tau2,
                theta1: self.step_theta1,
                theta2: self.step_theta2,
            },
            adapt: self.adapt,
            seed,
        };
        c.validate().map_err(|e| CliError::Config(format!("sampler: {e}")))?;
        if !(self.psrf_threshold > 1.0) {
            return Err(CliError::Config("sampler.psrf_threshold must exceed 1".into()));
        }
        Ok(c)
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridConfig {
    pub fn spec(&self) -> Result<GridSpec, CliError> {
        let g = GridSpec { x_min: self.x_min, x_max: self.x_max, y_min: self.y_min, y_max: self.y_max, nx: self.nx, ny: self.ny };
        g.validate().map_err(|e| CliError::Config(format!("predict.grid: {e}")))?;
        Ok(g)
    }
}

/// Covariates at grid nodes: a constant per covariate, or a CSV with one
/// row per node in grid order and the data's covariate column names.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum SurfaceConfig {
    Constant(Vec<f64>),
    Csv(PathBuf),
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    /// Predict at the rows of the test file.
    pub test_sites: bool,
    pub grid: Option<GridConfig>,
    pub grid_covariates: Option<SurfaceConfig>,
    pub probs: Vec<f64>,
    /// Evenly spaced subset of the pooled draws; 0 keeps them all.
    pub max_draws: usize,
    pub grid_max_draws: usize,
    /// Compare test-site predictions with the observed test responses.
    pub evaluate: bool,
}

impl Default for PredictSection {
    fn default() -> Self {
        Self {
            test_sites: true,
            grid: None,
            grid_covariates: None,
            probs: vec![0.05, 0.5, 0.95],
            max_draws: 0,
            grid_max_draws: 500,
            evaluate: false,
        }
    }
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum AlternativeKind {
    Prior,
    Init,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Alternative {
    pub name: String,
    pub kind: AlternativeKind,
    #[serde(default)]
    pub priors: PriorOverrides,
    #[serde(default)]
    pub init: InitOverrides,
}

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensitivitySection {
    pub alternatives: Vec<Alternative>,
}

/// A parsed config with its source text and base directory.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub text: String,
    pub base: PathBuf,
}

impl LoadedConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { config, text, base })
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base.join(p)
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        self.resolve(&self.config.output_dir)
    }

    fn data_path(&self, given: &Option<PathBuf>, default: &str) -> PathBuf {
        match given {
            Some(p) => self.resolve(p),
            None => self.output_dir().join(default),
        }
    }

    pub fn train_path(&self) -> PathBuf {
        self.data_path(&self.config.data.train, "train.csv")
    }

    pub fn test_path(&self) -> PathBuf {
        self.data_path(&self.config.data.test, "test.csv")
    }

    pub fn truth_path(&self) -> PathBuf {
        self.data_path(&self.config.data.truth, "truth.csv")
    }

    pub fn sim_spec(&self) -> Result<SimSpec, CliError> {
        let s = &self.config.simulate;
        let locations = match &s.layout {
            SiteList::Named(n) if n == "builtin" => builtin_sites(),
            SiteList::Named(path) => read_sites(&self.resolve(Path::new(path)))?,
            SiteList::Points(pts) => pts.iter().map(|&[x, y]| Location::new(x, y)).collect(),
        };
        let holdout = match &s.holdout {
            SiteList::Named(n) if n == "builtin" => holdout_locations(),
            SiteList::Named(n) if n == "none" => Vec::new(),
            SiteList::Named(n) => return Err(CliError::Config(format!("simulate.holdout: unknown value `{n}`"))),
            SiteList::Points(pts) => pts.iter().map(|&[x, y]| Location::new(x, y)).collect(),
        };
        let spec = SimSpec {
            locations,
            beta0: s.beta[0],
            beta1: s.beta[1],
            sigma2: s.sigma2,
            omega2: s.omega2,
            kernel: s.kernel.spec()?,
            x_mean: s.x_mean,
            x_var: s.x_var,
            tau: s.tau,
            holdout,
        };
        spec.validate().map_err(|e| CliError::Config(format!("simulate: {e}")))?;
        Ok(spec)
    }
}

fn read_sites(path: &Path) -> Result<Vec<Location>, CliError> {
    let t = spatial_mem::data::read_numeric_csv(path).map_err(|e| CliError::Config(e.to_string()))?;
    let xs = t.column("x").map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let ys = t.column("y").map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(xs.into_iter().zip(ys).map(|(x, y)| Location::new(x, y)).collect())
}
