//! Posterior summaries, the Gelman–Rubin PSRF, DIC and the relative-change
//! sensitivity measure.

use crate::error::{Error, Result};
use crate::mcmc::{Chain, Draw};
use crate::model::{LatentState, Params, SpatialModel};

/// Compensated sum.
pub fn kahan_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = 0.0;
    let mut c = 0.0;
    for x in xs {
        let y = x - c;
        let t = s + y;
        c = (t - s) - y;
        s = t;
    }
    s
}

pub fn sample_mean(xs: &[f64]) -> f64 {
    kahan_sum(xs.iter().copied()) / xs.len() as f64
}

/// Unbiased sample variance; zero for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = sample_mean(xs);
    kahan_sum(xs.iter().map(|x| (x - m) * (x - m))) / (xs.len() - 1) as f64
}

/// Linear-interpolation quantile of sorted values (Hyndman–Fan type 7).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub variance: f64,
    /// `(probability, quantile)` pairs in the order requested.
    pub quantiles: Vec<(f64, f64)>,
    pub n: usize,
}

impl Summary {
    pub fn sd(&self) -> f64 {
        self.variance.sqrt()
    }

    pub fn quantile(&self, p: f64) -> Option<f64> {
        self.quantiles.iter().find(|(q, _)| (q - p).abs() < 1e-12).map(|&(_, v)| v)
    }
}

pub fn summarize(xs: &[f64], probs: &[f64]) -> Result<Summary> {
    if xs.is_empty() {
        return Err(Error::InvalidData("cannot summarize an empty sample".into()));
    }
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidParameter("quantile probabilities must lie in [0, 1]".into()));
    }
    let mut sorted = xs.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Summary {
        mean: sample_mean(xs),
        variance: sample_variance(xs),
        quantiles: probs.iter().map(|&p| (p, quantile_sorted(&sorted, p))).collect(),
        n: xs.len(),
    })
}

/// Per-parameter summaries over the pooled draws of all chains.
pub fn summarize_chains(chains: &[Chain], probs: &[f64]) -> Result<Vec<(String, Summary)>> {
    let first = chains.first().ok_or_else(|| Error::InvalidData("no chains to summarize".into()))?;
    first
        .names
        .iter()
        .map(|name| {
            let pooled = pooled_trace(chains, name)?;
            Ok((name.clone(), summarize(&pooled, probs)?))
        })
        .collect()
}

fn pooled_trace(chains: &[Chain], name: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for c in chains {
        out.extend(c.trace(name).ok_or_else(|| Error::InvalidData(format!("chain lacks parameter {name}")))?);
    }
    Ok(out)
}

/// Potential scale reduction factor with its variance components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Psrf {
    /// `√(V̂/W)`; NaN when degenerate.
    pub r_hat: f64,
    pub within: f64,
    pub between: f64,
    /// Zero within-chain variance.
    pub degenerate: bool,
}

/// Gelman–Rubin diagnostic on whole chains: with chain length `L`,
/// `V̂ = ((L−1)/L)W + B/L` and `PSRF = √(V̂/W)`.
pub fn gelman_rubin(chains: &[&[f64]]) -> Result<Psrf> {
    if chains.len() < 2 {
        return Err(Error::InvalidData("PSRF needs at least two chains".into()));
    }
    let l = chains[0].len();
    if l < 2 || chains.iter().any(|c| c.len() != l) {
        return Err(Error::InvalidData("PSRF needs chains of equal length of at least 2".into()));
    }
    let m = chains.len() as f64;
    let lf = l as f64;
    let means: Vec<f64> = chains.iter().map(|c| sample_mean(c)).collect();
    let within = kahan_sum(chains.iter().map(|c| sample_variance(c))) / m;
    let between = lf * sample_variance(&means);
    if !(within > 0.0) {
        return Ok(Psrf { r_hat: f64::NAN, within, between, degenerate: true });
    }
    let v_hat = (lf - 1.0) / lf * within + between / lf;
    Ok(Psrf { r_hat: (v_hat / within).sqrt(), within, between, degenerate: false })
}

/// PSRF for every component of `η` across chains of equal length.
pub fn psrf_table(chains: &[Chain]) -> Result<Vec<(String, Psrf)>> {
    let first = chains.first().ok_or_else(|| Error::InvalidData("no chains".into()))?;
    first
        .names
        .iter()
        .map(|name| {
            let traces = chains
                .iter()
                .map(|c| c.trace(name).ok_or_else(|| Error::InvalidData(format!("chain lacks parameter {name}"))))
                .collect::<Result<Vec<_>>>()?;
            let refs: Vec<&[f64]> = traces.iter().map(|t| t.as_slice()).collect();
            Ok((name.clone(), gelman_rubin(&refs)?))
        })
        .collect()
}

/// True when every PSRF is finite and below `threshold`.
pub fn converged(table: &[(String, Psrf)], threshold: f64) -> bool {
    table.iter().all(|(_, p)| !p.degenerate && p.r_hat < threshold)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DicReport {
    pub dic: f64,
    /// Posterior mean deviance.
    pub mean_deviance: f64,
    /// Deviance at the posterior mean of `η`.
    pub deviance_at_mean: f64,
    pub p_d: f64,
    /// The conditional deviance given the latent fields was used because the
    /// marginal covariance failed to factor.
    pub conditional: bool,
}

/// Component-wise posterior mean of `η`.
pub fn posterior_mean_params<'a, I>(draws: I) -> Result<Params>
where
    I: IntoIterator<Item = &'a Params>,
    I::IntoIter: Clone,
{
    let it = draws.into_iter();
    let first = it.clone().next().ok_or_else(|| Error::InvalidData("no draws".into()))?;
    let n = it.clone().count() as f64;
    let avg = |f: &dyn Fn(&Params) -> f64| kahan_sum(it.clone().map(f)) / n;
    let beta = nalgebra::DVector::from_fn(first.beta.len(), |j, _| avg(&|p| p.beta[j]));
    let theta: Vec<f64> = (0..first.kernel.n_params()).map(|j| avg(&|p| p.kernel.params()[j])).collect();
    Ok(Params {
        beta,
        sigma2: avg(&|p| p.sigma2),
        omega2: avg(&|p| p.omega2),
        tau2: avg(&|p| p.tau2),
        kernel: first.kernel.with_params(&theta)?,
    })
}

/// Component-wise posterior mean of the latent fields.
pub fn posterior_mean_latent(draws: &[&Draw]) -> Result<LatentState> {
    let first = draws.first().ok_or_else(|| Error::InvalidData("no draws".into()))?;
    let n = draws.len() as f64;
    let avg = |f: &dyn Fn(&Draw) -> f64| kahan_sum(draws.iter().map(|d| f(d))) / n;
    let (rows, cols) = first.latent.v.shape();
    Ok(LatentState {
        epsilon: nalgebra::DVector::from_fn(first.latent.epsilon.len(), |i, _| avg(&|d| d.latent.epsilon[i])),
        v: nalgebra::DMatrix::from_fn(rows, cols, |i, j| avg(&|d| d.latent.v[(i, j)])),
    })
}

fn report(mean_deviance: f64, deviance_at_mean: f64, conditional: bool) -> DicReport {
    let p_d = mean_deviance - deviance_at_mean;
    DicReport { dic: mean_deviance + p_d, mean_deviance, deviance_at_mean, p_d, conditional }
}

/// `DIC = 2·mean(D) − D(η̄)` with `D = −2·marginal log-likelihood`.
pub fn dic_marginal(model: &SpatialModel, draws: &[Params]) -> Result<DicReport> {
    let mean = posterior_mean_params(draws)?;
    let devs = draws.iter().map(|p| model.marginal_loglik(p).map(|l| -2.0 * l)).collect::<Result<Vec<_>>>()?;
    Ok(report(sample_mean(&devs), -2.0 * model.marginal_loglik(&mean)?, false))
}

/// [`dic_marginal`], switching to the conditional deviance given `(ε, V)`
/// when the marginal covariance cannot be factored at some draw or at the
/// posterior mean.
pub fn dic(model: &SpatialModel, draws: &[&Draw]) -> Result<DicReport> {
    let params: Vec<Params> = draws.iter().map(|d| d.params.clone()).collect();
    match dic_marginal(model, &params) {
        Err(e) if e.is_numeric() => {
            let mean = posterior_mean_params(&params)?;
            let latent = posterior_mean_latent(draws)?;
            let devs: Vec<f64> = draws.iter().map(|d| -2.0 * model.conditional_loglik(&d.params, &d.latent)).collect();
            Ok(report(sample_mean(&devs), -2.0 * model.conditional_loglik(&mean, &latent), true))
        }
        other => other,
    }
}

/// Relative change per parameter and the maximum per parameter group.
#[derive(Clone, Debug, PartialEq)]
pub struct SensitivityReport {
    pub names: Vec<String>,
    pub changes: Vec<f64>,
}

impl SensitivityReport {
    /// Parameters group by prefix: `beta_*` form the vector `beta`,
    /// `theta1`/`theta2` form `theta`; anything else is its own group.
    pub fn group_of(name: &str) -> &str {
        if name.starts_with("beta_") {
            "beta"
        } else if name.starts_with("theta") {
            "theta"
        } else {
            name
        }
    }

    /// Maximum relative change within each group, in first-seen order.
    pub fn mre(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = Vec::new();
        for (n, &c) in self.names.iter().zip(&self.changes) {
            let g = Self::group_of(n);
            match out.iter_mut().find(|(k, _)| k == g) {
                Some((_, m)) => *m = m.max(c),
                None => out.push((g.to_string(), c)),
            }
        }
        out
    }

    /// Maximum over all parameters.
    pub fn overall(&self) -> f64 {
        self.changes.iter().copied().fold(0.0, f64::max)
    }
}

/// `|mean_alt − mean_bench| / sd_bench` for one parameter.
pub fn relative_change_scalar(bench: &[f64], alt: &[f64]) -> Result<f64> {
    if bench.is_empty() || alt.is_empty() {
        return Err(Error::InvalidData("relative change needs non-empty traces".into()));
    }
    let sd = sample_variance(bench).sqrt();
    if !(sd > 0.0) {
        return Err(Error::Degenerate("benchmark standard deviation is zero".into()));
    }
    Ok((sample_mean(alt) - sample_mean(bench)).abs() / sd)
}

/// Relative change for every parameter shared by two sets of pooled traces.
pub fn relative_change(names: &[String], bench: &[Vec<f64>], alt: &[Vec<f64>]) -> Result<SensitivityReport> {
    if bench.len() != names.len() || alt.len() != names.len() {
        return Err(Error::InvalidData("trace count does not match parameter names".into()));
    }
    let changes = bench.iter().zip(alt).map(|(b, a)| relative_change_scalar(b, a)).collect::<Result<Vec<_>>>()?;
    Ok(SensitivityReport { names: names.to_vec(), changes })
}

/// [`relative_change`] between two fits, pooling chains.
pub fn relative_change_chains(bench: &[Chain], alt: &[Chain]) -> Result<SensitivityReport> {
    let names = bench.first().ok_or_else(|| Error::InvalidData("no benchmark chains".into()))?.names.clone();
    let b = names.iter().map(|n| pooled_trace(bench, n)).collect::<Result<Vec<_>>>()?;
    let a = names.iter().map(|n| pooled_trace(alt, n)).collect::<Result<Vec<_>>>()?;
    relative_change(&names, &b, &a)
}
