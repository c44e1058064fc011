//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! The process exits non-zero only when a check panics, or when
//! `ACCEPTANCE_STRICT=1` is set and some criterion fails. `ACCEPTANCE_ONLY`
//! takes a comma-separated list of criterion numbers to run a subset.

mod oracle;

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use spatial_mem::correlation::KernelSpec;
use spatial_mem::data::{Location, SpatialDataset};
use spatial_mem::diagnostics::{converged, dic_marginal, psrf_table, sample_mean};
use spatial_mem::mcmc::{
    mh_sigma2, mh_tau2, mh_theta, run_chains, sample_beta, sample_epsilon, sample_epsilon_cov, GibbsSampler,
    SamplerConfig, StepSizes,
};
use spatial_mem::model::{Hyperparams, LatentState, ModelVariant, Params, SpatialModel};
use spatial_mem::prediction::{conditional_moments, PredictionRequest};
use spatial_mem::rng::{gig_logpdf, sample_exponential, sample_gig, sample_normal, GigParams, RngState};
use spatial_mem::simulation::{simulate_study, study_hyperparams, SimSpec};

use oracle::{covariance, gig_log_kernel, ks, mean, normal_cdf, LogGridCdf};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn dataset(locs: &[(f64, f64)], y: &[f64], x: &[f64]) -> SpatialDataset {
    SpatialDataset::from_covariates(
        locs.iter().map(|&(a, b)| Location::new(a, b)).collect(),
        y.to_vec(),
        DMatrix::from_column_slice(locs.len(), 1, x),
        vec!["x".into()],
        &[true],
    )
    .unwrap()
}

fn exp_params(beta: &[f64], sigma2: f64, omega2: f64, tau2: f64, range: f64) -> Params {
    Params {
        beta: DVector::from_row_slice(beta),
        sigma2,
        omega2,
        tau2,
        kernel: KernelSpec::Exponential { range },
    }
}

fn exp_corr(locs: &[(f64, f64)], range: f64) -> DMatrix<f64> {
    let n = locs.len();
    DMatrix::from_fn(n, n, |i, j| {
        let h = ((locs[i].0 - locs[j].0).powi(2) + (locs[i].1 - locs[j].1).powi(2)).sqrt();
        (-h / range).exp()
    })
}

fn latent(eps: &[f64], v1: &[f64]) -> LatentState {
    let n = eps.len();
    let mut v = DMatrix::zeros(n, 2);
    v.set_column(1, &DVector::from_row_slice(v1));
    LatentState { epsilon: DVector::from_row_slice(eps), v }
}

/// Sample mean and covariance of vector draws against a Gaussian law.
fn check_gaussian(draws: &[DVector<f64>], m: &DVector<f64>, s: &DMatrix<f64>) -> (bool, f64, f64) {
    let d = m.len();
    let n = draws.len() as f64;
    let cols: Vec<Vec<f64>> = (0..d).map(|j| draws.iter().map(|x| x[j]).collect()).collect();
    let mut worst_se: f64 = 0.0;
    let mut worst_cov: f64 = 0.0;
    for i in 0..d {
        worst_se = worst_se.max((mean(&cols[i]) - m[i]).abs() / (s[(i, i)] / n).sqrt());
        for j in 0..d {
            let rel = (covariance(&cols[i], &cols[j]) - s[(i, j)]).abs() / (s[(i, i)] * s[(j, j)]).sqrt();
            worst_cov = worst_cov.max(rel);
        }
    }
    (worst_se < 3.0 && worst_cov < 0.05, worst_se, worst_cov)
}

fn criterion_1() -> Outcome {
    let locs = [(0.0, 0.0), (1.0, 0.5), (2.5, 1.0), (0.5, 2.0), (3.0, 3.0)];
    let x = [2.6, 3.1, 2.9, 3.4, 2.7];
    let y = [6.1, 7.0, 5.8, 7.9, 6.2];
    let data = dataset(&locs, &y, &x);
    let params = exp_params(&[0.5, 1.8], 1.3, 0.7, 0.2, 2.0);
    let lat = latent(&[0.3, -0.2, 0.5, 0.1, -0.6], &[0.4, -1.1, 0.2, 0.9, -0.3]);
    let hyper = Hyperparams::default();
    let n_draws = 100_000;
    let (s, t) = (params.sigma2.sqrt(), params.tau2.sqrt());
    let w2 = params.omega2;
    let mut rng = RngState::new(11);

    // β: T* = μ + στV, t = y − σε.
    let mu = DMatrix::from_fn(5, 2, |i, j| if j == 0 { 1.0 } else { x[i] });
    let t_star = &mu + &lat.v * (s * t);
    let tv = DVector::from_fn(5, |i, _| y[i] - s * lat.epsilon[i]);
    let mut a3 = t_star.transpose() * &t_star / (params.sigma2 * w2);
    for i in 0..2 {
        a3[(i, i)] += 1.0 / hyper.c1;
    }
    let f = t_star.transpose() * &tv / (params.sigma2 * w2);
    let beta_cov = oracle::inverse(&a3);
    let beta_mean = oracle::solve(&a3, &f);
    let draws: Vec<DVector<f64>> =
        (0..n_draws).map(|_| sample_beta(&data, &params, &lat, &hyper, &mut rng).unwrap()).collect();
    let (ok_b, se_b, cov_b) = check_gaussian(&draws, &beta_mean, &beta_cov);

    // ε: A₁ = C⁻¹ + I/ω², z_i = (y_i − μ_iβ − στ v_iβ)/(ω²σ).
    let corr_inv = oracle::inverse(&exp_corr(&locs, 2.0));
    let mut a1 = corr_inv.clone();
    for i in 0..5 {
        a1[(i, i)] += 1.0 / w2;
    }
    let b = &params.beta;
    let z = DVector::from_fn(5, |i, _| {
        (y[i] - b[0] - b[1] * x[i] - s * t * lat.v[(i, 1)] * b[1]) / (w2 * s)
    });
    let eps_cov = oracle::inverse(&a1);
    let eps_mean = oracle::solve(&a1, &z);
    let draws: Vec<DVector<f64>> =
        (0..n_draws).map(|_| sample_epsilon(&data, &params, &lat, &corr_inv, &mut rng).unwrap()).collect();
    let (ok_e, se_e, cov_e) = check_gaussian(&draws, &eps_mean, &eps_cov);

    // The covariance form the sweep uses.
    let corr = exp_corr(&locs, 2.0);
    let factor = spatial_mem::linalg::spd_factor(&corr).unwrap();
    let draws: Vec<DVector<f64>> = (0..n_draws)
        .map(|_| sample_epsilon_cov(&data, &params, &lat, &corr, &factor, &mut rng).unwrap())
        .collect();
    let (ok_c, se_c, cov_c) = check_gaussian(&draws, &eps_mean, &eps_cov);

    outcome(
        ok_b && ok_e && ok_c,
        format!(
            "beta: max |mean err| {se_b:.2} se, max cov err {:.2}%; epsilon: {se_e:.2} se, {:.2}%; \
             epsilon (covariance form): {se_c:.2} se, {:.2}%",
            100.0 * cov_b,
            100.0 * cov_e,
            100.0 * cov_c
        ),
    )
}

fn criterion_2() -> Outcome {
    let triples = [(0.001, 0.05, 2.0), (0.0, 0.09, 2.0), (-48.5, 1.3, 2.0)];
    let mut rng = RngState::new(12);
    let mut pass = true;
    let mut parts = Vec::new();
    for (gamma, a, b) in triples {
        let p = GigParams::new(gamma, a, b).unwrap();
        let bessel_mean = p.mean();
        // Quadrature cross-check of the moment and of the normalized density.
        let kernel = |x: f64| gig_log_kernel(x, gamma, a, b);
        let z = oracle::simpson(|u| (kernel(u.exp()) + u).exp(), -40.0, 8.0, 400_000);
        let m1 = oracle::simpson(|u| (kernel(u.exp()) + 2.0 * u).exp(), -40.0, 8.0, 400_000) / z;
        let m2 = oracle::simpson(|u| (kernel(u.exp()) + 3.0 * u).exp(), -40.0, 8.0, 400_000) / z;
        let mass = oracle::simpson(|u| (gig_logpdf(u.exp(), &p).unwrap() + u).exp(), -40.0, 8.0, 400_000);
        let quad_ok = ((m1 - bessel_mean) / bessel_mean).abs() < 1e-6;
        let mass_ok = (mass - 1.0).abs() < 1e-6;
        let n = 1_000_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_gig(&p, &mut rng)).collect();
        let se = ((m2 - m1 * m1) / n as f64).sqrt();
        let dev = (sample_mean(&xs) - bessel_mean).abs() / se;
        pass &= quad_ok && mass_ok && dev < 3.0;
        parts.push(format!(
            "({gamma}, {a}, {b}): mean {bessel_mean:.6} (quad rel err {:.1e}), draws {dev:.2} se, mass {mass:.9}",
            ((m1 - bessel_mean) / bessel_mean).abs()
        ));
    }
    outcome(pass, parts.join("; "))
}

fn criterion_3() -> Outcome {
    let locs = [(0.0, 0.0), (1.5, 0.0)];
    let x = [2.8, 3.3];
    let y = [6.4, 7.9];
    let data = dataset(&locs, &y, &x);
    let hyper = Hyperparams::default();
    let lat = latent(&[0.4, -0.3], &[0.8, -0.5]);
    let base = exp_params(&[0.5, 2.0], 1.1, 0.9, 0.3, 1.2);
    let n_steps = 1_000_000;
    let mut rng = RngState::new(13);

    // Conditionals written as prior times the per-site normal likelihood.
    let loglik = |p: &Params| -> f64 {
        let (s, t) = (p.sigma2.sqrt(), p.tau2.sqrt());
        (0..2)
            .map(|i| {
                let m = p.beta[0] + p.beta[1] * x[i] + s * lat.epsilon[i] + s * t * lat.v[(i, 1)] * p.beta[1];
                let v = p.sigma2 * p.omega2;
                -0.5 * (2.0 * std::f64::consts::PI * v).ln() - 0.5 * (y[i] - m).powi(2) / v
            })
            .sum()
    };

    let sigma2_target = |s2: f64| {
        let mut p = base.clone();
        p.sigma2 = s2;
        -(hyper.c2 + 1.0) * s2.ln() - hyper.c3 / s2 + loglik(&p)
    };
    let mut p = base.clone();
    let mut draws = Vec::with_capacity(n_steps);
    for _ in 0..n_steps {
        p.sigma2 = mh_sigma2(&data, &p, &lat, &hyper, 1.0, &mut rng).0;
        draws.push(p.sigma2);
    }
    let cdf = LogGridCdf::new(sigma2_target, -12.0, 8.0, 40_000);
    let ks_sigma2 = ks(&draws, |v| cdf.eval(v));

    let tau2_target = |t2: f64| {
        let mut p = base.clone();
        p.tau2 = t2;
        gig_log_kernel(t2, 0.0, hyper.c6, hyper.c7) + loglik(&p)
    };
    let mut p = base.clone();
    draws.clear();
    for _ in 0..n_steps {
        p.tau2 = mh_tau2(&data, &p, &lat, &hyper, 1.0, &mut rng).0;
        draws.push(p.tau2);
    }
    let cdf = LogGridCdf::new(tau2_target, -16.0, 6.0, 40_000);
    let ks_tau2 = ks(&draws, |v| cdf.eval(v));

    // θ₁: Exp(c₈/med_d) prior times N₂(ε; 0, C_θ); med_d is the one distance.
    let h = 1.5;
    let (e1, e2) = (lat.epsilon[0], lat.epsilon[1]);
    let theta_target = |th: f64| {
        let r = (-h / th).exp();
        let det = 1.0 - r * r;
        -(hyper.c8 / h) * th - 0.5 * det.ln() - 0.5 * (e1 * e1 - 2.0 * r * e1 * e2 + e2 * e2) / det
    };
    let model = SpatialModel::new(data.clone(), ModelVariant::MeasurementError).unwrap();
    let steps = StepSizes { theta1: 1.0, ..StepSizes::default() };
    let mut kernel = base.kernel;
    draws.clear();
    for _ in 0..n_steps {
        kernel = mh_theta(&kernel, &lat.epsilon, model.distances(), &hyper, model.med_d(), &steps, &mut rng)
            .unwrap()
            .kernel;
        draws.push(kernel.range());
    }
    let cdf = LogGridCdf::new(theta_target, -8.0, 6.0, 40_000);
    let ks_theta = ks(&draws, |v| cdf.eval(v));

    let worst = ks_sigma2.max(ks_tau2).max(ks_theta);
    outcome(worst < 0.02, format!("KS sigma2 {ks_sigma2:.4}, tau2 {ks_tau2:.4}, theta1 {ks_theta:.4}"))
}

/// Priors of the prior-reproduction run.
fn geweke_hyper() -> Hyperparams {
    Hyperparams { c1: 1.0, c2: 4.0, c3: 3.0, c4: 1.0, c5: 1.5, c6: 0.8, c7: 1.5, c8: 3.0, c9: 1.0, gamma_gig: 1.0 }
}

fn criterion_4() -> Outcome {
    let hyper = geweke_hyper();
    let locs = [(0.0, 0.0), (1.0, 0.5), (2.5, 1.0), (0.5, 2.0), (3.0, 3.0)];
    let x = [-0.6, 0.3, 1.1, -1.2, 0.4];
    let data = dataset(&locs, &[0.0; 5], &x);
    let model = SpatialModel::new(data, ModelVariant::MeasurementError).unwrap();
    let med_d = model.med_d();
    let mut rng = RngState::new(14);

    // Start from an exact prior draw of (η, ε, V, y).
    let c1sd = hyper.c1.sqrt();
    let params = Params {
        beta: DVector::from_fn(2, |_, _| c1sd * sample_normal(&mut rng)),
        sigma2: 1.0 / spatial_mem::rng::sample_gamma(hyper.c2, hyper.c3, &mut rng).unwrap(),
        omega2: sample_gig(&hyper.omega2_prior(), &mut rng),
        tau2: sample_gig(&hyper.tau2_prior(), &mut rng),
        kernel: KernelSpec::Exponential { range: sample_exponential(hyper.c8 / med_d, &mut rng).unwrap() },
    };
    let corr = model.corr_matrix(&params.kernel).cholesky().unwrap();
    let epsilon = corr.l() * DVector::from_fn(5, |_, _| sample_normal(&mut rng));
    let mut v = DMatrix::zeros(5, 2);
    for i in 0..5 {
        v[(i, 1)] = sample_normal(&mut rng);
    }
    let steps = StepSizes { tau2: 0.8, theta1: 0.8, theta2: 0.3 };
    let mut sampler = GibbsSampler::new(model, hyper, params, LatentState { epsilon, v }, steps).unwrap();
    let y = sampler.simulate_response(&mut rng);
    sampler.set_response(y).unwrap();

    let n_sweeps = 100_000;
    let mut trace: [Vec<f64>; 6] = Default::default();
    for _ in 0..n_sweeps {
        sampler.sweep(&mut rng).unwrap();
        let y = sampler.simulate_response(&mut rng);
        sampler.set_response(y).unwrap();
        let p = sampler.params();
        for (k, v) in [p.beta[0], p.beta[1], p.sigma2, p.omega2, p.tau2, p.kernel.range()].into_iter().enumerate() {
            trace[k].push(v);
        }
    }

    let omega_cdf = LogGridCdf::new(|w| gig_log_kernel(w, hyper.gamma_gig, hyper.c4, hyper.c5), -20.0, 6.0, 40_000);
    let tau_cdf = LogGridCdf::new(|t| gig_log_kernel(t, 0.0, hyper.c6, hyper.c7), -25.0, 6.0, 40_000);
    let rate = hyper.c8 / med_d;
    let d = [
        ks(&trace[0], |b| normal_cdf(b, 0.0, hyper.c1)),
        ks(&trace[1], |b| normal_cdf(b, 0.0, hyper.c1)),
        ks(&trace[2], |s| statrs::function::gamma::gamma_ur(hyper.c2, hyper.c3 / s)),
        ks(&trace[3], |w| omega_cdf.eval(w)),
        ks(&trace[4], |t| tau_cdf.eval(t)),
        ks(&trace[5], |th| 1.0 - (-rate * th).exp()),
    ];
    let names = ["beta_0", "beta_1", "sigma2", "omega2", "tau2", "theta1"];
    let worst = d.iter().copied().fold(0.0, f64::max);
    outcome(
        worst < 0.02,
        names.iter().zip(d).map(|(n, v)| format!("{n} {v:.4}")).collect::<Vec<_>>().join(", "),
    )
}

/// Per-seed results of the simulation study shared by criteria 5, 6 and 8.
struct StudyRun {
    seed: u64,
    beta1_mem: f64,
    dic_mem: f64,
    dic_nm: f64,
    sigma2_mem: f64,
    sigma2_nm: f64,
    omega2_mem: f64,
    tau2_mem: f64,
    max_psrf: f64,
    worst: String,
    psrf_ok: bool,
}

fn study_init(variant: ModelVariant) -> Params {
    let mut p = exp_params(&[1.5, 3.0], 2.8, 3.0, 0.1, 5.0);
    if variant == ModelVariant::Naive {
        p.tau2 = 0.0;
    }
    p
}

fn run_study_seed(seed: u64) -> StudyRun {
    let spec = SimSpec::default();
    let study = simulate_study(&spec, &mut RngState::new(seed)).unwrap();
    let hyper = study_hyperparams();
    let config = SamplerConfig { n_chains: 4, seed, ..SamplerConfig::default() };

    let mem = SpatialModel::new(study.train.clone(), ModelVariant::MeasurementError).unwrap();
    let chains = run_chains(&mem, &hyper, &study_init(ModelVariant::MeasurementError), 0.31, &config).unwrap();
    let table = psrf_table(&chains).unwrap();
    let (worst, max_psrf) = table
        .iter()
        .map(|(n, p)| (n.clone(), p.r_hat))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let psrf_ok = converged(&table, 1.1);
    let mem_draws: Vec<Params> = chains.iter().flat_map(|c| c.draws.iter().map(|d| d.params.clone())).collect();
    drop(chains);
    let mean_of = |draws: &[Params], f: &dyn Fn(&Params) -> f64| mean(&draws.iter().map(f).collect::<Vec<_>>());
    let dic_mem = dic_marginal(&mem, &mem_draws).unwrap().dic;

    let nm = SpatialModel::new(study.train, ModelVariant::Naive).unwrap();
    let nm_config = SamplerConfig { n_chains: 1, ..config };
    let nm_chain = run_chains(&nm, &hyper, &study_init(ModelVariant::Naive), 0.31, &nm_config).unwrap();
    let nm_draws: Vec<Params> = nm_chain[0].draws.iter().map(|d| d.params.clone()).collect();
    let dic_nm = dic_marginal(&nm, &nm_draws).unwrap().dic;

    StudyRun {
        seed,
        beta1_mem: mean_of(&mem_draws, &|p| p.beta[1]),
        dic_mem,
        dic_nm,
        sigma2_mem: mean_of(&mem_draws, &|p| p.sigma2),
        sigma2_nm: mean_of(&nm_draws, &|p| p.sigma2),
        omega2_mem: mean_of(&mem_draws, &|p| p.omega2),
        tau2_mem: mean_of(&mem_draws, &|p| p.tau2),
        max_psrf,
        worst,
        psrf_ok,
    }
}

const STUDY_SEEDS: std::ops::RangeInclusive<u64> = 1..=10;

fn criterion_5(runs: &[StudyRun]) -> Outcome {
    let a = runs.iter().filter(|r| (1.5..=2.5).contains(&r.beta1_mem)).count();
    let b = runs.iter().filter(|r| r.dic_mem < r.dic_nm).count();
    let c = runs.iter().filter(|r| r.sigma2_nm > r.sigma2_mem).count();
    outcome(
        a >= 8 && b >= 8 && c >= 8,
        format!("(a) beta_1 in [1.5, 2.5]: {a}/10; (b) DIC(MEM) < DIC(NM): {b}/10; (c) sigma2 NM > MEM: {c}/10"),
    )
}

fn criterion_6(runs: &[StudyRun]) -> Outcome {
    let ok = runs.iter().filter(|r| r.psrf_ok).count();
    outcome(ok >= 8, format!("all PSRF < 1.1 in {ok}/10 seeds"))
}

fn criterion_8(runs: &[StudyRun]) -> Outcome {
    let within = |est: f64, truth: f64| est / truth <= 3.0 && truth / est <= 3.0;
    let ok = runs
        .iter()
        .filter(|r| within(r.sigma2_mem, 1.0) && within(r.omega2_mem, 1.1) && within(r.tau2_mem, 0.1))
        .count();
    let s = runs.iter().filter(|r| within(r.sigma2_mem, 1.0)).count();
    let w = runs.iter().filter(|r| within(r.omega2_mem, 1.1)).count();
    let t = runs.iter().filter(|r| within(r.tau2_mem, 0.1)).count();
    outcome(
        ok >= 7,
        format!("all three within a factor of 3 in {ok}/10 seeds (sigma2 {s}/10, omega2 {w}/10, tau2 {t}/10)"),
    )
}

fn criterion_7() -> Outcome {
    // Per-draw moments against conditioning the joint normal of (y₁, y₂, y₀)
    // with ε and the V terms integrated out.
    let locs = [(0.0, 0.0), (2.0, 1.0)];
    let x = [2.7, 3.4];
    let y = [5.9, 7.6];
    let data = dataset(&locs, &y, &x);
    let p = exp_params(&[0.4, 1.9], 1.2, 0.8, 0.15, 1.7);
    let site = (0.8, 1.3);
    let x0 = 3.1;
    let req = PredictionRequest::from_covariates(vec![Location::new(site.0, site.1)], &DMatrix::from_element(1, 1, x0))
        .unwrap();
    let mo = conditional_moments(&data, &p, &req).unwrap()[0];

    let all = [locs[0], locs[1], site];
    let c = exp_corr(&all, 1.7);
    let b2 = p.beta[1] * p.beta[1];
    // Observed rows carry white noise ω² and the V term τ²β²; the new site
    // keeps ε and ρ only.
    let mut sigma = c * p.sigma2;
    for i in 0..2 {
        sigma[(i, i)] += p.sigma2 * (p.omega2 + p.tau2 * b2);
    }
    sigma[(2, 2)] += p.sigma2 * p.omega2;
    let m = [p.beta[0] + p.beta[1] * x[0], p.beta[0] + p.beta[1] * x[1], p.beta[0] + p.beta[1] * x0];
    let s11 = sigma.view((0, 0), (2, 2)).into_owned();
    let s12 = DVector::from_row_slice(&[sigma[(0, 2)], sigma[(1, 2)]]);
    let resid = DVector::from_row_slice(&[y[0] - m[0], y[1] - m[1]]);
    let w = oracle::solve(&s11, &s12);
    let oracle_mean = m[2] + w.dot(&resid);
    let oracle_var = sigma[(2, 2)] - w.dot(&s12);
    let oracle_me = p.sigma2 * p.tau2 * b2;
    let err = (mo.mean - oracle_mean)
        .abs()
        .max((mo.variance - oracle_var).abs())
        .max((mo.me_variance - oracle_me).abs());

    // Transect leaving a cluster of sites along the x axis.
    let cluster: Vec<(f64, f64)> = (0..8).map(|i| (i as f64 * 0.7, 0.0)).collect();
    let xs: Vec<f64> = (0..8).map(|i| 3.0 + 0.1 * i as f64).collect();
    let ys: Vec<f64> = (0..8).map(|i| 6.0 + 0.3 * (i as f64).sin()).collect();
    let line = dataset(&cluster, &ys, &xs);
    let lp = exp_params(&[0.5, 2.0], 1.0, 0.3, 0.1, 2.0);
    let nodes: Vec<Location> = (0..12).map(|k| Location::new(5.2 + 0.5 * k as f64, 0.0)).collect();
    let req = PredictionRequest::from_covariates(nodes, &DMatrix::from_element(12, 1, 3.0)).unwrap();
    let sds: Vec<f64> =
        conditional_moments(&line, &lp, &req).unwrap().iter().map(|m| m.total_variance().sqrt()).collect();
    let monotone = sds.windows(2).skip(1).all(|w| w[1] > w[0]);

    outcome(
        err < 1e-9 && monotone,
        format!("max |moment err| {err:.1e}; transect sd {:.4} .. {:.4}, monotone {monotone}", sds[0], sds[11]),
    )
}

const DETERMINISM_CONFIG: &str = r#"
seed = 77
output_dir = "run"

[simulate]

[sampler]
n_iter = 600
burn_in = 200
thin = 4
chains = 2

[predict]
probs = [0.05, 0.5, 0.95]
evaluate = true

[predict.grid]
x_min = 0.0
x_max = 50.0
y_min = 0.0
y_max = 50.0
nx = 4
ny = 4

[predict.grid_covariates]
constant = [3.0]

[[sensitivity.alternatives]]
name = "c1_9"
kind = "prior"
priors = { c1 = 9.0 }
"#;

fn run_cli(dir: &Path, command: &str) -> bool {
    Command::new(env!("CARGO_BIN_EXE_spatial-mem"))
        .current_dir(dir)
        .args([command, "--config", "study.toml", "--force"])
        .output()
        .map(|o| o.status.success())
        .unwrap_or(false)
}

fn criterion_9() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let commands = ["simulate", "fit", "predict", "diagnose", "sensitivity"];
    let mut listings = Vec::new();
    for rep in 0..2 {
        let dir = root.path().join(format!("rep{rep}"));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("study.toml"), DETERMINISM_CONFIG).unwrap();
        for c in commands {
            if !run_cli(&dir, c) {
                return outcome(false, format!("`{c}` failed in replicate {rep}"));
            }
        }
        let mut files: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir.join("run"))
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
            .collect();
        files.sort();
        listings.push(files);
    }
    let names: Vec<&str> = listings[0].iter().map(|(n, _)| n.as_str()).collect();
    let has_chain = names.iter().any(|n| n.starts_with("chain_"));
    let has_pred = names.contains(&"predictions.csv");
    let same = listings[0] == listings[1];
    let differing: Vec<&str> = listings[0]
        .iter()
        .zip(&listings[1])
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.as_str())
        .collect();
    outcome(
        same && has_chain && has_pred,
        format!("{} csv files compared across two runs; differing: {differing:?}", names.len()),
    )
}

fn main() {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let wanted = |k: u32| only.as_ref().is_none_or(|v| v.contains(&k));
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let start = Instant::now();
    let mut results: Vec<(u32, Outcome, f64)> = Vec::new();

    let timed = |k: u32, f: &dyn Fn() -> Outcome, results: &mut Vec<(u32, Outcome, f64)>| {
        if wanted(k) {
            let t = Instant::now();
            let o = f();
            let secs = t.elapsed().as_secs_f64();
            println!("criterion {k}: {} ({secs:.1} s) {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
            results.push((k, o, secs));
        }
    };

    timed(1, &criterion_1, &mut results);
    timed(2, &criterion_2, &mut results);
    timed(3, &criterion_3, &mut results);
    timed(4, &criterion_4, &mut results);

    if wanted(5) || wanted(6) || wanted(8) {
        let t = Instant::now();
        let runs: Vec<StudyRun> = STUDY_SEEDS
            .map(|seed| {
                let r = run_study_seed(seed);
                println!(
                    "  study seed {:>2}: beta_1 {:.3}, DIC mem {:.2} / nm {:.2}, sigma2 mem {:.3} / nm {:.3}, \
                     omega2 {:.3}, tau2 {:.3}, max PSRF {:.3} ({})",
                    r.seed, r.beta1_mem, r.dic_mem, r.dic_nm, r.sigma2_mem, r.sigma2_nm, r.omega2_mem, r.tau2_mem,
                    r.max_psrf, r.worst
                );
                r
            })
            .collect();
        println!("  study runs took {:.1} s", t.elapsed().as_secs_f64());
        timed(5, &|| criterion_5(&runs), &mut results);
        timed(6, &|| criterion_6(&runs), &mut results);
        timed(8, &|| criterion_8(&runs), &mut results);
    }

    timed(7, &criterion_7, &mut results);
    timed(9, &criterion_9, &mut results);

    let failed: Vec<u32> = results.iter().filter(|r| !r.1.pass).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed {:?}, {:.1} s total",
        results.len() - failed.len(),
        failed.len(),
        failed,
        start.elapsed().as_secs_f64()
    );
    if strict && !failed.is_empty() {
        std::process::exit(1);
    }
}
