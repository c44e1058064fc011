use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use serde_json::json;

use spatial_mem::data::{load_dataset, read_numeric_csv, write_dataset, write_numeric_csv, SpatialDataset};
use spatial_mem::diagnostics::{
    converged, dic, dic_marginal, gelman_rubin, psrf_table, relative_change_chains, summarize, Psrf,
};
use spatial_mem::mcmc::{eta_names, params_from_eta, run_chains, Chain, Draw};
use spatial_mem::model::{Params, SpatialModel};
use spatial_mem::prediction::{predict_at, predict_grid, rmse, write_summaries_csv, CovariateSurface, PredictionRequest};
use spatial_mem::rng::RngState;
use spatial_mem::simulation::simulate_study;

use crate::config::{AlternativeKind, InitSection, LoadedConfig, PriorSection, SurfaceConfig};
use crate::error::CliError;
use crate::output::{
    acceptance_json, chain_file_name, read_chains, write_chain, write_dic, write_manifest, write_psrf,
    write_sensitivity, write_summary, write_table, Outputs,
};

const SUMMARY_PROBS: [f64; 3] = [0.025, 0.5, 0.975];

/// Command-line overrides of config values.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub chains: Option<usize>,
    pub force: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut LoadedConfig) {
        if let Some(s) = self.seed {
            cfg.config.seed = s;
        }
        if let Some(k) = self.chains {
            cfg.config.sampler.chains = k;
        }
    }
}

fn config_err(what: &Path, e: spatial_mem::Error) -> CliError {
    CliError::Config(format!("{}: {e}", what.display()))
}

pub fn simulate(cfg: &LoadedConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let spec = cfg.sim_spec()?;
    let c = &cfg.config;
    if c.data.covariates.len() != 1 || c.data.error_prone != c.data.covariates {
        return Err(CliError::Config("simulate writes a single error-prone covariate; list it in data.covariates and data.error_prone".into()));
    }
    let study = simulate_study(&spec, &mut RngState::new(c.seed))?;
    let schema = c.data.schema();

    let mut out = Outputs::new(cfg.output_dir())?;
    let train = cfg.train_path();
    write_dataset(&train, &study.train, &schema).map_err(|e| CliError::Io(e.to_string()))?;
    out.path_external(&train);
    if let Some(test) = &study.test {
        let p = cfg.test_path();
        write_dataset(&p, test, &schema).map_err(|e| CliError::Io(e.to_string()))?;
        out.path_external(&p);
    }
    let truth = cfg.truth_path();
    let header: Vec<String> =
        [c.data.easting.as_str(), c.data.northing.as_str(), "x", "v", "holdout"].map(String::from).to_vec();
    let rows = spec.locations.iter().enumerate().map(|(i, l)| {
        let held = !study.train_rows.contains(&i);
        vec![l.x, l.y, study.truth.x[i], study.truth.v[i], f64::from(u8::from(held))]
    });
    write_numeric_csv(&truth, &header, rows).map_err(|e| CliError::Io(e.to_string()))?;
    out.path_external(&truth);

    let details = json!({
        "n_train": study.train.n(),
        "n_test": study.test.as_ref().map_or(0, |t| t.n()),
        "tau": study.truth.tau,
    });
    write_manifest(&mut out, "simulate", c.seed, &cfg.text, start.elapsed().as_secs_f64(), details)
}

fn load_train(cfg: &LoadedConfig) -> Result<SpatialDataset, CliError> {
    let p = cfg.train_path();
    load_dataset(&p, &cfg.config.data.schema()).map_err(|e| config_err(&p, e))
}

fn build_model(cfg: &LoadedConfig, data: SpatialDataset) -> Result<SpatialModel, CliError> {
    SpatialModel::new(data, cfg.config.model.variant()).map_err(|e| CliError::Config(format!("model: {e}")))
}

/// Run all chains of one fit.
fn run_fit(cfg: &LoadedConfig, model: &SpatialModel, priors: &PriorSection, init: &InitSection) -> Result<Vec<Chain>, CliError> {
    let c = &cfg.config;
    let hyper = priors.hyperparams()?;
    let params = init.params(model.data().p(), model.variant())?;
    let sampler = c.sampler.config(c.seed)?;
    Ok(run_chains(model, &hyper, &params, init.latent_variance, &sampler)?)
}

fn psrf_if_possible(chains: &[Chain]) -> Result<Option<Vec<(String, Psrf)>>, CliError> {
    if chains.len() < 2 {
        return Ok(None);
    }
    Ok(Some(psrf_table(chains)?))
}

fn pooled_summaries(names: &[String], traces: impl Fn(&str) -> Vec<f64>) -> Result<Vec<(String, spatial_mem::diagnostics::Summary)>, CliError> {
    names.iter().map(|n| Ok((n.clone(), summarize(&traces(n), &SUMMARY_PROBS)?))).collect()
}

pub fn fit(cfg: &LoadedConfig, force: bool) -> Result<(), CliError> {
    let start = Instant::now();
    let model = build_model(cfg, load_train(cfg)?)?;
    let c = &cfg.config;
    let chains = run_fit(cfg, &model, &c.priors, &c.init)?;

    let mut out = Outputs::new(cfg.output_dir())?;
    for (k, ch) in chains.iter().enumerate() {
        let p = out.path(&chain_file_name(k));
        write_chain(&p, ch)?;
    }
    let psrf = psrf_if_possible(&chains)?;
    if let Some(t) = &psrf {
        let p = out.path("psrf.csv");
        write_psrf(&p, t)?;
    }
    let gate_ok = psrf.as_ref().is_none_or(|t| converged(t, c.sampler.psrf_threshold));
    let mut details = json!({
        "variant": model.variant().name(),
        "chains": chains.iter().map(|ch| json!({
            "stream": ch.stream,
            "draws": ch.len(),
            "acceptance": acceptance_json(&ch.acceptance),
            "final_steps": { "tau2": ch.steps.tau2, "theta1": ch.steps.theta1, "theta2": ch.steps.theta2 },
        })).collect::<Vec<_>>(),
        "psrf_threshold": c.sampler.psrf_threshold,
        "converged": gate_ok,
        "forced": force && !gate_ok,
    });
    if gate_ok || force {
        let names = &chains[0].names;
        let summaries = pooled_summaries(names, |n| chains.iter().flat_map(|ch| ch.trace(n).unwrap_or_default()).collect())?;
        let p = out.path("summary.csv");
        write_summary(&p, &summaries)?;
        let draws: Vec<&Draw> = chains.iter().flat_map(|ch| ch.draws.iter()).collect();
        let d = dic(&model, &draws)?;
        let p = out.path("dic.csv");
        write_dic(&p, &d)?;
        details["dic"] = json!(d.dic);
    }
    write_manifest(&mut out, "fit", c.seed, &cfg.text, start.elapsed().as_secs_f64(), details)?;
    if gate_ok || force {
        Ok(())
    } else {
        let worst = psrf
            .unwrap_or_default()
            .into_iter()
            .filter(|(_, p)| p.degenerate || p.r_hat >= c.sampler.psrf_threshold)
            .map(|(n, p)| format!("{n}={:.3}", p.r_hat))
            .collect::<Vec<_>>()
            .join(", ");
        Err(CliError::Gate(format!("PSRF above {}: {worst}; rerun with --force to write summaries", c.sampler.psrf_threshold)))
    }
}

/// Parameter draws of every chain file, validated against the model.
fn load_draws(cfg: &LoadedConfig, data: &SpatialDataset) -> Result<Vec<Vec<Params>>, CliError> {
    let c = &cfg.config;
    let variant = c.model.variant();
    let kernel = c.init.theta.spec()?;
    let files = read_chains(&cfg.output_dir())?;
    let want = eta_names(data.names(), &kernel, variant);
    if files[0].names != want {
        return Err(CliError::Config(format!(
            "chain columns {:?} do not match the configured model {:?}",
            files[0].names, want
        )));
    }
    files
        .iter()
        .map(|f| {
            f.rows
                .iter()
                .map(|r| params_from_eta(r, data.p(), &kernel, variant).map_err(|e| CliError::Config(format!("chain file: {e}"))))
                .collect()
        })
        .collect()
}

/// Evenly spaced subset of at most `max` draws; 0 keeps all.
fn subsample(draws: &[Params], max: usize) -> Vec<Params> {
    if max == 0 || draws.len() <= max {
        return draws.to_vec();
    }
    (0..max).map(|i| draws[i * draws.len() / max].clone()).collect()
}

pub fn predict(cfg: &LoadedConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let c = &cfg.config;
    let pc = &c.predict;
    let train = load_train(cfg)?;
    let pooled: Vec<Params> = load_draws(cfg, &train)?.into_iter().flatten().collect();
    if !pc.test_sites && pc.grid.is_none() {
        return Err(CliError::Config("predict: enable test_sites or give a grid".into()));
    }
    if pc.evaluate && !pc.test_sites {
        return Err(CliError::Config("predict.evaluate needs test_sites".into()));
    }
    let test = if pc.test_sites {
        let p = cfg.test_path();
        Some(load_dataset(&p, &c.data.schema()).map_err(|e| config_err(&p, e))?)
    } else {
        None
    };
    let grid = pc.grid.map(|g| g.spec()).transpose()?;
    let surface = match (&grid, &pc.grid_covariates) {
        (None, _) => None,
        (Some(_), None) => return Err(CliError::Config("predict.grid needs grid_covariates".into())),
        (Some(_), Some(SurfaceConfig::Constant(v))) => Some(CovariateSurface::Constant(v.clone())),
        (Some(_), Some(SurfaceConfig::Csv(path))) => {
            let p = cfg.resolve(path);
            let t = read_numeric_csv(&p).map_err(|e| config_err(&p, e))?;
            let cols = c.data.covariates.iter().map(|n| t.column(n)).collect::<Result<Vec<_>, _>>().map_err(|e| config_err(&p, e))?;
            Some(CovariateSurface::PerNode(DMatrix::from_fn(t.n_rows(), cols.len(), |i, j| cols[j][i])))
        }
    };

    let mut out = Outputs::new(cfg.output_dir())?;
    let mut details = json!({ "draws_available": pooled.len() });
    if let Some(test) = &test {
        let draws = subsample(&pooled, pc.max_draws);
        let req = PredictionRequest::from_dataset(test);
        let s = predict_at(&train, &draws, &req, &pc.probs, c.seed)?;
        let p = out.path("predictions.csv");
        write_summaries_csv(&p, &s)?;
        details["test_draws"] = json!(draws.len());
        if pc.evaluate {
            let e = rmse(&s, test.y())?;
            let p = out.path("evaluation.csv");
            write_table(&p, &["rmse".into(), "n".into()], &[vec![format!("{e}"), test.n().to_string()]])?;
            details["rmse"] = json!(e);
        }
    }
    if let (Some(g), Some(surf)) = (&grid, &surface) {
        let draws = subsample(&pooled, pc.grid_max_draws);
        let s = predict_grid(&train, &draws, g, surf, &pc.probs, c.seed)?;
        let p = out.path("grid.csv");
        write_summaries_csv(&p, &s)?;
        details["grid_draws"] = json!(draws.len());
    }
    write_manifest(&mut out, "predict", c.seed, &cfg.text, start.elapsed().as_secs_f64(), details)
}

pub fn diagnose(cfg: &LoadedConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let c = &cfg.config;
    let train = load_train(cfg)?;
    let chains = load_draws(cfg, &train)?;
    let variant = c.model.variant();
    let model = build_model(cfg, train)?;
    let names = eta_names(model.data().names(), &c.init.theta.spec()?, variant);
    let column = |k: usize| -> Vec<Vec<f64>> {
        chains.iter().map(|ch| ch.iter().map(|p| spatial_mem::mcmc::eta_values(p, variant)[k]).collect()).collect()
    };

    let mut out = Outputs::new(cfg.output_dir())?;
    let mut details = json!({ "chains": chains.len() });
    let equal = chains.iter().all(|ch| ch.len() == chains[0].len());
    if chains.len() >= 2 && equal {
        let table = (0..names.len())
            .map(|k| {
                let cols = column(k);
                let refs: Vec<&[f64]> = cols.iter().map(|v| v.as_slice()).collect();
                Ok((names[k].clone(), gelman_rubin(&refs)?))
            })
            .collect::<Result<Vec<_>, CliError>>()?;
        let p = out.path("diagnose_psrf.csv");
        write_psrf(&p, &table)?;
        details["converged"] = json!(converged(&table, c.sampler.psrf_threshold));
    }
    let summaries = pooled_summaries(&names, |n| {
        let k = names.iter().position(|m| m == n).unwrap_or(0);
        column(k).concat()
    })?;
    let p = out.path("diagnose_summary.csv");
    write_summary(&p, &summaries)?;
    let pooled: Vec<Params> = chains.into_iter().flatten().collect();
    let d = dic_marginal(&model, &pooled)?;
    let p = out.path("diagnose_dic.csv");
    write_dic(&p, &d)?;
    details["dic"] = json!(d.dic);
    write_manifest(&mut out, "diagnose", c.seed, &cfg.text, start.elapsed().as_secs_f64(), details)
}

pub fn sensitivity(cfg: &LoadedConfig) -> Result<(), CliError> {
    let start = Instant::now();
    let c = &cfg.config;
    let alts = &c.sensitivity.alternatives;
    if alts.is_empty() {
        return Err(CliError::Config("sensitivity needs at least one alternative".into()));
    }
    let model = build_model(cfg, load_train(cfg)?)?;
    // Validate every alternative before any sampling.
    for a in alts {
        a.priors.apply(&c.priors).hyperparams()?;
        a.init.apply(&c.init).params(model.data().p(), model.variant())?;
    }
    let bench = run_fit(cfg, &model, &c.priors, &c.init)?;
    let mut prior_reports = Vec::new();
    let mut init_reports = Vec::new();
    for a in alts {
        let chains = run_fit(cfg, &model, &a.priors.apply(&c.priors), &a.init.apply(&c.init))?;
        let r = relative_change_chains(&bench, &chains)?;
        match a.kind {
            AlternativeKind::Prior => prior_reports.push((a.name.clone(), r)),
            AlternativeKind::Init => init_reports.push((a.name.clone(), r)),
        }
    }
    let mut out = Outputs::new(cfg.output_dir())?;
    let names = &bench[0].names;
    let summaries = pooled_summaries(names, |n| bench.iter().flat_map(|ch| ch.trace(n).unwrap_or_default()).collect())?;
    let p = out.path("sensitivity_benchmark.csv");
    write_summary(&p, &summaries)?;
    for (kind, reports) in [("prior", &prior_reports), ("init", &init_reports)] {
        if reports.is_empty() {
            continue;
        }
        let a = out.path(&format!("sensitivity_{kind}.csv"));
        let b = out.path(&format!("sensitivity_{kind}_mre.csv"));
        write_sensitivity(&a, &b, reports)?;
    }
    let details = json!({
        "alternatives": alts.iter().map(|a| &a.name).collect::<Vec<_>>(),
        "max_relative_change": prior_reports.iter().chain(&init_reports)
            .map(|(n, r)| (n.clone(), r.overall())).collect::<std::collections::BTreeMap<_, _>>(),
    });
    write_manifest(&mut out, "sensitivity", c.seed, &cfg.text, start.elapsed().as_secs_f64(), details)
}

/// Load the config, apply overrides, and run one command.
pub fn run(command: &str, config: &Path, ov: Overrides) -> Result<(), CliError> {
    let mut cfg = LoadedConfig::load(config)?;
    ov.apply(&mut cfg);
    match command {
        "simulate" => simulate(&cfg),
        "fit" => fit(&cfg, ov.force),
        "predict" => predict(&cfg),
        "diagnose" => diagnose(&cfg),
        "sensitivity" => sensitivity(&cfg),
        other => Err(CliError::Config(format!("unknown command `{other}`"))),
    }
}
