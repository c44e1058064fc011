//! Output files: draw tables, reports and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use spatial_mem::data::{read_numeric_csv, write_numeric_csv};
use spatial_mem::diagnostics::{DicReport, Psrf, SensitivityReport, Summary};
use spatial_mem::mcmc::{AcceptanceRates, Chain};

use crate::error::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

/// Tracks every file a command writes, for the manifest.
#[derive(Debug, Default)]
pub struct Outputs {
    pub dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        Ok(Self { dir, files: Vec::new() })
    }

    pub fn path(&mut self, name: &str) -> PathBuf {
        let p = self.dir.join(name);
        if !self.files.contains(&p) {
            self.files.push(p.clone());
        }
        p
    }

    /// Record a file written outside the output directory.
    pub fn path_external(&mut self, p: &Path) {
        if !self.files.iter().any(|f| f == p) {
            self.files.push(p.to_path_buf());
        }
    }

    /// `sha256` of every written file, keyed by file name.
    pub fn digests(&self) -> Result<BTreeMap<String, String>, CliError> {
        self.files
            .iter()
            .map(|p| {
                let bytes = std::fs::read(p).map_err(|e| io_err(p, e))?;
                let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                Ok((name, hex(&Sha256::digest(&bytes))))
            })
            .collect()
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// CSV whose leading columns are text.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn chain_file_name(k: usize) -> String {
    format!("chain_{}.csv", k + 1)
}

pub fn write_chain(path: &Path, chain: &Chain) -> Result<(), CliError> {
    let mut header = vec!["iteration".to_string()];
    header.extend(chain.names.iter().cloned());
    let rows = chain.draws.iter().zip(chain.eta_rows()).map(|(d, eta)| {
        let mut r = vec![d.iteration as f64];
        r.extend(eta);
        r
    });
    write_numeric_csv(path, &header, rows).map_err(|e| io_err(path, e))
}

/// Draws of one chain file: parameter names and one `η` row per draw.
pub struct ChainFile {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn read_chain(path: &Path) -> Result<ChainFile, CliError> {
    let t = read_numeric_csv(path).map_err(|e| CliError::Config(e.to_string()))?;
    if t.header.first().map(String::as_str) != Some("iteration") {
        return Err(CliError::Config(format!("{}: not a chain file", path.display())));
    }
    let names = t.header[1..].to_vec();
    let rows = (0..t.n_rows()).map(|i| t.columns[1..].iter().map(|c| c[i]).collect()).collect();
    Ok(ChainFile { names, rows })
}

/// All `chain_<k>.csv` files of a directory, in chain order.
pub fn read_chains(dir: &Path) -> Result<Vec<ChainFile>, CliError> {
    let mut out = Vec::new();
    for k in 0.. {
        let p = dir.join(chain_file_name(k));
        if !p.exists() {
            break;
        }
        out.push(read_chain(&p)?);
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("no chain files in {}", dir.display())));
    }
    if out.iter().any(|c| c.names != out[0].names) {
        return Err(CliError::Config("chain files have different columns".into()));
    }
    if out.iter().all(|c| c.rows.is_empty()) {
        return Err(CliError::Config("chain files contain no draws".into()));
    }
    Ok(out)
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Posterior summary: mean (EVal) and posterior variance (EVar) per
/// parameter, followed by the quantiles.
pub fn write_summary(path: &Path, summaries: &[(String, Summary)]) -> Result<(), CliError> {
    let mut header = strings(&["parameter", "mean", "variance"]);
    if let Some((_, s)) = summaries.first() {
        header.extend(s.quantiles.iter().map(|&(p, _)| spatial_mem::prediction::quantile_label(p)));
    }
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|(n, s)| {
            let mut r = vec![n.clone(), num(s.mean), num(s.variance)];
            r.extend(s.quantiles.iter().map(|&(_, q)| num(q)));
            r
        })
        .collect();
    write_table(path, &header, &rows)
}

pub fn write_psrf(path: &Path, table: &[(String, Psrf)]) -> Result<(), CliError> {
    let rows: Vec<Vec<String>> = table
        .iter()
        .map(|(n, p)| vec![n.clone(), num(p.r_hat), num(p.within), num(p.between), p.degenerate.to_string()])
        .collect();
    write_table(path, &strings(&["parameter", "psrf", "within", "between", "degenerate"]), &rows)
}

pub fn write_dic(path: &Path, d: &DicReport) -> Result<(), CliError> {
    let rows = vec![vec![
        num(d.dic),
        num(d.mean_deviance),
        num(d.deviance_at_mean),
        num(d.p_d),
        if d.conditional { "conditional" } else { "marginal" }.to_string(),
    ]];
    write_table(path, &strings(&["dic", "mean_deviance", "deviance_at_mean", "p_d", "likelihood"]), &rows)
}

/// Relative changes and per-group maxima, one block of rows per alternative.
pub fn write_sensitivity(path: &Path, mre_path: &Path, reports: &[(String, SensitivityReport)]) -> Result<(), CliError> {
    let mut rows = Vec::new();
    let mut mre = Vec::new();
    for (alt, r) in reports {
        for (n, c) in r.names.iter().zip(&r.changes) {
            rows.push(vec![alt.clone(), n.clone(), num(*c)]);
        }
        for (g, m) in r.mre() {
            mre.push(vec![alt.clone(), g, num(m)]);
        }
    }
    write_table(path, &strings(&["alternative", "parameter", "relative_change"]), &rows)?;
    write_table(mre_path, &strings(&["alternative", "group", "mre"]), &mre)
}

pub fn acceptance_json(a: &AcceptanceRates) -> Value {
    json!({ "tau2": a.tau2, "theta1": a.theta1, "theta2": a.theta2 })
}

/// Write `manifest_<command>.json` describing the run.
pub fn write_manifest(
    outputs: &mut Outputs,
    command: &str,
    seed: u64,
    config_text: &str,
    seconds: f64,
    extra: Value,
) -> Result<(), CliError> {
    let digests = outputs.digests()?;
    let m = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "wall_clock_seconds": seconds,
        "config": config_text,
        "details": extra,
        "outputs": digests,
    });
    let path = outputs.dir.join(format!("manifest_{command}.json"));
    let text = serde_json::to_string_pretty(&m).map_err(|e| io_err(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}
