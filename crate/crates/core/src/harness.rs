//! Simulation study runner: datasets × priors × chains, aggregated into table rows.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, median, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::metrics::{self, DatasetMetrics, SummaryRow};
use crate::models::{
    simulate_model1, simulate_model2, simulate_model3, BoundTarget, Dataset, ModelKind,
    SimulatedDataset, TrueParams, DEFAULT_AGES, DEFAULT_SCHOOL_SIGMAS,
};
use crate::priors::{
    catalog_entry, catalog_label, PriorFamily, ScaleRegime, CATALOG_LEN, DEFAULT_SCALE_FACTOR,
};
use crate::sampler::{run_chain_seeded, ChainOutput, ChainQuality, SamplerConfig};
use crate::stats::{splitmix64, SimRng};

pub const DEFAULT_TAU_R: f64 = 0.7;
pub const DEFAULT_BETA1: f64 = 0.2;
pub const DEFAULT_M2_SUBJECTS: usize = 10;
pub const DEFAULT_M3_SUBJECTS: usize = 700;
pub const DEFAULT_M3_GROUPS: usize = 7;

pub const DIAGNOSTICS_HEADER: [&str; 9] = [
    "label",
    "true_value",
    "min_ess",
    "med_ess",
    "mean_rhat",
    "max_rhat",
    "mean_div",
    "pct_zero_dt",
    "max_dt",
];

/// Seed for `(dataset, prior, chain)`. Prior index 0 with chain 0 is the
/// dataset's simulation stream; catalog priors use their 1-based index.
pub fn derive_seed(base_seed: u64, dataset_index: u64, prior_index: u64, chain_index: u64) -> u64 {
    let mut h = splitmix64(base_seed);
    h = splitmix64(h ^ dataset_index);
    h = splitmix64(h ^ prior_index);
    splitmix64(h ^ chain_index)
}

/// Generating values; unset fields take the model's defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrueParamsConfig {
    /// `τ` for models 1–2, `τ_b` for model 3.
    pub tau: Option<f64>,
    pub tau_b: Option<f64>,
    pub tau_r: Option<f64>,
    pub beta0: Option<f64>,
    pub beta1: Option<f64>,
    pub sigma: Option<f64>,
    pub n: Option<usize>,
    pub j: Option<usize>,
    pub ages: Option<Vec<f64>>,
    pub school_sigmas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub model: ModelKind,
    pub true_params: TrueParamsConfig,
    pub n_datasets: usize,
    pub sampler: SamplerConfig,
    pub c: f64,
    pub base_seed: u64,
    /// 1-based catalog indices; all fourteen when absent.
    pub prior_subset: Option<Vec<usize>>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::M1,
            true_params: TrueParamsConfig::default(),
            n_datasets: 100,
            sampler: SamplerConfig::default(),
            c: DEFAULT_SCALE_FACTOR,
            base_seed: 0,
            prior_subset: None,
        }
    }
}

/// Fully specified generating values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedTruth {
    pub tau: f64,
    pub tau_r: Option<f64>,
    pub beta0: Option<f64>,
    pub beta1: Option<f64>,
    pub sigma: Option<f64>,
    pub n: Option<usize>,
    pub j: Option<usize>,
    pub ages: Option<Vec<f64>>,
    pub school_sigmas: Option<Vec<f64>>,
}

impl StudyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn priors(&self) -> Vec<usize> {
        self.prior_subset
            .clone()
            .unwrap_or_else(|| (1..=CATALOG_LEN).collect())
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if self.n_datasets < 1 {
            return Err(Error::Config("n_datasets must be at least 1".into()));
        }
        if !(self.c > 1.0 && self.c.is_finite()) {
            return Err(Error::Config(format!("c must exceed 1, got {}", self.c)));
        }
        let priors = self.priors();
        if priors.is_empty() {
            return Err(Error::Config("prior_subset is empty".into()));
        }
        if let Some(&bad) = priors.iter().find(|&&p| !(1..=CATALOG_LEN).contains(&p)) {
            return Err(Error::Config(format!("prior index {bad} outside 1..=14")));
        }
        let mut sorted = priors.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != priors.len() {
            return Err(Error::Config("prior_subset has duplicates".into()));
        }
        self.resolve_truth().map(|_| ())
    }

    pub fn resolve_truth(&self) -> Result<ResolvedTruth> {
        let t = &self.true_params;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
            }
        };
        let tau = match (self.model, t.tau, t.tau_b) {
            (ModelKind::M3, Some(a), Some(b)) if a != b => {
                return Err(Error::Config("tau and tau_b disagree".into()))
            }
            (ModelKind::M3, _, Some(v)) | (_, Some(v), _) => positive("tau", v)?,
            _ => return Err(Error::Config("true tau is required".into())),
        };
        let nuisance = |field: &str, present: bool| -> Result<()> {
            if present {
                Err(Error::Config(format!(
                    "{field} does not apply to model {}",
                    self.model.number()
                )))
            } else {
                Ok(())
            }
        };
        Ok(match self.model {
            ModelKind::M1 => {
                nuisance("tau_r", t.tau_r.is_some())?;
                nuisance("n", t.n.is_some())?;
                nuisance("j", t.j.is_some())?;
                nuisance("ages", t.ages.is_some())?;
                nuisance("beta0", t.beta0.is_some())?;
                nuisance("beta1", t.beta1.is_some())?;
                nuisance("sigma", t.sigma.is_some())?;
                let sig = t
                    .school_sigmas
                    .clone()
                    .unwrap_or_else(|| DEFAULT_SCHOOL_SIGMAS.to_vec());
                if sig.is_empty() || sig.iter().any(|s| !(*s > 0.0)) {
                    return Err(Error::Config("school_sigmas must be positive".into()));
                }
                ResolvedTruth {
                    tau,
                    tau_r: None,
                    beta0: None,
                    beta1: None,
                    sigma: None,
                    n: None,
                    j: Some(sig.len()),
                    ages: None,
                    school_sigmas: Some(sig),
                }
            }
            ModelKind::M2 => {
                nuisance("tau_r", t.tau_r.is_some())?;
                nuisance("school_sigmas", t.school_sigmas.is_some())?;
                let ages = t.ages.clone().unwrap_or_else(|| DEFAULT_AGES.to_vec());
                if t.j.is_some_and(|j| j != ages.len()) {
                    return Err(Error::Config("j must equal the number of ages".into()));
                }
                ResolvedTruth {
                    tau,
                    tau_r: None,
                    beta0: Some(t.beta0.unwrap_or(0.0)),
                    beta1: Some(t.beta1.unwrap_or(DEFAULT_BETA1)),
                    sigma: Some(positive("sigma", t.sigma.unwrap_or(1.0))?),
                    n: Some(t.n.unwrap_or(DEFAULT_M2_SUBJECTS)),
                    j: Some(ages.len()),
                    ages: Some(ages),
                    school_sigmas: None,
                }
            }
            ModelKind::M3 => {
                nuisance("ages", t.ages.is_some())?;
                nuisance("school_sigmas", t.school_sigmas.is_some())?;
                ResolvedTruth {
                    tau,
                    tau_r: Some(positive("tau_r", t.tau_r.unwrap_or(DEFAULT_TAU_R))?),
                    beta0: Some(t.beta0.unwrap_or(0.0)),
                    beta1: Some(t.beta1.unwrap_or(DEFAULT_BETA1)),
                    sigma: Some(positive("sigma", t.sigma.unwrap_or(1.0))?),
                    n: Some(t.n.unwrap_or(DEFAULT_M3_SUBJECTS)),
                    j: Some(t.j.unwrap_or(DEFAULT_M3_GROUPS)),
                    ages: None,
                    school_sigmas: None,
                }
            }
        })
    }

    /// Stem shared by output files, e.g. `model1_0.4`.
    pub fn tag(&self) -> Result<String> {
        Ok(format!(
            "model{}_{}",
            self.model.number(),
            self.resolve_truth()?.tau
        ))
    }
}

/// Simulates dataset `index` of the study.
pub fn simulate_dataset(config: &StudyConfig, index: usize) -> Result<SimulatedDataset<f64>> {
    let truth = config.resolve_truth()?;
    let seed = derive_seed(config.base_seed, index as u64, 0, 0);
    let mut rng = SimRng::new(seed);
    let (data, params) = match config.model {
        ModelKind::M1 => {
            let sig = truth.school_sigmas.as_deref().unwrap_or(&DEFAULT_SCHOOL_SIGMAS);
            let d = simulate_model1(truth.tau, sig, &mut rng)?;
            (
                Dataset::M1(d),
                TrueParams {
                    tau: vec![truth.tau],
                    beta0: None,
                    beta1: None,
                    sigma: None,
                },
            )
        }
        ModelKind::M2 => {
            let (b0, b1, s) = (truth.beta0.unwrap(), truth.beta1.unwrap(), truth.sigma.unwrap());
            let ages = truth.ages.as_deref().unwrap();
            let d = simulate_model2(truth.tau, b0, b1, s, truth.n.unwrap(), ages, &mut rng)?;
            (
                Dataset::M2(d),
                TrueParams {
                    tau: vec![truth.tau],
                    beta0: Some(b0),
                    beta1: Some(b1),
                    sigma: Some(s),
                },
            )
        }
        ModelKind::M3 => {
            let (b0, b1, s) = (truth.beta0.unwrap(), truth.beta1.unwrap(), truth.sigma.unwrap());
            let tau_r = truth.tau_r.unwrap();
            let d = simulate_model3(
                truth.tau,
                tau_r,
                b0,
                b1,
                s,
                truth.n.unwrap(),
                truth.j.unwrap(),
                &mut rng,
            )?;
            (
                Dataset::M3(d),
                TrueParams {
                    tau: vec![truth.tau, tau_r],
                    beta0: Some(b0),
                    beta1: Some(b1),
                    sigma: Some(s),
                },
            )
        }
    };
    Ok(SimulatedDataset {
        data,
        truth: params,
        seed,
    })
}

/// Catalog entry `prior` bound to every random-effect scale of the dataset,
/// each with its own true value.
pub fn bind_prior(
    dataset: &SimulatedDataset<f64>,
    prior: usize,
    c: f64,
) -> Result<BoundTarget<f64>> {
    let specs = dataset
        .truth
        .tau
        .iter()
        .map(|&t| catalog_entry(prior, t, c))
        .collect::<Result<Vec<_>>>()?;
    BoundTarget::new(dataset.data.clone(), specs)
}

/// Runs every chain of one (dataset, prior) cell, keeping only the scale parameters.
pub fn fit_cell(
    config: &StudyConfig,
    dataset: &SimulatedDataset<f64>,
    dataset_index: usize,
    prior: usize,
) -> Result<Vec<ChainOutput<f64>>> {
    let target = bind_prior(dataset, prior, config.c)?;
    let keep = target.tau_indices();
    (0..config.sampler.chains)
        .into_par_iter()
        .map(|c| {
            let seed = derive_seed(config.base_seed, dataset_index as u64, prior as u64, c as u64);
            run_chain_seeded(&target, &config.sampler, c, seed, Some(&keep))
        })
        .collect()
}

/// Posterior summary of one scale parameter in one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamFit {
    pub name: String,
    pub true_value: f64,
    pub metrics: DatasetMetrics,
    pub ess: f64,
    pub rhat: f64,
    pub mcse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub dataset: usize,
    pub prior: usize,
    pub label: String,
    pub n_divergent: usize,
    pub diagnostics: Option<DiagnosticsReport>,
    pub params: Vec<ParamFit>,
    pub failure: Option<String>,
}

/// One Table-1-style row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticTableRow {
    pub label: String,
    pub true_value: f64,
    pub min_ess: f64,
    pub med_ess: f64,
    pub mean_rhat: f64,
    pub max_rhat: f64,
    pub mean_div: f64,
    pub pct_zero_dt: f64,
    pub max_dt: usize,
}

impl DiagnosticTableRow {
    pub fn record(&self) -> [String; 9] {
        [
            self.label.clone(),
            self.true_value.to_string(),
            self.min_ess.to_string(),
            self.med_ess.to_string(),
            self.mean_rhat.to_string(),
            self.max_rhat.to_string(),
            self.mean_div.to_string(),
            self.pct_zero_dt.to_string(),
            self.max_dt.to_string(),
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub truth: ResolvedTruth,
    pub diagnostic_rows: Vec<DiagnosticTableRow>,
    /// Rows for `τ` (`τ_b` under model 3).
    pub estimate_rows: Vec<SummaryRow>,
    /// Model 3 only: rows for `τ_r`.
    pub tau_r_rows: Vec<SummaryRow>,
    pub fits: Vec<FitRecord>,
    pub dataset_hashes: Vec<u64>,
}

impl StudyResult {
    pub fn failures(&self) -> impl Iterator<Item = &FitRecord> {
        self.fits.iter().filter(|f| f.failure.is_some())
    }

    pub fn estimate_row(&self, prior: usize) -> Option<&SummaryRow> {
        let label = catalog_label(prior)?;
        self.estimate_rows.iter().find(|r| r.label == label)
    }

    pub fn diagnostic_row(&self, prior: usize) -> Option<&DiagnosticTableRow> {
        let label = catalog_label(prior)?;
        self.diagnostic_rows.iter().find(|r| r.label == label)
    }
}

fn summarize_fit(
    dataset: &SimulatedDataset<f64>,
    dataset_index: usize,
    prior: usize,
    outcome: Result<Vec<ChainOutput<f64>>>,
) -> FitRecord {
    let label = catalog_label(prior).unwrap_or_default().to_string();
    let mut record = FitRecord {
        dataset: dataset_index,
        prior,
        label,
        n_divergent: 0,
        diagnostics: None,
        params: Vec::new(),
        failure: None,
    };
    let chains = match outcome {
        Ok(c) => c,
        Err(e) => {
            record.failure = Some(format!("sampler error: {e}"));
            return record;
        }
    };
    record.n_divergent = chains.iter().map(|c| c.n_divergent()).sum();
    if let Some(bad) = chains.iter().find(|c| c.quality == ChainQuality::AllDivergent) {
        record.failure = Some(format!("chain {} diverged on every draw", bad.chain + 1));
        return record;
    }
    match diagnostics::report(&chains, None) {
        Ok(r) => record.diagnostics = Some(r),
        Err(e) => {
            record.failure = Some(format!("diagnostics: {e}"));
            return record;
        }
    }
    for (k, &truth) in dataset.truth.tau.iter().enumerate() {
        let cols: Vec<Vec<f64>> = chains.iter().map(|c| c.column(k)).collect();
        let pooled: Vec<f64> = cols.iter().flatten().copied().collect();
        let fit = metrics::summarize_dataset(&pooled, truth).and_then(|m| {
            Ok(ParamFit {
                name: chains[0].names[k].clone(),
                true_value: truth,
                metrics: m,
                ess: diagnostics::ess(&cols)?,
                rhat: diagnostics::split_rhat(&cols)?,
                mcse: diagnostics::mcse_mean(&cols)?,
            })
        });
        match fit {
            Ok(p) => record.params.push(p),
            Err(e) => {
                record.failure = Some(format!("summary: {e}"));
                record.params.clear();
                return record;
            }
        }
    }
    record
}

fn aggregate_diagnostics(label: &str, true_value: f64, fits: &[&FitRecord]) -> DiagnosticTableRow {
    let reports: Vec<&DiagnosticsReport> = fits.iter().filter_map(|f| f.diagnostics.as_ref()).collect();
    let nan_if_empty = |v: f64| if reports.is_empty() { f64::NAN } else { v };
    let divs: Vec<usize> = fits.iter().map(|f| f.n_divergent).collect();
    let n = divs.len().max(1) as f64;
    DiagnosticTableRow {
        label: label.to_string(),
        true_value,
        min_ess: nan_if_empty(reports.iter().map(|r| r.min_ess).fold(f64::INFINITY, f64::min)),
        med_ess: median(&reports.iter().map(|r| r.med_ess).collect::<Vec<_>>()),
        mean_rhat: nan_if_empty(
            reports.iter().map(|r| r.mean_rhat).sum::<f64>() / reports.len().max(1) as f64,
        ),
        max_rhat: nan_if_empty(reports.iter().map(|r| r.max_rhat).fold(f64::NEG_INFINITY, f64::max)),
        mean_div: divs.iter().sum::<usize>() as f64 / n,
        pct_zero_dt: 100.0 * divs.iter().filter(|&&d| d == 0).count() as f64 / n,
        max_dt: divs.iter().copied().max().unwrap_or(0),
    }
}

fn aggregate_estimates(label: &str, true_value: f64, fits: &[&FitRecord], k: usize) -> Result<SummaryRow> {
    let rows: Vec<DatasetMetrics> = fits
        .iter()
        .filter(|f| f.failure.is_none())
        .map(|f| f.params[k].metrics.clone())
        .collect();
    if rows.is_empty() {
        return Ok(SummaryRow {
            label: label.to_string(),
            true_value,
            mean: f64::NAN,
            median: f64::NAN,
            bias: f64::NAN,
            rel_bias: f64::NAN,
            rmse: f64::NAN,
            coverage: f64::NAN,
            interval_length: f64::NAN,
        });
    }
    metrics::aggregate(label, true_value, &rows)
}

/// Runs the full study. Cells run in parallel; results are reduced in
/// (prior, dataset) order and do not depend on the schedule.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    config.validate()?;
    let truth = config.resolve_truth()?;
    let priors = config.priors();
    let datasets: Vec<SimulatedDataset<f64>> = (0..config.n_datasets)
        .map(|d| simulate_dataset(config, d))
        .collect::<Result<_>>()?;
    let cells: Vec<(usize, usize)> = (0..config.n_datasets)
        .flat_map(|d| priors.iter().map(move |&p| (d, p)))
        .collect();
    let fits: Vec<FitRecord> = cells
        .par_iter()
        .map(|&(d, p)| summarize_fit(&datasets[d], d, p, fit_cell(config, &datasets[d], d, p)))
        .collect();

    let true_values: Vec<f64> = datasets[0].truth.tau.clone();
    let mut diagnostic_rows = Vec::new();
    let mut estimate_rows = Vec::new();
    let mut tau_r_rows = Vec::new();
    for &p in &priors {
        let label = catalog_label(p).unwrap_or_default();
        let cell: Vec<&FitRecord> = fits.iter().filter(|f| f.prior == p).collect();
        diagnostic_rows.push(aggregate_diagnostics(label, true_values[0], &cell));
        estimate_rows.push(aggregate_estimates(label, true_values[0], &cell, 0)?);
        if true_values.len() > 1 {
            tau_r_rows.push(aggregate_estimates(label, true_values[1], &cell, 1)?);
        }
    }
    Ok(StudyResult {
        config: config.clone(),
        truth,
        diagnostic_rows,
        estimate_rows,
        tau_r_rows,
        fits,
        dataset_hashes: datasets.iter().map(|d| d.data.content_hash()).collect(),
    })
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Io(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

/// CSV text with `header` followed by `rows`.
pub fn to_csv<const N: usize>(header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.to_string()))
}

const FIGURE_HEADER: [&str; 9] = [
    "label", "param", "family", "nu", "s_regime", "true_value", "mean", "lower", "upper",
];

const FITS_HEADER: [&str; 15] = [
    "dataset", "prior", "label", "param", "true_value", "mean", "median", "q025", "q975",
    "ess", "rhat", "mcse", "n_divergent", "covered", "failure",
];

const FAILURES_HEADER: [&str; 4] = ["dataset", "prior", "label", "reason"];

#[derive(Debug, Serialize)]
struct Provenance<'a> {
    package: &'static str,
    version: &'static str,
    config: &'a StudyConfig,
    truth: &'a ResolvedTruth,
    files: &'a [String],
    n_fits: usize,
    n_failures: usize,
    dataset_hashes: Vec<String>,
}

/// Writes every study output into `dir` and returns the file names.
pub fn write_outputs(result: &StudyResult, dir: &Path) -> Result<Vec<String>> {
    fs::create_dir_all(dir)?;
    let tag = result.config.tag()?;
    let mut files: Vec<(String, Vec<u8>)> = Vec::new();

    files.push((
        format!("diagnostics_{tag}.csv"),
        to_csv(DIAGNOSTICS_HEADER, result.diagnostic_rows.iter().map(|r| r.record()))?,
    ));
    files.push((
        format!("estimates_{tag}.csv"),
        to_csv(metrics::SUMMARY_HEADER, result.estimate_rows.iter().map(|r| r.record()))?,
    ));
    if !result.tau_r_rows.is_empty() {
        files.push((
            format!("estimates_{tag}_tau_r.csv"),
            to_csv(metrics::SUMMARY_HEADER, result.tau_r_rows.iter().map(|r| r.record()))?,
        ));
    }

    let mut figure = Vec::new();
    for (k, rows) in [&result.estimate_rows, &result.tau_r_rows].into_iter().enumerate() {
        for (row, &p) in rows.iter().zip(&result.config.priors()) {
            let spec = catalog_entry(p, row.true_value, result.config.c)?;
            let fits: Vec<&ParamFit> = result
                .fits
                .iter()
                .filter(|f| f.prior == p && f.failure.is_none())
                .map(|f| &f.params[k])
                .collect();
            let n = fits.len().max(1) as f64;
            let name = fits.first().map(|f| f.name.clone()).unwrap_or_default();
            figure.push([
                row.label.clone(),
                name,
                match spec.family {
                    PriorFamily::IgOnVariance => "IG".to_string(),
                    PriorFamily::HtOnSd => "HT".to_string(),
                },
                spec.nu.to_string(),
                ScaleRegime::of_entry(p).as_str().to_string(),
                row.true_value.to_string(),
                row.mean.to_string(),
                (fits.iter().map(|f| f.metrics.q025).sum::<f64>() / n).to_string(),
                (fits.iter().map(|f| f.metrics.q975).sum::<f64>() / n).to_string(),
            ]);
        }
    }
    files.push(("figure_data.csv".into(), to_csv(FIGURE_HEADER, figure.into_iter())?));

    let mut fit_rows = Vec::new();
    for f in &result.fits {
        let fail = f.failure.clone().unwrap_or_default();
        if f.params.is_empty() {
            let mut row: [String; 15] = Default::default();
            row[0] = (f.dataset + 1).to_string();
            row[1] = f.prior.to_string();
            row[2] = f.label.clone();
            row[12] = f.n_divergent.to_string();
            row[14] = fail.clone();
            fit_rows.push(row);
        }
        for p in &f.params {
            fit_rows.push([
                (f.dataset + 1).to_string(),
                f.prior.to_string(),
                f.label.clone(),
                p.name.clone(),
                p.true_value.to_string(),
                p.metrics.post_mean.to_string(),
                p.metrics.post_median.to_string(),
                p.metrics.q025.to_string(),
                p.metrics.q975.to_string(),
                p.ess.to_string(),
                p.rhat.to_string(),
                p.mcse.to_string(),
                f.n_divergent.to_string(),
                u8::from(p.metrics.covered).to_string(),
                fail.clone(),
            ]);
        }
    }
    files.push((format!("fits_{tag}.csv"), to_csv(FITS_HEADER, fit_rows.into_iter())?));
    files.push((
        format!("failures_{tag}.csv"),
        to_csv(
            FAILURES_HEADER,
            result.failures().map(|f| {
                [
                    (f.dataset + 1).to_string(),
                    f.prior.to_string(),
                    f.label.clone(),
                    f.failure.clone().unwrap_or_default(),
                ]
            }),
        )?,
    ));

    let mut names: Vec<String> = files.iter().map(|(n, _)| n.clone()).collect();
    let provenance_name = format!("provenance_{tag}.json");
    names.push(provenance_name.clone());
    let provenance = Provenance {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        config: &result.config,
        truth: &result.truth,
        files: &names,
        n_fits: result.fits.len(),
        n_failures: result.failures().count(),
        dataset_hashes: result.dataset_hashes.iter().map(|h| format!("{h:016x}")).collect(),
    };
    let mut json = serde_json::to_vec_pretty(&provenance)?;
    json.push(b'\n');
    files.push((provenance_name, json));

    for (name, bytes) in &files {
        write_atomic(&dir.join(name), bytes)?;
    }
    Ok(names)
}

/// Output directory helper: `dir/name`.
pub fn output_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

/// Chain index reserved for the Gibbs reference stream of a cell.
pub const GIBBS_STREAM: u64 = 1 << 32;

/// NUTS against the conjugate Gibbs sampler on one Model 1 dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GibbsComparisonRow {
    pub dataset: usize,
    pub prior: usize,
    pub nuts_mean: f64,
    pub nuts_mcse: f64,
    pub gibbs_mean: f64,
    pub gibbs_mcse: f64,
    /// `|nuts_mean − gibbs_mean| / sqrt(nuts_mcse² + gibbs_mcse²)`.
    pub z: f64,
    pub n_divergent: usize,
}

impl GibbsComparisonRow {
    pub const HEADER: [&'static str; 8] = [
        "dataset", "prior", "nuts_mean", "nuts_mcse", "gibbs_mean", "gibbs_mcse", "z", "n_divergent",
    ];

    pub fn agrees(&self, k: f64) -> bool {
        self.z < k
    }

    pub fn record(&self) -> [String; 8] {
        [
            (self.dataset + 1).to_string(),
            self.prior.to_string(),
            self.nuts_mean.to_string(),
            self.nuts_mcse.to_string(),
            self.gibbs_mean.to_string(),
            self.gibbs_mcse.to_string(),
            self.z.to_string(),
            self.n_divergent.to_string(),
        ]
    }
}

/// Posterior mean of `τ` under NUTS and Gibbs for each dataset of a Model 1
/// study and the IG catalog entry `prior`.
pub fn gibbs_comparison(
    config: &StudyConfig,
    prior: usize,
    gibbs_iters: usize,
    gibbs_burnin: usize,
) -> Result<Vec<GibbsComparisonRow>> {
    config.validate()?;
    if config.model != ModelKind::M1 {
        return Err(Error::Config("the Gibbs comparison applies to model 1 only".into()));
    }
    let truth = config.resolve_truth()?;
    let spec = catalog_entry(prior, truth.tau, config.c)?;
    if !spec.is_ig() {
        return Err(Error::Config(format!(
            "prior {prior} is half-t; the Gibbs comparison needs an inverse-gamma entry"
        )));
    }
    (0..config.n_datasets)
        .into_par_iter()
        .map(|d| {
            let ds = simulate_dataset(config, d)?;
            let Dataset::M1(data) = &ds.data else {
                unreachable!("model 1 study")
            };
            let chains = fit_cell(config, &ds, d, prior)?;
            let cols: Vec<Vec<f64>> = chains.iter().map(|c| c.column(0)).collect();
            let pooled: Vec<f64> = cols.iter().flatten().copied().collect();
            let nuts_mean = pooled.iter().sum::<f64>() / pooled.len() as f64;
            let nuts_mcse = diagnostics::mcse_mean(&cols)?;

            let mut rng = SimRng::new(derive_seed(config.base_seed, d as u64, prior as u64, GIBBS_STREAM));
            let g = crate::oracle::gibbs_model1(data, spec.a(), spec.b(), gibbs_iters, gibbs_burnin, &mut rng)?;
            let tau = g.tau();
            let gibbs_mean = tau.iter().sum::<f64>() / tau.len() as f64;
            let gibbs_mcse = diagnostics::mcse_mean(&[tau])?;
            Ok(GibbsComparisonRow {
                dataset: d,
                prior,
                nuts_mean,
                nuts_mcse,
                gibbs_mean,
                gibbs_mcse,
                z: (nuts_mean - gibbs_mean).abs() / nuts_mcse.hypot(gibbs_mcse),
                n_divergent: chains.iter().map(|c| c.n_divergent()).sum(),
            })
        })
        .collect()
}

/// REML fit of one simulated Model 2 dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemlRow {
    pub dataset: usize,
    pub tau_hat: f64,
    pub sigma_hat: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemlSummary {
    pub n: usize,
    pub true_tau: f64,
    pub n_datasets: usize,
    pub mean_tau_hat: f64,
    /// Percent of datasets with `τ̂ = 0`.
    pub pct_zero: f64,
    pub n_unconverged: usize,
}

impl RemlSummary {
    pub const HEADER: [&'static str; 6] =
        ["n", "true_tau", "n_datasets", "mean_tau_hat", "pct_zero", "n_unconverged"];

    pub fn record(&self) -> [String; 6] {
        [
            self.n.to_string(),
            self.true_tau.to_string(),
            self.n_datasets.to_string(),
            self.mean_tau_hat.to_string(),
            self.pct_zero.to_string(),
            self.n_unconverged.to_string(),
        ]
    }
}

/// REML estimates over the datasets of a Model 2 study.
pub fn reml_study(config: &StudyConfig) -> Result<(RemlSummary, Vec<RemlRow>)> {
    config.validate()?;
    if config.model != ModelKind::M2 {
        return Err(Error::Config("the REML comparison applies to model 2 only".into()));
    }
    let truth = config.resolve_truth()?;
    let rows: Vec<RemlRow> = (0..config.n_datasets)
        .map(|d| {
            let ds = simulate_dataset(config, d)?;
            let Dataset::M2(data) = &ds.data else {
                unreachable!("model 2 study")
            };
            let fit = crate::oracle::reml_model2(data)?;
            Ok(RemlRow {
                dataset: d,
                tau_hat: fit.tau_hat,
                sigma_hat: fit.sigma_hat,
                converged: fit.converged,
            })
        })
        .collect::<Result<_>>()?;
    let k = rows.len() as f64;
    let summary = RemlSummary {
        n: truth.n.unwrap_or_default(),
        true_tau: truth.tau,
        n_datasets: rows.len(),
        mean_tau_hat: rows.iter().map(|r| r.tau_hat).sum::<f64>() / k,
        pct_zero: 100.0 * rows.iter().filter(|r| r.tau_hat == 0.0).count() as f64 / k,
        n_unconverged: rows.iter().filter(|r| !r.converged).count(),
    };
    Ok((summary, rows))
}

