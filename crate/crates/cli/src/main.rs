use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand};
use serde::Serialize;

use priorsens::harness::{
    bind_prior, gibbs_comparison, reml_study, run_study, simulate_dataset, to_csv, write_atomic,
    write_outputs, GibbsComparisonRow, RemlSummary, StudyConfig, TrueParamsConfig,
};
use priorsens::models::{LogDensity, ModelKind};
use priorsens::priors::{catalog_entry, CATALOG_LEN, DEFAULT_SCALE_FACTOR};
use priorsens::sampler::grad_check;
use priorsens::stats::SimRng;

const THREADS_ENV: &str = "PRIORSENS_THREADS";
const GRAD_TOL: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "priorsens", version, about = "Prior sensitivity simulation studies for hierarchical scale parameters")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate datasets, fit the prior catalog with NUTS and write summary tables.
    RunStudy(RunStudyArgs),
    /// Compare NUTS with the conjugate Gibbs sampler on Model 1.
    GibbsCheck(GibbsCheckArgs),
    /// REML estimates of the random-intercept SD for Model 2.
    RemlCheck(RemlCheckArgs),
    /// Analytic versus finite-difference gradients at random points.
    GradCheck(GradCheckArgs),
}

#[derive(Args, Serialize)]
struct SamplerFlags {
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    warmup: Option<usize>,
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    adapt_delta: Option<f64>,
    #[arg(long)]
    max_treedepth: Option<usize>,
}

impl SamplerFlags {
    fn apply(&self, cfg: &mut StudyConfig) {
        let s = &mut cfg.sampler;
        if let Some(v) = self.chains {
            s.chains = v;
        }
        if let Some(v) = self.warmup {
            s.warmup = v;
        }
        if let Some(v) = self.draws {
            s.draws = v;
        }
        if let Some(v) = self.adapt_delta {
            s.target_accept = v;
        }
        if let Some(v) = self.max_treedepth {
            s.max_treedepth = v;
        }
    }
}

#[derive(Args, Serialize)]
struct RunStudyArgs {
    /// JSON study config or a provenance file; flags given alongside override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    model: Option<u8>,
    /// True τ (τ_b for model 3).
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    tau_b: Option<f64>,
    #[arg(long)]
    tau_r: Option<f64>,
    /// Subjects per dataset (models 2 and 3).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_datasets: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    sampler: SamplerFlags,
    /// Scale inflation factor for catalog entries 11–14.
    #[arg(long)]
    c: Option<f64>,
    /// Comma-separated catalog indices, e.g. `7,8`.
    #[arg(long, value_delimiter = ',')]
    priors: Option<Vec<usize>>,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct GibbsCheckArgs {
    #[arg(long)]
    tau: f64,
    /// Inverse-gamma catalog index (1, 2, 5, 7, 9, 11 or 13).
    #[arg(long)]
    prior: usize,
    #[arg(long, default_value_t = 20)]
    n_datasets: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20_000)]
    gibbs_iters: usize,
    #[arg(long, default_value_t = 2_000)]
    gibbs_burnin: usize,
    #[command(flatten)]
    sampler: SamplerFlags,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct RemlCheckArgs {
    #[arg(long)]
    tau: f64,
    #[arg(long, default_value_t = 10)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    n_datasets: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    #[serde(skip)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct GradCheckArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    model: u8,
    #[arg(long)]
    prior: usize,
    #[arg(long, default_value_t = 20)]
    points: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// True scale used to simulate the data and scale the prior.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Serialize)]
struct Provenance<'a, A: Serialize> {
    package: &'static str,
    version: &'static str,
    command: &'static str,
    args: &'a A,
    config: &'a StudyConfig,
    files: Vec<String>,
}

fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::ValueValidation, msg).exit()
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .with_context(|| format!("{THREADS_ENV} must be a positive integer, got {raw:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("configuring the thread pool")?;
    Ok(())
}

fn model_kind(n: u8) -> ModelKind {
    ModelKind::from_number(n).expect("clap restricts the range")
}

fn study_config(args: &RunStudyArgs) -> Result<StudyConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let mut value: serde_json::Value = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            // a provenance file carries the config under "config"
            if value.get("package").is_some() {
                value = value["config"].take();
            }
            let mut cfg: StudyConfig = serde_json::from_value(value)
                .with_context(|| format!("parsing {}", path.display()))?;
            if args.model.is_some_and(|m| model_kind(m) != cfg.model) {
                // a different model invalidates model-specific fields
                cfg.true_params = TrueParamsConfig::default();
            }
            cfg
        }
        None => {
            if args.model.is_none() {
                bail!("either --config or --model is required");
            }
            StudyConfig::default()
        }
    };
    if let Some(m) = args.model {
        cfg.model = model_kind(m);
    }
    let t = &mut cfg.true_params;
    if let Some(v) = args.tau {
        if cfg.model == ModelKind::M3 {
            t.tau_b = Some(v);
            t.tau = None;
        } else {
            t.tau = Some(v);
        }
    }
    if let Some(v) = args.tau_b {
        t.tau_b = Some(v);
        t.tau = None;
    }
    if args.tau_r.is_some() {
        t.tau_r = args.tau_r;
    }
    if args.n.is_some() {
        t.n = args.n;
    }
    if let Some(v) = args.n_datasets {
        cfg.n_datasets = v;
    }
    if let Some(v) = args.seed {
        cfg.base_seed = v;
    }
    if let Some(v) = args.c {
        cfg.c = v;
    }
    if args.priors.is_some() {
        cfg.prior_subset = args.priors.clone();
    }
    args.sampler.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn write_provenance<A: Serialize>(
    dir: &Path,
    name: &str,
    command: &'static str,
    args: &A,
    config: &StudyConfig,
    files: Vec<String>,
) -> Result<()> {
    let p = Provenance {
        package: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        args,
        config,
        files,
    };
    let mut json = serde_json::to_vec_pretty(&p)?;
    json.push(b'\n');
    write_atomic(&dir.join(name), &json)?;
    Ok(())
}

fn run_study_cmd(args: &RunStudyArgs) -> Result<ExitCode> {
    let cfg = study_config(args)?;
    let result = run_study(&cfg)?;
    let files = write_outputs(&result, &args.out)
        .with_context(|| format!("writing outputs to {}", args.out.display()))?;
    let failures = result.failures().count();
    eprintln!(
        "{} fits, {} failed; wrote {} files to {}",
        result.fits.len(),
        failures,
        files.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn gibbs_check_cmd(args: &GibbsCheckArgs) -> Result<ExitCode> {
    if !(1..=CATALOG_LEN).contains(&args.prior) {
        usage_error(format!("--prior must lie in 1..={CATALOG_LEN}"));
    }
    if !(args.tau > 0.0 && args.tau.is_finite()) {
        usage_error("--tau must be positive");
    }
    if !catalog_entry(args.prior, args.tau, DEFAULT_SCALE_FACTOR)?.is_ig() {
        usage_error(format!(
            "gibbs-check requires an inverse-gamma catalog entry (1, 2, 5, 7, 9, 11 or 13); prior {} is half-t",
            args.prior
        ));
    }
    let mut cfg = StudyConfig {
        model: ModelKind::M1,
        true_params: TrueParamsConfig {
            tau: Some(args.tau),
            ..Default::default()
        },
        n_datasets: args.n_datasets,
        base_seed: args.seed,
        prior_subset: Some(vec![args.prior]),
        ..Default::default()
    };
    args.sampler.apply(&mut cfg);
    cfg.validate()?;
    let rows = gibbs_comparison(&cfg, args.prior, args.gibbs_iters, args.gibbs_burnin)?;

    fs::create_dir_all(&args.out)?;
    let stem = format!("gibbs_check_model1_{}_p{}", args.tau, args.prior);
    let csv_name = format!("{stem}.csv");
    let bytes = to_csv(GibbsComparisonRow::HEADER, rows.iter().map(|r| r.record()))?;
    write_atomic(&args.out.join(&csv_name), &bytes)?;
    write_provenance(
        &args.out,
        &format!("provenance_{stem}.json"),
        "gibbs-check",
        args,
        &cfg,
        vec![csv_name],
    )?;
    let agree = rows.iter().filter(|r| r.agrees(3.0)).count();
    println!("{agree}/{} datasets agree within 3 combined MCSE", rows.len());
    Ok(ExitCode::SUCCESS)
}

fn reml_check_cmd(args: &RemlCheckArgs) -> Result<ExitCode> {
    let cfg = StudyConfig {
        model: ModelKind::M2,
        true_params: TrueParamsConfig {
            tau: Some(args.tau),
            n: Some(args.n),
            ..Default::default()
        },
        n_datasets: args.n_datasets,
        base_seed: args.seed,
        ..Default::default()
    };
    cfg.validate()?;
    let (summary, rows) = reml_study(&cfg)?;

    fs::create_dir_all(&args.out)?;
    let stem = format!("reml_check_{}_n{}", args.tau, args.n);
    let summary_name = format!("{stem}.csv");
    let fits_name = format!("{stem}_fits.csv");
    write_atomic(
        &args.out.join(&summary_name),
        &to_csv(RemlSummary::HEADER, std::iter::once(summary.record()))?,
    )?;
    write_atomic(
        &args.out.join(&fits_name),
        &to_csv(
            ["dataset", "tau_hat", "sigma_hat", "converged"],
            rows.iter().map(|r| {
                [
                    (r.dataset + 1).to_string(),
                    r.tau_hat.to_string(),
                    r.sigma_hat.to_string(),
                    u8::from(r.converged).to_string(),
                ]
            }),
        )?,
    )?;
    write_provenance(
        &args.out,
        &format!("provenance_{stem}.json"),
        "reml-check",
        args,
        &cfg,
        vec![summary_name, fits_name],
    )?;
    println!(
        "mean tau_hat {:.4}, {:.1}% at zero",
        summary.mean_tau_hat, summary.pct_zero
    );
    Ok(ExitCode::SUCCESS)
}

fn grad_check_cmd(args: &GradCheckArgs) -> Result<ExitCode> {
    if !(1..=CATALOG_LEN).contains(&args.prior) {
        usage_error(format!("--prior must lie in 1..={CATALOG_LEN}"));
    }
    let model = model_kind(args.model);
    let tau = args.tau.unwrap_or(match model {
        ModelKind::M1 => 2.0,
        ModelKind::M2 => 1.0,
        ModelKind::M3 => 0.16,
    });
    let cfg = StudyConfig {
        model,
        true_params: TrueParamsConfig {
            tau: Some(tau),
            ..Default::default()
        },
        n_datasets: 1,
        base_seed: args.seed,
        ..Default::default()
    };
    cfg.validate()?;
    let ds = simulate_dataset(&cfg, 0)?;
    let target = bind_prior(&ds, args.prior, cfg.c)?;
    let mut rng = SimRng::new(args.seed);
    let mut worst = 0.0f64;
    for _ in 0..args.points {
        let q: Vec<f64> = (0..target.dim()).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
        worst = worst.max(grad_check(&target, &q, 1e-5)?);
    }
    println!("max_rel_error {worst:e}");
    if worst > GRAD_TOL || worst.is_nan() {
        eprintln!("gradient error exceeds {GRAD_TOL:e}");
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = configure_threads().and_then(|()| match &cli.command {
        Command::RunStudy(a) => run_study_cmd(a),
        Command::GibbsCheck(a) => gibbs_check_cmd(a),
        Command::RemlCheck(a) => reml_check_cmd(a),
        Command::GradCheck(a) => grad_check_cmd(a),
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
