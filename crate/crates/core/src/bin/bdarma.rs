//! `bdarma`: simulate, fit, forecast and evaluate Dirichlet ARMA models.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 convergence
//! check failed, 4 I/O error, 5 initialization or sampling failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use bdarma_core::covariates::CovariateDesign;
use bdarma_core::forecast::{forecast, rolling_evaluate, ForecastConfig, RollingOptions, RollingPlan};
use bdarma_core::io::{
    read_draws, write_draws, write_json, write_table, RollingSection, RunConfig, SeriesFile, TimeLabel, TimeRef,
    TruthFile,
};
use bdarma_core::model::{Dataset, Variant};
use bdarma_core::rng::derive_seed;
use bdarma_core::sampler::run_chains;
use bdarma_core::simulation::{covid_like, run_study, simulate_dgp, ScenarioSpec, PRESET_BREAK, PRESET_LEN};
use bdarma_core::Error;

const RHAT_LIMIT: f64 = 1.01;

#[derive(Parser)]
#[command(name = "bdarma", version, about = "Bayesian Dirichlet ARMA models with directional-shift interventions")]
struct Cli {
    /// Base seed for every random stream (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory (overrides the config file).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Do not fail when R-hat reaches the convergence limit.
    #[arg(long, global = true)]
    no_strict: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset with its true parameters.
    Simulate(SimulateArgs),
    /// Sample the posterior of a model.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
    /// Posterior-predictive forecasts from saved draws.
    Forecast {
        #[arg(long)]
        draws: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Forecast horizon (overrides the config file).
        #[arg(long)]
        horizon: Option<usize>,
        /// Also write every simulated path.
        #[arg(long)]
        raw: bool,
    },
    /// Parameter-recovery study over synthetic break scenarios.
    Study {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rolling-origin comparison of model variants.
    Compare {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
#[group(required = true, multiple = false)]
struct SimulateArgs {
    /// Scenario name such as `k0.5_dneg_p0`.
    #[arg(long)]
    scenario: Option<String>,
    /// Named preset; `covid-like` is the only one.
    #[arg(long)]
    preset: Option<String>,
}

enum Failure {
    Lib(Error),
    Convergence(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .filter_level(log::LevelFilter::Info)
        .format_timestamp(None)
        .init();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Lib(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(Failure::Convergence(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn run(cli: &Cli) -> CliResult {
    match &cli.command {
        Command::Simulate(args) => simulate(cli, args),
        Command::Fit { data, config } => fit(cli, data, config),
        Command::Forecast {
            draws,
            data,
            config,
            horizon,
            raw,
        } => forecast_cmd(cli, draws, data, config, *horizon, *raw),
        Command::Study { config } => study(cli, config),
        Command::Compare { data, config } => compare(cli, data, config),
    }
}

fn out_dir(cli: &Cli, config: Option<&RunConfig>) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| config.and_then(|c| c.out.clone()))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn seed_of(cli: &Cli, config: &RunConfig) -> u64 {
    cli.seed.or(config.seed).unwrap_or(config.sampler.seed)
}

fn simulate(cli: &Cli, args: &SimulateArgs) -> CliResult {
    let seed = cli.seed.unwrap_or(0);
    let out = out_dir(cli, None);
    let (series, truth, config) = if let Some(name) = &args.scenario {
        let scenario = ScenarioSpec::from_name(name)?;
        let sim = simulate_dgp(&scenario, seed)?;
        let series = SeriesFile::indexed(sim.y.clone())?;
        let mut config = RunConfig::new(Variant::Intervention);
        config.break_at = Some(TimeRef::Position(scenario.break_index));
        let truth = TruthFile {
            description: format!("synthetic scenario {name}, seed {seed}"),
            variant: sim.spec.variant,
            parts: sim.spec.parts,
            break_index: sim.spec.break_index,
            covariates: CovariateDesign::default(),
            scenario: Some(scenario),
            params: sim.truth,
            mu: sim.mu.into_iter().map(|m| m.into_vec()).collect(),
        };
        (series, truth, config)
    } else {
        let name = args.preset.as_deref().unwrap_or_default();
        if name != "covid-like" {
            return Err(Error::Config(format!("unknown preset `{name}`; available: covid-like")).into());
        }
        let p = covid_like(seed)?;
        let labels = p.labels.iter().map(|l| l.parse()).collect::<Result<Vec<TimeLabel>, _>>()?;
        let mut series = SeriesFile::new(labels, p.part_names.clone(), p.data.y.clone())?;
        series.time_header = "month".into();
        let mut config = RunConfig::new(Variant::Intervention);
        config.break_at = Some(TimeRef::Label(p.labels[PRESET_BREAK - 1].clone()));
        config.covariates = p.design.clone();
        config.rolling = Some(RollingSection {
            origins: p.labels[PRESET_LEN - 7..].iter().map(|l| TimeRef::Label(l.clone())).collect(),
            horizons: vec![1],
            variants: vec![Variant::Baseline, Variant::FixedEffect, Variant::Intervention],
        });
        let truth = TruthFile {
            description: format!("synthetic covid-like preset, seed {seed}; not real data"),
            variant: p.data.spec.variant,
            parts: p.data.spec.parts,
            break_index: p.data.spec.break_index,
            covariates: p.design,
            scenario: None,
            params: p.data.truth,
            mu: p.data.mu.into_iter().map(|m| m.into_vec()).collect(),
        };
        (series, truth, config)
    };
    let mut config = config;
    config.seed = Some(seed);
    series.write(&out.join("series.csv"))?;
    write_json(&out.join("truth.json"), &truth)?;
    config.write(&out.join("config.toml"))?;
    write_covariates(&out.join("covariates.csv"), &series, &truth.covariates)?;
    log::info!("wrote {} rows x {} parts to {}", series.len(), series.parts.len(), out.display());
    Ok(())
}

fn write_covariates(path: &Path, series: &SeriesFile, design: &CovariateDesign) -> CliResult {
    let cov = design.build(series.len())?;
    let (mean_names, prec_names) = design.names();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec![series.time_header.clone()];
    header.extend(mean_names);
    header.extend(prec_names);
    w.write_record(&header).map_err(Error::from)?;
    for (t, label) in series.labels.iter().enumerate() {
        let mut rec = vec![label.to_string()];
        rec.extend(cov.mean.row(t).iter().chain(cov.prec.row(t)).map(|v| v.to_string()));
        w.write_record(&rec).map_err(Error::from)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::from(csv::Error::from(e.into_error())))?;
    Ok(bdarma_core::io::write_atomic(path, &bytes)?)
}

#[derive(Serialize)]
struct RhatRow<'a> {
    name: &'a str,
    rhat: f64,
}

#[derive(Serialize)]
struct FitReport<'a> {
    variant: Variant,
    chains: usize,
    draws: usize,
    seed: u64,
    divergences: usize,
    max_rhat: f64,
    converged: bool,
    step_size: &'a [f64],
    mean_accept: &'a [f64],
    rhat: Vec<RhatRow<'a>>,
}

fn fit(cli: &Cli, data_path: &Path, config_path: &Path) -> CliResult {
    let config = RunConfig::read(config_path)?;
    let series = SeriesFile::read(data_path)?;
    let spec = config.model(&series)?;
    let covariates = config.covariates.build(series.len())?;
    let data = Dataset::with_helmert(series.y.clone(), spec.parts)?;
    let seed = seed_of(cli, &config);
    let sampler = bdarma_core::sampler::SamplerConfig {
        seed,
        ..config.sampler.clone()
    };
    let draws = run_chains(&spec, &covariates, &data, &sampler)?;
    let diag = draws.diagnostics();
    let max_rhat = diag.max_rhat();
    let converged = diag.converged(RHAT_LIMIT);
    let out = out_dir(cli, Some(&config));
    write_draws(&out.join("draws.csv"), &draws)?;
    let report = FitReport {
        variant: spec.variant,
        chains: draws.chains,
        draws: draws.draws,
        seed,
        divergences: diag.divergences,
        max_rhat,
        converged,
        step_size: &diag.step_size,
        mean_accept: &diag.mean_accept,
        rhat: diag
            .names
            .iter()
            .zip(&diag.rhat)
            .map(|(name, rhat)| RhatRow { name, rhat: *rhat })
            .collect(),
    };
    write_json(&out.join("diagnostics.json"), &report)?;
    log::info!(
        "{} draws, max R-hat {max_rhat:.4}, {} divergent transitions",
        draws.len(),
        diag.divergences
    );
    if !converged && !cli.no_strict {
        return Err(Failure::Convergence(format!(
            "max R-hat {max_rhat:.4} is not below {RHAT_LIMIT}; rerun with more iterations or pass --no-strict"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    h: usize,
    time: String,
    part: &'a str,
    mean: f64,
    median: f64,
    q10: f64,
    q90: f64,
}

fn forecast_cmd(
    cli: &Cli,
    draws_path: &Path,
    data_path: &Path,
    config_path: &Path,
    horizon: Option<usize>,
    raw: bool,
) -> CliResult {
    let config = RunConfig::read(config_path)?;
    let series = SeriesFile::read(data_path)?;
    let spec = config.model(&series)?;
    let draws = read_draws(draws_path, &spec)?;
    let n = series.len();
    let horizon = horizon.unwrap_or(config.forecast.horizon);
    let covariates = config.covariates.build(n)?;
    let future = config.covariates.build_range(n + 1, n + horizon, n)?;
    let data = Dataset::with_helmert(series.y.clone(), spec.parts)?;
    let fc_config = ForecastConfig {
        horizon,
        paths_per_draw: config.forecast.paths_per_draw,
        future,
        seed: derive_seed(seed_of(cli, &config), &[2]),
    };
    let fc = forecast(&draws, &data, &covariates, &fc_config)?;
    let last = *series.labels.last().expect("nonempty series");
    let mut rows = Vec::new();
    for s in fc.summary()? {
        let time = last.advance(s.h).to_string();
        for (c, part) in series.parts.iter().enumerate() {
            rows.push(SummaryRow {
                h: s.h,
                time: time.clone(),
                part,
                mean: s.mean[c],
                median: s.median[c],
                q10: s.q10[c],
                q90: s.q90[c],
            });
        }
    }
    let out = out_dir(cli, Some(&config));
    write_table(&out.join("forecast_summary.csv"), &rows)?;
    if raw || config.forecast.raw {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["path".to_string(), "h".into(), "time".into()];
        header.extend(series.parts.iter().cloned());
        header.push("lambda".into());
        header.push("gate".into());
        w.write_record(&header).map_err(Error::from)?;
        for m in 0..fc.paths {
            for h in 0..horizon {
                let i = m * horizon + h;
                let mut rec = vec![(m + 1).to_string(), (h + 1).to_string(), last.advance(h + 1).to_string()];
                rec.extend(fc.y[i].as_slice().iter().map(|v| v.to_string()));
                rec.push(fc.lambda[i].to_string());
                rec.push(fc.gate[i].to_string());
                w.write_record(&rec).map_err(Error::from)?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::from(csv::Error::from(e.into_error())))?;
        bdarma_core::io::write_atomic(&out.join("forecast_draws.csv"), &bytes)?;
    }
    log::info!("{horizon}-step forecast from {} paths written to {}", fc.paths, out.display());
    Ok(())
}

fn study(cli: &Cli, config_path: &Path) -> CliResult {
    let config = RunConfig::read(config_path)?;
    let section = config.study.clone().unwrap_or_default();
    let scenarios = section.scenarios()?;
    let study_config = section.config(&config.sampler, seed_of(cli, &config));
    let report = run_study(&scenarios, &study_config)?;
    let out = out_dir(cli, Some(&config));
    write_table(&out.join("study_summary.csv"), &report.summary)?;
    write_json(&out.join("study.json"), &report)?;
    for r in report.replications.iter().filter(|r| r.error.is_some()) {
        log::warn!("{} replication {} failed: {}", r.scenario, r.replication, r.error.as_deref().unwrap_or(""));
    }
    log::info!("{} fits across {} scenarios", report.replications.len(), scenarios.len());
    Ok(())
}

#[derive(Serialize)]
struct CompareRow<'a> {
    model: &'a str,
    horizon: usize,
    n: usize,
    aitchison: f64,
    energy: f64,
    plugin_log_score: f64,
    coverage: f64,
    mae: f64,
}

#[derive(Serialize)]
struct DetailRow<'a> {
    model: &'a str,
    origin: String,
    horizon: usize,
    target: String,
    aitchison: f64,
    energy: f64,
    plugin_log_score: f64,
    coverage: f64,
    mae: f64,
}

fn compare(cli: &Cli, data_path: &Path, config_path: &Path) -> CliResult {
    let config = RunConfig::read(config_path)?;
    let rolling = config
        .rolling
        .as_ref()
        .ok_or_else(|| Error::Config("compare needs a [rolling] section".into()))?;
    if rolling.variants.is_empty() {
        return Err(Error::Config("compare needs at least one variant".into()).into());
    }
    let series = SeriesFile::read(data_path)?;
    let specs = rolling
        .variants
        .iter()
        .map(|v| config.model_for(*v, &series))
        .collect::<Result<Vec<_>, _>>()?;
    let plan = RollingPlan {
        origins: rolling.origins.iter().map(|o| series.resolve(o)).collect::<Result<_, _>>()?,
        horizons: rolling.horizons.clone(),
    };
    let covariates = config.covariates.build(series.len())?;
    let data = Dataset::with_helmert(series.y.clone(), series.parts.len())?;
    let options = RollingOptions {
        sampler: bdarma_core::sampler::SamplerConfig {
            seed: seed_of(cli, &config),
            ..config.sampler.clone()
        },
        paths_per_draw: config.forecast.paths_per_draw,
        energy: config.energy,
    };
    let report = rolling_evaluate(&data, &covariates, &specs, &plan, &options)?;
    let label = |t: usize| series.labels[t - 1].to_string();
    let summary: Vec<CompareRow> = report
        .summary
        .iter()
        .map(|s| CompareRow {
            model: &s.model,
            horizon: s.horizon,
            n: s.n,
            aitchison: s.metrics.aitchison,
            energy: s.metrics.energy,
            plugin_log_score: s.metrics.plugin_log_score,
            coverage: s.metrics.coverage,
            mae: s.metrics.mae,
        })
        .collect();
    let detail: Vec<DetailRow> = report
        .records
        .iter()
        .map(|r| DetailRow {
            model: &r.model,
            origin: label(r.origin),
            horizon: r.horizon,
            target: label(r.target),
            aitchison: r.metrics.aitchison,
            energy: r.metrics.energy,
            plugin_log_score: r.metrics.plugin_log_score,
            coverage: r.metrics.coverage,
            mae: r.metrics.mae,
        })
        .collect();
    let out = out_dir(cli, Some(&config));
    write_table(&out.join("compare_summary.csv"), &summary)?;
    write_table(&out.join("compare_detail.csv"), &detail)?;
    write_json(&out.join("compare.json"), &report)?;
    for s in &report.skipped {
        log::warn!("{} origin {}: {}", s.model, label(s.origin), s.reason);
    }
    Ok(())
}
