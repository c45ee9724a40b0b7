//! Synthetic break scenarios, forward simulation and parameter recovery.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariates::CovariateDesign;
use crate::error::{Error, Result};
use crate::model::{
    build_state, sample_dirichlet, CovariateSet, Dataset, DriftEval, Intervention, ModelSpec, ParamSet,
    Variant, ARMA_BOUND,
};
use crate::rng::{derive_seed, stream};
use crate::sampler::{run_chains, PosteriorDraws, SamplerConfig};
use crate::simplex::{self, Composition, ContrastMatrix};
use crate::stats::quantile_sorted;

/// One cell of the recovery design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub name: String,
    pub kappa: f64,
    pub delta: f64,
    pub delta_phi: f64,
    pub parts: usize,
    pub len: usize,
    pub break_index: usize,
    pub tau: f64,
    /// Intercept of `log lambda`.
    pub log_lambda: f64,
}

impl ScenarioSpec {
    pub fn new(kappa: f64, delta: f64, delta_phi: f64) -> Self {
        let sign = if delta < 0.0 { "dneg" } else { "dpos" };
        ScenarioSpec {
            name: format!("k{kappa:.1}_{sign}_p{delta_phi}"),
            kappa,
            delta,
            delta_phi,
            parts: 5,
            len: 120,
            break_index: 60,
            tau: 62.0,
            log_lambda: 100f64.ln(),
        }
    }

    /// The eight combinations of `kappa`, sign of `Delta` and `delta_phi`.
    pub fn grid() -> Vec<ScenarioSpec> {
        let mut out = Vec::with_capacity(8);
        for kappa in [0.5, 1.0] {
            for delta in [-0.6, 0.6] {
                for delta_phi in [0.0, 0.3] {
                    out.push(ScenarioSpec::new(kappa, delta, delta_phi));
                }
            }
        }
        out
    }

    /// Parses names such as `k0.5_dneg_p0` or `k1.0_dpos_p0.3`.
    pub fn from_name(name: &str) -> Result<Self> {
        let bad = || Error::Config(format!("unknown scenario `{name}`; expected e.g. k0.5_dneg_p0"));
        let parts: Vec<&str> = name.split('_').collect();
        let [k, d, p] = parts.as_slice() else {
            return Err(bad());
        };
        let kappa: f64 = k.strip_prefix('k').and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        let delta = match d.strip_prefix('d').ok_or_else(bad)? {
            "neg" => -0.6,
            "pos" => 0.6,
            v => v.parse().map_err(|_| bad())?,
        };
        let delta_phi: f64 = p.strip_prefix('p').and_then(|v| v.parse().ok()).ok_or_else(bad)?;
        if !(kappa > 0.0) {
            return Err(bad());
        }
        let mut s = ScenarioSpec::new(kappa, delta, delta_phi);
        s.name = name.to_string();
        Ok(s)
    }

    /// The model fitted to this scenario's data.
    pub fn model(&self) -> Result<ModelSpec> {
        ModelSpec::new(Variant::Intervention, self.parts, 1, 1, Some(self.break_index))
    }

    pub fn validate(&self) -> Result<()> {
        if self.break_index == 0 || self.break_index >= self.len {
            return Err(Error::Config(format!("break index {} outside 1..{}", self.break_index, self.len)));
        }
        if !(self.kappa > 0.0) || ![self.delta, self.delta_phi, self.tau, self.log_lambda].iter().all(|v| v.is_finite()) {
            return Err(Error::Config(format!("scenario `{}` has invalid values", self.name)));
        }
        self.model().map(|_| ())
    }
}

/// A simulated dataset with the parameters and means that produced it.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub spec: ModelSpec,
    pub y: Vec<Composition>,
    pub covariates: CovariateSet,
    pub truth: ParamSet,
    /// One-step-ahead means `mu_t` along the realized path.
    pub mu: Vec<Composition>,
}

impl SimulatedData {
    pub fn dataset(&self) -> Result<Dataset> {
        Dataset::with_helmert(self.y.clone(), self.spec.parts)
    }
}

/// Normalized linear trend `t / len` as the single mean covariate, and an
/// intercept for the precision.
pub fn trend_covariates(len: usize) -> CovariateSet {
    CovariateDesign::default().build(len).expect("valid design")
}

/// Runs the recursion forward for `len` steps, sampling each observation.
/// Returns the compositions and their conditional means.
pub fn simulate_series<R: Rng + ?Sized>(
    spec: &ModelSpec,
    params: &ParamSet,
    covariates: &CovariateSet,
    len: usize,
    rng: &mut R,
) -> Result<(Vec<Composition>, Vec<Composition>)> {
    params.validate(spec)?;
    covariates.check(spec, len)?;
    let basis = ContrastMatrix::helmert(spec.parts)?;
    let dim = spec.dim();
    let drift_eval = DriftEval::new(spec, params);
    let mut drift_prev = vec![0.0; dim];
    let mut drift = vec![0.0; dim];
    let mut z_prev = vec![0.0; dim];
    let mut e_prev = vec![0.0; dim];
    let mut eta = vec![0.0; dim];
    let mut mu = vec![0.0; spec.parts];
    let mut alpha = vec![0.0; spec.parts];
    let mut z = vec![0.0; dim];
    let (mut ys, mut mus) = (Vec::with_capacity(len), Vec::with_capacity(len));
    for t in 0..len {
        let (_, log_lambda) = drift_eval.eval((t + 1) as f64, covariates.mean.row(t), covariates.prec.row(t), &mut drift);
        for d in 0..dim {
            eta[d] = drift[d];
            if t > 0 {
                eta[d] += params.ar[d] * (z_prev[d] - drift_prev[d]) + params.ma[d] * e_prev[d];
            }
        }
        simplex::ilr_inv_into(&eta, &basis, &mut mu);
        let lambda = log_lambda.exp();
        for (a, m) in alpha.iter_mut().zip(&mu) {
            *a = lambda * m;
        }
        let y = sample_dirichlet(&alpha, rng)?;
        simplex::ilr_into(y.as_slice(), &basis, &mut z);
        for d in 0..dim {
            e_prev[d] = z[d] - eta[d];
        }
        z_prev.copy_from_slice(&z);
        drift_prev.copy_from_slice(&drift);
        ys.push(y);
        mus.push(Composition::new(mu.clone())?);
    }
    Ok((ys, mus))
}

fn truncated_normal(rng: &mut ChaCha8Rng, sd: f64) -> f64 {
    let n = Normal::new(0.0, sd).expect("positive sd");
    loop {
        let x: f64 = n.sample(rng);
        if x.abs() < ARMA_BOUND {
            return x;
        }
    }
}

/// Uniform unit vector with a nonnegative first coordinate.
pub fn hemisphere_direction<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            if v[0] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Draws true parameters for `scenario` and simulates one dataset.
pub fn simulate_dgp(scenario: &ScenarioSpec, seed: u64) -> Result<SimulatedData> {
    scenario.validate()?;
    let spec = scenario.model()?;
    let dim = spec.dim();
    let mut rng = stream(seed, &[]);
    let b_dist = Normal::new(0.0, 0.5).expect("sd");
    let coef_dist = Normal::new(0.0, 0.3).expect("sd");
    let b = (0..dim).map(|_| b_dist.sample(&mut rng)).collect();
    let coef = (0..dim).map(|_| coef_dist.sample(&mut rng)).collect();
    let ar = (0..dim).map(|_| truncated_normal(&mut rng, 0.25)).collect();
    let ma = (0..dim).map(|_| truncated_normal(&mut rng, 0.20)).collect();
    let v = hemisphere_direction(dim, &mut rng);
    let truth = ParamSet {
        b,
        coef,
        ar,
        ma,
        gamma: vec![scenario.log_lambda],
        intervention: Some(Intervention {
            delta: scenario.delta,
            tau: scenario.tau,
            kappa: scenario.kappa,
            v_raw: v,
            delta_phi: scenario.delta_phi,
        }),
        beta_covid: None,
    };
    let covariates = trend_covariates(scenario.len);
    let (y, mu) = simulate_series(&spec, &truth, &covariates, scenario.len, &mut rng)?;
    Ok(SimulatedData {
        spec,
        y,
        covariates,
        truth,
        mu,
    })
}

/// Last pre-break index of the covid-like preset (February 2020).
pub const PRESET_BREAK: usize = 74;
/// Length of the covid-like preset (January 2014 to January 2021).
pub const PRESET_LEN: usize = 85;

const PRESET_BEFORE: [f64; 10] = [0.04, 0.06, 0.08, 0.10, 0.11, 0.12, 0.12, 0.12, 0.11, 0.14];
const PRESET_AFTER: [f64; 10] = [0.25, 0.18, 0.14, 0.11, 0.09, 0.07, 0.05, 0.04, 0.03, 0.04];

/// Synthetic monthly series shaped like a booking lead-time distribution
/// that shifts toward short lead times after a break.
#[derive(Debug, Clone)]
pub struct Preset {
    pub data: SimulatedData,
    pub design: CovariateDesign,
    /// `YYYY-MM` labels.
    pub labels: Vec<String>,
    pub part_names: Vec<String>,
}

/// The covid-like preset: ten parts, 85 months, a gradual shift starting
/// after February 2020 and a drop in precision. Seasonal and trend
/// coefficients are drawn from `seed`; the break is fixed.
pub fn covid_like(seed: u64) -> Result<Preset> {
    let design = CovariateDesign {
        trend: true,
        harmonics: vec![12.0, 6.0],
        precision_trend: false,
        precision_harmonics: Vec::new(),
    };
    let spec = ModelSpec::new(
        Variant::Intervention,
        10,
        design.k_mean(),
        design.k_prec(),
        Some(PRESET_BREAK),
    )?;
    let basis = ContrastMatrix::helmert(10)?;
    let before = simplex::ilr(&Composition::from_positive(&PRESET_BEFORE)?, &basis)?.into_vec();
    let after = simplex::ilr(&Composition::from_positive(&PRESET_AFTER)?, &basis)?.into_vec();
    let shift: Vec<f64> = after.iter().zip(&before).map(|(a, b)| a - b).collect();
    let norm = shift.iter().map(|x| x * x).sum::<f64>().sqrt();
    let dim = spec.dim();
    let mut rng = stream(seed, &[]);
    let trend = Normal::new(0.0, 0.15).expect("sd");
    let season = Normal::new(0.0, 0.05).expect("sd");
    let mut coef = Vec::with_capacity(dim * design.k_mean());
    for _ in 0..dim {
        coef.push(trend.sample(&mut rng));
        for _ in 1..design.k_mean() {
            coef.push(season.sample(&mut rng));
        }
    }
    let truth = ParamSet {
        b: before,
        coef,
        ar: (0..dim).map(|_| truncated_normal(&mut rng, 0.15)).collect(),
        ma: (0..dim).map(|_| truncated_normal(&mut rng, 0.1)).collect(),
        gamma: vec![5.5],
        intervention: Some(Intervention {
            delta: 1.75,
            tau: PRESET_BREAK as f64 + 3.0,
            kappa: 0.5,
            v_raw: shift.iter().map(|x| x / norm).collect(),
            delta_phi: -0.3,
        }),
        beta_covid: None,
    };
    let covariates = design.build(PRESET_LEN)?;
    let (y, mu) = simulate_series(&spec, &truth, &covariates, PRESET_LEN, &mut rng)?;
    let labels = (0..PRESET_LEN).map(|i| format!("{}-{:02}", 2014 + i / 12, i % 12 + 1)).collect();
    let mut part_names: Vec<String> = (0..9).map(|m| format!("m{m}")).collect();
    part_names.push("m9plus".into());
    Ok(Preset {
        data: SimulatedData {
            spec,
            y,
            covariates,
            truth,
            mu,
        },
        design,
        labels,
        part_names,
    })
}

/// Recovery summary of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryRecord {
    pub cosine: f64,
    pub delta_hat: f64,
    pub delta_bias: f64,
    pub tau_hat: f64,
    pub tau_bias: f64,
    /// Fraction of `(t, part)` cells whose true mean lies in the central
    /// 80% posterior interval.
    pub coverage: f64,
    pub max_rhat: f64,
    pub divergences: usize,
    pub converged: bool,
}

/// Compares a fit with the truth that generated its data.
pub fn recovery_metrics(
    truth: &ParamSet,
    true_mu: &[Composition],
    draws: &PosteriorDraws,
    covariates: &CovariateSet,
    data: &Dataset,
) -> Result<RecoveryRecord> {
    if draws.is_empty() {
        return Err(Error::InsufficientData("no posterior draws".into()));
    }
    let iv = truth
        .intervention
        .as_ref()
        .ok_or_else(|| Error::Spec("recovery needs an intervention truth".into()))?;
    Error::check_dim(data.len(), true_mu.len())?;
    let (v_true, delta_true) = iv.canonical();
    let dim = v_true.len();
    let n = draws.len() as f64;
    let mut v_mean = vec![0.0; dim];
    let (mut delta_hat, mut tau_hat) = (0.0, 0.0);
    let parts = draws.spec.parts;
    let mut cells: Vec<Vec<f64>> = vec![Vec::with_capacity(draws.len()); data.len() * parts];
    for k in 0..draws.len() {
        let p = draws.params(k);
        let div = p.intervention.as_ref().expect("intervention draws");
        let (v, delta) = div.canonical();
        v_mean.iter_mut().zip(&v).for_each(|(m, x)| *m += x / n);
        delta_hat += delta / n;
        tau_hat += div.tau / n;
        let state = build_state(&draws.spec, &p, covariates, &data.z, &data.basis)?;
        for (t, mu) in state.mu.iter().enumerate() {
            for (c, m) in mu.as_slice().iter().enumerate() {
                cells[t * parts + c].push(*m);
            }
        }
    }
    let norm = v_mean.iter().map(|x| x * x).sum::<f64>().sqrt();
    let cosine = if norm > 0.0 {
        v_mean.iter().zip(&v_true).map(|(a, b)| a * b).sum::<f64>() / norm
    } else {
        0.0
    };
    let mut covered = 0usize;
    for (i, cell) in cells.iter_mut().enumerate() {
        cell.sort_by(f64::total_cmp);
        let truth = true_mu[i / parts].as_slice()[i % parts];
        if quantile_sorted(cell, 0.1) <= truth && truth <= quantile_sorted(cell, 0.9) {
            covered += 1;
        }
    }
    let diag = draws.diagnostics();
    Ok(RecoveryRecord {
        cosine: cosine.clamp(-1.0, 1.0),
        delta_hat,
        delta_bias: delta_hat - delta_true,
        tau_hat,
        tau_bias: tau_hat - iv.tau,
        coverage: covered as f64 / cells.len() as f64,
        max_rhat: diag.max_rhat(),
        divergences: diag.divergences,
        converged: diag.converged(1.01),
    })
}

/// Options of a recovery study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub replications: usize,
    pub seed: u64,
    /// Cosine above which the direction counts as recovered.
    pub threshold: f64,
    /// Stricter threshold reported alongside.
    pub strict_threshold: f64,
    pub sampler: SamplerConfig,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            replications: 10,
            seed: 0,
            threshold: 0.5,
            strict_threshold: 0.9,
            sampler: SamplerConfig::default(),
        }
    }
}

/// Result of one replication.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Replication {
    pub scenario: String,
    pub replication: usize,
    pub seed: u64,
    pub record: Option<RecoveryRecord>,
    pub error: Option<String>,
}

/// Aggregate row of a recovery study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSummary {
    pub scenario: String,
    pub fits: usize,
    pub failures: usize,
    /// Fits with cosine above the recovery threshold.
    pub recovered: usize,
    pub recovery_rate: f64,
    pub strict_recovery_rate: f64,
    pub delta_bias: f64,
    pub delta_bias_sd: f64,
    pub cosine: f64,
    pub tau_bias: f64,
    pub coverage: f64,
    pub coverage_all: f64,
    pub converged_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub replications: Vec<Replication>,
    /// One row per scenario, then an `overall` row.
    pub summary: Vec<ScenarioSummary>,
}

fn mean_or_nan(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        f64::NAN
    } else {
        crate::stats::mean(xs)
    }
}

fn summarize(name: &str, reps: &[&Replication], config: &StudyConfig) -> ScenarioSummary {
    let records: Vec<&RecoveryRecord> = reps.iter().filter_map(|r| r.record.as_ref()).collect();
    let hit: Vec<&&RecoveryRecord> = records.iter().filter(|r| r.cosine > config.threshold).collect();
    let col = |f: fn(&RecoveryRecord) -> f64, set: &[&&RecoveryRecord]| -> Vec<f64> { set.iter().map(|r| f(r)).collect() };
    let all: Vec<&&RecoveryRecord> = records.iter().collect();
    let bias = col(|r| r.delta_bias, &hit);
    let fits = records.len();
    let rate = |n: usize| if fits == 0 { f64::NAN } else { n as f64 / fits as f64 };
    ScenarioSummary {
        scenario: name.to_string(),
        fits,
        failures: reps.len() - fits,
        recovered: hit.len(),
        recovery_rate: rate(hit.len()),
        strict_recovery_rate: rate(records.iter().filter(|r| r.cosine > config.strict_threshold).count()),
        delta_bias: mean_or_nan(&bias),
        delta_bias_sd: if bias.len() > 1 { crate::stats::variance(&bias).sqrt() } else { f64::NAN },
        cosine: mean_or_nan(&col(|r| r.cosine, &hit)),
        tau_bias: mean_or_nan(&col(|r| r.tau_bias, &hit)),
        coverage: mean_or_nan(&col(|r| r.coverage, &hit)),
        coverage_all: mean_or_nan(&col(|r| r.coverage, &all)),
        converged_rate: rate(records.iter().filter(|r| r.converged).count()),
    }
}

/// Simulates and fits one replication; failures are recorded, not raised.
pub fn run_replication(scenario: &ScenarioSpec, index: usize, replication: usize, config: &StudyConfig) -> Replication {
    let seed = derive_seed(config.seed, &[index as u64, replication as u64]);
    let result = (|| {
        let sim = simulate_dgp(scenario, seed)?;
        let data = sim.dataset()?;
        let sampler = SamplerConfig {
            seed: derive_seed(seed, &[1]),
            ..config.sampler.clone()
        };
        let draws = run_chains(&sim.spec, &sim.covariates, &data, &sampler)?;
        recovery_metrics(&sim.truth, &sim.mu, &draws, &sim.covariates, &data)
    })();
    if let Err(e) = &result {
        log::warn!("{} replication {replication}: {e}", scenario.name);
    }
    Replication {
        scenario: scenario.name.clone(),
        replication,
        seed,
        error: result.as_ref().err().map(|e| e.to_string()),
        record: result.ok(),
    }
}

/// Runs every scenario for `config.replications` replications.
pub fn run_study(scenarios: &[ScenarioSpec], config: &StudyConfig) -> Result<RecoveryReport> {
    config.sampler.validate()?;
    for s in scenarios {
        s.validate()?;
    }
    let jobs: Vec<(usize, usize)> = (0..scenarios.len())
        .flat_map(|i| (0..config.replications).map(move |r| (i, r)))
        .collect();
    let replications: Vec<Replication> = jobs
        .par_iter()
        .map(|&(i, r)| run_replication(&scenarios[i], i, r, config))
        .collect();
    let mut summary = Vec::new();
    if !replications.is_empty() {
        for s in scenarios {
            let reps: Vec<&Replication> = replications.iter().filter(|r| r.scenario == s.name).collect();
            summary.push(summarize(&s.name, &reps, config));
        }
        let all: Vec<&Replication> = replications.iter().collect();
        summary.push(summarize("overall", &all, config));
    }
    Ok(RecoveryReport { replications, summary })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covid_like_shape() {
        let p = covid_like(1).unwrap();
        assert_eq!(p.data.y.len(), 85);
        assert_eq!(p.data.y[0].parts(), 10);
        assert_eq!(p.labels[0], "2014-01");
        assert_eq!(p.labels[PRESET_BREAK - 1], "2020-02");
        assert_eq!(p.labels[84], "2021-01");
        // short lead times gain share after the break
        let share = |r: std::ops::Range<usize>| r.clone().map(|t| p.data.mu[t].as_slice()[0]).sum::<f64>() / r.len() as f64;
        assert!(share(80..85) > share(60..74) + 0.05);
        assert_eq!(covid_like(1).unwrap().data.y, p.data.y);
    }

    #[test]
    fn scenario_names_round_trip() {
        let grid = ScenarioSpec::grid();
        assert_eq!(grid.len(), 8);
        for s in &grid {
            assert_eq!(&ScenarioSpec::from_name(&s.name).unwrap(), s);
        }
        let s = ScenarioSpec::from_name("k0.5_dneg_p0").unwrap();
        assert_eq!((s.kappa, s.delta, s.delta_phi), (0.5, -0.6, 0.0));
        assert_eq!(grid[0].name, "k0.5_dneg_p0");
        assert_eq!(grid[7].name, "k1.0_dpos_p0.3");
        assert!(ScenarioSpec::from_name("k0.5_dneg").is_err());
        assert!(ScenarioSpec::from_name("k-1_dneg_p0").is_err());
    }

    #[test]
    fn dgp_shape_and_determinism() {
        let s = ScenarioSpec::from_name("k1.0_dpos_p0.3").unwrap();
        let a = simulate_dgp(&s, 9).unwrap();
        assert_eq!(a.y.len(), 120);
        assert!(a.y.iter().all(|y| y.parts() == 5 && (y.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12));
        let b = simulate_dgp(&s, 9).unwrap();
        assert_eq!(a.y, b.y);
        assert_eq!(a.truth, b.truth);
        let iv = a.truth.intervention.as_ref().unwrap();
        assert!(iv.v_raw[0] >= 0.0);
        assert!((iv.v_raw.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(a.truth.ar.iter().chain(&a.truth.ma).all(|x| x.abs() < ARMA_BOUND));
        assert_ne!(simulate_dgp(&s, 10).unwrap().y, a.y);
    }

    #[test]
    fn zero_shift_leaves_only_the_trend() {
        // with Delta = 0 the drift is b + B t / T on both sides of the break
        let mut s = ScenarioSpec::new(1.0, 0.0, 0.0);
        s.name = "none".into();
        let sim = simulate_dgp(&s, 3).unwrap();
        let eval = DriftEval::new(&sim.spec, &sim.truth);
        let mut d = vec![0.0; 4];
        for t in [59usize, 60, 61, 100] {
            let x = sim.covariates.mean.row(t);
            eval.eval((t + 1) as f64, x, sim.covariates.prec.row(t), &mut d);
            for i in 0..4 {
                let expected = sim.truth.b[i] + sim.truth.coef[i] * x[0];
                assert!((d[i] - expected).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn perfect_posterior_has_cosine_one() {
        let s = ScenarioSpec::new(1.0, 0.6, 0.0);
        let sim = simulate_dgp(&s, 1).unwrap();
        let data = sim.dataset().unwrap();
        let flat = sim.truth.to_flat();
        let rows = 8;
        let values: Vec<f64> = (0..rows).flat_map(|_| flat.clone()).collect();
        let draws = PosteriorDraws::new(sim.spec.clone(), 2, 4, values, vec![0.0; rows], vec![false; rows]).unwrap();
        let r = recovery_metrics(&sim.truth, &sim.mu, &draws, &sim.covariates, &data).unwrap();
        assert!((r.cosine - 1.0).abs() < 1e-12);
        assert_eq!(r.delta_bias, 0.0);
        assert_eq!(r.tau_bias, 0.0);
        assert!((r.coverage - 1.0).abs() < 1e-12);

        // storing the reflected pair without canonical form flips both
        let mut flipped = sim.truth.clone();
        let iv = flipped.intervention.as_mut().unwrap();
        iv.v_raw.iter_mut().for_each(|v| *v = -*v);
        iv.delta = -iv.delta;
        let (v, delta) = iv.canonical();
        assert_eq!(delta, 0.6);
        let v_true = &sim.truth.intervention.as_ref().unwrap().v_raw;
        let raw_cos: f64 = iv.v_raw.iter().zip(v_true).map(|(a, b)| a * b).sum();
        assert!((raw_cos + 1.0).abs() < 1e-12);
        assert!(v.iter().zip(v_true).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn empty_study_is_empty() {
        let cfg = StudyConfig {
            replications: 0,
            ..Default::default()
        };
        let report = run_study(&ScenarioSpec::grid(), &cfg).unwrap();
        assert!(report.replications.is_empty());
        assert!(report.summary.is_empty());
    }
}
