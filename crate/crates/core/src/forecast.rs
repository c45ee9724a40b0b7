//! Posterior-predictive forecasts and rolling-origin backtests.
//!
//! Each posterior draw is run through the observed history to recover its
//! own final state, then propagated forward by simulating compositions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{mae, EnergyEstimator, MetricRecord};
use crate::model::{build_state, sample_dirichlet, CovariateSet, Dataset, DriftEval, ModelSpec};
use crate::rng::{derive_seed, stream};
use crate::sampler::{run_chains, PosteriorDraws, SamplerConfig};
use crate::simplex::{self, Composition};
use crate::stats::quantile_sorted;

/// Training windows shorter than this are skipped in backtests.
pub const MIN_TRAINING: usize = 24;

#[derive(Debug, Clone, PartialEq)]
pub struct ForecastConfig {
    pub horizon: usize,
    /// Predictive trajectories per posterior draw.
    pub paths_per_draw: usize,
    /// Covariates for times `T+1 ..= T+H`.
    pub future: CovariateSet,
    pub seed: u64,
}

impl ForecastConfig {
    pub fn new(horizon: usize, future: CovariateSet, seed: u64) -> Self {
        ForecastConfig {
            horizon,
            paths_per_draw: 1,
            future,
            seed,
        }
    }

    fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.horizon == 0 || self.paths_per_draw == 0 {
            return Err(Error::Config("horizon and paths_per_draw must be at least 1".into()));
        }
        if self.future.len() < self.horizon {
            return Err(Error::InsufficientData(format!(
                "future covariates cover {} steps, horizon is {}",
                self.future.len(),
                self.horizon
            )));
        }
        self.future.check(spec, self.future.len())
    }
}

/// Simulated predictive paths. Entry `(path, h)` sits at
/// `path * horizon + h` with `h` 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastDraws {
    pub horizon: usize,
    pub parts: usize,
    /// Number of paths (posterior draws times paths per draw).
    pub paths: usize,
    pub y: Vec<Composition>,
    pub mu: Vec<Composition>,
    pub lambda: Vec<f64>,
    pub gate: Vec<f64>,
}

impl ForecastDraws {
    fn index(&self, path: usize, h: usize) -> usize {
        path * self.horizon + h
    }

    /// Sampled compositions at 0-based horizon `h`.
    pub fn samples_at(&self, h: usize) -> Vec<Composition> {
        (0..self.paths).map(|m| self.y[self.index(m, h)].clone()).collect()
    }

    /// Mean of the `mu` draws at `h`, renormalized.
    pub fn mu_hat(&self, h: usize) -> Result<Composition> {
        let mut acc = vec![0.0; self.parts];
        for m in 0..self.paths {
            for (a, v) in acc.iter_mut().zip(self.mu[self.index(m, h)].as_slice()) {
                *a += v;
            }
        }
        Composition::from_positive(&acc)
    }

    /// Mean of the `lambda` draws at `h`.
    pub fn lambda_hat(&self, h: usize) -> f64 {
        (0..self.paths).map(|m| self.lambda[self.index(m, h)]).sum::<f64>() / self.paths as f64
    }

    /// Per-component mean, median and 10%/90% quantiles of the sampled
    /// compositions at every horizon.
    pub fn summary(&self) -> Result<Vec<HorizonSummary>> {
        (0..self.horizon)
            .map(|h| {
                let samples = self.samples_at(h);
                let mut mean = vec![0.0; self.parts];
                let (mut median, mut q10, mut q90) = (vec![], vec![], vec![]);
                let mut column = Vec::with_capacity(self.paths);
                for c in 0..self.parts {
                    column.clear();
                    column.extend(samples.iter().map(|s| s.as_slice()[c]));
                    mean[c] = column.iter().sum::<f64>() / self.paths as f64;
                    column.sort_by(f64::total_cmp);
                    median.push(quantile_sorted(&column, 0.5));
                    q10.push(quantile_sorted(&column, 0.1));
                    q90.push(quantile_sorted(&column, 0.9));
                }
                Ok(HorizonSummary {
                    h: h + 1,
                    mean: Composition::from_positive(&mean)?.into_vec(),
                    median,
                    q10,
                    q90,
                })
            })
            .collect()
    }
}

/// Predictive summary at one horizon (1-based).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub h: usize,
    pub mean: Vec<f64>,
    pub median: Vec<f64>,
    pub q10: Vec<f64>,
    pub q90: Vec<f64>,
}

struct Path {
    y: Vec<Composition>,
    mu: Vec<Composition>,
    lambda: Vec<f64>,
    gate: Vec<f64>,
}

/// Forecasts `config.horizon` steps past the end of `data`.
pub fn forecast(
    draws: &PosteriorDraws,
    data: &Dataset,
    covariates: &CovariateSet,
    config: &ForecastConfig,
) -> Result<ForecastDraws> {
    let spec = &draws.spec;
    config.validate(spec)?;
    if draws.is_empty() {
        return Err(Error::InsufficientData("no posterior draws".into()));
    }
    if data.is_empty() {
        return Err(Error::InsufficientData("forecasting needs at least one observation".into()));
    }
    Error::check_dim(spec.parts, data.parts())?;
    let n = data.len();
    let dim = spec.dim();
    let horizon = config.horizon;
    let paths: Vec<Vec<Path>> = (0..draws.len())
        .into_par_iter()
        .map(|k| -> Result<Vec<Path>> {
            let params = draws.params(k);
            let state = build_state(spec, &params, covariates, &data.z, &data.basis)?;
            let drift_eval = DriftEval::new(spec, &params);
            let mut rng = stream(config.seed, &[k as u64]);
            let mut out = Vec::with_capacity(config.paths_per_draw);
            let mut drift = vec![0.0; dim];
            let mut eta = vec![0.0; dim];
            let mut mu = vec![0.0; spec.parts];
            let mut alpha = vec![0.0; spec.parts];
            let mut z = vec![0.0; dim];
            for _ in 0..config.paths_per_draw {
                let mut z_prev = data.z.row(n - 1).to_vec();
                let mut drift_prev = state.drift_row(n - 1).to_vec();
                let mut e_prev = state.resid_row(n - 1).to_vec();
                let mut path = Path {
                    y: Vec::with_capacity(horizon),
                    mu: Vec::with_capacity(horizon),
                    lambda: Vec::with_capacity(horizon),
                    gate: Vec::with_capacity(horizon),
                };
                for h in 0..horizon {
                    let t = (n + h + 1) as f64;
                    let (w, log_lambda) =
                        drift_eval.eval(t, config.future.mean.row(h), config.future.prec.row(h), &mut drift);
                    for d in 0..dim {
                        eta[d] = drift[d] + params.ar[d] * (z_prev[d] - drift_prev[d]) + params.ma[d] * e_prev[d];
                    }
                    simplex::ilr_inv_into(&eta, &data.basis, &mut mu);
                    let lambda = log_lambda.exp();
                    for (a, m) in alpha.iter_mut().zip(&mu) {
                        *a = lambda * m;
                    }
                    let y = sample_dirichlet(&alpha, &mut rng)?;
                    simplex::ilr_into(y.as_slice(), &data.basis, &mut z);
                    for d in 0..dim {
                        e_prev[d] = z[d] - eta[d];
                    }
                    z_prev.copy_from_slice(&z);
                    drift_prev.copy_from_slice(&drift);
                    path.y.push(y);
                    path.mu.push(Composition::from_positive(&mu)?);
                    path.lambda.push(lambda);
                    path.gate.push(w);
                }
                out.push(path);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let total = draws.len() * config.paths_per_draw;
    let mut fd = ForecastDraws {
        horizon,
        parts: spec.parts,
        paths: total,
        y: Vec::with_capacity(total * horizon),
        mu: Vec::with_capacity(total * horizon),
        lambda: Vec::with_capacity(total * horizon),
        gate: Vec::with_capacity(total * horizon),
    };
    for p in paths.into_iter().flatten() {
        fd.y.extend(p.y);
        fd.mu.extend(p.mu);
        fd.lambda.extend(p.lambda);
        fd.gate.extend(p.gate);
    }
    Ok(fd)
}

/// Forecast origins for a backtest. An origin `o` (1-based) is fit on
/// observations `1 ..= o - 1` and its horizon-`h` target is `o + h - 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RollingPlan {
    pub origins: Vec<usize>,
    pub horizons: Vec<usize>,
}

impl RollingPlan {
    fn validate(&self) -> Result<()> {
        if self.origins.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("origins must be strictly increasing".into()));
        }
        if self.origins.contains(&0) || self.horizons.contains(&0) {
            return Err(Error::Config("origins and horizons are 1-based".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingOptions {
    pub sampler: SamplerConfig,
    pub paths_per_draw: usize,
    pub energy: EnergyEstimator,
}

impl Default for RollingOptions {
    fn default() -> Self {
        RollingOptions {
            sampler: SamplerConfig::default(),
            paths_per_draw: 1,
            energy: EnergyEstimator::Unbiased,
        }
    }
}

/// Scores of one (model, origin, horizon) case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingRecord {
    pub model: String,
    pub origin: usize,
    pub horizon: usize,
    pub target: usize,
    #[serde(flatten)]
    pub metrics: MetricRecord,
    pub mu_hat: Vec<f64>,
}

/// Aggregate over origins for one (model, horizon).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingSummary {
    pub model: String,
    pub horizon: usize,
    pub n: usize,
    #[serde(flatten)]
    pub metrics: MetricRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedOrigin {
    pub model: String,
    pub origin: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RollingReport {
    pub records: Vec<RollingRecord>,
    pub summary: Vec<RollingSummary>,
    pub skipped: Vec<SkippedOrigin>,
}

/// Refits every model at every origin and scores its forecasts.
///
/// `covariates` must span the whole dataset. Origins with fewer than
/// [`MIN_TRAINING`] training points, or whose fit fails, are skipped and
/// listed. Only horizons whose target is observed are scored.
pub fn rolling_evaluate(
    data: &Dataset,
    covariates: &CovariateSet,
    specs: &[ModelSpec],
    plan: &RollingPlan,
    options: &RollingOptions,
) -> Result<RollingReport> {
    plan.validate()?;
    options.sampler.validate()?;
    if covariates.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: data.len(),
            got: covariates.len(),
        });
    }
    let n = data.len();
    let jobs: Vec<(usize, usize)> = (0..specs.len())
        .flat_map(|m| plan.origins.iter().map(move |&o| (m, o)))
        .collect();
    let outcomes: Vec<std::result::Result<Vec<RollingRecord>, SkippedOrigin>> = jobs
        .par_iter()
        .map(|&(m, origin)| {
            let spec = &specs[m];
            let skip = |reason: String| {
                log::warn!("{} origin {origin}: skipped: {reason}", spec.variant);
                SkippedOrigin {
                    model: spec.variant.to_string(),
                    origin,
                    reason,
                }
            };
            let train = origin - 1;
            if train < MIN_TRAINING {
                return Err(skip(format!("training window of {train} < {MIN_TRAINING}")));
            }
            let horizons: Vec<usize> = plan.horizons.iter().copied().filter(|h| origin + h - 1 <= n).collect();
            if horizons.is_empty() {
                return Err(skip("no observed targets".into()));
            }
            let max_h = *horizons.iter().max().expect("nonempty");
            evaluate_origin(data, covariates, spec, origin, max_h, &horizons, options, m)
                .map_err(|e| skip(e.to_string()))
        })
        .collect();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => records.extend(r),
            Err(s) => skipped.push(s),
        }
    }
    let mut summary = Vec::new();
    for spec in specs {
        let model = spec.variant.to_string();
        for &h in &plan.horizons {
            let cases: Vec<&RollingRecord> = records.iter().filter(|r| r.model == model && r.horizon == h).collect();
            let metrics: Vec<MetricRecord> = cases.iter().map(|r| r.metrics).collect();
            if let Some(mut mean) = MetricRecord::mean(&metrics) {
                // pooled over every (case, component) cell
                let mus: Vec<Composition> = cases.iter().map(|r| Composition::new(r.mu_hat.clone())).collect::<Result<_>>()?;
                let ys: Vec<Composition> = cases.iter().map(|r| data.y[r.target - 1].clone()).collect();
                mean.mae = mae(&mus, &ys)?;
                summary.push(RollingSummary {
                    model: model.clone(),
                    horizon: h,
                    n: cases.len(),
                    metrics: mean,
                });
            }
        }
    }
    Ok(RollingReport {
        records,
        summary,
        skipped,
    })
}

#[allow(clippy::too_many_arguments)]
fn evaluate_origin(
    data: &Dataset,
    covariates: &CovariateSet,
    spec: &ModelSpec,
    origin: usize,
    max_h: usize,
    horizons: &[usize],
    options: &RollingOptions,
    model_index: usize,
) -> Result<Vec<RollingRecord>> {
    let train = origin - 1;
    let history = data.prefix(train);
    let hist_cov = covariates.slice_rows(0, train);
    let seed = derive_seed(options.sampler.seed, &[model_index as u64, origin as u64]);
    let sampler = SamplerConfig {
        seed,
        ..options.sampler.clone()
    };
    let draws = run_chains(spec, &hist_cov, &history, &sampler)?;
    let config = ForecastConfig {
        horizon: max_h,
        paths_per_draw: options.paths_per_draw,
        future: covariates.slice_rows(train, train + max_h),
        seed: derive_seed(seed, &[1]),
    };
    let fc = forecast(&draws, &history, &hist_cov, &config)?;
    horizons
        .iter()
        .map(|&h| {
            let target = origin + h - 1;
            let y = &data.y[target - 1];
            let mu_hat = fc.mu_hat(h - 1)?;
            let metrics = MetricRecord::evaluate(&fc.samples_at(h - 1), &mu_hat, fc.lambda_hat(h - 1), y, options.energy)?;
            Ok(RollingRecord {
                model: spec.variant.to_string(),
                origin,
                horizon: h,
                target,
                metrics,
                mu_hat: mu_hat.into_vec(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Intervention, Matrix, ParamSet, Variant};
    use crate::simulation::{simulate_series, trend_covariates};

    fn draws_from(spec: &ModelSpec, params: &[ParamSet]) -> PosteriorDraws {
        let values: Vec<f64> = params.iter().flat_map(|p| p.to_flat()).collect();
        let n = params.len();
        PosteriorDraws::new(spec.clone(), 1, n, values, vec![0.0; n], vec![false; n]).unwrap()
    }

    fn history(spec: &ModelSpec, truth: &ParamSet, cov: &CovariateSet, seed: u64) -> Dataset {
        let (y, _) = simulate_series(spec, truth, cov, cov.len(), &mut stream(seed, &[])).unwrap();
        Dataset::with_helmert(y, spec.parts).unwrap()
    }

    fn intervention_truth(spec: &ModelSpec) -> ParamSet {
        let mut p = ParamSet::zeros(spec);
        p.b = vec![0.2, -0.1, 0.3];
        p.ar = vec![0.4, 0.2, -0.3];
        p.ma = vec![0.1, -0.2, 0.3];
        p.gamma = vec![5.0];
        p.intervention = Some(Intervention {
            delta: 0.8,
            tau: 22.0,
            kappa: 0.4,
            v_raw: vec![0.6, 0.0, -0.8],
            delta_phi: 0.2,
        });
        p
    }

    #[test]
    fn drift_only_model_has_constant_mean() {
        let spec = ModelSpec::new(Variant::Baseline, 4, 0, 1, None).unwrap();
        let mut p = ParamSet::zeros(&spec);
        p.b = vec![0.3, -0.2, 0.1];
        p.gamma = vec![4.0];
        let cov = CovariateSet::intercept_only(30);
        let data = history(&spec, &p, &cov, 1);
        let mut q = p.clone();
        q.b = vec![-0.1, 0.4, 0.0];
        let draws = draws_from(&spec, &[p, q]);
        let fc = forecast(&draws, &data, &cov, &ForecastConfig::new(6, CovariateSet::intercept_only(6), 3)).unwrap();
        for m in 0..fc.paths {
            for h in 1..6 {
                let a = fc.mu[m * 6].as_slice();
                let b = fc.mu[m * 6 + h].as_slice();
                assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn gate_is_nondecreasing_and_samples_stay_in_the_simplex() {
        let spec = ModelSpec::new(Variant::Intervention, 4, 1, 1, Some(20)).unwrap();
        let truth = intervention_truth(&spec);
        let cov = trend_covariates(40);
        let data = history(&spec, &truth, &cov.slice_rows(0, 30), 2);
        let mut other = truth.clone();
        if let Some(iv) = other.intervention.as_mut() {
            iv.tau = 35.0;
            iv.kappa = 2.0;
        }
        let draws = draws_from(&spec, &[truth, other]);
        let config = ForecastConfig {
            paths_per_draw: 3,
            ..ForecastConfig::new(10, cov.slice_rows(30, 40), 5)
        };
        let fc = forecast(&draws, &data, &cov.slice_rows(0, 30), &config).unwrap();
        assert_eq!(fc.paths, 6);
        for m in 0..fc.paths {
            for h in 1..10 {
                assert!(fc.gate[m * 10 + h] >= fc.gate[m * 10 + h - 1]);
            }
        }
        for y in fc.y.iter().chain(&fc.mu) {
            assert!(y.as_slice().iter().all(|v| *v > 0.0));
            assert!((y.as_slice().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        for s in fc.summary().unwrap() {
            assert!((s.mean.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert!(s.q10.iter().zip(&s.median).zip(&s.q90).all(|((a, b), c)| a <= b && b <= c));
        }
    }

    #[test]
    fn one_step_mean_matches_direct_recomputation() {
        let spec = ModelSpec::new(Variant::Intervention, 4, 1, 1, Some(20)).unwrap();
        let truth = intervention_truth(&spec);
        let cov = trend_covariates(31);
        let hist_cov = cov.slice_rows(0, 30);
        let data = history(&spec, &truth, &hist_cov, 4);
        let params: Vec<ParamSet> = (0..5)
            .map(|i| {
                let mut p = truth.clone();
                p.ar[0] += 0.05 * i as f64;
                p.b[1] -= 0.03 * i as f64;
                p
            })
            .collect();
        let draws = draws_from(&spec, &params);
        let fc = forecast(&draws, &data, &hist_cov, &ForecastConfig::new(1, cov.slice_rows(30, 31), 9)).unwrap();

        // brute force: extend the series by a dummy row and read eta_{T+1}
        let mut mean = [0.0; 4];
        for p in &params {
            let state = build_state(&spec, p, &hist_cov, &data.z, &data.basis).unwrap();
            let unit = p.intervention.as_ref().unwrap().unit();
            let iv = p.intervention.as_ref().unwrap();
            let w = crate::model::gate(31.0, iv.tau, iv.kappa, 20.0).unwrap();
            let mut eta = [0.0; 3];
            for d in 0..3 {
                let drift = p.b[d] + p.coef[d] * cov.mean.get(30, 0) + iv.delta * w * unit[d];
                eta[d] = drift + p.ar[d] * (data.z.row(29)[d] - state.drift_row(29)[d]) + p.ma[d] * state.resid_row(29)[d];
            }
            let mu = simplex::ilr_inv(&crate::simplex::IlrVector::new(eta.to_vec()).unwrap(), &data.basis).unwrap();
            for (m, v) in mean.iter_mut().zip(mu.as_slice()) {
                *m += v / 5.0;
            }
        }
        let got = fc.mu_hat(0).unwrap();
        for (a, b) in got.as_slice().iter().zip(&mean) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn missing_future_covariates_are_rejected() {
        let spec = ModelSpec::new(Variant::Baseline, 3, 1, 1, None).unwrap();
        let cov = trend_covariates(10);
        let data = history(&spec, &ParamSet::zeros(&spec), &cov, 1);
        let draws = draws_from(&spec, &[ParamSet::zeros(&spec)]);
        let short = CovariateSet::new(Matrix::zeros(2, 1), Matrix::new(2, 1, vec![1.0; 2]).unwrap()).unwrap();
        assert!(forecast(&draws, &data, &cov, &ForecastConfig::new(3, short, 0)).is_err());
    }

    #[test]
    fn empty_plan_gives_an_empty_report() {
        let spec = ModelSpec::new(Variant::Baseline, 3, 1, 1, None).unwrap();
        let cov = trend_covariates(30);
        let data = history(&spec, &ParamSet::zeros(&spec), &cov, 1);
        let plan = RollingPlan {
            origins: vec![],
            horizons: vec![1],
        };
        let report = rolling_evaluate(&data, &cov, &[spec], &plan, &RollingOptions::default()).unwrap();
        assert!(report.records.is_empty() && report.summary.is_empty());
    }

    #[test]
    fn short_windows_and_unobserved_targets_are_skipped() {
        let spec = ModelSpec::new(Variant::Baseline, 3, 1, 1, None).unwrap();
        let mut truth = ParamSet::zeros(&spec);
        truth.gamma = vec![4.0];
        let cov = trend_covariates(30);
        let data = history(&spec, &truth, &cov, 1);
        let plan = RollingPlan {
            origins: vec![10, 29, 31],
            horizons: vec![1, 3],
        };
        let options = RollingOptions {
            sampler: SamplerConfig {
                chains: 1,
                warmup: 60,
                draws: 40,
                ..Default::default()
            },
            ..Default::default()
        };
        let report = rolling_evaluate(&data, &cov, &[spec], &plan, &options).unwrap();
        let origins: Vec<usize> = report.skipped.iter().map(|s| s.origin).collect();
        assert_eq!(origins, vec![10, 31]);
        // origin 29 scores h=1 (target 29) but not h=3 (target 31)
        assert_eq!(report.records.len(), 1);
        assert_eq!(report.records[0].target, 29);
        assert_eq!(report.summary.len(), 1);
    }
}
