//! No-U-Turn Hamiltonian Monte Carlo over the unconstrained parameter
//! vector.
//!
//! Warmup adapts the step size by dual averaging and a diagonal or dense
//! metric over doubling windows. Chains run in parallel, each on its own stream derived
//! from `(seed, chain)`, and are merged in chain order, so output does not
//! depend on the thread count.

mod adapt;
mod diagnostics;
mod nuts;
pub mod transform;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{log_posterior, param_names, CovariateSet, Dataset, ModelSpec, ParamSet, Posterior};
use crate::rng::stream;
use adapt::{DualAveraging, Schedule, Welford, WelfordDense};
pub use diagnostics::{rhat, Diagnostics};
use nuts::{Kernel, Metric, Point};

/// Attempts at finding a finite starting point before giving up.
pub const INIT_ATTEMPTS: usize = 100;

/// A differentiable log density on `R^dim`.
pub trait Target: Sync {
    fn dim(&self) -> usize;

    /// Writes the gradient into `grad` and returns the log density, which
    /// may be `-inf`.
    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64;
}

impl Target for Posterior<'_> {
    fn dim(&self) -> usize {
        Posterior::dim(self)
    }

    fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        Posterior::log_density_grad(self, theta, grad)
    }
}

/// Form of the adapted mass matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Diag,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub seed: u64,
    pub target_accept: f64,
    pub max_tree_depth: usize,
    /// Energy error above which a transition is flagged divergent.
    pub max_energy_error: f64,
    /// Initial values are uniform on `[-init_radius, init_radius]`.
    pub init_radius: f64,
    pub metric: MetricKind,
    /// Sampling density on the norm of the raw direction; see
    /// [`Posterior::with_radius_sd`]. `None` keeps the standard normal.
    pub radius_sd: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 4,
            warmup: 500,
            draws: 750,
            seed: 0,
            target_accept: 0.8,
            max_tree_depth: 10,
            max_energy_error: 1000.0,
            init_radius: 2.0,
            metric: MetricKind::Dense,
            radius_sd: Some(0.25),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.warmup == 0 || self.draws == 0 {
            return Err(Error::Config("chains, warmup and draws must be at least 1".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::Config(format!("target_accept {} not in (0, 1)", self.target_accept)));
        }
        if self.max_tree_depth == 0 {
            return Err(Error::Config("max_tree_depth must be at least 1".into()));
        }
        if let Some(sd) = self.radius_sd {
            if !(sd > 0.0 && sd.is_finite()) {
                return Err(Error::Config(format!("radius_sd {sd} must be positive")));
            }
        }
        if !(self.max_energy_error > 0.0) || !(self.init_radius > 0.0 && self.init_radius.is_finite()) {
            return Err(Error::Config("max_energy_error and init_radius must be positive".into()));
        }
        Ok(())
    }
}

/// Raw output of one chain, in unconstrained coordinates.
#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub dim: usize,
    /// Kept draws, row-major `draws x dim`.
    pub theta: Vec<f64>,
    /// Log density (Jacobian included) at each kept draw.
    pub lp: Vec<f64>,
    pub accept_stat: Vec<f64>,
    pub energy_error: Vec<f64>,
    pub divergent: Vec<bool>,
    pub tree_depth: Vec<usize>,
    pub step_size: f64,
    /// Diagonal of the adapted inverse metric.
    pub inv_metric: Vec<f64>,
}

impl ChainOutput {
    pub fn draw(&self, i: usize) -> &[f64] {
        &self.theta[i * self.dim..(i + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.lp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lp.is_empty()
    }
}

fn finite_point<T: Target + ?Sized>(target: &T, q: &[f64]) -> bool {
    let mut grad = vec![0.0; q.len()];
    let lp = target.log_density_grad(q, &mut grad);
    lp.is_finite() && grad.iter().all(|g| g.is_finite())
}

/// Draws a starting point uniformly on the cube, retrying until the log
/// density and its gradient are finite.
pub fn initial_point<T: Target + ?Sized>(target: &T, radius: f64, rng: &mut ChaCha8Rng) -> Result<Vec<f64>> {
    for _ in 0..INIT_ATTEMPTS {
        let q: Vec<f64> = (0..target.dim()).map(|_| rng.random_range(-radius..=radius)).collect();
        if finite_point(target, &q) {
            return Ok(q);
        }
    }
    Err(Error::Initialization {
        attempts: INIT_ATTEMPTS,
    })
}

/// Starting parameters of chain 0 for `seed`.
pub fn initialize(posterior: &Posterior, seed: u64) -> Result<ParamSet> {
    let q = initial_point(posterior, 2.0, &mut stream(seed, &[0]))?;
    Ok(posterior.layout().constrain(&q)?.0)
}

// Doubles or halves the step size until the one-step acceptance crosses 0.8.
fn find_step_size<T: Target + ?Sized>(kernel: &Kernel<T>, z: &Point, rng: &mut ChaCha8Rng) -> f64 {
    let threshold = 0.8f64.ln();
    let mut eps = kernel.step_size;
    let trial = |eps: f64, rng: &mut ChaCha8Rng| {
        let mut w = z.clone();
        kernel.sample_momentum(&mut w, rng);
        let h0 = kernel.hamiltonian(&w);
        kernel.leapfrog(&mut w, eps);
        h0 - kernel.hamiltonian(&w)
    };
    let up = trial(eps, rng) > threshold;
    for _ in 0..100 {
        let delta = trial(eps, rng);
        if (up && !(delta > threshold)) || (!up && !(delta < threshold)) {
            break;
        }
        let next = if up { 2.0 * eps } else { 0.5 * eps };
        if !(next > 1e-10 && next < 1e7) {
            break;
        }
        eps = next;
    }
    eps
}

fn make_kernel<'a, T: Target + ?Sized>(target: &'a T, metric: &'a Metric, step_size: f64, config: &SamplerConfig) -> Kernel<'a, T> {
    Kernel {
        target,
        metric,
        step_size,
        max_depth: config.max_tree_depth,
        max_energy_error: config.max_energy_error,
    }
}

fn run_chain<T: Target + ?Sized>(target: &T, config: &SamplerConfig, seed: u64, chain: usize) -> Result<ChainOutput> {
    let dim = target.dim();
    let mut rng = stream(seed, &[chain as u64]);
    let q0 = initial_point(target, config.init_radius, &mut rng)?;
    let mut z = Point::new(target, q0);
    let mut metric = Metric::unit(dim);
    let mut eps = find_step_size(&make_kernel(target, &metric, 1.0, config), &z, &mut rng);
    let mut da = DualAveraging::new(eps, config.target_accept);
    let mut schedule = Schedule::new(config.warmup);
    let mut diag = Welford::new(dim);
    let mut dense = WelfordDense::new(dim);
    for i in 0..config.warmup {
        let stats = make_kernel(target, &metric, eps, config).transition(&mut z, &mut rng);
        eps = da.learn(stats.accept_stat);
        if schedule.in_slow_window(i) {
            match config.metric {
                MetricKind::Diag => diag.push(&z.q),
                MetricKind::Dense => dense.push(&z.q),
            }
        }
        if schedule.window_closes(i) {
            metric = match config.metric {
                MetricKind::Diag => Metric::Diag(diag.regularized()),
                MetricKind::Dense => Metric::dense(dense.regularized()),
            };
            diag = Welford::new(dim);
            dense = WelfordDense::new(dim);
            eps = find_step_size(&make_kernel(target, &metric, eps, config), &z, &mut rng);
            da.restart(eps);
        }
    }
    eps = da.final_step_size();
    log::debug!("chain {chain}: adapted step size {eps:.4}");

    let n = config.draws;
    let mut out = ChainOutput {
        dim,
        theta: Vec::with_capacity(n * dim),
        lp: Vec::with_capacity(n),
        accept_stat: Vec::with_capacity(n),
        energy_error: Vec::with_capacity(n),
        divergent: Vec::with_capacity(n),
        tree_depth: Vec::with_capacity(n),
        step_size: eps,
        inv_metric: metric.diagonal(),
    };
    let k = make_kernel(target, &metric, eps, config);
    for _ in 0..n {
        let stats = k.transition(&mut z, &mut rng);
        out.theta.extend_from_slice(&z.q);
        out.lp.push(z.lp);
        out.accept_stat.push(stats.accept_stat);
        out.energy_error.push(stats.energy_error);
        out.divergent.push(stats.divergent);
        out.tree_depth.push(stats.depth);
    }
    Ok(out)
}

/// Runs `config.chains` chains on an arbitrary target.
pub fn sample<T: Target + ?Sized>(target: &T, config: &SamplerConfig) -> Result<Vec<ChainOutput>> {
    config.validate()?;
    (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(target, config, config.seed, c))
        .collect()
}

/// Per-transition sampler records, present for freshly sampled draws.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerStats {
    pub accept_stat: Vec<f64>,
    pub energy_error: Vec<f64>,
    pub tree_depth: Vec<usize>,
    pub step_size: Vec<f64>,
    pub inv_metric: Vec<Vec<f64>>,
}

/// Constrained posterior draws in canonical sign form, chain-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub spec: ModelSpec,
    pub names: Vec<String>,
    pub chains: usize,
    pub draws: usize,
    /// Row-major `(chains * draws) x names.len()`, in [`param_names`] order.
    pub values: Vec<f64>,
    /// Log posterior (constrained scale, no Jacobian) of each draw.
    pub lp: Vec<f64>,
    pub divergent: Vec<bool>,
    pub stats: Option<SamplerStats>,
}

impl PosteriorDraws {
    /// Assembles draws from flat rows, validating every row.
    pub fn new(spec: ModelSpec, chains: usize, draws: usize, values: Vec<f64>, lp: Vec<f64>, divergent: Vec<bool>) -> Result<Self> {
        let names = param_names(&spec);
        let rows = chains * draws;
        Error::check_dim(rows * names.len(), values.len())?;
        Error::check_dim(rows, lp.len())?;
        Error::check_dim(rows, divergent.len())?;
        let out = PosteriorDraws {
            spec,
            names,
            chains,
            draws,
            values,
            lp,
            divergent,
            stats: None,
        };
        for k in 0..rows {
            ParamSet::from_flat(&out.spec, out.row(k))?;
        }
        Ok(out)
    }

    pub fn len(&self) -> usize {
        self.chains * self.draws
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_params(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let p = self.n_params();
        &self.values[k * p..(k + 1) * p]
    }

    pub fn params(&self, k: usize) -> ParamSet {
        ParamSet::from_flat(&self.spec, self.row(k)).expect("stored draws are valid")
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Draws of parameter `j` for one chain.
    pub fn chain_column(&self, chain: usize, j: usize) -> Vec<f64> {
        (0..self.draws).map(|i| self.row(chain * self.draws + i)[j]).collect()
    }

    /// Draws of parameter `j` pooled over chains.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|k| self.row(k)[j]).collect()
    }

    /// Divergence flags recomputed for another energy threshold. Requires
    /// sampler records.
    pub fn divergent_at(&self, threshold: f64) -> Option<Vec<bool>> {
        self.stats
            .as_ref()
            .map(|s| s.energy_error.iter().map(|e| !(*e <= threshold)).collect())
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let rhat = (0..self.n_params())
            .map(|j| {
                let cols: Vec<Vec<f64>> = (0..self.chains).map(|c| self.chain_column(c, j)).collect();
                let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
                rhat(&refs)
            })
            .collect();
        let (mean_accept, step_size) = match &self.stats {
            Some(s) => (
                s.accept_stat
                    .chunks(self.draws.max(1))
                    .map(|c| c.iter().sum::<f64>() / c.len() as f64)
                    .collect(),
                s.step_size.clone(),
            ),
            None => (Vec::new(), Vec::new()),
        };
        Diagnostics {
            names: self.names.clone(),
            rhat,
            divergences: self.divergent.iter().filter(|d| **d).count(),
            mean_accept,
            step_size,
        }
    }
}

/// Samples the posterior of `spec` given covariates and data.
pub fn run_chains(spec: &ModelSpec, covariates: &CovariateSet, data: &Dataset, config: &SamplerConfig) -> Result<PosteriorDraws> {
    if data.len() == 1 {
        return Err(Error::InsufficientData("at least two observations are required".into()));
    }
    let mut posterior = Posterior::new(spec, covariates, data)?;
    if let Some(sd) = config.radius_sd {
        posterior = posterior.with_radius_sd(sd)?;
    }
    let outputs = sample(&posterior, config)?;
    let layout = posterior.layout();
    let names = param_names(spec);
    let rows = config.chains * config.draws;
    let mut values = Vec::with_capacity(rows * names.len());
    let mut lp = Vec::with_capacity(rows);
    let mut divergent = Vec::with_capacity(rows);
    let mut stats = SamplerStats {
        accept_stat: Vec::with_capacity(rows),
        energy_error: Vec::with_capacity(rows),
        tree_depth: Vec::with_capacity(rows),
        step_size: Vec::new(),
        inv_metric: Vec::new(),
    };
    for out in outputs {
        for i in 0..out.len() {
            let (params, _) = layout.constrain(out.draw(i))?;
            let params = params.canonicalized();
            lp.push(log_posterior(spec, &params, covariates, data)?);
            values.extend(params.to_flat());
        }
        divergent.extend(&out.divergent);
        stats.accept_stat.extend(&out.accept_stat);
        stats.energy_error.extend(&out.energy_error);
        stats.tree_depth.extend(&out.tree_depth);
        stats.step_size.push(out.step_size);
        stats.inv_metric.push(out.inv_metric);
    }
    Ok(PosteriorDraws {
        spec: spec.clone(),
        names,
        chains: config.chains,
        draws: config.draws,
        values,
        lp,
        divergent,
        stats: Some(stats),
    })
}

/// Log posterior of a stored draw, recomputed from the model.
pub fn recompute_lp(draws: &PosteriorDraws, k: usize, covariates: &CovariateSet, data: &Dataset) -> Result<f64> {
    log_posterior(&draws.spec, &draws.params(k), covariates, data)
}
