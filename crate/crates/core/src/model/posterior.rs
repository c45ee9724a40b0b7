use statrs::function::gamma::{digamma, ln_gamma};

use super::dirichlet::log_pdf_unchecked;
use super::gate::gate_with_grad;
use super::prior::{log_prior, normal_lpdf};
use super::state::{build_state, IlrSeries};
use super::{CovariateSet, ModelSpec, ParamSet, ALPHA_FLOOR};
use crate::error::{Error, Result};
use crate::sampler::transform::{bounded_from_real, bounded_log_jacobian, Layout};
use crate::simplex::{self, Composition, ContrastMatrix};

/// Observed compositions with their cached ILR coordinates and logs.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: Vec<Composition>,
    pub z: IlrSeries,
    pub basis: ContrastMatrix,
    log_y: Vec<f64>,
}

impl Dataset {
    pub fn new(y: Vec<Composition>, basis: ContrastMatrix) -> Result<Self> {
        let z = IlrSeries::from_compositions(&y, &basis)?;
        let log_y = y.iter().flat_map(|c| c.as_slice().iter().map(|v| v.ln())).collect();
        Ok(Dataset { y, z, basis, log_y })
    }

    /// Helmert basis sized from `parts`; used when `y` may be empty.
    pub fn with_helmert(y: Vec<Composition>, parts: usize) -> Result<Self> {
        Dataset::new(y, ContrastMatrix::helmert(parts)?)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn parts(&self) -> usize {
        self.basis.parts()
    }

    /// The first `len` observations.
    pub fn prefix(&self, len: usize) -> Dataset {
        let parts = self.parts();
        Dataset {
            y: self.y[..len].to_vec(),
            z: IlrSeries::new(self.z.dim(), self.z_rows(len)).expect("prefix of a valid series"),
            basis: self.basis.clone(),
            log_y: self.log_y[..len * parts].to_vec(),
        }
    }

    fn z_rows(&self, len: usize) -> Vec<f64> {
        (0..len).flat_map(|t| self.z.row(t).to_vec()).collect()
    }

    fn log_y_row(&self, t: usize) -> &[f64] {
        let c = self.parts();
        &self.log_y[t * c..(t + 1) * c]
    }
}

fn check_inputs(spec: &ModelSpec, cov: &CovariateSet, data: &Dataset) -> Result<()> {
    spec.validate()?;
    Error::check_dim(spec.parts, data.parts())?;
    cov.check(spec, data.len())?;
    spec.validate_length(data.len())
}

/// Sum of Dirichlet log densities over the series; `-inf` when any
/// concentration falls below [`ALPHA_FLOOR`].
pub fn log_likelihood(spec: &ModelSpec, params: &ParamSet, cov: &CovariateSet, data: &Dataset) -> Result<f64> {
    check_inputs(spec, cov, data)?;
    let state = build_state(spec, params, cov, &data.z, &data.basis)?;
    let mut total = 0.0;
    let mut alpha = vec![0.0; spec.parts];
    for (t, y) in data.y.iter().enumerate() {
        for (a, m) in alpha.iter_mut().zip(state.mu[t].as_slice()) {
            *a = state.lambda[t] * m;
        }
        if alpha.iter().any(|a| !(*a >= ALPHA_FLOOR) || !a.is_finite()) {
            return Ok(f64::NEG_INFINITY);
        }
        total += log_pdf_unchecked(y.as_slice(), &alpha);
    }
    Ok(total)
}

/// Unnormalized log posterior `log p(params) + sum_t log p(Y_t | params)`
/// on the constrained scale (no Jacobian).
pub fn log_posterior(spec: &ModelSpec, params: &ParamSet, cov: &CovariateSet, data: &Dataset) -> Result<f64> {
    let lp = log_prior(spec, params);
    if lp == f64::NEG_INFINITY {
        return Ok(lp);
    }
    Ok(lp + log_likelihood(spec, params, cov, data)?)
}

/// Gradient of the log posterior in unconstrained coordinates, Jacobian
/// terms included. Ordered as [`Layout`].
pub fn grad_log_posterior(spec: &ModelSpec, params: &ParamSet, cov: &CovariateSet, data: &Dataset) -> Result<Vec<f64>> {
    let post = Posterior::new(spec, cov, data)?;
    let theta = post.layout().unconstrain(spec, params)?;
    let mut grad = vec![0.0; theta.len()];
    let lp = post.log_density_grad(&theta, &mut grad);
    if !lp.is_finite() {
        return Err(Error::domain("log posterior is not finite at these parameters"));
    }
    Ok(grad)
}

/// Log posterior density over the unconstrained parameter vector, with an
/// analytic gradient.
#[derive(Debug, Clone)]
pub struct Posterior<'a> {
    spec: &'a ModelSpec,
    cov: &'a CovariateSet,
    data: &'a Dataset,
    layout: Layout,
    radius_sd: Option<f64>,
}

struct Scratch {
    drift: Vec<f64>,
    resid: Vec<f64>,
    g_eta: Vec<f64>,
    gate: Vec<f64>,
    gate_dtau: Vec<f64>,
    gate_dkappa: Vec<f64>,
    g_log_lambda: Vec<f64>,
}

impl<'a> Posterior<'a> {
    pub fn new(spec: &'a ModelSpec, cov: &'a CovariateSet, data: &'a Dataset) -> Result<Self> {
        check_inputs(spec, cov, data)?;
        Ok(Posterior {
            spec,
            cov,
            data,
            layout: Layout::new(spec),
            radius_sd: None,
        })
    }

    /// Replaces the standard normal density on `v_raw` by one on its norm,
    /// `N(|v_raw|; 1, sd)`.
    ///
    /// The likelihood sees `v_raw` only through its direction and both
    /// densities are isotropic, so the posterior of every model quantity is
    /// unchanged. Keeping the norm near one avoids the region near the
    /// origin where the direction, and hence the curvature, changes
    /// abruptly.
    pub fn with_radius_sd(mut self, sd: f64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite()) {
            return Err(Error::Config(format!("radius sd {sd} must be positive")));
        }
        self.radius_sd = Some(sd);
        Ok(self)
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn spec(&self) -> &ModelSpec {
        self.spec
    }

    pub fn dim(&self) -> usize {
        self.layout.len()
    }

    /// Log density in unconstrained coordinates, Jacobian included.
    pub fn log_density(&self, theta: &[f64]) -> f64 {
        let mut grad = vec![0.0; theta.len()];
        self.log_density_grad(theta, &mut grad)
    }

    /// Log density and its gradient. Returns `-inf` (gradient zeroed)
    /// outside the support or when a concentration underflows.
    pub fn log_density_grad(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        assert_eq!(theta.len(), self.layout.len());
        assert_eq!(grad.len(), theta.len());
        grad.iter_mut().for_each(|g| *g = 0.0);
        let lp = self.eval(theta, grad);
        if !lp.is_finite() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            return f64::NEG_INFINITY;
        }
        lp
    }

    fn eval(&self, theta: &[f64], grad: &mut [f64]) -> f64 {
        let spec = self.spec;
        let pr = &spec.priors;
        let lay = &self.layout;
        let dim = spec.dim();
        let parts = spec.parts;
        let k_mean = spec.k_mean;
        let n = self.data.len();
        let ell = spec.ell();

        let b = &theta[lay.b.clone()];
        let coef = &theta[lay.coef.clone()];
        let gamma = &theta[lay.gamma.clone()];
        let mut ar = vec![0.0; dim];
        let mut ma = vec![0.0; dim];
        let mut lp = 0.0;

        // Priors and Jacobians, with their gradients.
        for (i, x) in b.iter().enumerate() {
            lp += normal_lpdf(*x, 0.0, pr.b_sd);
            grad[lay.b.start + i] -= x / (pr.b_sd * pr.b_sd);
        }
        for (i, x) in coef.iter().enumerate() {
            lp += normal_lpdf(*x, 0.0, pr.coef_sd);
            grad[lay.coef.start + i] -= x / (pr.coef_sd * pr.coef_sd);
        }
        for (i, x) in gamma.iter().enumerate() {
            lp += normal_lpdf(*x, 0.0, pr.gamma_sd);
            grad[lay.gamma.start + i] -= x / (pr.gamma_sd * pr.gamma_sd);
        }
        let uniform = -(2.0 * super::ARMA_BOUND).ln();
        for (block, out) in [(&lay.ar, &mut ar), (&lay.ma, &mut ma)] {
            for (i, o) in out.iter_mut().enumerate() {
                let u = theta[block.start + i];
                if !u.is_finite() {
                    return f64::NEG_INFINITY;
                }
                *o = bounded_from_real(u);
                let (lj, dlj) = bounded_log_jacobian(u);
                lp += uniform + lj;
                grad[block.start + i] += dlj;
            }
        }

        // Intervention block: (delta, tau, kappa, unit direction, r, delta_phi).
        struct Shift {
            delta: f64,
            tau: f64,
            kappa: f64,
            unit: Vec<f64>,
            norm: f64,
            delta_phi: f64,
        }
        let shift = match (lay.intervention, &lay.v_raw, lay.delta_phi) {
            (Some(i), Some(vr), Some(ip)) => {
                let delta = theta[i];
                let tau = theta[i + 1];
                let log_kappa = theta[i + 2];
                let v_raw = &theta[vr.clone()];
                let delta_phi = theta[ip];
                lp += normal_lpdf(delta, 0.0, pr.delta_sd);
                grad[i] -= delta / (pr.delta_sd * pr.delta_sd);
                let tau_mean = ell + pr.tau_offset;
                lp += normal_lpdf(tau, tau_mean, pr.tau_sd);
                grad[i + 1] -= (tau - tau_mean) / (pr.tau_sd * pr.tau_sd);
                // lognormal prior on kappa plus the log-Jacobian of exp
                lp += normal_lpdf(log_kappa, pr.kappa_log_mean, pr.kappa_log_sd);
                grad[i + 2] -= (log_kappa - pr.kappa_log_mean) / (pr.kappa_log_sd * pr.kappa_log_sd);
                let norm = v_raw.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(norm > 0.0) {
                    return f64::NEG_INFINITY;
                }
                match self.radius_sd {
                    None => {
                        for (j, r) in v_raw.iter().enumerate() {
                            lp += normal_lpdf(*r, 0.0, 1.0);
                            grad[vr.start + j] -= r;
                        }
                    }
                    Some(sd) => {
                        lp += normal_lpdf(norm, 1.0, sd);
                        let g = -(norm - 1.0) / (sd * sd * norm);
                        for (j, r) in v_raw.iter().enumerate() {
                            grad[vr.start + j] += g * r;
                        }
                    }
                }
                lp += normal_lpdf(delta_phi, 0.0, pr.delta_phi_sd);
                grad[ip] -= delta_phi / (pr.delta_phi_sd * pr.delta_phi_sd);
                Some(Shift {
                    delta,
                    tau,
                    kappa: log_kappa.exp(),
                    unit: v_raw.iter().map(|v| v / norm).collect(),
                    norm,
                    delta_phi,
                })
            }
            _ => None,
        };
        let beta = lay.beta.as_ref().map(|r| &theta[r.clone()]);
        if let (Some(beta), Some(r)) = (beta, &lay.beta) {
            for (j, x) in beta.iter().enumerate() {
                lp += normal_lpdf(*x, 0.0, pr.beta_covid_sd);
                grad[r.start + j] -= x / (pr.beta_covid_sd * pr.beta_covid_sd);
            }
        }
        if n == 0 {
            return lp;
        }

        // Forward pass.
        let mut s = Scratch {
            drift: vec![0.0; n * dim],
            resid: vec![0.0; n * dim],
            g_eta: vec![0.0; n * dim],
            gate: vec![0.0; n],
            gate_dtau: vec![0.0; n],
            gate_dkappa: vec![0.0; n],
            g_log_lambda: vec![0.0; n],
        };
        let basis = &self.data.basis;
        let mut eta = vec![0.0; dim];
        let mut mu = vec![0.0; parts];
        let mut g_s = vec![0.0; parts];
        for t in 0..n {
            let time = (t + 1) as f64;
            let x = self.cov.mean.row(t);
            let drift = &mut s.drift[t * dim..(t + 1) * dim];
            for (d, o) in drift.iter_mut().enumerate() {
                let row = &coef[d * k_mean..(d + 1) * k_mean];
                *o = b[d] + row.iter().zip(x).map(|(c, xk)| c * xk).sum::<f64>();
            }
            let mut log_lambda: f64 = gamma.iter().zip(self.cov.prec.row(t)).map(|(g, x)| g * x).sum();
            if let Some(sh) = &shift {
                let (w, dtau, dkappa) = gate_with_grad(time, sh.tau, sh.kappa, ell);
                s.gate[t] = w;
                s.gate_dtau[t] = dtau;
                s.gate_dkappa[t] = dkappa;
                let amp = sh.delta * w;
                for (o, u) in drift.iter_mut().zip(&sh.unit) {
                    *o += amp * u;
                }
                log_lambda += sh.delta_phi * w;
            }
            if let Some(beta) = beta {
                if time > ell {
                    for (o, bd) in drift.iter_mut().zip(beta) {
                        *o += bd;
                    }
                }
            }
            let z_t = self.data.z.row(t);
            for d in 0..dim {
                let mut e = s.drift[t * dim + d];
                if t > 0 {
                    let prev = (t - 1) * dim + d;
                    e += ar[d] * (self.data.z.row(t - 1)[d] - s.drift[prev]) + ma[d] * s.resid[prev];
                }
                eta[d] = e;
                s.resid[t * dim + d] = z_t[d] - e;
            }
            simplex::ilr_inv_into(&eta, basis, &mut mu);
            let lambda = log_lambda.exp();
            let log_y = self.data.log_y_row(t);

            // log Gamma(lambda) - sum log Gamma(alpha_j) + sum (alpha_j - 1) log y_j
            let mut ll = ln_gamma(lambda);
            let mut d_lambda = digamma(lambda);
            let mut weighted = 0.0;
            for j in 0..parts {
                let alpha = lambda * mu[j];
                if !(alpha >= ALPHA_FLOOR) || !alpha.is_finite() {
                    return f64::NEG_INFINITY;
                }
                ll += (alpha - 1.0) * log_y[j] - ln_gamma(alpha);
                let score = log_y[j] - digamma(alpha);
                // d ll / d mu_j
                g_s[j] = lambda * score;
                d_lambda += mu[j] * score;
                weighted += mu[j] * g_s[j];
            }
            lp += ll;
            s.g_log_lambda[t] = lambda * d_lambda;
            // softmax Jacobian: d ll / d s_k = mu_k (g_k - sum_j mu_j g_j)
            for j in 0..parts {
                g_s[j] = mu[j] * (g_s[j] - weighted);
            }
            basis.apply_transpose(&g_s, &mut s.g_eta[t * dim..(t + 1) * dim]);
        }

        // Reverse pass. `acc` holds dL/d eta_{t+1} while visiting t.
        let mut acc = vec![0.0; dim];
        let mut g_ar = vec![0.0; dim];
        let mut g_ma = vec![0.0; dim];
        let mut g_drift = vec![0.0; dim];
        let mut g_unit = vec![0.0; dim];
        let (mut g_delta, mut g_tau, mut g_kappa, mut g_delta_phi) = (0.0, 0.0, 0.0, 0.0);
        for t in (0..n).rev() {
            let time = (t + 1) as f64;
            for d in 0..dim {
                // total derivative through eta_t, including eta_{t+1} via -Theta e_t
                let g = s.g_eta[t * dim + d] - ma[d] * acc[d];
                g_drift[d] = g - ar[d] * acc[d];
                if t > 0 {
                    let prev = (t - 1) * dim + d;
                    g_ar[d] += g * (self.data.z.row(t - 1)[d] - s.drift[prev]);
                    g_ma[d] += g * s.resid[prev];
                }
                acc[d] = g;
            }
            let x = self.cov.mean.row(t);
            for d in 0..dim {
                grad[lay.b.start + d] += g_drift[d];
                for k in 0..k_mean {
                    grad[lay.coef.start + d * k_mean + k] += g_drift[d] * x[k];
                }
            }
            let gl = s.g_log_lambda[t];
            for (k, xk) in self.cov.prec.row(t).iter().enumerate() {
                grad[lay.gamma.start + k] += gl * xk;
            }
            if let Some(sh) = &shift {
                let w = s.gate[t];
                if w != 0.0 || s.gate_dtau[t] != 0.0 || s.gate_dkappa[t] != 0.0 {
                    let proj: f64 = g_drift.iter().zip(&sh.unit).map(|(g, u)| g * u).sum();
                    g_delta += w * proj;
                    for (gu, gd) in g_unit.iter_mut().zip(&g_drift) {
                        *gu += sh.delta * w * gd;
                    }
                    g_delta_phi += gl * w;
                    let g_w = sh.delta * proj + sh.delta_phi * gl;
                    g_tau += g_w * s.gate_dtau[t];
                    g_kappa += g_w * s.gate_dkappa[t];
                }
            }
            if let (Some(_), Some(r)) = (beta, &lay.beta) {
                if time > ell {
                    for d in 0..dim {
                        grad[r.start + d] += g_drift[d];
                    }
                }
            }
        }
        for d in 0..dim {
            let u_ar = theta[lay.ar.start + d];
            let u_ma = theta[lay.ma.start + d];
            grad[lay.ar.start + d] += g_ar[d] * bounded_jacobian(u_ar);
            grad[lay.ma.start + d] += g_ma[d] * bounded_jacobian(u_ma);
        }
        if let (Some(sh), Some(i), Some(vr), Some(ip)) = (&shift, lay.intervention, &lay.v_raw, lay.delta_phi) {
            grad[i] += g_delta;
            grad[i + 1] += g_tau;
            grad[i + 2] += g_kappa * sh.kappa;
            grad[ip] += g_delta_phi;
            // u = r / |r|: du/dr = (I - u u^T) / |r|
            let proj: f64 = g_unit.iter().zip(&sh.unit).map(|(g, u)| g * u).sum();
            for d in 0..dim {
                grad[vr.start + d] += (g_unit[d] - sh.unit[d] * proj) / sh.norm;
            }
        }
        lp
    }
}

#[inline]
fn bounded_jacobian(u: f64) -> f64 {
    let s = 1.0 / (1.0 + (-u).exp());
    2.0 * super::ARMA_BOUND * s * (1.0 - s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Matrix, Variant};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_data(rng: &mut ChaCha8Rng, parts: usize, n: usize) -> Dataset {
        let y = (0..n)
            .map(|_| {
                let raw: Vec<f64> = (0..parts).map(|_| 0.05 + rng.random::<f64>()).collect();
                Composition::from_positive(&raw).unwrap()
            })
            .collect();
        Dataset::with_helmert(y, parts).unwrap()
    }

    fn trend_covariates(n: usize) -> CovariateSet {
        let x: Vec<f64> = (1..=n).map(|t| t as f64 / n as f64).collect();
        CovariateSet::new(Matrix::new(n, 1, x).unwrap(), Matrix::new(n, 1, vec![1.0; n]).unwrap()).unwrap()
    }

    #[test]
    fn unconstrained_density_adds_jacobian() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = random_data(&mut rng, 4, 20);
        let cov = trend_covariates(20);
        for variant in [Variant::Baseline, Variant::FixedEffect, Variant::Intervention] {
            let spec = ModelSpec::new(variant, 4, 1, 1, Some(12)).unwrap();
            let post = Posterior::new(&spec, &cov, &data).unwrap();
            let theta: Vec<f64> = (0..post.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let (params, log_jac) = post.layout().constrain(&theta).unwrap();
            let direct = log_posterior(&spec, &params, &cov, &data).unwrap();
            assert_abs_diff_eq!(post.log_density(&theta), direct + log_jac, epsilon = 1e-9);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 24;
        let data = random_data(&mut rng, 5, n);
        let cov = trend_covariates(n);
        for variant in [Variant::Baseline, Variant::FixedEffect, Variant::Intervention] {
            let spec = ModelSpec::new(variant, 5, 1, 1, Some(12)).unwrap();
            let plain = Posterior::new(&spec, &cov, &data).unwrap();
            for (post, _) in [plain.clone(), plain.with_radius_sd(0.3).unwrap()].iter().flat_map(|p| (0..3).map(move |i| (p, i))) {
                let mut theta: Vec<f64> = (0..post.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                if let Some(i) = post.layout().intervention {
                    theta[i + 1] = 12.0 + rng.random_range(0.0..6.0);
                }
                let mut grad = vec![0.0; theta.len()];
                post.log_density_grad(&theta, &mut grad);
                let h = 1e-5;
                for k in 0..theta.len() {
                    let mut up = theta.clone();
                    let mut down = theta.clone();
                    up[k] += h;
                    down[k] -= h;
                    let fd = (post.log_density(&up) - post.log_density(&down)) / (2.0 * h);
                    let tol = 1e-4 * fd.abs().max(grad[k].abs()) + 1e-6 * (1.0 + fd.abs());
                    assert!((fd - grad[k]).abs() <= tol.max(1e-6), "{variant} coord {k}: {} vs {fd}", grad[k]);
                }
            }
        }
    }

    #[test]
    fn likelihood_matches_direct_dirichlet_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let data = random_data(&mut rng, 4, 6);
        let cov = trend_covariates(6);
        let spec = ModelSpec::new(Variant::Baseline, 4, 1, 1, None).unwrap();
        let mut p = ParamSet::zeros(&spec);
        p.b = vec![0.2, -0.1, 0.3];
        p.coef = vec![0.5, 0.0, -0.4];
        p.gamma = vec![3.0];
        // without dynamics each mean is the softmax of the drift
        let basis = ContrastMatrix::helmert(4).unwrap();
        let mut expected = 0.0;
        for t in 0..6 {
            let x = (t + 1) as f64 / 6.0;
            let eta: Vec<f64> = (0..3).map(|d| p.b[d] + p.coef[d] * x).collect();
            let mu = simplex::ilr_inv(&crate::simplex::IlrVector::new(eta).unwrap(), &basis).unwrap();
            let alpha: Vec<f64> = mu.as_slice().iter().map(|m| 3f64.exp() * m).collect();
            expected += super::super::dirichlet_log_pdf(&data.y[t], &alpha).unwrap();
        }
        let got = log_likelihood(&spec, &p, &cov, &data).unwrap();
        assert_abs_diff_eq!(got, expected, epsilon = 1e-10);
    }

    #[test]
    fn reflected_direction_gives_identical_density() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let data = random_data(&mut rng, 4, 20);
        let cov = trend_covariates(20);
        let spec = ModelSpec::new(Variant::Intervention, 4, 1, 1, Some(10)).unwrap();
        let mut p = ParamSet::zeros(&spec);
        p.ar = vec![0.3, -0.2, 0.1];
        let iv = p.intervention.as_mut().unwrap();
        iv.delta = 0.8;
        iv.tau = 12.5;
        iv.v_raw = vec![0.3, -1.1, 0.4];
        let mut q = p.clone();
        let iq = q.intervention.as_mut().unwrap();
        iq.delta = -0.8;
        iq.v_raw = vec![-0.3, 1.1, -0.4];
        assert_eq!(
            log_likelihood(&spec, &p, &cov, &data).unwrap(),
            log_likelihood(&spec, &q, &cov, &data).unwrap()
        );
    }

    #[test]
    fn empty_series_is_prior_only() {
        let spec = ModelSpec::new(Variant::Intervention, 4, 1, 1, Some(12)).unwrap();
        let data = Dataset::with_helmert(vec![], 4).unwrap();
        let cov = trend_covariates(0);
        let p = ParamSet::zeros(&spec);
        assert_eq!(log_posterior(&spec, &p, &cov, &data).unwrap(), log_prior(&spec, &p));
    }

    #[test]
    fn baseline_gradient_has_no_intervention_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let data = random_data(&mut rng, 4, 10);
        let cov = trend_covariates(10);
        let spec = ModelSpec::new(Variant::Baseline, 4, 1, 1, None).unwrap();
        let g = grad_log_posterior(&spec, &ParamSet::zeros(&spec), &cov, &data).unwrap();
        assert_eq!(g.len(), 4 * 3 + 1);
    }
}
