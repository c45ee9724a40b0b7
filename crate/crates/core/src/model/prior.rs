use serde::{Deserialize, Serialize};

use super::params::ARMA_BOUND;
use super::{ModelSpec, ParamSet};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Hyperparameters of the weakly informative priors.
///
/// AR/MA diagonals are uniform on `(-0.99, 0.99)` and raw direction entries
/// are standard normal; both are fixed. Everything else can be overridden.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Priors {
    pub b_sd: f64,
    pub coef_sd: f64,
    pub gamma_sd: f64,
    pub delta_sd: f64,
    /// Prior mean of `tau` is `ell + tau_offset`.
    pub tau_offset: f64,
    pub tau_sd: f64,
    pub kappa_log_mean: f64,
    pub kappa_log_sd: f64,
    pub delta_phi_sd: f64,
    pub beta_covid_sd: f64,
}

impl Default for Priors {
    fn default() -> Self {
        Priors {
            b_sd: 2.5,
            coef_sd: 1.0,
            gamma_sd: 1.0,
            delta_sd: 1.5,
            tau_offset: 2.0,
            tau_sd: 4.0,
            kappa_log_mean: -0.5,
            kappa_log_sd: 1.0,
            delta_phi_sd: 0.5,
            beta_covid_sd: 1.0,
        }
    }
}

impl Priors {
    pub fn is_valid(&self) -> bool {
        [
            self.b_sd,
            self.coef_sd,
            self.gamma_sd,
            self.delta_sd,
            self.tau_sd,
            self.kappa_log_sd,
            self.delta_phi_sd,
            self.beta_covid_sd,
        ]
        .iter()
        .all(|s| *s > 0.0 && s.is_finite())
            && self.tau_offset.is_finite()
            && self.kappa_log_mean.is_finite()
    }
}

#[inline]
pub(crate) fn normal_lpdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - LN_SQRT_2PI
}

fn normal_sum(xs: &[f64], sd: f64) -> f64 {
    xs.iter().map(|x| normal_lpdf(*x, 0.0, sd)).sum()
}

/// Log prior density; `-inf` when AR/MA or `kappa` leave their support.
pub fn log_prior(spec: &ModelSpec, params: &ParamSet) -> f64 {
    let pr = &spec.priors;
    let uniform = -(2.0 * ARMA_BOUND).ln();
    let mut lp = normal_sum(&params.b, pr.b_sd)
        + normal_sum(&params.coef, pr.coef_sd)
        + normal_sum(&params.gamma, pr.gamma_sd);
    for x in params.ar.iter().chain(&params.ma) {
        if x.abs() >= ARMA_BOUND || x.is_nan() {
            return f64::NEG_INFINITY;
        }
        lp += uniform;
    }
    if let Some(iv) = &params.intervention {
        if !(iv.kappa > 0.0) {
            return f64::NEG_INFINITY;
        }
        let log_kappa = iv.kappa.ln();
        lp += normal_lpdf(iv.delta, 0.0, pr.delta_sd)
            + normal_lpdf(iv.tau, spec.ell() + pr.tau_offset, pr.tau_sd)
            + normal_lpdf(log_kappa, pr.kappa_log_mean, pr.kappa_log_sd)
            - log_kappa
            + normal_sum(&iv.v_raw, 1.0)
            + normal_lpdf(iv.delta_phi, 0.0, pr.delta_phi_sd);
    }
    if let Some(beta) = &params.beta_covid {
        lp += normal_sum(beta, pr.beta_covid_sd);
    }
    lp
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Variant;
    use approx::assert_abs_diff_eq;

    fn spec() -> ModelSpec {
        ModelSpec::new(Variant::Intervention, 3, 0, 1, Some(10)).unwrap()
    }

    // Contribution of one parameter: difference of log priors when only it moves.
    fn contribution(mut f: impl FnMut(&mut ParamSet), base: &ParamSet) -> f64 {
        let s = spec();
        let mut p = base.clone();
        f(&mut p);
        log_prior(&s, &p) - log_prior(&s, base)
    }

    #[test]
    fn single_term_values() {
        // Delta = 0: -ln(1.5 sqrt(2 pi))
        assert_abs_diff_eq!(normal_lpdf(0.0, 0.0, 1.5), -1.324403641312837, epsilon = 1e-12);

        // kappa = exp(-0.5): lognormal density at its log-mean
        let s = spec();
        let mut p = ParamSet::zeros(&s);
        p.intervention.as_mut().unwrap().kappa = (-0.5f64).exp();
        let mut q = p.clone();
        q.intervention.as_mut().unwrap().kappa = 1.0;
        let lognormal_at = |x: f64| -x.ln() - (2.0 * std::f64::consts::PI).sqrt().ln() - (x.ln() + 0.5).powi(2) / 2.0;
        assert_abs_diff_eq!(
            log_prior(&s, &p) - log_prior(&s, &q),
            lognormal_at((-0.5f64).exp()) - lognormal_at(1.0),
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(lognormal_at((-0.5f64).exp()), -0.41893853320467267, epsilon = 1e-12);
    }

    #[test]
    fn uniform_arma_terms() {
        let s = ModelSpec::new(Variant::Baseline, 3, 0, 1, None).unwrap();
        let p = ParamSet::zeros(&s);
        // two intercepts, one gamma, and four uniform AR/MA terms
        let expected = 2.0 * normal_lpdf(0.0, 0.0, 2.5) + normal_lpdf(0.0, 0.0, 1.0) - 4.0 * 1.98f64.ln();
        assert_abs_diff_eq!(log_prior(&s, &p), expected, epsilon = 1e-12);
        // moving an AR entry inside the support does not change the density
        let moved = contribution(|p| p.ar[0] = 0.5, &ParamSet::zeros(&spec()));
        assert_eq!(moved, 0.0);
    }

    #[test]
    fn out_of_support_is_negative_infinity() {
        let s = spec();
        let mut p = ParamSet::zeros(&s);
        p.ma[1] = -0.995;
        assert_eq!(log_prior(&s, &p), f64::NEG_INFINITY);
        let mut p = ParamSet::zeros(&s);
        p.intervention.as_mut().unwrap().kappa = 0.0;
        assert_eq!(log_prior(&s, &p), f64::NEG_INFINITY);
    }
}
