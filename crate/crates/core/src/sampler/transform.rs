//! Support transforms between [`ParamSet`] and the unconstrained vector the
//! sampler moves in.
//!
//! Coordinates follow [`crate::model::param_names`] order. `kappa` is
//! stored as `log kappa`, AR/MA entries through the scaled logit
//! `x = 0.99 (2 sigmoid(u) - 1)`, and everything else is the identity.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::model::{Intervention, ModelSpec, ParamSet, Variant, ARMA_BOUND};

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Scaled logit inverse onto `(-0.99, 0.99)`.
#[inline]
pub fn bounded_from_real(u: f64) -> f64 {
    ARMA_BOUND * (0.5 * u).tanh()
}

/// Scaled logit onto the real line.
#[inline]
pub fn real_from_bounded(x: f64) -> f64 {
    ((ARMA_BOUND + x) / (ARMA_BOUND - x)).ln()
}

/// `log |dx/du|` of [`bounded_from_real`] and its derivative in `u`.
#[inline]
pub(crate) fn bounded_log_jacobian(u: f64) -> (f64, f64) {
    let lj = (2.0 * ARMA_BOUND).ln() - softplus(u) - softplus(-u);
    let s = 1.0 / (1.0 + (-u).exp());
    (lj, 1.0 - 2.0 * s)
}

/// Offsets of each parameter block in the unconstrained vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub b: Range<usize>,
    pub coef: Range<usize>,
    pub ar: Range<usize>,
    pub ma: Range<usize>,
    pub gamma: Range<usize>,
    /// `Delta`, `tau`, `log kappa` at `start`, `start + 1`, `start + 2`.
    pub intervention: Option<usize>,
    pub v_raw: Option<Range<usize>>,
    pub delta_phi: Option<usize>,
    pub beta: Option<Range<usize>>,
    len: usize,
}

impl Layout {
    pub fn new(spec: &ModelSpec) -> Self {
        let d = spec.dim();
        let mut at = 0;
        let mut block = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let b = block(d);
        let coef = block(d * spec.k_mean);
        let ar = block(d);
        let ma = block(d);
        let gamma = block(spec.k_prec);
        let (mut intervention, mut v_raw, mut delta_phi, mut beta) = (None, None, None, None);
        match spec.variant {
            Variant::Baseline => {}
            Variant::Intervention => {
                intervention = Some(block(3).start);
                v_raw = Some(block(d));
                delta_phi = Some(block(1).start);
            }
            Variant::FixedEffect => beta = Some(block(d)),
        }
        Layout {
            b,
            coef,
            ar,
            ma,
            gamma,
            intervention,
            v_raw,
            delta_phi,
            beta,
            len: at,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Maps an unconstrained vector to parameters, returning the log
    /// absolute Jacobian determinant of the map.
    pub fn constrain(&self, theta: &[f64]) -> Result<(ParamSet, f64)> {
        Error::check_dim(self.len, theta.len())?;
        let mut log_jac = 0.0;
        let mut bounded = |r: &Range<usize>| -> Vec<f64> {
            theta[r.clone()]
                .iter()
                .map(|u| {
                    log_jac += bounded_log_jacobian(*u).0;
                    bounded_from_real(*u)
                })
                .collect()
        };
        let ar = bounded(&self.ar);
        let ma = bounded(&self.ma);
        let intervention = self.intervention.map(|i| {
            log_jac += theta[i + 2];
            Intervention {
                delta: theta[i],
                tau: theta[i + 1],
                kappa: theta[i + 2].exp(),
                v_raw: theta[self.v_raw.clone().expect("v block")].to_vec(),
                delta_phi: theta[self.delta_phi.expect("delta_phi")],
            }
        });
        let params = ParamSet {
            b: theta[self.b.clone()].to_vec(),
            coef: theta[self.coef.clone()].to_vec(),
            ar,
            ma,
            gamma: theta[self.gamma.clone()].to_vec(),
            intervention,
            beta_covid: self.beta.clone().map(|r| theta[r].to_vec()),
        };
        Ok((params, log_jac))
    }

    /// Inverse of [`Layout::constrain`]. Fails outside the support.
    pub fn unconstrain(&self, spec: &ModelSpec, params: &ParamSet) -> Result<Vec<f64>> {
        params.validate(spec)?;
        let mut theta = vec![0.0; self.len];
        theta[self.b.clone()].copy_from_slice(&params.b);
        theta[self.coef.clone()].copy_from_slice(&params.coef);
        for (t, x) in theta[self.ar.clone()].iter_mut().zip(&params.ar) {
            *t = real_from_bounded(*x);
        }
        for (t, x) in theta[self.ma.clone()].iter_mut().zip(&params.ma) {
            *t = real_from_bounded(*x);
        }
        theta[self.gamma.clone()].copy_from_slice(&params.gamma);
        if let (Some(i), Some(iv)) = (self.intervention, &params.intervention) {
            theta[i] = iv.delta;
            theta[i + 1] = iv.tau;
            theta[i + 2] = iv.kappa.ln();
            theta[self.v_raw.clone().expect("v block")].copy_from_slice(&iv.v_raw);
            theta[self.delta_phi.expect("delta_phi")] = iv.delta_phi;
        }
        if let (Some(r), Some(beta)) = (&self.beta, &params.beta_covid) {
            theta[r.clone()].copy_from_slice(beta);
        }
        Ok(theta)
    }
}
