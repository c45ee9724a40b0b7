use serde::{Deserialize, Serialize};

use super::{ModelSpec, Variant};
use crate::error::{Error, Result};

/// Bound on the AR and MA diagonal entries.
pub const ARMA_BOUND: f64 = 0.99;

/// Intervention block: amplitude, gate location and speed, raw direction,
/// and precision shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervention {
    pub delta: f64,
    pub tau: f64,
    pub kappa: f64,
    pub v_raw: Vec<f64>,
    pub delta_phi: f64,
}

impl Intervention {
    /// Canonical pair `(v, delta)` with
    /// `|v| = 1` and `v_1 >= 0`. The shift `delta * v` is unchanged.
    pub fn canonical(&self) -> (Vec<f64>, f64) {
        let norm = self.v_raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if self.v_raw[0] < 0.0 {
            (self.v_raw.iter().map(|v| -v / norm).collect(), -self.delta)
        } else {
            (self.v_raw.iter().map(|v| v / norm).collect(), self.delta)
        }
    }

    pub(crate) fn unit(&self) -> Vec<f64> {
        let norm = self.v_raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.v_raw.iter().map(|v| v / norm).collect()
    }
}

/// All free parameters of a model.
///
/// `coef` is the `(C-1) x K_mean` matrix `B` in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub b: Vec<f64>,
    pub coef: Vec<f64>,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
    pub gamma: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervention: Option<Intervention>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_covid: Option<Vec<f64>>,
}

impl ParamSet {
    /// All-zero coefficients with unit speed and a first-axis direction.
    pub fn zeros(spec: &ModelSpec) -> Self {
        let d = spec.dim();
        let mut v_raw = vec![0.0; d];
        v_raw[0] = 1.0;
        ParamSet {
            b: vec![0.0; d],
            coef: vec![0.0; d * spec.k_mean],
            ar: vec![0.0; d],
            ma: vec![0.0; d],
            gamma: vec![0.0; spec.k_prec],
            intervention: (spec.variant == Variant::Intervention).then(|| Intervention {
                delta: 0.0,
                tau: spec.ell() + 2.0,
                kappa: 1.0,
                v_raw,
                delta_phi: 0.0,
            }),
            beta_covid: (spec.variant == Variant::FixedEffect).then(|| vec![0.0; d]),
        }
    }

    /// Checks shapes against `spec` and that every parameter is in support.
    pub fn validate(&self, spec: &ModelSpec) -> Result<()> {
        let d = spec.dim();
        Error::check_dim(d, self.b.len())?;
        Error::check_dim(d * spec.k_mean, self.coef.len())?;
        Error::check_dim(d, self.ar.len())?;
        Error::check_dim(d, self.ma.len())?;
        Error::check_dim(spec.k_prec, self.gamma.len())?;
        let finite = |xs: &[f64]| xs.iter().all(|x| x.is_finite());
        if !(finite(&self.b) && finite(&self.coef) && finite(&self.gamma)) {
            return Err(Error::NonFinite("regression coefficients".into()));
        }
        for (name, xs) in [("AR", &self.ar), ("MA", &self.ma)] {
            if let Some(x) = xs.iter().find(|x| !(x.abs() < ARMA_BOUND)) {
                return Err(Error::domain(format!(
                    "{name} coefficient {x} outside (-{ARMA_BOUND}, {ARMA_BOUND})"
                )));
            }
        }
        match (spec.variant, &self.intervention, &self.beta_covid) {
            (Variant::Baseline, None, None) => Ok(()),
            (Variant::FixedEffect, None, Some(beta)) => {
                Error::check_dim(d, beta.len())?;
                if !finite(beta) {
                    return Err(Error::NonFinite("beta_covid".into()));
                }
                Ok(())
            }
            (Variant::Intervention, Some(iv), None) => {
                Error::check_dim(d, iv.v_raw.len())?;
                if !(iv.kappa > 0.0 && iv.kappa.is_finite()) {
                    return Err(Error::domain(format!("kappa must be positive, got {}", iv.kappa)));
                }
                if !(iv.delta.is_finite() && iv.tau.is_finite() && iv.delta_phi.is_finite()) {
                    return Err(Error::NonFinite("intervention parameters".into()));
                }
                let norm2: f64 = iv.v_raw.iter().map(|v| v * v).sum();
                if !(norm2 > 0.0 && norm2.is_finite()) {
                    return Err(Error::domain("direction vector must be nonzero"));
                }
                Ok(())
            }
            (variant, _, _) => Err(Error::Spec(format!(
                "parameter blocks do not match the {variant} variant"
            ))),
        }
    }

    /// Replaces the raw direction and amplitude by their canonical pair.
    pub fn canonicalized(&self) -> ParamSet {
        let mut out = self.clone();
        if let Some(iv) = out.intervention.as_mut() {
            let (v, delta) = iv.canonical();
            iv.v_raw = v;
            iv.delta = delta;
        }
        out
    }
}

/// Column names of the constrained parameter vector, in the order used by
/// [`ParamSet::to_flat`].
pub fn param_names(spec: &ModelSpec) -> Vec<String> {
    let d = spec.dim();
    let mut names = Vec::new();
    names.extend((1..=d).map(|i| format!("b[{i}]")));
    for i in 1..=d {
        names.extend((1..=spec.k_mean).map(|k| format!("B[{i},{k}]")));
    }
    names.extend((1..=d).map(|i| format!("A[{i}]")));
    names.extend((1..=d).map(|i| format!("Theta[{i}]")));
    names.extend((1..=spec.k_prec).map(|k| format!("gamma[{k}]")));
    match spec.variant {
        Variant::Baseline => {}
        Variant::Intervention => {
            names.extend(["Delta".to_string(), "tau".into(), "kappa".into()]);
            names.extend((1..=d).map(|i| format!("v[{i}]")));
            names.push("delta_phi".into());
        }
        Variant::FixedEffect => names.extend((1..=d).map(|i| format!("beta_covid[{i}]"))),
    }
    names
}

impl ParamSet {
    /// Flattens in [`param_names`] order.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        out.extend(&self.b);
        out.extend(&self.coef);
        out.extend(&self.ar);
        out.extend(&self.ma);
        out.extend(&self.gamma);
        if let Some(iv) = &self.intervention {
            out.extend([iv.delta, iv.tau, iv.kappa]);
            out.extend(&iv.v_raw);
            out.push(iv.delta_phi);
        }
        if let Some(beta) = &self.beta_covid {
            out.extend(beta);
        }
        out
    }

    /// Inverse of [`ParamSet::to_flat`]; validates the result.
    pub fn from_flat(spec: &ModelSpec, flat: &[f64]) -> Result<Self> {
        let d = spec.dim();
        let expected = param_names(spec).len();
        Error::check_dim(expected, flat.len())?;
        let mut rest = flat;
        let mut take = |n: usize| {
            let (head, tail) = rest.split_at(n);
            rest = tail;
            head.to_vec()
        };
        let b = take(d);
        let coef = take(d * spec.k_mean);
        let ar = take(d);
        let ma = take(d);
        let gamma = take(spec.k_prec);
        let mut p = ParamSet {
            b,
            coef,
            ar,
            ma,
            gamma,
            intervention: None,
            beta_covid: None,
        };
        match spec.variant {
            Variant::Baseline => {}
            Variant::Intervention => {
                let head = take(3);
                let v_raw = take(d);
                let delta_phi = take(1)[0];
                p.intervention = Some(Intervention {
                    delta: head[0],
                    tau: head[1],
                    kappa: head[2],
                    v_raw,
                    delta_phi,
                });
            }
            Variant::FixedEffect => p.beta_covid = Some(take(d)),
        }
        p.validate(spec)?;
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation_and_canonical_form() {
        let spec = ModelSpec::new(Variant::Intervention, 4, 1, 1, Some(10)).unwrap();
        let mut p = ParamSet::zeros(&spec);
        p.validate(&spec).unwrap();

        p.ar[1] = 0.99;
        assert!(matches!(p.validate(&spec), Err(Error::Domain(_))));
        p.ar[1] = 0.0;

        let iv = p.intervention.as_mut().unwrap();
        iv.v_raw = vec![-3.0, 4.0, 0.0];
        iv.delta = 0.5;
        let c = p.canonicalized();
        let civ = c.intervention.unwrap();
        assert_eq!(civ.v_raw, vec![0.6, -0.8, 0.0]);
        assert_eq!(civ.delta, -0.5);

        let base = ModelSpec::new(Variant::Baseline, 4, 1, 1, None).unwrap();
        assert!(p.validate(&base).is_err());
    }

    #[test]
    fn flat_layout_matches_names() {
        for variant in [Variant::Baseline, Variant::FixedEffect, Variant::Intervention] {
            let spec = ModelSpec::new(variant, 4, 2, 1, Some(10)).unwrap();
            let p = ParamSet::zeros(&spec);
            let flat = p.to_flat();
            assert_eq!(flat.len(), param_names(&spec).len());
            assert_eq!(ParamSet::from_flat(&spec, &flat).unwrap(), p);
        }
        let spec = ModelSpec::new(Variant::Baseline, 4, 0, 1, None).unwrap();
        assert!(!param_names(&spec).iter().any(|n| n == "Delta" || n == "tau"));
    }
}
