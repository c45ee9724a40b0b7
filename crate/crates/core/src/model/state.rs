use super::gate::gate_with_grad;
use super::{CovariateSet, ModelSpec, ParamSet};
use crate::error::{Error, Result};
use crate::simplex::{self, Composition, ContrastMatrix};

/// A `T x (C-1)` series of ILR coordinates, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IlrSeries {
    dim: usize,
    data: Vec<f64>,
}

impl IlrSeries {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::InvalidDimension(format!(
                "{} values do not form rows of width {dim}",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ILR series".into()));
        }
        Ok(IlrSeries { dim, data })
    }

    pub fn from_compositions(ys: &[Composition], basis: &ContrastMatrix) -> Result<Self> {
        let dim = basis.dim();
        let mut data = vec![0.0; ys.len() * dim];
        for (y, row) in ys.iter().zip(data.chunks_exact_mut(dim)) {
            Error::check_dim(basis.parts(), y.parts())?;
            simplex::ilr_into(y.as_slice(), basis, row);
        }
        Ok(IlrSeries { dim, data })
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }
}

/// In-sample quantities of the recursion for one parameter value.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesState {
    pub dim: usize,
    /// ILR-space mean `eta_t`, row-major `T x (C-1)`.
    pub eta: Vec<f64>,
    /// Drift `d_t`.
    pub drift: Vec<f64>,
    /// Working residuals `e_t = Z_t - eta_t`.
    pub resid: Vec<f64>,
    /// Gate values `w_t` (all zero without an intervention).
    pub gate: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: Vec<Composition>,
}

impl SeriesState {
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    pub fn eta_row(&self, t: usize) -> &[f64] {
        &self.eta[t * self.dim..(t + 1) * self.dim]
    }

    pub fn drift_row(&self, t: usize) -> &[f64] {
        &self.drift[t * self.dim..(t + 1) * self.dim]
    }

    pub fn resid_row(&self, t: usize) -> &[f64] {
        &self.resid[t * self.dim..(t + 1) * self.dim]
    }
}

/// Evaluates drift and log-precision at a (1-based) time.
///
/// The shift is formed as `(delta * w) * u_d` with `u = v_raw / |v_raw|`, so
/// `(v_raw, delta)` and `(-v_raw, -delta)` agree bit for bit.
pub(crate) struct DriftEval<'a> {
    pub spec: &'a ModelSpec,
    pub params: &'a ParamSet,
    pub unit: Option<Vec<f64>>,
}

impl<'a> DriftEval<'a> {
    pub fn new(spec: &'a ModelSpec, params: &'a ParamSet) -> Self {
        DriftEval {
            spec,
            params,
            unit: params.intervention.as_ref().map(|iv| iv.unit()),
        }
    }

    /// Writes `d_t` into `out` and returns `(w_t, log lambda_t)`.
    #[inline]
    pub fn eval(&self, t: f64, x_mean: &[f64], x_prec: &[f64], out: &mut [f64]) -> (f64, f64) {
        let p = self.params;
        let k = self.spec.k_mean;
        for (d, o) in out.iter_mut().enumerate() {
            let row = &p.coef[d * k..(d + 1) * k];
            *o = p.b[d] + row.iter().zip(x_mean).map(|(c, x)| c * x).sum::<f64>();
        }
        let mut log_lambda: f64 = p.gamma.iter().zip(x_prec).map(|(g, x)| g * x).sum();
        let ell = self.spec.ell();
        let mut w = 0.0;
        if let (Some(iv), Some(u)) = (&p.intervention, &self.unit) {
            w = gate_with_grad(t, iv.tau, iv.kappa, ell).0;
            let amp = iv.delta * w;
            for (o, ud) in out.iter_mut().zip(u) {
                *o += amp * ud;
            }
            log_lambda += iv.delta_phi * w;
        }
        if let Some(beta) = &p.beta_covid {
            if t > ell {
                for (o, bd) in out.iter_mut().zip(beta) {
                    *o += bd;
                }
            }
        }
        (w, log_lambda)
    }
}

/// Runs the recursion over an observed ILR series.
///
/// `eta_1 = d_1`, `e_1 = Z_1 - d_1`; afterwards
/// `eta_t = d_t + A (Z_{t-1} - d_{t-1}) + Theta e_{t-1}`.
pub fn build_state(
    spec: &ModelSpec,
    params: &ParamSet,
    covariates: &CovariateSet,
    z: &IlrSeries,
    basis: &ContrastMatrix,
) -> Result<SeriesState> {
    params.validate(spec)?;
    let len = z.len();
    let dim = spec.dim();
    if len > 0 {
        Error::check_dim(dim, z.dim())?;
    }
    Error::check_dim(spec.parts, basis.parts())?;
    covariates.check(spec, len)?;
    spec.validate_length(len)?;

    let drift_eval = DriftEval::new(spec, params);
    let mut state = SeriesState {
        dim,
        eta: vec![0.0; len * dim],
        drift: vec![0.0; len * dim],
        resid: vec![0.0; len * dim],
        gate: vec![0.0; len],
        lambda: vec![0.0; len],
        mu: Vec::with_capacity(len),
    };
    let mut mu = vec![0.0; spec.parts];
    for t in 0..len {
        let (w, log_lambda) = drift_eval.eval(
            (t + 1) as f64,
            covariates.mean.row(t),
            covariates.prec.row(t),
            &mut state.drift[t * dim..(t + 1) * dim],
        );
        state.gate[t] = w;
        state.lambda[t] = log_lambda.exp();
        for d in 0..dim {
            let mut eta = state.drift[t * dim + d];
            if t > 0 {
                let prev = (t - 1) * dim + d;
                eta += params.ar[d] * (z.row(t - 1)[d] - state.drift[prev])
                    + params.ma[d] * state.resid[prev];
            }
            state.eta[t * dim + d] = eta;
            state.resid[t * dim + d] = z.row(t)[d] - eta;
        }
        simplex::ilr_inv_into(state.eta_row(t), basis, &mut mu);
        state.mu.push(Composition::from_closed_unchecked(mu.clone()));
    }
    Ok(state)
}
