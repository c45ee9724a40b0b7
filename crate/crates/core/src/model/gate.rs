use crate::error::{Error, Result};
use crate::simplex::ContrastMatrix;

#[inline]
fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Normalized logistic gate: zero up to and including `ell`, then
/// `(s(k(t - tau)) - s(k(ell - tau))) / (1 - s(k(ell - tau)))`.
pub fn gate(t: f64, tau: f64, kappa: f64, ell: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::domain(format!("gate speed must be positive, got {kappa}")));
    }
    Ok(gate_with_grad(t, tau, kappa, ell).0)
}

/// Gate value with its partial derivatives in `tau` and `kappa`.
///
/// Evaluated as `1 - exp(softplus(c) - softplus(a))` with `a = k(t - tau)`
/// and `c = k(ell - tau)`, which stays accurate when `tau` is far from the
/// break.
#[inline]
pub(crate) fn gate_with_grad(t: f64, tau: f64, kappa: f64, ell: f64) -> (f64, f64, f64) {
    if t <= ell {
        return (0.0, 0.0, 0.0);
    }
    let a = kappa * (t - tau);
    let c = kappa * (ell - tau);
    let log_ratio = softplus(c) - softplus(a);
    let r = log_ratio.exp();
    let w = -log_ratio.exp_m1();
    let (sa, sc) = (sigmoid(a), sigmoid(c));
    let dtau = -r * kappa * (sa - sc);
    let dkappa = -r * (sc * (ell - tau) - sa * (t - tau));
    (w, dtau, dkappa)
}

/// Unit direction with the hemisphere convention `v_1 >= 0`.
pub fn direction(v_raw: &[f64]) -> Result<Vec<f64>> {
    let norm = v_raw.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::domain("direction vector must be nonzero and finite"));
    }
    let sign = if v_raw[0] < 0.0 { -1.0 } else { 1.0 };
    Ok(v_raw.iter().map(|v| sign * v / norm).collect())
}

/// CLR-space image `u = V v` of an ILR direction; basis invariant.
pub fn clr_direction(v: &[f64], basis: &ContrastMatrix) -> Result<Vec<f64>> {
    Error::check_dim(basis.dim(), v.len())?;
    let mut u = vec![0.0; basis.parts()];
    basis.apply(v, &mut u);
    Ok(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn sigma(x: f64) -> f64 {
        1.0 / (1.0 + (-x).exp())
    }

    // Direct evaluation of the piecewise definition.
    fn gate_oracle(t: f64, tau: f64, kappa: f64, ell: f64) -> f64 {
        if t <= ell {
            0.0
        } else {
            let s0 = sigma(kappa * (ell - tau));
            (sigma(kappa * (t - tau)) - s0) / (1.0 - s0)
        }
    }

    #[test]
    fn gate_examples() {
        assert_eq!(gate(60.0, 62.0, 1.0, 60.0).unwrap(), 0.0);
        assert_eq!(gate(60.0, 10.0, 3.0, 60.0).unwrap(), 0.0);
        assert_abs_diff_eq!(gate(62.0, 62.0, 1.0, 60.0).unwrap(), 0.432332, epsilon = 1e-6);
        assert_abs_diff_eq!(gate(61.0, 62.0, 1.0, 60.0).unwrap(), 0.170003, epsilon = 1e-6);
        assert_abs_diff_eq!(gate(62.0, 62.0, 1.0, 60.0).unwrap(), gate_oracle(62.0, 62.0, 1.0, 60.0), epsilon = 1e-10);
        assert_abs_diff_eq!(gate(61.0, 62.0, 1.0, 60.0).unwrap(), gate_oracle(61.0, 62.0, 1.0, 60.0), epsilon = 1e-10);
    }

    #[test]
    fn gate_matches_direct_formula() {
        for &(t, tau, kappa) in &[(61.0, 62.0, 0.5), (75.0, 58.0, 2.0), (64.0, 70.0, 0.1), (100.0, 62.0, 1.0)] {
            assert_abs_diff_eq!(
                gate(t, tau, kappa, 60.0).unwrap(),
                gate_oracle(t, tau, kappa, 60.0),
                epsilon = 1e-13
            );
        }
    }

    #[test]
    fn gate_rejects_nonpositive_speed() {
        assert!(gate(61.0, 62.0, 0.0, 60.0).is_err());
        assert!(gate(61.0, 62.0, -1.0, 60.0).is_err());
    }

    #[test]
    fn gate_derivatives_match_finite_differences() {
        let h = 1e-6;
        for &(t, tau, kappa) in &[(61.0, 62.0, 1.0), (66.0, 59.0, 0.4), (63.0, 64.5, 2.5)] {
            let (_, dtau, dkappa) = gate_with_grad(t, tau, kappa, 60.0);
            let fd_tau = (gate_oracle(t, tau + h, kappa, 60.0) - gate_oracle(t, tau - h, kappa, 60.0)) / (2.0 * h);
            let fd_kappa = (gate_oracle(t, tau, kappa + h, 60.0) - gate_oracle(t, tau, kappa - h, 60.0)) / (2.0 * h);
            assert_abs_diff_eq!(dtau, fd_tau, epsilon = 1e-7);
            assert_abs_diff_eq!(dkappa, fd_kappa, epsilon = 1e-7);
        }
    }

    #[test]
    fn direction_examples() {
        assert_eq!(direction(&[-2.0, 0.0, 0.0, 0.0]).unwrap(), vec![1.0, 0.0, 0.0, 0.0]);
        let v = direction(&[3.0, 4.0]).unwrap();
        assert_abs_diff_eq!(v[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(v[1], 0.8, epsilon = 1e-15);
        assert_eq!(direction(&v).unwrap(), v);
        assert!(direction(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn clr_direction_examples() {
        let basis = ContrastMatrix::helmert(3).unwrap();
        let u = clr_direction(&[1.0, 0.0], &basis).unwrap();
        assert_abs_diff_eq!(u[0], 0.7071068, epsilon = 1e-7);
        assert_abs_diff_eq!(u[1], -0.7071068, epsilon = 1e-7);
        assert_abs_diff_eq!(u[2], 0.0, epsilon = 1e-15);
        assert!(clr_direction(&[1.0], &basis).is_err());
    }
}
