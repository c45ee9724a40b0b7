use rand::Rng;
use rand_distr::{Distribution, Gamma};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::simplex::{close_with_floor, Composition, DEFAULT_FLOOR};

/// Log density of `Dirichlet(alpha)` at `y`.
pub fn dirichlet_log_pdf(y: &Composition, alpha: &[f64]) -> Result<f64> {
    Error::check_dim(y.parts(), alpha.len())?;
    if let Some(a) = alpha.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
        return Err(Error::domain(format!("Dirichlet concentration must be positive, got {a}")));
    }
    Ok(log_pdf_unchecked(y.as_slice(), alpha))
}

/// Draws from `Dirichlet(alpha)` by normalizing independent gamma
/// variates; parts that underflow are raised to the default floor.
pub fn sample_dirichlet<R: Rng + ?Sized>(alpha: &[f64], rng: &mut R) -> Result<Composition> {
    let mut raw = Vec::with_capacity(alpha.len());
    for a in alpha {
        let g = Gamma::new(*a, 1.0)
            .map_err(|_| Error::domain(format!("Dirichlet concentration must be positive, got {a}")))?;
        raw.push(g.sample(rng));
    }
    if raw.iter().all(|g| *g == 0.0) {
        let top = alpha
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map_or(0, |(i, _)| i);
        raw[top] = 1.0;
    }
    close_with_floor(&raw, DEFAULT_FLOOR)
}

pub(crate) fn log_pdf_unchecked(y: &[f64], alpha: &[f64]) -> f64 {
    let total: f64 = alpha.iter().sum();
    let body: f64 = alpha
        .iter()
        .zip(y)
        .map(|(a, yj)| (a - 1.0) * yj.ln() - ln_gamma(*a))
        .sum();
    ln_gamma(total) + body
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn flat_dirichlet_is_constant() {
        for y in [[0.2, 0.3, 0.5], [0.9, 0.05, 0.05]] {
            let y = Composition::new(y.to_vec()).unwrap();
            assert_abs_diff_eq!(
                dirichlet_log_pdf(&y, &[1.0, 1.0, 1.0]).unwrap(),
                std::f64::consts::LN_2,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn beta_special_case() {
        // Beta(2, 1) density is 2 y at y = 0.5
        let y = Composition::new(vec![0.5, 0.5]).unwrap();
        assert_abs_diff_eq!(dirichlet_log_pdf(&y, &[2.0, 1.0]).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn rejects_bad_alpha() {
        let y = Composition::uniform(3).unwrap();
        assert!(matches!(dirichlet_log_pdf(&y, &[1.0, 0.0, 1.0]), Err(Error::Domain(_))));
        assert!(dirichlet_log_pdf(&y, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn integrates_to_one() {
        // Importance sampling against the uniform distribution on the
        // simplex, whose density is (C-1)! = 2 for C = 3.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let alpha = [3.0, 2.0, 4.0];
        let n = 200_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let e: Vec<f64> = (0..3).map(|_| -rng.random::<f64>().ln()).collect();
            let s: f64 = e.iter().sum();
            let y = Composition::new(e.iter().map(|v| v / s).collect::<Vec<_>>())
                .or_else(|_| Composition::from_positive(&e))
                .unwrap();
            acc += dirichlet_log_pdf(&y, &alpha).unwrap().exp() / 2.0;
        }
        let estimate = acc / n as f64;
        assert!((estimate - 1.0).abs() < 0.02, "estimate {estimate}");
    }

    #[test]
    fn sampled_means_match_alpha() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let alpha = [2.0, 5.0, 0.5];
        let n = 20_000;
        let mut acc = [0.0; 3];
        for _ in 0..n {
            let y = sample_dirichlet(&alpha, &mut rng).unwrap();
            for (a, v) in acc.iter_mut().zip(y.as_slice()) {
                *a += v / n as f64;
            }
        }
        for (a, al) in acc.iter().zip(alpha) {
            assert!((a - al / 7.5).abs() < 0.01);
        }
        assert!(sample_dirichlet(&[1.0, 0.0], &mut rng).is_err());
    }
}
