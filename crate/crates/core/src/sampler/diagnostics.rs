use serde::Serialize;

use crate::stats::{mean, variance};

/// Split potential scale reduction factor for one scalar.
///
/// Each chain is cut into two halves (dropping the middle draw of odd
/// lengths). Returns `+inf` when the within-half variance is zero and
/// `NaN` when fewer than two halves of length four are available.
pub fn rhat(chains: &[&[f64]]) -> f64 {
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        let half = c.len() / 2;
        halves.push(&c[..half]);
        halves.push(&c[c.len() - half..]);
    }
    let n = halves.first().map_or(0, |h| h.len());
    if halves.len() < 2 || n < 4 || halves.iter().any(|h| h.len() != n) {
        return f64::NAN;
    }
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves.iter().map(|h| variance(h)).sum::<f64>() / halves.len() as f64;
    if w <= 0.0 {
        return f64::INFINITY;
    }
    let nf = n as f64;
    let b = nf * variance(&means);
    let v_hat = (nf - 1.0) / nf * w + b / nf;
    (v_hat / w).sqrt()
}

/// Convergence summary of a set of chains.
#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub names: Vec<String>,
    pub rhat: Vec<f64>,
    pub divergences: usize,
    /// Mean acceptance statistic per chain over the kept draws.
    pub mean_accept: Vec<f64>,
    pub step_size: Vec<f64>,
}

impl Diagnostics {
    /// Largest R-hat over the parameters selected by `include`; NaN entries
    /// are ignored.
    pub fn max_rhat_where(&self, include: impl Fn(&str) -> bool) -> f64 {
        self.names
            .iter()
            .zip(&self.rhat)
            .filter(|(n, r)| include(n) && !r.is_nan())
            .map(|(_, r)| *r)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Largest R-hat excluding the direction coordinates, whose canonical
    /// form is discontinuous when the first coordinate is near zero.
    pub fn max_rhat(&self) -> f64 {
        self.max_rhat_where(|n| !n.starts_with("v["))
    }

    pub fn converged(&self, threshold: f64) -> bool {
        self.max_rhat() < threshold && self.divergences == 0
    }
}
