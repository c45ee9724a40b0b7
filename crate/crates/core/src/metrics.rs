//! Forecast scores: Aitchison point distance, energy score, plug-in log
//! score, componentwise interval coverage and mean absolute error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::dirichlet_log_pdf;
use crate::simplex::{aitchison_distance, aitchison_slices, Composition};
use crate::stats::quantile_sorted;

/// Aitchison distance between a point forecast and the outcome.
pub fn aitchison_point(mu_hat: &Composition, y: &Composition) -> Result<f64> {
    aitchison_distance(mu_hat, y)
}

/// Estimator of the pairwise term of the energy score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyEstimator {
    /// Average over the `M (M - 1)` ordered pairs of distinct draws.
    #[default]
    Unbiased,
    /// Average over all `M^2` pairs, the diagonal included.
    Plugin,
}

/// Energy score under the Aitchison metric; lower is better.
pub fn energy_score(draws: &[Composition], y: &Composition, estimator: EnergyEstimator) -> Result<f64> {
    let m = draws.len();
    if m < 2 {
        return Err(Error::InsufficientData(format!("energy score needs at least 2 draws, got {m}")));
    }
    for d in draws {
        Error::check_dim(y.parts(), d.parts())?;
    }
    let mf = m as f64;
    let first = draws.iter().map(|d| aitchison_slices(d.as_slice(), y.as_slice())).sum::<f64>() / mf;
    let mut pairs = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            pairs += aitchison_slices(draws[i].as_slice(), draws[j].as_slice());
        }
    }
    // `pairs` counts each unordered pair once
    let second = match estimator {
        EnergyEstimator::Unbiased => pairs / (mf * (mf - 1.0)),
        EnergyEstimator::Plugin => pairs / (mf * mf),
    };
    Ok(first - second)
}

/// Dirichlet log density of `y` at the plug-in concentration
/// `lambda_hat * mu_hat`.
pub fn plugin_log_score(mu_hat: &Composition, lambda_hat: f64, y: &Composition) -> Result<f64> {
    if !(lambda_hat > 0.0 && lambda_hat.is_finite()) {
        return Err(Error::domain(format!("concentration {lambda_hat} must be positive")));
    }
    let alpha: Vec<f64> = mu_hat.as_slice().iter().map(|m| lambda_hat * m).collect();
    dirichlet_log_pdf(y, &alpha)
}

/// Central intervals per component from type-7 quantiles of the draws.
pub fn component_intervals(draws: &[Composition], level: f64) -> Result<Vec<(f64, f64)>> {
    let first = draws
        .first()
        .ok_or_else(|| Error::InsufficientData("no predictive draws".into()))?;
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("interval level {level} not in (0, 1)")));
    }
    let parts = first.parts();
    let lo = (1.0 - level) / 2.0;
    let mut column = Vec::with_capacity(draws.len());
    (0..parts)
        .map(|c| {
            column.clear();
            for d in draws {
                Error::check_dim(parts, d.parts())?;
                column.push(d.as_slice()[c]);
            }
            column.sort_by(f64::total_cmp);
            Ok((quantile_sorted(&column, lo), quantile_sorted(&column, 1.0 - lo)))
        })
        .collect()
}

/// Fraction of components whose observed value falls in its central
/// `level` predictive interval.
pub fn componentwise_coverage(draws: &[Composition], y: &Composition, level: f64) -> Result<f64> {
    let intervals = component_intervals(draws, level)?;
    Error::check_dim(intervals.len(), y.parts())?;
    let hits = intervals
        .iter()
        .zip(y.as_slice())
        .filter(|((lo, hi), v)| lo <= *v && *v <= hi)
        .count();
    Ok(hits as f64 / intervals.len() as f64)
}

/// Mean absolute error over all components and cases.
pub fn mae(mu_hat: &[Composition], y: &[Composition]) -> Result<f64> {
    Error::check_dim(mu_hat.len(), y.len())?;
    if y.is_empty() {
        return Err(Error::InsufficientData("no forecast cases".into()));
    }
    let mut total = 0.0;
    let mut n = 0usize;
    for (m, o) in mu_hat.iter().zip(y) {
        Error::check_dim(m.parts(), o.parts())?;
        total += m.as_slice().iter().zip(o.as_slice()).map(|(a, b)| (a - b).abs()).sum::<f64>();
        n += m.parts();
    }
    Ok(total / n as f64)
}

/// The five scores of one forecast case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub aitchison: f64,
    pub energy: f64,
    pub plugin_log_score: f64,
    pub coverage: f64,
    pub mae: f64,
}

impl MetricRecord {
    /// Scores one case from its predictive draws and plug-in parameters.
    pub fn evaluate(
        draws: &[Composition],
        mu_hat: &Composition,
        lambda_hat: f64,
        y: &Composition,
        estimator: EnergyEstimator,
    ) -> Result<Self> {
        Ok(MetricRecord {
            aitchison: aitchison_point(mu_hat, y)?,
            energy: energy_score(draws, y, estimator)?,
            plugin_log_score: plugin_log_score(mu_hat, lambda_hat, y)?,
            coverage: componentwise_coverage(draws, y, 0.8)?,
            mae: mae(std::slice::from_ref(mu_hat), std::slice::from_ref(y))?,
        })
    }

    /// Componentwise mean of several records.
    pub fn mean(records: &[MetricRecord]) -> Option<MetricRecord> {
        if records.is_empty() {
            return None;
        }
        let n = records.len() as f64;
        let avg = |f: fn(&MetricRecord) -> f64| records.iter().map(f).sum::<f64>() / n;
        Some(MetricRecord {
            aitchison: avg(|r| r.aitchison),
            energy: avg(|r| r.energy),
            plugin_log_score: avg(|r| r.plugin_log_score),
            coverage: avg(|r| r.coverage),
            mae: avg(|r| r.mae),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn comp(v: &[f64]) -> Composition {
        Composition::new(v.to_vec()).unwrap()
    }

    #[test]
    fn flat_dirichlet_log_score_is_ln_two() {
        let mu = comp(&[1.0 / 3.0; 3]);
        for y in [[0.2, 0.3, 0.5], [0.9, 0.05, 0.05]] {
            assert_abs_diff_eq!(plugin_log_score(&mu, 3.0, &comp(&y)).unwrap(), 2f64.ln(), epsilon = 1e-10);
        }
    }

    #[test]
    fn sharper_precision_scores_higher_at_the_mean() {
        let y = comp(&[0.2, 0.3, 0.5]);
        assert!(plugin_log_score(&y, 100.0, &y).unwrap() > plugin_log_score(&y, 10.0, &y).unwrap());
    }

    #[test]
    fn degenerate_predictive_has_zero_energy() {
        let y = comp(&[0.2, 0.3, 0.5]);
        let draws = vec![y.clone(); 5];
        for e in [EnergyEstimator::Unbiased, EnergyEstimator::Plugin] {
            assert_abs_diff_eq!(energy_score(&draws, &y, e).unwrap(), 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn two_draw_energy_by_hand() {
        let a = comp(&[0.2, 0.3, 0.5]);
        let b = comp(&[0.5, 0.25, 0.25]);
        let d = aitchison_distance(&a, &b).unwrap();
        // (1/2)(0 + d) - (1/(2*2*1)) * 2d = 0
        assert_abs_diff_eq!(energy_score(&[a.clone(), b.clone()], &a, EnergyEstimator::Unbiased).unwrap(), 0.0, epsilon = 1e-12);
        // (1/2) d - (1/(2*4)) * 2d = d / 4
        assert_abs_diff_eq!(energy_score(&[a.clone(), b], &a, EnergyEstimator::Plugin).unwrap(), d / 4.0, epsilon = 1e-12);
        assert!(energy_score(&[a.clone()], &a, EnergyEstimator::Unbiased).is_err());
    }

    #[test]
    fn concentrating_draws_lowers_energy() {
        let y = comp(&[0.3, 0.3, 0.4]);
        let wide = [comp(&[0.1, 0.2, 0.7]), comp(&[0.6, 0.3, 0.1]), comp(&[0.2, 0.6, 0.2])];
        let near = [comp(&[0.28, 0.32, 0.4]), comp(&[0.31, 0.29, 0.4]), comp(&[0.3, 0.28, 0.42])];
        let e = EnergyEstimator::Unbiased;
        assert!(energy_score(&near, &y, e).unwrap() < energy_score(&wide, &y, e).unwrap());
    }

    #[test]
    fn mae_hand_example() {
        assert_abs_diff_eq!(mae(&[comp(&[0.5, 0.5])], &[comp(&[0.6, 0.4])]).unwrap(), 0.1, epsilon = 1e-10);
        assert!(mae(&[comp(&[0.5, 0.5])], &[]).is_err());
    }

    #[test]
    fn aitchison_point_example() {
        let d = aitchison_point(&comp(&[0.5, 0.25, 0.25]), &comp(&[1.0 / 3.0; 3])).unwrap();
        assert_abs_diff_eq!(d, 0.565952, epsilon = 1e-6);
    }

    #[test]
    fn coverage_extremes() {
        let draws: Vec<Composition> = (0..20)
            .map(|i| {
                let a = 0.2 + 0.01 * i as f64;
                comp(&[a, 0.5 - a / 2.0, 0.5 - a / 2.0])
            })
            .collect();
        assert_eq!(componentwise_coverage(&draws, &comp(&[0.3, 0.35, 0.35]), 0.8).unwrap(), 1.0);
        assert_eq!(componentwise_coverage(&draws, &comp(&[0.9, 0.05, 0.05]), 0.8).unwrap(), 0.0);
        assert!(componentwise_coverage(&[], &comp(&[0.3, 0.35, 0.35]), 0.8).is_err());
    }

    fn composition(parts: usize) -> impl Strategy<Value = Composition> {
        proptest::collection::vec(0.01f64..1.0, parts).prop_map(|v| Composition::from_positive(&v).unwrap())
    }

    proptest! {
        #[test]
        fn triangle_inequality(x in composition(4), y in composition(4), z in composition(4)) {
            let d = |a: &Composition, b: &Composition| aitchison_point(a, b).unwrap();
            prop_assert!(d(&x, &z) <= d(&x, &y) + d(&y, &z) + 1e-10);
        }

        #[test]
        fn permuting_parts_keeps_the_distance(x in composition(4), y in composition(4), k in 0usize..4) {
            let rot = |c: &Composition| {
                let mut v = c.as_slice().to_vec();
                v.rotate_left(k);
                comp(&v)
            };
            let d0 = aitchison_point(&x, &y).unwrap();
            prop_assert!((d0 - aitchison_point(&rot(&x), &rot(&y)).unwrap()).abs() < 1e-10);
        }

        #[test]
        fn energy_is_nonnegative(draws in proptest::collection::vec(composition(3), 2..8), y in composition(3)) {
            for e in [EnergyEstimator::Unbiased, EnergyEstimator::Plugin] {
                prop_assert!(energy_score(&draws, &y, e).unwrap() >= -1e-12);
            }
        }

        #[test]
        fn coverage_ignores_draw_order(mut draws in proptest::collection::vec(composition(3), 2..10), y in composition(3)) {
            let before = componentwise_coverage(&draws, &y, 0.8).unwrap();
            draws.reverse();
            prop_assert_eq!(before, componentwise_coverage(&draws, &y, 0.8).unwrap());
        }

        #[test]
        fn scores_are_finite(mu in composition(4), y in composition(4), log_lambda in 0.0f64..13.8) {
            prop_assert!(plugin_log_score(&mu, log_lambda.exp(), &y).unwrap().is_finite());
        }
    }
}
