//! Deterministic covariate columns generated from the time index.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::model::{CovariateSet, Matrix};

/// Declares which generated columns enter the mean and precision
/// regressions. The precision regression always carries an intercept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CovariateDesign {
    /// Linear trend `t / scale`.
    pub trend: bool,
    /// Periods of sine/cosine pairs `sin(2 pi t / p)`, `cos(2 pi t / p)`.
    pub harmonics: Vec<f64>,
    pub precision_trend: bool,
    pub precision_harmonics: Vec<f64>,
}

impl Default for CovariateDesign {
    fn default() -> Self {
        CovariateDesign {
            trend: true,
            harmonics: Vec::new(),
            precision_trend: false,
            precision_harmonics: Vec::new(),
        }
    }
}

fn columns(trend: bool, harmonics: &[f64], t: f64, scale: f64, out: &mut Vec<f64>) {
    if trend {
        out.push(t / scale);
    }
    for p in harmonics {
        let a = TAU * t / p;
        out.push(a.sin());
        out.push(a.cos());
    }
}

impl CovariateDesign {
    pub fn validate(&self) -> Result<()> {
        if self.harmonics.iter().chain(&self.precision_harmonics).any(|p| !(*p > 0.0 && p.is_finite())) {
            return Err(Error::Config("harmonic periods must be positive".into()));
        }
        Ok(())
    }

    /// Number of mean covariates.
    pub fn k_mean(&self) -> usize {
        usize::from(self.trend) + 2 * self.harmonics.len()
    }

    /// Number of precision covariates, intercept included.
    pub fn k_prec(&self) -> usize {
        1 + usize::from(self.precision_trend) + 2 * self.precision_harmonics.len()
    }

    /// Columns for 1-based times `start ..= end`, trend divided by `scale`.
    pub fn build_range(&self, start: usize, end: usize, scale: usize) -> Result<CovariateSet> {
        self.validate()?;
        if scale == 0 {
            return Err(Error::Config("trend scale must be positive".into()));
        }
        let rows = (end + 1).saturating_sub(start);
        let mut mean = Vec::with_capacity(rows * self.k_mean());
        let mut prec = Vec::with_capacity(rows * self.k_prec());
        for t in start..=end {
            let t = t as f64;
            columns(self.trend, &self.harmonics, t, scale as f64, &mut mean);
            prec.push(1.0);
            columns(self.precision_trend, &self.precision_harmonics, t, scale as f64, &mut prec);
        }
        CovariateSet::new(
            Matrix::new(rows, self.k_mean(), mean)?,
            Matrix::new(rows, self.k_prec(), prec)?,
        )
    }

    /// Columns for times `1 ..= len` with the trend normalized by `len`.
    pub fn build(&self, len: usize) -> Result<CovariateSet> {
        self.build_range(1, len, len)
    }

    /// Column names in matrix order: mean columns, then precision columns.
    pub fn names(&self) -> (Vec<String>, Vec<String>) {
        let named = |trend: bool, harmonics: &[f64], prefix: &str| {
            let mut v = Vec::new();
            if trend {
                v.push(format!("{prefix}trend"));
            }
            for p in harmonics {
                v.push(format!("{prefix}sin{p}"));
                v.push(format!("{prefix}cos{p}"));
            }
            v
        };
        let mut prec = vec!["prec_intercept".to_string()];
        prec.extend(named(self.precision_trend, &self.precision_harmonics, "prec_"));
        (named(self.trend, &self.harmonics, ""), prec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes_and_values() {
        let d = CovariateDesign {
            trend: true,
            harmonics: vec![12.0, 6.0],
            precision_trend: true,
            precision_harmonics: vec![],
        };
        let c = d.build(24).unwrap();
        assert_eq!((c.mean.cols(), c.prec.cols()), (5, 2));
        assert_eq!(c.mean.row(11)[0], 0.5);
        assert!((c.mean.row(2)[1] - 1.0).abs() < 1e-15);
        assert!(c.mean.row(11)[1].abs() < 1e-12 && (c.mean.row(11)[2] - 1.0).abs() < 1e-12);
        assert_eq!(c.prec.row(0), &[1.0, 1.0 / 24.0]);
        assert_eq!(d.names().0.len(), 5);
        assert_eq!(d.names().1, vec!["prec_intercept", "prec_trend"]);
    }

    #[test]
    fn ranges_extend_the_full_build() {
        let d = CovariateDesign {
            harmonics: vec![12.0],
            ..Default::default()
        };
        let full = d.build_range(1, 30, 25).unwrap();
        let tail = d.build_range(26, 30, 25).unwrap();
        assert_eq!(full.slice_rows(25, 30), tail);
        assert_eq!(d.build(25).unwrap(), full.slice_rows(0, 25));
    }

    #[test]
    fn bad_periods_are_rejected() {
        let d = CovariateDesign {
            harmonics: vec![0.0],
            ..Default::default()
        };
        assert!(d.build(5).is_err());
    }
}
