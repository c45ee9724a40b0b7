use serde::{Deserialize, Serialize};

use super::Priors;
use crate::error::{Error, Result};

/// Which break mechanism the model carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Plain diagonal DARMA(1,1), no break.
    Baseline,
    /// Baseline plus a step dummy `1(t > ell)` with per-coordinate effects.
    FixedEffect,
    /// Baseline plus the gated directional shift and precision shift.
    Intervention,
}

impl Variant {
    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Baseline => "baseline",
            Variant::FixedEffect => "fixed_effect",
            Variant::Intervention => "intervention",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Variant::Baseline),
            "fixed_effect" | "fixed-effect" => Ok(Variant::FixedEffect),
            "intervention" => Ok(Variant::Intervention),
            other => Err(Error::Config(format!("unknown model variant `{other}`"))),
        }
    }
}

/// Structural description of a model: variant, dimensions and priors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    pub variant: Variant,
    /// Number of parts `C`.
    pub parts: usize,
    /// Number of mean covariates (intercept excluded; it lives in `b`).
    pub k_mean: usize,
    /// Number of precision covariates, intercept included.
    pub k_prec: usize,
    /// Last pre-break time index `ell` (1-based).
    pub break_index: Option<usize>,
    pub priors: Priors,
}

impl ModelSpec {
    pub fn new(
        variant: Variant,
        parts: usize,
        k_mean: usize,
        k_prec: usize,
        break_index: Option<usize>,
    ) -> Result<Self> {
        let spec = ModelSpec {
            variant,
            parts,
            k_mean,
            k_prec,
            break_index,
            priors: Priors::default(),
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_priors(mut self, priors: Priors) -> Self {
        self.priors = priors;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.parts < 3 {
            return Err(Error::Spec(format!("C must be >= 3, got {}", self.parts)));
        }
        if self.k_prec < 1 {
            return Err(Error::Spec("precision model needs an intercept column".into()));
        }
        match (self.variant, self.break_index) {
            (Variant::Baseline, _) => {}
            (_, None) => {
                return Err(Error::Spec(format!(
                    "{} variant requires a break index",
                    self.variant
                )))
            }
            (_, Some(0)) => return Err(Error::Spec("break index must be >= 1".into())),
            _ => {}
        }
        Ok(())
    }

    /// Checks the break index against a series length.
    pub fn validate_length(&self, len: usize) -> Result<()> {
        if self.variant != Variant::Baseline {
            if let Some(ell) = self.break_index {
                if len > 0 && ell >= len {
                    return Err(Error::Spec(format!(
                        "break index {ell} must be smaller than the series length {len}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// ILR dimension `C - 1`.
    pub fn dim(&self) -> usize {
        self.parts - 1
    }

    pub fn ell(&self) -> f64 {
        self.break_index.unwrap_or(0) as f64
    }
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Error::check_dim(rows * cols, data.len())?;
        Ok(Matrix { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>], cols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            Error::check_dim(cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Rows `start..end` as a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Matrix {
        Matrix {
            rows: end - start,
            cols: self.cols,
            data: self.data[start * self.cols..end * self.cols].to_vec(),
        }
    }
}

/// Mean and precision covariates aligned with a series.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateSet {
    pub mean: Matrix,
    pub prec: Matrix,
}

impl CovariateSet {
    pub fn new(mean: Matrix, prec: Matrix) -> Result<Self> {
        Error::check_dim(mean.rows(), prec.rows())?;
        if mean.as_slice().iter().chain(prec.as_slice()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("covariates".into()));
        }
        Ok(CovariateSet { mean, prec })
    }

    /// Intercept-only precision and no mean covariates.
    pub fn intercept_only(len: usize) -> Self {
        CovariateSet {
            mean: Matrix::zeros(len, 0),
            prec: Matrix::new(len, 1, vec![1.0; len]).expect("shape"),
        }
    }

    pub fn len(&self) -> usize {
        self.mean.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn slice_rows(&self, start: usize, end: usize) -> CovariateSet {
        CovariateSet {
            mean: self.mean.slice_rows(start, end),
            prec: self.prec.slice_rows(start, end),
        }
    }

    pub(crate) fn check(&self, spec: &ModelSpec, len: usize) -> Result<()> {
        Error::check_dim(spec.k_mean, self.mean.cols())?;
        Error::check_dim(spec.k_prec, self.prec.cols())?;
        if self.len() < len {
            return Err(Error::DimensionMismatch {
                expected: len,
                got: self.len(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spec_invariants() {
        assert!(ModelSpec::new(Variant::Baseline, 3, 0, 1, None).is_ok());
        assert!(ModelSpec::new(Variant::Intervention, 3, 0, 1, None).is_err());
        assert!(ModelSpec::new(Variant::FixedEffect, 3, 0, 1, Some(0)).is_err());
        assert!(ModelSpec::new(Variant::Baseline, 2, 0, 1, None).is_err());
        assert!(ModelSpec::new(Variant::Baseline, 4, 0, 0, None).is_err());
        let s = ModelSpec::new(Variant::Intervention, 4, 1, 1, Some(10)).unwrap();
        assert!(s.validate_length(11).is_ok());
        assert!(s.validate_length(10).is_err());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("fixed_effect".parse::<Variant>().unwrap(), Variant::FixedEffect);
        assert!("arima".parse::<Variant>().is_err());
    }

    #[test]
    fn covariates_reject_nan() {
        let m = Matrix::new(2, 1, vec![0.0, f64::NAN]).unwrap();
        let p = Matrix::new(2, 1, vec![1.0, 1.0]).unwrap();
        assert!(matches!(CovariateSet::new(m, p), Err(Error::NonFinite(_))));
    }
}
