//! Aitchison geometry on the simplex: closure, log-ratio transforms and
//! the Aitchison distance.
//!
//! Compositions are validated once at construction. The transform functions
//! assume valid inputs and only check dimensions.

use crate::error::{Error, Result};

/// Default numerical floor applied before closing raw proportions.
pub const DEFAULT_FLOOR: f64 = 1e-8;

const SUM_TOL: f64 = 1e-12;

/// A strictly positive vector of proportions summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct Composition(Vec<f64>);

impl Composition {
    /// Validates an already-closed composition.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::InvalidDimension(format!(
                "composition needs at least 2 parts, got {}",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::domain(format!(
                "composition entries must be positive and finite, got {bad}"
            )));
        }
        let sum: f64 = values.iter().sum();
        if (sum - 1.0).abs() > SUM_TOL {
            return Err(Error::domain(format!(
                "composition sums to {sum}, expected 1"
            )));
        }
        Ok(Composition(values))
    }

    /// Closes a strictly positive vector by dividing by its sum.
    pub fn from_positive(values: &[f64]) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::domain(format!(
                "entries must be positive and finite, got {bad}"
            )));
        }
        let sum: f64 = values.iter().sum();
        Composition::new(values.iter().map(|v| v / sum).collect())
    }

    /// The uniform composition with `parts` entries.
    pub fn uniform(parts: usize) -> Result<Self> {
        Composition::new(vec![1.0 / parts as f64; parts])
    }

    pub(crate) fn from_closed_unchecked(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| *v > 0.0));
        Composition(values)
    }

    pub fn parts(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl AsRef<[f64]> for Composition {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

/// Isometric log-ratio coordinates (`C - 1` entries).
#[derive(Debug, Clone, PartialEq)]
pub struct IlrVector(Vec<f64>);

impl IlrVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("ilr coordinates".into()));
        }
        Ok(IlrVector(coords))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

/// Orthonormal `C x (C-1)` contrast matrix with zero-sum columns, stored
/// row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMatrix {
    parts: usize,
    entries: Vec<f64>,
}

impl ContrastMatrix {
    /// Helmert-style contrast: column `i` (1-based) has `1/sqrt(i(i+1))` in
    /// its first `i` rows and `-i/sqrt(i(i+1))` in row `i+1`.
    pub fn helmert(parts: usize) -> Result<Self> {
        if parts < 2 {
            return Err(Error::InvalidDimension(format!(
                "helmert contrast needs C >= 2, got {parts}"
            )));
        }
        let dim = parts - 1;
        let mut entries = vec![0.0; parts * dim];
        for col in 0..dim {
            let i = (col + 1) as f64;
            let norm = (i * (i + 1.0)).sqrt();
            for row in 0..=col {
                entries[row * dim + col] = 1.0 / norm;
            }
            entries[(col + 1) * dim + col] = -i / norm;
        }
        Ok(ContrastMatrix { parts, entries })
    }

    /// Builds a contrast matrix from row-major entries, checking
    /// orthonormality and zero column sums to `tol`.
    pub fn from_row_major(parts: usize, entries: Vec<f64>, tol: f64) -> Result<Self> {
        if parts < 2 {
            return Err(Error::InvalidDimension(format!("C >= 2 required, got {parts}")));
        }
        Error::check_dim(parts * (parts - 1), entries.len())?;
        let m = ContrastMatrix { parts, entries };
        let dim = m.dim();
        for a in 0..dim {
            let col_sum: f64 = (0..parts).map(|j| m.get(j, a)).sum();
            if col_sum.abs() > tol {
                return Err(Error::domain(format!("column {a} sums to {col_sum}")));
            }
            for b in 0..dim {
                let dot: f64 = (0..parts).map(|j| m.get(j, a) * m.get(j, b)).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                if (dot - target).abs() > tol {
                    return Err(Error::domain(format!(
                        "columns {a},{b} not orthonormal (dot = {dot})"
                    )));
                }
            }
        }
        Ok(m)
    }

    /// `V R` for a `(C-1) x (C-1)` row-major matrix `R`.
    pub fn rotated(&self, rotation: &[f64]) -> Result<Self> {
        let dim = self.dim();
        Error::check_dim(dim * dim, rotation.len())?;
        let mut entries = vec![0.0; self.parts * dim];
        for j in 0..self.parts {
            for i in 0..dim {
                entries[j * dim + i] = (0..dim).map(|k| self.get(j, k) * rotation[k * dim + i]).sum();
            }
        }
        ContrastMatrix::from_row_major(self.parts, entries, 1e-10)
    }

    /// Number of parts `C`.
    pub fn parts(&self) -> usize {
        self.parts
    }

    /// Number of ILR coordinates `C - 1`.
    pub fn dim(&self) -> usize {
        self.parts - 1
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * (self.parts - 1) + col]
    }

    pub fn row_major(&self) -> &[f64] {
        &self.entries
    }

    /// `out = V z` (ILR coordinates to a clr-space vector).
    #[inline]
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let dim = self.dim();
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.entries[j * dim..(j + 1) * dim];
            *o = row.iter().zip(z).map(|(a, b)| a * b).sum();
        }
    }

    /// `out = V^T x` (clr-space vector to ILR coordinates).
    #[inline]
    pub fn apply_transpose(&self, x: &[f64], out: &mut [f64]) {
        let dim = self.dim();
        out.iter_mut().for_each(|o| *o = 0.0);
        for (j, xj) in x.iter().enumerate() {
            let row = &self.entries[j * dim..(j + 1) * dim];
            for (o, v) in out.iter_mut().zip(row) {
                *o += v * xj;
            }
        }
    }
}

/// Centered log-ratio transform.
pub fn clr(y: &Composition) -> Vec<f64> {
    let logs: Vec<f64> = y.0.iter().map(|v| v.ln()).collect();
    let mean = logs.iter().sum::<f64>() / logs.len() as f64;
    logs.into_iter().map(|l| l - mean).collect()
}

/// Isometric log-ratio transform `V^T clr(y)`.
pub fn ilr(y: &Composition, basis: &ContrastMatrix) -> Result<IlrVector> {
    Error::check_dim(basis.parts(), y.parts())?;
    let mut out = vec![0.0; basis.dim()];
    ilr_into(y.as_slice(), basis, &mut out);
    Ok(IlrVector(out))
}

/// ILR of an already-valid composition slice. `V^T` annihilates constants,
/// so centering the logs is unnecessary.
#[inline]
pub(crate) fn ilr_into(y: &[f64], basis: &ContrastMatrix, out: &mut [f64]) {
    let dim = basis.dim();
    out.iter_mut().for_each(|o| *o = 0.0);
    for (j, yj) in y.iter().enumerate() {
        let l = yj.ln();
        let row = &basis.entries[j * dim..(j + 1) * dim];
        for (o, v) in out.iter_mut().zip(row) {
            *o += v * l;
        }
    }
}

/// Inverse ILR: softmax of `V z`, computed with max-subtraction so finite
/// inputs never overflow.
pub fn ilr_inv(z: &IlrVector, basis: &ContrastMatrix) -> Result<Composition> {
    Error::check_dim(basis.dim(), z.0.len())?;
    let mut out = vec![0.0; basis.parts()];
    ilr_inv_into(&z.0, basis, &mut out);
    Ok(Composition(out))
}

#[inline]
pub(crate) fn ilr_inv_into(z: &[f64], basis: &ContrastMatrix, out: &mut [f64]) {
    basis.apply(z, out);
    softmax_in_place(out);
}

#[inline]
pub(crate) fn softmax_in_place(x: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in x.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in x.iter_mut() {
        *v /= sum;
    }
}

/// Aitchison distance `||clr(x) - clr(y)||_2`.
pub fn aitchison_distance(x: &Composition, y: &Composition) -> Result<f64> {
    Error::check_dim(x.parts(), y.parts())?;
    Ok(aitchison_slices(x.as_slice(), y.as_slice()))
}

#[inline]
pub(crate) fn aitchison_slices(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let diffs = x.iter().zip(y).map(|(a, b)| a.ln() - b.ln());
    let (sum, sum_sq) = diffs.fold((0.0, 0.0), |(s, q), d| (s + d, q + d * d));
    (sum_sq - sum * sum / n).max(0.0).sqrt()
}

/// Replaces entries below `floor` with `floor`, then renormalizes.
pub fn close_with_floor(raw: &[f64], floor: f64) -> Result<Composition> {
    if raw.len() < 2 {
        return Err(Error::InvalidDimension(format!(
            "composition needs at least 2 parts, got {}",
            raw.len()
        )));
    }
    if let Some(bad) = raw.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::domain(format!(
            "raw proportions must be finite and non-negative, got {bad}"
        )));
    }
    if raw.iter().all(|v| *v == 0.0) {
        return Err(Error::domain("all-zero composition"));
    }
    if !(floor > 0.0 && floor.is_finite()) {
        return Err(Error::domain(format!("floor must be positive, got {floor}")));
    }
    let floored: Vec<f64> = raw.iter().map(|v| v.max(floor)).collect();
    let sum: f64 = floored.iter().sum();
    Ok(Composition(floored.into_iter().map(|v| v / sum).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn comp(v: &[f64]) -> Composition {
        Composition::from_positive(v).unwrap()
    }

    #[test]
    fn helmert_small_cases() {
        let v2 = ContrastMatrix::helmert(2).unwrap();
        assert_abs_diff_eq!(v2.get(0, 0), 0.7071068, epsilon = 1e-7);
        assert_abs_diff_eq!(v2.get(1, 0), -0.7071068, epsilon = 1e-7);

        let v3 = ContrastMatrix::helmert(3).unwrap();
        let expected = [[0.7071068, 0.4082483], [-0.7071068, 0.4082483], [0.0, -0.8164966]];
        for (j, row) in expected.iter().enumerate() {
            for (i, e) in row.iter().enumerate() {
                assert_abs_diff_eq!(v3.get(j, i), *e, epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn helmert_is_orthonormal() {
        for c in 2..=12 {
            let v = ContrastMatrix::helmert(c).unwrap();
            ContrastMatrix::from_row_major(c, v.row_major().to_vec(), 1e-12).unwrap();
        }
    }

    #[test]
    fn helmert_rejects_small_dimension() {
        assert!(matches!(ContrastMatrix::helmert(1), Err(Error::InvalidDimension(_))));
        assert!(ContrastMatrix::helmert(0).is_err());
    }

    #[test]
    fn clr_examples() {
        let u = Composition::uniform(3).unwrap();
        clr(&u).iter().for_each(|v| assert_abs_diff_eq!(*v, 0.0, epsilon = 1e-15));

        let c = clr(&comp(&[0.5, 0.25, 0.25]));
        assert_abs_diff_eq!(c[0], 0.46210, epsilon = 1e-5);
        assert_abs_diff_eq!(c[1], -0.23105, epsilon = 1e-5);
        assert_abs_diff_eq!(c[2], -0.23105, epsilon = 1e-5);
        assert_abs_diff_eq!(c.iter().sum::<f64>(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn ilr_examples() {
        let v = ContrastMatrix::helmert(3).unwrap();
        let z = ilr(&Composition::uniform(3).unwrap(), &v).unwrap();
        z.as_slice().iter().for_each(|c| assert_abs_diff_eq!(*c, 0.0, epsilon = 1e-15));

        // clr (0.462098, -0.231049, -0.231049) against the Helmert columns
        let z = ilr(&comp(&[0.5, 0.25, 0.25]), &v).unwrap();
        assert_abs_diff_eq!(z.as_slice()[0], 0.490129, epsilon = 1e-6);
        assert_abs_diff_eq!(z.as_slice()[1], 0.282976, epsilon = 1e-6);
    }

    #[test]
    fn ilr_inv_examples() {
        let v = ContrastMatrix::helmert(3).unwrap();
        let y = ilr_inv(&IlrVector::new(vec![0.0, 0.0]).unwrap(), &v).unwrap();
        y.as_slice().iter().for_each(|p| assert_abs_diff_eq!(*p, 1.0 / 3.0, epsilon = 1e-15));

        let y = ilr_inv(&IlrVector::new(vec![0.490129, 0.282976]).unwrap(), &v).unwrap();
        for (a, b) in y.as_slice().iter().zip([0.5, 0.25, 0.25]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-5);
        }
    }

    #[test]
    fn ilr_inv_handles_huge_coordinates() {
        let v = ContrastMatrix::helmert(4).unwrap();
        let y = ilr_inv(&IlrVector::new(vec![800.0, -900.0, 5.0]).unwrap(), &v).unwrap();
        assert!(y.as_slice().iter().all(|p| p.is_finite() && *p >= 0.0));
        assert_abs_diff_eq!(y.as_slice().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let v = ContrastMatrix::helmert(4).unwrap();
        assert!(matches!(
            ilr(&Composition::uniform(3).unwrap(), &v),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(aitchison_distance(&Composition::uniform(3).unwrap(), &Composition::uniform(4).unwrap()).is_err());
    }

    #[test]
    fn aitchison_examples() {
        let a = comp(&[0.5, 0.25, 0.25]);
        let u = Composition::uniform(3).unwrap();
        assert_eq!(aitchison_distance(&a, &a).unwrap(), 0.0);
        // norm of (0.490129, 0.282976)
        assert_abs_diff_eq!(aitchison_distance(&a, &u).unwrap(), 0.565952, epsilon = 1e-6);
        assert_eq!(
            aitchison_distance(&a, &u).unwrap(),
            aitchison_distance(&u, &a).unwrap()
        );
    }

    #[test]
    fn floor_examples() {
        let y = close_with_floor(&[0.5, 0.5, 0.0], DEFAULT_FLOOR).unwrap();
        let s = 1.0 + 1e-8;
        assert_abs_diff_eq!(y.as_slice()[0], 0.5 / s, epsilon = 1e-16);
        assert_abs_diff_eq!(y.as_slice()[0], 0.499999995, epsilon = 1e-12);
        assert_abs_diff_eq!(y.as_slice()[2], 1e-8, epsilon = 1e-15);

        let y = close_with_floor(&[1.0, 0.0, 0.0, 0.0], DEFAULT_FLOOR).unwrap();
        assert_abs_diff_eq!(y.as_slice()[0], 1.0 - 3e-8, epsilon = 1e-14);
        for p in &y.as_slice()[1..] {
            assert_abs_diff_eq!(*p, 1e-8, epsilon = 1e-15);
        }

        let x = [0.2, 0.3, 0.5];
        let y = close_with_floor(&x, DEFAULT_FLOOR).unwrap();
        for (a, b) in y.as_slice().iter().zip(x) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn floor_rejects_bad_input() {
        assert!(matches!(close_with_floor(&[0.0, 0.0, 0.0], 1e-8), Err(Error::Domain(_))));
        assert!(close_with_floor(&[0.5, -0.1, 0.6], 1e-8).is_err());
        assert!(close_with_floor(&[0.5, f64::NAN, 0.6], 1e-8).is_err());
    }

    #[test]
    fn composition_validation() {
        assert!(Composition::new(vec![0.5, 0.5]).is_ok());
        assert!(Composition::new(vec![0.5, 0.6]).is_err());
        assert!(Composition::new(vec![1.0, 0.0]).is_err());
        assert!(Composition::new(vec![1.0]).is_err());
    }
}
