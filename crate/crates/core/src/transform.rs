//! 4×4 homogeneous affine transforms.

use nalgebra::{Matrix3, Matrix4, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

const SINGULAR_DET: f64 = 1e-12;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum TransformError {
    #[error("bottom row must be (0, 0, 0, 1), got {0:?}")]
    NotAffine([f64; 4]),

    #[error("linear block is singular (|det| = {0:e})")]
    Singular(f64),

    #[error("matrix contains non-finite entries")]
    NonFinite,
}

/// Invertible affine transform with bottom row exactly `(0, 0, 0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform4(Matrix4<f64>);

impl Transform4 {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn from_matrix(m: Matrix4<f64>) -> Result<Self, TransformError> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(TransformError::NonFinite);
        }
        let bottom = [m[(3, 0)], m[(3, 1)], m[(3, 2)], m[(3, 3)]];
        if bottom != [0.0, 0.0, 0.0, 1.0] {
            return Err(TransformError::NotAffine(bottom));
        }
        let det = m.fixed_view::<3, 3>(0, 0).determinant();
        if det.abs() <= SINGULAR_DET {
            return Err(TransformError::Singular(det));
        }
        Ok(Self(m))
    }

    /// Builds `[linear | translation; 0 0 0 1]`.
    pub fn from_parts(linear: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, TransformError> {
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&linear);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&translation);
        Self::from_matrix(m)
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self(Matrix4::new_translation(&t))
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn linear(&self) -> Matrix3<f64> {
        self.0.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.0.fixed_view::<3, 1>(0, 3).into_owned()
    }

    pub fn apply_point(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.linear() * p.coords + self.translation())
    }

    pub fn apply_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.linear() * v
    }

    /// Block inverse `[A⁻¹ | −A⁻¹t]`; keeps the bottom row exact.
    pub fn inverse(&self) -> Self {
        let inv = self
            .linear()
            .try_inverse()
            .expect("Transform4 invariant guarantees an invertible linear block");
        let t = -(inv * self.translation());
        let mut m = Matrix4::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(&inv);
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&t);
        Self(m)
    }

    /// `self · other`: applies `other` first.
    pub fn compose(&self, other: &Transform4) -> Self {
        Self(self.0 * other.0)
    }

    /// True when the linear block is a proper rotation within `tol`.
    pub fn is_rigid(&self, tol: f64) -> bool {
        let r = self.linear();
        let orth = (r.transpose() * r - Matrix3::identity()).amax();
        orth <= tol && (r.determinant() - 1.0).abs() <= tol
    }

    pub fn to_rows(&self) -> [[f64; 4]; 4] {
        let mut rows = [[0.0; 4]; 4];
        for (r, row) in rows.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.0[(r, c)];
            }
        }
        rows
    }

    pub fn from_rows(rows: [[f64; 4]; 4]) -> Result<Self, TransformError> {
        Self::from_matrix(Matrix4::from_fn(|r, c| rows[r][c]))
    }

    /// Largest absolute elementwise difference.
    pub fn max_abs_diff(&self, other: &Transform4) -> f64 {
        (self.0 - other.0).amax()
    }
}

impl std::ops::Mul for Transform4 {
    type Output = Transform4;

    fn mul(self, rhs: Transform4) -> Transform4 {
        self.compose(&rhs)
    }
}

/// Row-major JSON form: `{"level": "L3", "matrix": [[..4], [..4], [..4], [..4]]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub level: String,
    pub matrix: [[f64; 4]; 4],
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_singular_matrix() {
        let mut m = Matrix4::identity();
        m[(2, 2)] = 0.0;
        assert!(matches!(Transform4::from_matrix(m), Err(TransformError::Singular(_))));
    }

    #[test]
    fn rejects_projective_bottom_row() {
        let mut m = Matrix4::identity();
        m[(3, 0)] = 0.1;
        assert!(matches!(Transform4::from_matrix(m), Err(TransformError::NotAffine(_))));
    }

    #[test]
    fn inverse_composes_to_identity() {
        let lin = Matrix3::new(2.0, 0.3, 0.0, -0.1, 1.5, 0.2, 0.0, 0.4, 0.7);
        let t = Transform4::from_parts(lin, Vector3::new(3.0, -4.0, 5.0)).unwrap();
        let id = t.compose(&t.inverse());
        assert!(id.max_abs_diff(&Transform4::identity()) < 1e-12);
        assert_eq!(
            id.matrix().row(3).iter().copied().collect::<Vec<_>>(),
            vec![0.0, 0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn rows_round_trip() {
        let t = Transform4::from_translation(Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(Transform4::from_rows(t.to_rows()).unwrap(), t);
        assert_eq!(t.to_rows()[0][3], 1.0);
    }
}
