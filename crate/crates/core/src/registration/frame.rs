use nalgebra::{Matrix3, Matrix4, Point3, Vector3};

use super::RegistrationError;
use crate::anatomy::LandmarkSet;
use crate::transform::Transform4;

const MIN_AXIS_LENGTH: f64 = 1e-9;

/// Landmark-derived vertebra frame. The axis vectors keep their length;
/// `scales` are those lengths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VertebraFrame {
    pub x: Vector3<f64>,
    pub y: Vector3<f64>,
    pub z: Vector3<f64>,
    pub center: Point3<f64>,
    pub scales: [f64; 3],
}

impl VertebraFrame {
    /// Validates lengths and handedness and fills `scales`.
    pub fn new(
        x: Vector3<f64>,
        y: Vector3<f64>,
        z: Vector3<f64>,
        center: Point3<f64>,
    ) -> Result<Self, RegistrationError> {
        let scales = [x.norm(), y.norm(), z.norm()];
        if scales.iter().any(|s| !s.is_finite()) || !center.coords.iter().all(|c| c.is_finite()) {
            return Err(RegistrationError::DegenerateFrame(
                "non-finite landmark coordinates".into(),
            ));
        }
        for (name, s) in ["x", "y", "z"].iter().zip(scales) {
            if s < MIN_AXIS_LENGTH {
                return Err(RegistrationError::DegenerateFrame(format!(
                    "{name} axis has length {s:e}"
                )));
            }
        }
        let frame = Self {
            x,
            y,
            z,
            center,
            scales,
        };
        let det = frame.unit_basis().determinant();
        if det <= 0.0 {
            return Err(RegistrationError::DegenerateFrame(format!(
                "axes are not right-handed (det = {det:.3e})"
            )));
        }
        Ok(frame)
    }

    /// Columns x̂, ŷ, ẑ.
    pub fn unit_basis(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[
            self.x / self.scales[0],
            self.y / self.scales[1],
            self.z / self.scales[2],
        ])
    }

    pub fn unit_x(&self) -> Vector3<f64> {
        self.x / self.scales[0]
    }

    pub fn unit_y(&self) -> Vector3<f64> {
        self.y / self.scales[1]
    }

    pub fn unit_z(&self) -> Vector3<f64> {
        self.z / self.scales[2]
    }

    /// Largest deviation from 90° among the three axis pairs, in degrees.
    pub fn skew_degrees(&self) -> f64 {
        let (x, y, z) = (self.unit_x(), self.unit_y(), self.unit_z());
        [x.dot(&y), y.dot(&z), z.dot(&x)]
            .iter()
            .map(|c| (90.0 - c.clamp(-1.0, 1.0).acos().to_degrees()).abs())
            .fold(0.0, f64::max)
    }
}

/// Frame from the eight endplate landmarks: x from the left→right pairs, y
/// from the posterior→anterior pairs, z from the inferior→superior pairs,
/// centred on the landmark mean.
pub fn compute_frame(landmarks: &LandmarkSet) -> Result<VertebraFrame, RegistrationError> {
    let l = |i: usize| landmarks.l(i).coords;
    let x = ((l(2) - l(1)) + (l(4) - l(3))) * 0.5;
    let y = ((l(6) - l(5)) + (l(8) - l(7))) * 0.5;
    let z = ((l(1) - l(3)) + (l(2) - l(4)) + (l(5) - l(7)) + (l(6) - l(8))) * 0.25;
    let center = landmarks
        .points()
        .iter()
        .fold(Vector3::zeros(), |acc, p| acc + p.coords)
        / 8.0;
    VertebraFrame::new(x, y, z, Point3::from(center))
}

/// `[x̂ ŷ ẑ c; 0 0 0 1] · diag(|x|, |y|, |z|, 1)`. The basis is not
/// orthogonalized, so skewed landmark axes carry over as shear.
pub fn frame_to_transform(frame: &VertebraFrame) -> Transform4 {
    let mut placement = Matrix4::identity();
    placement.fixed_view_mut::<3, 3>(0, 0).copy_from(&frame.unit_basis());
    placement.fixed_view_mut::<3, 1>(0, 3).copy_from(&frame.center.coords);
    let scale = Matrix4::from_diagonal(&nalgebra::Vector4::new(
        frame.scales[0],
        frame.scales[1],
        frame.scales[2],
        1.0,
    ));
    Transform4::from_matrix(placement * scale).expect("validated frame yields an invertible transform")
}

/// `R = T(target) · T(source)⁻¹`: maps the source frame onto the target frame.
pub fn compute_registration(source: &VertebraFrame, target: &VertebraFrame) -> Result<Transform4, RegistrationError> {
    let ts = frame_to_transform(source);
    let tt = frame_to_transform(target);
    let inv = ts
        .linear()
        .try_inverse()
        .ok_or_else(|| RegistrationError::DegenerateFrame("source frame transform is singular".into()))?;
    // block inverse keeps the bottom row exact
    let mut m = Matrix4::identity();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&inv);
    m.fixed_view_mut::<3, 1>(0, 3).copy_from(&(-(inv * ts.translation())));
    Ok(Transform4::from_matrix(tt.matrix() * m)?)
}
