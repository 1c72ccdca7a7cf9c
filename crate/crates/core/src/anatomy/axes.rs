use nalgebra::{Matrix3, Rotation3, Unit, Vector3};

use super::AnatomyError;
use crate::mesh::{oriented_bounding_box, TriangleMesh};

const ORTHO_TOL: f64 = 1e-6;

/// Orthonormal right-handed anatomical axes of one vertebra:
/// `lateral × anterior = longitudinal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxesEstimate {
    /// left → right
    pub lateral: Unit<Vector3<f64>>,
    /// posterior → anterior
    pub anterior: Unit<Vector3<f64>>,
    /// inferior → superior
    pub longitudinal: Unit<Vector3<f64>>,
}

impl Default for AxesEstimate {
    fn default() -> Self {
        Self::world()
    }
}

impl AxesEstimate {
    /// +x left→right, +y posterior→anterior, +z inferior→superior.
    pub fn world() -> Self {
        Self {
            lateral: Vector3::x_axis(),
            anterior: Vector3::y_axis(),
            longitudinal: Vector3::z_axis(),
        }
    }

    pub fn new(
        lateral: Vector3<f64>,
        anterior: Vector3<f64>,
        longitudinal: Vector3<f64>,
    ) -> Result<Self, AnatomyError> {
        let axes = Self {
            lateral: Unit::new_normalize(lateral),
            anterior: Unit::new_normalize(anterior),
            longitudinal: Unit::new_normalize(longitudinal),
        };
        if [lateral, anterior, longitudinal]
            .iter()
            .any(|v| !(v.norm() > 0.0) || v.iter().any(|c| !c.is_finite()))
        {
            return Err(AnatomyError::InvalidAxes("axes must be finite and nonzero".into()));
        }
        axes.check()?;
        Ok(axes)
    }

    pub fn check(&self) -> Result<(), AnatomyError> {
        let (l, a, s) = (self.lateral, self.anterior, self.longitudinal);
        let worst = [l.dot(&a), a.dot(&s), s.dot(&l)]
            .iter()
            .fold(0.0f64, |m, d| m.max(d.abs()));
        if worst > ORTHO_TOL {
            return Err(AnatomyError::InvalidAxes(format!(
                "axes are not orthogonal (max |cos| = {worst:e})"
            )));
        }
        if (l.cross(&a) - s.into_inner()).norm() > ORTHO_TOL {
            return Err(AnatomyError::InvalidAxes("axes are not right-handed".into()));
        }
        Ok(())
    }

    /// Columns: lateral, anterior, longitudinal.
    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[
            self.lateral.into_inner(),
            self.anterior.into_inner(),
            self.longitudinal.into_inner(),
        ])
    }

    pub fn rotated(&self, rotation: &Rotation3<f64>) -> Self {
        Self {
            lateral: rotation * self.lateral,
            anterior: rotation * self.anterior,
            longitudinal: rotation * self.longitudinal,
        }
    }
}

fn most_aligned(candidates: &[Vector3<f64>], direction: &Vector3<f64>) -> usize {
    // first index wins on ties
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        if c.dot(direction).abs() > candidates[best].dot(direction).abs() {
            best = i;
        }
    }
    best
}

fn hemisphere(v: Vector3<f64>, reference: &Vector3<f64>) -> Vector3<f64> {
    if v.dot(reference) < 0.0 {
        -v
    } else {
        v
    }
}

/// Anatomical axes from the oriented bounding box, optionally using a spine
/// curve tangent as the longitudinal direction. `hint` disambiguates which
/// box axis is which and the sign of each axis.
pub fn estimate_axes(
    mesh: &TriangleMesh,
    curve_tangent: Option<&Unit<Vector3<f64>>>,
    hint: &AxesEstimate,
) -> Result<AxesEstimate, AnatomyError> {
    let obb = oriented_bounding_box(mesh)?;
    let box_axes = obb.axes.to_vec();

    let longitudinal = match curve_tangent {
        Some(t) => t.into_inner(),
        None => box_axes[most_aligned(&box_axes, &hint.longitudinal)],
    };
    let longitudinal = hemisphere(longitudinal.normalize(), &hint.longitudinal);

    let along = most_aligned(&box_axes, &longitudinal);
    let rest: Vec<Vector3<f64>> = box_axes
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != along)
        .map(|(_, a)| *a)
        .collect();
    let candidate = rest[most_aligned(&rest, &hint.anterior)];

    let reject = |v: Vector3<f64>| v - longitudinal * v.dot(&longitudinal);
    let mut anterior = reject(candidate);
    if anterior.norm() < 1e-6 {
        anterior = reject(hint.anterior.into_inner());
    }
    if anterior.norm() < 1e-6 {
        anterior = reject(hint.lateral.into_inner()).cross(&longitudinal);
    }
    let anterior = hemisphere(anterior.normalize(), &hint.anterior);
    let lateral = anterior.cross(&longitudinal);

    let axes = AxesEstimate {
        lateral: Unit::new_normalize(lateral),
        anterior: Unit::new_unchecked(anterior),
        longitudinal: Unit::new_unchecked(longitudinal),
    };
    axes.check()?;
    Ok(axes)
}
