use nalgebra::{Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::EvaluationError;
use crate::anatomy::LandmarkSet;
use crate::level::Level;
use crate::registration::{compute_frame, VertebraFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VertebraMorphometrics {
    pub level: Level,
    pub vb_width: f64,
    pub vb_depth: f64,
    pub vb_height: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMorphometrics {
    pub upper: Level,
    pub lower: Level,
    pub ivd_height: f64,
    /// Degrees; positive opens anteriorly.
    pub fsu_angle: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MorphometricRecord {
    pub vertebrae: Vec<VertebraMorphometrics>,
    pub pairs: Vec<PairMorphometrics>,
}

impl MorphometricRecord {
    pub fn vertebra(&self, level: Level) -> Option<&VertebraMorphometrics> {
        self.vertebrae.iter().find(|v| v.level == level)
    }

    pub fn pair(&self, upper: Level) -> Option<&PairMorphometrics> {
        self.pairs.iter().find(|p| p.upper == upper)
    }
}

/// `(width, depth, height)`: the lengths of the frame axes.
pub fn vb_dimensions(frame: &VertebraFrame) -> (f64, f64, f64) {
    (frame.scales[0], frame.scales[1], frame.scales[2])
}

/// Unit mean of the two frames' normalized longitudinal axes.
pub fn mean_longitudinal_axis(
    upper: &VertebraFrame,
    lower: &VertebraFrame,
) -> Result<Unit<Vector3<f64>>, EvaluationError> {
    Unit::try_new(upper.unit_z() + lower.unit_z(), 1e-9)
        .ok_or_else(|| EvaluationError::Degenerate("longitudinal axes are opposite".into()))
}

/// Unit mean of the two frames' normalized lateral axes.
pub fn mean_lateral_axis(upper: &VertebraFrame, lower: &VertebraFrame) -> Result<Unit<Vector3<f64>>, EvaluationError> {
    Unit::try_new(upper.unit_x() + lower.unit_x(), 1e-9)
        .ok_or_else(|| EvaluationError::Degenerate("lateral axes are opposite".into()))
}

/// Distance along `axis` from the lower body's superior-plate centroid to
/// the upper body's inferior-plate centroid. Negative when the plates
/// interpenetrate.
pub fn ivd_height(upper: &LandmarkSet, lower: &LandmarkSet, axis: &Unit<Vector3<f64>>) -> f64 {
    let h = (upper.inferior_centroid() - lower.superior_centroid()).dot(axis);
    if h <= 0.0 {
        log::warn!("non-positive disc height {h:.3} mm; plates overlap");
    }
    h
}

/// Signed sagittal angle in degrees from the lower body's superior
/// posterior→anterior line to the upper body's inferior one, both projected
/// onto the plane with normal `sagittal_normal`. Positive when the disc
/// opens anteriorly, assuming `sagittal_normal` points to the right of a
/// patient whose anterior direction the lines follow.
pub fn fsu_angle(
    upper: &LandmarkSet,
    lower: &LandmarkSet,
    sagittal_normal: &Unit<Vector3<f64>>,
) -> Result<f64, EvaluationError> {
    let n = sagittal_normal.as_ref();
    let project = |v: Vector3<f64>| v - n * n.dot(&v);
    let l = project(lower.superior_anterior() - lower.superior_posterior());
    let u = project(upper.inferior_anterior() - upper.inferior_posterior());
    let scale = l.norm() * u.norm();
    if !(scale > 1e-12) {
        return Err(EvaluationError::Degenerate(
            "endplate line vanishes in the sagittal projection".into(),
        ));
    }
    Ok(l.cross(&u).dot(n).atan2(l.dot(&u)).to_degrees())
}

/// All morphometrics of an ordered list of `(level, landmarks)`; pairs are
/// formed from consecutive levels only.
pub fn measure_morphometrics(sets: &[(Level, LandmarkSet)]) -> Result<MorphometricRecord, EvaluationError> {
    let frames = sets
        .iter()
        .map(|(level, l)| compute_frame(l).map_err(|e| EvaluationError::at(*level, e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    let vertebrae = sets
        .iter()
        .zip(&frames)
        .map(|((level, _), f)| {
            let (vb_width, vb_depth, vb_height) = vb_dimensions(f);
            VertebraMorphometrics {
                level: *level,
                vb_width,
                vb_depth,
                vb_height,
            }
        })
        .collect();
    let mut pairs = Vec::new();
    for i in 1..sets.len() {
        let ((upper, ul), (lower, ll)) = (&sets[i - 1], &sets[i]);
        if lower.index() != upper.index() + 1 {
            continue;
        }
        let axis = mean_longitudinal_axis(&frames[i - 1], &frames[i])?;
        let normal = mean_lateral_axis(&frames[i - 1], &frames[i])?;
        pairs.push(PairMorphometrics {
            upper: *upper,
            lower: *lower,
            ivd_height: ivd_height(ul, ll, &axis),
            fsu_angle: fsu_angle(ul, ll, &normal).map_err(|e| EvaluationError::at(*upper, e.to_string()))?,
        });
    }
    Ok(MorphometricRecord { vertebrae, pairs })
}
