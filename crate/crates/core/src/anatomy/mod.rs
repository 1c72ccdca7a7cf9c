//! Vertebral-body anatomy: spine curve, local axes, endplates and the eight
//! endplate landmarks.
//!
//! Landmark convention (fixed so the frame construction in
//! [`crate::registration`] yields lateral, anterior and longitudinal axes):
//!
//! | label | position                 |
//! |-------|--------------------------|
//! | l1    | superior plate, left     |
//! | l2    | superior plate, right    |
//! | l3    | inferior plate, left     |
//! | l4    | inferior plate, right    |
//! | l5    | superior plate, posterior|
//! | l6    | superior plate, anterior |
//! | l7    | inferior plate, posterior|
//! | l8    | inferior plate, anterior |

mod axes;
mod curve;
mod endplates;
mod landmarks;

pub use axes::{estimate_axes, AxesEstimate};
pub use curve::{fit_spine_curve, SpineCurve};
pub use endplates::{extract_endplates, Endplates, Plate};
pub use landmarks::{detect_landmarks, LandmarkRecord, LandmarkSet};

use nalgebra::{Unit, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::{center_of_mass, median_edge_length, MeshError, TriangleMesh};

pub const DEFAULT_COS_THRESHOLD: f64 = 0.8;
pub const DEFAULT_SLAB_EDGE_MULTIPLE: f64 = 2.0;

#[derive(Error, Debug)]
pub enum AnatomyError {
    #[error("spine curve needs at least 2 centers, got {0}")]
    TooFewPoints(usize),

    #[error("spine curve centers {0} and {1} coincide")]
    DuplicatePoints(usize, usize),

    #[error(transparent)]
    Mesh(#[from] MeshError),

    #[error("{plate} endplate is empty at cos threshold {threshold}; the threshold may be too strict or the longitudinal axis wrong")]
    EmptyEndplate { plate: Plate, threshold: f64 },

    #[error("{plate} endplate has no vertices within the {plane} slab of half-width {width:.4} mm; try a larger slab_half_width")]
    EmptySlab {
        plate: Plate,
        plane: &'static str,
        width: f64,
    },

    #[error("invalid landmark configuration: {0}")]
    InvalidLandmarks(String),

    #[error("invalid axes: {0}")]
    InvalidAxes(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

/// How the landmark slab half-width is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlabPolicy {
    /// Fixed half-width in millimeters.
    Fixed(f64),
    /// Multiple of the median edge length of the two endplates.
    MedianEdgeMultiple(f64),
}

impl Default for SlabPolicy {
    fn default() -> Self {
        SlabPolicy::MedianEdgeMultiple(DEFAULT_SLAB_EDGE_MULTIPLE)
    }
}

impl SlabPolicy {
    pub fn half_width(&self, endplates: &Endplates) -> f64 {
        match *self {
            SlabPolicy::Fixed(w) => w,
            SlabPolicy::MedianEdgeMultiple(k) => {
                let both = TriangleMesh::merge(&[endplates.superior.clone(), endplates.inferior.clone()]);
                k * median_edge_length(&both).unwrap_or(0.0)
            }
        }
    }
}

/// Where the longitudinal axis of each vertebral body comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LongitudinalSource {
    /// Tangent of a spline through the body centers; bounding-box axes when
    /// only one body is given.
    #[default]
    SpineCurve,
    /// Bounding-box axes of each body on its own.
    Obb,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnatomyParams {
    pub cos_threshold: f64,
    pub slab: SlabPolicy,
    pub longitudinal_source: LongitudinalSource,
}

impl Default for AnatomyParams {
    fn default() -> Self {
        Self {
            cos_threshold: DEFAULT_COS_THRESHOLD,
            slab: SlabPolicy::default(),
            longitudinal_source: LongitudinalSource::default(),
        }
    }
}

impl AnatomyParams {
    pub fn validate(&self) -> Result<(), AnatomyError> {
        if !(self.cos_threshold > 0.0 && self.cos_threshold < 1.0) {
            return Err(AnatomyError::InvalidParameter(format!(
                "cos_threshold must lie in (0, 1), got {}",
                self.cos_threshold
            )));
        }
        let ok = match self.slab {
            SlabPolicy::Fixed(w) => w > 0.0 && w.is_finite(),
            SlabPolicy::MedianEdgeMultiple(k) => k > 0.0 && k.is_finite(),
        };
        if !ok {
            return Err(AnatomyError::InvalidParameter(format!(
                "slab policy must be positive, got {:?}",
                self.slab
            )));
        }
        Ok(())
    }
}

/// Everything derived for one vertebral body.
#[derive(Debug, Clone)]
pub struct VertebraAnatomy {
    pub axes: AxesEstimate,
    pub endplates: Endplates,
    pub slab_half_width: f64,
    pub landmarks: LandmarkSet,
}

/// Axes, endplates and landmarks of a single vertebral-body mesh.
pub fn analyze_vertebra(
    body: &TriangleMesh,
    tangent: Option<&Unit<Vector3<f64>>>,
    hint: &AxesEstimate,
    params: &AnatomyParams,
) -> Result<VertebraAnatomy, AnatomyError> {
    params.validate()?;
    let axes = estimate_axes(body, tangent, hint)?;
    let endplates = extract_endplates(body, &axes, params.cos_threshold)?;
    let slab_half_width = params.slab.half_width(&endplates);
    let landmarks = detect_landmarks(&endplates.superior, &endplates.inferior, &axes, slab_half_width)?;
    Ok(VertebraAnatomy {
        axes,
        endplates,
        slab_half_width,
        landmarks,
    })
}

/// Longitudinal tangents for an ordered list of vertebral bodies, from a
/// spine curve through their centers of mass. `None` when fewer than two
/// bodies are given (bounding-box fallback).
pub fn spine_tangents(bodies: &[&TriangleMesh]) -> Result<Option<Vec<Unit<Vector3<f64>>>>, AnatomyError> {
    if bodies.len() < 2 {
        return Ok(None);
    }
    let centers = bodies
        .iter()
        .map(|b| center_of_mass(b))
        .collect::<Result<Vec<_>, _>>()?;
    let curve = fit_spine_curve(&centers)?;
    Ok(Some((0..centers.len()).map(|i| curve.tangent_at_control(i)).collect()))
}

/// Runs [`analyze_vertebra`] on an ordered list of bodies, in parallel.
/// The outer error covers the shared spine curve; inner results are per body.
pub fn analyze_spine(
    bodies: &[&TriangleMesh],
    hint: &AxesEstimate,
    params: &AnatomyParams,
) -> Result<Vec<Result<VertebraAnatomy, AnatomyError>>, AnatomyError> {
    params.validate()?;
    let tangents = match params.longitudinal_source {
        LongitudinalSource::SpineCurve => spine_tangents(bodies)?,
        LongitudinalSource::Obb => None,
    };
    Ok(bodies
        .par_iter()
        .enumerate()
        .map(|(i, body)| {
            let tangent = tangents.as_ref().map(|t| &t[i]);
            analyze_vertebra(body, tangent, hint, params)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(AnatomyParams::default().validate().is_ok());
        let bad = AnatomyParams {
            cos_threshold: 1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = AnatomyParams {
            slab: SlabPolicy::Fixed(0.0),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
