use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use super::shapes::{elliptic_body, grid_box, labelled_grid_box, BoxFace};
use super::SyntheticError;
use crate::anatomy::{AxesEstimate, LandmarkSet};
use crate::level::Level;
use crate::mesh::{Region, TriangleMesh};

/// Distance from the posterior wall of the body to the facet joints, along
/// the anterior axis. Keeps every facet more than 25 mm from the body.
const FACET_SETBACK: f64 = 34.0;
const PROCESS_THICKNESS: f64 = 6.0;
/// Half-extents (anterior, longitudinal) of the superior facet patch.
const SUPERIOR_FACET_HALF: (f64, f64) = (8.0, 17.0);
/// Half-extent (both directions) of the inferior facet patch.
const INFERIOR_FACET_HALF: f64 = 4.0;

/// Parameters of one synthetic vertebra in its local frame: x lateral
/// (left to right), y anterior, z superior, origin at the body center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VertebraParams {
    pub level: Level,
    pub vb_width: f64,
    pub vb_depth: f64,
    /// Height at mid-depth.
    pub vb_height: f64,
    /// Wedge angle between the two endplates in degrees, positive when the
    /// body is taller anteriorly.
    pub endplate_tilt: f64,
    pub tessellation_edge: f64,
    pub with_posterior: bool,
    /// Joint width this vertebra's inferior facets leave against a lower
    /// neighbour with the same `facet_half_span`.
    pub facet_gap_offset: f64,
    /// Lateral distance from the midline to the superior facet surfaces.
    pub facet_half_span: f64,
}

impl Default for VertebraParams {
    fn default() -> Self {
        Self {
            level: Level::L3,
            vb_width: 40.0,
            vb_depth: 36.0,
            vb_height: 30.0,
            endplate_tilt: 0.0,
            tessellation_edge: 2.0,
            with_posterior: true,
            facet_gap_offset: 1.5,
            facet_half_span: 16.0,
        }
    }
}

impl VertebraParams {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |m: String| Err(SyntheticError::InvalidParameter(format!("{}: {m}", self.level)));
        for (name, v) in [
            ("vb_width", self.vb_width),
            ("vb_depth", self.vb_depth),
            ("vb_height", self.vb_height),
            ("tessellation_edge", self.tessellation_edge),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(self.endplate_tilt.abs() < 30.0) {
            return bad(format!("|endplate_tilt| must be below 30°, got {}", self.endplate_tilt));
        }
        let min_dim = self.vb_width.min(self.vb_depth).min(self.vb_height);
        if !(self.tessellation_edge < min_dim / 4.0) {
            return bad(format!(
                "tessellation_edge {} must be below a quarter of the smallest dimension ({min_dim})",
                self.tessellation_edge
            ));
        }
        if self.with_posterior {
            if !(self.facet_gap_offset.is_finite() && self.facet_gap_offset.abs() < 5.0) {
                return bad(format!(
                    "|facet_gap_offset| must be below 5 mm, got {}",
                    self.facet_gap_offset
                ));
            }
            let inner = self.facet_half_span - self.facet_gap_offset - PROCESS_THICKNESS;
            if !(inner > 2.0) || !self.facet_half_span.is_finite() {
                return bad(format!(
                    "facet_half_span {} leaves no room for the inferior processes",
                    self.facet_half_span
                ));
            }
        }
        Ok(())
    }

    /// tan of half the wedge angle: the slope of each plate along y.
    pub(crate) fn plate_slope(&self) -> f64 {
        (self.endplate_tilt.to_radians() / 2.0).tan()
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedVertebra {
    pub mesh: TriangleMesh,
    pub landmarks: LandmarkSet,
    pub axes: AxesEstimate,
    /// Triangles of the superior and inferior caps.
    pub superior_plate: Vec<usize>,
    pub inferior_plate: Vec<usize>,
}

/// Labeled vertebra in its local frame. The body comes first, so its
/// vertex and triangle indices are the same as in the body alone.
pub fn generate_vertebra(params: &VertebraParams) -> Result<GeneratedVertebra, SyntheticError> {
    params.validate()?;
    let (a, b, h) = (params.vb_width / 2.0, params.vb_depth / 2.0, params.vb_height);
    let s = params.plate_slope();
    let (body, superior_plate, inferior_plate) = elliptic_body(a, b, h, s, params.tessellation_edge);
    let mesh = if params.with_posterior {
        TriangleMesh::merge(&[body, posterior_elements(params)])
    } else {
        body
    };
    let landmarks = LandmarkSet::from_arrays([
        [-a, 0.0, h / 2.0],
        [a, 0.0, h / 2.0],
        [-a, 0.0, -h / 2.0],
        [a, 0.0, -h / 2.0],
        [0.0, -b, h / 2.0 - s * b],
        [0.0, b, h / 2.0 + s * b],
        [0.0, -b, -h / 2.0 + s * b],
        [0.0, b, -h / 2.0 - s * b],
    ])
    .expect("analytic landmarks are valid");
    Ok(GeneratedVertebra {
        mesh,
        landmarks,
        axes: AxesEstimate::world(),
        superior_plate,
        inferior_plate,
    })
}

/// Local-frame y of the facet joints.
pub(crate) fn facet_y(params: &VertebraParams) -> f64 {
    -params.vb_depth / 2.0 - FACET_SETBACK
}

fn posterior_elements(params: &VertebraParams) -> TriangleMesh {
    let b = params.vb_depth / 2.0;
    let h = params.vb_height;
    let edge = params.tessellation_edge;
    let span = params.facet_half_span;
    let inner = span - params.facet_gap_offset;
    let yf = facet_y(params);
    let t = PROCESS_THICKNESS;
    let p = Point3::new;
    let (sy, sz) = SUPERIOR_FACET_HALF;
    let sup_z = h / 2.0 + 1.0;
    let inf_z = -h / 2.0 - 2.5;
    let q = INFERIOR_FACET_HALF;
    let facet = |min: Point3<f64>, max: Point3<f64>, max_side: bool, region: Region| {
        labelled_grid_box(
            min,
            max,
            edge,
            Region::Unlabeled,
            Some((BoxFace { axis: 0, max_side }, region)),
        )
    };
    let plain = |min: Point3<f64>, max: Point3<f64>| grid_box(min, max, edge, Region::Unlabeled);
    let pedicle_x = (inner - t - 1.0).min(span - 8.0);
    TriangleMesh::merge(&[
        // pedicles from the posterior wall to the facet columns
        plain(p(-pedicle_x - 4.0, yf + 4.0, -5.0), p(-pedicle_x, -b + 3.0, 5.0)),
        plain(p(pedicle_x, yf + 4.0, -5.0), p(pedicle_x + 4.0, -b + 3.0, 5.0)),
        // lamina and spinous process
        plain(p(-pedicle_x, yf - 3.0, -10.0), p(pedicle_x, yf + 3.0, 4.0)),
        plain(p(-2.5, yf - 28.0, -9.0), p(2.5, yf - 3.0, 3.0)),
        // superior articular processes, facets facing the midline
        facet(
            p(-span - t, yf - sy, sup_z - sz),
            p(-span, yf + sy, sup_z + sz),
            true,
            Region::SuperiorLeftFacet,
        ),
        facet(
            p(span, yf - sy, sup_z - sz),
            p(span + t, yf + sy, sup_z + sz),
            false,
            Region::SuperiorRightFacet,
        ),
        // inferior articular processes, facets facing away from the midline
        facet(
            p(-inner, yf - q, inf_z - q),
            p(-inner + t, yf + q, inf_z + q),
            false,
            Region::InferiorLeftFacet,
        ),
        facet(
            p(inner - t, yf - q, inf_z - q),
            p(inner, yf + q, inf_z + q),
            true,
            Region::InferiorRightFacet,
        ),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::face_normals;

    #[test]
    fn default_landmarks_match_hand_set() {
        let g = generate_vertebra(&VertebraParams::default()).unwrap();
        let expect = [
            [-20.0, 0.0, 15.0],
            [20.0, 0.0, 15.0],
            [-20.0, 0.0, -15.0],
            [20.0, 0.0, -15.0],
            [0.0, -18.0, 15.0],
            [0.0, 18.0, 15.0],
            [0.0, -18.0, -15.0],
            [0.0, 18.0, -15.0],
        ];
        assert_eq!(g.landmarks, LandmarkSet::from_arrays(expect).unwrap());
        // each landmark is a mesh vertex
        for l in g.landmarks.points() {
            assert!(g.mesh.vertices().contains(l));
        }
    }

    #[test]
    fn body_only_is_all_vertebral_body() {
        let params = VertebraParams {
            with_posterior: false,
            ..Default::default()
        };
        let g = generate_vertebra(&params).unwrap();
        assert!(g.mesh.labels().unwrap().iter().all(|&r| r == Region::VertebralBody));
    }

    #[test]
    fn wedge_angle_between_plate_normals() {
        let params = VertebraParams {
            endplate_tilt: 10.0,
            ..Default::default()
        };
        let g = generate_vertebra(&params).unwrap();
        let normals = face_normals(&g.mesh);
        let top = normals[g.superior_plate[0]].unwrap();
        let bottom = normals[g.inferior_plate[0]].unwrap();
        let angle = top.dot(&-bottom).clamp(-1.0, 1.0).acos().to_degrees();
        assert!((angle - 10.0).abs() < 0.01, "{angle}");
    }

    #[test]
    fn all_facet_regions_present() {
        let g = generate_vertebra(&VertebraParams::default()).unwrap();
        for r in [
            Region::SuperiorLeftFacet,
            Region::SuperiorRightFacet,
            Region::InferiorLeftFacet,
            Region::InferiorRightFacet,
        ] {
            assert!(g.mesh.has_region(r));
        }
    }

    #[test]
    fn invalid_params_are_rejected() {
        for p in [
            VertebraParams {
                endplate_tilt: 45.0,
                ..Default::default()
            },
            VertebraParams {
                vb_height: 0.0,
                ..Default::default()
            },
            VertebraParams {
                tessellation_edge: 8.0,
                ..Default::default()
            },
        ] {
            assert!(generate_vertebra(&p).is_err());
        }
    }
}
