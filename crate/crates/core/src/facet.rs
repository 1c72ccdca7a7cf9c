//! Facet-joint alignment between adjacent vertebrae: the articular facets
//! are warped along the joint normal until the joint space reaches a target
//! width.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{Point3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::level::Level;
use crate::mesh::{face_normals, triangle_area, Region, SurfaceIndex, TriangleMesh};
use crate::spine::SpineModel;

/// Vertices farther than this many falloff radii from a warped region are
/// left exactly in place.
pub const WARP_CUTOFF_RADII: f64 = 6.0;

pub const DEFAULT_TARGET_WIDTH: f64 = 1.5;
pub const DEFAULT_FALLOFF_RADIUS: f64 = 5.0;
pub const DEFAULT_MAX_PASSES: usize = 5;

/// Accepted deviation of the mean gap from the target width.
pub const WIDTH_TOLERANCE: f64 = 0.2;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum FacetError {
    #[error("{0} mesh has no facet labels; facet alignment needs labeled atlas meshes")]
    MissingLabels(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("displacement count {got} does not match region size {expected}")]
    DisplacementCount { expected: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

impl Side {
    fn regions(self) -> (Region, Region) {
        match self {
            Side::Left => (Region::InferiorLeftFacet, Region::SuperiorLeftFacet),
            Side::Right => (Region::InferiorRightFacet, Region::SuperiorRightFacet),
        }
    }
}

/// The inferior facet of an upper vertebra and the superior facet of the
/// vertebra below it, on one side.
#[derive(Debug, Clone, PartialEq)]
pub struct FacetPair {
    pub side: Side,
    /// Vertex indices into the upper mesh.
    pub upper_region: Vec<usize>,
    /// Vertex indices into the lower mesh.
    pub lower_region: Vec<usize>,
    /// Points from the lower facet surface into the joint space.
    pub contact_normal: Unit<Vector3<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub mean_gap: f64,
    pub min_gap: f64,
    pub max_gap: f64,
    pub sample_count: usize,
}

fn has_facets(mesh: &TriangleMesh) -> bool {
    mesh.labels().is_some_and(|l| l.iter().any(|r| r.is_facet()))
}

/// Triangles whose three vertices all lie in `region`.
fn region_triangles(mesh: &TriangleMesh, region: Region) -> Vec<usize> {
    (0..mesh.triangle_count())
        .filter(|&t| mesh.triangles()[t].iter().all(|&v| mesh.label(v) == region))
        .collect()
}

fn centroid(mesh: &TriangleMesh, ids: &[usize]) -> Point3<f64> {
    Point3::from(ids.iter().fold(Vector3::zeros(), |a, &i| a + mesh.vertices()[i].coords) / ids.len() as f64)
}

/// Area-weighted mean outward normal of the lower facet surface. Falls back
/// to the centroid direction when the region has no whole triangles.
fn contact_normal(
    upper: &TriangleMesh,
    upper_ids: &[usize],
    lower: &TriangleMesh,
    region: Region,
    lower_ids: &[usize],
) -> Option<Unit<Vector3<f64>>> {
    let normals = face_normals(lower);
    let sum = region_triangles(lower, region)
        .into_iter()
        .filter_map(|t| normals[t].map(|n| n * triangle_area(lower, t)))
        .fold(Vector3::zeros(), |a, n| a + n);
    Unit::try_new(sum, 1e-12).or_else(|| Unit::try_new(centroid(upper, upper_ids) - centroid(lower, lower_ids), 1e-12))
}

/// One pair per side on which both facets are labeled.
pub fn identify_facet_pairs(upper: &TriangleMesh, lower: &TriangleMesh) -> Result<Vec<FacetPair>, FacetError> {
    if !has_facets(upper) {
        return Err(FacetError::MissingLabels("upper"));
    }
    if !has_facets(lower) {
        return Err(FacetError::MissingLabels("lower"));
    }
    let mut pairs = Vec::new();
    for side in [Side::Left, Side::Right] {
        let (ur, lr) = side.regions();
        let upper_region = upper.region_vertices(ur);
        let lower_region = lower.region_vertices(lr);
        if upper_region.is_empty() || lower_region.is_empty() {
            continue;
        }
        let Some(contact_normal) = contact_normal(upper, &upper_region, lower, lr, &lower_region) else {
            log::warn!("{side} facet pair has no usable contact direction; skipped");
            continue;
        };
        pairs.push(FacetPair {
            side,
            upper_region,
            lower_region,
            contact_normal,
        });
    }
    Ok(pairs)
}

/// Signed distance of each upper-facet vertex to the lower facet surface,
/// positive on the `contact_normal` side.
pub fn measure_gap(pair: &FacetPair, upper: &TriangleMesh, lower: &TriangleMesh) -> GapReport {
    let (_, lr) = pair.side.regions();
    let tris = region_triangles(lower, lr);
    let gaps: Vec<f64> = if tris.is_empty() {
        // no surface: distance to the nearest region vertex
        pair.upper_region
            .iter()
            .map(|&i| {
                let v = upper.vertices()[i];
                let (d, q) = pair
                    .lower_region
                    .iter()
                    .map(|&j| ((v - lower.vertices()[j]).norm(), lower.vertices()[j]))
                    .min_by(|a, b| a.0.total_cmp(&b.0))
                    .expect("regions are nonempty");
                d.copysign((v - q).dot(&pair.contact_normal))
            })
            .collect()
    } else {
        let surface = lower.submesh(&tris);
        let index = SurfaceIndex::new(&surface);
        pair.upper_region
            .iter()
            .map(|&i| {
                let v = upper.vertices()[i];
                let sp = index.closest_point(&v).expect("surface is nonempty");
                let side = (v - sp.point).dot(&pair.contact_normal);
                if side < 0.0 {
                    -sp.distance
                } else {
                    sp.distance
                }
            })
            .collect()
    };
    let n = gaps.len();
    GapReport {
        mean_gap: gaps.iter().sum::<f64>() / n as f64,
        min_gap: gaps.iter().copied().fold(f64::INFINITY, f64::min),
        max_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        sample_count: n,
    }
}

/// Moves `region` vertices by their own displacement and drags the rest of
/// the mesh along with the mean displacement, weighted by
/// `exp(-(d / falloff_radius)²)` of the distance `d` to the nearest region
/// vertex. Beyond [`WARP_CUTOFF_RADII`] radii nothing moves.
pub fn elastic_warp(
    mesh: &TriangleMesh,
    region: &[usize],
    displacement: &[Vector3<f64>],
    falloff_radius: f64,
) -> Result<TriangleMesh, FacetError> {
    if !(falloff_radius > 0.0 && falloff_radius.is_finite()) {
        return Err(FacetError::InvalidParameter(format!(
            "falloff radius must be positive, got {falloff_radius}"
        )));
    }
    if displacement.len() != region.len() {
        return Err(FacetError::DisplacementCount {
            expected: region.len(),
            got: displacement.len(),
        });
    }
    if displacement.iter().any(|d| d.iter().any(|c| !c.is_finite())) {
        return Err(FacetError::InvalidParameter("displacements must be finite".into()));
    }
    if region.is_empty() {
        return Ok(mesh.clone());
    }
    let mean = displacement.iter().fold(Vector3::zeros(), |a, d| a + d) / region.len() as f64;
    let vertices = mesh.vertices();
    let mut out = vertices.to_vec();
    let mut in_region = vec![false; vertices.len()];
    for (&i, d) in region.iter().zip(displacement) {
        in_region[i] = true;
        out[i] = vertices[i] + d;
    }
    let cutoff = WARP_CUTOFF_RADII * falloff_radius;
    let pts: Vec<Point3<f64>> = region.iter().map(|&i| vertices[i]).collect();
    let (lo, hi) = pts.iter().fold(
        (Vector3::repeat(f64::INFINITY), Vector3::repeat(f64::NEG_INFINITY)),
        |(lo, hi), p| (lo.inf(&p.coords), hi.sup(&p.coords)),
    );
    for (i, v) in vertices.iter().enumerate() {
        if in_region[i] {
            continue;
        }
        let outside = (lo - v.coords).sup(&(v.coords - hi)).sup(&Vector3::zeros());
        if outside.norm() >= cutoff {
            continue;
        }
        let d = pts
            .iter()
            .map(|p| (v - p).norm_squared())
            .fold(f64::INFINITY, f64::min)
            .sqrt();
        if d < cutoff {
            out[i] = v + mean * (-(d / falloff_radius).powi(2)).exp();
        }
    }
    Ok(mesh.with_vertices(out).expect("warp keeps vertex count"))
}

/// Joint-space width, either one value for every joint or per joint keyed
/// like `"L4-L5"` with an optional `"default"` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetWidth {
    Uniform(f64),
    PerJoint(BTreeMap<String, f64>),
}

impl Default for TargetWidth {
    fn default() -> Self {
        TargetWidth::Uniform(DEFAULT_TARGET_WIDTH)
    }
}

impl TargetWidth {
    pub fn for_joint(&self, upper: Level, lower: Level) -> f64 {
        match self {
            TargetWidth::Uniform(w) => *w,
            TargetWidth::PerJoint(map) => map
                .get(&format!("{upper}-{lower}"))
                .or_else(|| map.get("default"))
                .copied()
                .unwrap_or(DEFAULT_TARGET_WIDTH),
        }
    }

    pub fn validate(&self) -> Result<(), FacetError> {
        let check = |key: &str, w: f64| {
            if w > 0.0 && w.is_finite() {
                Ok(())
            } else {
                Err(FacetError::InvalidParameter(format!(
                    "target width {key} must be positive, got {w}"
                )))
            }
        };
        match self {
            TargetWidth::Uniform(w) => check("", *w),
            TargetWidth::PerJoint(map) => {
                for (k, &w) in map {
                    if k != "default" && parse_joint(k).is_none() {
                        return Err(FacetError::InvalidParameter(format!(
                            "unknown joint key {k:?}; expected e.g. \"L4-L5\" or \"default\""
                        )));
                    }
                    check(k, w)?;
                }
                Ok(())
            }
        }
    }
}

fn parse_joint(key: &str) -> Option<(Level, Level)> {
    let (a, b) = key.split_once('-')?;
    let (a, b): (Level, Level) = (a.parse().ok()?, b.parse().ok()?);
    (b.index() == a.index() + 1).then_some((a, b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FacetParams {
    pub target_width_mm: TargetWidth,
    pub falloff_radius_mm: f64,
    pub max_passes: usize,
}

impl Default for FacetParams {
    fn default() -> Self {
        Self {
            target_width_mm: TargetWidth::default(),
            falloff_radius_mm: DEFAULT_FALLOFF_RADIUS,
            max_passes: DEFAULT_MAX_PASSES,
        }
    }
}

impl FacetParams {
    pub fn validate(&self) -> Result<(), FacetError> {
        self.target_width_mm.validate()?;
        if !(self.falloff_radius_mm > 0.0 && self.falloff_radius_mm.is_finite()) {
            return Err(FacetError::InvalidParameter(
                "facet.falloff_radius_mm must be positive".into(),
            ));
        }
        if self.max_passes < 1 {
            return Err(FacetError::InvalidParameter(
                "facet.max_passes must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome for one joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointReport {
    pub upper: Level,
    pub lower: Level,
    pub side: Side,
    pub target_width: f64,
    pub before: GapReport,
    pub after: GapReport,
    pub passes: usize,
    pub converged: bool,
}

fn settled(report: &GapReport, target: f64, tolerance: f64) -> bool {
    (report.mean_gap - target).abs() <= tolerance && report.min_gap > 0.0
}

/// Warps each joint's two facets symmetrically along the contact normal,
/// each by half the gap error, re-measuring between passes. Joints still
/// off target after `max_passes` are logged and reported, not treated as
/// errors.
pub fn align_facets(spine: &SpineModel, params: &FacetParams) -> Result<(SpineModel, Vec<JointReport>), FacetError> {
    params.validate()?;
    let mut out = spine.clone();
    let mut reports = Vec::new();
    let joints: Vec<(usize, usize)> = (1..spine.len())
        .filter(|&i| spine.vertebrae()[i].level.index() == spine.vertebrae()[i - 1].level.index() + 1)
        .map(|i| (i - 1, i))
        .collect();

    for (ui, li) in joints {
        let (upper_level, lower_level) = (spine.vertebrae()[ui].level, spine.vertebrae()[li].level);
        let target = params.target_width_mm.for_joint(upper_level, lower_level);
        let pairs = {
            let v = out.vertebrae();
            match identify_facet_pairs(&v[ui].mesh, &v[li].mesh) {
                Ok(p) => p,
                Err(FacetError::MissingLabels(which)) => {
                    log::warn!("{upper_level}-{lower_level}: {which} mesh has no facet labels; joint skipped");
                    continue;
                }
                Err(e) => return Err(e),
            }
        };
        for pair in pairs {
            let before = {
                let v = out.vertebrae();
                measure_gap(&pair, &v[ui].mesh, &v[li].mesh)
            };
            let mut after = before;
            let mut passes = 0;
            // aim well inside the tolerance so later joints sharing a
            // vertebra do not push this one out of it
            while passes < params.max_passes && !settled(&after, target, 0.01 * WIDTH_TOLERANCE) {
                passes += 1;
                let mut shift = (after.mean_gap - target) / 2.0;
                if after.min_gap - 2.0 * shift <= 0.0 {
                    // uneven facets: open until the closest point clears
                    shift = shift.min((after.min_gap - 0.5 * target) / 2.0);
                }
                let n = pair.contact_normal.into_inner();
                let verts = out.vertebrae_mut();
                let upper = &verts[ui].mesh;
                let moved_upper = elastic_warp(
                    upper,
                    &pair.upper_region,
                    &vec![-n * shift; pair.upper_region.len()],
                    params.falloff_radius_mm,
                )?;
                verts[ui].mesh = moved_upper;
                let lower = &verts[li].mesh;
                let moved_lower = elastic_warp(
                    lower,
                    &pair.lower_region,
                    &vec![n * shift; pair.lower_region.len()],
                    params.falloff_radius_mm,
                )?;
                verts[li].mesh = moved_lower;
                let v = out.vertebrae();
                after = measure_gap(&pair, &v[ui].mesh, &v[li].mesh);
            }
            let converged = settled(&after, target, WIDTH_TOLERANCE);
            if !converged {
                log::warn!(
                    "{upper_level}-{lower_level} {}: joint space {:.3} mm (min {:.3}) after {passes} passes, target {target} mm",
                    pair.side,
                    after.mean_gap,
                    after.min_gap
                );
            }
            reports.push(JointReport {
                upper: upper_level,
                lower: lower_level,
                side: pair.side,
                target_width: target,
                before,
                after,
                passes,
                converged,
            });
        }
    }
    // measure once more: a later joint may have dragged an earlier one
    for r in reports.iter_mut() {
        let ui = out
            .vertebrae()
            .iter()
            .position(|v| v.level == r.upper)
            .expect("level present");
        let v = out.vertebrae();
        if let Ok(pairs) = identify_facet_pairs(&v[ui].mesh, &v[ui + 1].mesh) {
            if let Some(pair) = pairs.iter().find(|p| p.side == r.side) {
                r.after = measure_gap(pair, &v[ui].mesh, &v[ui + 1].mesh);
                r.converged = settled(&r.after, r.target_width, WIDTH_TOLERANCE);
            }
        }
    }
    Ok((out, reports))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{labelled_grid_box, BoxFace};

    /// Lower plate facing +x at x = 0, upper plate facing -x at x = gap.
    fn plates(gap: f64) -> (TriangleMesh, TriangleMesh) {
        let lower = labelled_grid_box(
            Point3::new(-4.0, -10.0, -10.0),
            Point3::new(0.0, 10.0, 10.0),
            1.0,
            Region::Unlabeled,
            Some((
                BoxFace {
                    axis: 0,
                    max_side: true,
                },
                Region::SuperiorLeftFacet,
            )),
        );
        let upper = labelled_grid_box(
            Point3::new(gap, -4.0, -4.0),
            Point3::new(gap + 4.0, 4.0, 4.0),
            1.0,
            Region::Unlabeled,
            Some((
                BoxFace {
                    axis: 0,
                    max_side: false,
                },
                Region::InferiorLeftFacet,
            )),
        );
        (upper, lower)
    }

    #[test]
    fn parallel_plates_gap() {
        for (gap, expect) in [(2.0, 2.0), (-0.5, -0.5), (0.0, 0.0)] {
            let (u, l) = plates(gap);
            let pairs = identify_facet_pairs(&u, &l).unwrap();
            assert_eq!(pairs.len(), 1);
            assert!((pairs[0].contact_normal.into_inner() - Vector3::x()).norm() < 1e-12);
            let r = measure_gap(&pairs[0], &u, &l);
            assert!((r.mean_gap - expect).abs() < 1e-9, "{gap}: {r:?}");
            assert!(r.min_gap <= r.mean_gap && r.mean_gap <= r.max_gap);
        }
    }

    #[test]
    fn unlabeled_lower_is_an_error() {
        let (u, l) = plates(1.0);
        let l = l.with_labels(None).unwrap();
        assert_eq!(identify_facet_pairs(&u, &l), Err(FacetError::MissingLabels("lower")));
    }

    #[test]
    fn zero_displacement_is_identity() {
        let (u, _) = plates(1.0);
        let region = u.region_vertices(Region::InferiorLeftFacet);
        let out = elastic_warp(&u, &region, &vec![Vector3::zeros(); region.len()], 5.0).unwrap();
        assert_eq!(out, u);
    }

    #[test]
    fn warp_is_local_and_keeps_connectivity() {
        let (u, _) = plates(0.0);
        let far = crate::synthetic::grid_box(
            Point3::new(100.0, 0.0, 0.0),
            Point3::new(102.0, 2.0, 2.0),
            1.0,
            Region::Unlabeled,
        );
        let mesh = TriangleMesh::merge(&[u.clone(), far]);
        let region = mesh.region_vertices(Region::InferiorLeftFacet);
        let disp = Vector3::new(3.0, 0.0, 0.0);
        let out = elastic_warp(&mesh, &region, &vec![disp; region.len()], 5.0).unwrap();
        assert_eq!(out.triangles(), mesh.triangles());
        for &i in &region {
            assert_eq!(out.vertices()[i], mesh.vertices()[i] + disp);
        }
        for i in u.vertex_count()..mesh.vertex_count() {
            assert!((out.vertices()[i] - mesh.vertices()[i]).norm() < 1e-10 * disp.norm());
        }
        // neighbours move by the kernel weight of their distance
        let i = (0..u.vertex_count())
            .find(|&i| {
                (mesh.vertices()[i].x - 1.0).abs() < 1e-12 && mesh.vertices()[i].y == 4.0 && mesh.vertices()[i].z == 0.0
            })
            .unwrap();
        let w = (-(1.0f64 / 5.0).powi(2)).exp();
        assert!((out.vertices()[i] - mesh.vertices()[i] - disp * w).norm() < 1e-12);
    }

    #[test]
    fn per_joint_widths() {
        let w: TargetWidth = serde_json::from_str(r#"{"L4-L5": 2.0, "default": 1.2}"#).unwrap();
        assert_eq!(w.for_joint(Level::L4, Level::L5), 2.0);
        assert_eq!(w.for_joint(Level::L1, Level::L2), 1.2);
        assert!(w.validate().is_ok());
        let bad: TargetWidth = serde_json::from_str(r#"{"L4-L6": 2.0}"#).unwrap();
        assert!(bad.validate().is_err());
        let s: TargetWidth = serde_json::from_str("1.5").unwrap();
        assert_eq!(s, TargetWidth::Uniform(1.5));
    }
}
