//! Reconstruction metrics: point-to-model distance, landmark error and
//! morphometric errors, with JSON and CSV reports.

mod morphometry;

pub use morphometry::{
    fsu_angle, ivd_height, mean_lateral_axis, mean_longitudinal_axis, measure_morphometrics, vb_dimensions,
    MorphometricRecord, PairMorphometrics, VertebraMorphometrics,
};

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anatomy::LandmarkSet;
use crate::facet::JointReport;
use crate::level::Level;
use crate::mesh::{Region, SurfaceIndex, TriangleMesh};
use crate::spine::{vertebral_body, SpineError, SpineModel};

#[derive(Error, Debug, Clone, PartialEq)]
pub enum EvaluationError {
    #[error(transparent)]
    Spine(#[from] SpineError),

    #[error("degenerate measurement: {0}")]
    Degenerate(String),

    #[error("{level}: {message}")]
    Level { level: Level, message: String },
}

impl EvaluationError {
    pub(crate) fn at(level: Level, message: String) -> Self {
        EvaluationError::Level { level, message }
    }
}

/// Mean over `points` of the distance to the closest point of the indexed
/// surface. `None` for an empty point list or surface.
pub fn mean_surface_distance(points: &[nalgebra::Point3<f64>], target: &SurfaceIndex) -> Option<f64> {
    if points.is_empty() || target.triangle_count() == 0 {
        return None;
    }
    let d: Vec<f64> = points
        .par_iter()
        .map(|p| target.closest_point(p).expect("nonempty surface").distance)
        .collect();
    Some(d.iter().sum::<f64>() / d.len() as f64)
}

/// Mean closest-point distance from every vertex of `source` to the target
/// surface.
pub fn point_to_model_distance(source: &TriangleMesh, target: &SurfaceIndex) -> Option<f64> {
    mean_surface_distance(source.vertices(), target)
}

/// Mean Euclidean distance between label-matched landmarks.
pub fn landmark_mae(a: &LandmarkSet, b: &LandmarkSet) -> f64 {
    a.points()
        .iter()
        .zip(b.points())
        .map(|(p, q)| (p - q).norm())
        .sum::<f64>()
        / 8.0
}

/// Metrics of one level. Pair metrics (disc height and FSU angle) sit on
/// the upper level of the pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMetrics {
    pub level: Level,
    pub p2m_vb_mm: Option<f64>,
    pub p2m_full_mm: Option<f64>,
    pub landmark_mae_mm: Option<f64>,
    pub width_mae_mm: Option<f64>,
    pub depth_mae_mm: Option<f64>,
    pub height_mae_mm: Option<f64>,
    pub ivd_mae_mm: Option<f64>,
    pub fsu_mae_deg: Option<f64>,
}

/// Arithmetic means of the per-level values that are present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanMetrics {
    pub p2m_vb_mm: Option<f64>,
    pub p2m_full_mm: Option<f64>,
    pub landmark_mae_mm: Option<f64>,
    pub width_mae_mm: Option<f64>,
    pub depth_mae_mm: Option<f64>,
    pub height_mae_mm: Option<f64>,
    pub ivd_mae_mm: Option<f64>,
    pub fsu_mae_deg: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationReport {
    pub mode: String,
    pub levels: Vec<LevelMetrics>,
    pub mean: MeanMetrics,
    pub time_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub facet_joints: Vec<JointReport>,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Points of `mesh` labelled vertebral body, or all points when the mesh
/// has no such label.
fn body_points(mesh: &TriangleMesh) -> Vec<nalgebra::Point3<f64>> {
    if mesh.has_region(Region::VertebralBody) {
        mesh.region_vertices(Region::VertebralBody)
            .into_iter()
            .map(|i| mesh.vertices()[i])
            .collect()
    } else {
        mesh.vertices().to_vec()
    }
}

/// Compares a registered spine with the ground truth. Landmark-based
/// metrics need landmarks on both sides and are left empty otherwise.
pub fn evaluate_reconstruction(
    registered: &SpineModel,
    ground_truth: &SpineModel,
    gt_landmarks: Option<&[(Level, LandmarkSet)]>,
    mode: &str,
) -> Result<RegistrationReport, EvaluationError> {
    registered.check_same_levels(ground_truth)?;

    let distances: Vec<(Option<f64>, Option<f64>)> = registered
        .vertebrae()
        .par_iter()
        .zip(ground_truth.vertebrae().par_iter())
        .map(|(r, g)| {
            let full = SurfaceIndex::new(&g.mesh);
            let body = SurfaceIndex::new(&vertebral_body(&g.mesh));
            (
                mean_surface_distance(&body_points(&r.mesh), &body),
                point_to_model_distance(&r.mesh, &full),
            )
        })
        .collect();

    // landmarks where both sides have them
    let pairs: Vec<Option<(LandmarkSet, LandmarkSet)>> = registered
        .vertebrae()
        .iter()
        .map(|r| {
            let gt = gt_landmarks?.iter().find(|(l, _)| *l == r.level)?.1;
            Some((r.landmarks?, gt))
        })
        .collect();
    let levels: Vec<Level> = registered.levels();
    let morph = |pick: &dyn Fn(&(LandmarkSet, LandmarkSet)) -> LandmarkSet| -> Result<Option<MorphometricRecord>, EvaluationError> {
        if pairs.iter().any(|p| p.is_none()) {
            return Ok(None);
        }
        let sets: Vec<(Level, LandmarkSet)> = levels
            .iter()
            .zip(&pairs)
            .map(|(l, p)| (*l, pick(p.as_ref().expect("checked above"))))
            .collect();
        measure_morphometrics(&sets).map(Some)
    };
    let (reg_morph, gt_morph) = if pairs.iter().all(|p| p.is_some()) {
        (morph(&|p| p.0)?, morph(&|p| p.1)?)
    } else {
        // partial landmarks: measure per level where available
        (None, None)
    };

    let mut metrics = Vec::with_capacity(levels.len());
    for (i, &level) in levels.iter().enumerate() {
        let (p2m_vb_mm, p2m_full_mm) = distances[i];
        let landmark_mae_mm = pairs[i].as_ref().map(|(r, g)| landmark_mae(r, g));
        let dims = |m: &Option<MorphometricRecord>| m.as_ref().and_then(|m| m.vertebra(level).copied());
        let (rv, gv) = (dims(&reg_morph), dims(&gt_morph));
        let diff = |f: fn(&VertebraMorphometrics) -> f64| rv.zip(gv).map(|(a, b)| (f(&a) - f(&b)).abs());
        let pair = |m: &Option<MorphometricRecord>| m.as_ref().and_then(|m| m.pair(level).copied());
        let (rp, gp) = (pair(&reg_morph), pair(&gt_morph));
        metrics.push(LevelMetrics {
            level,
            p2m_vb_mm,
            p2m_full_mm,
            landmark_mae_mm,
            width_mae_mm: diff(|v| v.vb_width),
            depth_mae_mm: diff(|v| v.vb_depth),
            height_mae_mm: diff(|v| v.vb_height),
            ivd_mae_mm: rp.zip(gp).map(|(a, b)| (a.ivd_height - b.ivd_height).abs()),
            fsu_mae_deg: rp.zip(gp).map(|(a, b)| (a.fsu_angle - b.fsu_angle).abs()),
        });
    }
    let mean = MeanMetrics {
        p2m_vb_mm: mean_of(metrics.iter().map(|m| m.p2m_vb_mm)),
        p2m_full_mm: mean_of(metrics.iter().map(|m| m.p2m_full_mm)),
        landmark_mae_mm: mean_of(metrics.iter().map(|m| m.landmark_mae_mm)),
        width_mae_mm: mean_of(metrics.iter().map(|m| m.width_mae_mm)),
        depth_mae_mm: mean_of(metrics.iter().map(|m| m.depth_mae_mm)),
        height_mae_mm: mean_of(metrics.iter().map(|m| m.height_mae_mm)),
        ivd_mae_mm: mean_of(metrics.iter().map(|m| m.ivd_mae_mm)),
        fsu_mae_deg: mean_of(metrics.iter().map(|m| m.fsu_mae_deg)),
    };
    Ok(RegistrationReport {
        mode: mode.to_string(),
        levels: metrics,
        mean,
        time_s: None,
        facet_joints: Vec::new(),
    })
}

pub const CSV_HEADER: &str =
    "mode,level,p2m_vb_mm,p2m_full_mm,landmark_mae_mm,width_mae_mm,depth_mae_mm,height_mae_mm,ivd_mae_mm,fsu_mae_deg,time_s";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per mode and level plus a `mean` row per mode; absent values
/// are empty cells.
pub fn reports_to_csv(reports: &[RegistrationReport]) -> String {
    let mut out = String::new();
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in reports {
        for m in &r.levels {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},",
                r.mode,
                m.level,
                cell(m.p2m_vb_mm),
                cell(m.p2m_full_mm),
                cell(m.landmark_mae_mm),
                cell(m.width_mae_mm),
                cell(m.depth_mae_mm),
                cell(m.height_mae_mm),
                cell(m.ivd_mae_mm),
                cell(m.fsu_mae_deg),
            );
        }
        let m = &r.mean;
        let _ = writeln!(
            out,
            "{},mean,{},{},{},{},{},{},{},{},{}",
            r.mode,
            cell(m.p2m_vb_mm),
            cell(m.p2m_full_mm),
            cell(m.landmark_mae_mm),
            cell(m.width_mae_mm),
            cell(m.depth_mae_mm),
            cell(m.height_mae_mm),
            cell(m.ivd_mae_mm),
            cell(m.fsu_mae_deg),
            cell(r.time_s),
        );
    }
    out
}
