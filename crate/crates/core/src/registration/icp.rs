use nalgebra::{Matrix3, Point3, Vector3};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::RegistrationError;
use crate::mesh::SurfaceIndex;
use crate::transform::Transform4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcpParams {
    pub max_iterations: usize,
    /// Stop once the mean distance improves by less than this (mm).
    pub convergence_tol: f64,
    pub sample_count: usize,
    /// Fraction of the worst correspondences left out of each fit.
    pub outlier_trim_fraction: f64,
    /// Seed for source sampling; set from the run seed, not from config files.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            convergence_tol: 1e-4,
            sample_count: 2000,
            outlier_trim_fraction: 0.0,
            seed: 0,
        }
    }
}

impl IcpParams {
    pub fn validate(&self) -> Result<(), RegistrationError> {
        let bad = |m: &str| Err(RegistrationError::InvalidParameter(m.into()));
        if self.max_iterations < 1 {
            return bad("icp.max_iterations must be at least 1");
        }
        if !(self.convergence_tol > 0.0) {
            return bad("icp.convergence_tol must be positive");
        }
        if self.sample_count < 3 {
            return bad("icp.sample_count must be at least 3");
        }
        if !(0.0..1.0).contains(&self.outlier_trim_fraction) {
            return bad("icp.outlier_trim_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IcpResult {
    /// `rigid · init`.
    pub transform: Transform4,
    /// The rigid correction found on top of `init`.
    pub rigid: Transform4,
    pub mean_distance: f64,
    pub iterations: usize,
    /// Mean correspondence distance before the first and after each accepted step.
    pub history: Vec<f64>,
}

/// Uniform sample of at most `count` points without replacement, in input
/// order. Deterministic for a given seed.
pub fn sample_points(points: &[Point3<f64>], count: usize, seed: u64) -> Vec<Point3<f64>> {
    if points.len() <= count {
        return points.to_vec();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = sample(&mut rng, points.len(), count).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| points[i]).collect()
}

fn correspondences(points: &[Point3<f64>], target: &SurfaceIndex) -> Vec<(Point3<f64>, f64)> {
    points
        .par_iter()
        .map(|p| {
            let sp = target.closest_point(p).expect("target index is nonempty");
            (sp.point, sp.distance)
        })
        .collect()
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    sum / n as f64
}

/// Least-squares rotation and translation taking `from` onto `to`.
pub fn fit_rigid(from: &[Point3<f64>], to: &[Point3<f64>]) -> Result<Transform4, RegistrationError> {
    let n = from.len();
    if n < 3 || to.len() != n {
        return Err(RegistrationError::DegenerateCorrespondences(format!(
            "need at least 3 matched points, got {n}"
        )));
    }
    let cf = from.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n as f64;
    let ct = to.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / n as f64;
    let h = from.iter().zip(to).fold(Matrix3::zeros(), |acc, (a, b)| {
        acc + (a.coords - cf) * (b.coords - ct).transpose()
    });
    let svd = h.svd(true, true);
    let s = svd.singular_values;
    if !(s[1] > 1e-12 * s[0].max(f64::MIN_POSITIVE)) {
        return Err(RegistrationError::DegenerateCorrespondences(
            "cross-covariance has rank below 2 (collinear or coincident points)".into(),
        ));
    }
    let u = svd.u.expect("requested U");
    let v = svd.v_t.expect("requested Vᵀ").transpose();
    let d = (v * u.transpose()).determinant().signum();
    let r = v * Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, d)) * u.transpose();
    Ok(Transform4::from_parts(r, ct - r * cf)?)
}

/// Rigid point-to-point ICP of `source` (mapped through `init`) onto the
/// surface in `target`. A step that would raise the mean correspondence
/// distance is discarded and ends the iteration, so `history` never
/// increases.
pub fn icp_rigid(
    source: &[Point3<f64>],
    target: &SurfaceIndex,
    init: &Transform4,
    params: &IcpParams,
) -> Result<IcpResult, RegistrationError> {
    params.validate()?;
    if target.triangle_count() == 0 {
        return Err(RegistrationError::DegenerateCorrespondences(
            "target surface is empty".into(),
        ));
    }
    let source = sample_points(source, params.sample_count, params.seed);
    if source.len() < 3 {
        return Err(RegistrationError::DegenerateCorrespondences(format!(
            "need at least 3 source points, got {}",
            source.len()
        )));
    }
    let keep = ((source.len() as f64) * (1.0 - params.outlier_trim_fraction)).ceil() as usize;
    let keep = keep.clamp(3, source.len());

    let mut rigid = Transform4::identity();
    let mut moved: Vec<Point3<f64>> = source.iter().map(|p| init.apply_point(p)).collect();
    let mut matches = correspondences(&moved, target);
    let mut current = mean(matches.iter().map(|m| m.1));
    let mut history = vec![current];
    let mut iterations = 0;

    while iterations < params.max_iterations {
        iterations += 1;
        let mut order: Vec<usize> = (0..moved.len()).collect();
        if keep < moved.len() {
            order.sort_by(|&a, &b| matches[a].1.total_cmp(&matches[b].1).then(a.cmp(&b)));
            order.truncate(keep);
        }
        let from: Vec<_> = order.iter().map(|&i| moved[i]).collect();
        let to: Vec<_> = order.iter().map(|&i| matches[i].0).collect();
        let step = fit_rigid(&from, &to)?;
        let candidate: Vec<Point3<f64>> = moved.iter().map(|p| step.apply_point(p)).collect();
        let candidate_matches = correspondences(&candidate, target);
        let next = mean(candidate_matches.iter().map(|m| m.1));
        if next > current {
            break;
        }
        rigid = step.compose(&rigid);
        moved = candidate;
        matches = candidate_matches;
        let improvement = current - next;
        current = next;
        history.push(current);
        if improvement < params.convergence_tol {
            break;
        }
    }
    Ok(IcpResult {
        transform: rigid.compose(init),
        rigid,
        mean_distance: current,
        iterations,
        history,
    })
}
