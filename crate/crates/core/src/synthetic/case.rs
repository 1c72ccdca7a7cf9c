use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::spine::random_direction;
use super::SyntheticError;
use crate::registration::compute_frame;
use crate::spine::{vertebral_body, SpineModel, Vertebra};
use crate::transform::Transform4;

/// Bounds of the per-level affine applied to build a registration case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    pub max_rotation_deg: f64,
    pub max_translation_mm: f64,
    /// Scales along each local axis are drawn from `[min, max]`.
    pub scale_range: [f64; 2],
    /// Standard deviation of the Gaussian jitter added to target vertices.
    pub noise_sd: f64,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            max_rotation_deg: 0.0,
            max_translation_mm: 0.0,
            scale_range: [1.0, 1.0],
            noise_sd: 0.0,
        }
    }
}

impl Perturbation {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |m: &str| Err(SyntheticError::InvalidParameter(m.into()));
        if !(self.max_rotation_deg >= 0.0 && self.max_rotation_deg <= 180.0) {
            return bad("max_rotation_deg must lie in [0, 180]");
        }
        if !(self.max_translation_mm >= 0.0 && self.max_translation_mm.is_finite()) {
            return bad("max_translation_mm must be non-negative");
        }
        let [lo, hi] = self.scale_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return bad("scale_range must satisfy 0 < min <= max");
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return bad("noise_sd must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct RegistrationCase {
    pub atlas: SpineModel,
    /// Vertebral bodies of the perturbed vertebrae, with vertex noise.
    pub targets: SpineModel,
    /// Complete perturbed vertebrae without noise, landmarks included.
    pub truth: SpineModel,
    pub true_transforms: Vec<Transform4>,
}

/// Applies to each vertebra `T(c + t) · Q · U·diag(s)·U⁻¹ · T(-c)`, with
/// `c` and `U` the center and unit axes of its landmark frame, `Q` a random
/// rotation, `t` a random translation and `s` random per-axis scales.
/// Every vertebra must carry landmarks.
pub fn make_registration_case(
    spine: &SpineModel,
    perturbation: &Perturbation,
    seed: u64,
) -> Result<RegistrationCase, SyntheticError> {
    perturbation.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = (perturbation.noise_sd > 0.0)
        .then(|| Normal::new(0.0, perturbation.noise_sd).expect("validated standard deviation"));
    let [lo, hi] = perturbation.scale_range;

    let mut targets = Vec::with_capacity(spine.len());
    let mut truth = Vec::with_capacity(spine.len());
    let mut transforms = Vec::with_capacity(spine.len());
    for v in spine.vertebrae() {
        let landmarks = v
            .landmarks
            .ok_or_else(|| SyntheticError::InvalidParameter(format!("{} has no landmarks", v.level)))?;
        let frame =
            compute_frame(&landmarks).map_err(|e| SyntheticError::InvalidParameter(format!("{}: {e}", v.level)))?;
        let u = frame.unit_basis();
        let u_inv = u.try_inverse().expect("validated frame basis is invertible");

        let axis = random_direction(&mut rng);
        let angle = rng.random_range(0.0..=1.0) * perturbation.max_rotation_deg.to_radians();
        let dir = random_direction(&mut rng);
        let len = rng.random_range(0.0..=1.0) * perturbation.max_translation_mm;
        let scales = Vector3::from_fn(|_, _| if hi > lo { rng.random_range(lo..=hi) } else { lo });

        let q = Rotation3::from_axis_angle(&axis, angle);
        let linear: Matrix3<f64> = q.matrix() * u * Matrix3::from_diagonal(&scales) * u_inv;
        let c = frame.center.coords;
        let a = Transform4::from_parts(linear, c + dir.into_inner() * len - linear * c)?;

        let moved = v.transformed(&a);
        let mut body = vertebral_body(&moved.mesh);
        if let Some(noise) = &noise {
            let jittered = body
                .vertices()
                .iter()
                .map(|p| p + Vector3::from_fn(|_, _| noise.sample(&mut rng)))
                .collect();
            body = body.with_vertices(jittered).expect("same vertex count");
        }
        targets.push(Vertebra::new(v.level, body));
        truth.push(moved);
        transforms.push(a);
    }
    Ok(RegistrationCase {
        atlas: spine.clone(),
        targets: SpineModel::new(targets).expect("levels come from a valid spine"),
        truth: SpineModel::new(truth).expect("levels come from a valid spine"),
        true_transforms: transforms,
    })
}
