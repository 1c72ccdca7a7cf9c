use nalgebra::{Point3, Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::vertebra::{generate_vertebra, VertebraParams};
use super::SyntheticError;
use crate::evaluation::{MorphometricRecord, PairMorphometrics, VertebraMorphometrics};
use crate::level::Level;
use crate::spine::{SpineModel, Vertebra};
use crate::transform::Transform4;

/// Disc between two adjacent vertebrae.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairParams {
    pub ivd_height: f64,
    /// Degrees between the facing endplates, positive when the disc opens
    /// anteriorly.
    pub fsu_angle: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpineParams {
    /// One entry per level, superior to inferior, consecutive levels.
    pub vertebrae: Vec<VertebraParams>,
    /// `pairs[i]` sits between `vertebrae[i]` and `vertebrae[i + 1]`.
    pub pairs: Vec<PairParams>,
    pub seed: u64,
    /// Upper bound of the random rotation applied to the whole spine.
    pub pose_rotation_deg: f64,
    /// Upper bound of the random translation applied to the whole spine.
    pub pose_translation_mm: f64,
}

impl Default for SpineParams {
    fn default() -> Self {
        let dims = [
            (40.0, 32.0, 25.0, 0.0),
            (42.0, 33.0, 26.0, 1.0),
            (44.0, 34.0, 27.0, 2.0),
            (46.0, 35.0, 27.0, 2.0),
            (48.0, 36.0, 26.0, 3.0),
        ];
        let vertebrae = Level::ALL
            .iter()
            .zip(dims)
            .map(|(&level, (w, d, h, tilt))| VertebraParams {
                level,
                vb_width: w,
                vb_depth: d,
                vb_height: h,
                endplate_tilt: tilt,
                ..VertebraParams::default()
            })
            .collect();
        let pairs = [(5.0, 4.0), (6.0, 6.0), (6.0, 8.0), (7.0, 10.0)]
            .map(|(ivd_height, fsu_angle)| PairParams { ivd_height, fsu_angle })
            .to_vec();
        Self {
            vertebrae,
            pairs,
            seed: 0,
            pose_rotation_deg: 5.0,
            pose_translation_mm: 10.0,
        }
    }
}

impl SpineParams {
    pub fn validate(&self) -> Result<(), SyntheticError> {
        let bad = |m: String| Err(SyntheticError::InvalidParameter(m));
        if self.vertebrae.is_empty() {
            return bad("at least one vertebra is required".into());
        }
        for w in self.vertebrae.windows(2) {
            if w[1].level.index() != w[0].level.index() + 1 {
                return bad(format!(
                    "levels must be consecutive, found {} then {}",
                    w[0].level, w[1].level
                ));
            }
        }
        if self.pairs.len() + 1 != self.vertebrae.len() {
            return bad(format!(
                "{} vertebrae need {} pairs, got {}",
                self.vertebrae.len(),
                self.vertebrae.len() - 1,
                self.pairs.len()
            ));
        }
        for (i, p) in self.pairs.iter().enumerate() {
            let joint = format!("{}-{}", self.vertebrae[i].level, self.vertebrae[i + 1].level);
            if !(p.ivd_height > 0.0 && p.ivd_height.is_finite()) {
                return bad(format!("{joint}: ivd_height must be positive, got {}", p.ivd_height));
            }
            if !(p.fsu_angle.abs() < 45.0) {
                return bad(format!("{joint}: |fsu_angle| must be below 45°, got {}", p.fsu_angle));
            }
        }
        for (name, v) in [
            ("pose_rotation_deg", self.pose_rotation_deg),
            ("pose_translation_mm", self.pose_translation_mm),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be non-negative, got {v}"));
            }
        }
        for v in &self.vertebrae {
            v.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedSpine {
    /// Vertebrae in world coordinates with their analytic landmarks.
    pub spine: SpineModel,
    pub morphometrics: MorphometricRecord,
    /// Local-to-world placement of each vertebra.
    pub poses: Vec<Transform4>,
}

fn rotation_x(angle: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), angle)
}

/// Uniform random direction.
pub(crate) fn random_direction(rng: &mut ChaCha8Rng) -> Unit<Vector3<f64>> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        );
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return Unit::new_normalize(v);
        }
    }
}

/// Stacks the vertebrae from the bottom up. Each vertebra is rotated about
/// its lateral axis only, so facet gaps are kept; the disc axis is the mean
/// of the two longitudinal axes and the facing plate centers are
/// `ivd_height` apart along it. The whole spine is then re-centered, its
/// mean sagittal tilt removed, and a seeded random rigid pose applied.
pub fn generate_spine(params: &SpineParams) -> Result<GeneratedSpine, SyntheticError> {
    params.validate()?;
    let generated = params
        .vertebrae
        .par_iter()
        .map(generate_vertebra)
        .collect::<Result<Vec<_>, _>>()?;

    let n = params.vertebrae.len();
    let mut angles = vec![0.0f64; n];
    let mut centers = vec![Point3::origin(); n];
    for i in (0..n - 1).rev() {
        let (upper, lower) = (&params.vertebrae[i], &params.vertebrae[i + 1]);
        let pair = &params.pairs[i];
        angles[i] = angles[i + 1] + (pair.fsu_angle + (upper.endplate_tilt + lower.endplate_tilt) / 2.0).to_radians();
        let (ru, rl) = (rotation_x(angles[i]), rotation_x(angles[i + 1]));
        let axis = (ru * Vector3::z() + rl * Vector3::z()).normalize();
        let lower_plate = centers[i + 1] + rl * Vector3::new(0.0, 0.0, lower.vb_height / 2.0);
        let upper_plate = lower_plate + axis * pair.ivd_height;
        centers[i] = upper_plate + ru * Vector3::new(0.0, 0.0, upper.vb_height / 2.0);
    }
    let mean_angle = angles.iter().sum::<f64>() / n as f64;
    let mean_center = centers.iter().fold(Vector3::zeros(), |a, c| a + c.coords) / n as f64;
    let level_out = rotation_x(-mean_angle);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let jitter_axis = random_direction(&mut rng);
    let jitter_angle = rng.random_range(0.0..=1.0) * params.pose_rotation_deg.to_radians();
    let jitter_dir = random_direction(&mut rng);
    let jitter_len = rng.random_range(0.0..=1.0) * params.pose_translation_mm;
    let jitter = Rotation3::from_axis_angle(&jitter_axis, jitter_angle) * level_out;
    let shift = jitter_dir.into_inner() * jitter_len;

    let mut vertebrae = Vec::with_capacity(n);
    let mut poses = Vec::with_capacity(n);
    for (i, g) in generated.into_iter().enumerate() {
        let rotation = jitter * rotation_x(angles[i]);
        let translation = jitter * (centers[i].coords - mean_center) + shift;
        let pose = Transform4::from_parts(*rotation.matrix(), translation).expect("rigid pose is invertible");
        let landmarks = g.landmarks.transformed(&pose).expect("rigid image of valid landmarks");
        vertebrae.push(Vertebra {
            level: params.vertebrae[i].level,
            mesh: g.mesh.transformed(&pose),
            landmarks: Some(landmarks),
        });
        poses.push(pose);
    }

    let morphometrics = MorphometricRecord {
        vertebrae: params
            .vertebrae
            .iter()
            .map(|v| VertebraMorphometrics {
                level: v.level,
                vb_width: v.vb_width,
                vb_depth: v.vb_depth,
                vb_height: v.vb_height,
            })
            .collect(),
        pairs: params
            .pairs
            .iter()
            .enumerate()
            .map(|(i, p)| PairMorphometrics {
                upper: params.vertebrae[i].level,
                lower: params.vertebrae[i + 1].level,
                ivd_height: p.ivd_height,
                fsu_angle: p.fsu_angle,
            })
            .collect(),
    };
    Ok(GeneratedSpine {
        spine: SpineModel::new(vertebrae).expect("levels validated as consecutive"),
        morphometrics,
        poses,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_geometry() {
        let p = SpineParams {
            vertebrae: SpineParams::default()
                .vertebrae
                .into_iter()
                .map(|v| VertebraParams {
                    tessellation_edge: 3.0,
                    ..v
                })
                .collect(),
            ..Default::default()
        };
        let a = generate_spine(&p).unwrap();
        let b = generate_spine(&p).unwrap();
        for (x, y) in a.spine.vertebrae().iter().zip(b.spine.vertebrae()) {
            assert_eq!(x.mesh, y.mesh);
        }
        let c = generate_spine(&SpineParams { seed: 1, ..p }).unwrap();
        assert_ne!(a.spine.vertebrae()[0].mesh, c.spine.vertebrae()[0].mesh);
    }

    #[test]
    fn validation_catches_bad_pairs() {
        let mut p = SpineParams::default();
        p.pairs[1].ivd_height = 0.0;
        assert!(generate_spine(&p).is_err());
        let mut p = SpineParams::default();
        p.pairs.pop();
        assert!(generate_spine(&p).is_err());
        let mut p = SpineParams::default();
        p.vertebrae[2].endplate_tilt = 45.0;
        assert!(generate_spine(&p).is_err());
    }
}
