#![allow(dead_code)]

use nalgebra::{Rotation3, Unit, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spinerecon::anatomy::{AnatomyParams, LongitudinalSource, SlabPolicy};
use spinerecon::level::Level;
use spinerecon::synthetic::{generate_spine, GeneratedSpine, PairParams, SpineParams, VertebraParams};
use spinerecon::transform::Transform4;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_unit(rng: &mut ChaCha8Rng) -> Unit<Vector3<f64>> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return Unit::new_normalize(v);
        }
    }
}

/// Rotation about a random axis by up to `max_deg`, translation up to
/// `max_mm` in each coordinate.
pub fn random_rigid(rng: &mut ChaCha8Rng, max_deg: f64, max_mm: f64) -> Transform4 {
    let axis = random_unit(rng);
    let angle = rng.random_range(-max_deg..=max_deg).to_radians();
    let r = Rotation3::from_axis_angle(&axis, angle);
    let t = Vector3::new(
        rng.random_range(-max_mm..=max_mm),
        rng.random_range(-max_mm..=max_mm),
        rng.random_range(-max_mm..=max_mm),
    );
    Transform4::from_parts(*r.matrix(), t).unwrap()
}

pub fn rotation_angle_deg(t: &Transform4) -> f64 {
    let r = t.linear();
    ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Per-body axes; needed once targets are rotated far from each other.
pub fn obb_anatomy() -> AnatomyParams {
    AnatomyParams {
        longitudinal_source: LongitudinalSource::Obb,
        ..AnatomyParams::default()
    }
}

/// Settings that hold up under half-millimeter vertex noise.
pub fn noise_tolerant_anatomy() -> AnatomyParams {
    AnatomyParams {
        cos_threshold: 0.6,
        slab: SlabPolicy::MedianEdgeMultiple(1.0),
        longitudinal_source: LongitudinalSource::Obb,
    }
}

pub fn default_spine(seed: u64) -> GeneratedSpine {
    generate_spine(&SpineParams {
        seed,
        ..SpineParams::default()
    })
    .unwrap()
}

/// Two-level functional spinal unit, L4 over L5, in its canonical pose.
/// `gap` is the lateral clearance built into the upper facets.
pub fn fsu(gap: f64) -> GeneratedSpine {
    let upper = VertebraParams {
        level: Level::L4,
        facet_gap_offset: gap,
        ..VertebraParams::default()
    };
    let lower = VertebraParams {
        level: Level::L5,
        ..VertebraParams::default()
    };
    generate_spine(&SpineParams {
        vertebrae: vec![upper, lower],
        pairs: vec![PairParams {
            ivd_height: 6.0,
            fsu_angle: 0.0,
        }],
        seed: 0,
        pose_rotation_deg: 0.0,
        pose_translation_mm: 0.0,
    })
    .unwrap()
}
