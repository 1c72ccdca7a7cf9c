mod common;

use common::*;
use nalgebra::{Matrix3, Point3, Rotation3, Vector3};
use proptest::prelude::*;
use spinerecon::anatomy::AxesEstimate;
use spinerecon::evaluation::point_to_model_distance;
use spinerecon::mesh::SurfaceIndex;
use spinerecon::registration::{
    compute_frame, compute_registration, fit_rigid, frame_to_transform, icp_rigid, register_spine, IcpParams,
    RegistrationMode, RegistrationParams, VertebraFrame,
};
use spinerecon::synthetic::{make_registration_case, Perturbation};
use spinerecon::transform::Transform4;

fn vec3() -> impl Strategy<Value = Vector3<f64>> {
    (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64).prop_map(|(x, y, z)| Vector3::new(x, y, z))
}

/// Right-handed frame with moderately skewed axes and lengths in [5, 60].
fn frame() -> impl Strategy<Value = VertebraFrame> {
    (
        (-3.2..3.2f64, -1.5..1.5f64, -3.2..3.2f64),
        (5.0..60.0f64, 5.0..60.0f64, 5.0..60.0f64),
        (-0.3..0.3f64, -0.3..0.3f64, -0.3..0.3f64),
        vec3(),
    )
        .prop_map(|((r, p, y), (lx, ly, lz), (a, b, c), center)| {
            let rot = Rotation3::from_euler_angles(r, p, y);
            let skew = Matrix3::new(1.0, a, b, 0.0, 1.0, c, 0.0, 0.0, 1.0);
            let m = rot.matrix() * skew;
            VertebraFrame::new(
                m.column(0) * lx,
                m.column(1) * ly,
                m.column(2) * lz,
                Point3::from(center),
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn registration_of_frame_onto_itself_is_identity(f in frame()) {
        let r = compute_registration(&f, &f).unwrap();
        prop_assert!(r.max_abs_diff(&Transform4::identity()) <= 1e-9);
    }

    #[test]
    fn registration_maps_source_placement_onto_target(s in frame(), t in frame()) {
        let r = compute_registration(&s, &t).unwrap();
        let lhs = r.compose(&frame_to_transform(&s));
        prop_assert!(lhs.max_abs_diff(&frame_to_transform(&t)) <= 1e-9);
    }

    #[test]
    fn uniform_target_scaling_scales_registration(s in frame(), t in frame(), k in 0.2..5.0f64) {
        let scaled = VertebraFrame::new(t.x * k, t.y * k, t.z * k, t.center).unwrap();
        let r = compute_registration(&s, &t).unwrap().linear();
        let rk = compute_registration(&s, &scaled).unwrap().linear();
        for c in 0..3 {
            let (a, b) = (r.column(c), rk.column(c));
            prop_assert!((b.norm() - k * a.norm()).abs() <= 1e-9 * b.norm().max(1.0));
            prop_assert!((b.normalize() - a.normalize()).amax() <= 1e-9);
        }
    }

    #[test]
    fn fitted_transform_is_rigid(
        seed in 0u64..1000,
        noise in 0.0..2.0f64,
    ) {
        let mut r = rng(seed);
        let pts: Vec<Point3<f64>> = (0..30).map(|_| Point3::from(random_unit(&mut r).into_inner() * 20.0)).collect();
        let truth = random_rigid(&mut r, 180.0, 30.0);
        let moved: Vec<_> = pts
            .iter()
            .map(|p| truth.apply_point(p) + random_unit(&mut r).into_inner() * noise)
            .collect();
        let fit = fit_rigid(&pts, &moved).unwrap();
        prop_assert!(fit.is_rigid(1e-9));
        if noise == 0.0 {
            prop_assert!(fit.max_abs_diff(&truth) < 1e-9);
        }
    }
}

#[test]
fn frame_of_translated_landmarks_shifts_center_only() {
    let spine = default_spine(1);
    let set = spine.spine.vertebrae()[2].landmarks.unwrap();
    let shift = Transform4::from_translation(Vector3::new(5.0, -3.0, 7.0));
    let (a, b) = (
        compute_frame(&set).unwrap(),
        compute_frame(&set.transformed(&shift).unwrap()).unwrap(),
    );
    for (u, v) in [(a.x, b.x), (a.y, b.y), (a.z, b.z)] {
        assert!((u - v).amax() < 1e-12);
    }
    assert!((b.center - a.center - Vector3::new(5.0, -3.0, 7.0)).amax() < 1e-12);
}

fn params(mode: RegistrationMode) -> RegistrationParams {
    RegistrationParams {
        mode,
        anatomy: obb_anatomy(),
        ..RegistrationParams::default()
    }
}

#[test]
fn ours_recovers_random_affines() {
    let spine = default_spine(7);
    let perturbation = Perturbation {
        max_rotation_deg: 30.0,
        max_translation_mm: 50.0,
        scale_range: [0.8, 1.25],
        noise_sd: 0.0,
    };
    for seed in 0..5 {
        let case = make_registration_case(&spine.spine, &perturbation, seed).unwrap();
        let reg = register_spine(&case.atlas, &case.targets, &params(RegistrationMode::Ours)).unwrap();
        for ((level, got), want) in reg.transforms.iter().zip(&case.true_transforms) {
            assert!(
                got.max_abs_diff(want) < 1e-6,
                "seed {seed} {level}: {got:?} vs {want:?}"
            );
        }
        for (v, t) in reg.registered.vertebrae().iter().zip(case.truth.vertebrae()) {
            let d = point_to_model_distance(&v.mesh, &SurfaceIndex::new(&t.mesh)).unwrap();
            assert!(d < 0.1, "seed {seed} {}: {d}", v.level);
        }
    }
}

#[test]
fn icp_recovers_small_rigid_motion() {
    let spine = default_spine(3);
    let mut r = rng(11);
    let icp = IcpParams {
        max_iterations: 200,
        convergence_tol: 1e-9,
        ..IcpParams::default()
    };
    for v in spine.spine.vertebrae().iter().take(3) {
        let motion = random_rigid(&mut r, 5.0, 2.0);
        let index = SurfaceIndex::new(&v.mesh.transformed(&motion));
        let result = icp_rigid(v.mesh.vertices(), &index, &Transform4::identity(), &icp).unwrap();
        assert!(result.transform.is_rigid(1e-9));
        assert!(result.history.windows(2).all(|w| w[1] <= w[0]), "{:?}", result.history);
        let residual = result.transform.compose(&motion.inverse());
        assert!(rotation_angle_deg(&residual) < 0.1, "{}", rotation_angle_deg(&residual));
        let centroid = v.landmarks.unwrap().superior_centroid();
        let drift = (result.transform.apply_point(&centroid) - motion.apply_point(&centroid)).norm();
        assert!(drift < 0.05, "{drift}");
    }
}

#[test]
fn icp_refinement_never_hurts_noise_free_pairs() {
    let spine = default_spine(5);
    let perturbation = Perturbation {
        max_rotation_deg: 20.0,
        max_translation_mm: 20.0,
        scale_range: [0.9, 1.1],
        noise_sd: 0.0,
    };
    let case = make_registration_case(&spine.spine, &perturbation, 2).unwrap();
    let ours = register_spine(&case.atlas, &case.targets, &params(RegistrationMode::Ours)).unwrap();
    let hybrid = register_spine(&case.atlas, &case.targets, &params(RegistrationMode::OursIcp)).unwrap();
    for ((a, b), t) in ours
        .registered
        .vertebrae()
        .iter()
        .zip(hybrid.registered.vertebrae())
        .zip(case.truth.vertebrae())
    {
        let index = SurfaceIndex::new(&t.mesh);
        let (da, db) = (
            point_to_model_distance(&a.mesh, &index).unwrap(),
            point_to_model_distance(&b.mesh, &index).unwrap(),
        );
        assert!(db <= da + 1e-6, "{}: hybrid {db} vs ours {da}", a.level);
    }
}

#[test]
fn icp_baselines_produce_rigid_transforms() {
    let spine = default_spine(9);
    let perturbation = Perturbation {
        max_rotation_deg: 5.0,
        max_translation_mm: 3.0,
        ..Perturbation::default()
    };
    let case = make_registration_case(&spine.spine, &perturbation, 4).unwrap();
    for mode in [RegistrationMode::Icp, RegistrationMode::IcpVb] {
        let reg = register_spine(&case.atlas, &case.targets, &params(mode)).unwrap();
        assert_eq!(reg.transforms.len(), 5);
        for (level, t) in &reg.transforms {
            assert!(t.is_rigid(1e-9), "{mode} {level}");
        }
        assert!(reg.registered.vertebrae().iter().all(|v| v.landmarks.is_some()));
    }
}

#[test]
fn mismatched_levels_are_rejected() {
    let spine = default_spine(0);
    let mut fewer = spine.spine.clone().into_vertebrae();
    fewer.pop();
    let fewer = spinerecon::spine::SpineModel::new(fewer).unwrap();
    assert!(register_spine(&spine.spine, &fewer, &RegistrationParams::default()).is_err());
}

#[test]
fn registration_is_deterministic() {
    let spine = default_spine(4);
    let case = make_registration_case(
        &spine.spine,
        &Perturbation {
            max_rotation_deg: 5.0,
            max_translation_mm: 5.0,
            noise_sd: 0.3,
            ..Perturbation::default()
        },
        8,
    )
    .unwrap();
    let p = RegistrationParams {
        hint: AxesEstimate::world(),
        ..params(RegistrationMode::OursIcp)
    };
    let a = register_spine(&case.atlas, &case.targets, &p).unwrap();
    let b = register_spine(&case.atlas, &case.targets, &p).unwrap();
    assert_eq!(a.transforms, b.transforms);
}
