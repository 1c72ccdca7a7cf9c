mod common;

use common::*;
use nalgebra::{Matrix4, Vector3};
use proptest::prelude::*;
use spinerecon::anatomy::LandmarkSet;
use spinerecon::evaluation::{
    evaluate_reconstruction, fsu_angle, landmark_mae, measure_morphometrics, point_to_model_distance, reports_to_csv,
    CSV_HEADER,
};
use spinerecon::level::Level;
use spinerecon::mesh::SurfaceIndex;
use spinerecon::synthetic::{generate_spine, PairParams, SpineParams};
use spinerecon::transform::Transform4;

fn landmark_sets(spine: &spinerecon::spine::SpineModel) -> Vec<(Level, LandmarkSet)> {
    spine
        .vertebrae()
        .iter()
        .map(|v| (v.level, v.landmarks.unwrap()))
        .collect()
}

fn spine_with_pairs(pairs: &[(f64, f64)], seed: u64) -> spinerecon::synthetic::GeneratedSpine {
    generate_spine(&SpineParams {
        pairs: pairs
            .iter()
            .map(|&(ivd_height, fsu_angle)| PairParams { ivd_height, fsu_angle })
            .collect(),
        seed,
        ..SpineParams::default()
    })
    .unwrap()
}

#[test]
fn morphometrics_round_trip() {
    let angles = [0.0, 4.0, 6.0, 8.0, 10.0];
    let heights = [4.0, 5.0, 6.0, 7.0];
    for shift in 0..5 {
        let pairs: Vec<_> = (0..4)
            .map(|i| (heights[(i + shift) % 4], angles[(i + shift) % 5]))
            .collect();
        let spine = spine_with_pairs(&pairs, shift as u64);
        let record = measure_morphometrics(&landmark_sets(&spine.spine)).unwrap();
        for (got, &(h, a)) in record.pairs.iter().zip(&pairs) {
            assert!((got.ivd_height - h).abs() <= 0.3, "{got:?} vs {h}");
            assert!((got.fsu_angle - a).abs() <= 0.5, "{got:?} vs {a}");
        }
        for (got, want) in record.vertebrae.iter().zip(&spine.morphometrics.vertebrae) {
            assert!((got.vb_width - want.vb_width).abs() < 1e-6);
            assert!((got.vb_depth - want.vb_depth).abs() < 1e-6);
            assert!((got.vb_height - want.vb_height).abs() < 1e-6);
        }
    }
}

#[test]
fn morphometrics_are_invariant_under_rigid_motion() {
    let spine = default_spine(4);
    let sets = landmark_sets(&spine.spine);
    let base = measure_morphometrics(&sets).unwrap();
    let mut r = rng(5);
    for _ in 0..50 {
        let t = random_rigid(&mut r, 180.0, 100.0);
        let moved: Vec<_> = sets.iter().map(|(l, s)| (*l, s.transformed(&t).unwrap())).collect();
        let m = measure_morphometrics(&moved).unwrap();
        for (a, b) in m.vertebrae.iter().zip(&base.vertebrae) {
            assert!((a.vb_width - b.vb_width).abs() < 1e-6);
            assert!((a.vb_depth - b.vb_depth).abs() < 1e-6);
            assert!((a.vb_height - b.vb_height).abs() < 1e-6);
        }
        for (a, b) in m.pairs.iter().zip(&base.pairs) {
            assert!((a.ivd_height - b.ivd_height).abs() < 1e-6);
            assert!((a.fsu_angle - b.fsu_angle).abs() < 0.01);
        }
    }
}

fn mirrored(set: &LandmarkSet, axis: usize) -> LandmarkSet {
    let mut m = Matrix4::identity();
    m[(axis, axis)] = -1.0;
    set.transformed(&Transform4::from_matrix(m).unwrap()).unwrap()
}

#[test]
fn fsu_angle_under_mirroring() {
    let spine = spine_with_pairs(&[(5.0, 4.0), (6.0, 6.0), (6.0, 8.0), (7.0, 10.0)], 0);
    let sets = landmark_sets(&spine.spine);
    let normal = Vector3::x_axis();
    for w in sets.windows(2) {
        let (u, l) = (w[0].1, w[1].1);
        let a = fsu_angle(&u, &l, &normal).unwrap();
        let sagittal = fsu_angle(&mirrored(&u, 0), &mirrored(&l, 0), &normal).unwrap();
        let axial = fsu_angle(&mirrored(&u, 2), &mirrored(&l, 2), &normal).unwrap();
        assert!((sagittal - a).abs() < 1e-9, "{a} {sagittal}");
        assert!((axial + a).abs() < 1e-9, "{a} {axial}");
    }
}

#[test]
fn perfect_reconstruction_scores_zero() {
    let spine = default_spine(8);
    let sets = landmark_sets(&spine.spine);
    let report = evaluate_reconstruction(&spine.spine, &spine.spine, Some(&sets), "ours").unwrap();
    assert_eq!(report.levels.len(), 5);
    for m in &report.levels {
        assert_eq!(m.p2m_vb_mm, Some(0.0));
        assert_eq!(m.p2m_full_mm, Some(0.0));
        assert_eq!(m.landmark_mae_mm, Some(0.0));
    }
    assert_eq!(report.levels[4].ivd_mae_mm, None);
    assert_eq!(report.mean.p2m_full_mm, Some(0.0));
}

#[test]
fn missing_ground_truth_landmarks_leave_metrics_empty() {
    let mut spine = default_spine(8).spine;
    for v in spine.vertebrae_mut() {
        v.landmarks = None;
    }
    let report = evaluate_reconstruction(&spine, &spine, None, "icp").unwrap();
    assert!(report
        .levels
        .iter()
        .all(|m| m.landmark_mae_mm.is_none() && m.fsu_mae_deg.is_none()));
    assert!(report.mean.p2m_vb_mm.is_some());
}

#[test]
fn csv_has_one_row_per_level_and_a_mean_row() {
    let spine = default_spine(8);
    let sets = landmark_sets(&spine.spine);
    let mut report = evaluate_reconstruction(&spine.spine, &spine.spine, Some(&sets), "ours").unwrap();
    report.time_s = Some(0.25);
    let csv = reports_to_csv(&[report]);
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 7);
    let cols = CSV_HEADER.split(',').count();
    assert!(lines.iter().all(|l| l.split(',').count() == cols));
    assert!(lines[6].starts_with("ours,mean,") && lines[6].ends_with(",0.25"));
    assert!(lines[1].ends_with(','));
}

#[test]
fn point_to_model_of_a_mesh_with_itself_is_zero() {
    for v in default_spine(1).spine.vertebrae() {
        assert_eq!(point_to_model_distance(&v.mesh, &SurfaceIndex::new(&v.mesh)), Some(0.0));
    }
}

fn landmarks() -> impl Strategy<Value = LandmarkSet> {
    proptest::array::uniform8(proptest::array::uniform3(-50.0..50.0f64))
        .prop_filter_map("distinct points", |p| LandmarkSet::from_arrays(p).ok())
}

proptest! {
    #[test]
    fn landmark_mae_is_a_metric(a in landmarks(), b in landmarks(), c in landmarks()) {
        prop_assert_eq!(landmark_mae(&a, &b), landmark_mae(&b, &a));
        prop_assert_eq!(landmark_mae(&a, &a), 0.0);
        prop_assert!(landmark_mae(&a, &c) <= landmark_mae(&a, &b) + landmark_mae(&b, &c) + 1e-12);
    }

    #[test]
    fn landmark_mae_is_rigid_invariant(a in landmarks(), b in landmarks(), seed in 0u64..500) {
        let t = random_rigid(&mut rng(seed), 180.0, 100.0);
        let moved = landmark_mae(&a.transformed(&t).unwrap(), &b.transformed(&t).unwrap());
        prop_assert!((moved - landmark_mae(&a, &b)).abs() < 1e-9);
    }
}

#[test]
fn single_point_shift_gives_eighth_of_distance() {
    let spine = default_spine(0);
    let a = spine.spine.vertebrae()[0].landmarks.unwrap();
    let mut pts = *a.points();
    pts[3] += Vector3::new(0.0, 8.0, 0.0);
    let b = LandmarkSet::new(pts).unwrap();
    assert!((landmark_mae(&a, &b) - 1.0).abs() < 1e-12);
}
