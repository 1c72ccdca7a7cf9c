use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::{AnatomyError, AxesEstimate, Plate};
use crate::mesh::{center_of_mass, TriangleMesh};
use crate::transform::Transform4;

/// The eight endplate landmarks `l1…l8` of one vertebra (see module docs for
/// the numbering).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkSet {
    points: [Point3<f64>; 8],
}

impl LandmarkSet {
    pub fn new(points: [Point3<f64>; 8]) -> Result<Self, AnatomyError> {
        let set = Self { points };
        set.validate()?;
        Ok(set)
    }

    pub fn from_arrays(points: [[f64; 3]; 8]) -> Result<Self, AnatomyError> {
        Self::new(points.map(|p| Point3::new(p[0], p[1], p[2])))
    }

    fn validate(&self) -> Result<(), AnatomyError> {
        let p = &self.points;
        if p.iter().any(|q| q.iter().any(|c| !c.is_finite())) {
            return Err(AnatomyError::InvalidLandmarks("non-finite coordinate".into()));
        }
        for i in 0..8 {
            for j in i + 1..8 {
                if p[i] == p[j] {
                    return Err(AnatomyError::InvalidLandmarks(format!(
                        "l{} and l{} coincide",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let v = |a: usize, b: usize| p[b - 1] - p[a - 1];
        if v(1, 2).dot(&v(3, 4)) <= 0.0 {
            return Err(AnatomyError::InvalidLandmarks(
                "left-right order differs between superior and inferior plates".into(),
            ));
        }
        if v(5, 6).dot(&v(7, 8)) <= 0.0 {
            return Err(AnatomyError::InvalidLandmarks(
                "posterior-anterior order differs between superior and inferior plates".into(),
            ));
        }
        let heights = [v(3, 1), v(4, 2), v(7, 5), v(8, 6)];
        for i in 0..4 {
            for j in i + 1..4 {
                if heights[i].dot(&heights[j]) <= 0.0 {
                    return Err(AnatomyError::InvalidLandmarks(
                        "superior and inferior plates are not consistently ordered".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn points(&self) -> &[Point3<f64>; 8] {
        &self.points
    }

    /// 1-based accessor matching the `l1…l8` labels.
    pub fn l(&self, label: usize) -> Point3<f64> {
        self.points[label - 1]
    }

    pub fn superior_left(&self) -> Point3<f64> {
        self.points[0]
    }
    pub fn superior_right(&self) -> Point3<f64> {
        self.points[1]
    }
    pub fn inferior_left(&self) -> Point3<f64> {
        self.points[2]
    }
    pub fn inferior_right(&self) -> Point3<f64> {
        self.points[3]
    }
    pub fn superior_posterior(&self) -> Point3<f64> {
        self.points[4]
    }
    pub fn superior_anterior(&self) -> Point3<f64> {
        self.points[5]
    }
    pub fn inferior_posterior(&self) -> Point3<f64> {
        self.points[6]
    }
    pub fn inferior_anterior(&self) -> Point3<f64> {
        self.points[7]
    }

    /// Centroid of {l1, l2, l5, l6}.
    pub fn superior_centroid(&self) -> Point3<f64> {
        centroid(&[self.points[0], self.points[1], self.points[4], self.points[5]])
    }

    /// Centroid of {l3, l4, l7, l8}.
    pub fn inferior_centroid(&self) -> Point3<f64> {
        centroid(&[self.points[2], self.points[3], self.points[6], self.points[7]])
    }

    pub fn transformed(&self, t: &Transform4) -> Result<Self, AnatomyError> {
        Self::new(self.points.map(|p| t.apply_point(&p)))
    }

    pub fn to_record(&self, level: &str) -> LandmarkRecord {
        let a = self.points.map(|p| [p.x, p.y, p.z]);
        LandmarkRecord {
            level: level.to_string(),
            l1: a[0],
            l2: a[1],
            l3: a[2],
            l4: a[3],
            l5: a[4],
            l6: a[5],
            l7: a[6],
            l8: a[7],
        }
    }
}

fn centroid(points: &[Point3<f64>]) -> Point3<f64> {
    Point3::from(points.iter().map(|p| p.coords).sum::<Vector3<f64>>() / points.len() as f64)
}

/// JSON landmark file: `{"level": "L3", "l1": [x, y, z], …, "l8": [x, y, z]}` in mm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkRecord {
    pub level: String,
    pub l1: [f64; 3],
    pub l2: [f64; 3],
    pub l3: [f64; 3],
    pub l4: [f64; 3],
    pub l5: [f64; 3],
    pub l6: [f64; 3],
    pub l7: [f64; 3],
    pub l8: [f64; 3],
}

impl LandmarkRecord {
    pub fn to_landmarks(&self) -> Result<LandmarkSet, AnatomyError> {
        LandmarkSet::from_arrays([self.l1, self.l2, self.l3, self.l4, self.l5, self.l6, self.l7, self.l8])
    }
}

struct PlateExtremes {
    left: Point3<f64>,
    right: Point3<f64>,
    posterior: Point3<f64>,
    anterior: Point3<f64>,
}

/// Index of the vertex with the largest `score`; the smallest index wins ties.
fn argmax(candidates: &[usize], score: impl Fn(usize) -> f64) -> usize {
    let mut best = candidates[0];
    let mut best_score = score(best);
    for &i in &candidates[1..] {
        let s = score(i);
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    best
}

fn plate_extremes(
    plate: &TriangleMesh,
    which: Plate,
    axes: &AxesEstimate,
    half_width: f64,
) -> Result<PlateExtremes, AnatomyError> {
    let center = center_of_mass(plate)?;
    let verts = plate.vertices();
    let offset = |i: usize| verts[i] - center;
    let lateral = axes.lateral.into_inner();
    let anterior = axes.anterior.into_inner();

    // sagittal slab (normal = lateral) -> anterior/posterior extremes
    let sagittal: Vec<usize> = (0..verts.len())
        .filter(|&i| offset(i).dot(&lateral).abs() <= half_width)
        .collect();
    // coronal slab (normal = anterior) -> left/right extremes
    let coronal: Vec<usize> = (0..verts.len())
        .filter(|&i| offset(i).dot(&anterior).abs() <= half_width)
        .collect();
    if sagittal.is_empty() {
        return Err(AnatomyError::EmptySlab {
            plate: which,
            plane: "sagittal",
            width: half_width,
        });
    }
    if coronal.is_empty() {
        return Err(AnatomyError::EmptySlab {
            plate: which,
            plane: "coronal",
            width: half_width,
        });
    }
    Ok(PlateExtremes {
        anterior: verts[argmax(&sagittal, |i| offset(i).dot(&anterior))],
        posterior: verts[argmax(&sagittal, |i| -offset(i).dot(&anterior))],
        right: verts[argmax(&coronal, |i| offset(i).dot(&lateral))],
        left: verts[argmax(&coronal, |i| -offset(i).dot(&lateral))],
    })
}

/// Outermost endplate vertices in slabs around the sagittal and coronal
/// planes through each plate's centroid.
pub fn detect_landmarks(
    superior: &TriangleMesh,
    inferior: &TriangleMesh,
    axes: &AxesEstimate,
    slab_half_width: f64,
) -> Result<LandmarkSet, AnatomyError> {
    if !(slab_half_width > 0.0) {
        return Err(AnatomyError::InvalidParameter(format!(
            "slab_half_width must be positive, got {slab_half_width}"
        )));
    }
    for (plate, which) in [(superior, Plate::Superior), (inferior, Plate::Inferior)] {
        if plate.is_empty() {
            return Err(AnatomyError::EmptyEndplate {
                plate: which,
                threshold: f64::NAN,
            });
        }
    }
    let sup = plate_extremes(superior, Plate::Superior, axes, slab_half_width)?;
    let inf = plate_extremes(inferior, Plate::Inferior, axes, slab_half_width)?;
    LandmarkSet::new([
        sup.left,
        sup.right,
        inf.left,
        inf.right,
        sup.posterior,
        sup.anterior,
        inf.posterior,
        inf.anterior,
    ])
}
