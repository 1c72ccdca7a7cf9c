//! Ordered collections of vertebrae.

use thiserror::Error;

use crate::anatomy::LandmarkSet;
use crate::level::Level;
use crate::mesh::{Region, TriangleMesh};
use crate::transform::Transform4;

#[derive(Error, Debug, Clone, PartialEq)]
pub enum SpineError {
    #[error("levels must be unique and ordered superior to inferior; {0} is out of order")]
    Order(Level),

    #[error("level {0} is missing")]
    MissingLevel(Level),

    #[error("level sets differ: {left:?} vs {right:?}")]
    LevelMismatch { left: Vec<Level>, right: Vec<Level> },
}

#[derive(Debug, Clone)]
pub struct Vertebra {
    pub level: Level,
    pub mesh: TriangleMesh,
    pub landmarks: Option<LandmarkSet>,
}

impl Vertebra {
    pub fn new(level: Level, mesh: TriangleMesh) -> Self {
        Self {
            level,
            mesh,
            landmarks: None,
        }
    }

    pub fn with_landmarks(mut self, landmarks: LandmarkSet) -> Self {
        self.landmarks = Some(landmarks);
        self
    }

    /// The vertebral-body part of the mesh (see [`vertebral_body`]).
    pub fn body(&self) -> TriangleMesh {
        vertebral_body(&self.mesh)
    }

    /// Mesh and landmarks mapped through `t`.
    pub fn transformed(&self, t: &Transform4) -> Vertebra {
        Vertebra {
            level: self.level,
            mesh: self.mesh.transformed(t),
            landmarks: self.landmarks.and_then(|l| l.transformed(t).ok()),
        }
    }
}

/// Triangles whose vertices are all labelled vertebral body. Meshes without
/// any vertebral-body label are returned whole.
pub fn vertebral_body(mesh: &TriangleMesh) -> TriangleMesh {
    if mesh.has_region(Region::VertebralBody) {
        mesh.region_submesh(Region::VertebralBody)
    } else {
        mesh.clone()
    }
}

/// Vertebrae ordered from superior (L1) to inferior (L5).
#[derive(Debug, Clone, Default)]
pub struct SpineModel {
    vertebrae: Vec<Vertebra>,
}

impl SpineModel {
    pub fn new(vertebrae: Vec<Vertebra>) -> Result<Self, SpineError> {
        for pair in vertebrae.windows(2) {
            if pair[1].level <= pair[0].level {
                return Err(SpineError::Order(pair[1].level));
            }
        }
        Ok(Self { vertebrae })
    }

    pub fn vertebrae(&self) -> &[Vertebra] {
        &self.vertebrae
    }

    pub fn vertebrae_mut(&mut self) -> &mut [Vertebra] {
        &mut self.vertebrae
    }

    pub fn into_vertebrae(self) -> Vec<Vertebra> {
        self.vertebrae
    }

    pub fn len(&self) -> usize {
        self.vertebrae.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertebrae.is_empty()
    }

    pub fn levels(&self) -> Vec<Level> {
        self.vertebrae.iter().map(|v| v.level).collect()
    }

    pub fn get(&self, level: Level) -> Option<&Vertebra> {
        self.vertebrae.iter().find(|v| v.level == level)
    }

    /// Errors naming the first level present in one spine but not the other.
    pub fn check_same_levels(&self, other: &SpineModel) -> Result<(), SpineError> {
        let (a, b) = (self.levels(), other.levels());
        if a == b {
            return Ok(());
        }
        if let Some(&missing) = a.iter().find(|l| !b.contains(l)) {
            return Err(SpineError::MissingLevel(missing));
        }
        if let Some(&missing) = b.iter().find(|l| !a.contains(l)) {
            return Err(SpineError::MissingLevel(missing));
        }
        Err(SpineError::LevelMismatch { left: a, right: b })
    }

    /// Pairs of adjacent vertebrae `(upper, lower)` with consecutive levels.
    pub fn adjacent_pairs(&self) -> impl Iterator<Item = (&Vertebra, &Vertebra)> {
        self.vertebrae
            .windows(2)
            .filter(|w| w[1].level.index() == w[0].level.index() + 1)
            .map(|w| (&w[0], &w[1]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(level: Level) -> Vertebra {
        Vertebra::new(level, TriangleMesh::default())
    }

    #[test]
    fn rejects_unordered_levels() {
        assert!(SpineModel::new(vec![v(Level::L2), v(Level::L1)]).is_err());
        assert!(SpineModel::new(vec![v(Level::L1), v(Level::L1)]).is_err());
    }

    #[test]
    fn level_mismatch_names_missing_level() {
        let a = SpineModel::new(vec![v(Level::L1), v(Level::L2), v(Level::L3)]).unwrap();
        let b = SpineModel::new(vec![v(Level::L1), v(Level::L3)]).unwrap();
        assert_eq!(a.check_same_levels(&b), Err(SpineError::MissingLevel(Level::L2)));
    }

    #[test]
    fn adjacent_pairs_skip_gaps() {
        let s = SpineModel::new(vec![v(Level::L1), v(Level::L2), v(Level::L4)]).unwrap();
        let pairs: Vec<_> = s.adjacent_pairs().map(|(u, l)| (u.level, l.level)).collect();
        assert_eq!(pairs, vec![(Level::L1, Level::L2)]);
    }
}
