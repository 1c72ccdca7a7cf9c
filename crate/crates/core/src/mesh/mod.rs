//! Indexed triangle meshes in millimeters.
//!
//! A [`TriangleMesh`] optionally carries a per-vertex [`Region`] tag that
//! separates the vertebral body from the four articular facet surfaces.
//! Meshes are validated on construction and immutable afterwards; every
//! operation that changes geometry returns a new mesh.

mod bvh;
mod io;
mod query;

pub use bvh::{closest_point_on_triangle, SurfaceIndex, SurfacePoint};
pub use io::{load_mesh, load_mesh_as, save_mesh, Encoding, MeshFormat};
pub use query::{
    center_of_mass, connected_component_indices, connected_components, face_normals, median_edge_length,
    oriented_bounding_box, triangle_area, OrientedBoundingBox,
};

use nalgebra::Point3;
use thiserror::Error;

use crate::transform::Transform4;

#[derive(Error, Debug)]
pub enum MeshError {
    #[error("triangle {triangle} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        triangle: usize,
        index: usize,
        vertex_count: usize,
    },

    #[error("triangle {0} repeats a vertex index")]
    RepeatedIndex(usize),

    #[error("label count {labels} does not match vertex count {vertices}")]
    LabelCount { labels: usize, vertices: usize },

    #[error("vertex {0} has a non-finite coordinate")]
    NonFinite(usize),

    #[error("{path}: {location}: {message}")]
    Parse {
        path: String,
        location: String,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("unsupported mesh format for {0}")]
    UnknownFormat(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),
}

/// Anatomical region tag carried per vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
#[repr(u8)]
pub enum Region {
    #[default]
    Unlabeled = 0,
    VertebralBody = 1,
    SuperiorLeftFacet = 2,
    SuperiorRightFacet = 3,
    InferiorLeftFacet = 4,
    InferiorRightFacet = 5,
}

impl Region {
    pub fn from_code(code: i64) -> Option<Self> {
        Some(match code {
            0 => Region::Unlabeled,
            1 => Region::VertebralBody,
            2 => Region::SuperiorLeftFacet,
            3 => Region::SuperiorRightFacet,
            4 => Region::InferiorLeftFacet,
            5 => Region::InferiorRightFacet,
            _ => return None,
        })
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn is_facet(self) -> bool {
        self.code() >= 2
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
    labels: Option<Vec<Region>>,
}

impl TriangleMesh {
    pub fn new(
        vertices: Vec<Point3<f64>>,
        triangles: Vec<[usize; 3]>,
        labels: Option<Vec<Region>>,
    ) -> Result<Self, MeshError> {
        if let Some(i) = vertices
            .iter()
            .position(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()))
        {
            return Err(MeshError::NonFinite(i));
        }
        let n = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&index) = tri.iter().find(|&&i| i >= n) {
                return Err(MeshError::IndexOutOfRange {
                    triangle: t,
                    index,
                    vertex_count: n,
                });
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(MeshError::RepeatedIndex(t));
            }
        }
        if let Some(labels) = &labels {
            if labels.len() != n {
                return Err(MeshError::LabelCount {
                    labels: labels.len(),
                    vertices: n,
                });
            }
        }
        Ok(Self {
            vertices,
            triangles,
            labels,
        })
    }

    pub fn vertices(&self) -> &[Point3<f64>] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn labels(&self) -> Option<&[Region]> {
        self.labels.as_deref()
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn label(&self, vertex: usize) -> Region {
        self.labels.as_ref().map_or(Region::Unlabeled, |labels| labels[vertex])
    }

    pub fn has_region(&self, region: Region) -> bool {
        self.labels.as_ref().is_some_and(|labels| labels.contains(&region))
    }

    pub fn triangle_points(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Vertex indices carrying `region`, in ascending order.
    pub fn region_vertices(&self, region: Region) -> Vec<usize> {
        match &self.labels {
            Some(labels) => labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l == region)
                .map(|(i, _)| i)
                .collect(),
            None => Vec::new(),
        }
    }

    /// Builds a compact submesh from the given triangles. Vertices keep their
    /// relative order, so ties broken by vertex index stay stable.
    pub fn submesh(&self, triangles: &[usize]) -> TriangleMesh {
        let mut used = vec![false; self.vertices.len()];
        for &t in triangles {
            for &v in &self.triangles[t] {
                used[v] = true;
            }
        }
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut labels = self.labels.as_ref().map(|_| Vec::new());
        for (i, _) in used.iter().enumerate().filter(|(_, &u)| u) {
            remap[i] = vertices.len();
            vertices.push(self.vertices[i]);
            if let (Some(out), Some(src)) = (labels.as_mut(), self.labels.as_ref()) {
                out.push(src[i]);
            }
        }
        let tris = triangles
            .iter()
            .map(|&t| {
                let [a, b, c] = self.triangles[t];
                [remap[a], remap[b], remap[c]]
            })
            .collect();
        TriangleMesh {
            vertices,
            triangles: tris,
            labels,
        }
    }

    /// Submesh of triangles whose three vertices all carry `region`.
    pub fn region_submesh(&self, region: Region) -> TriangleMesh {
        let Some(labels) = &self.labels else {
            return TriangleMesh::default();
        };
        let tris: Vec<usize> = self
            .triangles
            .iter()
            .enumerate()
            .filter(|(_, tri)| tri.iter().all(|&v| labels[v] == region))
            .map(|(t, _)| t)
            .collect();
        self.submesh(&tris)
    }

    /// Copy with the vertex positions replaced. Connectivity and labels are kept.
    pub fn with_vertices(&self, vertices: Vec<Point3<f64>>) -> Result<Self, MeshError> {
        if vertices.len() != self.vertices.len() {
            return Err(MeshError::LabelCount {
                labels: vertices.len(),
                vertices: self.vertices.len(),
            });
        }
        if let Some(i) = vertices
            .iter()
            .position(|v| !(v.x.is_finite() && v.y.is_finite() && v.z.is_finite()))
        {
            return Err(MeshError::NonFinite(i));
        }
        Ok(Self {
            vertices,
            triangles: self.triangles.clone(),
            labels: self.labels.clone(),
        })
    }

    pub fn with_labels(mut self, labels: Option<Vec<Region>>) -> Result<Self, MeshError> {
        if let Some(l) = &labels {
            if l.len() != self.vertices.len() {
                return Err(MeshError::LabelCount {
                    labels: l.len(),
                    vertices: self.vertices.len(),
                });
            }
        }
        self.labels = labels;
        Ok(self)
    }

    /// Concatenates meshes, offsetting indices. Labels are kept only if every
    /// part carries them.
    pub fn merge(parts: &[TriangleMesh]) -> TriangleMesh {
        let all_labeled = parts.iter().all(|p| p.labels.is_some());
        let mut out = TriangleMesh {
            labels: all_labeled.then(Vec::new),
            ..Default::default()
        };
        for p in parts {
            let offset = out.vertices.len();
            out.vertices.extend_from_slice(&p.vertices);
            out.triangles.extend(
                p.triangles
                    .iter()
                    .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
            );
            if let (Some(dst), Some(src)) = (out.labels.as_mut(), p.labels.as_ref()) {
                dst.extend_from_slice(src);
            }
        }
        out
    }

    /// Applies `transform` to every vertex in homogeneous coordinates.
    pub fn transformed(&self, transform: &Transform4) -> TriangleMesh {
        TriangleMesh {
            vertices: self.vertices.iter().map(|p| transform.apply_point(p)).collect(),
            triangles: self.triangles.clone(),
            labels: self.labels.clone(),
        }
    }
}

/// Maps every vertex of `mesh` through `transform`; connectivity and labels
/// are unchanged. Invertibility is guaranteed by [`Transform4`].
pub fn transform_mesh(mesh: &TriangleMesh, transform: &Transform4) -> TriangleMesh {
    mesh.transformed(transform)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix4, Vector3};

    fn tri_mesh() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn rejects_out_of_range_index() {
        let err = TriangleMesh::new(vec![Point3::origin(); 3], vec![[0, 1, 3]], None).unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfRange { index: 3, .. }));
    }

    #[test]
    fn rejects_repeated_index() {
        let err = TriangleMesh::new(vec![Point3::origin(); 3], vec![[0, 1, 1]], None).unwrap_err();
        assert!(matches!(err, MeshError::RepeatedIndex(0)));
    }

    #[test]
    fn rejects_label_length_mismatch() {
        let err = TriangleMesh::new(
            vec![Point3::origin(); 3],
            vec![[0, 1, 2]],
            Some(vec![Region::VertebralBody; 2]),
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::LabelCount { .. }));
    }

    #[test]
    fn identity_transform_keeps_mesh() {
        let m = tri_mesh();
        assert_eq!(transform_mesh(&m, &Transform4::identity()), m);
    }

    #[test]
    fn translation_shifts_every_vertex() {
        let m = tri_mesh();
        let t = Transform4::from_translation(Vector3::new(1.0, 2.0, 3.0));
        let moved = transform_mesh(&m, &t);
        for (a, b) in m.vertices().iter().zip(moved.vertices()) {
            assert_eq!(b - a, Vector3::new(1.0, 2.0, 3.0));
        }
        assert_eq!(moved.triangles(), m.triangles());
    }

    #[test]
    fn transform_then_inverse_round_trips() {
        let m = tri_mesh();
        let mut raw = Matrix4::new_rotation(Vector3::new(0.3, -0.2, 0.9));
        raw[(0, 0)] *= 1.7;
        raw[(1, 3)] = 12.5;
        let t = Transform4::from_matrix(raw).unwrap();
        let back = transform_mesh(&transform_mesh(&m, &t), &t.inverse());
        for (a, b) in m.vertices().iter().zip(back.vertices()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn region_submesh_keeps_fully_labeled_triangles() {
        let m = TriangleMesh::new(
            vec![
                Point3::new(0.0, 0.0, 0.0),
                Point3::new(1.0, 0.0, 0.0),
                Point3::new(0.0, 1.0, 0.0),
                Point3::new(1.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [1, 3, 2]],
            Some(vec![
                Region::VertebralBody,
                Region::VertebralBody,
                Region::VertebralBody,
                Region::Unlabeled,
            ]),
        )
        .unwrap();
        let vb = m.region_submesh(Region::VertebralBody);
        assert_eq!(vb.triangle_count(), 1);
        assert_eq!(vb.vertex_count(), 3);
    }
}
