use std::collections::HashMap;

use nalgebra::{Matrix3, Point3, SymmetricEigen, Vector3};

use super::{MeshError, TriangleMesh};

/// Relative cross-product magnitude below which a triangle counts as zero-area.
const DEGENERATE_REL: f64 = 1e-12;

fn cross(mesh: &TriangleMesh, t: usize) -> (Vector3<f64>, f64) {
    let [a, b, c] = mesh.triangle_points(t);
    let e1 = b - a;
    let e2 = c - a;
    let n = e1.cross(&e2);
    let scale = e1.norm() * e2.norm();
    (n, scale)
}

pub fn triangle_area(mesh: &TriangleMesh, t: usize) -> f64 {
    let (n, scale) = cross(mesh, t);
    let len = n.norm();
    if len <= DEGENERATE_REL * scale || len == 0.0 {
        0.0
    } else {
        0.5 * len
    }
}

/// One unit normal per triangle from counter-clockwise winding. Zero-area
/// triangles yield `None`.
pub fn face_normals(mesh: &TriangleMesh) -> Vec<Option<Vector3<f64>>> {
    (0..mesh.triangle_count())
        .map(|t| {
            let (n, scale) = cross(mesh, t);
            let len = n.norm();
            (len > DEGENERATE_REL * scale && len > 0.0).then(|| n / len)
        })
        .collect()
}

struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller root wins so the labelling is order-independent
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Triangle index sets of the edge-connected components, largest first.
/// Equal-sized components are ordered by their smallest triangle index.
pub fn connected_component_indices(mesh: &TriangleMesh) -> Vec<Vec<usize>> {
    let n = mesh.triangle_count();
    let mut sets = DisjointSet::new(n);
    let mut edge_owner: HashMap<(usize, usize), usize> = HashMap::with_capacity(n * 2);
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            let key = if a < b { (a, b) } else { (b, a) };
            match edge_owner.get(&key) {
                Some(&other) => sets.union(t, other),
                None => {
                    edge_owner.insert(key, t);
                }
            }
        }
    }
    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for t in 0..n {
        let root = sets.find(t);
        groups.entry(root).or_default().push(t);
    }
    let mut components: Vec<Vec<usize>> = groups.into_values().collect();
    components.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    components
}

/// Edge-connected components as compact submeshes, largest first.
pub fn connected_components(mesh: &TriangleMesh) -> Vec<TriangleMesh> {
    connected_component_indices(mesh)
        .iter()
        .map(|tris| mesh.submesh(tris))
        .collect()
}

/// Area-weighted mean of triangle centroids.
pub fn center_of_mass(mesh: &TriangleMesh) -> Result<Point3<f64>, MeshError> {
    let mut total = 0.0;
    let mut acc = Vector3::zeros();
    for t in 0..mesh.triangle_count() {
        let area = triangle_area(mesh, t);
        if area == 0.0 {
            continue;
        }
        let [a, b, c] = mesh.triangle_points(t);
        acc += area * (a.coords + b.coords + c.coords) / 3.0;
        total += area;
    }
    if total <= 0.0 {
        return Err(MeshError::Degenerate(
            "center of mass needs at least one triangle with positive area".into(),
        ));
    }
    Ok(Point3::from(acc / total))
}

pub fn median_edge_length(mesh: &TriangleMesh) -> Option<f64> {
    let mut lengths: Vec<f64> = mesh
        .triangles()
        .iter()
        .flat_map(|tri| {
            (0..3).filter_map(move |k| {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                (a < b).then_some((a, b))
            })
        })
        .map(|(a, b)| (mesh.vertices()[a] - mesh.vertices()[b]).norm())
        .collect();
    if lengths.is_empty() {
        return None;
    }
    lengths.sort_by(f64::total_cmp);
    Some(lengths[lengths.len() / 2])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBoundingBox {
    pub center: Point3<f64>,
    /// Unit axes, right-handed, ordered by descending half extent.
    pub axes: [Vector3<f64>; 3],
    pub half_extents: [f64; 3],
}

impl OrientedBoundingBox {
    pub fn axis_matrix(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&self.axes)
    }
}

/// Surface covariance integrated exactly over every triangle, so the result
/// does not depend on tessellation.
fn surface_covariance(mesh: &TriangleMesh) -> Option<(Vector3<f64>, Matrix3<f64>)> {
    let mut total = 0.0;
    let mut first = Vector3::zeros();
    let mut second = Matrix3::zeros();
    for t in 0..mesh.triangle_count() {
        let area = triangle_area(mesh, t);
        if area == 0.0 {
            continue;
        }
        let [a, b, c] = mesh.triangle_points(t);
        let s = a.coords + b.coords + c.coords;
        first += area * s / 3.0;
        let outer = a.coords * a.coords.transpose()
            + b.coords * b.coords.transpose()
            + c.coords * c.coords.transpose()
            + s * s.transpose();
        second += outer * (area / 12.0);
        total += area;
    }
    if total <= 0.0 {
        return None;
    }
    let mean = first / total;
    let cov = second / total - mean * mean.transpose();
    Some((mean, cov))
}

/// Flips axis signs deterministically: each axis points along its dominant
/// world component, and handedness is repaired on the least decided axis.
fn canonical_signs(axes: &mut [Vector3<f64>; 3]) {
    let mut dominance = [0.0; 3];
    for (axis, dom) in axes.iter_mut().zip(dominance.iter_mut()) {
        let k = axis.iamax();
        if axis[k] < 0.0 {
            *axis = -*axis;
        }
        *dom = axis[k].abs();
    }
    if axes[0].cross(&axes[1]).dot(&axes[2]) < 0.0 {
        let weakest = (0..3)
            .min_by(|&a, &b| dominance[a].total_cmp(&dominance[b]))
            .unwrap_or(2);
        axes[weakest] = -axes[weakest];
    }
}

/// PCA oriented bounding box from the area-weighted surface covariance.
pub fn oriented_bounding_box(mesh: &TriangleMesh) -> Result<OrientedBoundingBox, MeshError> {
    let (_, cov) = surface_covariance(mesh)
        .ok_or_else(|| MeshError::Degenerate("bounding box needs at least one triangle with positive area".into()))?;
    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let largest = eig.eigenvalues[order[0]];
    if largest <= 0.0 || eig.eigenvalues[order[1]] <= 1e-12 * largest {
        return Err(MeshError::Degenerate("vertices are collinear or coincident".into()));
    }
    let axes: Vec<Vector3<f64>> = order.iter().map(|&k| eig.eigenvectors.column(k).normalize()).collect();

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for v in mesh.vertices() {
        for k in 0..3 {
            let d = v.coords.dot(&axes[k]);
            lo[k] = lo[k].min(d);
            hi[k] = hi[k].max(d);
        }
    }
    let mut slots: Vec<(Vector3<f64>, f64, f64)> = (0..3)
        .map(|k| (axes[k], 0.5 * (hi[k] - lo[k]), 0.5 * (hi[k] + lo[k])))
        .collect();
    let center = Point3::from(slots.iter().map(|(a, _, mid)| a * *mid).sum::<Vector3<f64>>());
    slots.sort_by(|a, b| b.1.total_cmp(&a.1));

    let mut axes = [slots[0].0, slots[1].0, slots[2].0];
    canonical_signs(&mut axes);
    Ok(OrientedBoundingBox {
        center,
        axes,
        half_extents: [slots[0].1, slots[1].1, slots[2].1],
    })
}
