//! Bounding volume hierarchy for exact closest-point queries on a surface.

use nalgebra::{Point3, Vector3};

use super::TriangleMesh;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy)]
struct Aabb {
    min: Point3<f64>,
    max: Point3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Point3::from(Vector3::repeat(f64::INFINITY)),
            max: Point3::from(Vector3::repeat(f64::NEG_INFINITY)),
        }
    }

    fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    /// Squared distance from `p` to the box; zero inside.
    fn distance_squared(&self, p: &Point3<f64>) -> f64 {
        let mut d = 0.0;
        for k in 0..3 {
            let v = if p[k] < self.min[k] {
                self.min[k] - p[k]
            } else if p[k] > self.max[k] {
                p[k] - self.max[k]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

#[derive(Debug, Clone)]
enum Node {
    Leaf { bounds: Aabb, start: usize, end: usize },
    Inner { bounds: Aabb, left: usize, right: usize },
}

impl Node {
    fn bounds(&self) -> &Aabb {
        match self {
            Node::Leaf { bounds, .. } | Node::Inner { bounds, .. } => bounds,
        }
    }
}

/// Result of a closest-point query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub point: Point3<f64>,
    pub distance: f64,
    pub triangle: usize,
}

/// Static BVH over one mesh's triangles. Read-only after construction and
/// safe to query from many threads.
#[derive(Debug, Clone)]
pub struct SurfaceIndex {
    triangles: Vec<[Point3<f64>; 3]>,
    order: Vec<usize>,
    nodes: Vec<Node>,
}

impl SurfaceIndex {
    pub fn new(mesh: &TriangleMesh) -> Self {
        let triangles: Vec<[Point3<f64>; 3]> = (0..mesh.triangle_count()).map(|t| mesh.triangle_points(t)).collect();
        let mut order: Vec<usize> = (0..triangles.len()).collect();
        let centroids: Vec<Point3<f64>> = triangles
            .iter()
            .map(|[a, b, c]| Point3::from((a.coords + b.coords + c.coords) / 3.0))
            .collect();
        let mut nodes = Vec::new();
        if !triangles.is_empty() {
            build(&triangles, &centroids, &mut order, 0, triangles.len(), &mut nodes);
        }
        Self {
            triangles,
            order,
            nodes,
        }
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    /// Exact nearest surface point. Among equidistant triangles the smallest
    /// triangle index wins, matching a brute-force scan. Returns `None` only
    /// for an empty mesh.
    pub fn closest_point(&self, query: &Point3<f64>) -> Option<SurfacePoint> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<(f64, usize, Point3<f64>)> = None;
        let mut stack = vec![0usize];
        while let Some(id) = stack.pop() {
            let node = &self.nodes[id];
            let bound = node.bounds().distance_squared(query);
            if let Some((d2, _, _)) = best {
                if bound > d2 {
                    continue;
                }
            }
            match node {
                Node::Leaf { start, end, .. } => {
                    for &t in &self.order[*start..*end] {
                        let [a, b, c] = &self.triangles[t];
                        let p = closest_point_on_triangle(query, a, b, c);
                        let d2 = (p - query).norm_squared();
                        let better = match best {
                            None => true,
                            Some((bd, bt, _)) => d2 < bd || (d2 == bd && t < bt),
                        };
                        if better {
                            best = Some((d2, t, p));
                        }
                    }
                }
                Node::Inner { left, right, .. } => {
                    let dl = self.nodes[*left].bounds().distance_squared(query);
                    let dr = self.nodes[*right].bounds().distance_squared(query);
                    // nearer child is popped first
                    if dl <= dr {
                        stack.push(*right);
                        stack.push(*left);
                    } else {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
        }
        best.map(|(d2, triangle, point)| SurfacePoint {
            point,
            distance: d2.sqrt(),
            triangle,
        })
    }
}

fn build(
    triangles: &[[Point3<f64>; 3]],
    centroids: &[Point3<f64>],
    order: &mut [usize],
    start: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let mut bounds = Aabb::empty();
    let mut cbounds = Aabb::empty();
    for &t in &order[start..end] {
        for p in &triangles[t] {
            bounds.grow(p);
        }
        cbounds.grow(&centroids[t]);
    }
    let id = nodes.len();
    if end - start <= LEAF_SIZE {
        nodes.push(Node::Leaf { bounds, start, end });
        return id;
    }
    let extent = cbounds.max - cbounds.min;
    let axis = extent.iamax();
    if extent[axis] <= 0.0 {
        nodes.push(Node::Leaf { bounds, start, end });
        return id;
    }
    let mid = start + (end - start) / 2;
    order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
        centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b))
    });
    nodes.push(Node::Leaf { bounds, start, end });
    let left = build(triangles, centroids, order, start, mid, nodes);
    let right = build(triangles, centroids, order, mid, end, nodes);
    let merged = nodes[left].bounds().union(nodes[right].bounds());
    nodes[id] = Node::Inner {
        bounds: merged,
        left,
        right,
    };
    id
}

/// Closest point on triangle `abc` to `p` (Voronoi-region walk).
pub fn closest_point_on_triangle(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Point3<f64> {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = va + vb + vc;
    if denom == 0.0 {
        // zero-area triangle: fall back to the nearest of its edges
        let candidates = [
            segment_closest(p, a, b),
            segment_closest(p, b, c),
            segment_closest(p, a, c),
        ];
        return candidates
            .into_iter()
            .min_by(|x, y| (x - p).norm_squared().total_cmp(&(y - p).norm_squared()))
            .unwrap_or(*a);
    }
    let v = vb / denom;
    let w = vc / denom;
    a + ab * v + ac * w
}

fn segment_closest(p: &Point3<f64>, a: &Point3<f64>, b: &Point3<f64>) -> Point3<f64> {
    let ab = b - a;
    let len2 = ab.norm_squared();
    if len2 == 0.0 {
        return *a;
    }
    let t = ((p - a).dot(&ab) / len2).clamp(0.0, 1.0);
    a + ab * t
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(mesh: &TriangleMesh, q: &Point3<f64>) -> (f64, Point3<f64>) {
        let mut best = (f64::INFINITY, Point3::origin());
        for t in 0..mesh.triangle_count() {
            let [a, b, c] = mesh.triangle_points(t);
            let p = closest_point_on_triangle(q, &a, &b, &c);
            let d = (p - q).norm_squared();
            if d < best.0 {
                best = (d, p);
            }
        }
        (best.0.sqrt(), best.1)
    }

    fn big_triangle() -> TriangleMesh {
        TriangleMesh::new(
            vec![
                Point3::new(-100.0, -100.0, 0.0),
                Point3::new(100.0, -100.0, 0.0),
                Point3::new(0.0, 100.0, 0.0),
            ],
            vec![[0, 1, 2]],
            None,
        )
        .unwrap()
    }

    #[test]
    fn query_on_vertex_has_zero_distance() {
        let index = SurfaceIndex::new(&big_triangle());
        let hit = index.closest_point(&Point3::new(100.0, -100.0, 0.0)).unwrap();
        assert_eq!(hit.distance, 0.0);
    }

    #[test]
    fn query_above_interior() {
        let index = SurfaceIndex::new(&big_triangle());
        let hit = index.closest_point(&Point3::new(1.0, 2.0, 1.0)).unwrap();
        assert!((hit.distance - 1.0).abs() < 1e-12);
        assert!((hit.point - Point3::new(1.0, 2.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn edge_and_vertex_regions() {
        let (a, b, c) = (
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
        );
        let p = closest_point_on_triangle(&Point3::new(0.5, -2.0, 0.0), &a, &b, &c);
        assert!((p - Point3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        let p = closest_point_on_triangle(&Point3::new(3.0, 3.0, 0.0), &a, &b, &c);
        assert!((p - Point3::new(0.5, 0.5, 0.0)).norm() < 1e-15);
        let p = closest_point_on_triangle(&Point3::new(-1.0, -1.0, 5.0), &a, &b, &c);
        assert_eq!(p, a);
    }

    #[test]
    fn matches_brute_force_on_random_soup() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut vertices = Vec::new();
        let mut tris = Vec::new();
        for t in 0..200 {
            let base = Point3::new(
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
                rng.random_range(-20.0..20.0),
            );
            for _ in 0..3 {
                vertices.push(
                    base + Vector3::new(
                        rng.random_range(-3.0..3.0),
                        rng.random_range(-3.0..3.0),
                        rng.random_range(-3.0..3.0),
                    ),
                );
            }
            tris.push([3 * t, 3 * t + 1, 3 * t + 2]);
        }
        let mesh = TriangleMesh::new(vertices, tris, None).unwrap();
        let index = SurfaceIndex::new(&mesh);
        for _ in 0..100 {
            let q = Point3::new(
                rng.random_range(-30.0..30.0),
                rng.random_range(-30.0..30.0),
                rng.random_range(-30.0..30.0),
            );
            let hit = index.closest_point(&q).unwrap();
            let (d, p) = brute_force(&mesh, &q);
            assert!((hit.distance - d).abs() < 1e-9);
            assert!((hit.point - p).norm() < 1e-9);
        }
    }

    #[test]
    fn empty_mesh_returns_none() {
        let index = SurfaceIndex::new(&TriangleMesh::default());
        assert!(index.closest_point(&Point3::origin()).is_none());
    }
}
