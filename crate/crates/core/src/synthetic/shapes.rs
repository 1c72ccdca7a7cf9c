use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::Point3;

use crate::mesh::{Region, TriangleMesh};

/// One face of an axis-aligned box: `axis` 0..3 and `max_side` picking the
/// face at the box maximum (true) or minimum (false).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxFace {
    pub axis: usize,
    pub max_side: bool,
}

/// Closed axis-aligned box with every face gridded at roughly `edge`.
/// Faces are wound counter-clockwise seen from outside.
pub fn grid_box(min: Point3<f64>, max: Point3<f64>, edge: f64, region: Region) -> TriangleMesh {
    labelled_grid_box(min, max, edge, region, None)
}

/// [`grid_box`] whose vertices on `face` carry `face_region` instead.
pub fn labelled_grid_box(
    min: Point3<f64>,
    max: Point3<f64>,
    edge: f64,
    region: Region,
    face: Option<(BoxFace, Region)>,
) -> TriangleMesh {
    let size = max - min;
    let counts: [usize; 3] = [0, 1, 2].map(|k| ((size[k] / edge).ceil() as usize).max(1));
    let coord = |k: usize, i: usize| {
        if i == counts[k] {
            max[k]
        } else {
            min[k] + size[k] * i as f64 / counts[k] as f64
        }
    };
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut labels: Vec<Region> = Vec::new();
    let mut index = HashMap::new();
    let mut vertex = |c: [usize; 3], vertices: &mut Vec<Point3<f64>>, labels: &mut Vec<Region>| -> usize {
        *index.entry(c).or_insert_with(|| {
            vertices.push(Point3::new(coord(0, c[0]), coord(1, c[1]), coord(2, c[2])));
            let on_face = face.filter(|(f, _)| c[f.axis] == if f.max_side { counts[f.axis] } else { 0 });
            labels.push(on_face.map_or(region, |(_, r)| r));
            vertices.len() - 1
        })
    };
    let mut triangles = Vec::new();
    // each face: fixed axis, fixed side, the two in-plane axes ordered so
    // that (u × v) points outward
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in [0usize, 1] {
            let fixed = side * counts[axis];
            for a in 0..counts[u] {
                for b in 0..counts[v] {
                    let mut ids = [(a, b), (a + 1, b), (a + 1, b + 1), (a, b + 1)].map(|(da, db)| {
                        let mut c = [0usize; 3];
                        c[axis] = fixed;
                        c[u] = da;
                        c[v] = db;
                        vertex(c, &mut vertices, &mut labels)
                    });
                    if side == 0 {
                        ids.reverse();
                    }
                    triangles.push([ids[0], ids[1], ids[2]]);
                    triangles.push([ids[0], ids[2], ids[3]]);
                }
            }
        }
    }
    TriangleMesh::new(vertices, triangles, Some(labels)).expect("grid box is valid by construction")
}

/// `(cos, sin)` of `2π·j/n`, exact at quarter turns.
fn unit_circle(j: usize, n: usize) -> (f64, f64) {
    let j = j % n;
    if (4 * j).is_multiple_of(n) {
        return match 4 * j / n {
            0 => (1.0, 0.0),
            1 => (0.0, 1.0),
            2 => (-1.0, 0.0),
            _ => (0.0, -1.0),
        };
    }
    let a = 2.0 * PI * j as f64 / n as f64;
    (a.cos(), a.sin())
}

/// Closed elliptical cylinder centred on the origin with semi-axes `a` (x)
/// and `b` (y). The top cap lies in `z = h/2 + s·y`, the bottom cap in
/// `z = -h/2 - s·y`. Rim rings start at angle 0 and have a multiple of four
/// vertices, so the four ellipse extremes of each rim are mesh vertices.
///
/// Returns the mesh and the triangle indices of the top and bottom caps.
pub(crate) fn elliptic_body(a: f64, b: f64, h: f64, s: f64, edge: f64) -> (TriangleMesh, Vec<usize>, Vec<usize>) {
    let perimeter = PI * (3.0 * (a + b) - ((3.0 * a + b) * (a + 3.0 * b)).sqrt());
    let rim = 4 * ((perimeter / (4.0 * edge)).ceil() as usize).max(1);
    let rings = ((a.max(b) / edge).ceil() as usize).max(1);
    let ring_count = |k: usize| 4 * ((rim / 4 * k).div_ceil(rings)).max(1);
    let top_z = |y: f64| h / 2.0 + s * y;
    let bottom_z = |y: f64| -h / 2.0 - s * y;
    let rows = (((h + 2.0 * s.abs() * b) / edge).ceil() as usize).max(1);

    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut top_caps = Vec::new();
    let mut bottom_caps = Vec::new();

    // caps: centre then rings 1..=rings; returns the rim ring indices
    let build_cap = |top: bool, vertices: &mut Vec<Point3<f64>>, triangles: &mut Vec<[usize; 3]>| {
        let z = |y: f64| if top { top_z(y) } else { bottom_z(y) };
        let first = triangles.len();
        let centre = vertices.len();
        vertices.push(Point3::new(0.0, 0.0, z(0.0)));
        let mut previous: Vec<usize> = Vec::new();
        for k in 1..=rings {
            let n = ring_count(k);
            let r = k as f64 / rings as f64;
            let ring: Vec<usize> = (0..n)
                .map(|j| {
                    let (c, sn) = unit_circle(j, n);
                    let (x, y) = if k == rings {
                        (a * c, b * sn)
                    } else {
                        (r * a * c, r * b * sn)
                    };
                    vertices.push(Point3::new(x, y, z(y)));
                    vertices.len() - 1
                })
                .collect();
            let mut push = |t: [usize; 3]| {
                triangles.push(if top { t } else { [t[0], t[2], t[1]] });
            };
            if k == 1 {
                for j in 0..n {
                    push([centre, ring[j], ring[(j + 1) % n]]);
                }
            } else {
                let m = previous.len();
                let (mut i, mut o) = (0, 0);
                while i < m || o < n {
                    // advance whichever ring's next vertex comes first in angle
                    let outer_next = o < n && (i == m || (o + 1) * m <= (i + 1) * n);
                    if outer_next {
                        push([previous[i % m], ring[o], ring[(o + 1) % n]]);
                        o += 1;
                    } else {
                        push([previous[i], ring[o % n], previous[(i + 1) % m]]);
                        i += 1;
                    }
                }
            }
            previous = ring;
        }
        (previous, first..triangles.len())
    };

    let (bottom_rim, bottom_range) = build_cap(false, &mut vertices, &mut triangles);
    bottom_caps.extend(bottom_range);
    let (top_rim, top_range) = build_cap(true, &mut vertices, &mut triangles);
    top_caps.extend(top_range);

    // wall rows between the two rims
    let mut grid: Vec<Vec<usize>> = vec![bottom_rim.clone()];
    for r in 1..rows {
        let t = r as f64 / rows as f64;
        let row = (0..rim)
            .map(|j| {
                let p0 = vertices[bottom_rim[j]];
                let p1 = vertices[top_rim[j]];
                vertices.push(Point3::new(p0.x, p0.y, p0.z + (p1.z - p0.z) * t));
                vertices.len() - 1
            })
            .collect();
        grid.push(row);
    }
    grid.push(top_rim);
    for r in 0..rows {
        for j in 0..rim {
            let jn = (j + 1) % rim;
            let (p, q, u, w) = (grid[r][j], grid[r][jn], grid[r + 1][jn], grid[r + 1][j]);
            triangles.push([p, q, u]);
            triangles.push([p, u, w]);
        }
    }
    let n = vertices.len();
    let mesh = TriangleMesh::new(vertices, triangles, Some(vec![Region::VertebralBody; n]))
        .expect("elliptic body is valid by construction");
    (mesh, top_caps, bottom_caps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{face_normals, triangle_area};
    use std::collections::HashMap;

    fn edge_use(mesh: &TriangleMesh) -> HashMap<(usize, usize), (usize, usize)> {
        // (forward count, backward count) per undirected edge
        let mut uses = HashMap::new();
        for t in mesh.triangles() {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                let e = uses.entry((a.min(b), a.max(b))).or_insert((0, 0));
                if a < b {
                    e.0 += 1;
                } else {
                    e.1 += 1;
                }
            }
        }
        uses
    }

    fn signed_volume(mesh: &TriangleMesh) -> f64 {
        mesh.triangles()
            .iter()
            .map(|t| {
                let [a, b, c] = t.map(|i| mesh.vertices()[i].coords);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    #[test]
    fn body_is_closed_and_consistently_oriented() {
        for (s, edge) in [(0.0, 2.0), (0.1, 1.5), (-0.05, 3.0)] {
            let (mesh, _, _) = elliptic_body(20.0, 18.0, 30.0, s, edge);
            assert!(edge_use(&mesh).values().all(|&u| u == (1, 1)));
            assert!(signed_volume(&mesh) > 0.0);
        }
    }

    #[test]
    fn body_volume_approaches_cylinder() {
        // the wedge terms cancel: volume = π·a·b·h
        let (mesh, _, _) = elliptic_body(20.0, 18.0, 30.0, 0.08, 0.5);
        let exact = PI * 20.0 * 18.0 * 30.0;
        assert!((signed_volume(&mesh) - exact).abs() / exact < 2e-3);
    }

    #[test]
    fn caps_face_outward_along_plates() {
        let s = 0.1;
        let (mesh, top, bottom) = elliptic_body(20.0, 18.0, 30.0, s, 2.0);
        let normals = face_normals(&mesh);
        let top_n = nalgebra::Vector3::new(0.0, -s, 1.0).normalize();
        let bottom_n = nalgebra::Vector3::new(0.0, -s, -1.0).normalize();
        assert!(top.iter().all(|&t| (normals[t].unwrap() - top_n).norm() < 1e-9));
        assert!(bottom.iter().all(|&t| (normals[t].unwrap() - bottom_n).norm() < 1e-9));
        let area: f64 = top.iter().map(|&t| triangle_area(&mesh, t)).sum();
        let exact = PI * 20.0 * 18.0 * (1.0 + s * s).sqrt();
        assert!((area - exact).abs() / exact < 0.02);
    }

    #[test]
    fn labelled_face_only_covers_its_plane() {
        let face = BoxFace {
            axis: 0,
            max_side: true,
        };
        let m = labelled_grid_box(
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(0.3, 1.0, 1.0),
            0.25,
            Region::Unlabeled,
            Some((face, Region::SuperiorLeftFacet)),
        );
        for (i, p) in m.vertices().iter().enumerate() {
            assert_eq!(m.label(i) == Region::SuperiorLeftFacet, p.x == 0.3);
        }
    }

    #[test]
    fn grid_box_is_closed() {
        let m = grid_box(
            Point3::new(-1.0, -2.0, -3.0),
            Point3::new(1.0, 2.0, 3.0),
            0.7,
            Region::Unlabeled,
        );
        assert!(edge_use(&m).values().all(|&u| u == (1, 1)));
        assert!((signed_volume(&m) - 48.0).abs() < 1e-9);
    }
}
