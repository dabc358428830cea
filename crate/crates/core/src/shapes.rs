//! Procedural meshes with known topology: grids, tubes, capped cylinders,
//! UV spheres and subdivided boxes, plus hand-built UV fixtures. Each
//! generator that has a natural cut returns it as mesh edges.

use std::collections::HashMap;
use std::f64::consts::PI;

use crate::mesh::{EdgeKey, TriMesh, Vec2, Vec3};

/// Two triangles in the z=0 plane. With `split`, the second triangle's UVs are
/// shifted so the diagonal becomes a UV seam.
pub fn flat_quad(split: bool) -> TriMesh {
    let v = vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [0.0, 1.0, 0.0]];
    let f = vec![[0, 1, 2], [0, 2, 3]];
    let off = if split { 2.0 } else { 0.0 };
    let uv = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [off, 0.0], [off + 1.0, 1.0], [off, 1.0]];
    TriMesh::with_uvs(v, f, uv).expect("valid quad")
}

/// Unit cube (12 triangles) with a cross-shaped UV net: one island, seven cut
/// edges forming a spanning tree of the cube corners.
pub fn cross_cube() -> TriMesh {
    let mut verts: Vec<Vec3> = Vec::new();
    let mut index: HashMap<[i32; 3], usize> = HashMap::new();
    let mut faces = Vec::new();
    let mut uv: Vec<Vec2> = Vec::new();
    // Each side: four corners counterclockwise from outside, and the matching
    // net coordinates (in quarter units).
    type Side = ([[i32; 3]; 4], [[f64; 2]; 4]);
    let sides: [Side; 6] = [
        // front z=1
        ([[0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1]], [[1.0, 1.0], [2.0, 1.0], [2.0, 2.0], [1.0, 2.0]]),
        // top y=1
        ([[0, 1, 1], [1, 1, 1], [1, 1, 0], [0, 1, 0]], [[1.0, 2.0], [2.0, 2.0], [2.0, 3.0], [1.0, 3.0]]),
        // bottom y=0
        ([[0, 0, 0], [1, 0, 0], [1, 0, 1], [0, 0, 1]], [[1.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0]]),
        // right x=1
        ([[1, 0, 1], [1, 0, 0], [1, 1, 0], [1, 1, 1]], [[2.0, 1.0], [3.0, 1.0], [3.0, 2.0], [2.0, 2.0]]),
        // left x=0
        ([[0, 0, 0], [0, 0, 1], [0, 1, 1], [0, 1, 0]], [[0.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]]),
        // back z=0
        ([[1, 0, 0], [0, 0, 0], [0, 1, 0], [1, 1, 0]], [[3.0, 1.0], [4.0, 1.0], [4.0, 2.0], [3.0, 2.0]]),
    ];
    for (corners, net) in sides.iter() {
        let ids: Vec<usize> = corners
            .iter()
            .map(|c| {
                *index.entry(*c).or_insert_with(|| {
                    verts.push([c[0] as f64, c[1] as f64, c[2] as f64]);
                    verts.len() - 1
                })
            })
            .collect();
        for tri in [[0, 1, 2], [0, 2, 3]] {
            faces.push(tri.map(|k| ids[k]));
            for k in tri {
                uv.push([net[k][0] / 4.0, net[k][1] / 4.0]);
            }
        }
    }
    TriMesh::with_uvs(verts, faces, uv).expect("valid cube")
}

/// Planar `nx` x `ny` grid of size `width` x `height` in the z=0 plane, UVs
/// equal to the planar coordinates.
pub fn grid(nx: usize, ny: usize, width: f64, height: f64) -> TriMesh {
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut v = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            v.push([width * i as f64 / nx as f64, height * j as f64 / ny as f64, 0.0]);
        }
    }
    let mut f = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            f.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            f.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    let uv = f.iter().flat_map(|t: &[usize; 3]| t.map(|k| [v[k][0], v[k][1]])).collect();
    TriMesh::with_uvs(v, f, uv).expect("valid grid")
}

fn ring_point(radius: f64, angle: f64, y: f64) -> Vec3 {
    [radius * angle.cos(), y, -radius * angle.sin()]
}

/// Open tube around the y axis: `around` segments per ring, `rows` bands.
/// Returns the mesh and the vertical line of edges at angle 0 (rim to rim).
pub fn tube(around: usize, rows: usize, radius: f64, height: f64) -> (TriMesh, Vec<EdgeKey>) {
    let id = |r: usize, a: usize| r * around + (a % around);
    let mut v = Vec::new();
    for r in 0..=rows {
        let y = height * r as f64 / rows as f64;
        for a in 0..around {
            v.push(ring_point(radius, 2.0 * PI * a as f64 / around as f64, y));
        }
    }
    let mut f = Vec::new();
    for r in 0..rows {
        for a in 0..around {
            f.push([id(r, a), id(r, a + 1), id(r + 1, a + 1)]);
            f.push([id(r, a), id(r + 1, a + 1), id(r + 1, a)]);
        }
    }
    let seam = (0..rows).map(|r| EdgeKey::new(id(r, 0), id(r + 1, 0))).collect();
    (TriMesh::new(v, f).expect("valid tube"), seam)
}

/// Tube closed by two fan caps. The returned cut is the vertical line plus
/// both rim rings, which separates the side (a disk after the line cut) from
/// the caps.
pub fn capped_cylinder(around: usize, rows: usize, radius: f64, height: f64) -> (TriMesh, Vec<EdgeKey>) {
    let (t, mut seam) = tube(around, rows, radius, height);
    let mut v = t.vertices().to_vec();
    let mut f = t.faces().to_vec();
    let bottom = v.len();
    v.push([0.0, 0.0, 0.0]);
    let top = v.len();
    v.push([0.0, height, 0.0]);
    let id = |r: usize, a: usize| r * around + (a % around);
    for a in 0..around {
        f.push([bottom, id(0, a + 1), id(0, a)]);
        f.push([top, id(rows, a), id(rows, a + 1)]);
        seam.push(EdgeKey::new(id(0, a), id(0, a + 1)));
        seam.push(EdgeKey::new(id(rows, a), id(rows, a + 1)));
    }
    (TriMesh::new(v, f).expect("valid cylinder"), seam)
}

/// Latitude/longitude sphere: `around` meridians, `bands` latitude bands
/// (so `bands - 1` rings plus two poles). Vertex 0 is the south pole, the last
/// vertex the north pole, ring `r` (1-based) starts at `1 + (r - 1) * around`.
pub fn uv_sphere(around: usize, bands: usize, radius: f64) -> TriMesh {
    let mut v = vec![[0.0, -radius, 0.0]];
    for r in 1..bands {
        let theta = PI * r as f64 / bands as f64;
        let y = -radius * theta.cos();
        let rr = radius * theta.sin();
        for a in 0..around {
            v.push(ring_point(rr, 2.0 * PI * a as f64 / around as f64, y));
        }
    }
    let north = v.len();
    v.push([0.0, radius, 0.0]);
    let ring = |r: usize, a: usize| 1 + (r - 1) * around + (a % around);
    let mut f = Vec::new();
    for a in 0..around {
        f.push([0, ring(1, a + 1), ring(1, a)]);
        f.push([north, ring(bands - 1, a), ring(bands - 1, a + 1)]);
    }
    for r in 1..bands - 1 {
        for a in 0..around {
            f.push([ring(r, a), ring(r, a + 1), ring(r + 1, a + 1)]);
            f.push([ring(r, a), ring(r + 1, a + 1), ring(r + 1, a)]);
        }
    }
    TriMesh::new(v, f).expect("valid sphere")
}

/// Edges of latitude ring `r` (1-based) of a [`uv_sphere`].
pub fn sphere_ring(around: usize, r: usize) -> Vec<EdgeKey> {
    let ring = |a: usize| 1 + (r - 1) * around + (a % around);
    (0..around).map(|a| EdgeKey::new(ring(a), ring(a + 1))).collect()
}

/// Meridian at angle 0 from pole to pole of a [`uv_sphere`].
pub fn sphere_meridian(around: usize, bands: usize) -> Vec<EdgeKey> {
    let north = 1 + (bands - 1) * around;
    let mut path = vec![0];
    path.extend((1..bands).map(|r| 1 + (r - 1) * around));
    path.push(north);
    path.windows(2).map(|w| EdgeKey::new(w[0], w[1])).collect()
}

/// Sphere cut along one meridian and both polar rings.
pub fn sphere_with_seam(around: usize, bands: usize, radius: f64) -> (TriMesh, Vec<EdgeKey>) {
    let mesh = uv_sphere(around, bands, radius);
    let mut seam = sphere_meridian(around, bands);
    seam.extend(sphere_ring(around, 1));
    seam.extend(sphere_ring(around, bands - 1));
    (mesh, seam)
}

/// Closed box surface subdivided into `n[axis]` cells per axis, spanning
/// `[0, size]`. The returned cut is the seven-edge spanning tree of the box
/// corners (three top edges, three bottom edges, one vertical edge) that
/// unfolds the box into a cross.
pub fn subdivided_box(n: [usize; 3], size: Vec3) -> (TriMesh, Vec<EdgeKey>) {
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut v: Vec<Vec3> = Vec::new();
    let mut vid = |p: [usize; 3]| -> usize {
        *index.entry(p).or_insert_with(|| {
            v.push([
                size[0] * p[0] as f64 / n[0] as f64,
                size[1] * p[1] as f64 / n[1] as f64,
                size[2] * p[2] as f64 / n[2] as f64,
            ]);
            v.len() - 1
        })
    };
    // (fixed axis, at max?, u axis, v axis) with u x v pointing outward.
    let sides =
        [(0, true, 1, 2), (0, false, 2, 1), (1, true, 2, 0), (1, false, 0, 2), (2, true, 0, 1), (2, false, 1, 0)];
    let mut f = Vec::new();
    for &(fixed, at_max, ua, va) in &sides {
        for j in 0..n[va] {
            for i in 0..n[ua] {
                let corner = |di: usize, dj: usize| {
                    let mut p = [0usize; 3];
                    p[fixed] = if at_max { n[fixed] } else { 0 };
                    p[ua] = i + di;
                    p[va] = j + dj;
                    p
                };
                let (p00, p10, p11, p01) = (vid(corner(0, 0)), vid(corner(1, 0)), vid(corner(1, 1)), vid(corner(0, 1)));
                f.push([p00, p10, p11]);
                f.push([p00, p11, p01]);
            }
        }
    }

    let mut seam = Vec::new();
    let mut line = |from: [usize; 3], axis: usize| {
        for s in 0..n[axis] {
            let mut a = from;
            a[axis] = s;
            let mut b = from;
            b[axis] = s + 1;
            seam.push(EdgeKey::new(index[&a], index[&b]));
        }
    };
    let [nx, ny, _] = n;
    for y in [0, ny] {
        line([0, y, 0], 0);
        line([0, y, 0], 2);
        line([nx, y, 0], 2);
    }
    line([0, 0, 0], 1);
    (TriMesh::new(v, f).expect("valid box"), seam)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_shapes_have_sphere_topology() {
        let (b, seam) = subdivided_box([2, 3, 4], [1.0, 2.0, 3.0]);
        assert_eq!(b.euler_characteristic(), 2);
        assert_eq!(b.boundary_edge_count(), 0);
        assert_eq!(seam.len(), 2 * (2 + 4 + 4) + 3);
        assert!(seam.iter().all(|k| b.edge(*k).is_some()));

        let (c, seam) = capped_cylinder(8, 3, 1.0, 2.0);
        assert_eq!(c.euler_characteristic(), 2);
        assert_eq!(seam.len(), 3 + 16);

        let s = uv_sphere(8, 6, 1.0);
        assert_eq!(s.euler_characteristic(), 2);
        assert_eq!(s.vertex_count(), 8 * 5 + 2);
        assert!(sphere_meridian(8, 6).iter().all(|k| s.edge(*k).is_some()));
        assert!(sphere_ring(8, 3).iter().all(|k| s.edge(*k).is_some()));
    }

    #[test]
    fn box_faces_point_outward() {
        let (b, _) = subdivided_box([2, 2, 2], [1.0, 1.0, 1.0]);
        let c = [0.5, 0.5, 0.5];
        for f in b.faces() {
            let [p, q, r] = f.map(|k| b.vertices()[k]);
            let n = crate::mesh::cross(crate::mesh::sub(q, p), crate::mesh::sub(r, p));
            let centroid = [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0, (p[2] + q[2] + r[2]) / 3.0];
            assert!(crate::mesh::dot(n, crate::mesh::sub(centroid, c)) > 0.0);
        }
    }

    #[test]
    fn tube_is_an_annulus() {
        let (t, seam) = tube(16, 4, 1.0, 1.0);
        assert_eq!(t.euler_characteristic(), 0);
        assert_eq!(seam.len(), 4);
    }

    #[test]
    fn grid_counts() {
        let g = grid(3, 3, 1.0, 1.0);
        assert_eq!(g.vertex_count(), 16);
        assert_eq!(g.face_count(), 18);
        assert_eq!(g.euler_characteristic(), 1);
    }
}
