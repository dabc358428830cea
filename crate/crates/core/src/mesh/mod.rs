//! Indexed triangle meshes with derived edge adjacency.
//!
//! A [`TriMesh`] is immutable once built. Construction validates the face
//! indices and derives the undirected edge list, so every consumer can rely on
//! `edges()` containing each vertex pair exactly once together with the faces
//! that reference both endpoints.

mod obj;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use obj::{load_obj, parse_obj, save_obj, write_obj, ObjWarning};

pub type Vec3 = [f64; 3];
pub type Vec2 = [f64; 2];

/// Undirected edge between two vertices, always stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgeKey {
    a: usize,
    b: usize,
}

impl EdgeKey {
    pub fn new(u: usize, v: usize) -> Self {
        if u < v {
            EdgeKey { a: u, b: v }
        } else {
            EdgeKey { a: v, b: u }
        }
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn b(&self) -> usize {
        self.b
    }

    pub fn other(&self, v: usize) -> usize {
        if v == self.a {
            self.b
        } else {
            self.a
        }
    }

    pub fn contains(&self, v: usize) -> bool {
        self.a == v || self.b == v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub key: EdgeKey,
    /// Faces referencing both endpoints, ascending.
    pub faces: Vec<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.faces.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Vec3>,
    faces: Vec<[usize; 3]>,
    uv_corners: Option<Vec<Vec2>>,
    edges: Vec<Edge>,
    edge_lookup: HashMap<EdgeKey, usize>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        Self::build(vertices, faces, None)
    }

    pub fn with_uvs(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, uv_corners: Vec<Vec2>) -> Result<Self> {
        Self::build(vertices, faces, Some(uv_corners))
    }

    pub fn build(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>, uv_corners: Option<Vec<Vec2>>) -> Result<Self> {
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if f.iter().any(|&v| v >= n) {
                return Err(Error::InvalidMesh(format!(
                    "face {fi} references vertex out of range ({:?}, {n} vertices)",
                    f
                )));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {fi} repeats a vertex: {:?}", f)));
            }
        }
        if let Some(uv) = &uv_corners {
            if uv.len() != 3 * faces.len() {
                return Err(Error::InvalidMesh(format!("{} uv corners for {} faces", uv.len(), faces.len())));
            }
        }
        if vertices.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("vertex coordinate".into()));
        }

        let mut incident: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
        for (fi, f) in faces.iter().enumerate() {
            for k in 0..3 {
                let key = EdgeKey::new(f[k], f[(k + 1) % 3]);
                let list = incident.entry(key).or_default();
                if list.last() != Some(&fi) {
                    list.push(fi);
                }
            }
        }
        let mut edges: Vec<Edge> = incident.into_iter().map(|(key, faces)| Edge { key, faces }).collect();
        edges.sort_by_key(|e| e.key);
        let edge_lookup = edges.iter().enumerate().map(|(i, e)| (e.key, i)).collect();

        Ok(TriMesh { vertices, faces, uv_corners, edges, edge_lookup })
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn uv_corners(&self) -> Option<&[Vec2]> {
        self.uv_corners.as_deref()
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn face_count(&self) -> usize {
        self.faces.len()
    }

    pub fn edge_index(&self, key: EdgeKey) -> Option<usize> {
        self.edge_lookup.get(&key).copied()
    }

    pub fn edge(&self, key: EdgeKey) -> Option<&Edge> {
        self.edge_index(key).map(|i| &self.edges[i])
    }

    pub fn face_uv(&self, face: usize) -> Option<[Vec2; 3]> {
        self.uv_corners.as_ref().map(|uv| [uv[3 * face], uv[3 * face + 1], uv[3 * face + 2]])
    }

    /// Drops the UV channel.
    pub fn without_uvs(&self) -> TriMesh {
        TriMesh { uv_corners: None, ..self.clone() }
    }

    pub fn edge_length(&self, key: EdgeKey) -> f64 {
        distance(self.vertices[key.a], self.vertices[key.b])
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.faces[face].map(|v| self.vertices[v]);
        0.5 * norm(cross(sub(b, a), sub(c, a)))
    }

    pub fn boundary_edge_count(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    /// V - E + F over the whole mesh, counting only vertices referenced by a face.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &v in f {
                used[v] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edges.len() as i64 + self.faces.len() as i64
    }

    /// Face-index sets connected through shared edges, ordered by smallest face.
    pub fn connected_components(&self) -> Vec<Vec<usize>> {
        let mut dsu = DisjointSet::new(self.faces.len());
        for e in &self.edges {
            for w in e.faces.windows(2) {
                dsu.union(w[0], w[1]);
            }
        }
        dsu.groups()
    }

    pub fn bounding_box(&self) -> Option<(Vec3, Vec3)> {
        bounding_box(&self.vertices)
    }
}

/// Uniform scale and translation taking a mesh into `[-1, 1]^3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitCubeTransform {
    pub scale: f64,
    pub center: Vec3,
}

impl UnitCubeTransform {
    pub fn apply(&self, p: Vec3) -> Vec3 {
        [
            (p[0] - self.center[0]) * self.scale,
            (p[1] - self.center[1]) * self.scale,
            (p[2] - self.center[2]) * self.scale,
        ]
    }

    pub fn invert(&self, p: Vec3) -> Vec3 {
        [p[0] / self.scale + self.center[0], p[1] / self.scale + self.center[1], p[2] / self.scale + self.center[2]]
    }

    /// Multiplier mapping normalized lengths back to model lengths.
    pub fn inverse_scale(&self) -> f64 {
        1.0 / self.scale
    }
}

/// Centers the bounding box at the origin and scales by `2 / largest extent`.
pub fn normalize_to_unit_cube(mesh: &TriMesh) -> Result<(TriMesh, UnitCubeTransform)> {
    let transform = unit_cube_transform(mesh.vertices())?;
    let vertices = mesh.vertices.iter().map(|&p| transform.apply(p)).collect();
    let out = TriMesh { vertices, ..mesh.clone() };
    Ok((out, transform))
}

pub fn unit_cube_transform(points: &[Vec3]) -> Result<UnitCubeTransform> {
    let (lo, hi) = bounding_box(points).ok_or(Error::EmptyMesh("vertices"))?;
    let extent = (0..3).map(|k| hi[k] - lo[k]).fold(0.0, f64::max);
    if extent <= 0.0 {
        return Err(Error::Degenerate("mesh has zero extent along every axis".into()));
    }
    let center = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])];
    Ok(UnitCubeTransform { scale: 2.0 / extent, center })
}

pub fn bounding_box(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    let first = *points.first()?;
    Some(points.iter().fold((first, first), |(mut lo, mut hi), p| {
        for k in 0..3 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
        (lo, hi)
    }))
}

/// Incident edges and faces around one vertex.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VertexStar {
    /// Edge indices into `TriMesh::edges`, in fan order when `manifold`.
    pub edges: Vec<usize>,
    /// Face indices, in fan order when `manifold`.
    pub faces: Vec<usize>,
    pub manifold: bool,
    /// True when the fan is open (the vertex lies on the mesh boundary).
    pub boundary: bool,
}

/// Per-vertex stars. Stars that are not a single fan (or that contain an edge
/// shared by more than two faces) are flagged instead of rejected.
pub fn vertex_adjacency(mesh: &TriMesh) -> Vec<VertexStar> {
    let n = mesh.vertex_count();
    let mut vertex_faces: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (fi, f) in mesh.faces().iter().enumerate() {
        for &v in f {
            vertex_faces[v].push(fi);
        }
    }
    let mut vertex_edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (ei, e) in mesh.edges().iter().enumerate() {
        vertex_edges[e.key.a()].push(ei);
        vertex_edges[e.key.b()].push(ei);
    }

    (0..n).map(|v| order_star(mesh, v, &vertex_faces[v], &vertex_edges[v])).collect()
}

fn spokes_of(face: &[usize; 3], v: usize) -> (usize, usize) {
    let i = face.iter().position(|&x| x == v).expect("face contains vertex");
    (face[(i + 1) % 3], face[(i + 2) % 3])
}

fn order_star(mesh: &TriMesh, v: usize, faces: &[usize], edges: &[usize]) -> VertexStar {
    if faces.is_empty() {
        return VertexStar { edges: edges.to_vec(), faces: Vec::new(), manifold: true, boundary: false };
    }
    let spoke_faces =
        |w: usize| -> &[usize] { mesh.edge(EdgeKey::new(v, w)).map(|e| e.faces.as_slice()).unwrap_or(&[]) };
    let over_shared = edges.iter().any(|&ei| mesh.edges()[ei].faces.len() > 2);

    // Open fans start at a face whose leading spoke is a boundary edge.
    let start = faces
        .iter()
        .copied()
        .find(|&f| {
            let (next, _) = spokes_of(&mesh.faces()[f], v);
            spoke_faces(next).len() == 1
        })
        .unwrap_or(faces[0]);

    let mut ordered_faces = vec![start];
    let (first_spoke, mut exit) = spokes_of(&mesh.faces()[start], v);
    let mut ordered_spokes = vec![first_spoke];
    let mut current = start;
    let mut closed = false;
    loop {
        ordered_spokes.push(exit);
        let around = spoke_faces(exit);
        if around.len() != 2 {
            break;
        }
        let next_face = if around[0] == current { around[1] } else { around[0] };
        if next_face == start {
            ordered_spokes.pop();
            closed = true;
            break;
        }
        if ordered_faces.contains(&next_face) {
            break;
        }
        let (a, b) = spokes_of(&mesh.faces()[next_face], v);
        exit = if a == exit { b } else { a };
        ordered_faces.push(next_face);
        current = next_face;
    }

    let manifold = !over_shared && ordered_faces.len() == faces.len();
    if !manifold {
        let mut sorted_edges = edges.to_vec();
        sorted_edges.sort_unstable();
        return VertexStar {
            edges: sorted_edges,
            faces: faces.to_vec(),
            manifold: false,
            boundary: edges.iter().any(|&ei| mesh.edges()[ei].is_boundary()),
        };
    }
    let edge_ids =
        ordered_spokes.iter().map(|&w| mesh.edge_index(EdgeKey::new(v, w)).expect("spoke is an edge")).collect();
    VertexStar { edges: edge_ids, faces: ordered_faces, manifold: true, boundary: !closed }
}

/// Union-find over `0..n` with path halving.
#[derive(Debug, Clone)]
pub struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    pub fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect() }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // Smaller root wins so group ids stay deterministic.
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }

    /// Groups ordered by their smallest member; members ascending.
    pub fn groups(&mut self) -> Vec<Vec<usize>> {
        let n = self.parent.len();
        let mut slot: HashMap<usize, usize> = HashMap::new();
        let mut out: Vec<Vec<usize>> = Vec::new();
        for i in 0..n {
            let r = self.find(i);
            let idx = *slot.entry(r).or_insert_with(|| {
                out.push(Vec::new());
                out.len() - 1
            });
            out[idx].push(i);
        }
        out
    }
}

pub(crate) fn sub(a: Vec3, b: Vec3) -> Vec3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub(crate) fn dot(a: Vec3, b: Vec3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: Vec3, b: Vec3) -> Vec3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn norm(a: Vec3) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: Vec3, b: Vec3) -> f64 {
    norm(sub(a, b))
}

pub fn distance_squared(a: Vec3, b: Vec3) -> f64 {
    let d = sub(a, b);
    dot(d, d)
}
