//! Ground-truth seams from an existing UV layout: an interior edge is a seam
//! when its two faces disagree on the UV of a shared endpoint.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{Codec, SeamSequence};
use crate::error::{Error, Result};
use crate::mesh::{normalize_to_unit_cube, DisjointSet, EdgeKey, TriMesh, Vec2};

/// UV coordinates closer than this (per component) are the same point.
pub const UV_TOLERANCE: f64 = 1e-7;

/// Seam edges on a mesh plus the face components they separate.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeamEdgeSet {
    pub edges: BTreeSet<EdgeKey>,
    pub islands: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeamEdgeFile {
    pub seam_edges: Vec<[usize; 2]>,
    pub islands: Vec<Vec<usize>>,
}

impl SeamEdgeSet {
    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn contains(&self, key: EdgeKey) -> bool {
        self.edges.contains(&key)
    }

    pub fn to_file(&self) -> SeamEdgeFile {
        SeamEdgeFile { seam_edges: self.edges.iter().map(|k| [k.a(), k.b()]).collect(), islands: self.islands.clone() }
    }

    pub fn from_file(file: &SeamEdgeFile) -> Self {
        SeamEdgeSet {
            edges: file.seam_edges.iter().map(|e| EdgeKey::new(e[0], e[1])).collect(),
            islands: file.islands.clone(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

pub(crate) fn uv_eq(a: Vec2, b: Vec2) -> bool {
    (a[0] - b[0]).abs() <= UV_TOLERANCE && (a[1] - b[1]).abs() <= UV_TOLERANCE
}

fn corner_uv(mesh: &TriMesh, uv: &[Vec2], face: usize, vertex: usize) -> Vec2 {
    let k = mesh.faces()[face].iter().position(|&v| v == vertex).expect("vertex belongs to face");
    uv[3 * face + k]
}

fn faces_agree(mesh: &TriMesh, uv: &[Vec2], key: EdgeKey, f: usize, g: usize) -> bool {
    [key.a(), key.b()].iter().all(|&v| uv_eq(corner_uv(mesh, uv, f, v), corner_uv(mesh, uv, g, v)))
}

/// Classifies seam edges and islands, and converts the seams into a canonical
/// sequence in the mesh's unit-cube frame.
pub fn extract_seams(mesh: &TriMesh, codec: &Codec) -> Result<(SeamEdgeSet, SeamSequence)> {
    let uv = mesh.uv_corners().ok_or(Error::MissingUv)?;
    if uv.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("uv coordinate".into()));
    }

    let mut seams = BTreeSet::new();
    let mut dsu = DisjointSet::new(mesh.face_count());
    for e in mesh.edges() {
        // Open boundary edges are already cut.
        if e.faces.len() < 2 {
            continue;
        }
        let first = e.faces[0];
        let mut seam = false;
        for &g in &e.faces[1..] {
            if faces_agree(mesh, uv, e.key, first, g) {
                dsu.union(first, g);
            } else {
                seam = true;
            }
        }
        if seam {
            seams.insert(e.key);
        }
    }
    let islands = dsu.groups();

    let sequence = if seams.is_empty() {
        SeamSequence::default()
    } else {
        let (unit, _) = normalize_to_unit_cube(mesh)?;
        let v = unit.vertices();
        codec.canonicalize(seams.iter().map(|k| (v[k.a()], v[k.b()])))?
    };
    Ok((SeamEdgeSet { edges: seams, islands }, sequence))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandTopology {
    pub island: usize,
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler: i64,
    pub boundary_loops: usize,
}

impl IslandTopology {
    pub fn is_disk(&self) -> bool {
        self.euler == 1 && self.boundary_loops == 1
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct UvLayoutReport {
    pub flipped_faces: Vec<usize>,
    pub zero_area_faces: Vec<usize>,
    pub overlapping_pairs: Vec<[usize; 2]>,
    pub non_disk_islands: Vec<IslandTopology>,
}

impl UvLayoutReport {
    pub fn is_clean(&self) -> bool {
        self.flipped_faces.is_empty()
            && self.zero_area_faces.is_empty()
            && self.overlapping_pairs.is_empty()
            && self.non_disk_islands.is_empty()
    }
}

fn signed_area(t: &[Vec2; 3]) -> f64 {
    0.5 * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]))
}

/// Interiors intersect by more than `eps` along every separating-axis candidate.
pub(crate) fn triangles_overlap(a: &[Vec2; 3], b: &[Vec2; 3], eps: f64) -> bool {
    for tri in [a, b] {
        for k in 0..3 {
            let p = tri[k];
            let q = tri[(k + 1) % 3];
            let axis = [q[1] - p[1], p[0] - q[0]];
            let proj = |t: &[Vec2; 3]| {
                t.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                    let d = v[0] * axis[0] + v[1] * axis[1];
                    (lo.min(d), hi.max(d))
                })
            };
            let (alo, ahi) = proj(a);
            let (blo, bhi) = proj(b);
            let len = (axis[0] * axis[0] + axis[1] * axis[1]).sqrt();
            if ahi.min(bhi) - alo.max(blo) <= eps * len {
                return false;
            }
        }
    }
    true
}

/// Advisory checks on a UV layout: flipped or zero-area UV triangles,
/// overlapping triangles within an island, and islands that are not disks.
pub fn validate_uv_layout(mesh: &TriMesh, codec: &Codec) -> Result<UvLayoutReport> {
    let uv = mesh.uv_corners().ok_or(Error::MissingUv)?;
    let (seams, _) = extract_seams(mesh, codec)?;
    let face_uv = |f: usize| [uv[3 * f], uv[3 * f + 1], uv[3 * f + 2]];

    let mut report = UvLayoutReport::default();
    let (lo, hi) = uv.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    });
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    let area_eps = 1e-12 * span * span;
    for f in 0..mesh.face_count() {
        let a = signed_area(&face_uv(f));
        if a.abs() <= area_eps {
            report.zero_area_faces.push(f);
        } else if a < 0.0 {
            report.flipped_faces.push(f);
        }
    }

    for (ii, island) in seams.islands.iter().enumerate() {
        report.overlapping_pairs.extend(island_overlaps(island, &face_uv));
        let topo = island_topology(mesh, uv, ii, island);
        if !topo.is_disk() {
            report.non_disk_islands.push(topo);
        }
    }
    report.overlapping_pairs.sort_unstable();
    Ok(report)
}

const GRID: usize = 64;

fn island_overlaps(island: &[usize], face_uv: &impl Fn(usize) -> [Vec2; 3]) -> Vec<[usize; 2]> {
    let tris: Vec<[Vec2; 3]> = island.iter().map(|&f| face_uv(f)).collect();
    let (lo, hi) = tris.iter().flatten().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
        ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
    });
    let size = [(hi[0] - lo[0]).max(1e-300), (hi[1] - lo[1]).max(1e-300)];
    let eps = 1e-9 * size[0].max(size[1]);
    let cell_of = |x: f64, axis: usize| -> usize {
        (((x - lo[axis]) / size[axis] * GRID as f64).floor() as isize).clamp(0, GRID as isize - 1) as usize
    };

    let mut grid: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (i, t) in tris.iter().enumerate() {
        let (tlo, thi) = t.iter().fold(([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]), |(lo, hi), p| {
            ([lo[0].min(p[0]), lo[1].min(p[1])], [hi[0].max(p[0]), hi[1].max(p[1])])
        });
        for cx in cell_of(tlo[0], 0)..=cell_of(thi[0], 0) {
            for cy in cell_of(tlo[1], 1)..=cell_of(thi[1], 1) {
                grid.entry((cx, cy)).or_default().push(i);
            }
        }
    }

    let mut tested = HashSet::new();
    let mut out = Vec::new();
    let mut cells: Vec<_> = grid.into_iter().collect();
    cells.sort_unstable_by_key(|(k, _)| *k);
    for (_, members) in cells {
        for (x, &i) in members.iter().enumerate() {
            for &j in &members[x + 1..] {
                if tested.insert((i, j)) && triangles_overlap(&tris[i], &tris[j], eps) {
                    let (a, b) = (island[i].min(island[j]), island[i].max(island[j]));
                    out.push([a, b]);
                }
            }
        }
    }
    out
}

/// Topology of an island with vertices identified by (mesh vertex, UV position).
fn island_topology(mesh: &TriMesh, uv: &[Vec2], index: usize, island: &[usize]) -> IslandTopology {
    let mut ids: HashMap<usize, Vec<(Vec2, usize)>> = HashMap::new();
    let mut next = 0usize;
    let mut uv_vertex = |v: usize, p: Vec2| -> usize {
        let slots = ids.entry(v).or_default();
        if let Some(&(_, id)) = slots.iter().find(|(q, _)| uv_eq(*q, p)) {
            return id;
        }
        slots.push((p, next));
        next += 1;
        next - 1
    };
    let mut edge_use: HashMap<(usize, usize), usize> = HashMap::new();
    for &f in island {
        let c: Vec<usize> = (0..3).map(|k| uv_vertex(mesh.faces()[f][k], uv[3 * f + k])).collect();
        for k in 0..3 {
            let (a, b) = (c[k], c[(k + 1) % 3]);
            *edge_use.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let vertices = next;
    let boundary: Vec<(usize, usize)> = edge_use.iter().filter(|(_, &n)| n == 1).map(|(&k, _)| k).collect();
    let mut dsu = DisjointSet::new(vertices);
    let mut on_boundary = vec![false; vertices];
    for &(a, b) in &boundary {
        dsu.union(a, b);
        on_boundary[a] = true;
        on_boundary[b] = true;
    }
    let loops = (0..vertices).filter(|&v| on_boundary[v]).map(|v| dsu.find(v)).collect::<HashSet<_>>().len();
    let euler = vertices as i64 - edge_use.len() as i64 + island.len() as i64;
    IslandTopology { island: index, vertices, edges: edge_use.len(), faces: island.len(), euler, boundary_loops: loops }
}
