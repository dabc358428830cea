//! Turning a seam sequence into an actual cut: snap segment endpoints to
//! vertices, join them by shortest edge paths, then split vertices so the
//! seam edges become boundary.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::SeamSequence;
use crate::error::{Error, Result};
use crate::extract::SeamEdgeSet;
use crate::mesh::{distance, distance_squared, normalize_to_unit_cube, DisjointSet, EdgeKey, TriMesh, Vec3};

/// Endpoint pairs snapped onto mesh vertices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SnapResult {
    pub pairs: Vec<[usize; 2]>,
    /// Indices of input segments whose endpoints landed on the same vertex.
    pub dropped: Vec<usize>,
}

/// Nearest vertex by Euclidean distance; ties go to the lowest index.
pub fn nearest_vertex(vertices: &[Vec3], p: Vec3) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, v) in vertices.iter().enumerate() {
        let d = distance_squared(*v, p);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Snaps each segment endpoint of `points` against `vertices` (same frame).
pub fn snap_points(segments: &[[Vec3; 2]], vertices: &[Vec3]) -> SnapResult {
    let mut out = SnapResult::default();
    if vertices.is_empty() {
        out.dropped = (0..segments.len()).collect();
        return out;
    }
    for (i, [p, q]) in segments.iter().enumerate() {
        let a = nearest_vertex(vertices, *p);
        let b = nearest_vertex(vertices, *q);
        if a == b {
            out.dropped.push(i);
        } else {
            out.pairs.push([a, b]);
        }
    }
    out
}

/// Snaps a normalized seam sequence onto the mesh's unit-cube frame.
pub fn snap_to_vertices(seam: &SeamSequence, mesh: &TriMesh) -> Result<SnapResult> {
    let (unit, _) = normalize_to_unit_cube(mesh)?;
    let segs: Vec<[Vec3; 2]> = seam.segments().iter().map(|s| [s.head(), s.tail()]).collect();
    Ok(snap_points(&segs, unit.vertices()))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathResult {
    pub edges: BTreeSet<EdgeKey>,
    /// Pairs whose endpoints lie in different connected components.
    pub skipped: Vec<[usize; 2]>,
}

#[derive(Copy, Clone, PartialEq)]
struct Frontier {
    dist: f64,
    vertex: usize,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        other.dist.total_cmp(&self.dist).then_with(|| other.vertex.cmp(&self.vertex))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

fn neighbor_lists(mesh: &TriMesh) -> Vec<Vec<(usize, f64)>> {
    let mut adj = vec![Vec::new(); mesh.vertex_count()];
    for e in mesh.edges() {
        let w = mesh.edge_length(e.key);
        adj[e.key.a()].push((e.key.b(), w));
        adj[e.key.b()].push((e.key.a(), w));
    }
    adj
}

fn dijkstra_path(adj: &[Vec<(usize, f64)>], from: usize, to: usize) -> Option<Vec<usize>> {
    let mut dist = vec![f64::INFINITY; adj.len()];
    let mut prev = vec![usize::MAX; adj.len()];
    let mut heap = BinaryHeap::new();
    dist[from] = 0.0;
    heap.push(Frontier { dist: 0.0, vertex: from });
    while let Some(Frontier { dist: d, vertex: u }) = heap.pop() {
        if u == to {
            break;
        }
        if d > dist[u] {
            continue;
        }
        for &(w, len) in &adj[u] {
            let nd = d + len;
            if nd < dist[w] {
                dist[w] = nd;
                prev[w] = u;
                heap.push(Frontier { dist: nd, vertex: w });
            }
        }
    }
    if !dist[to].is_finite() {
        return None;
    }
    let mut path = vec![to];
    while *path.last().expect("nonempty") != from {
        path.push(prev[*path.last().expect("nonempty")]);
    }
    path.reverse();
    Some(path)
}

/// Length of the shortest edge path between two vertices.
pub fn edge_path_length(mesh: &TriMesh, from: usize, to: usize) -> Option<f64> {
    let adj = neighbor_lists(mesh);
    dijkstra_path(&adj, from, to)
        .map(|p| p.windows(2).map(|w| distance(mesh.vertices()[w[0]], mesh.vertices()[w[1]])).sum())
}

/// Joins each pair by its shortest path in the edge graph (Dijkstra, edge
/// weight = Euclidean length) and unions the path edges.
pub fn connect_geodesic(pairs: &[[usize; 2]], mesh: &TriMesh) -> PathResult {
    let adj = neighbor_lists(mesh);
    let mut out = PathResult::default();
    for &[a, b] in pairs {
        match dijkstra_path(&adj, a, b) {
            Some(path) => out.edges.extend(path.windows(2).map(|w| EdgeKey::new(w[0], w[1]))),
            None => out.skipped.push([a, b]),
        }
    }
    out
}

/// V, E, F and boundary loops of one chart.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChartTopology {
    pub chart: usize,
    pub vertices: usize,
    pub edges: usize,
    pub faces: usize,
    pub euler: i64,
    pub boundary_loops: usize,
    pub genus: i64,
}

impl ChartTopology {
    pub fn is_disk(&self) -> bool {
        self.euler == 1 && self.boundary_loops == 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutResult {
    pub cut_mesh: TriMesh,
    pub charts: Vec<Vec<usize>>,
    pub vertex_origin: Vec<usize>,
    /// Seam edges that actually opened; `islands` mirrors `charts`.
    pub applied_seam_edges: SeamEdgeSet,
    /// Requested interior seam edges that could not open (an isolated edge
    /// whose endpoints both sit inside the surface).
    pub unopened_edges: Vec<EdgeKey>,
    /// Requested seam edges that were already open boundary.
    pub boundary_seam_edges: Vec<EdgeKey>,
}

impl CutResult {
    pub fn duplicated_vertices(&self) -> usize {
        self.vertex_origin.len() - self.vertex_origin.iter().copied().collect::<BTreeSet<_>>().len()
    }

    pub fn chart_topology(&self) -> Vec<ChartTopology> {
        self.charts.iter().enumerate().map(|(i, faces)| chart_topology(&self.cut_mesh, faces, i)).collect()
    }

    /// The chart as a standalone mesh plus a local-to-cut vertex map.
    pub fn chart_mesh(&self, chart: usize) -> Result<(TriMesh, Vec<usize>)> {
        submesh(&self.cut_mesh, &self.charts[chart])
    }

    pub fn save_chart_map(&self, path: impl AsRef<Path>) -> Result<()> {
        #[derive(Serialize)]
        struct ChartMap<'a> {
            charts: &'a [Vec<usize>],
            vertex_origin: &'a [usize],
        }
        let path = path.as_ref();
        let text = serde_json::to_string(&ChartMap { charts: &self.charts, vertex_origin: &self.vertex_origin })?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Copies the given faces into a compact mesh (vertex order of first use).
pub fn submesh(mesh: &TriMesh, faces: &[usize]) -> Result<(TriMesh, Vec<usize>)> {
    let mut local: HashMap<usize, usize> = HashMap::new();
    let mut map = Vec::new();
    let mut out_faces = Vec::with_capacity(faces.len());
    for &f in faces {
        out_faces.push(mesh.faces()[f].map(|v| {
            *local.entry(v).or_insert_with(|| {
                map.push(v);
                map.len() - 1
            })
        }));
    }
    let verts = map.iter().map(|&v| mesh.vertices()[v]).collect();
    let uv = mesh.uv_corners().map(|uv| faces.iter().flat_map(|&f| uv[3 * f..3 * f + 3].iter().copied()).collect());
    Ok((TriMesh::build(verts, out_faces, uv)?, map))
}

pub fn chart_topology(mesh: &TriMesh, faces: &[usize], chart: usize) -> ChartTopology {
    let mut verts = BTreeSet::new();
    let mut edges: HashMap<EdgeKey, usize> = HashMap::new();
    for &f in faces {
        let t = mesh.faces()[f];
        verts.extend(t);
        for k in 0..3 {
            *edges.entry(EdgeKey::new(t[k], t[(k + 1) % 3])).or_default() += 1;
        }
    }
    let vlist: Vec<usize> = verts.iter().copied().collect();
    let index: HashMap<usize, usize> = vlist.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let mut dsu = DisjointSet::new(vlist.len());
    let mut on_boundary = vec![false; vlist.len()];
    for (k, &count) in &edges {
        if count == 1 {
            let (a, b) = (index[&k.a()], index[&k.b()]);
            on_boundary[a] = true;
            on_boundary[b] = true;
            dsu.union(a, b);
        }
    }
    let boundary_loops = dsu.groups().iter().filter(|g| on_boundary[g[0]]).count();
    let euler = vlist.len() as i64 - edges.len() as i64 + faces.len() as i64;
    ChartTopology {
        chart,
        vertices: vlist.len(),
        edges: edges.len(),
        faces: faces.len(),
        euler,
        boundary_loops,
        genus: (2 - boundary_loops as i64 - euler) / 2,
    }
}

/// Splits every vertex into one copy per fan sector, where sectors are the
/// groups of incident faces still connected through non-seam manifold edges.
/// The sector holding the lowest face index keeps the original vertex index.
pub fn cut_along_edges(mesh: &TriMesh, seam: &BTreeSet<EdgeKey>) -> Result<CutResult> {
    for k in seam {
        if mesh.edge(*k).is_none() {
            return Err(Error::SeamEdgeNotInMesh(k.a(), k.b()));
        }
    }
    let n = mesh.vertex_count();
    let faces = mesh.faces();
    let mut vertex_faces: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (fi, f) in faces.iter().enumerate() {
        for &v in f {
            vertex_faces[v].push(fi);
        }
    }

    let mut vertex_origin: Vec<usize> = (0..n).collect();
    let mut vertices = mesh.vertices().to_vec();
    let mut new_faces = faces.to_vec();
    // Sector label per (vertex, face) so opened edges can be detected.
    let mut sector_of: HashMap<(usize, usize), usize> = HashMap::new();
    for v in 0..n {
        let inc = &vertex_faces[v];
        if inc.len() <= 1 {
            if let Some(&f) = inc.first() {
                sector_of.insert((v, f), 0);
            }
            continue;
        }
        let pos: HashMap<usize, usize> = inc.iter().enumerate().map(|(i, f)| (*f, i)).collect();
        let mut dsu = DisjointSet::new(inc.len());
        for &f in inc {
            for &w in &faces[f] {
                if w == v {
                    continue;
                }
                let key = EdgeKey::new(v, w);
                let e = mesh.edge(key).expect("face edge exists");
                if e.faces.len() == 2 && !seam.contains(&key) {
                    dsu.union(pos[&e.faces[0]], pos[&e.faces[1]]);
                }
            }
        }
        // Groups come ordered by smallest member, i.e. lowest face first.
        for (s, group) in dsu.groups().iter().enumerate() {
            let target = if s == 0 {
                v
            } else {
                vertices.push(vertices[v]);
                vertex_origin.push(v);
                vertices.len() - 1
            };
            for &i in group {
                let f = inc[i];
                sector_of.insert((v, f), s);
                for slot in new_faces[f].iter_mut() {
                    if *slot == v {
                        *slot = target;
                    }
                }
            }
        }
    }

    let mut applied = BTreeSet::new();
    let mut unopened = Vec::new();
    let mut boundary = Vec::new();
    for k in seam {
        let e = mesh.edge(*k).expect("checked above");
        if e.faces.len() < 2 {
            boundary.push(*k);
            continue;
        }
        let opened = [k.a(), k.b()].iter().any(|&v| {
            let s0 = sector_of[&(v, e.faces[0])];
            e.faces[1..].iter().any(|&g| sector_of[&(v, g)] != s0)
        });
        if opened {
            applied.insert(*k);
        } else {
            unopened.push(*k);
        }
    }

    let cut_mesh = TriMesh::build(vertices, new_faces, mesh.uv_corners().map(|u| u.to_vec()))?;
    let charts = face_components(&cut_mesh);
    Ok(CutResult {
        applied_seam_edges: SeamEdgeSet { edges: applied, islands: charts.clone() },
        cut_mesh,
        charts,
        vertex_origin,
        unopened_edges: unopened,
        boundary_seam_edges: boundary,
    })
}

/// Face components joined across edges with exactly two faces.
fn face_components(mesh: &TriMesh) -> Vec<Vec<usize>> {
    let mut dsu = DisjointSet::new(mesh.face_count());
    for e in mesh.edges() {
        if e.faces.len() == 2 {
            dsu.union(e.faces[0], e.faces[1]);
        }
    }
    dsu.groups()
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CutReport {
    pub segments: usize,
    pub dropped_pairs: Vec<usize>,
    pub skipped_pairs: Vec<[usize; 2]>,
    pub seam_edges: usize,
    pub unopened_edges: Vec<[usize; 2]>,
    pub duplicated_vertices: usize,
    pub charts: Vec<ChartTopology>,
    pub warnings: Vec<String>,
}

impl CutReport {
    pub fn non_disk_charts(&self) -> Vec<&ChartTopology> {
        self.charts.iter().filter(|c| !c.is_disk()).collect()
    }
}

/// Snap, connect and cut. The sequence is in the mesh's unit-cube frame.
pub fn apply_seams(mesh: &TriMesh, seam: &SeamSequence) -> Result<(CutResult, CutReport)> {
    let snap = snap_to_vertices(seam, mesh)?;
    let paths = connect_geodesic(&snap.pairs, mesh);
    let cut = cut_along_edges(mesh, &paths.edges)?;
    let mut warnings = Vec::new();
    if paths.edges.is_empty() {
        warnings.push("no effective seam edges; mesh left uncut".to_string());
    }
    let report = CutReport {
        segments: seam.len(),
        dropped_pairs: snap.dropped,
        skipped_pairs: paths.skipped,
        seam_edges: cut.applied_seam_edges.len(),
        unopened_edges: cut.unopened_edges.iter().map(|k| [k.a(), k.b()]).collect(),
        duplicated_vertices: cut.duplicated_vertices(),
        charts: cut.chart_topology(),
        warnings,
    };
    Ok((cut, report))
}

/// Extra original-mesh edges that, added to the seam, turn every non-disk
/// chart of `cut` into a disk. Per chart: faces are glued along a spanning
/// tree of the dual graph; the remaining edges form a cut graph, whose
/// dangling interior branches are pruned. Closed charts keep a two-edge slit.
pub fn disk_cut_edges(cut: &CutResult) -> BTreeSet<EdgeKey> {
    let mesh = &cut.cut_mesh;
    let mut extra = BTreeSet::new();
    for (ci, chart) in cut.charts.iter().enumerate() {
        let topo = chart_topology(mesh, chart, ci);
        if topo.is_disk() {
            continue;
        }
        let in_chart: BTreeSet<usize> = chart.iter().copied().collect();
        let mut chart_edges: BTreeSet<EdgeKey> = BTreeSet::new();
        for &f in chart {
            let t = mesh.faces()[f];
            for k in 0..3 {
                chart_edges.insert(EdgeKey::new(t[k], t[(k + 1) % 3]));
            }
        }
        // Breadth-first dual spanning tree from the lowest face.
        let mut tree_edges = BTreeSet::new();
        let mut seen = BTreeSet::from([chart[0]]);
        let mut queue = std::collections::VecDeque::from([chart[0]]);
        while let Some(f) = queue.pop_front() {
            let t = mesh.faces()[f];
            for k in 0..3 {
                let key = EdgeKey::new(t[k], t[(k + 1) % 3]);
                let e = mesh.edge(key).expect("face edge");
                if e.faces.len() != 2 {
                    continue;
                }
                let g = if e.faces[0] == f { e.faces[1] } else { e.faces[0] };
                if in_chart.contains(&g) && seen.insert(g) {
                    tree_edges.insert(key);
                    queue.push_back(g);
                }
            }
        }
        let mut graph: BTreeSet<EdgeKey> = chart_edges.difference(&tree_edges).copied().collect();
        let is_boundary = |k: &EdgeKey| mesh.edge(*k).map(|e| e.faces.len() == 1).unwrap_or(false);
        let closed = topo.boundary_loops == 0;
        loop {
            let mut degree: HashMap<usize, usize> = HashMap::new();
            for k in &graph {
                *degree.entry(k.a()).or_default() += 1;
                *degree.entry(k.b()).or_default() += 1;
            }
            let interior = graph.iter().filter(|k| !is_boundary(k)).count();
            let leaf = graph.iter().find(|k| !is_boundary(k) && (degree[&k.a()] == 1 || degree[&k.b()] == 1)).copied();
            match leaf {
                Some(k) if !(closed && interior <= 2) => {
                    graph.remove(&k);
                }
                _ => break,
            }
        }
        for k in graph.iter().filter(|k| !is_boundary(k)) {
            extra.insert(EdgeKey::new(cut.vertex_origin[k.a()], cut.vertex_origin[k.b()]));
        }
    }
    extra
}
