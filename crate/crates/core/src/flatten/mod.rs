//! Least-squares conformal flattening of disk charts, the conformal-energy
//! distortion metric, and atlas packing.

mod pack;
pub mod sparse;

pub use pack::{pack_atlas, Packing, GUTTER};

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cutter::{chart_topology, CutResult};
use crate::error::{Error, Result};
use crate::mesh::{cross, distance_squared, dot, norm, sub, TriMesh, Vec2, Vec3};
use sparse::{SolveStats, TripletBuilder};

pub const DEGENERATE_AREA: f64 = 1e-12;
pub const SOLVER_TOLERANCE: f64 = 1e-10;
pub const SOLVER_MAX_ITERATIONS: usize = 10_000;

/// Singular values of the per-face map from the 3D triangle to its UV image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceDistortion {
    pub sigma1: f64,
    pub sigma2: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    /// `None` for faces skipped as degenerate.
    pub per_face: Vec<Option<FaceDistortion>>,
    /// Mean over counted faces; `None` when every face was skipped.
    pub mean: Option<f64>,
    pub counted: usize,
    pub skipped: usize,
}

fn triangle_frame(p: [Vec3; 3]) -> Option<[Vec2; 3]> {
    let e1 = sub(p[1], p[0]);
    let e2 = sub(p[2], p[0]);
    let l1 = norm(e1);
    let n = cross(e1, e2);
    if l1 == 0.0 || norm(n) == 0.0 {
        return None;
    }
    let x = e1.map(|c| c / l1);
    let y = cross(n, x);
    let ly = norm(y);
    let y = y.map(|c| c / ly);
    Some([[0.0, 0.0], [l1, 0.0], [dot(e2, x), dot(e2, y)]])
}

fn area2(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

/// Distortion of one face, or `None` when either triangle is degenerate.
pub fn face_distortion(p: [Vec3; 3], w: [Vec2; 3]) -> Option<FaceDistortion> {
    let area3 = 0.5 * norm(cross(sub(p[1], p[0]), sub(p[2], p[0])));
    if area3 <= DEGENERATE_AREA || area2(w[0], w[1], w[2]).abs() <= DEGENERATE_AREA {
        return None;
    }
    let q = triangle_frame(p)?;
    // J * [q1-q0, q2-q0] = [w1-w0, w2-w0]
    let (a, c) = (q[1][0], q[2][0]);
    let d = q[2][1];
    let (u1, v1) = (w[1][0] - w[0][0], w[1][1] - w[0][1]);
    let (u2, v2) = (w[2][0] - w[0][0], w[2][1] - w[0][1]);
    // Q = [[a, c], [0, d]], Q^-1 = [[1/a, -c/(a d)], [0, 1/d]]
    let j00 = u1 / a;
    let j01 = (u2 - c * j00) / d;
    let j10 = v1 / a;
    let j11 = (v2 - c * j10) / d;
    let s = ((j00 + j11).powi(2) + (j10 - j01).powi(2)).sqrt();
    let t = ((j00 - j11).powi(2) + (j10 + j01).powi(2)).sqrt();
    let sigma1 = 0.5 * (s + t);
    let sigma2 = 0.5 * (s - t).abs();
    Some(FaceDistortion { sigma1, sigma2, energy: sigma1.ln().abs() + sigma2.ln().abs() })
}

/// Per-face `|ln s1| + |ln s2|` with `uv` given per vertex of `mesh`.
pub fn conformal_energy(mesh: &TriMesh, uv: &[Vec2]) -> EnergyReport {
    let v = mesh.vertices();
    let per_face: Vec<Option<FaceDistortion>> =
        mesh.faces().iter().map(|f| face_distortion(f.map(|k| v[k]), f.map(|k| uv[k]))).collect();
    summarize(per_face)
}

fn summarize(per_face: Vec<Option<FaceDistortion>>) -> EnergyReport {
    let counted = per_face.iter().flatten().count();
    let sum: f64 = per_face.iter().flatten().map(|d| d.energy).sum();
    EnergyReport {
        skipped: per_face.len() - counted,
        mean: (counted > 0).then(|| sum / counted as f64),
        counted,
        per_face,
    }
}

/// Approximate boundary diameter: farthest boundary vertex from the lowest
/// boundary vertex, then the farthest from that one. Ties go low.
pub fn boundary_pins(mesh: &TriMesh) -> Option<[usize; 2]> {
    let mut boundary: Vec<usize> =
        mesh.edges().iter().filter(|e| e.is_boundary()).flat_map(|e| [e.key.a(), e.key.b()]).collect();
    boundary.sort_unstable();
    boundary.dedup();
    let v = mesh.vertices();
    let farthest = |from: usize| {
        let mut best = boundary[0];
        let mut best_d = -1.0;
        for &b in &boundary {
            let d = distance_squared(v[from], v[b]);
            if d > best_d {
                best_d = d;
                best = b;
            }
        }
        best
    };
    let first = *boundary.first()?;
    let a = farthest(first);
    let b = farthest(a);
    (a != b).then_some([a.min(b), a.max(b)])
}

fn check_disk(mesh: &TriMesh) -> Result<()> {
    let all: Vec<usize> = (0..mesh.face_count()).collect();
    let topo = chart_topology(mesh, &all, 0);
    let used = topo.vertices == mesh.vertex_count();
    if !topo.is_disk() || !used || mesh.connected_components().len() != 1 {
        return Err(Error::NonDiskChart {
            chart: 0,
            euler: topo.euler,
            boundary_loops: topo.boundary_loops,
            genus: topo.genus,
        });
    }
    if let Some(f) = (0..mesh.face_count()).find(|&f| mesh.face_area(f) <= DEGENERATE_AREA) {
        return Err(Error::Degenerate(format!("face {f} has zero area")));
    }
    Ok(())
}

/// Raw LSCM solution with the given two vertices held at fixed positions.
pub fn lscm_with_pins(mesh: &TriMesh, pins: [(usize, Vec2); 2]) -> Result<(Vec<Vec2>, SolveStats)> {
    let n = mesh.vertex_count();
    let pinned: HashMap<usize, Vec2> = pins.iter().copied().collect();
    let mut slot = vec![usize::MAX; n];
    let mut free = 0;
    for (v, s) in slot.iter_mut().enumerate() {
        if !pinned.contains_key(&v) {
            *s = free;
            free += 1;
        }
    }
    let mut m = TripletBuilder::new(2 * free);
    let mut rhs = vec![0.0; 2 * free];
    let verts = mesh.vertices();
    for f in mesh.faces() {
        let q = triangle_frame(f.map(|k| verts[k])).ok_or_else(|| Error::Degenerate("zero-area face".into()))?;
        let area = area2(q[0], q[1], q[2]);
        let scale = 1.0 / (2.0 * area.sqrt());
        // Row coefficients per corner on (u, v): two Cauchy-Riemann residuals.
        let mut rows = [[(0usize, 0.0f64, 0.0f64); 3]; 2];
        for j in 0..3 {
            let e = [q[(j + 2) % 3][0] - q[(j + 1) % 3][0], q[(j + 2) % 3][1] - q[(j + 1) % 3][1]];
            rows[0][j] = (f[j], -e[1] * scale, -e[0] * scale);
            rows[1][j] = (f[j], e[0] * scale, -e[1] * scale);
        }
        for row in &rows {
            let mut fixed = 0.0;
            let mut vars: Vec<(usize, f64)> = Vec::with_capacity(6);
            for &(vtx, cu, cv) in row {
                match pinned.get(&vtx) {
                    Some(p) => fixed += cu * p[0] + cv * p[1],
                    None => {
                        vars.push((2 * slot[vtx], cu));
                        vars.push((2 * slot[vtx] + 1, cv));
                    }
                }
            }
            for &(a, ca) in &vars {
                rhs[a] -= ca * fixed;
                for &(b, cb) in &vars {
                    m.add(a, b, ca * cb);
                }
            }
        }
    }
    let m = m.build();
    let mut x = vec![0.0; 2 * free];
    let stats = m.solve_pcg(&rhs, &mut x, SOLVER_TOLERANCE, SOLVER_MAX_ITERATIONS)?;
    let uv = (0..n)
        .map(|v| match pinned.get(&v) {
            Some(p) => *p,
            None => [x[2 * slot[v]], x[2 * slot[v] + 1]],
        })
        .collect();
    Ok((uv, stats))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartFlattening {
    pub uv: Vec<Vec2>,
    pub pins: [usize; 2],
    pub stats: SolveStats,
}

/// Flattens a disk chart: LSCM with the boundary diameter pinned to (0,0) and
/// (1,0), then uniformly rescaled so the layout area equals the surface area.
pub fn flatten_chart(mesh: &TriMesh) -> Result<ChartFlattening> {
    check_disk(mesh)?;
    let pins = boundary_pins(mesh).ok_or_else(|| Error::Degenerate("chart boundary is a single point".into()))?;
    let (mut uv, stats) = lscm_with_pins(mesh, [(pins[0], [0.0, 0.0]), (pins[1], [1.0, 0.0])])?;
    let surface: f64 = (0..mesh.face_count()).map(|f| mesh.face_area(f)).sum();
    let layout: f64 = mesh.faces().iter().map(|f| area2(uv[f[0]], uv[f[1]], uv[f[2]])).sum::<f64>().abs();
    if !(layout > 0.0) || !layout.is_finite() {
        return Err(Error::Degenerate("flattened chart has zero area".into()));
    }
    let s = (surface / layout).sqrt();
    for p in &mut uv {
        p[0] *= s;
        p[1] *= s;
    }
    Ok(ChartFlattening { uv, pins, stats })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChartLayout {
    /// Faces of the cut mesh in this chart.
    pub faces: Vec<usize>,
    /// Cut-mesh vertex of each local vertex.
    pub vertices: Vec<usize>,
    pub flattening: ChartFlattening,
    pub energy: EnergyReport,
}

/// Flattened, measured and packed charts of a cut mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct UVAtlas {
    pub charts: Vec<ChartLayout>,
    pub packing: Packing,
    /// Per cut-mesh face, measured on the unpacked layout.
    pub per_face: Vec<Option<FaceDistortion>>,
    pub mean_energy: Option<f64>,
    pub counted: usize,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartMetric {
    pub chart: usize,
    pub faces: usize,
    pub mean_energy: Option<f64>,
    pub counted: usize,
    pub skipped: usize,
    pub solver_iterations: usize,
    pub solver_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlattenReport {
    pub mean_energy: Option<f64>,
    pub counted_faces: usize,
    pub skipped_faces: usize,
    pub pack_scale: f64,
    pub charts: Vec<ChartMetric>,
}

impl UVAtlas {
    /// Packed coordinate of every cut-mesh vertex.
    pub fn packed_vertex_uv(&self, vertex_count: usize) -> Vec<Vec2> {
        let mut out = vec![[0.0, 0.0]; vertex_count];
        for (c, chart) in self.charts.iter().enumerate() {
            for (local, &v) in chart.vertices.iter().enumerate() {
                out[v] = self.packing.place(c, chart.flattening.uv[local]);
            }
        }
        out
    }

    /// The cut mesh with packed texture coordinates.
    pub fn textured_mesh(&self, cut_mesh: &TriMesh) -> Result<TriMesh> {
        let uv = self.packed_vertex_uv(cut_mesh.vertex_count());
        let corners = cut_mesh.faces().iter().flat_map(|f| f.map(|k| uv[k])).collect();
        TriMesh::with_uvs(cut_mesh.vertices().to_vec(), cut_mesh.faces().to_vec(), corners)
    }

    pub fn report(&self) -> FlattenReport {
        FlattenReport {
            mean_energy: self.mean_energy,
            counted_faces: self.counted,
            skipped_faces: self.skipped,
            pack_scale: self.packing.scale,
            charts: self
                .charts
                .iter()
                .enumerate()
                .map(|(i, c)| ChartMetric {
                    chart: i,
                    faces: c.faces.len(),
                    mean_energy: c.energy.mean,
                    counted: c.energy.counted,
                    skipped: c.energy.skipped,
                    solver_iterations: c.flattening.stats.iterations,
                    solver_residual: c.flattening.stats.residual,
                })
                .collect(),
        }
    }

    pub fn save_report(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.report())?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Flattens every chart of `cut`, measures distortion, and packs.
pub fn flatten_cut(cut: &CutResult) -> Result<UVAtlas> {
    let mut charts = Vec::with_capacity(cut.charts.len());
    let mut per_face = vec![None; cut.cut_mesh.face_count()];
    for (ci, faces) in cut.charts.iter().enumerate() {
        let (mesh, vertices) = cut.chart_mesh(ci)?;
        let flattening = flatten_chart(&mesh).map_err(|e| match e {
            Error::NonDiskChart { euler, boundary_loops, genus, .. } => {
                Error::NonDiskChart { chart: ci, euler, boundary_loops, genus }
            }
            other => other,
        })?;
        let energy = conformal_energy(&mesh, &flattening.uv);
        for (local, &f) in faces.iter().enumerate() {
            per_face[f] = energy.per_face[local];
        }
        charts.push(ChartLayout { faces: faces.clone(), vertices, flattening, energy });
    }
    let layouts: Vec<Vec<Vec2>> = charts.iter().map(|c| c.flattening.uv.clone()).collect();
    let packing = pack_atlas(&layouts);
    let summary = summarize(per_face);
    Ok(UVAtlas {
        charts,
        packing,
        per_face: summary.per_face,
        mean_energy: summary.mean,
        counted: summary.counted,
        skipped: summary.skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cutter::cut_along_edges;
    use crate::shapes::{grid, sphere_meridian, sphere_ring, tube, uv_sphere};
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    // Independent metric: minimum-norm 2x3 Jacobian J with J P = W, where P
    // holds the 3D edge vectors, singular values from J J^T.
    fn oracle_energy(p: [Vec3; 3], w: [Vec2; 3]) -> f64 {
        let e1 = sub(p[1], p[0]);
        let e2 = sub(p[2], p[0]);
        let g = [[dot(e1, e1), dot(e1, e2)], [dot(e2, e1), dot(e2, e2)]];
        let det = g[0][0] * g[1][1] - g[0][1] * g[1][0];
        let gi = [[g[1][1] / det, -g[0][1] / det], [-g[1][0] / det, g[0][0] / det]];
        let wm = [[w[1][0] - w[0][0], w[2][0] - w[0][0]], [w[1][1] - w[0][1], w[2][1] - w[0][1]]];
        // J = W G^-1 P^T
        let mut j = [[0.0; 3]; 2];
        for r in 0..2 {
            let a = wm[r][0] * gi[0][0] + wm[r][1] * gi[1][0];
            let b = wm[r][0] * gi[0][1] + wm[r][1] * gi[1][1];
            for c in 0..3 {
                j[r][c] = a * e1[c] + b * e2[c];
            }
        }
        let jj = |a: usize, b: usize| (0..3).map(|c| j[a][c] * j[b][c]).sum::<f64>();
        let (x, y, z) = (jj(0, 0), jj(0, 1), jj(1, 1));
        let tr = x + z;
        let disc = ((x - z).powi(2) + 4.0 * y * y).sqrt();
        let l1 = 0.5 * (tr + disc);
        let l2 = 0.5 * (tr - disc);
        0.5 * l1.ln().abs() + 0.5 * l2.ln().abs()
    }

    fn planar_uv(m: &TriMesh) -> Vec<Vec2> {
        m.vertices().iter().map(|p| [p[0], p[1]]).collect()
    }

    #[test]
    fn analytic_energies() {
        let g = grid(4, 4, 1.0, 1.0);
        let id = conformal_energy(&g, &planar_uv(&g));
        assert!(id.per_face.iter().flatten().all(|d| d.energy.abs() < 1e-12));
        let twice: Vec<Vec2> = planar_uv(&g).iter().map(|p| [2.0 * p[0], 2.0 * p[1]]).collect();
        for d in conformal_energy(&g, &twice).per_face.iter().flatten() {
            assert!((d.energy - 1.386294).abs() < 1e-6);
        }
        let aniso: Vec<Vec2> = planar_uv(&g).iter().map(|p| [2.0 * p[0], p[1]]).collect();
        for d in conformal_energy(&g, &aniso).per_face.iter().flatten() {
            assert!((d.energy - 0.693147).abs() < 1e-6);
            assert!(d.sigma1 >= d.sigma2);
        }
    }

    #[test]
    fn degenerate_faces_are_skipped() {
        let g = grid(2, 1, 1.0, 1.0);
        let mut uv = planar_uv(&g);
        uv[0] = uv[1];
        let r = conformal_energy(&g, &uv);
        assert_eq!(r.skipped, 1);
        assert_eq!(r.counted, 3);
        let collapsed = vec![[0.0, 0.0]; g.vertex_count()];
        assert_eq!(conformal_energy(&g, &collapsed).mean, None);
    }

    #[test]
    fn planar_chart_flattens_exactly() {
        let g = grid(8, 5, 2.0, 1.0);
        let f = flatten_chart(&g).unwrap();
        assert!(conformal_energy(&g, &f.uv).mean.unwrap() <= 1e-6);
        let tri = TriMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.2, 0.3], [0.1, 0.9, -0.4]], vec![[0, 1, 2]]).unwrap();
        let f = flatten_chart(&tri).unwrap();
        assert!(conformal_energy(&tri, &f.uv).mean.unwrap() <= 1e-9);
    }

    #[test]
    fn open_cylinder_is_nearly_isometric() {
        let (t, line) = tube(32, 16, 0.5, 1.0);
        let cut = cut_along_edges(&t, &line.iter().copied().collect()).unwrap();
        let atlas = flatten_cut(&cut).unwrap();
        assert_eq!(atlas.charts.len(), 1);
        assert!(atlas.mean_energy.unwrap() <= 0.05, "{:?}", atlas.mean_energy);
    }

    #[test]
    fn non_disk_chart_rejected() {
        let (t, _) = tube(8, 2, 1.0, 1.0);
        match flatten_chart(&t) {
            Err(Error::NonDiskChart { boundary_loops: 2, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rotating_pins_rotates_layout() {
        let s = uv_sphere(12, 8, 1.0);
        let cut = cut_along_edges(&s, &sphere_ring(12, 4).into_iter().collect()).unwrap();
        let (chart, _) = cut.chart_mesh(0).unwrap();
        let pins = boundary_pins(&chart).unwrap();
        let (a, _) = lscm_with_pins(&chart, [(pins[0], [0.0, 0.0]), (pins[1], [1.0, 0.0])]).unwrap();
        let (th, r) = (0.7f64, 2.5);
        let (b, _) = lscm_with_pins(&chart, [(pins[0], [0.0, 0.0]), (pins[1], [r * th.cos(), r * th.sin()])]).unwrap();
        for (p, q) in a.iter().zip(&b) {
            let rot = [r * (th.cos() * p[0] - th.sin() * p[1]), r * (th.sin() * p[0] + th.cos() * p[1])];
            assert!((rot[0] - q[0]).abs() < 1e-6 && (rot[1] - q[1]).abs() < 1e-6);
        }
        let ea = conformal_energy(&chart, &a).mean.unwrap();
        let rotated: Vec<Vec2> =
            a.iter().map(|p| [th.cos() * p[0] - th.sin() * p[1], th.sin() * p[0] + th.cos() * p[1]]).collect();
        let er = conformal_energy(&chart, &rotated).mean.unwrap();
        assert!((ea - er).abs() < 1e-9);
    }

    #[test]
    fn conformal_square_map_has_unit_aspect() {
        let g = grid(64, 64, 1.0, 1.0);
        let uv: Vec<Vec2> = g
            .vertices()
            .iter()
            .map(|p| {
                let (x, y) = (1.0 + p[0], 1.0 + p[1]);
                [x * x - y * y, 2.0 * x * y]
            })
            .collect();
        for d in conformal_energy(&g, &uv).per_face.iter().flatten() {
            assert!(d.sigma1 / d.sigma2 - 1.0 <= 0.02);
        }
    }

    #[test]
    fn equator_cut_beats_a_single_slit() {
        let s = uv_sphere(24, 12, 1.0);
        let equator = cut_along_edges(&s, &sphere_ring(24, 6).into_iter().collect()).unwrap();
        let slit_edges: BTreeSet<_> = sphere_meridian(24, 12).into_iter().collect();
        let slit = cut_along_edges(&s, &slit_edges).unwrap();
        let two = flatten_cut(&equator).unwrap().mean_energy.unwrap();
        let one = flatten_cut(&slit).unwrap().mean_energy.unwrap();
        assert!(two < one, "{two} vs {one}");
    }

    #[test]
    fn packed_atlas_has_valid_texture() {
        let s = uv_sphere(12, 6, 1.0);
        let cut = cut_along_edges(&s, &sphere_ring(12, 3).into_iter().collect()).unwrap();
        let atlas = flatten_cut(&cut).unwrap();
        let textured = atlas.textured_mesh(&cut.cut_mesh).unwrap();
        for c in textured.uv_corners().unwrap() {
            assert!((0.0..=1.0).contains(&c[0]) && (0.0..=1.0).contains(&c[1]));
        }
        let report = atlas.report();
        assert_eq!(report.charts.len(), 2);
        assert_eq!(report.counted_faces + report.skipped_faces, s.face_count());
    }

    proptest! {
        #[test]
        fn metric_agrees_with_least_squares_oracle(
            p in prop::array::uniform3(prop::array::uniform3(-1.0f64..1.0)),
            w in prop::array::uniform3(prop::array::uniform2(-1.0f64..1.0)),
        ) {
            if let Some(d) = face_distortion(p, w) {
                prop_assume!(d.sigma2 > 1e-3 && 0.5 * norm(cross(sub(p[1], p[0]), sub(p[2], p[0]))) > 1e-3);
                prop_assert!((d.energy - oracle_energy(p, w)).abs() <= 1e-9);
            }
        }

        #[test]
        fn uniform_scale_adds_twice_log(s in 1.0f64..10.0, k in 1.0f64..3.0) {
            let g = grid(2, 2, 1.0, 1.0);
            let base: Vec<Vec2> = planar_uv(&g).iter().map(|p| [k * 1.5 * p[0], k * p[1]]).collect();
            let scaled: Vec<Vec2> = base.iter().map(|p| [s * p[0], s * p[1]]).collect();
            let a = conformal_energy(&g, &base);
            let b = conformal_energy(&g, &scaled);
            for (x, y) in a.per_face.iter().zip(&b.per_face) {
                let (x, y) = (x.unwrap(), y.unwrap());
                prop_assert!((y.energy - x.energy - 2.0 * s.ln()).abs() < 1e-9);
            }
        }
    }
}
