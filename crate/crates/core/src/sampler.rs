//! Shape-conditioning point clouds: half the budget on vertices, half along
//! edges in proportion to edge length.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{TriMesh, Vec3};

pub const FULL_BUDGET: usize = 61_440;
pub const DEFAULT_BUDGET: usize = 4_096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSource {
    Vertex,
    Edge,
    Surface,
}

impl PointSource {
    fn tag(self) -> u8 {
        match self {
            PointSource::Vertex => 0,
            PointSource::Edge => 1,
            PointSource::Surface => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConditionCloud {
    pub points: Vec<Vec3>,
    pub tags: Vec<PointSource>,
    pub budget: usize,
}

#[derive(Serialize, Deserialize)]
struct CloudSidecar {
    count: usize,
    budget: usize,
    seed: u64,
}

impl ConditionCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn count(&self, source: PointSource) -> usize {
        self.tags.iter().filter(|t| **t == source).count()
    }

    /// Little-endian f32 xyz per point followed by a one-byte source tag.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.points.len() * 13);
        for (p, t) in self.points.iter().zip(&self.tags) {
            for c in p {
                out.extend_from_slice(&(*c as f32).to_le_bytes());
            }
            out.push(t.tag());
        }
        out
    }

    /// Writes `path` (binary) and `path` with a `.json` extension (sidecar).
    pub fn save(&self, path: impl AsRef<Path>, seed: u64) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_bytes()).map_err(|e| Error::io(path, e))?;
        let side = path.with_extension("json");
        let meta = CloudSidecar { count: self.len(), budget: self.budget, seed };
        std::fs::write(&side, serde_json::to_string_pretty(&meta)?).map_err(|e| Error::io(&side, e))
    }
}

/// Splits `total` samples over edges of the given lengths:
/// `max(1, floor(total * len / sum))` each, leftover to the longest edges first.
/// When the one-sample floor already exceeds `total`, the shortest edges give
/// theirs back so the count stays exact.
pub fn allocate_edge_samples(lengths: &[f64], total: usize) -> Result<Vec<usize>> {
    let sum: f64 = lengths.iter().sum();
    if !(sum > 0.0) || !sum.is_finite() {
        return Err(Error::Degenerate("total edge length is zero".into()));
    }
    let mut counts: Vec<usize> = lengths.iter().map(|l| ((total as f64 * l / sum).floor() as usize).max(1)).collect();
    let mut by_length: Vec<usize> = (0..lengths.len()).collect();
    by_length.sort_by(|&a, &b| lengths[b].total_cmp(&lengths[a]).then(a.cmp(&b)));
    let assigned: usize = counts.iter().sum();
    if assigned < total {
        let mut left = total - assigned;
        while left > 0 {
            for &e in &by_length {
                if left == 0 {
                    break;
                }
                counts[e] += 1;
                left -= 1;
            }
        }
    } else {
        let mut extra = assigned - total;
        for &e in by_length.iter().rev() {
            if extra == 0 {
                break;
            }
            let take = counts[e].min(extra);
            counts[e] -= take;
            extra -= take;
        }
    }
    Ok(counts)
}

/// Deterministic vertex/edge cloud. `jitter` adds Gaussian noise of that
/// standard deviation, drawn from `seed`; zero leaves the points on the mesh.
pub fn sample_condition(mesh: &TriMesh, budget: usize, seed: u64, jitter: f64) -> Result<ConditionCloud> {
    if budget % 2 != 0 {
        return Err(Error::Config(format!("point budget {budget} must be even")));
    }
    if mesh.vertex_count() == 0 || mesh.edges().is_empty() {
        return Err(Error::EmptyMesh("edges"));
    }
    let half = budget / 2;
    let verts = mesh.vertices();
    let mut points = Vec::with_capacity(budget);
    let mut tags = Vec::with_capacity(budget);
    for i in 0..half {
        points.push(verts[i % verts.len()]);
        tags.push(PointSource::Vertex);
    }
    let lengths: Vec<f64> = mesh.edges().iter().map(|e| mesh.edge_length(e.key)).collect();
    let counts = allocate_edge_samples(&lengths, half)?;
    for (edge, &k) in mesh.edges().iter().zip(&counts) {
        let a = verts[edge.key.a()];
        let b = verts[edge.key.b()];
        for s in 0..k {
            let t = (s as f64 + 0.5) / k as f64;
            points.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1]), a[2] + t * (b[2] - a[2])]);
            tags.push(PointSource::Edge);
        }
    }
    if jitter > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, jitter).map_err(|e| Error::Config(e.to_string()))?;
        for p in &mut points {
            for c in p.iter_mut() {
                *c += noise.sample(&mut rng);
            }
        }
    }
    Ok(ConditionCloud { points, tags, budget })
}

/// Area-weighted uniform surface samples.
pub fn sample_uniform_surface(mesh: &TriMesh, budget: usize, seed: u64) -> Result<ConditionCloud> {
    let areas: Vec<f64> = (0..mesh.face_count()).map(|f| mesh.face_area(f)).collect();
    let total: f64 = areas.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Degenerate("all faces have zero area".into()));
    }
    let mut cdf = Vec::with_capacity(areas.len());
    let mut acc = 0.0;
    for a in &areas {
        acc += a / total;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let verts = mesh.vertices();
    let mut points = Vec::with_capacity(budget);
    for _ in 0..budget {
        let x: f64 = rng.random();
        let f = cdf.partition_point(|c| *c < x).min(areas.len() - 1);
        let (mut r1, mut r2): (f64, f64) = (rng.random(), rng.random());
        if r1 + r2 > 1.0 {
            r1 = 1.0 - r1;
            r2 = 1.0 - r2;
        }
        let [a, b, c] = mesh.faces()[f].map(|k| verts[k]);
        let w0 = 1.0 - r1 - r2;
        points.push(std::array::from_fn(|i| w0 * a[i] + r1 * b[i] + r2 * c[i]));
    }
    Ok(ConditionCloud { tags: vec![PointSource::Surface; budget], points, budget })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{distance, dot, sub};
    use crate::shapes::{grid, uv_sphere};
    use proptest::prelude::*;

    fn segment_distance(p: Vec3, a: Vec3, b: Vec3) -> f64 {
        let ab = sub(b, a);
        let t = (dot(sub(p, a), ab) / dot(ab, ab)).clamp(0.0, 1.0);
        distance(p, [a[0] + t * ab[0], a[1] + t * ab[1], a[2] + t * ab[2]])
    }

    // Largest-remainder style reference: one each, then the rest by floor
    // share, then leftovers longest first.
    fn reference_allocation(lengths: &[f64], total: usize) -> Vec<usize> {
        let sum: f64 = lengths.iter().sum();
        let mut out = Vec::new();
        for l in lengths {
            let share = total as f64 * l / sum;
            out.push(if share < 1.0 { 1 } else { share as usize });
        }
        let mut order: Vec<usize> = (0..lengths.len()).collect();
        order.sort_by(|&a, &b| lengths[b].partial_cmp(&lengths[a]).unwrap().then(a.cmp(&b)));
        let mut i = 0;
        while out.iter().sum::<usize>() < total {
            out[order[i % order.len()]] += 1;
            i += 1;
        }
        out
    }

    #[test]
    fn allocation_matches_hand_example() {
        assert_eq!(allocate_edge_samples(&[2.0, 1.0], 9).unwrap(), vec![6, 3]);
        assert_eq!(reference_allocation(&[2.0, 1.0], 9), vec![6, 3]);
        assert!(allocate_edge_samples(&[0.0, 0.0], 4).is_err());
    }

    #[test]
    fn allocation_trims_when_edges_outnumber_budget() {
        let c = allocate_edge_samples(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(c, vec![0, 0, 1, 1]);
    }

    #[test]
    fn ten_vertices_each_sampled_evenly() {
        let g = grid(4, 1, 1.0, 1.0);
        assert_eq!(g.vertex_count(), 10);
        let cloud = sample_condition(&g, FULL_BUDGET, 0, 0.0).unwrap();
        assert_eq!(cloud.len(), FULL_BUDGET);
        assert_eq!(cloud.count(PointSource::Vertex), 30_720);
        assert_eq!(cloud.count(PointSource::Edge), 30_720);
        for v in 0..10 {
            let n = cloud.points[..30_720].iter().filter(|p| **p == g.vertices()[v]).count();
            assert_eq!(n, 3_072);
        }
    }

    #[test]
    fn odd_budget_rejected() {
        assert!(sample_condition(&grid(1, 1, 1.0, 1.0), 7, 0, 0.0).is_err());
    }

    #[test]
    fn edge_points_lie_on_edges() {
        let s = uv_sphere(12, 8, 1.0);
        let cloud = sample_condition(&s, 2_000, 3, 0.0).unwrap();
        let verts = s.vertices();
        for (p, t) in cloud.points.iter().zip(&cloud.tags) {
            match t {
                PointSource::Vertex => assert!(verts.contains(p)),
                PointSource::Edge => {
                    let d = s
                        .edges()
                        .iter()
                        .map(|e| segment_distance(*p, verts[e.key.a()], verts[e.key.b()]))
                        .fold(f64::INFINITY, f64::min);
                    assert!(d <= 1e-9);
                }
                PointSource::Surface => unreachable!(),
            }
        }
        assert_eq!(cloud, sample_condition(&s, 2_000, 99, 0.0).unwrap());
    }

    #[test]
    fn jitter_is_seeded() {
        let g = grid(2, 2, 1.0, 1.0);
        let a = sample_condition(&g, 64, 5, 0.01).unwrap();
        assert_eq!(a, sample_condition(&g, 64, 5, 0.01).unwrap());
        assert_ne!(a, sample_condition(&g, 64, 6, 0.01).unwrap());
    }

    #[test]
    fn surface_samples_inside_single_triangle() {
        let m = TriMesh::new(vec![[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![[0, 1, 2]]).unwrap();
        let cloud = sample_uniform_surface(&m, 500, 1).unwrap();
        for p in &cloud.points {
            assert!(p[0] >= 0.0 && p[1] >= 0.0 && p[0] + p[1] <= 1.0 + 1e-12);
        }
        assert!(sample_uniform_surface(&m, 0, 1).unwrap().is_empty());
    }

    #[test]
    fn surface_samples_follow_area() {
        // Faces of area 1.5 and 0.5.
        let m = TriMesh::new(
            vec![[0.0, 0.0, 0.0], [3.0, 0.0, 0.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]],
            vec![[0, 1, 2], [3, 0, 2]],
        )
        .unwrap();
        let cloud = sample_uniform_surface(&m, 4_000, 11).unwrap();
        let first = cloud.points.iter().filter(|p| p[0] > 0.0).count();
        assert!((first as f64 - 3_000.0).abs() <= 150.0, "{first}");
    }

    #[test]
    fn export_layout() {
        let g = grid(1, 1, 1.0, 1.0);
        let cloud = sample_condition(&g, 10, 0, 0.0).unwrap();
        let bytes = cloud.to_bytes();
        assert_eq!(bytes.len(), 10 * 13);
        assert_eq!(bytes[12], 0);
        assert_eq!(bytes[13 * 9 + 12], 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.bin");
        cloud.save(&path, 4).unwrap();
        let meta: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.json")).unwrap()).unwrap();
        assert_eq!(meta["count"], 10);
        assert_eq!(meta["seed"], 4);
    }

    proptest! {
        #[test]
        fn allocation_is_exact(lengths in prop::collection::vec(0.01f64..10.0, 1..40), total in 40usize..500) {
            let c = allocate_edge_samples(&lengths, total).unwrap();
            let sum: f64 = lengths.iter().sum();
            let floor_total: usize = lengths.iter().map(|l| ((total as f64 * l / sum) as usize).max(1)).sum();
            prop_assume!(floor_total <= total);
            prop_assert_eq!(c.iter().sum::<usize>(), total);
            prop_assert!(c.iter().all(|k| *k >= 1));
            prop_assert_eq!(c, reference_allocation(&lengths, total));
        }

        #[test]
        fn budget_split_is_exact(nx in 1usize..5, ny in 1usize..5, half in 1usize..300) {
            let g = grid(nx, ny, 1.0, 2.0);
            let cloud = sample_condition(&g, 2 * half, 0, 0.0).unwrap();
            prop_assert_eq!(cloud.count(PointSource::Vertex), half);
            prop_assert_eq!(cloud.count(PointSource::Edge), half);
        }
    }
}
