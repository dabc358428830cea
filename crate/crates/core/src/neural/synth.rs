//! Procedural boxes, cylinders and spheres with canonical seams.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::RATIO_ADVISORY;
use super::train::TrainExample;
use crate::codec::{Codec, SeamSequence, DEFAULT_BINS, DEFAULT_MAX_SEGMENTS};
use crate::error::Result;
use crate::mesh::{normalize_to_unit_cube, EdgeKey, TriMesh};
use crate::sampler::sample_condition;
use crate::shapes::{capped_cylinder, sphere_with_seam, subdivided_box, tube};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Box,
    Cylinder,
    Sphere,
}

#[derive(Debug, Clone)]
pub struct SyntheticShape {
    pub family: Family,
    /// Mesh normalized to the unit cube.
    pub mesh: TriMesh,
    pub seam_edges: Vec<EdgeKey>,
    pub seam: SeamSequence,
}

impl SyntheticShape {
    /// Seam segments per vertex.
    pub fn ratio(&self) -> f64 {
        self.seam_edges.len() as f64 / self.mesh.vertex_count() as f64
    }

    /// Condition cloud plus encoded seam, ready for training.
    pub fn example(&self, codec: &Codec, budget: usize, seed: u64) -> Result<TrainExample> {
        let cloud = sample_condition(&self.mesh, budget, seed, 0.0)?;
        Ok(TrainExample { points: cloud.points, tokens: codec.encode(&self.seam)? })
    }
}

fn draw(family: Family, rng: &mut ChaCha8Rng) -> (TriMesh, Vec<EdgeKey>) {
    match family {
        Family::Box => {
            let n = std::array::from_fn(|_| rng.random_range(2..=5));
            let size = std::array::from_fn(|_| rng.random_range(0.5..1.5));
            subdivided_box(n, size)
        }
        Family::Cylinder => {
            let around = rng.random_range(6..=12);
            let rows = rng.random_range(2..=10);
            let radius = rng.random_range(0.3..1.0);
            let height = rng.random_range(0.5..2.0);
            if rng.random_bool(0.5) {
                capped_cylinder(around, rows, radius, height)
            } else {
                tube(around, rows, radius, height)
            }
        }
        Family::Sphere => {
            let around = rng.random_range(6..=16);
            let bands = rng.random_range(4..=12);
            sphere_with_seam(around, bands, 1.0)
        }
    }
}

/// `n` shapes cycling through the three families. Draws whose seam ratio
/// falls outside the advisory range are discarded and redrawn.
pub fn make_synthetic_dataset(n: usize, seed: u64) -> Result<Vec<SyntheticShape>> {
    let codec = Codec::new(DEFAULT_BINS, DEFAULT_MAX_SEGMENTS)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let families = [Family::Box, Family::Cylinder, Family::Sphere];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let family = families[i % 3];
        loop {
            let (mesh, seam_edges) = draw(family, &mut rng);
            let ratio = seam_edges.len() as f64 / mesh.vertex_count() as f64;
            if ratio < RATIO_ADVISORY.0 || ratio > RATIO_ADVISORY.1 {
                continue;
            }
            let (mesh, _) = normalize_to_unit_cube(&mesh)?;
            let v = mesh.vertices();
            let seam = codec.canonicalize(seam_edges.iter().map(|e| (v[e.a()], v[e.b()])))?;
            if seam.len() != seam_edges.len() {
                continue;
            }
            out.push(SyntheticShape { family, mesh, seam_edges, seam });
            break;
        }
    }
    Ok(out)
}
