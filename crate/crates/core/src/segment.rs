//! Patch-based part labels: every seam-bounded patch takes the majority
//! label of its faces.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelField {
    pub labels: Vec<u32>,
}

impl LabelField {
    pub fn label_set(&self) -> Vec<u32> {
        let mut s = self.labels.clone();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchLabel {
    pub label: u32,
    pub counts: BTreeMap<u32, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatchLabeling {
    /// Refined label per face.
    pub labels: Vec<u32>,
    pub patches: Vec<PatchLabel>,
}

impl PatchLabeling {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}

/// Per patch, count labels and keep the most frequent (smallest id on ties).
pub fn refine_labels(charts: &[Vec<usize>], labels: &LabelField) -> Result<PatchLabeling> {
    let n = labels.labels.len();
    let mut owner = vec![usize::MAX; n];
    for (c, faces) in charts.iter().enumerate() {
        for &f in faces {
            if f >= n {
                return Err(Error::Labels(format!("face {f} has no label ({n} labels)")));
            }
            if owner[f] != usize::MAX {
                return Err(Error::Labels(format!("face {f} belongs to patches {} and {c}", owner[f])));
            }
            owner[f] = c;
        }
    }
    if let Some(f) = owner.iter().position(|o| *o == usize::MAX) {
        return Err(Error::Labels(format!("face {f} is in no patch")));
    }

    let mut refined = vec![0; n];
    let mut patches = Vec::with_capacity(charts.len());
    for faces in charts {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &f in faces {
            *counts.entry(labels.labels[f]).or_default() += 1;
        }
        let mut label = 0;
        let mut best = 0;
        for (&l, &c) in &counts {
            if c > best {
                best = c;
                label = l;
            }
        }
        for &f in faces {
            refined[f] = label;
        }
        patches.push(PatchLabel { label, counts });
    }
    Ok(PatchLabeling { labels: refined, patches })
}

/// Fraction of label transitions (pairs of faces across an edge with
/// different labels) that fall between different patches. 1.0 when there
/// are no transitions.
pub fn boundary_cleanliness(labels: &[u32], charts: &[Vec<usize>], mesh: &TriMesh) -> f64 {
    let mut chart_of = vec![usize::MAX; mesh.face_count()];
    for (c, faces) in charts.iter().enumerate() {
        for &f in faces {
            chart_of[f] = c;
        }
    }
    let (mut transitions, mut on_seam) = (0usize, 0usize);
    for e in mesh.edges() {
        for (i, &f) in e.faces.iter().enumerate() {
            for &g in &e.faces[i + 1..] {
                if labels[f] != labels[g] {
                    transitions += 1;
                    if chart_of[f] != chart_of[g] {
                        on_seam += 1;
                    }
                }
            }
        }
    }
    if transitions == 0 {
        1.0
    } else {
        on_seam as f64 / transitions as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shapes::grid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn field(labels: &[u32]) -> LabelField {
        LabelField { labels: labels.to_vec() }
    }

    #[test]
    fn majority_wins() {
        let r = refine_labels(&[vec![0, 1, 2, 3]], &field(&[5, 5, 2, 5])).unwrap();
        assert_eq!(r.labels, vec![5; 4]);
        assert_eq!(r.patches[0].counts[&5], 3);
        let tie = refine_labels(&[vec![0, 1]], &field(&[9, 4])).unwrap();
        assert_eq!(tie.patches[0].label, 4);
    }

    #[test]
    fn partition_errors() {
        assert!(refine_labels(&[vec![0, 1], vec![1]], &field(&[0, 0])).is_err());
        assert!(refine_labels(&[vec![0]], &field(&[0, 0])).is_err());
        assert!(refine_labels(&[vec![0, 2]], &field(&[0, 0])).is_err());
    }

    #[test]
    fn cleanliness_examples() {
        let g = grid(2, 1, 2.0, 1.0);
        // Faces 0,1 left square, 2,3 right square.
        let charts = vec![vec![0, 1], vec![2, 3]];
        assert_eq!(boundary_cleanliness(&[0, 0, 1, 1], &charts, &g), 1.0);
        assert_eq!(boundary_cleanliness(&[3, 3, 3, 3], &charts, &g), 1.0);
        let noisy = [0, 1, 1, 1];
        let c = boundary_cleanliness(&noisy, &charts, &g);
        assert_eq!(c, 0.5);
        let refined = refine_labels(&charts, &field(&noisy)).unwrap();
        assert_eq!(boundary_cleanliness(&refined.labels, &charts, &g), 1.0);
    }

    // Brute force: for each patch scan every label id up to the maximum and
    // count faces carrying it.
    fn oracle(charts: &[Vec<usize>], labels: &[u32]) -> Vec<u32> {
        let max = *labels.iter().max().unwrap();
        let mut out = vec![0; labels.len()];
        for faces in charts {
            let mut best = (0usize, 0u32);
            for l in 0..=max {
                let c = faces.iter().filter(|&&f| labels[f] == l).count();
                if c > best.0 {
                    best = (c, l);
                }
            }
            for &f in faces {
                out[f] = best.1;
            }
        }
        out
    }

    #[test]
    fn fuzz_against_oracle() {
        let g = grid(6, 5, 1.0, 1.0);
        let n = g.face_count();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..1_000 {
            let k = rng.random_range(1..6);
            let owner: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            let charts: Vec<Vec<usize>> = (0..k)
                .map(|c| (0..n).filter(|f| owner[*f] == c).collect())
                .filter(|v: &Vec<usize>| !v.is_empty())
                .collect();
            let labels: Vec<u32> = (0..n).map(|_| rng.random_range(0..4)).collect();
            let r = refine_labels(&charts, &field(&labels)).unwrap();
            assert_eq!(r.labels, oracle(&charts, &labels));
            for (faces, p) in charts.iter().zip(&r.patches) {
                assert!(faces.iter().all(|&f| r.labels[f] == p.label));
                assert!(faces.iter().any(|&f| labels[f] == p.label));
            }
            assert!(boundary_cleanliness(&r.labels, &charts, &g) >= boundary_cleanliness(&labels, &charts, &g));
        }
    }
}
