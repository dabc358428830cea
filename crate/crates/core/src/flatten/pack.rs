//! Shelf packing of chart layouts into the unit square under one global scale.

use serde::{Deserialize, Serialize};

use crate::mesh::Vec2;

/// Two texels of a 1024 texture.
pub const GUTTER: f64 = 1.0 / 512.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Packing {
    pub scale: f64,
    /// Per chart: packed position of the chart's bbox minimum corner.
    pub offsets: Vec<Vec2>,
    /// Per chart: unscaled bbox minimum in the input layout.
    pub origins: Vec<Vec2>,
    /// Per chart: packed bbox as `[min, max]`.
    pub boxes: Vec<[Vec2; 2]>,
}

impl Packing {
    pub fn place(&self, chart: usize, p: Vec2) -> Vec2 {
        let o = self.origins[chart];
        let off = self.offsets[chart];
        [off[0] + self.scale * (p[0] - o[0]), off[1] + self.scale * (p[1] - o[1])]
    }

    /// Fraction of the unit square covered by the packed bboxes.
    pub fn utilization(&self) -> f64 {
        self.boxes.iter().map(|[a, b]| (b[0] - a[0]) * (b[1] - a[1])).sum()
    }
}

fn bbox(points: &[Vec2]) -> [Vec2; 2] {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        for k in 0..2 {
            lo[k] = lo[k].min(p[k]);
            hi[k] = hi[k].max(p[k]);
        }
    }
    if points.is_empty() {
        return [[0.0; 2]; 2];
    }
    [lo, hi]
}

/// Places charts (tallest first) left to right on shelves; `None` if the
/// last shelf overflows the square.
fn shelf(sizes: &[Vec2], order: &[usize], scale: f64) -> Option<Vec<Vec2>> {
    let mut offsets = vec![[0.0; 2]; sizes.len()];
    let (mut x, mut y, mut shelf_h) = (GUTTER, GUTTER, 0.0f64);
    for &c in order {
        let (w, h) = (sizes[c][0] * scale, sizes[c][1] * scale);
        if w + 2.0 * GUTTER > 1.0 || h + 2.0 * GUTTER > 1.0 {
            return None;
        }
        if x + w + GUTTER > 1.0 {
            y += shelf_h + GUTTER;
            x = GUTTER;
            shelf_h = 0.0;
        }
        if y + h + GUTTER > 1.0 {
            return None;
        }
        offsets[c] = [x, y];
        x += w + GUTTER;
        shelf_h = shelf_h.max(h);
    }
    Some(offsets)
}

/// Largest global scale (to binary-search precision) whose shelf packing fits.
pub fn pack_atlas(charts: &[Vec<Vec2>]) -> Packing {
    let boxes: Vec<[Vec2; 2]> = charts.iter().map(|c| bbox(c)).collect();
    let sizes: Vec<Vec2> = boxes.iter().map(|[a, b]| [b[0] - a[0], b[1] - a[1]]).collect();
    let mut order: Vec<usize> = (0..charts.len()).collect();
    order.sort_by(|&a, &b| sizes[b][1].total_cmp(&sizes[a][1]).then(a.cmp(&b)));

    let largest = sizes.iter().flatten().cloned().fold(0.0f64, f64::max);
    let mut hi = if largest > 0.0 { (1.0 - 2.0 * GUTTER) / largest } else { 1.0 };
    let mut lo = 0.0;
    if shelf(&sizes, &order, hi).is_some() {
        lo = hi;
    } else {
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if shelf(&sizes, &order, mid).is_some() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    }
    let offsets = shelf(&sizes, &order, lo).unwrap_or_else(|| vec![[GUTTER; 2]; charts.len()]);
    let packed = offsets.iter().zip(&sizes).map(|(o, s)| [*o, [o[0] + lo * s[0], o[1] + lo * s[1]]]).collect();
    Packing { scale: lo, offsets, origins: boxes.iter().map(|b| b[0]).collect(), boxes: packed }
}
