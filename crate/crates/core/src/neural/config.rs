use serde::{Deserialize, Serialize};

use crate::codec::{Codec, DEFAULT_BINS};
use crate::error::{Error, Result};

/// Transformer blocks per hourglass level, outermost first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Depth {
    pub coord_pre: usize,
    pub vertex_pre: usize,
    pub edge: usize,
    pub vertex_post: usize,
    pub coord_post: usize,
}

impl Depth {
    pub const DESK: Depth = Depth { coord_pre: 1, vertex_pre: 1, edge: 2, vertex_post: 1, coord_post: 1 };
    pub const FULL: Depth = Depth { coord_pre: 2, vertex_pre: 4, edge: 12, vertex_post: 4, coord_post: 2 };

    pub fn total(&self) -> usize {
        self.coord_pre + self.vertex_pre + self.edge + self.vertex_post + self.coord_post
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub width: usize,
    pub heads: usize,
    pub head_dim: usize,
    pub depth: Depth,
    pub bins: u32,
    /// Coordinate tokens (six per segment), excluding BOS and EOS.
    pub max_tokens: usize,
    pub latent_tokens: usize,
    pub latent_dim: usize,
    pub encoder_layers: usize,
    pub fourier_bands: usize,
    pub length_buckets: usize,
    pub kl_weight: f64,
    pub mlp_ratio: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            width: 128,
            heads: 4,
            head_dim: 32,
            depth: Depth::DESK,
            bins: DEFAULT_BINS,
            max_tokens: 1_536,
            latent_tokens: 16,
            latent_dim: 64,
            encoder_layers: 1,
            fourier_bands: 6,
            length_buckets: 16,
            kl_weight: 1e-4,
            mlp_ratio: 4,
        }
    }
}

impl ModelConfig {
    pub fn full() -> Self {
        ModelConfig {
            width: 1_536,
            heads: 16,
            head_dim: 64,
            depth: Depth::FULL,
            max_tokens: 36_864,
            latent_tokens: 3_072,
            latent_dim: 1_024,
            ..ModelConfig::default()
        }
    }

    /// Small model used for quick experiments and tests.
    pub fn tiny(width: usize) -> Self {
        ModelConfig {
            width,
            heads: 2,
            head_dim: width / 2,
            latent_tokens: 4,
            latent_dim: width / 2,
            fourier_bands: 2,
            max_tokens: 600,
            ..ModelConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = &self.depth;
        if [d.coord_pre, d.vertex_pre, d.edge, d.vertex_post, d.coord_post].contains(&0) {
            return Err(Error::Config("every depth entry must be at least 1".into()));
        }
        if self.heads == 0 || self.width % self.heads != 0 {
            return Err(Error::Config(format!("width {} is not divisible by {} heads", self.width, self.heads)));
        }
        if self.max_tokens == 0 || self.max_tokens % 6 != 0 {
            return Err(Error::Config(format!("max token length {} is not a positive multiple of 6", self.max_tokens)));
        }
        if self.head_dim == 0 || self.latent_tokens == 0 || self.latent_dim == 0 || self.length_buckets == 0 {
            return Err(Error::Config("dimensions must be positive".into()));
        }
        if !(self.kl_weight >= 0.0) {
            return Err(Error::Config("KL weight must be nonnegative".into()));
        }
        Ok(())
    }

    pub fn vocab_size(&self) -> usize {
        self.bins as usize + 3
    }

    pub fn max_segments(&self) -> usize {
        self.max_tokens / 6
    }

    pub fn codec(&self) -> Result<Codec> {
        Codec::new(self.bins, self.max_segments())
    }

    /// Positions in a full stream: BOS, coordinates, EOS.
    pub fn positions(&self) -> usize {
        self.max_tokens + 2
    }

    pub fn inner_dim(&self) -> usize {
        self.heads * self.head_dim
    }

    pub fn point_features(&self) -> usize {
        3 + 6 * self.fourier_bands
    }

    /// Bucket of a segment count: uniform over `[1, max_segments]`.
    pub fn length_bucket(&self, segments: usize) -> usize {
        let max = self.max_segments();
        let n = segments.clamp(1, max);
        ((n - 1) * self.length_buckets / max).min(self.length_buckets - 1)
    }

    /// Inclusive segment-count range of a bucket.
    pub fn bucket_range(&self, bucket: usize) -> (usize, usize) {
        let max = self.max_segments();
        let lo = (1..=max).find(|&n| self.length_bucket(n) == bucket).unwrap_or(max);
        let hi = (1..=max).rev().find(|&n| self.length_bucket(n) == bucket).unwrap_or(max);
        (lo, hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationConfig {
    /// Seam segments per mesh vertex.
    pub ratio: f64,
    /// Zero means greedy decoding.
    pub temperature: f64,
    /// Zero disables top-k filtering.
    pub top_k: usize,
    pub seed: u64,
    pub max_segments: usize,
}

pub const RATIO_ADVISORY: (f64, f64) = (0.1, 0.35);

impl GenerationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio > 0.0 && self.ratio < 1.0) {
            return Err(Error::Config(format!("ratio {} is outside (0, 1)", self.ratio)));
        }
        if !(self.temperature >= 0.0) || !self.temperature.is_finite() {
            return Err(Error::Config("temperature must be finite and nonnegative".into()));
        }
        Ok(())
    }

    pub fn advisory_warning(&self) -> Option<String> {
        let (lo, hi) = RATIO_ADVISORY;
        (self.ratio < lo || self.ratio > hi)
            .then(|| format!("ratio {} is outside the advisory range [{lo}, {hi}]", self.ratio))
    }

    /// Target segment count for a mesh with `vertices` vertices.
    pub fn target_segments(&self, vertices: usize) -> usize {
        ((self.ratio * vertices as f64).round() as usize).max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub grad_clip: f64,
    pub seed: u64,
    pub augment: bool,
    pub point_budget: usize,
    /// Crop target streams to this many coordinate tokens (`None`: no crop).
    pub truncate_tokens: Option<usize>,
    /// Stop once the average loss falls below this fraction of the first
    /// step's loss and the batch is predicted perfectly.
    pub early_stop_fraction: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 2_000,
            batch_size: 8,
            learning_rate: 1e-4,
            warmup_steps: 1,
            grad_clip: 0.5,
            seed: 0,
            augment: true,
            point_budget: 4_096,
            truncate_tokens: None,
            early_stop_fraction: None,
        }
    }
}
