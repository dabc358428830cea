//! Autoregressive sampling with grammar constraints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::GenerationConfig;
use super::model::Model;
use crate::codec::{SeamSequence, TokenStream};
use crate::error::Result;
use crate::mesh::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generated {
    pub tokens: TokenStream,
    pub sequence: SeamSequence,
    /// Segments spelled out before degenerate ones were dropped.
    pub emitted: usize,
    pub bucket: usize,
    /// The segment limit was reached before the model chose EOS.
    pub truncated: bool,
}

/// Samples one token from `logits` restricted to `allowed`.
/// Temperature zero picks the first maximum.
pub fn sample_token(logits: &[f64], allowed: &[bool], temperature: f64, top_k: usize, rng: &mut impl Rng) -> usize {
    let mut cand: Vec<(usize, f64)> = logits.iter().copied().enumerate().filter(|(i, _)| allowed[*i]).collect();
    if temperature == 0.0 {
        return cand.iter().fold((usize::MAX, f64::NEG_INFINITY), |b, &(i, v)| if v > b.1 { (i, v) } else { b }).0;
    }
    if top_k > 0 && top_k < cand.len() {
        cand.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        cand.truncate(top_k);
        cand.sort_by_key(|c| c.0);
    }
    let max = cand.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = cand.iter().map(|c| ((c.1 - max) / temperature).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (c, w) in cand.iter().zip(&weights) {
        if r < *w {
            return c.0;
        }
        r -= w;
    }
    cand.last().expect("at least one allowed token").0
}

/// Samples a seam for a cloud in the unit-cube frame. The length bucket comes
/// from `gen.ratio` times `vertices`.
pub fn generate(model: &Model, points: &[Vec3], vertices: usize, gen: &GenerationConfig) -> Result<Generated> {
    gen.validate()?;
    let c = &model.config;
    let codec = c.codec()?;
    let bucket = c.length_bucket(gen.target_segments(vertices));
    let limit = match gen.max_segments {
        0 => c.max_segments(),
        n => n.min(c.max_segments()),
    };
    let embedding = model.encode(points, bucket)?;
    let mut state = model.start(&embedding.tokens);
    let mut rng = ChaCha8Rng::seed_from_u64(gen.seed);
    let (bos, eos) = (codec.bos() as usize, codec.eos() as usize);
    let mut tokens = vec![codec.bos()];
    let mut logits = model.step(&mut state, codec.bos())?;
    let mut allowed = vec![false; c.vocab_size()];
    let mut truncated = false;
    loop {
        let coords = tokens.len() - 1;
        if coords % 6 == 0 && coords / 6 >= limit {
            truncated = true;
            tokens.push(codec.eos());
            break;
        }
        for (i, a) in allowed.iter_mut().enumerate() {
            *a = i < bos || (i == eos && coords % 6 == 0 && coords >= 6);
        }
        let tok = sample_token(&logits, &allowed, gen.temperature, gen.top_k, &mut rng);
        tokens.push(tok as u32);
        if tok == eos {
            break;
        }
        logits = model.step(&mut state, tok as u32)?;
    }
    let tokens = TokenStream { tokens };
    let (sequence, emitted) = codec.decode_counted(&tokens)?;
    Ok(Generated { tokens, sequence, emitted, bucket, truncated })
}
