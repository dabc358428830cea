//! Teacher-forced training with Adam, gradient clipping and joint
//! cloud/seam augmentation.

use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::model::Model;
use super::tape::Tape;
use crate::codec::{SeamSequence, TokenStream};
use crate::error::{Error, Result};
use crate::mesh::Vec3;

const NOISE_STREAM: u64 = 0x5eed_0001;
const ORDER_STREAM: u64 = 0x5eed_0002;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainExample {
    /// Condition points in the unit-cube frame.
    pub points: Vec<Vec3>,
    pub tokens: TokenStream,
}

/// Joint similarity applied to a cloud and its seam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Augmentation {
    pub scale: f64,
    /// Rotation about the vertical (y) axis, radians.
    pub angle: f64,
    /// Standard deviation of the per-point cloud jitter.
    pub jitter: f64,
}

impl Augmentation {
    pub const IDENTITY: Augmentation = Augmentation { scale: 1.0, angle: 0.0, jitter: 0.0 };

    pub fn random(rng: &mut impl Rng) -> Self {
        Augmentation {
            scale: rng.random_range(0.95..=1.05),
            angle: rng.random_range(0.0..std::f64::consts::TAU),
            jitter: 0.01,
        }
    }

    fn map(&self, p: Vec3) -> Vec3 {
        let (s, c) = self.angle.sin_cos();
        [self.scale * (c * p[0] + s * p[2]), self.scale * p[1], self.scale * (c * p[2] - s * p[0])]
    }

    /// Transforms both, jitters the cloud, and shrinks everything back into
    /// `[-1, 1]` if it left the cube.
    pub fn apply(&self, points: &[Vec3], seam: &SeamSequence, rng: &mut impl Rng) -> (Vec<Vec3>, SeamSequence) {
        let mut pts: Vec<Vec3> = points.iter().map(|&p| self.map(p)).collect();
        if self.jitter > 0.0 {
            let n = Normal::new(0.0, self.jitter).expect("finite jitter");
            for p in &mut pts {
                for c in p.iter_mut() {
                    *c += n.sample(rng);
                }
            }
        }
        let mut seq = seam.map_points(|p| self.map(p));
        let ends = seq.segments().iter().flat_map(|s| [s.head(), s.tail()]);
        let extent = pts.iter().copied().chain(ends).flatten().map(f64::abs).fold(0.0, f64::max);
        if extent > 1.0 {
            let k = 1.0 / extent;
            for p in &mut pts {
                for c in p.iter_mut() {
                    *c *= k;
                }
            }
            seq = seq.map_points(|p| [p[0] * k, p[1] * k, p[2] * k]);
        }
        (pts, seq)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: usize,
    pub ce_loss: f64,
    pub kl_loss: f64,
    /// Teacher-forced next-token accuracy over the batch.
    pub accuracy: f64,
    /// Mean latent log-variance over the batch.
    pub mean_logvar: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Array2<f64>>,
    pub v: Vec<Array2<f64>>,
    pub step: usize,
}

/// Per-example loss terms and gradients.
#[derive(Debug, Clone)]
pub struct ExampleLoss {
    pub ce: f64,
    pub kl: f64,
    pub total: f64,
    pub correct: usize,
    pub counted: usize,
    pub mean_logvar: f64,
}

pub struct Trainer {
    pub model: Model,
    pub config: TrainConfig,
    pub adam: AdamState,
    pub history: Vec<LossRecord>,
}

fn stream_rng(seed: u64, stream: u64, step: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15));
    rng.set_stream(step as u64);
    rng
}

/// Teacher-forced loss of one example. `augment` is applied jointly before
/// re-encoding; `noise` drives the latent sample (`None`: use the mean).
pub fn example_loss(
    model: &Model,
    example: &TrainExample,
    augment: Option<(Augmentation, &mut ChaCha8Rng)>,
    noise: Option<&mut ChaCha8Rng>,
    truncate: Option<usize>,
    grads: Option<&mut [Array2<f64>]>,
) -> Result<ExampleLoss> {
    let codec = model.config.codec()?;
    let (points, tokens) = match augment {
        Some((aug, rng)) => {
            let seq = codec.decode(&example.tokens)?;
            let (pts, seq) = aug.apply(&example.points, &seq, rng);
            let seq = codec.canonicalize(seq.segments().iter().map(|s| (s.head(), s.tail())))?;
            (pts, codec.encode(&seq)?)
        }
        None => (example.points.clone(), example.tokens.clone()),
    };
    let segments = tokens.len().saturating_sub(2) / 6;
    let bucket = model.config.length_bucket(segments);
    let mut toks = tokens.tokens;
    if let Some(limit) = truncate {
        toks.truncate(limit + 1);
    }
    let c = &model.config;
    let eps =
        noise.map(|rng| Array2::from_shape_simple_fn((c.latent_tokens, c.latent_dim), || StandardNormal.sample(rng)));
    let mut t = Tape::new(&model.params.values);
    let enc = model.encode_on(&mut t, &points, bucket, eps)?;
    let input = &toks[..toks.len() - 1];
    let pad = codec.pad();
    let targets: Vec<Option<usize>> = toks[1..].iter().map(|&x| (x != pad).then_some(x as usize)).collect();
    let logits = model.decode_on(&mut t, input, enc.condition)?;
    let ce = t.cross_entropy(logits, &targets);
    let kl = t.kl(enc.mean, enc.logvar);
    let loss = t.axpy(ce, kl, c.kl_weight);
    let lv = t.value(enc.logvar);
    let mean_logvar = lv.sum() / lv.len() as f64;
    let mut correct = 0;
    let lg = t.value(logits);
    for (i, target) in targets.iter().enumerate() {
        if let Some(target) = target {
            if argmax(lg.row(i).iter().copied()) == *target {
                correct += 1;
            }
        }
    }
    let out = ExampleLoss {
        ce: t.scalar(ce),
        kl: t.scalar(kl),
        total: t.scalar(loss),
        correct,
        counted: targets.iter().flatten().count(),
        mean_logvar,
    };
    if let Some(g) = grads {
        if out.total.is_finite() {
            t.backward(loss, g);
        }
    }
    Ok(out)
}

/// Index of the largest value, first on ties.
pub fn argmax(values: impl Iterator<Item = f64>) -> usize {
    let mut best = (0, f64::NEG_INFINITY);
    for (i, v) in values.enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    best.0
}

/// Teacher-forced accuracy with the latent mean and no augmentation.
pub fn teacher_forced_accuracy(model: &Model, example: &TrainExample) -> Result<f64> {
    let l = example_loss(model, example, None, None, None, None)?;
    Ok(l.correct as f64 / l.counted.max(1) as f64)
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Self> {
        if config.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if !(config.learning_rate > 0.0) || !(config.grad_clip > 0.0) {
            return Err(Error::Config("learning rate and clip norm must be positive".into()));
        }
        let adam = AdamState { m: model.params.zeros_like(), v: model.params.zeros_like(), step: 0 };
        Ok(Trainer { model, config, adam, history: Vec::new() })
    }

    pub fn resume(model: Model, config: TrainConfig, adam: AdamState) -> Result<Self> {
        let mut t = Trainer::new(model, config)?;
        t.adam = adam;
        Ok(t)
    }

    fn batch(&self, n: usize) -> Vec<usize> {
        let b = self.config.batch_size;
        let step = self.adam.step;
        let epoch_len = n.div_ceil(b).max(1);
        let epoch = (step / epoch_len) as u64;
        let mut rng = stream_rng(self.config.seed ^ epoch, ORDER_STREAM, 0);
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        let start = (step % epoch_len) * b;
        (0..b).map(|k| order[(start + k) % n]).collect()
    }

    /// One optimizer step over a batch drawn from `data`.
    pub fn step(&mut self, data: &[TrainExample]) -> Result<LossRecord> {
        if data.is_empty() {
            return Err(Error::Config("empty training set".into()));
        }
        let step = self.adam.step;
        let mut grads = self.model.params.zeros_like();
        let mut aug_rng = stream_rng(self.config.seed, 0, step);
        let mut noise_rng = stream_rng(self.config.seed, NOISE_STREAM, step);
        let ids = self.batch(data.len());
        let (mut ce, mut kl, mut correct, mut counted, mut lv) = (0.0, 0.0, 0, 0, 0.0);
        for &i in &ids {
            let aug = self.config.augment.then(|| Augmentation::random(&mut aug_rng));
            let l = example_loss(
                &self.model,
                &data[i],
                aug.map(|a| (a, &mut aug_rng)),
                Some(&mut noise_rng),
                self.config.truncate_tokens,
                Some(&mut grads),
            )?;
            if !l.total.is_finite() {
                return Err(Error::Training { step, message: format!("non-finite loss {}", l.total) });
            }
            ce += l.ce;
            kl += l.kl;
            correct += l.correct;
            counted += l.counted;
            lv += l.mean_logvar;
        }
        let nb = ids.len() as f64;
        for g in &mut grads {
            *g /= nb;
        }
        self.apply(&grads)?;
        let rec = LossRecord {
            step,
            ce_loss: ce / nb,
            kl_loss: kl / nb,
            accuracy: correct as f64 / counted.max(1) as f64,
            mean_logvar: lv / nb,
        };
        self.history.push(rec);
        Ok(rec)
    }

    fn apply(&mut self, grads: &[Array2<f64>]) -> Result<()> {
        let norm = grads.iter().map(|g| g.iter().map(|x| x * x).sum::<f64>()).sum::<f64>().sqrt();
        if !norm.is_finite() {
            return Err(Error::Training { step: self.adam.step, message: "non-finite gradient".into() });
        }
        let clip = if norm > self.config.grad_clip { self.config.grad_clip / norm } else { 1.0 };
        let (b1, b2, eps) = (0.9, 0.999, 1e-8);
        self.adam.step += 1;
        let t = self.adam.step as f64;
        let warm = (t / self.config.warmup_steps.max(1) as f64).min(1.0);
        let lr = self.config.learning_rate * warm;
        let c1 = 1.0 - f64::powf(b1, t);
        let c2 = 1.0 - f64::powf(b2, t);
        for ((p, g), (m, v)) in
            self.model.params.values.iter_mut().zip(grads).zip(self.adam.m.iter_mut().zip(self.adam.v.iter_mut()))
        {
            ndarray::Zip::from(p).and(g).and(m).and(v).for_each(|p, &g, m, v| {
                let g = g * clip;
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
        Ok(())
    }

    /// Runs up to `config.steps` steps, calling `observe` after each.
    /// Stops early when `early_stop_fraction` is set, the loss fell below
    /// that fraction of the first loss and the batch is predicted perfectly.
    pub fn run(&mut self, data: &[TrainExample], mut observe: impl FnMut(&LossRecord)) -> Result<()> {
        let first = self.history.first().map(|r| r.ce_loss + self.model.config.kl_weight * r.kl_loss);
        let mut first = first;
        while self.adam.step < self.config.steps {
            let r = self.step(data)?;
            observe(&r);
            let total = r.ce_loss + self.model.config.kl_weight * r.kl_loss;
            let base = *first.get_or_insert(total);
            if let Some(frac) = self.config.early_stop_fraction {
                if total < frac * base && r.accuracy == 1.0 {
                    break;
                }
            }
        }
        Ok(())
    }

    pub fn save_history(&self, path: impl AsRef<Path>) -> Result<()> {
        write_loss_csv(&self.history, path)
    }
}

pub fn write_loss_csv(history: &[LossRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(out, "step,ce_loss,kl_loss").expect("vec write");
    for r in history {
        writeln!(out, "{},{},{}", r.step, r.ce_loss, r.kl_loss).expect("vec write");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
