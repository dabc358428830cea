//! Point-cloud encoder with a variational bottleneck and the three-level
//! hourglass decoder, both as tape graphs for training and as a cached
//! step-by-step path for sampling.

use ndarray::{Array2, ArrayView2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ModelConfig;
use super::tape::{attention, gelu, layer_norm, Tape, Var};
use crate::error::{Error, Result};
use crate::mesh::Vec3;

/// Named parameter matrices in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    pub names: Vec<String>,
    pub values: Vec<Array2<f64>>,
}

impl ParamStore {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(|v| v.len()).sum()
    }

    pub fn zeros_like(&self) -> Vec<Array2<f64>> {
        self.values.iter().map(|v| Array2::zeros(v.dim())).collect()
    }
}

struct Init {
    rng: ChaCha8Rng,
    store: ParamStore,
}

impl Init {
    fn normal(&mut self, name: String, rows: usize, cols: usize, std: f64) -> usize {
        let dist = Normal::new(0.0, std).expect("positive std");
        let v = Array2::from_shape_simple_fn((rows, cols), || dist.sample(&mut self.rng));
        self.push(name, v)
    }

    fn constant(&mut self, name: String, rows: usize, cols: usize, value: f64) -> usize {
        self.push(name, Array2::from_elem((rows, cols), value))
    }

    fn push(&mut self, name: String, v: Array2<f64>) -> usize {
        self.store.names.push(name);
        self.store.values.push(v);
        self.store.values.len() - 1
    }

    fn linear(&mut self, name: &str, fan_in: usize, fan_out: usize, std: f64) -> Linear {
        Linear {
            w: self.normal(format!("{name}.weight"), fan_in, fan_out, std),
            b: self.constant(format!("{name}.bias"), 1, fan_out, 0.0),
        }
    }

    fn norm(&mut self, name: &str, width: usize) -> Norm {
        Norm {
            gamma: self.constant(format!("{name}.gamma"), 1, width, 1.0),
            beta: self.constant(format!("{name}.beta"), 1, width, 0.0),
        }
    }

    fn attn(&mut self, name: &str, width: usize, inner: usize, std: f64, out_std: f64) -> Attn {
        Attn {
            q: self.linear(&format!("{name}.q"), width, inner, std),
            k: self.linear(&format!("{name}.k"), width, inner, std),
            v: self.linear(&format!("{name}.v"), width, inner, std),
            o: self.linear(&format!("{name}.o"), inner, width, out_std),
        }
    }

    fn block(&mut self, name: &str, c: &ModelConfig, cross: bool, out_std: f64) -> Block {
        let std = 0.02;
        Block {
            ln1: self.norm(&format!("{name}.ln1"), c.width),
            attn: self.attn(&format!("{name}.self"), c.width, c.inner_dim(), std, out_std),
            cross: cross.then(|| {
                (
                    self.norm(&format!("{name}.ln2"), c.width),
                    self.attn(&format!("{name}.cross"), c.width, c.inner_dim(), std, out_std),
                )
            }),
            ln3: self.norm(&format!("{name}.ln3"), c.width),
            fc1: self.linear(&format!("{name}.fc1"), c.width, c.mlp_ratio * c.width, std),
            fc2: self.linear(&format!("{name}.fc2"), c.mlp_ratio * c.width, c.width, out_std),
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Linear {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    gamma: usize,
    beta: usize,
}

#[derive(Debug, Clone, Copy)]
struct Attn {
    q: Linear,
    k: Linear,
    v: Linear,
    o: Linear,
}

#[derive(Debug, Clone)]
struct Block {
    ln1: Norm,
    attn: Attn,
    cross: Option<(Norm, Attn)>,
    ln3: Norm,
    fc1: Linear,
    fc2: Linear,
}

#[derive(Debug, Clone)]
struct Layout {
    point_proj: Linear,
    queries: usize,
    enc_ln_q: Norm,
    enc_ln_kv: Norm,
    enc_cross: Attn,
    enc_ln_mlp: Norm,
    enc_fc1: Linear,
    enc_fc2: Linear,
    enc_blocks: Vec<Block>,
    enc_ln_out: Norm,
    head_mean: Linear,
    head_logvar: Linear,
    cond_proj: Linear,
    bucket_emb: usize,
    tok_emb: usize,
    pos_emb: usize,
    levels: [Vec<Block>; 5],
    final_ln: Norm,
    head: Linear,
}

const LEVEL_NAMES: [&str; 5] = ["coord_pre", "vertex_pre", "edge", "vertex_post", "coord_post"];

fn build_layout(c: &ModelConfig, seed: u64) -> (Layout, ParamStore) {
    let mut init = Init { rng: ChaCha8Rng::seed_from_u64(seed), store: ParamStore { names: vec![], values: vec![] } };
    let layers = c.depth.total() + c.encoder_layers + 1;
    let out_std = 0.02 / ((2 * layers) as f64).sqrt();
    let std = 0.02;
    let d = c.width;
    let point_proj = init.linear("encoder.point_proj", c.point_features(), d, std);
    let queries = init.normal("encoder.queries".into(), c.latent_tokens, d, std);
    let enc_ln_q = init.norm("encoder.ln_q", d);
    let enc_ln_kv = init.norm("encoder.ln_kv", d);
    let enc_cross = init.attn("encoder.cross", d, c.inner_dim(), std, out_std);
    let enc_ln_mlp = init.norm("encoder.ln_mlp", d);
    let enc_fc1 = init.linear("encoder.fc1", d, c.mlp_ratio * d, std);
    let enc_fc2 = init.linear("encoder.fc2", c.mlp_ratio * d, d, out_std);
    let enc_blocks =
        (0..c.encoder_layers).map(|i| init.block(&format!("encoder.block{i}"), c, false, out_std)).collect();
    let enc_ln_out = init.norm("encoder.ln_out", d);
    let head_mean = init.linear("encoder.mean", d, c.latent_dim, std);
    let head_logvar = init.linear("encoder.logvar", d, c.latent_dim, std);
    let cond_proj = init.linear("decoder.cond_proj", c.latent_dim, d, std);
    let bucket_emb = init.normal("decoder.bucket_emb".into(), c.length_buckets, d, std);
    let tok_emb = init.normal("decoder.tok_emb".into(), c.vocab_size(), d, std);
    let pos_emb = init.normal("decoder.pos_emb".into(), c.positions(), d, std);
    let counts = [c.depth.coord_pre, c.depth.vertex_pre, c.depth.edge, c.depth.vertex_post, c.depth.coord_post];
    let levels = std::array::from_fn(|l| {
        (0..counts[l]).map(|i| init.block(&format!("decoder.{}.{i}", LEVEL_NAMES[l]), c, true, out_std)).collect()
    });
    let final_ln = init.norm("decoder.final_ln", d);
    let head = init.linear("decoder.head", d, c.vocab_size(), std);
    let layout = Layout {
        point_proj,
        queries,
        enc_ln_q,
        enc_ln_kv,
        enc_cross,
        enc_ln_mlp,
        enc_fc1,
        enc_fc2,
        enc_blocks,
        enc_ln_out,
        head_mean,
        head_logvar,
        cond_proj,
        bucket_emb,
        tok_emb,
        pos_emb,
        levels,
        final_ln,
        head,
    };
    (layout, init.store)
}

/// Position plus sinusoidal features `sin/cos(2^k pi x)` per axis.
pub fn point_features(points: &[Vec3], bands: usize) -> Array2<f64> {
    let mut out = Array2::zeros((points.len(), 3 + 6 * bands));
    for (i, p) in points.iter().enumerate() {
        for a in 0..3 {
            out[[i, a]] = p[a];
            for k in 0..bands {
                let w = std::f64::consts::PI * (1u64 << k) as f64 * p[a];
                out[[i, 3 + 6 * k + a]] = w.sin();
                out[[i, 6 + 6 * k + a]] = w.cos();
            }
        }
    }
    out
}

/// Encoder output: latent tokens (mean at inference) plus the training-time
/// mean and log-variance nodes.
pub struct EncodedVars {
    pub condition: Var,
    pub mean: Var,
    pub logvar: Var,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapeEmbedding {
    /// Latent tokens projected to model width, followed by the bucket token.
    pub tokens: Array2<f64>,
    pub mean: Array2<f64>,
    pub logvar: Array2<f64>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    layout: Layout,
}

fn lin(t: &mut Tape, x: Var, l: Linear) -> Var {
    let w = t.param(l.w);
    let b = t.param(l.b);
    let y = t.matmul(x, w);
    t.add_bias(y, b)
}

fn norm(t: &mut Tape, x: Var, n: Norm) -> Var {
    let g = t.param(n.gamma);
    let b = t.param(n.beta);
    t.layer_norm(x, g, b)
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let (layout, params) = build_layout(&config, seed);
        Ok(Model { config, params, layout })
    }

    /// Rebuilds a model from stored parameters, checking names and shapes.
    pub fn from_params(config: ModelConfig, params: ParamStore) -> Result<Self> {
        let mut model = Model::new(config, 0)?;
        if model.params.names != params.names {
            return Err(Error::Checkpoint("parameter manifest does not match the configuration".into()));
        }
        for (name, (a, b)) in params.names.iter().zip(model.params.values.iter().zip(&params.values)) {
            if a.dim() != b.dim() {
                return Err(Error::Checkpoint(format!(
                    "parameter {name} has shape {:?}, expected {:?}",
                    b.dim(),
                    a.dim()
                )));
            }
        }
        model.params = params;
        Ok(model)
    }

    fn attn_block(&self, t: &mut Tape, x: Var, kv: Var, a: Attn, causal: bool) -> Var {
        let q = lin(t, x, a.q);
        let k = lin(t, kv, a.k);
        let v = lin(t, kv, a.v);
        let h = t.attention(q, k, v, self.config.heads, self.config.head_dim, causal);
        lin(t, h, a.o)
    }

    fn mlp(&self, t: &mut Tape, x: Var, fc1: Linear, fc2: Linear) -> Var {
        let h = lin(t, x, fc1);
        let h = t.gelu(h);
        lin(t, h, fc2)
    }

    fn block(&self, t: &mut Tape, x: Var, cond: Var, b: &Block, causal: bool) -> Var {
        let h = norm(t, x, b.ln1);
        let a = self.attn_block(t, h, h, b.attn, causal);
        let mut x = t.add(x, a);
        if let Some((ln, cross)) = &b.cross {
            let h = norm(t, x, *ln);
            let a = self.attn_block(t, h, cond, *cross, false);
            x = t.add(x, a);
        }
        let h = norm(t, x, b.ln3);
        let m = self.mlp(t, h, b.fc1, b.fc2);
        t.add(x, m)
    }

    /// Encodes a cloud. With `noise`, the latent is sampled as
    /// `mean + exp(logvar / 2) * noise`; otherwise the mean is used.
    pub fn encode_on(
        &self,
        t: &mut Tape,
        points: &[Vec3],
        bucket: usize,
        noise: Option<Array2<f64>>,
    ) -> Result<EncodedVars> {
        if points.is_empty() {
            return Err(Error::Config("empty conditioning cloud".into()));
        }
        if bucket >= self.config.length_buckets {
            return Err(Error::Config(format!("length bucket {bucket} out of range")));
        }
        let l = &self.layout;
        let feats = t.input(point_features(points, self.config.fourier_bands));
        let x = lin(t, feats, l.point_proj);
        let q = t.param(l.queries);
        let hq = norm(t, q, l.enc_ln_q);
        let hkv = norm(t, x, l.enc_ln_kv);
        let a = self.attn_block(t, hq, hkv, l.enc_cross, false);
        let mut h = t.add(q, a);
        let hn = norm(t, h, l.enc_ln_mlp);
        let m = self.mlp(t, hn, l.enc_fc1, l.enc_fc2);
        h = t.add(h, m);
        for b in &l.enc_blocks {
            h = self.block(t, h, h, b, false);
        }
        let h = norm(t, h, l.enc_ln_out);
        let mean = lin(t, h, l.head_mean);
        let logvar = lin(t, h, l.head_logvar);
        let z = match noise {
            Some(eps) => t.reparam(mean, logvar, eps),
            None => mean,
        };
        let c = lin(t, z, l.cond_proj);
        let table = t.param(l.bucket_emb);
        let bt = t.gather(table, &[bucket]);
        let condition = t.concat_rows(c, bt);
        if t.value(condition).iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("shape embedding".into()));
        }
        Ok(EncodedVars { condition, mean, logvar })
    }

    /// Inference-mode shape embedding.
    pub fn encode(&self, points: &[Vec3], bucket: usize) -> Result<ShapeEmbedding> {
        let mut t = Tape::new(&self.params.values);
        let e = self.encode_on(&mut t, points, bucket, None)?;
        Ok(ShapeEmbedding {
            tokens: t.value(e.condition).to_owned(),
            mean: t.value(e.mean).to_owned(),
            logvar: t.value(e.logvar).to_owned(),
        })
    }

    /// Internal sequence lengths (fine, vertex, edge) for `n` input tokens.
    pub fn level_lengths(n: usize) -> (usize, usize, usize) {
        let g = n.saturating_sub(1) / 3;
        (n, g, g / 2)
    }

    /// Logits for every input position (row `i` predicts token `i + 1`).
    pub fn decode_on(&self, t: &mut Tape, tokens: &[u32], condition: Var) -> Result<Var> {
        let n = tokens.len();
        if n == 0 || n > self.config.positions() {
            return Err(Error::SequenceTooLong { segments: n / 6, max: self.config.max_segments() });
        }
        if let Some(bad) = tokens.iter().find(|&&tok| tok as usize >= self.config.vocab_size()) {
            return Err(Error::Codec { position: 0, message: format!("token {bad} outside vocabulary") });
        }
        let l = &self.layout;
        let ids: Vec<usize> = tokens.iter().map(|&x| x as usize).collect();
        let tok_table = t.param(l.tok_emb);
        let pos_table = t.param(l.pos_emb);
        let te = t.gather(tok_table, &ids);
        let pe = t.gather(pos_table, &(0..n).collect::<Vec<_>>());
        let mut x = t.add(te, pe);
        for b in &l.levels[0] {
            x = self.block(t, x, condition, b, true);
        }
        let (_, g, e) = Model::level_lengths(n);
        if g > 0 {
            let mut v = t.rows(x, (0..g).map(|i| Some(3 * i + 3)).collect());
            for b in &l.levels[1] {
                v = self.block(t, v, condition, b, true);
            }
            if e > 0 {
                let mut ed = t.rows(v, (0..e).map(|i| Some(2 * i + 1)).collect());
                for b in &l.levels[2] {
                    ed = self.block(t, ed, condition, b, true);
                }
                let up = t.rows(ed, (0..g).map(|i| ((i + 1) / 2).checked_sub(1)).collect());
                v = t.add(v, up);
            }
            for b in &l.levels[3] {
                v = self.block(t, v, condition, b, true);
            }
            let up = t.rows(v, (0..n).map(|p| (p / 3).checked_sub(1)).collect());
            x = t.add(x, up);
        }
        for b in &l.levels[4] {
            x = self.block(t, x, condition, b, true);
        }
        let x = norm(t, x, l.final_ln);
        Ok(lin(t, x, l.head))
    }

    /// Full-sequence logits for a fixed condition (inference mode).
    pub fn logits(&self, tokens: &[u32], condition: &Array2<f64>) -> Result<Array2<f64>> {
        let mut t = Tape::new(&self.params.values);
        let c = t.input(condition.clone());
        let out = self.decode_on(&mut t, tokens, c)?;
        Ok(t.value(out).to_owned())
    }

    /// Starts a cached incremental decode.
    pub fn start(&self, condition: &Array2<f64>) -> DecoderState {
        let cond_kv = self
            .layout
            .levels
            .iter()
            .map(|blocks| {
                blocks
                    .iter()
                    .map(|b| {
                        let (_, cross) = b.cross.as_ref().expect("decoder blocks cross-attend");
                        (self.apply(condition.view(), cross.k), self.apply(condition.view(), cross.v))
                    })
                    .collect()
            })
            .collect();
        let width = self.config.inner_dim();
        let caches =
            self.layout.levels.iter().map(|blocks| blocks.iter().map(|_| KvCache::new(width)).collect()).collect();
        DecoderState { pos: 0, cond_kv, caches, edge_out: Vec::new(), vertex_out: Vec::new() }
    }

    fn apply(&self, x: ArrayView2<f64>, l: Linear) -> Array2<f64> {
        x.dot(&self.params.values[l.w]) + &self.params.values[l.b]
    }

    fn norm_rows(&self, x: ArrayView2<f64>, n: Norm) -> Array2<f64> {
        layer_norm(x, self.params.values[n.gamma].view(), self.params.values[n.beta].view()).0
    }

    fn block_step(
        &self,
        x: Array2<f64>,
        b: &Block,
        cache: &mut KvCache,
        cond_kv: &(Array2<f64>, Array2<f64>),
    ) -> Array2<f64> {
        let (heads, hd) = (self.config.heads, self.config.head_dim);
        let h = self.norm_rows(x.view(), b.ln1);
        let q = self.apply(h.view(), b.attn.q);
        cache.k.push_row(self.apply(h.view(), b.attn.k).row(0)).expect("width");
        cache.v.push_row(self.apply(h.view(), b.attn.v).row(0)).expect("width");
        let (a, _) = attention(q.view(), cache.k.view(), cache.v.view(), heads, hd, false);
        let mut x = x + self.apply(a.view(), b.attn.o);
        if let Some((ln, cross)) = &b.cross {
            let h = self.norm_rows(x.view(), *ln);
            let q = self.apply(h.view(), cross.q);
            let (a, _) = attention(q.view(), cond_kv.0.view(), cond_kv.1.view(), heads, hd, false);
            x = x + self.apply(a.view(), cross.o);
        }
        let h = self.norm_rows(x.view(), b.ln3);
        let m = self.apply(self.apply(h.view(), b.fc1).mapv(gelu).view(), b.fc2);
        x + m
    }

    fn run_level(&self, state: &mut DecoderState, level: usize, mut x: Array2<f64>) -> Array2<f64> {
        for (i, b) in self.layout.levels[level].iter().enumerate() {
            x = self.block_step(x, b, &mut state.caches[level][i], &state.cond_kv[level][i]);
        }
        x
    }

    /// Feeds one token and returns the logits predicting the next one.
    pub fn step(&self, state: &mut DecoderState, token: u32) -> Result<Vec<f64>> {
        let p = state.pos;
        if p >= self.config.positions() {
            return Err(Error::SequenceTooLong { segments: p / 6, max: self.config.max_segments() });
        }
        let l = &self.layout;
        let v = &self.params.values;
        let mut x = (&v[l.tok_emb].row(token as usize) + &v[l.pos_emb].row(p)).insert_axis(Axis(0));
        x = self.run_level(state, 0, x);
        if p >= 3 && p % 3 == 0 {
            let g = p / 3 - 1;
            let mut vx = self.run_level(state, 1, x.clone());
            if g % 2 == 1 {
                let ed = self.run_level(state, 2, vx.clone());
                state.edge_out.push(ed);
            }
            if let Some(e) = ((g + 1) / 2).checked_sub(1) {
                vx = vx + &state.edge_out[e];
            }
            let vo = self.run_level(state, 3, vx);
            state.vertex_out.push(vo);
        }
        if let Some(g) = (p / 3).checked_sub(1) {
            x = x + &state.vertex_out[g];
        }
        x = self.run_level(state, 4, x);
        let x = self.norm_rows(x.view(), l.final_ln);
        let logits = self.apply(x.view(), l.head);
        state.pos += 1;
        Ok(logits.row(0).to_vec())
    }
}

#[derive(Debug, Clone)]
struct KvCache {
    k: Array2<f64>,
    v: Array2<f64>,
}

impl KvCache {
    fn new(width: usize) -> Self {
        KvCache { k: Array2::zeros((0, width)), v: Array2::zeros((0, width)) }
    }
}

/// Per-level key/value caches and coarse outputs of an incremental decode.
#[derive(Debug, Clone)]
pub struct DecoderState {
    pos: usize,
    cond_kv: Vec<Vec<(Array2<f64>, Array2<f64>)>>,
    caches: Vec<Vec<KvCache>>,
    edge_out: Vec<Array2<f64>>,
    vertex_out: Vec<Array2<f64>>,
}

impl DecoderState {
    pub fn position(&self) -> usize {
        self.pos
    }
}

#[allow(dead_code)]
fn max_abs_diff(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::s;
    use rand::{Rng, SeedableRng};

    fn cloud(n: usize, seed: u64) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect()
    }

    fn tokens(n: usize, seed: u64, bins: u32) -> Vec<u32> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut t = vec![bins];
        t.extend((1..n).map(|_| rng.random_range(0..bins)));
        t
    }

    #[test]
    fn level_lengths_follow_group_sizes() {
        assert_eq!(Model::level_lengths(37), (37, 12, 6));
        assert_eq!(Model::level_lengths(38), (38, 12, 6));
        for k in 1..20 {
            let (_, g, e) = Model::level_lengths(6 * k + 1);
            assert_eq!((g, e), (2 * k, k));
        }
    }

    #[test]
    fn encoder_is_deterministic_and_bucket_only_touches_last_token() {
        let m = Model::new(ModelConfig::tiny(16), 3).unwrap();
        let pts = cloud(64, 1);
        let a = m.encode(&pts, 2).unwrap();
        assert_eq!(a, m.encode(&pts, 2).unwrap());
        let b = m.encode(&pts, 5).unwrap();
        let last = a.tokens.nrows() - 1;
        assert_eq!(a.tokens.slice(s![..last, ..]), b.tokens.slice(s![..last, ..]));
        assert_ne!(a.tokens.row(last), b.tokens.row(last));
    }

    #[test]
    fn encoder_is_permutation_invariant() {
        let m = Model::new(ModelConfig::tiny(16), 3).unwrap();
        let pts = cloud(128, 2);
        let mut rev = pts.clone();
        rev.reverse();
        rev.rotate_left(17);
        let a = m.encode(&pts, 0).unwrap();
        let b = m.encode(&rev, 0).unwrap();
        assert!(max_abs_diff(&a.tokens, &b.tokens) <= 1e-5);
    }

    #[test]
    fn future_tokens_never_change_past_logits() {
        let c = ModelConfig::tiny(16);
        let m = Model::new(c.clone(), 4).unwrap();
        let cond = m.encode(&cloud(32, 3), 1).unwrap().tokens;
        let toks = tokens(40, 5, c.bins);
        let full = m.logits(&toks, &cond).unwrap();
        for j in [1, 7, 20, 39] {
            let mut t = toks.clone();
            t[j] = (t[j] + 11) % c.bins;
            let other = m.logits(&t, &cond).unwrap();
            assert_eq!(full.slice(s![..j, ..]), other.slice(s![..j, ..]));
            assert_ne!(full.row(j), other.row(j));
            let prefix = m.logits(&toks[..j], &cond).unwrap();
            assert_eq!(prefix, full.slice(s![..j, ..]));
        }
    }

    #[test]
    fn cached_steps_match_full_forward() {
        let c = ModelConfig::tiny(16);
        let m = Model::new(c.clone(), 6).unwrap();
        let cond = m.encode(&cloud(32, 4), 0).unwrap().tokens;
        let toks = tokens(45, 8, c.bins);
        let full = m.logits(&toks, &cond).unwrap();
        let mut state = m.start(&cond);
        for (i, &tok) in toks.iter().enumerate() {
            let row = m.step(&mut state, tok).unwrap();
            for (a, b) in row.iter().zip(full.row(i).iter()) {
                assert!((a - b).abs() <= 1e-9, "position {i}");
            }
        }
    }

    #[test]
    fn parameter_names_are_unique() {
        let m = Model::new(ModelConfig::default(), 0).unwrap();
        let mut names = m.params.names.clone();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), m.params.len());
    }
}
