//! Reverse-mode automatic differentiation over row-major `f64` matrices.
//! The op set is exactly what the encoder and hourglass decoder need.

use ndarray::{linalg::general_mat_mul, s, Array2, ArrayView2, Axis};

pub const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op {
    Input,
    Param(usize),
    MatMul(Var, Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Axpy(Var, Var, f64),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Array2<f64>, inv_std: Vec<f64> },
    Gelu(Var),
    Attention { q: Var, k: Var, v: Var, heads: usize, head_dim: usize, probs: Vec<Array2<f64>> },
    Gather { table: Var, ids: Vec<usize> },
    Rows { x: Var, map: Vec<Option<usize>> },
    Concat(Var, Var),
    CrossEntropy { logits: Var, targets: Vec<Option<usize>>, probs: Array2<f64>, count: usize },
    Kl { mean: Var, logvar: Var },
    Reparam { mean: Var, logvar: Var, eps: Array2<f64> },
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

/// One forward pass. Parameters are borrowed, not copied.
pub struct Tape<'a> {
    params: &'a [Array2<f64>],
    nodes: Vec<Node>,
}

pub fn gelu(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
    0.5 * x * (1.0 + (C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    const C: f64 = 0.797_884_560_802_865_4;
    let u = C * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * C * (1.0 + 3.0 * 0.044715 * x * x)
}

/// Row-wise layer normalization; returns output, normalized input and 1/std.
pub fn layer_norm(
    x: ArrayView2<f64>,
    gamma: ArrayView2<f64>,
    beta: ArrayView2<f64>,
) -> (Array2<f64>, Array2<f64>, Vec<f64>) {
    let (n, d) = x.dim();
    let mut xhat = Array2::zeros((n, d));
    let mut out = Array2::zeros((n, d));
    let mut inv = Vec::with_capacity(n);
    for i in 0..n {
        let row = x.row(i);
        let mean = row.sum() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv.push(is);
        for j in 0..d {
            let h = (row[j] - mean) * is;
            xhat[[i, j]] = h;
            out[[i, j]] = h * gamma[[0, j]] + beta[[0, j]];
        }
    }
    (out, xhat, inv)
}

/// Multi-head scaled dot-product attention. With `causal`, query `i` sees
/// keys `0..=i` only. Returns output and per-head probabilities.
pub fn attention(
    q: ArrayView2<f64>,
    k: ArrayView2<f64>,
    v: ArrayView2<f64>,
    heads: usize,
    head_dim: usize,
    causal: bool,
) -> (Array2<f64>, Vec<Array2<f64>>) {
    let (tq, tk) = (q.nrows(), k.nrows());
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut out = Array2::zeros((tq, heads * head_dim));
    let mut probs = Vec::with_capacity(heads);
    for h in 0..heads {
        let cols = s![.., h * head_dim..(h + 1) * head_dim];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t());
        for i in 0..tq {
            let mut row = scores.row_mut(i);
            let limit = if causal { (i + 1).min(tk) } else { tk };
            let mut max = f64::NEG_INFINITY;
            for j in 0..limit {
                row[j] *= scale;
                max = max.max(row[j]);
            }
            let mut sum = 0.0;
            for j in 0..limit {
                row[j] = (row[j] - max).exp();
                sum += row[j];
            }
            for j in 0..limit {
                row[j] /= sum;
            }
            for j in limit..tk {
                row[j] = 0.0;
            }
        }
        let o = scores.dot(&v.slice(cols));
        out.slice_mut(cols).assign(&o);
        probs.push(scores);
    }
    (out, probs)
}

impl<'a> Tape<'a> {
    pub fn new(params: &'a [Array2<f64>]) -> Self {
        Tape { params, nodes: Vec::new() }
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> ArrayView2<'_, f64> {
        match self.nodes[v.0].op {
            Op::Param(i) => self.params[i].view(),
            _ => self.nodes[v.0].value.view(),
        }
    }

    pub fn scalar(&self, v: Var) -> f64 {
        self.value(v)[[0, 0]]
    }

    pub fn input(&mut self, value: Array2<f64>) -> Var {
        self.push(value, Op::Input)
    }

    pub fn param(&mut self, index: usize) -> Var {
        self.push(Array2::zeros((0, 0)), Op::Param(index))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).dot(&self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = &self.value(a) + &self.value(b);
        self.push(v, Op::Add(a, b))
    }

    /// `x + bias` with a `1 x d` bias broadcast over rows.
    pub fn add_bias(&mut self, x: Var, bias: Var) -> Var {
        let v = &self.value(x) + &self.value(bias);
        self.push(v, Op::AddBias(x, bias))
    }

    /// `a + c * b`.
    pub fn axpy(&mut self, a: Var, b: Var, c: f64) -> Var {
        let v = &self.value(a) + &(&self.value(b) * c);
        self.push(v, Op::Axpy(a, b, c))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let (out, xhat, inv_std) = layer_norm(self.value(x), self.value(gamma), self.value(beta));
        self.push(out, Op::LayerNorm { x, gamma, beta, xhat, inv_std })
    }

    pub fn gelu(&mut self, x: Var) -> Var {
        let v = self.value(x).mapv(gelu);
        self.push(v, Op::Gelu(x))
    }

    pub fn attention(&mut self, q: Var, k: Var, v: Var, heads: usize, head_dim: usize, causal: bool) -> Var {
        let (out, probs) = attention(self.value(q), self.value(k), self.value(v), heads, head_dim, causal);
        self.push(out, Op::Attention { q, k, v, heads, head_dim, probs })
    }

    /// Rows `ids` of `table`.
    pub fn gather(&mut self, table: Var, ids: &[usize]) -> Var {
        let t = self.value(table);
        let mut out = Array2::zeros((ids.len(), t.ncols()));
        for (r, &i) in ids.iter().enumerate() {
            out.row_mut(r).assign(&t.row(i));
        }
        self.push(out, Op::Gather { table, ids: ids.to_vec() })
    }

    /// Row `r` of the result is row `map[r]` of `x`, or zeros for `None`.
    pub fn rows(&mut self, x: Var, map: Vec<Option<usize>>) -> Var {
        let t = self.value(x);
        let mut out = Array2::zeros((map.len(), t.ncols()));
        for (r, m) in map.iter().enumerate() {
            if let Some(i) = m {
                out.row_mut(r).assign(&t.row(*i));
            }
        }
        self.push(out, Op::Rows { x, map })
    }

    pub fn concat_rows(&mut self, a: Var, b: Var) -> Var {
        let v = ndarray::concatenate(Axis(0), &[self.value(a), self.value(b)]).expect("same width");
        self.push(v, Op::Concat(a, b))
    }

    /// Mean softmax cross-entropy over rows with a target; returns a `1 x 1`
    /// node. Rows with `None` are ignored.
    pub fn cross_entropy(&mut self, logits: Var, targets: &[Option<usize>]) -> Var {
        let l = self.value(logits);
        let mut probs = Array2::zeros(l.dim());
        let mut loss = 0.0;
        let mut count = 0;
        for (i, t) in targets.iter().enumerate() {
            let row = l.row(i);
            let max = row.fold(f64::NEG_INFINITY, |m, v| m.max(*v));
            let mut sum = 0.0;
            for j in 0..row.len() {
                let e = (row[j] - max).exp();
                probs[[i, j]] = e;
                sum += e;
            }
            probs.row_mut(i).mapv_inplace(|e| e / sum);
            if let Some(t) = t {
                loss -= (row[*t] - max) - sum.ln();
                count += 1;
            }
        }
        let value = if count > 0 { loss / count as f64 } else { 0.0 };
        self.push(
            Array2::from_elem((1, 1), value),
            Op::CrossEntropy { logits, targets: targets.to_vec(), probs, count },
        )
    }

    /// Mean over elements of `-0.5 * (1 + logvar - mean^2 - exp(logvar))`.
    pub fn kl(&mut self, mean: Var, logvar: Var) -> Var {
        let m = self.value(mean);
        let lv = self.value(logvar);
        let n = m.len() as f64;
        let total: f64 = m.iter().zip(lv.iter()).map(|(m, l)| -0.5 * (1.0 + l - m * m - l.exp())).sum();
        self.push(Array2::from_elem((1, 1), total / n), Op::Kl { mean, logvar })
    }

    /// `mean + exp(logvar / 2) * eps`.
    pub fn reparam(&mut self, mean: Var, logvar: Var, eps: Array2<f64>) -> Var {
        let v = &self.value(mean) + &(&self.value(logvar).mapv(|l| (0.5 * l).exp()) * &eps);
        self.push(v, Op::Reparam { mean, logvar, eps })
    }

    /// Back-propagates from the scalar `loss`, adding parameter gradients
    /// into `param_grads`.
    pub fn backward(&self, loss: Var, param_grads: &mut [Array2<f64>]) {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Array2::ones((1, 1)));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            let acc = |v: Var, d: Array2<f64>, grads: &mut Vec<Option<Array2<f64>>>| match &mut grads[v.0] {
                Some(existing) => *existing += &d,
                slot => *slot = Some(d),
            };
            match &node.op {
                Op::Input => {}
                Op::Param(i) => param_grads[*i] += &g,
                Op::MatMul(a, b) => {
                    let (av, bv) = (self.value(*a), self.value(*b));
                    let mut da = Array2::zeros(av.dim());
                    general_mat_mul(1.0, &g, &bv.t(), 0.0, &mut da);
                    let mut db = Array2::zeros(bv.dim());
                    general_mat_mul(1.0, &av.t(), &g, 0.0, &mut db);
                    acc(*a, da, &mut grads);
                    acc(*b, db, &mut grads);
                }
                Op::Add(a, b) => {
                    acc(*a, g.clone(), &mut grads);
                    acc(*b, g, &mut grads);
                }
                Op::AddBias(x, b) => {
                    let db = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    acc(*b, db, &mut grads);
                    acc(*x, g, &mut grads);
                }
                Op::Axpy(a, b, c) => {
                    acc(*b, &g * *c, &mut grads);
                    acc(*a, g, &mut grads);
                }
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    let gm = self.value(*gamma);
                    let (n, d) = xhat.dim();
                    let dgamma = (&g * xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
                    let dbeta = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    let mut dx = Array2::zeros((n, d));
                    for i in 0..n {
                        let mut mean_dh = 0.0;
                        let mut mean_dh_h = 0.0;
                        for j in 0..d {
                            let dh = g[[i, j]] * gm[[0, j]];
                            mean_dh += dh;
                            mean_dh_h += dh * xhat[[i, j]];
                        }
                        mean_dh /= d as f64;
                        mean_dh_h /= d as f64;
                        for j in 0..d {
                            let dh = g[[i, j]] * gm[[0, j]];
                            dx[[i, j]] = inv_std[i] * (dh - mean_dh - xhat[[i, j]] * mean_dh_h);
                        }
                    }
                    acc(*gamma, dgamma, &mut grads);
                    acc(*beta, dbeta, &mut grads);
                    acc(*x, dx, &mut grads);
                }
                Op::Gelu(x) => {
                    let dx = &g * &self.value(*x).mapv(gelu_grad);
                    acc(*x, dx, &mut grads);
                }
                Op::Attention { q, k, v, heads, head_dim, probs } => {
                    let (qv, kv, vv) = (self.value(*q), self.value(*k), self.value(*v));
                    let scale = 1.0 / (*head_dim as f64).sqrt();
                    let mut dq = Array2::zeros(qv.dim());
                    let mut dk = Array2::zeros(kv.dim());
                    let mut dv = Array2::zeros(vv.dim());
                    for h in 0..*heads {
                        let cols = s![.., h * head_dim..(h + 1) * head_dim];
                        let p = &probs[h];
                        let go = g.slice(cols);
                        dv.slice_mut(cols).assign(&p.t().dot(&go));
                        let dp = go.dot(&vv.slice(cols).t());
                        let mut ds = Array2::zeros(p.dim());
                        for i in 0..p.nrows() {
                            let dot: f64 = p.row(i).iter().zip(dp.row(i).iter()).map(|(a, b)| a * b).sum();
                            for j in 0..p.ncols() {
                                ds[[i, j]] = p[[i, j]] * (dp[[i, j]] - dot) * scale;
                            }
                        }
                        dq.slice_mut(cols).assign(&ds.dot(&kv.slice(cols)));
                        dk.slice_mut(cols).assign(&ds.t().dot(&qv.slice(cols)));
                    }
                    acc(*q, dq, &mut grads);
                    acc(*k, dk, &mut grads);
                    acc(*v, dv, &mut grads);
                }
                Op::Gather { table, ids } => {
                    let t = self.value(*table);
                    let mut dt = Array2::zeros(t.dim());
                    for (r, &i) in ids.iter().enumerate() {
                        let mut row = dt.row_mut(i);
                        row += &g.row(r);
                    }
                    acc(*table, dt, &mut grads);
                }
                Op::Rows { x, map } => {
                    let mut dx = Array2::zeros(self.value(*x).dim());
                    for (r, m) in map.iter().enumerate() {
                        if let Some(i) = m {
                            let mut row = dx.row_mut(*i);
                            row += &g.row(r);
                        }
                    }
                    acc(*x, dx, &mut grads);
                }
                Op::Concat(a, b) => {
                    let na = self.value(*a).nrows();
                    acc(*a, g.slice(s![..na, ..]).to_owned(), &mut grads);
                    acc(*b, g.slice(s![na.., ..]).to_owned(), &mut grads);
                }
                Op::CrossEntropy { logits, targets, probs, count } => {
                    let mut dl = Array2::zeros(probs.dim());
                    if *count > 0 {
                        let c = g[[0, 0]] / *count as f64;
                        for (i, t) in targets.iter().enumerate() {
                            if let Some(t) = t {
                                for j in 0..probs.ncols() {
                                    dl[[i, j]] = c * probs[[i, j]];
                                }
                                dl[[i, *t]] -= c;
                            }
                        }
                    }
                    acc(*logits, dl, &mut grads);
                }
                Op::Kl { mean, logvar } => {
                    let m = self.value(*mean);
                    let lv = self.value(*logvar);
                    let c = g[[0, 0]] / m.len() as f64;
                    acc(*mean, m.mapv(|x| c * x), &mut grads);
                    acc(*logvar, lv.mapv(|l| c * 0.5 * (l.exp() - 1.0)), &mut grads);
                }
                Op::Reparam { mean, logvar, eps } => {
                    let lv = self.value(*logvar);
                    let dlv = &g * &(&lv.mapv(|l| 0.5 * (0.5 * l).exp()) * eps);
                    acc(*logvar, dlv, &mut grads);
                    acc(*mean, g, &mut grads);
                }
            }
        }
    }
}
