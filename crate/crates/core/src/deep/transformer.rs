//! Post-norm Transformer encoder regressor: token projection, optional
//! sinusoidal positions, multi-head self-attention blocks, mean pooling and
//! an affine head.

use std::f64::consts::PI;

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamSet, TensorId};
use super::window::Layout;
use super::{check_batch, DeepError, Network};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransformerConfig {
    pub d_model: usize,
    pub heads: usize,
    pub blocks: usize,
    pub d_ff: usize,
    pub positional_encoding: bool,
}

impl Default for TransformerConfig {
    fn default() -> Self {
        TransformerConfig {
            d_model: 128,
            heads: 8,
            blocks: 2,
            d_ff: 256,
            positional_encoding: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct BlockIds {
    wq: TensorId,
    bq: TensorId,
    wk: TensorId,
    bk: TensorId,
    wv: TensorId,
    bv: TensorId,
    wo: TensorId,
    bo: TensorId,
    ln1_g: TensorId,
    ln1_b: TensorId,
    ff1_w: TensorId,
    ff1_b: TensorId,
    ff2_w: TensorId,
    ff2_b: TensorId,
    ln2_g: TensorId,
    ln2_b: TensorId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transformer {
    pub config: TransformerConfig,
    pub input_dim: usize,
    params: ParamSet,
    in_w: TensorId,
    in_b: TensorId,
    blocks: Vec<BlockIds>,
    head_w: TensorId,
    head_b: TensorId,
}

struct BlockCache {
    input: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    /// Attention probabilities, row block `(b * heads + head) * L`.
    probs: Array2<f64>,
    attn: Array2<f64>,
    xhat1: Array2<f64>,
    rstd1: Array1<f64>,
    n1: Array2<f64>,
    f1: Array2<f64>,
    act: Array2<f64>,
    xhat2: Array2<f64>,
    rstd2: Array1<f64>,
}

pub struct TransformerCache {
    batch: usize,
    steps: usize,
    x: Array2<f64>,
    blocks: Vec<BlockCache>,
    output: Array2<f64>,
    pooled: Array2<f64>,
}

impl TransformerCache {
    /// Attention probabilities of one block, `(B·heads·L) × L`.
    pub fn attention_probs(&self, block: usize) -> ArrayView2<'_, f64> {
        self.blocks[block].probs.view()
    }

    pub fn pooled(&self) -> ArrayView2<'_, f64> {
        self.pooled.view()
    }
}

/// `PE[t, 2i] = sin(t / 10000^(2i/D))`, `PE[t, 2i+1] = cos(..)`.
pub fn positional_encoding(steps: usize, d_model: usize) -> Array2<f64> {
    Array2::from_shape_fn((steps, d_model), |(t, j)| {
        let rate = 10000f64.powf((2 * (j / 2)) as f64 / d_model as f64);
        let angle = t as f64 / rate;
        if j % 2 == 0 {
            angle.sin()
        } else {
            angle.cos()
        }
    })
}

/// Single-head scaled dot-product attention. Returns the output and the
/// row-stochastic probability matrix.
pub fn attention(q: ArrayView2<f64>, k: ArrayView2<f64>, v: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>) {
    let scale = 1.0 / (q.ncols() as f64).sqrt();
    let mut p = q.dot(&k.t()) * scale;
    softmax_rows(p.view_mut());
    let out = p.dot(&v);
    (out, p)
}

fn softmax_rows(mut m: ArrayViewMut2<f64>) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row /= sum;
    }
}

fn gelu(x: f64) -> f64 {
    let c = (2.0 / PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let c = (2.0 / PI).sqrt();
    let t = (c * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x)
}

fn layer_norm(x: &Array2<f64>, g: ArrayView2<f64>, b: ArrayView2<f64>) -> (Array2<f64>, Array2<f64>, Array1<f64>) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut rstd = Array1::zeros(x.nrows());
    for (r, mut row) in xhat.rows_mut().into_iter().enumerate() {
        let mean = row.sum() / d;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        row.mapv_inplace(|v| (v - mean) * rs);
        rstd[r] = rs;
    }
    let y = &xhat * &g + b;
    (y, xhat, rstd)
}

/// Returns the input gradient; accumulates gain and bias gradients.
fn layer_norm_backward(
    dy: &Array2<f64>,
    xhat: &Array2<f64>,
    rstd: &Array1<f64>,
    g: ArrayView2<f64>,
    mut dg: ArrayViewMut2<f64>,
    mut db: ArrayViewMut2<f64>,
) -> Array2<f64> {
    dg += &(dy * xhat).sum_axis(Axis(0));
    db += &dy.sum_axis(Axis(0));
    let d = dy.ncols() as f64;
    let mut dx = dy * &g;
    for ((mut row, xh), &rs) in dx.rows_mut().into_iter().zip(xhat.rows()).zip(rstd) {
        let sum = row.sum();
        let dot = row.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>();
        for (v, &x) in row.iter_mut().zip(xh) {
            *v = rs / d * (d * *v - sum - x * dot);
        }
    }
    dx
}

/// `out += a · w + bias` (bias broadcast over rows).
fn affine(a: &Array2<f64>, w: ArrayView2<f64>, bias: ArrayView2<f64>) -> Array2<f64> {
    let mut out = a.dot(&w);
    out += &bias;
    out
}

/// Accumulates `dW += aᵀ·dout` and `db += Σ dout`, returns `dout · Wᵀ`.
fn affine_backward(
    a: &Array2<f64>,
    dout: &Array2<f64>,
    w: ArrayView2<f64>,
    mut dw: ArrayViewMut2<f64>,
    mut db: ArrayViewMut2<f64>,
) -> Array2<f64> {
    general_mat_mul(1.0, &a.t(), dout, 1.0, &mut dw);
    db += &dout.sum_axis(Axis(0));
    dout.dot(&w.t())
}

impl Transformer {
    pub fn new<R: Rng>(input_dim: usize, config: TransformerConfig, rng: &mut R) -> Result<Self, DeepError> {
        let TransformerConfig {
            d_model,
            heads,
            blocks,
            d_ff,
            ..
        } = config;
        if input_dim == 0 || d_model == 0 || heads == 0 || blocks == 0 || d_ff == 0 {
            return Err(DeepError::InvalidConfig("transformer dimensions must be positive".into()));
        }
        if d_model % heads != 0 {
            return Err(DeepError::InvalidConfig(format!(
                "d_model {d_model} is not divisible by {heads} heads"
            )));
        }
        let mut p = ParamSet::new();
        let in_w = p.add("input.w", input_dim, d_model);
        let in_b = p.add("input.b", 1, d_model);
        let mut ids = Vec::with_capacity(blocks);
        for l in 0..blocks {
            let mut add = |name: &str, r, c| p.add(format!("block{l}.{name}"), r, c);
            ids.push(BlockIds {
                wq: add("wq", d_model, d_model),
                bq: add("bq", 1, d_model),
                wk: add("wk", d_model, d_model),
                bk: add("bk", 1, d_model),
                wv: add("wv", d_model, d_model),
                bv: add("bv", 1, d_model),
                wo: add("wo", d_model, d_model),
                bo: add("bo", 1, d_model),
                ln1_g: add("ln1.g", 1, d_model),
                ln1_b: add("ln1.b", 1, d_model),
                ff1_w: add("ff1.w", d_model, d_ff),
                ff1_b: add("ff1.b", 1, d_ff),
                ff2_w: add("ff2.w", d_ff, d_model),
                ff2_b: add("ff2.b", 1, d_model),
                ln2_g: add("ln2.g", 1, d_model),
                ln2_b: add("ln2.b", 1, d_model),
            });
        }
        let head_w = p.add("head.w", d_model, 1);
        let head_b = p.add("head.b", 1, 1);
        p.init_uniform(in_w, rng);
        for b in &ids {
            for w in [b.wq, b.wk, b.wv, b.wo, b.ff1_w, b.ff2_w] {
                p.init_uniform(w, rng);
            }
            p.fill(b.ln1_g, 1.0);
            p.fill(b.ln2_g, 1.0);
        }
        p.init_uniform(head_w, rng);
        Ok(Transformer {
            config,
            input_dim,
            params: p,
            in_w,
            in_b,
            blocks: ids,
            head_w,
            head_b,
        })
    }

    fn block_forward(&self, ids: &BlockIds, input: Array2<f64>, batch: usize, steps: usize) -> BlockCache {
        let p = &self.params;
        let heads = self.config.heads;
        let dk = self.config.d_model / heads;
        let scale = 1.0 / (dk as f64).sqrt();
        let q = affine(&input, p.get(ids.wq), p.get(ids.bq));
        let k = affine(&input, p.get(ids.wk), p.get(ids.bk));
        let v = affine(&input, p.get(ids.wv), p.get(ids.bv));
        let mut probs = Array2::zeros((batch * heads * steps, steps));
        let mut attn = Array2::zeros(input.raw_dim());
        for b in 0..batch {
            let rows = b * steps..(b + 1) * steps;
            for hd in 0..heads {
                let cols = hd * dk..(hd + 1) * dk;
                let qh = q.slice(s![rows.clone(), cols.clone()]);
                let kh = k.slice(s![rows.clone(), cols.clone()]);
                let vh = v.slice(s![rows.clone(), cols.clone()]);
                let start = (b * heads + hd) * steps;
                let mut ph = probs.slice_mut(s![start..start + steps, ..]);
                general_mat_mul(scale, &qh, &kh.t(), 0.0, &mut ph);
                softmax_rows(ph.view_mut());
                general_mat_mul(1.0, &ph, &vh, 0.0, &mut attn.slice_mut(s![rows.clone(), cols]));
            }
        }
        let mut r1 = affine(&attn, p.get(ids.wo), p.get(ids.bo));
        r1 += &input;
        let (n1, xhat1, rstd1) = layer_norm(&r1, p.get(ids.ln1_g), p.get(ids.ln1_b));
        let f1 = affine(&n1, p.get(ids.ff1_w), p.get(ids.ff1_b));
        let act = f1.mapv(gelu);
        let mut r2 = affine(&act, p.get(ids.ff2_w), p.get(ids.ff2_b));
        r2 += &n1;
        let (_, xhat2, rstd2) = layer_norm(&r2, p.get(ids.ln2_g), p.get(ids.ln2_b));
        BlockCache {
            input,
            q,
            k,
            v,
            probs,
            attn,
            xhat1,
            rstd1,
            n1,
            f1,
            act,
            xhat2,
            rstd2,
        }
    }

    fn block_output(&self, ids: &BlockIds, c: &BlockCache) -> Array2<f64> {
        &c.xhat2 * &self.params.get(ids.ln2_g) + self.params.get(ids.ln2_b)
    }

    fn block_backward(
        &self,
        ids: &BlockIds,
        c: &BlockCache,
        d_out: &Array2<f64>,
        batch: usize,
        steps: usize,
        grads: &mut ParamSet,
    ) -> Array2<f64> {
        let p = &self.params;
        let heads = self.config.heads;
        let dk = self.config.d_model / heads;
        let scale = 1.0 / (dk as f64).sqrt();

        let (dg, db) = two_mut(grads, ids.ln2_g, ids.ln2_b);
        let d_r2 = layer_norm_backward(d_out, &c.xhat2, &c.rstd2, p.get(ids.ln2_g), dg, db);
        let (dw, db) = two_mut(grads, ids.ff2_w, ids.ff2_b);
        let mut d_f1 = affine_backward(&c.act, &d_r2, p.get(ids.ff2_w), dw, db);
        d_f1.zip_mut_with(&c.f1, |d, &x| *d *= gelu_grad(x));
        let (dw, db) = two_mut(grads, ids.ff1_w, ids.ff1_b);
        let mut d_n1 = affine_backward(&c.n1, &d_f1, p.get(ids.ff1_w), dw, db);
        d_n1 += &d_r2;
        let (dg, db) = two_mut(grads, ids.ln1_g, ids.ln1_b);
        let d_r1 = layer_norm_backward(&d_n1, &c.xhat1, &c.rstd1, p.get(ids.ln1_g), dg, db);
        let (dw, db) = two_mut(grads, ids.wo, ids.bo);
        let d_attn = affine_backward(&c.attn, &d_r1, p.get(ids.wo), dw, db);

        let mut dq = Array2::zeros(c.q.raw_dim());
        let mut dk_ = Array2::zeros(c.k.raw_dim());
        let mut dv = Array2::zeros(c.v.raw_dim());
        let mut dp = Array2::<f64>::zeros((steps, steps));
        for b in 0..batch {
            let rows = b * steps..(b + 1) * steps;
            for hd in 0..heads {
                let cols = hd * dk..(hd + 1) * dk;
                let start = (b * heads + hd) * steps;
                let ph = c.probs.slice(s![start..start + steps, ..]);
                let da = d_attn.slice(s![rows.clone(), cols.clone()]);
                let qh = c.q.slice(s![rows.clone(), cols.clone()]);
                let kh = c.k.slice(s![rows.clone(), cols.clone()]);
                let vh = c.v.slice(s![rows.clone(), cols.clone()]);
                general_mat_mul(1.0, &da, &vh.t(), 0.0, &mut dp);
                general_mat_mul(1.0, &ph.t(), &da, 0.0, &mut dv.slice_mut(s![rows.clone(), cols.clone()]));
                // Softmax backward, folded with the 1/√d_k score scale.
                for (mut drow, prow) in dp.rows_mut().into_iter().zip(ph.rows()) {
                    let dot = drow.iter().zip(prow).map(|(a, b)| a * b).sum::<f64>();
                    for (d, &pv) in drow.iter_mut().zip(prow) {
                        *d = pv * (*d - dot) * scale;
                    }
                }
                general_mat_mul(1.0, &dp, &kh, 0.0, &mut dq.slice_mut(s![rows.clone(), cols.clone()]));
                general_mat_mul(1.0, &dp.t(), &qh, 0.0, &mut dk_.slice_mut(s![rows.clone(), cols]));
            }
        }
        let mut d_in = d_r1;
        for (d, w, b) in [(&dq, ids.wq, ids.bq), (&dk_, ids.wk, ids.bk), (&dv, ids.wv, ids.bv)] {
            let (dw, db) = two_mut(grads, w, b);
            d_in += &affine_backward(&c.input, d, p.get(w), dw, db);
        }
        d_in
    }
}

/// Mutable views of two distinct tensors of the same set.
fn two_mut(set: &mut ParamSet, a: TensorId, b: TensorId) -> (ArrayViewMut2<'_, f64>, ArrayViewMut2<'_, f64>) {
    let specs = set.specs();
    let (sa, sb) = (specs[a.0].clone(), specs[b.0].clone());
    assert!(sa.offset + sa.len() <= sb.offset, "tensors must be ordered and disjoint");
    let (lo, hi) = set.as_mut_slice().split_at_mut(sb.offset);
    (
        ArrayViewMut2::from_shape((sa.shape[0], sa.shape[1]), &mut lo[sa.offset..sa.offset + sa.len()]).expect("shape"),
        ArrayViewMut2::from_shape((sb.shape[0], sb.shape[1]), &mut hi[..sb.len()]).expect("shape"),
    )
}

impl Network for Transformer {
    type Cache = TransformerCache;

    fn layout(&self) -> Layout {
        Layout::BatchMajor
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn params(&self) -> &ParamSet {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    fn forward(&self, x: ArrayView2<f64>, batch: usize) -> Result<(Vec<f64>, TransformerCache), DeepError> {
        let steps = check_batch(x, batch, self.input_dim)?;
        let x = x.to_owned();
        let mut h = affine(&x, self.params.get(self.in_w), self.params.get(self.in_b));
        if self.config.positional_encoding {
            let pe = positional_encoding(steps, self.config.d_model);
            for b in 0..batch {
                let mut rows = h.slice_mut(s![b * steps..(b + 1) * steps, ..]);
                rows += &pe;
            }
        }
        let mut caches = Vec::with_capacity(self.blocks.len());
        for ids in &self.blocks {
            let cache = self.block_forward(ids, h, batch, steps);
            h = self.block_output(ids, &cache);
            caches.push(cache);
        }
        let d = self.config.d_model;
        let pooled = h
            .view()
            .into_shape_with_order((batch, steps, d))
            .expect("batch-major rows")
            .mean_axis(Axis(1))
            .expect("steps ≥ 1");
        let hb = self.params.get(self.head_b)[[0, 0]];
        let y = pooled.dot(&self.params.get(self.head_w)).column(0).mapv(|v| v + hb).to_vec();
        Ok((
            y,
            TransformerCache {
                batch,
                steps,
                x,
                blocks: caches,
                output: h,
                pooled,
            },
        ))
    }

    fn backward(&self, cache: &TransformerCache, d_y: &[f64]) -> ParamSet {
        let (batch, steps) = (cache.batch, cache.steps);
        let mut grads = self.params.zeros_like();
        let d_y = ArrayView2::from_shape((batch, 1), d_y).expect("one gradient per sample");
        general_mat_mul(1.0, &cache.pooled.t(), &d_y, 0.0, &mut grads.get_mut(self.head_w));
        grads.get_mut(self.head_b)[[0, 0]] = d_y.sum();
        let d_pooled = d_y.dot(&self.params.get(self.head_w).t()) / steps as f64;
        let mut d_h = Array2::zeros(cache.output.raw_dim());
        for b in 0..batch {
            d_h.slice_mut(s![b * steps..(b + 1) * steps, ..])
                .assign(&d_pooled.row(b).broadcast((steps, self.config.d_model)).expect("broadcast"));
        }
        for (ids, c) in self.blocks.iter().zip(&cache.blocks).rev() {
            d_h = self.block_backward(ids, c, &d_h, batch, steps, &mut grads);
        }
        let (dw, db) = two_mut(&mut grads, self.in_w, self.in_b);
        affine_backward(&cache.x, &d_h, self.params.get(self.in_w), dw, db);
        grads
    }
}
