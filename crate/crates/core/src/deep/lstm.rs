//! Stacked LSTM regressor with hand-written backpropagation through time.
//!
//! Gate columns are packed `[i | f | o | g]` in every `4h`-wide tensor.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{ParamSet, TensorId};
use super::window::Layout;
use super::{check_batch, DeepError, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmConfig {
    pub hidden: usize,
    pub layers: usize,
    /// Initial value of the forget-gate bias.
    pub forget_bias: f64,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            hidden: 64,
            layers: 2,
            forget_bias: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct LayerIds {
    w: TensorId,
    u: TensorId,
    b: TensorId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lstm {
    pub config: LstmConfig,
    pub input_dim: usize,
    params: ParamSet,
    layers: Vec<LayerIds>,
    fc_w: TensorId,
    fc_b: TensorId,
}

struct LayerCache {
    input: Array2<f64>,
    /// Post-activation gates, `LB × 4h`.
    gates: Array2<f64>,
    c: Array2<f64>,
    tanh_c: Array2<f64>,
    h: Array2<f64>,
}

pub struct LstmCache {
    batch: usize,
    steps: usize,
    layers: Vec<LayerCache>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Lstm {
    /// Weights U(±1/√fan_in), biases zero except the forget gate.
    pub fn new<R: Rng>(input_dim: usize, config: LstmConfig, rng: &mut R) -> Result<Self, DeepError> {
        if input_dim == 0 || config.hidden == 0 || config.layers == 0 {
            return Err(DeepError::InvalidConfig("LSTM dimensions must be positive".into()));
        }
        let h = config.hidden;
        let mut params = ParamSet::new();
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let inp = if l == 0 { input_dim } else { h };
            let ids = LayerIds {
                w: params.add(format!("layer{l}.w"), inp, 4 * h),
                u: params.add(format!("layer{l}.u"), h, 4 * h),
                b: params.add(format!("layer{l}.b"), 1, 4 * h),
            };
            layers.push(ids);
        }
        let fc_w = params.add("fc.w", h, 1);
        let fc_b = params.add("fc.b", 1, 1);
        for ids in &layers {
            params.init_uniform(ids.w, rng);
            params.init_uniform(ids.u, rng);
            params.get_mut(ids.b).slice_mut(s![.., h..2 * h]).fill(config.forget_bias);
        }
        params.init_uniform(fc_w, rng);
        Ok(Lstm {
            config,
            input_dim,
            params,
            layers,
            fc_w,
            fc_b,
        })
    }

    fn layer_forward(&self, ids: LayerIds, input: Array2<f64>, batch: usize, steps: usize) -> LayerCache {
        let h = self.config.hidden;
        let (w, u, b) = (self.params.get(ids.w), self.params.get(ids.u), self.params.get(ids.b));
        let mut gates = input.dot(&w);
        gates += &b;
        let rows = batch * steps;
        let mut c = Array2::zeros((rows, h));
        let mut tanh_c = Array2::zeros((rows, h));
        let mut hs = Array2::zeros((rows, h));
        for t in 0..steps {
            let cur = t * batch..(t + 1) * batch;
            if t > 0 {
                let prev = hs.slice(s![(t - 1) * batch..t * batch, ..]);
                let mut z = gates.slice_mut(s![cur.clone(), ..]);
                general_mat_mul(1.0, &prev, &u, 1.0, &mut z);
            }
            for r in cur {
                let mut g = gates.row_mut(r);
                let g = g.as_slice_mut().expect("contiguous row");
                for v in &mut g[..3 * h] {
                    *v = sigmoid(*v);
                }
                for v in &mut g[3 * h..] {
                    *v = v.tanh();
                }
                for k in 0..h {
                    let c_prev = if t > 0 { c[[r - batch, k]] } else { 0.0 };
                    let ct = g[h + k] * c_prev + g[k] * g[3 * h + k];
                    let tc = ct.tanh();
                    c[[r, k]] = ct;
                    tanh_c[[r, k]] = tc;
                    hs[[r, k]] = g[2 * h + k] * tc;
                }
            }
        }
        LayerCache {
            input,
            gates,
            c,
            tanh_c,
            h: hs,
        }
    }

    /// Accumulates the layer's parameter gradients and returns the gradient
    /// with respect to its input sequence.
    fn layer_backward(
        &self,
        ids: LayerIds,
        cache: &LayerCache,
        d_h: &Array2<f64>,
        batch: usize,
        steps: usize,
        grads: &mut ParamSet,
    ) -> Array2<f64> {
        let h = self.config.hidden;
        let u = self.params.get(ids.u);
        let rows = batch * steps;
        let mut dz = Array2::<f64>::zeros((rows, 4 * h));
        let mut dh_next = Array2::<f64>::zeros((batch, h));
        let mut dc_next = Array2::<f64>::zeros((batch, h));
        for t in (0..steps).rev() {
            for bi in 0..batch {
                let r = t * batch + bi;
                let g = cache.gates.row(r);
                for k in 0..h {
                    let (i, f, o, gg) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                    let tc = cache.tanh_c[[r, k]];
                    let c_prev = if t > 0 { cache.c[[r - batch, k]] } else { 0.0 };
                    let dh = d_h[[r, k]] + dh_next[[bi, k]];
                    let d_o = dh * tc;
                    let dc = dc_next[[bi, k]] + dh * o * (1.0 - tc * tc);
                    dz[[r, k]] = dc * gg * i * (1.0 - i);
                    dz[[r, h + k]] = dc * c_prev * f * (1.0 - f);
                    dz[[r, 2 * h + k]] = d_o * o * (1.0 - o);
                    dz[[r, 3 * h + k]] = dc * i * (1.0 - gg * gg);
                    dc_next[[bi, k]] = dc * f;
                }
            }
            let dz_t = dz.slice(s![t * batch..(t + 1) * batch, ..]);
            general_mat_mul(1.0, &dz_t, &u.t(), 0.0, &mut dh_next);
        }
        if steps > 1 {
            let h_prev = cache.h.slice(s![..(steps - 1) * batch, ..]);
            let dz_later = dz.slice(s![batch.., ..]);
            general_mat_mul(1.0, &h_prev.t(), &dz_later, 1.0, &mut grads.get_mut(ids.u));
        }
        general_mat_mul(1.0, &cache.input.t(), &dz, 1.0, &mut grads.get_mut(ids.w));
        grads.get_mut(ids.b).row_mut(0).scaled_add(1.0, &dz.sum_axis(Axis(0)));
        dz.dot(&self.params.get(ids.w).t())
    }
}

impl Network for Lstm {
    type Cache = LstmCache;

    fn layout(&self) -> Layout {
        Layout::TimeMajor
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

    fn forward(&self, x: ArrayView2<f64>, batch: usize) -> Result<(Vec<f64>, LstmCache), DeepError> {
        let steps = check_batch(x, batch, self.input_dim)?;
        let mut caches: Vec<LayerCache> = Vec::with_capacity(self.layers.len());
        for (l, ids) in self.layers.iter().enumerate() {
            let input = match caches.last() {
                None => x.to_owned(),
                Some(prev) => prev.h.clone(),
            };
            debug_assert!(l == 0 || input.ncols() == self.config.hidden);
            caches.push(self.layer_forward(*ids, input, batch, steps));
        }
        let last = caches.last().expect("at least one layer");
        let h_final = last.h.slice(s![(steps - 1) * batch.., ..]);
        let fc_b = self.params.get(self.fc_b)[[0, 0]];
        let y = h_final.dot(&self.params.get(self.fc_w)).column(0).mapv(|v| v + fc_b).to_vec();
        Ok((
            y,
            LstmCache {
                batch,
                steps,
                layers: caches,
            },
        ))
    }

    fn backward(&self, cache: &LstmCache, d_y: &[f64]) -> ParamSet {
        let (batch, steps) = (cache.batch, cache.steps);
        let mut grads = self.params.zeros_like();
        let d_y = ndarray::ArrayView2::from_shape((batch, 1), d_y).expect("one gradient per sample");
        let top = cache.layers.last().expect("at least one layer");
        let h_final = top.h.slice(s![(steps - 1) * batch.., ..]);
        general_mat_mul(1.0, &h_final.t(), &d_y, 0.0, &mut grads.get_mut(self.fc_w));
        grads.get_mut(self.fc_b)[[0, 0]] = d_y.sum();
        let mut d_h = Array2::zeros((batch * steps, self.config.hidden));
        d_h.slice_mut(s![(steps - 1) * batch.., ..])
            .assign(&d_y.dot(&self.params.get(self.fc_w).t()));
        for (ids, layer) in self.layers.iter().zip(&cache.layers).rev() {
            d_h = self.layer_backward(*ids, layer, &d_h, batch, steps, &mut grads);
        }
        grads
    }
}
