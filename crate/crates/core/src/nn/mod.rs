//! Stacked bidirectional-LSTM sequence model with exact reverse-mode
//! gradients.
//!
//! The stack is N Bi-LSTM layers (full sequences, swish on each layer's
//! concatenated output), a time-distributed dense stack with swish, and a
//! linear output dense applied at every step. Predictions are the final
//! `label_width` steps of the per-step outputs. All math is 64-bit and
//! deterministic: batches are processed in fixed-size chunks whose results
//! are reduced in order, so thread scheduling never changes a bit.

pub mod act;
mod lstm;
mod params;

pub use lstm::{backward_direction, forward_direction, DirectionCache};
pub use params::{BiLstmLayer, Dense, LstmDirection, ModelParams, TensorRef, GATES};

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, ArrayView3, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use act::{swish, swish_prime};

/// Batch slice processed per work unit; fixed so that results are
/// independent of the number of worker threads.
pub const PAR_CHUNK: usize = 16;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite gradient (training diverged)")]
    NonFiniteGradient,
    #[error("bad topology: {0}")]
    BadTopology(String),
}

/// Training losses. The forecasting loss is MAE; MSE is kept for
/// diagnostics and smooth-gradient checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Loss {
    Mae,
    Mse,
}

impl Loss {
    pub fn key(self) -> &'static str {
        match self {
            Loss::Mae => "mae",
            Loss::Mse => "mse",
        }
    }
}

impl std::str::FromStr for Loss {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mae" => Ok(Loss::Mae),
            "mse" => Ok(Loss::Mse),
            other => Err(format!("unknown loss {other:?} (expected mae|mse)")),
        }
    }
}

/// L1/L2 penalty strengths applied to every trainable parameter.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Regularization {
    pub l1: f64,
    pub l2: f64,
}

impl Regularization {
    pub const NONE: Regularization = Regularization { l1: 0.0, l2: 0.0 };
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization { l1: 1e-5, l2: 1e-5 }
    }
}

/// Architecture descriptor: everything needed to rebuild parameter shapes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Topology {
    pub feature_names: Vec<String>,
    pub target_names: Vec<String>,
    pub lstm_layers: usize,
    pub units: usize,
    pub bidirectional: bool,
    /// Widths of the time-distributed dense stack (swish), usually `[16]`.
    pub td_units: Vec<usize>,
    pub input_width: usize,
    pub label_width: usize,
}

impl Topology {
    /// The stack used throughout: 3 Bi-LSTM layers of 32 units per
    /// direction, one 16-unit time-distributed dense, 365-step windows.
    pub fn standard(feature_names: Vec<String>, target_names: Vec<String>) -> Topology {
        Topology {
            feature_names,
            target_names,
            lstm_layers: 3,
            units: 32,
            bidirectional: true,
            td_units: vec![16],
            input_width: 365,
            label_width: 365,
        }
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn target_count(&self) -> usize {
        self.target_names.len()
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if self.feature_names.is_empty() || self.target_names.is_empty() {
            return Err(NnError::BadTopology("need at least one feature and target".into()));
        }
        if self.lstm_layers > 0 && self.units == 0 {
            return Err(NnError::BadTopology("units must be >= 1".into()));
        }
        if self.input_width == 0 || self.label_width == 0 {
            return Err(NnError::BadTopology("window widths must be >= 1".into()));
        }
        if self.label_width > self.input_width {
            return Err(NnError::BadTopology(format!(
                "label_width {} exceeds input_width {}: the stack emits one output per input step",
                self.label_width, self.input_width
            )));
        }
        Ok(())
    }

    fn layer_widths(&self) -> Vec<(usize, usize)> {
        // (input, units) per lstm layer
        let dir_mult = if self.bidirectional { 2 } else { 1 };
        let mut widths = Vec::new();
        let mut cur = self.feature_count();
        for _ in 0..self.lstm_layers {
            widths.push((cur, self.units));
            cur = self.units * dir_mult;
        }
        widths
    }

    fn head_input_width(&self) -> usize {
        let dir_mult = if self.bidirectional { 2 } else { 1 };
        if self.lstm_layers > 0 {
            self.units * dir_mult
        } else {
            self.feature_count()
        }
    }
}

/// The model: topology, seed it was initialized from, and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmModel {
    pub topology: Topology,
    pub seed: u64,
    pub params: ModelParams,
}

impl BiLstmModel {
    /// Seeded initialization: Glorot-uniform input kernels, orthogonal
    /// recurrent kernels, forget-gate bias 1.
    pub fn init(topology: Topology, seed: u64) -> Result<BiLstmModel, NnError> {
        topology.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(topology.lstm_layers);
        for (input, units) in topology.layer_widths() {
            let fwd = LstmDirection::init(input, units, &mut rng);
            let bwd = topology
                .bidirectional
                .then(|| LstmDirection::init(input, units, &mut rng));
            layers.push(BiLstmLayer { fwd, bwd });
        }
        let mut td = Vec::new();
        let mut cur = topology.head_input_width();
        for &width in &topology.td_units {
            td.push(Dense::glorot(cur, width, &mut rng));
            cur = width;
        }
        let out = Dense::glorot(cur, topology.target_count(), &mut rng);
        Ok(BiLstmModel {
            topology,
            seed,
            params: ModelParams { layers, td, out },
        })
    }

    /// All-zero parameters (useful for fixtures and plateau tests).
    pub fn zeros(topology: Topology) -> Result<BiLstmModel, NnError> {
        let mut m = BiLstmModel::init(topology, 0)?;
        m.params.for_each_value_mut(|v| *v = 0.0);
        Ok(m)
    }

    /// Exact trainable-parameter count: 4·u·(in + u + 1) per LSTM
    /// direction plus in·out + out per dense.
    pub fn param_count(&self) -> usize {
        self.params.count()
    }

    fn check_features(&self, got: usize) -> Result<(), NnError> {
        if got != self.topology.feature_count() {
            return Err(NnError::ShapeMismatch(format!(
                "input has {got} feature columns, model expects {}",
                self.topology.feature_count()
            )));
        }
        Ok(())
    }

    /// Forward pass for one window (input_width × features). Works for any
    /// sequence length ≥ 1; predictions are the last
    /// `min(label_width, T)` steps.
    pub fn forward(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>, NnError> {
        let (t_len, f) = inputs.dim();
        if t_len == 0 {
            return Err(NnError::ShapeMismatch("empty input sequence".into()));
        }
        self.check_features(f)?;
        let mut batched = Array3::zeros((t_len, 1, f));
        batched.index_axis_mut(Axis(1), 0).assign(&inputs);
        let (preds, _) = self.forward_chunk(batched.view(), false)?;
        Ok(preds.index_axis(Axis(1), 0).to_owned())
    }

    /// Forward pass over a batch laid out (time, batch, features).
    /// Processed in [`PAR_CHUNK`] slices in parallel, reduced in order.
    pub fn forward_batch(&self, inputs: &Array3<f64>) -> Result<Array3<f64>, NnError> {
        let (t_len, batch, f) = inputs.dim();
        if t_len == 0 || batch == 0 {
            return Err(NnError::ShapeMismatch("empty batch".into()));
        }
        self.check_features(f)?;
        let chunks: Vec<std::ops::Range<usize>> = chunk_ranges(batch);
        let parts: Result<Vec<Array3<f64>>, NnError> = chunks
            .par_iter()
            .map(|r| {
                let view = inputs.slice(s![.., r.clone(), ..]);
                self.forward_chunk(view, false).map(|(p, _)| p)
            })
            .collect();
        let parts = parts?;
        let l = parts[0].dim().0;
        let k = parts[0].dim().2;
        let mut out = Array3::zeros((l, batch, k));
        for (r, part) in chunks.iter().zip(parts) {
            out.slice_mut(s![.., r.clone(), ..]).assign(&part);
        }
        Ok(out)
    }

    /// Mean loss over the batch plus the L1/L2 penalty, and the exact
    /// gradient of that objective for every parameter.
    pub fn gradients(
        &self,
        inputs: &Array3<f64>,
        labels: &Array3<f64>,
        loss: Loss,
        reg: Regularization,
    ) -> Result<(f64, ModelParams), NnError> {
        let (t_len, batch, f) = inputs.dim();
        let (l_len, l_batch, k) = labels.dim();
        self.check_features(f)?;
        if l_batch != batch || k != self.topology.target_count() {
            return Err(NnError::ShapeMismatch(format!(
                "labels are {l_len}x{l_batch}x{k}, expected batch {batch} and {} targets",
                self.topology.target_count()
            )));
        }
        let expect_l = self.topology.label_width.min(t_len);
        if l_len != expect_l {
            return Err(NnError::ShapeMismatch(format!(
                "labels cover {l_len} steps, model emits {expect_l}"
            )));
        }

        let chunks = chunk_ranges(batch);
        let parts: Result<Vec<(f64, ModelParams)>, NnError> = chunks
            .par_iter()
            .map(|r| {
                let x = inputs.slice(s![.., r.clone(), ..]);
                let y = labels.slice(s![.., r.clone(), ..]);
                self.backward_chunk(x, y, loss)
            })
            .collect();
        let parts = parts?;

        let mut loss_sum = 0.0;
        let mut grads = self.params.zeros_like();
        for (part_sum, part_grads) in parts {
            loss_sum += part_sum;
            grads.add_assign(&part_grads);
        }
        let count = (l_len * batch * k) as f64;
        grads.scale(1.0 / count);

        // penalty over every parameter; L1 subgradient at 0 is 0
        let mut penalty = 0.0;
        self.params.for_each_value(|v| penalty += reg.l1 * v.abs() + reg.l2 * v * v);
        let mut pflat = self.params.flatten();
        let mut gflat = grads.flatten();
        for (g, p) in gflat.iter_mut().zip(pflat.iter_mut()) {
            let sign = if *p == 0.0 { 0.0 } else { p.signum() };
            *g += reg.l1 * sign + 2.0 * reg.l2 * *p;
        }
        grads.assign_flat(&gflat);

        let objective = loss_sum / count + penalty;
        if !objective.is_finite() || !grads.all_finite() {
            return Err(NnError::NonFiniteGradient);
        }
        Ok((objective, grads))
    }

    /// Mean data loss over a batch (no penalty), using the forward path only.
    pub fn batch_loss(&self, inputs: &Array3<f64>, labels: &Array3<f64>, loss: Loss) -> Result<f64, NnError> {
        let preds = self.forward_batch(inputs)?;
        if preds.dim() != labels.dim() {
            return Err(NnError::ShapeMismatch(format!(
                "labels {:?} vs predictions {:?}",
                labels.dim(),
                preds.dim()
            )));
        }
        let mut sum = 0.0;
        for (p, y) in preds.iter().zip(labels.iter()) {
            let r = p - y;
            sum += match loss {
                Loss::Mae => r.abs(),
                Loss::Mse => r * r,
            };
        }
        Ok(sum / preds.len() as f64)
    }

    fn forward_chunk(
        &self,
        x: ArrayView3<f64>,
        want_cache: bool,
    ) -> Result<(Array3<f64>, Option<ForwardCache>), NnError> {
        let (t_len, batch, _) = x.dim();
        let mut seq = x.to_owned();
        let mut layer_caches = Vec::new();

        for layer in &self.params.layers {
            let (h_fwd, cache_fwd) = forward_direction(seq.view(), &layer.fwd, want_cache);
            let u = layer.fwd.units;
            let width = layer.output_width();
            let mut pre = Array3::zeros((t_len, batch, width));
            pre.slice_mut(s![.., .., 0..u]).assign(&h_fwd);
            let cache_bwd = match &layer.bwd {
                Some(bwd) => {
                    let rev_in = seq.slice(s![..;-1, .., ..]);
                    let (h_rev, cache) = forward_direction(rev_in, bwd, want_cache);
                    pre.slice_mut(s![.., .., u..2 * u])
                        .assign(&h_rev.slice(s![..;-1, .., ..]));
                    cache
                }
                None => None,
            };
            let out = pre.mapv(swish);
            if want_cache {
                layer_caches.push(LayerCache {
                    input: seq,
                    fwd: cache_fwd.unwrap(),
                    bwd: cache_bwd,
                    pre_act: pre,
                });
            }
            seq = out;
        }

        // dense head: one GEMM over all (step, batch) rows
        let head_in = self.topology.head_input_width();
        let mut flat = seq
            .into_shape_with_order((t_len * batch, head_in))
            .expect("sequence is contiguous");
        let mut dense_inputs = Vec::new();
        let mut dense_pre = Vec::new();
        for d in &self.params.td {
            let mut pre = flat.dot(&d.w);
            for mut row in pre.rows_mut() {
                row += &d.b;
            }
            let out = pre.mapv(swish);
            if want_cache {
                dense_inputs.push(flat);
                dense_pre.push(pre);
            }
            flat = out;
        }
        let mut y = flat.dot(&self.params.out.w);
        for mut row in y.rows_mut() {
            row += &self.params.out.b;
        }
        let k = self.topology.target_count();
        let y = y
            .into_shape_with_order((t_len, batch, k))
            .expect("head output is contiguous");

        let l = self.topology.label_width.min(t_len);
        let preds = y.slice(s![t_len - l.., .., ..]).to_owned();
        let cache = want_cache.then(|| ForwardCache {
            layers: layer_caches,
            dense_inputs,
            dense_pre,
            out_input: flat,
            t_len,
            batch,
        });
        Ok((preds, cache))
    }

    /// Returns (loss sum, gradient of the loss SUM) for one chunk.
    fn backward_chunk(
        &self,
        x: ArrayView3<f64>,
        labels: ArrayView3<f64>,
        loss: Loss,
    ) -> Result<(f64, ModelParams), NnError> {
        let (preds, cache) = self.forward_chunk(x, true)?;
        let cache = cache.unwrap();
        let (t_len, batch) = (cache.t_len, cache.batch);
        let (l_len, _, k) = preds.dim();

        let mut loss_sum = 0.0;
        let mut dpred = Array3::zeros(preds.raw_dim());
        for ((p, y), d) in preds.iter().zip(labels.iter()).zip(dpred.iter_mut()) {
            let r = p - y;
            match loss {
                Loss::Mae => {
                    loss_sum += r.abs();
                    *d = if r == 0.0 { 0.0 } else { r.signum() };
                }
                Loss::Mse => {
                    loss_sum += r * r;
                    *d = 2.0 * r;
                }
            }
        }

        // scatter prediction gradients into the full output sequence
        let mut dy = Array2::zeros((t_len * batch, k));
        {
            let mut dy3 = dy
                .view_mut()
                .into_shape_with_order((t_len, batch, k))
                .expect("contiguous");
            dy3.slice_mut(s![t_len - l_len.., .., ..]).assign(&dpred);
        }

        let mut grads = self.params.zeros_like();

        // output dense (linear)
        let mut gw_out = Array2::zeros(self.params.out.w.raw_dim());
        general_mat_mul(1.0, &cache.out_input.t(), &dy, 1.0, &mut gw_out);
        grads.out.w = gw_out;
        grads.out.b = dy.sum_axis(Axis(0));
        let mut dcur = dy.dot(&self.params.out.w.t());

        // time-distributed dense stack (swish), reversed
        for (idx, d) in self.params.td.iter().enumerate().rev() {
            let pre = &cache.dense_pre[idx];
            let input = &cache.dense_inputs[idx];
            let mut dpre = dcur;
            for (dv, pv) in dpre.iter_mut().zip(pre.iter()) {
                *dv *= swish_prime(*pv);
            }
            let mut gw = Array2::zeros(d.w.raw_dim());
            general_mat_mul(1.0, &input.t(), &dpre, 1.0, &mut gw);
            grads.td[idx].w = gw;
            grads.td[idx].b = dpre.sum_axis(Axis(0));
            dcur = dpre.dot(&d.w.t());
        }

        // recurrent stack, reversed
        let mut dseq = dcur
            .into_shape_with_order((t_len, batch, self.topology.head_input_width()))
            .expect("contiguous");
        for (idx, layer) in self.params.layers.iter().enumerate().rev() {
            let lc = &cache.layers[idx];
            let u = layer.fwd.units;
            // through the layer's swish output activation
            let mut dpre = dseq;
            for (dv, pv) in dpre.iter_mut().zip(lc.pre_act.iter()) {
                *dv *= swish_prime(*pv);
            }
            let d_fwd = dpre.slice(s![.., .., 0..u]).to_owned();
            let g_fwd = backward_direction(lc.input.view(), &layer.fwd, &lc.fwd, &d_fwd);
            grads.layers[idx].fwd.w = g_fwd.w;
            grads.layers[idx].fwd.u = g_fwd.u;
            grads.layers[idx].fwd.b = g_fwd.b;
            let mut dx = g_fwd.dx;
            if let (Some(bwd), Some(bwd_cache)) = (&layer.bwd, &lc.bwd) {
                let d_bwd = dpre.slice(s![..;-1, .., u..2 * u]).to_owned();
                let rev_in = lc.input.slice(s![..;-1, .., ..]);
                let g_bwd = backward_direction(rev_in, bwd, bwd_cache, &d_bwd);
                let gb = grads.layers[idx].bwd.as_mut().unwrap();
                gb.w = g_bwd.w;
                gb.u = g_bwd.u;
                gb.b = g_bwd.b;
                dx += &g_bwd.dx.slice(s![..;-1, .., ..]);
            }
            dseq = dx;
        }

        Ok((loss_sum, grads))
    }
}

struct LayerCache {
    input: Array3<f64>,
    fwd: DirectionCache,
    bwd: Option<DirectionCache>,
    pre_act: Array3<f64>,
}

struct ForwardCache {
    layers: Vec<LayerCache>,
    dense_inputs: Vec<Array2<f64>>,
    dense_pre: Vec<Array2<f64>>,
    out_input: Array2<f64>,
    t_len: usize,
    batch: usize,
}

fn chunk_ranges(batch: usize) -> Vec<std::ops::Range<usize>> {
    (0..batch)
        .step_by(PAR_CHUNK)
        .map(|s| s..(s + PAR_CHUNK).min(batch))
        .collect()
}

/// Single LSTM cell step on vectors: standard gate equations with sigmoid
/// gates and tanh candidate/output nonlinearities.
pub fn lstm_cell(
    x: ArrayView1<f64>,
    h_prev: ArrayView1<f64>,
    c_prev: ArrayView1<f64>,
    p: &LstmDirection,
) -> Result<(Array1<f64>, Array1<f64>), NnError> {
    let u = p.units;
    if x.len() != p.w.nrows() || h_prev.len() != u || c_prev.len() != u {
        return Err(NnError::ShapeMismatch(format!(
            "cell expects x:{} h:{u} c:{u}, got x:{} h:{} c:{}",
            p.w.nrows(),
            x.len(),
            h_prev.len(),
            c_prev.len()
        )));
    }
    let mut h = Array1::zeros(u);
    let mut c = Array1::zeros(u);
    for kx in 0..u {
        let mut z = [0.0f64; 4];
        for (gate, zv) in z.iter_mut().enumerate() {
            let col = gate * u + kx;
            let mut acc = p.b[col];
            for (a, xv) in x.iter().enumerate() {
                acc += xv * p.w[[a, col]];
            }
            for (b, hv) in h_prev.iter().enumerate() {
                acc += hv * p.u[[b, col]];
            }
            *zv = acc;
        }
        let gi = act::sigmoid(z[0]);
        let gf = act::sigmoid(z[1]);
        let gg = act::tanh(z[2]);
        let go = act::sigmoid(z[3]);
        c[kx] = gf * c_prev[kx] + gi * gg;
        h[kx] = go * act::tanh(c[kx]);
    }
    Ok((h, c))
}

/// One bidirectional layer over a single sequence (T × in):
/// output[t] = concat(h_fwd[t], h_bwd[t]), no activation.
pub fn bilstm_forward(seq: ArrayView2<f64>, layer: &BiLstmLayer) -> Result<Array2<f64>, NnError> {
    let (t_len, f) = seq.dim();
    if t_len == 0 {
        return Err(NnError::ShapeMismatch("empty sequence".into()));
    }
    if f != layer.fwd.w.nrows() {
        return Err(NnError::ShapeMismatch(format!(
            "sequence has {f} columns, layer expects {}",
            layer.fwd.w.nrows()
        )));
    }
    let mut x = Array3::zeros((t_len, 1, f));
    x.index_axis_mut(Axis(1), 0).assign(&seq);
    let u = layer.fwd.units;
    let mut out = Array2::zeros((t_len, layer.output_width()));
    let (h_fwd, _) = forward_direction(x.view(), &layer.fwd, false);
    out.slice_mut(s![.., 0..u])
        .assign(&h_fwd.index_axis(Axis(1), 0));
    if let Some(bwd) = &layer.bwd {
        let (h_rev, _) = forward_direction(x.slice(s![..;-1, .., ..]), bwd, false);
        out.slice_mut(s![.., u..2 * u])
            .assign(&h_rev.slice(s![..;-1, .., ..]).index_axis(Axis(1), 0));
    }
    Ok(out)
}
