use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::NnError;
use crate::rng::CounterRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Tanh,
}

/// Fully connected network with tanh hidden layers.
///
/// Parameters live in one flat vector. Layer `l` occupies
/// `w[in][out]` (input-major) followed by `b[out]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    output: Activation,
    params: Vec<f64>,
}

/// Activations of a batched forward pass, kept for backpropagation.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    pub batch: usize,
    /// `acts[0]` is the input; `acts[l + 1]` the output of layer `l`.
    pub acts: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("non-empty cache")
    }
}

pub fn param_count(widths: &[usize]) -> usize {
    widths.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

/// `c[n×m] += a[n×k] · b[k×m]`, row-major.
///
/// Every output accumulates its `k` products in ascending order, so the
/// result does not depend on `n` or on the tiling.
pub fn gemm_acc(c: &mut [f64], a: &[f64], b: &[f64], n: usize, k: usize, m: usize) {
    const R: usize = 4;
    const C: usize = 8;
    debug_assert!(c.len() == n * m && a.len() == n * k && b.len() == k * m);
    if m == 1 {
        for (r, cr) in c.iter_mut().enumerate() {
            let ar = &a[r * k..(r + 1) * k];
            let mut s = *cr;
            for (x, y) in ar.iter().zip(b) {
                s += x * y;
            }
            *cr = s;
        }
        return;
    }
    let mut i = 0;
    while i + R <= n {
        let rows: [&[f64]; R] = core::array::from_fn(|r| &a[(i + r) * k..(i + r + 1) * k]);
        let mut j = 0;
        while j + C <= m {
            let mut acc = [[0.0f64; C]; R];
            for r in 0..R {
                acc[r].copy_from_slice(&c[(i + r) * m + j..(i + r) * m + j + C]);
            }
            for p in 0..k {
                let bv: &[f64; C] = b[p * m + j..p * m + j + C].try_into().expect("tile");
                for r in 0..R {
                    let av = rows[r][p];
                    for q in 0..C {
                        acc[r][q] += av * bv[q];
                    }
                }
            }
            for r in 0..R {
                c[(i + r) * m + j..(i + r) * m + j + C].copy_from_slice(&acc[r]);
            }
            j += C;
        }
        if j < m {
            for r in 0..R {
                gemm_row(&mut c[(i + r) * m..(i + r + 1) * m], rows[r], b, m, j);
            }
        }
        i += R;
    }
    for r in i..n {
        gemm_row(&mut c[r * m..(r + 1) * m], &a[r * k..(r + 1) * k], b, m, 0);
    }
}

fn gemm_row(c: &mut [f64], a: &[f64], b: &[f64], m: usize, from: usize) {
    for (p, &av) in a.iter().enumerate() {
        let br = &b[p * m + from..(p + 1) * m];
        for (cq, bq) in c[from..].iter_mut().zip(br) {
            *cq += av * bq;
        }
    }
}

/// In-place `tanh` through a branch-free polynomial `exp`, so the loop
/// vectorizes. Absolute error stays below 1e-15.
pub fn tanh_in_place(v: &mut [f64]) {
    let mut chunks = v.chunks_exact_mut(8);
    for c in &mut chunks {
        let c: &mut [f64; 8] = c.try_into().expect("chunk of 8");
        for x in c.iter_mut() {
            *x = tanh_poly(*x);
        }
    }
    for x in chunks.into_remainder() {
        *x = tanh_poly(*x);
    }
}

#[inline(always)]
fn tanh_poly(x: f64) -> f64 {
    const LOG2E: f64 = core::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const SHIFT: f64 = 6_755_399_441_055_744.0;
    let y = 2.0 * x.clamp(-20.0, 20.0);
    let t = y * LOG2E + SHIFT;
    let k = t - SHIFT;
    let r = (y - k * LN2_HI) - k * LN2_LO;
    let mut p = 1.0 / 6_227_020_800.0;
    p = p * r + 1.0 / 479_001_600.0;
    p = p * r + 1.0 / 39_916_800.0;
    p = p * r + 1.0 / 3_628_800.0;
    p = p * r + 1.0 / 362_880.0;
    p = p * r + 1.0 / 40_320.0;
    p = p * r + 1.0 / 5_040.0;
    p = p * r + 1.0 / 720.0;
    p = p * r + 1.0 / 120.0;
    p = p * r + 1.0 / 24.0;
    p = p * r + 1.0 / 6.0;
    p = p * r + 0.5;
    p = p * r + 1.0;
    p = p * r + 1.0;
    let e = p * f64::from_bits(t.to_bits().wrapping_add(1023) << 52);
    (e - 1.0) / (e + 1.0)
}

fn transpose(x: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = x[r * cols + c];
        }
    }
    t
}

impl Mlp {
    pub fn zeros(widths: &[usize], output: Activation) -> Self {
        assert!(widths.len() >= 2 && widths.iter().all(|&w| w > 0), "need at least two positive widths");
        Mlp { widths: widths.to_vec(), output, params: vec![0.0; param_count(widths)] }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(widths: &[usize], output: Activation, rng: &mut CounterRng) -> Self {
        let mut net = Mlp::zeros(widths, output);
        let mut off = 0;
        for w in widths.windows(2) {
            let (fi, fo) = (w[0], w[1]);
            let limit = libm::sqrt(6.0 / (fi + fo) as f64);
            for p in &mut net.params[off..off + fi * fo] {
                *p = rng.uniform_range(-limit, limit);
            }
            off += fi * fo + fo;
        }
        net
    }

    pub fn from_params(widths: &[usize], output: Activation, params: Vec<f64>) -> Result<Self, NnError> {
        let expected = param_count(widths);
        if params.len() != expected || widths.len() < 2 || widths.contains(&0) {
            return Err(NnError::Dimension { expected, found: params.len() });
        }
        Ok(Mlp { widths: widths.to_vec(), output, params })
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("widths")
    }

    pub fn output_activation(&self) -> Activation {
        self.output
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    fn activation(&self, layer: usize) -> Activation {
        if layer + 1 == self.layers() {
            self.output
        } else {
            Activation::Tanh
        }
    }

    /// Forward pass over `batch` row-major inputs.
    pub fn forward_batch(&self, input: &[f64], batch: usize) -> Result<ForwardCache, NnError> {
        let d = self.input_dim();
        if input.len() != d * batch {
            return Err(NnError::Dimension { expected: d * batch, found: input.len() });
        }
        let mut acts = Vec::with_capacity(self.widths.len());
        acts.push(input.to_vec());
        let mut off = 0;
        for l in 0..self.layers() {
            let (fi, fo) = (self.widths[l], self.widths[l + 1]);
            let w = &self.params[off..off + fi * fo];
            let b = &self.params[off + fi * fo..off + fi * fo + fo];
            let x = &acts[l];
            let mut y = vec![0.0; batch * fo];
            for n in 0..batch {
                y[n * fo..(n + 1) * fo].copy_from_slice(b);
            }
            gemm_acc(&mut y, x, w, batch, fi, fo);
            if self.activation(l) == Activation::Tanh {
                tanh_in_place(&mut y);
            }
            acts.push(y);
            off += fi * fo + fo;
        }
        Ok(ForwardCache { batch, acts })
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>, NnError> {
        let mut cache = self.forward_batch(input, 1)?;
        Ok(cache.acts.pop().expect("output"))
    }

    /// Backpropagates `upstream` (d loss / d output, row-major) through a cached pass.
    ///
    /// Parameter gradients are accumulated into `grad`. The input gradient is
    /// returned when `input_grad` is set.
    pub fn backward_batch(
        &self,
        cache: &ForwardCache,
        upstream: &[f64],
        grad: &mut [f64],
        input_grad: bool,
    ) -> Result<Option<Vec<f64>>, NnError> {
        let batch = cache.batch;
        let out = self.output_dim();
        if upstream.len() != out * batch {
            return Err(NnError::Dimension { expected: out * batch, found: upstream.len() });
        }
        if grad.len() != self.params.len() {
            return Err(NnError::Dimension { expected: self.params.len(), found: grad.len() });
        }
        let mut offsets = Vec::with_capacity(self.layers());
        let mut off = 0;
        for w in self.widths.windows(2) {
            offsets.push(off);
            off += w[0] * w[1] + w[1];
        }
        let mut delta = upstream.to_vec();
        for l in (0..self.layers()).rev() {
            let (fi, fo) = (self.widths[l], self.widths[l + 1]);
            if self.activation(l) == Activation::Tanh {
                for (d, y) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                    *d *= 1.0 - y * y;
                }
            }
            let off = offsets[l];
            let x = &cache.acts[l];
            {
                let (gw, gb) = grad[off..off + fi * fo + fo].split_at_mut(fi * fo);
                for n in 0..batch {
                    for (g, d) in gb.iter_mut().zip(&delta[n * fo..(n + 1) * fo]) {
                        *g += d;
                    }
                }
                let xt = transpose(x, batch, fi);
                gemm_acc(gw, &xt, &delta, fi, batch, fo);
            }
            if l == 0 && !input_grad {
                return Ok(None);
            }
            let wt = transpose(&self.params[off..off + fi * fo], fi, fo);
            let mut prev = vec![0.0; batch * fi];
            gemm_acc(&mut prev, &delta, &wt, batch, fo, fi);
            delta = prev;
        }
        Ok(Some(delta))
    }

    /// Single-sample gradients: `(d loss / d params, d loss / d input)`.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<(Vec<f64>, Vec<f64>), NnError> {
        let cache = self.forward_batch(input, 1)?;
        let mut g = vec![0.0; self.params.len()];
        let gi = self.backward_batch(&cache, upstream, &mut g, true)?.expect("input gradient requested");
        Ok((g, gi))
    }

    /// `self ← (1 − tau)·self + tau·online`.
    pub fn polyak_from(&mut self, online: &Mlp, tau: f64) {
        debug_assert_eq!(self.widths, online.widths);
        for (t, o) in self.params.iter_mut().zip(&online.params) {
            *t += tau * (o - *t);
        }
    }
}
