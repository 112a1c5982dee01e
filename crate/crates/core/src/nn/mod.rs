//! Small fixed-architecture CNN used as the downstream classifier.
//!
//! `[conv3x3(pad 1) → ReLU → maxpool 2×2] × blocks → fc(hidden) → ReLU → fc(C)`
//!
//! The backward pass is hand-derived for exactly this stack. All parameters
//! live in one flat `f64` buffer whose order is given by [`ParamLayout`]:
//! for each block the conv weights `[out][in][3][3]` then the bias `[out]`,
//! followed by fc1 weights `[hidden][flat]`, fc1 bias, fc2 weights
//! `[C][hidden]` and fc2 bias. The flattened feature vector is the last
//! block's output in channel-major (CHW) order.

pub mod checkpoint;
pub mod eval;
pub mod train;

use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::Image;
use crate::error::{Error, Result};

pub use eval::{argmax, evaluate, evaluate_logits, EvalResult};
pub use train::{train, EpochRecord, TrainHyper, TrainOutcome};

pub const DEFAULT_HIDDEN: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Four blocks, 8 → 16 → 32 → 64 feature maps.
    FourBlock,
    /// Three blocks, 16 → 32 → 64 feature maps.
    ThreeBlock,
}

impl Variant {
    pub fn block_channels(self) -> Vec<usize> {
        match self {
            Variant::FourBlock => vec![8, 16, 32, 64],
            Variant::ThreeBlock => vec![16, 32, 64],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_height: usize,
    pub input_width: usize,
    pub input_channels: usize,
    pub block_channels: Vec<usize>,
    pub hidden: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    /// `(weights, bias)` per conv block.
    pub conv: Vec<(Range<usize>, Range<usize>)>,
    pub fc1_weights: Range<usize>,
    pub fc1_bias: Range<usize>,
    pub fc2_weights: Range<usize>,
    pub fc2_bias: Range<usize>,
    pub total: usize,
}

impl Architecture {
    pub fn new(
        input_dims: (usize, usize, usize),
        block_channels: Vec<usize>,
        hidden: usize,
        num_classes: usize,
    ) -> Result<Self> {
        let (h, w, c) = input_dims;
        if h == 0 || w == 0 || c == 0 {
            return Err(Error::Architecture("input dimensions must be positive".into()));
        }
        if block_channels.is_empty() || block_channels.contains(&0) {
            return Err(Error::Architecture("need at least one conv block with channels".into()));
        }
        if hidden == 0 || num_classes == 0 {
            return Err(Error::Architecture("hidden width and class count must be positive".into()));
        }
        let factor = 1usize << block_channels.len();
        if h % factor != 0 || w % factor != 0 {
            return Err(Error::Architecture(format!(
                "input {h}x{w} must be divisible by {factor} (2^{} pooling stages)",
                block_channels.len()
            )));
        }
        Ok(Self {
            input_height: h,
            input_width: w,
            input_channels: c,
            block_channels,
            hidden,
            num_classes,
        })
    }

    pub fn from_variant(
        input_dims: (usize, usize, usize),
        num_classes: usize,
        variant: Variant,
        hidden: usize,
    ) -> Result<Self> {
        Self::new(input_dims, variant.block_channels(), hidden, num_classes)
    }

    pub fn input_dims(&self) -> (usize, usize, usize) {
        (self.input_height, self.input_width, self.input_channels)
    }

    pub fn input_len(&self) -> usize {
        self.input_height * self.input_width * self.input_channels
    }

    /// Length of the flattened vector entering fc1.
    pub fn flat_len(&self) -> usize {
        let shrink = 1usize << self.block_channels.len();
        let last = *self.block_channels.last().unwrap();
        last * (self.input_height / shrink) * (self.input_width / shrink)
    }

    /// `Σ_b (9·c_{b-1}·c_b + c_b) + flat·hidden + hidden + hidden·C + C`
    /// with `c_{-1}` the input channel count.
    pub fn parameter_count(&self) -> usize {
        self.layout().total
    }

    pub fn layout(&self) -> ParamLayout {
        let mut offset = 0;
        let mut take = |n: usize| {
            let r = offset..offset + n;
            offset += n;
            r
        };
        let mut cin = self.input_channels;
        let mut conv = Vec::with_capacity(self.block_channels.len());
        for &cout in &self.block_channels {
            let w = take(9 * cin * cout);
            let b = take(cout);
            conv.push((w, b));
            cin = cout;
        }
        let flat = self.flat_len();
        let fc1_weights = take(flat * self.hidden);
        let fc1_bias = take(self.hidden);
        let fc2_weights = take(self.hidden * self.num_classes);
        let fc2_bias = take(self.num_classes);
        ParamLayout {
            conv,
            fc1_weights,
            fc1_bias,
            fc2_weights,
            fc2_bias,
            total: offset,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    arch: Architecture,
    layout: ParamLayout,
    params: Vec<f64>,
}

/// Activations retained by the forward pass for backpropagation.
struct Trace {
    block_inputs: Vec<Vec<f64>>,
    pre_activations: Vec<Vec<f64>>,
    pool_index: Vec<Vec<usize>>,
    flat: Vec<f64>,
    hidden_pre: Vec<f64>,
    hidden: Vec<f64>,
    logits: Vec<f64>,
}

/// Build a classifier from one of the two named variants with the default
/// hidden width.
pub fn build_classifier(
    input_dims: (usize, usize, usize),
    num_classes: usize,
    variant: Variant,
    seed: u64,
) -> Result<Classifier> {
    Classifier::new(
        Architecture::from_variant(input_dims, num_classes, variant, DEFAULT_HIDDEN)?,
        seed,
    )
}

/// Scale applied to the He-normal std of the final layer.
pub const OUTPUT_INIT_GAIN: f64 = 0.01;

impl Classifier {
    /// He-normal weights (`σ = √(2 / fan_in)`), zero biases, drawn from one
    /// seeded stream in parameter order. The output layer is scaled down by
    /// `OUTPUT_INIT_GAIN` so that the untrained model predicts near-uniform
    /// probabilities.
    pub fn new(arch: Architecture, seed: u64) -> Result<Self> {
        let layout = arch.layout();
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |range: &Range<usize>, fan_in: usize, gain: f64, params: &mut [f64]| {
            let std = gain * (2.0 / fan_in as f64).sqrt();
            let normal = Normal::new(0.0, std).expect("positive std");
            for p in &mut params[range.clone()] {
                *p = normal.sample(&mut rng);
            }
        };
        let mut cin = arch.input_channels;
        for (i, (w, _)) in layout.conv.iter().enumerate() {
            fill(w, 9 * cin, 1.0, &mut params);
            cin = arch.block_channels[i];
        }
        fill(&layout.fc1_weights, arch.flat_len(), 1.0, &mut params);
        fill(&layout.fc2_weights, arch.hidden, OUTPUT_INIT_GAIN, &mut params);
        Ok(Self {
            arch,
            layout,
            params,
        })
    }

    pub fn from_params(arch: Architecture, params: Vec<f64>) -> Result<Self> {
        let layout = arch.layout();
        if params.len() != layout.total {
            return Err(Error::Architecture(format!(
                "expected {} parameters, got {}",
                layout.total,
                params.len()
            )));
        }
        Ok(Self {
            arch,
            layout,
            params,
        })
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn num_classes(&self) -> usize {
        self.arch.num_classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.len()
    }

    fn check_image(&self, img: &Image) -> Result<()> {
        if img.dims() != self.arch.input_dims() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.input_len(),
                found: img.len(),
            });
        }
        Ok(())
    }

    fn check_raw(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.arch.input_len() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.input_len(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.arch.num_classes {
            return Err(Error::ClassIndex {
                index: class,
                classes: self.arch.num_classes,
            });
        }
        Ok(())
    }

    fn image_chw(&self, img: &Image) -> Vec<f64> {
        let (h, w, c) = img.dims();
        let px = img.pixels();
        let mut out = vec![0.0; px.len()];
        for (i, &v) in px.iter().enumerate() {
            let (pos, ch) = (i / c, i % c);
            out[ch * h * w + pos] = f64::from(v);
        }
        out
    }

    fn raw_chw(&self, x: &[f64]) -> Vec<f64> {
        let (h, w, c) = self.arch.input_dims();
        let mut out = vec![0.0; x.len()];
        for (i, &v) in x.iter().enumerate() {
            out[(i % c) * h * w + i / c] = v;
        }
        out
    }

    fn chw_to_hwc(&self, g: &[f64]) -> Vec<f64> {
        let (h, w, c) = self.arch.input_dims();
        let mut out = vec![0.0; g.len()];
        for (i, o) in out.iter_mut().enumerate() {
            *o = g[(i % c) * h * w + i / c];
        }
        out
    }

    fn run(&self, input: Vec<f64>) -> Trace {
        let (mut h, mut w, mut cin) = self.arch.input_dims();
        let blocks = self.arch.block_channels.len();
        let mut block_inputs = Vec::with_capacity(blocks);
        let mut pre_activations = Vec::with_capacity(blocks);
        let mut pool_index = Vec::with_capacity(blocks);
        let mut act = input;
        for (b, &cout) in self.arch.block_channels.iter().enumerate() {
            let (wr, br) = &self.layout.conv[b];
            let pre = conv3x3_forward(&act, cin, h, w, &self.params[wr.clone()], &self.params[br.clone()], cout);
            let (pooled, idx) = relu_maxpool(&pre, cout, h, w);
            block_inputs.push(act);
            pre_activations.push(pre);
            pool_index.push(idx);
            act = pooled;
            h /= 2;
            w /= 2;
            cin = cout;
        }
        let flat = act;
        let hidden_pre = affine(
            &self.params[self.layout.fc1_weights.clone()],
            &self.params[self.layout.fc1_bias.clone()],
            &flat,
        );
        let hidden: Vec<f64> = hidden_pre.iter().map(|&v| v.max(0.0)).collect();
        let logits = affine(
            &self.params[self.layout.fc2_weights.clone()],
            &self.params[self.layout.fc2_bias.clone()],
            &hidden,
        );
        Trace {
            block_inputs,
            pre_activations,
            pool_index,
            flat,
            hidden_pre,
            hidden,
            logits,
        }
    }

    /// Backpropagates `dlogits`, accumulating parameter gradients into
    /// `grad` (when given) and returning the CHW input gradient when asked.
    fn backward(
        &self,
        t: &Trace,
        dlogits: &[f64],
        mut grad: Option<&mut [f64]>,
        want_input: bool,
    ) -> Option<Vec<f64>> {
        let l = &self.layout;
        let p = &self.params;
        let hidden_n = self.arch.hidden;
        let flat_n = t.flat.len();

        // fc2
        let w2 = &p[l.fc2_weights.clone()];
        let mut dhidden = vec![0.0; hidden_n];
        for (o, &d) in dlogits.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            let row = &w2[o * hidden_n..(o + 1) * hidden_n];
            for (dh, &wv) in dhidden.iter_mut().zip(row) {
                *dh += wv * d;
            }
        }
        if let Some(g) = grad.as_deref_mut() {
            let gw = &mut g[l.fc2_weights.clone()];
            for (o, &d) in dlogits.iter().enumerate() {
                for (gv, &hv) in gw[o * hidden_n..(o + 1) * hidden_n].iter_mut().zip(&t.hidden) {
                    *gv += d * hv;
                }
            }
            for (gb, &d) in g[l.fc2_bias.clone()].iter_mut().zip(dlogits) {
                *gb += d;
            }
        }

        // ReLU then fc1
        for (dh, &pre) in dhidden.iter_mut().zip(&t.hidden_pre) {
            if pre <= 0.0 {
                *dh = 0.0;
            }
        }
        let w1 = &p[l.fc1_weights.clone()];
        let mut dact = vec![0.0; flat_n];
        for (j, &d) in dhidden.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            for (da, &wv) in dact.iter_mut().zip(&w1[j * flat_n..(j + 1) * flat_n]) {
                *da += wv * d;
            }
        }
        if let Some(g) = grad.as_deref_mut() {
            let gw = &mut g[l.fc1_weights.clone()];
            for (j, &d) in dhidden.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                for (gv, &fv) in gw[j * flat_n..(j + 1) * flat_n].iter_mut().zip(&t.flat) {
                    *gv += d * fv;
                }
            }
            for (gb, &d) in g[l.fc1_bias.clone()].iter_mut().zip(&dhidden) {
                *gb += d;
            }
        }

        // conv blocks, last to first
        let (h0, w0, c0) = self.arch.input_dims();
        for b in (0..self.arch.block_channels.len()).rev() {
            let shrink = 1usize << b;
            let (h, w) = (h0 / shrink, w0 / shrink);
            let cout = self.arch.block_channels[b];
            let cin = if b == 0 { c0 } else { self.arch.block_channels[b - 1] };
            let pre = &t.pre_activations[b];
            let mut dpre = vec![0.0; cout * h * w];
            for (&src, &d) in t.pool_index[b].iter().zip(&dact) {
                if pre[src] > 0.0 {
                    dpre[src] += d;
                }
            }
            let need_input = b > 0 || want_input;
            let (wr, br) = &l.conv[b];
            let mut din = if need_input { Some(vec![0.0; cin * h * w]) } else { None };
            let (gw, gb) = match grad.as_deref_mut() {
                Some(g) => {
                    let (lo, hi) = g.split_at_mut(br.start);
                    (Some(&mut lo[wr.clone()]), Some(&mut hi[..br.len()]))
                }
                None => (None, None),
            };
            conv3x3_backward(
                &t.block_inputs[b],
                cin,
                h,
                w,
                &p[wr.clone()],
                cout,
                &dpre,
                gw,
                gb,
                din.as_deref_mut(),
            );
            match din {
                Some(d) => dact = d,
                None => return None,
            }
        }
        Some(dact)
    }

    pub fn logits_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_raw(x)?;
        Ok(self.run(self.raw_chw(x)).logits)
    }

    pub fn forward(&self, img: &Image) -> Result<Vec<f64>> {
        self.check_image(img)?;
        Ok(self.run(self.image_chw(img)).logits)
    }

    pub fn forward_batch(&self, imgs: &[Image]) -> Result<Vec<Vec<f64>>> {
        imgs.iter().map(|im| self.forward(im)).collect()
    }

    pub fn predict(&self, img: &Image) -> Result<usize> {
        Ok(argmax(&self.forward(img)?))
    }

    /// `∂ logit[class] / ∂ x` for an interleaved (HWC) input vector.
    pub fn input_gradient_raw(&self, x: &[f64], class: usize) -> Result<Vec<f64>> {
        self.check_raw(x)?;
        self.check_class(class)?;
        let t = self.run(self.raw_chw(x));
        let mut d = vec![0.0; self.arch.num_classes];
        d[class] = 1.0;
        let g = self.backward(&t, &d, None, true).expect("input gradient requested");
        Ok(self.chw_to_hwc(&g))
    }

    /// Gradient of one logit with respect to the pixels, laid out like
    /// `img.pixels()`.
    pub fn gradient_wrt_input(&self, img: &Image, class: usize) -> Result<Vec<f64>> {
        self.check_image(img)?;
        self.input_gradient_raw(&img.to_f64(), class)
    }

    /// Logits plus the input gradient of every logit, sharing one forward
    /// pass.
    pub fn logits_and_input_gradients(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        self.check_raw(x)?;
        let t = self.run(self.raw_chw(x));
        let grads = (0..self.arch.num_classes)
            .map(|c| {
                let mut d = vec![0.0; self.arch.num_classes];
                d[c] = 1.0;
                let g = self.backward(&t, &d, None, true).expect("input gradient requested");
                self.chw_to_hwc(&g)
            })
            .collect();
        Ok((t.logits.clone(), grads))
    }

    /// Cross-entropy of one sample and its parameter gradient.
    pub fn loss_and_gradient_raw(&self, x: &[f64], label: usize) -> Result<(f64, Vec<f64>)> {
        self.check_raw(x)?;
        self.check_class(label)?;
        let mut grad = vec![0.0; self.params.len()];
        let loss = self.accumulate_gradient(self.raw_chw(x), label, &mut grad);
        Ok((loss, grad))
    }

    pub fn loss_raw(&self, x: &[f64], label: usize) -> Result<f64> {
        self.check_raw(x)?;
        self.check_class(label)?;
        Ok(cross_entropy(&self.run(self.raw_chw(x)).logits, label).0)
    }

    pub(crate) fn loss_image(&self, img: &Image, label: usize) -> f64 {
        cross_entropy(&self.run(self.image_chw(img)).logits, label).0
    }

    pub(crate) fn accumulate_image_gradient(&self, img: &Image, label: usize, grad: &mut [f64]) -> f64 {
        self.accumulate_gradient(self.image_chw(img), label, grad)
    }

    fn accumulate_gradient(&self, chw: Vec<f64>, label: usize, grad: &mut [f64]) -> f64 {
        let t = self.run(chw);
        let (loss, dlogits) = cross_entropy(&t.logits, label);
        self.backward(&t, &dlogits, Some(grad), false);
        loss
    }
}

/// Numerically stable softmax cross-entropy and its logit gradient.
pub fn cross_entropy(logits: &[f64], label: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let loss = sum.ln() + max - logits[label];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
    grad[label] -= 1.0;
    (loss, grad)
}

fn affine(weights: &[f64], bias: &[f64], x: &[f64]) -> Vec<f64> {
    let n = x.len();
    bias.iter()
        .enumerate()
        .map(|(o, &b)| b + weights[o * n..(o + 1) * n].iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
        .collect()
}

/// Valid index ranges `(out_lo, out_hi)` along one axis for kernel tap `k`
/// (offset `k - 1`) with zero padding of one.
#[inline]
fn tap_range(k: usize, n: usize) -> (usize, usize) {
    match k {
        0 => (1, n),
        1 => (0, n),
        _ => (0, n.saturating_sub(1)),
    }
}

fn conv3x3_forward(
    input: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    bias: &[f64],
    cout: usize,
) -> Vec<f64> {
    let hw = h * w;
    let mut out = vec![0.0; cout * hw];
    for co in 0..cout {
        let o = &mut out[co * hw..(co + 1) * hw];
        o.fill(bias[co]);
        for ci in 0..cin {
            let inp = &input[ci * hw..(ci + 1) * hw];
            for ky in 0..3 {
                let (y_lo, y_hi) = tap_range(ky, h);
                for kx in 0..3 {
                    let (x_lo, x_hi) = tap_range(kx, w);
                    if y_lo >= y_hi || x_lo >= x_hi {
                        continue;
                    }
                    let wv = weight[((co * cin + ci) * 3 + ky) * 3 + kx];
                    for y in y_lo..y_hi {
                        let sy = y + ky - 1;
                        let orow = &mut o[y * w + x_lo..y * w + x_hi];
                        let irow = &inp[sy * w + x_lo + kx - 1..sy * w + x_hi + kx - 1];
                        for (a, &b) in orow.iter_mut().zip(irow) {
                            *a += wv * b;
                        }
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv3x3_backward(
    input: &[f64],
    cin: usize,
    h: usize,
    w: usize,
    weight: &[f64],
    cout: usize,
    dout: &[f64],
    mut gw: Option<&mut [f64]>,
    mut gb: Option<&mut [f64]>,
    mut din: Option<&mut [f64]>,
) {
    let hw = h * w;
    for co in 0..cout {
        let d = &dout[co * hw..(co + 1) * hw];
        if d.iter().all(|&v| v == 0.0) {
            continue;
        }
        if let Some(gb) = gb.as_deref_mut() {
            gb[co] += d.iter().sum::<f64>();
        }
        for ci in 0..cin {
            let inp = &input[ci * hw..(ci + 1) * hw];
            for ky in 0..3 {
                let (y_lo, y_hi) = tap_range(ky, h);
                for kx in 0..3 {
                    let (x_lo, x_hi) = tap_range(kx, w);
                    if y_lo >= y_hi || x_lo >= x_hi {
                        continue;
                    }
                    let widx = ((co * cin + ci) * 3 + ky) * 3 + kx;
                    if let Some(gw) = gw.as_deref_mut() {
                        let mut acc = 0.0;
                        for y in y_lo..y_hi {
                            let sy = y + ky - 1;
                            let drow = &d[y * w + x_lo..y * w + x_hi];
                            let irow = &inp[sy * w + x_lo + kx - 1..sy * w + x_hi + kx - 1];
                            acc += drow.iter().zip(irow).map(|(a, b)| a * b).sum::<f64>();
                        }
                        gw[widx] += acc;
                    }
                    if let Some(din) = din.as_deref_mut() {
                        let wv = weight[widx];
                        let dplane = &mut din[ci * hw..(ci + 1) * hw];
                        for y in y_lo..y_hi {
                            let sy = y + ky - 1;
                            let drow = &d[y * w + x_lo..y * w + x_hi];
                            let irow = &mut dplane[sy * w + x_lo + kx - 1..sy * w + x_hi + kx - 1];
                            for (a, &b) in irow.iter_mut().zip(drow) {
                                *a += wv * b;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// ReLU followed by 2×2 max pooling. Returns the pooled map and, for every
/// pooled cell, the index of the winning pre-activation (first maximum in
/// row-major window order).
fn relu_maxpool(pre: &[f64], c: usize, h: usize, w: usize) -> (Vec<f64>, Vec<usize>) {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut idx = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for y in 0..oh {
            for x in 0..ow {
                let mut best_i = base + 2 * y * w + 2 * x;
                let mut best = pre[best_i].max(0.0);
                for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                    let i = base + (2 * y + dy) * w + 2 * x + dx;
                    let v = pre[i].max(0.0);
                    if v > best {
                        best = v;
                        best_i = i;
                    }
                }
                out.push(best);
                idx.push(best_i);
            }
        }
    }
    (out, idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(h: usize, w: usize, c: usize, seed: u32) -> Image {
        let mut s = seed.wrapping_mul(747_796_405).wrapping_add(1);
        Image::from_fn(h, w, c, |_, _, _| {
            s = s.wrapping_mul(1_103_515_245).wrapping_add(12345);
            ((s >> 8) % 1000) as f32 / 999.0
        })
        .unwrap()
    }

    #[test]
    fn four_block_shape_and_count() {
        let m = build_classifier((32, 32, 1), 2, Variant::FourBlock, 0).unwrap();
        assert_eq!(m.forward(&img(32, 32, 1, 1)).unwrap().len(), 2);
        let a = m.architecture();
        assert_eq!(a.flat_len(), 64 * 2 * 2);
        let expected = (9 * 8 + 8) + (9 * 8 * 16 + 16) + (9 * 16 * 32 + 32) + (9 * 32 * 64 + 64)
            + 256 * 128 + 128 + 128 * 2 + 2;
        assert_eq!(m.parameter_count(), expected);
    }

    #[test]
    fn init_is_seeded() {
        let a = build_classifier((16, 16, 3), 4, Variant::FourBlock, 9).unwrap();
        let b = build_classifier((16, 16, 3), 4, Variant::FourBlock, 9).unwrap();
        let c = build_classifier((16, 16, 3), 4, Variant::FourBlock, 10).unwrap();
        assert_eq!(a.params(), b.params());
        assert_ne!(a.params(), c.params());
        let l = a.layout();
        assert!(a.params()[l.fc2_bias.clone()].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn indivisible_input_rejected() {
        let err = build_classifier((30, 30, 1), 2, Variant::FourBlock, 0).unwrap_err();
        assert!(err.to_string().contains("divisible by 16"), "{err}");
        assert!(build_classifier((8, 8, 1), 2, Variant::ThreeBlock, 0).is_ok());
    }

    #[test]
    fn zero_model_gives_zero_logits() {
        let mut m = build_classifier((8, 8, 1), 3, Variant::ThreeBlock, 0).unwrap();
        m.params_mut().fill(0.0);
        assert_eq!(m.forward(&img(8, 8, 1, 2)).unwrap(), vec![0.0; 3]);
        let (loss, _) = cross_entropy(&[0.0; 3], 1);
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn batch_matches_single() {
        let m = build_classifier((8, 8, 3), 2, Variant::ThreeBlock, 4).unwrap();
        let xs: Vec<Image> = (0..4).map(|s| img(8, 8, 3, s)).collect();
        let batch = m.forward_batch(&xs).unwrap();
        for (x, b) in xs.iter().zip(&batch) {
            assert_eq!(&m.forward(x).unwrap(), b);
        }
    }

    #[test]
    fn doubling_last_layer_doubles_logits() {
        let m = build_classifier((8, 8, 1), 3, Variant::ThreeBlock, 5).unwrap();
        let x = img(8, 8, 1, 3);
        let mut m2 = m.clone();
        let r = m2.layout().fc2_weights.clone();
        for p in &mut m2.params_mut()[r] {
            *p *= 2.0;
        }
        let a = m.forward(&x).unwrap();
        let b = m2.forward(&x).unwrap();
        for (u, v) in a.iter().zip(&b) {
            assert!((2.0 * u - v).abs() <= 1e-12 * u.abs().max(1.0));
        }
        let ga = m.gradient_wrt_input(&x, 1).unwrap();
        let gb = m2.gradient_wrt_input(&x, 1).unwrap();
        for (u, v) in ga.iter().zip(&gb) {
            assert!((2.0 * u - v).abs() <= 1e-12 * u.abs().max(1e-6));
        }
    }

    #[test]
    fn dead_relu_gives_zero_gradient() {
        let mut m = build_classifier((8, 8, 1), 2, Variant::ThreeBlock, 6).unwrap();
        // Push every fc1 pre-activation negative: the hidden layer is dead.
        let l = m.layout().clone();
        m.params_mut()[l.fc1_weights.clone()].fill(0.0);
        m.params_mut()[l.fc1_bias.clone()].fill(-1.0);
        let g = m.gradient_wrt_input(&img(8, 8, 1, 1), 0).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn shape_and_class_errors() {
        let m = build_classifier((8, 8, 1), 2, Variant::ThreeBlock, 0).unwrap();
        assert!(m.forward(&img(16, 16, 1, 0)).is_err());
        assert!(matches!(
            m.gradient_wrt_input(&img(8, 8, 1, 0), 2),
            Err(Error::ClassIndex { index: 2, classes: 2 })
        ));
    }

    #[test]
    fn input_gradient_matches_finite_difference_spot_check() {
        let m = build_classifier((8, 8, 2 + 1), 3, Variant::ThreeBlock, 11).unwrap();
        let x = img(8, 8, 3, 4).to_f64();
        let g = m.input_gradient_raw(&x, 2).unwrap();
        let h = 1e-6;
        for i in [0, 17, 100, 191] {
            let mut p = x.clone();
            p[i] += h;
            let mut q = x.clone();
            q[i] -= h;
            let fd = (m.logits_raw(&p).unwrap()[2] - m.logits_raw(&q).unwrap()[2]) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-4 * fd.abs().max(g[i].abs()).max(1e-4), "{i}: {fd} vs {}", g[i]);
        }
    }
}
