//! Spectrogram-patch CNN.
//!
//! Inputs are 94 × 50 patches (0–1469 Hz × 1 s) of an 8 kHz log
//! spectrogram (1024-point DFT, 40 ms Hamming window, 20 ms hop), with each
//! frequency band normalized by training-set statistics. The reference
//! network is
//!
//! ```text
//! 94×50 → conv 10@7×7 → 10@88×44 → avg-pool 2×2 → 10@44×22
//!       → conv 10@3×3 → 10@42×20 → avg-pool 2×2 → 10@21×10
//!       → 2100 → 300 sigmoid → 2 softmax
//! ```
//!
//! Training runs in two stages: the convolutional stack is first trained
//! with the pooled maps wired straight into a softmax, then frozen while a
//! 300-unit perceptron head is trained on the 2100-d pooled features.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dsp::LogSpectrogram;
use crate::error::{Error, Result};
use crate::mlp::{mlp_train, require_both_classes, sigmoid, softmax2, Dataset, Dense, Mlp, MlpHyper, TrainingMeta};
use crate::Class;

pub const PATCH_ROWS: usize = 94;
pub const PATCH_COLS: usize = 50;
pub const PATCH_SAMPLE_RATE: u32 = 8000;
pub const PATCH_N_DFT: usize = 1024;
pub const PATCH_WIN_LEN: usize = 320;
pub const PATCH_HOP_LEN: usize = 160;

/// Where a patch came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PatchOrigin {
    pub concert: u32,
    pub start_s: f64,
}

/// Row-major `rows × cols` patch: rows are frequency bins, columns frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramPatch {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    pub origin: PatchOrigin,
}

impl SpectrogramPatch {
    pub fn new(rows: usize, cols: usize, values: Vec<f64>, origin: PatchOrigin) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::invalid(alloc::format!(
                "patch {rows}×{cols} needs {} values, got {}",
                rows * cols,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("patch values must be finite"));
        }
        Ok(SpectrogramPatch {
            rows,
            cols,
            values,
            origin,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.cols + col]
    }
}

/// Per-band mean and standard deviation.
#[derive(Debug, Clone, PartialEq)]
pub struct BandStats {
    mean: Vec<f64>,
    std: Vec<f64>,
}

pub const BAND_VARIANCE_FLOOR: f64 = 1e-12;

impl BandStats {
    pub fn from_parts(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() || mean.is_empty() {
            return Err(Error::invalid("band statistics need equal non-empty mean/std vectors"));
        }
        if mean.iter().any(|m| !m.is_finite()) || std.iter().any(|s| !(*s > 0.0) || !s.is_finite()) {
            return Err(Error::invalid("band means must be finite and deviations positive"));
        }
        Ok(BandStats { mean, std })
    }

    /// Statistics over every column of every patch, with a variance floor.
    pub fn estimate(patches: &[SpectrogramPatch]) -> Result<Self> {
        let first = patches.first().ok_or_else(|| Error::empty("no patches for band statistics"))?;
        let rows = first.rows();
        let mut sum = vec![0.0; rows];
        let mut count = 0usize;
        for p in patches {
            if p.rows() != rows {
                return Err(Error::invalid("patches differ in band count"));
            }
            for (r, s) in sum.iter_mut().enumerate() {
                *s += p.values[r * p.cols..(r + 1) * p.cols].iter().sum::<f64>();
            }
            count += p.cols();
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / count as f64).collect();
        let mut var = vec![0.0; rows];
        for p in patches {
            for (r, v) in var.iter_mut().enumerate() {
                *v += p.values[r * p.cols..(r + 1) * p.cols]
                    .iter()
                    .map(|x| (x - mean[r]) * (x - mean[r]))
                    .sum::<f64>();
            }
        }
        let std = var
            .iter()
            .map(|v| libm::sqrt((v / count as f64).max(BAND_VARIANCE_FLOOR)))
            .collect();
        Ok(BandStats { mean, std })
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> &[f64] {
        &self.std
    }

    pub fn bands(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, patch: &SpectrogramPatch) -> Result<SpectrogramPatch> {
        if patch.rows() != self.bands() {
            return Err(Error::invalid(alloc::format!(
                "{} band statistics for a {}-row patch",
                self.bands(),
                patch.rows()
            )));
        }
        let mut out = patch.clone();
        for r in 0..patch.rows {
            let (m, s) = (self.mean[r], self.std[r]);
            out.values[r * patch.cols..(r + 1) * patch.cols]
                .iter_mut()
                .for_each(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }
}

fn check_patch_spectrogram(spec: &LogSpectrogram) -> Result<()> {
    let ok = spec.sample_rate() == PATCH_SAMPLE_RATE
        && spec.n_dft() == PATCH_N_DFT
        && spec.win_len() == PATCH_WIN_LEN
        && spec.hop_len() == PATCH_HOP_LEN;
    if !ok {
        return Err(Error::invalid(alloc::format!(
            "patches need an {PATCH_SAMPLE_RATE} Hz / {PATCH_N_DFT}-point / 40 ms / 20 ms spectrogram, got {} Hz / {} / {} / {} samples",
            spec.sample_rate(),
            spec.n_dft(),
            spec.win_len(),
            spec.hop_len()
        )));
    }
    Ok(())
}

/// Unnormalized 1 s patches of the first 94 bins; a trailing partial
/// chunk is dropped.
pub fn raw_patches(spec: &LogSpectrogram, concert: u32) -> Result<Vec<SpectrogramPatch>> {
    check_patch_spectrogram(spec)?;
    let n = spec.n_frames() / PATCH_COLS;
    (0..n)
        .map(|j| {
            let mut values = vec![0.0; PATCH_ROWS * PATCH_COLS];
            for c in 0..PATCH_COLS {
                let frame = spec.frame(j * PATCH_COLS + c);
                for r in 0..PATCH_ROWS {
                    values[r * PATCH_COLS + c] = frame[r];
                }
            }
            SpectrogramPatch::new(
                PATCH_ROWS,
                PATCH_COLS,
                values,
                PatchOrigin {
                    concert,
                    start_s: j as f64,
                },
            )
        })
        .collect()
}

/// Band-normalized patches. Statistics are estimated from these patches
/// when none are given; the statistics used are returned either way.
pub fn make_patches(
    spec: &LogSpectrogram,
    band_stats: Option<&BandStats>,
    concert: u32,
) -> Result<(Vec<SpectrogramPatch>, BandStats)> {
    let raw = raw_patches(spec, concert)?;
    let stats = match band_stats {
        Some(s) if s.bands() != PATCH_ROWS => {
            return Err(Error::invalid(alloc::format!("band statistics need {PATCH_ROWS} entries")))
        }
        Some(s) => s.clone(),
        None => BandStats::estimate(&raw)?,
    };
    let patches = raw.iter().map(|p| stats.normalize(p)).collect::<Result<Vec<_>>>()?;
    Ok((patches, stats))
}

/// Non-linearity after each convolution.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Activation {
    Sigmoid,
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => libm::tanh(x),
            Activation::Relu => x.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Valid 2-d convolution (cross-correlation) with dense channel
/// connectivity. Kernels are `[out][in][k][k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    in_ch: usize,
    out_ch: usize,
    k: usize,
    kernels: Vec<f64>,
    bias: Vec<f64>,
}

impl ConvLayer {
    pub fn from_parts(in_ch: usize, out_ch: usize, k: usize, kernels: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if in_ch == 0 || out_ch == 0 || k == 0 {
            return Err(Error::invalid("conv layer dimensions must be positive"));
        }
        if kernels.len() != out_ch * in_ch * k * k || bias.len() != out_ch {
            return Err(Error::invalid(alloc::format!(
                "conv {in_ch}->{out_ch} ({k}×{k}) needs {} weights and {out_ch} biases",
                out_ch * in_ch * k * k
            )));
        }
        if kernels.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::invalid("conv parameters must be finite"));
        }
        Ok(ConvLayer {
            in_ch,
            out_ch,
            k,
            kernels,
            bias,
        })
    }

    fn glorot(in_ch: usize, out_ch: usize, k: usize, rng: &mut impl Rng) -> Self {
        let fan = ((in_ch + out_ch) * k * k) as f64;
        let r = libm::sqrt(6.0 / fan);
        let kernels = (0..out_ch * in_ch * k * k).map(|_| rng.gen_range(-r..r)).collect();
        ConvLayer {
            in_ch,
            out_ch,
            k,
            kernels,
            bias: vec![0.0; out_ch],
        }
    }

    fn zeros_like(&self) -> Self {
        ConvLayer {
            kernels: vec![0.0; self.kernels.len()],
            bias: vec![0.0; self.out_ch],
            ..*self
        }
    }

    pub fn in_channels(&self) -> usize {
        self.in_ch
    }

    pub fn out_channels(&self) -> usize {
        self.out_ch
    }

    pub fn kernel_size(&self) -> usize {
        self.k
    }

    pub fn kernels(&self) -> &[f64] {
        &self.kernels
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn kernel(&self, o: usize, i: usize) -> &[f64] {
        let kk = self.k * self.k;
        let start = (o * self.in_ch + i) * kk;
        &self.kernels[start..start + kk]
    }

    fn forward(&self, x: &Maps, out: &mut Maps) {
        let (or, oc) = (x.rows + 1 - self.k, x.cols + 1 - self.k);
        out.reshape(self.out_ch, or, oc);
        for o in 0..self.out_ch {
            let plane = &mut out.data[o * or * oc..(o + 1) * or * oc];
            plane.iter_mut().for_each(|v| *v = self.bias[o]);
            for i in 0..self.in_ch {
                let src = x.plane(i);
                let kern = self.kernel(o, i);
                for u in 0..self.k {
                    for v in 0..self.k {
                        let w = kern[u * self.k + v];
                        for r in 0..or {
                            let s = &src[(r + u) * x.cols + v..(r + u) * x.cols + v + oc];
                            let d = &mut plane[r * oc..(r + 1) * oc];
                            d.iter_mut().zip(s).for_each(|(d, s)| *d += w * s);
                        }
                    }
                }
            }
        }
    }

    /// Accumulates kernel/bias gradients from `dz`; writes `dL/dx` when asked.
    fn backward(&self, x: &Maps, dz: &Maps, grad: &mut ConvLayer, dx: Option<&mut Maps>) {
        let (or, oc) = (dz.rows, dz.cols);
        let kk = self.k * self.k;
        for o in 0..self.out_ch {
            let g = dz.plane(o);
            grad.bias[o] += g.iter().sum::<f64>();
            for i in 0..self.in_ch {
                let src = x.plane(i);
                let base = (o * self.in_ch + i) * kk;
                for u in 0..self.k {
                    for v in 0..self.k {
                        let mut acc = 0.0;
                        for r in 0..or {
                            let s = &src[(r + u) * x.cols + v..(r + u) * x.cols + v + oc];
                            let d = &g[r * oc..(r + 1) * oc];
                            acc += s.iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
                        }
                        grad.kernels[base + u * self.k + v] += acc;
                    }
                }
            }
        }
        if let Some(dx) = dx {
            dx.reshape(self.in_ch, x.rows, x.cols);
            dx.data.iter_mut().for_each(|v| *v = 0.0);
            for o in 0..self.out_ch {
                let g = dz.plane(o);
                for i in 0..self.in_ch {
                    let kern = self.kernel(o, i);
                    let cols = x.cols;
                    let dst = &mut dx.data[i * x.rows * cols..(i + 1) * x.rows * cols];
                    for u in 0..self.k {
                        for v in 0..self.k {
                            let w = kern[u * self.k + v];
                            for r in 0..or {
                                let d = &mut dst[(r + u) * cols + v..(r + u) * cols + v + oc];
                                let s = &g[r * oc..(r + 1) * oc];
                                d.iter_mut().zip(s).for_each(|(d, s)| *d += w * s);
                            }
                        }
                    }
                }
            }
        }
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.kernels.iter().chain(&self.bias)
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.kernels.iter_mut().chain(self.bias.iter_mut())
    }

    fn param_count(&self) -> usize {
        self.kernels.len() + self.bias.len()
    }
}

/// Channel-major stack of 2-d maps.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Maps {
    pub channels: usize,
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Maps {
    fn reshape(&mut self, channels: usize, rows: usize, cols: usize) {
        self.channels = channels;
        self.rows = rows;
        self.cols = cols;
        self.data.resize(channels * rows * cols, 0.0);
    }

    pub fn plane(&self, c: usize) -> &[f64] {
        let n = self.rows * self.cols;
        &self.data[c * n..(c + 1) * n]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.rows, self.cols)
    }
}

/// 2×2 non-overlapping average pooling; an odd trailing row/column is
/// dropped.
pub fn avg_pool2(x: &Maps, out: &mut Maps) {
    let (pr, pc) = (x.rows / 2, x.cols / 2);
    out.reshape(x.channels, pr, pc);
    for c in 0..x.channels {
        let src = x.plane(c);
        for r in 0..pr {
            for q in 0..pc {
                let a = (2 * r) * x.cols + 2 * q;
                let b = a + x.cols;
                out.data[(c * pr + r) * pc + q] = 0.25 * (src[a] + src[a + 1] + src[b] + src[b + 1]);
            }
        }
    }
}

fn avg_pool2_backward(dpool: &Maps, rows: usize, cols: usize, dx: &mut Maps) {
    dx.reshape(dpool.channels, rows, cols);
    dx.data.iter_mut().for_each(|v| *v = 0.0);
    for c in 0..dpool.channels {
        for r in 0..dpool.rows {
            for q in 0..dpool.cols {
                let g = 0.25 * dpool.data[(c * dpool.rows + r) * dpool.cols + q];
                let a = (c * rows + 2 * r) * cols + 2 * q;
                dx.data[a] = g;
                dx.data[a + 1] = g;
                dx.data[a + cols] = g;
                dx.data[a + cols + 1] = g;
            }
        }
    }
}

/// Classifier on top of the flattened final pooled maps.
#[derive(Debug, Clone, PartialEq)]
pub enum Head {
    /// Pooled maps wired directly to the softmax (first training stage).
    Softmax(Dense),
    /// Sigmoid hidden layer then softmax.
    Mlp(Mlp),
}

impl Head {
    fn inputs(&self) -> usize {
        match self {
            Head::Softmax(d) => d.inputs(),
            Head::Mlp(m) => m.inputs(),
        }
    }

    fn param_count(&self) -> usize {
        match self {
            Head::Softmax(d) => d.param_count(),
            Head::Mlp(m) => m.param_count(),
        }
    }
}

/// Layer sizes of a conv/pool stack.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnArchitecture {
    pub rows: usize,
    pub cols: usize,
    /// `(output channels, kernel size)` per conv layer; each is followed by
    /// 2×2 average pooling.
    pub conv: Vec<(usize, usize)>,
    /// Hidden units of the perceptron head; `None` for a direct softmax.
    pub hidden: Option<usize>,
}

impl CnnArchitecture {
    /// 94×50 → 10@7×7 → pool → 10@3×3 → pool → 300 → 2.
    pub fn reference() -> Self {
        CnnArchitecture {
            rows: PATCH_ROWS,
            cols: PATCH_COLS,
            conv: vec![(10, 7), (10, 3)],
            hidden: Some(300),
        }
    }

    /// Shapes `(channels, rows, cols)` after every conv and pool layer.
    pub fn shape_trace(&self) -> Result<Vec<(usize, usize, usize)>> {
        let mut trace = Vec::new();
        let (mut rows, mut cols) = (self.rows, self.cols);
        for &(ch, k) in &self.conv {
            if k == 0 || ch == 0 || k > rows || k > cols {
                return Err(Error::invalid(alloc::format!("kernel {k} does not fit a {rows}×{cols} map")));
            }
            rows = rows + 1 - k;
            cols = cols + 1 - k;
            trace.push((ch, rows, cols));
            rows /= 2;
            cols /= 2;
            if rows == 0 || cols == 0 {
                return Err(Error::invalid("pooling reduced a map to nothing"));
            }
            trace.push((ch, rows, cols));
        }
        Ok(trace)
    }

    pub fn feature_len(&self) -> Result<usize> {
        Ok(self
            .shape_trace()?
            .last()
            .map(|&(c, r, q)| c * r * q)
            .unwrap_or(self.rows * self.cols))
    }
}

/// Conv/pool feature extractor plus classifier head and band statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvNet {
    rows: usize,
    cols: usize,
    activation: Activation,
    layers: Vec<ConvLayer>,
    head: Head,
    band_stats: Option<BandStats>,
}

/// Posterior plus, when requested, every intermediate shape and the final
/// pooled maps.
#[derive(Debug, Clone, PartialEq)]
pub struct CnnOutput {
    pub posterior: [f64; 2],
    pub shapes: Vec<(usize, usize, usize)>,
    pub features_len: usize,
    pub pooled: Option<Maps>,
}

#[derive(Default)]
struct Workspace {
    input: Maps,
    acts: Vec<Maps>,
    pools: Vec<Maps>,
    d_pool: Maps,
    d_act: Maps,
    d_prev: Maps,
    h: Vec<f64>,
    dh: Vec<f64>,
    d_feat: Vec<f64>,
}

struct Gradients {
    layers: Vec<ConvLayer>,
    head: Head,
}

impl ConvNet {
    pub fn new(arch: &CnnArchitecture, activation: Activation, seed: u64) -> Result<Self> {
        let feat = arch.feature_len()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut in_ch = 1;
        let mut layers = Vec::with_capacity(arch.conv.len());
        for &(ch, k) in &arch.conv {
            layers.push(ConvLayer::glorot(in_ch, ch, k, &mut rng));
            in_ch = ch;
        }
        let head = match arch.hidden {
            Some(h) => Head::Mlp(Mlp::new(feat, h, rng.gen())?),
            None => Head::Softmax(Dense::glorot(feat, 2, &mut rng)),
        };
        Ok(ConvNet {
            rows: arch.rows,
            cols: arch.cols,
            activation,
            layers,
            head,
            band_stats: None,
        })
    }

    pub fn from_parts(
        rows: usize,
        cols: usize,
        activation: Activation,
        layers: Vec<ConvLayer>,
        head: Head,
        band_stats: Option<BandStats>,
    ) -> Result<Self> {
        let mut in_ch = 1;
        for l in &layers {
            if l.in_ch != in_ch {
                return Err(Error::invalid("conv layer channels do not chain"));
            }
            in_ch = l.out_ch;
        }
        let net = ConvNet {
            rows,
            cols,
            activation,
            layers,
            head,
            band_stats,
        };
        let feat = net.architecture().feature_len()?;
        if net.head.inputs() != feat {
            return Err(Error::invalid(alloc::format!(
                "head takes {} inputs but the conv stack emits {feat}",
                net.head.inputs()
            )));
        }
        if let Some(s) = &net.band_stats {
            if s.bands() != rows {
                return Err(Error::invalid("band statistics do not match the input rows"));
            }
        }
        Ok(net)
    }

    pub fn architecture(&self) -> CnnArchitecture {
        CnnArchitecture {
            rows: self.rows,
            cols: self.cols,
            conv: self.layers.iter().map(|l| (l.out_ch, l.k)).collect(),
            hidden: match &self.head {
                Head::Mlp(m) => Some(m.hidden_units()),
                Head::Softmax(_) => None,
            },
        }
    }

    pub fn input_shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn head(&self) -> &Head {
        &self.head
    }

    pub fn band_stats(&self) -> Option<&BandStats> {
        self.band_stats.as_ref()
    }

    pub fn set_band_stats(&mut self, stats: Option<BandStats>) -> Result<()> {
        if stats.as_ref().is_some_and(|s| s.bands() != self.rows) {
            return Err(Error::invalid("band statistics do not match the input rows"));
        }
        self.band_stats = stats;
        Ok(())
    }

    /// Training metadata of the hidden-layer head; ignored for a softmax head.
    pub fn set_head_meta(&mut self, meta: TrainingMeta) {
        if let Head::Mlp(m) = &mut self.head {
            m.meta = meta;
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(ConvLayer::param_count).sum::<usize>() + self.head.param_count()
    }

    fn check_input(&self, patch: &[f64]) -> Result<()> {
        if patch.len() != self.rows * self.cols {
            return Err(Error::invalid(alloc::format!(
                "network expects a {}×{} patch, got {} values",
                self.rows,
                self.cols,
                patch.len()
            )));
        }
        if patch.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("patch values must be finite"));
        }
        Ok(())
    }

    fn run_stack(&self, patch: &[f64], ws: &mut Workspace) {
        ws.input.reshape(1, self.rows, self.cols);
        ws.input.data.copy_from_slice(patch);
        ws.acts.resize_with(self.layers.len(), Maps::default);
        ws.pools.resize_with(self.layers.len(), Maps::default);
        for (li, layer) in self.layers.iter().enumerate() {
            let (before, rest) = ws.pools.split_at_mut(li);
            let src = if li == 0 { &ws.input } else { &before[li - 1] };
            let act = &mut ws.acts[li];
            layer.forward(src, act);
            let f = self.activation;
            act.data.iter_mut().for_each(|v| *v = f.apply(*v));
            avg_pool2(act, &mut rest[0]);
        }
    }

    fn features<'a>(&self, ws: &'a Workspace) -> &'a [f64] {
        match ws.pools.last() {
            Some(p) => &p.data,
            None => &ws.input.data,
        }
    }

    fn head_forward(&self, feat: &[f64], ws: &mut Workspace) -> [f64; 2] {
        match &self.head {
            Head::Softmax(d) => {
                let mut z = [0.0; 2];
                d.forward_into(feat, &mut z);
                softmax2(z)
            }
            Head::Mlp(m) => {
                ws.h.resize(m.hidden_units(), 0.0);
                m.forward_trace(feat, &mut ws.h)
            }
        }
    }

    /// Forward pass. The shape of every layer is checked against the
    /// architecture; a mismatch is an internal error.
    pub fn forward(&self, patch: &[f64], keep_maps: bool) -> Result<CnnOutput> {
        self.check_input(patch)?;
        let mut ws = Workspace::default();
        self.run_stack(patch, &mut ws);
        let mut shapes = Vec::with_capacity(2 * self.layers.len());
        for (a, p) in ws.acts.iter().zip(&ws.pools) {
            shapes.push(a.shape());
            shapes.push(p.shape());
        }
        let expected = self.architecture().shape_trace()?;
        if shapes != expected {
            return Err(Error::Internal(alloc::format!("shape trace {shapes:?} != {expected:?}")));
        }
        let feat = self.features(&ws).to_vec();
        if feat.len() != self.head.inputs() {
            return Err(Error::Internal("flattened features do not match the head".into()));
        }
        let posterior = self.head_forward(&feat, &mut ws);
        Ok(CnnOutput {
            posterior,
            shapes,
            features_len: feat.len(),
            pooled: if keep_maps { ws.pools.last().cloned() } else { None },
        })
    }

    /// Flattened final pooled maps (the head's input).
    pub fn embed(&self, patch: &[f64]) -> Result<Vec<f64>> {
        self.check_input(patch)?;
        let mut ws = Workspace::default();
        self.run_stack(patch, &mut ws);
        Ok(self.features(&ws).to_vec())
    }

    fn zero_grads(&self) -> Gradients {
        Gradients {
            layers: self.layers.iter().map(ConvLayer::zeros_like).collect(),
            head: match &self.head {
                Head::Softmax(d) => Head::Softmax(Dense::zeros(d.inputs(), 2)),
                Head::Mlp(m) => Head::Mlp(m.zeros_like()),
            },
        }
    }

    /// Forward + backward for one sample; returns the weighted loss.
    fn backward_sample(&self, patch: &[f64], target: Class, weight: f64, ws: &mut Workspace, grads: &mut Gradients) -> f64 {
        self.run_stack(patch, ws);
        let feat_len = self.head.inputs();
        ws.d_feat.clear();
        ws.d_feat.resize(feat_len, 0.0);
        let feat = self.features(ws).to_vec();
        let loss = match (&self.head, &mut grads.head) {
            (Head::Softmax(d), Head::Softmax(g)) => {
                let mut z = [0.0; 2];
                d.forward_into(&feat, &mut z);
                let p = softmax2(z);
                let t = target.index();
                let mut dz = [weight * p[0], weight * p[1]];
                dz[t] -= weight;
                d.backward_accumulate(&feat, &dz, g, Some(&mut ws.d_feat));
                -weight * libm::log(p[t].max(f64::MIN_POSITIVE))
            }
            (Head::Mlp(m), Head::Mlp(g)) => {
                ws.h.resize(m.hidden_units(), 0.0);
                ws.dh.resize(m.hidden_units(), 0.0);
                m.backward_sample(&feat, target, weight, &mut ws.h, &mut ws.dh, g, Some(&mut ws.d_feat))
            }
            _ => unreachable!("gradient head mirrors the model head"),
        };
        if self.layers.is_empty() {
            return loss;
        }
        let last = self.layers.len() - 1;
        let p = &ws.pools[last];
        ws.d_pool.reshape(p.channels, p.rows, p.cols);
        ws.d_pool.data.copy_from_slice(&ws.d_feat);
        for li in (0..self.layers.len()).rev() {
            let act = &ws.acts[li];
            avg_pool2_backward(&ws.d_pool, act.rows, act.cols, &mut ws.d_act);
            let f = self.activation;
            ws.d_act
                .data
                .iter_mut()
                .zip(&act.data)
                .for_each(|(d, &a)| *d *= f.derivative_from_output(a));
            let src = if li == 0 { &ws.input } else { &ws.pools[li - 1] };
            let dx = (li > 0).then_some(&mut ws.d_prev);
            self.layers[li].backward(src, &ws.d_act, &mut grads.layers[li], dx);
            if li > 0 {
                core::mem::swap(&mut ws.d_pool, &mut ws.d_prev);
            }
        }
        loss
    }

    fn apply(&mut self, grads: &Gradients, step: f64, conv: bool, head: bool) {
        if conv {
            for (l, g) in self.layers.iter_mut().zip(&grads.layers) {
                l.kernels.iter_mut().zip(&g.kernels).for_each(|(w, d)| *w -= step * d);
                l.bias.iter_mut().zip(&g.bias).for_each(|(w, d)| *w -= step * d);
            }
        }
        if head {
            match (&mut self.head, &grads.head) {
                (Head::Softmax(d), Head::Softmax(g)) => d.scale_add(g, step),
                (Head::Mlp(m), Head::Mlp(g)) => m.apply(g, step),
                _ => unreachable!("gradient head mirrors the model head"),
            }
        }
    }

    /// Flattened parameters: conv layers in order (kernels then bias), then
    /// the head.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.layers.iter().flat_map(|l| l.params().copied()).collect();
        match &self.head {
            Head::Softmax(d) => out.extend(d.params().copied()),
            Head::Mlp(m) => out.extend(m.parameters()),
        }
        out
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::invalid("parameter vector length mismatch"));
        }
        let mut it = values.iter();
        for l in &mut self.layers {
            for p in l.params_mut() {
                *p = *it.next().unwrap();
            }
        }
        match &mut self.head {
            Head::Softmax(d) => d.params_mut().for_each(|p| *p = *it.next().unwrap()),
            Head::Mlp(m) => {
                let rest: Vec<f64> = it.copied().collect();
                m.set_parameters(&rest)?;
            }
        }
        Ok(())
    }

    /// Summed weighted cross-entropy and its gradient in
    /// [`ConvNet::parameters`] order.
    pub fn loss_and_gradient(&self, samples: &[(&[f64], Class)], class_weights: [f64; 2]) -> Result<(f64, Vec<f64>)> {
        let mut ws = Workspace::default();
        let mut grads = self.zero_grads();
        let mut loss = 0.0;
        for &(x, c) in samples {
            self.check_input(x)?;
            loss += self.backward_sample(x, c, class_weights[c.index()], &mut ws, &mut grads);
        }
        let tmp = ConvNet {
            layers: grads.layers,
            head: grads.head,
            band_stats: None,
            ..self.clone()
        };
        Ok((loss, tmp.parameters()))
    }

    /// Summed weighted loss only.
    pub fn loss(&self, samples: &[(&[f64], Class)], class_weights: [f64; 2]) -> Result<f64> {
        let mut total = 0.0;
        for &(x, c) in samples {
            let p = self.forward(x, false)?.posterior;
            total -= class_weights[c.index()] * libm::log(p[c.index()].max(f64::MIN_POSITIVE));
        }
        Ok(total)
    }

    /// Normalizes a raw patch with the stored band statistics (if any) and
    /// classifies it.
    pub fn classify_raw(&self, raw: &SpectrogramPatch) -> Result<[f64; 2]> {
        let p = match &self.band_stats {
            Some(s) => s.normalize(raw)?,
            None => raw.clone(),
        };
        Ok(self.forward(p.values(), false)?.posterior)
    }
}

/// Forward pass through a trained model.
pub fn cnn_forward(model: &ConvNet, patch: &SpectrogramPatch, keep_maps: bool) -> Result<CnnOutput> {
    model.forward(patch.values(), keep_maps)
}

/// Two-stage training settings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct CnnHyper {
    /// Epochs of each training stage.
    pub epochs: usize,
    pub lr: f64,
    /// Learning rate halves every this many epochs (0 disables).
    pub lr_halve_every: usize,
    pub batch: usize,
    pub hidden: usize,
    pub seed: u64,
    pub class_balance: bool,
    pub activation: Activation,
}

impl Default for CnnHyper {
    fn default() -> Self {
        CnnHyper {
            epochs: 60,
            lr: 0.1,
            lr_halve_every: 10,
            batch: 1,
            hidden: 300,
            seed: 0,
            class_balance: true,
            activation: Activation::Sigmoid,
        }
    }
}

impl CnnHyper {
    /// 900 epochs, halving every 150.
    pub fn full_schedule() -> Self {
        CnnHyper {
            epochs: 900,
            lr_halve_every: 150,
            ..CnnHyper::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 || self.hidden == 0 {
            return Err(Error::invalid("batch and hidden must be positive"));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }

    fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_halve_every {
            0 => self.lr,
            k => self.lr / libm::pow(2.0, (epoch / k) as f64),
        }
    }
}

/// Loss histories of both stages.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CnnTrainReport {
    pub stage1_loss: Vec<f64>,
    pub stage2_loss: Vec<f64>,
}

/// Stage 1 only: conv stack plus direct softmax head, trained by SGD.
pub fn train_stage1(
    net: &mut ConvNet,
    patches: &[SpectrogramPatch],
    labels: &[Class],
    hyper: &CnnHyper,
) -> Result<Vec<f64>> {
    hyper.validate()?;
    if patches.len() != labels.len() {
        return Err(Error::invalid("one label per patch required"));
    }
    if patches.is_empty() {
        return Err(Error::empty("no training patches"));
    }
    let taan = labels.iter().filter(|&&c| c == Class::Taan).count();
    require_both_classes([taan, labels.len() - taan])?;
    for p in patches {
        net.check_input(p.values())?;
    }
    let weights = if hyper.class_balance {
        let n = labels.len() as f64;
        [n / (2.0 * taan as f64), n / (2.0 * (labels.len() - taan) as f64)]
    } else {
        [1.0, 1.0]
    };
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0xc0de);
    let mut order: Vec<usize> = (0..patches.len()).collect();
    let mut ws = Workspace::default();
    let mut grads = net.zero_grads();
    let mut history = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let lr = hyper.lr_at(epoch);
        let mut total = 0.0;
        for batch in order.chunks(hyper.batch) {
            grads = reset(grads);
            for &i in batch {
                total += net.backward_sample(patches[i].values(), labels[i], weights[labels[i].index()], &mut ws, &mut grads);
            }
            net.apply(&grads, lr / batch.len() as f64, true, true);
        }
        let mean = total / patches.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Internal(alloc::format!("CNN training diverged at epoch {epoch}")));
        }
        history.push(mean);
    }
    Ok(history)
}

fn reset(mut g: Gradients) -> Gradients {
    for l in &mut g.layers {
        l.kernels.iter_mut().for_each(|v| *v = 0.0);
        l.bias.iter_mut().for_each(|v| *v = 0.0);
    }
    match &mut g.head {
        Head::Softmax(d) => d.clear(),
        Head::Mlp(m) => m.clear(),
    }
    g
}

/// Two-stage training on band-normalized patches. `band_stats` are stored
/// in the returned model for later inference on raw patches.
pub fn cnn_train(
    arch: &CnnArchitecture,
    patches: &[SpectrogramPatch],
    labels: &[Class],
    band_stats: Option<BandStats>,
    hyper: &CnnHyper,
) -> Result<(ConvNet, CnnTrainReport)> {
    let stage1_arch = CnnArchitecture {
        hidden: None,
        ..arch.clone()
    };
    let mut net = ConvNet::new(&stage1_arch, hyper.activation, hyper.seed)?;
    let stage1_loss = train_stage1(&mut net, patches, labels, hyper)?;

    let mut ds = Dataset::new(stage1_arch.feature_len()?);
    for (p, &c) in patches.iter().zip(labels) {
        ds.push(&net.embed(p.values())?, c)?;
    }
    let mut head = Mlp::new(ds.dim(), hyper.hidden, hyper.seed.wrapping_add(1))?;
    let mlp_hyper = MlpHyper {
        hidden: hyper.hidden,
        lr: hyper.lr,
        epochs: hyper.epochs,
        batch: hyper.batch,
        seed: hyper.seed.wrapping_add(2),
        class_balance: hyper.class_balance,
        lr_halve_every: hyper.lr_halve_every,
    };
    let stage2_loss = mlp_train(&mut head, &ds, &mlp_hyper)?;
    net.head = Head::Mlp(head);
    net.band_stats = band_stats;
    Ok((
        net,
        CnnTrainReport {
            stage1_loss,
            stage2_loss,
        },
    ))
}

/// One channel of the final pooling layer.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMap {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

/// Final-pool channel `channel` (21×10 for the reference network).
pub fn export_channel_maps(model: &ConvNet, patch: &SpectrogramPatch, channel: usize) -> Result<ChannelMap> {
    let channels = model.layers.last().map(|l| l.out_ch).unwrap_or(1);
    if channel >= channels {
        return Err(Error::invalid(alloc::format!("channel {channel} not in 0..{channels}")));
    }
    let out = model.forward(patch.values(), true)?;
    let maps = out.pooled.ok_or_else(|| Error::Internal("pooled maps missing".into()))?;
    Ok(ChannelMap {
        rows: maps.rows,
        cols: maps.cols,
        values: maps.plane(channel).to_vec(),
    })
}

/// Held-out accuracy at the 0.5 decision threshold.
pub fn accuracy(model: &ConvNet, patches: &[SpectrogramPatch], labels: &[Class]) -> Result<f64> {
    if patches.is_empty() {
        return Err(Error::empty("no patches to score"));
    }
    let mut correct = 0;
    for (p, &c) in patches.iter().zip(labels) {
        let post = model.forward(p.values(), false)?.posterior;
        if (post[0] >= 0.5) == (c == Class::Taan) {
            correct += 1;
        }
    }
    Ok(correct as f64 / patches.len() as f64)
}
