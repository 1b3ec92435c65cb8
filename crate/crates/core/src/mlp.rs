//! One-hidden-layer perceptron: sigmoid hidden units, two-way softmax
//! output, cross-entropy loss, mini-batch SGD.
//!
//! The same network serves as the 3-d style classifier and as the
//! fully-connected head of the spectrogram CNN.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::StyleFeatureSeq;
use crate::Class;

pub const FEATURE_DIM: usize = 3;
pub const DEFAULT_HIDDEN: usize = 300;

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

/// Numerically stable two-way softmax.
pub(crate) fn softmax2(z: [f64; 2]) -> [f64; 2] {
    let m = z[0].max(z[1]);
    let e0 = libm::exp(z[0] - m);
    let e1 = libm::exp(z[1] - m);
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

/// Fully connected layer; `weights` is row-major `[outputs][inputs]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Dense {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot(inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let r = libm::sqrt(6.0 / (inputs + outputs) as f64);
        let weights = (0..inputs * outputs).map(|_| rng.gen_range(-r..r)).collect();
        Dense {
            inputs,
            outputs,
            weights,
            bias: vec![0.0; outputs],
        }
    }

    pub fn from_parts(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if weights.len() != inputs * outputs || bias.len() != outputs {
            return Err(Error::invalid(alloc::format!(
                "dense {inputs}->{outputs} needs {} weights and {outputs} biases, got {} and {}",
                inputs * outputs,
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::invalid("dense parameters must be finite"));
        }
        Ok(Dense {
            inputs,
            outputs,
            weights,
            bias,
        })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub(crate) fn forward_into(&self, x: &[f64], out: &mut [f64]) {
        for (o, (row, b)) in out.iter_mut().zip(self.weights.chunks_exact(self.inputs).zip(&self.bias)) {
            *o = b + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    /// Accumulates `dL/dW += dz ⊗ x`, `dL/db += dz`; optionally adds
    /// `Wᵀ dz` into `dx`.
    pub(crate) fn backward_accumulate(&self, x: &[f64], dz: &[f64], grad: &mut Dense, dx: Option<&mut [f64]>) {
        for (o, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad.bias[o] += d;
            let row = &mut grad.weights[o * self.inputs..(o + 1) * self.inputs];
            row.iter_mut().zip(x).for_each(|(g, v)| *g += d * v);
        }
        if let Some(dx) = dx {
            for (o, &d) in dz.iter().enumerate() {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                dx.iter_mut().zip(row).for_each(|(g, w)| *g += d * w);
            }
        }
    }

    pub(crate) fn scale_add(&mut self, grad: &Dense, step: f64) {
        self.weights.iter_mut().zip(&grad.weights).for_each(|(w, g)| *w -= step * g);
        self.bias.iter_mut().zip(&grad.bias).for_each(|(b, g)| *b -= step * g);
    }

    pub(crate) fn clear(&mut self) {
        self.weights.iter_mut().for_each(|v| *v = 0.0);
        self.bias.iter_mut().for_each(|v| *v = 0.0);
    }

    pub(crate) fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.bias)
    }

    pub(crate) fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }
}

/// Training provenance kept alongside the parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingMeta {
    pub init_seed: u64,
    pub epochs: usize,
    pub loss_history: Vec<f64>,
}

/// `inputs → hidden (sigmoid) → 2 (softmax)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    hidden: Dense,
    output: Dense,
    pub meta: TrainingMeta,
}

/// 3-d style classifier with `hidden` sigmoid units.
pub fn mlp_init(hidden: usize, seed: u64) -> Result<Mlp> {
    Mlp::new(FEATURE_DIM, hidden, seed)
}

impl Mlp {
    pub fn new(inputs: usize, hidden: usize, seed: u64) -> Result<Self> {
        if inputs == 0 || hidden == 0 {
            return Err(Error::invalid("MLP needs at least one input and one hidden unit"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden_layer = Dense::glorot(inputs, hidden, &mut rng);
        let output = Dense::glorot(hidden, 2, &mut rng);
        Ok(Mlp {
            hidden: hidden_layer,
            output,
            meta: TrainingMeta {
                init_seed: seed,
                ..TrainingMeta::default()
            },
        })
    }

    pub fn from_layers(hidden: Dense, output: Dense) -> Result<Self> {
        if output.inputs() != hidden.outputs() || output.outputs() != 2 {
            return Err(Error::invalid(alloc::format!(
                "layer shapes do not chain: {}->{} then {}->{}",
                hidden.inputs(),
                hidden.outputs(),
                output.inputs(),
                output.outputs()
            )));
        }
        Ok(Mlp {
            hidden,
            output,
            meta: TrainingMeta::default(),
        })
    }

    pub fn hidden(&self) -> &Dense {
        &self.hidden
    }

    pub fn output(&self) -> &Dense {
        &self.output
    }

    pub fn inputs(&self) -> usize {
        self.hidden.inputs()
    }

    pub fn hidden_units(&self) -> usize {
        self.hidden.outputs()
    }

    pub fn param_count(&self) -> usize {
        self.hidden.param_count() + self.output.param_count()
    }

    /// Posterior pair `(p_taan, p_non_taan)`.
    pub fn forward(&self, x: &[f64]) -> Result<[f64; 2]> {
        if x.len() != self.inputs() {
            return Err(Error::invalid(alloc::format!(
                "expected {} inputs, got {}",
                self.inputs(),
                x.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("MLP input must be finite"));
        }
        let mut h = vec![0.0; self.hidden_units()];
        Ok(self.forward_trace(x, &mut h))
    }

    pub(crate) fn forward_trace(&self, x: &[f64], h: &mut [f64]) -> [f64; 2] {
        self.hidden.forward_into(x, h);
        h.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut z = [0.0; 2];
        self.output.forward_into(h, &mut z);
        softmax2(z)
    }

    /// Backpropagates `weight · -ln p[target]` for one sample, accumulating
    /// into `grad`. Returns the loss; `dx` receives `dL/dx` when given.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn backward_sample(
        &self,
        x: &[f64],
        target: Class,
        weight: f64,
        h: &mut [f64],
        dh: &mut [f64],
        grad: &mut Mlp,
        dx: Option<&mut [f64]>,
    ) -> f64 {
        let p = self.forward_trace(x, h);
        let t = target.index();
        let loss = -weight * libm::log(p[t].max(f64::MIN_POSITIVE));
        let mut dz = [weight * p[0], weight * p[1]];
        dz[t] -= weight;
        dh.iter_mut().for_each(|v| *v = 0.0);
        self.output.backward_accumulate(h, &dz, &mut grad.output, Some(dh));
        for (d, &a) in dh.iter_mut().zip(h.iter()) {
            *d *= a * (1.0 - a);
        }
        self.hidden.backward_accumulate(x, dh, &mut grad.hidden, dx);
        loss
    }

    pub(crate) fn zeros_like(&self) -> Mlp {
        Mlp {
            hidden: Dense::zeros(self.hidden.inputs(), self.hidden.outputs()),
            output: Dense::zeros(self.output.inputs(), 2),
            meta: TrainingMeta::default(),
        }
    }

    pub(crate) fn clear(&mut self) {
        self.hidden.clear();
        self.output.clear();
    }

    pub(crate) fn apply(&mut self, grad: &Mlp, step: f64) {
        self.hidden.scale_add(&grad.hidden, step);
        self.output.scale_add(&grad.output, step);
    }

    /// All parameters, hidden weights then hidden bias then output.
    pub fn parameters(&self) -> Vec<f64> {
        self.hidden.params().chain(self.output.params()).copied().collect()
    }

    pub fn set_parameters(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.param_count() {
            return Err(Error::invalid("parameter vector length mismatch"));
        }
        for (p, v) in self.hidden.params_mut().chain(self.output.params_mut()).zip(values) {
            *p = *v;
        }
        Ok(())
    }

    /// Summed weighted cross-entropy over `data` and its gradient in
    /// [`Mlp::parameters`] order.
    pub fn loss_and_gradient(&self, data: &Dataset, class_weights: [f64; 2]) -> (f64, Vec<f64>) {
        let mut grad = self.zeros_like();
        let mut h = vec![0.0; self.hidden_units()];
        let mut dh = vec![0.0; self.hidden_units()];
        let mut loss = 0.0;
        for i in 0..data.len() {
            let c = data.label(i);
            loss += self.backward_sample(data.input(i), c, class_weights[c.index()], &mut h, &mut dh, &mut grad, None);
        }
        (loss, grad.parameters())
    }

    pub fn is_finite(&self) -> bool {
        self.hidden.params().chain(self.output.params()).all(|v| v.is_finite())
    }
}

/// Labelled fixed-dimension samples stored contiguously.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    dim: usize,
    xs: Vec<f64>,
    labels: Vec<Class>,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Dataset {
            dim,
            xs: Vec::new(),
            labels: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], label: Class) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(alloc::format!("sample has {} values, dataset dim {}", x.len(), self.dim)));
        }
        self.xs.extend_from_slice(x);
        self.labels.push(label);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn input(&self, i: usize) -> &[f64] {
        &self.xs[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> Class {
        self.labels[i]
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let taan = self.labels.iter().filter(|&&c| c == Class::Taan).count();
        [taan, self.len() - taan]
    }

    /// Inverse-frequency weights `N / (2 N_c)`, or ones when disabled.
    pub fn class_weights(&self, balance: bool) -> [f64; 2] {
        let counts = self.class_counts();
        if !balance || counts.contains(&0) {
            return [1.0, 1.0];
        }
        let n = self.len() as f64;
        [n / (2.0 * counts[0] as f64), n / (2.0 * counts[1] as f64)]
    }

    /// Style features of vocal frames paired with frame labels.
    pub fn from_features(features: &StyleFeatureSeq, labels: &[Class]) -> Result<Self> {
        if labels.len() != features.len() {
            return Err(Error::invalid(alloc::format!(
                "{} labels for {} feature frames",
                labels.len(),
                features.len()
            )));
        }
        let mut ds = Dataset::new(FEATURE_DIM);
        for (f, &c) in features.features().iter().zip(labels) {
            if let Some(v) = f {
                ds.push(v, c)?;
            }
        }
        Ok(ds)
    }
}

/// SGD settings.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct MlpHyper {
    pub hidden: usize,
    pub lr: f64,
    pub epochs: usize,
    pub batch: usize,
    /// Seeds both initialization and the per-epoch shuffle.
    pub seed: u64,
    pub class_balance: bool,
    /// Halve the learning rate every this many epochs (0 disables).
    pub lr_halve_every: usize,
}

impl Default for MlpHyper {
    fn default() -> Self {
        MlpHyper {
            hidden: DEFAULT_HIDDEN,
            lr: 0.05,
            epochs: 200,
            batch: 32,
            seed: 0,
            class_balance: true,
            lr_halve_every: 0,
        }
    }
}

impl MlpHyper {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.batch == 0 {
            return Err(Error::invalid("hidden and batch must be positive"));
        }
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return Err(Error::invalid("learning rate must be positive"));
        }
        Ok(())
    }

    pub(crate) fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_halve_every {
            0 => self.lr,
            k => self.lr / libm::pow(2.0, (epoch / k) as f64),
        }
    }
}

pub(crate) fn require_both_classes(counts: [usize; 2]) -> Result<()> {
    if counts.contains(&0) {
        return Err(Error::invalid(alloc::format!(
            "training data must contain both classes (taan {}, non-taan {})",
            counts[0],
            counts[1]
        )));
    }
    Ok(())
}

/// Trains in place; returns the mean weighted loss of each epoch.
pub fn mlp_train(model: &mut Mlp, data: &Dataset, hyper: &MlpHyper) -> Result<Vec<f64>> {
    hyper.validate()?;
    if data.is_empty() {
        return Err(Error::empty("training set is empty"));
    }
    if data.dim() != model.inputs() {
        return Err(Error::invalid("dataset dimension differs from model input"));
    }
    require_both_classes(data.class_counts())?;
    let weights = data.class_weights(hyper.class_balance);
    let mut rng = ChaCha8Rng::seed_from_u64(hyper.seed ^ 0x5eed_5eed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = model.zeros_like();
    let mut h = vec![0.0; model.hidden_units()];
    let mut dh = vec![0.0; model.hidden_units()];
    let mut history = Vec::with_capacity(hyper.epochs);
    for epoch in 0..hyper.epochs {
        order.shuffle(&mut rng);
        let lr = hyper.lr_at(epoch);
        let mut total = 0.0;
        for batch in order.chunks(hyper.batch) {
            grad.clear();
            for &i in batch {
                let c = data.label(i);
                total += model.backward_sample(data.input(i), c, weights[c.index()], &mut h, &mut dh, &mut grad, None);
            }
            model.apply(&grad, lr / batch.len() as f64);
        }
        let mean = total / data.len() as f64;
        if !mean.is_finite() || !model.is_finite() {
            return Err(Error::Internal(alloc::format!("training diverged at epoch {epoch}")));
        }
        history.push(mean);
    }
    model.meta.epochs += hyper.epochs;
    model.meta.loss_history.extend_from_slice(&history);
    Ok(history)
}

/// Per-frame taan posteriors, `None` on non-vocal frames.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSeq {
    frame_s: f64,
    p_taan: Vec<Option<f64>>,
}

impl PosteriorSeq {
    pub fn new(frame_s: f64, p_taan: Vec<Option<f64>>) -> Result<Self> {
        if let Some(p) = p_taan.iter().flatten().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::invalid(alloc::format!("posterior {p} outside [0, 1]")));
        }
        if !(frame_s > 0.0) {
            return Err(Error::invalid("frame_s must be positive"));
        }
        Ok(PosteriorSeq { frame_s, p_taan })
    }

    pub fn frame_s(&self) -> f64 {
        self.frame_s
    }

    pub fn p_taan(&self) -> &[Option<f64>] {
        &self.p_taan
    }

    pub fn len(&self) -> usize {
        self.p_taan.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_taan.is_empty()
    }

    pub fn vocal_mask(&self) -> Vec<bool> {
        self.p_taan.iter().map(Option::is_some).collect()
    }

    /// Posterior pairs with `(0.5, 0.5)` on non-vocal frames.
    pub fn pairs(&self) -> Vec<[f64; 2]> {
        self.p_taan
            .iter()
            .map(|p| match p {
                Some(p) => [*p, 1.0 - p],
                None => [0.5, 0.5],
            })
            .collect()
    }

    /// `p ≥ threshold` on vocal frames, false elsewhere.
    pub fn decisions(&self, threshold: f64) -> Vec<bool> {
        self.p_taan.iter().map(|p| p.is_some_and(|p| p >= threshold)).collect()
    }
}

/// Classifies every vocal frame; non-vocal frames get no posterior.
pub fn classify_frames(model: &Mlp, features: &StyleFeatureSeq, threshold: f64) -> Result<(PosteriorSeq, Vec<bool>)> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::invalid(alloc::format!("threshold {threshold} outside [0, 1]")));
    }
    if model.inputs() != FEATURE_DIM {
        return Err(Error::invalid(alloc::format!(
            "model takes {} inputs, style features have {FEATURE_DIM}",
            model.inputs()
        )));
    }
    let p = features
        .features()
        .iter()
        .map(|f| f.map(|v| model.forward(&v).map(|p| p[0])).transpose())
        .collect::<Result<Vec<_>>>()?;
    let post = PosteriorSeq::new(features.frame_s(), p)?;
    let decisions = post.decisions(threshold);
    Ok((post, decisions))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::NormStats;
    use proptest::prelude::*;
    use rand::Rng;

    fn blobs(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ds = Dataset::new(3);
        for i in 0..n {
            let c = if i % 2 == 0 { Class::Taan } else { Class::NonTaan };
            let centre = if c == Class::Taan { 1.5 } else { -1.5 };
            let x = [
                centre + rng.gen_range(-0.8..0.8),
                centre + rng.gen_range(-0.8..0.8),
                rng.gen_range(-1.0..1.0),
            ];
            ds.push(&x, c).unwrap();
        }
        ds
    }

    #[test]
    fn init_is_deterministic_with_expected_size() {
        let a = mlp_init(300, 42).unwrap();
        let b = mlp_init(300, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.param_count(), 3 * 300 + 300 + 300 * 2 + 2);
        assert_eq!(a.param_count(), 1802);
        let tiny = mlp_init(1, 0).unwrap();
        assert_eq!(tiny.param_count(), 3 + 1 + 2 + 2);
        assert!(tiny.forward(&[0.1, 0.2, 0.3]).is_ok());
        assert!(mlp_init(0, 0).is_err());
    }

    #[test]
    fn zero_model_gives_half() {
        let m = Mlp::from_layers(Dense::zeros(3, 4), Dense::zeros(4, 2)).unwrap();
        assert_eq!(m.forward(&[1.0, -2.0, 3.0]).unwrap(), [0.5, 0.5]);
        assert!(m.forward(&[f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn hand_computed_forward() {
        let hidden = Dense::from_parts(3, 1, vec![0.5, -1.0, 0.25], vec![0.1]).unwrap();
        let out = Dense::from_parts(1, 2, vec![2.0, -1.0], vec![0.3, -0.2]).unwrap();
        let m = Mlp::from_layers(hidden, out).unwrap();
        let x = [1.0, 0.5, 2.0];
        // manual: a = 0.5 - 0.5 + 0.5 + 0.1 = 0.6
        let h = 1.0 / (1.0 + libm::exp(-0.6));
        let z0 = 2.0 * h + 0.3;
        let z1 = -h - 0.2;
        let p0 = libm::exp(z0) / (libm::exp(z0) + libm::exp(z1));
        let p = m.forward(&x).unwrap();
        assert!((p[0] - p0).abs() < 1e-12);
        assert!((p[1] - (1.0 - p0)).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut model = Mlp::new(3, 5, 7).unwrap();
        let data = blobs(12, 3);
        let w = data.class_weights(true);
        let (_, grad) = model.loss_and_gradient(&data, w);
        let params = model.parameters();
        let delta = 1e-5;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += delta;
            model.set_parameters(&p).unwrap();
            let up = model.loss_and_gradient(&data, w).0;
            p[i] -= 2.0 * delta;
            model.set_parameters(&p).unwrap();
            let down = model.loss_and_gradient(&data, w).0;
            let fd = (up - down) / (2.0 * delta);
            let rel = (fd - grad[i]).abs() / fd.abs().max(grad[i].abs()).max(1e-8);
            assert!(rel < 1e-4, "param {i}: fd {fd} vs bp {}", grad[i]);
        }
    }

    #[test]
    fn learns_separable_blobs() {
        let data = blobs(200, 11);
        let hyper = MlpHyper {
            hidden: 20,
            ..MlpHyper::default()
        };
        let mut model = Mlp::new(3, hyper.hidden, 1).unwrap();
        let history = mlp_train(&mut model, &data, &hyper).unwrap();
        assert_eq!(history.len(), 200);
        assert!(history.last().unwrap() < history.first().unwrap());
        assert!(history.iter().all(|l| l.is_finite()));
        let correct = (0..data.len())
            .filter(|&i| {
                let p = model.forward(data.input(i)).unwrap();
                (p[0] >= 0.5) == (data.label(i) == Class::Taan)
            })
            .count();
        assert!(correct as f64 >= 0.99 * data.len() as f64, "{correct}/200");
    }

    #[test]
    fn zero_epochs_and_single_class() {
        let data = blobs(20, 1);
        let mut model = mlp_init(4, 9).unwrap();
        let before = model.clone();
        mlp_train(&mut model, &data, &MlpHyper { epochs: 0, ..MlpHyper::default() }).unwrap();
        assert_eq!(model.parameters(), before.parameters());

        let mut one = Dataset::new(3);
        one.push(&[0.0; 3], Class::Taan).unwrap();
        one.push(&[1.0; 3], Class::Taan).unwrap();
        assert!(matches!(
            mlp_train(&mut model, &one, &MlpHyper::default()),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn training_is_deterministic() {
        let data = blobs(50, 5);
        let hyper = MlpHyper { hidden: 8, epochs: 5, ..MlpHyper::default() };
        let mut a = Mlp::new(3, 8, 2).unwrap();
        let mut b = Mlp::new(3, 8, 2).unwrap();
        mlp_train(&mut a, &data, &hyper).unwrap();
        mlp_train(&mut b, &data, &hyper).unwrap();
        assert_eq!(a, b);
    }

    fn feature_seq(values: Vec<Option<[f64; 3]>>) -> StyleFeatureSeq {
        StyleFeatureSeq::new(1.0, values, NormStats { mean: [0.0; 3], std: [1.0; 3] })
    }

    #[test]
    fn classify_threshold_contract() {
        let model = mlp_init(6, 3).unwrap();
        let seq = feature_seq(vec![Some([0.1, 0.2, 0.3]), None, Some([-1.0, 0.5, 2.0])]);
        let (post, dec) = classify_frames(&model, &seq, 0.0).unwrap();
        assert_eq!(dec, vec![true, false, true]);
        assert!(post.p_taan()[1].is_none());
        assert!(classify_frames(&model, &seq, 1.0 + 1e-9).is_err());
        assert!(classify_frames(&Mlp::new(4, 2, 0).unwrap(), &seq, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn posteriors_sum_to_one(seed in 0u64..1000, x in prop::array::uniform3(-50.0f64..50.0)) {
            let m = mlp_init(7, seed).unwrap();
            let p = m.forward(&x).unwrap();
            prop_assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
            prop_assert!(p.iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn raising_threshold_never_adds_taan(seed in 0u64..200, lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
            let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
            let m = mlp_init(5, seed).unwrap();
            let seq = feature_seq((0..30).map(|i| Some([i as f64 * 0.1 - 1.5, (i % 5) as f64, -(i as f64) * 0.05])).collect());
            let count = |t| classify_frames(&m, &seq, t).unwrap().1.iter().filter(|&&d| d).count();
            prop_assert!(count(hi) <= count(lo));
        }
    }
}
