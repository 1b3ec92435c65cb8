//! `TSEG` model container.
//!
//! ```text
//! "TSEG" | u32 version | u8 kind (1 = MLP, 2 = CNN) | records… | 'E'
//! ```
//!
//! Every integer is a little-endian `u32` and every parameter a
//! little-endian `f64`. Records start with a one-byte tag:
//!
//! | tag | payload |
//! |-----|---------|
//! | `D` | inputs, outputs, weights (`outputs × inputs`), bias |
//! | `C` | in channels, out channels, kernel size, kernels, bias |
//! | `B` | bands, mean, std |
//! | `S` / `M` | CNN head marker (softmax layer / hidden MLP), followed by its `D` records |
//!
//! A CNN body is `rows, cols, activation (u8), n_conv, C…, S|M, D…, [B]`.
//! Training metadata lives in a JSON sidecar next to the binary
//! (`<file>.json`).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use taanseg_core::cnn::{Activation, BandStats, ConvLayer, ConvNet, Head};
use taanseg_core::mlp::{Dense, Mlp, TrainingMeta};

use crate::error::{IoError, Result};

pub const MAGIC: &[u8; 4] = b"TSEG";
pub const FORMAT_VERSION: u32 = 1;

const KIND_MLP: u8 = 1;
const KIND_CNN: u8 = 2;
const TAG_DENSE: u8 = b'D';
const TAG_CONV: u8 = b'C';
const TAG_BANDS: u8 = b'B';
const TAG_SOFTMAX_HEAD: u8 = b'S';
const TAG_MLP_HEAD: u8 = b'M';
const TAG_END: u8 = b'E';

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Mlp(Mlp),
    Cnn(ConvNet),
}

impl Model {
    pub fn kind(&self) -> &'static str {
        match self {
            Model::Mlp(_) => "mlp",
            Model::Cnn(_) => "cnn",
        }
    }

    /// Layer shapes in file order, e.g. `dense 3x300`.
    pub fn shapes(&self) -> Vec<String> {
        let dense = |d: &Dense| format!("dense {}x{}", d.inputs(), d.outputs());
        match self {
            Model::Mlp(m) => vec![dense(m.hidden()), dense(m.output())],
            Model::Cnn(net) => {
                let (r, c) = net.input_shape();
                let mut v = vec![format!("input {r}x{c}")];
                v.extend(net.layers().iter().map(|l| {
                    format!(
                        "conv {}->{} {}x{}",
                        l.in_channels(),
                        l.out_channels(),
                        l.kernel_size(),
                        l.kernel_size()
                    )
                }));
                match net.head() {
                    Head::Softmax(d) => v.push(dense(d)),
                    Head::Mlp(m) => v.extend([dense(m.hidden()), dense(m.output())]),
                }
                v
            }
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::Mlp(m) => m.param_count(),
            Model::Cnn(n) => n.param_count(),
        }
    }

    fn meta(&self) -> TrainingMeta {
        match self {
            Model::Mlp(m) => m.meta.clone(),
            Model::Cnn(n) => match n.head() {
                Head::Mlp(m) => m.meta.clone(),
                Head::Softmax(_) => TrainingMeta::default(),
            },
        }
    }
}

/// JSON metadata written beside the binary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub shapes: Vec<String>,
    pub param_count: usize,
    pub init_seed: u64,
    pub epochs: usize,
    pub loss_history: Vec<f64>,
    /// Loss of the first CNN training stage, when known.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub stage1_loss: Vec<f64>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

struct Writer(Vec<u8>);

impl Writer {
    fn u8(&mut self, v: u8) {
        self.0.push(v);
    }

    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }

    fn f64s(&mut self, v: &[f64]) {
        for x in v {
            self.0.extend_from_slice(&x.to_le_bytes());
        }
    }

    fn dense(&mut self, d: &Dense) {
        self.u8(TAG_DENSE);
        self.u32(d.inputs());
        self.u32(d.outputs());
        self.f64s(d.weights());
        self.f64s(d.bias());
    }
}

fn activation_code(a: Activation) -> u8 {
    match a {
        Activation::Sigmoid => 0,
        Activation::Tanh => 1,
        Activation::Relu => 2,
    }
}

pub fn encode_model(model: &Model) -> Vec<u8> {
    let mut w = Writer(MAGIC.to_vec());
    w.0.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    match model {
        Model::Mlp(m) => {
            w.u8(KIND_MLP);
            w.dense(m.hidden());
            w.dense(m.output());
        }
        Model::Cnn(net) => {
            w.u8(KIND_CNN);
            let (rows, cols) = net.input_shape();
            w.u32(rows);
            w.u32(cols);
            w.u8(activation_code(net.activation()));
            w.u32(net.layers().len());
            for l in net.layers() {
                w.u8(TAG_CONV);
                w.u32(l.in_channels());
                w.u32(l.out_channels());
                w.u32(l.kernel_size());
                w.f64s(l.kernels());
                w.f64s(l.bias());
            }
            match net.head() {
                Head::Softmax(d) => {
                    w.u8(TAG_SOFTMAX_HEAD);
                    w.dense(d);
                }
                Head::Mlp(m) => {
                    w.u8(TAG_MLP_HEAD);
                    w.dense(m.hidden());
                    w.dense(m.output());
                }
            }
            if let Some(b) = net.band_stats() {
                w.u8(TAG_BANDS);
                w.u32(b.bands());
                w.f64s(b.mean());
                w.f64s(b.std());
            }
        }
    }
    w.u8(TAG_END);
    w.0
}

struct Reader<'a> {
    path: &'a Path,
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn err(&self, msg: impl Into<String>) -> IoError {
        IoError::format(self.path, format!("byte {}: {}", self.pos, msg.into()))
    }

    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(self.err("truncated model file"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = n.checked_mul(8).ok_or_else(|| self.err("layer too large"))?;
        let b = self.take(bytes)?;
        Ok(b.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }

    fn expect(&mut self, tag: u8) -> Result<()> {
        let t = self.u8()?;
        if t != tag {
            self.pos -= 1;
            return Err(self.err(format!("expected record {:?}, found {:?}", tag as char, t as char)));
        }
        Ok(())
    }

    fn dense(&mut self) -> Result<Dense> {
        self.expect(TAG_DENSE)?;
        let i = self.u32()?;
        let o = self.u32()?;
        let w = self.f64s(i * o)?;
        let b = self.f64s(o)?;
        Dense::from_parts(i, o, w, b).map_err(|e| self.err(e.to_string()))
    }
}

pub fn decode_model(buf: &[u8], path: &Path) -> Result<Model> {
    let mut r = Reader { path, buf, pos: 0 };
    if r.take(4)? != MAGIC {
        return Err(IoError::format(path, "not a TSEG model (bad magic)"));
    }
    let version = r.u32()? as u32;
    if version != FORMAT_VERSION {
        return Err(IoError::format(path, format!("model format version {version} not supported")));
    }
    let model = match r.u8()? {
        KIND_MLP => {
            let h = r.dense()?;
            let o = r.dense()?;
            Model::Mlp(Mlp::from_layers(h, o).map_err(|e| r.err(e.to_string()))?)
        }
        KIND_CNN => {
            let rows = r.u32()?;
            let cols = r.u32()?;
            let activation = match r.u8()? {
                0 => Activation::Sigmoid,
                1 => Activation::Tanh,
                2 => Activation::Relu,
                a => return Err(r.err(format!("unknown activation code {a}"))),
            };
            let n = r.u32()?;
            let mut layers = Vec::with_capacity(n.min(64));
            for _ in 0..n {
                r.expect(TAG_CONV)?;
                let (i, o, k) = (r.u32()?, r.u32()?, r.u32()?);
                let kernels = r.f64s(o * i * k * k)?;
                let bias = r.f64s(o)?;
                layers.push(ConvLayer::from_parts(i, o, k, kernels, bias).map_err(|e| r.err(e.to_string()))?);
            }
            let head = match r.u8()? {
                TAG_SOFTMAX_HEAD => Head::Softmax(r.dense()?),
                TAG_MLP_HEAD => {
                    let h = r.dense()?;
                    let o = r.dense()?;
                    Head::Mlp(Mlp::from_layers(h, o).map_err(|e| r.err(e.to_string()))?)
                }
                t => return Err(r.err(format!("unknown head tag {:?}", t as char))),
            };
            let band_stats = if r.buf.get(r.pos) == Some(&TAG_BANDS) {
                r.pos += 1;
                let n = r.u32()?;
                let mean = r.f64s(n)?;
                let std = r.f64s(n)?;
                Some(BandStats::from_parts(mean, std).map_err(|e| r.err(e.to_string()))?)
            } else {
                None
            };
            Model::Cnn(
                ConvNet::from_parts(rows, cols, activation, layers, head, band_stats)
                    .map_err(|e| r.err(e.to_string()))?,
            )
        }
        k => return Err(r.err(format!("unknown model kind {k}"))),
    };
    r.expect(TAG_END)?;
    if r.pos != buf.len() {
        return Err(r.err("trailing bytes after end record"));
    }
    Ok(model)
}

pub fn sidecar_for(model: &Model, stage1_loss: &[f64]) -> Sidecar {
    let meta = model.meta();
    Sidecar {
        format: "TSEG".into(),
        version: FORMAT_VERSION,
        kind: model.kind().into(),
        shapes: model.shapes(),
        param_count: model.param_count(),
        init_seed: meta.init_seed,
        epochs: meta.epochs,
        loss_history: meta.loss_history,
        stage1_loss: stage1_loss.to_vec(),
    }
}

/// Writes the binary and its sidecar.
pub fn save_model(model: &Model, stage1_loss: &[f64], path: &Path) -> Result<()> {
    std::fs::write(path, encode_model(model)).map_err(|e| IoError::io(path, e))?;
    let side = sidecar_path(path);
    let json = serde_json::to_string_pretty(&sidecar_for(model, stage1_loss)).expect("sidecar serializes");
    std::fs::write(&side, json + "\n").map_err(|e| IoError::io(&side, e))
}

/// Reads the binary and, when present, restores training metadata from the
/// sidecar.
pub fn load_model(path: &Path) -> Result<(Model, Option<Sidecar>)> {
    let buf = std::fs::read(path).map_err(|e| IoError::io(path, e))?;
    let mut model = decode_model(&buf, path)?;
    let side = sidecar_path(path);
    let sidecar = match std::fs::read_to_string(&side) {
        Ok(text) => {
            let s: Sidecar = serde_json::from_str(&text).map_err(|e| IoError::format(&side, e.to_string()))?;
            if s.kind != model.kind() || s.shapes != model.shapes() {
                return Err(IoError::format(&side, "sidecar does not describe this model"));
            }
            let meta = TrainingMeta {
                init_seed: s.init_seed,
                epochs: s.epochs,
                loss_history: s.loss_history.clone(),
            };
            match &mut model {
                Model::Mlp(m) => m.meta = meta,
                Model::Cnn(n) => n.set_head_meta(meta),
            }
            Some(s)
        }
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => None,
        Err(e) => return Err(IoError::io(&side, e)),
    };
    Ok((model, sidecar))
}
