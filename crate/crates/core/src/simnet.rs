//! Siamese CNN that scores how likely two spectra share a culprit fault.
//!
//! Both inputs go through one convolutional extractor (3x3 convolutions,
//! ReLU, 2x2 max pooling). The element-wise absolute difference of the two
//! feature vectors feeds a two-layer head with a ReLU in between and a sigmoid
//! output. All parameters live in a single flat buffer, so the twins share
//! weights by construction, and gradients and Adam moments use the same
//! layout.

use crate::pms::PmsImage;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Probabilities are clipped to `[EPS, 1 - EPS]` inside the loss.
pub const EPS: f64 = 1e-7;

const MAGIC: &[u8; 8] = b"FIDXSNN\0";
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum SimnetError {
    #[error("input shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("invalid configuration: {0}")]
    BadConfig(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Format(String),
}

/// Network shape. `input_side` is the uniform side every spectrum is
/// resized to before it enters the extractor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetConfig {
    pub arch: String,
    pub input_side: usize,
    pub conv_channels: Vec<usize>,
    pub hidden: usize,
}

impl NetConfig {
    /// Named presets: `alexnet-small` (two conv stages, 8 and 16 filters,
    /// 32 hidden units) and `tiny` (one stage of 4 filters, 8 hidden units).
    pub fn preset(name: &str, input_side: usize) -> Result<Self, SimnetError> {
        let (conv_channels, hidden) = match name {
            "alexnet-small" => (vec![8, 16], 32),
            "tiny" => (vec![4], 8),
            _ => {
                return Err(SimnetError::BadConfig(format!(
                    "unknown architecture `{name}`"
                )))
            }
        };
        let cfg = NetConfig {
            arch: name.to_string(),
            input_side,
            conv_channels,
            hidden,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), SimnetError> {
        if self.conv_channels.is_empty() || self.conv_channels.contains(&0) || self.hidden == 0 {
            return Err(SimnetError::BadConfig("empty layer".into()));
        }
        if self.input_side >> self.conv_channels.len() == 0 {
            return Err(SimnetError::BadConfig(format!(
                "input side {} too small for {} pooling stages",
                self.input_side,
                self.conv_channels.len()
            )));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        3 * self.input_side * self.input_side
    }
}

#[derive(Debug, Clone, PartialEq)]
struct ConvShape {
    cin: usize,
    cout: usize,
    side: usize,
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    convs: Vec<ConvShape>,
    feat: usize,
    hidden: usize,
    fc1_w: usize,
    fc1_b: usize,
    fc2_w: usize,
    fc2_b: usize,
    total: usize,
}

impl Layout {
    fn new(cfg: &NetConfig) -> Self {
        let mut off = 0;
        let mut convs = Vec::new();
        let (mut cin, mut side) = (3, cfg.input_side);
        for &cout in &cfg.conv_channels {
            let w = off;
            off += cout * cin * 9;
            let b = off;
            off += cout;
            convs.push(ConvShape {
                cin,
                cout,
                side,
                w,
                b,
            });
            cin = cout;
            side /= 2;
        }
        let feat = cin * side * side;
        let fc1_w = off;
        off += cfg.hidden * feat;
        let fc1_b = off;
        off += cfg.hidden;
        let fc2_w = off;
        off += cfg.hidden;
        let fc2_b = off;
        off += 1;
        Layout {
            convs,
            feat,
            hidden: cfg.hidden,
            fc1_w,
            fc1_b,
            fc2_w,
            fc2_b,
            total: off,
        }
    }

    /// Named parameter blocks as `(name, start, end)`.
    fn blocks(&self) -> Vec<(String, usize, usize)> {
        let mut out = Vec::new();
        for (i, c) in self.convs.iter().enumerate() {
            out.push((format!("conv{}.weight", i + 1), c.w, c.b));
            out.push((format!("conv{}.bias", i + 1), c.b, c.b + c.cout));
        }
        out.push(("fc1.weight".into(), self.fc1_w, self.fc1_b));
        out.push(("fc1.bias".into(), self.fc1_b, self.fc2_w));
        out.push(("fc2.weight".into(), self.fc2_w, self.fc2_b));
        out.push(("fc2.bias".into(), self.fc2_b, self.total));
        out
    }
}

/// A spectrum resized to the network's input: CHW reals in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Input {
    pub data: Vec<f64>,
    pub original_side: usize,
}

/// Nearest-neighbour resample to `side x side`, scaled to `[0, 1]`.
pub fn resize_uniform(img: &PmsImage, side: usize) -> Input {
    let src = img.side;
    let mut data = vec![0.0; 3 * side * side];
    for y in 0..side {
        let sy = y * src / side;
        for x in 0..side {
            let sx = x * src / side;
            let px = img.pixels[sy * src + sx];
            for (c, &v) in px.iter().enumerate() {
                data[(c * side + y) * side + x] = v as f64 / 255.0;
            }
        }
    }
    Input {
        data,
        original_side: src,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: NetConfig,
    pub seed: u64,
    layout: Layout,
    params: Vec<f64>,
}

struct StageCache {
    input: Vec<f64>,
    act: Vec<f64>,
    argmax: Vec<u32>,
}

fn conv_forward(input: &[f64], s: &ConvShape, w: &[f64], b: &[f64]) -> Vec<f64> {
    let n = s.side;
    let mut out = vec![0.0; s.cout * n * n];
    for co in 0..s.cout {
        let plane = &mut out[co * n * n..(co + 1) * n * n];
        plane.iter_mut().for_each(|v| *v = b[co]);
        for ci in 0..s.cin {
            let src = &input[ci * n * n..(ci + 1) * n * n];
            for ky in 0..3 {
                for kx in 0..3 {
                    let wv = w[((co * s.cin + ci) * 3 + ky) * 3 + kx];
                    let (dy, dx) = (ky as isize - 1, kx as isize - 1);
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (n as isize - dx).min(n as isize) as usize;
                    for y in 0..n {
                        let sy = y as isize + dy;
                        if sy < 0 || sy >= n as isize {
                            continue;
                        }
                        let srow = &src[sy as usize * n..(sy as usize + 1) * n];
                        let orow = &mut plane[y * n..(y + 1) * n];
                        for x in x0..x1 {
                            orow[x] += wv * srow[(x as isize + dx) as usize];
                        }
                    }
                }
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    input: &[f64],
    s: &ConvShape,
    w: &[f64],
    dout: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    mut din: Option<&mut [f64]>,
) {
    let n = s.side;
    for co in 0..s.cout {
        let g = &dout[co * n * n..(co + 1) * n * n];
        db[co] += g.iter().sum::<f64>();
        for ci in 0..s.cin {
            let src = &input[ci * n * n..(ci + 1) * n * n];
            for ky in 0..3 {
                for kx in 0..3 {
                    let wi = ((co * s.cin + ci) * 3 + ky) * 3 + kx;
                    let wv = w[wi];
                    let (dy, dx) = (ky as isize - 1, kx as isize - 1);
                    let x0 = (-dx).max(0) as usize;
                    let x1 = (n as isize - dx).min(n as isize) as usize;
                    let mut acc = 0.0;
                    for y in 0..n {
                        let sy = y as isize + dy;
                        if sy < 0 || sy >= n as isize {
                            continue;
                        }
                        let sy = sy as usize;
                        let grow = &g[y * n..(y + 1) * n];
                        let srow = &src[sy * n..(sy + 1) * n];
                        for x in x0..x1 {
                            acc += grow[x] * srow[(x as isize + dx) as usize];
                        }
                        if let Some(d) = din.as_deref_mut() {
                            let drow = &mut d[(ci * n + sy) * n..(ci * n + sy + 1) * n];
                            for x in x0..x1 {
                                drow[(x as isize + dx) as usize] += wv * grow[x];
                            }
                        }
                    }
                    dw[wi] += acc;
                }
            }
        }
    }
}

/// 2x2 max pooling with stride 2; odd trailing rows/columns are dropped.
/// Ties go to the first maximum in row-major window order.
fn pool_forward(a: &[f64], c: usize, n: usize) -> (Vec<f64>, Vec<u32>) {
    let m = n / 2;
    let mut out = vec![0.0; c * m * m];
    let mut arg = vec![0u32; c * m * m];
    for ch in 0..c {
        for y in 0..m {
            for x in 0..m {
                let mut best = usize::MAX;
                for (dy, dx) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
                    let i = (ch * n + 2 * y + dy) * n + 2 * x + dx;
                    if best == usize::MAX || a[i] > a[best] {
                        best = i;
                    }
                }
                let o = (ch * m + y) * m + x;
                out[o] = a[best];
                arg[o] = best as u32;
            }
        }
    }
    (out, arg)
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of one prediction, with `p` clipped to
/// `[EPS, 1 - EPS]`.
pub fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(EPS, 1.0 - EPS);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

/// Mean binary cross-entropy.
pub fn bce_loss(p: &[f64], y: &[f64]) -> f64 {
    assert_eq!(p.len(), y.len(), "one label per prediction");
    if p.is_empty() {
        return 0.0;
    }
    p.iter().zip(y).map(|(&p, &y)| bce(p, y)).sum::<f64>() / p.len() as f64
}

struct HeadOut {
    u: Vec<f64>,
    z1: Vec<f64>,
    a1: Vec<f64>,
    p: f64,
}

impl Network {
    pub fn new(config: NetConfig, seed: u64) -> Result<Self, SimnetError> {
        config.validate()?;
        let layout = Layout::new(&config);
        let mut params = vec![0.0; layout.total];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |slice: &mut [f64], fan_in: usize| {
            let n = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("positive std");
            slice.iter_mut().for_each(|v| *v = n.sample(&mut rng));
        };
        for c in &layout.convs {
            fill(&mut params[c.w..c.b], c.cin * 9);
        }
        fill(&mut params[layout.fc1_w..layout.fc1_b], layout.feat);
        fill(&mut params[layout.fc2_w..layout.fc2_b], layout.hidden);
        Ok(Network {
            config,
            seed,
            layout,
            params,
        })
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Parameter block names with their index ranges in [`Network::params`].
    pub fn blocks(&self) -> Vec<(String, std::ops::Range<usize>)> {
        self.layout
            .blocks()
            .into_iter()
            .map(|(n, a, b)| (n, a..b))
            .collect()
    }

    pub fn feature_len(&self) -> usize {
        self.layout.feat
    }

    fn check(&self, x: &[f64]) -> Result<(), SimnetError> {
        let expected = self.config.input_len();
        if x.len() != expected {
            return Err(SimnetError::ShapeMismatch {
                expected,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn extract_cached(&self, x: &[f64]) -> (Vec<f64>, Vec<StageCache>) {
        let mut caches = Vec::with_capacity(self.layout.convs.len());
        let mut cur = x.to_vec();
        for s in &self.layout.convs {
            let w = &self.params[s.w..s.b];
            let b = &self.params[s.b..s.b + s.cout];
            let mut act = conv_forward(&cur, s, w, b);
            act.iter_mut().for_each(|v| *v = v.max(0.0));
            let (pooled, argmax) = pool_forward(&act, s.cout, s.side);
            caches.push(StageCache {
                input: std::mem::replace(&mut cur, pooled),
                act,
                argmax,
            });
        }
        (cur, caches)
    }

    /// Extractor output `h(x)`.
    pub fn features(&self, x: &[f64]) -> Result<Vec<f64>, SimnetError> {
        self.check(x)?;
        Ok(self.extract_cached(x).0)
    }

    fn head(&self, ha: &[f64], hb: &[f64]) -> HeadOut {
        let l = &self.layout;
        let u: Vec<f64> = ha.iter().zip(hb).map(|(a, b)| (a - b).abs()).collect();
        let mut z1 = self.params[l.fc1_b..l.fc2_w].to_vec();
        for (h, z) in z1.iter_mut().enumerate() {
            let row = &self.params[l.fc1_w + h * l.feat..l.fc1_w + (h + 1) * l.feat];
            *z += row.iter().zip(&u).map(|(w, x)| w * x).sum::<f64>();
        }
        let a1: Vec<f64> = z1.iter().map(|&v| v.max(0.0)).collect();
        let w2 = &self.params[l.fc2_w..l.fc2_b];
        let z2 = self.params[l.fc2_b] + w2.iter().zip(&a1).map(|(w, a)| w * a).sum::<f64>();
        HeadOut {
            u,
            z1,
            a1,
            p: sigmoid(z2),
        }
    }

    /// Similarity from precomputed features.
    pub fn similarity_from_features(&self, ha: &[f64], hb: &[f64]) -> f64 {
        self.head(ha, hb).p
    }

    pub fn forward_similarity(&self, a: &[f64], b: &[f64]) -> Result<f64, SimnetError> {
        let (ha, hb) = (self.features(a)?, self.features(b)?);
        Ok(self.similarity_from_features(&ha, &hb))
    }

    /// Loss and parameter gradient for one labelled pair.
    pub fn loss_and_grad(&self, a: &[f64], b: &[f64], y: f64) -> (f64, Vec<f64>) {
        let l = &self.layout;
        let (ha, ca) = self.extract_cached(a);
        let (hb, cb) = self.extract_cached(b);
        let out = self.head(&ha, &hb);
        let loss = bce(out.p, y);
        let mut g = vec![0.0; l.total];
        // d loss / d z2; zero where the clip is active
        let dz2 = if out.p <= EPS || out.p >= 1.0 - EPS {
            0.0
        } else {
            out.p - y
        };
        g[l.fc2_b] = dz2;
        let mut dz1 = vec![0.0; l.hidden];
        for h in 0..l.hidden {
            g[l.fc2_w + h] = dz2 * out.a1[h];
            if out.z1[h] > 0.0 {
                dz1[h] = dz2 * self.params[l.fc2_w + h];
            }
        }
        let mut du = vec![0.0; l.feat];
        for h in 0..l.hidden {
            if dz1[h] == 0.0 {
                continue;
            }
            g[l.fc1_b + h] = dz1[h];
            let base = l.fc1_w + h * l.feat;
            for i in 0..l.feat {
                g[base + i] = dz1[h] * out.u[i];
                du[i] += dz1[h] * self.params[base + i];
            }
        }
        let mut dha = vec![0.0; l.feat];
        let mut dhb = vec![0.0; l.feat];
        for i in 0..l.feat {
            let d = ha[i] - hb[i];
            let s = if d > 0.0 {
                1.0
            } else if d < 0.0 {
                -1.0
            } else {
                0.0
            };
            dha[i] = du[i] * s;
            dhb[i] = -du[i] * s;
        }
        self.extract_backward(&ca, dha, &mut g);
        self.extract_backward(&cb, dhb, &mut g);
        (loss, g)
    }

    fn extract_backward(&self, caches: &[StageCache], mut dcur: Vec<f64>, g: &mut [f64]) {
        for (k, (s, c)) in self.layout.convs.iter().zip(caches).enumerate().rev() {
            let mut dact = vec![0.0; c.act.len()];
            for (o, &i) in c.argmax.iter().enumerate() {
                dact[i as usize] += dcur[o];
            }
            for (d, &a) in dact.iter_mut().zip(&c.act) {
                if a <= 0.0 {
                    *d = 0.0;
                }
            }
            let w = &self.params[s.w..s.b];
            let (gw, rest) = g[s.w..].split_at_mut(s.b - s.w);
            let gb = &mut rest[..s.cout];
            if k == 0 {
                conv_backward(&c.input, s, w, &dact, gw, gb, None);
            } else {
                let mut din = vec![0.0; c.input.len()];
                conv_backward(&c.input, s, w, &dact, gw, gb, Some(&mut din));
                dcur = din;
            }
        }
    }

    /// Serializes to the versioned binary format: magic, format version, a
    /// JSON header with the configuration and seed, then the parameters as
    /// little-endian `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let header = serde_json::to_vec(&ModelHeader {
            config: self.config.clone(),
            seed: self.seed,
            params: self.params.len(),
        })
        .expect("header serializes");
        let mut out = Vec::with_capacity(24 + header.len() + 8 * self.params.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, SimnetError> {
        let bad = |m: &str| SimnetError::Format(m.to_string());
        if bytes.len() < 16 || &bytes[..8] != MAGIC {
            return Err(bad("missing magic"));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(SimnetError::Format(format!(
                "unsupported version {version}"
            )));
        }
        let hlen = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        let body = bytes
            .get(16..16 + hlen)
            .ok_or_else(|| bad("truncated header"))?;
        let header: ModelHeader =
            serde_json::from_slice(body).map_err(|e| SimnetError::Format(e.to_string()))?;
        let mut net = Network::new(header.config, header.seed)?;
        let raw = &bytes[16 + hlen..];
        if header.params != net.params.len() || raw.len() != 8 * net.params.len() {
            return Err(bad("parameter count does not match the configuration"));
        }
        for (p, chunk) in net.params.iter_mut().zip(raw.chunks_exact(8)) {
            *p = f64::from_le_bytes(chunk.try_into().expect("8 bytes"));
        }
        if net.params.iter().any(|p| !p.is_finite()) {
            return Err(bad("non-finite parameter"));
        }
        Ok(net)
    }

    pub fn save(&self, path: &Path) -> Result<(), SimnetError> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, SimnetError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelHeader {
    config: NetConfig,
    seed: u64,
    params: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub initial_lr: f64,
    pub lr_decay: f64,
    pub epochs: usize,
    pub uniform_side: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 16,
            initial_lr: 1e-4,
            lr_decay: 0.96,
            epochs: 30,
            uniform_side: 64,
            seed: 0,
        }
    }
}

impl TrainConfig {
    /// Learning rate used during epoch `t` (0-based).
    pub fn lr_at(&self, t: usize) -> f64 {
        self.initial_lr * self.lr_decay.powi(t as i32)
    }

    fn validate(&self) -> Result<(), SimnetError> {
        if self.batch_size == 0 {
            return Err(SimnetError::BadConfig(
                "batch_size must be at least 1".into(),
            ));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(SimnetError::BadConfig("lr_decay must be in (0, 1]".into()));
        }
        if !(self.initial_lr > 0.0) {
            return Err(SimnetError::BadConfig("initial_lr must be positive".into()));
        }
        Ok(())
    }
}

/// Two indices into the input list and whether they share a culprit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainingPair {
    pub a: usize,
    pub b: usize,
    pub same: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean loss of each epoch, measured on the batches as they were trained.
    pub loss_history: Vec<f64>,
    pub lr_history: Vec<f64>,
    /// Set when every pair carried the same label.
    pub single_class: bool,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const E: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], g: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * g[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * g[i] * g[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::E);
        }
    }
}

/// Mini-batch training with Adam and a per-epoch exponential learning-rate
/// decay. Pair order is reshuffled every epoch from `cfg.seed`. Per-pair
/// gradients may be computed in parallel; they are always summed in batch
/// order.
pub fn train(
    net: &mut Network,
    inputs: &[Input],
    pairs: &[TrainingPair],
    cfg: &TrainConfig,
) -> Result<TrainReport, SimnetError> {
    cfg.validate()?;
    if cfg.uniform_side != net.config.input_side {
        return Err(SimnetError::BadConfig(format!(
            "uniform_side {} differs from the network input side {}",
            cfg.uniform_side, net.config.input_side
        )));
    }
    for x in inputs {
        net.check(&x.data)?;
    }
    if let Some(p) = pairs
        .iter()
        .find(|p| p.a >= inputs.len() || p.b >= inputs.len())
    {
        return Err(SimnetError::BadConfig(format!(
            "pair ({}, {}) refers past {} inputs",
            p.a,
            p.b,
            inputs.len()
        )));
    }
    let single_class = pairs.iter().all(|p| p.same) || pairs.iter().all(|p| !p.same);
    if single_class && !pairs.is_empty() {
        log::warn!("training pairs carry a single label; the model cannot learn to separate");
    }
    let mut report = TrainReport {
        loss_history: Vec::with_capacity(cfg.epochs),
        lr_history: Vec::with_capacity(cfg.epochs),
        single_class,
    };
    if pairs.is_empty() {
        return Ok(report);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(net.params.len());
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for epoch in 0..cfg.epochs {
        let lr = cfg.lr_at(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let results: Vec<(f64, Vec<f64>)> = batch
                .par_iter()
                .map(|&i| {
                    let p = pairs[i];
                    let y = if p.same { 1.0 } else { 0.0 };
                    net.loss_and_grad(&inputs[p.a].data, &inputs[p.b].data, y)
                })
                .collect();
            let mut g = vec![0.0; net.params.len()];
            for (loss, gi) in &results {
                total += loss;
                for (a, b) in g.iter_mut().zip(gi) {
                    *a += b;
                }
            }
            let scale = 1.0 / batch.len() as f64;
            g.iter_mut().for_each(|v| *v *= scale);
            adam.step(&mut net.params, &g, lr);
        }
        let mean = total / pairs.len() as f64;
        log::info!("epoch {epoch}: lr {lr:.3e}, loss {mean:.6}");
        report.loss_history.push(mean);
        report.lr_history.push(lr);
    }
    Ok(report)
}

/// Pairwise similarity for a list of inputs. Features are extracted once per
/// input. Entry `(i, j)` is computed for `i < j` and mirrored; the diagonal
/// is 1.
pub fn similarity_matrix(net: &Network, inputs: &[Input]) -> Result<Vec<Vec<f64>>, SimnetError> {
    let feats: Vec<Vec<f64>> = inputs
        .par_iter()
        .map(|x| net.features(&x.data))
        .collect::<Result<_, _>>()?;
    let n = inputs.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| match i.cmp(&j) {
                    std::cmp::Ordering::Less => net.similarity_from_features(&feats[i], &feats[j]),
                    std::cmp::Ordering::Equal => 1.0,
                    std::cmp::Ordering::Greater => 0.0,
                })
                .collect()
        })
        .collect();
    let mut m = rows;
    for i in 0..n {
        for j in 0..i {
            m[i][j] = m[j][i];
        }
    }
    Ok(m)
}

/// Largest relative error of one parameter block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockError {
    pub block: String,
    pub max_rel_error: f64,
}

/// Compares analytic gradients with central finite differences (step `h`)
/// for every parameter. Relative error is `|a - n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check(net: &Network, a: &[f64], b: &[f64], y: f64, h: f64) -> Vec<BlockError> {
    let (_, analytic) = net.loss_and_grad(a, b, y);
    let mut probe = net.clone();
    let mut out = Vec::new();
    for (name, range) in net.blocks() {
        let mut worst: f64 = 0.0;
        for i in range {
            let orig = probe.params[i];
            probe.params[i] = orig + h;
            let up = probe.loss_and_grad(a, b, y).0;
            probe.params[i] = orig - h;
            let down = probe.loss_and_grad(a, b, y).0;
            probe.params[i] = orig;
            let numeric = (up - down) / (2.0 * h);
            let den = analytic[i].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[i] - numeric).abs() / den);
        }
        out.push(BlockError {
            block: name,
            max_rel_error: worst,
        });
    }
    out
}
