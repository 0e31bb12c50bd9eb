//! Attention U-Net mapping the feature image to an angle-range image.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureImage, N_FEAT};
use crate::image::Image;
use crate::neural::loss::{evaluate_loss, LossConfig, LossMode};
use crate::neural::model::{Evaluation, Model, Signature};
use crate::neural::params::{Gradients, Init, WeightStore};
use crate::neural::tensor::*;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    /// Per-pixel sigmoid (two-class softmax).
    #[default]
    Sigmoid,
    None,
}

/// Expected share of positive pixels; a sigmoid head starts at this
/// probability so early updates do not silence the last ReLU block.
pub const SIGMOID_PRIOR: f64 = 0.05;

impl OutputActivation {
    /// Initial bias of the output layer.
    pub fn initial_bias(self) -> f64 {
        match self {
            Self::Sigmoid => (SIGMOID_PRIOR / (1.0 - SIGMOID_PRIOR)).ln(),
            Self::None => 0.0,
        }
    }

    pub fn for_loss(mode: LossMode) -> Self {
        match mode {
            LossMode::Classification => Self::Sigmoid,
            LossMode::Regression => Self::None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Number of down-sampling stages.
    pub depth: usize,
    pub base_channels: usize,
    pub input_channels: usize,
    pub input_height: usize,
    pub input_width: usize,
    pub use_attention: bool,
    pub output: OutputActivation,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            depth: 3,
            base_channels: 8,
            input_channels: N_FEAT,
            input_height: 64,
            input_width: 64,
            use_attention: true,
            output: OutputActivation::Sigmoid,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.base_channels == 0 || self.input_channels == 0 {
            return Err(Error::Config("channel counts must be positive".into()));
        }
        let stride = 1usize << self.depth;
        if self.input_height == 0
            || self.input_width == 0
            || self.input_height % stride != 0
            || self.input_width % stride != 0
        {
            return Err(Error::Config(format!(
                "input {}x{} is not divisible by 2^{}",
                self.input_height, self.input_width, self.depth
            )));
        }
        Ok(())
    }

    pub fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvRef {
    w: usize,
    b: Option<usize>,
    c_in: usize,
    c_out: usize,
    k: usize,
}

#[derive(Debug, Clone, Copy)]
struct Block {
    c1: ConvRef,
    c2: ConvRef,
}

#[derive(Debug, Clone, Copy)]
struct Gate {
    theta: ConvRef,
    phi: ConvRef,
    psi: ConvRef,
}

#[derive(Debug, Clone, Copy)]
struct Up {
    conv: ConvRef,
    gate: Option<Gate>,
    block: Block,
}

#[derive(Debug, Clone)]
pub struct UNet<T> {
    pub config: NetworkConfig,
    pub weights: WeightStore<T>,
    enc: Vec<Block>,
    mid: Block,
    dec: Vec<Up>,
    head: ConvRef,
}

struct BlockTrace<T> {
    x: Tensor<T>,
    a1: Tensor<T>,
    h1: Tensor<T>,
    a2: Tensor<T>,
    h2: Tensor<T>,
}

struct GateTrace<T> {
    g: Tensor<T>,
    qa: Tensor<T>,
    q: Tensor<T>,
    alpha: Tensor<T>,
}

struct DecTrace<T> {
    level: usize,
    u: Tensor<T>,
    au: Tensor<T>,
    gate: Option<GateTrace<T>>,
    block: BlockTrace<T>,
}

struct Trace<T> {
    enc: Vec<(BlockTrace<T>, Vec<u8>)>,
    mid: BlockTrace<T>,
    dec: Vec<DecTrace<T>>,
    head_in: Tensor<T>,
    out: Tensor<T>,
}

fn register_conv<T: Real>(
    store: &mut WeightStore<T>,
    rng: &mut rand_chacha::ChaCha8Rng,
    name: &str,
    c_in: usize,
    c_out: usize,
    k: usize,
    bias: bool,
) -> ConvRef {
    let w = store.add(format!("{name}.weight"), vec![c_out, c_in, k, k], Init::He(c_in * k * k), rng);
    let b = bias.then(|| store.add(format!("{name}.bias"), vec![c_out], Init::Zeros, rng));
    ConvRef { w, b, c_in, c_out, k }
}

fn register_block<T: Real>(
    store: &mut WeightStore<T>,
    rng: &mut rand_chacha::ChaCha8Rng,
    name: &str,
    c_in: usize,
    c_out: usize,
) -> Block {
    Block {
        c1: register_conv(store, rng, &format!("{name}.conv1"), c_in, c_out, 3, true),
        c2: register_conv(store, rng, &format!("{name}.conv2"), c_out, c_out, 3, true),
    }
}

/// Additive attention gate on skip features `s` with gating signal `g`:
/// `alpha = sigmoid(psi^T relu(theta s + phi g + b_phi) + b_psi)`, output
/// `alpha * s`. Returns `(alpha, gated skip)`.
pub fn attention_gate<T: Real>(
    s: &Tensor<T>,
    g: &Tensor<T>,
    theta: &[T],
    phi: &[T],
    phi_bias: &[T],
    psi: &[T],
    psi_bias: T,
) -> (Tensor<T>, Tensor<T>) {
    let f_int = phi_bias.len();
    let th = conv2d(s, theta, None, f_int, 1);
    let mut qa = conv2d(g, phi, Some(phi_bias), f_int, 1);
    qa.add_assign(&th);
    let q = relu(&qa);
    let alpha = sigmoid(&conv2d(&q, psi, Some(&[psi_bias]), 1, 1));
    let gated = apply_mask(s, &alpha);
    (alpha, gated)
}

fn apply_mask<T: Real>(s: &Tensor<T>, alpha: &Tensor<T>) -> Tensor<T> {
    let mut out = s.clone();
    for c in 0..s.c {
        for (o, a) in out.plane_mut(c).iter_mut().zip(&alpha.data) {
            *o *= *a;
        }
    }
    out
}

impl<T: Real> UNet<T> {
    pub fn new(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut store = WeightStore::new(seed);
        let mut rng = WeightStore::<T>::rng(seed);
        let rng = &mut rng;
        let mut enc = Vec::new();
        let mut c_prev = config.input_channels;
        for l in 0..config.depth {
            let c = config.channels(l);
            enc.push(register_block(&mut store, rng, &format!("enc{l}"), c_prev, c));
            c_prev = c;
        }
        let mid = register_block(&mut store, rng, "mid", c_prev, config.channels(config.depth));
        let mut dec = Vec::new();
        for l in (0..config.depth).rev() {
            let c = config.channels(l);
            let conv = register_conv(&mut store, rng, &format!("dec{l}.up"), config.channels(l + 1), c, 3, true);
            let gate = config.use_attention.then(|| {
                let f_int = (c / 2).max(1);
                Gate {
                    theta: register_conv(&mut store, rng, &format!("dec{l}.att.theta"), c, f_int, 1, false),
                    phi: register_conv(&mut store, rng, &format!("dec{l}.att.phi"), c, f_int, 1, true),
                    psi: register_conv(&mut store, rng, &format!("dec{l}.att.psi"), f_int, 1, 1, true),
                }
            });
            let block = register_block(&mut store, rng, &format!("dec{l}"), 2 * c, c);
            dec.push(Up { conv, gate, block });
        }
        let mut head = register_conv(&mut store, rng, "head", config.base_channels, 1, 1, false);
        head.b = Some(store.add("head.bias".into(), vec![1], Init::Constant(config.output.initial_bias()), rng));
        Ok(Self { config, weights: store, enc, mid, dec, head })
    }

    /// Network with the architecture of `config` and the given weights.
    pub fn with_weights(config: NetworkConfig, weights: WeightStore<T>) -> Result<Self> {
        let mut net = Self::new(config, weights.seed)?;
        let manifest = weights.manifest();
        net.weights.load_flat(&manifest, &weights.flat())?;
        Ok(net)
    }

    pub fn input_shape(&self) -> (usize, usize, usize) {
        (self.config.input_channels, self.config.input_height, self.config.input_width)
    }

    fn conv(&self, r: &ConvRef, x: &Tensor<T>) -> Tensor<T> {
        conv2d(x, self.weights.data(r.w), r.b.map(|b| self.weights.data(b)), r.c_out, r.k)
    }

    fn conv_back(&self, r: &ConvRef, x: &Tensor<T>, dy: &Tensor<T>, grads: &mut Gradients<T>) -> Tensor<T> {
        debug_assert_eq!(x.c, r.c_in);
        let dx = conv2d_backward(x, self.weights.data(r.w), dy, r.k, &mut grads.0[r.w], None);
        if let Some(b) = r.b {
            for (o, db) in grads.0[b].iter_mut().enumerate() {
                *db += dy.plane(o).iter().copied().sum::<T>();
            }
        }
        dx
    }

    fn block(&self, b: &Block, x: Tensor<T>, name: &str, sig: &mut Signature) -> Result<BlockTrace<T>> {
        let a1 = self.conv(&b.c1, &x);
        let h1 = relu(&a1);
        h1.check_finite(&format!("{name}.conv1"))?;
        let a2 = self.conv(&b.c2, &h1);
        let h2 = relu(&a2);
        h2.check_finite(&format!("{name}.conv2"))?;
        sig.relu(&a1);
        sig.relu(&a2);
        Ok(BlockTrace { x, a1, h1, a2, h2 })
    }

    fn block_back(&self, b: &Block, t: &BlockTrace<T>, dh2: &Tensor<T>, grads: &mut Gradients<T>) -> Tensor<T> {
        let da2 = relu_backward(&t.a2, dh2);
        let dh1 = self.conv_back(&b.c2, &t.h1, &da2, grads);
        let da1 = relu_backward(&t.a1, &dh1);
        self.conv_back(&b.c1, &t.x, &da1, grads)
    }

    fn gate(&self, gt: &Gate, s: &Tensor<T>, g: &Tensor<T>, sig: &mut Signature) -> GateTrace<T> {
        let th = self.conv(&gt.theta, s);
        let mut qa = self.conv(&gt.phi, g);
        qa.add_assign(&th);
        let q = relu(&qa);
        sig.relu(&qa);
        let alpha = sigmoid(&self.conv(&gt.psi, &q));
        GateTrace { g: g.clone(), qa, q, alpha }
    }

    /// Returns gradients with respect to the skip input and the gating signal.
    fn gate_back(
        &self,
        gt: &Gate,
        t: &GateTrace<T>,
        s: &Tensor<T>,
        dout: &Tensor<T>,
        grads: &mut Gradients<T>,
    ) -> (Tensor<T>, Tensor<T>) {
        let mut ds = apply_mask(dout, &t.alpha);
        let mut dalpha = Tensor::zeros(1, s.h, s.w);
        for c in 0..s.c {
            for ((d, sv), gv) in dalpha.data.iter_mut().zip(s.plane(c)).zip(dout.plane(c)) {
                *d += *sv * *gv;
            }
        }
        let dpa = sigmoid_backward(&t.alpha, &dalpha);
        let dq = self.conv_back(&gt.psi, &t.q, &dpa, grads);
        let dqa = relu_backward(&t.qa, &dq);
        ds.add_assign(&self.conv_back(&gt.theta, s, &dqa, grads));
        let dg = self.conv_back(&gt.phi, &t.g, &dqa, grads);
        (ds, dg)
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        if x.shape() != self.input_shape() {
            return Err(Error::Shape(format!("input {:?}, network expects {:?}", x.shape(), self.input_shape())));
        }
        Ok(())
    }

    fn forward_trace(&self, x: &Tensor<T>, sig: &mut Signature) -> Result<Trace<T>> {
        self.check_input(x)?;
        let mut cur = x.clone();
        let mut enc = Vec::with_capacity(self.enc.len());
        for (l, b) in self.enc.iter().enumerate() {
            let t = self.block(b, cur, &format!("enc{l}"), sig)?;
            let (p, arg) = maxpool2(&t.h2);
            sig.bytes(&arg);
            enc.push((t, arg));
            cur = p;
        }
        let mid = self.block(&self.mid, cur, "mid", sig)?;
        cur = mid.h2.clone();
        let mut dec = Vec::with_capacity(self.dec.len());
        for (i, up) in self.dec.iter().enumerate() {
            let level = self.config.depth - 1 - i;
            let u = upsample2(&cur);
            let au = self.conv(&up.conv, &u);
            let g = relu(&au);
            g.check_finite(&format!("dec{level}.up"))?;
            sig.relu(&au);
            let s = &enc[level].0.h2;
            let (gated, gate) = match &up.gate {
                Some(gt) => {
                    let tr = self.gate(gt, s, &g, sig);
                    let gated = apply_mask(s, &tr.alpha);
                    gated.check_finite(&format!("dec{level}.att"))?;
                    (gated, Some(tr))
                }
                None => (s.clone(), None),
            };
            let cat = concat(&gated, &g);
            let block = self.block(&up.block, cat, &format!("dec{level}"), sig)?;
            cur = block.h2.clone();
            dec.push(DecTrace { level, u, au, gate, block });
        }
        let z = self.conv(&self.head, &cur);
        let out = match self.config.output {
            OutputActivation::Sigmoid => sigmoid(&z),
            OutputActivation::None => z,
        };
        out.check_finite("head")?;
        Ok(Trace { enc, mid, dec, head_in: cur, out })
    }

    /// Backward pass from the gradient at the head pre-activation.
    fn backward(&self, t: &Trace<T>, dz: &Tensor<T>) -> Gradients<T> {
        let mut grads = self.weights.zero_grads();
        let mut dcur = self.conv_back(&self.head, &t.head_in, dz, &mut grads);
        let mut dskip: Vec<Option<Tensor<T>>> = (0..self.config.depth).map(|_| None).collect();
        for (up, dt) in self.dec.iter().zip(&t.dec).rev() {
            let dcat = self.block_back(&up.block, &dt.block, &dcur, &mut grads);
            let c_skip = self.config.channels(dt.level);
            let (dgated, mut dg) = split(&dcat, c_skip);
            let s = &t.enc[dt.level].0.h2;
            let ds = match (&up.gate, &dt.gate) {
                (Some(gt), Some(tr)) => {
                    let (ds, dg2) = self.gate_back(gt, tr, s, &dgated, &mut grads);
                    dg.add_assign(&dg2);
                    ds
                }
                _ => dgated,
            };
            dskip[dt.level] = Some(ds);
            let dau = relu_backward(&dt.au, &dg);
            let du = self.conv_back(&up.conv, &dt.u, &dau, &mut grads);
            dcur = upsample2_backward(&du);
        }
        dcur = self.block_back(&self.mid, &t.mid, &dcur, &mut grads);
        for (l, (b, (bt, arg))) in self.enc.iter().zip(&t.enc).enumerate().rev() {
            let mut dh2 = maxpool2_backward(arg, &dcur, bt.h2.h, bt.h2.w);
            if let Some(ds) = &dskip[l] {
                dh2.add_assign(ds);
            }
            dcur = self.block_back(b, bt, &dh2, &mut grads);
        }
        grads
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward_trace(x, &mut Signature::default())?.out)
    }

    /// Attention masks of every decoder level, finest level last.
    pub fn attention_masks(&self, x: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        let t = self.forward_trace(x, &mut Signature::default())?;
        Ok(t.dec.into_iter().filter_map(|d| d.gate.map(|g| g.alpha)).collect())
    }

    pub fn infer_image(&self, features: &FeatureImage<T>) -> Result<Image<T>> {
        let x = feature_tensor(features)?;
        let y = self.forward(&x)?;
        Image::from_vec(y.data, y.h, y.w)
    }
}

/// Planar feature image as a network input tensor.
pub fn feature_tensor<T: Real>(f: &FeatureImage<T>) -> Result<Tensor<T>> {
    Tensor::from_vec(f.planes.clone(), N_FEAT, f.n_r, f.n_theta)
}

impl<T: Real> Model<T> for UNet<T> {
    type Input = Tensor<T>;

    fn weights(&self) -> &WeightStore<T> {
        &self.weights
    }

    fn weights_mut(&mut self) -> &mut WeightStore<T> {
        &mut self.weights
    }

    fn output_len(&self) -> usize {
        self.config.input_height * self.config.input_width
    }

    fn predict(&self, input: &Tensor<T>) -> Result<Vec<T>> {
        Ok(self.forward(input)?.data)
    }

    fn evaluate(&self, input: &Tensor<T>, target: &[T], loss: &LossConfig, with_grad: bool) -> Result<Evaluation<T>> {
        let mut sig = Signature::default();
        let t = self.forward_trace(input, &mut sig)?;
        let l = evaluate_loss(&t.out.data, target, loss)?;
        sig.bits(l.kinks.iter().copied());
        let grads = with_grad.then(|| {
            let dz = match self.config.output {
                OutputActivation::Sigmoid => l.sigmoid_input_grad(&t.out.data),
                OutputActivation::None => l.grad.clone(),
            };
            self.backward(&t, &Tensor { data: dz, c: 1, h: t.out.h, w: t.out.w })
        });
        Ok(Evaluation { loss: l.loss, output: t.out.data, grads, signature: sig.finish() })
    }

    fn layer_type(&self, param: &str) -> &'static str {
        if param.starts_with("head") {
            "head"
        } else if param.contains(".att.") {
            "attention"
        } else if param.contains(".up.") {
            "upsample"
        } else {
            "conv3x3"
        }
    }
}
