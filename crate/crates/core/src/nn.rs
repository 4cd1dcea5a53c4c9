//! Minimal dense/convolutional network with exact reverse-mode gradients.
//!
//! A [`Model`] is an ordered list of layers (valid-padding conv, relu,
//! flatten, dense) applied to a `[batch, channels, height, width]` input.
//! Backpropagation yields gradients of the cross-entropy loss (or of any
//! cotangent seeded at the logits or at the designated feature layer) with
//! respect to every parameter tensor and to the input itself — the latter is
//! what the PGD attacks consume.
//!
//! Everything is `f64`, single-threaded, and a pure function of
//! `(parameters, input)`: repeated calls are bitwise identical.

use alloc::vec;
use alloc::vec::Vec;

use core::fmt;

// When std is in the test graph, float math binds to inherent methods
// and this trait import goes quiet; no_std builds need it.
#[allow(unused_imports)]
use num_traits::Float;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::tensor::{ShapeError, Tensor};

/// Probabilities below this are clamped before `ln` in the cross-entropy.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum NnError {
    Shape(ShapeError),
    BadArch(&'static str),
}

impl fmt::Display for NnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NnError::Shape(e) => write!(f, "{e}"),
            NnError::BadArch(msg) => write!(f, "bad architecture: {msg}"),
        }
    }
}

impl From<ShapeError> for NnError {
    fn from(e: ShapeError) -> Self {
        NnError::Shape(e)
    }
}

/// Valid-padding stride-1 2-D convolution. Weights are laid out
/// `[out_ch][in_ch][kh][kw]`, one bias per output channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv2 {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kh: usize,
    pub kw: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Fully connected layer. Weights are `[out_dim][in_dim]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    Conv2(Conv2),
    Relu,
    Flatten,
    Dense(Dense),
}

impl Layer {
    pub fn param_count(&self) -> usize {
        match self {
            Layer::Conv2(c) => c.weight.len() + c.bias.len(),
            Layer::Dense(d) => d.weight.len() + d.bias.len(),
            _ => 0,
        }
    }
}

/// Architecture spec used by [`Model::build`]; shapes are inferred while
/// walking the list.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerSpec {
    Conv2 { out_ch: usize, kh: usize, kw: usize },
    Relu,
    Flatten,
    Dense { out_dim: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub layers: Vec<Layer>,
    /// Input shape per sample as `(channels, height, width)`.
    pub input_shape: (usize, usize, usize),
    /// Index of the layer whose output is the feature vector fed to the
    /// rejection head, when the model designates one.
    pub feature_layer: Option<usize>,
}

/// Cached activations from a forward pass: `activations[0]` is the reshaped
/// input and `activations[i + 1]` the output of layer `i`.
pub struct ForwardPass {
    pub activations: Vec<Tensor>,
}

impl ForwardPass {
    pub fn output(&self) -> &Tensor {
        self.activations.last().expect("non-empty pass")
    }
}

/// Logits plus (when the model designates a feature layer) the feature rows.
pub struct Output {
    pub logits: Tensor,
    pub features: Option<Tensor>,
}

/// Per-layer parameter gradients; `None` for parameter-free layers.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads {
    pub layers: Vec<Option<LayerGrad>>,
}

impl ParamGrads {
    pub fn zeros_like(model: &Model) -> Self {
        let layers = model
            .layers
            .iter()
            .map(|l| match l {
                Layer::Conv2(c) => Some(LayerGrad {
                    weight: vec![0.0; c.weight.len()],
                    bias: vec![0.0; c.bias.len()],
                }),
                Layer::Dense(d) => Some(LayerGrad {
                    weight: vec![0.0; d.weight.len()],
                    bias: vec![0.0; d.bias.len()],
                }),
                _ => None,
            })
            .collect();
        Self { layers }
    }

    pub fn all_finite(&self) -> bool {
        self.layers.iter().flatten().all(|g| {
            g.weight.iter().all(|v| v.is_finite()) && g.bias.iter().all(|v| v.is_finite())
        })
    }
}

/// Loss value plus gradients with respect to parameters and input.
pub struct Grads {
    pub loss: f64,
    pub params: ParamGrads,
    pub input: Tensor,
}

/// Cross-entropy value, logits, and input gradient without param gradients.
pub struct CeValueGrad {
    pub loss: f64,
    pub logits: Tensor,
    pub input_grad: Tensor,
}

impl Model {
    /// Build a model from an architecture spec with He-normal weight
    /// initialization (biases start at zero).
    pub fn build(
        input_shape: (usize, usize, usize),
        specs: &[LayerSpec],
        feature_layer: Option<usize>,
        rng: &mut ChaCha8Rng,
    ) -> Result<Self, NnError> {
        enum Cur {
            Chw(usize, usize, usize),
            Flat(usize),
        }
        let (c0, h0, w0) = input_shape;
        if c0 == 0 || h0 == 0 || w0 == 0 {
            return Err(NnError::BadArch("zero input dimension"));
        }
        let mut cur = Cur::Chw(c0, h0, w0);
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let layer = match (*spec, &cur) {
                (LayerSpec::Conv2 { out_ch, kh, kw }, Cur::Chw(c, h, w)) => {
                    if out_ch == 0 || kh == 0 || kw == 0 {
                        return Err(NnError::BadArch("zero conv dimension"));
                    }
                    if kh > *h || kw > *w {
                        return Err(NnError::BadArch("conv kernel larger than input"));
                    }
                    let in_ch = *c;
                    let fan_in = in_ch * kh * kw;
                    let weight = he_normal(out_ch * fan_in, fan_in, rng);
                    let l = Conv2 { out_ch, in_ch, kh, kw, weight, bias: vec![0.0; out_ch] };
                    cur = Cur::Chw(out_ch, *h - kh + 1, *w - kw + 1);
                    Layer::Conv2(l)
                }
                (LayerSpec::Conv2 { .. }, Cur::Flat(_)) => {
                    return Err(NnError::BadArch("conv after flatten"));
                }
                (LayerSpec::Relu, _) => Layer::Relu,
                (LayerSpec::Flatten, Cur::Chw(c, h, w)) => {
                    cur = Cur::Flat(c * h * w);
                    Layer::Flatten
                }
                (LayerSpec::Flatten, Cur::Flat(_)) => {
                    return Err(NnError::BadArch("flatten applied twice"));
                }
                (LayerSpec::Dense { out_dim }, Cur::Flat(d)) => {
                    if out_dim == 0 {
                        return Err(NnError::BadArch("zero dense dimension"));
                    }
                    let in_dim = *d;
                    let weight = he_normal(out_dim * in_dim, in_dim, rng);
                    let l = Dense { in_dim, out_dim, weight, bias: vec![0.0; out_dim] };
                    cur = Cur::Flat(out_dim);
                    Layer::Dense(l)
                }
                (LayerSpec::Dense { .. }, Cur::Chw(..)) => {
                    return Err(NnError::BadArch("dense before flatten"));
                }
            };
            layers.push(layer);
        }
        if !matches!(cur, Cur::Flat(_)) {
            return Err(NnError::BadArch("model must end in a dense/flat output"));
        }
        if let Some(f) = feature_layer {
            if f >= layers.len() {
                return Err(NnError::BadArch("feature layer index out of range"));
            }
        }
        Ok(Model { layers, input_shape, feature_layer })
    }

    /// The desk-scale classifier: two small conv blocks, a 32-wide feature
    /// layer (post-relu output is the feature vector), and a `k`-way head.
    pub fn desk_cnn(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<Self, NnError> {
        Model::build(
            (1, 2, n),
            &[
                LayerSpec::Conv2 { out_ch: 16, kh: 1, kw: 3 },
                LayerSpec::Relu,
                LayerSpec::Conv2 { out_ch: 8, kh: 2, kw: 3 },
                LayerSpec::Relu,
                LayerSpec::Flatten,
                LayerSpec::Dense { out_dim: 32 },
                LayerSpec::Relu,
                LayerSpec::Dense { out_dim: k },
            ],
            Some(6),
            rng,
        )
    }

    /// Number of classes, i.e. the width of the final layer.
    pub fn num_classes(&self) -> usize {
        self.out_dim_of(self.layers.len())
    }

    /// Width of the designated feature layer output.
    pub fn feature_dim(&self) -> Option<usize> {
        self.feature_layer.map(|f| self.out_dim_of(f + 1))
    }

    /// Flattened input dimension per sample.
    pub fn input_dim(&self) -> usize {
        let (c, h, w) = self.input_shape;
        c * h * w
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Output width after the first `n_layers` layers (flattened).
    fn out_dim_of(&self, n_layers: usize) -> usize {
        let (mut c, mut h, mut w) = self.input_shape;
        let mut flat: Option<usize> = None;
        for l in self.layers.iter().take(n_layers) {
            match l {
                Layer::Conv2(cv) => {
                    c = cv.out_ch;
                    h = h - cv.kh + 1;
                    w = w - cv.kw + 1;
                }
                Layer::Relu => {}
                Layer::Flatten => flat = Some(c * h * w),
                Layer::Dense(d) => flat = Some(d.out_dim),
            }
        }
        flat.unwrap_or(c * h * w)
    }

    /// Reshape a `[batch, ...]` input to `[batch, c, h, w]`, checking volume.
    fn reshape_input(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let (c, h, w) = self.input_shape;
        let per = c * h * w;
        let batch = x.batch();
        if batch == 0 || x.len() != batch * per {
            return Err(NnError::Shape(ShapeError {
                expected: vec![batch, c, h, w],
                got: x.shape().to_vec(),
            }));
        }
        Ok(Tensor::new(vec![batch, c, h, w], x.data().to_vec())?)
    }

    fn forward_upto(&self, x: &Tensor, n_layers: usize) -> Result<ForwardPass, NnError> {
        let mut activations = Vec::with_capacity(n_layers + 1);
        activations.push(self.reshape_input(x)?);
        for layer in self.layers.iter().take(n_layers) {
            let next = layer_forward(layer, activations.last().unwrap())?;
            activations.push(next);
        }
        Ok(ForwardPass { activations })
    }

    pub fn forward_full(&self, x: &Tensor) -> Result<ForwardPass, NnError> {
        self.forward_upto(x, self.layers.len())
    }

    /// Run the whole network, returning logits and (if designated) the
    /// feature-layer output.
    pub fn forward(&self, x: &Tensor) -> Result<Output, NnError> {
        let pass = self.forward_full(x)?;
        let features = self.feature_layer.map(|f| flatten_rows(&pass.activations[f + 1]));
        let logits = flatten_rows(pass.output());
        Ok(Output { logits, features })
    }

    /// Feature rows for a batch; errors if no feature layer is designated.
    pub fn features(&self, x: &Tensor) -> Result<Tensor, NnError> {
        let f = self.feature_layer.ok_or(NnError::BadArch("no feature layer designated"))?;
        let pass = self.forward_upto(x, f + 1)?;
        Ok(flatten_rows(pass.output()))
    }

    /// Gradients of the batch-mean cross-entropy against `target`
    /// (`[batch, K]` rows on the simplex) with respect to every parameter
    /// and to the input.
    pub fn grads(&self, x: &Tensor, target: &Tensor) -> Result<Grads, NnError> {
        let pass = self.forward_full(x)?;
        let logits = flatten_rows(pass.output());
        check_same_shape(&logits, target)?;
        let loss = loss_ce(&logits, target);
        let batch = logits.batch() as f64;
        let probs = softmax_rows(&logits);
        let mut seed = probs;
        for (s, t) in seed.data_mut().iter_mut().zip(target.data()) {
            *s = (*s - *t) / batch;
        }
        let seed = seed.reshaped(pass.output().shape().to_vec())?;
        let (params, input) = self.backward(&pass, self.layers.len(), seed, true)?;
        Ok(Grads { loss, params: params.expect("requested params"), input })
    }

    /// Loss, logits, and the input gradient of the batch-mean cross-entropy,
    /// skipping the parameter gradients. This is the attack-side fast path.
    pub fn value_grad_ce(&self, x: &Tensor, target: &Tensor) -> Result<CeValueGrad, NnError> {
        let pass = self.forward_full(x)?;
        let logits = flatten_rows(pass.output());
        check_same_shape(&logits, target)?;
        let loss = loss_ce(&logits, target);
        let batch = logits.batch() as f64;
        let mut seed = softmax_rows(&logits);
        for (s, t) in seed.data_mut().iter_mut().zip(target.data()) {
            *s = (*s - *t) / batch;
        }
        let seed = seed.reshaped(pass.output().shape().to_vec())?;
        let (_, input_grad) = self.backward(&pass, self.layers.len(), seed, false)?;
        Ok(CeValueGrad { loss, logits, input_grad })
    }

    /// Input gradient of `cotangent · logits` (no softmax), with parameter
    /// gradients alongside.
    pub fn logit_backward(&self, x: &Tensor, cotangent: &Tensor) -> Result<(ParamGrads, Tensor), NnError> {
        let pass = self.forward_full(x)?;
        let logits = flatten_rows(pass.output());
        check_same_shape(&logits, cotangent)?;
        let seed = Tensor::new(pass.output().shape().to_vec(), cotangent.data().to_vec())?;
        let (params, input) = self.backward(&pass, self.layers.len(), seed, true)?;
        Ok((params.expect("requested params"), input))
    }

    /// Input gradient of `cotangent · logits` for a batch, skipping the
    /// parameter gradients.
    pub fn logit_vjp(&self, x: &Tensor, cotangent: &Tensor) -> Result<Tensor, NnError> {
        let pass = self.forward_full(x)?;
        let logits = flatten_rows(pass.output());
        check_same_shape(&logits, cotangent)?;
        let seed = Tensor::new(pass.output().shape().to_vec(), cotangent.data().to_vec())?;
        let (_, input) = self.backward(&pass, self.layers.len(), seed, false)?;
        Ok(input)
    }

    /// `(∂ζ/∂x)ᵀ · cotangent` for one sample: the input gradient of the
    /// feature-layer output contracted with a length-F cotangent, computed
    /// without materializing the Jacobian.
    pub fn feature_vjp(&self, x: &Tensor, cotangent: &[f64]) -> Result<Tensor, NnError> {
        let f = self.feature_layer.ok_or(NnError::BadArch("no feature layer designated"))?;
        let pass = self.forward_upto(x, f + 1)?;
        let out = pass.output();
        let batch = out.batch();
        let width = out.len() / batch;
        if cotangent.len() != width {
            return Err(NnError::Shape(ShapeError {
                expected: vec![width],
                got: vec![cotangent.len()],
            }));
        }
        let mut seed = Vec::with_capacity(out.len());
        for _ in 0..batch {
            seed.extend_from_slice(cotangent);
        }
        let seed = Tensor::new(out.shape().to_vec(), seed)?;
        let (_, input) = self.backward(&pass, f + 1, seed, false)?;
        Ok(input)
    }

    /// Backpropagate `seed = dL/d(activation[upto])` down to the input.
    fn backward(
        &self,
        pass: &ForwardPass,
        upto: usize,
        seed: Tensor,
        want_params: bool,
    ) -> Result<(Option<ParamGrads>, Tensor), NnError> {
        let mut params = if want_params { Some(ParamGrads::zeros_like(self)) } else { None };
        let mut grad = seed;
        for i in (0..upto).rev() {
            let input = &pass.activations[i];
            let layer_grad = params.as_mut().map(|p| &mut p.layers[i]);
            grad = layer_backward(&self.layers[i], input, &grad, layer_grad)?;
        }
        Ok((params, grad))
    }
}

fn he_normal(len: usize, fan_in: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let std = (2.0 / fan_in as f64).sqrt();
    (0..len).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// View a `[batch, ...]` tensor as `[batch, width]`.
fn flatten_rows(t: &Tensor) -> Tensor {
    let batch = t.batch();
    let width = t.len() / batch;
    Tensor::new(vec![batch, width], t.data().to_vec()).expect("volume preserved")
}

fn check_same_shape(a: &Tensor, b: &Tensor) -> Result<(), NnError> {
    if a.shape() != b.shape() {
        return Err(NnError::Shape(ShapeError {
            expected: a.shape().to_vec(),
            got: b.shape().to_vec(),
        }));
    }
    Ok(())
}

fn layer_forward(layer: &Layer, x: &Tensor) -> Result<Tensor, NnError> {
    match layer {
        Layer::Relu => {
            let mut out = x.clone();
            for v in out.data_mut() {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            Ok(out)
        }
        Layer::Flatten => {
            let batch = x.batch();
            let width = x.len() / batch;
            Ok(x.clone().reshaped(vec![batch, width])?)
        }
        Layer::Dense(d) => {
            let shape = x.shape();
            if shape.len() != 2 || shape[1] != d.in_dim {
                return Err(NnError::Shape(ShapeError {
                    expected: vec![shape[0], d.in_dim],
                    got: shape.to_vec(),
                }));
            }
            let batch = shape[0];
            let mut out = vec![0.0; batch * d.out_dim];
            for b in 0..batch {
                let xin = &x.data()[b * d.in_dim..(b + 1) * d.in_dim];
                let orow = &mut out[b * d.out_dim..(b + 1) * d.out_dim];
                for (o, ov) in orow.iter_mut().enumerate() {
                    let wrow = &d.weight[o * d.in_dim..(o + 1) * d.in_dim];
                    let mut acc = d.bias[o];
                    for (w, xi) in wrow.iter().zip(xin) {
                        acc += w * xi;
                    }
                    *ov = acc;
                }
            }
            Ok(Tensor::new(vec![batch, d.out_dim], out)?)
        }
        Layer::Conv2(c) => {
            let shape = x.shape();
            if shape.len() != 4 || shape[1] != c.in_ch || shape[2] < c.kh || shape[3] < c.kw {
                return Err(NnError::Shape(ShapeError {
                    expected: vec![shape[0], c.in_ch, c.kh, c.kw],
                    got: shape.to_vec(),
                }));
            }
            let (batch, h, w) = (shape[0], shape[2], shape[3]);
            let (oh, ow) = (h - c.kh + 1, w - c.kw + 1);
            let mut out = vec![0.0; batch * c.out_ch * oh * ow];
            let xs = x.data();
            for b in 0..batch {
                for oc in 0..c.out_ch {
                    let obase = ((b * c.out_ch) + oc) * oh * ow;
                    out[obase..obase + oh * ow].fill(c.bias[oc]);
                    for ic in 0..c.in_ch {
                        let ibase = ((b * c.in_ch) + ic) * h * w;
                        let wbase = ((oc * c.in_ch) + ic) * c.kh * c.kw;
                        for kh in 0..c.kh {
                            for kw in 0..c.kw {
                                let wv = c.weight[wbase + kh * c.kw + kw];
                                for y in 0..oh {
                                    let irow = ibase + (y + kh) * w + kw;
                                    let orow = obase + y * ow;
                                    for xx in 0..ow {
                                        out[orow + xx] += wv * xs[irow + xx];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            Ok(Tensor::new(vec![batch, c.out_ch, oh, ow], out)?)
        }
    }
}

/// One layer of backprop: given the layer input and `dL/d(output)`, return
/// `dL/d(input)`, accumulating parameter gradients when requested.
fn layer_backward(
    layer: &Layer,
    input: &Tensor,
    grad_out: &Tensor,
    layer_grad: Option<&mut Option<LayerGrad>>,
) -> Result<Tensor, NnError> {
    match layer {
        Layer::Relu => {
            let mut gin = grad_out.clone();
            for (g, x) in gin.data_mut().iter_mut().zip(input.data()) {
                if *x <= 0.0 {
                    *g = 0.0;
                }
            }
            Ok(gin)
        }
        Layer::Flatten => Ok(grad_out.clone().reshaped(input.shape().to_vec())?),
        Layer::Dense(d) => {
            let batch = input.batch();
            let mut gin = vec![0.0; batch * d.in_dim];
            let gout = grad_out.data();
            let xin = input.data();
            if let Some(slot) = layer_grad {
                let g = slot.as_mut().expect("dense layer has params");
                for b in 0..batch {
                    let go = &gout[b * d.out_dim..(b + 1) * d.out_dim];
                    let xi = &xin[b * d.in_dim..(b + 1) * d.in_dim];
                    for (o, gov) in go.iter().enumerate() {
                        g.bias[o] += *gov;
                        let wrow = &mut g.weight[o * d.in_dim..(o + 1) * d.in_dim];
                        for (wv, xv) in wrow.iter_mut().zip(xi) {
                            *wv += gov * xv;
                        }
                    }
                }
            }
            for b in 0..batch {
                let go = &gout[b * d.out_dim..(b + 1) * d.out_dim];
                let gi = &mut gin[b * d.in_dim..(b + 1) * d.in_dim];
                for (o, gov) in go.iter().enumerate() {
                    let wrow = &d.weight[o * d.in_dim..(o + 1) * d.in_dim];
                    for (giv, wv) in gi.iter_mut().zip(wrow) {
                        *giv += gov * wv;
                    }
                }
            }
            Ok(Tensor::new(vec![batch, d.in_dim], gin)?)
        }
        Layer::Conv2(c) => {
            let shape = input.shape();
            let (batch, h, w) = (shape[0], shape[2], shape[3]);
            let (oh, ow) = (h - c.kh + 1, w - c.kw + 1);
            let xs = input.data();
            let gout = grad_out.data();
            let mut gin = vec![0.0; input.len()];
            let mut grad_slot = layer_grad;
            for b in 0..batch {
                for oc in 0..c.out_ch {
                    let obase = ((b * c.out_ch) + oc) * oh * ow;
                    if let Some(slot) = grad_slot.as_deref_mut() {
                        let g = slot.as_mut().expect("conv layer has params");
                        for v in &gout[obase..obase + oh * ow] {
                            g.bias[oc] += *v;
                        }
                    }
                    for ic in 0..c.in_ch {
                        let ibase = ((b * c.in_ch) + ic) * h * w;
                        let wbase = ((oc * c.in_ch) + ic) * c.kh * c.kw;
                        for kh in 0..c.kh {
                            for kw in 0..c.kw {
                                let widx = wbase + kh * c.kw + kw;
                                let wv = c.weight[widx];
                                let mut wacc = 0.0;
                                for y in 0..oh {
                                    let irow = ibase + (y + kh) * w + kw;
                                    let orow = obase + y * ow;
                                    for xx in 0..ow {
                                        let g = gout[orow + xx];
                                        wacc += g * xs[irow + xx];
                                        gin[irow + xx] += g * wv;
                                    }
                                }
                                if let Some(slot) = grad_slot.as_deref_mut() {
                                    let gl = slot.as_mut().expect("conv layer has params");
                                    gl.weight[widx] += wacc;
                                }
                            }
                        }
                    }
                }
            }
            Ok(Tensor::new(shape.to_vec(), gin)?)
        }
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let batch = logits.batch();
    let k = logits.len() / batch;
    let mut out = logits.clone();
    for b in 0..batch {
        let row = &mut out.data_mut()[b * k..(b + 1) * k];
        let mut m = f64::NEG_INFINITY;
        for v in row.iter() {
            if *v > m {
                m = *v;
            }
        }
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - m).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Batch-mean cross-entropy `−Σ target·ln(softmax(logits))`, with the
/// probability clamped at [`LOG_CLAMP`] before the log.
pub fn loss_ce(logits: &Tensor, target: &Tensor) -> f64 {
    debug_assert_eq!(logits.shape(), target.shape());
    let probs = softmax_rows(logits);
    let batch = logits.batch() as f64;
    let mut loss = 0.0;
    for (p, t) in probs.data().iter().zip(target.data()) {
        if *t != 0.0 {
            loss -= t * p.max(LOG_CLAMP).ln();
        }
    }
    loss / batch
}

/// One-hot rows for a batch of labels.
pub fn one_hot(labels: &[usize], k: usize) -> Tensor {
    let mut data = vec![0.0; labels.len() * k];
    for (b, &y) in labels.iter().enumerate() {
        data[b * k + y] = 1.0;
    }
    Tensor::new(vec![labels.len(), k], data).expect("volume by construction")
}

/// Index of the largest entry; ties broken by the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate().skip(1) {
        if *v > row[best] {
            best = i;
        }
    }
    best
}

/// SGD with classical momentum: `v ← μ·v + g`, `θ ← θ − lr·v`.
pub struct Sgd {
    pub lr: f64,
    pub momentum: f64,
    velocity: Option<ParamGrads>,
}

impl Sgd {
    pub fn new(lr: f64, momentum: f64) -> Self {
        Self { lr, momentum, velocity: None }
    }

    pub fn step(&mut self, model: &mut Model, grads: &ParamGrads) {
        let velocity = self.velocity.get_or_insert_with(|| ParamGrads::zeros_like(model));
        for (i, layer) in model.layers.iter_mut().enumerate() {
            let (Some(g), Some(v)) = (&grads.layers[i], &mut velocity.layers[i]) else {
                continue;
            };
            let (weight, bias) = match layer {
                Layer::Conv2(c) => (&mut c.weight, &mut c.bias),
                Layer::Dense(d) => (&mut d.weight, &mut d.bias),
                _ => continue,
            };
            for ((w, vw), gw) in weight.iter_mut().zip(&mut v.weight).zip(&g.weight) {
                *vw = self.momentum * *vw + gw;
                *w -= self.lr * *vw;
            }
            for ((b, vb), gb) in bias.iter_mut().zip(&mut v.bias).zip(&g.bias) {
                *vb = self.momentum * *vb + gb;
                *b -= self.lr * *vb;
            }
        }
    }
}
