//! The encoder network: optional soft histogram, four dense layers
//! (128, 64, 32, d) with ReLU on the first three, and a softmax head on the
//! d-dimensional embedding. Forward and backward passes are written out by
//! hand; parameters are updated with Adam.

use serde::{Deserialize, Serialize};

use crate::affinity::{student_t, AffinityMatrix};
use crate::divergence::{generic_grad_wrt_z, DivergenceKind};
use crate::error::{invalid_config, invalid_input, DrenError, Result};
use crate::histlayer::{hist_backward, hist_forward, HistParams};
use crate::numerics::{stable_softmax_rows, Matrix, SeededRng};

/// Widths of the three ReLU layers preceding the embedding layer.
pub const HIDDEN_SIZES: [usize; 3] = [128, 64, 32];

/// Floor on predicted probabilities inside the cross-entropy log.
pub const CE_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    /// `fan_in × fan_out`
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    /// Glorot-uniform weights in `±√(6/(fan_in+fan_out))`, zero bias.
    fn glorot(fan_in: usize, fan_out: usize, rng: &mut SeededRng) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let mut weights = Matrix::zeros(fan_in, fan_out);
        for w in weights.as_mut_slice() {
            *w = rng.uniform(-limit, limit);
        }
        Dense {
            weights,
            bias: vec![0.0; fan_out],
        }
    }

    fn apply(&self, input: &Matrix) -> Result<Matrix> {
        let mut out = input.matmul(&self.weights)?;
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(&self.bias) {
                *o += b;
            }
        }
        Ok(out)
    }

    fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    fn fan_out(&self) -> usize {
        self.weights.cols()
    }
}

/// Adam moment buffers, one pair per parameter tensor in declaration order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub first: Vec<Vec<f64>>,
    pub second: Vec<Vec<f64>>,
}

impl AdamState {
    fn zeros_like(sizes: &[usize]) -> Self {
        AdamState {
            step: 0,
            first: sizes.iter().map(|&n| vec![0.0; n]).collect(),
            second: sizes.iter().map(|&n| vec![0.0; n]).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr > 0.0
            && self.eps > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.lr.is_finite()
            && self.eps.is_finite();
        if ok {
            Ok(())
        } else {
            Err(invalid_config(format!("invalid Adam hyperparameters {self:?}")))
        }
    }
}

/// Encoder weights, optional histogram layer, and optimizer state.
#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams {
    /// Raw feature dimension `D` (before the histogram transform).
    pub input_dim: usize,
    /// Four dense layers ending at the embedding.
    pub layers: Vec<Dense>,
    /// Softmax output layer, `d → C`.
    pub head: Dense,
    pub hist: Option<HistParams>,
    pub adam: AdamState,
}

impl EncoderParams {
    pub fn init(
        input_dim: usize,
        embed_dim: usize,
        classes: usize,
        hist: Option<HistParams>,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        if input_dim == 0 || embed_dim == 0 || classes == 0 {
            return Err(invalid_config(format!(
                "encoder dimensions must be positive (D={input_dim}, d={embed_dim}, C={classes})"
            )));
        }
        if let Some(hp) = &hist {
            hp.validate()?;
        }
        let first = hist.as_ref().map_or(input_dim, |hp| hp.output_dim(input_dim));
        let mut widths = vec![first];
        widths.extend_from_slice(&HIDDEN_SIZES);
        widths.push(embed_dim);
        let layers = widths
            .windows(2)
            .map(|w| Dense::glorot(w[0], w[1], rng))
            .collect();
        let head = Dense::glorot(embed_dim, classes, rng);
        let mut params = EncoderParams {
            input_dim,
            layers,
            head,
            hist,
            adam: AdamState::zeros_like(&[]),
        };
        params.adam = AdamState::zeros_like(&params.tensor_sizes());
        Ok(params)
    }

    pub fn embed_dim(&self) -> usize {
        self.head.fan_in()
    }

    pub fn classes(&self) -> usize {
        self.head.fan_out()
    }

    /// Tensor names in declaration order.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for l in 0..self.layers.len() {
            names.push(format!("layer{}.weight", l + 1));
            names.push(format!("layer{}.bias", l + 1));
        }
        names.push("head.weight".into());
        names.push("head.bias".into());
        if self.hist.is_some() {
            names.push("hist.centers".into());
            names.push("hist.widths".into());
        }
        names
    }

    /// `(rows, cols)` for every tensor; vectors are `(1, n)`.
    pub fn tensor_shapes(&self) -> Vec<(usize, usize)> {
        let mut shapes = Vec::new();
        for d in self.layers.iter().chain(std::iter::once(&self.head)) {
            shapes.push(d.weights.shape());
            shapes.push((1, d.bias.len()));
        }
        if let Some(hp) = &self.hist {
            shapes.push((1, hp.bins()));
            shapes.push((1, hp.bins()));
        }
        shapes
    }

    fn tensor_sizes(&self) -> Vec<usize> {
        self.tensor_shapes().iter().map(|(r, c)| r * c).collect()
    }

    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for d in self.layers.iter().chain(std::iter::once(&self.head)) {
            out.push(d.weights.as_slice());
            out.push(&d.bias);
        }
        if let Some(hp) = &self.hist {
            out.push(&hp.centers);
            out.push(&hp.widths);
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for d in self.layers.iter_mut().chain(std::iter::once(&mut self.head)) {
            out.push(d.weights.as_mut_slice());
            out.push(&mut d.bias);
        }
        if let Some(hp) = &mut self.hist {
            out.push(&mut hp.centers);
            out.push(&mut hp.widths);
        }
        out
    }

    pub fn parameter_count(&self) -> usize {
        self.tensor_sizes().iter().sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Applies the histogram (if any) to raw features.
    pub fn encoder_input(&self, x: &Matrix) -> Result<Matrix> {
        if x.cols() != self.input_dim {
            return Err(invalid_input(format!(
                "encoder expects {} features, got {}",
                self.input_dim,
                x.cols()
            )));
        }
        match &self.hist {
            Some(hp) => hist_forward(x, hp),
            None => Ok(x.clone()),
        }
    }
}

/// Intermediate values of one forward pass.
#[derive(Clone, Debug)]
pub struct ForwardTrace {
    /// Raw features as given.
    pub raw: Matrix,
    /// Input to the first dense layer (post-histogram).
    pub input: Matrix,
    /// Pre-activations of the four dense layers; the last one is `Z`.
    pub pre: Vec<Matrix>,
    /// ReLU outputs of the first three layers.
    pub hidden: Vec<Matrix>,
    pub logits: Matrix,
    /// Softmax probabilities `Ŷ`.
    pub probs: Matrix,
}

impl ForwardTrace {
    pub fn embedding(&self) -> &Matrix {
        self.pre.last().expect("encoder has layers")
    }
}

fn relu(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    out.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
    out
}

pub fn forward(params: &EncoderParams, x: &Matrix) -> Result<ForwardTrace> {
    let input = params.encoder_input(x)?;
    let last = params.layers.len() - 1;
    let mut pre = Vec::with_capacity(params.layers.len());
    let mut hidden = Vec::with_capacity(last);
    let mut current = input.clone();
    for (l, layer) in params.layers.iter().enumerate() {
        let z = layer.apply(&current)?;
        if l < last {
            current = relu(&z);
            hidden.push(current.clone());
        }
        pre.push(z);
    }
    let logits = params.head.apply(pre.last().expect("encoder has layers"))?;
    let probs = stable_softmax_rows(&logits)?;
    Ok(ForwardTrace {
        raw: x.clone(),
        input,
        pre,
        hidden,
        logits,
        probs,
    })
}

/// Embedding `Z` only.
pub fn embed(params: &EncoderParams, x: &Matrix) -> Result<Matrix> {
    Ok(forward(params, x)?.pre.pop().expect("encoder has layers"))
}

/// Argmax of the softmax head; ties go to the lower class index.
pub fn predict(params: &EncoderParams, x: &Matrix) -> Result<Vec<usize>> {
    let trace = forward(params, x)?;
    Ok(trace.probs.row_iter().map(argmax).collect())
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = j;
        }
    }
    best
}

pub fn one_hot(labels: &[usize], classes: usize) -> Result<Matrix> {
    let mut y = Matrix::zeros(labels.len(), classes);
    for (i, &c) in labels.iter().enumerate() {
        if c >= classes {
            return Err(invalid_input(format!("label {c} at row {i} is not below {classes}")));
        }
        y[(i, c)] = 1.0;
    }
    Ok(y)
}

/// Mean natural-log cross-entropy of `y_hat` against one-hot `y`.
pub fn cross_entropy(y_hat: &Matrix, y: &Matrix) -> Result<f64> {
    if y_hat.shape() != y.shape() {
        return Err(invalid_input(format!(
            "prediction shape {:?} does not match labels {:?}",
            y_hat.shape(),
            y.shape()
        )));
    }
    let n = y.rows();
    if n == 0 {
        return Err(invalid_input("cross-entropy of an empty batch"));
    }
    let mut total = 0.0;
    for i in 0..n {
        let row = y.row(i);
        let ones = row.iter().filter(|&&v| v == 1.0).count();
        let zeros = row.iter().filter(|&&v| v == 0.0).count();
        if ones != 1 || ones + zeros != row.len() {
            return Err(invalid_input(format!("label row {i} is not one-hot")));
        }
        let c = row.iter().position(|&v| v == 1.0).expect("one-hot");
        total -= y_hat[(i, c)].max(CE_FLOOR).ln();
    }
    Ok(total / n as f64)
}

/// Parameter gradients, aligned with [`EncoderParams::tensors`].
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub tensors: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// Gradient of the softmax head, `(weights, bias)`.
    pub fn head(&self, params: &EncoderParams) -> (&[f64], &[f64]) {
        let k = 2 * params.layers.len();
        (&self.tensors[k], &self.tensors[k + 1])
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flatten().copied().collect()
    }
}

pub(crate) fn validate_lambda(lambda: f64) -> Result<()> {
    if (0.0..=1.0).contains(&lambda) {
        Ok(())
    } else {
        Err(invalid_config(format!("lambda must lie in [0, 1], got {lambda}")))
    }
}

fn column_sums(m: &Matrix) -> Vec<f64> {
    let mut out = vec![0.0; m.cols()];
    for row in m.row_iter() {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out
}

/// Gradient of `(1 − λ)·CE(Ŷ, Y) + λ·L_div` with respect to every parameter.
///
/// The classification path enters at the logits as `(1 − λ)(Ŷ − Y)/N`; the
/// divergence path enters at `Z` as `λ·div_grad_z` and never reaches `P`.
/// With `λ = 1` the head receives exactly zero gradient.
pub fn backward(
    params: &EncoderParams,
    trace: &ForwardTrace,
    y: &Matrix,
    div_grad_z: Option<&Matrix>,
    lambda: f64,
) -> Result<Gradients> {
    validate_lambda(lambda)?;
    let n = trace.probs.rows();
    if y.shape() != trace.probs.shape() {
        return Err(invalid_input("label matrix does not match the forward trace"));
    }
    let z = trace.embedding();
    if let Some(g) = div_grad_z {
        if g.shape() != z.shape() {
            return Err(invalid_input(format!(
                "divergence gradient is {:?}, embedding is {:?}",
                g.shape(),
                z.shape()
            )));
        }
    }

    let class_weight = (1.0 - lambda) / n as f64;
    let mut dlogits = trace.probs.clone();
    for (d, t) in dlogits.as_mut_slice().iter_mut().zip(y.as_slice()) {
        *d = class_weight * (*d - t);
    }
    let head_w = z.t_matmul(&dlogits)?;
    let head_b = column_sums(&dlogits);

    let mut upstream = dlogits.matmul_t(&params.head.weights)?;
    if let Some(g) = div_grad_z.filter(|_| lambda != 0.0) {
        for (u, gz) in upstream.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *u += lambda * gz;
        }
    }

    let layers = params.layers.len();
    let mut layer_grads = vec![(Vec::new(), Vec::new()); layers];
    for l in (0..layers).rev() {
        if l + 1 < layers {
            // ReLU gate on this layer's pre-activation.
            for (u, &p) in upstream.as_mut_slice().iter_mut().zip(trace.pre[l].as_slice()) {
                if p <= 0.0 {
                    *u = 0.0;
                }
            }
        }
        let input = if l == 0 { &trace.input } else { &trace.hidden[l - 1] };
        let gw = input.t_matmul(&upstream)?;
        let gb = column_sums(&upstream);
        if l > 0 || params.hist.is_some() {
            upstream = upstream.matmul_t(&params.layers[l].weights)?;
        }
        layer_grads[l] = (gw.into_vec(), gb);
    }

    let mut tensors = Vec::with_capacity(2 * layers + 4);
    for (w, b) in layer_grads {
        tensors.push(w);
        tensors.push(b);
    }
    tensors.push(head_w.into_vec());
    tensors.push(head_b);
    if let Some(hp) = &params.hist {
        let hg = hist_backward(&trace.raw, hp, &upstream)?;
        tensors.push(hg.centers);
        tensors.push(hg.widths);
    }
    Ok(Gradients { tensors })
}

/// Loss terms of one evaluation of the joint objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub total: f64,
    pub class: f64,
    pub div: f64,
}

impl LossParts {
    pub fn combine(class: f64, div: f64, lambda: f64) -> Self {
        LossParts {
            total: (1.0 - lambda) * class + lambda * div,
            class,
            div,
        }
    }
}

/// Forward pass, loss and gradient of the joint objective on one batch with
/// `P` held fixed. `divergence = None` drops the divergence term entirely.
pub fn loss_and_gradients(
    params: &EncoderParams,
    x: &Matrix,
    y: &Matrix,
    p: Option<&AffinityMatrix>,
    divergence: Option<DivergenceKind>,
    lambda: f64,
) -> Result<(LossParts, Gradients, ForwardTrace)> {
    validate_lambda(lambda)?;
    let trace = forward(params, x)?;
    let class = cross_entropy(&trace.probs, y)?;
    let (div, div_grad) = match (divergence, p) {
        (Some(kind), Some(p)) => {
            let z = trace.embedding();
            let q = student_t(z)?.q;
            let value = kind.evaluate(p, &q)?;
            (value, Some(generic_grad_wrt_z(kind, p, &q, z)?))
        }
        (Some(_), None) => return Err(invalid_input("divergence requested without P")),
        (None, _) => (0.0, None),
    };
    let grads = backward(params, &trace, y, div_grad.as_ref(), lambda)?;
    Ok((LossParts::combine(class, div, lambda), grads, trace))
}

/// Loss of the joint objective only; this is what finite differences probe.
pub fn joint_loss(
    params: &EncoderParams,
    x: &Matrix,
    y: &Matrix,
    p: &AffinityMatrix,
    divergence: DivergenceKind,
    lambda: f64,
) -> Result<LossParts> {
    let trace = forward(params, x)?;
    let class = cross_entropy(&trace.probs, y)?;
    let q = student_t(trace.embedding())?.q;
    let div = divergence.evaluate(p, &q)?;
    Ok(LossParts::combine(class, div, lambda))
}

/// Bias-corrected Adam update applied to every tensor.
///
/// Histogram widths enter the forward pass squared, so after the update they
/// are replaced by their magnitude (floored at 1e-12) to stay positive.
pub fn adam_step(params: &mut EncoderParams, grads: &Gradients, cfg: &AdamConfig) -> Result<()> {
    cfg.validate()?;
    let shapes_match = grads.tensors.len() == params.adam.first.len()
        && grads
            .tensors
            .iter()
            .zip(params.tensors())
            .all(|(g, t)| g.len() == t.len());
    if !shapes_match {
        return Err(invalid_input("gradient tensors do not match parameters"));
    }
    if !grads.is_finite() {
        return Err(DrenError::TrainingDiverged {
            epoch: None,
            reason: "non-finite gradient".into(),
        });
    }
    let mut adam = std::mem::replace(&mut params.adam, AdamState::zeros_like(&[]));
    adam.step += 1;
    let t = adam.step as i32;
    let bc1 = 1.0 - cfg.beta1.powi(t);
    let bc2 = 1.0 - cfg.beta2.powi(t);
    for (k, tensor) in params.tensors_mut().into_iter().enumerate() {
        let g = &grads.tensors[k];
        let (m, v) = (&mut adam.first[k], &mut adam.second[k]);
        for i in 0..tensor.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / bc1;
            let v_hat = v[i] / bc2;
            tensor[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    if let Some(hp) = &mut params.hist {
        hp.widths.iter_mut().for_each(|w| *w = w.abs().max(1e-12));
    }
    params.adam = adam;
    Ok(())
}
