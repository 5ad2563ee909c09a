//! Dense networks with exact reverse-mode gradients, Adam and learning-rate
//! schedules.
//!
//! Parameters live in one flat [`ParamVector`]; per layer the weight matrix
//! (row-major, `out x in`) is followed by its bias. Batches are row-major
//! `batch x dim` slices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NeuralError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("non-finite loss {0}")]
    NonFiniteLoss(f64),
    #[error("invalid network spec: {0}")]
    InvalidSpec(String),
}

pub type Result<T> = std::result::Result<T, NeuralError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Swish,
    Relu,
    Tanh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputHead {
    Linear,
    Softmax,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input_dim: usize,
    pub hidden_units: usize,
    /// Number of hidden layers.
    pub num_layers: usize,
    pub output_dim: usize,
    pub hidden_activation: Activation,
    pub output_head: OutputHead,
}

impl MlpSpec {
    pub fn new(input_dim: usize, hidden_units: usize, num_layers: usize, output_dim: usize, head: OutputHead) -> Self {
        Self {
            input_dim,
            hidden_units,
            num_layers,
            output_dim,
            hidden_activation: Activation::Swish,
            output_head: head,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_units == 0 || self.num_layers == 0 || self.output_dim == 0 {
            return Err(NeuralError::InvalidSpec(format!("all dims and num_layers must be >= 1: {self:?}")));
        }
        Ok(())
    }

    pub fn layout(&self) -> Vec<LayerLayout> {
        let mut dims = vec![self.input_dim];
        dims.extend(std::iter::repeat_n(self.hidden_units, self.num_layers));
        dims.push(self.output_dim);
        let mut offset = 0;
        dims.windows(2)
            .map(|w| {
                let l = LayerLayout { offset, inputs: w[0], outputs: w[1] };
                offset += l.len();
                l
            })
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.layout().iter().map(LayerLayout::len).sum()
    }
}

/// Segment of the flat parameter vector owned by one affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerLayout {
    pub offset: usize,
    pub inputs: usize,
    pub outputs: usize,
}

impl LayerLayout {
    pub fn len(&self) -> usize {
        self.outputs * (self.inputs + 1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn weights(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.outputs * self.inputs
    }

    pub fn bias(&self) -> std::ops::Range<usize> {
        let start = self.offset + self.outputs * self.inputs;
        start..start + self.outputs
    }
}

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(NeuralError::NonFinite(i)),
        None => Ok(()),
    }
}

/// Flat weights and biases; every write is checked for finiteness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", into = "RawParams")]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Vec<LayerLayout>,
}

#[derive(Serialize, Deserialize)]
struct RawParams {
    values: Vec<f64>,
    layout: Vec<LayerLayout>,
}

impl TryFrom<RawParams> for ParamVector {
    type Error = NeuralError;
    fn try_from(raw: RawParams) -> Result<Self> {
        ParamVector::with_layout(raw.values, raw.layout)
    }
}

impl From<ParamVector> for RawParams {
    fn from(p: ParamVector) -> Self {
        RawParams { values: p.values, layout: p.layout }
    }
}

impl ParamVector {
    pub fn zeros(spec: &MlpSpec) -> Self {
        Self { values: vec![0.0; spec.param_count()], layout: spec.layout() }
    }

    pub fn with_layout(values: Vec<f64>, layout: Vec<LayerLayout>) -> Result<Self> {
        let expected: usize = layout.iter().map(LayerLayout::len).sum();
        if values.len() != expected {
            return Err(NeuralError::Dimension { expected, got: values.len() });
        }
        check_finite(&values)?;
        Ok(Self { values, layout })
    }

    pub fn from_values(spec: &MlpSpec, values: Vec<f64>) -> Result<Self> {
        Self::with_layout(values, spec.layout())
    }

    /// Fan-in scaled uniform weights `U(-1/sqrt(in), 1/sqrt(in))`, zero biases,
    /// drawn from a fixed-algorithm generator so every platform agrees.
    pub fn init(spec: &MlpSpec, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut p = Self::zeros(spec);
        for l in &p.layout {
            let bound = 1.0 / (l.inputs as f64).sqrt();
            for w in &mut p.values[l.weights()] {
                *w = rng.gen_range(-bound..bound);
            }
        }
        p
    }

    /// Multiply the output layer's weights, e.g. to start a policy near uniform.
    pub fn scale_output_layer(&mut self, factor: f64) {
        if let Some(l) = self.layout.last().copied() {
            for w in &mut self.values[l.weights()] {
                *w *= factor;
            }
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn layout(&self) -> &[LayerLayout] {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn set_values(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.values.len() {
            return Err(NeuralError::Dimension { expected: self.values.len(), got: values.len() });
        }
        check_finite(values)?;
        self.values.copy_from_slice(values);
        Ok(())
    }

    pub fn set(&mut self, i: usize, v: f64) -> Result<()> {
        if !v.is_finite() {
            return Err(NeuralError::NonFinite(i));
        }
        self.values[i] = v;
        Ok(())
    }

    fn matches(&self, spec: &MlpSpec) -> Result<()> {
        if self.layout != spec.layout() {
            return Err(NeuralError::Dimension { expected: spec.param_count(), got: self.values.len() });
        }
        Ok(())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Swish => z * sigmoid(z),
            Activation::Relu => z.max(0.0),
            Activation::Tanh => z.tanh(),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Swish => {
                let s = sigmoid(z);
                s + z * s * (1.0 - s)
            }
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - z.tanh().powi(2),
        }
    }
}

/// Row-wise softmax of a `rows x cols` slice.
pub fn softmax_rows(logits: &[f64], cols: usize) -> Vec<f64> {
    let mut out = logits.to_vec();
    for row in out.chunks_mut(cols) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
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

/// Row-wise log-softmax of a `rows x cols` slice.
pub fn log_softmax_rows(logits: &[f64], cols: usize) -> Vec<f64> {
    let mut out = logits.to_vec();
    for row in out.chunks_mut(cols) {
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    out
}

pub fn sigmoid_all(logits: &[f64]) -> Vec<f64> {
    logits.iter().map(|&z| sigmoid(z)).collect()
}

/// Apply the output head to raw logits.
pub fn apply_head(head: OutputHead, logits: &[f64], cols: usize) -> Vec<f64> {
    match head {
        OutputHead::Linear => logits.to_vec(),
        OutputHead::Softmax => softmax_rows(logits, cols),
        OutputHead::Sigmoid => sigmoid_all(logits),
    }
}

/// `out (b x l.outputs) = x (b x l.inputs) * W^T + bias`
fn affine(params: &[f64], l: &LayerLayout, x: &[f64], batch: usize) -> Vec<f64> {
    let mut out = vec![0.0; batch * l.outputs];
    let bias = &params[l.bias()];
    for row in out.chunks_mut(l.outputs) {
        row.copy_from_slice(bias);
    }
    let w = &params[l.weights()];
    unsafe {
        // x: b x in (row-major), W^T: in x out via strides of W (out x in).
        matrixmultiply::dgemm(
            batch,
            l.inputs,
            l.outputs,
            1.0,
            x.as_ptr(),
            l.inputs as isize,
            1,
            w.as_ptr(),
            1,
            l.inputs as isize,
            1.0,
            out.as_mut_ptr(),
            l.outputs as isize,
            1,
        );
    }
    out
}

struct Trace {
    /// Input to each layer (the batch itself, then hidden activations).
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each hidden layer.
    pre: Vec<Vec<f64>>,
    logits: Vec<f64>,
}

fn run(spec: &MlpSpec, params: &ParamVector, input: &[f64], keep: bool) -> Result<(usize, Trace)> {
    spec.validate()?;
    params.matches(spec)?;
    if input.len() % spec.input_dim != 0 || input.is_empty() {
        return Err(NeuralError::Dimension { expected: spec.input_dim, got: input.len() });
    }
    let batch = input.len() / spec.input_dim;
    let layout = params.layout();
    let mut trace = Trace { inputs: Vec::new(), pre: Vec::new(), logits: Vec::new() };
    let mut x = input.to_vec();
    for (i, l) in layout.iter().enumerate() {
        let z = affine(&params.values, l, &x, batch);
        if i + 1 == layout.len() {
            if keep {
                trace.inputs.push(x);
            }
            trace.logits = z;
            break;
        }
        let a: Vec<f64> = z.iter().map(|&v| spec.hidden_activation.apply(v)).collect();
        if keep {
            trace.inputs.push(std::mem::replace(&mut x, a));
            trace.pre.push(z);
        } else {
            x = a;
        }
    }
    Ok((batch, trace))
}

/// Raw (pre-head) outputs for a `batch x input_dim` slice.
pub fn forward_logits(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    Ok(run(spec, params, input, false)?.1.logits)
}

/// Head outputs for a `batch x input_dim` slice.
pub fn forward_batch(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    let logits = forward_logits(spec, params, input)?;
    Ok(apply_head(spec.output_head, &logits, spec.output_dim))
}

/// Head outputs for a single input vector.
pub fn forward(spec: &MlpSpec, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    if input.len() != spec.input_dim {
        return Err(NeuralError::Dimension { expected: spec.input_dim, got: input.len() });
    }
    forward_batch(spec, params, input)
}

/// Reverse-mode gradient of a scalar loss of the network's raw logits.
///
/// `loss` receives the `batch x output_dim` logits and returns the loss and
/// its derivative with respect to each logit. Returns `(loss, gradient)`.
pub fn gradient<F>(spec: &MlpSpec, params: &ParamVector, input: &[f64], loss: F) -> Result<(f64, Vec<f64>)>
where
    F: FnOnce(&[f64]) -> (f64, Vec<f64>),
{
    let (batch, trace) = run(spec, params, input, true)?;
    let (value, mut delta) = loss(&trace.logits);
    if !value.is_finite() {
        return Err(NeuralError::NonFiniteLoss(value));
    }
    if delta.len() != trace.logits.len() {
        return Err(NeuralError::Dimension { expected: trace.logits.len(), got: delta.len() });
    }
    check_finite(&delta)?;
    let mut grad = vec![0.0; params.len()];
    let layout = params.layout();
    for (i, l) in layout.iter().enumerate().rev() {
        let x = &trace.inputs[i];
        let w = &params.values[l.weights()];
        // dW (out x in) = delta^T (out x b) * x (b x in)
        unsafe {
            matrixmultiply::dgemm(
                l.outputs,
                batch,
                l.inputs,
                1.0,
                delta.as_ptr(),
                1,
                l.outputs as isize,
                x.as_ptr(),
                l.inputs as isize,
                1,
                0.0,
                grad[l.weights()].as_mut_ptr(),
                l.inputs as isize,
                1,
            );
        }
        let gb = &mut grad[l.bias()];
        for row in delta.chunks(l.outputs) {
            for (g, d) in gb.iter_mut().zip(row) {
                *g += d;
            }
        }
        if i == 0 {
            break;
        }
        // dX (b x in) = delta (b x out) * W (out x in)
        let mut dx = vec![0.0; batch * l.inputs];
        unsafe {
            matrixmultiply::dgemm(
                batch,
                l.outputs,
                l.inputs,
                1.0,
                delta.as_ptr(),
                l.outputs as isize,
                1,
                w.as_ptr(),
                l.inputs as isize,
                1,
                0.0,
                dx.as_mut_ptr(),
                l.inputs as isize,
                1,
            );
        }
        for (d, &z) in dx.iter_mut().zip(&trace.pre[i - 1]) {
            *d *= spec.hidden_activation.derivative(z);
        }
        delta = dx;
    }
    check_finite(&grad)?;
    Ok((value, grad))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl OptimizerState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], step: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// Bias-corrected Adam update in place.
pub fn adam_step(params: &mut ParamVector, grads: &[f64], state: &mut OptimizerState, lr: f64) -> Result<()> {
    let n = params.len();
    for len in [grads.len(), state.m.len(), state.v.len()] {
        if len != n {
            return Err(NeuralError::Dimension { expected: n, got: len });
        }
    }
    check_finite(grads)?;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - state.beta1.powi(t);
    let c2 = 1.0 - state.beta2.powi(t);
    for i in 0..n {
        let g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        let mh = state.m[i] / c1;
        let vh = state.v[i] / c2;
        params.values[i] -= lr * mh / (vh.sqrt() + state.eps);
    }
    check_finite(&params.values)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Schedule {
    Linear,
    Constant,
}

impl Schedule {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "linear" => Some(Schedule::Linear),
            "constant" => Some(Schedule::Constant),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Schedule::Linear => "linear",
            Schedule::Constant => "constant",
        }
    }
}

pub fn lr_at(step: u64, total_steps: u64, base_lr: f64, mode: Schedule) -> f64 {
    match mode {
        Schedule::Constant => base_lr,
        Schedule::Linear => {
            let frac = if total_steps == 0 { 1.0 } else { (step as f64 / total_steps as f64).min(1.0) };
            (base_lr * (1.0 - frac)).max(1e-10)
        }
    }
}
