//! Fully connected feedforward networks with exact backpropagation.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (`out x in`, row-major) followed by the bias vector of that layer.
//! Logistic regression is the case with no hidden layers.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{argmax, Dataset};
use crate::error::{Error, Result};
use crate::rng;

/// Added to every classification error so that zero error plots at 1e-4.
pub const ERROR_NUGGET: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid(z),
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the activation value `a = apply(z)`.
    #[inline]
    fn slope_from_value(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    /// Binary cross-entropy on sigmoid outputs, averaged over output units.
    /// The output layer must be `Identity`: the sigmoid is folded into the loss.
    Bce,
    /// Squared error averaged over output units.
    Mse,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `ln(1 + e^z)` without overflow.
#[inline]
pub fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    /// `[input_dim, h_1, ..., h_k, output_dim]`.
    pub layer_widths: Vec<usize>,
    pub hidden_activation: Activation,
    pub output_activation: Activation,
    pub loss: LossKind,
    /// Standard deviation of the N(0, init_std^2) initialization.
    pub init_std: f64,
}

/// Flat parameter vector x in canonical layer-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(p: usize) -> Self {
        Self(vec![0.0; p])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `self += alpha * d`.
    pub fn axpy(&mut self, alpha: f64, d: &[f64]) {
        for (x, di) in self.0.iter_mut().zip(d) {
            *x += alpha * di;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub loss: f64,
    pub gradient: Vec<f64>,
    pub batch_used: Vec<usize>,
}

impl Architecture {
    pub fn new(
        layer_widths: Vec<usize>,
        hidden_activation: Activation,
        output_activation: Activation,
        loss: LossKind,
        init_std: f64,
    ) -> Result<Self> {
        let a = Self { layer_widths, hidden_activation, output_activation, loss, init_std };
        a.validate()?;
        Ok(a)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 2 || self.layer_widths.contains(&0) {
            return Err(Error::InvalidArgument(format!("bad layer widths {:?}", self.layer_widths)));
        }
        if self.loss == LossKind::Bce && self.output_activation != Activation::Identity {
            return Err(Error::InvalidArgument("BCE expects logits (identity output activation)".into()));
        }
        if !(self.init_std >= 0.0 && self.init_std.is_finite()) {
            return Err(Error::InvalidArgument(format!("init_std {} must be finite and >= 0", self.init_std)));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    /// `(fan_in, fan_out)` of every weight layer.
    pub fn layer_shapes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.layer_widths.windows(2).map(|w| (w[0], w[1]))
    }

    /// Parameter count p = sum over layers of (fan_in + 1) * fan_out.
    pub fn param_count(&self) -> usize {
        self.layer_shapes().map(|(i, o)| (i + 1) * o).sum()
    }

    fn activation_of(&self, layer: usize) -> Activation {
        if layer + 1 == self.n_layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    fn check_params(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.param_count() {
            return Err(Error::InvalidArgument(format!(
                "parameter vector has {} entries, architecture needs {}",
                x.len(),
                self.param_count()
            )));
        }
        Ok(())
    }

    fn check_data(&self, d: &Dataset) -> Result<()> {
        if d.input_dim() != self.input_dim() || d.output_dim() != self.output_dim() {
            return Err(Error::InvalidArgument(format!(
                "dataset is {}->{}, architecture is {}->{}",
                d.input_dim(),
                d.output_dim(),
                self.input_dim(),
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// Weight and bias views of every layer.
    pub fn unflatten<'a>(&self, x: &'a [f64]) -> Vec<(ArrayView2<'a, f64>, ArrayView1<'a, f64>)> {
        let mut rest = x;
        self.layer_shapes()
            .map(|(i, o)| {
                let (w, tail) = rest.split_at(i * o);
                let (b, tail) = tail.split_at(o);
                rest = tail;
                (ArrayView2::from_shape((o, i), w).unwrap(), ArrayView1::from(b))
            })
            .collect()
    }

    fn unflatten_mut<'a>(&self, x: &'a mut [f64]) -> Vec<(ArrayViewMut2<'a, f64>, ArrayViewMut1<'a, f64>)> {
        let mut rest = x;
        self.layer_shapes()
            .map(|(i, o)| {
                let (w, tail) = std::mem::take(&mut rest).split_at_mut(i * o);
                let (b, tail) = tail.split_at_mut(o);
                rest = tail;
                (ArrayViewMut2::from_shape((o, i), w).unwrap(), ArrayViewMut1::from(b))
            })
            .collect()
    }

    /// Inverse of [`unflatten`](Self::unflatten).
    pub fn flatten(&self, layers: &[(Array2<f64>, Array1<f64>)]) -> Result<ParamVector> {
        let mut out = Vec::with_capacity(self.param_count());
        for ((w, b), (i, o)) in layers.iter().zip(self.layer_shapes()) {
            if w.dim() != (o, i) || b.len() != o {
                return Err(Error::InvalidArgument("layer shape does not match architecture".into()));
            }
            out.extend(w.iter());
            out.extend(b.iter());
        }
        if out.len() != self.param_count() {
            return Err(Error::InvalidArgument("wrong number of layers".into()));
        }
        Ok(ParamVector(out))
    }

    /// Every weight and bias drawn i.i.d. from N(0, init_std^2).
    pub fn init_params(&self, seed: u64) -> ParamVector {
        let p = self.param_count();
        if self.init_std == 0.0 {
            return ParamVector::zeros(p);
        }
        let normal = Normal::new(0.0, self.init_std).expect("validated init_std");
        let mut r = rng::seeded(seed);
        ParamVector((0..p).map(|_| normal.sample(&mut r)).collect())
    }

    /// Activations of every layer for the rows in `batch`; element 0 is the input.
    fn forward(&self, x: &[f64], d: &Dataset, batch: &[usize]) -> Result<Vec<Array2<f64>>> {
        let mut acts = Vec::with_capacity(self.n_layers() + 1);
        acts.push(d.inputs().select(Axis(0), batch));
        for (l, (w, b)) in self.unflatten(x).into_iter().enumerate() {
            let mut z = acts[l].dot(&w.t());
            z += &b;
            let act = self.activation_of(l);
            z.mapv_inplace(|v| act.apply(v));
            if z.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteLayer { layer: l + 1 });
            }
            acts.push(z);
        }
        Ok(acts)
    }

    fn check_batch(&self, x: &[f64], d: &Dataset, batch: &[usize]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::EmptyBatch);
        }
        self.check_params(x)?;
        self.check_data(d)?;
        if let Some(&bad) = batch.iter().find(|&&i| i >= d.len()) {
            return Err(Error::InvalidArgument(format!("batch index {bad} out of range for M = {}", d.len())));
        }
        Ok(())
    }

    /// Per-sample loss summed over the batch, and dL/d(output pre-activation)
    /// scaled by `scale`.
    fn output_loss(&self, out: &Array2<f64>, targets: &Array2<f64>, scale: f64) -> (f64, Array2<f64>) {
        let k = self.output_dim() as f64;
        let mut total = 0.0;
        let mut delta = Array2::zeros(out.raw_dim());
        for ((o, t), dl) in out.iter().zip(targets.iter()).zip(delta.iter_mut()) {
            match self.loss {
                LossKind::Bce => {
                    total += softplus(*o) - t * o;
                    *dl = (sigmoid(*o) - t) / k * scale;
                }
                LossKind::Mse => {
                    let r = o - t;
                    total += r * r;
                    *dl = 2.0 * r / k * self.output_activation.slope_from_value(*o) * scale;
                }
            }
        }
        (total / k, delta)
    }

    /// Mean loss and exact gradient over `batch`. Repeated indices count repeatedly.
    pub fn evaluate(&self, x: &[f64], d: &Dataset, batch: &[usize]) -> Result<EvalResult> {
        self.check_batch(x, d, batch)?;
        let acts = self.forward(x, d, batch)?;
        let targets = d.targets().select(Axis(0), batch);
        let inv_b = 1.0 / batch.len() as f64;
        let (total, mut delta) = self.output_loss(acts.last().unwrap(), &targets, inv_b);
        let loss = total * inv_b;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLayer { layer: self.n_layers() });
        }

        let mut gradient = vec![0.0; self.param_count()];
        let weights = self.unflatten(x);
        let mut grads = self.unflatten_mut(&mut gradient);
        for l in (0..self.n_layers()).rev() {
            let (gw, gb) = &mut grads[l];
            gw.assign(&delta.t().dot(&acts[l]));
            gb.assign(&delta.sum_axis(Axis(0)));
            if l > 0 {
                let act = self.activation_of(l - 1);
                let mut back = delta.dot(&weights[l].0);
                back.zip_mut_with(&acts[l], |g, a| *g *= act.slope_from_value(*a));
                delta = back;
            }
        }
        drop(grads);
        Ok(EvalResult { loss, gradient, batch_used: batch.to_vec() })
    }

    /// Mean loss over `batch` without the backward pass.
    pub fn loss(&self, x: &[f64], d: &Dataset, batch: &[usize]) -> Result<f64> {
        self.check_batch(x, d, batch)?;
        let acts = self.forward(x, d, batch)?;
        let targets = d.targets().select(Axis(0), batch);
        let (total, _) = self.output_loss(acts.last().unwrap(), &targets, 0.0);
        Ok(total / batch.len() as f64)
    }

    /// Network scores for `rows`: sigmoid probabilities under BCE, raw outputs under MSE.
    pub fn predict(&self, x: &[f64], d: &Dataset, rows: &[usize]) -> Result<Array2<f64>> {
        if rows.is_empty() {
            return Ok(Array2::zeros((0, self.output_dim())));
        }
        self.check_batch(x, d, rows)?;
        let mut out = self.forward(x, d, rows)?.pop().unwrap();
        if self.loss == LossKind::Bce {
            out.mapv_inplace(sigmoid);
        }
        Ok(out)
    }

    /// Misclassified fraction plus [`ERROR_NUGGET`]: argmax over several
    /// outputs, threshold 0.5 for a single output. `None` uses every row.
    pub fn classification_error(&self, x: &[f64], d: &Dataset, subsample: Option<&[usize]>) -> Result<f64> {
        let all: Vec<usize>;
        let rows = match subsample {
            Some(r) => r,
            None => {
                all = (0..d.len()).collect();
                &all
            }
        };
        let scores = self.predict(x, d, rows)?;
        Ok(error_from_scores(&scores, d, rows))
    }
}

/// Classification error of precomputed `scores` against the rows' labels, with nugget.
pub fn error_from_scores(scores: &Array2<f64>, d: &Dataset, rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return ERROR_NUGGET;
    }
    let wrong = rows
        .iter()
        .enumerate()
        .filter(|(r, &i)| {
            let row = scores.slice(s![*r, ..]);
            let predicted = if row.len() == 1 { (row[0] > 0.5) as usize } else { argmax(row.iter().copied()) };
            predicted != d.label(i)
        })
        .count();
    wrong as f64 / rows.len() as f64 + ERROR_NUGGET
}
