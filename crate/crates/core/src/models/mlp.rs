use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::rng_from_seed;
use crate::models::{DataFit, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative written in terms of the activation output `a`.
    fn derivative_from_output(self, a: f64) -> f64 {
        match self {
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

/// Fully connected binary classifier: hidden layers use `activation`, the single
/// output unit is a logit scored with binary cross-entropy.
///
/// Parameters are flattened layer by layer as `W` (row-major, `out × in`) followed by `b`.
#[derive(Debug, Clone)]
pub struct MlpModel {
    layers: Vec<usize>,
    activation: Activation,
    data: Dataset,
}

struct Layer<'a> {
    w: DMatrix<f64>,
    b: &'a [f64],
}

impl MlpModel {
    pub fn new(layers: Vec<usize>, activation: Activation, data: Dataset) -> Result<Self> {
        if layers.len() < 2 || layers.contains(&0) {
            return Err(Error::Config("MLP needs at least an input and an output layer".into()));
        }
        if *layers.last().unwrap() != 1 {
            return Err(Error::Config("MLP output layer must have width 1".into()));
        }
        if layers[0] != data.x.ncols() {
            return Err(Error::Dimension { expected: layers[0], got: data.x.ncols() });
        }
        Ok(Self { layers, activation, data })
    }

    pub fn layers(&self) -> &[usize] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        self.layers.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Glorot-uniform weights and zero biases.
    pub fn init_params(&self, seed: u64) -> DVector<f64> {
        let mut rng = rng_from_seed(seed, u64::MAX);
        let mut out = Vec::with_capacity(self.param_count());
        for w in self.layers.windows(2) {
            let limit = (6.0 / (w[0] + w[1]) as f64).sqrt();
            out.extend((0..w[0] * w[1]).map(|_| rng.random_range(-limit..limit)));
            out.extend(std::iter::repeat_n(0.0, w[1]));
        }
        DVector::from_vec(out)
    }

    fn unpack<'a>(&self, theta: &'a DVector<f64>) -> Vec<Layer<'a>> {
        let mut offset = 0;
        let flat = theta.as_slice();
        self.layers
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let wmat = DMatrix::from_row_slice(n_out, n_in, &flat[offset..offset + n_in * n_out]);
                offset += n_in * n_out;
                let b = &flat[offset..offset + n_out];
                offset += n_out;
                Layer { w: wmat, b }
            })
            .collect()
    }

    fn batch_inputs(&self, batch: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(batch.len(), self.layers[0], |r, c| self.data.x[(batch[r], c)])
    }

    /// Activations per layer (rows = examples); the last entry holds logits.
    fn forward(&self, params: &[Layer<'_>], input: DMatrix<f64>) -> Vec<DMatrix<f64>> {
        let mut acts = vec![input];
        for (k, layer) in params.iter().enumerate() {
            let mut z = acts.last().unwrap() * layer.w.transpose();
            for mut row in z.row_iter_mut() {
                for (v, b) in row.iter_mut().zip(layer.b) {
                    *v += b;
                }
            }
            if k + 1 < params.len() {
                z.apply(|v| *v = self.activation.apply(*v));
            }
            acts.push(z);
        }
        acts
    }

    /// Output logits for arbitrary inputs (rows).
    pub fn predict_logits(&self, theta: &DVector<f64>, inputs: &DMatrix<f64>) -> DVector<f64> {
        let params = self.unpack(theta);
        let acts = self.forward(&params, inputs.clone());
        acts.last().unwrap().column(0).into_owned()
    }

    /// Fraction of training points classified correctly at `theta`.
    pub fn accuracy(&self, theta: &DVector<f64>) -> f64 {
        let logits = self.predict_logits(theta, &self.data.x);
        let correct = logits.iter().zip(self.data.y.iter()).filter(|(z, y)| (**z > 0.0) == (**y > 0.5)).count();
        correct as f64 / logits.len() as f64
    }
}

fn bce_with_logit(z: f64, y: f64) -> f64 {
    z.max(0.0) - y * z + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl DataFit for MlpModel {
    fn dim(&self) -> usize {
        self.param_count()
    }

    fn num_data(&self) -> usize {
        self.data.y.len()
    }

    fn batch_value(&self, theta: &DVector<f64>, batch: &[usize]) -> f64 {
        let params = self.unpack(theta);
        let acts = self.forward(&params, self.batch_inputs(batch));
        let logits = acts.last().unwrap();
        let total: f64 = batch.iter().enumerate().map(|(r, &i)| bce_with_logit(logits[(r, 0)], self.data.y[i])).sum();
        total / batch.len() as f64
    }

    fn batch_gradient(&self, theta: &DVector<f64>, batch: &[usize]) -> DVector<f64> {
        let params = self.unpack(theta);
        let acts = self.forward(&params, self.batch_inputs(batch));
        let n = batch.len() as f64;
        let logits = acts.last().unwrap();
        let mut delta = DMatrix::from_fn(batch.len(), 1, |r, _| (sigmoid(logits[(r, 0)]) - self.data.y[batch[r]]) / n);

        let mut grads: Vec<(DMatrix<f64>, DVector<f64>)> = Vec::with_capacity(params.len());
        for k in (0..params.len()).rev() {
            let a_prev = &acts[k];
            let gw = delta.transpose() * a_prev;
            let gb = DVector::from_iterator(delta.ncols(), delta.column_iter().map(|c| c.sum()));
            grads.push((gw, gb));
            if k > 0 {
                let mut back = &delta * &params[k].w;
                back.zip_apply(a_prev, |d, a| *d *= self.activation.derivative_from_output(a));
                delta = back;
            }
        }
        grads.reverse();
        let mut out = Vec::with_capacity(self.param_count());
        for (gw, gb) in grads {
            for r in 0..gw.nrows() {
                out.extend(gw.row(r).iter());
            }
            out.extend(gb.iter());
        }
        DVector::from_vec(out)
    }
}
