use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FedError;

/// Dense layer computing `W x + b` with `W` stored row-major (`outputs × inputs`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl Layer {
    pub fn new(inputs: usize, outputs: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self, FedError> {
        if inputs == 0 || outputs == 0 {
            return Err(FedError::Shape("layer dimensions must be positive".into()));
        }
        if weights.len() != inputs * outputs || bias.len() != outputs {
            return Err(FedError::Shape(format!(
                "layer {outputs}x{inputs} got {} weights and {} biases",
                weights.len(),
                bias.len()
            )));
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(FedError::Shape("layer entries must be finite".into()));
        }
        Ok(Self { inputs, outputs, weights, bias })
    }

    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self { inputs, outputs, weights: vec![0.0; inputs * outputs], bias: vec![0.0; outputs] }
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

    /// Weight from input `j` to output `k`.
    pub fn weight(&self, k: usize, j: usize) -> f64 {
        self.weights[k * self.inputs + j]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.weights[k * self.inputs..(k + 1) * self.inputs]
    }

    pub fn affine(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|k| self.row(k).iter().zip(x).map(|(w, a)| w * a).sum::<f64>() + self.bias[k])
            .collect()
    }

    fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Feed-forward model: logistic activations between layers, linear output.
///
/// A single layer with one output is plain linear regression.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    layers: Vec<Layer>,
}

impl ModelParams {
    pub fn new(layers: Vec<Layer>) -> Result<Self, FedError> {
        if layers.is_empty() {
            return Err(FedError::Shape("model needs at least one layer".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].outputs != pair[1].inputs {
                return Err(FedError::Shape(format!(
                    "layer {i} outputs {} but layer {} expects {}",
                    pair[0].outputs,
                    i + 1,
                    pair[1].inputs
                )));
            }
        }
        Ok(Self { layers })
    }

    /// All-zero model with layer widths `dims[0] -> dims[1] -> ...`.
    pub fn zeros(dims: &[usize]) -> Result<Self, FedError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(FedError::Shape(format!("bad layer widths {dims:?}")));
        }
        Self::new(dims.windows(2).map(|d| Layer::zeros(d[0], d[1])).collect())
    }

    pub fn zeros_like(other: &ModelParams) -> Self {
        Self { layers: other.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect() }
    }

    /// Uniform initialisation in `[-scale, scale]`.
    pub fn random<R: Rng + ?Sized>(dims: &[usize], scale: f64, rng: &mut R) -> Result<Self, FedError> {
        let mut model = Self::zeros(dims)?;
        for v in model.params_mut() {
            *v = rng.gen_range(-scale..=scale);
        }
        Ok(model)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// Flattened parameters: each layer's weights then its biases.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.params().copied().collect()
    }

    /// Model of the same shape holding `flat`.
    pub fn with_flat(&self, flat: &[f64]) -> Result<Self, FedError> {
        if flat.len() != self.param_count() {
            return Err(FedError::Shape(format!(
                "expected {} parameters, got {}",
                self.param_count(),
                flat.len()
            )));
        }
        let mut out = self.clone();
        for (dst, src) in out.params_mut().zip(flat) {
            *dst = *src;
        }
        Ok(out)
    }

    pub fn same_shape(&self, other: &ModelParams) -> bool {
        self.layers.len() == other.layers.len()
            && self
                .layers
                .iter()
                .zip(&other.layers)
                .all(|(a, b)| a.inputs == b.inputs && a.outputs == b.outputs)
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|v| v.is_finite())
    }

    /// Activations of every layer, input first.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let z = layer.affine(acts.last().expect("input pushed"));
            acts.push(if i == last { z } else { z.into_iter().map(sigmoid).collect() });
        }
        acts
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.activations(x).pop().expect("at least one layer")
    }

    pub fn predict_label(&self, x: &[f64]) -> usize {
        argmax(&self.forward(x))
    }

    /// Gradient of `sum_o (y_o - t_o)^2` for one sample, flattened like
    /// [`ModelParams::to_flat`], accumulated into `grad`.
    pub(crate) fn accumulate_gradient(&self, x: &[f64], target: &[f64], grad: &mut [f64]) {
        let acts = self.activations(x);
        let out = acts.last().expect("output");
        let mut delta: Vec<f64> = out.iter().zip(target).map(|(y, t)| 2.0 * (y - t)).collect();

        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut off = 0;
        for l in &self.layers {
            offsets.push(off);
            off += l.param_count();
        }

        for li in (0..self.layers.len()).rev() {
            let layer = &self.layers[li];
            let input = &acts[li];
            let base = offsets[li];
            for k in 0..layer.outputs {
                for j in 0..layer.inputs {
                    grad[base + k * layer.inputs + j] += delta[k] * input[j];
                }
                grad[base + layer.weights.len() + k] += delta[k];
            }
            if li > 0 {
                // back through the logistic activation of the previous layer
                delta = (0..layer.inputs)
                    .map(|j| {
                        let back: f64 = (0..layer.outputs).map(|k| layer.weight(k, j) * delta[k]).sum();
                        let a = input[j];
                        back * a * (1.0 - a)
                    })
                    .collect();
            }
        }
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_mismatch_rejected() {
        let err = ModelParams::new(vec![Layer::zeros(3, 4), Layer::zeros(5, 2)]);
        assert!(matches!(err, Err(FedError::Shape(_))));
    }

    #[test]
    fn non_finite_rejected() {
        assert!(Layer::new(1, 1, vec![f64::NAN], vec![0.0]).is_err());
    }

    #[test]
    fn argmax_ties_lowest() {
        assert_eq!(argmax(&[0.1, 0.7, 0.7, 0.2]), 1);
        assert_eq!(argmax(&[1.0]), 0);
    }

    #[test]
    fn flat_roundtrip() {
        let m = ModelParams::zeros(&[3, 4, 2]).unwrap();
        let flat: Vec<f64> = (0..m.param_count()).map(|i| i as f64).collect();
        let m2 = m.with_flat(&flat).unwrap();
        assert_eq!(m2.to_flat(), flat);
        assert_eq!(m2.layers()[0].weight(1, 2), 5.0);
        assert_eq!(m2.layers()[0].bias()[0], 12.0);
    }

    #[test]
    fn single_layer_is_linear() {
        let m = ModelParams::new(vec![Layer::new(2, 1, vec![2.0, 3.0], vec![1.0]).unwrap()]).unwrap();
        assert_eq!(m.forward(&[1.0, 1.0]), vec![6.0]);
    }
}
