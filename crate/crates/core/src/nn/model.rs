use crate::numerics::{Matrix, RngState};
use crate::{Error, Result};

/// Affine layer `x W + b` with `W` stored as `in x out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self { weights: Matrix::zeros(fan_in, fan_out), biases: vec![0.0; fan_out] }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }

    fn param_count(&self) -> usize {
        self.weights.values().len() + self.biases.len()
    }
}

/// Parameter gradients, one entry per model layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self { layers: model.layers.iter().map(|l| Layer::zeros(l.fan_in(), l.fan_out())).collect() }
    }

    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.is_finite() && l.biases.iter().all(|b| b.is_finite()))
    }
}

fn flatten_layers(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(l.weights.values());
        out.extend_from_slice(&l.biases);
    }
    out
}

/// Fully connected network; ReLU between layers, identity on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

/// Intermediate values of a forward pass kept for backprop.
pub(crate) struct ForwardCache {
    /// Input to each layer (post-ReLU for hidden layers).
    pub inputs: Vec<Matrix>,
    pub logits: Matrix,
}

impl MlpModel {
    /// Glorot-uniform weights and zero biases for the layer widths `dims`.
    pub fn new(dims: &[usize], rng: &mut RngState) -> Result<Self> {
        check_dims(dims)?;
        let layers = dims
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let values =
                    (0..fan_in * fan_out).map(|_| (2.0 * rng.uniform() - 1.0) * limit).collect();
                Layer {
                    weights: Matrix::from_vec(fan_in, fan_out, values).expect("finite init"),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self { layers: dims.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect() })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::shape("model needs at least one layer"));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.biases.len() != l.fan_out() {
                return Err(Error::shape(format!("layer {i}: bias length != fan out")));
            }
            if l.fan_in() == 0 || l.fan_out() == 0 {
                return Err(Error::shape(format!("layer {i} has a zero dimension")));
            }
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].fan_out() != pair[1].fan_in() {
                return Err(Error::shape(format!(
                    "layer {i} outputs {} but layer {} takes {}",
                    pair[0].fan_out(),
                    i + 1,
                    pair[1].fan_in()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].fan_in()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].fan_out()
    }

    /// Layer widths, input first.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim()).chain(self.layers.iter().map(Layer::fan_out)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(Layer::param_count).sum()
    }

    /// All parameters in layer order: weights row-major, then biases.
    pub fn flatten(&self) -> Vec<f64> {
        flatten_layers(&self.layers)
    }

    /// Inverse of [`MlpModel::flatten`].
    pub fn set_flat(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::shape(format!(
                "{} parameters for a model with {}",
                params.len(),
                self.param_count()
            )));
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.values().len();
            l.weights.values_mut().copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.biases.len();
            l.biases.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.is_finite() && l.biases.iter().all(|b| b.is_finite()))
    }

    /// Logits for every row of `batch`.
    pub fn forward(&self, batch: &Matrix) -> Result<Matrix> {
        Ok(self.forward_cached(batch)?.logits)
    }

    pub(crate) fn forward_cached(&self, batch: &Matrix) -> Result<ForwardCache> {
        if batch.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "batch has {} columns, model expects {}",
                batch.cols(),
                self.input_dim()
            )));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = batch.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = h.matmul(&layer.weights)?;
            z.add_row_vector(&layer.biases)?;
            inputs.push(h);
            if i < last {
                crate::numerics::relu_inplace(z.values_mut());
            }
            h = z;
        }
        Ok(ForwardCache { inputs, logits: h })
    }

    /// Reverse pass: parameter gradients given `d_logits = dL/dlogits`.
    pub(crate) fn backward(&self, cache: &ForwardCache, d_logits: Matrix) -> Result<Gradients> {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_logits;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.inputs[i];
            let d_w = input.t_matmul(&delta)?;
            let d_b = delta.column_sums();
            grads.push(Layer { weights: d_w, biases: d_b });
            if i > 0 {
                let mut d_in = delta.matmul_t(&layer.weights)?;
                // input = relu(pre); relu'(pre) is 0 exactly where input is 0
                for (d, &a) in d_in.values_mut().iter_mut().zip(input.values()) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
                delta = d_in;
            }
        }
        grads.reverse();
        Ok(Gradients { layers: grads })
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(Error::shape("need at least input and output widths"));
    }
    if dims.contains(&0) {
        return Err(Error::shape("layer widths must be positive"));
    }
    Ok(())
}
