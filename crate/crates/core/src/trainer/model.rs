//! Layer stack, forward pass and backpropagation.
//!
//! Every layer computes `P · (H W)`. Weights of layers that see the
//! concatenated input `[A, X]` are stored as two blocks, `w_hidden` for the
//! activation part and `w_attr` for the attribute part, so the sparse
//! attribute block never has to be densified.

use nalgebra::DMatrix;
use rand::Rng;

use super::sparse::SparseRows;
use super::{Activation, ModelConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub w_hidden: Option<DMatrix<f64>>,
    pub w_attr: Option<DMatrix<f64>>,
}

impl Layer {
    fn out_dim(&self) -> usize {
        self.w_hidden
            .as_ref()
            .or(self.w_attr.as_ref())
            .map_or(0, DMatrix::ncols)
    }

    fn fan_in(&self) -> usize {
        self.w_hidden.as_ref().map_or(0, DMatrix::nrows) + self.w_attr.as_ref().map_or(0, DMatrix::nrows)
    }

    pub fn params(&self) -> impl Iterator<Item = &DMatrix<f64>> {
        self.w_hidden.iter().chain(self.w_attr.iter())
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut DMatrix<f64>> {
        self.w_hidden.iter_mut().chain(self.w_attr.iter_mut())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub layers: Vec<Layer>,
    pub activation: Activation,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct Forward {
    /// Hidden input of layer `k` after dropout (`None` for layer 0).
    pub inputs_hidden: Vec<Option<DMatrix<f64>>>,
    /// Dropout multipliers applied to the hidden input of layer `k`.
    pub hidden_masks: Vec<Option<DMatrix<f64>>>,
    /// Attribute input of layer `k` after dropout, when the layer uses it.
    pub inputs_attr: Vec<Option<SparseRows>>,
    /// `P (H W)` of every layer; the last one is the logits.
    pub pre: Vec<DMatrix<f64>>,
    /// Activations of the hidden layers.
    pub acts: Vec<DMatrix<f64>>,
}

impl Forward {
    pub fn logits(&self) -> &DMatrix<f64> {
        self.pre.last().expect("at least one layer")
    }
}

impl Network {
    fn shaped(
        cfg: &ModelConfig,
        n_features: usize,
        n_classes: usize,
        mut fill: impl FnMut(usize, usize, f64) -> DMatrix<f64>,
    ) -> Self {
        let n = cfg.n_layers;
        let mut layers = Vec::with_capacity(n);
        for k in 0..n {
            let out = if k + 1 == n { n_classes } else { cfg.hidden_dim };
            let hidden_in = if k == 0 { 0 } else { cfg.hidden_dim };
            let attr_in = if k == 0 || cfg.concat_x { n_features } else { 0 };
            let limit = (6.0 / (hidden_in + attr_in + out) as f64).sqrt();
            layers.push(Layer {
                w_hidden: (hidden_in > 0).then(|| fill(hidden_in, out, limit)),
                w_attr: (attr_in > 0).then(|| fill(attr_in, out, limit)),
            });
        }
        Self {
            layers,
            activation: cfg.activation,
        }
    }

    /// Glorot-uniform weights, `U(−√(6/(fan_in + fan_out)), +…)` over the
    /// full (concatenated) fan-in.
    pub fn glorot(cfg: &ModelConfig, n_features: usize, n_classes: usize, rng: &mut impl Rng) -> Self {
        Self::shaped(cfg, n_features, n_classes, |r, c, limit| {
            DMatrix::from_fn(r, c, |_, _| rng.random_range(-limit..limit))
        })
    }

    pub fn zeros(cfg: &ModelConfig, n_features: usize, n_classes: usize) -> Self {
        Self::shaped(cfg, n_features, n_classes, |r, c, _| DMatrix::zeros(r, c))
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().flat_map(Layer::params).map(DMatrix::len).sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(Layer::params)
            .map(DMatrix::norm_squared)
            .sum()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_dim)
    }

    pub fn forward(
        &self,
        p: &DMatrix<f64>,
        x: &SparseRows,
        mut dropout: Option<(f64, &mut dyn rand::RngCore)>,
    ) -> Forward {
        let n_layers = self.layers.len();
        let mut fwd = Forward {
            inputs_hidden: Vec::with_capacity(n_layers),
            hidden_masks: Vec::with_capacity(n_layers),
            inputs_attr: Vec::with_capacity(n_layers),
            pre: Vec::with_capacity(n_layers),
            acts: Vec::with_capacity(n_layers),
        };
        for (k, layer) in self.layers.iter().enumerate() {
            debug_assert!(layer.fan_in() > 0);
            let mut hw: Option<DMatrix<f64>> = None;
            let (h_in, mask) = match (&layer.w_hidden, fwd.acts.last()) {
                (Some(w), Some(a)) => {
                    let (dropped, mask) = match dropout.as_mut() {
                        Some((rate, rng)) if *rate > 0.0 => {
                            let keep = 1.0 / (1.0 - *rate);
                            let mask = DMatrix::from_fn(a.nrows(), a.ncols(), |_, _| {
                                if rng.random::<f64>() < *rate {
                                    0.0
                                } else {
                                    keep
                                }
                            });
                            (a.component_mul(&mask), Some(mask))
                        }
                        _ => (a.clone(), None),
                    };
                    hw = Some(&dropped * w);
                    (Some(dropped), mask)
                }
                _ => (None, None),
            };
            let x_in = layer.w_attr.as_ref().map(|w| {
                let dropped = match dropout.as_mut() {
                    Some((rate, rng)) if *rate > 0.0 => {
                        let keep = 1.0 / (1.0 - *rate);
                        let factors: Vec<f64> = (0..x.nnz())
                            .map(|_| if rng.random::<f64>() < *rate { 0.0 } else { keep })
                            .collect();
                        x.scale_entries(&factors)
                    }
                    _ => x.clone(),
                };
                let xw = dropped.mul_dense(w);
                hw = Some(match hw.take() {
                    Some(acc) => acc + xw,
                    None => xw,
                });
                dropped
            });
            let z = p * hw.expect("layer has weights");
            if k + 1 < n_layers {
                fwd.acts.push(self.activation.apply(&z));
            }
            fwd.pre.push(z);
            fwd.inputs_hidden.push(h_in);
            fwd.hidden_masks.push(mask);
            fwd.inputs_attr.push(x_in);
        }
        fwd
    }

    /// Gradients of a loss with respect to every weight, given the loss
    /// gradient with respect to the logits. `p` must be symmetric.
    pub fn backward(&self, p: &DMatrix<f64>, fwd: &Forward, dlogits: DMatrix<f64>) -> Vec<Layer> {
        let mut grads: Vec<Layer> = Vec::with_capacity(self.layers.len());
        let mut dz = dlogits;
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let du = p * &dz;
            let g_hidden = fwd.inputs_hidden[k].as_ref().map(|h| h.transpose() * &du);
            let g_attr = fwd.inputs_attr[k].as_ref().map(|x| x.tr_mul_dense(&du));
            if k > 0 {
                let w = layer.w_hidden.as_ref().expect("inner layers read the hidden state");
                let mut d_in = du * w.transpose();
                if let Some(mask) = &fwd.hidden_masks[k] {
                    d_in.component_mul_assign(mask);
                }
                dz = self.activation.backprop(&fwd.pre[k - 1], d_in);
            }
            grads.push(Layer {
                w_hidden: g_hidden,
                w_attr: g_attr,
            });
        }
        grads.reverse();
        grads
    }
}

impl Activation {
    pub fn apply(self, z: &DMatrix<f64>) -> DMatrix<f64> {
        match self {
            Activation::Relu => z.map(|v| v.max(0.0)),
            Activation::Identity => z.clone(),
        }
    }

    fn backprop(self, z: &DMatrix<f64>, mut upstream: DMatrix<f64>) -> DMatrix<f64> {
        if self == Activation::Relu {
            upstream.zip_apply(z, |g, z| {
                if z <= 0.0 {
                    *g = 0.0
                }
            });
        }
        upstream
    }
}

/// Mean softmax cross-entropy over `rows` and its gradient w.r.t. the logits.
pub fn cross_entropy(logits: &DMatrix<f64>, onehot: &DMatrix<f64>, rows: &[usize]) -> (f64, DMatrix<f64>) {
    let mut grad = DMatrix::zeros(logits.nrows(), logits.ncols());
    if rows.is_empty() {
        return (0.0, grad);
    }
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    for &i in rows {
        let row = logits.row(i);
        let max = row.max();
        let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
        for c in 0..logits.ncols() {
            let prob = (row[c] - lse).exp();
            let y = onehot[(i, c)];
            grad[(i, c)] = (prob - y) * scale;
            if y != 0.0 {
                loss -= y * (row[c] - lse);
            }
        }
    }
    (loss * scale, grad)
}

/// Fraction of `rows` whose arg-max logit is the labeled class.
pub fn accuracy(logits: &DMatrix<f64>, classes: &[Option<usize>], rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let hits = rows
        .iter()
        .filter(|&&i| {
            let row = logits.row(i);
            let pred = (0..row.len()).fold(0, |best, c| if row[c] > row[best] { c } else { best });
            classes[i] == Some(pred)
        })
        .count();
    hits as f64 / rows.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cross_entropy_uniform_logits() {
        let logits = DMatrix::zeros(2, 4);
        let y = DMatrix::from_row_slice(2, 4, &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        let (loss, grad) = cross_entropy(&logits, &y, &[0, 1]);
        assert!((loss - 4f64.ln()).abs() < 1e-15);
        assert!((grad[(0, 0)] + 0.375).abs() < 1e-15);
        assert!((grad[(0, 1)] - 0.125).abs() < 1e-15);
        assert!(grad.column_sum().iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn accuracy_counts_argmax() {
        let logits = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 2.0, 1.0]);
        let classes = [Some(0), Some(0), None];
        assert_eq!(accuracy(&logits, &classes, &[0, 1]), 0.5);
        assert_eq!(accuracy(&logits, &classes, &[2]), 0.0);
    }
}
