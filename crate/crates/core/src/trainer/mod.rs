//! Deep graph-convolutional classifier driven by a fused kernel.
//!
//! Hidden layers compute `σ(P H W) ⊕ X` with `P = D̂^{-1/2} 𝕂 D̂^{-1/2}`;
//! the last layer maps to class scores without activation or
//! concatenation. Training is full-graph and transductive.

mod ablation;
mod adam;
mod gradcheck;
pub mod model;
pub mod sparse;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{representation_diversity, LabelMatrix, SplitSpec};
use crate::kernel::Kernel;
use crate::linalg::hstack;

pub use ablation::{ablation_variant, KernelConfig, KernelSet, Variant};
pub use gradcheck::{gradient_check, gradient_check_network};
pub use model::{Forward, Layer, Network};
pub use sparse::SparseRows;

use adam::Adam;
use model::{accuracy, cross_entropy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub n_layers: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub lr: f64,
    pub epochs: usize,
    pub activation: Activation,
    pub concat_x: bool,
    /// L2 penalty `(λ/2)‖W‖²` summed over all weights, part of the loss.
    pub weight_decay: f64,
    /// Scale attribute rows to unit L1 norm before training.
    pub normalize_features: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            n_layers: 2,
            hidden_dim: 16,
            dropout: 0.5,
            lr: 0.01,
            epochs: 150,
            activation: Activation::Relu,
            concat_x: true,
            weight_decay: 5e-4,
            normalize_features: true,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.n_layers == 0 {
            return bad("n_layers must be at least 1".into());
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1".into());
        }
        if self.n_layers > 1 && self.hidden_dim == 0 {
            return bad("hidden_dim must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must be in [0, 1), got {}", self.dropout));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be nonnegative, got {}", self.weight_decay));
        }
        Ok(())
    }
}

/// Labels, split and preprocessed attributes shared by many runs.
#[derive(Debug, Clone)]
pub struct TrainData {
    raw: SparseRows,
    normalized: SparseRows,
    labels: LabelMatrix,
    classes: Vec<Option<usize>>,
    split: SplitSpec,
}

impl TrainData {
    pub fn new(attributes: &DMatrix<f64>, labels: &LabelMatrix, split: &SplitSpec) -> Result<Self> {
        if attributes.nrows() != labels.n_nodes() {
            return Err(Error::Dimension(format!(
                "{} attribute rows for {} labels",
                attributes.nrows(),
                labels.n_nodes()
            )));
        }
        split.validate(labels)?;
        if split.train.is_empty() {
            return Err(Error::EmptySet("training split".into()));
        }
        if split.test.is_empty() {
            return Err(Error::EmptySet("test split".into()));
        }
        let raw = SparseRows::from_dense(attributes);
        Ok(Self {
            normalized: raw.row_normalized(),
            raw,
            labels: labels.clone(),
            classes: labels.classes(),
            split: split.clone(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.labels.n_nodes()
    }

    pub fn n_features(&self) -> usize {
        self.raw.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.n_classes()
    }

    pub fn split(&self) -> &SplitSpec {
        &self.split
    }

    pub fn labels(&self) -> &LabelMatrix {
        &self.labels
    }

    pub fn features(&self, normalized: bool) -> &SparseRows {
        if normalized {
            &self.normalized
        } else {
            &self.raw
        }
    }
}

/// `D̂^{-1/2} 𝕂 D̂^{-1/2}` with `D̂` the row sums of `𝕂`.
pub fn propagation_operator(k: &Kernel) -> Result<DMatrix<f64>> {
    let m = k.matrix();
    let mut scale = Vec::with_capacity(m.nrows());
    for (row, r) in m.row_iter().enumerate() {
        let sum = r.sum();
        if !(sum > 0.0) {
            return Err(Error::DegenerateNormalization { row, sum });
        }
        scale.push(1.0 / sum.sqrt());
    }
    Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| {
        m[(i, j)] * (scale[i] * scale[j])
    }))
}

/// One propagation step `σ(P h w)`, followed by `⊕ x` when
/// `cfg.concat_x` is set.
pub fn propagate_layer(
    k: &Kernel,
    h: &DMatrix<f64>,
    w: &DMatrix<f64>,
    x: &DMatrix<f64>,
    cfg: &ModelConfig,
) -> Result<DMatrix<f64>> {
    if h.nrows() != k.dim() || x.nrows() != k.dim() || h.ncols() != w.nrows() {
        return Err(Error::Dimension(format!(
            "layer shapes: kernel {0}x{0}, H {1}x{2}, W {3}x{4}, X {5} rows",
            k.dim(),
            h.nrows(),
            h.ncols(),
            w.nrows(),
            w.ncols(),
            x.nrows()
        )));
    }
    let p = propagation_operator(k)?;
    let out = cfg.activation.apply(&(p * (h * w)));
    Ok(if cfg.concat_x { hstack(&out, x) } else { out })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub n_layers: usize,
    pub per_epoch_loss: Vec<f64>,
    /// Zero-based epoch whose weights were selected.
    pub best_epoch: usize,
    pub best_val_acc: f64,
    pub train_acc_at_best_val: f64,
    pub test_acc_at_best_val: f64,
    /// Input attributes, each hidden activation, then the logits.
    pub diversity_per_layer: Vec<f64>,
}

fn check_kernel(data: &TrainData, kernel: &Kernel) -> Result<()> {
    if kernel.dim() != data.n_nodes() {
        return Err(Error::Dimension(format!(
            "kernel is {0}x{0} for {1} nodes",
            kernel.dim(),
            data.n_nodes()
        )));
    }
    Ok(())
}

fn diversity_trace(net: &Network, fwd: &Forward, x: &SparseRows) -> Vec<f64> {
    debug_assert_eq!(fwd.acts.len() + 1, net.layers.len());
    std::iter::once(representation_diversity(&x.to_dense()))
        .chain(fwd.acts.iter().map(representation_diversity))
        .chain(std::iter::once(representation_diversity(fwd.logits())))
        .collect()
}

/// Diversity trace of a freshly initialized model, without training.
pub fn diversity_probe(data: &TrainData, kernel: &Kernel, cfg: &ModelConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    check_kernel(data, kernel)?;
    let p = propagation_operator(kernel)?;
    let x = data.features(cfg.normalize_features);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let net = Network::glorot(cfg, data.n_features(), data.n_classes(), &mut rng);
    let fwd = net.forward(&p, x, None);
    Ok(diversity_trace(&net, &fwd, x))
}

/// Regularized training objective and its gradient.
pub(crate) fn objective(
    net: &Network,
    p: &DMatrix<f64>,
    fwd: &Forward,
    data: &TrainData,
    weight_decay: f64,
) -> (f64, Vec<Layer>) {
    let (ce, dlogits) = cross_entropy(fwd.logits(), data.labels.onehot(), &data.split.train);
    let mut grads = net.backward(p, fwd, dlogits);
    let mut loss = ce;
    if weight_decay > 0.0 {
        loss += 0.5 * weight_decay * net.squared_norm();
        for (g, l) in grads.iter_mut().zip(&net.layers) {
            for (gm, wm) in g.params_mut().zip(l.params()) {
                *gm += wm * weight_decay;
            }
        }
    }
    (loss, grads)
}

/// Trains with Adam for `cfg.epochs` full-batch steps and reports the
/// epoch with the best validation accuracy (ties: lower validation loss).
/// With an empty validation split, training accuracy drives selection.
pub fn train(data: &TrainData, kernel: &Kernel, cfg: &ModelConfig) -> Result<TrainReport> {
    cfg.validate()?;
    check_kernel(data, kernel)?;
    let p = propagation_operator(kernel)?;
    let x = data.features(cfg.normalize_features);
    let split = &data.split;
    let select_rows = if split.val.is_empty() { &split.train } else { &split.val };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut net = Network::glorot(cfg, data.n_features(), data.n_classes(), &mut rng);
    let mut optim: Vec<Adam> = net
        .layers
        .iter()
        .flat_map(Layer::params)
        .map(|w| Adam::new(w.nrows(), w.ncols()))
        .collect();

    let mut per_epoch_loss = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, f64, usize, Network)> = None;
    for epoch in 0..cfg.epochs {
        let fwd = net.forward(&p, x, Some((cfg.dropout, &mut rng)));
        let (loss, grads) = objective(&net, &p, &fwd, data, cfg.weight_decay);
        if !loss.is_finite() {
            return Err(Error::NanLoss { epoch });
        }
        per_epoch_loss.push(loss);
        let params = net.layers.iter_mut().flat_map(Layer::params_mut);
        let grads = grads.iter().flat_map(Layer::params);
        for ((w, g), opt) in params.zip(grads).zip(optim.iter_mut()) {
            opt.step(w, g, cfg.lr);
        }

        let eval = net.forward(&p, x, None);
        let logits = eval.logits();
        let sel_acc = accuracy(logits, &data.classes, select_rows);
        let (sel_loss, _) = cross_entropy(logits, data.labels.onehot(), select_rows);
        let better = match &best {
            None => true,
            Some((acc, l, _, _)) => sel_acc > *acc || (sel_acc == *acc && sel_loss < *l),
        };
        if better {
            best = Some((sel_acc, sel_loss, epoch, net.clone()));
        }
    }

    let (best_val_acc, _, best_epoch, best_net) = best.expect("epochs >= 1");
    let eval = best_net.forward(&p, x, None);
    let logits = eval.logits();
    Ok(TrainReport {
        seed: cfg.seed,
        n_layers: cfg.n_layers,
        per_epoch_loss,
        best_epoch,
        best_val_acc,
        train_acc_at_best_val: accuracy(logits, &data.classes, &split.train),
        test_acc_at_best_val: accuracy(logits, &data.classes, &split.test),
        diversity_per_layer: diversity_trace(&best_net, &eval, x),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthRow {
    pub depth: usize,
    pub reports: Vec<TrainReport>,
}

impl DepthRow {
    pub fn mean_test_acc(&self) -> f64 {
        self.reports.iter().map(|r| r.test_acc_at_best_val).sum::<f64>() / self.reports.len() as f64
    }
}

/// Trains every `(depth, seed)` cell; rows follow `depths`, reports
/// follow `seeds`.
pub fn depth_sweep<F>(
    data: &TrainData,
    kernel_builder: F,
    cfg_base: &ModelConfig,
    depths: &[usize],
    seeds: &[u64],
) -> Result<Vec<DepthRow>>
where
    F: Fn(usize) -> Result<Kernel> + Sync,
{
    if depths.is_empty() || seeds.is_empty() {
        return Err(Error::EmptySet("depth sweep needs depths and seeds".into()));
    }
    depths
        .iter()
        .map(|&depth| {
            let kernel = kernel_builder(depth)?;
            let reports = seeds
                .par_iter()
                .map(|&seed| {
                    let cfg = ModelConfig {
                        n_layers: depth,
                        seed,
                        ..cfg_base.clone()
                    };
                    train(data, &kernel, &cfg)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(DepthRow { depth, reports })
        })
        .collect()
}
