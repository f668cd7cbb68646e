//! Finite-difference verification of the backward pass.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{objective, propagation_operator, Activation, Layer, ModelConfig, Network, TrainData};
use crate::error::{Error, Result};
use crate::kernel::Kernel;

/// Pre-activations closer than this to zero count as sitting on a ReLU kink.
const KINK_MARGIN: f64 = 1e-4;
const MAX_NUDGES: u64 = 20;

fn nearest_kink(net: &Network, p: &DMatrix<f64>, data: &TrainData, cfg: &ModelConfig) -> f64 {
    if net.activation != Activation::Relu {
        return f64::INFINITY;
    }
    let fwd = net.forward(p, data.features(cfg.normalize_features), None);
    let hidden = &fwd.pre[..fwd.pre.len() - 1];
    hidden
        .iter()
        .flat_map(|z| z.iter())
        .fold(f64::INFINITY, |m, v| m.min(v.abs()))
}

/// Maximum relative error between analytic and central-difference
/// gradients over every weight of a Glorot-initialized model. When a ReLU
/// pre-activation lies within `1e-4` of the kink, the initialization is
/// redrawn from the next seed.
pub fn gradient_check(cfg: &ModelConfig, data: &TrainData, kernel: &Kernel, epsilon: f64) -> Result<f64> {
    cfg.validate()?;
    let p = propagation_operator(kernel)?;
    for nudge in 0..MAX_NUDGES {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(nudge));
        let net = Network::glorot(cfg, data.n_features(), data.n_classes(), &mut rng);
        if nearest_kink(&net, &p, data, cfg) > KINK_MARGIN {
            return gradient_check_network(&net, cfg, data, kernel, epsilon);
        }
    }
    Err(Error::Numeric(format!(
        "no initialization within {MAX_NUDGES} draws stays {KINK_MARGIN} away from ReLU kinks"
    )))
}

/// Gradient check at the given weights. Relative error per entry is
/// `|a − n| / max(|a|, |n|)`, taken as zero when both vanish.
pub fn gradient_check_network(
    net: &Network,
    cfg: &ModelConfig,
    data: &TrainData,
    kernel: &Kernel,
    epsilon: f64,
) -> Result<f64> {
    if cfg.dropout != 0.0 {
        return Err(Error::Parameter("gradient check needs dropout = 0".into()));
    }
    if !(epsilon > 0.0) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {epsilon}")));
    }
    let p = propagation_operator(kernel)?;
    let x = data.features(cfg.normalize_features);
    let loss_at = |n: &Network| {
        let fwd = n.forward(&p, x, None);
        objective(n, &p, &fwd, data, cfg.weight_decay).0
    };
    let fwd = net.forward(&p, x, None);
    let (_, grads) = objective(net, &p, &fwd, data, cfg.weight_decay);

    let mut probe = net.clone();
    let mut worst: f64 = 0.0;
    for (li, (layer, grad)) in net.layers.iter().zip(&grads).enumerate() {
        let blocks = layer.params().zip(grad.params()).enumerate();
        for (bi, (w, g)) in blocks {
            for idx in 0..w.len() {
                let original = w[idx];
                let set = |probe: &mut Network, v: f64| {
                    block_mut(&mut probe.layers[li], bi).as_mut_slice()[idx] = v;
                };
                set(&mut probe, original + epsilon);
                let up = loss_at(&probe);
                set(&mut probe, original - epsilon);
                let down = loss_at(&probe);
                set(&mut probe, original);
                let numeric = (up - down) / (2.0 * epsilon);
                let analytic = g[idx];
                let scale = analytic.abs().max(numeric.abs());
                if scale > 0.0 {
                    worst = worst.max((analytic - numeric).abs() / scale);
                }
            }
        }
    }
    Ok(worst)
}

fn block_mut(layer: &mut Layer, index: usize) -> &mut DMatrix<f64> {
    layer.params_mut().nth(index).expect("block index in range")
}
