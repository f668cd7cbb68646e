//! Cross-space kernel fusion and validation-based selection of the
//! fusion weight.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{assert_psd, Kernel, PSD_TOL};
use crate::linalg::symmetrize;

pub const DEFAULT_GAMMA_GRID: [f64; 4] = [0.0, 0.1, 0.5, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub gamma: f64,
    pub gamma_grid: Vec<f64>,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            gamma: 0.0,
            gamma_grid: DEFAULT_GAMMA_GRID.to_vec(),
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        self.gamma_grid.iter().try_for_each(|&g| check_gamma(g))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma >= 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("gamma must be nonnegative, got {gamma}")))
    }
}

/// `(K_attr + K_top)/2 + γ (K_attr − K_top)²`.
///
/// When both inputs carry a PSD check the result is checked as well.
/// Otherwise the result is returned as an unchecked symmetric kernel.
pub fn fuse(k_attr: &Kernel, k_top: &Kernel, gamma: f64) -> Result<Kernel> {
    check_gamma(gamma)?;
    if k_attr.dim() != k_top.dim() {
        return Err(Error::Dimension(format!(
            "cannot fuse {0}x{0} with {1}x{1} kernel",
            k_attr.dim(),
            k_top.dim()
        )));
    }
    let a = k_attr.matrix();
    let b = k_top.matrix();
    let mut fused = (a + b) * 0.5;
    if gamma != 0.0 {
        let diff = a - b;
        fused += (&diff * &diff) * gamma;
    }
    symmetrize(&mut fused);
    if k_attr.is_psd_checked() && k_top.is_psd_checked() {
        assert_psd(fused, PSD_TOL)
    } else {
        Ok(Kernel::from_parts(fused, false))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaScore {
    pub gamma: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaSelection {
    pub gamma: f64,
    pub scores: Vec<GammaScore>,
}

/// Fuses with every grid value, scores each fused kernel with `score_fn`
/// (validation accuracy), and keeps the best. Ties go to the smaller γ.
pub fn select_gamma<F>(k_attr: &Kernel, k_top: &Kernel, grid: &[f64], score_fn: F) -> Result<GammaSelection>
where
    F: Fn(&Kernel) -> Result<f64>,
{
    if grid.is_empty() {
        return Err(Error::EmptySet("gamma grid".into()));
    }
    let mut scores = Vec::with_capacity(grid.len());
    for &gamma in grid {
        let with_ctx = |source: Error| Error::GammaSelection {
            gamma,
            source: Box::new(source),
        };
        let fused = fuse(k_attr, k_top, gamma).map_err(with_ctx)?;
        let val_accuracy = score_fn(&fused).map_err(with_ctx)?;
        scores.push(GammaScore { gamma, val_accuracy });
    }
    let best = scores
        .iter()
        .fold(None::<&GammaScore>, |best, s| match best {
            None => Some(s),
            Some(b) if s.val_accuracy > b.val_accuracy => Some(s),
            Some(b) if s.val_accuracy == b.val_accuracy && s.gamma < b.gamma => Some(s),
            Some(b) => Some(b),
        })
        .expect("grid is nonempty");
    Ok(GammaSelection {
        gamma: best.gamma,
        scores,
    })
}
