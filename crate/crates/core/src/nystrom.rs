//! Nyström low-rank approximation of kernels and their inverses, and the
//! approximate attribute kernel built on it.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::attr_highpass_kernel;
use crate::kernel::{eigendecompose, Kernel};
use crate::linalg::{ensure_finite, pinv, symmetrize};

/// Relative cutoff for every pseudo-inverse taken here.
pub const PINV_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct NystromSketch {
    pub sampled_cols: Vec<usize>,
    /// `K[:, sampled]`, `N × m`.
    pub c: DMatrix<f64>,
    /// `K[sampled, sampled]`, `m × m`.
    pub q: DMatrix<f64>,
    pub rank_k: usize,
}

/// Samples `m` distinct columns uniformly at random.
pub fn sketch(k: &Kernel, m: usize, rank_k: usize, seed: u64) -> Result<NystromSketch> {
    sketch_matrix(k.matrix(), m, rank_k, seed)
}

fn sketch_matrix(k: &DMatrix<f64>, m: usize, rank_k: usize, seed: u64) -> Result<NystromSketch> {
    let n = k.nrows();
    if m > n {
        return Err(Error::Parameter(format!(
            "cannot sample {m} columns from an {n}x{n} kernel"
        )));
    }
    if rank_k == 0 || rank_k > m {
        return Err(Error::Parameter(format!(
            "rank_k must be in [1, m = {m}], got {rank_k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampled_cols = rand::seq::index::sample(&mut rng, n, m).into_vec();
    let c = k.select_columns(&sampled_cols);
    let q = c.select_rows(&sampled_cols);
    Ok(NystromSketch {
        sampled_cols,
        c,
        q,
        rank_k,
    })
}

impl NystromSketch {
    pub fn m(&self) -> usize {
        self.sampled_cols.len()
    }

    /// Top-`rank_k` eigenpairs of `Q` by eigenvalue, descending.
    fn top_eigenpairs(&self) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let mut q = self.q.clone();
        symmetrize(&mut q);
        let eig = eigendecompose(&q)?;
        let m = eig.len();
        let idx: Vec<usize> = (0..self.rank_k).map(|i| m - 1 - i).collect();
        let values = DVector::from_iterator(idx.len(), idx.iter().map(|&i| eig.eigenvalues[i]));
        Ok((values, eig.eigenvectors.select_columns(&idx)))
    }

    fn cutoff(values: &DVector<f64>) -> f64 {
        PINV_TOL * values.amax()
    }

    /// `C Q_k⁺ Cᵀ`.
    pub fn approx_kernel(&self) -> Result<DMatrix<f64>> {
        let (values, vectors) = self.top_eigenpairs()?;
        let cut = Self::cutoff(&values);
        let cv = &self.c * &vectors;
        let mut scaled = cv.clone();
        for (j, &l) in values.iter().enumerate() {
            let inv = if l.abs() > cut { 1.0 / l } else { 0.0 };
            scaled.column_mut(j).scale_mut(inv);
        }
        let mut out = scaled * cv.transpose();
        symmetrize(&mut out);
        ensure_finite(&out, "Nyström kernel")?;
        Ok(out)
    }

    /// `F` with `F Fᵀ = C Q_k⁺ Cᵀ`, keeping only positive eigenvalues of `Q_k`.
    pub fn factor(&self) -> Result<DMatrix<f64>> {
        let (values, vectors) = self.top_eigenpairs()?;
        let cut = Self::cutoff(&values);
        let keep: Vec<usize> = (0..values.len()).filter(|&j| values[j] > cut).collect();
        let mut f = &self.c * vectors.select_columns(&keep);
        for (col, &j) in keep.iter().enumerate() {
            f.column_mut(col).scale_mut(1.0 / values[j].sqrt());
        }
        Ok(f)
    }

    /// `C₁ᵀ Q_k C₁` with `C₁ = C⁺`.
    pub fn approx_inverse(&self) -> Result<DMatrix<f64>> {
        let (values, vectors) = self.top_eigenpairs()?;
        let c1 = pinv(&self.c, PINV_TOL)?;
        // Q_k = V Λ Vᵀ, so C₁ᵀ Q_k C₁ = (Vᵀ C₁)ᵀ Λ (Vᵀ C₁).
        let proj = vectors.transpose() * &c1;
        let mut scaled = proj.clone();
        for (r, &l) in values.iter().enumerate() {
            scaled.row_mut(r).scale_mut(l);
        }
        let mut out = proj.transpose() * scaled;
        symmetrize(&mut out);
        ensure_finite(&out, "Nyström inverse")?;
        Ok(out)
    }
}

/// Where the low-rank approximation enters the attribute kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NystromMode {
    /// Approximate the single inversion `(K + sI)⁻¹`, `s = a₃(1 + 1/a₂)`,
    /// through which `K_attr = I − (a₃/a₂)(K + sI)⁻¹`.
    #[default]
    Inverse,
    /// Approximate `K` itself by `F Fᵀ` and invert `F Fᵀ + sI` exactly
    /// with the Woodbury identity.
    Kernel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NystromConfig {
    pub m: usize,
    /// Defaults to `m` when absent.
    pub rank_k: Option<usize>,
    pub seed: u64,
    #[serde(default)]
    pub mode: NystromMode,
}

impl NystromConfig {
    pub fn new(m: usize, seed: u64) -> Self {
        Self {
            m,
            rank_k: None,
            seed,
            mode: NystromMode::default(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rank_k.unwrap_or(self.m)
    }
}

/// Attribute high-pass kernel with its inversion replaced by a Nyström
/// approximation. The result is symmetric but carries no PSD check.
pub fn attr_highpass_kernel_nystrom(k: &Kernel, a2: f64, a3: f64, cfg: &NystromConfig) -> Result<Kernel> {
    // Parameter validation is shared with the exact path.
    attr_highpass_kernel(&Kernel::identity(1), a2, a3)?;
    let n = k.dim();
    let shift = a3 * (1.0 + 1.0 / a2);
    let inv_shifted = match cfg.mode {
        NystromMode::Inverse => {
            let mut shifted = k.matrix().clone();
            for i in 0..n {
                shifted[(i, i)] += shift;
            }
            sketch_matrix(&shifted, cfg.m, cfg.rank(), cfg.seed)?.approx_inverse()?
        }
        NystromMode::Kernel => {
            let f = sketch(k, cfg.m, cfg.rank(), cfg.seed)?.factor()?;
            let r = f.ncols();
            let inner = f.transpose() * &f + DMatrix::<f64>::identity(r, r) * shift;
            let inner_inv = crate::linalg::sym_inverse(&inner)?;
            let mut w = -(&f * inner_inv * f.transpose());
            for i in 0..n {
                w[(i, i)] += 1.0;
            }
            w / shift
        }
    };
    let mut out = inv_shifted * (-a3 / a2);
    for i in 0..n {
        out[(i, i)] += 1.0;
    }
    symmetrize(&mut out);
    ensure_finite(&out, "Nyström attribute kernel")?;
    Ok(Kernel::from_parts(out, false))
}
