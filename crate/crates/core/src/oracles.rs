//! Closed-form reference models and the brute-force solver for the
//! transductive kernel problem.
//!
//! These are the regression and propagation models whose spectral
//! shrinkage the attribute filter generalizes. Each has an independent
//! second route (normal equations, eigen-shrinkage, fixed-point iteration,
//! gradient descent) used by the test suites.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::filters::{attr_highpass_kernel, khat};
use crate::graph::{Graph, LabelMatrix};
use crate::kernel::{eigendecompose, gamma_operator, Kernel};
use crate::linalg::{ensure_finite, solve};

#[derive(Debug, Clone)]
pub struct RidgeSolution {
    pub beta: DMatrix<f64>,
    pub lambda: f64,
    /// `dᵢ² / (dᵢ² + λ)` for the singular values `dᵢ` of `X`, descending in `dᵢ`.
    pub shrinkage: Vec<f64>,
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Parameter(format!("{name} must be positive, got {v}")))
    }
}

/// Ridge regression `β̂ = (XᵀX + λI)⁻¹ XᵀY`.
pub fn ridge_fit(x: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<RidgeSolution> {
    positive("lambda", lambda)?;
    ensure_finite(x, "design matrix")?;
    ensure_finite(y, "response")?;
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "X has {} rows, Y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    let p = x.ncols();
    let gram = x.transpose() * x + DMatrix::<f64>::identity(p, p) * lambda;
    let rhs = x.transpose() * y;
    let beta = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => solve(&gram, &rhs)?,
    };
    let mut d: Vec<f64> = x.clone().singular_values().iter().copied().collect();
    d.sort_by(|a, b| b.total_cmp(a));
    let shrinkage = d.iter().map(|d| d * d / (d * d + lambda)).collect();
    Ok(RidgeSolution {
        beta,
        lambda,
        shrinkage,
    })
}

/// Kernel ridge regression fitted values `Γ(K, λ) Y`.
pub fn krr_fit(k: &Kernel, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    positive("lambda", lambda)?;
    ensure_finite(y, "response")?;
    if y.nrows() != k.dim() {
        return Err(Error::Dimension(format!(
            "Y has {} rows, kernel is {}x{}",
            y.nrows(),
            k.dim(),
            k.dim()
        )));
    }
    Ok(gamma_operator(k, lambda)? * y)
}

/// Per-eigenvalue shrinkage `λᵢ / (λᵢ + λ)` of kernel ridge regression,
/// in ascending eigenvalue order.
pub fn krr_shrinkage(k: &Kernel, lambda: f64) -> Result<Vec<f64>> {
    positive("lambda", lambda)?;
    let eig = eigendecompose(k.matrix())?;
    Ok(eig.eigenvalues.iter().map(|l| l / (l + lambda)).collect())
}

fn lp_gamma(gamma: f64) -> Result<()> {
    if (0.0..1.0).contains(&gamma) {
        Ok(())
    } else {
        Err(Error::Parameter(format!(
            "label propagation gamma must be in [0, 1), got {gamma}"
        )))
    }
}

/// Label propagation in closed form, `(I + γ/(1−γ)·L)⁻¹ Y₀`.
pub fn label_propagation(g: &Graph, y0: &LabelMatrix, gamma: f64) -> Result<DMatrix<f64>> {
    lp_gamma(gamma)?;
    let l = g.normalized_laplacian(false)?;
    let n = g.n_nodes();
    let a1 = gamma / (1.0 - gamma);
    let system = DMatrix::identity(n, n) + l * a1;
    solve(&system, y0.onehot())
}

/// Label propagation by the iteration `Yᵏ⁺¹ = γ S Yᵏ + (1 − γ) Y₀` with
/// `S = D^{-1/2} A D^{-1/2}`, started from `Y₀`.
pub fn label_propagation_iterative(g: &Graph, y0: &LabelMatrix, gamma: f64, iterations: usize) -> Result<DMatrix<f64>> {
    lp_gamma(gamma)?;
    let s = g.normalized_adjacency(false)?;
    let base = y0.onehot() * (1.0 - gamma);
    let mut y = y0.onehot().clone();
    for _ in 0..iterations {
        y = &s * &y * gamma + &base;
    }
    Ok(y)
}

/// Labeled / unlabeled index partition of `n` nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub labeled: Vec<usize>,
    pub unlabeled: Vec<usize>,
}

impl Partition {
    pub fn new(n: usize, labeled_idx: &[usize]) -> Result<Self> {
        let mut is_labeled = vec![false; n];
        for &i in labeled_idx {
            if i >= n {
                return Err(Error::Dimension(format!(
                    "labeled index {i} out of range for {n} nodes"
                )));
            }
            is_labeled[i] = true;
        }
        let unlabeled: Vec<usize> = (0..n).filter(|&i| !is_labeled[i]).collect();
        if labeled_idx.is_empty() {
            return Err(Error::EmptySet("labeled set".into()));
        }
        if unlabeled.is_empty() {
            return Err(Error::EmptySet("unlabeled set".into()));
        }
        Ok(Self {
            labeled: labeled_idx.to_vec(),
            unlabeled,
        })
    }

    pub fn from_labels(y0: &LabelMatrix) -> Result<Self> {
        Self::new(y0.n_nodes(), &y0.labeled_indices())
    }
}

fn submatrix(m: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |i, j| m[(rows[i], cols[j])])
}

fn check_problem2(khat: &DMatrix<f64>, y_l: &DMatrix<f64>, part: &Partition, a2: f64) -> Result<()> {
    positive("a2", a2)?;
    if !khat.is_square() {
        return Err(Error::Dimension("K̂ must be square".into()));
    }
    if y_l.nrows() != part.labeled.len() {
        return Err(Error::Dimension(format!(
            "Y_L has {} rows for {} labeled nodes",
            y_l.nrows(),
            part.labeled.len()
        )));
    }
    Ok(())
}

/// Regularized harmonic solution `Z = −(K̂_uu + a₂I)⁻¹ K̂_ul Y_L` for the
/// unlabeled rows, ordered as [`Partition::unlabeled`].
pub fn transductive_z(khat: &DMatrix<f64>, y_l: &DMatrix<f64>, labeled_idx: &[usize], a2: f64) -> Result<DMatrix<f64>> {
    let part = Partition::new(khat.nrows(), labeled_idx)?;
    check_problem2(khat, y_l, &part, a2)?;
    let k_uu = submatrix(khat, &part.unlabeled, &part.unlabeled);
    let k_ul = submatrix(khat, &part.unlabeled, &part.labeled);
    let u = part.unlabeled.len();
    let system = k_uu + DMatrix::<f64>::identity(u, u) * a2;
    let rhs = -(k_ul * y_l);
    solve(&system, &rhs)
}

/// Assembles the full label matrix from labeled rows and `Z`.
pub fn assemble_labels(n: usize, part: &Partition, y_l: &DMatrix<f64>, z: &DMatrix<f64>) -> DMatrix<f64> {
    let mut y = DMatrix::zeros(n, y_l.ncols());
    for (r, &i) in part.labeled.iter().enumerate() {
        y.row_mut(i).copy_from(&y_l.row(r));
    }
    for (r, &i) in part.unlabeled.iter().enumerate() {
        y.row_mut(i).copy_from(&z.row(r));
    }
    y
}

/// `tr(𝕐ᵀ K̂ 𝕐) + a₂‖Z‖²`.
pub fn problem2_objective(
    khat: &DMatrix<f64>,
    y_l: &DMatrix<f64>,
    labeled_idx: &[usize],
    z: &DMatrix<f64>,
    a2: f64,
) -> Result<f64> {
    let part = Partition::new(khat.nrows(), labeled_idx)?;
    check_problem2(khat, y_l, &part, a2)?;
    let y = assemble_labels(khat.nrows(), &part, y_l, z);
    Ok((y.transpose() * khat * &y).trace() + a2 * z.norm_squared())
}

/// Minimizes the transductive objective by gradient descent on `Z`, with
/// step `1/L` from a Gershgorin bound on the Lipschitz constant.
pub fn brute_force_problem2(
    khat: &DMatrix<f64>,
    y_l: &DMatrix<f64>,
    labeled_idx: &[usize],
    a2: f64,
) -> Result<DMatrix<f64>> {
    const MAX_ITERS: usize = 1_000_000;
    const GRAD_TOL: f64 = 1e-9;

    let n = khat.nrows();
    let part = Partition::new(n, labeled_idx)?;
    check_problem2(khat, y_l, &part, a2)?;
    let row_bound = part
        .unlabeled
        .iter()
        .map(|&i| part.unlabeled.iter().map(|&j| khat[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / (2.0 * (row_bound + a2));

    let mut z = DMatrix::zeros(part.unlabeled.len(), y_l.ncols());
    let mut grad_norm = f64::INFINITY;
    for _ in 0..MAX_ITERS {
        let y = assemble_labels(n, &part, y_l, &z);
        let ky = khat * &y;
        let grad = DMatrix::from_fn(z.nrows(), z.ncols(), |r, c| {
            2.0 * ky[(part.unlabeled[r], c)] + 2.0 * a2 * z[(r, c)]
        });
        grad_norm = grad.norm();
        if grad_norm <= GRAD_TOL {
            return Ok(z);
        }
        z -= grad * step;
    }
    Err(Error::NonConvergence {
        iterations: MAX_ITERS,
        residual: grad_norm,
    })
}

/// Fitted values of semi-supervised kernel ridge regression,
/// `𝕐 = K_attr Y₀`.
pub fn semi_krr_fitted(k: &Kernel, y0: &LabelMatrix, a2: f64, a3: f64) -> Result<DMatrix<f64>> {
    let k_attr = attr_highpass_kernel(k, a2, a3)?;
    Ok(k_attr.matrix() * y0.onehot())
}

/// Solves the stationarity condition `(K̂ + a₂I) 𝕐 = a₂ Y₀` of the
/// penalized problem directly, without forming `K_attr`.
pub fn semi_krr_stationarity_solve(k: &Kernel, y0: &LabelMatrix, a2: f64, a3: f64) -> Result<DMatrix<f64>> {
    positive("a2", a2)?;
    let n = k.dim();
    let system = khat(k, a3)? + DMatrix::<f64>::identity(n, n) * a2;
    solve(&system, &(y0.onehot() * a2))
}

/// Joint objective `‖𝕐 − Kα‖² + a₃ αᵀKα + a₂‖Z‖²` evaluated at the
/// closed-form point `α = (K + a₃I)⁻¹ 𝕐`, `Z` the transductive solution.
pub fn joint_objective_at_closed_form(
    k: &Kernel,
    y_l: &DMatrix<f64>,
    labeled_idx: &[usize],
    a2: f64,
    a3: f64,
) -> Result<f64> {
    let n = k.dim();
    let kh = khat(k, a3)?;
    let z = transductive_z(&kh, y_l, labeled_idx, a2)?;
    let part = Partition::new(n, labeled_idx)?;
    let y = assemble_labels(n, &part, y_l, &z);
    let shifted = k.matrix() + DMatrix::<f64>::identity(n, n) * a3;
    let alpha = solve(&shifted, &y)?;
    let fit = &y - k.matrix() * &alpha;
    let penalty = (alpha.transpose() * k.matrix() * &alpha).trace();
    Ok(fit.norm_squared() + a3 * penalty + a2 * z.norm_squared())
}
