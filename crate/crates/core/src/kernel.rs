//! Mercer kernels over graph nodes.
//!
//! A [`Kernel`] is a dense symmetric `N × N` matrix. Kernels built by this
//! crate carry a flag recording whether positive semi-definiteness was
//! verified; the topology kernel, for instance, is symmetric but may have
//! eigenvalues down to `-1`.

use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{ensure_finite, ensure_square, max_asymmetry, spectral_compose, symmetrize};
use crate::tsv;

/// Symmetry tolerance applied when wrapping a matrix as a kernel.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Default eigenvalue tolerance for PSD verification.
pub const PSD_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    matrix: DMatrix<f64>,
    psd_checked: bool,
}

impl Kernel {
    /// Wraps a symmetric matrix without checking its spectrum. The matrix is
    /// symmetrized exactly after the tolerance check.
    pub fn symmetric(mut matrix: DMatrix<f64>, tol: f64) -> Result<Self> {
        ensure_square(&matrix, "kernel")?;
        ensure_finite(&matrix, "kernel")?;
        let asym = max_asymmetry(&matrix);
        if asym > tol {
            return Err(Error::NotSymmetric(asym));
        }
        symmetrize(&mut matrix);
        Ok(Self {
            matrix,
            psd_checked: false,
        })
    }

    pub(crate) fn from_parts(matrix: DMatrix<f64>, psd_checked: bool) -> Self {
        debug_assert!(max_asymmetry(&matrix) <= SYMMETRY_TOL);
        Self { matrix, psd_checked }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            matrix: DMatrix::identity(n, n),
            psd_checked: true,
        }
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_psd_checked(&self) -> bool {
        self.psd_checked
    }

    /// Verifies positive semi-definiteness, consuming the unchecked kernel.
    pub fn checked(self, tol: f64) -> Result<Self> {
        if self.psd_checked {
            return Ok(self);
        }
        assert_psd(self.matrix, tol)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        tsv::save_matrix(path, &self.matrix)
    }

    /// Loads a kernel dump. The result is not PSD-checked.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::symmetric(tsv::load_matrix(path)?, SYMMETRY_TOL)
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors
/// stored as columns.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<f64>,
}

impl EigenSystem {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        spectral_compose(&self.eigenvectors, &self.eigenvalues)
    }

    /// `U · diag(f(λᵢ)) · Uᵀ`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        spectral_compose(&self.eigenvectors, &self.eigenvalues.map(f))
    }
}

/// Symmetric eigendecomposition with eigenvalues sorted ascending.
pub fn eigendecompose(m: &DMatrix<f64>) -> Result<EigenSystem> {
    ensure_square(m, "eigendecomposition input")?;
    ensure_finite(m, "eigendecomposition input")?;
    let n = m.nrows();
    if n == 0 {
        return Ok(EigenSystem {
            eigenvalues: DVector::zeros(0),
            eigenvectors: DMatrix::zeros(0, 0),
        });
    }
    let eig = m.clone().try_symmetric_eigen(f64::EPSILON, 0).ok_or_else(|| {
        Error::Numeric(format!(
            "symmetric eigensolver did not converge on a {n}x{n} matrix (max |entry| {:e})",
            m.amax()
        ))
    })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok(EigenSystem {
        eigenvalues,
        eigenvectors,
    })
}

/// Checks that `m` is symmetric and has no eigenvalue below `-tol`.
pub fn assert_psd(m: DMatrix<f64>, tol: f64) -> Result<Kernel> {
    let mut kernel = Kernel::symmetric(m, tol.max(SYMMETRY_TOL))?;
    let min = eigendecompose(&kernel.matrix)?.min();
    if min < -tol {
        return Err(Error::NotPsd {
            min_eigenvalue: min,
            tolerance: tol,
        });
    }
    kernel.psd_checked = true;
    Ok(kernel)
}

/// `Γ(K, a₃) = K (K + a₃ I)⁻¹`, the kernel ridge regression hat matrix.
///
/// `K` and `(K + a₃I)⁻¹` commute, so the product is computed as a solve
/// against `K` and symmetrized.
pub fn gamma_operator(k: &Kernel, a3: f64) -> Result<DMatrix<f64>> {
    if !(a3 > 0.0) || !a3.is_finite() {
        return Err(Error::Parameter(format!("a3 must be positive, got {a3}")));
    }
    let n = k.dim();
    let shifted = k.matrix() + DMatrix::<f64>::identity(n, n) * a3;
    let mut gamma = match shifted.clone().cholesky() {
        Some(chol) => chol.solve(k.matrix()),
        None => crate::linalg::solve(&shifted, k.matrix())?,
    };
    symmetrize(&mut gamma);
    ensure_finite(&gamma, "gamma operator")?;
    Ok(gamma)
}

/// How a nearly-PSD kernel is repaired after KNN sparsification.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PsdRepair {
    /// Fail on any eigenvalue below `-PSD_TOL`.
    Strict,
    /// Clip negative eigenvalues to zero when the most negative one is
    /// within the given magnitude; fail otherwise.
    ClipWithin(f64),
    /// Always project onto the PSD cone by clipping negative eigenvalues.
    Project,
}

/// Sparsified Gaussian similarity kernel over node attributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKnn {
    pub top_k: usize,
    pub repair: PsdRepair,
}

impl GaussianKnn {
    pub fn new(top_k: usize) -> Self {
        Self {
            top_k,
            repair: PsdRepair::Project,
        }
    }

    pub fn with_repair(mut self, repair: PsdRepair) -> Self {
        self.repair = repair;
        self
    }

    /// Builds the kernel, returning it together with build diagnostics.
    pub fn build_with_report(&self, x: &DMatrix<f64>) -> Result<(Kernel, KnnKernelReport)> {
        let n = x.nrows();
        if n < 2 {
            return Err(Error::Parameter(format!("KNN kernel needs at least 2 nodes, got {n}")));
        }
        if self.top_k == 0 || self.top_k >= n {
            return Err(Error::Parameter(format!(
                "top_k must be in [1, {}), got {}",
                n, self.top_k
            )));
        }
        ensure_finite(x, "attribute matrix")?;

        let (similarity, bandwidth) = gaussian_similarity(x)?;
        let mut k = knn_sparsify(&similarity, self.top_k);
        for i in 0..n {
            k[(i, i)] = 1.0;
        }
        renormalize(&mut k);

        let eig = eigendecompose(&k)?;
        let min_eigenvalue = eig.min();
        let project = match self.repair {
            _ if min_eigenvalue >= 0.0 => false,
            PsdRepair::Strict if min_eigenvalue >= -PSD_TOL => false,
            PsdRepair::Strict => {
                return Err(Error::NotPsd {
                    min_eigenvalue,
                    tolerance: PSD_TOL,
                })
            }
            PsdRepair::ClipWithin(limit) if min_eigenvalue >= -limit => true,
            PsdRepair::ClipWithin(limit) => {
                return Err(Error::NotPsd {
                    min_eigenvalue,
                    tolerance: limit,
                })
            }
            PsdRepair::Project => true,
        };
        let matrix = if project { eig.apply(|l| l.max(0.0)) } else { k };
        let kernel = Kernel {
            matrix,
            psd_checked: true,
        };
        Ok((
            kernel,
            KnnKernelReport {
                bandwidth,
                min_eigenvalue_before_repair: min_eigenvalue,
                projected: project,
            },
        ))
    }

    pub fn build(&self, x: &DMatrix<f64>) -> Result<Kernel> {
        self.build_with_report(x).map(|(k, _)| k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnKernelReport {
    pub bandwidth: f64,
    pub min_eigenvalue_before_repair: f64,
    pub projected: bool,
}

/// Gaussian KNN kernel with the default PSD repair policy.
pub fn gaussian_knn_kernel(x: &DMatrix<f64>, top_k: usize) -> Result<Kernel> {
    GaussianKnn::new(top_k).build(x)
}

/// Squared Euclidean distances between rows.
pub fn pairwise_sq_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let gram = x * x.transpose();
    let mut d2 = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            if i != j {
                d2[(i, j)] = (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]).max(0.0);
            }
        }
    }
    symmetrize(&mut d2);
    d2
}

/// Dense similarity `exp(−‖xᵢ − xⱼ‖² / h)` with `h` the square of the mean
/// pairwise distance. Returns the similarity and `h`.
pub fn gaussian_similarity(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = x.nrows();
    let first = x.row(0);
    if (1..n).all(|i| x.row(i) == first) {
        return Err(Error::DegenerateBandwidth);
    }
    let d2 = pairwise_sq_distances(x);
    let mut sum = 0.0;
    for j in 0..n {
        for i in 0..j {
            sum += d2[(i, j)].sqrt();
        }
    }
    let mean = sum / (n * (n - 1) / 2) as f64;
    let h = mean * mean;
    if !(h > 0.0) {
        return Err(Error::DegenerateBandwidth);
    }
    Ok((d2.map(|v| (-v / h).exp()), h))
}

/// Keeps each row's `top_k` largest off-diagonal entries and symmetrizes by
/// entrywise max. Ties go to the lower column index. Diagonal is zero.
fn knn_sparsify(s: &DMatrix<f64>, top_k: usize) -> DMatrix<f64> {
    let n = s.nrows();
    let mut keep = DMatrix::from_element(n, n, false);
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for i in 0..n {
        order.clear();
        order.extend((0..n).filter(|&j| j != i));
        order.sort_by(|&a, &b| s[(i, b)].total_cmp(&s[(i, a)]).then(a.cmp(&b)));
        for &j in order.iter().take(top_k) {
            keep[(i, j)] = true;
            keep[(j, i)] = true;
        }
    }
    DMatrix::from_fn(n, n, |i, j| if keep[(i, j)] { s[(i, j)] } else { 0.0 })
}

/// `K ← D^{-1/2} K D^{-1/2}` with `D` the row sums.
fn renormalize(k: &mut DMatrix<f64>) {
    let n = k.nrows();
    let inv_sqrt: Vec<f64> = (0..n).map(|i| 1.0 / k.row(i).sum().sqrt()).collect();
    for j in 0..n {
        for i in 0..n {
            k[(i, j)] *= inv_sqrt[i] * inv_sqrt[j];
        }
    }
    symmetrize(k);
}
