//! Spectral filters: scalar filter functions, the attribute high-pass kernel
//! and the topology low-pass kernel.
//!
//! A filter `g` acts on a kernel or graph operator through its
//! eigensystem, `U diag(g(λᵢ)) Uᵀ`. Low-pass filters attenuate large
//! Laplacian eigenvalues (high graph frequencies); the attribute filter
//! grows with the eigenvalues of the attribute kernel and so suppresses
//! its low-frequency components.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::kernel::{gamma_operator, EigenSystem, Kernel};
use crate::linalg::sym_inverse;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassBand {
    Low,
    High,
}

/// A named scalar filter function with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FilterSpec {
    /// First-order GCN filter `1 − p̄/(p̄+1)·λ` on the self-loop Laplacian.
    Gcn { avg_degree: f64 },
    /// Simplified GCN filter `(1 − λ)^c`, `c` the number of propagation steps.
    Sgc { power: u32 },
    /// Label propagation filter `1 / (1 + a₁λ)`.
    LabelPropagation { a1: f64 },
    /// Kernel ridge regression shrinkage `λ / (λ + reg)`.
    Krr { reg: f64 },
    /// Attribute filter `a₂(λ + a₃) / (a₃ + a₂(λ + a₃))` on attribute-kernel
    /// eigenvalues.
    Attribute { a2: f64, a3: f64 },
}

impl FilterSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FilterSpec::Gcn { .. } => "gcn",
            FilterSpec::Sgc { .. } => "sgc",
            FilterSpec::LabelPropagation { .. } => "lp",
            FilterSpec::Krr { .. } => "krr",
            FilterSpec::Attribute { .. } => "attr",
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            FilterSpec::Gcn { avg_degree } => vec![("pbar", avg_degree)],
            FilterSpec::Sgc { power } => vec![("c", power as f64)],
            FilterSpec::LabelPropagation { a1 } => vec![("a1", a1)],
            FilterSpec::Krr { reg } => vec![("lambda", reg)],
            FilterSpec::Attribute { a2, a3 } => vec![("a2", a2), ("a3", a3)],
        }
    }

    /// Eigenvalue domain: `[0, 2]` for Laplacian filters, `[0, ∞)` for
    /// kernel filters.
    pub fn domain(&self) -> (f64, f64) {
        match self {
            FilterSpec::Gcn { .. } | FilterSpec::Sgc { .. } | FilterSpec::LabelPropagation { .. } => (0.0, 2.0),
            FilterSpec::Krr { .. } | FilterSpec::Attribute { .. } => (0.0, f64::INFINITY),
        }
    }

    pub fn band(&self) -> PassBand {
        match self {
            FilterSpec::Gcn { .. } | FilterSpec::Sgc { .. } | FilterSpec::LabelPropagation { .. } => PassBand::Low,
            FilterSpec::Krr { .. } | FilterSpec::Attribute { .. } => PassBand::High,
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(Error::Parameter(format!("{what} = {v} for filter {self}")));
        match *self {
            FilterSpec::Gcn { avg_degree } if !(avg_degree >= 0.0) => bad("pbar", avg_degree),
            FilterSpec::LabelPropagation { a1 } if !(a1 >= 0.0) => bad("a1", a1),
            FilterSpec::Krr { reg } if !(reg > 0.0) => bad("lambda", reg),
            FilterSpec::Attribute { a2, .. } if !(a2 > 0.0) => bad("a2", a2),
            FilterSpec::Attribute { a3, .. } if !(a3 > 0.0) => bad("a3", a3),
            _ => Ok(()),
        }
    }

    /// `g(λ)`; errors when `λ` lies outside [`FilterSpec::domain`].
    pub fn value(&self, lambda: f64) -> Result<f64> {
        self.validate()?;
        let (lo, hi) = self.domain();
        if !(lambda >= lo && lambda <= hi) {
            return Err(Error::Domain {
                filter: self.to_string(),
                lambda,
                lo,
                hi,
            });
        }
        Ok(match *self {
            FilterSpec::Gcn { avg_degree } => 1.0 - avg_degree / (avg_degree + 1.0) * lambda,
            FilterSpec::Sgc { power } => (1.0 - lambda).powi(power as i32),
            FilterSpec::LabelPropagation { a1 } => 1.0 / (1.0 + a1 * lambda),
            FilterSpec::Krr { reg } => lambda / (lambda + reg),
            FilterSpec::Attribute { a2, a3 } => a2 * (lambda + a3) / (a3 + a2 * (lambda + a3)),
        })
    }
}

impl fmt::Display for FilterSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let params: Vec<String> = self.params().iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{}:{}", self.name(), params.join(","))
    }
}

impl FromStr for FilterSpec {
    type Err = Error;

    /// Parses `name[:key=value,...]`, e.g. `attr:a2=1,a3=1` or `sgc:c=2`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut params = std::collections::HashMap::new();
        for kv in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Parameter(format!("expected key=value, got `{kv}`")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| Error::Parameter(format!("invalid number `{v}` for `{k}`")))?;
            params.insert(k.trim().to_string(), v);
        }
        let get = |k: &str, default: f64| params.get(k).copied().unwrap_or(default);
        let spec = match name.trim() {
            "gcn" => FilterSpec::Gcn {
                avg_degree: get("pbar", 1.0),
            },
            "sgc" => {
                let c = get("c", 2.0);
                if c < 0.0 || c.fract() != 0.0 {
                    return Err(Error::Parameter(format!(
                        "sgc power must be a nonnegative integer, got {c}"
                    )));
                }
                FilterSpec::Sgc { power: c as u32 }
            }
            "lp" => FilterSpec::LabelPropagation { a1: get("a1", 1.0) },
            "krr" => FilterSpec::Krr {
                reg: get("lambda", 1.0),
            },
            "attr" => FilterSpec::Attribute {
                a2: get("a2", 1.0),
                a3: get("a3", 1.0),
            },
            other => {
                return Err(Error::Unknown {
                    kind: "filter",
                    name: other.to_string(),
                })
            }
        };
        spec.validate()?;
        Ok(spec)
    }
}

pub fn filter_value(spec: &FilterSpec, lambda: f64) -> Result<f64> {
    spec.value(lambda)
}

/// `g(λ)` over a grid of eigenvalues.
pub fn shrinkage_profile(spec: &FilterSpec, lambdas: &[f64]) -> Result<Vec<f64>> {
    lambdas.iter().map(|&l| spec.value(l)).collect()
}

/// The Laplacian regularization `r(λ) = (p̄+1) / (p̄(1−λ) + 1)` whose
/// reciprocal is the GCN filter. `None` where the denominator vanishes.
pub fn gcn_regularization(avg_degree: f64, lambda: f64) -> Option<f64> {
    let denom = avg_degree * (1.0 - lambda) + 1.0;
    (denom != 0.0).then(|| (avg_degree + 1.0) / denom)
}

fn check_attr_params(a2: f64, a3: f64) -> Result<()> {
    if !(a2 > 0.0 && a2.is_finite()) || !(a3 > 0.0 && a3.is_finite()) {
        return Err(Error::Parameter(format!(
            "the attribute kernel is a valid kernel only for a2 > 0 and a3 > 0 (got a2 = {a2}, a3 = {a3})"
        )));
    }
    Ok(())
}

/// `K̂ = I − Γ(K, a₃)`.
pub fn khat(k: &Kernel, a3: f64) -> Result<DMatrix<f64>> {
    let n = k.dim();
    Ok(DMatrix::identity(n, n) - gamma_operator(k, a3)?)
}

/// Attribute high-pass kernel `K_attr = (I + K̂ / a₂)⁻¹`.
///
/// Its eigenvalues are `a₂(λᵢ + a₃) / (a₃ + a₂(λᵢ + a₃))` for the eigenvalues
/// `λᵢ` of `K`. PSD status is inherited from `K`.
pub fn attr_highpass_kernel(k: &Kernel, a2: f64, a3: f64) -> Result<Kernel> {
    check_attr_params(a2, a3)?;
    let n = k.dim();
    let system = DMatrix::identity(n, n) + khat(k, a3)? / a2;
    let inv = sym_inverse(&system)?;
    Ok(Kernel::from_parts(inv, k.is_psd_checked()))
}

/// Attribute kernel through an existing eigensystem of `K`.
pub fn attr_highpass_from_eigen(eig: &EigenSystem, a2: f64, a3: f64) -> Result<Kernel> {
    check_attr_params(a2, a3)?;
    let spec = FilterSpec::Attribute { a2, a3 };
    let m = eig.apply(|l| {
        // Tiny negative round-off eigenvalues are outside the filter domain.
        spec.value(l.max(0.0)).unwrap_or(f64::NAN)
    });
    crate::linalg::ensure_finite(&m, "attribute kernel")?;
    Ok(Kernel::from_parts(m, true))
}

/// Topology low-pass kernel `K_top = I − L̃ = D̃^{-1/2} Ã D̃^{-1/2}`.
///
/// Symmetric with eigenvalues in `(−1, 1]`; not PSD in general.
pub fn topology_lowpass_kernel(g: &Graph) -> Kernel {
    let s = g
        .normalized_adjacency(true)
        .expect("self-loops make every degree positive");
    Kernel::from_parts(s, false)
}

/// Applies the kernel to a block of graph signals (one per column).
pub fn frequency_response(k: &Kernel, signals: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if signals.nrows() != k.dim() {
        return Err(Error::Dimension(format!(
            "signals have {} rows, kernel is {}x{}",
            signals.nrows(),
            k.dim(),
            k.dim()
        )));
    }
    Ok(k.matrix() * signals)
}

/// Gain `φᵢᵀ K φᵢ` of the kernel on every basis vector of `basis`
/// (typically the Laplacian eigenvectors, ordered by frequency).
pub fn spectral_gains(k: &Kernel, basis: &EigenSystem) -> Result<Vec<f64>> {
    let response = frequency_response(k, &basis.eigenvectors)?;
    Ok((0..basis.len())
        .map(|i| basis.eigenvectors.column(i).dot(&response.column(i)))
        .collect())
}
