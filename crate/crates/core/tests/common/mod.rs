#![allow(dead_code)]

use csf_core::kernel::Kernel;
use csf_core::Graph;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

/// `B Bᵀ / rank` for a random `n × rank` factor `B`.
pub fn random_psd(rng: &mut impl Rng, n: usize, rank: usize) -> DMatrix<f64> {
    let b = uniform(rng, n, rank);
    let mut k = &b * b.transpose() / rank as f64;
    let t = k.transpose();
    k = (&k + t) * 0.5;
    k
}

pub fn psd_kernel(rng: &mut impl Rng, n: usize) -> Kernel {
    Kernel::symmetric(random_psd(rng, n, n), 1e-12)
        .unwrap()
        .checked(1e-8)
        .unwrap()
}

/// Erdős–Rényi graph with random attributes; every node keeps at least one
/// edge so no degree is zero.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64, features: usize) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    for i in 0..n {
        if !edges.iter().any(|&(a, b)| a == i || b == i) {
            edges.push((i, (i + 1) % n));
        }
    }
    Graph::new(n, edges, uniform(rng, n, features)).unwrap()
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

pub fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Plain Gauss-Jordan elimination with partial pivoting, independent of the
/// library's factorizations.
pub fn gauss_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut r = b.clone();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| m[(i, col)].abs().total_cmp(&m[(j, col)].abs()))
            .unwrap();
        m.swap_rows(col, piv);
        r.swap_rows(col, piv);
        let d = m[(col, col)];
        for j in 0..n {
            m[(col, j)] /= d;
        }
        for j in 0..r.ncols() {
            r[(col, j)] /= d;
        }
        for i in 0..n {
            if i != col {
                let f = m[(i, col)];
                if f != 0.0 {
                    for j in 0..n {
                        m[(i, j)] -= f * m[(col, j)];
                    }
                    for j in 0..r.ncols() {
                        r[(i, j)] -= f * r[(col, j)];
                    }
                }
            }
        }
    }
    r
}
