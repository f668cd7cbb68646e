//! Acceptance checks, one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so the report is always printed.
//! Criterion 6 reads real WebKB exports from `$CSF_WEBKB_DIR/<name>` when
//! that variable is set and falls back to the seeded surrogates otherwise.

use std::collections::VecDeque;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use csf_cli::config::{ExperimentConfig, SplitPolicy};
use csf_cli::data::synthetic;
use csf_cli::experiment::run_on_dataset;
use csf_core::dataset::{load_dataset, Dataset};
use csf_core::filters::attr_highpass_kernel;
use csf_core::kernel::{gaussian_similarity, Kernel};
use csf_core::mkl::fuse;
use csf_core::nystrom::{attr_highpass_kernel_nystrom, sketch, NystromConfig};
use csf_core::oracles::{
    brute_force_problem2, krr_fit, label_propagation, label_propagation_iterative, ridge_fit, semi_krr_fitted,
    transductive_z,
};
use csf_core::synthetic::{generate, smoothing_probe_spec};
use csf_core::trainer::{diversity_probe, gradient_check, KernelConfig, KernelSet, ModelConfig, TrainData, Variant};
use csf_core::{Graph, LabelMatrix, SplitSpec};
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRID: [f64; 3] = [0.1, 1.0, 10.0];

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn uniform(r: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| r.random_range(-1.0..1.0))
}

fn random_psd(r: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let b = uniform(r, n, n);
    let k = &b * b.transpose() / n as f64;
    (&k + k.transpose()) * 0.5
}

fn psd_kernel(r: &mut impl Rng, n: usize) -> Kernel {
    Kernel::symmetric(random_psd(r, n), 1e-12)
        .unwrap()
        .checked(1e-8)
        .unwrap()
}

fn random_graph(r: &mut impl Rng, n: usize, p: f64) -> Graph {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if r.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    for i in 0..n {
        if !edges.iter().any(|&(a, b)| a == i || b == i) {
            edges.push((i, (i + 1) % n));
        }
    }
    let x = uniform(r, n, 3);
    Graph::new(n, edges, x).unwrap()
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Gauss-Jordan with partial pivoting, kept apart from the library's solvers.
fn gauss_solve(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
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
        m.row_mut(col).scale_mut(1.0 / d);
        r.row_mut(col).scale_mut(1.0 / d);
        for i in 0..n {
            let f = m[(i, col)];
            if i != col && f != 0.0 {
                let mrow = m.row(col).clone_owned();
                let rrow = r.row(col).clone_owned();
                m.row_mut(i).zip_apply(&mrow, |a, b| *a -= f * b);
                r.row_mut(i).zip_apply(&rrow, |a, b| *a -= f * b);
            }
        }
    }
    r
}

fn is_connected(g: &Graph) -> bool {
    let n = g.n_nodes();
    let mut adj = vec![Vec::new(); n];
    for &(a, b) in g.edges() {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &adj[v] {
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let (n, c) = (12, 3);
    let (mut worst_z, mut worst_fit) = (0f64, 0f64);
    for seed in 0..50 {
        let mut r = rng(seed);
        let k = psd_kernel(&mut r, n);
        let a2 = GRID[r.random_range(0..3)];
        let a3 = GRID[r.random_range(0..3)];
        let mut nodes: Vec<usize> = (0..n).collect();
        nodes.shuffle(&mut r);
        let mut labeled = nodes[..r.random_range(2..n - 1)].to_vec();
        labeled.sort_unstable();
        let classes: Vec<Option<usize>> = (0..n)
            .map(|i| labeled.contains(&i).then(|| r.random_range(0..c)))
            .collect();
        let labels = LabelMatrix::from_classes(&classes, c).unwrap();
        let y_l = labels.onehot().select_rows(&labeled);

        let id = DMatrix::<f64>::identity(n, n);
        let kh = gauss_solve(&(k.matrix() + &id * a3), &id) * a3;
        let z = transductive_z(&kh, &y_l, &labeled, a2).unwrap();
        let brute = brute_force_problem2(&kh, &y_l, &labeled, a2).unwrap();
        worst_z = worst_z.max((z - brute).amax());

        let fitted = semi_krr_fitted(&k, &labels, a2, a3).unwrap();
        let stationary = gauss_solve(&(&kh + &id * a2), &(labels.onehot() * a2));
        worst_fit = worst_fit.max((fitted - stationary).amax());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_z <= 1e-5 && worst_fit <= 1e-8 && secs < 10.0,
        format!("50 instances, max |Z - brute| = {worst_z:.2e}, max |fit - stationary| = {worst_fit:.2e}, {secs:.1}s"),
    )
}

fn attribute_filter_spectrum() -> Outcome {
    let g = |l: f64, a2: f64, a3: f64| a2 * (l + a3) / (a3 + a2 * (l + a3));
    let mut r = rng(2);
    let mut worst = 0f64;
    let mut increasing = true;
    for _ in 0..50 {
        let n = r.random_range(3..15);
        let k = psd_kernel(&mut r, n);
        let a2 = 10f64.powf(r.random_range(-1.0..2.0));
        let a3 = 10f64.powf(r.random_range(-1.0..1.0));
        let lam = sorted_eigenvalues(k.matrix());
        let got = sorted_eigenvalues(attr_highpass_kernel(&k, a2, a3).unwrap().matrix());
        for (l, v) in lam.iter().zip(&got) {
            worst = worst.max((g(l.max(0.0), a2, a3) - v).abs());
        }
        let (lo, hi) = (lam[0].max(0.0), lam[n - 1]);
        let samples: Vec<f64> = (0..=50).map(|i| g(lo + (hi - lo) * i as f64 / 50.0, a2, a3)).collect();
        increasing &= samples.windows(2).all(|w| w[1] > w[0]);
    }
    // Limits through the kernel itself, on one fixed random K.
    let k = psd_kernel(&mut r, 8);
    let ev_all = sorted_eigenvalues(attr_highpass_kernel(&k, 1e8, 1.0).unwrap().matrix());
    let lim_all = ev_all.iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let ev_flat = sorted_eigenvalues(attr_highpass_kernel(&k, 2.0, 1e8).unwrap().matrix());
    let lim_flat = ev_flat.iter().map(|v| (v - 2.0 / 3.0).abs()).fold(0.0, f64::max);
    outcome(
        worst <= 1e-8 && increasing && lim_all <= 1e-6 && lim_flat <= 1e-6,
        format!(
            "50 kernels, max |eig - g| = {worst:.2e}, strictly increasing = {increasing}, \
             a2=1e8 limit {lim_all:.1e}, a3=1e8 limit {lim_flat:.1e}"
        ),
    )
}

fn fusion_psd() -> Outcome {
    let mut r = rng(3);
    let mut worst = f64::INFINITY;
    for _ in 0..100 {
        let n = r.random_range(3..15);
        let base = psd_kernel(&mut r, n);
        let kattr = attr_highpass_kernel(&base, r.random_range(0.1..100.0), 1.0).unwrap();
        let ktop = psd_kernel(&mut r, n);
        let gamma = r.random_range(0.0..=2.0);
        let fused = fuse(&kattr, &ktop, gamma).unwrap();
        let diff = kattr.matrix() - ktop.matrix();
        let raw = (kattr.matrix() + ktop.matrix()) * 0.5 + &diff * &diff * gamma;
        if (fused.matrix() - &raw).amax() > 1e-12 {
            return outcome(false, "fused kernel differs from the raw formula".into());
        }
        worst = worst.min(sorted_eigenvalues(fused.matrix())[0]);
    }
    outcome(worst >= -1e-8, format!("100 triples, min eigenvalue = {worst:.2e}"))
}

fn gradient_correctness() -> Outcome {
    let start = Instant::now();
    let mut r = rng(4);
    let n = 14;
    let g = random_graph(&mut r, n, 0.25);
    let classes: Vec<Option<usize>> = (0..n).map(|i| Some(i % 3)).collect();
    let labels = LabelMatrix::from_classes(&classes, 3).unwrap();
    let split = SplitSpec {
        train: (0..7).collect(),
        val: (7..10).collect(),
        test: (10..n).collect(),
    };
    let data = TrainData::new(g.attributes(), &labels, &split).unwrap();
    let set = KernelSet::build(&g, &KernelConfig::default()).unwrap();
    let k = fuse(&set.attr, &set.top, 0.5).unwrap();
    let mut worst = 0f64;
    for n_layers in [1, 3] {
        for concat_x in [true, false] {
            let cfg = ModelConfig {
                n_layers,
                concat_x,
                hidden_dim: 4,
                dropout: 0.0,
                seed: 3,
                ..Default::default()
            };
            worst = worst.max(gradient_check(&cfg, &data, &k, 1e-6).unwrap());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-4 && secs < 30.0,
        format!("4 configs, max relative error = {worst:.2e}, {secs:.1}s"),
    )
}

fn oversmoothing() -> Outcome {
    let ds = generate(&smoothing_probe_spec(60, 0)).unwrap();
    let connected = is_connected(&ds.graph);
    let split = SplitSpec::random(&ds.labels, 0.6, 0.2, 0).unwrap();
    let data = TrainData::new(ds.graph.attributes(), &ds.labels, &split).unwrap();
    let set = KernelSet::build(&ds.graph, &KernelConfig::default()).unwrap();
    let csf = fuse(&set.attr, &set.top, 0.5).unwrap();
    let last = |k: &Kernel, depth: usize, concat_x: bool| {
        let cfg = ModelConfig {
            n_layers: depth,
            concat_x,
            dropout: 0.0,
            ..Default::default()
        };
        *diversity_probe(&data, k, &cfg).unwrap().last().unwrap()
    };
    let top_ratio = last(&set.top, 20, false) / last(&set.top, 2, false);
    let csf_ratio = last(&csf, 20, true) / last(&csf, 2, true);

    let base = ExperimentConfig {
        dataset: "synthetic:disassortative".into(),
        depths: vec![20],
        ..Default::default()
    };
    let topo = ExperimentConfig {
        variant: Variant::NoAttribute,
        concat_x: false,
        ..base.clone()
    };
    let dis = synthetic("disassortative", 0).unwrap();
    let acc = |cfg: &ExperimentConfig| run_on_dataset(cfg, dis.clone(), None).unwrap().aggregate[0].mean_test_acc;
    let (acc_csf, acc_top) = (acc(&base), acc(&topo));
    outcome(
        connected && top_ratio <= 1e-3 && csf_ratio >= 0.1 && acc_csf - acc_top >= 0.20,
        format!(
            "60-node probe (connected = {connected}): diversity ratio d20/d2 topology {top_ratio:.2e}, CSF {csf_ratio:.3}; \
             disassortative depth 20 over 10 seeds: CSF {:.2}% vs topology-only {:.2}%",
            acc_csf * 100.0,
            acc_top * 100.0
        ),
    )
}

fn webkb(name: &str) -> (Dataset, String) {
    match std::env::var_os("CSF_WEBKB_DIR") {
        Some(dir) => {
            let path = PathBuf::from(dir).join(name);
            (load_dataset(&path).unwrap(), path.display().to_string())
        }
        None => (synthetic(name, 0).unwrap(), format!("synthetic:{name}")),
    }
}

fn desk_scale_accuracy() -> Outcome {
    let start = Instant::now();
    let mut pass = true;
    let mut parts = Vec::new();
    for name in ["texas", "cornell", "wisconsin"] {
        let (ds, source) = webkb(name);
        let n = ds.graph.n_nodes();
        let cfg = ExperimentConfig {
            dataset: source.clone(),
            depths: vec![2, 20],
            split: Some(SplitPolicy::Random {
                train_frac: 0.6,
                val_frac: 0.2,
            }),
            ..Default::default()
        };
        let res = run_on_dataset(&cfg, ds, None).unwrap();
        let d2 = res.row(2).unwrap().mean_test_acc;
        let d20 = res.row(20).unwrap().mean_test_acc;
        pass &= d2 >= 0.80 && (d20 - d2).abs() <= 0.05;
        parts.push(format!(
            "{source} (N={n}) d2 {:.2}% d20 {:.2}%",
            d2 * 100.0,
            d20 * 100.0
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    pass &= secs < 600.0;
    outcome(pass, format!("{}, {secs:.0}s", parts.join("; ")))
}

fn median_secs(mut f: impl FnMut()) -> f64 {
    let mut t: Vec<f64> = (0..3)
        .map(|_| {
            let s = Instant::now();
            f();
            s.elapsed().as_secs_f64()
        })
        .collect();
    t.sort_by(f64::total_cmp);
    t[1]
}

fn rbf(n: usize, seed: u64) -> Kernel {
    let mut r = rng(seed);
    let x = uniform(&mut r, n, 4);
    let (s, _) = gaussian_similarity(&x).unwrap();
    Kernel::symmetric(s, 1e-12).unwrap()
}

fn nystrom_correctness() -> Outcome {
    let n = 200;
    let k = rbf(n, 7);
    let err = |m: usize, seed: u64| {
        let approx = sketch(&k, m, m, seed).unwrap().approx_kernel().unwrap();
        (approx - k.matrix()).norm()
    };
    let recovery = err(n, 0);
    let errs: Vec<f64> = [n / 10, n / 4, n / 2, n]
        .iter()
        .map(|&m| (0..10).map(|s| err(m, s)).sum::<f64>() / 10.0)
        .collect();
    let monotone = errs.windows(2).all(|w| w[1] <= w[0]);
    let shown: Vec<String> = errs.iter().map(|e| format!("{e:.3e}")).collect();

    let big = 2000;
    let kb = rbf(big, 8);
    let cfg = NystromConfig::new(big / 10, 0);
    let exact = median_secs(|| {
        attr_highpass_kernel(&kb, 100.0, 1.0).unwrap();
    });
    let approx = median_secs(|| {
        attr_highpass_kernel_nystrom(&kb, 100.0, 1.0, &cfg).unwrap();
    });
    outcome(
        recovery <= 1e-6 && monotone && approx * 2.0 <= exact,
        format!(
            "N={n}: m=N error {recovery:.1e}, mean errors over 10 seeds [{}]; \
             N={big}, m={}: exact {exact:.2}s vs Nystrom {approx:.2}s ({:.1}x)",
            shown.join(", "),
            big / 10,
            exact / approx
        ),
    )
}

fn preliminaries() -> Outcome {
    let mut r = rng(9);
    let (mut ridge, mut krr, mut lp) = (0f64, 0f64, 0f64);
    for _ in 0..20 {
        let (n, p) = (r.random_range(6..15), r.random_range(2..6));
        let x = uniform(&mut r, n, p);
        let y = uniform(&mut r, n, 2);
        let lambda = GRID[r.random_range(0..3)];
        let beta = ridge_fit(&x, &y, lambda).unwrap().beta;
        let normal = gauss_solve(
            &(x.transpose() * &x + DMatrix::identity(p, p) * lambda),
            &(x.transpose() * &y),
        );
        ridge = ridge.max((beta - normal).amax());
    }
    for _ in 0..20 {
        let n = r.random_range(4..10);
        let k = psd_kernel(&mut r, n);
        let y = uniform(&mut r, n, 2);
        let lambda = GRID[r.random_range(0..3)];
        let eig = k.matrix().clone().symmetric_eigen();
        let f = eig.eigenvalues.map(|l| l / (l + lambda));
        let oracle = &eig.eigenvectors * DMatrix::from_diagonal(&f) * eig.eigenvectors.transpose() * &y;
        krr = krr.max((krr_fit(&k, &y, lambda).unwrap() - oracle).amax());
    }
    for _ in 0..20 {
        let n = r.random_range(5..15);
        let g = random_graph(&mut r, n, 0.3);
        let classes: Vec<Option<usize>> = (0..n)
            .map(|_| (r.random::<f64>() < 0.5).then(|| r.random_range(0..3)))
            .collect();
        let y0 = LabelMatrix::from_classes(&classes, 3).unwrap();
        let gamma = r.random_range(0.0..0.9);
        let closed = label_propagation(&g, &y0, gamma).unwrap();
        let iterated = label_propagation_iterative(&g, &y0, gamma, 500).unwrap();
        lp = lp.max((closed - iterated).amax());
    }
    outcome(
        ridge <= 1e-8 && krr <= 1e-10 && lp <= 1e-6,
        format!(
            "20 instances each: ridge vs normal equations {ridge:.1e}, KRR vs eigen shrinkage {krr:.1e}, \
             LP closed form vs 500 iterations {lp:.1e}"
        ),
    )
}

fn main() -> ExitCode {
    let checks: [Check; 8] = [
        ("oracle equivalence", oracle_equivalence),
        ("attribute filter spectrum", attribute_filter_spectrum),
        ("fused kernel PSD", fusion_psd),
        ("gradient correctness", gradient_correctness),
        ("over-smoothing", oversmoothing),
        ("desk-scale accuracy", desk_scale_accuracy),
        ("Nystrom correctness", nystrom_correctness),
        ("preliminary oracles", preliminaries),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("criterion {} {tag} {name}: {}", i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
