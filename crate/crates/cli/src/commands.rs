//! Sweeps, spectral tables, the Nyström benchmark and ablations.

use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use csf_core::dataset::{save_dataset, Dataset};
use csf_core::filters::{attr_highpass_kernel, frequency_response, shrinkage_profile, spectral_gains, FilterSpec};
use csf_core::kernel::{eigendecompose, GaussianKnn, Kernel};
use csf_core::linalg::frobenius;
use csf_core::mkl::fuse;
use csf_core::nystrom::{attr_highpass_kernel_nystrom, sketch, NystromConfig, NystromMode};
use csf_core::trainer::{KernelSet, Variant};
use csf_core::tsv::{format_f64, Table};
use csf_core::{Error, Result};
use nalgebra::DMatrix;

use crate::config::{ExperimentConfig, NystromSetting};
use crate::data::{resolve_dataset, synthetic};
use crate::experiment::{create_dir, run_on_dataset, AggregateRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    KnnTopk,
    A2,
    A3,
    Lr,
    Gamma,
}

impl SweepKind {
    pub const ALL: [SweepKind; 5] = [
        SweepKind::KnnTopk,
        SweepKind::A2,
        SweepKind::A3,
        SweepKind::Lr,
        SweepKind::Gamma,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepKind::KnnTopk => "knn_topk",
            SweepKind::A2 => "a2",
            SweepKind::A3 => "a3",
            SweepKind::Lr => "lr",
            SweepKind::Gamma => "gamma",
        }
    }

    pub fn default_grid(self, cfg: &ExperimentConfig) -> Vec<f64> {
        match self {
            SweepKind::KnnTopk => vec![5.0, 10.0, 20.0, 50.0],
            SweepKind::A2 => vec![0.1, 1.0, 10.0, 100.0],
            SweepKind::A3 => vec![0.1, 1.0, 10.0],
            SweepKind::Lr => cfg.lr_grid.clone(),
            SweepKind::Gamma => cfg.gamma_grid.clone(),
        }
    }

    /// `cfg` with the swept field set to `value`.
    pub fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut out = cfg.clone();
        match self {
            SweepKind::KnnTopk => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::Parameter(format!(
                        "knn_topk must be a positive integer, got {value}"
                    )));
                }
                out.top_k = value as usize;
            }
            SweepKind::A2 => out.a2 = value,
            SweepKind::A3 => out.a3 = value,
            SweepKind::Lr => out.lr = value,
            SweepKind::Gamma => out.gamma = Some(value),
        }
        Ok(out)
    }
}

impl fmt::Display for SweepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "sweep kind",
                name: s.to_string(),
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub row: AggregateRow,
}

pub const SWEEP_FILE: &str = "sweep.tsv";

pub fn sweep_table(kind: SweepKind, rows: &[SweepRow]) -> Table {
    let mut t = Table::new([
        kind.name(),
        "depth",
        "n",
        "mean_test_acc",
        "std_test_acc",
        "mean_val_acc",
    ]);
    for r in rows {
        t.push([
            format_f64(r.value),
            r.row.depth.to_string(),
            r.row.n.to_string(),
            format_f64(r.row.mean_test_acc),
            format_f64(r.row.std_test_acc),
            format_f64(r.row.mean_val_acc),
        ]);
    }
    t
}

/// One aggregate row per `(value, depth)`; every value sees the same seeds
/// and splits.
pub fn cmd_sweep(cfg: &ExperimentConfig, kind: SweepKind, grid: &[f64], out: Option<&Path>) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::EmptySet(format!("{kind} sweep grid")));
    }
    cfg.validate()?;
    let dataset = resolve_dataset(&cfg.dataset)?;
    let mut rows = Vec::new();
    for &value in grid {
        let cell_cfg = kind.apply(cfg, value)?;
        let res = run_on_dataset(&cell_cfg, dataset.clone(), None)?;
        rows.extend(res.aggregate.into_iter().map(|row| SweepRow { value, row }));
    }
    if let Some(out) = out {
        create_dir(out)?;
        sweep_table(kind, &rows).save(out.join(SWEEP_FILE))?;
    }
    Ok(rows)
}

pub const PROFILE_FILE: &str = "profile.tsv";
pub const RESPONSE_FILE: &str = "response.tsv";
pub const SIGNALS_FILE: &str = "signals.tsv";

#[derive(Debug, Clone)]
pub struct SpectralRequest {
    pub filters: Vec<FilterSpec>,
    /// Evaluation points; defaults to 21 points over `[0, 2]`.
    pub lambdas: Option<Vec<f64>>,
    /// Attribute columns whose spectra are reported.
    pub signals: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SpectralTables {
    pub profile: Table,
    pub response: Table,
    pub signals: Table,
}

/// Fusion weight used for the spectral tables when none is configured.
pub const SPECTRAL_GAMMA: f64 = 0.5;

fn default_lambdas() -> Vec<f64> {
    (0..=20).map(|i| i as f64 * 0.1).collect()
}

/// Filter profiles, kernel gains on every Laplacian eigenvector, and the
/// spectra of selected attribute signals before and after filtering.
pub fn cmd_spectral(cfg: &ExperimentConfig, req: &SpectralRequest, out: Option<&Path>) -> Result<SpectralTables> {
    let lambdas = req.lambdas.clone().unwrap_or_else(default_lambdas);
    let mut profile = Table::new(["filter", "lambda", "value"]);
    for spec in &req.filters {
        for (l, v) in lambdas.iter().zip(shrinkage_profile(spec, &lambdas)?) {
            profile.push([spec.to_string(), format_f64(*l), format_f64(v)]);
        }
    }

    let dataset = resolve_dataset(&cfg.dataset)?;
    let g = &dataset.graph;
    let set = KernelSet::build(g, &cfg.kernel_config(0))?;
    let fused = fuse(&set.attr, &set.top, cfg.gamma.unwrap_or(SPECTRAL_GAMMA))?;
    let basis = eigendecompose(&g.normalized_laplacian(true)?)?;
    let kernels: [(&str, &Kernel); 4] = [
        ("attr", &set.attr),
        ("top", &set.top),
        ("fused", &fused),
        ("knn", &set.knn),
    ];

    let gains: Vec<Vec<f64>> = kernels
        .iter()
        .map(|(_, k)| spectral_gains(k, &basis))
        .collect::<Result<_>>()?;
    let mut response = Table::new(["index", "eigenvalue", "attr", "top", "fused", "knn"]);
    for i in 0..basis.len() {
        let mut row = vec![i.to_string(), format_f64(basis.eigenvalues[i])];
        row.extend(gains.iter().map(|g| format_f64(g[i])));
        response.push(row);
    }

    let x = g.attributes();
    if let Some(&bad) = req.signals.iter().find(|&&j| j >= x.ncols()) {
        return Err(Error::Parameter(format!(
            "signal index {bad} out of range for {} attributes",
            x.ncols()
        )));
    }
    let mut signals = Table::new(["signal", "index", "eigenvalue", "input", "attr", "top", "fused"]);
    if !req.signals.is_empty() {
        let block = DMatrix::from_fn(x.nrows(), req.signals.len(), |i, c| x[(i, req.signals[c])]);
        let ut = basis.eigenvectors.transpose();
        let spectra: Vec<DMatrix<f64>> = std::iter::once(Ok(&ut * &block))
            .chain(
                kernels[..3]
                    .iter()
                    .map(|(_, k)| frequency_response(k, &block).map(|r| &ut * r)),
            )
            .collect::<Result<_>>()?;
        for (c, &j) in req.signals.iter().enumerate() {
            for i in 0..basis.len() {
                let mut row = vec![j.to_string(), i.to_string(), format_f64(basis.eigenvalues[i])];
                row.extend(spectra.iter().map(|s| format_f64(s[(i, c)].abs())));
                signals.push(row);
            }
        }
    }

    if let Some(out) = out {
        create_dir(out)?;
        profile.save(out.join(PROFILE_FILE))?;
        response.save(out.join(RESPONSE_FILE))?;
        signals.save(out.join(SIGNALS_FILE))?;
    }
    Ok(SpectralTables {
        profile,
        response,
        signals,
    })
}

pub const BENCH_FILE: &str = "nystrom.tsv";

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    /// `None` for the exact reference row.
    pub m: Option<usize>,
    pub rank_k: Option<usize>,
    /// Mean `‖C Q⁺ Cᵀ − K‖_F` over seeds.
    pub kernel_error: f64,
    /// Mean `‖K_attr(Nyström) − K_attr‖_F` over seeds.
    pub attr_error: f64,
    /// Mean wall time of building the attribute kernel.
    pub wall_ms: f64,
    /// Mean test accuracy at the first configured depth, if requested.
    pub accuracy: Option<f64>,
}

pub fn bench_table(rows: &[BenchRow]) -> Table {
    let opt = |v: Option<String>| v.unwrap_or_else(|| "-".into());
    let mut t = Table::new([
        "method",
        "m",
        "rank_k",
        "kernel_error",
        "attr_error",
        "wall_ms",
        "accuracy",
    ]);
    for r in rows {
        t.push([
            if r.m.is_some() { "nystrom" } else { "exact" }.to_string(),
            opt(r.m.map(|m| m.to_string())),
            opt(r.rank_k.map(|k| k.to_string())),
            format_f64(r.kernel_error),
            format_f64(r.attr_error),
            format!("{:.3}", r.wall_ms),
            opt(r.accuracy.map(format_f64)),
        ]);
    }
    t
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<(T, f64)> {
    let start = Instant::now();
    let v = f()?;
    Ok((v, start.elapsed().as_secs_f64() * 1e3))
}

/// Exact attribute kernel against Nyström sketches of sizes `m_grid`,
/// averaged over `cfg.seeds`.
pub fn cmd_nystrom_bench(
    cfg: &ExperimentConfig,
    m_grid: &[usize],
    mode: NystromMode,
    with_accuracy: bool,
    out: Option<&Path>,
) -> Result<Vec<BenchRow>> {
    if m_grid.is_empty() {
        return Err(Error::EmptySet("Nyström m grid".into()));
    }
    cfg.validate()?;
    let dataset = resolve_dataset(&cfg.dataset)?;
    let n = dataset.graph.n_nodes();
    let top_k = cfg.top_k.min(n.saturating_sub(1)).max(1);
    let knn = GaussianKnn::new(top_k).build(dataset.graph.attributes())?;
    let (exact, exact_ms) = timed(|| attr_highpass_kernel(&knn, cfg.a2, cfg.a3))?;

    let accuracy = |nystrom: Option<NystromSetting>| -> Result<Option<f64>> {
        if !with_accuracy {
            return Ok(None);
        }
        let c = ExperimentConfig {
            nystrom,
            depths: vec![cfg.depths[0]],
            ..cfg.clone()
        };
        Ok(Some(
            run_on_dataset(&c, dataset.clone(), None)?.aggregate[0].mean_test_acc,
        ))
    };

    let mut rows = vec![BenchRow {
        m: None,
        rank_k: None,
        kernel_error: 0.0,
        attr_error: 0.0,
        wall_ms: exact_ms,
        accuracy: accuracy(None)?,
    }];
    for &m in m_grid {
        let rank_k = cfg.nystrom.and_then(|s| s.rank_k).map_or(m, |r| r.min(m));
        let (mut kernel_error, mut attr_error, mut wall_ms) = (0.0, 0.0, 0.0);
        for &seed in &cfg.seeds {
            let ny = NystromConfig {
                m,
                rank_k: Some(rank_k),
                seed,
                mode,
            };
            let (approx, ms) = timed(|| attr_highpass_kernel_nystrom(&knn, cfg.a2, cfg.a3, &ny))?;
            wall_ms += ms;
            attr_error += frobenius(&(approx.matrix() - exact.matrix()));
            let k_hat = sketch(&knn, m, rank_k, seed)?.approx_kernel()?;
            kernel_error += frobenius(&(k_hat - knn.matrix()));
        }
        let s = cfg.seeds.len() as f64;
        rows.push(BenchRow {
            m: Some(m),
            rank_k: Some(rank_k),
            kernel_error: kernel_error / s,
            attr_error: attr_error / s,
            wall_ms: wall_ms / s,
            accuracy: accuracy(Some(NystromSetting {
                m,
                rank_k: Some(rank_k),
                mode,
            }))?,
        });
    }
    if let Some(out) = out {
        create_dir(out)?;
        bench_table(&rows).save(out.join(BENCH_FILE))?;
    }
    Ok(rows)
}

pub const ABLATION_FILE: &str = "ablation.tsv";

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub row: AggregateRow,
}

/// Runs the experiment once per variant. With `out`, each variant gets its
/// own experiment directory under `out` and `ablation.tsv` collects the
/// aggregates.
pub fn cmd_ablate(cfg: &ExperimentConfig, variants: &[Variant], out: Option<&Path>) -> Result<Vec<AblationRow>> {
    if variants.is_empty() {
        return Err(Error::EmptySet("ablation variants".into()));
    }
    cfg.validate()?;
    let dataset = resolve_dataset(&cfg.dataset)?;
    let mut rows = Vec::new();
    for &variant in variants {
        let c = ExperimentConfig { variant, ..cfg.clone() };
        let dir = out.map(|o| o.join(variant.name()));
        let res = run_on_dataset(&c, dataset.clone(), dir.as_deref())?;
        rows.extend(res.aggregate.into_iter().map(|row| AblationRow { variant, row }));
    }
    if let Some(out) = out {
        let mut t = Table::new(["variant", "depth", "n", "mean_test_acc", "std_test_acc", "mean_val_acc"]);
        for r in &rows {
            t.push([
                r.variant.to_string(),
                r.row.depth.to_string(),
                r.row.n.to_string(),
                format_f64(r.row.mean_test_acc),
                format_f64(r.row.std_test_acc),
                format_f64(r.row.mean_val_acc),
            ]);
        }
        t.save(out.join(ABLATION_FILE))?;
    }
    Ok(rows)
}

/// Writes a generated dataset in the directory format.
pub fn cmd_synth(name: &str, seed: u64, out: &Path) -> Result<Dataset> {
    let d = synthetic(name, seed)?;
    save_dataset(&d, out)?;
    Ok(d)
}
