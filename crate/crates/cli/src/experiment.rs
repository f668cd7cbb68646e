//! The `(depth, seed)` experiment grid.

use std::cell::RefCell;
use std::fs;
use std::path::{Path, PathBuf};

use csf_core::dataset::Dataset;
use csf_core::kernel::Kernel;
use csf_core::mkl::{select_gamma, GammaScore};
use csf_core::trainer::{ablation_variant, propagation_operator, train, KernelSet, TrainData, TrainReport, Variant};
use csf_core::tsv::{format_f64, Table};
use csf_core::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, SplitPolicy};
use crate::data::{effective_policy, resolve_dataset, split_for_seed, split_source};

pub const CONFIG_FILE: &str = "config.json";
pub const METADATA_FILE: &str = "metadata.json";
pub const AGGREGATE_FILE: &str = "aggregate.tsv";
pub const RUNS_DIR: &str = "runs";
pub const GAMMA_SCORES_FILE: &str = "gamma_scores.tsv";

/// One trained cell of the grid, as written to `runs/d{depth}_s{seed}.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub variant: Variant,
    pub depth: usize,
    pub seed: u64,
    pub split_source: String,
    /// Fusion weight used, absent for variants without fusion.
    pub gamma: Option<f64>,
    /// Validation accuracy of every admissible grid value, when γ was selected.
    pub gamma_scores: Vec<GammaScore>,
    pub report: TrainReport,
}

impl RunRecord {
    pub fn file_name(depth: usize, seed: u64) -> String {
        format!("d{depth}_s{seed}.json")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedGamma {
    pub gamma: f64,
    pub reason: String,
}

/// Resolved facts about a run that are not part of the configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub n_nodes: usize,
    pub n_features: usize,
    pub n_classes: usize,
    pub split_source: String,
    /// Grid values that yield a valid propagation operator, per kernel set.
    pub admissible_gamma: Vec<Vec<f64>>,
    pub excluded_gamma: Vec<Vec<ExcludedGamma>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub depth: usize,
    pub n: usize,
    pub mean_test_acc: f64,
    /// Population standard deviation over seeds.
    pub std_test_acc: f64,
    pub mean_val_acc: f64,
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub records: Vec<RunRecord>,
    pub aggregate: Vec<AggregateRow>,
    pub metadata: RunMetadata,
}

impl ExperimentResult {
    pub fn row(&self, depth: usize) -> Option<&AggregateRow> {
        self.aggregate.iter().find(|r| r.depth == depth)
    }
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn aggregate(depths: &[usize], records: &[RunRecord]) -> Vec<AggregateRow> {
    depths
        .iter()
        .map(|&depth| {
            let cells: Vec<&RunRecord> = records.iter().filter(|r| r.depth == depth).collect();
            let test: Vec<f64> = cells.iter().map(|r| r.report.test_acc_at_best_val).collect();
            let val: Vec<f64> = cells.iter().map(|r| r.report.best_val_acc).collect();
            let (mean_test_acc, std_test_acc) = mean_std(&test);
            AggregateRow {
                depth,
                n: cells.len(),
                mean_test_acc,
                std_test_acc,
                mean_val_acc: mean_std(&val).0,
            }
        })
        .collect()
}

pub fn aggregate_table(rows: &[AggregateRow]) -> Table {
    let mut t = Table::new(["depth", "n", "mean_test_acc", "std_test_acc", "mean_val_acc"]);
    for r in rows {
        t.push([
            r.depth.to_string(),
            r.n.to_string(),
            format_f64(r.mean_test_acc),
            format_f64(r.std_test_acc),
            format_f64(r.mean_val_acc),
        ]);
    }
    t
}

/// One row per evaluated γ, in `(depth, seed)` order. Empty when γ was fixed.
pub fn gamma_score_table(records: &[RunRecord]) -> Table {
    let mut t = Table::new(["depth", "seed", "gamma", "val_accuracy"]);
    for r in records {
        for s in &r.gamma_scores {
            t.push([
                r.depth.to_string(),
                r.seed.to_string(),
                format_f64(s.gamma),
                format_f64(s.val_accuracy),
            ]);
        }
    }
    t
}

/// Splits γ values into those whose fused kernel normalizes and those
/// that produce a nonpositive row sum.
fn admissible_gammas(variant: Variant, set: &KernelSet, grid: &[f64]) -> (Vec<f64>, Vec<ExcludedGamma>) {
    let mut ok = Vec::new();
    let mut excluded = Vec::new();
    for &gamma in grid {
        match ablation_variant(variant, set, gamma).and_then(|k| propagation_operator(&k)) {
            Ok(_) => ok.push(gamma),
            Err(e) => excluded.push(ExcludedGamma {
                gamma,
                reason: e.to_string(),
            }),
        }
    }
    (ok, excluded)
}

struct Prepared {
    dataset: Dataset,
    policy: SplitPolicy,
    /// One kernel set, or one per seed when the Nyström sketch is seeded.
    kernel_sets: Vec<KernelSet>,
    admissible: Vec<Vec<f64>>,
    excluded: Vec<Vec<ExcludedGamma>>,
}

impl Prepared {
    fn set_index(&self, cfg: &ExperimentConfig, seed: u64) -> usize {
        if self.kernel_sets.len() == 1 {
            0
        } else {
            cfg.seeds.iter().position(|&s| s == seed).expect("seed from config")
        }
    }
}

fn prepare(cfg: &ExperimentConfig, dataset: Dataset) -> Result<Prepared> {
    let policy = effective_policy(cfg.split.as_ref(), &dataset);
    let kernel_sets: Vec<KernelSet> = if cfg.nystrom.is_some() {
        cfg.seeds
            .par_iter()
            .map(|&seed| KernelSet::build(&dataset.graph, &cfg.kernel_config(seed)))
            .collect::<Result<_>>()?
    } else {
        vec![KernelSet::build(&dataset.graph, &cfg.kernel_config(0))?]
    };
    let (admissible, excluded) = if cfg.variant.uses_gamma() && cfg.gamma.is_none() {
        kernel_sets
            .iter()
            .map(|set| admissible_gammas(cfg.variant, set, &cfg.gamma_grid))
            .unzip()
    } else {
        (Vec::new(), Vec::new())
    };
    if let Some(i) = admissible.iter().position(Vec::is_empty) {
        let reasons: Vec<String> = excluded[i]
            .iter()
            .map(|e| format!("{}: {}", e.gamma, e.reason))
            .collect();
        return Err(Error::EmptySet(format!(
            "no admissible gamma in the grid ({})",
            reasons.join("; ")
        )));
    }
    Ok(Prepared {
        dataset,
        policy,
        kernel_sets,
        admissible,
        excluded,
    })
}

fn run_cell(cfg: &ExperimentConfig, prep: &Prepared, depth: usize, seed: u64) -> Result<RunRecord> {
    let split = split_for_seed(&prep.policy, &prep.dataset, seed)?;
    let data = TrainData::new(prep.dataset.graph.attributes(), &prep.dataset.labels, &split)?;
    let model = cfg.model(depth, seed);
    let idx = prep.set_index(cfg, seed);
    let set = &prep.kernel_sets[idx];

    let (gamma, gamma_scores, report) = if !cfg.variant.uses_gamma() {
        let kernel = ablation_variant(cfg.variant, set, 0.0)?;
        (None, Vec::new(), train(&data, &kernel, &model)?)
    } else if let Some(g) = cfg.gamma {
        let kernel = ablation_variant(cfg.variant, set, g)?;
        (Some(g), Vec::new(), train(&data, &kernel, &model)?)
    } else {
        let first = match cfg.variant {
            Variant::LowpassAttribute => &set.knn,
            _ => &set.attr,
        };
        let reports: RefCell<Vec<TrainReport>> = RefCell::new(Vec::new());
        let score = |k: &Kernel| {
            let r = train(&data, k, &model)?;
            let acc = r.best_val_acc;
            reports.borrow_mut().push(r);
            Ok(acc)
        };
        let selection = select_gamma(first, &set.top, &prep.admissible[idx], score)?;
        let pos = selection
            .scores
            .iter()
            .position(|s| s.gamma == selection.gamma)
            .expect("selected gamma was scored");
        let report = reports.into_inner().swap_remove(pos);
        (Some(selection.gamma), selection.scores, report)
    };
    Ok(RunRecord {
        variant: cfg.variant,
        depth,
        seed,
        split_source: split_source(&prep.policy),
        gamma,
        gamma_scores,
        report,
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Runs every `(depth, seed)` cell on the current rayon pool. With `out`,
/// each cell writes its own record and the aggregate is written last.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let dataset = resolve_dataset(&cfg.dataset)?;
    run_on_dataset(cfg, dataset, out)
}

pub fn run_on_dataset(cfg: &ExperimentConfig, dataset: Dataset, out: Option<&Path>) -> Result<ExperimentResult> {
    cfg.validate()?;
    let prep = prepare(cfg, dataset)?;
    let metadata = RunMetadata {
        n_nodes: prep.dataset.graph.n_nodes(),
        n_features: prep.dataset.graph.n_features(),
        n_classes: prep.dataset.labels.n_classes(),
        split_source: split_source(&prep.policy),
        admissible_gamma: prep.admissible.clone(),
        excluded_gamma: prep.excluded.clone(),
    };
    let runs_dir: Option<PathBuf> = out.map(|o| o.join(RUNS_DIR));
    if let (Some(out), Some(runs)) = (out, &runs_dir) {
        create_dir(runs)?;
        write_json(&out.join(CONFIG_FILE), cfg)?;
        write_json(&out.join(METADATA_FILE), &metadata)?;
    }
    let cells: Vec<(usize, u64)> = cfg
        .depths
        .iter()
        .flat_map(|&d| cfg.seeds.iter().map(move |&s| (d, s)))
        .collect();
    let records = cells
        .par_iter()
        .map(|&(depth, seed)| {
            let record = run_cell(cfg, &prep, depth, seed)?;
            if let Some(runs) = &runs_dir {
                write_json(&runs.join(RunRecord::file_name(depth, seed)), &record)?;
            }
            Ok(record)
        })
        .collect::<Result<Vec<_>>>()?;
    let aggregate = aggregate(&cfg.depths, &records);
    if let Some(out) = out {
        if records.iter().any(|r| !r.gamma_scores.is_empty()) {
            gamma_score_table(&records).save(out.join(GAMMA_SCORES_FILE))?;
        }
        aggregate_table(&aggregate).save(out.join(AGGREGATE_FILE))?;
    }
    Ok(ExperimentResult {
        records,
        aggregate,
        metadata,
    })
}
