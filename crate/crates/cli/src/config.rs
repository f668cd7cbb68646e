//! Experiment configuration.

use std::path::{Path, PathBuf};

use csf_core::mkl::DEFAULT_GAMMA_GRID;
use csf_core::nystrom::{NystromConfig, NystromMode};
use csf_core::trainer::{KernelConfig, ModelConfig, Variant};
use csf_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Prefix selecting a generated dataset instead of a directory,
/// e.g. `synthetic:texas` or `synthetic:texas:3`.
pub const SYNTHETIC_PREFIX: &str = "synthetic:";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SplitPolicy {
    FromFile,
    Random { train_frac: f64, val_frac: f64 },
}

impl SplitPolicy {
    pub const DEFAULT_RANDOM: SplitPolicy = SplitPolicy::Random {
        train_frac: 0.6,
        val_frac: 0.2,
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NystromSetting {
    pub m: usize,
    pub rank_k: Option<usize>,
    #[serde(default)]
    pub mode: NystromMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    /// Output directory name under the output root.
    pub id: Option<String>,
    pub dataset: String,
    pub variant: Variant,
    pub a2: f64,
    pub a3: f64,
    /// Fixed fusion weight; when absent it is chosen on validation
    /// accuracy from `gamma_grid`.
    pub gamma: Option<f64>,
    pub gamma_grid: Vec<f64>,
    pub top_k: usize,
    pub depths: Vec<usize>,
    pub lr: f64,
    pub lr_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    /// `None` reads `splits.json` when present and otherwise draws a
    /// 60/20/20 random split per seed.
    pub split: Option<SplitPolicy>,
    pub nystrom: Option<NystromSetting>,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    pub concat_x: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let model = ModelConfig::default();
        Self {
            id: None,
            dataset: String::new(),
            variant: Variant::Full,
            a2: 100.0,
            a3: 1.0,
            gamma: None,
            gamma_grid: DEFAULT_GAMMA_GRID.to_vec(),
            top_k: 20,
            depths: vec![2, 5, 10, 20],
            lr: model.lr,
            lr_grid: vec![0.03, 0.02, 0.01, 0.005, 0.1, 0.2, 0.3, 0.4, 0.5],
            seeds: (0..10).collect(),
            split: None,
            nystrom: None,
            hidden_dim: model.hidden_dim,
            dropout: model.dropout,
            epochs: model.epochs,
            weight_decay: model.weight_decay,
            concat_x: model.concat_x,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parameter(m));
        if self.dataset.is_empty() {
            return bad("dataset is required".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must be nonempty".into());
        }
        if self.depths.is_empty() || self.depths.contains(&0) {
            return bad("depths must be nonempty and positive".into());
        }
        if self.top_k == 0 {
            return bad("top_k must be at least 1".into());
        }
        if let Some(SplitPolicy::Random { train_frac, val_frac }) = &self.split {
            if *train_frac < 0.0 || *val_frac < 0.0 || train_frac + val_frac > 1.0 {
                return bad(format!(
                    "split fractions must be nonnegative and sum to at most 1, got {train_frac} + {val_frac}"
                ));
            }
        }
        if self.gamma.is_none() && self.variant.uses_gamma() && self.gamma_grid.is_empty() {
            return bad("gamma_grid must be nonempty when gamma is not fixed".into());
        }
        self.model(self.depths[0], self.seeds[0]).validate()
    }

    pub fn kernel_config(&self, seed: u64) -> KernelConfig {
        KernelConfig {
            top_k: self.top_k,
            a2: self.a2,
            a3: self.a3,
            nystrom: self.nystrom.map(|s| NystromConfig {
                m: s.m,
                rank_k: s.rank_k,
                seed,
                mode: s.mode,
            }),
            repair: None,
        }
    }

    pub fn model(&self, n_layers: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            n_layers,
            hidden_dim: self.hidden_dim,
            dropout: self.dropout,
            lr: self.lr,
            epochs: self.epochs,
            concat_x: self.concat_x,
            weight_decay: self.weight_decay,
            seed,
            ..ModelConfig::default()
        }
    }

    /// Directory name for this experiment's outputs.
    pub fn experiment_id(&self) -> String {
        match &self.id {
            Some(id) => id.clone(),
            None => format!("{}-{}", self.dataset_stem(), self.variant),
        }
    }

    /// File-name-safe name of the dataset source.
    pub fn dataset_stem(&self) -> String {
        match self.dataset.strip_prefix(SYNTHETIC_PREFIX) {
            Some(rest) => format!("synthetic-{}", rest.replace(':', "-")),
            None => Path::new(&self.dataset)
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "dataset".into()),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

pub fn output_dir(root: &Path, cfg: &ExperimentConfig) -> PathBuf {
    root.join(cfg.experiment_id())
}
