//! Dataset resolution and per-seed splits.

use std::path::Path;

use csf_core::dataset::{load_dataset, Dataset};
use csf_core::synthetic::{disassortative_spec, generate, smoothing_probe_spec, webkb_surrogate};
use csf_core::{Error, Result, SplitSpec};

use crate::config::{SplitPolicy, SYNTHETIC_PREFIX};

/// Generated datasets addressable as `synthetic:<name>[:seed]`.
pub const SYNTHETIC_NAMES: [&str; 5] = ["texas", "cornell", "wisconsin", "disassortative", "smoothing_probe"];

/// Loads a dataset directory, or generates one for `synthetic:` sources.
pub fn resolve_dataset(source: &str) -> Result<Dataset> {
    match source.strip_prefix(SYNTHETIC_PREFIX) {
        Some(rest) => {
            let (name, seed) = match rest.split_once(':') {
                Some((name, seed)) => {
                    let seed = seed
                        .parse()
                        .map_err(|_| Error::Parameter(format!("bad synthetic seed `{seed}`")))?;
                    (name, seed)
                }
                None => (rest, 0),
            };
            synthetic(name, seed)
        }
        None => load_dataset(Path::new(source)),
    }
}

pub fn synthetic(name: &str, seed: u64) -> Result<Dataset> {
    match name {
        "disassortative" => generate(&disassortative_spec(300, 5, seed)),
        "smoothing_probe" => generate(&smoothing_probe_spec(60, seed)),
        _ => webkb_surrogate(name, seed),
    }
}

/// How a split was obtained, recorded next to every run.
pub fn split_source(policy: &SplitPolicy) -> String {
    match policy {
        SplitPolicy::FromFile => "splits.json".into(),
        SplitPolicy::Random { train_frac, val_frac } => {
            let test = 1.0 - train_frac - val_frac;
            format!("random stratified {train_frac}/{val_frac}/{test:.2} per seed")
        }
    }
}

/// The split policy in force: the configured one, else the dataset's own
/// split when it has one, else the default random split.
pub fn effective_policy(configured: Option<&SplitPolicy>, dataset: &Dataset) -> SplitPolicy {
    match configured {
        Some(p) => p.clone(),
        None if dataset.split.is_some() => SplitPolicy::FromFile,
        None => SplitPolicy::DEFAULT_RANDOM,
    }
}

pub fn split_for_seed(policy: &SplitPolicy, dataset: &Dataset, seed: u64) -> Result<SplitSpec> {
    match policy {
        SplitPolicy::FromFile => dataset
            .split
            .clone()
            .ok_or_else(|| Error::MissingFile(csf_core::dataset::SPLITS_FILE.into())),
        SplitPolicy::Random { train_frac, val_frac } => {
            SplitSpec::random(&dataset.labels, *train_frac, *val_frac, seed)
        }
    }
}
