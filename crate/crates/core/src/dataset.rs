//! Dataset directory ingestion and export.
//!
//! A dataset directory holds four UTF-8, LF-terminated files:
//!
//! * `features.tsv`: one row of tab-separated floats per node;
//! * `edges.tsv`: one `i<TAB>j` pair per line, 0-based, `i ≠ j`;
//! * `labels.tsv`: one integer per node, the class id or `-1` if unknown;
//! * `splits.json`: `{"train": [...], "val": [...], "test": [...]}`.
//!
//! `splits.json` is optional; callers fall back to a generated split.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::{Graph, LabelMatrix, SplitSpec};

pub const FEATURES_FILE: &str = "features.tsv";
pub const EDGES_FILE: &str = "edges.tsv";
pub const LABELS_FILE: &str = "labels.tsv";
pub const SPLITS_FILE: &str = "splits.json";

/// A loaded dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub graph: Graph,
    pub labels: LabelMatrix,
    pub split: Option<SplitSpec>,
}

impl Dataset {
    pub fn classes(&self) -> Vec<Option<usize>> {
        self.labels.classes()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Whether downstream operators add self-loops. Without them an
    /// isolated node makes the normalized adjacency undefined, so it is
    /// rejected at load time.
    pub self_loops: bool,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self { self_loops: true }
    }
}

pub fn load_dataset(dir: impl AsRef<Path>) -> Result<Dataset> {
    load_dataset_with(dir, LoadOptions::default())
}

pub fn load_dataset_with(dir: impl AsRef<Path>, options: LoadOptions) -> Result<Dataset> {
    let dir = dir.as_ref();
    let features = read_features(&dir.join(FEATURES_FILE))?;
    let n = features.nrows();
    let edges = read_edges(&dir.join(EDGES_FILE), n)?;
    let classes = read_labels(&dir.join(LABELS_FILE), n)?;

    let graph = Graph::new(n, edges, features)?;
    if !options.self_loops {
        if let Some(node) = graph.first_isolated_node() {
            return Err(Error::ZeroDegree { node });
        }
    }
    let n_classes = classes.iter().flatten().max().map_or(0, |c| c + 1);
    let labels = LabelMatrix::from_classes(&classes, n_classes)?;

    let split_path = dir.join(SPLITS_FILE);
    let split = if split_path.exists() {
        let text = read_text(&split_path)?;
        let split: SplitSpec = serde_json::from_str(&text).map_err(|source| Error::Json {
            path: split_path.clone(),
            source,
        })?;
        split.validate(&labels)?;
        Some(split)
    } else {
        None
    };

    Ok(Dataset { graph, labels, split })
}

/// Writes `dataset` in the directory format read by [`load_dataset`].
pub fn save_dataset(dataset: &Dataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let x = dataset.graph.attributes();
    let mut features = String::new();
    for i in 0..x.nrows() {
        let row: Vec<String> = x.row(i).iter().map(|v| format!("{v}")).collect();
        features.push_str(&row.join("\t"));
        features.push('\n');
    }
    write_text(&dir.join(FEATURES_FILE), &features)?;

    let mut edges = String::new();
    for &(i, j) in dataset.graph.edges() {
        edges.push_str(&format!("{i}\t{j}\n"));
    }
    write_text(&dir.join(EDGES_FILE), &edges)?;

    let mut labels = String::new();
    for c in dataset.labels.classes() {
        match c {
            Some(c) => labels.push_str(&format!("{c}\n")),
            None => labels.push_str("-1\n"),
        }
    }
    write_text(&dir.join(LABELS_FILE), &labels)?;

    if let Some(split) = &dataset.split {
        let path = dir.join(SPLITS_FILE);
        let json = serde_json::to_string(split).map_err(|source| Error::Json {
            path: path.clone(),
            source,
        })?;
        write_text(&path, &json)?;
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Non-empty lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn read_features(path: &Path) -> Result<DMatrix<f64>> {
    let text = read_text(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in data_lines(&text) {
        let row = line
            .split('\t')
            .map(|f| {
                f.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::load(path, line_no, format!("invalid float `{f}`")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::load(
                    path,
                    line_no,
                    format!("ragged row: {} fields, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::load(path, 0, "no feature rows"));
    }
    let m = rows[0].len();
    Ok(DMatrix::from_fn(rows.len(), m, |i, j| rows[i][j]))
}

fn read_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (line_no, line) in data_lines(&text) {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(Error::load(
                path,
                line_no,
                format!("expected 2 fields, found {}", fields.len()),
            ));
        }
        let parse = |f: &str| {
            f.trim()
                .parse::<usize>()
                .map_err(|_| Error::load(path, line_no, format!("invalid node index `{f}`")))
        };
        let (i, j) = (parse(fields[0])?, parse(fields[1])?);
        if i >= n || j >= n {
            return Err(Error::load(
                path,
                line_no,
                format!("node index out of range: ({i}, {j}) on {n} nodes"),
            ));
        }
        if i == j {
            return Err(Error::load(path, line_no, format!("self-loop on node {i}")));
        }
        if !seen.insert((i.min(j), i.max(j))) {
            return Err(Error::load(path, line_no, format!("duplicate edge ({i}, {j})")));
        }
        edges.push((i, j));
    }
    Ok(edges)
}

fn read_labels(path: &Path, n: usize) -> Result<Vec<Option<usize>>> {
    let text = read_text(path)?;
    let mut classes = Vec::with_capacity(n);
    for (line_no, line) in data_lines(&text) {
        let v: i64 = line
            .trim()
            .parse()
            .map_err(|_| Error::load(path, line_no, format!("invalid label `{line}`")))?;
        classes.push(match v {
            -1 => None,
            v if v >= 0 => Some(v as usize),
            v => return Err(Error::load(path, line_no, format!("invalid label {v}"))),
        });
    }
    if classes.len() != n {
        return Err(Error::load(
            path,
            classes.len(),
            format!("{} labels for {n} nodes", classes.len()),
        ));
    }
    Ok(classes)
}
