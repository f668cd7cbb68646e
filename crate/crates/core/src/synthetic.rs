//! Seeded synthetic attributed graphs.
//!
//! Nodes carry sparse binary bag-of-words attributes: each word slot is
//! drawn from a per-class topic vocabulary with probability `topic_rate`
//! and from a Zipf background otherwise. Edges join nodes of the same
//! class with probability `homophily`, with endpoint choice weighted by a
//! log-normal node activity so degrees are skewed.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::graph::{Graph, LabelMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub class_sizes: Vec<usize>,
    pub n_features: usize,
    pub n_edges: usize,
    /// Target fraction of intra-class edges.
    pub homophily: f64,
    pub topic_words: usize,
    /// Inclusive range of word slots per node.
    pub doc_len: (usize, usize),
    pub topic_rate: f64,
    /// Standard deviation of the log node activity.
    pub degree_skew: f64,
    /// Join components with extra edges so the graph is connected.
    pub connected: bool,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn n_nodes(&self) -> usize {
        self.class_sizes.iter().sum()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n_nodes();
        let bad = |m: String| Err(Error::Parameter(m));
        if n < 2 || self.class_sizes.contains(&0) {
            return bad(format!(
                "class sizes {:?} must be positive with at least 2 nodes",
                self.class_sizes
            ));
        }
        if !(0.0..=1.0).contains(&self.homophily) || !(0.0..=1.0).contains(&self.topic_rate) {
            return bad("homophily and topic_rate must lie in [0, 1]".into());
        }
        if self.n_features == 0 || self.topic_words == 0 || self.topic_words > self.n_features {
            return bad(format!(
                "need 1 <= topic_words ({}) <= n_features ({})",
                self.topic_words, self.n_features
            ));
        }
        if self.doc_len.0 == 0 || self.doc_len.0 > self.doc_len.1 {
            return bad(format!("invalid doc_len range {:?}", self.doc_len));
        }
        if self.n_edges > n * (n - 1) / 4 {
            return bad(format!("{} edges is too dense for {n} nodes", self.n_edges));
        }
        Ok(())
    }
}

/// Generates a fully labeled dataset without a split.
pub fn generate(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.n_nodes();
    let n_classes = spec.class_sizes.len();

    let mut classes: Vec<usize> = spec
        .class_sizes
        .iter()
        .enumerate()
        .flat_map(|(c, &size)| std::iter::repeat_n(c, size))
        .collect();
    classes.shuffle(&mut rng);

    let attributes = bag_of_words(spec, &classes, &mut rng)?;
    let edges = edges(spec, &classes, &mut rng)?;

    let graph = Graph::new(n, edges, attributes)?;
    let labels = LabelMatrix::from_classes(&classes.iter().map(|&c| Some(c)).collect::<Vec<_>>(), n_classes)?;
    Ok(Dataset {
        graph,
        labels,
        split: None,
    })
}

fn weighted(weights: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights).map_err(|e| Error::Parameter(format!("invalid sampling weights: {e}")))
}

fn bag_of_words(spec: &SyntheticSpec, classes: &[usize], rng: &mut ChaCha8Rng) -> Result<DMatrix<f64>> {
    let m = spec.n_features;
    let mut vocab: Vec<usize> = (0..m).collect();
    vocab.shuffle(rng);
    let zipf: Vec<f64> = (0..m).map(|r| 1.0 / (r as f64 + 1.0)).collect();
    let background = weighted(&zipf)?;

    let topics: Vec<Vec<usize>> = (0..spec.class_sizes.len())
        .map(|_| rand::seq::index::sample(rng, m, spec.topic_words).into_vec())
        .collect();

    let mut x = DMatrix::zeros(classes.len(), m);
    for (i, &c) in classes.iter().enumerate() {
        let len = rng.random_range(spec.doc_len.0..=spec.doc_len.1);
        for _ in 0..len {
            let word = if rng.random::<f64>() < spec.topic_rate {
                topics[c][rng.random_range(0..spec.topic_words)]
            } else {
                vocab[background.sample(rng)]
            };
            x[(i, word)] = 1.0;
        }
    }
    Ok(x)
}

struct EdgeSampler {
    members: Vec<Vec<usize>>,
    within: Vec<WeightedIndex<f64>>,
    class_weight: Vec<f64>,
    homophily: f64,
}

impl EdgeSampler {
    fn partner(&self, c: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        let n_classes = self.members.len();
        let same = n_classes == 1 || (self.members[c].len() > 1 && rng.random::<f64>() < self.homophily);
        let target = if same {
            c
        } else {
            let w: Vec<f64> = (0..n_classes)
                .map(|d| if d == c { 0.0 } else { self.class_weight[d] })
                .collect();
            weighted(&w)?.sample(rng)
        };
        Ok(self.members[target][self.within[target].sample(rng)])
    }
}

fn edges(spec: &SyntheticSpec, classes: &[usize], rng: &mut ChaCha8Rng) -> Result<Vec<(usize, usize)>> {
    let n = classes.len();
    let n_classes = spec.class_sizes.len();
    let log_activity = Normal::new(0.0, spec.degree_skew.max(0.0))
        .map_err(|e| Error::Parameter(format!("invalid degree skew: {e}")))?;
    let activity: Vec<f64> = (0..n).map(|_| log_activity.sample(rng).exp()).collect();

    let mut members = vec![Vec::new(); n_classes];
    for (i, &c) in classes.iter().enumerate() {
        members[c].push(i);
    }
    let within = members
        .iter()
        .map(|m| weighted(&m.iter().map(|&i| activity[i]).collect::<Vec<_>>()))
        .collect::<Result<Vec<_>>>()?;
    let class_weight = members.iter().map(|m| m.iter().map(|&i| activity[i]).sum()).collect();
    let sampler = EdgeSampler {
        members,
        within,
        class_weight,
        homophily: spec.homophily,
    };
    let source = weighted(&activity)?;

    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(spec.n_edges);
    let mut add = |i: usize, j: usize, out: &mut Vec<(usize, usize)>| {
        if i != j && seen.insert((i.min(j), i.max(j))) {
            out.push((i.min(j), i.max(j)));
            true
        } else {
            false
        }
    };

    let mut attempts = 0usize;
    let budget = 1000 * (spec.n_edges + n);
    while out.len() < spec.n_edges {
        attempts += 1;
        if attempts > budget {
            return Err(Error::Parameter(format!(
                "could not place {} edges on {n} nodes",
                spec.n_edges
            )));
        }
        let i = source.sample(rng);
        let j = sampler.partner(classes[i], rng)?;
        add(i, j, &mut out);
    }

    if spec.connected {
        let mut comp = components(n, &out);
        while comp.len() > 1 {
            let a = comp[0][rng.random_range(0..comp[0].len())];
            let b = comp[1][rng.random_range(0..comp[1].len())];
            add(a, b, &mut out);
            comp = components(n, &out);
        }
    }
    Ok(out)
}

/// Connected components, largest first, each sorted.
fn components(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn root(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for &(a, b) in edges {
        let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = groups.into_values().collect();
    out.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    out
}

pub fn is_connected(g: &Graph) -> bool {
    components(g.n_nodes(), g.edges()).len() == 1
}

/// Names accepted by [`webkb_surrogate`].
pub const WEBKB_SURROGATES: [&str; 3] = ["texas", "cornell", "wisconsin"];

/// WebKB-sized stand-ins: page-like bag-of-words attributes over 1703
/// words, five imbalanced classes, sparse heterophilous link structure.
pub fn webkb_spec(name: &str, seed: u64) -> Result<SyntheticSpec> {
    let (class_sizes, n_edges, homophily) = match name {
        "texas" => (vec![33, 1, 18, 101, 30], 280, 0.11),
        "cornell" => (vec![83, 33, 29, 1, 37], 280, 0.30),
        "wisconsin" => (vec![10, 70, 118, 32, 21], 450, 0.21),
        other => {
            return Err(Error::Unknown {
                kind: "dataset",
                name: other.to_string(),
            })
        }
    };
    Ok(SyntheticSpec {
        class_sizes,
        n_features: 1703,
        n_edges,
        homophily,
        topic_words: 40,
        doc_len: (20, 80),
        topic_rate: 0.17,
        degree_skew: 1.0,
        connected: false,
        seed,
    })
}

pub fn webkb_surrogate(name: &str, seed: u64) -> Result<Dataset> {
    generate(&webkb_spec(name, seed)?)
}

/// Balanced heterophilous task: most edges join different classes.
pub fn disassortative_spec(n_nodes: usize, n_classes: usize, seed: u64) -> SyntheticSpec {
    let base = n_nodes / n_classes.max(1);
    let mut class_sizes = vec![base; n_classes];
    class_sizes[0] += n_nodes - base * n_classes;
    SyntheticSpec {
        class_sizes,
        n_features: 200,
        n_edges: 4 * n_nodes,
        homophily: 0.1,
        topic_words: 20,
        doc_len: (10, 30),
        topic_rate: 0.25,
        degree_skew: 0.5,
        connected: true,
        seed,
    }
}

/// Small dense connected graph for over-smoothing measurements.
pub fn smoothing_probe_spec(n_nodes: usize, seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        class_sizes: vec![n_nodes / 2, n_nodes - n_nodes / 2],
        n_features: 50,
        n_edges: 5 * n_nodes,
        homophily: 0.5,
        topic_words: 10,
        doc_len: (5, 15),
        topic_rate: 0.5,
        degree_skew: 0.3,
        connected: true,
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn webkb_shapes() {
        for (name, n) in [("texas", 183), ("cornell", 183), ("wisconsin", 251)] {
            let d = webkb_surrogate(name, 0).unwrap();
            assert_eq!(d.graph.n_nodes(), n);
            assert_eq!(d.graph.n_features(), 1703);
            assert_eq!(d.labels.n_classes(), 5);
            assert!(d.graph.attributes().iter().all(|&v| v == 0.0 || v == 1.0));
        }
        assert!(webkb_surrogate("cora", 0).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = webkb_surrogate("texas", 3).unwrap();
        assert_eq!(a, webkb_surrogate("texas", 3).unwrap());
        assert_ne!(a.graph.edges(), webkb_surrogate("texas", 4).unwrap().graph.edges());
    }

    #[test]
    fn homophily_near_target() {
        let spec = disassortative_spec(300, 5, 1);
        let d = generate(&spec).unwrap();
        let h = d.graph.edge_homophily(&d.classes());
        assert!((h - spec.homophily).abs() < 0.08, "{h}");
        assert!(is_connected(&d.graph));
    }

    #[test]
    fn probe_is_connected() {
        let d = generate(&smoothing_probe_spec(60, 0)).unwrap();
        assert_eq!(d.graph.n_nodes(), 60);
        assert!(is_connected(&d.graph));
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = smoothing_probe_spec(10, 0);
        s.topic_words = 100;
        assert!(generate(&s).is_err());
        let mut s = smoothing_probe_spec(10, 0);
        s.n_edges = 1000;
        assert!(generate(&s).is_err());
    }
}
