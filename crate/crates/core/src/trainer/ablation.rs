//! Component kernels and the ablation variants built from them.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filters::{attr_highpass_kernel, topology_lowpass_kernel};
use crate::graph::Graph;
use crate::kernel::{GaussianKnn, Kernel, PsdRepair};
use crate::mkl::fuse;
use crate::nystrom::{attr_highpass_kernel_nystrom, NystromConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub top_k: usize,
    pub a2: f64,
    pub a3: f64,
    pub nystrom: Option<NystromConfig>,
    #[serde(skip)]
    pub repair: Option<PsdRepair>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        Self {
            top_k: 20,
            a2: 100.0,
            a3: 1.0,
            nystrom: None,
            repair: None,
        }
    }
}

/// The Gaussian KNN kernel over attributes, the attribute high-pass
/// kernel built from it, and the topology low-pass kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSet {
    pub knn: Kernel,
    pub attr: Kernel,
    pub top: Kernel,
}

impl KernelSet {
    pub fn build(graph: &Graph, cfg: &KernelConfig) -> Result<Self> {
        let n = graph.n_nodes();
        // Small graphs cannot hold top_k neighbours per node.
        let top_k = cfg.top_k.min(n.saturating_sub(1)).max(1);
        let mut knn = GaussianKnn::new(top_k);
        if let Some(repair) = cfg.repair {
            knn = knn.with_repair(repair);
        }
        let knn = knn.build(graph.attributes())?;
        let attr = match &cfg.nystrom {
            None => attr_highpass_kernel(&knn, cfg.a2, cfg.a3)?,
            Some(ny) => attr_highpass_kernel_nystrom(&knn, cfg.a2, cfg.a3, ny)?,
        };
        Ok(Self {
            knn,
            attr,
            top: topology_lowpass_kernel(graph),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Full,
    NoTopology,
    NoAttribute,
    LowpassAttribute,
    OnlyLowpassAttribute,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::NoTopology,
        Variant::NoAttribute,
        Variant::LowpassAttribute,
        Variant::OnlyLowpassAttribute,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::NoTopology => "no_topology",
            Variant::NoAttribute => "no_attribute",
            Variant::LowpassAttribute => "lowpass_attribute",
            Variant::OnlyLowpassAttribute => "only_lowpass_attribute",
        }
    }

    /// Whether the fusion weight has any effect on this variant.
    pub fn uses_gamma(self) -> bool {
        matches!(self, Variant::Full | Variant::LowpassAttribute)
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "variant",
                name: s.to_string(),
            })
    }
}

/// The propagation kernel of an ablation variant. The low-pass attribute
/// kernel is the renormalized Gaussian KNN kernel itself.
pub fn ablation_variant(variant: Variant, kernels: &KernelSet, gamma: f64) -> Result<Kernel> {
    match variant {
        Variant::Full => fuse(&kernels.attr, &kernels.top, gamma),
        Variant::NoTopology => Ok(kernels.attr.clone()),
        Variant::NoAttribute => Ok(kernels.top.clone()),
        Variant::LowpassAttribute => fuse(&kernels.knn, &kernels.top, gamma),
        Variant::OnlyLowpassAttribute => Ok(kernels.knn.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn toy() -> Graph {
        Graph::new(
            3,
            [(0, 1)],
            DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]),
        )
        .unwrap()
    }

    #[test]
    fn names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!(matches!("bogus".parse::<Variant>(), Err(Error::Unknown { .. })));
    }

    #[test]
    fn single_component_variants_are_the_components() {
        let g = toy();
        let set = KernelSet::build(&g, &KernelConfig::default()).unwrap();
        assert_eq!(
            ablation_variant(Variant::NoAttribute, &set, 0.5).unwrap(),
            topology_lowpass_kernel(&g)
        );
        let attr = attr_highpass_kernel(&set.knn, 100.0, 1.0).unwrap();
        assert_eq!(ablation_variant(Variant::NoTopology, &set, 0.5).unwrap(), attr);
        assert_eq!(
            ablation_variant(Variant::OnlyLowpassAttribute, &set, 0.5).unwrap(),
            set.knn
        );
    }
}
