//! Direct-sum layout of modality fibers and input blocks.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{GvfError, Result};

/// One modality: its output fiber width and its slice of the input vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModalitySpec {
    pub name: String,
    pub fiber_dim: usize,
    pub input_dim: usize,
}

/// Ordered modality layout. Fiber offsets partition `[0, m)` and input
/// offsets partition `[0, d)` in declaration order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ModalitySpec>", into = "Vec<ModalitySpec>")]
pub struct BundleConfig {
    modalities: Vec<ModalitySpec>,
}

impl BundleConfig {
    pub fn new(modalities: Vec<ModalitySpec>) -> Result<Self> {
        if modalities.is_empty() {
            return Err(GvfError::InvalidConfig(
                "bundle needs at least one modality".into(),
            ));
        }
        let mut names = std::collections::BTreeSet::new();
        for m in &modalities {
            if m.fiber_dim == 0 || m.input_dim == 0 {
                return Err(GvfError::InvalidConfig(format!(
                    "modality `{}` has a zero dimension",
                    m.name
                )));
            }
            if !names.insert(m.name.as_str()) {
                return Err(GvfError::InvalidConfig(format!(
                    "duplicate modality name `{}`",
                    m.name
                )));
            }
        }
        Ok(BundleConfig { modalities })
    }

    /// The four-modality configuration used by the cohort generator.
    pub fn canonical() -> Self {
        BundleConfig::new(vec![
            ModalitySpec {
                name: "phys".into(),
                fiber_dim: 4,
                input_dim: 6,
            },
            ModalitySpec {
                name: "beh".into(),
                fiber_dim: 3,
                input_dim: 4,
            },
            ModalitySpec {
                name: "env".into(),
                fiber_dim: 3,
                input_dim: 4,
            },
            ModalitySpec {
                name: "ext".into(),
                fiber_dim: 2,
                input_dim: 3,
            },
        ])
        .expect("canonical bundle is valid")
    }

    pub fn modalities(&self) -> &[ModalitySpec] {
        &self.modalities
    }

    pub fn modality_count(&self) -> usize {
        self.modalities.len()
    }

    pub fn total_fiber_dim(&self) -> usize {
        self.modalities.iter().map(|m| m.fiber_dim).sum()
    }

    pub fn total_input_dim(&self) -> usize {
        self.modalities.iter().map(|m| m.input_dim).sum()
    }

    pub fn fiber_range(&self, n: usize) -> Range<usize> {
        let start: usize = self.modalities[..n].iter().map(|m| m.fiber_dim).sum();
        start..start + self.modalities[n].fiber_dim
    }

    pub fn input_range(&self, n: usize) -> Range<usize> {
        let start: usize = self.modalities[..n].iter().map(|m| m.input_dim).sum();
        start..start + self.modalities[n].input_dim
    }

    /// Pairs of input coordinates that belong to different modalities.
    pub fn is_cross_block(&self, i: usize, j: usize) -> bool {
        self.input_block_of(i) != self.input_block_of(j)
    }

    fn input_block_of(&self, coord: usize) -> usize {
        let mut acc = 0;
        for (n, m) in self.modalities.iter().enumerate() {
            acc += m.input_dim;
            if coord < acc {
                return n;
            }
        }
        panic!("input coordinate {coord} out of range");
    }
}

impl TryFrom<Vec<ModalitySpec>> for BundleConfig {
    type Error = GvfError;
    fn try_from(v: Vec<ModalitySpec>) -> Result<Self> {
        BundleConfig::new(v)
    }
}

impl From<BundleConfig> for Vec<ModalitySpec> {
    fn from(b: BundleConfig) -> Self {
        b.modalities
    }
}
