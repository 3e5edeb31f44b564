//! Two-domain datasets: samples, stratified splits, synthetic covariate
//! shift, image-folder ingestion and mixed-domain batching.

mod batches;
mod folder;
mod split;
mod synthetic;

use std::fmt;
use std::io::Write;
use std::path::Path;

pub use batches::{mixed_batches, MixedBatch, MixedBatcher, SingleBatcher};
pub use folder::{load_image_folder, Augment, FeatureMode, FolderOptions};
pub use split::{split_72_8_20, MIN_PER_CLASS};
pub use synthetic::{gen_shifted_gaussians, ShiftSpec};

use crate::error::{Error, Result};
use crate::norm::DomainMask;
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Domain {
    Source,
    Target,
}

impl Domain {
    pub fn name(self) -> &'static str {
        match self {
            Domain::Source => "source",
            Domain::Target => "target",
        }
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub id: usize,
    pub x: Vec<f64>,
    pub y: usize,
    pub domain: Domain,
}

/// Train / validation / test partition of one domain.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DomainSplit {
    pub train: Vec<Sample>,
    pub val: Vec<Sample>,
    pub test: Vec<Sample>,
}

impl DomainSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = &Sample> {
        self.train.iter().chain(&self.val).chain(&self.test)
    }
}

/// Both domains of a dataset, split for training and evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSplit {
    pub source: DomainSplit,
    pub target: DomainSplit,
    pub num_classes: usize,
    pub dim: usize,
    pub class_names: Vec<String>,
}

impl DatasetSplit {
    pub fn domain(&self, d: Domain) -> &DomainSplit {
        match d {
            Domain::Source => &self.source,
            Domain::Target => &self.target,
        }
    }

    /// Writes every sample as `id,domain,label,x0..x{D-1}`, ordered by id.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut all: Vec<&Sample> = self.source.iter().chain(self.target.iter()).collect();
        all.sort_by_key(|s| s.id);
        let mut out = String::from("id,domain,label");
        for d in 0..self.dim {
            out.push_str(&format!(",x{d}"));
        }
        out.push('\n');
        for s in all {
            out.push_str(&format!("{},{},{}", s.id, s.domain, s.y));
            for v in &s.x {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
    }
}

/// Stacks sample features into a `B×D` matrix.
pub fn features<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> Result<Tensor> {
    let rows: Vec<&[f64]> = samples.into_iter().map(|s| s.x.as_slice()).collect();
    Tensor::from_rows(&rows)
}

/// Domain mask matching a sample list.
pub fn mask_of<'a>(samples: impl IntoIterator<Item = &'a Sample>) -> DomainMask {
    DomainMask(samples.into_iter().map(|s| s.domain == Domain::Source).collect())
}
