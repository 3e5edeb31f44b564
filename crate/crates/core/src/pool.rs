//! Labeled / unlabeled sample pools with a simulated annotation oracle.

use std::collections::BTreeMap;

use crate::data::{DatasetSplit, Domain, Sample};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// A target sample whose label is not visible to training code.
#[derive(Clone, Debug, PartialEq)]
pub struct Unlabeled {
    pub id: usize,
    pub x: Vec<f64>,
}

/// Training pools. Target labels stay hidden until [`Pool::oracle_label`]
/// reveals them; every reveal is counted.
#[derive(Clone, Debug)]
pub struct Pool {
    labeled_src: Vec<Sample>,
    labeled_tgt: Vec<Sample>,
    unlabeled_tgt: Vec<Unlabeled>,
    hidden: BTreeMap<usize, usize>,
    reads: Vec<usize>,
}

impl Pool {
    /// Labeled source samples plus target samples whose labels are hidden.
    pub fn new(labeled_src: Vec<Sample>, target: &[Sample]) -> Self {
        let mut unlabeled_tgt: Vec<Unlabeled> = target
            .iter()
            .map(|s| Unlabeled {
                id: s.id,
                x: s.x.clone(),
            })
            .collect();
        unlabeled_tgt.sort_by_key(|u| u.id);
        Pool {
            labeled_src,
            labeled_tgt: Vec::new(),
            unlabeled_tgt,
            hidden: target.iter().map(|s| (s.id, s.y)).collect(),
            reads: Vec::new(),
        }
    }

    /// Source train split labeled, target train split hidden.
    pub fn from_split(data: &DatasetSplit) -> Self {
        Pool::new(data.source.train.clone(), &data.target.train)
    }

    pub fn labeled_src(&self) -> &[Sample] {
        &self.labeled_src
    }

    pub fn labeled_tgt(&self) -> &[Sample] {
        &self.labeled_tgt
    }

    pub fn unlabeled_tgt(&self) -> &[Unlabeled] {
        &self.unlabeled_tgt
    }

    pub fn unlabeled_ids(&self) -> Vec<usize> {
        self.unlabeled_tgt.iter().map(|u| u.id).collect()
    }

    /// Feature matrix of the unlabeled target pool, in ascending id order.
    pub fn unlabeled_features(&self) -> Result<Tensor> {
        let rows: Vec<&[f64]> = self.unlabeled_tgt.iter().map(|u| u.x.as_slice()).collect();
        Tensor::from_rows(&rows)
    }

    /// Reveals the label of an unlabeled target sample and moves it to the
    /// labeled target pool.
    pub fn oracle_label(&mut self, id: usize) -> Result<usize> {
        let pos = self
            .unlabeled_tgt
            .binary_search_by_key(&id, |u| u.id)
            .map_err(|_| Error::UnknownId(id))?;
        let y = *self.hidden.get(&id).ok_or(Error::UnknownId(id))?;
        let u = self.unlabeled_tgt.remove(pos);
        self.reads.push(id);
        self.labeled_tgt.push(Sample {
            id,
            x: u.x,
            y,
            domain: Domain::Target,
        });
        Ok(y)
    }

    pub fn annotate(&mut self, ids: &[usize]) -> Result<()> {
        for &id in ids {
            self.oracle_label(id)?;
        }
        Ok(())
    }

    /// Annotates the whole unlabeled target pool.
    pub fn reveal_all(&mut self) -> Result<()> {
        let ids = self.unlabeled_ids();
        self.annotate(&ids)
    }

    /// Number of oracle reads so far.
    pub fn label_reads(&self) -> usize {
        self.reads.len()
    }

    /// Ids revealed so far, in reveal order.
    pub fn read_ids(&self) -> &[usize] {
        &self.reads
    }
}
