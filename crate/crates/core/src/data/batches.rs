use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use super::{features, Sample};
use crate::error::{Error, Result};
use crate::norm::DomainMask;
use crate::rng::seeded;
use crate::tensor::Tensor;

/// Index stream over `0..n` that reshuffles whenever it runs dry.
#[derive(Clone, Debug)]
struct Cycler {
    order: Vec<usize>,
    pos: usize,
}

impl Cycler {
    fn new(n: usize) -> Self {
        Cycler {
            order: (0..n).collect(),
            pos: n,
        }
    }

    fn reshuffle(&mut self, rng: &mut ChaCha8Rng) {
        self.order.sort_unstable();
        self.order.shuffle(rng);
        self.pos = 0;
    }

    fn take(&mut self, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.pos == self.order.len() {
                self.reshuffle(rng);
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Row indices for one mixed batch: `src` into the source pool, `tgt` into
/// the target pool.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MixedBatch {
    pub src: Vec<usize>,
    pub tgt: Vec<usize>,
}

/// Draws batches with a fixed source/target composition. Each epoch
/// reshuffles both pools; the shorter pool cycles (with reshuffle) so every
/// batch is full.
#[derive(Clone, Debug)]
pub struct MixedBatcher {
    src: Cycler,
    tgt: Cycler,
    per_src: usize,
    per_tgt: usize,
    rng: ChaCha8Rng,
}

impl MixedBatcher {
    pub fn new(
        n_src: usize,
        n_tgt: usize,
        batch_size: usize,
        source_fraction: f64,
        seed: u64,
    ) -> Result<Self> {
        if n_src == 0 || n_tgt == 0 {
            return Err(Error::config("mixed batches need nonempty source and target pools"));
        }
        if !(0.0..=1.0).contains(&source_fraction) {
            return Err(Error::config(format!(
                "source_fraction must be in [0, 1], got {source_fraction}"
            )));
        }
        let per_src = (batch_size as f64 * source_fraction).floor() as usize;
        let per_tgt = batch_size.saturating_sub(per_src);
        if per_src < 2 || per_tgt < 2 {
            return Err(Error::config(format!(
                "batch_size={batch_size} with source_fraction={source_fraction} gives \
                 {per_src} source + {per_tgt} target rows; both must be at least 2"
            )));
        }
        Ok(MixedBatcher {
            src: Cycler::new(n_src),
            tgt: Cycler::new(n_tgt),
            per_src,
            per_tgt,
            rng: seeded(seed),
        })
    }

    pub fn per_domain(&self) -> (usize, usize) {
        (self.per_src, self.per_tgt)
    }

    /// Batches of one epoch: enough steps for the longer pool to be covered.
    pub fn epoch(&mut self) -> Vec<MixedBatch> {
        self.src.reshuffle(&mut self.rng);
        self.tgt.reshuffle(&mut self.rng);
        let steps = self
            .src
            .order
            .len()
            .div_ceil(self.per_src)
            .max(self.tgt.order.len().div_ceil(self.per_tgt));
        (0..steps)
            .map(|_| MixedBatch {
                src: self.src.take(self.per_src, &mut self.rng),
                tgt: self.tgt.take(self.per_tgt, &mut self.rng),
            })
            .collect()
    }
}

/// Single-pool batches of `min(batch_size, n)` rows; `⌈n / batch⌉` per epoch.
#[derive(Clone, Debug)]
pub struct SingleBatcher {
    pool: Cycler,
    batch: usize,
    rng: ChaCha8Rng,
}

impl SingleBatcher {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Empty("training pool".into()));
        }
        if batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        Ok(SingleBatcher {
            pool: Cycler::new(n),
            batch: batch_size.min(n),
            rng: seeded(seed),
        })
    }

    pub fn epoch(&mut self) -> Vec<Vec<usize>> {
        self.pool.reshuffle(&mut self.rng);
        let steps = self.pool.order.len().div_ceil(self.batch);
        (0..steps)
            .map(|_| self.pool.take(self.batch, &mut self.rng))
            .collect()
    }
}

/// One epoch of assembled mixed batches: source rows first, then target.
pub fn mixed_batches<'a>(
    src_train: &'a [Sample],
    tgt_train: &'a [Sample],
    batch_size: usize,
    source_fraction: f64,
    seed: u64,
) -> Result<impl Iterator<Item = Result<(Tensor, DomainMask)>> + 'a> {
    let mut batcher = MixedBatcher::new(
        src_train.len(),
        tgt_train.len(),
        batch_size,
        source_fraction,
        seed,
    )?;
    Ok(batcher.epoch().into_iter().map(move |b| {
        let rows = b
            .src
            .iter()
            .map(|&i| &src_train[i])
            .chain(b.tgt.iter().map(|&i| &tgt_train[i]));
        let x = features(rows)?;
        let mut mask = vec![true; b.src.len()];
        mask.resize(b.src.len() + b.tgt.len(), false);
        Ok((x, DomainMask(mask)))
    }))
}
