use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::{DomainSplit, Sample};
use crate::error::{Error, Result};
use crate::rng::seeded;

/// Smallest class size accepted by [`split_72_8_20`].
pub const MIN_PER_CLASS: usize = 5;

/// Stratified 72/8/20 split. Each class is shuffled with the seeded
/// generator, receives `⌊0.72n⌋ / ⌊0.08n⌋ / ⌊0.2n⌋` samples, and the
/// leftover samples go round-robin to train, val, test. Lists come back
/// sorted by id.
pub fn split_72_8_20(samples: &[Sample], seed: u64) -> Result<DomainSplit> {
    let mut by_class: BTreeMap<usize, Vec<Sample>> = BTreeMap::new();
    for s in samples {
        by_class.entry(s.y).or_default().push(s.clone());
    }
    let mut rng = seeded(seed);
    let mut out = DomainSplit::default();
    for (class, mut members) in by_class {
        let n = members.len();
        if n < MIN_PER_CLASS {
            return Err(Error::ClassTooSmall {
                class,
                got: n,
                needed: MIN_PER_CLASS,
            });
        }
        members.sort_by_key(|s| s.id);
        members.shuffle(&mut rng);
        let mut counts = [72 * n / 100, 8 * n / 100, 20 * n / 100];
        let mut left = n - counts.iter().sum::<usize>();
        let mut k = 0;
        while left > 0 {
            counts[k % 3] += 1;
            left -= 1;
            k += 1;
        }
        let mut it = members.into_iter();
        out.train.extend(it.by_ref().take(counts[0]));
        out.val.extend(it.by_ref().take(counts[1]));
        out.test.extend(it);
    }
    for part in [&mut out.train, &mut out.val, &mut out.test] {
        part.sort_by_key(|s| s.id);
    }
    Ok(out)
}
