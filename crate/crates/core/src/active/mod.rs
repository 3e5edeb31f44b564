//! Pool-based batch active learning on the target domain.

mod emoc;
mod scoring;

use std::fmt;

use rand::seq::index::sample;
use rand::Rng;

pub use emoc::score_emoc;
pub use scoring::{
    boundary_closeness, cosine, entropy, score_certainty, score_iwerm, select_divdis, top_k, Rank,
};

use crate::data::{DatasetSplit, Domain, Sample};
use crate::error::{Error, Result};
use crate::model::{build_model, train, TrainConfig, TrainMode, UadaModel};
use crate::pool::Pool;
use crate::rng::{derive_seed, seeded, stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StrategyKind {
    Random,
    Certainty,
    DivDis,
    Iwerm,
    Emoc,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::Random,
        StrategyKind::Certainty,
        StrategyKind::DivDis,
        StrategyKind::Iwerm,
        StrategyKind::Emoc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Certainty => "certainty",
            StrategyKind::DivDis => "divdis",
            StrategyKind::Iwerm => "iwerm",
            StrategyKind::Emoc => "emoc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        StrategyKind::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Strategy knobs shared by every selection.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectOptions {
    /// Weight of boundary closeness against diversity in DivDis.
    pub lambda: f64,
    /// Step size of the EMOC lookahead.
    pub emoc_lr: f64,
    /// Size of the EMOC evaluation subset; `None` means `min(100, |pool|)`.
    pub emoc_eval_size: Option<usize>,
    /// Make Certainty pick the least certain samples instead.
    pub invert_certainty: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AlConfig {
    pub k: usize,
    pub rounds: usize,
    pub strategy: StrategyKind,
    pub seed: u64,
    pub lambda_divdis: f64,
    /// `None` uses the training learning rate.
    pub emoc_lr: Option<f64>,
    pub emoc_eval_size: Option<usize>,
    pub invert_certainty: bool,
}

impl Default for AlConfig {
    fn default() -> Self {
        AlConfig {
            k: 10,
            rounds: 30,
            strategy: StrategyKind::Random,
            seed: 0,
            lambda_divdis: 0.5,
            emoc_lr: None,
            emoc_eval_size: None,
            invert_certainty: false,
        }
    }
}

impl AlConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.lambda_divdis) {
            return Err(Error::config(format!(
                "lambda_divdis must be in [0, 1], got {}",
                self.lambda_divdis
            )));
        }
        if let Some(lr) = self.emoc_lr {
            if !(lr >= 0.0 && lr.is_finite()) {
                return Err(Error::config(format!("emoc_lr must be >= 0, got {lr}")));
            }
        }
        if self.emoc_eval_size == Some(0) {
            return Err(Error::config("emoc_eval_size must be at least 1"));
        }
        Ok(())
    }

    pub fn select_options(&self, train_lr: f64) -> SelectOptions {
        SelectOptions {
            lambda: self.lambda_divdis,
            emoc_lr: self.emoc_lr.unwrap_or(train_lr),
            emoc_eval_size: self.emoc_eval_size,
            invert_certainty: self.invert_certainty,
        }
    }
}

pub const DEFAULT_EMOC_EVAL: usize = 100;

/// Picks `k` unlabeled target ids. Returned ids are sorted ascending.
pub fn select_batch(
    strategy: StrategyKind,
    model: &mut UadaModel,
    pool: &Pool,
    k: usize,
    seed: u64,
    opts: &SelectOptions,
) -> Result<Vec<usize>> {
    let ids = pool.unlabeled_ids();
    if k > ids.len() {
        return Err(Error::config(format!(
            "k={k} exceeds the {} unlabeled samples",
            ids.len()
        )));
    }
    let mut picked = match strategy {
        StrategyKind::Random => {
            // uniform priorities in ascending id order; the k lowest win
            let mut rng = seeded(seed);
            let keys: Vec<f64> = ids.iter().map(|_| rng.random::<f64>()).collect();
            top_k(&ids, &keys, k, Rank::Smallest)
        }
        _ if k == 0 => Vec::new(),
        StrategyKind::Certainty => {
            let x = pool.unlabeled_features()?;
            let probs = model.predict_proba(&x, Domain::Target)?.probs;
            let rank = if opts.invert_certainty {
                Rank::Largest
            } else {
                Rank::Smallest
            };
            top_k(&ids, &score_certainty(&probs), k, rank)
        }
        StrategyKind::Iwerm => {
            let x = pool.unlabeled_features()?;
            let pred = model.predict_proba(&x, Domain::Target)?;
            top_k(&ids, &score_iwerm(&pred.probs, &pred.gd), k, Rank::Largest)
        }
        StrategyKind::DivDis => {
            let x = pool.unlabeled_features()?;
            let pred = model.predict_proba(&x, Domain::Target)?;
            select_divdis(&ids, &pred.probs, &pred.features, k, opts.lambda)?
        }
        StrategyKind::Emoc => {
            let x = pool.unlabeled_features()?;
            let size = opts
                .emoc_eval_size
                .unwrap_or(DEFAULT_EMOC_EVAL)
                .min(ids.len());
            let mut rng = seeded(derive_seed(seed, stream::EMOC_EVAL));
            let mut rows: Vec<usize> = sample(&mut rng, ids.len(), size).into_vec();
            rows.sort_unstable();
            let eval = x.select_rows(&rows);
            let scores = score_emoc(model, &x, &eval, opts.emoc_lr)?;
            top_k(&ids, &scores, k, Rank::Largest)
        }
    };
    picked.sort_unstable();
    Ok(picked)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundResult {
    pub round: usize,
    /// Ids chosen by this round's model; empty after the final round.
    pub selected_ids: Vec<usize>,
    /// Mean per-class accuracy on the target test split.
    pub mpca: f64,
    pub labeled_tgt: usize,
    pub unlabeled_tgt: usize,
}

/// Training seed of round `r`.
pub fn round_seed(base: u64, round: usize) -> u64 {
    derive_seed(derive_seed(base, stream::ROUND), round as u64)
}

/// Selection seed of round `r`.
pub fn select_seed(base: u64, round: usize) -> u64 {
    derive_seed(derive_seed(base, stream::SELECT), round as u64)
}

/// The round loop on an existing pool: for `r = 0..=rounds`, train a fresh
/// semi-supervised model, evaluate it on `test`, then (except after the last
/// round) select `k` ids and annotate them. `on_round` sees each result.
#[allow(clippy::too_many_arguments)]
pub fn run_rounds<F>(
    pool: &mut Pool,
    test: &[Sample],
    dim: usize,
    num_classes: usize,
    base: &TrainConfig,
    al: &AlConfig,
    mut on_round: F,
) -> Result<Vec<RoundResult>>
where
    F: FnMut(&RoundResult, &Pool) -> Result<()>,
{
    al.validate()?;
    let opts = al.select_options(base.lr);
    let mut results = Vec::with_capacity(al.rounds + 1);
    for round in 0..=al.rounds {
        let cfg = TrainConfig {
            mode: TrainMode::UadaSemi,
            seed: round_seed(base.seed, round),
            ..base.clone()
        };
        let mut model = build_model(&cfg, dim, num_classes, cfg.seed)?;
        train(&mut model, pool, &cfg)?;
        let mpca = model.evaluate(test, Domain::Target)?;
        let selected_ids = if round < al.rounds {
            let available = pool.unlabeled_tgt().len();
            if al.k > available {
                return Err(Error::PoolExhausted {
                    round,
                    needed: al.k,
                    available,
                });
            }
            let ids = select_batch(
                al.strategy,
                &mut model,
                pool,
                al.k,
                select_seed(al.seed, round),
                &opts,
            )?;
            pool.annotate(&ids)?;
            ids
        } else {
            Vec::new()
        };
        let result = RoundResult {
            round,
            selected_ids,
            mpca,
            labeled_tgt: pool.labeled_tgt().len(),
            unlabeled_tgt: pool.unlabeled_tgt().len(),
        };
        on_round(&result, pool)?;
        results.push(result);
    }
    Ok(results)
}

/// Active learning from a fresh pool built on the dataset's train splits.
pub fn run_active_learning(
    base: &TrainConfig,
    al: &AlConfig,
    data: &DatasetSplit,
) -> Result<Vec<RoundResult>> {
    let mut pool = Pool::from_split(data);
    run_rounds(
        &mut pool,
        &data.target.test,
        data.dim,
        data.num_classes,
        base,
        al,
        |_, _| Ok(()),
    )
}
