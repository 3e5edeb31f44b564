//! Brute-force reference selections, written from the scoring definitions
//! without touching the library's ranking or scoring helpers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shiftlab::active::SelectOptions;
use shiftlab::autodiff::{sgd_step, Tape};
use shiftlab::norm::NormMode;
use shiftlab::{Domain, Pool, StrategyKind, Tensor, UadaModel};

fn h(p: &[f64]) -> f64 {
    let mut s = 0.0;
    for &v in p {
        if v > 0.0 {
            s -= v * v.ln();
        }
    }
    s
}

/// Ids whose rank (count of strictly preferred candidates) is below `k`.
fn by_rank(ids: &[usize], scores: &[f64], k: usize, larger_wins: bool) -> Vec<usize> {
    let mut out = Vec::new();
    for i in 0..ids.len() {
        let mut ahead = 0;
        for j in 0..ids.len() {
            let wins = if larger_wins {
                scores[j] > scores[i]
            } else {
                scores[j] < scores[i]
            };
            if wins || (scores[j] == scores[i] && ids[j] < ids[i]) {
                ahead += 1;
            }
        }
        if ahead < k {
            out.push(ids[i]);
        }
    }
    out.sort();
    out
}

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let mut dot = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for i in 0..a.len() {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na.sqrt() * nb.sqrt())
    }
}

fn margin_u(p: &[f64]) -> f64 {
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    1.0 - (sorted[0] - sorted.get(1).copied().unwrap_or(0.0))
}

fn divdis(ids: &[usize], probs: &Tensor, feats: &Tensor, k: usize, lambda: f64) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    while chosen.len() < k {
        let mut best: Option<(f64, usize)> = None;
        for i in 0..ids.len() {
            if chosen.contains(&i) {
                continue;
            }
            let u = margin_u(probs.row(i));
            let score = if chosen.is_empty() {
                u
            } else {
                let sim = chosen
                    .iter()
                    .map(|&s| cos(feats.row(i), feats.row(s)))
                    .fold(f64::NEG_INFINITY, f64::max);
                lambda * u + (1.0 - lambda) * (1.0 - sim)
            };
            let take = match best {
                None => true,
                Some((b, bi)) => score > b || (score == b && ids[i] < ids[bi]),
            };
            if take {
                best = Some((score, i));
            }
        }
        chosen.push(best.unwrap().1);
    }
    let mut out: Vec<usize> = chosen.into_iter().map(|i| ids[i]).collect();
    out.sort();
    out
}

/// EMOC with a full model clone per (candidate, label) probe; the
/// evaluation set is the whole unlabeled pool.
fn emoc(model: &UadaModel, x: &Tensor, lr: f64) -> Vec<f64> {
    let c = model.num_classes();
    let base = model.predict_proba(x, Domain::Target).unwrap().probs;
    let mut scores = Vec::new();
    for r in 0..x.rows() {
        let row = Tensor::new(vec![1, x.cols()], x.row(r).to_vec()).unwrap();
        let mut score = 0.0;
        for y in 0..c {
            let py = base.at(r, y);
            if py == 0.0 {
                continue;
            }
            let mut probe = model.clone();
            let mut tape = Tape::new();
            let xv = tape.leaf(row.clone());
            let mask = probe.domain_mask(Domain::Target, 1);
            let z = probe.logits(&mut tape, xv, &mask, NormMode::Eval).unwrap();
            let loss = tape.softmax_cross_entropy(z, &[y]).unwrap();
            tape.backward(loss, &mut probe.params).unwrap();
            let mut ids = probe.gf_ids();
            ids.extend(probe.gl_ids());
            sgd_step(probe.params.subset_mut(&ids), lr, 0.0).unwrap();
            let after = probe.predict_proba(x, Domain::Target).unwrap().probs;
            let mut total = 0.0;
            for e in 0..x.rows() {
                let mut per = 0.0;
                for k in 0..c {
                    per += (after.at(e, k) - base.at(e, k)).abs();
                }
                total += per / c as f64;
            }
            score += py * total / x.rows() as f64;
        }
        scores.push(score);
    }
    scores
}

/// Reference selection for pools small enough that the EMOC evaluation set
/// is the entire unlabeled pool.
pub fn oracle_select(
    strategy: StrategyKind,
    model: &UadaModel,
    pool: &Pool,
    k: usize,
    seed: u64,
    opts: &SelectOptions,
) -> Vec<usize> {
    let ids = pool.unlabeled_ids();
    let x = pool.unlabeled_features().unwrap();
    let pred = model.predict_proba(&x, Domain::Target).unwrap();
    let n = ids.len();
    match strategy {
        StrategyKind::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let keys: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            by_rank(&ids, &keys, k, false)
        }
        StrategyKind::Certainty => {
            let s: Vec<f64> = (0..n).map(|r| h(pred.probs.row(r))).collect();
            by_rank(&ids, &s, k, opts.invert_certainty)
        }
        StrategyKind::Iwerm => {
            let s: Vec<f64> = (0..n)
                .map(|r| {
                    let g = pred.gd[r].clamp(1e-7, 1.0 - 1e-7);
                    g / (1.0 - g) * h(pred.probs.row(r))
                })
                .collect();
            by_rank(&ids, &s, k, true)
        }
        StrategyKind::DivDis => divdis(&ids, &pred.probs, &pred.features, k, opts.lambda),
        StrategyKind::Emoc => by_rank(&ids, &emoc(model, &x, opts.emoc_lr), k, true),
    }
}
