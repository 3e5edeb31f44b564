use std::cmp::Ordering;

use crate::autodiff::PROB_EPS;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Shannon entropy in nats; `0·ln 0` counts as 0.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&v| v > 0.0).map(|v| v * v.ln()).sum::<f64>()
}

/// Per-row entropy of class posteriors.
pub fn score_certainty(probs: &Tensor) -> Vec<f64> {
    (0..probs.rows()).map(|r| entropy(probs.row(r))).collect()
}

/// Discriminator odds `gd / (1 − gd)` times entropy. `gd` is clamped away
/// from 0 and 1.
pub fn score_iwerm(probs: &Tensor, gd: &[f64]) -> Vec<f64> {
    (0..probs.rows())
        .map(|r| {
            let g = gd[r].clamp(PROB_EPS, 1.0 - PROB_EPS);
            g / (1.0 - g) * entropy(probs.row(r))
        })
        .collect()
}

/// Closeness to the decision boundary: `1 − (p₍₁₎ − p₍₂₎)`.
pub fn boundary_closeness(probs: &Tensor) -> Vec<f64> {
    (0..probs.rows())
        .map(|r| {
            let (mut a, mut b) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for &v in probs.row(r) {
                if v > a {
                    b = a;
                    a = v;
                } else if v > b {
                    b = v;
                }
            }
            if b == f64::NEG_INFINITY {
                b = 0.0;
            }
            1.0 - (a - b)
        })
        .collect()
}

/// Cosine similarity; 0 when either vector is all zeros.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Rank {
    Largest,
    Smallest,
}

/// The `k` best ids by score; equal scores go to the smaller id.
pub fn top_k(ids: &[usize], scores: &[f64], k: usize, rank: Rank) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ids.len()).collect();
    order.sort_by(|&i, &j| {
        let by_score = match rank {
            Rank::Largest => scores[j].total_cmp(&scores[i]),
            Rank::Smallest => scores[i].total_cmp(&scores[j]),
        };
        by_score.then(ids[i].cmp(&ids[j]))
    });
    order.into_iter().take(k).map(|i| ids[i]).collect()
}

fn better(score: f64, id: usize, best: Option<(f64, usize)>) -> bool {
    match best {
        None => true,
        Some((s, b)) => match score.total_cmp(&s) {
            Ordering::Greater => true,
            Ordering::Equal => id < b,
            Ordering::Less => false,
        },
    }
}

/// Greedy margin + diversity selection. The first pick maximizes boundary
/// closeness `u`; each later pick maximizes
/// `λ·u + (1 − λ)·(1 − max_{s ∈ S} cos(f, f_s))`. Returns ids in pick order.
pub fn select_divdis(
    ids: &[usize],
    probs: &Tensor,
    feats: &Tensor,
    k: usize,
    lambda: f64,
) -> Result<Vec<usize>> {
    let n = ids.len();
    if k > n {
        return Err(Error::config(format!("k={k} exceeds the {n} candidates")));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::config(format!("lambda must be in [0, 1], got {lambda}")));
    }
    let u = boundary_closeness(probs);
    let mut taken = vec![false; n];
    // max cosine to the selected set, per candidate
    let mut max_cos = vec![f64::NEG_INFINITY; n];
    let mut picks = Vec::with_capacity(k);
    for step in 0..k {
        let mut best: Option<(f64, usize)> = None;
        let mut best_i = 0;
        for i in (0..n).filter(|&i| !taken[i]) {
            let score = if step == 0 {
                u[i]
            } else {
                lambda * u[i] + (1.0 - lambda) * (1.0 - max_cos[i])
            };
            if better(score, ids[i], best) {
                best = Some((score, ids[i]));
                best_i = i;
            }
        }
        taken[best_i] = true;
        picks.push(ids[best_i]);
        let f = feats.row(best_i);
        for i in (0..n).filter(|&i| !taken[i]) {
            max_cos[i] = max_cos[i].max(cosine(feats.row(i), f));
        }
    }
    Ok(picks)
}
