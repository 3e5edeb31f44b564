use crate::autodiff::{sgd_step, Tape};
use crate::data::Domain;
use crate::error::Result;
use crate::model::UadaModel;
use crate::norm::NormMode;
use crate::tensor::{ParamId, Tensor};

/// Expected model output change of labeling each candidate row.
///
/// For every label `y`, one SGD step (rate `lr`, no decay) on the
/// classification loss of `(x, y)` moves the feature extractor and label
/// predictor; the change is the mean absolute posterior shift over the
/// evaluation rows, averaged over classes. Scores weight these changes by
/// the current posterior `p(y | x)`. Parameters are restored after every
/// probe.
pub fn score_emoc(model: &mut UadaModel, candidates: &Tensor, eval: &Tensor, lr: f64) -> Result<Vec<f64>> {
    let classes = model.num_classes();
    let base = model.predict_proba(eval, Domain::Target)?.probs;
    let post = model.predict_proba(candidates, Domain::Target)?.probs;
    let mut ids: Vec<ParamId> = model.gf_ids();
    ids.extend(model.gl_ids());
    let saved: Vec<Tensor> = ids.iter().map(|&id| model.params.get(id).value.clone()).collect();
    let denom = (eval.rows() * classes) as f64;
    let mut tape = Tape::new();
    let mut scores = Vec::with_capacity(candidates.rows());
    for r in 0..candidates.rows() {
        let x = candidates.select_rows(&[r]);
        let mask = model.domain_mask(Domain::Target, 1);
        let mut score = 0.0;
        for y in 0..classes {
            let weight = post.at(r, y);
            if weight == 0.0 {
                continue;
            }
            tape.clear();
            model.params.zero_grads();
            let xv = tape.leaf(x.clone());
            let feats = model.extract(&mut tape, xv, &mask, NormMode::Eval)?;
            let logits = model.classify(&mut tape, feats)?;
            let loss = tape.softmax_cross_entropy(logits, &[y])?;
            tape.backward(loss, &mut model.params)?;
            sgd_step(model.params.subset_mut(&ids), lr, 0.0)?;
            let moved = model.predict_proba(eval, Domain::Target)?.probs;
            let change: f64 = moved
                .data()
                .iter()
                .zip(base.data())
                .map(|(a, b)| (a - b).abs())
                .sum();
            score += weight * change / denom;
            for (&id, v) in ids.iter().zip(&saved) {
                model.params.get_mut(id).value = v.clone();
            }
        }
        scores.push(score);
    }
    model.params.zero_grads();
    Ok(scores)
}
