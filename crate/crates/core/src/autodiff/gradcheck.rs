use crate::error::Result;
use crate::tensor::{ParamId, ParamSet};

use super::tape::{Tape, Var};

/// Compares reverse-mode gradients of a scalar function against central
/// differences over every coordinate of the listed parameters.
///
/// Returns `max |analytic − numeric| / max(1, |analytic|, |numeric|)`.
/// `f` records a forward pass on the given tape and returns the loss node;
/// it must be deterministic.
pub fn grad_check<F>(params: &mut ParamSet, ids: &[ParamId], eps: f64, mut f: F) -> Result<f64>
where
    F: FnMut(&mut Tape, &ParamSet) -> Result<Var>,
{
    let saved: Vec<_> = ids.iter().map(|&id| params.get(id).grad.clone()).collect();
    for &id in ids {
        params.get_mut(id).zero_grad();
    }
    let mut tape = Tape::new();
    let loss = f(&mut tape, params)?;
    tape.backward(loss, params)?;
    let analytic: Vec<Vec<f64>> = ids
        .iter()
        .map(|&id| params.get(id).grad.data().to_vec())
        .collect();
    for (&id, g) in ids.iter().zip(saved) {
        params.get_mut(id).grad = g;
    }

    let mut eval = |params: &ParamSet| -> Result<f64> {
        let mut tape = Tape::new();
        let loss = f(&mut tape, params)?;
        Ok(tape.scalar(loss))
    };

    let mut worst = 0.0f64;
    for (&id, grads) in ids.iter().zip(&analytic) {
        for (k, &a) in grads.iter().enumerate() {
            let orig = params.get(id).value.data()[k];
            params.get_mut(id).value.data_mut()[k] = orig + eps;
            let plus = eval(params)?;
            params.get_mut(id).value.data_mut()[k] = orig - eps;
            let minus = eval(params)?;
            params.get_mut(id).value.data_mut()[k] = orig;
            let numeric = (plus - minus) / (2.0 * eps);
            let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
            worst = worst.max(err);
        }
    }
    Ok(worst)
}
