use crate::error::{Error, Result};
use crate::tensor::Param;

/// Stochastic gradient descent with coupled L2 decay and optional momentum.
///
/// Per parameter: `v ← μ·v + (g + λ·w·[decay])`, `w ← w − lr·v`; with
/// `μ = 0` this is `w ← w − lr·(g + λ·w·[decay])`. Gradients are zeroed
/// after the update.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sgd {
    pub lr: f64,
    pub l2: f64,
    pub momentum: f64,
}

impl Sgd {
    pub fn new(lr: f64, l2: f64) -> Result<Self> {
        Self::with_momentum(lr, l2, 0.0)
    }

    pub fn with_momentum(lr: f64, l2: f64, momentum: f64) -> Result<Self> {
        // lr = 0 is accepted and leaves every value untouched
        if !(lr >= 0.0 && lr.is_finite()) {
            return Err(Error::config(format!("learning rate must be >= 0, got {lr}")));
        }
        if !(l2 >= 0.0 && l2.is_finite()) {
            return Err(Error::config(format!("l2 must be >= 0, got {l2}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::config(format!("momentum must be in [0, 1), got {momentum}")));
        }
        Ok(Sgd { lr, l2, momentum })
    }

    pub fn step<'a>(&self, params: impl IntoIterator<Item = &'a mut Param>) {
        for p in params {
            let decay = if p.decay { self.l2 } else { 0.0 };
            if self.momentum > 0.0 {
                if p.velocity.len() != p.value.len() {
                    p.velocity = vec![0.0; p.value.len()];
                }
                let Param {
                    value,
                    grad,
                    velocity,
                    ..
                } = p;
                for ((w, g), v) in value.data_mut().iter_mut().zip(grad.data()).zip(velocity) {
                    *v = self.momentum * *v + g + decay * *w;
                    *w -= self.lr * *v;
                }
            } else if self.lr != 0.0 {
                let Param { value, grad, .. } = p;
                for (w, g) in value.data_mut().iter_mut().zip(grad.data()) {
                    *w -= self.lr * (g + decay * *w);
                }
            }
            p.zero_grad();
        }
    }
}

/// One plain SGD update: `value ← value − lr·(grad + l2·value·[decay])`.
pub fn sgd_step<'a>(
    params: impl IntoIterator<Item = &'a mut Param>,
    lr: f64,
    l2: f64,
) -> Result<()> {
    Sgd::new(lr, l2)?.step(params);
    Ok(())
}
