use crate::autodiff::params::ParamSet;
use crate::error::{contract, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SgdReport<S> {
    /// Global gradient norm before clipping.
    pub grad_norm: S,
    pub clipped: bool,
}

/// One plain SGD step: optional global-norm clipping, then
/// `p <- p - lr * grad`, then gradients are zeroed.
pub fn sgd_step<S: Scalar>(params: &mut ParamSet<S>, lr: S, clip_norm: Option<S>) -> Result<SgdReport<S>> {
    if !(lr > S::zero()) {
        return contract(format!("sgd_step: learning rate {lr} must be positive"));
    }
    if let Some(c) = clip_norm {
        if !(c > S::zero()) {
            return contract(format!("sgd_step: clip norm {c} must be positive"));
        }
    }
    for (name, t) in params.iter() {
        if t.requires_grad && t.grad.is_none() {
            return contract(format!("sgd_step: parameter {name} has no gradient"));
        }
    }
    let norm = params.grad_norm();
    let mut factor = S::one();
    let mut clipped = false;
    if let Some(c) = clip_norm {
        if norm > c {
            factor = c / norm;
            clipped = true;
        }
    }
    let step = lr * factor;
    for (_, t) in params.iter_mut() {
        if !t.requires_grad {
            continue;
        }
        let mut grad = t.grad.take().expect("checked above");
        for (p, g) in t.data_mut().iter_mut().zip(grad.iter_mut()) {
            *p = *p - step * *g;
            *g = S::zero();
        }
        t.grad = Some(grad);
    }
    Ok(SgdReport {
        grad_norm: norm,
        clipped,
    })
}
