//! Central finite-difference verification of tape gradients.

use crate::autodiff::params::{Bindings, ParamSet};
use crate::autodiff::tape::{Tape, Var};
use crate::autodiff::tensor::Tensor;
use crate::error::{contract, Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    /// `|g_ad - g_fd| / max(1, |g_ad|, |g_fd|)` per coordinate.
    pub rel_errors: Vec<f64>,
    pub max_rel_err: f64,
    /// Coordinates whose relative error exceeds the tolerance.
    pub flagged: Vec<usize>,
    /// Human-readable name per coordinate (`param[index]` or `x[index]`).
    pub labels: Vec<String>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty()
    }

    fn build(analytic: Vec<f64>, numeric: Vec<f64>, labels: Vec<String>, tol: f64) -> Self {
        let rel_errors: Vec<f64> = analytic
            .iter()
            .zip(&numeric)
            .map(|(&a, &n)| (a - n).abs() / 1f64.max(a.abs()).max(n.abs()))
            .collect();
        let max_rel_err = rel_errors.iter().copied().fold(0.0, f64::max);
        let flagged = rel_errors
            .iter()
            .enumerate()
            .filter(|(_, &e)| !(e <= tol))
            .map(|(i, _)| i)
            .collect();
        GradCheckReport {
            analytic,
            numeric,
            rel_errors,
            max_rel_err,
            flagged,
            labels,
        }
    }
}

fn eval_scalar<S: Scalar>(tape: &Tape<S>, out: Var) -> Result<f64> {
    if tape.value(out).len() != 1 {
        return contract("gradient_check: function must return a scalar");
    }
    let v = tape.item(out).as_f64();
    if !v.is_finite() {
        return Err(Error::NonFinite { op: "gradient_check" });
    }
    Ok(v)
}

/// Compares the tape gradient of `f` at `point` against central
/// differences with step `h`.
pub fn gradient_check<S, F>(f: F, point: &Tensor<S>, h: f64, tol: f64) -> Result<GradCheckReport>
where
    S: Scalar,
    F: Fn(&mut Tape<S>, Var) -> Result<Var>,
{
    if !(h > 0.0) {
        return contract(format!("gradient_check: step {h} must be positive"));
    }
    let run = |p: &Tensor<S>, grad: bool| -> Result<(f64, Option<Vec<f64>>)> {
        let mut tape = Tape::new().with_finite_checks(true);
        let mut leaf = p.clone();
        leaf.requires_grad = grad;
        let x = tape.leaf(leaf);
        let out = f(&mut tape, x)?;
        let v = eval_scalar(&tape, out)?;
        let g = if grad {
            let grads = tape.backward(out)?;
            Some(match grads.get(x) {
                Some(g) => g.iter().map(|v| v.as_f64()).collect(),
                None => vec![0.0; p.len()],
            })
        } else {
            None
        };
        Ok((v, g))
    };
    let (_, analytic) = run(point, true)?;
    let analytic = analytic.expect("requested");
    let mut numeric = Vec::with_capacity(point.len());
    for i in 0..point.len() {
        let mut plus = point.clone();
        let mut minus = point.clone();
        let x0 = point.data()[i].as_f64();
        plus.data_mut()[i] = S::lit(x0 + h);
        minus.data_mut()[i] = S::lit(x0 - h);
        let (fp, _) = run(&plus, false)?;
        let (fm, _) = run(&minus, false)?;
        numeric.push((fp - fm) / (2.0 * h));
    }
    let labels = (0..point.len()).map(|i| format!("x[{i}]")).collect();
    Ok(GradCheckReport::build(analytic, numeric, labels, tol))
}

/// Same check over every coordinate of every parameter in `params`,
/// in sorted name order.
pub fn gradient_check_params<S, F>(f: F, params: &ParamSet<S>, h: f64, tol: f64) -> Result<GradCheckReport>
where
    S: Scalar,
    F: Fn(&mut Tape<S>, &Bindings) -> Result<Var>,
{
    if !(h > 0.0) {
        return contract(format!("gradient_check: step {h} must be positive"));
    }
    let value_at = |ps: &ParamSet<S>| -> Result<f64> {
        let mut tape = Tape::new().with_finite_checks(true);
        let b = tape.bind(ps);
        let out = f(&mut tape, &b)?;
        eval_scalar(&tape, out)
    };

    let mut tape = Tape::new().with_finite_checks(true);
    let b = tape.bind(params);
    let out = f(&mut tape, &b)?;
    eval_scalar(&tape, out)?;
    let grads = tape.backward(out)?;

    let mut analytic = Vec::new();
    let mut numeric = Vec::new();
    let mut labels = Vec::new();
    let mut probe = params.clone();
    for (name, t) in params.iter() {
        let g = grads.get(b.get(name)?);
        for i in 0..t.len() {
            analytic.push(g.map_or(0.0, |g| g[i].as_f64()));
            let x0 = t.data()[i];
            let slot = |ps: &mut ParamSet<S>, v: S| ps.get_mut(name).expect("cloned").data_mut()[i] = v;
            slot(&mut probe, S::lit(x0.as_f64() + h));
            let fp = value_at(&probe)?;
            slot(&mut probe, S::lit(x0.as_f64() - h));
            let fm = value_at(&probe)?;
            slot(&mut probe, x0);
            numeric.push((fp - fm) / (2.0 * h));
            labels.push(format!("{name}[{i}]"));
        }
    }
    Ok(GradCheckReport::build(analytic, numeric, labels, tol))
}
