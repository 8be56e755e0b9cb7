//! Convolutional classifier scoring how likely a summary is human-written.
//!
//! embed -> per width: valid convolution over time + bias, tanh, max over
//! time -> concatenate -> affine -> 2-way softmax. Class 0 is "original".
//!
//! Inputs are canonicalized before the convolution: trailing PAD is
//! stripped, the sequence is right-padded with PAD to the largest filter
//! width, and windows made only of PAD are excluded from the max. The
//! result is independent of how much trailing PAD the caller supplied.

use crate::autodiff::{Bindings, ParamSet, Tape, Tensor, Var};
use crate::error::{contract, Result};
use crate::rng::Prng;
use crate::scalar::Scalar;
use crate::text::{PAD, UNK};

pub const ORIGINAL: usize = 0;

/// Lower and upper probability clamp inside the log of the loss.
pub const PROB_CLAMP: f64 = 1e-7;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DiscriminatorDims {
    pub vocab_size: usize,
    pub d_emb: usize,
    /// Distinct filter widths, ascending.
    pub widths: Vec<usize>,
    pub filters: usize,
}

impl DiscriminatorDims {
    pub fn new(vocab_size: usize, d_emb: usize, widths: &[usize], filters: usize) -> Result<Self> {
        let mut w = widths.to_vec();
        w.sort_unstable();
        w.dedup();
        if w.is_empty() || w.len() != widths.len() || w[0] == 0 {
            return contract(format!("discriminator widths {widths:?} must be distinct and >= 1"));
        }
        if vocab_size == 0 || d_emb == 0 || filters == 0 {
            return contract("discriminator sizes must be positive");
        }
        Ok(DiscriminatorDims {
            vocab_size,
            d_emb,
            widths: w,
            filters,
        })
    }

    pub fn max_width(&self) -> usize {
        *self.widths.last().expect("nonempty widths")
    }

    pub fn layout(&self) -> Vec<(String, Vec<usize>, bool)> {
        let mut l = vec![
            ("emb".to_string(), vec![self.vocab_size, self.d_emb], false),
            ("out.w".to_string(), vec![self.filters * self.widths.len(), 2], false),
            ("out.b".to_string(), vec![1, 2], true),
        ];
        for &k in &self.widths {
            l.push((format!("conv{k}.w"), vec![k * self.d_emb, self.filters], false));
            l.push((format!("conv{k}.b"), vec![1, self.filters], true));
        }
        l.sort_by(|a, b| a.0.cmp(&b.0));
        l
    }

    /// Weights uniform in `(-0.1, 0.1)` in sorted name order, biases zero.
    pub fn init<S: Scalar>(&self, rng: &mut Prng) -> ParamSet<S> {
        let mut ps = ParamSet::new();
        for (name, shape, bias) in self.layout() {
            let t = if bias {
                Tensor::zeros(&shape)
            } else {
                Tensor::uniform(&shape, -0.1, 0.1, rng)
            };
            ps.insert(name, t.with_grad()).expect("unique names");
        }
        ps
    }

    pub fn infer<S: Scalar>(params: &ParamSet<S>) -> Result<Self> {
        let emb = params.require("emb")?.shape().to_vec();
        let [v, d] = emb[..] else {
            return contract(format!("parameter emb has shape {emb:?}, expected rank 2"));
        };
        let mut widths = Vec::new();
        let mut filters = 0;
        for (name, t) in params.iter() {
            if let Some(k) = name.strip_prefix("conv").and_then(|r| r.strip_suffix(".w")) {
                let k: usize = k
                    .parse()
                    .map_err(|_| crate::Error::Contract(format!("bad filter parameter name {name}")))?;
                widths.push(k);
                filters = t.shape().get(1).copied().unwrap_or(0);
            }
        }
        let dims = DiscriminatorDims::new(v, d, &widths, filters)?;
        dims.check(params)?;
        Ok(dims)
    }

    /// Errors naming the first parameter whose shape disagrees with these sizes.
    pub fn check<S: Scalar>(&self, params: &ParamSet<S>) -> Result<()> {
        let layout = self.layout();
        for (name, shape, _) in &layout {
            let got = params.require(name)?.shape();
            if got != shape.as_slice() {
                return contract(format!("parameter {name} has shape {got:?}, expected {shape:?}"));
            }
        }
        if let Some(extra) = params.names().find(|n| !layout.iter().any(|(l, _, _)| l == n)) {
            return contract(format!("unexpected discriminator parameter {extra}"));
        }
        Ok(())
    }
}

/// Fixed-vocabulary summary with its label.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSummary {
    pub ids: Vec<usize>,
    pub original: bool,
}

impl LabeledSummary {
    /// Maps extended ids (and PAD, which only pads) to UNK.
    pub fn from_ext_ids(ext_ids: &[usize], vocab_size: usize, original: bool) -> Result<Self> {
        if ext_ids.is_empty() {
            return contract("labeled summary must be nonempty");
        }
        let ids = ext_ids
            .iter()
            .map(|&i| if i >= vocab_size || i == PAD { UNK } else { i })
            .collect();
        Ok(LabeledSummary { ids, original })
    }
}

#[derive(Clone, Debug)]
pub struct DiscVars {
    pub emb: Var,
    pub convs: Vec<(usize, Var, Var)>,
    pub out_w: Var,
    pub out_b: Var,
}

impl DiscVars {
    pub fn from_bindings(dims: &DiscriminatorDims, b: &Bindings) -> Result<Self> {
        let convs = dims
            .widths
            .iter()
            .map(|&k| Ok((k, b.get(&format!("conv{k}.w"))?, b.get(&format!("conv{k}.b"))?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(DiscVars {
            emb: b.get("emb")?,
            convs,
            out_w: b.get("out.w")?,
            out_b: b.get("out.b")?,
        })
    }
}

/// Strips trailing PAD and right-pads to `min_len`.
pub fn canonical_ids(ids: &[usize], min_len: usize) -> Result<Vec<usize>> {
    let real = ids.iter().rposition(|&i| i != PAD).map_or(0, |p| p + 1);
    if real == 0 {
        return contract("discriminator input has no non-PAD token");
    }
    let mut out = ids[..real].to_vec();
    out.resize(real.max(min_len), PAD);
    Ok(out)
}

/// Probability (a `[1, 1]` node) that `ids` is an original summary.
pub fn d_forward<S: Scalar>(tape: &mut Tape<S>, d: &DiscVars, ids: &[usize]) -> Result<Var> {
    if ids.is_empty() {
        return contract("discriminator input is empty");
    }
    let max_width = d.convs.iter().map(|c| c.0).max().unwrap_or(1);
    let ids = canonical_ids(ids, max_width)?;
    let x = tape.embedding(d.emb, &ids)?;
    let mut pooled = Vec::with_capacity(d.convs.len());
    for &(k, w, b) in &d.convs {
        let keep: Vec<bool> = ids.windows(k).map(|win| win.iter().any(|&i| i != PAD)).collect();
        let z = tape.conv_over_time(x, w, k)?;
        let z = tape.add(z, b)?;
        let z = tape.tanh(z)?;
        pooled.push(tape.max_over_time(z, Some(&keep))?);
    }
    let feats = tape.concat_cols(&pooled)?;
    let logits = tape.matmul(feats, d.out_w)?;
    let logits = tape.add(logits, d.out_b)?;
    let probs = tape.softmax(logits)?;
    tape.gather(probs, &[ORIGINAL])
}

/// `mean_pos[-log D] + mean_neg[-log(1 - D)]` with `D` clamped to
/// `[1e-7, 1 - 1e-7]`.
pub fn d_loss<S: Scalar>(
    tape: &mut Tape<S>,
    d: &DiscVars,
    pos: &[LabeledSummary],
    neg: &[LabeledSummary],
) -> Result<Var> {
    if pos.is_empty() || neg.is_empty() {
        return contract("discriminator loss needs nonempty positive and negative batches");
    }
    let lo = S::lit(PROB_CLAMP);
    let hi = S::one() - lo;
    let side = |tape: &mut Tape<S>, batch: &[LabeledSummary], positive: bool| -> Result<Var> {
        let terms = batch
            .iter()
            .map(|s| {
                let p = d_forward(tape, d, &s.ids)?;
                let p = tape.clamp(p, lo, hi)?;
                let q = if positive {
                    p
                } else {
                    tape.affine(p, -S::one(), S::one())?
                };
                tape.log(q)
            })
            .collect::<Result<Vec<_>>>()?;
        let row = tape.concat_cols(&terms)?;
        let m = tape.mean(row)?;
        tape.scale(m, -S::one())
    };
    let lp = side(tape, pos, true)?;
    let ln = side(tape, neg, false)?;
    tape.add(lp, ln)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Discriminator<S> {
    pub dims: DiscriminatorDims,
    pub params: ParamSet<S>,
}

impl<S: Scalar> Discriminator<S> {
    pub fn new(dims: DiscriminatorDims, rng: &mut Prng) -> Self {
        let params = dims.init(rng);
        Discriminator { dims, params }
    }

    pub fn from_params(params: ParamSet<S>) -> Result<Self> {
        let dims = DiscriminatorDims::infer(&params)?;
        Ok(Discriminator { dims, params })
    }

    pub fn bind(&self, tape: &mut Tape<S>) -> Result<(DiscVars, Bindings)> {
        let b = tape.bind(&self.params);
        Ok((DiscVars::from_bindings(&self.dims, &b)?, b))
    }

    pub fn probability(&self, ids: &[usize]) -> Result<S> {
        let mut tape = Tape::new();
        let (d, _) = self.bind(&mut tape)?;
        let p = d_forward(&mut tape, &d, ids)?;
        Ok(tape.item(p))
    }

    pub fn loss_value(&self, pos: &[LabeledSummary], neg: &[LabeledSummary]) -> Result<S> {
        let mut tape = Tape::new();
        let (d, _) = self.bind(&mut tape)?;
        let l = d_loss(&mut tape, &d, pos, neg)?;
        Ok(tape.item(l))
    }

    /// Fraction of `batch` where `D(y) > threshold` agrees with the label;
    /// `D = threshold` counts as "generated".
    pub fn accuracy(&self, batch: &[LabeledSummary], threshold: f64) -> Result<f64> {
        if batch.is_empty() {
            return contract("accuracy of an empty batch");
        }
        let mut right = 0usize;
        for s in batch {
            let p = self.probability(&s.ids)?.as_f64();
            if (p > threshold) == s.original {
                right += 1;
            }
        }
        Ok(right as f64 / batch.len() as f64)
    }
}
