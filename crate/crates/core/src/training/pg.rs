//! Policy-gradient surrogate with the discriminator as terminal reward.
//!
//! For one sampled summary `y_1..y_T` of source `x` with reward
//! `R = D(y_1..y_T)` the surrogate is `(1/T) sum_t (R - b) log p(y_t | y_<t, x)`;
//! its gradient is the REINFORCE estimator (with `b = 0`, exactly
//! `(1/T) sum_t R grad log p(y_t | y_<t, x)`). `R` is a plain number read
//! off a separate tape, so no gradient reaches the discriminator.

use crate::autodiff::sgd_step;
use crate::autodiff::{Tape, Var};
use crate::discriminator::{Discriminator, LabeledSummary};
use crate::error::{contract, Error, Result};
use crate::generator::{batch_mle_loss, sample_on_tape, GenVars, Generator};
use crate::rng::Prng;
use crate::scalar::Scalar;
use crate::text::Example;
use crate::training::config::{PgBaseline, TrainingConfig};

/// One sampled summary with its reward.
#[derive(Clone, Debug, PartialEq)]
pub struct PgSample<S> {
    /// Position of the example within its batch.
    pub example: usize,
    pub tokens: Vec<usize>,
    pub log_probs: Vec<S>,
    pub reward: S,
}

impl<S> PgSample<S> {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

/// Running value of the moving-average baseline.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct BaselineState {
    pub value: Option<f64>,
}

impl BaselineState {
    fn current(&self, cfg: PgBaseline, batch_mean: f64) -> f64 {
        match cfg {
            PgBaseline::None => 0.0,
            PgBaseline::MovingAverage { .. } => self.value.unwrap_or(batch_mean),
        }
    }

    fn update(&mut self, cfg: PgBaseline, batch_mean: f64) {
        if let PgBaseline::MovingAverage { decay } = cfg {
            let prev = self.value.unwrap_or(batch_mean);
            self.value = Some(decay * prev + (1.0 - decay) * batch_mean);
        }
    }
}

/// Reward of a generated summary: the discriminator's "original" probability.
pub fn reward<S: Scalar>(disc: &Discriminator<S>, ex: &Example, tokens: &[usize]) -> Result<S> {
    let s = LabeledSummary::from_ext_ids(tokens, ex.vocab_size, false)?;
    disc.probability(&s.ids)
}

/// Samples one summary per example and records the batch-mean surrogate
/// on `tape` using baseline value `baseline`.
pub fn pg_surrogate<S: Scalar>(
    tape: &mut Tape<S>,
    g: &GenVars,
    disc: &Discriminator<S>,
    batch: &[&Example],
    max_len: usize,
    baseline: impl FnOnce(f64) -> f64,
    rng: &mut Prng,
) -> Result<(Var, Vec<PgSample<S>>)> {
    if batch.is_empty() {
        return contract("policy gradient on an empty batch");
    }
    let mut samples = Vec::with_capacity(batch.len());
    let mut logs = Vec::with_capacity(batch.len());
    for (i, ex) in batch.iter().enumerate() {
        let (hyp, lp) = sample_on_tape(tape, g, ex, max_len, rng)?;
        let r = reward(disc, ex, &hyp.tokens)?;
        samples.push(PgSample {
            example: i,
            tokens: hyp.tokens,
            log_probs: hyp.step_log_probs,
            reward: r,
        });
        logs.push(lp);
    }
    let mean_reward = samples.iter().map(|s| s.reward.as_f64()).sum::<f64>() / samples.len() as f64;
    let b = S::lit(baseline(mean_reward));
    let mut terms = Vec::with_capacity(samples.len());
    for (s, lp) in samples.iter().zip(&logs) {
        let row = tape.concat_cols(lp)?;
        let total = tape.sum(row)?;
        let weight = (s.reward - b) / S::lit(s.len() as f64);
        let term = tape.scale(total, weight)?;
        terms.push(tape.reshape(term, &[1, 1])?);
    }
    let row = tape.concat_cols(&terms)?;
    Ok((tape.mean(row)?, samples))
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenStepReport<S> {
    /// Minimized objective `-w_pg * surrogate + w_ml * J_ml`.
    pub j: f64,
    pub j_ml: Option<f64>,
    pub j_pg: Option<f64>,
    pub mean_reward: Option<f64>,
    pub samples: Vec<PgSample<S>>,
}

fn finite(v: f64, context: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Diverged {
            context: context.to_string(),
            value: v,
        })
    }
}

/// Accumulates into `gen.params` the gradient of
/// `-w_pg * surrogate + w_ml * J_ml` without stepping. A zero weight skips
/// its term entirely (no sampling happens when `w_pg == 0`).
pub fn accumulate_generator_objective<S: Scalar>(
    gen: &mut Generator<S>,
    disc: &Discriminator<S>,
    batch: &[&Example],
    cfg: &TrainingConfig,
    w_pg: f64,
    w_ml: f64,
    baseline: &mut BaselineState,
    rng: &mut Prng,
) -> Result<GenStepReport<S>> {
    if w_pg == 0.0 && w_ml == 0.0 {
        return contract("generator objective with both weights zero");
    }
    let mut tape = Tape::new();
    let (g, bindings) = gen.bind(&mut tape)?;
    let mut report = GenStepReport {
        j: 0.0,
        j_ml: None,
        j_pg: None,
        mean_reward: None,
        samples: Vec::new(),
    };

    let pg_term = if w_pg != 0.0 {
        let mut mean = 0.0;
        let (surrogate, samples) = pg_surrogate(
            &mut tape,
            &g,
            disc,
            batch,
            cfg.max_tgt_len,
            |m| {
                mean = m;
                baseline.current(cfg.pg_baseline, m)
            },
            rng,
        )?;
        baseline.update(cfg.pg_baseline, mean);
        report.j_pg = Some(tape.item(surrogate).as_f64());
        report.mean_reward = Some(mean);
        report.samples = samples;
        Some(tape.scale(surrogate, -S::lit(w_pg))?)
    } else {
        None
    };
    let ml_term = if w_ml != 0.0 {
        let ml = batch_mle_loss(&mut tape, &g, batch)?;
        report.j_ml = Some(tape.item(ml).as_f64());
        Some(if w_ml == 1.0 { ml } else { tape.scale(ml, S::lit(w_ml))? })
    } else {
        None
    };
    let loss = match (pg_term, ml_term) {
        (Some(p), Some(m)) => tape.add(p, m)?,
        (Some(p), None) => p,
        (None, Some(m)) => m,
        (None, None) => unreachable!("checked above"),
    };
    report.j = finite(tape.item(loss).as_f64(), "generator objective")?;
    let grads = tape.backward(loss)?;
    tape.accumulate_into(&mut gen.params, &bindings, &grads);
    Ok(report)
}

/// Pure policy-gradient step: ascent on the expected reward.
pub fn pg_update<S: Scalar>(
    gen: &mut Generator<S>,
    disc: &Discriminator<S>,
    batch: &[&Example],
    cfg: &TrainingConfig,
    baseline: &mut BaselineState,
    rng: &mut Prng,
) -> Result<GenStepReport<S>> {
    let report = accumulate_generator_objective(gen, disc, batch, cfg, 1.0, 0.0, baseline, rng)?;
    sgd_step(&mut gen.params, S::lit(cfg.lr_g), cfg.clip_norm.map(S::lit))?;
    Ok(report)
}

/// One SGD step on `beta * J_pg + (1 - beta) * J_ml` over `batch`.
pub fn generator_adversarial_step<S: Scalar>(
    gen: &mut Generator<S>,
    disc: &Discriminator<S>,
    batch: &[&Example],
    cfg: &TrainingConfig,
    baseline: &mut BaselineState,
    rng: &mut Prng,
) -> Result<GenStepReport<S>> {
    let report = accumulate_generator_objective(gen, disc, batch, cfg, cfg.beta, 1.0 - cfg.beta, baseline, rng)?;
    sgd_step(&mut gen.params, S::lit(cfg.lr_g), cfg.clip_norm.map(S::lit))?;
    Ok(report)
}
