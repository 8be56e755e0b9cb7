use crate::autodiff::{sgd_step, Tape};
use crate::discriminator::{d_forward, d_loss, Discriminator, LabeledSummary};
use crate::error::{contract, Error, Result};
use crate::generator::{batch_mle_loss, Generator};
use crate::rng::Prng;
use crate::scalar::Scalar;
use crate::text::{Example, EOS};
use crate::training::batch::Batcher;
use crate::training::config::TrainingConfig;
use crate::training::log::{LogFields, Phase, TrainLog};
use crate::training::streams;

/// Human summary as the discriminator sees it: gold ids followed by EOS.
pub fn gold_summary(ex: &Example) -> Result<LabeledSummary> {
    let mut ids = ex.summary_ext_ids.clone();
    ids.push(EOS);
    LabeledSummary::from_ext_ids(&ids, ex.vocab_size, true)
}

pub fn generated_summary(ex: &Example, tokens: &[usize]) -> Result<LabeledSummary> {
    LabeledSummary::from_ext_ids(tokens, ex.vocab_size, false)
}

fn check_finite(v: f64, context: impl FnOnce() -> String) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Diverged {
            context: context(),
            value: v,
        })
    }
}

/// One SGD step of the generator on the mean MLE loss of `batch`.
pub fn mle_step<S: Scalar>(gen: &mut Generator<S>, batch: &[&Example], cfg: &TrainingConfig) -> Result<f64> {
    let mut tape = Tape::new();
    let (g, bindings) = gen.bind(&mut tape)?;
    let loss = batch_mle_loss(&mut tape, &g, batch)?;
    let value = check_finite(tape.item(loss).as_f64(), || "generator MLE loss".into())?;
    let grads = tape.backward(loss)?;
    tape.accumulate_into(&mut gen.params, &bindings, &grads);
    sgd_step(&mut gen.params, S::lit(cfg.lr_g), cfg.clip_norm.map(S::lit))?;
    Ok(value)
}

/// `cfg.pretrain_g_steps` MLE steps on shuffled minibatches of `train`.
pub fn pretrain_generator<S: Scalar>(
    gen: &mut Generator<S>,
    train: &[Example],
    cfg: &TrainingConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    if train.is_empty() {
        return contract("generator pre-training needs a nonempty corpus");
    }
    let mut log = TrainLog::new();
    let mut batcher = Batcher::new(train.len(), Prng::stream(cfg.seed, streams::PRETRAIN_G_BATCHES));
    for step in 0..cfg.pretrain_g_steps {
        let batch: Vec<&Example> = batcher
            .next_batch(cfg.batch_size)
            .into_iter()
            .map(|i| &train[i])
            .collect();
        let loss = mle_step(gen, &batch, cfg).map_err(|e| match e {
            Error::Diverged { value, .. } => Error::Diverged {
                context: format!("generator pre-training step {}", step + 1),
                value,
            },
            e => e,
        })?;
        log.push(
            Phase::PretrainG,
            LogFields {
                j_ml: Some(loss),
                ..Default::default()
            },
        );
    }
    Ok(log)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DStepReport {
    pub loss: f64,
    /// Accuracy on the step's own positives and negatives, before the update.
    pub accuracy: f64,
}

/// One discriminator step on the gold summaries of `batch` against one
/// fresh generator sample per example.
pub fn discriminator_step<S: Scalar>(
    disc: &mut Discriminator<S>,
    gen: &Generator<S>,
    batch: &[&Example],
    cfg: &TrainingConfig,
    rng: &mut Prng,
) -> Result<DStepReport> {
    let pos = batch.iter().map(|ex| gold_summary(ex)).collect::<Result<Vec<_>>>()?;
    let neg = batch
        .iter()
        .map(|ex| {
            let hyp = gen.sample_summary(ex, cfg.max_tgt_len, rng)?;
            generated_summary(ex, &hyp.tokens)
        })
        .collect::<Result<Vec<_>>>()?;
    labeled_step(disc, &pos, &neg, cfg)
}

/// One SGD step of the discriminator on fixed positive/negative sets.
pub fn labeled_step<S: Scalar>(
    disc: &mut Discriminator<S>,
    pos: &[LabeledSummary],
    neg: &[LabeledSummary],
    cfg: &TrainingConfig,
) -> Result<DStepReport> {
    let mut tape = Tape::new();
    let (d, bindings) = disc.bind(&mut tape)?;
    let loss = d_loss(&mut tape, &d, pos, neg)?;
    let value = check_finite(tape.item(loss).as_f64(), || "discriminator loss".into())?;
    let mut right = 0usize;
    for s in pos.iter().chain(neg) {
        let p = d_forward(&mut tape, &d, &s.ids)?;
        if (tape.item(p).as_f64() > 0.5) == s.original {
            right += 1;
        }
    }
    let grads = tape.backward(loss)?;
    tape.accumulate_into(&mut disc.params, &bindings, &grads);
    sgd_step(&mut disc.params, S::lit(cfg.lr_d), cfg.clip_norm.map(S::lit))?;
    Ok(DStepReport {
        loss: value,
        accuracy: right as f64 / (pos.len() + neg.len()) as f64,
    })
}

/// `cfg.pretrain_d_steps` discriminator steps with fresh negatives from `gen`.
pub fn pretrain_discriminator<S: Scalar>(
    disc: &mut Discriminator<S>,
    gen: &Generator<S>,
    train: &[Example],
    cfg: &TrainingConfig,
) -> Result<TrainLog> {
    cfg.validate()?;
    if train.is_empty() {
        return contract("discriminator pre-training needs a nonempty corpus");
    }
    let mut log = TrainLog::new();
    let mut batcher = Batcher::new(train.len(), Prng::stream(cfg.seed, streams::PRETRAIN_D_BATCHES));
    let mut rng = Prng::stream(cfg.seed, streams::PRETRAIN_D_SAMPLES);
    for _ in 0..cfg.pretrain_d_steps {
        let batch: Vec<&Example> = batcher
            .next_batch(cfg.d_batch_size)
            .into_iter()
            .map(|i| &train[i])
            .collect();
        let r = discriminator_step(disc, gen, &batch, cfg, &mut rng)?;
        log.push(
            Phase::PretrainD,
            LogFields {
                d_loss: Some(r.loss),
                d_acc: Some(r.accuracy),
                ..Default::default()
            },
        );
    }
    Ok(log)
}
