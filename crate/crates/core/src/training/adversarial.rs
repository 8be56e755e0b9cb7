use rayon::prelude::*;

use crate::discriminator::Discriminator;
use crate::error::{contract, Error, Result};
use crate::evaluation::{evaluate_corpus, EvalReport};
use crate::generator::Generator;
use crate::rng::Prng;
use crate::scalar::Scalar;
use crate::text::{Example, Vocabulary};
use crate::training::batch::Batcher;
use crate::training::config::TrainingConfig;
use crate::training::log::{LogFields, Phase, TrainLog};
use crate::training::pg::{generator_adversarial_step, BaselineState};
use crate::training::pretrain::discriminator_step;
use crate::training::streams;

/// Greedy-decodes `examples` (the first `limit`, or all when `limit` is 0)
/// and scores them against their reference summaries.
pub fn validation_rouge<S: Scalar>(
    gen: &Generator<S>,
    examples: &[Example],
    vocab: &Vocabulary,
    max_len: usize,
    limit: usize,
) -> Result<EvalReport> {
    let take = if limit == 0 {
        examples.len()
    } else {
        limit.min(examples.len())
    };
    if take == 0 {
        return contract("validation set is empty");
    }
    let hyps = examples[..take]
        .par_iter()
        .map(|ex| {
            let h = gen.greedy_decode(ex, max_len)?;
            Ok(ex.decode(h.content(), vocab))
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<Vec<String>> = examples[..take].iter().map(|ex| ex.summary_tokens.clone()).collect();
    evaluate_corpus("validation", &hyps, &refs)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundScore {
    pub round: usize,
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
}

impl RoundScore {
    fn from_report(round: usize, r: &EvalReport) -> Self {
        RoundScore {
            round,
            rouge1: r.rouge1,
            rouge2: r.rouge2,
            rouge_l: r.rouge_l,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AdversarialOutcome<S> {
    /// Generator after the round with the highest validation ROUGE-1
    /// (earliest on ties); the input generator when there are no rounds.
    pub best: Generator<S>,
    pub best_score: RoundScore,
    /// Validation scores of the input generator (round 0) and every round.
    pub scores: Vec<RoundScore>,
    pub log: TrainLog,
}

pub type CheckpointHook<'a, S> = dyn FnMut(usize, &Generator<S>, &Discriminator<S>) -> Result<()> + 'a;

/// Alternates `g_steps` generator steps on `beta * J_pg + (1 - beta) * J_ml`
/// with `d_steps` discriminator steps on freshly sampled negatives, for
/// `cfg.rounds` rounds, scoring validation ROUGE after every round.
pub fn adversarial_loop<S: Scalar>(
    gen: &mut Generator<S>,
    disc: &mut Discriminator<S>,
    train: &[Example],
    valid: &[Example],
    vocab: &Vocabulary,
    cfg: &TrainingConfig,
    mut on_checkpoint: Option<&mut CheckpointHook<'_, S>>,
) -> Result<AdversarialOutcome<S>> {
    cfg.validate()?;
    if train.is_empty() {
        return contract("adversarial training needs a nonempty corpus");
    }
    let mut log = TrainLog::new();
    let eval = |gen: &Generator<S>, round: usize, log: &mut TrainLog| -> Result<RoundScore> {
        let r = validation_rouge(gen, valid, vocab, cfg.max_tgt_len, cfg.valid_eval_size)?;
        log.push(
            Phase::Eval,
            LogFields {
                rouge1: Some(r.rouge1),
                rouge2: Some(r.rouge2),
                rouge_l: Some(r.rouge_l),
                ..Default::default()
            },
        );
        Ok(RoundScore::from_report(round, &r))
    };

    let initial = eval(gen, 0, &mut log)?;
    let mut scores = vec![initial];
    let mut best = gen.clone();
    let mut best_score = initial;
    let mut have_best = false;

    let mut g_batches = Batcher::new(train.len(), Prng::stream(cfg.seed, streams::ADV_G_BATCHES));
    let mut d_batches = Batcher::new(train.len(), Prng::stream(cfg.seed, streams::ADV_D_BATCHES));
    let mut g_rng = Prng::stream(cfg.seed, streams::ADV_G_SAMPLES);
    let mut d_rng = Prng::stream(cfg.seed, streams::ADV_D_SAMPLES);
    let mut baseline = BaselineState::default();

    for round in 1..=cfg.rounds {
        let diverged = |e: Error, what: &str| match e {
            Error::Diverged { value, .. } => Error::Diverged {
                context: format!("adversarial round {round}, {what}"),
                value,
            },
            e => e,
        };
        for _ in 0..cfg.g_steps {
            let batch: Vec<&Example> = g_batches
                .next_batch(cfg.batch_size)
                .into_iter()
                .map(|i| &train[i])
                .collect();
            let r = generator_adversarial_step(gen, disc, &batch, cfg, &mut baseline, &mut g_rng)
                .map_err(|e| diverged(e, "generator step"))?;
            log.push(
                Phase::AdversarialG,
                LogFields {
                    j_ml: r.j_ml,
                    j_pg: r.j_pg,
                    mean_reward: r.mean_reward,
                    ..Default::default()
                },
            );
        }
        for _ in 0..cfg.d_steps {
            let batch: Vec<&Example> = d_batches
                .next_batch(cfg.d_batch_size)
                .into_iter()
                .map(|i| &train[i])
                .collect();
            let r = discriminator_step(disc, gen, &batch, cfg, &mut d_rng)
                .map_err(|e| diverged(e, "discriminator step"))?;
            log.push(
                Phase::AdversarialD,
                LogFields {
                    d_loss: Some(r.loss),
                    d_acc: Some(r.accuracy),
                    ..Default::default()
                },
            );
        }
        let score = eval(gen, round, &mut log)?;
        scores.push(score);
        if !have_best || score.rouge1 > best_score.rouge1 {
            best = gen.clone();
            best_score = score;
            have_best = true;
        }
        if cfg.checkpoint_interval > 0 && round % cfg.checkpoint_interval == 0 {
            if let Some(hook) = on_checkpoint.as_mut() {
                hook(round, gen, disc)?;
            }
        }
    }
    Ok(AdversarialOutcome {
        best,
        best_score,
        scores,
        log,
    })
}
