use crate::autodiff::{Tape, Var};
use crate::error::{contract, Result};
use crate::generator::model::{decode_step, encode, initial_state, EncoderStates, LstmState};
use crate::generator::params::{GenVars, Generator};
use crate::rng::Prng;
use crate::scalar::Scalar;
use crate::text::{Example, BOS, EOS};

/// Extended-id summary with per-step log-probabilities. `tokens` keeps
/// the terminating EOS when one was produced.
#[derive(Clone, Debug, PartialEq)]
pub struct SummaryHypothesis<S> {
    pub tokens: Vec<usize>,
    pub step_log_probs: Vec<S>,
    pub log_prob: S,
}

impl<S: Scalar> SummaryHypothesis<S> {
    fn empty() -> Self {
        SummaryHypothesis {
            tokens: Vec::new(),
            step_log_probs: Vec::new(),
            log_prob: S::zero(),
        }
    }

    fn push(&mut self, token: usize, lp: S) {
        self.tokens.push(token);
        self.step_log_probs.push(lp);
        self.log_prob = self.log_prob + lp;
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Log-probability per token.
    pub fn normalized_score(&self) -> S {
        self.log_prob / S::lit(self.tokens.len().max(1) as f64)
    }

    pub fn ended(&self) -> bool {
        self.tokens.last() == Some(&EOS)
    }

    /// Tokens with the terminating EOS removed.
    pub fn content(&self) -> &[usize] {
        if self.ended() {
            &self.tokens[..self.tokens.len() - 1]
        } else {
            &self.tokens
        }
    }
}

fn log_of<S: Scalar>(p: S) -> S {
    p.max(S::min_positive_value()).ln()
}

/// Lowest id among the maxima.
fn argmax<S: Scalar>(p: &[S]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

fn check_max_len(max_len: usize) -> Result<()> {
    if max_len == 0 {
        return contract("decoding needs max_len >= 1");
    }
    Ok(())
}

/// Samples a summary on `tape`, returning the hypothesis and the tape
/// node `log p(y_t | y_<t, x)` of every step.
pub fn sample_on_tape<S: Scalar>(
    tape: &mut Tape<S>,
    g: &GenVars,
    ex: &Example,
    max_len: usize,
    rng: &mut Prng,
) -> Result<(SummaryHypothesis<S>, Vec<Var>)> {
    check_max_len(max_len)?;
    let enc = encode(tape, g, ex)?;
    let mut state = initial_state(tape, g, &enc)?;
    let mut prev = BOS;
    let mut hyp = SummaryHypothesis::empty();
    let mut logs = Vec::with_capacity(max_len);
    for _ in 0..max_len {
        let step = decode_step(tape, g, &enc, ex, state, prev)?;
        let weights: Vec<f64> = tape.value(step.p_final).iter().map(|p| p.as_f64().max(0.0)).collect();
        let tok = rng.categorical(&weights);
        let p = tape.gather(step.p_final, &[tok])?;
        let lp = tape.log(p)?;
        hyp.push(tok, tape.item(lp));
        logs.push(lp);
        state = step.state;
        prev = tok;
        if tok == EOS {
            break;
        }
    }
    Ok((hyp, logs))
}

fn greedy_on_tape<S: Scalar>(
    tape: &mut Tape<S>,
    g: &GenVars,
    enc: &EncoderStates,
    ex: &Example,
    start: LstmState,
    max_len: usize,
) -> Result<SummaryHypothesis<S>> {
    let mut state = start;
    let mut prev = BOS;
    let mut hyp = SummaryHypothesis::empty();
    for _ in 0..max_len {
        let step = decode_step(tape, g, enc, ex, state, prev)?;
        let p = tape.value(step.p_final);
        let tok = argmax(p);
        hyp.push(tok, log_of(p[tok]));
        state = step.state;
        prev = tok;
        if tok == EOS {
            break;
        }
    }
    Ok(hyp)
}

struct Beam<S> {
    hyp: SummaryHypothesis<S>,
    state: LstmState,
}

fn beam_on_tape<S: Scalar>(
    tape: &mut Tape<S>,
    g: &GenVars,
    ex: &Example,
    max_len: usize,
    width: usize,
) -> Result<SummaryHypothesis<S>> {
    let enc = encode(tape, g, ex)?;
    let start = initial_state(tape, g, &enc)?;
    // The greedy path competes in the final selection, so the result
    // never scores below greedy.
    let mut finished = vec![greedy_on_tape(tape, g, &enc, ex, start, max_len)?];
    let mut live = vec![Beam {
        hyp: SummaryHypothesis::empty(),
        state: start,
    }];
    while !live.is_empty() {
        let mut candidates: Vec<(S, usize, usize, S, LstmState)> = Vec::new();
        for (bi, beam) in live.iter().enumerate() {
            let prev = beam.hyp.tokens.last().copied().unwrap_or(BOS);
            let step = decode_step(tape, g, &enc, ex, beam.state, prev)?;
            for (tok, &p) in tape.value(step.p_final).iter().enumerate() {
                let lp = log_of(p);
                candidates.push((beam.hyp.log_prob + lp, bi, tok, lp, step.state));
            }
        }
        // Stable: equal scores keep (beam, token) ascending order.
        candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
        let mut next = Vec::with_capacity(width);
        for (_, bi, tok, lp, state) in candidates.into_iter().take(width) {
            let mut hyp = live[bi].hyp.clone();
            hyp.push(tok, lp);
            if tok == EOS || hyp.len() >= max_len {
                finished.push(hyp);
            } else {
                next.push(Beam { hyp, state });
            }
        }
        live = next;
    }
    let mut best = 0;
    for (i, h) in finished.iter().enumerate() {
        if h.normalized_score() > finished[best].normalized_score() {
            best = i;
        }
    }
    Ok(finished.swap_remove(best))
}

impl<S: Scalar> Generator<S> {
    /// Draws each token from `P_final` until EOS or `max_len` tokens.
    pub fn sample_summary(&self, ex: &Example, max_len: usize, rng: &mut Prng) -> Result<SummaryHypothesis<S>> {
        let mut tape = Tape::new();
        let (g, _) = self.bind(&mut tape)?;
        Ok(sample_on_tape(&mut tape, &g, ex, max_len, rng)?.0)
    }

    /// Argmax decoding, lowest id on ties.
    pub fn greedy_decode(&self, ex: &Example, max_len: usize) -> Result<SummaryHypothesis<S>> {
        check_max_len(max_len)?;
        let mut tape = Tape::new();
        let (g, _) = self.bind(&mut tape)?;
        let enc = encode(&mut tape, &g, ex)?;
        let start = initial_state(&mut tape, &g, &enc)?;
        greedy_on_tape(&mut tape, &g, &enc, ex, start, max_len)
    }

    /// Beam search keeping `width` partial hypotheses ranked by total
    /// log-probability; the finished hypothesis with the best
    /// log-probability per token wins.
    pub fn beam_decode(&self, ex: &Example, max_len: usize, width: usize) -> Result<SummaryHypothesis<S>> {
        check_max_len(max_len)?;
        if width == 0 {
            return contract("beam width must be at least 1");
        }
        let mut tape = Tape::new();
        let (g, _) = self.bind(&mut tape)?;
        beam_on_tape(&mut tape, &g, ex, max_len, width)
    }

    /// Teacher-forced log-probability of each token of `outputs`.
    pub fn score_sequence(&self, ex: &Example, outputs: &[usize]) -> Result<Vec<S>> {
        let mut tape = Tape::new();
        let (g, _) = self.bind(&mut tape)?;
        let logs = crate::generator::model::sequence_log_probs(&mut tape, &g, ex, outputs)?;
        Ok(logs.iter().map(|&v| tape.item(v)).collect())
    }

    /// Value of the per-example MLE loss without keeping gradients.
    pub fn mle_loss_value(&self, ex: &Example) -> Result<S> {
        let mut tape = Tape::new();
        let (g, _) = self.bind(&mut tape)?;
        let l = crate::generator::model::mle_loss(&mut tape, &g, ex)?;
        Ok(tape.item(l))
    }
}
