//! Forward pass of the pointer-generator.
//!
//! Row-vector convention: activations are `[1, k]`, weights `[in, out]`.
//! LSTM gates are packed `[i | f | g | o]` along the output axis and the
//! cell input is `[x ; h]`:
//!
//! ```text
//! z = [x ; h] W + b,  i,f,o = sigmoid(.), g = tanh(.)
//! c' = f * c + i * g,  h' = o * tanh(c')
//! ```
//!
//! Per decoder step `t`, with `s_t` the decoder hidden state after
//! consuming the previous token embedding `x_t`:
//!
//! ```text
//! e_ti    = v . tanh(h_i W_h + s_t W_s + b_attn)
//! a_t     = softmax(e_t)
//! c_t     = sum_i a_ti h_i
//! P_vocab = softmax(([s_t ; c_t] V + b) V' + b')
//! p_gen   = sigmoid(c_t w_c + s_t w_s + x_t w_x + b_ptr)
//! P_final(w) = p_gen P_vocab(w) + (1 - p_gen) sum_{i : src_i = w} a_ti
//! ```
//!
//! The decoder starts from `tanh([h_fw_n ; h_bw_1] W + b)` for both its
//! hidden and cell state, each with its own bridge weights.

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{contract, Result};
use crate::generator::params::GenVars;
use crate::scalar::Scalar;
use crate::text::{Example, BOS, EOS};

#[derive(Clone, Copy, Debug)]
pub struct LstmState {
    pub h: Var,
    pub c: Var,
}

#[derive(Clone, Debug)]
pub struct EncoderStates {
    /// `[n, 2 * d_hidden]`, forward half then backward half per row.
    pub states: Var,
    /// `states W_h`, shared by every attention step.
    pub projected: Var,
    pub forward_final: LstmState,
    pub backward_final: LstmState,
    pub len: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct DecoderStep {
    pub state: LstmState,
    /// `[1, n]`
    pub attention: Var,
    /// `[1, 2 * d_hidden]`
    pub context: Var,
    /// `[1, vocab_size]`
    pub p_vocab: Var,
    /// `[1, 1]`
    pub p_gen: Var,
    /// `[1, ext_vocab_size]`
    pub p_final: Var,
}

pub(crate) fn lstm_cell<S: Scalar>(
    tape: &mut Tape<S>,
    x: Var,
    prev: LstmState,
    w: Var,
    b: Var,
    d: usize,
) -> Result<LstmState> {
    let xh = tape.concat_cols(&[x, prev.h])?;
    let z = tape.matmul(xh, w)?;
    let z = tape.add(z, b)?;
    let i = tape.slice(z, 0, d)?;
    let i = tape.sigmoid(i)?;
    let f = tape.slice(z, d, d)?;
    let f = tape.sigmoid(f)?;
    let g = tape.slice(z, 2 * d, d)?;
    let g = tape.tanh(g)?;
    let o = tape.slice(z, 3 * d, d)?;
    let o = tape.sigmoid(o)?;
    let fc = tape.mul(f, prev.c)?;
    let ig = tape.mul(i, g)?;
    let c = tape.add(fc, ig)?;
    let tc = tape.tanh(c)?;
    let h = tape.mul(o, tc)?;
    Ok(LstmState { h, c })
}

fn zero_state<S: Scalar>(tape: &mut Tape<S>, d: usize) -> LstmState {
    let h = tape.constant(Tensor::zeros(&[1, d]));
    let c = tape.constant(Tensor::zeros(&[1, d]));
    LstmState { h, c }
}

fn affine_layer<S: Scalar>(tape: &mut Tape<S>, x: Var, w: Var, b: Var) -> Result<Var> {
    let y = tape.matmul(x, w)?;
    tape.add(y, b)
}

/// Runs the bidirectional encoder over the fixed-vocabulary source ids.
pub fn encode<S: Scalar>(tape: &mut Tape<S>, g: &GenVars, ex: &Example) -> Result<EncoderStates> {
    let n = ex.source_ids.len();
    if n == 0 {
        return contract("encode: empty source");
    }
    if let Some(&bad) = ex.source_ids.iter().find(|&&i| i >= g.dims.vocab_size) {
        return contract(format!(
            "encode: source id {bad} is not a fixed-vocabulary id (size {})",
            g.dims.vocab_size
        ));
    }
    let d = g.dims.d_hidden;
    let embedded = tape.embedding(g.emb, &ex.source_ids)?;
    let xs = (0..n).map(|i| tape.rows(embedded, i, 1)).collect::<Result<Vec<_>>>()?;

    let mut state = zero_state(tape, d);
    let mut fw = Vec::with_capacity(n);
    for &x in &xs {
        state = lstm_cell(tape, x, state, g.enc_fw_w, g.enc_fw_b, d)?;
        fw.push(state.h);
    }
    let forward_final = state;

    let mut state = zero_state(tape, d);
    let mut bw = vec![state.h; n];
    for i in (0..n).rev() {
        state = lstm_cell(tape, xs[i], state, g.enc_bw_w, g.enc_bw_b, d)?;
        bw[i] = state.h;
    }
    let backward_final = state;

    let fw = tape.concat_rows(&fw)?;
    let bw = tape.concat_rows(&bw)?;
    let states = tape.concat_cols(&[fw, bw])?;
    let projected = tape.matmul(states, g.attn_wh)?;
    Ok(EncoderStates {
        states,
        projected,
        forward_final,
        backward_final,
        len: n,
    })
}

/// Decoder state before the first step.
pub fn initial_state<S: Scalar>(tape: &mut Tape<S>, g: &GenVars, enc: &EncoderStates) -> Result<LstmState> {
    let hs = tape.concat_cols(&[enc.forward_final.h, enc.backward_final.h])?;
    let cs = tape.concat_cols(&[enc.forward_final.c, enc.backward_final.c])?;
    let h = affine_layer(tape, hs, g.bridge_h_w, g.bridge_h_b)?;
    let h = tape.tanh(h)?;
    let c = affine_layer(tape, cs, g.bridge_c_w, g.bridge_c_b)?;
    let c = tape.tanh(c)?;
    Ok(LstmState { h, c })
}

/// One attention decoder step consuming `prev_token` (an extended id).
pub fn decode_step<S: Scalar>(
    tape: &mut Tape<S>,
    g: &GenVars,
    enc: &EncoderStates,
    ex: &Example,
    prev: LstmState,
    prev_token: usize,
) -> Result<DecoderStep> {
    let ext = ex.ext_vocab_size();
    if prev_token >= ext {
        return contract(format!(
            "decode_step: token {prev_token} outside extended vocabulary of {ext}"
        ));
    }
    if ex.source_ext_ids.len() != enc.len {
        return contract("decode_step: encoder states do not match the example");
    }
    let x = tape.embedding(g.emb, &[ex.to_fixed(prev_token)])?;
    let state = lstm_cell(tape, x, prev, g.dec_w, g.dec_b, g.dims.d_dec)?;
    let s = state.h;

    let query = affine_layer(tape, s, g.attn_ws, g.attn_b)?;
    let feats = tape.add(enc.projected, query)?;
    let feats = tape.tanh(feats)?;
    let scores = tape.matmul(feats, g.attn_v)?;
    let scores = tape.reshape(scores, &[1, enc.len])?;
    let attention = tape.softmax(scores)?;
    let context = tape.matmul(attention, enc.states)?;

    let sc = tape.concat_cols(&[s, context])?;
    let hidden = affine_layer(tape, sc, g.out_v, g.out_b)?;
    let logits = affine_layer(tape, hidden, g.out_v2, g.out_b2)?;
    let p_vocab = tape.softmax(logits)?;

    let from_c = tape.matmul(context, g.ptr_wc)?;
    let from_s = tape.matmul(s, g.ptr_ws)?;
    let from_x = tape.matmul(x, g.ptr_wx)?;
    let pre = tape.add(from_c, from_s)?;
    let pre = tape.add(pre, from_x)?;
    let pre = tape.add(pre, g.ptr_b)?;
    let p_gen = tape.sigmoid(pre)?;

    let p_final = mix_pointer(tape, p_vocab, attention, p_gen, &ex.source_ext_ids, ext)?;
    Ok(DecoderStep {
        state,
        attention,
        context,
        p_vocab,
        p_gen,
        p_final,
    })
}

/// `p_gen * [P_vocab, 0...] + (1 - p_gen) * scatter(attention, source ids)`
/// over an extended vocabulary of `ext_size` ids.
pub fn mix_pointer<S: Scalar>(
    tape: &mut Tape<S>,
    p_vocab: Var,
    attention: Var,
    p_gen: Var,
    source_ext_ids: &[usize],
    ext_size: usize,
) -> Result<Var> {
    let v = tape.value(p_vocab).len();
    if ext_size < v {
        return contract(format!(
            "pointer mixture: extended size {ext_size} below vocabulary {v}"
        ));
    }
    let generated = tape.mul(p_vocab, p_gen)?;
    let generated = if ext_size > v {
        let pad = tape.constant(Tensor::zeros(&[1, ext_size - v]));
        tape.concat_cols(&[generated, pad])?
    } else {
        generated
    };
    let copy = tape.scatter_add(attention, source_ext_ids, ext_size)?;
    let keep = tape.affine(p_gen, -S::one(), S::one())?;
    let copied = tape.mul(copy, keep)?;
    tape.add(generated, copied)
}

/// Teacher-forced `log P_final(token)` for each output token, feeding
/// `BOS, outputs[0], ...` as decoder inputs.
pub fn sequence_log_probs<S: Scalar>(
    tape: &mut Tape<S>,
    g: &GenVars,
    ex: &Example,
    outputs: &[usize],
) -> Result<Vec<Var>> {
    let enc = encode(tape, g, ex)?;
    let mut state = initial_state(tape, g, &enc)?;
    let mut prev = BOS;
    let mut out = Vec::with_capacity(outputs.len());
    for &tok in outputs {
        let step = decode_step(tape, g, &enc, ex, state, prev)?;
        if tok >= ex.ext_vocab_size() {
            return contract(format!("target {tok} outside extended vocabulary"));
        }
        let p = tape.gather(step.p_final, &[tok])?;
        out.push(tape.log(p)?);
        state = step.state;
        prev = tok;
    }
    Ok(out)
}

/// Mean over target steps of `-log P_final(target)`; targets are the gold
/// summary followed by EOS.
pub fn mle_loss<S: Scalar>(tape: &mut Tape<S>, g: &GenVars, ex: &Example) -> Result<Var> {
    if ex.summary_ext_ids.is_empty() {
        return contract("mle_loss: empty summary");
    }
    let mut targets = ex.summary_ext_ids.clone();
    targets.push(EOS);
    let logs = sequence_log_probs(tape, g, ex, &targets)?;
    let row = tape.concat_cols(&logs)?;
    let mean = tape.mean(row)?;
    tape.scale(mean, -S::one())
}

/// Mean of [`mle_loss`] over a batch.
pub fn batch_mle_loss<S: Scalar>(tape: &mut Tape<S>, g: &GenVars, batch: &[&Example]) -> Result<Var> {
    if batch.is_empty() {
        return contract("mle_loss: empty batch");
    }
    let losses = batch
        .iter()
        .map(|ex| {
            let l = mle_loss(tape, g, ex)?;
            tape.reshape(l, &[1, 1])
        })
        .collect::<Result<Vec<_>>>()?;
    let row = tape.concat_cols(&losses)?;
    tape.mean(row)
}
