#![allow(dead_code)]

use advsum::autodiff::{Tape, Tensor, Var};
use advsum::generator::GeneratorDims;
use advsum::text::{encode_example, Example, Vocabulary};
use advsum::{Prng, Result};

pub fn toks(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

pub fn random_tensor(shape: &[usize], rng: &mut Prng) -> Tensor<f64> {
    Tensor::uniform(shape, -2.0, 2.0, rng)
}

/// `sum(x * w)` for a random constant `w`, so every output element gets a
/// distinct upstream gradient.
pub fn weighted_sum(tape: &mut Tape<f64>, x: Var, rng: &mut Prng) -> Result<Var> {
    let w = random_tensor(tape.shape(x), rng);
    let w = tape.constant(w);
    let p = tape.mul(x, w)?;
    tape.sum(p)
}

/// Vocabulary of the four reserved tokens plus `words`, in that order.
pub fn vocab_of(words: &[&str]) -> Vocabulary {
    let seq: Vec<String> = words.iter().map(|w| w.to_string()).collect();
    Vocabulary::build([seq.as_slice()], 4 + words.len()).unwrap()
}

pub fn example(src: &str, tgt: &str, vocab: &Vocabulary) -> Example {
    encode_example(&toks(src), &toks(tgt), vocab).unwrap()
}

/// Random example over a vocabulary of `w0..w{k}` with some OOV source tokens.
pub fn random_example(vocab: &Vocabulary, n: usize, m: usize, rng: &mut Prng) -> Example {
    let fixed = vocab.len() - 4;
    let pick = |rng: &mut Prng| {
        if rng.below(5) == 0 {
            format!("oov{}", rng.below(3))
        } else {
            format!("w{}", rng.below(fixed))
        }
    };
    let src: Vec<String> = (0..n).map(|_| pick(rng)).collect();
    let tgt: Vec<String> = (0..m)
        .map(|_| {
            if rng.below(2) == 0 {
                src[rng.below(n)].clone()
            } else {
                pick(rng)
            }
        })
        .collect();
    encode_example(&src, &tgt, vocab).unwrap()
}

pub fn numbered_vocab(k: usize) -> Vocabulary {
    let words: Vec<String> = (0..k).map(|i| format!("w{i}")).collect();
    let refs: Vec<&str> = words.iter().map(String::as_str).collect();
    vocab_of(&refs)
}

pub fn small_dims(vocab_size: usize) -> GeneratorDims {
    GeneratorDims {
        vocab_size,
        d_emb: 8,
        d_hidden: 8,
        d_dec: 16,
        d_att: 8,
        d_out: 8,
    }
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / n;
    (m, v.sqrt())
}
