//! Synthetic "salient token" summarization task.
//!
//! Content vocabulary `C = w000 .. w{N-1}`; the first `salient` tokens
//! form the salient set `S`; the first `synonyms` of those rewrite to
//! target-only tokens `t000 ..` in the summary. A source is filler drawn
//! from `C \ S` with `k` distinct salient tokens planted at distinct
//! random positions; its summary lists those salient tokens in source
//! order, each replaced by its synonym when it has one.
//!
//! Per example, with the [`Prng`] draws in exactly this order:
//! 1. `len = range_inclusive(src_len_min, src_len_max)`
//! 2. `k = range_inclusive(salient_min, salient_max)`
//! 3. salient picks: partial Fisher-Yates over `0..salient`; for
//!    `j in 0..k`, swap slot `j` with `j + below(salient - j)`
//! 4. positions: the same partial Fisher-Yates over `0..len`
//! 5. filler: for each position in order that is not planted,
//!    `C[salient + below(N - salient)]`
//!
//! The `j`-th salient pick goes to the `j`-th drawn position.

use crate::error::{contract, Result};
use crate::rng::Prng;
use crate::text::corpus::{Corpus, Split, TextPair};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub content_size: usize,
    pub salient: usize,
    pub synonyms: usize,
    pub src_len_min: usize,
    pub src_len_max: usize,
    pub salient_min: usize,
    pub salient_max: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            content_size: 200,
            salient: 20,
            synonyms: 10,
            src_len_min: 20,
            src_len_max: 40,
            salient_min: 3,
            salient_max: 6,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.salient >= 1
            && self.salient < self.content_size
            && self.synonyms <= self.salient
            && self.src_len_min >= 1
            && self.src_len_min <= self.src_len_max
            && self.salient_min >= 1
            && self.salient_min <= self.salient_max
            && self.salient_max <= self.salient
            && self.salient_max <= self.src_len_min;
        if ok {
            Ok(())
        } else {
            contract(format!("invalid synthetic task ranges: {self:?}"))
        }
    }

    pub fn content_token(&self, i: usize) -> String {
        format!("w{i:03}")
    }

    pub fn synonym_token(&self, i: usize) -> String {
        format!("t{i:03}")
    }

    /// Summary token for salient index `i`.
    pub fn target_token(&self, i: usize) -> String {
        if i < self.synonyms {
            self.synonym_token(i)
        } else {
            self.content_token(i)
        }
    }

    /// Salient index of a content token, if it is salient.
    pub fn salient_index(&self, token: &str) -> Option<usize> {
        let i: usize = token.strip_prefix('w')?.parse().ok()?;
        (i < self.salient && *token == self.content_token(i)).then_some(i)
    }
}

fn partial_shuffle(rng: &mut Prng, n: usize, k: usize) -> Vec<usize> {
    let mut slots: Vec<usize> = (0..n).collect();
    for j in 0..k {
        let r = j + rng.below(n - j);
        slots.swap(j, r);
    }
    slots.truncate(k);
    slots
}

pub fn make_synthetic_pair(rng: &mut Prng, spec: &SyntheticSpec) -> TextPair {
    let len = rng.range_inclusive(spec.src_len_min, spec.src_len_max);
    let k = rng.range_inclusive(spec.salient_min, spec.salient_max);
    let picks = partial_shuffle(rng, spec.salient, k);
    let positions = partial_shuffle(rng, len, k);
    let mut planted: Vec<Option<usize>> = vec![None; len];
    for (&s, &p) in picks.iter().zip(&positions) {
        planted[p] = Some(s);
    }
    let mut source = Vec::with_capacity(len);
    let mut summary = Vec::with_capacity(k);
    for slot in &planted {
        match slot {
            Some(s) => {
                source.push(spec.content_token(*s));
                summary.push(spec.target_token(*s));
            }
            None => {
                let f = spec.salient + rng.below(spec.content_size - spec.salient);
                source.push(spec.content_token(f));
            }
        }
    }
    TextPair { source, summary }
}

pub fn make_synthetic(seed: u64, n_examples: usize, spec: &SyntheticSpec, split: Split) -> Result<Corpus> {
    spec.validate()?;
    if n_examples == 0 {
        return contract("synthetic corpus needs at least one example");
    }
    let mut rng = Prng::new(seed);
    let pairs = (0..n_examples).map(|_| make_synthetic_pair(&mut rng, spec)).collect();
    Corpus::new(split, pairs)
}

/// Train, valid and test corpora of the given sizes. Split `i` (in
/// [`Split::ALL`] order) is generated from seed
/// `Prng::stream(seed, 100 + i).next_u64()`, so the splits are
/// independent and adding examples to one never changes another.
pub fn make_synthetic_splits(seed: u64, sizes: [usize; 3], spec: &SyntheticSpec) -> Result<[Corpus; 3]> {
    let make = |i: usize| {
        let s = Prng::stream(seed, 100 + i as u64).next_u64();
        make_synthetic(s, sizes[i], spec, Split::ALL[i])
    };
    Ok([make(0)?, make(1)?, make(2)?])
}
