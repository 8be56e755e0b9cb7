use std::collections::HashMap;

use crate::error::{contract, Result};
use crate::text::vocab::{Vocabulary, UNK};

/// Encoded (source, summary) pair with per-example extended-vocabulary
/// ids for out-of-vocabulary source tokens.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub source_tokens: Vec<String>,
    pub summary_tokens: Vec<String>,
    /// Fixed-vocabulary ids, UNK for OOV.
    pub source_ids: Vec<usize>,
    /// OOV source tokens get `vocab.len()`, `vocab.len() + 1`, ... in
    /// first-occurrence order.
    pub source_ext_ids: Vec<usize>,
    pub summary_ext_ids: Vec<usize>,
    /// Distinct OOV source tokens; entry `i` has ext id `vocab_size + i`.
    pub oov_tokens: Vec<String>,
    pub vocab_size: usize,
}

pub fn encode_example(src: &[String], tgt: &[String], vocab: &Vocabulary) -> Result<Example> {
    if src.is_empty() || tgt.is_empty() {
        return contract("example source and summary must both be nonempty");
    }
    let v = vocab.len();
    let mut oov: HashMap<&str, usize> = HashMap::new();
    let mut oov_tokens = Vec::new();
    let mut source_ids = Vec::with_capacity(src.len());
    let mut source_ext_ids = Vec::with_capacity(src.len());
    for tok in src {
        match vocab.id(tok) {
            Some(id) => {
                source_ids.push(id);
                source_ext_ids.push(id);
            }
            None => {
                let ext = *oov.entry(tok.as_str()).or_insert_with(|| {
                    oov_tokens.push(tok.clone());
                    v + oov_tokens.len() - 1
                });
                source_ids.push(UNK);
                source_ext_ids.push(ext);
            }
        }
    }
    let summary_ext_ids = tgt
        .iter()
        .map(|t| vocab.id(t).or_else(|| oov.get(t.as_str()).copied()).unwrap_or(UNK))
        .collect();
    Ok(Example {
        source_tokens: src.to_vec(),
        summary_tokens: tgt.to_vec(),
        source_ids,
        source_ext_ids,
        summary_ext_ids,
        oov_tokens,
        vocab_size: v,
    })
}

impl Example {
    /// Fixed vocabulary plus this example's OOV source tokens.
    pub fn ext_vocab_size(&self) -> usize {
        self.vocab_size + self.oov_tokens.len()
    }

    /// Maps an extended id to a fixed id, sending copied OOV ids to UNK.
    pub fn to_fixed(&self, ext_id: usize) -> usize {
        if ext_id < self.vocab_size {
            ext_id
        } else {
            UNK
        }
    }

    pub fn token<'a>(&'a self, ext_id: usize, vocab: &'a Vocabulary) -> &'a str {
        match vocab.token(ext_id) {
            Some(t) => t,
            None => self
                .oov_tokens
                .get(ext_id - self.vocab_size)
                .map(String::as_str)
                .unwrap_or("<unk>"),
        }
    }

    pub fn decode(&self, ext_ids: &[usize], vocab: &Vocabulary) -> Vec<String> {
        ext_ids.iter().map(|&i| self.token(i, vocab).to_string()).collect()
    }
}
