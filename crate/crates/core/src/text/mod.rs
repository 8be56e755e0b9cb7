//! Tokenization, vocabularies, extended-vocabulary encoding and corpora.

pub mod corpus;
pub mod example;
pub mod synthetic;
pub mod tokenize;
pub mod vocab;

pub use corpus::{Corpus, Split, TextPair};
pub use example::{encode_example, Example};
pub use synthetic::{make_synthetic, make_synthetic_splits, SyntheticSpec};
pub use tokenize::tokenize;
pub use vocab::{Vocabulary, BOS, EOS, PAD, UNK};

/// Builds a vocabulary from the sources and summaries of `train`.
pub fn build_vocab(train: &Corpus, max_size: usize) -> crate::Result<Vocabulary> {
    Vocabulary::build(
        train
            .pairs
            .iter()
            .flat_map(|p| [p.source.as_slice(), p.summary.as_slice()]),
        max_size,
    )
}

/// Truncates and encodes every pair of `corpus`.
pub fn encode_corpus(
    corpus: &Corpus,
    vocab: &Vocabulary,
    max_src_len: usize,
    max_tgt_len: usize,
) -> crate::Result<Vec<Example>> {
    corpus
        .pairs
        .iter()
        .map(|p| {
            let t = p.truncated(max_src_len, max_tgt_len);
            encode_example(&t.source, &t.summary, vocab)
        })
        .collect()
}
