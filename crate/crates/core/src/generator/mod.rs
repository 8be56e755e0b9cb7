//! Pointer-generator summarizer: bidirectional LSTM encoder, additive
//! attention LSTM decoder, two-layer vocabulary head, and a learned switch
//! between generating from the vocabulary and copying source tokens.

pub mod decode;
pub mod model;
pub mod params;

pub use decode::{sample_on_tape, SummaryHypothesis};
pub use model::{
    batch_mle_loss, decode_step, encode, initial_state, mix_pointer, mle_loss, sequence_log_probs, DecoderStep,
    EncoderStates, LstmState,
};
pub use params::{GenVars, Generator, GeneratorDims};
