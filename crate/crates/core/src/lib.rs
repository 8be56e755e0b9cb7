//! Adversarial training for abstractive summarization at desk scale.
//!
//! A pointer-generator summarizer is pre-trained by maximum likelihood,
//! a convolutional discriminator learns to tell its samples from human
//! summaries, and the two are then trained alternately: the generator
//! follows `beta * J_pg + (1 - beta) * J_ml` where the policy-gradient
//! reward is the discriminator's probability that a sampled summary is
//! human-written.
//!
//! The numerical core is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix it to `f64`, which the tests and the CLI
//! use throughout.

pub mod autodiff;
pub mod discriminator;
pub mod error;
pub mod evaluation;
pub mod generator;
pub mod rng;
pub mod scalar;
pub mod text;
pub mod training;

pub use error::{Error, Result};
pub use rng::Prng;
pub use scalar::Scalar;

pub type Tensor = autodiff::Tensor<f64>;
pub type Tape = autodiff::Tape<f64>;
pub type ParamSet = autodiff::ParamSet<f64>;
pub type Generator = generator::Generator<f64>;
pub type Discriminator = discriminator::Discriminator<f64>;
pub type SummaryHypothesis = generator::SummaryHypothesis<f64>;
pub type AdversarialOutcome = training::AdversarialOutcome<f64>;
