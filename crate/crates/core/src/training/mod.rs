//! Pre-training, policy-gradient updates and the alternating adversarial
//! schedule.

pub mod adversarial;
pub mod batch;
pub mod config;
pub mod log;
pub mod pg;
pub mod pretrain;

pub use adversarial::{adversarial_loop, validation_rouge, AdversarialOutcome, RoundScore};
pub use batch::Batcher;
pub use config::{ModelConfig, PgBaseline, TrainingConfig};
pub use log::{LogFields, Phase, TrainLog, LOG_HEADER};
pub use pg::{
    accumulate_generator_objective, generator_adversarial_step, pg_surrogate, pg_update, reward, BaselineState,
    GenStepReport, PgSample,
};
pub use pretrain::{
    discriminator_step, generated_summary, gold_summary, labeled_step, mle_step, pretrain_discriminator,
    pretrain_generator, DStepReport,
};

/// [`Prng::stream`](crate::rng::Prng::stream) ids, one per random use
/// within a run.
pub mod streams {
    pub const GENERATOR_INIT: u64 = 1;
    pub const DISCRIMINATOR_INIT: u64 = 2;
    pub const PRETRAIN_G_BATCHES: u64 = 3;
    pub const PRETRAIN_D_BATCHES: u64 = 4;
    pub const PRETRAIN_D_SAMPLES: u64 = 5;
    pub const ADV_G_BATCHES: u64 = 6;
    pub const ADV_G_SAMPLES: u64 = 7;
    pub const ADV_D_BATCHES: u64 = 8;
    pub const ADV_D_SAMPLES: u64 = 9;
    pub const DECODE_SAMPLES: u64 = 10;
}
