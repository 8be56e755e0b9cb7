use crate::discriminator::DiscriminatorDims;
use crate::error::{contract, Result};
use crate::generator::GeneratorDims;

/// Variance-reduction baseline subtracted from the reward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PgBaseline {
    None,
    /// `b <- decay * b + (1 - decay) * mean reward`, seeded with the first
    /// batch's mean reward.
    MovingAverage {
        decay: f64,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub d_emb: usize,
    pub d_hidden: usize,
    pub d_dec: usize,
    pub d_att: usize,
    pub d_out: usize,
    pub disc_d_emb: usize,
    pub disc_widths: Vec<usize>,
    pub disc_filters: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            d_emb: 16,
            d_hidden: 16,
            d_dec: 32,
            d_att: 16,
            d_out: 32,
            disc_d_emb: 32,
            disc_widths: vec![3, 4, 5],
            disc_filters: 32,
        }
    }
}

impl ModelConfig {
    pub fn generator_dims(&self, vocab_size: usize) -> GeneratorDims {
        GeneratorDims {
            vocab_size,
            d_emb: self.d_emb,
            d_hidden: self.d_hidden,
            d_dec: self.d_dec,
            d_att: self.d_att,
            d_out: self.d_out,
        }
    }

    pub fn discriminator_dims(&self, vocab_size: usize) -> Result<DiscriminatorDims> {
        DiscriminatorDims::new(vocab_size, self.disc_d_emb, &self.disc_widths, self.disc_filters)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingConfig {
    /// Weight of the policy-gradient term in `beta * J_pg + (1 - beta) * J_ml`.
    pub beta: f64,
    pub lr_g: f64,
    pub lr_d: f64,
    pub clip_norm: Option<f64>,
    pub pretrain_g_steps: usize,
    pub pretrain_d_steps: usize,
    pub rounds: usize,
    pub g_steps: usize,
    pub d_steps: usize,
    pub batch_size: usize,
    pub d_batch_size: usize,
    /// Cap on sampled and decoded summary length, EOS included.
    pub max_tgt_len: usize,
    pub pg_baseline: PgBaseline,
    pub seed: u64,
    /// Validation examples decoded per evaluation; 0 means all.
    pub valid_eval_size: usize,
    /// Adversarial rounds between periodic checkpoints; 0 disables them.
    pub checkpoint_interval: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            beta: 0.5,
            lr_g: 2.0,
            lr_d: 0.1,
            clip_norm: Some(5.0),
            pretrain_g_steps: 6000,
            pretrain_d_steps: 200,
            rounds: 20,
            g_steps: 1,
            d_steps: 1,
            batch_size: 16,
            d_batch_size: 16,
            max_tgt_len: 12,
            pg_baseline: PgBaseline::None,
            seed: 1,
            valid_eval_size: 0,
            checkpoint_interval: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.beta) {
            return contract(format!("beta {} outside [0, 1]", self.beta));
        }
        if !(self.lr_g > 0.0) || !(self.lr_d > 0.0) {
            return contract("learning rates must be positive");
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0) {
                return contract("clip norm must be positive");
            }
        }
        if self.batch_size == 0 || self.d_batch_size == 0 {
            return contract("batch sizes must be at least 1");
        }
        if self.max_tgt_len == 0 {
            return contract("max_tgt_len must be at least 1");
        }
        if let PgBaseline::MovingAverage { decay } = self.pg_baseline {
            if !(decay > 0.0 && decay < 1.0) {
                return contract(format!("baseline decay {decay} outside (0, 1)"));
            }
        }
        Ok(())
    }
}
