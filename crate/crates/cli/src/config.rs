//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, blank lines are ignored.
//! Every key has a default; unknown or repeated keys are errors. The
//! effective configuration is written back in the same format as
//! `config.echo`, which reproduces the run when passed to `--config`.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use advsum::text::SyntheticSpec;
use advsum::training::{ModelConfig, PgBaseline, TrainingConfig};

use crate::error::{CliError, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_valid: usize,
    pub n_test: usize,
    pub synthetic: SyntheticSpec,
    pub vocab_size: usize,
    pub max_src_len: usize,
    pub model: ModelConfig,
    pub training: TrainingConfig,
    /// Moving-average decay, used when `pg_baseline = moving_average`.
    pub pg_baseline_decay: f64,
    pub corpus_dir: PathBuf,
    pub checkpoint_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let training = TrainingConfig::default();
        RunConfig {
            seed: training.seed,
            n_train: 2000,
            n_valid: 200,
            n_test: 200,
            synthetic: SyntheticSpec::default(),
            vocab_size: 1000,
            max_src_len: 50,
            model: ModelConfig::default(),
            training,
            pg_baseline_decay: 0.95,
            corpus_dir: PathBuf::from("corpus"),
            checkpoint_dir: PathBuf::from("pretrain/checkpoints"),
        }
    }
}

fn parse<T: FromStr>(v: &str) -> std::result::Result<T, String>
where
    T::Err: Display,
{
    v.parse::<T>().map_err(|e| format!("invalid value {v:?}: {e}"))
}

fn parse_list(v: &str) -> std::result::Result<Vec<usize>, String> {
    v.split(',').map(|p| parse::<usize>(p.trim())).collect()
}

impl RunConfig {
    /// Reads `path`; keys it does not mention keep their defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut cfg = RunConfig::default();
        let mut seen: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| CliError::Config {
                path: path.to_path_buf(),
                line,
                msg,
            };
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| err(format!("expected key = value, got {content:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            if seen.iter().any(|k| k == key) {
                return Err(err(format!("key {key} set twice")));
            }
            cfg.set(key, value).map_err(|m| err(format!("key {key}: {m}")))?;
            seen.push(key.to_string());
        }
        cfg.validate(path)?;
        Ok(cfg)
    }

    /// Applies one setting; the error message does not repeat the key.
    pub fn set(&mut self, key: &str, v: &str) -> std::result::Result<(), String> {
        let t = &mut self.training;
        let m = &mut self.model;
        let s = &mut self.synthetic;
        match key {
            "seed" => {
                self.seed = parse(v)?;
                t.seed = self.seed;
            }
            "n_train" => self.n_train = parse(v)?,
            "n_valid" => self.n_valid = parse(v)?,
            "n_test" => self.n_test = parse(v)?,
            "content_size" => s.content_size = parse(v)?,
            "salient" => s.salient = parse(v)?,
            "synonyms" => s.synonyms = parse(v)?,
            "src_len_min" => s.src_len_min = parse(v)?,
            "src_len_max" => s.src_len_max = parse(v)?,
            "salient_min" => s.salient_min = parse(v)?,
            "salient_max" => s.salient_max = parse(v)?,
            "vocab_size" => self.vocab_size = parse(v)?,
            "max_src_len" => self.max_src_len = parse(v)?,
            "max_tgt_len" => t.max_tgt_len = parse(v)?,
            "d_emb" => m.d_emb = parse(v)?,
            "d_hidden" => m.d_hidden = parse(v)?,
            "d_dec" => m.d_dec = parse(v)?,
            "d_att" => m.d_att = parse(v)?,
            "d_out" => m.d_out = parse(v)?,
            "disc_d_emb" => m.disc_d_emb = parse(v)?,
            "disc_widths" => m.disc_widths = parse_list(v)?,
            "disc_filters" => m.disc_filters = parse(v)?,
            "beta" => t.beta = parse(v)?,
            "lr_g" => t.lr_g = parse(v)?,
            "lr_d" => t.lr_d = parse(v)?,
            "clip_norm" => {
                t.clip_norm = if v == "none" { None } else { Some(parse(v)?) };
            }
            "pretrain_g_steps" => t.pretrain_g_steps = parse(v)?,
            "pretrain_d_steps" => t.pretrain_d_steps = parse(v)?,
            "rounds" => t.rounds = parse(v)?,
            "g_steps" => t.g_steps = parse(v)?,
            "d_steps" => t.d_steps = parse(v)?,
            "batch_size" => t.batch_size = parse(v)?,
            "d_batch_size" => t.d_batch_size = parse(v)?,
            "pg_baseline" => {
                t.pg_baseline = match v {
                    "none" => PgBaseline::None,
                    "moving_average" => PgBaseline::MovingAverage {
                        decay: self.pg_baseline_decay,
                    },
                    _ => return Err(format!("expected none or moving_average, got {v:?}")),
                }
            }
            "pg_baseline_decay" => {
                self.pg_baseline_decay = parse(v)?;
                if let PgBaseline::MovingAverage { decay } = &mut t.pg_baseline {
                    *decay = self.pg_baseline_decay;
                }
            }
            "valid_eval_size" => t.valid_eval_size = parse(v)?,
            "checkpoint_interval" => t.checkpoint_interval = parse(v)?,
            "corpus_dir" => self.corpus_dir = PathBuf::from(v),
            "checkpoint_dir" => self.checkpoint_dir = PathBuf::from(v),
            _ => return Err("unknown key".to_string()),
        }
        Ok(())
    }

    /// Every key with its current value, in a fixed order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let t = &self.training;
        let m = &self.model;
        let s = &self.synthetic;
        let widths: Vec<String> = m.disc_widths.iter().map(|w| w.to_string()).collect();
        vec![
            ("seed", self.seed.to_string()),
            ("n_train", self.n_train.to_string()),
            ("n_valid", self.n_valid.to_string()),
            ("n_test", self.n_test.to_string()),
            ("content_size", s.content_size.to_string()),
            ("salient", s.salient.to_string()),
            ("synonyms", s.synonyms.to_string()),
            ("src_len_min", s.src_len_min.to_string()),
            ("src_len_max", s.src_len_max.to_string()),
            ("salient_min", s.salient_min.to_string()),
            ("salient_max", s.salient_max.to_string()),
            ("vocab_size", self.vocab_size.to_string()),
            ("max_src_len", self.max_src_len.to_string()),
            ("max_tgt_len", t.max_tgt_len.to_string()),
            ("d_emb", m.d_emb.to_string()),
            ("d_hidden", m.d_hidden.to_string()),
            ("d_dec", m.d_dec.to_string()),
            ("d_att", m.d_att.to_string()),
            ("d_out", m.d_out.to_string()),
            ("disc_d_emb", m.disc_d_emb.to_string()),
            ("disc_widths", widths.join(",")),
            ("disc_filters", m.disc_filters.to_string()),
            ("beta", t.beta.to_string()),
            ("lr_g", t.lr_g.to_string()),
            ("lr_d", t.lr_d.to_string()),
            ("clip_norm", t.clip_norm.map_or("none".to_string(), |c| c.to_string())),
            ("pretrain_g_steps", t.pretrain_g_steps.to_string()),
            ("pretrain_d_steps", t.pretrain_d_steps.to_string()),
            ("rounds", t.rounds.to_string()),
            ("g_steps", t.g_steps.to_string()),
            ("d_steps", t.d_steps.to_string()),
            ("batch_size", t.batch_size.to_string()),
            ("d_batch_size", t.d_batch_size.to_string()),
            (
                "pg_baseline",
                match t.pg_baseline {
                    PgBaseline::None => "none".to_string(),
                    PgBaseline::MovingAverage { .. } => "moving_average".to_string(),
                },
            ),
            ("pg_baseline_decay", self.pg_baseline_decay.to_string()),
            ("valid_eval_size", t.valid_eval_size.to_string()),
            ("checkpoint_interval", t.checkpoint_interval.to_string()),
            ("corpus_dir", self.corpus_dir.display().to_string()),
            ("checkpoint_dir", self.checkpoint_dir.display().to_string()),
        ]
    }

    pub fn echo(&self) -> String {
        self.entries()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.training.seed = seed;
    }

    /// Cross-field checks; `path` names the file in the error.
    pub fn validate(&self, path: &Path) -> Result<()> {
        let err = |msg: String| CliError::Invalid {
            path: path.to_path_buf(),
            msg,
        };
        self.training.validate().map_err(|e| err(e.to_string()))?;
        self.synthetic.validate().map_err(|e| err(e.to_string()))?;
        self.model
            .discriminator_dims(self.vocab_size)
            .map_err(|e| err(e.to_string()))?;
        for (key, n) in [
            ("n_train", self.n_train),
            ("n_valid", self.n_valid),
            ("n_test", self.n_test),
        ] {
            if n == 0 {
                return Err(err(format!("{key} must be at least 1")));
            }
        }
        if self.vocab_size <= 4 {
            return Err(err(format!("vocab_size {} must exceed 4", self.vocab_size)));
        }
        let m = &self.model;
        if [m.d_emb, m.d_hidden, m.d_dec, m.d_att, m.d_out].contains(&0) {
            return Err(err("model dimensions must be positive".to_string()));
        }
        if self.max_src_len == 0 {
            return Err(err("max_src_len must be at least 1".to_string()));
        }
        if !(self.pg_baseline_decay > 0.0 && self.pg_baseline_decay < 1.0) {
            return Err(err(format!(
                "pg_baseline_decay {} outside (0, 1)",
                self.pg_baseline_decay
            )));
        }
        Ok(())
    }

    pub fn training_config(&self) -> TrainingConfig {
        let mut t = self.training.clone();
        t.seed = self.seed;
        t
    }
}
