//! Command-line pipeline: corpus generation, pre-training, adversarial
//! training, decoding and ROUGE evaluation.

pub mod commands;
pub mod config;
pub mod error;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

pub use commands::Decode;
pub use config::RunConfig;
pub use error::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "advsum", version, about = "Adversarial pointer-generator summarization")]
pub struct Cli {
    /// Worker threads for parallel decoding and scoring; 1 runs everything
    /// on the calling thread.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Flat key = value configuration file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecodeMode {
    Greedy,
    Sample,
    Beam,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write train/valid/test synthetic corpora.
    MakeCorpus {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pre-train the generator by likelihood, then the discriminator.
    Pretrain {
        #[command(flatten)]
        common: Common,
        /// Directory with train.jsonl and valid.jsonl (default: corpus_dir).
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Alternate generator and discriminator updates from pre-trained checkpoints.
    Adversarial {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Directory with gen.ckpt, disc.ckpt and vocab.txt (default: checkpoint_dir).
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Decode a corpus file with a generator checkpoint.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Vocabulary file (default: vocab.txt next to the checkpoint).
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Records with "source" and "summary" fields.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value = "greedy")]
        decode: DecodeMode,
        /// Beam width for `--decode beam`.
        #[arg(long, default_value_t = 4)]
        beam: usize,
        /// Output file of source/reference/hypothesis/logprob records.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score hypotheses files and write a system,rouge1,rouge2,rougeL table.
    Evaluate {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.set_seed(s);
    }
    Ok(cfg)
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.threads {
        Some(0) => return Err(CliError::Usage("--threads must be at least 1".into())),
        Some(n) => {
            // A second call in the same process keeps the first pool.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        None => {}
    }
    match cli.command {
        Command::MakeCorpus { common, out } => commands::make_corpus(&load_config(&common)?, &out),
        Command::Pretrain { common, corpus, out } => {
            let cfg = load_config(&common)?;
            let corpus = corpus.unwrap_or_else(|| cfg.corpus_dir.clone());
            commands::pretrain(&cfg, &corpus, &out)
        }
        Command::Adversarial {
            common,
            corpus,
            checkpoints,
            out,
        } => {
            let cfg = load_config(&common)?;
            let corpus = corpus.unwrap_or_else(|| cfg.corpus_dir.clone());
            let ckpt = checkpoints.unwrap_or_else(|| cfg.checkpoint_dir.clone());
            commands::adversarial(&cfg, &corpus, &ckpt, &out)
        }
        Command::Generate {
            common,
            checkpoint,
            vocab,
            input,
            decode,
            beam,
            out,
        } => {
            let cfg = load_config(&common)?;
            let vocab = vocab.unwrap_or_else(|| checkpoint.with_file_name(commands::VOCAB_FILE));
            let decode = match decode {
                DecodeMode::Greedy => Decode::Greedy,
                DecodeMode::Sample => Decode::Sample,
                DecodeMode::Beam if beam == 0 => return Err(CliError::Usage("--beam must be at least 1".into())),
                DecodeMode::Beam => Decode::Beam(beam),
            };
            commands::generate(&cfg, &checkpoint, &vocab, &input, decode, &out)
        }
        Command::Evaluate { files, out } => commands::evaluate(&files, &out).map(|_| ()),
    }
}
