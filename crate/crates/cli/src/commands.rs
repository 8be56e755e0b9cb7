use std::fs;
use std::path::{Path, PathBuf};

use advsum::autodiff::checkpoint;
use advsum::discriminator::DiscriminatorDims;
use advsum::evaluation::{emit_report, evaluate_corpus, write_chart, EvalReport, Series};
use advsum::generator::GeneratorDims;
use advsum::text::{build_vocab, encode_corpus, make_synthetic_splits, Corpus, Example, Split, Vocabulary};
use advsum::training::{
    adversarial_loop, pretrain_discriminator, pretrain_generator, streams, validation_rouge, LogFields, Phase, TrainLog,
};
use advsum::{Discriminator, Generator, Prng, SummaryHypothesis};
use rayon::prelude::*;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CliError, Context, Result};

pub const CONFIG_ECHO: &str = "config.echo";
pub const TRAIN_LOG: &str = "train_log.csv";
pub const CHECKPOINTS: &str = "checkpoints";
pub const REPORTS: &str = "reports";
pub const VOCAB_FILE: &str = "vocab.txt";

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Creates the run directory layout and writes the effective config.
fn prepare_run_dir(out: &Path, cfg: &RunConfig) -> Result<()> {
    create_dir(&out.join(CHECKPOINTS))?;
    create_dir(&out.join(REPORTS))?;
    write(&out.join(CONFIG_ECHO), &cfg.echo())
}

fn corpus_file(dir: &Path, split: Split) -> PathBuf {
    dir.join(format!("{}.jsonl", split.name()))
}

fn load_split(dir: &Path, split: Split) -> Result<Corpus> {
    let path = corpus_file(dir, split);
    Corpus::load_jsonl(&path, split).context(|| format!("loading {}", path.display()))
}

fn encode(cfg: &RunConfig, corpus: &Corpus, vocab: &Vocabulary) -> Result<Vec<Example>> {
    encode_corpus(corpus, vocab, cfg.max_src_len, cfg.training.max_tgt_len)
        .context(|| format!("encoding the {} corpus", corpus.split.name()))
}

fn save_params<S: advsum::Scalar>(params: &advsum::autodiff::ParamSet<S>, path: &Path) -> Result<()> {
    checkpoint::save(params, path).context(|| format!("writing {}", path.display()))
}

fn eval_fields(r: &EvalReport) -> LogFields {
    LogFields {
        rouge1: Some(r.rouge1),
        rouge2: Some(r.rouge2),
        rouge_l: Some(r.rouge_l),
        ..Default::default()
    }
}

fn named(mut r: EvalReport, name: &str) -> EvalReport {
    r.system = name.to_string();
    r
}

/// Writes `train.jsonl`, `valid.jsonl` and `test.jsonl` under `out`.
pub fn make_corpus(cfg: &RunConfig, out: &Path) -> Result<()> {
    let sizes = [cfg.n_train, cfg.n_valid, cfg.n_test];
    let splits = make_synthetic_splits(cfg.seed, sizes, &cfg.synthetic).context(|| "generating the corpus".into())?;
    create_dir(out)?;
    for c in &splits {
        let path = corpus_file(out, c.split);
        c.write_jsonl(&path).context(|| format!("writing {}", path.display()))?;
    }
    write(&out.join(CONFIG_ECHO), &cfg.echo())
}

/// MLE pre-training of the generator, then discriminator pre-training
/// against its samples.
pub fn pretrain(cfg: &RunConfig, corpus_dir: &Path, out: &Path) -> Result<()> {
    let train = load_split(corpus_dir, Split::Train)?;
    let valid = load_split(corpus_dir, Split::Valid)?;
    let vocab = build_vocab(&train, cfg.vocab_size).context(|| "building the vocabulary".into())?;
    let tr = encode(cfg, &train, &vocab)?;
    let va = encode(cfg, &valid, &vocab)?;
    let tc = cfg.training_config();
    prepare_run_dir(out, cfg)?;

    let mut gen = Generator::new(
        cfg.model.generator_dims(vocab.len()),
        &mut Prng::stream(cfg.seed, streams::GENERATOR_INIT),
    );
    let mut log = pretrain_generator(&mut gen, &tr, &tc).context(|| "generator pre-training".into())?;
    let ddims = cfg
        .model
        .discriminator_dims(vocab.len())
        .context(|| "discriminator sizes".into())?;
    let mut disc = Discriminator::new(ddims, &mut Prng::stream(cfg.seed, streams::DISCRIMINATOR_INIT));
    log.extend(pretrain_discriminator(&mut disc, &gen, &tr, &tc).context(|| "discriminator pre-training".into())?);
    let report = validation_rouge(&gen, &va, &vocab, tc.max_tgt_len, tc.valid_eval_size)
        .context(|| "validation decoding".into())?;
    log.push(Phase::Eval, eval_fields(&report));

    let ck = out.join(CHECKPOINTS);
    save_params(&gen.params, &ck.join("gen.ckpt"))?;
    save_params(&disc.params, &ck.join("disc.ckpt"))?;
    vocab
        .save(&ck.join(VOCAB_FILE))
        .context(|| "writing the vocabulary".into())?;
    write_log(&log, out)?;
    emit_report(&[named(report, "pretrain")], &out.join(REPORTS).join("valid_rouge.csv"))
        .context(|| "writing the report".into())
}

fn write_log(log: &TrainLog, out: &Path) -> Result<()> {
    let path = out.join(TRAIN_LOG);
    log.write_csv(&path).context(|| format!("writing {}", path.display()))
}

fn load_vocab(path: &Path) -> Result<Vocabulary> {
    Vocabulary::load(path).context(|| format!("loading {}", path.display()))
}

/// Loads a generator checkpoint, checking it against `dims` when given.
pub fn load_generator(path: &Path, dims: Option<&GeneratorDims>) -> Result<Generator> {
    let params = checkpoint::load(path).context(|| format!("loading {}", path.display()))?;
    if let Some(d) = dims {
        d.check(&params)
            .context(|| format!("{} does not match the configured generator", path.display()))?;
    }
    Generator::from_params(params).context(|| format!("{} is not a generator checkpoint", path.display()))
}

fn load_discriminator(path: &Path, dims: &DiscriminatorDims) -> Result<Discriminator> {
    let params = checkpoint::load(path).context(|| format!("loading {}", path.display()))?;
    dims.check(&params)
        .context(|| format!("{} does not match the configured discriminator", path.display()))?;
    Discriminator::from_params(params).context(|| format!("{} is not a discriminator checkpoint", path.display()))
}

/// Alternating adversarial training from the checkpoints in `ckpt_dir`.
pub fn adversarial(cfg: &RunConfig, corpus_dir: &Path, ckpt_dir: &Path, out: &Path) -> Result<()> {
    let train = load_split(corpus_dir, Split::Train)?;
    let valid = load_split(corpus_dir, Split::Valid)?;
    let vocab = load_vocab(&ckpt_dir.join(VOCAB_FILE))?;
    let tr = encode(cfg, &train, &vocab)?;
    let va = encode(cfg, &valid, &vocab)?;
    let gdims = cfg.model.generator_dims(vocab.len());
    let ddims = cfg
        .model
        .discriminator_dims(vocab.len())
        .context(|| "discriminator sizes".into())?;
    let mut gen = load_generator(&ckpt_dir.join("gen.ckpt"), Some(&gdims))?;
    let mut disc = load_discriminator(&ckpt_dir.join("disc.ckpt"), &ddims)?;
    let tc = cfg.training_config();
    prepare_run_dir(out, cfg)?;

    let ck = out.join(CHECKPOINTS);
    let mut hook = |round: usize, g: &Generator, _: &Discriminator| -> advsum::Result<()> {
        checkpoint::save(&g.params, &ck.join(format!("round_{round:04}.ckpt")))
    };
    let outcome = adversarial_loop(&mut gen, &mut disc, &tr, &va, &vocab, &tc, Some(&mut hook))
        .context(|| "adversarial training".into())?;

    save_params(&gen.params, &ck.join("final.ckpt"))?;
    save_params(&outcome.best.params, &ck.join("best.ckpt"))?;
    save_params(&disc.params, &ck.join("final_disc.ckpt"))?;
    vocab
        .save(&ck.join(VOCAB_FILE))
        .context(|| "writing the vocabulary".into())?;
    write_log(&outcome.log, out)?;

    let reports = out.join(REPORTS);
    let mut rounds = String::from("round,rouge1,rouge2,rougeL\n");
    for s in &outcome.scores {
        rounds.push_str(&format!("{},{},{},{}\n", s.round, s.rouge1, s.rouge2, s.rouge_l));
    }
    write(&reports.join("rounds.csv"), &rounds)?;
    let points = |f: fn(&advsum::training::RoundScore) -> f64| -> Vec<(f64, f64)> {
        outcome.scores.iter().map(|s| (s.round as f64, f(s))).collect()
    };
    let series = [
        Series {
            name: "ROUGE-1".into(),
            points: points(|s| s.rouge1),
        },
        Series {
            name: "ROUGE-2".into(),
            points: points(|s| s.rouge2),
        },
        Series {
            name: "ROUGE-L".into(),
            points: points(|s| s.rouge_l),
        },
    ];
    write_chart(&reports.join("valid_rouge.svg"), "Validation ROUGE by round", &series)
        .context(|| "writing the chart".into())
}

/// Decoding strategy for [`generate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Decode {
    Greedy,
    Sample,
    Beam(usize),
}

/// Decodes every example of `input` and writes one JSON record per line
/// with `source`, `reference`, `hypothesis` and `logprob`.
pub fn generate(
    cfg: &RunConfig,
    ckpt: &Path,
    vocab_path: &Path,
    input: &Path,
    decode: Decode,
    out: &Path,
) -> Result<()> {
    let vocab = load_vocab(vocab_path)?;
    let gen = load_generator(ckpt, None)?;
    if gen.dims.vocab_size != vocab.len() {
        return Err(CliError::Data {
            path: vocab_path.to_path_buf(),
            msg: format!(
                "vocabulary has {} entries but {} expects {}",
                vocab.len(),
                ckpt.display(),
                gen.dims.vocab_size
            ),
        });
    }
    let corpus = Corpus::load_jsonl(input, Split::Test).context(|| format!("loading {}", input.display()))?;
    let examples = encode(cfg, &corpus, &vocab)?;
    let max_len = cfg.training.max_tgt_len;
    let hyps: Vec<SummaryHypothesis> = match decode {
        Decode::Sample => {
            let mut rng = Prng::stream(cfg.seed, streams::DECODE_SAMPLES);
            examples
                .iter()
                .map(|ex| gen.sample_summary(ex, max_len, &mut rng))
                .collect::<advsum::Result<_>>()
        }
        Decode::Greedy => examples.par_iter().map(|ex| gen.greedy_decode(ex, max_len)).collect(),
        Decode::Beam(k) => examples.par_iter().map(|ex| gen.beam_decode(ex, max_len, k)).collect(),
    }
    .context(|| "decoding".into())?;

    let mut text = String::new();
    for (ex, h) in examples.iter().zip(&hyps) {
        let rec = json!({
            "source": ex.source_tokens.join(" "),
            "reference": ex.summary_tokens.join(" "),
            "hypothesis": ex.decode(h.content(), &vocab).join(" "),
            "logprob": h.log_prob,
        });
        text.push_str(&rec.to_string());
        text.push('\n');
    }
    write(out, &text)
}

struct Hypotheses {
    references: Vec<Vec<String>>,
    hypotheses: Vec<Vec<String>>,
}

fn read_hypotheses(path: &Path) -> Result<Hypotheses> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut h = Hypotheses {
        references: Vec::new(),
        hypotheses: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |msg: String| CliError::Data {
            path: path.to_path_buf(),
            msg: format!("line {}: {msg}", i + 1),
        };
        let v: serde_json::Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        let field = |name: &str| -> Result<Vec<String>> {
            v.get(name)
                .and_then(|x| x.as_str())
                .map(|s| s.split_whitespace().map(str::to_string).collect())
                .ok_or_else(|| err(format!("missing string field \"{name}\"")))
        };
        h.references.push(field("reference")?);
        h.hypotheses.push(field("hypothesis")?);
    }
    if h.references.is_empty() {
        return Err(CliError::Data {
            path: path.to_path_buf(),
            msg: "no records".into(),
        });
    }
    Ok(h)
}

/// Scores each hypotheses file against its references and writes one CSV
/// row per file, named by file stem, in argument order.
pub fn evaluate(files: &[PathBuf], out: &Path) -> Result<Vec<EvalReport>> {
    if files.is_empty() {
        return Err(CliError::Usage("evaluate needs at least one hypotheses file".into()));
    }
    let mut reports = Vec::with_capacity(files.len());
    let mut first: Option<Vec<Vec<String>>> = None;
    for path in files {
        let h = read_hypotheses(path)?;
        match &first {
            None => first = Some(h.references.clone()),
            Some(refs) if *refs != h.references => {
                return Err(CliError::Data {
                    path: path.clone(),
                    msg: format!("references differ from those of {}", files[0].display()),
                })
            }
            Some(_) => {}
        }
        let name = path
            .file_stem()
            .map_or("system".into(), |s| s.to_string_lossy().into_owned());
        let r =
            evaluate_corpus(&name, &h.hypotheses, &h.references).context(|| format!("scoring {}", path.display()))?;
        reports.push(r);
    }
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    emit_report(&reports, out).context(|| format!("writing {}", out.display()))?;
    Ok(reports)
}
