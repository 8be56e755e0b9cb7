use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use advsum::autodiff::checkpoint;
use advsum::generator::Generator;
use advsum::text::Vocabulary;
use advsum::training::{streams, ModelConfig, LOG_HEADER};
use advsum::Prng;

const SMALL: &str = "\
n_train = 40
n_valid = 8
n_test = 6
d_emb = 8
d_hidden = 8
d_dec = 16
d_att = 8
d_out = 16
disc_d_emb = 8
disc_filters = 4
pretrain_g_steps = 20
pretrain_d_steps = 5
rounds = 3
batch_size = 8
d_batch_size = 8
checkpoint_interval = 1
valid_eval_size = 8
";

fn advsum(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_advsum"))
        .arg("--threads")
        .arg("1")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = advsum(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn fails(args: &[&str]) -> String {
    let out = advsum(args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    assert_eq!(out.status.code(), Some(1));
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes `SMALL` with the lines of `extra` replacing same-key lines.
fn config(dir: &Path, name: &str, extra: &str) -> PathBuf {
    let key = |l: &str| l.split('=').next().unwrap().trim().to_string();
    let over: Vec<String> = extra.lines().map(key).collect();
    let mut text: String = SMALL
        .lines()
        .filter(|l| !over.contains(&key(l)))
        .map(|l| format!("{l}\n"))
        .collect();
    text.push_str(extra);
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn lines(path: &Path) -> usize {
    fs::read_to_string(path).unwrap().lines().count()
}

/// make-corpus then pretrain into `dir/corpus` and `dir/pre`.
fn pretrained(dir: &Path, cfg: &Path) -> (PathBuf, PathBuf) {
    let (corpus, pre) = (dir.join("corpus"), dir.join("pre"));
    ok(&["make-corpus", "--config", p(cfg), "--out", p(&corpus)]);
    ok(&["pretrain", "--config", p(cfg), "--corpus", p(&corpus), "--out", p(&pre)]);
    (corpus, pre)
}

#[test]
fn default_corpus_sizes_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["make-corpus", "--out", p(&a)]);
    ok(&["make-corpus", "--out", p(&b)]);
    for (split, n) in [("train", 2000), ("valid", 200), ("test", 200)] {
        let file = format!("{split}.jsonl");
        assert_eq!(lines(&a.join(&file)), n);
        assert_eq!(fs::read(a.join(&file)).unwrap(), fs::read(b.join(&file)).unwrap());
    }
    assert!(fs::read_to_string(a.join("config.echo"))
        .unwrap()
        .contains("n_train = 2000"));

    let c = dir.path().join("c");
    ok(&["make-corpus", "--seed", "2", "--out", p(&c)]);
    assert_ne!(
        fs::read(a.join("train.jsonl")).unwrap(),
        fs::read(c.join("train.jsonl")).unwrap()
    );
}

#[test]
fn empty_split_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "run.cfg", "n_valid = 0\n");
    let err = fails(&["make-corpus", "--config", p(&cfg), "--out", p(&dir.path().join("c"))]);
    assert!(err.contains("n_valid"), "{err}");
}

#[test]
fn configuration_errors_point_at_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "seed = 3\n# note\nbogus = 1\n").unwrap();
    let err = fails(&["make-corpus", "--config", p(&cfg), "--out", p(&dir.path().join("c"))]);
    assert!(err.contains("bad.cfg:3") && err.contains("bogus"), "{err}");
    let err = fails(&[
        "make-corpus",
        "--config",
        p(&dir.path().join("missing.cfg")),
        "--out",
        "x",
    ]);
    assert!(err.contains("missing.cfg"), "{err}");
}

#[test]
fn untrained_pretrain_run_saves_the_initialization() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "run.cfg", "pretrain_g_steps = 0\npretrain_d_steps = 0\n");
    let (_, pre) = pretrained(dir.path(), &cfg);
    for entry in ["config.echo", "train_log.csv", "checkpoints", "reports"] {
        assert!(pre.join(entry).exists(), "missing {entry}");
    }
    let log = fs::read_to_string(pre.join("train_log.csv")).unwrap();
    assert_eq!(
        log.lines().next(),
        Some("step,phase,j_ml,j_pg,mean_reward,d_loss,d_acc,rouge1,rouge2,rougeL")
    );
    assert_eq!(log.lines().next(), Some(LOG_HEADER));

    let vocab = Vocabulary::load(&pre.join("checkpoints/vocab.txt")).unwrap();
    let model = ModelConfig {
        d_emb: 8,
        d_hidden: 8,
        d_dec: 16,
        d_att: 8,
        d_out: 16,
        ..Default::default()
    };
    let init = Generator::<f64>::new(
        model.generator_dims(vocab.len()),
        &mut Prng::stream(1, streams::GENERATOR_INIT),
    );
    let saved: advsum::ParamSet = checkpoint::load(&pre.join("checkpoints/gen.ckpt")).unwrap();
    assert!(saved.values_eq(&init.params));
    let report = fs::read_to_string(pre.join("reports/valid_rouge.csv")).unwrap();
    assert!(report.starts_with("system,rouge1,rouge2,rougeL\npretrain,"));
}

fn rounds_csv(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn adversarial_runs_keep_best_and_final() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "run.cfg", "");
    let (corpus, pre) = pretrained(dir.path(), &cfg);
    let ckpts = pre.join("checkpoints");

    let zero = config(dir.path(), "zero.cfg", "rounds = 0\n");
    let still = dir.path().join("still");
    ok(&[
        "adversarial",
        "--config",
        p(&zero),
        "--corpus",
        p(&corpus),
        "--checkpoints",
        p(&ckpts),
        "--out",
        p(&still),
    ]);
    let gen = fs::read(ckpts.join("gen.ckpt")).unwrap();
    assert_eq!(fs::read(still.join("checkpoints/final.ckpt")).unwrap(), gen);
    assert_eq!(fs::read(still.join("checkpoints/best.ckpt")).unwrap(), gen);
    assert_eq!(
        fs::read(still.join("checkpoints/final_disc.ckpt")).unwrap(),
        fs::read(ckpts.join("disc.ckpt")).unwrap()
    );

    let adv = dir.path().join("adv");
    ok(&[
        "adversarial",
        "--config",
        p(&cfg),
        "--corpus",
        p(&corpus),
        "--checkpoints",
        p(&ckpts),
        "--out",
        p(&adv),
    ]);
    let rounds = rounds_csv(&adv.join("reports/rounds.csv"));
    assert_eq!(rounds.len(), 4);
    let best = rounds[1..].iter().map(|r| r[1]).fold(f64::MIN, f64::max);
    assert!(best >= rounds[3][1]);
    for r in 1..=3 {
        assert!(adv.join(format!("checkpoints/round_{r:04}.ckpt")).exists());
    }
    assert_eq!(
        fs::read(adv.join("checkpoints/round_0003.ckpt")).unwrap(),
        fs::read(adv.join("checkpoints/final.ckpt")).unwrap()
    );
    let svg = fs::read_to_string(adv.join("reports/valid_rouge.svg")).unwrap();
    assert!(svg.starts_with("<svg"));

    // The best checkpoint rescored on validation reproduces the best round.
    let hyp = dir.path().join("best.jsonl");
    let best_ckpt = adv.join("checkpoints/best.ckpt");
    ok(&[
        "generate",
        "--config",
        p(&cfg),
        "--checkpoint",
        p(&best_ckpt),
        "--input",
        p(&corpus.join("valid.jsonl")),
        "--out",
        p(&hyp),
    ]);
    let table = dir.path().join("best.csv");
    ok(&["evaluate", p(&hyp), "--out", p(&table)]);
    let row = fs::read_to_string(&table).unwrap().lines().nth(1).unwrap().to_string();
    let r1: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((r1 - 100.0 * best).abs() < 0.006, "{r1} vs {best}");
}

#[test]
fn decoding_modes_and_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(dir.path(), "run.cfg", "");
    let (corpus, pre) = pretrained(dir.path(), &cfg);
    let ckpt = pre.join("checkpoints/gen.ckpt");
    let test = corpus.join("test.jsonl");
    let out = |name: &str| dir.path().join(name);
    let gen = |mode: &[&str], file: &Path, seed: &str| {
        let mut args = vec![
            "generate",
            "--config",
            p(&cfg),
            "--seed",
            seed,
            "--checkpoint",
            p(&ckpt),
            "--input",
            p(&test),
            "--out",
            p(file),
        ];
        args.extend_from_slice(mode);
        ok(&args);
        fs::read(file).unwrap()
    };
    let g1 = gen(&[], &out("greedy.jsonl"), "1");
    assert_eq!(g1, gen(&["--decode", "greedy"], &out("greedy2.jsonl"), "1"));
    assert_eq!(g1, gen(&["--decode", "beam", "--beam", "1"], &out("beam1.jsonl"), "1"));
    let s1 = gen(&["--decode", "sample"], &out("s1.jsonl"), "5");
    assert_eq!(s1, gen(&["--decode", "sample"], &out("s2.jsonl"), "5"));
    gen(&["--decode", "beam", "--beam", "3"], &out("beam3.jsonl"), "1");
    assert_eq!(lines(&out("greedy.jsonl")), 6);
    let first: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&g1).lines().next().unwrap()).unwrap();
    for key in ["source", "reference", "hypothesis", "logprob"] {
        assert!(first.get(key).is_some(), "record lacks {key}");
    }

    // A file whose hypotheses are the references scores 100.
    let gold: String = String::from_utf8_lossy(&g1)
        .lines()
        .map(|l| {
            let mut v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["hypothesis"] = v["reference"].clone();
            format!("{v}\n")
        })
        .collect();
    fs::write(out("gold.jsonl"), gold).unwrap();
    let table = out("reports/table.csv");
    ok(&[
        "evaluate",
        p(&out("gold.jsonl")),
        p(&out("greedy.jsonl")),
        "--out",
        p(&table),
    ]);
    let csv = fs::read_to_string(&table).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[0], "system,rouge1,rouge2,rougeL");
    assert!(rows[1].starts_with("gold,100.00,"), "{}", rows[1]);
    assert!(rows[1].ends_with(",100.00"));
    assert!(rows[2].starts_with("greedy,"));

    let other = out("other.jsonl");
    fs::write(
        &other,
        "{\"source\": \"a\", \"reference\": \"zzz\", \"hypothesis\": \"a\", \"logprob\": 0}\n",
    )
    .unwrap();
    let err = fails(&[
        "evaluate",
        p(&out("greedy.jsonl")),
        p(&other),
        "--out",
        p(&out("x.csv")),
    ]);
    assert!(err.contains("references differ"), "{err}");
    fails(&[
        "generate",
        "--checkpoint",
        p(&dir.path().join("none.ckpt")),
        "--vocab",
        p(&pre.join("checkpoints/vocab.txt")),
        "--input",
        p(&test),
        "--out",
        p(&out("y.jsonl")),
    ]);
    fails(&[
        "generate",
        "--checkpoint",
        p(&ckpt),
        "--input",
        p(&test),
        "--decode",
        "beam",
        "--beam",
        "0",
        "--out",
        p(&out("z.jsonl")),
    ]);
}
