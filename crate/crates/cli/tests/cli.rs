use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use fds_core::corpus::{LabelTable, TripleRecord, Vocabulary};
use fds_core::io::{load_model, save_model};
use fds_core::synthetic::{planted_triples, small_planted_triples, CAT_LIKE, CHASE_LIKE, DOG_LIKE, MOUSE_LIKE};
use fds_core::{Model, SpaceConfig};
use tempfile::TempDir;

fn fds(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fds")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = fds(args);
    assert!(
        out.status.success(),
        "fds {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_triples(path: &Path, records: &[TripleRecord]) {
    let text: String = records
        .iter()
        .map(|r| {
            format!(
                "{}\t{}\t{}\n",
                r.verb,
                r.arg1.as_deref().unwrap_or("_"),
                r.arg2.as_deref().unwrap_or("_")
            )
        })
        .collect();
    fs::write(path, text).unwrap();
}

const FIXTURE: &str = "chase\tdog\tcat
chase\tdog\tcat
chase\tdog\tcat
bark\tdog\t_
bark\tdog\t_
walk\t_\tcat
rare\tdog\t_
dig\tmole\t_
hide\tmole\t_
hide\tdog\t_
";

fn table(rows: &[(&str, u64)]) -> String {
    let mut out = format!("{:<16}{:>14}", "Situation type", "No. instances");
    for (name, n) in rows {
        out.push_str(&format!("\n{name:<16}{n:>14}"));
    }
    out
}

fn preprocess_fixture(dir: &Path, min_count: &str) -> (Output, PathBuf, PathBuf) {
    let input = dir.join("fixture.tsv");
    fs::write(&input, FIXTURE).unwrap();
    let (tokens, vocab) = (dir.join("tokens.jsonl"), dir.join("vocab.tsv"));
    let out = ok(&[
        "preprocess",
        "--input",
        s(&input),
        "--min-count",
        min_count,
        "--tokens",
        s(&tokens),
        "--vocab",
        s(&vocab),
        "--stats",
        s(&dir.join("stats.txt")),
    ]);
    (out, tokens, vocab)
}

#[test]
fn preprocess_filters_to_a_fixed_point() {
    let dir = TempDir::new().unwrap();
    let (out, tokens, vocab) = preprocess_fixture(dir.path(), "2");
    // a single counting pass would also keep both `hide` records
    let want = table(&[("Both arguments", 3), ("ARG1 only", 2), ("ARG2 only", 0), ("Total", 5), ("Predicates", 4)]);
    assert_eq!(stdout(&out).trim_end(), want);
    assert_eq!(fs::read_to_string(dir.path().join("stats.txt")).unwrap().trim_end(), want);
    assert_eq!(fs::read_to_string(vocab).unwrap(), "dog\t5\ncat\t3\nchase\t3\nbark\t2\n");
    assert_eq!(fs::read_to_string(tokens).unwrap().lines().count(), 5);
}

#[test]
fn min_count_one_keeps_everything() {
    let dir = TempDir::new().unwrap();
    let (out, _, _) = preprocess_fixture(dir.path(), "1");
    let want = table(&[("Both arguments", 3), ("ARG1 only", 6), ("ARG2 only", 1), ("Total", 10), ("Predicates", 9)]);
    assert_eq!(stdout(&out).trim_end(), want);
}

#[test]
fn malformed_input_is_a_data_error() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.tsv");
    fs::write(&input, "chase\tdog\tcat\nchase\t_\t_\n").unwrap();
    let t = dir.path().join("t.jsonl");
    let v = dir.path().join("v.tsv");
    let out = fds(&["preprocess", "--input", s(&input), "--tokens", s(&t), "--vocab", s(&v)]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("line 2"), "{}", stderr(&out));
}

/// A preprocessed twelve-predicate corpus in `dir`.
fn small_corpus(dir: &Path) -> (PathBuf, PathBuf) {
    let input = dir.join("small.tsv");
    write_triples(&input, &small_planted_triples(400, 3));
    let (tokens, vocab) = (dir.join("small.jsonl"), dir.join("small-vocab.tsv"));
    ok(&["preprocess", "--input", s(&input), "--tokens", s(&tokens), "--vocab", s(&vocab)]);
    (tokens, vocab)
}

fn train_small(dir: &Path, out_name: &str, extra: &[&str]) -> (Output, PathBuf) {
    let (tokens, vocab) = small_corpus(dir);
    let out_path = dir.join(out_name);
    let mut args = vec![
        "train",
        "--tokens",
        s(&tokens),
        "--vocab",
        s(&vocab),
        "--out",
        s(&out_path),
        "--dims",
        "8",
        "--cardinality",
        "2",
        "--batch-size",
        "50",
        "--particles",
        "10",
        "--epochs",
        "2",
    ];
    args.extend_from_slice(extra);
    (ok(&args), out_path)
}

fn bytes(p: &Path) -> Vec<u8> {
    fs::read(p).unwrap()
}

fn state_of(p: &Path) -> PathBuf {
    fds_core::io::sidecar_path(p)
}

#[test]
fn tiny_run_writes_a_loadable_model() {
    let dir = TempDir::new().unwrap();
    let (out, model) = train_small(dir.path(), "m.json", &["--seed", "7"]);
    assert!(stderr(&out).contains("seed: 7"));
    let m = load_model(&model).unwrap();
    assert_eq!((m.n_dims(), m.cardinality(), m.n_preds()), (8, 2, 12));
    assert!(state_of(&model).exists());
}

#[test]
fn resume_reproduces_the_uninterrupted_run() {
    let dir = TempDir::new().unwrap();
    let (_, full) = train_small(dir.path(), "full.json", &[]);
    let (_, split) = train_small(dir.path(), "split.json", &["--max-batches", "5"]);
    assert_ne!(bytes(&full), bytes(&split));
    let tokens = dir.path().join("small.jsonl");
    ok(&["train", "--tokens", s(&tokens), "--resume", s(&split), "--out", s(&split)]);
    assert_eq!(bytes(&full), bytes(&split));
    assert_eq!(bytes(&state_of(&full)), bytes(&state_of(&split)));
}

#[test]
fn periodic_checkpoints_do_not_change_the_result() {
    let dir = TempDir::new().unwrap();
    let (_, plain) = train_small(dir.path(), "plain.bin", &[]);
    let (_, chunked) = train_small(dir.path(), "chunked.bin", &["--checkpoint-every", "3"]);
    assert_eq!(bytes(&plain), bytes(&chunked));
}

#[test]
fn seed_controls_the_output() {
    let dir = TempDir::new().unwrap();
    let (_, a) = train_small(dir.path(), "a.json", &["--seed", "3"]);
    let (_, b) = train_small(dir.path(), "b.json", &["--seed", "3"]);
    let (_, c) = train_small(dir.path(), "c.json", &["--seed", "4"]);
    assert_eq!(bytes(&a), bytes(&b));
    assert_ne!(bytes(&a), bytes(&c));
}

#[test]
fn thread_count_does_not_change_the_result() {
    let dir = TempDir::new().unwrap();
    let (_, one) = train_small(dir.path(), "one.json", &["--threads", "1"]);
    let (_, four) = train_small(dir.path(), "four.json", &["--threads", "4"]);
    assert_eq!(bytes(&one), bytes(&four));
    assert_eq!(bytes(&state_of(&one)), bytes(&state_of(&four)));
}

#[test]
fn config_file_sits_between_flags_and_defaults() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# tiny run\nepochs = 1\nlearning-rate = 0.05\n").unwrap();
    let (out, _) = train_small(dir.path(), "cfg.json", &["--config", s(&cfg)]);
    // train_small passes --epochs 2 on the command line, which wins
    assert!(stderr(&out).contains("stopped at epoch 2 batch 0"), "{}", stderr(&out));

    let cfg_only = dir.path().join("only.cfg");
    fs::write(&cfg_only, "epochs = 1\n").unwrap();
    let (tokens, vocab) = small_corpus(dir.path());
    let out_path = dir.path().join("only.json");
    let out = ok(&[
        "train",
        "--config",
        s(&cfg_only),
        "--tokens",
        s(&tokens),
        "--vocab",
        s(&vocab),
        "--out",
        s(&out_path),
        "--dims",
        "8",
        "--cardinality",
        "2",
        "--batch-size",
        "100",
    ]);
    assert!(stderr(&out).contains("stopped at epoch 1 batch 0"), "{}", stderr(&out));
}

#[test]
fn unknown_config_keys_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "learning_rat = 0.1\n").unwrap();
    let out = fds(&["train", "--config", s(&cfg), "--tokens", "t", "--vocab", "v", "--out", "o"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("learning_rat"));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(code(&fds(&["train", "--bogus"])), 1);
    assert_eq!(code(&fds(&["frobnicate"])), 1);
    assert_eq!(code(&fds(&[])), 1);
    assert_eq!(code(&fds(&["--help"])), 0);
}

#[test]
fn runaway_learning_rate_is_a_numeric_failure() {
    let dir = TempDir::new().unwrap();
    let (tokens, vocab) = small_corpus(dir.path());
    let out_path = dir.path().join("nan.json");
    let out = fds(&[
        "train",
        "--tokens",
        s(&tokens),
        "--vocab",
        s(&vocab),
        "--out",
        s(&out_path),
        "--dims",
        "8",
        "--cardinality",
        "2",
        "--learning-rate",
        "1e300",
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

fn small_model(dir: &Path) -> PathBuf {
    train_small(dir, "q.json", &[]).1
}

#[test]
fn query_sim_and_neighbors() {
    let dir = TempDir::new().unwrap();
    let m = small_model(dir.path());
    let out = ok(&["query", "--model", s(&m), "sim", "dog", "dog"]);
    assert_eq!(stdout(&out).trim(), "1.000000");
    let out = ok(&["query", "--model", s(&m), "neighbors", "dog", "0"]);
    assert!(stdout(&out).is_empty());
    let out = ok(&["query", "--model", s(&m), "neighbors", "dog", "3"]);
    assert_eq!(stdout(&out).lines().count(), 3);
    let out = fds(&["query", "--model", s(&m), "sim", "dog", "unicorn"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn fill_prints_a_ranked_distribution() {
    let dir = TempDir::new().unwrap();
    let m = small_model(dir.path());
    let out = ok(&["query", "--model", s(&m), "fill", "chase", "ARG1=dog", "ARG2=?", "--top", "12"]);
    let probs: Vec<f64> = stdout(&out)
        .lines()
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(probs.len(), 12);
    assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-4);
    assert!(probs.windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(code(&fds(&["query", "--model", s(&m), "fill", "chase", "ARG1=?", "ARG2=?"])), 1);
    assert_eq!(code(&fds(&["query", "--model", s(&m), "fill", "chase", "ARG9=dog", "ARG2=?"])), 2);
}

#[test]
fn eval_reports_and_rejects_low_coverage() {
    let dir = TempDir::new().unwrap();
    let m = small_model(dir.path());
    let data = dir.path().join("pairs.tsv");
    fs::write(&data, "dog\twolf\t9.0\ndog\tmouse\t2.0\ncat\tlion\t8.5\nchase\tunicorn\t1.0\n").unwrap();
    let out = ok(&["eval", "--model", s(&m), "--dataset", s(&data)]);
    assert!(stdout(&out).contains("coverage: 3/4 pairs (1 skipped)"), "{}", stdout(&out));
    let out = ok(&["eval", "--model", s(&m), "--dataset", s(&data), "--json"]);
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["covered_pairs"], 3);
    assert!(report["spearman_rho"].as_f64().unwrap().abs() <= 1.0);

    fs::write(&data, "dog\twolf\t9.0\nunicorn\tpegasus\t1.0\n").unwrap();
    assert_eq!(code(&fds(&["eval", "--model", s(&m), "--dataset", s(&data)])), 2);
}

#[test]
fn convert_simlex_writes_canonical_pairs() {
    let dir = TempDir::new().unwrap();
    let raw = dir.path().join("SimLex-999.txt");
    fs::write(
        &raw,
        "word1\tword2\tPOS\tSimLex999\tconc(w1)\nold\tnew\tA\t1.58\t2.72\nsmart\tintelligent\tA\t9.2\t1.75\n",
    )
    .unwrap();
    let conv = dir.path().join("simlex.tsv");
    ok(&["convert-simlex", "--input", s(&raw), "--out", s(&conv)]);
    assert_eq!(fs::read_to_string(&conv).unwrap(), "old\tnew\t1.58\nsmart\tintelligent\t9.2\n");
}

#[test]
fn sample_count_zero_prints_nothing() {
    let dir = TempDir::new().unwrap();
    let m = small_model(dir.path());
    let out = ok(&["sample", "--model", s(&m), "--count", "0"]);
    assert!(stdout(&out).is_empty());
    assert!(stderr(&out).contains("seed: 1"));
    assert_eq!(code(&fds(&["sample", "--model", s(&m), "--shape", "triangle"])), 1);
}

#[test]
fn uniform_model_samples_follow_frequencies() {
    let dir = TempDir::new().unwrap();
    let vocab = Vocabulary::from_ordered(vec![("a".into(), 5), ("b".into(), 3), ("c".into(), 2)]).unwrap();
    let model = Model::zeros(SpaceConfig::new(6, 2).unwrap(), LabelTable::default(), vocab).unwrap();
    let path = dir.path().join("uniform.json");
    save_model(&model, &path).unwrap();
    let out = ok(&["sample", "--model", s(&path), "--shape", "single", "--count", "20000", "--burnin", "0"]);
    let mut counts = [0usize; 3];
    for line in stdout(&out).lines() {
        let g: serde_json::Value = serde_json::from_str(line).unwrap();
        counts[["a", "b", "c"].iter().position(|w| g["nodes"][0] == *w).unwrap()] += 1;
    }
    for (k, f) in counts.iter().zip([0.5, 0.3, 0.2]) {
        assert!((*k as f64 / 20000.0 - f).abs() < 0.015, "{counts:?}");
    }
}

const PLANTED_CONFIG: &str = "# planted-structure run
dims = 40
cardinality = 5
learning_rate = 0.003
l2 = 0.05
steps_per_variable = 5
epochs = 12
seed = 1
";

/// Model trained through the CLI on the planted corpus, shared by tests.
fn planted_model() -> &'static Path {
    static MODEL: OnceLock<(TempDir, PathBuf)> = OnceLock::new();
    &MODEL
        .get_or_init(|| {
            let dir = TempDir::new().unwrap();
            let input = dir.path().join("planted.tsv");
            write_triples(&input, &planted_triples(50_000, 1));
            let (tokens, vocab) = (dir.path().join("planted.jsonl"), dir.path().join("planted-vocab.tsv"));
            ok(&["preprocess", "--input", s(&input), "--tokens", s(&tokens), "--vocab", s(&vocab)]);
            let cfg = dir.path().join("planted.cfg");
            fs::write(&cfg, PLANTED_CONFIG).unwrap();
            let model = dir.path().join("planted.bin");
            ok(&["train", "--config", s(&cfg), "--tokens", s(&tokens), "--vocab", s(&vocab), "--out", s(&model)]);
            (dir, model)
        })
        .1
}

#[test]
fn planted_fill_ranks_cat_above_mouse() {
    let m = planted_model();
    let out = ok(&["query", "--model", s(m), "fill", "chase", "ARG1=dog", "ARG2=?", "--top", "40"]);
    let rank = |w: &str| stdout(&out).lines().position(|l| l.split('\t').next() == Some(w)).unwrap();
    assert!(rank("cat") < rank("mouse"), "{}", stdout(&out));
}

#[test]
fn planted_samples_are_cluster_consistent() {
    let m = planted_model();
    let model = load_model(m).unwrap();
    let out = ok(&["sample", "--model", s(m), "--count", "3000", "--burnin", "50", "--seed", "5"]);
    let consistent = |v: &str, a: &str, b: &str| {
        CHASE_LIKE.contains(&v)
            && ((DOG_LIKE.contains(&a) && CAT_LIKE.contains(&b)) || (CAT_LIKE.contains(&a) && MOUSE_LIKE.contains(&b)))
    };
    let mut hits = 0;
    for line in stdout(&out).lines() {
        let g: serde_json::Value = serde_json::from_str(line).unwrap();
        let n = |k: usize| g["nodes"][k].as_str().unwrap().to_string();
        if consistent(&n(0), &n(1), &n(2)) {
            hits += 1;
        }
    }
    // chance: three independent unigram draws
    let f: Vec<(String, f64)> = model
        .vocab
        .entries()
        .iter()
        .map(|(w, _)| w.clone())
        .zip(model.frequencies().iter().copied())
        .collect();
    let mut chance = 0.0;
    for (v, fv) in &f {
        for (a, fa) in &f {
            for (b, fb) in &f {
                if consistent(v, a, b) {
                    chance += fv * fa * fb;
                }
            }
        }
    }
    let rate = hits as f64 / 3000.0;
    assert!(rate > chance, "rate {rate:.4} vs chance {chance:.4}");
}
