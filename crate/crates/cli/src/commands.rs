use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::path::Path;

use clap::parser::ValueSource;
use clap::ArgMatches;
use fds_core::corpus::{build_vocabulary, corpus_stats, load_graphs, load_tokens, load_triples, tokenize_all, write_tokens, RawGraph};
use fds_core::eval::{convert_simlex, evaluate, nearest_neighbours, predicate_cosine, CosineMode, PairDataset};
use fds_core::generate::sample_lexicalisations;
use fds_core::io::{load_checkpoint, load_model, save_checkpoint};
use fds_core::posterior::{slot_posterior, PosteriorMethod, SamplingBudget};
use fds_core::rng::{stream_rng, Stream};
use fds_core::trainer::{init_from_pretrained, init_random, load_pretrained, with_threads, LineSink, NullSink, ProgressSink};
use fds_core::{Error, GraphShape, GraphToken, Hyperparams, LabelTable, Link, Result, SpaceConfig, TrainState, Trainer, Vocabulary};

use crate::{
    Command, ConvertSimlexArgs, EvalArgs, HyperArgs, InitMode, InputFormat, PreprocessArgs, Query, QueryArgs, SampleArgs,
    Similarity, TrainArgs,
};

pub fn run(cmd: Command, matches: &ArgMatches) -> Result<()> {
    match cmd {
        Command::Preprocess(a) => preprocess(&a),
        Command::Train(a) => train(&a, matches),
        Command::Eval(a) => eval(&a),
        Command::Query(a) => query(&a),
        Command::Sample(a) => sample(&a),
        Command::ConvertSimlex(a) => convert(&a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn read_raw(path: &Path, format: InputFormat) -> Result<Vec<RawGraph>> {
    let graphs = match format {
        InputFormat::Auto => {
            let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
            let format = if matches!(ext, "jsonl" | "json") { InputFormat::Graphs } else { InputFormat::Triples };
            return read_raw(path, format);
        }
        InputFormat::Triples => load_triples(path)?.map(|t| t.map(|t| t.to_graph())).collect::<Result<Vec<_>>>()?,
        InputFormat::Graphs => load_graphs(path)?.collect::<Result<Vec<_>>>()?,
    };
    Ok(graphs)
}

fn preprocess(a: &PreprocessArgs) -> Result<()> {
    let graphs = read_raw(&a.input, a.format)?;
    let filtered = build_vocabulary(&graphs, a.min_count)?;
    let kept: Vec<&RawGraph> = graphs.iter().zip(&filtered.kept).filter(|(_, k)| **k).map(|(g, _)| g).collect();
    let labels = LabelTable::collect(kept.iter().copied());
    let (tokens, _) = tokenize_all(kept.iter().copied(), &filtered.vocabulary, &labels);

    let mut w = create(&a.tokens)?;
    write_tokens(&mut w, &tokens, &filtered.vocabulary, &labels)?;
    w.flush().map_err(|e| Error::io(&a.tokens, e))?;
    filtered.vocabulary.save(&a.vocab)?;

    let table = corpus_stats(&tokens).to_string();
    if let Some(path) = &a.stats {
        fs::write(path, format!("{table}\n")).map_err(|e| Error::io(path, e))?;
    }
    println!("{table}");
    eprintln!(
        "kept {} of {} records, {} predicates",
        tokens.len(),
        graphs.len(),
        filtered.vocabulary.len()
    );
    Ok(())
}

/// Hyperparameters from `h`, keeping `base` for every field not set explicitly.
fn hyperparams(h: &HyperArgs, base: Hyperparams, explicit: impl Fn(&str) -> bool) -> Hyperparams {
    let mut hp = base;
    if explicit("learning_rate") {
        hp.learning_rate = h.learning_rate;
    }
    if explicit("adagrad_decay") {
        hp.adagrad_decay = h.adagrad_decay;
    }
    if explicit("adagrad_epsilon") {
        hp.adagrad_epsilon = h.adagrad_epsilon;
    }
    if explicit("l1") {
        hp.l1 = h.l1;
    }
    if explicit("l2") {
        hp.l2 = h.l2;
    }
    if explicit("batch_size") {
        hp.batch_size = h.batch_size;
    }
    if explicit("particles") {
        hp.n_particles = h.particles;
    }
    if explicit("particle_sweeps") {
        hp.particle_sweeps_per_batch = h.particle_sweeps;
    }
    if explicit("steps_per_variable") {
        hp.steps_per_variable = h.steps_per_variable;
    }
    if explicit("z_ratio_k") {
        hp.z_ratio_k = h.z_ratio_k;
    }
    if explicit("exact_z_ratio") {
        hp.exact_z_ratio = h.exact_z_ratio;
    }
    if explicit("epochs") {
        hp.epochs = h.epochs;
    }
    if explicit("seed") {
        hp.seed = h.seed;
    }
    hp
}

enum Start {
    Resume(Box<TrainState>),
    Fresh(Vocabulary, LabelTable),
}

fn train(a: &TrainArgs, matches: &ArgMatches) -> Result<()> {
    let explicit = |id: &str| matches.value_source(id) == Some(ValueSource::CommandLine);
    let (start, tokens, hp) = match &a.resume {
        Some(path) => {
            let (state, saved) = load_checkpoint(path)?;
            let (tokens, labels) = load_tokens(&a.tokens, &state.model.vocab)?;
            if labels != state.model.labels {
                return Err(Error::Data("token file link labels differ from the checkpoint".into()));
            }
            (Start::Resume(Box::new(state)), tokens, hyperparams(&a.hyper, saved, explicit))
        }
        None => {
            let vocab_path = a.vocab.as_deref().ok_or_else(|| Error::Config("--vocab is required".into()))?;
            let vocab = Vocabulary::load(vocab_path)?;
            let (tokens, labels) = load_tokens(&a.tokens, &vocab)?;
            (Start::Fresh(vocab, labels), tokens, hyperparams(&a.hyper, Hyperparams::default(), |_| true))
        }
    };
    hp.validate()?;
    eprintln!("seed: {}", hp.seed);

    let mut trainer = match start {
        Start::Resume(state) => Trainer::resume(*state, &tokens, hp)?,
        Start::Fresh(vocab, labels) => {
            let config = SpaceConfig::new(a.dims, a.cardinality)?;
            let model = match a.init {
                InitMode::Random => {
                    init_random(config, labels, vocab, &mut stream_rng(hp.seed, Stream::Init, [0, 0, 0]))?
                }
                InitMode::Pretrained => {
                    let path = a
                        .pretrained
                        .as_deref()
                        .ok_or_else(|| Error::Config("--init pretrained needs --pretrained".into()))?;
                    let vectors = load_pretrained(path, &vocab, a.dims)?;
                    init_from_pretrained(&vectors, &tokens, config, labels, vocab)?
                }
            };
            Trainer::new(model, &tokens, hp)?
        }
    };

    with_threads(a.threads, || run_training(&mut trainer, a))??;
    let s = trainer.state();
    eprintln!("stopped at epoch {} batch {}; wrote {}", s.epoch, s.batch, a.out.display());
    Ok(())
}

fn run_training(trainer: &mut Trainer<'_>, a: &TrainArgs) -> Result<()> {
    let mut stderr_sink = LineSink(io::stderr());
    let sink: &mut dyn ProgressSink = if a.progress { &mut stderr_sink } else { &mut NullSink };
    let bpe = trainer.batches_per_epoch();
    let position = |t: &Trainer<'_>| t.state().epoch * bpe + t.state().batch;
    let mut left = a.max_batches;
    while !trainer.is_finished() && left != Some(0) {
        let chunk = match (a.checkpoint_every, left) {
            (0, l) => l,
            (k, None) => Some(k),
            (k, Some(l)) => Some(k.min(l)),
        };
        let before = position(trainer);
        trainer.run(sink, chunk)?;
        let ran = position(trainer) - before;
        left = left.map(|l| l.saturating_sub(ran));
        if a.checkpoint_every > 0 {
            save_checkpoint(&a.out, trainer.state(), trainer.hyperparams())?;
        }
        if chunk.is_none() || ran == 0 {
            break;
        }
    }
    save_checkpoint(&a.out, trainer.state(), trainer.hyperparams())
}

fn cosine_mode(s: Similarity) -> CosineMode {
    match s {
        Similarity::WithBias => CosineMode::WithBias,
        Similarity::WeightsOnly => CosineMode::WeightsOnly,
    }
}

fn eval(a: &EvalArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let dataset = PairDataset::load(&a.dataset)?;
    let report = evaluate(&model, &dataset, cosine_mode(a.similarity))?;
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{report}");
    }
    Ok(())
}

fn query(a: &QueryArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let mode = cosine_mode(a.similarity);
    let require = |w: &str| model.vocab.id(w).ok_or_else(|| Error::UnknownPredicate(w.to_string()));
    match &a.query {
        Query::Sim { first, second } => {
            let s = predicate_cosine(&model, require(first)?, require(second)?, mode)?;
            println!("{s:.6}");
        }
        Query::Neighbors { word, k } => {
            for (c, s) in nearest_neighbours(&model, require(word)?, *k, mode)? {
                println!("{}\t{s:.6}", model.vocab.name(c));
            }
        }
        Query::Fill { head, args } => {
            let mut words = vec![head.as_str()];
            let mut links = Vec::new();
            for arg in args {
                let (label, word) = arg
                    .split_once('=')
                    .ok_or_else(|| Error::Config(format!("expected LABEL=WORD, got `{arg}`")))?;
                let label = model.labels.get(label).ok_or_else(|| Error::UnknownLabel(label.to_string()))?;
                words.push(word);
                links.push(Link::new(0, label, words.len() - 1));
            }
            let open: Vec<usize> = (0..words.len()).filter(|&i| words[i] == "?").collect();
            let [slot] = open[..] else {
                return Err(Error::Config(format!("fill needs exactly one `?`, found {}", open.len())));
            };
            let nodes = words
                .iter()
                .map(|w| if *w == "?" { Ok(None) } else { require(w).map(Some) })
                .collect::<Result<Vec<_>>>()?;
            eprintln!("seed: {}", a.seed);
            let budget = SamplingBudget::new(a.samples, a.seed);
            let method = if a.force_sampling {
                PosteriorMethod::Sampling(budget)
            } else {
                PosteriorMethod::Auto(budget)
            };
            let post = slot_posterior(&model, &nodes, &links, slot, method)?;
            let mut ranked: Vec<(usize, f64)> = post.into_iter().enumerate().collect();
            ranked.sort_by(|x, y| y.1.total_cmp(&x.1).then(x.0.cmp(&y.0)));
            for (c, p) in ranked.into_iter().take(a.top) {
                println!("{}\t{p:.6}", model.vocab.entries()[c].0);
            }
        }
    }
    Ok(())
}

fn sample(a: &SampleArgs) -> Result<()> {
    let shape = GraphShape::by_name(&a.shape)
        .ok_or_else(|| Error::Config(format!("unknown shape `{}` (expected svo, sv, vo or single)", a.shape)))?;
    let model = load_model(&a.model)?;
    eprintln!("seed: {}", a.seed);
    let graphs = sample_lexicalisations(&model, &shape, a.burnin, a.count, a.seed)?;
    let tokens: Vec<GraphToken> = graphs
        .into_iter()
        .map(|nodes| GraphToken {
            nodes,
            links: shape.links.clone(),
        })
        .collect();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    write_tokens(&mut out, &tokens, &model.vocab, &model.labels)?;
    out.flush()?;
    Ok(())
}

fn convert(a: &ConvertSimlexArgs) -> Result<()> {
    let f = File::open(&a.input).map_err(|e| Error::io(&a.input, e))?;
    let reader = BufReader::new(f);
    let n = match &a.out {
        Some(path) => {
            let mut w = create(path)?;
            let n = convert_simlex(reader, &mut w)?;
            w.flush().map_err(|e| Error::io(path, e))?;
            n
        }
        None => convert_simlex(reader, io::stdout().lock())?,
    };
    eprintln!("converted {n} pairs");
    Ok(())
}
