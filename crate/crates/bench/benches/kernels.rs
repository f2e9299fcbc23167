use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use fds_core::cardinality::{log_partition_cardinality, sample_cardinality, uniform_entity, UnitPotentials};
use fds_core::corpus::{build_vocabulary, tokenize_all, RawGraph, TripleRecord};
use fds_core::mcmc::{average_predicate, sweep_token, LatentState, UnigramSampler, ZRatio};
use fds_core::rng::seeded;
use fds_core::synthetic::planted_triples;
use fds_core::trainer::{init_random, NullSink};
use fds_core::{GraphShape, GraphToken, Hyperparams, LabelTable, PredicateId, SpaceConfig, Trainer, Vocabulary};
use rand::Rng;

fn random_theta(n: usize, seed: u64) -> UnitPotentials {
    let mut rng = seeded(seed);
    UnitPotentials::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect())
}

fn cardinality(c: &mut Criterion) {
    let mut group = c.benchmark_group("cardinality");
    for (n, k) in [(40, 5), (400, 40)] {
        let theta = random_theta(n, 1);
        group.bench_function(format!("log_partition N={n} C={k}"), |b| {
            b.iter(|| log_partition_cardinality(black_box(&theta), k))
        });
        let mut rng = seeded(2);
        group.bench_function(format!("sample N={n} C={k}"), |b| {
            b.iter(|| sample_cardinality(black_box(&theta), k, &mut rng))
        });
    }
    group.finish();
}

fn mh_sweep(c: &mut Criterion) {
    let vocab = Vocabulary::from_ordered((0..1000).map(|i| (format!("p{i}"), 1000 - i as u64)).collect()).unwrap();
    let model = init_random(SpaceConfig::new(400, 40).unwrap(), LabelTable::default(), vocab, &mut seeded(3)).unwrap();
    let token = GraphToken {
        nodes: vec![PredicateId(5), PredicateId(17), PredicateId(230)],
        links: GraphShape::svo().links,
    };
    let mut rng = seeded(4);
    let state = LatentState {
        entities: (0..3).map(|_| uniform_entity(400, 40, &mut rng)).collect(),
        neg_predicates: vec![PredicateId(0); 3],
    };
    let unigram = UnigramSampler::new(&model);
    let avg = average_predicate(&model, 1.0);

    let mut group = c.benchmark_group("mh_sweep svo N=400 C=40 V=1000");
    for (name, z) in [("approx", ZRatio::Approx(&avg)), ("exact", ZRatio::Exact)] {
        group.bench_function(name, |b| {
            b.iter_batched_ref(
                || state.clone(),
                |s| sweep_token(&token, s, &model, z, &unigram, 1, &mut rng),
                BatchSize::SmallInput,
            )
        });
    }
    group.finish();
}

fn training_batch(c: &mut Criterion) {
    let graphs: Vec<RawGraph> = planted_triples(5_000, 1).iter().map(TripleRecord::to_graph).collect();
    let filtered = build_vocabulary(&graphs, 5).unwrap();
    let labels = LabelTable::default();
    let (tokens, _) = tokenize_all(&graphs, &filtered.vocabulary, &labels);
    let model = init_random(SpaceConfig::new(40, 5).unwrap(), labels, filtered.vocabulary, &mut seeded(1)).unwrap();
    let hp = Hyperparams {
        epochs: 1_000,
        ..Hyperparams::default()
    };
    let mut trainer = Trainer::new(model, &tokens, hp).unwrap();
    c.bench_function("train batch N=40 C=5 batch=100", |b| {
        b.iter(|| trainer.run(&mut NullSink, Some(1)).unwrap())
    });
}

criterion_group!(benches, cardinality, mh_sweep, training_batch);
criterion_main!(benches);
