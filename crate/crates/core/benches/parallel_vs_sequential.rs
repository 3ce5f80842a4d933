use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use idiom_graph_core::align::{propose_intra_lingual, SimilarityParams, HASHED_PROVIDER_ID};
use idiom_graph_core::annotation::SemanticCategory;
use idiom_graph_core::engine::Engine;
use idiom_graph_core::fixtures::{fixture_services, planted_engine, simulation_fixture, synthetic_expression};
use idiom_graph_core::metrics::{semantic_coherence, simulate_seeds, ReviewPolicy, SimulationConfig};
use idiom_graph_core::par::Execution;

const STRATEGIES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn corpus_engine(n: usize) -> Engine {
    let vocab = ["dil", "man", "bhaari", "udaas", "neend", "tension", "ghabraahat", "thakaan", "sar", "dard"];
    let mut engine = Engine::new(fixture_services());
    for i in 0..n {
        let text = format!("{} {} {} shabd{i}", vocab[i % 10], vocab[(i / 10) % 10], vocab[(i * 7) % 10]);
        engine.add_expression(synthetic_expression(&text, "hi", SemanticCategory::Emotion)).unwrap();
    }
    engine.embed_expressions(HASHED_PROVIDER_ID).unwrap();
    engine
}

fn all_pairs(c: &mut Criterion) {
    let mut group = c.benchmark_group("intra_lingual_all_pairs");
    group.sample_size(10);
    for n in [200, 600] {
        let engine = corpus_engine(n);
        let params = SimilarityParams { provider_id: HASHED_PROVIDER_ID.into(), k: 5, tau: 0.7 };
        for (name, exec) in STRATEGIES {
            group.bench_with_input(BenchmarkId::new(name, n), &n, |b, _| {
                b.iter(|| {
                    propose_intra_lingual(engine.graph(), engine.embeddings(), "hi", black_box(&params), exec).unwrap()
                })
            });
        }
    }
    group.finish();
}

fn coherence(c: &mut Criterion) {
    let (engine, _) = planted_engine(fixture_services()).unwrap();
    let mut group = c.benchmark_group("semantic_coherence");
    for (name, exec) in STRATEGIES {
        group.bench_function(name, |b| {
            b.iter(|| semantic_coherence(engine.graph(), |n| engine.vector_for(HASHED_PROVIDER_ID, n), exec).unwrap())
        });
    }
    group.finish();
}

fn seed_sweep(c: &mut Criterion) {
    let f = simulation_fixture(fixture_services()).unwrap();
    let config = SimulationConfig {
        seed: 0,
        true_edge_set: f.true_edge_set.clone(),
        validator_accuracy: 0.9,
        policy: ReviewPolicy::Active,
        target_f1: 0.9,
        batch_size: 4,
    };
    let seeds: Vec<u64> = (1..=4).collect();
    let mut group = c.benchmark_group("simulate_seeds");
    group.sample_size(10);
    for (name, exec) in STRATEGIES {
        group.bench_function(name, |b| {
            b.iter(|| simulate_seeds(&f.engine, &config, &f.candidates, black_box(&seeds), exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, all_pairs, coherence, seed_sweep);
criterion_main!(benches);
