use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use toklab::evalpipe::{self, MetricsTable, NamedModel, Signal};
use toklab::metrics::Metric;
use toklab::synth::{self, SynthLanguage};
use toklab::{train_model, Algorithm, Corpus, Exec, TrainFlags};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn fixture() -> (SynthLanguage, Corpus) {
    let lang = SynthLanguage::new(4_000, 11);
    let corpus = lang.corpus(5_000, 11);
    (lang, corpus)
}

fn training(c: &mut Criterion) {
    let (_, corpus) = fixture();
    let corpora = [corpus];
    let mut group = c.benchmark_group("train");
    group.sample_size(10);
    for alg in [Algorithm::Bpe, Algorithm::Wpc, Algorithm::Uni] {
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(alg.to_string(), name), &exec, |b, &exec| {
                b.iter(|| train_model(alg, &corpora, 4_000, &TrainFlags::default(), exec).unwrap())
            });
        }
    }
    group.finish();
}

fn encoding(c: &mut Criterion) {
    let (_, corpus) = fixture();
    let words = synth::sample_words(&corpus, 20_000, 3);
    let mut group = c.benchmark_group("encode_batch");
    for alg in [Algorithm::Bpe, Algorithm::Wpc, Algorithm::Uni] {
        let model = train_model(alg, std::slice::from_ref(&corpus), 4_000, &TrainFlags::default(), Exec::default()).unwrap();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(alg.to_string(), name), &exec, |b, &exec| {
                b.iter(|| model.encode_batch(&words, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn report_cells(c: &mut Criterion) {
    let (lang, corpus) = fixture();
    let models: Vec<NamedModel> = [1_000, 2_000, 4_000]
        .into_iter()
        .map(|size| {
            let m = train_model(Algorithm::Bpe, std::slice::from_ref(&corpus), size, &TrainFlags::default(), Exec::default())
                .unwrap();
            NamedModel::new(format!("bpe-{size}"), m)
        })
        .collect();
    let words: Vec<String> = lang.words.iter().take(2_000).map(|w| w.surface.clone()).collect();
    let nonwords = lang.nonwords(2_000, 5);
    let stimuli = synth::constructed_stimuli(&models[0].model, &words, &nonwords, 5).unwrap();
    let table = MetricsTable::compute(&models, &stimuli, Exec::default()).unwrap();
    let mut group = c.benchmark_group("report");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("metrics_table", name), &exec, |b, &exec| {
            b.iter(|| MetricsTable::compute(&models, &stimuli, exec).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("correlations", name), &exec, |b, &exec| {
            b.iter(|| evalpipe::report_from_table(&table, &Metric::ALL, &Signal::ALL, "bench", exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, training, encoding, report_cells);
criterion_main!(benches);
