//! Acceptance suite. Prints one PASS/FAIL/SKIP line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criterion 9 needs external data and runs only when these are set:
//! `TOKLAB_LD_DATA` (lexical decision CSV), `TOKLAB_NEWS_CORPUS` (one
//! sentence per line) and `TOKLAB_MORPHEMES` (annotation TSV).

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use toklab::evalpipe::{self, NamedModel, Signal, WordClass};
use toklab::metrics::{chunkability, Metric};
use toklab::stats;
use toklab::synth::{self, SynthLanguage};
use toklab::unigram::ViterbiLexicon;
use toklab::{train_model, Algorithm, Corpus, Exec, Tokenization, TokenizerModel, TrainFlags};

const CHUNK_TOL: f64 = 0.005;
const VITERBI_TOL: f64 = 1e-12;
const PEARSON_TOL: f64 = 1e-12;
const MINMAX_TOL: f64 = 1e-12;
const SIM_P_TOL: f64 = 0.01;
const MSE_MAX: f64 = 1e-20;
const EV_MIN: f64 = 1.0 - 1e-12;
const SIGN_R_MIN: f64 = 0.5;
const DETERMINISM_BUDGET_SECS: f64 = 300.0;

const DESK_SENTENCES: usize = 10_000;
const DESK_STEMS: usize = 12_000;
const DESK_SEED: u64 = 2024;

struct Outcome {
    pass: Option<bool>,
    detail: String,
}

fn pass(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass: Some(ok),
        detail: detail.into(),
    }
}

fn desk() -> (SynthLanguage, Corpus) {
    let lang = SynthLanguage::new(DESK_STEMS, DESK_SEED);
    let corpus = lang.corpus(DESK_SENTENCES, DESK_SEED);
    (lang, corpus)
}

fn train(alg: Algorithm, corpus: &Corpus, size: usize, exec: Exec) -> TokenizerModel {
    train_model(alg, std::slice::from_ref(corpus), size, &TrainFlags::default(), exec).expect("training")
}

fn reference_chunkability() -> Outcome {
    let cases: [(&str, &[&str], Option<&str>, f64); 4] = [
        ("seafood", &["seafood"], None, 0.86),
        ("outfoxed", &["out", "fo", "x", "ed"], None, 0.50),
        ("brithbloom", &["br", "##ith", "##blo", "##om"], Some("##"), 0.60),
        ("catchwind", &["catch", "##wind"], Some("##"), 0.78),
    ];
    let mut worst: f64 = 0.0;
    for (src, toks, marker, want) in cases {
        let t = Tokenization {
            source: src.into(),
            tokens: toks.iter().map(|s| s.to_string()).collect(),
            marker: marker.map(String::from),
        };
        worst = worst.max((chunkability(&t) - want).abs());
    }
    pass(worst <= CHUNK_TOL, format!("max deviation {worst:.4} (tol {CHUNK_TOL})"))
}

fn round_trip(corpus: &Corpus) -> Outcome {
    let words = synth::sample_words(corpus, 10_000, 1);
    let mut total = 0;
    let mut good = 0;
    let mut notes = Vec::new();
    for alg in [Algorithm::Bpe, Algorithm::Wpc, Algorithm::Uni] {
        for size in [1_000, 50_000] {
            let model = train(alg, corpus, size, Exec::default());
            let encoded = model.encode_batch(&words, Exec::default()).expect("encode");
            let ok = encoded.iter().filter(|t| t.round_trips()).count();
            total += encoded.len();
            good += ok;
            notes.push(format!("{alg}@{size}:{}", model.vocabulary().len()));
        }
    }
    pass(good == total, format!("{good}/{total} round-trip [{}]", notes.join(" ")))
}

fn determinism(corpus: &Corpus) -> Outcome {
    let probe = synth::sample_words(corpus, 1_000, 2);
    let mut ok = true;
    let mut times = Vec::new();
    for alg in [Algorithm::Bpe, Algorithm::Wpc, Algorithm::Uni] {
        let start = Instant::now();
        let a = train(alg, corpus, 10_000, Exec::Sequential);
        let secs = start.elapsed().as_secs_f64();
        let b = train(alg, corpus, 10_000, Exec::default());
        let same_vocab = a.vocabulary().tokens() == b.vocabulary().tokens();
        let ea = a.encode_batch(&probe, Exec::Sequential).expect("encode");
        let eb = b.encode_batch(&probe, Exec::default()).expect("encode");
        ok &= same_vocab && ea == eb && a.to_json().unwrap() == b.to_json().unwrap() && secs < DETERMINISM_BUDGET_SECS;
        times.push(format!("{alg} {secs:.1}s"));
    }
    pass(ok, format!("sequential vs parallel runs identical; {}", times.join(", ")))
}

fn nesting(corpus: &Corpus, alg: Algorithm) -> Outcome {
    let probe = synth::sample_words(corpus, 1_000, 3);
    let small = train(alg, corpus, 10_000, Exec::default());
    let large = train(alg, corpus, 20_000, Exec::default());
    let prefix = large.vocabulary().tokens().starts_with(small.vocabulary().tokens())
        && large.merges().unwrap().starts_with(small.merges().unwrap());
    let ks = small.encode_batch(&probe, Exec::default()).unwrap();
    let kl = large.encode_batch(&probe, Exec::default()).unwrap();
    let increases = ks.iter().zip(&kl).filter(|(s, l)| l.k() > s.k()).count();
    pass(
        prefix && increases == 0,
        format!(
            "prefix={prefix} sizes {}/{} words with more tokens at 20k: {increases}",
            small.vocabulary().len(),
            large.vocabulary().len()
        ),
    )
}

fn brute_force(lex: &HashMap<String, f64>, s: &[char]) -> f64 {
    let n = s.len();
    let mut best = f64::NEG_INFINITY;
    for mask in 0u32..(1 << (n - 1)) {
        let mut total = 0.0;
        let mut start = 0;
        let mut valid = true;
        for end in 1..=n {
            if end == n || mask & (1 << (end - 1)) != 0 {
                let piece: String = s[start..end].iter().collect();
                match lex.get(&piece) {
                    Some(lp) => total += lp,
                    None => {
                        valid = false;
                        break;
                    }
                }
                start = end;
            }
        }
        if valid {
            best = best.max(total);
        }
    }
    best
}

fn viterbi_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let alphabet = ['a', 'b', 'c'];
    let mut worst: f64 = 0.0;
    for _ in 0..1_000 {
        let mut weights: HashMap<String, f64> = alphabet.iter().map(|c| (c.to_string(), rng.random_range(0.01..1.0))).collect();
        for _ in 0..rng.random_range(0..20) {
            let len = rng.random_range(2..=6);
            let t: String = (0..len).map(|_| alphabet[rng.random_range(0..3)]).collect();
            weights.insert(t, rng.random_range(0.01..1.0));
        }
        let z: f64 = weights.values().sum();
        let lex: HashMap<String, f64> = weights.into_iter().map(|(t, w)| (t, (w / z).ln())).collect();
        let len = rng.random_range(1..=10);
        let s: Vec<char> = (0..len).map(|_| alphabet[rng.random_range(0..3)]).collect();
        let text: String = s.iter().collect();
        let (_, lp) = ViterbiLexicon::from_log_probs(lex.clone()).segment(&text);
        worst = worst.max((lp - brute_force(&lex, &s)).abs());
    }
    pass(worst <= VITERBI_TOL, format!("1000 instances, max |diff| {worst:.2e}"))
}

fn two_pass(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

/// Share of `draws` samples (size n, trivariate normal with
/// corr(x1,y) = corr(x2,y) = rho, corr(x1,x2) = r12) whose |atanh r1 -
/// atanh r2| reaches `observed`.
fn simulated_p(rho: f64, r12: f64, n: usize, observed: f64, draws: usize, seed: u64) -> f64 {
    let l21 = r12;
    let l22 = (1.0 - r12 * r12).sqrt();
    let l31 = rho;
    let l32 = (rho - l21 * l31) / l22;
    let l33 = (1.0 - l31 * l31 - l32 * l32).sqrt();
    const BLOCK: usize = 1_000;
    let hits = Exec::default().map_range(draws / BLOCK, |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(b as u64));
        let (mut x1, mut x2, mut y) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut hits = 0usize;
        for _ in 0..BLOCK {
            for i in 0..n {
                let a: f64 = StandardNormal.sample(&mut rng);
                let c: f64 = StandardNormal.sample(&mut rng);
                let d: f64 = StandardNormal.sample(&mut rng);
                x1[i] = a;
                x2[i] = l21 * a + l22 * c;
                y[i] = l31 * a + l32 * c + l33 * d;
            }
            let diff = two_pass(&x1, &y).atanh() - two_pass(&x2, &y).atanh();
            if diff.abs() >= observed.abs() {
                hits += 1;
            }
        }
        hits
    });
    hits.iter().sum::<usize>() as f64 / draws as f64
}

fn statistics_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst_r: f64 = 0.0;
    for _ in 0..1_000 {
        let n = rng.random_range(4..200);
        let slope = rng.random_range(-2.0..2.0);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-100.0..100.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| slope * v + rng.random_range(-100.0..100.0)).collect();
        worst_r = worst_r.max((stats::pearson(&x, &y).unwrap() - two_pass(&x, &y)).abs());
    }

    let equal = stats::compare_dependent_correlations(0.42, 0.42, 0.3, 250).unwrap().p_value;

    let configs: [(f64, f64, f64, usize); 10] = [
        (0.30, 0.20, 0.50, 200),
        (0.35, 0.20, 0.60, 200),
        (0.10, 0.00, 0.30, 200),
        (0.50, 0.40, 0.70, 200),
        (-0.20, -0.30, 0.40, 200),
        (0.25, 0.15, 0.00, 200),
        (0.40, 0.25, 0.80, 200),
        (0.05, -0.05, 0.20, 200),
        (0.60, 0.55, 0.50, 200),
        (-0.10, 0.05, 0.60, 200),
    ];
    let mut worst_p: f64 = 0.0;
    for (i, &(r1, r2, r12, n)) in configs.iter().enumerate() {
        let analytic = stats::compare_dependent_correlations(r1, r2, r12, n).unwrap().p_value;
        let rho = ((r1.atanh() + r2.atanh()) / 2.0).tanh();
        let sim = simulated_p(rho, r12, n, r1.atanh() - r2.atanh(), 100_000, 100 + i as u64);
        worst_p = worst_p.max((analytic - sim).abs());
    }

    let mut worst_mm: f64 = 0.0;
    for _ in 0..1_000 {
        let v: Vec<f64> = (0..rng.random_range(2..50)).map(|_| rng.random_range(-1e3..1e3)).collect();
        let m = stats::MinMax::fit(&v).unwrap();
        for &x in &v {
            worst_mm = worst_mm.max((m.inverse(m.transform(x)) - x).abs());
        }
    }
    pass(
        worst_r <= PEARSON_TOL && equal == 1.0 && worst_p <= SIM_P_TOL && worst_mm <= MINMAX_TOL,
        format!(
            "pearson max diff {worst_r:.1e}; p(r1=r2)={equal}; simulated p max diff {worst_p:.4} over 10 configs; minmax max diff {worst_mm:.1e}"
        ),
    )
}

fn regression_sanity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x: Vec<f64> = (0..200).map(|_| rng.random_range(0.0..1.0)).collect();
    let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0).collect();
    let exact = stats::linreg_holdout(&x, &y, 0.8, 13).unwrap();
    let mut ev_sum = 0.0;
    for seed in 0..100u64 {
        let mut r = ChaCha8Rng::seed_from_u64(1_000 + seed);
        let x: Vec<f64> = (0..200).map(|_| r.random_range(0.0..1.0)).collect();
        let mut y: Vec<f64> = x.iter().map(|v| 2.0 * v + 1.0 + r.random_range(-0.5..0.5)).collect();
        for i in (1..y.len()).rev() {
            let j = r.random_range(0..=i);
            y.swap(i, j);
        }
        ev_sum += stats::linreg_holdout(&x, &y, 0.8, seed).unwrap().explained_variance;
    }
    let mean_ev = ev_sum / 100.0;
    pass(
        exact.mse <= MSE_MAX && exact.explained_variance >= EV_MIN && mean_ev <= 0.0,
        format!(
            "noiseless mse {:.1e}, ev {}; shuffled mean ev {mean_ev:.4}",
            exact.mse, exact.explained_variance
        ),
    )
}

fn sign_structure(lang: &SynthLanguage, corpus: &Corpus) -> Outcome {
    let model = train(Algorithm::Bpe, corpus, 1_000, Exec::default());
    let words: Vec<String> = lang.words.iter().take(500).map(|w| w.surface.clone()).collect();
    let nonwords = lang.nonwords(500, 8);
    let stimuli = synth::constructed_stimuli(&model, &words, &nonwords, 8).unwrap();
    let named = [NamedModel::new("bpe", model)];
    let (_, report) = evalpipe::run_cognitive_eval(
        &named,
        &stimuli,
        &[Metric::Chunkability],
        &Signal::ALL,
        "desk",
        Exec::default(),
    )
    .unwrap();
    let r = |s, c| {
        report
            .row("bpe", Metric::Chunkability, s, c)
            .and_then(|row| row.r)
            .unwrap_or(f64::NAN)
    };
    let cells = [
        (r(Signal::Rt, WordClass::Words), -1.0),
        (r(Signal::Accuracy, WordClass::Words), 1.0),
        (r(Signal::Rt, WordClass::Nonwords), 1.0),
        (r(Signal::Accuracy, WordClass::Nonwords), -1.0),
    ];
    let ok = cells.iter().all(|(r, sign)| r * sign >= SIGN_R_MIN);
    pass(
        ok && words.len() == 500 && nonwords.len() == 500,
        format!(
            "r: words rt {:.3}, words acc {:.3}, nonwords rt {:.3}, nonwords acc {:.3}",
            cells[0].0, cells[1].0, cells[2].0, cells[3].0
        ),
    )
}

fn external_data() -> Outcome {
    let (Ok(data), Ok(news), Ok(morph)) = (
        std::env::var("TOKLAB_LD_DATA"),
        std::env::var("TOKLAB_NEWS_CORPUS"),
        std::env::var("TOKLAB_MORPHEMES"),
    ) else {
        return Outcome {
            pass: None,
            detail: "external lexical decision data, news corpus and morpheme file not configured".into(),
        };
    };
    let corpus = Corpus::load(&news, Some(100_000)).expect("corpus");
    let stimuli = toklab::textio::load_lexical_decision(&data, &Default::default())
        .expect("stimuli")
        .stimuli;
    let inventory = toklab::textio::load_morpheme_inventory(&morph, 0.001).expect("morphemes");
    let models: Vec<NamedModel> = [Algorithm::Bpe, Algorithm::Wpc, Algorithm::Uni]
        .into_iter()
        .map(|a| NamedModel::new(a.to_string(), train(a, &corpus, 50_000, Exec::default())))
        .collect();
    let (_, report) =
        evalpipe::run_cognitive_eval(&models, &stimuli, &[Metric::Chunkability], &Signal::ALL, "external", Exec::default())
            .expect("eval");
    let mut uni_lower = 0;
    let mut cells = 0;
    let mut all_significant = true;
    for s in Signal::ALL {
        for c in WordClass::ALL {
            let get = |id: &str| report.row(id, Metric::Chunkability, s, c).unwrap();
            let uni = get("uni").r.unwrap_or(0.0).abs();
            cells += 1;
            if uni < get("bpe").r.unwrap_or(0.0).abs() && uni < get("wpc").r.unwrap_or(0.0).abs() {
                uni_lower += 1;
            }
            for id in ["bpe", "wpc", "uni"] {
                all_significant &= get(id).vs_baseline.as_ref().is_some_and(|b| b.p_value < 0.01);
            }
        }
    }
    let wpc_cov = evalpipe::morph_coverage(models[1].model.vocabulary(), &inventory).unwrap();
    let uni_cov = evalpipe::morph_coverage(models[2].model.vocabulary(), &inventory).unwrap();
    pass(
        uni_lower * 2 > cells && all_significant && wpc_cov >= uni_cov,
        format!("uni lowest in {uni_lower}/{cells} cells; all vs-length p<0.01: {all_significant}; coverage wpc {wpc_cov:.3} uni {uni_cov:.3}"),
    )
}

fn main() {
    // `cargo test` passes harness flags such as `--quiet`; listing mode
    // prints nothing so test discovery stays fast.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let (lang, corpus) = desk();
    let distinct: BTreeSet<&str> = corpus.sentences.iter().flat_map(|s| s.split_whitespace()).collect();
    println!(
        "desk corpus: {} sentences, {} distinct words, {} lexicon entries",
        corpus.len(),
        distinct.len(),
        lang.words.len()
    );

    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let checks: Vec<(&str, Check)> = vec![
        ("AC1 reference chunkability values", Box::new(reference_chunkability)),
        ("AC2 round-trip at 1k and 50k", Box::new(|| round_trip(&corpus))),
        ("AC3 training determinism", Box::new(|| determinism(&corpus))),
        ("AC4 merge-order nesting 10k -> 20k (bpe)", Box::new(|| nesting(&corpus, Algorithm::Bpe))),
        ("AC4 merge-order nesting 10k -> 20k (wpc)", Box::new(|| nesting(&corpus, Algorithm::Wpc))),
        ("AC5 Viterbi vs exhaustive enumeration", Box::new(viterbi_oracle)),
        ("AC6 statistics oracles", Box::new(statistics_oracles)),
        ("AC7 regression sanity", Box::new(regression_sanity)),
        ("AC8 sign structure on constructed fixture", Box::new(|| sign_structure(&lang, &corpus))),
        ("AC9 external-data orderings", Box::new(external_data)),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let start = Instant::now();
        let out = check();
        let label = match out.pass {
            Some(true) => "PASS",
            Some(false) => {
                failed += 1;
                "FAIL"
            }
            None => "SKIP",
        };
        println!("{label} {name}: {} ({:.1}s)", out.detail, start.elapsed().as_secs_f64());
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
