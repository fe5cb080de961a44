use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use toklab::evalpipe::{self, MetricsTable, NamedModel, Signal, SweepConfig};
use toklab::metrics::Metric;
use toklab::textio::{self, ColumnSchema, Corpus, Stimulus};
use toklab::vocab::{self, Algorithm, ExternalFormat, TokenizerModel, MODEL_FORMAT_VERSION};
use toklab::{synth, Error, Exec};

use crate::{Cli, Cmd, DataOpts, EXIT_DATA, EXIT_INVARIANT, EXIT_USAGE};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Lab(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Lab(Error::InvalidArgument(_)) => EXIT_USAGE,
            CliError::Lab(e) if e.is_invariant_violation() => EXIT_INVARIANT,
            _ => EXIT_DATA,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Serialize)]
struct Snapshot<'a> {
    tool: &'static str,
    version: &'static str,
    model_format_version: u32,
    threads: usize,
    seed: u64,
    config_file: Option<&'a Path>,
    command: &'a Cmd,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn with_extension(path: &Path, ext: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.{ext}"))
}

/// `<out>.run.json`: resolved options and tool version.
fn write_snapshot(cli: &Cli, out: &Path) -> Result<()> {
    let cmd = cli.command.as_ref().expect("dispatched command");
    let snap = Snapshot {
        tool: "toklab",
        version: env!("CARGO_PKG_VERSION"),
        model_format_version: MODEL_FORMAT_VERSION,
        threads: cli.threads,
        seed: cli.seed,
        config_file: cli.config.as_deref(),
        command: cmd,
    };
    let path = sibling(out, ".run.json");
    let text = serde_json::to_string_pretty(&snap).map_err(Error::from)? + "\n";
    fs::write(&path, text).map_err(io_err(&path))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(io_err(p)),
        _ => Ok(()),
    }
}

fn executor(threads: usize) -> Result<Exec> {
    if threads == 1 {
        return Ok(Exec::Sequential);
    }
    #[cfg(feature = "parallel")]
    {
        // A second initialization (only possible in-process) keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
        Ok(Exec::Parallel)
    }
    #[cfg(not(feature = "parallel"))]
    {
        log::warn!("built without the `parallel` feature; ignoring --threads {threads}");
        Ok(Exec::Sequential)
    }
}

fn load_corpora(paths: &[PathBuf], limit: Option<usize>) -> Result<Vec<Corpus>> {
    Ok(paths
        .iter()
        .map(|p| Corpus::load(p, limit))
        .collect::<toklab::Result<_>>()?)
}

fn schema(col_sequence: &str, col_is_word: &str, col_rt: &str, col_accuracy: &str) -> ColumnSchema {
    ColumnSchema {
        sequence: col_sequence.into(),
        is_word: col_is_word.into(),
        rt: col_rt.into(),
        accuracy: col_accuracy.into(),
    }
}

fn load_stimuli(d: &DataOpts) -> Result<Vec<Stimulus>> {
    let data = textio::load_lexical_decision(
        &d.data,
        &schema(&d.col_sequence, &d.col_is_word, &d.col_rt, &d.col_accuracy),
    )?;
    match &d.rt_percentiles {
        None => Ok(data.stimuli),
        Some(p) => {
            let before = data.stimuli.len();
            let kept = textio::filter_rt_percentiles(&data.stimuli, p[0], p[1])?;
            log::info!("response-time trimming kept {} of {before} stimuli", kept.len());
            Ok(kept)
        }
    }
}

fn parse_list<T: std::str::FromStr<Err = Error>>(items: &[String]) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(items.len());
    for s in items {
        out.push(s.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?);
    }
    if out.is_empty() {
        return Err(CliError::Usage("empty list".into()));
    }
    Ok(out)
}

fn dataset_label(explicit: &Option<String>, data: &Path) -> String {
    explicit.clone().unwrap_or_else(|| {
        data.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "data".into())
    })
}

fn model_id(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "model".into())
}

/// A closed pipe (`toklab encode ... | head`) is not an error.
fn print_stdout(text: &str) -> Result<()> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(CliError::Io {
            path: PathBuf::from("<stdout>"),
            source: e,
        }),
        _ => Ok(()),
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let exec = executor(cli.threads)?;
    let cmd = cli.command.as_ref().expect("checked by caller");
    match cmd {
        Cmd::Train(a) => {
            let corpora = load_corpora(&a.corpus, a.train.limit)?;
            let model = toklab::train_model(a.algo, &corpora, a.vocab_size, &a.train.flags(cli.seed), exec)?;
            ensure_parent(&a.out)?;
            model.save(&a.out)?;
            write_snapshot(cli, &a.out)?;
            log::info!("{} tokens written to {}", model.vocabulary().len(), a.out.display());
        }
        Cmd::Encode(a) => {
            let model = TokenizerModel::load(&a.model)?;
            let mut sequences = a.sequences.clone();
            if let Some(input) = &a.input {
                let text = fs::read_to_string(input).map_err(io_err(input))?;
                sequences.extend(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from));
            }
            if sequences.is_empty() {
                return Err(CliError::Usage("no sequences to encode".into()));
            }
            let normalized: Vec<String> = sequences.iter().map(|s| model.normalize(s)).collect();
            let encoded = model.encode_batch(&normalized, exec)?;
            let mut text = String::new();
            for t in encoded {
                text.push_str(&t.tokens.join(" "));
                text.push('\n');
            }
            print_stdout(&text)?;
        }
        Cmd::Chunk(a) => {
            let model = TokenizerModel::load(&a.model)?;
            let data = textio::load_lexical_decision(
                &a.data,
                &schema(&a.col_sequence, &a.col_is_word, &a.col_rt, &a.col_accuracy),
            )?;
            let named = [NamedModel::new(model_id(&a.model), model)];
            let table = MetricsTable::compute(&named, &data.stimuli, exec)?;
            ensure_parent(&a.out)?;
            table.write_csv(&a.out)?;
            write_snapshot(cli, &a.out)?;
        }
        Cmd::Eval(a) => {
            let metrics: Vec<Metric> = parse_list(&a.metrics)?;
            let signals: Vec<Signal> = parse_list(&a.signals)?;
            let (table, dataset) = match (&a.from_metrics, &a.data) {
                (Some(path), _) => (MetricsTable::read_csv(path)?, dataset_label(&a.dataset, path)),
                (None, Some(d)) => {
                    let stimuli = load_stimuli(d)?;
                    let mut models = Vec::new();
                    for spec in &a.model {
                        let (id, path) = match spec.split_once('=') {
                            Some((id, p)) => (id.to_owned(), PathBuf::from(p)),
                            None => (model_id(Path::new(spec)), PathBuf::from(spec)),
                        };
                        models.push(NamedModel::new(id, TokenizerModel::load(&path)?));
                    }
                    (MetricsTable::compute(&models, &stimuli, exec)?, dataset_label(&a.dataset, &d.data))
                }
                (None, None) => return Err(CliError::Usage("eval needs --data or --from-metrics".into())),
            };
            let report = evalpipe::report_from_table(&table, &metrics, &signals, &dataset, exec)?;
            ensure_parent(&a.out)?;
            if a.from_metrics.is_none() {
                table.write_csv(with_extension(&a.out, "metrics.csv"))?;
            }
            report.write_json(&a.out)?;
            report.write_csv(with_extension(&a.out, "csv"))?;
            write_snapshot(cli, &a.out)?;
        }
        Cmd::Sweep(a) => {
            let corpora = load_corpora(&a.corpus, a.train.limit)?;
            let stimuli = load_stimuli(&a.data)?;
            let cfg = SweepConfig {
                algorithm: a.algo,
                sizes: a.sizes.clone().unwrap_or_else(|| evalpipe::DEFAULT_SIZE_GRID.to_vec()),
                flags: a.train.flags(cli.seed),
                cache_dir: a.cache_dir.clone(),
                metrics: parse_list(&a.metrics)?,
                signals: parse_list(&a.signals)?,
                dataset: dataset_label(&a.dataset, &a.data.data),
                exec,
            };
            let result = evalpipe::run_sweep(&corpora, &cfg, &stimuli)?;
            ensure_parent(&a.out)?;
            result.write_json(&a.out)?;
            result.write_csv(with_extension(&a.out, "csv"))?;
            write_snapshot(cli, &a.out)?;
            if let Some(f) = &result.failure {
                return Err(Error::DegenerateCorpus(format!("sweep stopped early: {f}")).into());
            }
        }
        Cmd::Morph(a) => {
            let inventory = textio::load_morpheme_inventory(&a.morphemes, a.min_share)?;
            let mut models = Vec::new();
            for path in &a.model {
                let m = TokenizerModel::load(path)?;
                if let (Some(sizes), Algorithm::Bpe | Algorithm::Wpc) = (&a.sizes, m.algorithm()) {
                    for &s in sizes {
                        models.push(m.truncate(s)?);
                    }
                }
                models.push(m);
            }
            let curve = evalpipe::coverage_curve(&models, &inventory)?;
            ensure_parent(&a.out)?;
            curve.write_csv(&a.out)?;
            write_snapshot(cli, &a.out)?;
        }
        Cmd::Regress(a) => {
            let model = TokenizerModel::load(&a.model)?;
            let stimuli = load_stimuli(&a.data)?;
            let freq = textio::load_frequency_table(&a.freq)?;
            let report = evalpipe::run_regression(&stimuli, &model, &freq, cli.seed, a.train_fraction)?;
            match &a.out {
                Some(out) => {
                    ensure_parent(out)?;
                    report.write_json(out)?;
                    write_snapshot(cli, out)?;
                }
                None => {
                    let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
                    print_stdout(&(text + "\n"))?;
                }
            }
        }
        Cmd::Import(a) => {
            let format: ExternalFormat = a.format.parse().map_err(|e: Error| CliError::Usage(e.to_string()))?;
            let model = vocab::import_external_vocab(&a.input, format, !a.no_lowercase)?;
            ensure_parent(&a.out)?;
            model.save(&a.out)?;
            write_snapshot(cli, &a.out)?;
        }
        Cmd::Synth(a) => {
            let language = synth::SynthLanguage::new(a.stems, cli.seed);
            let corpus = language.corpus(a.sentences, cli.seed);
            let reference = toklab::bpe::train_bpe_with(
                std::slice::from_ref(&corpus),
                a.reference_size,
                &Default::default(),
                exec,
            )?;
            let files = synth::write_desk_files(&a.out_dir, &language, &corpus, &reference, a.stimuli, cli.seed)?;
            write_snapshot(cli, &a.out_dir.join("synth"))?;
            log::info!("wrote {}", files.corpus.display());
        }
    }
    Ok(())
}
