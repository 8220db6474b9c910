//! Command implementations. Inputs are checked before anything is written,
//! and every output file is rendered in memory and written at the end.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use super::tables::{probe_report, rerank_report, RerankTableInput};
use super::{
    config, runtime, BaselineArgs, CacheCommand, CliError, Cli, Command, CommonArgs, LexiconArgs, ProbeArgs,
    RerankArgs, RerankInputArgs, ReportArgs, ServeMockArgs, SweepArgs, SweepOver,
};
use crate::corpus::{load_sense_tagged, RawCorpus, SelectionStrategy};
use crate::embedding::{
    mock_encode, BackendSpec, EncodeRequest, EncodeResponse, Encoder, EncodingCache, ResponseLine, Shape,
};
use crate::evaluation::{
    examples_report, frequency_split, load_frequencies, load_gold, render_report, EvalReport, ExampleRow, GoldSet,
    KeyedList, ReportFormat,
};
use crate::lexicon::{assemble_target_set, dist_neighbors, load_lexicon, load_neighbors, CapConfig, NeighborList};
use crate::probe::{p_at_1_by_relation, random_baseline, run_trials, Trial, TrialRecord};
use crate::rerank::{rerank_key, select_sentences, FusionMethod, RerankConfig, RerankError, RerankRecord, RerankResult};

pub(super) fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Probe(a) => probe(a),
        Command::Baseline(a) => baseline(a),
        Command::Rerank(a) => rerank(a),
        Command::Sweep(a) => sweep(a),
        Command::Report(a) => report(a),
        Command::Cache(c) => cache(c),
        Command::ServeMock(a) => serve_mock(a),
    }
}

fn progress(msg: &str) {
    let _ = writeln!(io::stderr(), "{msg}");
}

fn require_file(path: &Path, what: &str) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} {}: no such file", path.display())))
    }
}

fn require_output_parent(dir: &Path) -> Result<(), CliError> {
    if dir.exists() && !dir.is_dir() {
        return Err(CliError::Config(format!("output {}: not a directory", dir.display())));
    }
    Ok(())
}

fn write_outputs(dir: &Path, files: &[(String, String)]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| runtime(format!("{}: {e}", dir.display())))?;
    for (name, body) in files {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    }
    Ok(())
}

fn jsonl<T: serde::Serialize>(items: impl IntoIterator<Item = T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item).expect("record serializes"));
        out.push('\n');
    }
    out
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool, CliError> {
    if workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(runtime)
}

/// Checks on the backend flags that need no I/O beyond file existence.
fn check_backend(common: &CommonArgs) -> Result<BackendSpec, CliError> {
    let spec: BackendSpec = common.backend.parse().map_err(config)?;
    if let BackendSpec::Cache(path) = &spec {
        require_file(path, "cache")?;
    }
    if let Some(cache) = &common.cache {
        if let Some(parent) = cache.parent().filter(|p| !p.as_os_str().is_empty()) {
            if !parent.is_dir() {
                return Err(CliError::Config(format!("cache directory {}: not found", parent.display())));
            }
        }
    }
    require_output_parent(&common.output)?;
    thread_pool(common.workers)?;
    Ok(spec)
}

fn open_encoder(common: &CommonArgs, spec: &BackendSpec) -> Result<Encoder, CliError> {
    let cache = match (&common.cache, spec) {
        (Some(path), BackendSpec::Cache(_)) => {
            progress(&format!("ignoring --cache {}: replaying from a cache already", path.display()));
            None
        }
        (Some(path), _) => Some(Arc::new(EncodingCache::open(path, true).map_err(runtime)?)),
        (None, _) => None,
    };
    let backend = spec.open(common.pipelined).map_err(runtime)?;
    Encoder::new(backend, cache).map_err(runtime)
}

/// Payload indices selected by `--layers`, which uses reported names.
pub fn parse_layers(spec: &str, shape: Shape) -> Result<Vec<usize>, CliError> {
    let names: Vec<usize> = (0..shape.num_layers).map(|i| i + shape.layer_offset).collect();
    if spec.trim() == "all" {
        return Ok((0..shape.num_layers).collect());
    }
    let mut out = Vec::new();
    for part in spec.split(',') {
        let name: usize = part
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("--layers: {part:?} is not a layer")))?;
        let idx = names.iter().position(|&n| n == name).ok_or_else(|| {
            CliError::Config(format!(
                "--layers: layer {name} not in {}..={}",
                names[0],
                names[names.len() - 1]
            ))
        })?;
        if !out.contains(&idx) {
            out.push(idx);
        }
    }
    out.sort_unstable();
    Ok(out)
}

fn caps(args: &LexiconArgs) -> Result<CapConfig, CliError> {
    if args.per_relation_cap == 0 || args.wordnet_cap == 0 || args.total_cap == 0 || args.sentence_cap == 0 {
        return Err(CliError::Config("caps must be at least 1".into()));
    }
    Ok(CapConfig {
        per_relation: args.per_relation_cap,
        wordnet_total: args.wordnet_cap,
        grand_total: args.total_cap,
    })
}

fn check_lexicon_args(args: &LexiconArgs) -> Result<CapConfig, CliError> {
    require_file(&args.lexicon, "lexicon")?;
    require_file(&args.sentences, "sentences")?;
    if let Some(n) = &args.neighbors {
        require_file(n, "neighbors")?;
    }
    caps(args)
}

struct TrialSet {
    trials: Vec<Trial>,
    counts: BTreeMap<String, usize>,
}

fn load_trials(args: &LexiconArgs, caps: CapConfig) -> Result<TrialSet, CliError> {
    let with_path = |p: &Path, e: &dyn std::fmt::Display| runtime(format!("{}: {e}", p.display()));
    let mut lexicon = load_lexicon(&args.lexicon).map_err(|e| with_path(&args.lexicon, &e))?;
    let mut counts = BTreeMap::new();
    if let Some(path) = &args.neighbors {
        let neighbors = load_neighbors(path).map_err(|e| with_path(path, &e))?;
        let keys: Vec<String> = lexicon.keys().map(str::to_owned).collect();
        let mut underfilled = 0;
        for key in keys {
            if let Some(list) = neighbors.get(&key) {
                let sel = dist_neighbors(&key, list, &lexicon.wordnet_targets(&key), caps.per_relation);
                underfilled += usize::from(sel.underfilled);
                lexicon.set_dist_targets(&key, &sel.words);
            }
        }
        counts.insert("dist_lists_underfilled".into(), underfilled);
    }
    let tagged = load_sense_tagged(&args.sentences, args.sentence_cap).map_err(runtime)?;
    counts.insert("lexicon_keys".into(), lexicon.keys().count());
    counts.insert("lexicon_multiword_skipped".into(), lexicon.stats.multiword_skipped);
    counts.insert("sentences_loaded".into(), tagged.sentences.len());
    counts.insert("sentences_over_cap".into(), tagged.dropped_over_cap);

    let mut sets = BTreeMap::new();
    let mut trials = Vec::new();
    let mut without_targets = 0;
    for s in tagged.sentences {
        let set = sets
            .entry((s.key.clone(), s.sense.clone()))
            .or_insert_with(|| assemble_target_set(&s.key, s.sense.as_deref(), &lexicon, caps));
        match set {
            Ok(ts) => trials.push(Trial::new(s, ts.clone()).map_err(runtime)?),
            Err(_) => without_targets += 1,
        }
    }
    let rejected = sets.values().filter(|s| s.is_err()).count();
    counts.insert("target_sets".into(), sets.len() - rejected);
    counts.insert("target_sets_rejected".into(), rejected);
    counts.insert(
        "target_sets_dist_underfilled".into(),
        sets.values().filter(|s| s.as_ref().is_ok_and(|t| t.dist_underfilled)).count(),
    );
    counts.insert("sentences_without_targets".into(), without_targets);
    counts.insert("trials".into(), trials.len());
    Ok(TrialSet { trials, counts })
}

fn echo_lexicon(report: &mut EvalReport, args: &LexiconArgs, caps: CapConfig) {
    let c = &mut report.config;
    c.insert("lexicon".into(), args.lexicon.display().to_string());
    c.insert("sentences".into(), args.sentences.display().to_string());
    if let Some(n) = &args.neighbors {
        c.insert("neighbors".into(), n.display().to_string());
    }
    c.insert(
        "caps".into(),
        format!("{}/{}/{}", caps.per_relation, caps.wordnet_total, caps.grand_total),
    );
    c.insert("sentence_cap".into(), args.sentence_cap.to_string());
}

fn probe(args: ProbeArgs) -> Result<(), CliError> {
    let caps = check_lexicon_args(&args.lexicon)?;
    let spec = check_backend(&args.common)?;
    if args.runs == 0 {
        return Err(CliError::Config("--runs must be at least 1".into()));
    }
    let encoder = open_encoder(&args.common, &spec)?;
    let shape = encoder.shape();
    let layers = parse_layers(&args.common.layers, shape)?;
    let set = load_trials(&args.lexicon, caps)?;
    progress(&format!(
        "probe: {} trials, {} layers, model {}",
        set.trials.len(),
        layers.len(),
        encoder.model()
    ));
    let pool = thread_pool(args.common.workers)?;
    let by_layer = pool
        .install(|| run_trials(&set.trials, &encoder, &layers))
        .map_err(runtime)?;

    let names: Vec<usize> = layers.iter().map(|l| l + shape.layer_offset).collect();
    let per_layer: Vec<_> = by_layer.iter().map(|r| p_at_1_by_relation(r.as_slice())).collect();
    let relations: Vec<_> = set.trials.iter().map(|t| t.target_set.relations()).collect();
    let random = random_baseline(&relations, args.runs, args.common.seed);
    let mut report = probe_report(&names, &per_layer, set.trials.len(), Some(&random));
    echo_lexicon(&mut report, &args.lexicon, caps);
    report.config.insert("model".into(), encoder.model().to_owned());
    report.config.insert("seed".into(), args.common.seed.to_string());
    report.config.insert("runs".into(), args.runs.to_string());
    report.counts = set.counts;

    let records = by_layer
        .iter()
        .flatten()
        .filter_map(|r| TrialRecord::from_ranking(r, shape.layer_offset));
    let fmt = args.common.format;
    write_outputs(
        &args.common.output,
        &[
            ("probe_trials.jsonl".into(), jsonl(records)),
            (format!("probe_report.{}", fmt.extension()), render_report(&report, fmt)),
        ],
    )
}

fn baseline(args: BaselineArgs) -> Result<(), CliError> {
    let caps = check_lexicon_args(&args.lexicon)?;
    require_output_parent(&args.output)?;
    if args.runs == 0 {
        return Err(CliError::Config("--runs must be at least 1".into()));
    }
    let set = load_trials(&args.lexicon, caps)?;
    let relations: Vec<_> = set.trials.iter().map(|t| t.target_set.relations()).collect();
    let random = random_baseline(&relations, args.runs, args.seed);
    let mut report = probe_report(&[], &[], set.trials.len(), Some(&random));
    report.title = "P@1 by relation, random ranker".into();
    echo_lexicon(&mut report, &args.lexicon, caps);
    report.config.insert("seed".into(), args.seed.to_string());
    report.config.insert("runs".into(), args.runs.to_string());
    report.counts = set.counts;
    write_outputs(
        &args.output,
        &[(format!("baseline_report.{}", args.format.extension()), render_report(&report, args.format))],
    )
}

fn check_rerank_inputs(input: &RerankInputArgs) -> Result<(), CliError> {
    require_file(&input.neighbors, "neighbors")?;
    require_file(&input.corpus, "corpus")?;
    require_file(&input.gold, "gold")?;
    if let Some(f) = &input.frequencies {
        require_file(f, "frequencies")?;
    }
    if let Some(r) = &input.reference {
        require_file(r, "reference")?;
    }
    if input.n == 0 || input.s == 0 || input.n_sent == 0 {
        return Err(CliError::Config("--n, --s and --n-sent must be at least 1".into()));
    }
    if input.min_len > input.max_len {
        return Err(CliError::Config("--min-len exceeds --max-len".into()));
    }
    if !(input.rrf_k > 0.0 && input.rrf_k.is_finite()) {
        return Err(CliError::Config("--rrf-k must be positive".into()));
    }
    Ok(())
}

fn rerank_config(input: &RerankInputArgs, seed: u64) -> RerankConfig {
    RerankConfig {
        n: input.n,
        s: input.s,
        strategy: input.strategy,
        method: input.fusion,
        rrf_k: input.rrf_k,
        seed,
        n_sent: input.n_sent,
    }
}

/// Loaded inputs shared by the runs of a rerank or sweep command.
struct RerankData {
    lists: BTreeMap<String, NeighborList>,
    corpus: RawCorpus,
    gold: GoldSet,
    frequencies: Option<BTreeMap<String, u64>>,
    reference: Option<BTreeMap<usize, Vec<KeyedList>>>,
}

fn load_rerank_data(input: &RerankInputArgs, max_n: usize) -> Result<RerankData, CliError> {
    let with_path = |p: &Path, e: &dyn std::fmt::Display| runtime(format!("{}: {e}", p.display()));
    let lists = load_neighbors(&input.neighbors).map_err(|e| with_path(&input.neighbors, &e))?;
    let gold = load_gold(&input.gold).map_err(runtime)?;
    let frequencies = match &input.frequencies {
        Some(p) => Some(load_frequencies(p).map_err(runtime)?),
        None => None,
    };
    let reference = match &input.reference {
        Some(p) => Some(group_records(&load_records(p)?).0),
        None => None,
    };
    let mut vocab = BTreeSet::new();
    for l in lists.values() {
        vocab.insert(l.key.clone());
        vocab.extend(l.neighbors.iter().take(max_n).map(|n| n.word.clone()));
    }
    let corpus = RawCorpus::load(&input.corpus, input.min_len, input.max_len, &vocab).map_err(runtime)?;
    Ok(RerankData {
        lists,
        corpus,
        gold,
        frequencies,
        reference,
    })
}

struct RerankRun {
    /// Results per layer slot, in key order.
    results: Vec<Vec<RerankResult>>,
    no_context: Vec<String>,
}

fn run_rerank(
    data: &RerankData,
    encoder: &Encoder,
    layers: &[usize],
    cfg: &RerankConfig,
) -> Result<RerankRun, CliError> {
    let lists: Vec<&NeighborList> = data.lists.values().collect();
    let words = crate::rerank::words_needed(lists.iter().copied(), cfg);
    let mut results = Vec::with_capacity(layers.len());
    let mut no_context = BTreeSet::new();
    for &layer in layers {
        let sentences = select_sentences(&words, &data.corpus, encoder, layer, cfg).map_err(runtime)?;
        let per_key: Vec<Option<RerankResult>> = lists
            .par_iter()
            .map(|l| match rerank_key(l, &sentences, encoder, layer, cfg) {
                Ok(r) => Ok(Some(r)),
                Err(RerankError::NoContext(_)) => Ok(None),
                Err(e) => Err(runtime(format!("key {:?}: {e}", l.key))),
            })
            .collect::<Result<_, CliError>>()?;
        let mut kept = Vec::new();
        for (l, r) in lists.iter().zip(per_key) {
            match r {
                Some(r) => kept.push(r),
                None => {
                    no_context.insert(l.key.clone());
                }
            }
        }
        results.push(kept);
    }
    Ok(RerankRun {
        results,
        no_context: no_context.into_iter().collect(),
    })
}

fn reranked_lists(results: &[RerankResult]) -> Vec<KeyedList> {
    results.iter().map(|r| (r.key.clone(), r.reranked())).collect()
}

fn initial_lists(results: &[RerankResult]) -> Vec<KeyedList> {
    results.iter().map(|r| (r.key.clone(), r.initial.clone())).collect()
}

fn restrict(lists: &[KeyedList], keys: &[String]) -> Vec<KeyedList> {
    let keep: BTreeSet<&String> = keys.iter().collect();
    lists.iter().filter(|(k, _)| keep.contains(k)).cloned().collect()
}

fn echo_rerank(report: &mut EvalReport, input: &RerankInputArgs, cfg: &RerankConfig, model: &str) {
    let c = &mut report.config;
    c.insert("neighbors".into(), input.neighbors.display().to_string());
    c.insert("corpus".into(), input.corpus.display().to_string());
    c.insert("gold".into(), input.gold.display().to_string());
    c.insert("model".into(), model.to_owned());
    c.insert("n".into(), cfg.n.to_string());
    c.insert("s".into(), cfg.s.to_string());
    c.insert("n_sent".into(), cfg.n_sent.to_string());
    c.insert("len".into(), format!("{}..={}", input.min_len, input.max_len));
    c.insert("strategy".into(), cfg.strategy.to_string());
    c.insert("fusion".into(), cfg.method.to_string());
    if cfg.method == FusionMethod::Rrf {
        c.insert("rrf_k".into(), cfg.rrf_k.to_string());
    }
    c.insert("seed".into(), cfg.seed.to_string());
    if let Some(r) = &input.reference {
        c.insert("reference".into(), r.display().to_string());
    }
}

/// Main table: the initial order, then each layer.
fn rerank_tables(
    per_layer: &[(usize, Vec<KeyedList>)],
    initial: &[KeyedList],
    gold: &GoldSet,
    reference: Option<&BTreeMap<usize, Vec<KeyedList>>>,
) -> Result<EvalReport, CliError> {
    let mut columns = vec![RerankTableInput {
        label: "initial".into(),
        lists: initial.to_vec(),
        reference: None,
    }];
    for (name, lists) in per_layer {
        columns.push(RerankTableInput {
            label: format!("L{name}"),
            lists: lists.clone(),
            reference: reference.and_then(|r| r.get(name)).cloned(),
        });
    }
    rerank_report("P@k after reranking", &columns, gold).map_err(runtime)
}

/// High/low frequency slices of reranked and initial lists.
fn frequency_table(
    per_layer: &[(usize, Vec<KeyedList>)],
    initial: &[KeyedList],
    gold: &GoldSet,
    frequencies: &BTreeMap<String, u64>,
    reference: Option<&BTreeMap<usize, Vec<KeyedList>>>,
) -> Result<EvalReport, CliError> {
    let keys: Vec<String> = initial.iter().map(|(k, _)| k.clone()).collect();
    let (high, low) = frequency_split(&keys, frequencies).map_err(runtime)?;
    let mut columns = Vec::new();
    for (name, lists) in per_layer {
        for (slice, keys) in [("high", &high), ("low", &low)] {
            columns.push(RerankTableInput {
                label: format!("L{name} reranking_{slice}"),
                lists: restrict(lists, keys),
                reference: reference
                    .and_then(|r| r.get(name))
                    .map(|r| restrict(r, keys)),
            });
            columns.push(RerankTableInput {
                label: format!("L{name} initial_{slice}"),
                lists: restrict(initial, keys),
                reference: None,
            });
        }
    }
    let mut report = rerank_report("P@k by key frequency", &columns, gold).map_err(runtime)?;
    report.counts.insert("keys_high".into(), high.len());
    report.counts.insert("keys_low".into(), low.len());
    Ok(report)
}

fn rerank(args: RerankArgs) -> Result<(), CliError> {
    check_rerank_inputs(&args.input)?;
    let spec = check_backend(&args.common)?;
    let encoder = open_encoder(&args.common, &spec)?;
    let shape = encoder.shape();
    let layers = parse_layers(&args.common.layers, shape)?;
    let cfg = rerank_config(&args.input, args.common.seed);
    let data = load_rerank_data(&args.input, cfg.n)?;
    progress(&format!(
        "rerank: {} keys, {} layers, fusion {}, strategy {}",
        data.lists.len(),
        layers.len(),
        cfg.method,
        cfg.strategy
    ));
    let pool = thread_pool(args.common.workers)?;
    let run = pool.install(|| run_rerank(&data, &encoder, &layers, &cfg))?;

    let names: Vec<usize> = layers.iter().map(|l| l + shape.layer_offset).collect();
    let per_layer: Vec<(usize, Vec<KeyedList>)> = names
        .iter()
        .zip(&run.results)
        .map(|(&n, r)| (n, reranked_lists(r)))
        .collect();
    let initial = run.results.first().map(|r| initial_lists(r)).unwrap_or_default();
    let mut report = rerank_tables(&per_layer, &initial, &data.gold, data.reference.as_ref())?;
    echo_rerank(&mut report, &args.input, &cfg, encoder.model());
    let first = run.results.first().map(Vec::as_slice).unwrap_or_default();
    report.counts.insert("keys".into(), data.lists.len());
    report.counts.insert("keys_no_context".into(), run.no_context.len());
    report.counts.insert("keys_clamped".into(), first.iter().filter(|r| r.clamped).count());
    report.counts.insert(
        "neighbors_without_sentences".into(),
        run.results.iter().flatten().map(|r| r.unranked.len()).sum(),
    );

    let fmt = args.common.format;
    let mut files = vec![
        (
            "rerank_records.jsonl".to_string(),
            jsonl(
                run.results
                    .iter()
                    .flatten()
                    .map(|r| RerankRecord::from_result(r, shape.layer_offset)),
            ),
        ),
        (format!("rerank_report.{}", fmt.extension()), render_report(&report, fmt)),
    ];
    if let Some(freq) = &data.frequencies {
        let mut f = frequency_table(&per_layer, &initial, &data.gold, freq, data.reference.as_ref())?;
        f.config = report.config.clone();
        files.push((format!("frequency_report.{}", fmt.extension()), render_report(&f, fmt)));
    }
    if !run.no_context.is_empty() {
        files.push(("no_context_keys.txt".into(), run.no_context.join("\n") + "\n"));
    }
    write_outputs(&args.common.output, &files)
}

fn parse_counts(spec: &str, flag: &str) -> Result<Vec<usize>, CliError> {
    let values: Vec<usize> = spec
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("{flag}: expected a comma list of counts")))?;
    if values.is_empty() || values.contains(&0) {
        return Err(CliError::Config(format!("{flag}: counts must be at least 1")));
    }
    Ok(values)
}

fn sweep(args: SweepArgs) -> Result<(), CliError> {
    check_rerank_inputs(&args.input)?;
    let spec = check_backend(&args.common)?;
    let base = rerank_config(&args.input, args.common.seed);
    let mut grid: Vec<(String, RerankConfig)> = Vec::new();
    match args.over {
        SweepOver::Ns => {
            let ns = parse_counts(&args.n_values, "--n-values")?;
            let ss = parse_counts(&args.s_values, "--s-values")?;
            for &n in &ns {
                for &s in &ss {
                    grid.push((format!("n={n},s={s}"), RerankConfig { n, s, ..base }));
                }
            }
        }
        SweepOver::Fusion => {
            for method in FusionMethod::ALL {
                grid.push((method.to_string(), RerankConfig { method, ..base }));
            }
        }
        SweepOver::Strategy => {
            for strategy in SelectionStrategy::ALL {
                grid.push((strategy.to_string(), RerankConfig { strategy, ..base }));
            }
        }
    }
    let reference_label = args.reference_column.clone().unwrap_or_else(|| {
        match args.over {
            SweepOver::Ns => "n=10,s=10",
            SweepOver::Fusion => "average",
            SweepOver::Strategy => "random",
        }
        .to_owned()
    });
    let reference_idx = grid.iter().position(|(l, _)| *l == reference_label);
    if reference_idx.is_none() && args.reference_column.is_some() {
        return Err(CliError::Config(format!("reference column {reference_label:?} is not in the sweep")));
    }

    let encoder = open_encoder(&args.common, &spec)?;
    let shape = encoder.shape();
    let layers = parse_layers(&args.common.layers, shape)?;
    let max_n = grid.iter().map(|(_, c)| c.n).max().unwrap_or(base.n);
    let data = load_rerank_data(&args.input, max_n)?;
    let pool = thread_pool(args.common.workers)?;
    let names: Vec<usize> = layers.iter().map(|l| l + shape.layer_offset).collect();

    let mut runs = Vec::with_capacity(grid.len());
    for (label, cfg) in &grid {
        progress(&format!("sweep: {label}"));
        let run = pool.install(|| run_rerank(&data, &encoder, &layers, cfg))?;
        let lists: Vec<Vec<KeyedList>> = run.results.iter().map(|r| reranked_lists(r)).collect();
        runs.push(lists);
    }
    let mut columns = Vec::new();
    for (slot, name) in names.iter().enumerate() {
        for (i, (label, _)) in grid.iter().enumerate() {
            let label = if names.len() == 1 {
                label.clone()
            } else {
                format!("{label} L{name}")
            };
            let reference = reference_idx
                .filter(|&r| r != i)
                .map(|r| runs[r][slot].clone());
            columns.push(RerankTableInput {
                label,
                lists: runs[i][slot].clone(),
                reference,
            });
        }
    }
    let mut report = rerank_report("P@k sweep", &columns, &data.gold).map_err(runtime)?;
    echo_rerank(&mut report, &args.input, &base, encoder.model());
    let over = match args.over {
        SweepOver::Ns => "ns",
        SweepOver::Fusion => "fusion",
        SweepOver::Strategy => "strategy",
    };
    report.config.insert("sweep".into(), over.into());
    if reference_idx.is_some() {
        report.config.insert("reference_column".into(), reference_label);
    }
    report.counts.insert("keys".into(), data.lists.len());
    report.counts.insert("cells".into(), grid.len() * names.len());
    let fmt = args.common.format;
    write_outputs(
        &args.common.output,
        &[(format!("sweep_{over}.{}", fmt.extension()), render_report(&report, fmt))],
    )
}

fn load_records(path: &Path) -> Result<Vec<RerankRecord>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| runtime(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| runtime(format!("{}:{}: {e}", path.display(), i + 1))))
        .collect()
}

/// Reranked lists per layer name, and the initial lists of the first layer.
fn group_records(records: &[RerankRecord]) -> (BTreeMap<usize, Vec<KeyedList>>, Vec<KeyedList>) {
    let mut by_layer: BTreeMap<usize, Vec<KeyedList>> = BTreeMap::new();
    for r in records {
        by_layer
            .entry(r.layer)
            .or_default()
            .push((r.key.clone(), r.reranked.clone()));
    }
    let first = by_layer.keys().next().copied();
    let initial = records
        .iter()
        .filter(|r| Some(r.layer) == first)
        .map(|r| (r.key.clone(), r.initial.clone()))
        .collect();
    (by_layer, initial)
}

fn report(args: ReportArgs) -> Result<(), CliError> {
    require_file(&args.records, "records")?;
    require_file(&args.gold, "gold")?;
    if let Some(f) = &args.frequencies {
        require_file(f, "frequencies")?;
    }
    if let Some(r) = &args.reference {
        require_file(r, "reference")?;
    }
    let records = load_records(&args.records)?;
    let gold = load_gold(&args.gold).map_err(runtime)?;
    let mut out = String::new();
    if args.examples {
        let keys: Option<BTreeSet<String>> = args
            .keys
            .as_ref()
            .map(|k| k.split(',').map(|s| s.trim().to_lowercase()).collect());
        let first = records.iter().map(|r| r.layer).min();
        let rows: Vec<ExampleRow> = records
            .iter()
            .filter(|r| Some(r.layer) == first)
            .filter(|r| keys.as_ref().is_none_or(|k| k.contains(&r.key)))
            .map(|r| ExampleRow {
                key: r.key.clone(),
                initial: r.initial.clone(),
                reranked: r.reranked.clone(),
            })
            .collect();
        out.push_str(&examples_report(&rows, &gold, args.head));
    } else {
        let (by_layer, initial) = group_records(&records);
        let reference = match &args.reference {
            Some(p) => Some(group_records(&load_records(p)?).0),
            None => None,
        };
        let per_layer: Vec<(usize, Vec<KeyedList>)> = by_layer.into_iter().collect();
        let main = rerank_tables(&per_layer, &initial, &gold, reference.as_ref())?;
        match &args.frequencies {
            None => out.push_str(&render_report(&main, args.format)),
            Some(p) => {
                let freq = load_frequencies(p).map_err(runtime)?;
                let f = frequency_table(&per_layer, &initial, &gold, &freq, reference.as_ref())?;
                match args.format {
                    ReportFormat::Tsv => {
                        out.push_str(&main.to_tsv());
                        out.push('\n');
                        out.push_str(&f.to_tsv());
                    }
                    ReportFormat::Json => {
                        out.push_str(&serde_json::to_string_pretty(&[&main, &f]).map_err(runtime)?);
                        out.push('\n');
                    }
                }
            }
        }
    }
    print_stdout(&out)
}

/// A closed pipe downstream is not an error.
fn print_stdout(text: &str) -> Result<(), CliError> {
    let mut out = io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != io::ErrorKind::BrokenPipe => Err(runtime(e)),
        _ => Ok(()),
    }
}

fn cache(cmd: CacheCommand) -> Result<(), CliError> {
    let (path, verify) = match &cmd {
        CacheCommand::Inspect { cache } => (cache, false),
        CacheCommand::Verify { cache } => (cache, true),
    };
    require_file(path, "cache")?;
    let cache = EncodingCache::open(path, false).map_err(runtime)?;
    let report = cache.verify();
    let body = if verify {
        serde_json::to_string_pretty(&report)
    } else {
        serde_json::to_string_pretty(&serde_json::json!({
            "records": report.records,
            "models": report.models,
            "shape": cache.shape().map(|s| serde_json::json!({
                "num_layers": s.num_layers,
                "dim": s.dim,
                "layer_offset": s.layer_offset,
            })),
        }))
    }
    .map_err(runtime)?;
    print_stdout(&(body + "\n"))?;
    if verify && !report.problems.is_empty() {
        return Err(CliError::Runtime(format!(
            "{}: {} problem(s) found",
            path.display(),
            report.problems.len()
        )));
    }
    Ok(())
}

fn serve_mock(args: ServeMockArgs) -> Result<(), CliError> {
    let stdin = io::stdin();
    let mut stdout = io::stdout().lock();
    for line in stdin.lock().lines() {
        let line = line.map_err(runtime)?;
        if line.trim().is_empty() {
            continue;
        }
        let response = match serde_json::from_str::<EncodeRequest>(&line) {
            Err(e) => ResponseLine::Error {
                id: String::new(),
                error: format!("bad request: {e}"),
            },
            Ok(req) if args.fail_on.as_ref().is_some_and(|t| req.tokens.contains(t)) => ResponseLine::Error {
                id: req.id,
                error: "refused".into(),
            },
            Ok(req) => match mock_encode(&req.id, &req.tokens) {
                Ok(enc) => ResponseLine::Ok(EncodeResponse::from_encoding(&enc)),
                Err(e) => ResponseLine::Error {
                    id: req.id,
                    error: e.to_string(),
                },
            },
        };
        let text = serde_json::to_string(&response).map_err(runtime)?;
        writeln!(stdout, "{text}")
            .and_then(|_| stdout.flush())
            .map_err(runtime)?;
    }
    Ok(())
}
