use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use slimdex::corpus::{
    generate_synthetic, load_embeddings, load_id_list, load_passages, load_queries, save_embeddings, save_id_list,
    to_jsonl, EmbeddingMatrix, PassageRecord, SyntheticSpec,
};
use slimdex::error::Error;
use slimdex::eval::{self, QuerySet, SweepConfig, SweepData};
use slimdex::filter::{self, FeatureHasher, LogRegParams};
use slimdex::index::{self, IndexConfig, IndexLayout, StorageMode};
use slimdex::util::write_atomic;

#[derive(Parser, Debug)]
#[command(name = "slimdex", version, about = "Build, search and measure compressed dense-retrieval indexes")]
struct Cli {
    /// Seed for every randomized step
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Log progress to stderr
    #[arg(long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "subcommand", rename_all = "kebab-case")]
enum Command {
    /// Generate a clustered synthetic corpus with queries and ground truth
    Synth(SynthArgs),
    /// Build an index from passage embeddings
    Build(BuildArgs),
    /// Search an index with queries from a JSONL file
    Search(SearchArgs),
    /// Self-train an article filter from positive article ids
    FilterTrain(FilterTrainArgs),
    /// Rank articles with a filter and write the kept ids
    FilterApply(FilterApplyArgs),
    /// Compute P@k and recall@10 for an index
    Eval(EvalArgs),
    /// Evaluate a grid of index configurations and keep fractions
    Sweep(SweepArgs),
    /// Report index and system sizes
    Size(SizeArgs),
}

#[derive(Args, Debug, Serialize)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    d: usize,
    #[arg(long)]
    clusters: usize,
    #[arg(long, default_value_t = 0.1)]
    noise: f32,
    /// Number of queries [default: min(n, 200)]
    #[arg(long)]
    queries: Option<usize>,
    /// Fraction of articles that carry no answers
    #[arg(long, default_value_t = 0.0)]
    answerless_fraction: f64,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct IndexFlags {
    #[arg(long, value_parser = parse_mode)]
    mode: StorageMode,
    /// Reduce to this many dimensions with PCA first
    #[arg(long)]
    d_r: Option<usize>,
    #[arg(long)]
    n_v: Option<usize>,
    #[arg(long)]
    n_b: Option<u8>,
    /// Apply layer normalization after PCA
    #[arg(long)]
    normalize: bool,
}

#[derive(Args, Debug, Serialize)]
struct BuildArgs {
    /// Passage embeddings (.emb)
    #[arg(long)]
    passages: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    index: IndexFlags,
    /// Expected input dimension, checked before loading
    #[arg(long)]
    d: Option<usize>,
    /// Keep only passages of the articles listed in this file
    #[arg(long, requires = "passage_records")]
    keep_articles: Option<PathBuf>,
    /// Passage records (JSONL), needed with --keep-articles
    #[arg(long)]
    passage_records: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SearchArgs {
    #[arg(long)]
    index: PathBuf,
    /// Queries (JSONL with `id` and optionally `embedding`)
    #[arg(long)]
    queries: PathBuf,
    /// Embeddings for queries whose record has none
    #[arg(long)]
    query_emb: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct FilterTrainArgs {
    /// Passage records (JSONL); articles are taken from them
    #[arg(long)]
    passages: PathBuf,
    /// Positive article ids, one per line
    #[arg(long)]
    positives: PathBuf,
    #[arg(long, default_value_t = filter::DEFAULT_ROUNDS)]
    rounds: usize,
    /// Negatives per round [default: number of positives]
    #[arg(long)]
    negatives: Option<usize>,
    #[arg(long, default_value_t = filter::DEFAULT_HASH_BITS)]
    hash_bits: u32,
    #[arg(long, default_value_t = LogRegParams::default().l2)]
    l2: f64,
    #[arg(long, default_value_t = LogRegParams::default().lr)]
    lr: f64,
    #[arg(long, default_value_t = LogRegParams::default().epochs)]
    epochs: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
#[group(required = true, multiple = false, id = "amount")]
struct KeepAmount {
    #[arg(long, group = "amount")]
    keep_count: Option<usize>,
    #[arg(long, group = "amount")]
    keep_fraction: Option<f64>,
    /// Keep articles whose margin is at least this value
    #[arg(long, group = "amount")]
    threshold: Option<f64>,
}

#[derive(Args, Debug, Serialize)]
struct FilterApplyArgs {
    #[arg(long)]
    filter: PathBuf,
    /// Passage records (JSONL)
    #[arg(long)]
    passages: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    amount: KeepAmount,
    /// Kept article ids, one per line
    #[arg(long)]
    out: PathBuf,
    /// Also write the embeddings of the kept passages
    #[arg(long, requires = "out_embeddings")]
    embeddings: Option<PathBuf>,
    #[arg(long, requires = "embeddings")]
    out_embeddings: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct EvalInputs {
    /// Full-precision passage embeddings (.emb)
    #[arg(long)]
    passages: PathBuf,
    /// Passage records (JSONL)
    #[arg(long)]
    passage_records: PathBuf,
    /// Query records (JSONL)
    #[arg(long)]
    queries: PathBuf,
    /// Query embeddings (.emb)
    #[arg(long)]
    query_emb: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct EvalArgs {
    #[arg(long)]
    index: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    inputs: EvalInputs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    #[command(flatten)]
    #[serde(flatten)]
    inputs: EvalInputs,
    /// Reduced dimensions; `full` skips PCA
    #[arg(long, value_delimiter = ',', default_value = "full", value_parser = parse_d_r)]
    d_r: Vec<Option<usize>>,
    /// Bits per dimension: 32 and 16 are flat, anything else is PQ
    #[arg(long, value_delimiter = ',', default_value = "1,2,8,16,32")]
    bits: Vec<u32>,
    /// Code width for PQ configurations
    #[arg(long, default_value_t = 8)]
    n_b: u8,
    /// Fractions of articles kept
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    keep: Vec<f64>,
    /// Filter model, needed for keep fractions below 1
    #[arg(long)]
    filter: Option<PathBuf>,
    #[arg(long)]
    normalize: bool,
    /// Record wall-clock time per row (otherwise 0, so reruns are byte-identical)
    #[arg(long)]
    timing: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
struct SizeArgs {
    /// Report the size of an existing index
    #[arg(long, conflicts_with_all = ["n", "d", "mode"])]
    index: Option<PathBuf>,
    #[arg(long, requires_all = ["d", "mode"])]
    n: Option<u64>,
    #[arg(long)]
    d: Option<u64>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<StorageMode>,
    #[arg(long)]
    d_r: Option<u64>,
    #[arg(long)]
    n_v: Option<u64>,
    #[arg(long)]
    n_b: Option<u8>,
    #[arg(long)]
    normalize: bool,
    /// Bytes taken by the id block, when computing from a layout
    #[arg(long, default_value_t = 0)]
    id_bytes: u64,
    /// Model component as name=parameter_count (repeatable)
    #[arg(long, value_parser = parse_named)]
    params: Vec<(String, u64)>,
    /// Other component as name=bytes (repeatable)
    #[arg(long, value_parser = parse_named)]
    component: Vec<(String, u64)>,
    #[arg(long, default_value_t = eval::BYTES_PER_F32_PARAM)]
    bytes_per_param: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_mode(s: &str) -> Result<StorageMode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_d_r(s: &str) -> Result<Option<usize>, String> {
    if s == "full" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| format!("expected a dimension or `full`, got {s:?}"))
}

fn parse_named(s: &str) -> Result<(String, u64), String> {
    let (name, value) = s.split_once('=').ok_or_else(|| format!("expected name=value, got {s:?}"))?;
    let value = value.trim().parse().map_err(|_| format!("not a count: {value:?}"))?;
    Ok((name.trim().to_string(), value))
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

#[derive(Serialize)]
struct Echo<'a> {
    #[serde(flatten)]
    command: &'a Command,
    seed: u64,
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::new()
        .filter_level(if cli.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .init();
    let echo = Echo {
        command: &cli.command,
        seed: cli.seed,
        verbose: cli.verbose,
    };
    println!("{}", serde_json::to_string(&echo).expect("config serializes"));

    let result = match &cli.command {
        Command::Synth(a) => synth(a, cli.seed),
        Command::Build(a) => build(a, cli.seed),
        Command::Search(a) => search(a),
        Command::FilterTrain(a) => filter_train(a, cli.seed),
        Command::FilterApply(a) => filter_apply(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Sweep(a) => sweep(a, cli.seed),
        Command::Size(a) => size(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn write_text(path: &Path, text: &str) -> CliResult {
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct GroundTruthLine<'a> {
    query_id: &'a str,
    passage_id: &'a str,
    gold_passage_id: &'a str,
}

fn synth(a: &SynthArgs, seed: u64) -> CliResult {
    let mut spec = SyntheticSpec::new(a.n, a.d, a.clusters, a.noise, seed);
    if let Some(q) = a.queries {
        spec.n_queries = q;
    }
    spec.answerless_fraction = a.answerless_fraction;
    let corpus = generate_synthetic(&spec)?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;

    save_embeddings(&corpus.passages, &a.out.join("passages.emb"))?;
    save_embeddings(&corpus.queries, &a.out.join("queries.emb"))?;
    write_text(&a.out.join("passages.jsonl"), &to_jsonl(&corpus.passage_records))?;
    write_text(&a.out.join("queries.jsonl"), &to_jsonl(&corpus.query_records))?;
    let gt: Vec<GroundTruthLine<'_>> = corpus
        .ground_truth
        .iter()
        .map(|(q, p)| GroundTruthLine {
            query_id: q,
            passage_id: p,
            gold_passage_id: &corpus.gold[q],
        })
        .collect();
    write_text(&a.out.join("ground_truth.jsonl"), &to_jsonl(&gt))?;
    save_id_list(&corpus.positive_articles, &a.out.join("positives.txt"))?;
    log::info!(
        "wrote {} passages, {} queries to {}",
        corpus.passages.len(),
        corpus.queries.len(),
        a.out.display()
    );
    Ok(())
}

fn index_config(f: &IndexFlags, seed: u64) -> CliResult<IndexConfig> {
    let mut cfg = match f.mode {
        StorageMode::Pq => match (f.n_v, f.n_b) {
            (Some(n_v), Some(n_b)) => IndexConfig::pq(n_v, n_b),
            _ => return Err(usage("--mode pq needs --n-v and --n-b")),
        },
        mode => {
            if f.n_v.is_some() || f.n_b.is_some() {
                return Err(usage(format!("--n-v/--n-b only apply to --mode pq, not {mode}")));
            }
            IndexConfig::new(mode)
        }
    };
    if let Some(d_r) = f.d_r {
        cfg = cfg.with_d_r(d_r);
    }
    Ok(cfg.with_seed(seed).with_normalize(f.normalize))
}

fn restrict_to_articles(x: EmbeddingMatrix, records: &[PassageRecord], kept: &[String]) -> EmbeddingMatrix {
    let keep = filter::expand_to_passages(records, kept);
    x.retain_ids(|id| keep.contains(id))
}

fn build(a: &BuildArgs, seed: u64) -> CliResult {
    let cfg = index_config(&a.index, seed)?;
    if let Some(d) = a.d {
        cfg.validate(d)?;
    }
    let mut x = load_embeddings(&a.passages)?;
    if let Some(d) = a.d {
        if x.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: x.dim() }.into());
        }
    }
    cfg.validate(x.dim())?;
    if let (Some(keep), Some(records)) = (&a.keep_articles, &a.passage_records) {
        let kept = load_id_list(keep)?;
        x = restrict_to_articles(x, &load_passages(records)?, &kept);
    }
    let ix = index::build_index(&x, &cfg)?;
    index::save_index(&ix, &a.out)?;
    log::info!("index of {} vectors, {} bytes", ix.len(), ix.size_report().total_bytes);
    Ok(())
}

#[derive(Deserialize)]
struct SearchQuery {
    #[serde(alias = "query_id")]
    id: String,
    #[serde(default)]
    embedding: Option<Vec<f32>>,
}

#[derive(Serialize)]
struct SearchResult<'a> {
    query_id: &'a str,
    ids: Vec<&'a str>,
    scores: Vec<f64>,
}

fn search(a: &SearchArgs) -> CliResult {
    let ix = index::load_index(&a.index)?;
    let text = std::fs::read_to_string(&a.queries).map_err(|e| Error::io(&a.queries, e))?;
    let lookup = a.query_emb.as_deref().map(load_embeddings).transpose()?;

    let mut queries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let q: SearchQuery = serde_json::from_str(line).map_err(|e| Error::Line {
            line: i + 1,
            message: e.to_string(),
        })?;
        let vector = match (q.embedding, &lookup) {
            (Some(v), _) => v,
            (None, Some(m)) => match m.position(&q.id) {
                Some(p) => m.row(p).to_vec(),
                None => return Err(Error::UnknownId(format!("query {} not in --query-emb", q.id)).into()),
            },
            (None, None) => {
                return Err(Error::Line {
                    line: i + 1,
                    message: format!("query {} has no embedding and no --query-emb was given", q.id),
                }
                .into())
            }
        };
        queries.push((q.id, vector));
    }

    let hits = queries
        .iter()
        .map(|(_, v)| ix.search(v, a.k))
        .collect::<Result<Vec<_>, _>>()?;
    let lines: Vec<SearchResult<'_>> = queries
        .iter()
        .zip(&hits)
        .map(|((id, _), h)| SearchResult {
            query_id: id,
            ids: h.iter().map(|h| h.id.as_str()).collect(),
            scores: h.iter().map(|h| h.score).collect(),
        })
        .collect();
    write_text(&a.out, &to_jsonl(&lines))
}

fn filter_train(a: &FilterTrainArgs, seed: u64) -> CliResult {
    if a.hash_bits > 31 {
        return Err(usage("--hash-bits must be at most 31"));
    }
    let records = load_passages(&a.passages)?;
    let positives = load_id_list(&a.positives)?;
    let articles = filter::articles_from_passages(&records);
    let hasher = FeatureHasher::new(1usize << a.hash_bits, seed)?;
    let hyper = LogRegParams {
        l2: a.l2,
        lr: a.lr,
        epochs: a.epochs,
    };
    let negatives = a.negatives.unwrap_or(positives.len());
    let model = filter::self_train(&articles, &positives, a.rounds, negatives, seed, hasher, &hyper)?;
    filter::save_filter(&model, &a.out)?;
    Ok(())
}

fn filter_apply(a: &FilterApplyArgs) -> CliResult {
    let model = filter::load_filter(&a.filter)?;
    let records = load_passages(&a.passages)?;
    let articles = filter::articles_from_passages(&records);
    let kept: Vec<String> = match (a.amount.keep_count, a.amount.keep_fraction, a.amount.threshold) {
        (Some(count), _, _) => {
            if count > articles.len() {
                return Err(Error::param(format!(
                    "keep count {count} exceeds the {} articles",
                    articles.len()
                ))
                .into());
            }
            filter::filter_corpus(&model, &articles, count)
        }
        (_, Some(frac), _) => {
            if !(0.0..=1.0).contains(&frac) {
                return Err(usage(format!("--keep-fraction {frac} not in [0, 1]")));
            }
            let count = (frac * articles.len() as f64).round() as usize;
            filter::filter_corpus(&model, &articles, count)
        }
        (_, _, Some(t)) => filter::decide(&model, &articles, t)
            .into_iter()
            .filter(|d| d.keep)
            .map(|d| d.article_id)
            .collect(),
        _ => unreachable!("clap requires one of the keep options"),
    };
    save_id_list(&kept, &a.out)?;
    if let (Some(src), Some(dst)) = (&a.embeddings, &a.out_embeddings) {
        let x = restrict_to_articles(load_embeddings(src)?, &records, &kept);
        save_embeddings(&x, dst)?;
    }
    log::info!("kept {} of {} articles", kept.len(), articles.len());
    Ok(())
}

struct Loaded {
    passages: EmbeddingMatrix,
    records: Vec<PassageRecord>,
    queries: QuerySet,
}

fn load_eval_inputs(i: &EvalInputs) -> CliResult<Loaded> {
    let passages = load_embeddings(&i.passages)?;
    let records = load_passages(&i.passage_records)?;
    let query_records = load_queries(&i.queries)?;
    let queries = QuerySet::new(query_records, &load_embeddings(&i.query_emb)?)?;
    Ok(Loaded {
        passages,
        records,
        queries,
    })
}

fn eval_cmd(a: &EvalArgs) -> CliResult {
    let ix = index::load_index(&a.index)?;
    let data = load_eval_inputs(&a.inputs)?;
    let held: HashSet<&str> = ix.ids().iter().map(String::as_str).collect();
    let exact = data.passages.retain_ids(|id| held.contains(id));
    if exact.len() != ix.len() {
        return Err(Error::UnknownId("index holds passages missing from --passages".into()).into());
    }
    let metrics = eval::evaluate_index(&ix, &exact, &data.queries, &data.records)?;
    let json = serde_json::to_string(&metrics).expect("metrics serialize");
    println!("{json}");
    if let Some(out) = &a.out {
        write_text(out, &format!("{json}\n"))?;
    }
    Ok(())
}

fn sweep(a: &SweepArgs, seed: u64) -> CliResult {
    if a.keep.iter().any(|&k| k < 1.0) && a.filter.is_none() {
        return Err(usage("keep fractions below 1 need --filter"));
    }
    let data = load_eval_inputs(&a.inputs)?;
    let model = a.filter.as_deref().map(filter::load_filter).transpose()?;
    let mut grid = eval::grid(&a.d_r, &a.bits, a.n_b, &a.keep);
    for c in &mut grid {
        c.normalize = a.normalize;
    }
    let sweep_data = SweepData {
        passages: &data.passages,
        passage_records: &data.records,
        queries: &data.queries,
        filter: model.as_ref(),
    };
    let mut outcome = eval::run_sweep(&sweep_data, &grid, seed)?;
    if !a.timing {
        for r in &mut outcome.rows {
            r.wall_time_ms = 0;
        }
    }
    for f in &outcome.failures {
        eprintln!("skipped {}: {}", describe(&f.config), f.error);
    }
    if outcome.rows.is_empty() {
        return Err(Error::param("every sweep configuration failed").into());
    }
    write_text(&a.out, &eval::to_csv(&outcome.rows))
}

fn describe(c: &SweepConfig) -> String {
    serde_json::to_string(c).expect("config serializes")
}

#[derive(Serialize)]
struct SizeOutput {
    index: Option<index::SizeReport>,
    components: Vec<(String, u64)>,
    total_bytes: u64,
}

fn size(a: &SizeArgs) -> CliResult {
    let report = if let Some(path) = &a.index {
        Some(index::load_index(path)?.size_report())
    } else if let (Some(n), Some(d), Some(mode)) = (a.n, a.d, a.mode) {
        let d_r = a.d_r.unwrap_or(d);
        let mut layout = match mode {
            StorageMode::Pq => match (a.n_v, a.n_b) {
                (Some(n_v), Some(n_b)) => {
                    slimdex::pq::check_params(d_r as usize, n_v as usize, n_b)?;
                    IndexLayout::pq(n, d, n_v, n_b)
                }
                _ => return Err(usage("--mode pq needs --n-v and --n-b")),
            },
            m => IndexLayout::flat(m, n, d),
        };
        if d_r == 0 || d_r > d {
            return Err(Error::param(format!("d_R = {d_r} must be in 1..={d}")).into());
        }
        layout.d_r = d_r;
        layout.pca = d_r != d || a.d_r.is_some();
        layout.norm = a.normalize;
        Some(layout.report(a.id_bytes))
    } else {
        None
    };

    let mut components: Vec<(String, u64)> = a
        .params
        .iter()
        .map(|(name, p)| (name.clone(), eval::params_to_bytes(*p, a.bytes_per_param)))
        .collect();
    components.extend(a.component.iter().cloned());
    if let Some(r) = &report {
        components.push(("index".to_string(), r.total_bytes));
    }
    if components.is_empty() {
        return Err(usage("nothing to size: give --index, a layout (--n --d --mode), --params or --component"));
    }
    let budget = eval::system_size_report(&components);
    eprintln!("{budget}");
    let out = SizeOutput {
        index: report,
        total_bytes: budget.total_bytes,
        components: budget.components,
    };
    let json = serde_json::to_string(&out).expect("size output serializes");
    println!("{json}");
    if let Some(path) = &a.out {
        write_text(path, &format!("{json}\n"))?;
    }
    Ok(())
}
