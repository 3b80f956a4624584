use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use reception_core::annotate::server::{serve, AppState, ChunkTable};
use reception_core::annotate::{AnnotationStore, Candidate, ExportRecord, Label};
use reception_core::corpus::{chunk_corpus, Chunk, DEFAULT_CHUNK_SIZE};
use reception_core::demo::{make_demo_corpus, DemoConfig};
use reception_core::diagnostics::{
    assign_quadrants, compute_features, language_distribution, quadrant_inputs, quadrant_summary,
    token_baseline, Lexicon, QuadrantOptions, RuleAnnotator, StopwordDetector, Vocabulary,
};
use reception_core::embed::{
    embed_chunks, embed_texts, read_vectors, write_vectors, HashEmbedder, DEFAULT_DIM,
};
use reception_core::index::{FlatIndex, RankedHit};
use reception_core::pipeline::{
    anti_lexical_partition, dedupe_by_work, filter_subcorpus, lexical_recall, ChunkSpans,
};
use reception_core::reuse::{
    cluster_reuses, detect_reuse, extract_query_quotes, select_query_set, AlignParams,
    AlignmentMatch, QueryQuote, QuoteConstraints, ReuseCluster,
};
use reception_core::run::{
    read_corpus, run_pipeline, write_diagnostics, write_stats, RunConfig, StageStatus,
};
use reception_core::sampling::{decide_deepening, plan_for, Stage, DEFAULT_DEEPEN_THRESHOLD};
use reception_core::stats::RhoMode;
use reception_core::{jsonl, report, Error, Result};

#[derive(Parser)]
#[command(
    name = "reception",
    version,
    about = "Trace the semantic reception of quotes through a chunked corpus"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a corpus JSONL file and split it into chunks.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_CHUNK_SIZE)]
        chunk_size: usize,
    },
    /// Embed chunks with the hash embedder, or validate imported vectors.
    Embed {
        #[arg(long)]
        chunks: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DIM)]
        dim: usize,
        /// RMV1 file produced elsewhere; must cover every chunk id.
        #[arg(long)]
        import: Option<PathBuf>,
    },
    /// Exact top-k search of query quotes against chunk vectors.
    Search {
        #[arg(long)]
        vectors: PathBuf,
        #[arg(long)]
        chunks: PathBuf,
        /// JSONL with `quote_id` and `text` per line.
        #[arg(long)]
        queries: PathBuf,
        /// Precomputed query vectors; hash-embedded otherwise.
        #[arg(long)]
        query_vectors: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Lexical reuse detection and query quote selection.
    #[command(subcommand)]
    Reuse(ReuseCommand),
    /// Filter, deduplicate and partition semantic hits.
    #[command(subcommand)]
    Pipeline(PipelineCommand),
    /// Sampling plans for annotation and the deepening decision.
    #[command(subcommand)]
    Sample(SampleCommand),
    /// Serve the annotation API (and optionally the UI).
    Serve {
        #[arg(long)]
        journal: PathBuf,
        /// Candidates to enqueue before serving.
        #[arg(long)]
        candidates: Option<PathBuf>,
        #[arg(long)]
        chunks: PathBuf,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        #[arg(long, default_value_t = DEFAULT_DEEPEN_THRESHOLD)]
        threshold: f64,
        #[arg(long)]
        ui: Option<PathBuf>,
    },
    /// Category table, yield curves, facets and score distributions.
    Stats {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long, default_value = "pooled")]
        rho_mode: RhoMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Linguistic diagnostics of annotated hits.
    Diagnose {
        #[arg(value_enum)]
        what: DiagnoseWhat,
        #[command(flatten)]
        args: DiagnoseArgs,
    },
    /// Write the seeded synthetic corpus with its ground truth.
    Demo {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        quotes: usize,
        #[arg(long, default_value_t = 150)]
        noise_docs: usize,
        #[arg(long, default_value_t = 0.0)]
        ocr_rate: f64,
    },
    /// Run the whole workflow from a key = value config file.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override a config key, e.g. `--set k=100`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

#[derive(Subcommand)]
enum ReuseCommand {
    /// Align a source work against the corpus and cluster the matches.
    Detect {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        source_work: String,
        #[arg(long)]
        matches_out: PathBuf,
        #[arg(long)]
        clusters_out: PathBuf,
        #[command(flatten)]
        align: AlignArgs,
    },
    /// Extract query quotes from clusters and select the tiered query set.
    Quotes {
        #[arg(long)]
        clusters: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 150)]
        min_len: usize,
        #[arg(long, default_value_t = 300)]
        max_len: usize,
        #[arg(long, default_value_t = 3)]
        min_freq: usize,
    },
}

#[derive(Args)]
struct AlignArgs {
    #[arg(long, default_value_t = 5)]
    seed_len: usize,
    #[arg(long, default_value_t = 10)]
    x_drop: i32,
    #[arg(long, default_value_t = 30)]
    min_score: i32,
}

impl AlignArgs {
    fn params(&self) -> AlignParams {
        AlignParams {
            seed_len: self.seed_len,
            x_drop: self.x_drop,
            min_score: self.min_score,
            ..AlignParams::default()
        }
    }
}

#[derive(Subcommand)]
enum PipelineCommand {
    /// Keep hits whose document id is listed (one per line) in `--allowed`.
    Filter {
        #[arg(long)]
        hits: PathBuf,
        #[arg(long)]
        allowed: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep the best hit per work and per query.
    Dedupe {
        #[arg(long)]
        hits: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Split hits into intersection / unique_semantic / unique_lexical.
    Partition {
        #[arg(long)]
        hits: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        chunks: PathBuf,
        /// Work excluded from the lexical side (usually the source).
        #[arg(long)]
        exclude_work: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        align: AlignArgs,
    },
}

#[derive(Subcommand)]
enum SampleCommand {
    /// Top 5 ranks plus 45 evenly spaced ranks down to 90% of the pool.
    Pilot(PlanArgs),
    /// Ranks 1-20 plus every sixth rank from 21 to 195.
    Triage(PlanArgs),
    /// Every rank up to 200.
    Exhaustive(PlanArgs),
    /// Deepen or stop, from label counts.
    Decide {
        #[arg(long)]
        query_id: String,
        #[arg(long)]
        significant: usize,
        #[arg(long)]
        total: usize,
        #[arg(long, default_value_t = 0)]
        dont_know: usize,
        #[arg(long, default_value_t = DEFAULT_DEEPEN_THRESHOLD)]
        threshold: f64,
    },
}

#[derive(Args)]
struct PlanArgs {
    #[arg(long)]
    query_id: String,
    #[arg(long)]
    pool_size: usize,
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum DiagnoseWhat {
    Features,
    Quadrants,
    Summary,
    Langdist,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[arg(long)]
    vocab: PathBuf,
    /// POS lexicon; the shipped English lexicon otherwise.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Corpus for the language baseline.
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    all_languages: bool,
    /// Count only No Match (not Topical Match) as a negative.
    #[arg(long)]
    strict_negatives: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Deserialize)]
struct QueryText {
    quote_id: String,
    text: String,
}

fn print_jsonl<T: serde::Serialize>(items: &[T]) -> Result<()> {
    jsonl::write_to(std::io::stdout().lock(), items)
}

fn group_by_query(hits: &[RankedHit]) -> Vec<Vec<RankedHit>> {
    let mut groups: Vec<Vec<RankedHit>> = Vec::new();
    let mut order: Vec<&str> = Vec::new();
    for h in hits {
        match order.iter().position(|q| *q == h.query_id) {
            Some(i) => groups[i].push(h.clone()),
            None => {
                order.push(&h.query_id);
                groups.push(vec![h.clone()]);
            }
        }
    }
    groups
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Ingest {
            input,
            out,
            chunk_size,
        } => {
            let docs = read_corpus(&input)?;
            let chunks = chunk_corpus(&docs, chunk_size)?;
            jsonl::write_path(&out, &chunks)?;
            eprintln!("{} documents, {} chunks", docs.len(), chunks.len());
        }
        Command::Embed {
            chunks,
            out,
            dim,
            import,
        } => {
            let chunks: Vec<Chunk> = jsonl::read_path(&chunks)?;
            let set = match import {
                Some(p) => {
                    let set = read_vectors(&p)?;
                    let ids: HashSet<&str> = set.ids().iter().map(String::as_str).collect();
                    if let Some(c) = chunks.iter().find(|c| !ids.contains(c.chunk_id.as_str())) {
                        return Err(Error::UnknownChunk(c.chunk_id.clone()));
                    }
                    set
                }
                None => embed_chunks(&chunks, &HashEmbedder::new(dim)?)?,
            };
            write_vectors(&out, &set)?;
            eprintln!("{} vectors of dimension {}", set.len(), set.dim());
        }
        Command::Search {
            vectors,
            chunks,
            queries,
            query_vectors,
            k,
            out,
        } => {
            let chunks: Vec<Chunk> = jsonl::read_path(&chunks)?;
            let index = FlatIndex::build(read_vectors(&vectors)?)?.with_chunks(&chunks);
            let queries: Vec<QueryText> = jsonl::read_path(&queries)?;
            let qv = match query_vectors {
                Some(p) => read_vectors(&p)?,
                None => embed_texts(
                    queries
                        .iter()
                        .map(|q| (q.quote_id.as_str(), q.text.as_str())),
                    &HashEmbedder::new(index.dim())?,
                )?,
            };
            let mut hits = Vec::new();
            for q in &queries {
                let v = qv.get(&q.quote_id).ok_or_else(|| {
                    Error::InvalidParameter(format!("no vector for query {}", q.quote_id))
                })?;
                hits.extend(index.search(&q.quote_id, v, k)?);
            }
            jsonl::write_path(&out, &hits)?;
        }
        Command::Reuse(ReuseCommand::Detect {
            corpus,
            source_work,
            matches_out,
            clusters_out,
            align,
        }) => {
            let docs = read_corpus(&corpus)?;
            let targets: Vec<_> = docs
                .iter()
                .filter(|d| d.work_id != source_work)
                .cloned()
                .collect();
            let mut matches: Vec<AlignmentMatch> = Vec::new();
            let mut clusters: Vec<ReuseCluster> = Vec::new();
            let sources: Vec<_> = docs.iter().filter(|d| d.work_id == source_work).collect();
            if sources.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "source work {source_work:?} has no documents"
                )));
            }
            for (i, src) in sources.iter().enumerate() {
                let m = detect_reuse(&src.doc_id, &src.text, &targets, &align.params())?;
                let label = if sources.len() == 1 {
                    source_work.clone()
                } else {
                    format!("{source_work}.{i}")
                };
                clusters.extend(cluster_reuses(&m, &label, &src.text));
                matches.extend(m);
            }
            jsonl::write_path(&matches_out, &matches)?;
            jsonl::write_path(&clusters_out, &clusters)?;
            eprintln!("{} matches in {} clusters", matches.len(), clusters.len());
        }
        Command::Reuse(ReuseCommand::Quotes {
            clusters,
            out,
            seed,
            min_len,
            max_len,
            min_freq,
        }) => {
            let clusters: Vec<ReuseCluster> = jsonl::read_path(&clusters)?;
            let quotes = extract_query_quotes(
                &clusters,
                QuoteConstraints {
                    min_len,
                    max_len,
                    min_freq,
                },
            );
            let selection = select_query_set(&quotes, seed);
            for w in &selection.warnings {
                eprintln!("warning: {w}");
            }
            jsonl::write_path::<QueryQuote>(&out, &selection.quotes)?;
        }
        Command::Pipeline(PipelineCommand::Filter { hits, allowed, out }) => {
            let hits: Vec<RankedHit> = jsonl::read_path(&hits)?;
            let text = std::fs::read_to_string(&allowed).map_err(|e| Error::io(&allowed, e))?;
            let allowed: HashSet<String> = text
                .lines()
                .map(str::trim)
                .filter(|l| !l.is_empty())
                .map(String::from)
                .collect();
            let kept: Vec<RankedHit> = group_by_query(&hits)
                .iter()
                .flat_map(|g| filter_subcorpus(g, &allowed))
                .collect();
            jsonl::write_path(&out, &kept)?;
        }
        Command::Pipeline(PipelineCommand::Dedupe { hits, out }) => {
            let hits: Vec<RankedHit> = jsonl::read_path(&hits)?;
            let kept: Vec<RankedHit> = group_by_query(&hits)
                .iter()
                .flat_map(|g| dedupe_by_work(g))
                .collect();
            jsonl::write_path(&out, &kept)?;
        }
        Command::Pipeline(PipelineCommand::Partition {
            hits,
            queries,
            corpus,
            chunks,
            exclude_work,
            out,
            align,
        }) => {
            let hits: Vec<RankedHit> = jsonl::read_path(&hits)?;
            let queries: Vec<QueryText> = jsonl::read_path(&queries)?;
            let docs: Vec<_> = read_corpus(&corpus)?
                .into_iter()
                .filter(|d| Some(&d.work_id) != exclude_work.as_ref())
                .collect();
            let chunks: Vec<Chunk> = jsonl::read_path(&chunks)?;
            let spans = ChunkSpans::from_chunks(&chunks);
            let mut records = Vec::new();
            for q in &queries {
                let qhits: Vec<RankedHit> = hits
                    .iter()
                    .filter(|h| h.query_id == q.quote_id)
                    .cloned()
                    .collect();
                let matches = detect_reuse(&q.quote_id, &q.text, &docs, &align.params())?;
                let p = anti_lexical_partition(&qhits, &matches, &spans)?;
                eprintln!(
                    "{}: {} intersection, {} unique semantic, {} unique lexical, lexical recall {}",
                    q.quote_id,
                    p.intersection.len(),
                    p.unique_semantic.len(),
                    p.unique_lexical.len(),
                    lexical_recall(&p).map_or_else(|| "undefined".into(), |r| format!("{r:.3}"))
                );
                records.extend(p.to_records());
            }
            jsonl::write_path(&out, &records)?;
        }
        Command::Sample(cmd) => match cmd {
            SampleCommand::Decide {
                query_id,
                significant,
                total,
                dont_know,
                threshold,
            } => {
                if !(0.0..=1.0).contains(&threshold) {
                    return Err(Error::InvalidParameter(format!(
                        "threshold {threshold} outside [0, 1]"
                    )));
                }
                let d = decide_deepening(&query_id, significant, total, dont_know, threshold);
                print_jsonl(&[d])?;
            }
            SampleCommand::Pilot(a) => {
                print_jsonl(&[plan_for(Stage::Pilot, &a.query_id, a.pool_size)?])?
            }
            SampleCommand::Triage(a) => {
                print_jsonl(&[plan_for(Stage::Triage, &a.query_id, a.pool_size)?])?
            }
            SampleCommand::Exhaustive(a) => {
                print_jsonl(&[plan_for(Stage::Exhaustive, &a.query_id, a.pool_size)?])?
            }
        },
        Command::Serve {
            journal,
            candidates,
            chunks,
            port,
            host,
            threshold,
            ui,
        } => {
            let mut store = AnnotationStore::open(&journal)?;
            if let Some(p) = candidates {
                let added = store.enqueue(jsonl::read_path::<Candidate>(&p)?)?;
                eprintln!("enqueued {added} new candidates");
            }
            let chunks: Vec<Chunk> = jsonl::read_path(&chunks)?;
            let state = Arc::new(AppState::new(store, ChunkTable::new(chunks), threshold));
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|_| Error::InvalidParameter(format!("bad address {host}:{port}")))?;
            eprintln!("listening on http://{addr}");
            let runtime =
                tokio::runtime::Runtime::new().map_err(|e| Error::io("<tokio runtime>", e))?;
            runtime.block_on(serve(state, addr, ui))?;
        }
        Command::Stats {
            annotations,
            partition,
            rho_mode,
            out,
        } => {
            let records: Vec<ExportRecord> = jsonl::read_path(&annotations)?;
            let partition = partition
                .map(|p| {
                    jsonl::read_path(&p).map(reception_core::pipeline::HitPartition::from_records)
                })
                .transpose()?;
            write_stats(&records, partition.as_ref(), rho_mode, &out)?;
            let table = std::fs::read_to_string(out.join("category_table.txt"))
                .map_err(|e| Error::io(&out, e))?;
            print!("{table}");
        }
        Command::Diagnose { what, args } => diagnose(what, &args)?,
        Command::Demo {
            seed,
            out,
            quotes,
            noise_docs,
            ocr_rate,
        } => {
            let cfg = DemoConfig {
                quotes,
                noise_docs,
                ocr_rate,
                ..DemoConfig::default()
            };
            let demo = make_demo_corpus(seed, cfg)?;
            jsonl::write_path(&out.join("corpus.jsonl"), &demo.documents)?;
            let truth = serde_json::to_string_pretty(&demo.truth)?;
            write(&out.join("ground_truth.json"), &truth)?;
            write(&out.join("vocab.txt"), &(demo.vocabulary.join("\n") + "\n"))?;
            eprintln!(
                "{} documents written to {}",
                demo.documents.len(),
                out.display()
            );
        }
        Command::Run {
            config,
            overrides,
            out_dir,
            seed,
        } => {
            let mut cfg = match config {
                Some(p) => RunConfig::load(&p)?,
                None => RunConfig::default(),
            };
            for o in &overrides {
                let (k, v) = o.split_once('=').ok_or_else(|| {
                    Error::InvalidParameter(format!("--set expects KEY=VALUE, got {o:?}"))
                })?;
                cfg.set(k.trim(), v)?;
            }
            if let Some(d) = out_dir {
                cfg.out_dir = d;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            cfg.validate()?;
            let summary = run_pipeline(&cfg)?;
            for (stage, status) in &summary.stages {
                let s = match status {
                    StageStatus::Ran => "ran",
                    StageStatus::Skipped => "up to date",
                };
                eprintln!("{stage:<10} {s}");
            }
            for w in &summary.warnings {
                eprintln!("warning: {w}");
            }
        }
    }
    Ok(())
}

fn write(path: &Path, text: &str) -> Result<()> {
    report::write_file(path, |b| {
        b.extend_from_slice(text.as_bytes());
        Ok(())
    })
}

fn diagnose(what: DiagnoseWhat, a: &DiagnoseArgs) -> Result<()> {
    let records: Vec<ExportRecord> = jsonl::read_path(&a.annotations)?;
    let vocabulary = Vocabulary::load(&a.vocab)?;
    let lexicon = match &a.lexicon {
        Some(p) => Lexicon::load(p)?,
        None => Lexicon::builtin(),
    };
    let annotator = RuleAnnotator::new(lexicon);
    let opts = QuadrantOptions {
        english_only: !a.all_languages,
        inclusive_negatives: !a.strict_negatives,
    };
    let docs = a
        .corpus
        .as_deref()
        .map(read_corpus)
        .transpose()?
        .unwrap_or_default();
    match what {
        DiagnoseWhat::Features => {
            // the full bundle; features.csv holds the per-candidate rows
            write_diagnostics(&records, &docs, &annotator, &vocabulary, opts, &a.out)?;
        }
        DiagnoseWhat::Quadrants => {
            let inputs = quadrant_inputs(&records, &StopwordDetector::default());
            let assignments = assign_quadrants(&inputs, opts)?;
            report::write_file(&a.out.join("quadrants.csv"), |b| {
                report::write_quadrants_csv(&assignments, b)
            })?;
        }
        DiagnoseWhat::Summary => {
            let features = compute_features(&records, &annotator, &vocabulary);
            let inputs = quadrant_inputs(&records, &StopwordDetector::default());
            let summary = quadrant_summary(&assign_quadrants(&inputs, opts)?, &features);
            report::write_file(&a.out.join("summary.csv"), |b| {
                report::write_summary_csv(&summary, b)
            })?;
            print!("{}", report::render_summary_table(&summary));
        }
        DiagnoseWhat::Langdist => {
            if docs.is_empty() {
                return Err(Error::InvalidParameter(
                    "langdist needs --corpus for the baseline".into(),
                ));
            }
            let detector = StopwordDetector::default();
            let inputs = quadrant_inputs(&records, &detector);
            let obs: Vec<(Label, String)> = records
                .iter()
                .zip(inputs)
                .map(|(r, i)| (r.label, i.language.unwrap_or_default()))
                .collect();
            let table = language_distribution(&obs, &token_baseline(&docs));
            report::write_file(&a.out.join("language.csv"), |b| {
                report::write_language_csv(&table, b)
            })?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_data_error() { 2 } else { 3 })
        }
    }
}
