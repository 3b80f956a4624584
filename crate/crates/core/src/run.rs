//! End-to-end workflow with resumable, file-backed stages.
//!
//! Every stage reads and writes artifacts under `out_dir` and is skipped
//! when all of its outputs are at least as new as all of its inputs. The
//! resolved configuration is written to `run_config.txt` (only when it
//! changes) and counts as an input of every stage, so changing a parameter
//! reruns everything downstream.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use chrono::{DateTime, Duration, TimeZone, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::annotate::{enqueue_candidates, AnnotationStore, CandidateSource, ExportRecord, Label};
use crate::corpus::{chunk_corpus, Chunk, DocumentRecord, DEFAULT_CHUNK_SIZE};
use crate::demo::{make_demo_corpus, DemoConfig, GroundTruth};
use crate::diagnostics::{
    assign_quadrants, compute_features, language_distribution, quadrant_inputs, quadrant_summary,
    token_baseline, Lexicon, QuadrantOptions, RuleAnnotator, StopwordDetector, Vocabulary,
};
use crate::embed::{
    embed_chunks, embed_texts, read_vectors, write_vectors, HashEmbedder, DEFAULT_DIM,
};
use crate::index::{FlatIndex, RankedHit};
use crate::jsonl;
use crate::pipeline::{
    anti_lexical_partition, dedupe_by_work, filter_subcorpus, ChunkSpans, HitPartition,
    PartitionRecord,
};
use crate::report;
use crate::reuse::{
    cluster_reuses, detect_reuse, extract_query_quotes, select_query_set, AlignParams,
    AlignmentMatch, QueryQuote, QuoteConstraints, ReuseCluster,
};
use crate::sampling::{
    plan_for, Decision, DeepeningDecision, SamplingPlan, Stage, DEFAULT_DEEPEN_THRESHOLD,
};
use crate::stats::{self, Facet, FacetInput, RankedAnnotation, RhoMode};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub out_dir: PathBuf,
    /// Corpus JSONL; when absent the seeded demo corpus is generated.
    pub corpus: Option<PathBuf>,
    /// Work whose quotes are traced. Required with an external corpus.
    pub source_work: Option<String>,
    pub chunk_size: usize,
    pub dim: usize,
    /// Precomputed chunk vectors (RMV1) replacing the hash embedder.
    pub vectors: Option<PathBuf>,
    /// Precomputed quote vectors keyed by quote id; needed with `vectors`.
    pub query_vectors: Option<PathBuf>,
    /// Search depth; 0 searches every chunk.
    pub k: usize,
    pub seed: u64,
    pub deepen_threshold: f64,
    pub port: u16,
    pub align: AlignParams,
    pub quote_min_len: usize,
    pub quote_max_len: usize,
    pub quote_min_freq: usize,
    /// Label candidates from the demo ground truth instead of waiting for
    /// annotators.
    pub simulate: bool,
    pub demo: DemoConfig,
    pub vocab: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub english_only: bool,
    pub inclusive_negatives: bool,
    pub rho_mode: RhoMode,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("reception-out"),
            corpus: None,
            source_work: None,
            chunk_size: DEFAULT_CHUNK_SIZE,
            dim: DEFAULT_DIM,
            vectors: None,
            query_vectors: None,
            k: 0,
            seed: 42,
            deepen_threshold: DEFAULT_DEEPEN_THRESHOLD,
            port: 8080,
            align: AlignParams::default(),
            quote_min_len: 150,
            quote_max_len: 300,
            quote_min_freq: 3,
            simulate: true,
            demo: DemoConfig::default(),
            vocab: None,
            lexicon: None,
            english_only: true,
            inclusive_negatives: true,
            rho_mode: RhoMode::Pooled,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::InvalidParameter(format!("{key}: cannot parse {value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::InvalidParameter(format!(
            "{key}: expected true or false, got {value:?}"
        ))),
    }
}

fn opt_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl RunConfig {
    pub const KEYS: &'static [&'static str] = &[
        "out_dir",
        "corpus",
        "source_work",
        "chunk_size",
        "dim",
        "vectors",
        "query_vectors",
        "k",
        "seed",
        "deepen_threshold",
        "port",
        "seed_len",
        "match_score",
        "mismatch_score",
        "gap_score",
        "x_drop",
        "min_score",
        "quote_min_len",
        "quote_max_len",
        "quote_min_freq",
        "simulate",
        "demo_quotes",
        "demo_copies",
        "demo_paraphrases",
        "demo_topical",
        "demo_noise_docs",
        "demo_ocr_rate",
        "vocab",
        "lexicon",
        "english_only",
        "inclusive_negatives",
        "rho_mode",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key {
            "out_dir" => self.out_dir = PathBuf::from(v),
            "corpus" => self.corpus = opt_path(v),
            "source_work" => self.source_work = (!v.is_empty()).then(|| v.to_owned()),
            "chunk_size" => self.chunk_size = parse_num(key, v)?,
            "dim" => self.dim = parse_num(key, v)?,
            "vectors" => self.vectors = opt_path(v),
            "query_vectors" => self.query_vectors = opt_path(v),
            "k" => self.k = parse_num(key, v)?,
            "seed" => self.seed = parse_num(key, v)?,
            "deepen_threshold" => self.deepen_threshold = parse_num(key, v)?,
            "port" => self.port = parse_num(key, v)?,
            "seed_len" => self.align.seed_len = parse_num(key, v)?,
            "match_score" => self.align.match_score = parse_num(key, v)?,
            "mismatch_score" => self.align.mismatch_score = parse_num(key, v)?,
            "gap_score" => self.align.gap_score = parse_num(key, v)?,
            "x_drop" => self.align.x_drop = parse_num(key, v)?,
            "min_score" => self.align.min_score = parse_num(key, v)?,
            "quote_min_len" => self.quote_min_len = parse_num(key, v)?,
            "quote_max_len" => self.quote_max_len = parse_num(key, v)?,
            "quote_min_freq" => self.quote_min_freq = parse_num(key, v)?,
            "simulate" => self.simulate = parse_bool(key, v)?,
            "demo_quotes" => self.demo.quotes = parse_num(key, v)?,
            "demo_copies" => self.demo.copies_per_quote = parse_num(key, v)?,
            "demo_paraphrases" => self.demo.paraphrases_per_quote = parse_num(key, v)?,
            "demo_topical" => self.demo.topical_per_quote = parse_num(key, v)?,
            "demo_noise_docs" => self.demo.noise_docs = parse_num(key, v)?,
            "demo_ocr_rate" => self.demo.ocr_rate = parse_num(key, v)?,
            "vocab" => self.vocab = opt_path(v),
            "lexicon" => self.lexicon = opt_path(v),
            "english_only" => self.english_only = parse_bool(key, v)?,
            "inclusive_negatives" => self.inclusive_negatives = parse_bool(key, v)?,
            "rho_mode" => self.rho_mode = v.parse().map_err(Error::InvalidParameter)?,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown config key {other:?}"
                )))
            }
        }
        Ok(())
    }

    /// Parses `key = value` lines over the defaults. `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::MalformedLine {
                line: i + 1,
                message: "expected key = value".into(),
            })?;
            cfg.set(k.trim(), v).map_err(|e| Error::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if self.chunk_size == 0 {
            return bad("chunk_size must be positive".into());
        }
        if self.vectors.is_none() && self.dim < crate::embed::MIN_HASH_DIM {
            return bad(format!(
                "dim must be at least {}",
                crate::embed::MIN_HASH_DIM
            ));
        }
        if self.vectors.is_some() != self.query_vectors.is_some() {
            return bad("vectors and query_vectors must be given together".into());
        }
        if !(0.0..=1.0).contains(&self.deepen_threshold) {
            return bad(format!(
                "deepen_threshold {} outside [0, 1]",
                self.deepen_threshold
            ));
        }
        if self.quote_min_len > self.quote_max_len {
            return bad("quote_min_len exceeds quote_max_len".into());
        }
        if self.corpus.is_some() && self.source_work.is_none() {
            return bad("an external corpus needs source_work".into());
        }
        if self.corpus.is_some() && self.simulate {
            return bad(
                "simulate labels come from the demo ground truth; set simulate = false".into(),
            );
        }
        self.align.validate()?;
        self.demo.validate()
    }

    /// Canonical `key = value` rendering; parsing it yields the same config.
    pub fn to_text(&self) -> String {
        let p = |o: &Option<PathBuf>| {
            o.as_ref()
                .map_or_else(String::new, |p| p.display().to_string())
        };
        let values: Vec<String> = vec![
            self.out_dir.display().to_string(),
            p(&self.corpus),
            self.source_work.clone().unwrap_or_default(),
            self.chunk_size.to_string(),
            self.dim.to_string(),
            p(&self.vectors),
            p(&self.query_vectors),
            self.k.to_string(),
            self.seed.to_string(),
            self.deepen_threshold.to_string(),
            self.port.to_string(),
            self.align.seed_len.to_string(),
            self.align.match_score.to_string(),
            self.align.mismatch_score.to_string(),
            self.align.gap_score.to_string(),
            self.align.x_drop.to_string(),
            self.align.min_score.to_string(),
            self.quote_min_len.to_string(),
            self.quote_max_len.to_string(),
            self.quote_min_freq.to_string(),
            self.simulate.to_string(),
            self.demo.quotes.to_string(),
            self.demo.copies_per_quote.to_string(),
            self.demo.paraphrases_per_quote.to_string(),
            self.demo.topical_per_quote.to_string(),
            self.demo.noise_docs.to_string(),
            self.demo.ocr_rate.to_string(),
            p(&self.vocab),
            p(&self.lexicon),
            self.english_only.to_string(),
            self.inclusive_negatives.to_string(),
            match self.rho_mode {
                RhoMode::Pooled => "pooled".into(),
                RhoMode::Mean => "mean".into(),
            },
        ];
        let mut s = String::new();
        for (k, v) in Self::KEYS.iter().zip(values) {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn quote_constraints(&self) -> QuoteConstraints {
        QuoteConstraints {
            min_len: self.quote_min_len,
            max_len: self.quote_max_len,
            min_freq: self.quote_min_freq,
        }
    }

    pub fn quadrant_options(&self) -> QuadrantOptions {
        QuadrantOptions {
            english_only: self.english_only,
            inclusive_negatives: self.inclusive_negatives,
        }
    }
}

/// Artifact locations under the output directory.
#[derive(Debug, Clone)]
pub struct Artifacts {
    pub root: PathBuf,
}

macro_rules! artifact {
    ($($name:ident => $file:expr),* $(,)?) => {
        impl Artifacts {
            $(pub fn $name(&self) -> PathBuf { self.root.join($file) })*
        }
    };
}

artifact! {
    config => "run_config.txt",
    corpus => "corpus.jsonl",
    ground_truth => "ground_truth.json",
    vocab => "vocab.txt",
    chunks => "chunks.jsonl",
    vectors => "vectors.rmv",
    source_matches => "source_matches.jsonl",
    clusters => "clusters.jsonl",
    quotes => "quotes.jsonl",
    query_set => "query_set.jsonl",
    hits => "hits.jsonl",
    lexical => "lexical_matches.jsonl",
    partition => "partition.jsonl",
    pools => "pools.jsonl",
    plans => "plans.jsonl",
    candidates => "candidates.jsonl",
    annotations => "annotations.jsonl",
    decisions => "decisions.jsonl",
    stats_dir => "stats",
    diagnostics_dir => "diagnostics",
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ran,
    Skipped,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub stages: Vec<(String, StageStatus)>,
    pub warnings: Vec<String>,
}

fn mtime(path: &Path) -> Option<SystemTime> {
    std::fs::metadata(path).and_then(|m| m.modified()).ok()
}

/// Whether every output exists and none is older than any input.
pub fn up_to_date(inputs: &[PathBuf], outputs: &[PathBuf]) -> bool {
    let Some(oldest_out) = outputs
        .iter()
        .map(|p| mtime(p))
        .collect::<Option<Vec<_>>>()
        .and_then(|v| v.into_iter().min())
    else {
        return false;
    };
    inputs
        .iter()
        .all(|p| mtime(p).is_some_and(|t| t <= oldest_out))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    report::write_file(path, |buf| {
        buf.extend_from_slice(text.as_bytes());
        Ok(())
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    write_text(path, &(text + "\n"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn read_corpus(path: &Path) -> Result<Vec<DocumentRecord>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    crate::corpus::ingest(std::io::BufReader::new(file))
}

struct Runner {
    art: Artifacts,
    summary: RunSummary,
}

impl Runner {
    fn stage(
        &mut self,
        name: &str,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
        body: impl FnOnce(&mut Vec<String>) -> Result<()>,
    ) -> Result<()> {
        let mut all_inputs = vec![self.art.config()];
        all_inputs.extend(inputs);
        for p in &all_inputs {
            if !p.exists() {
                return Err(Error::io(
                    p,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "missing input"),
                )
                .in_stage(name));
            }
        }
        if up_to_date(&all_inputs, &outputs) {
            self.summary
                .stages
                .push((name.to_owned(), StageStatus::Skipped));
            return Ok(());
        }
        let mut warnings = Vec::new();
        body(&mut warnings).map_err(|e| e.in_stage(name))?;
        self.summary
            .warnings
            .extend(warnings.into_iter().map(|w| format!("{name}: {w}")));
        self.summary
            .stages
            .push((name.to_owned(), StageStatus::Ran));
        Ok(())
    }
}

/// A quote with the source span of its cluster, as the query set artifact
/// stores it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    #[serde(flatten)]
    pub quote: QueryQuote,
    pub source_start: usize,
    pub source_end: usize,
}

/// One query's annotation pool: semantic-only hits re-ranked from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolRecord {
    pub query_id: String,
    pub hits: Vec<RankedHit>,
}

pub fn run_pipeline(cfg: &RunConfig) -> Result<RunSummary> {
    cfg.validate()?;
    let art = Artifacts {
        root: cfg.out_dir.clone(),
    };
    std::fs::create_dir_all(&art.root).map_err(|e| Error::io(&art.root, e))?;
    let config_text = cfg.to_text();
    if std::fs::read_to_string(art.config()).ok().as_deref() != Some(config_text.as_str()) {
        write_text(&art.config(), &config_text)?;
    }
    let mut r = Runner {
        art: art.clone(),
        summary: RunSummary::default(),
    };

    // corpus
    match &cfg.corpus {
        None => r.stage(
            "demo",
            vec![],
            vec![art.corpus(), art.ground_truth(), art.vocab()],
            |_| {
                let demo = make_demo_corpus(cfg.seed, cfg.demo)?;
                jsonl::write_path(&art.corpus(), &demo.documents)?;
                write_json(&art.ground_truth(), &demo.truth)?;
                write_text(&art.vocab(), &(demo.vocabulary.join("\n") + "\n"))
            },
        )?,
        Some(src) => r.stage("ingest", vec![src.clone()], vec![art.corpus()], |_| {
            let docs = read_corpus(src)?;
            jsonl::write_path(&art.corpus(), &docs)
        })?,
    }

    r.stage("chunk", vec![art.corpus()], vec![art.chunks()], |_| {
        let docs = read_corpus(&art.corpus())?;
        jsonl::write_path(&art.chunks(), &chunk_corpus(&docs, cfg.chunk_size)?)
    })?;

    let mut embed_inputs = vec![art.chunks()];
    embed_inputs.extend(cfg.vectors.clone());
    r.stage("embed", embed_inputs, vec![art.vectors()], |_| {
        let chunks: Vec<Chunk> = jsonl::read_path(&art.chunks())?;
        let set = match &cfg.vectors {
            Some(p) => {
                let set = read_vectors(p)?;
                let ids: HashSet<&str> = set.ids().iter().map(String::as_str).collect();
                if let Some(missing) = chunks.iter().find(|c| !ids.contains(c.chunk_id.as_str())) {
                    return Err(Error::UnknownChunk(missing.chunk_id.clone()));
                }
                set
            }
            None => embed_chunks(&chunks, &HashEmbedder::new(cfg.dim)?)?,
        };
        write_vectors(&art.vectors(), &set)
    })?;

    r.stage(
        "reuse",
        vec![art.corpus()],
        vec![
            art.source_matches(),
            art.clusters(),
            art.quotes(),
            art.query_set(),
        ],
        |warnings| stage_reuse(cfg, &art, warnings),
    )?;

    let mut search_inputs = vec![art.vectors(), art.chunks(), art.query_set()];
    search_inputs.extend(cfg.query_vectors.clone());
    r.stage("search", search_inputs, vec![art.hits()], |_| {
        stage_search(cfg, &art)
    })?;

    r.stage(
        "partition",
        vec![art.hits(), art.query_set(), art.corpus(), art.chunks()],
        vec![art.lexical(), art.partition()],
        |_| stage_partition(cfg, &art),
    )?;

    r.stage(
        "sample",
        vec![art.partition(), art.query_set(), art.corpus(), art.chunks()],
        vec![art.pools(), art.plans(), art.candidates()],
        |warnings| stage_sample(&art, warnings),
    )?;

    if cfg.simulate {
        r.stage(
            "annotate",
            vec![
                art.candidates(),
                art.pools(),
                art.ground_truth(),
                art.query_set(),
            ],
            vec![art.annotations(), art.decisions()],
            |warnings| stage_simulate(cfg, &art, warnings),
        )?;
    } else if !art.annotations().exists() {
        r.summary.warnings.push(format!(
            "annotate: no {} yet; collect labels with `serve` and export them there to continue",
            art.annotations().display()
        ));
        return Ok(r.summary);
    }

    let stats_out = stats_outputs(&art.stats_dir());
    r.stage(
        "stats",
        vec![art.annotations(), art.partition()],
        stats_out,
        |_| {
            let records: Vec<ExportRecord> = jsonl::read_path(&art.annotations())?;
            let partition = HitPartition::from_records(jsonl::read_path(&art.partition())?);
            write_stats(&records, Some(&partition), cfg.rho_mode, &art.stats_dir())
        },
    )?;

    let vocab_path = cfg
        .vocab
        .clone()
        .or_else(|| cfg.corpus.is_none().then(|| art.vocab()));
    let mut diag_inputs = vec![art.annotations(), art.corpus()];
    diag_inputs.extend(vocab_path.clone());
    diag_inputs.extend(cfg.lexicon.clone());
    r.stage(
        "diagnose",
        diag_inputs,
        diagnostics_outputs(&art.diagnostics_dir()),
        |warnings| {
            let records: Vec<ExportRecord> = jsonl::read_path(&art.annotations())?;
            let docs = read_corpus(&art.corpus())?;
            let lexicon = match &cfg.lexicon {
                Some(p) => Lexicon::load(p)?,
                None => Lexicon::builtin(),
            };
            let vocabulary = match &vocab_path {
                Some(p) => Vocabulary::load(p)?,
                None => {
                    warnings
                        .push("no vocabulary given; OOV rates use the lexicon's word list".into());
                    lexicon.words().collect()
                }
            };
            write_diagnostics(
                &records,
                &docs,
                &RuleAnnotator::new(lexicon),
                &vocabulary,
                cfg.quadrant_options(),
                &art.diagnostics_dir(),
            )
        },
    )?;

    Ok(r.summary)
}

fn source_docs<'a>(docs: &'a [DocumentRecord], source_work: &str) -> Vec<&'a DocumentRecord> {
    docs.iter().filter(|d| d.work_id == source_work).collect()
}

fn resolve_source_work(cfg: &RunConfig, art: &Artifacts) -> Result<String> {
    match &cfg.source_work {
        Some(w) => Ok(w.clone()),
        None => Ok(read_json::<GroundTruth>(&art.ground_truth())?.source_work),
    }
}

fn stage_reuse(cfg: &RunConfig, art: &Artifacts, warnings: &mut Vec<String>) -> Result<()> {
    let docs = read_corpus(&art.corpus())?;
    let source_work = resolve_source_work(cfg, art)?;
    let sources = source_docs(&docs, &source_work);
    if sources.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "source work {source_work:?} has no documents"
        )));
    }
    let targets: Vec<DocumentRecord> = docs
        .iter()
        .filter(|d| d.work_id != source_work)
        .cloned()
        .collect();
    let mut all_matches: Vec<AlignmentMatch> = Vec::new();
    let mut clusters: Vec<ReuseCluster> = Vec::new();
    let mut spans: HashMap<String, (usize, usize)> = HashMap::new();
    for (i, src) in sources.iter().enumerate() {
        let matches = detect_reuse(&src.doc_id, &src.text, &targets, &cfg.align)?;
        // documents of a multi-document source work get distinct cluster ids
        let label = if sources.len() == 1 {
            source_work.clone()
        } else {
            format!("{source_work}.{i}")
        };
        let mut found = cluster_reuses(&matches, &label, &src.text);
        for c in &mut found {
            c.source_work = source_work.clone();
            spans.insert(
                c.cluster_id.clone(),
                (c.source_span.start, c.source_span.end),
            );
        }
        clusters.extend(found);
        all_matches.extend(matches);
    }
    let quotes = extract_query_quotes(&clusters, cfg.quote_constraints());
    let selection = select_query_set(&quotes, cfg.seed);
    warnings.extend(selection.warnings);
    let query_set: Vec<QueryRecord> = selection
        .quotes
        .into_iter()
        .map(|q| {
            let (source_start, source_end) = spans[&q.cluster_id];
            QueryRecord {
                quote: q,
                source_start,
                source_end,
            }
        })
        .collect();
    jsonl::write_path(&art.source_matches(), &all_matches)?;
    jsonl::write_path(&art.clusters(), &clusters)?;
    jsonl::write_path(&art.quotes(), &quotes)?;
    jsonl::write_path(&art.query_set(), &query_set)
}

fn stage_search(cfg: &RunConfig, art: &Artifacts) -> Result<()> {
    let chunks: Vec<Chunk> = jsonl::read_path(&art.chunks())?;
    let queries: Vec<QueryRecord> = jsonl::read_path(&art.query_set())?;
    let docs = read_corpus(&art.corpus())?;
    let source_work = resolve_source_work(cfg, art)?;
    let index = FlatIndex::build(read_vectors(&art.vectors())?)?.with_chunks(&chunks);
    let query_vectors = match &cfg.query_vectors {
        Some(p) => read_vectors(p)?,
        None => embed_texts(
            queries
                .iter()
                .map(|q| (q.quote.quote_id.as_str(), q.quote.text.as_str())),
            &HashEmbedder::new(cfg.dim)?,
        )?,
    };
    let k = if cfg.k == 0 { index.len() } else { cfg.k };
    let allowed: HashSet<String> = docs
        .iter()
        .filter(|d| d.work_id != source_work)
        .map(|d| d.doc_id.clone())
        .collect();
    let mut out = Vec::new();
    for q in &queries {
        let v = query_vectors.get(&q.quote.quote_id).ok_or_else(|| {
            Error::InvalidParameter(format!("no vector for query {}", q.quote.quote_id))
        })?;
        let hits = index.search(&q.quote.quote_id, v, k)?;
        out.extend(dedupe_by_work(&filter_subcorpus(&hits, &allowed)));
    }
    jsonl::write_path(&art.hits(), &out)
}

fn group_hits(hits: Vec<RankedHit>) -> BTreeMap<String, Vec<RankedHit>> {
    let mut by_query: BTreeMap<String, Vec<RankedHit>> = BTreeMap::new();
    for h in hits {
        by_query.entry(h.query_id.clone()).or_default().push(h);
    }
    by_query
}

fn stage_partition(cfg: &RunConfig, art: &Artifacts) -> Result<()> {
    let hits = group_hits(jsonl::read_path(&art.hits())?);
    let queries: Vec<QueryRecord> = jsonl::read_path(&art.query_set())?;
    let docs = read_corpus(&art.corpus())?;
    let chunks: Vec<Chunk> = jsonl::read_path(&art.chunks())?;
    let spans = ChunkSpans::from_chunks(&chunks);
    let source_work = resolve_source_work(cfg, art)?;
    let targets: Vec<DocumentRecord> = docs
        .into_iter()
        .filter(|d| d.work_id != source_work)
        .collect();
    let mut lexical = Vec::new();
    let mut partition = HitPartition::default();
    for q in &queries {
        let id = &q.quote.quote_id;
        let matches = detect_reuse(id, &q.quote.text, &targets, &cfg.align)?;
        let empty = Vec::new();
        let p = anti_lexical_partition(hits.get(id).unwrap_or(&empty), &matches, &spans)?;
        partition.intersection.extend(p.intersection);
        partition.unique_semantic.extend(p.unique_semantic);
        partition.unique_lexical.extend(p.unique_lexical);
        lexical.extend(matches);
    }
    jsonl::write_path(&art.lexical(), &lexical)?;
    jsonl::write_path(&art.partition(), &partition.to_records())
}

fn annotation_pools(partition: &HitPartition) -> Vec<PoolRecord> {
    group_hits(partition.unique_semantic.clone())
        .into_iter()
        .map(|(query_id, mut hits)| {
            hits.sort_by_key(|h| h.rank);
            for (i, h) in hits.iter_mut().enumerate() {
                h.rank = i + 1;
            }
            PoolRecord { query_id, hits }
        })
        .collect()
}

fn candidate_source<'a>(
    docs: &'a [DocumentRecord],
    chunks: &'a [Chunk],
    queries: &'a [QueryRecord],
) -> CandidateSource<'a> {
    queries
        .iter()
        .fold(CandidateSource::new(docs, chunks), |s, q| {
            s.with_quote(&q.quote.quote_id, &q.quote.text)
        })
}

fn stage_sample(art: &Artifacts, warnings: &mut Vec<String>) -> Result<()> {
    let partition =
        HitPartition::from_records(jsonl::read_path::<PartitionRecord>(&art.partition())?);
    let queries: Vec<QueryRecord> = jsonl::read_path(&art.query_set())?;
    let docs = read_corpus(&art.corpus())?;
    let chunks: Vec<Chunk> = jsonl::read_path(&art.chunks())?;
    let source = candidate_source(&docs, &chunks, &queries);
    let pools = annotation_pools(&partition);
    let mut plans = Vec::new();
    let mut candidates = Vec::new();
    for q in &queries {
        let id = &q.quote.quote_id;
        let Some(pool) = pools.iter().find(|p| &p.query_id == id) else {
            warnings.push(format!("{id}: no semantic-only hits to annotate"));
            continue;
        };
        let plan = plan_for(Stage::Pilot, id, pool.hits.len())?;
        warnings.extend(plan.warnings.iter().map(|w| format!("{id}: {w}")));
        candidates.extend(enqueue_candidates(&plan, &pool.hits, &source)?);
        plans.push(plan);
    }
    jsonl::write_path(&art.pools(), &pools)?;
    jsonl::write_path(&art.plans(), &plans)?;
    jsonl::write_path(&art.candidates(), &candidates)
}

/// Fixed origin for simulated annotation timestamps.
pub fn simulation_epoch() -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2024, 1, 1, 9, 0, 0)
        .single()
        .expect("valid date")
}

fn stage_simulate(cfg: &RunConfig, art: &Artifacts, warnings: &mut Vec<String>) -> Result<()> {
    let truth: GroundTruth = read_json(&art.ground_truth())?;
    let queries: Vec<QueryRecord> = jsonl::read_path(&art.query_set())?;
    let pools: Vec<PoolRecord> = jsonl::read_path(&art.pools())?;
    let docs = read_corpus(&art.corpus())?;
    let chunks: Vec<Chunk> = jsonl::read_path(&art.chunks())?;
    let source = candidate_source(&docs, &chunks, &queries);
    let planted: HashMap<&str, Option<usize>> = queries
        .iter()
        .map(|q| {
            let span = crate::reuse::Span::new(q.source_start, q.source_end);
            (q.quote.quote_id.as_str(), truth.quote_for_span(&span))
        })
        .collect();

    let mut store = AnnotationStore::in_memory();
    store.enqueue(jsonl::read_path(&art.candidates())?)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xa770_7a7e);
    let mut clock = simulation_epoch();
    let mut label_pending = |store: &mut AnnotationStore| -> Result<()> {
        let pending: Vec<(String, String, String)> = store
            .candidates()
            .filter(|c| store.current_annotation(&c.candidate_id).is_none())
            .map(|c| (c.candidate_id.clone(), c.query_id.clone(), c.doc_id.clone()))
            .collect();
        for (cid, qid, doc) in pending {
            let label = match planted.get(qid.as_str()).copied().flatten() {
                Some(quote) => truth.expected_label(quote, &doc),
                None => Label::DontKnow,
            };
            let duration = rng.gen_range(5.0..40.0_f64).round();
            clock += Duration::seconds(duration as i64);
            store.submit_label(&cid, label, "simulated", duration, clock)?;
        }
        Ok(())
    };
    label_pending(&mut store)?;

    let mut decisions: Vec<(Stage, DeepeningDecision)> = Vec::new();
    for pool in &pools {
        let mut stage = Stage::Pilot;
        loop {
            let decision = store
                .progress(&pool.query_id, cfg.deepen_threshold)
                .decision;
            decisions.push((stage, decision.clone()));
            let next = match (decision.decision, stage) {
                (Decision::Deepen, Stage::Pilot) => Stage::Triage,
                (Decision::Deepen, Stage::Triage) => Stage::Exhaustive,
                _ => break,
            };
            let plan: SamplingPlan = match plan_for(next, &pool.query_id, pool.hits.len()) {
                Ok(p) => p,
                Err(e) => {
                    warnings.push(format!("{}: cannot deepen: {e}", pool.query_id));
                    break;
                }
            };
            store.enqueue(enqueue_candidates(&plan, &pool.hits, &source)?)?;
            label_pending(&mut store)?;
            stage = next;
        }
    }

    #[derive(Serialize)]
    struct DecisionRecord<'a> {
        stage: Stage,
        #[serde(flatten)]
        decision: &'a DeepeningDecision,
    }
    let records: Vec<DecisionRecord> = decisions
        .iter()
        .map(|(stage, d)| DecisionRecord {
            stage: *stage,
            decision: d,
        })
        .collect();
    jsonl::write_path(&art.annotations(), &store.export(None))?;
    jsonl::write_path(&art.decisions(), &records)
}

pub fn stats_outputs(dir: &Path) -> Vec<PathBuf> {
    [
        "category_table.csv",
        "category_table.txt",
        "yield_curve.csv",
        "facet_author.csv",
        "facet_genre.csv",
        "facet_decade.csv",
        "score_by_category.csv",
        "work_level.csv",
    ]
    .iter()
    .map(|f| dir.join(f))
    .collect()
}

pub fn diagnostics_outputs(dir: &Path) -> Vec<PathBuf> {
    [
        "features.csv",
        "quadrants.csv",
        "summary.csv",
        "summary.txt",
        "language.csv",
    ]
    .iter()
    .map(|f| dir.join(f))
    .collect()
}

/// Writes every statistics table for `records` into `dir`. The work-level
/// comparison needs the partition and is written empty without one.
pub fn write_stats(
    records: &[ExportRecord],
    partition: Option<&HitPartition>,
    mode: RhoMode,
    dir: &Path,
) -> Result<()> {
    let ranked: Vec<RankedAnnotation> = records.iter().map(RankedAnnotation::from).collect();
    let table = stats::category_table(&ranked, mode);
    report::write_file(&dir.join("category_table.csv"), |b| {
        report::write_category_csv(&table, b)
    })?;
    write_text(
        &dir.join("category_table.txt"),
        &report::render_category_table(&table),
    )?;

    report::write_file(&dir.join("yield_curve.csv"), |b| {
        let mut w = report::yield_csv_writer(b)?;
        for (q, group) in stats::group_by_query(&ranked) {
            let entries: Vec<(usize, Label)> =
                group.iter().map(|r| (r.original_rank, r.label)).collect();
            report::write_yield_csv(q, &stats::yield_curve(&entries), &mut w)?;
        }
        report::finish_csv(w)
    })?;

    let facets: Vec<FacetInput> = records.iter().map(FacetInput::from).collect();
    for (facet, name) in [
        (Facet::Author, "author"),
        (Facet::Genre, "genre"),
        (Facet::Decade, "decade"),
    ] {
        let rows = stats::facet_counts(&facets, facet, None);
        report::write_file(&dir.join(format!("facet_{name}.csv")), |b| {
            report::write_facet_csv(name, &rows, b)
        })?;
    }
    report::write_file(&dir.join("score_by_category.csv"), |b| {
        report::write_score_by_category_csv(&ranked, b)
    })?;
    let comparison = partition
        .map(|p| stats::work_level_comparison(p, &ranked))
        .unwrap_or(stats::WorkLevelComparison {
            significant_semantic_works: 0,
            lexical_works: 0,
        });
    report::write_file(&dir.join("work_level.csv"), |b| {
        report::write_work_level_csv(&comparison, b)
    })
}

pub fn write_diagnostics(
    records: &[ExportRecord],
    docs: &[DocumentRecord],
    annotator: &RuleAnnotator,
    vocabulary: &Vocabulary,
    opts: QuadrantOptions,
    dir: &Path,
) -> Result<()> {
    let features = compute_features(records, annotator, vocabulary);
    let detector = StopwordDetector::default();
    let inputs = quadrant_inputs(records, &detector);
    let assignments = assign_quadrants(&inputs, opts)?;

    report::write_file(&dir.join("features.csv"), |b| {
        let mut w = csv::Writer::from_writer(b);
        w.write_record([
            "candidate_id",
            "label",
            "language",
            "quadrant",
            "vocab_sim",
            "quote_oov",
            "hit_oov",
            "pos_div",
        ])?;
        let f = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
        for ((r, input), a) in records.iter().zip(&inputs).zip(&assignments) {
            let feat = features[&r.candidate.candidate_id];
            w.write_record([
                r.candidate.candidate_id.clone(),
                r.label.as_str().to_owned(),
                input.language.clone().unwrap_or_default(),
                a.quadrant.as_str().to_owned(),
                f(feat.vocab_sim),
                f(feat.quote_oov),
                f(feat.hit_oov),
                f(feat.pos_div),
            ])?;
        }
        report::finish_csv(w)
    })?;
    report::write_file(&dir.join("quadrants.csv"), |b| {
        report::write_quadrants_csv(&assignments, b)
    })?;
    let summary = quadrant_summary(&assignments, &features);
    report::write_file(&dir.join("summary.csv"), |b| {
        report::write_summary_csv(&summary, b)
    })?;
    write_text(
        &dir.join("summary.txt"),
        &report::render_summary_table(&summary),
    )?;

    let observations: Vec<(Label, String)> = records
        .iter()
        .zip(&inputs)
        .map(|(r, i)| (r.label, i.language.clone().unwrap_or_default()))
        .collect();
    let table = language_distribution(&observations, &token_baseline(docs));
    report::write_file(&dir.join("language.csv"), |b| {
        report::write_language_csv(&table, b)
    })
}
