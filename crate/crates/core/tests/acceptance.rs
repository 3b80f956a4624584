//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL/SKIP line, then exits non-zero if
//! any criterion failed.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use reception_core::annotate::{ExportRecord, Label};
use reception_core::corpus::{chunk_corpus, DocumentRecord};
use reception_core::demo::{make_demo_corpus, DemoConfig, PlantKind};
use reception_core::diagnostics::{
    assign_quadrants, compute_features, jaccard, jensen_shannon, pos_jsd, quadrant_inputs,
    quadrant_summary, vocab_jaccard, Lexicon, LinguisticProfile, Quadrant, QuadrantOptions,
    RuleAnnotator, StopwordDetector, Vocabulary,
};
use reception_core::embed::{embed_chunks, embed_texts, HashEmbedder, VectorSet};
use reception_core::index::FlatIndex;
use reception_core::pipeline::{
    anti_lexical_partition, dedupe_by_work, filter_subcorpus, recall_from_counts, ChunkSpans,
};
use reception_core::reuse::{detect_reuse, AlignParams, PreparedQuery};
use reception_core::run::{run_pipeline, RunConfig};
use reception_core::sampling::{exhaustive_plan, pilot_plan, triage_plan};
use reception_core::stats::{category_table, spearman_rho, RankedAnnotation, RhoMode};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

struct Criterion {
    name: &'static str,
    check: fn() -> Outcome,
}

fn main() {
    let criteria = [
        Criterion {
            name: "index exactness",
            check: index_exactness,
        },
        Criterion {
            name: "statistical oracles",
            check: statistical_oracles,
        },
        Criterion {
            name: "sampling arithmetic",
            check: sampling_arithmetic,
        },
        Criterion {
            name: "anti-lexical filter on demo corpus",
            check: anti_lexical_demo,
        },
        Criterion {
            name: "aligner OCR robustness",
            check: aligner_ocr_robustness,
        },
        Criterion {
            name: "released-dataset reproduction",
            check: released_dataset,
        },
        Criterion {
            name: "pipeline determinism",
            check: pipeline_determinism,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(c.check).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        let (tag, detail) = match outcome {
            Outcome::Pass(d) => ("PASS", d),
            Outcome::Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Outcome::Skip(d) => ("SKIP", d),
        };
        println!("[{tag}] {} ({secs:.2}s): {detail}", c.name);
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

// ---------------------------------------------------------------- index

fn random_unit(rng: &mut ChaCha8Rng, dim: usize) -> Vec<f32> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n > 1e-3 {
            return v.iter().map(|x| (x / n) as f32).collect();
        }
    }
}

fn index_exactness() -> Outcome {
    let (n, dim, queries, k) = (10_000, 256, 100, 50);
    let mut rng = ChaCha8Rng::seed_from_u64(0x1d3);
    let mut set = VectorSet::new(dim);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let v = random_unit(&mut rng, dim);
        let id = format!("v{i:05}");
        set.push(id.clone(), &v).unwrap();
        rows.push((id, v));
    }
    let start = Instant::now();
    let index = FlatIndex::build(set).unwrap();
    let qs: Vec<Vec<f32>> = (0..queries).map(|_| random_unit(&mut rng, dim)).collect();
    let results: Vec<Vec<String>> = qs
        .iter()
        .enumerate()
        .map(|(i, q)| {
            index
                .search(&format!("q{i}"), q, k)
                .unwrap()
                .into_iter()
                .map(|h| h.chunk_id)
                .collect()
        })
        .collect();
    let elapsed = start.elapsed();

    let mut exact = 0;
    for (q, got) in qs.iter().zip(&results) {
        let mut oracle: Vec<(f64, &str)> = rows
            .iter()
            .map(|(id, v)| {
                (
                    v.iter().zip(q).map(|(a, b)| *a as f64 * *b as f64).sum(),
                    id.as_str(),
                )
            })
            .collect();
        oracle.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(b.1)));
        if oracle
            .iter()
            .take(k)
            .map(|(_, id)| *id)
            .eq(got.iter().map(String::as_str))
        {
            exact += 1;
        }
    }
    verdict(
        exact == queries && elapsed < Duration::from_secs(10),
        format!("{exact}/{queries} queries equal the brute-force oracle; build+search {:.2}s (limit 10s)", elapsed.as_secs_f64()),
    )
}

// ---------------------------------------------------------------- statistics

fn oracle_ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let below = x.iter().filter(|&&o| o < v).count() as f64;
            let equal = x.iter().filter(|&&o| o == v).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn oracle_spearman(ind: &[bool], ranks: &[f64]) -> Option<f64> {
    let x = oracle_ranks(
        &ind.iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect::<Vec<_>>(),
    );
    let y = oracle_ranks(ranks);
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let cov: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

fn profile_with(lemmas: BTreeSet<String>) -> LinguisticProfile {
    LinguisticProfile {
        token_count: lemmas.len(),
        lemma_set: lemmas,
        oov_count: 0,
        pos_distribution: [1.0 / 12.0; 12],
        degenerate: false,
    }
}

fn statistical_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x57a7);
    let mut rho_ok = 0;
    let mut worst: f64 = 0.0;
    let instances = 1000;
    for _ in 0..instances {
        let n = rng.gen_range(3..=1000);
        let p = rng.gen_range(0.02..0.98);
        let ind: Vec<bool> = (0..n).map(|_| rng.gen_bool(p)).collect();
        let ranks: Vec<f64> = if rng.gen_bool(0.3) {
            (0..n)
                .map(|_| rng.gen_range(1..=n / 2 + 1) as f64)
                .collect()
        } else {
            let mut r: Vec<f64> = (1..=n).map(|r| r as f64).collect();
            r.shuffle(&mut rng);
            r
        };
        match (
            spearman_rho(&ind, &ranks).map(|c| c.rho),
            oracle_spearman(&ind, &ranks),
        ) {
            (Some(a), Some(b)) => {
                worst = worst.max((a - b).abs());
                if (a - b).abs() <= 1e-9 {
                    rho_ok += 1;
                }
            }
            (None, None) => rho_ok += 1,
            _ => {}
        }
    }

    let mut pq = [0.0; 12];
    pq[3] = 1.0;
    let mut disjoint = [0.0; 12];
    disjoint[7] = 1.0;
    let mut half = [0.0; 12];
    half[0] = 0.5;
    half[1] = 0.5;
    let mut one = [0.0; 12];
    one[0] = 1.0;
    let base = profile_with(BTreeSet::new());
    let with_dist = |d: [f64; 12]| LinguisticProfile {
        pos_distribution: d,
        ..base.clone()
    };
    let jsd_same = pos_jsd(&with_dist(pq), &with_dist(pq)).unwrap();
    let jsd_disjoint = pos_jsd(&with_dist(pq), &with_dist(disjoint)).unwrap();
    let jsd_half = pos_jsd(&with_dist(half), &with_dist(one)).unwrap();
    let jsd_ok = jsd_same.abs() < 1e-12
        && (jsd_disjoint - 1.0).abs() < 1e-12
        && (jsd_half - 0.3113).abs() < 1e-4
        && (jensen_shannon(&half, &one) - jsd_half).abs() < 1e-15;

    let mut jac_ok = 0;
    let pairs = 10_000;
    for _ in 0..pairs {
        let universe = rng.gen_range(1..40);
        let draw = |rng: &mut ChaCha8Rng| -> BTreeSet<String> {
            let size = rng.gen_range(0..=universe.min(25));
            (0..size)
                .map(|_| format!("w{}", rng.gen_range(0..universe)))
                .collect()
        };
        let (a, b) = (draw(&mut rng), draw(&mut rng));
        let (pa, pb) = (profile_with(a.clone()), profile_with(b.clone()));
        let ab = vocab_jaccard(&pa, &pb);
        let ba = vocab_jaccard(&pb, &pa);
        let inter = a.intersection(&b).count();
        let union = a.union(&b).count();
        let expected = if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        };
        let boundary = match (a.is_empty() && b.is_empty(), inter == 0, a == b) {
            (true, _, _) => ab == 0.0 && jaccard(&a, &b).1,
            (false, true, _) => ab == 0.0,
            (false, false, true) => ab == 1.0,
            _ => ab > 0.0 && ab < 1.0,
        };
        let self_sim = a.is_empty() || vocab_jaccard(&pa, &pa) == 1.0;
        if ab == ba
            && (0.0..=1.0).contains(&ab)
            && (ab - expected).abs() < 1e-15
            && boundary
            && self_sim
        {
            jac_ok += 1;
        }
    }

    verdict(
        rho_ok == instances && jsd_ok && jac_ok == pairs,
        format!(
            "spearman {rho_ok}/{instances} within 1e-9 (max diff {worst:.1e}); JSD same={jsd_same:.1e} disjoint={jsd_disjoint:.6} half/one={jsd_half:.6}; jaccard {jac_ok}/{pairs} pairs satisfy symmetry and bounds"
        ),
    )
}

// ---------------------------------------------------------------- sampling

fn pool_sizes() -> Vec<usize> {
    let mut sizes: Vec<usize> = (200..=2_000).collect();
    let mut s = 2_000.0f64;
    while s < 200_000.0 {
        s *= 1.013;
        sizes.push(s.round() as usize);
    }
    sizes.extend([9_999, 10_000, 10_001, 173_266, 199_999, 200_000]);
    sizes.sort_unstable();
    sizes.dedup();
    sizes.retain(|&n| n <= 200_000);
    sizes
}

fn sampling_arithmetic() -> Outcome {
    let sizes = pool_sizes();
    let triage_expected: Vec<usize> = (1..=20).chain((21..=195).step_by(6)).collect();
    let mut bad = Vec::new();
    for &n in &sizes {
        let pilot = pilot_plan("q", n).ranks();
        let bound = (0.9 * n as f64).round() as usize;
        let pilot_ok = pilot.len() == 50
            && pilot[..5] == [1, 2, 3, 4, 5]
            && pilot.windows(2).all(|w| w[0] < w[1])
            && *pilot.last().unwrap() <= bound
            && pilot[5] > 5;
        let triage = triage_plan("q", n).map(|p| p.ranks()).unwrap_or_default();
        let exhaustive = exhaustive_plan("q", n).ranks();
        let exhaustive_ok = exhaustive.len() == 200 && exhaustive.iter().copied().eq(1..=200);
        if !(pilot_ok && triage == triage_expected && exhaustive_ok) {
            bad.push(n);
        }
    }
    verdict(
        bad.is_empty() && triage_expected.len() == 50,
        format!(
            "{} pool sizes in 200..=200000: pilot 50 = top-5 + 45 intervals within 0.9N, triage 1..20 + 21,27,..,195 (50), exhaustive capped at 200; {} violations{}",
            sizes.len(),
            bad.len(),
            bad.first().map_or_else(String::new, |n| format!(" (first at N={n})"))
        ),
    )
}

// ---------------------------------------------------------------- demo corpus

fn anti_lexical_demo() -> Outcome {
    let start = Instant::now();
    let demo = make_demo_corpus(42, DemoConfig::default()).unwrap();
    let truth = &demo.truth;
    let chunks = chunk_corpus(&demo.documents, 100).unwrap();
    let embedder = HashEmbedder::new(256).unwrap();
    let index = FlatIndex::build(embed_chunks(&chunks, &embedder).unwrap())
        .unwrap()
        .with_chunks(&chunks);
    let spans = ChunkSpans::from_chunks(&chunks);
    let targets: Vec<DocumentRecord> = demo
        .documents
        .iter()
        .filter(|d| d.work_id != truth.source_work)
        .cloned()
        .collect();
    let allowed: HashSet<String> = targets.iter().map(|d| d.doc_id.clone()).collect();
    let query_ids: Vec<String> = truth
        .quotes
        .iter()
        .map(|q| format!("pq{}", q.index))
        .collect();
    let query_vectors = embed_texts(
        query_ids
            .iter()
            .zip(&truth.quotes)
            .map(|(id, q)| (id.as_str(), q.text.as_str())),
        &embedder,
    )
    .unwrap();

    let (mut verbatim, mut verbatim_in_intersection) = (0, 0);
    let (mut para, mut para_unique, mut para_top50) = (0, 0, 0);
    let (mut intersection, mut unique_lexical) = (0usize, 0usize);
    for q in &truth.quotes {
        let qid = format!("pq{}", q.index);
        let hits = index
            .search(&qid, query_vectors.get(&qid).unwrap(), index.len())
            .unwrap();
        let hits = dedupe_by_work(&filter_subcorpus(&hits, &allowed));
        let lexical = detect_reuse(&qid, &q.text, &targets, &AlignParams::default()).unwrap();
        let partition = anti_lexical_partition(&hits, &lexical, &spans).unwrap();
        intersection += partition.intersection.len();
        unique_lexical += partition.unique_lexical.len();
        let inter_docs: HashSet<&str> = partition
            .intersection
            .iter()
            .map(|h| h.doc_id.as_str())
            .collect();
        let unique_docs: HashSet<&str> = partition
            .unique_semantic
            .iter()
            .map(|h| h.doc_id.as_str())
            .collect();
        let position: HashMap<&str, usize> = hits
            .iter()
            .enumerate()
            .map(|(i, h)| (h.doc_id.as_str(), i + 1))
            .collect();
        for d in truth.docs_of(PlantKind::Verbatim, q.index) {
            verbatim += 1;
            verbatim_in_intersection += inter_docs.contains(d.doc_id.as_str()) as usize;
        }
        for d in truth.docs_of(PlantKind::Paraphrase, q.index) {
            para += 1;
            para_unique += unique_docs.contains(d.doc_id.as_str()) as usize;
            para_top50 += position.get(d.doc_id.as_str()).is_some_and(|&r| r <= 50) as usize;
        }
    }
    let recall = recall_from_counts(intersection as f64, unique_lexical as f64);
    let elapsed = start.elapsed();
    let top50_share = para_top50 as f64 / para.max(1) as f64;
    verdict(
        verbatim > 0
            && para > 0
            && verbatim_in_intersection == verbatim
            && recall == Some(1.0)
            && para_unique == para
            && top50_share >= 0.9
            && elapsed < Duration::from_secs(60),
        format!(
            "verbatim in intersection {verbatim_in_intersection}/{verbatim}; lexical recall {}; paraphrases in unique_semantic {para_unique}/{para}; paraphrases in semantic top-50 {para_top50}/{para} ({:.1}%, need 90%); {:.2}s (limit 60s)",
            recall.map_or_else(|| "undefined".into(), |r| format!("{r:.3}")),
            100.0 * top50_share,
            elapsed.as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------- aligner

const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz";

fn random_words(rng: &mut ChaCha8Rng, len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(len + 10);
    while out.len() < len {
        if !out.is_empty() {
            out.push(b' ');
        }
        for _ in 0..rng.gen_range(2..9) {
            out.push(ALPHABET[rng.gen_range(0..ALPHABET.len())]);
        }
    }
    out.truncate(len);
    out
}

/// Smith-Waterman local alignment with linear gaps, returning the identity
/// (matches / alignment columns) of the best-scoring alignment.
fn smith_waterman_identity(a: &[u8], b: &[u8], p: &AlignParams) -> f64 {
    let (n, m) = (a.len(), b.len());
    let mut h = vec![vec![0i32; m + 1]; n + 1];
    let mut best = (0, 0, 0);
    for i in 1..=n {
        for j in 1..=m {
            let s = if a[i - 1] == b[j - 1] {
                p.match_score
            } else {
                p.mismatch_score
            };
            let v = 0
                .max(h[i - 1][j - 1] + s)
                .max(h[i - 1][j] + p.gap_score)
                .max(h[i][j - 1] + p.gap_score);
            h[i][j] = v;
            if v > best.0 {
                best = (v, i, j);
            }
        }
    }
    let (_, mut i, mut j) = best;
    let (mut matches, mut columns) = (0, 0);
    while i > 0 && j > 0 && h[i][j] > 0 {
        let s = if a[i - 1] == b[j - 1] {
            p.match_score
        } else {
            p.mismatch_score
        };
        columns += 1;
        if h[i][j] == h[i - 1][j - 1] + s {
            matches += (a[i - 1] == b[j - 1]) as usize;
            i -= 1;
            j -= 1;
        } else if h[i][j] == h[i - 1][j] + p.gap_score {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    if columns == 0 {
        0.0
    } else {
        matches as f64 / columns as f64
    }
}

fn aligner_ocr_robustness() -> Outcome {
    let trials = 200;
    let params = AlignParams::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0c2);
    let (mut recovered, mut oracle_ok) = (0, 0);
    for _ in 0..trials {
        let quote = random_words(&mut rng, 200);
        let mut corrupted = quote.clone();
        let mut positions: Vec<usize> = (0..quote.len()).collect();
        positions.shuffle(&mut rng);
        for &pos in &positions[..20] {
            let orig = corrupted[pos];
            let mut c = orig;
            while c == orig {
                c = if rng.gen_bool(0.15) {
                    b' '
                } else {
                    ALPHABET[rng.gen_range(0..ALPHABET.len())]
                };
            }
            corrupted[pos] = c;
        }
        let (before_len, after_len) = (rng.gen_range(200..600), rng.gen_range(200..600));
        let before = random_words(&mut rng, before_len);
        let after = random_words(&mut rng, after_len);
        let offset = before.len() + 1;
        let host = [
            before,
            b" ".to_vec(),
            corrupted.clone(),
            b" ".to_vec(),
            after,
        ]
        .concat();
        let planted = offset..offset + corrupted.len();

        let hits = PreparedQuery::new(std::str::from_utf8(&quote).unwrap(), params)
            .align(std::str::from_utf8(&host).unwrap());
        let best = hits.iter().max_by_key(|h| h.score);
        if let Some(h) = best {
            let overlap = h
                .target_span
                .end
                .min(planted.end)
                .saturating_sub(h.target_span.start.max(planted.start));
            if overlap as f64 >= 0.8 * corrupted.len() as f64 && h.identity >= 0.85 {
                recovered += 1;
            }
        }
        if smith_waterman_identity(&quote, &corrupted, &params) >= 0.85 {
            oracle_ok += 1;
        }
    }
    let share = recovered as f64 / trials as f64;
    verdict(
        share >= 0.95,
        format!(
            "{recovered}/{trials} planted 200-char quotes at 10% substitution recovered with identity >= 0.85 ({:.1}%, need 95%); DP oracle on the planted region reaches 0.85 in {oracle_ok}/{trials}",
            100.0 * share
        ),
    )
}

// ---------------------------------------------------------------- released data

const RELEASED_ENV: &str = "RECEPTION_RELEASED_DATA";

fn released_dataset() -> Outcome {
    let formula = recall_from_counts(103.9, 4.9).unwrap();
    let formula_ok = (formula - 0.955).abs() < 5e-4;
    let formula_note = format!("lexical recall formula 103.9/(103.9+4.9) = {formula:.4}");
    if !formula_ok {
        return Outcome::Fail(formula_note);
    }
    let Some(path) = std::env::var_os(RELEASED_ENV).map(PathBuf::from) else {
        let reach = probe_host("github.com:443");
        return Outcome::Skip(format!(
            "{formula_note} (ok); released annotations not available ({reach}); set {RELEASED_ENV} to an exported annotations JSONL to run the reproduction"
        ));
    };
    match evaluate_released(&path) {
        Ok((ok, detail)) => verdict(ok, format!("{formula_note} (ok); {detail}")),
        Err(e) => Outcome::Fail(format!(
            "{formula_note} (ok); could not evaluate {}: {e}",
            path.display()
        )),
    }
}

fn probe_host(addr: &str) -> String {
    use std::net::{TcpStream, ToSocketAddrs};
    match addr.to_socket_addrs() {
        Err(e) => format!("{addr} does not resolve: {e}"),
        Ok(mut addrs) => match addrs.next() {
            None => format!("{addr} has no addresses"),
            Some(a) => match TcpStream::connect_timeout(&a, Duration::from_secs(3)) {
                Ok(_) => format!("{addr} reachable but no local copy"),
                Err(e) => format!("{addr} unreachable: {e}"),
            },
        },
    }
}

fn evaluate_released(path: &Path) -> Result<(bool, String), String> {
    let records: Vec<ExportRecord> =
        reception_core::jsonl::read_path(path).map_err(|e| e.to_string())?;
    let ranked: Vec<RankedAnnotation> = records.iter().map(RankedAnnotation::from).collect();
    let table = category_table(&ranked, RhoMode::Pooled);
    let rho = |l: Label| {
        table
            .iter()
            .find(|r| r.label == l)
            .and_then(|r| r.rho.zip(r.p_value))
    };
    let targets = [
        (Label::Paraphrase, -0.224),
        (Label::MeaningMatch, -0.294),
        (Label::NoMatch, 0.307),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (l, want) in targets {
        match rho(l) {
            Some((r, p)) => {
                ok &= (r - want).abs() <= 0.02 && p < 0.001;
                parts.push(format!(
                    "{} rho {r:+.3} (want {want:+.3}) p {p:.1e}",
                    l.as_str()
                ));
            }
            None => {
                ok = false;
                parts.push(format!("{} rho undefined", l.as_str()));
            }
        }
    }
    let assignments = assign_quadrants(
        &quadrant_inputs(&records, &StopwordDetector::default()),
        QuadrantOptions::default(),
    )
    .map_err(|e| e.to_string())?;
    let lexicon = Lexicon::builtin();
    let vocab: Vocabulary = lexicon.words().collect();
    let features = compute_features(&records, &RuleAnnotator::new(lexicon.clone()), &vocab);
    let summary = quadrant_summary(&assignments, &features);
    let sizes: Vec<usize> = summary.iter().map(|s| s.n).collect();
    ok &= sizes == [40, 121, 197, 10];
    let sim = |q: Quadrant| {
        summary
            .iter()
            .find(|s| s.quadrant == q)
            .and_then(|s| s.vocab_sim)
            .map(|m| m.mean)
    };
    let ordered = matches!(
        (sim(Quadrant::TopP), sim(Quadrant::TopN), sim(Quadrant::TailN)),
        (Some(a), Some(b), Some(c)) if a > b && b > c
    );
    ok &= ordered;
    parts.push(format!(
        "quadrant sizes {sizes:?} (want [40, 121, 197, 10])"
    ));
    parts.push(format!("vocab_sim TopP > TopN > TailN: {ordered}"));
    Ok((ok, parts.join("; ")))
}

// ---------------------------------------------------------------- determinism

fn snapshot(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn pipeline_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = RunConfig {
        out_dir: out.clone(),
        seed: 42,
        ..RunConfig::default()
    };
    run_pipeline(&cfg).unwrap();
    let first = snapshot(&out);
    std::fs::remove_dir_all(&out).unwrap();
    run_pipeline(&cfg).unwrap();
    let second = snapshot(&out);
    let names = |s: &[(PathBuf, Vec<u8>)]| s.iter().map(|(p, _)| p.clone()).collect::<Vec<_>>();
    let differing: Vec<String> = first
        .iter()
        .zip(&second)
        .filter(|(a, b)| a != b)
        .map(|(a, _)| a.0.display().to_string())
        .collect();
    let bytes: usize = first.iter().map(|(_, b)| b.len()).sum();
    verdict(
        names(&first) == names(&second) && differing.is_empty() && !first.is_empty(),
        format!(
            "{} artifact files ({bytes} bytes) from two seeded runs; {} differ{}",
            first.len(),
            differing.len(),
            if differing.is_empty() {
                String::new()
            } else {
                format!(": {}", differing.join(", "))
            }
        ),
    )
}
