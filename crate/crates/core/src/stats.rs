//! Ranking-validity statistics over exported annotations.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::annotate::{is_significant, ExportRecord, Label};
use crate::pipeline::HitPartition;

/// Average (fractional) ranks, 1-based, ties sharing the mean of their
/// positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // positions i+1 ..= j share their mean
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.is_empty() {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Two-sided p-value of a correlation coefficient from the t approximation
/// with `n - 2` degrees of freedom.
pub fn correlation_p_value(rho: f64, n: usize) -> f64 {
    if n < 3 {
        return f64::NAN;
    }
    let df = (n - 2) as f64;
    let denom = 1.0 - rho * rho;
    if denom <= 0.0 {
        return 0.0;
    }
    let t = rho * (df / denom).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Spearman correlation of two series. `None` for fewer than three points,
/// unequal lengths, or a constant series.
pub fn spearman(x: &[f64], y: &[f64]) -> Option<Correlation> {
    if x.len() != y.len() || x.len() < 3 {
        return None;
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y))?;
    Some(Correlation {
        rho,
        p_value: correlation_p_value(rho, x.len()),
        n: x.len(),
    })
}

/// Spearman correlation between a binary indicator and ranks.
pub fn spearman_rho(indicator: &[bool], ranks: &[f64]) -> Option<Correlation> {
    let x: Vec<f64> = indicator.iter().map(|&b| f64::from(u8::from(b))).collect();
    spearman(&x, ranks)
}

/// One annotated hit as the statistics see it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAnnotation {
    pub query_id: String,
    pub label: Label,
    pub original_rank: usize,
    pub pool_size: usize,
    pub score: f32,
    pub work_id: String,
    pub chunk_id: String,
}

impl From<&ExportRecord> for RankedAnnotation {
    fn from(r: &ExportRecord) -> Self {
        Self {
            query_id: r.candidate.query_id.clone(),
            label: r.label,
            original_rank: r.candidate.rank,
            pool_size: r.candidate.pool_size,
            score: r.candidate.score,
            work_id: r.candidate.work_id.clone(),
            chunk_id: r.candidate.chunk_id.clone(),
        }
    }
}

/// Groups annotations by query, each group sorted by original rank. The
/// position within a group is the local rank (1-based).
pub fn group_by_query(records: &[RankedAnnotation]) -> BTreeMap<&str, Vec<&RankedAnnotation>> {
    let mut groups: BTreeMap<&str, Vec<&RankedAnnotation>> = BTreeMap::new();
    for r in records {
        groups.entry(r.query_id.as_str()).or_default().push(r);
    }
    for g in groups.values_mut() {
        g.sort_by_key(|r| r.original_rank);
    }
    groups
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMode {
    /// One correlation over all queries' (indicator, local rank) pairs.
    #[default]
    Pooled,
    /// Mean of per-query correlations; no p-value.
    Mean,
}

impl std::str::FromStr for RhoMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pooled" => Ok(RhoMode::Pooled),
            "mean" => Ok(RhoMode::Mean),
            other => Err(format!(
                "unknown rho mode {other:?} (expected pooled or mean)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRow {
    pub label: Label,
    pub overall_pct: Option<f64>,
    pub top5_pct: Option<f64>,
    pub top20pct_pct: Option<f64>,
    pub top50pct_pct: Option<f64>,
    pub rho: Option<f64>,
    pub p_value: Option<f64>,
}

#[derive(Clone, Copy)]
enum Cutoff {
    All,
    TopK(usize),
    TopFraction(f64),
}

impl Cutoff {
    fn admits(&self, r: &RankedAnnotation) -> bool {
        match *self {
            Cutoff::All => true,
            Cutoff::TopK(k) => r.original_rank <= k,
            Cutoff::TopFraction(f) => r.original_rank as f64 <= f * r.pool_size as f64,
        }
    }
}

/// Mean over queries of the percentage of `label` among annotations passing
/// `cutoff`. Queries with nothing inside the cutoff are skipped.
fn mean_share(
    groups: &BTreeMap<&str, Vec<&RankedAnnotation>>,
    label: Label,
    cutoff: Cutoff,
) -> Option<f64> {
    let shares: Vec<f64> = groups
        .values()
        .filter_map(|g| {
            let inside: Vec<_> = g.iter().filter(|r| cutoff.admits(r)).collect();
            if inside.is_empty() {
                return None;
            }
            let hits = inside.iter().filter(|r| r.label == label).count();
            Some(100.0 * hits as f64 / inside.len() as f64)
        })
        .collect();
    (!shares.is_empty()).then(|| shares.iter().sum::<f64>() / shares.len() as f64)
}

fn label_correlation(
    groups: &BTreeMap<&str, Vec<&RankedAnnotation>>,
    label: Label,
    mode: RhoMode,
) -> Option<Correlation> {
    match mode {
        RhoMode::Pooled => {
            let mut ind = Vec::new();
            let mut local = Vec::new();
            for g in groups.values() {
                for (i, r) in g.iter().enumerate() {
                    ind.push(r.label == label);
                    local.push((i + 1) as f64);
                }
            }
            spearman_rho(&ind, &local)
        }
        RhoMode::Mean => {
            let per_query: Vec<f64> = groups
                .values()
                .filter_map(|g| {
                    let ind: Vec<bool> = g.iter().map(|r| r.label == label).collect();
                    let local: Vec<f64> = (1..=g.len()).map(|i| i as f64).collect();
                    spearman_rho(&ind, &local).map(|c| c.rho)
                })
                .collect();
            (!per_query.is_empty()).then(|| Correlation {
                rho: per_query.iter().sum::<f64>() / per_query.len() as f64,
                p_value: f64::NAN,
                n: per_query.len(),
            })
        }
    }
}

/// Label distribution at rank cutoffs, averaged across queries, with the
/// Spearman correlation between each label's indicator and local rank.
pub fn category_table(records: &[RankedAnnotation], mode: RhoMode) -> Vec<CategoryRow> {
    let groups = group_by_query(records);
    Label::ALL
        .iter()
        .map(|&label| {
            let corr = label_correlation(&groups, label, mode);
            CategoryRow {
                label,
                overall_pct: mean_share(&groups, label, Cutoff::All),
                top5_pct: mean_share(&groups, label, Cutoff::TopK(5)),
                top20pct_pct: mean_share(&groups, label, Cutoff::TopFraction(0.2)),
                top50pct_pct: mean_share(&groups, label, Cutoff::TopFraction(0.5)),
                rho: corr.map(|c| c.rho),
                p_value: corr.map(|c| c.p_value).filter(|p| p.is_finite()),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct YieldPoint {
    pub rank: usize,
    pub cumulative_significant_fraction: f64,
}

/// Cumulative share of significant labels at each annotated rank. Don't
/// Know annotations count toward neither side; ranks before the first
/// decided annotation get no point.
pub fn yield_curve(entries: &[(usize, Label)]) -> Vec<YieldPoint> {
    let mut by_rank: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for &(rank, label) in entries {
        let e = by_rank.entry(rank).or_default();
        if label != Label::DontKnow {
            e.1 += 1;
            if is_significant(label) {
                e.0 += 1;
            }
        }
    }
    let (mut sig, mut decided) = (0, 0);
    let mut out = Vec::new();
    for (rank, (s, d)) in by_rank {
        sig += s;
        decided += d;
        if decided > 0 {
            out.push(YieldPoint {
                rank,
                cumulative_significant_fraction: sig as f64 / decided as f64,
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Facet {
    Author,
    Genre,
    Decade,
}

impl std::str::FromStr for Facet {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "author" => Ok(Facet::Author),
            "genre" => Ok(Facet::Genre),
            "decade" => Ok(Facet::Decade),
            other => Err(format!("unknown facet {other:?}")),
        }
    }
}

pub const UNKNOWN_FACET: &str = "unknown";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetInput {
    pub label: Label,
    pub author: String,
    pub genre: String,
    pub year: Option<i32>,
}

impl From<&ExportRecord> for FacetInput {
    fn from(r: &ExportRecord) -> Self {
        Self {
            label: r.label,
            author: r.candidate.author.clone(),
            genre: r.candidate.genre.clone(),
            year: r.candidate.year,
        }
    }
}

pub fn decade(year: i32) -> i32 {
    year.div_euclid(10) * 10
}

fn facet_value(input: &FacetInput, facet: Facet) -> String {
    let or_unknown = |s: &str| {
        if s.trim().is_empty() {
            UNKNOWN_FACET.to_owned()
        } else {
            s.to_owned()
        }
    };
    match facet {
        Facet::Author => or_unknown(&input.author),
        Facet::Genre => or_unknown(&input.genre),
        Facet::Decade => input
            .year
            .map_or_else(|| UNKNOWN_FACET.to_owned(), |y| decade(y).to_string()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacetRow {
    pub value: String,
    pub counts: BTreeMap<Label, usize>,
    pub total: usize,
}

/// Counts per facet value and label, largest totals first (ties by name),
/// optionally truncated to `top_n` rows.
pub fn facet_counts(inputs: &[FacetInput], facet: Facet, top_n: Option<usize>) -> Vec<FacetRow> {
    let mut table: BTreeMap<String, BTreeMap<Label, usize>> = BTreeMap::new();
    for i in inputs {
        *table
            .entry(facet_value(i, facet))
            .or_default()
            .entry(i.label)
            .or_default() += 1;
    }
    let mut rows: Vec<FacetRow> = table
        .into_iter()
        .map(|(value, counts)| FacetRow {
            total: counts.values().sum(),
            value,
            counts,
        })
        .collect();
    rows.sort_by(|a, b| b.total.cmp(&a.total).then_with(|| a.value.cmp(&b.value)));
    if let Some(n) = top_n {
        rows.truncate(n);
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorkLevelComparison {
    pub significant_semantic_works: usize,
    pub lexical_works: usize,
}

/// Distinct works (per query) holding significant semantic-only hits versus
/// distinct works in the lexical intersection.
pub fn work_level_comparison(
    partition: &HitPartition,
    annotations: &[RankedAnnotation],
) -> WorkLevelComparison {
    let semantic: HashSet<(&str, &str)> = partition
        .unique_semantic
        .iter()
        .map(|h| (h.query_id.as_str(), h.chunk_id.as_str()))
        .collect();
    let significant: BTreeSet<(&str, &str)> = annotations
        .iter()
        .filter(|a| is_significant(a.label))
        .filter(|a| semantic.contains(&(a.query_id.as_str(), a.chunk_id.as_str())))
        .map(|a| (a.query_id.as_str(), a.work_id.as_str()))
        .collect();
    let lexical: BTreeSet<(&str, &str)> = partition
        .intersection
        .iter()
        .map(|h| (h.query_id.as_str(), h.work_id.as_str()))
        .collect();
    WorkLevelComparison {
        significant_semantic_works: significant.len(),
        lexical_works: lexical.len(),
    }
}
