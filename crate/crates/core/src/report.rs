//! CSV and plain-text renderings of statistics and diagnostics tables.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::annotate::Label;
use crate::diagnostics::{FeatureSummary, LanguageTable, MeanStd, QuadrantAssignment};
use crate::stats::{CategoryRow, FacetRow, RankedAnnotation, WorkLevelComparison, YieldPoint};
use crate::{Error, Result};

fn opt(v: Option<f64>, digits: usize) -> String {
    v.map_or_else(String::new, |x| format!("{x:.digits$}"))
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner()
        .map_err(|e| Error::io("<csv>", e.into_error()))?
        .flush()
        .map_err(|e| Error::io("<csv>", e))
}

pub fn write_category_csv<W: Write>(rows: &[CategoryRow], w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "label",
        "overall_pct",
        "top5_pct",
        "top20pct_pct",
        "top50pct_pct",
        "rho",
        "p_value",
    ])?;
    for r in rows {
        out.write_record([
            r.label.as_str().to_owned(),
            opt(r.overall_pct, 2),
            opt(r.top5_pct, 2),
            opt(r.top20pct_pct, 2),
            opt(r.top50pct_pct, 2),
            opt(r.rho, 4),
            r.p_value.map_or_else(String::new, |p| format!("{p:.3e}")),
        ])?;
    }
    finish(out)
}

pub fn render_category_table(rows: &[CategoryRow]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10}",
        "Category", "Overall", "Top-5", "Top-20%", "Top-50%", "rho", "p"
    );
    let pct = |v: Option<f64>| v.map_or_else(|| "-".to_owned(), |x| format!("{x:.1}%"));
    for r in rows {
        let _ = writeln!(
            s,
            "{:<16} {:>8} {:>8} {:>8} {:>8} {:>8} {:>10}",
            r.label.display_name(),
            pct(r.overall_pct),
            pct(r.top5_pct),
            pct(r.top20pct_pct),
            pct(r.top50pct_pct),
            r.rho.map_or_else(|| "-".to_owned(), |x| format!("{x:+.3}")),
            r.p_value
                .map_or_else(|| "-".to_owned(), |p| format!("{p:.2e}")),
        );
    }
    s
}

pub fn write_yield_csv<W: Write>(
    query_id: &str,
    points: &[YieldPoint],
    out: &mut csv::Writer<W>,
) -> Result<()> {
    for p in points {
        out.write_record([
            query_id.to_owned(),
            p.rank.to_string(),
            format!("{:.6}", p.cumulative_significant_fraction),
        ])?;
    }
    Ok(())
}

pub fn yield_csv_writer<W: Write>(w: W) -> Result<csv::Writer<W>> {
    let mut out = csv_writer(w);
    out.write_record(["query_id", "rank", "cumulative_significant_fraction"])?;
    Ok(out)
}

pub fn finish_csv<W: Write>(w: csv::Writer<W>) -> Result<()> {
    finish(w)
}

pub fn write_facet_csv<W: Write>(facet: &str, rows: &[FacetRow], w: W) -> Result<()> {
    let mut out = csv_writer(w);
    let mut header = vec![facet.to_owned()];
    header.extend(Label::ALL.iter().map(|l| l.as_str().to_owned()));
    header.push("total".into());
    out.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.value.clone()];
        rec.extend(
            Label::ALL
                .iter()
                .map(|l| r.counts.get(l).copied().unwrap_or(0).to_string()),
        );
        rec.push(r.total.to_string());
        out.write_record(&rec)?;
    }
    finish(out)
}

/// Scores of annotated hits by category, one row per annotation.
pub fn write_score_by_category_csv<W: Write>(records: &[RankedAnnotation], w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["query_id", "rank", "score", "label"])?;
    for r in records {
        out.write_record([
            r.query_id.clone(),
            r.original_rank.to_string(),
            format!("{:.6}", r.score),
            r.label.as_str().to_owned(),
        ])?;
    }
    finish(out)
}

pub fn write_work_level_csv<W: Write>(c: &WorkLevelComparison, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["significant_semantic_works", "lexical_works"])?;
    out.write_record([
        c.significant_semantic_works.to_string(),
        c.lexical_works.to_string(),
    ])?;
    finish(out)
}

pub fn write_quadrants_csv<W: Write>(assignments: &[QuadrantAssignment], w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record(["candidate_id", "quadrant"])?;
    for a in assignments {
        out.write_record([a.candidate_id.as_str(), a.quadrant.as_str()])?;
    }
    finish(out)
}

pub fn write_summary_csv<W: Write>(rows: &[FeatureSummary], w: W) -> Result<()> {
    let mut out = csv_writer(w);
    out.write_record([
        "quadrant",
        "n",
        "vocab_sim_mean",
        "vocab_sim_std",
        "quote_oov_mean",
        "quote_oov_std",
        "hit_oov_mean",
        "hit_oov_std",
        "pos_div_mean",
        "pos_div_std",
    ])?;
    let ms = |m: Option<MeanStd>| [opt(m.map(|x| x.mean), 4), opt(m.map(|x| x.std), 4)];
    for r in rows {
        let mut rec = vec![r.quadrant.as_str().to_owned(), r.n.to_string()];
        for m in [r.vocab_sim, r.quote_oov, r.hit_oov, r.pos_div] {
            rec.extend(ms(m));
        }
        out.write_record(&rec)?;
    }
    finish(out)
}

pub fn render_summary_table(rows: &[FeatureSummary]) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<8} {:>5} {:>17} {:>17} {:>17} {:>17}",
        "Subset", "N", "Vocab Sim.", "Quote OOV (%)", "Hit OOV (%)", "POS Div."
    );
    let ms = |m: Option<MeanStd>, d: usize| {
        m.map_or_else(
            || "-".to_owned(),
            |x| format!("{:.d$} ± {:.d$}", x.mean, x.std),
        )
    };
    for r in rows {
        let _ = writeln!(
            s,
            "{:<8} {:>5} {:>17} {:>17} {:>17} {:>17}",
            r.quadrant.as_str(),
            r.n,
            ms(r.vocab_sim, 3),
            ms(r.quote_oov, 1),
            ms(r.hit_oov, 1),
            ms(r.pos_div, 3)
        );
    }
    s
}

pub fn write_language_csv<W: Write>(table: &LanguageTable, w: W) -> Result<()> {
    let mut out = csv_writer(w);
    let mut header = vec!["category".to_owned(), "n".to_owned()];
    header.extend(table.languages.iter().map(|l| format!("{l}_pct")));
    header.extend(table.languages.iter().map(|l| format!("{l}_enrichment")));
    out.write_record(&header)?;
    for row in table.rows.iter().chain([&table.baseline]) {
        let mut rec = vec![row.category.clone(), row.n.to_string()];
        rec.extend(
            table
                .languages
                .iter()
                .map(|l| format!("{:.2}", row.shares[l])),
        );
        rec.extend(
            table
                .languages
                .iter()
                .map(|l| opt(row.enrichment.get(l).copied(), 3)),
        );
        out.write_record(&rec)?;
    }
    finish(out)
}

/// Writes `contents` to `path` through a callback, creating parent
/// directories first.
pub fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}
