//! Append-only annotation store with lease-based assignment.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};

use super::candidate::Candidate;
use super::label::{is_significant, Label};
use crate::error::{Error, Result};
use crate::jsonl;
use crate::sampling::{decide_deepening, DeepeningDecision};

pub const DEFAULT_LEASE_MINUTES: i64 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Annotation {
    pub candidate_id: String,
    pub label: Label,
    pub annotator_id: String,
    pub created_at: DateTime<Utc>,
    pub duration_seconds: f64,
}

/// A current annotation joined with its candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRecord {
    #[serde(flatten)]
    pub candidate: Candidate,
    pub label: Label,
    pub annotator_id: String,
    pub created_at: DateTime<Utc>,
    pub duration_seconds: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
#[allow(clippy::large_enum_variant)]
enum JournalEvent {
    Enqueue { candidate: Candidate },
    Label { annotation: Annotation },
}

#[derive(Debug, Clone)]
struct Lease {
    annotator_id: String,
    expires_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Progress {
    pub query_id: String,
    pub total: usize,
    pub annotated: usize,
    pub counts: BTreeMap<Label, usize>,
    pub significant: usize,
    pub decision: DeepeningDecision,
}

#[derive(Debug)]
pub struct AnnotationStore {
    candidates: BTreeMap<String, Candidate>,
    history: Vec<Annotation>,
    current: HashMap<String, usize>,
    leases: HashMap<String, Lease>,
    lease_duration: Duration,
    journal: Option<(PathBuf, BufWriter<File>)>,
}

impl Default for AnnotationStore {
    fn default() -> Self {
        Self::in_memory()
    }
}

impl AnnotationStore {
    pub fn in_memory() -> Self {
        Self {
            candidates: BTreeMap::new(),
            history: Vec::new(),
            current: HashMap::new(),
            leases: HashMap::new(),
            lease_duration: Duration::minutes(DEFAULT_LEASE_MINUTES),
            journal: None,
        }
    }

    /// Opens (or creates) a journal-backed store, replaying existing events.
    pub fn open(path: &Path) -> Result<Self> {
        let mut store = Self::in_memory();
        if path.exists() {
            let events: Vec<JournalEvent> = jsonl::read_path(path)?;
            for e in events {
                store.apply(e)?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        store.journal = Some((path.to_owned(), BufWriter::new(file)));
        Ok(store)
    }

    pub fn with_lease_duration(mut self, d: Duration) -> Self {
        self.lease_duration = d;
        self
    }

    fn apply(&mut self, event: JournalEvent) -> Result<()> {
        match event {
            JournalEvent::Enqueue { candidate } => {
                self.candidates
                    .entry(candidate.candidate_id.clone())
                    .or_insert(candidate);
            }
            JournalEvent::Label { annotation } => {
                if !self.candidates.contains_key(&annotation.candidate_id) {
                    return Err(Error::UnknownCandidate(annotation.candidate_id));
                }
                self.current
                    .insert(annotation.candidate_id.clone(), self.history.len());
                self.history.push(annotation);
            }
        }
        Ok(())
    }

    fn record(&mut self, event: &JournalEvent) -> Result<()> {
        if let Some((path, w)) = self.journal.as_mut() {
            serde_json::to_writer(&mut *w, event)?;
            w.write_all(b"\n")
                .map_err(|e| Error::io(path.as_path(), e))?;
            w.flush().map_err(|e| Error::io(path.as_path(), e))?;
        }
        Ok(())
    }

    /// Adds candidates; ids already present are ignored. Returns how many
    /// were new.
    pub fn enqueue(&mut self, candidates: Vec<Candidate>) -> Result<usize> {
        let mut added = 0;
        for c in candidates {
            if self.candidates.contains_key(&c.candidate_id) {
                continue;
            }
            let event = JournalEvent::Enqueue { candidate: c };
            self.record(&event)?;
            self.apply(event)?;
            added += 1;
        }
        Ok(added)
    }

    pub fn candidate(&self, id: &str) -> Option<&Candidate> {
        self.candidates.get(id)
    }

    pub fn candidates(&self) -> impl Iterator<Item = &Candidate> {
        self.candidates.values()
    }

    pub fn history(&self) -> &[Annotation] {
        &self.history
    }

    pub fn current_annotation(&self, candidate_id: &str) -> Option<&Annotation> {
        self.current.get(candidate_id).map(|&i| &self.history[i])
    }

    fn lease_active(&self, candidate_id: &str, now: DateTime<Utc>) -> Option<&Lease> {
        self.leases.get(candidate_id).filter(|l| l.expires_at > now)
    }

    /// Leases the lowest-ranked unannotated candidate nobody else holds.
    /// An annotator polling again gets back the candidate they already hold.
    pub fn next_candidate(&mut self, annotator_id: &str, now: DateTime<Utc>) -> Option<Candidate> {
        self.next_candidate_for(annotator_id, None, now)
    }

    pub fn next_candidate_for(
        &mut self,
        annotator_id: &str,
        query_id: Option<&str>,
        now: DateTime<Utc>,
    ) -> Option<Candidate> {
        self.leases.retain(|_, l| l.expires_at > now);
        let open = |c: &&Candidate| {
            !self.current.contains_key(&c.candidate_id)
                && query_id.is_none_or(|q| c.query_id == q)
        };
        let held = self
            .candidates
            .values()
            .filter(open)
            .filter(|c| {
                self.leases
                    .get(&c.candidate_id)
                    .is_some_and(|l| l.annotator_id == annotator_id)
            })
            .min_by(|a, b| (a.rank, &a.query_id).cmp(&(b.rank, &b.query_id)));
        let chosen = held
            .or_else(|| {
                self.candidates
                    .values()
                    .filter(open)
                    .filter(|c| !self.leases.contains_key(&c.candidate_id))
                    .min_by(|a, b| (a.rank, &a.query_id).cmp(&(b.rank, &b.query_id)))
            })?
            .clone();
        self.leases.insert(
            chosen.candidate_id.clone(),
            Lease {
                annotator_id: annotator_id.to_owned(),
                expires_at: now + self.lease_duration,
            },
        );
        Some(chosen)
    }

    pub fn lease_holder(&self, candidate_id: &str, now: DateTime<Utc>) -> Option<&str> {
        self.lease_active(candidate_id, now)
            .map(|l| l.annotator_id.as_str())
    }

    /// Appends a label. Re-labelling supersedes the earlier annotation but
    /// keeps it in the history.
    pub fn submit_label(
        &mut self,
        candidate_id: &str,
        label: Label,
        annotator_id: &str,
        duration_seconds: f64,
        now: DateTime<Utc>,
    ) -> Result<Annotation> {
        if !self.candidates.contains_key(candidate_id) {
            return Err(Error::UnknownCandidate(candidate_id.to_owned()));
        }
        if !duration_seconds.is_finite() || duration_seconds < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "duration_seconds must be a non-negative number, got {duration_seconds}"
            )));
        }
        let annotation = Annotation {
            candidate_id: candidate_id.to_owned(),
            label,
            annotator_id: annotator_id.to_owned(),
            created_at: now,
            duration_seconds,
        };
        let event = JournalEvent::Label {
            annotation: annotation.clone(),
        };
        self.record(&event)?;
        self.apply(event)?;
        self.leases.remove(candidate_id);
        Ok(annotation)
    }

    /// Current annotations joined with candidates, ordered by (query, rank).
    pub fn export(&self, query_id: Option<&str>) -> Vec<ExportRecord> {
        let mut out: Vec<ExportRecord> = self
            .candidates
            .values()
            .filter(|c| query_id.is_none_or(|q| c.query_id == q))
            .filter_map(|c| {
                let a = self.current_annotation(&c.candidate_id)?;
                Some(ExportRecord {
                    candidate: c.clone(),
                    label: a.label,
                    annotator_id: a.annotator_id.clone(),
                    created_at: a.created_at,
                    duration_seconds: a.duration_seconds,
                })
            })
            .collect();
        out.sort_by(|a, b| {
            (&a.candidate.query_id, a.candidate.rank)
                .cmp(&(&b.candidate.query_id, b.candidate.rank))
        });
        out
    }

    /// Loads exported records, enqueueing their candidates and labels.
    pub fn import(&mut self, records: Vec<ExportRecord>) -> Result<()> {
        for r in records {
            let id = r.candidate.candidate_id.clone();
            self.enqueue(vec![r.candidate])?;
            let event = JournalEvent::Label {
                annotation: Annotation {
                    candidate_id: id,
                    label: r.label,
                    annotator_id: r.annotator_id,
                    created_at: r.created_at,
                    duration_seconds: r.duration_seconds,
                },
            };
            self.record(&event)?;
            self.apply(event)?;
        }
        Ok(())
    }

    pub fn query_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .candidates
            .values()
            .map(|c| c.query_id.clone())
            .collect();
        ids.sort();
        ids.dedup();
        ids
    }

    pub fn progress(&self, query_id: &str, threshold: f64) -> Progress {
        let mut counts: BTreeMap<Label, usize> = Label::ALL.iter().map(|&l| (l, 0)).collect();
        let mut total = 0;
        for c in self.candidates.values().filter(|c| c.query_id == query_id) {
            total += 1;
            if let Some(a) = self.current_annotation(&c.candidate_id) {
                *counts.entry(a.label).or_default() += 1;
            }
        }
        let annotated: usize = counts.values().sum();
        let significant = counts
            .iter()
            .filter(|(l, _)| is_significant(**l))
            .map(|(_, n)| n)
            .sum();
        let decision = decide_deepening(
            query_id,
            significant,
            annotated,
            counts[&Label::DontKnow],
            threshold,
        );
        Progress {
            query_id: query_id.to_owned(),
            total,
            annotated,
            counts,
            significant,
            decision,
        }
    }

    /// Median annotation time over current annotations.
    pub fn median_duration(&self) -> Option<f64> {
        let mut d: Vec<f64> = self
            .current
            .values()
            .map(|&i| self.history[i].duration_seconds)
            .collect();
        median(&mut d)
    }

    /// Rewrites the journal with one enqueue per candidate followed by the
    /// full label history.
    pub fn compact(&mut self) -> Result<()> {
        let Some((path, _)) = self.journal.take() else {
            return Ok(());
        };
        let tmp = path.with_extension("compact.tmp");
        let events: Vec<JournalEvent> = self
            .candidates
            .values()
            .cloned()
            .map(|candidate| JournalEvent::Enqueue { candidate })
            .chain(
                self.history
                    .iter()
                    .cloned()
                    .map(|annotation| JournalEvent::Label { annotation }),
            )
            .collect();
        jsonl::write_path(&tmp, &events)?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))?;
        let file = OpenOptions::new()
            .append(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        self.journal = Some((path, BufWriter::new(file)));
        Ok(())
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}
