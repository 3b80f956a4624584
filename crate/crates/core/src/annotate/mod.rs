//! Annotation taxonomy, candidate queue and the annotation HTTP API.

pub mod candidate;
pub mod label;
pub mod server;
pub mod store;

pub use candidate::{candidate_id, enqueue_candidates, Candidate, CandidateSource, ContextRef};
pub use label::{is_significant, Label};
pub use store::{Annotation, AnnotationStore, ExportRecord, Progress};
