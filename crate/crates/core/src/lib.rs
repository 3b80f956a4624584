//! Semantic reception search toolkit: chunked corpus retrieval, a lexical
//! reuse baseline, staged expert annotation and ranking diagnostics.

pub mod annotate;
pub mod corpus;
pub mod demo;
pub mod diagnostics;
pub mod embed;
pub mod error;
pub mod index;
pub mod jsonl;
pub mod pipeline;
pub mod report;
pub mod reuse;
pub mod run;
pub mod sampling;
pub mod stats;

pub use error::{Error, Result};
