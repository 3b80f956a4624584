//! Lexical reuse baseline: alignment, clustering and query construction.

pub mod align;
pub mod cluster;
pub mod quotes;

pub use align::{detect_reuse, AlignParams, AlignmentMatch, PreparedQuery, Span};
pub use cluster::{cluster_reuses, Occurrence, ReuseCluster};
pub use quotes::{
    extract_query_quotes, select_query_set, QueryQuote, QuerySelection, QuoteConstraints,
};
