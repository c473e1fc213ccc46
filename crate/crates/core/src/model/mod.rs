//! Shared domain types.

pub mod cost;
pub mod geo;
pub mod query;
pub mod terms;
pub mod trace;

pub use cost::{worker_load, CostModel, WorkerLoadSample};
pub use geo::{Axis, CellRange, CellSpan, GeoPoint, Rect, SpaceFrame, MAX_LEVEL};
pub use query::{index_terms, matches, BooleanExpr, MatchResult, ObjectId, QueryId, SpatioTextualObject, StsQuery};
pub use terms::{TermDict, TermId, TermSet, TermStats};
pub use trace::StreamElement;

/// Zero-based worker index.
pub type WorkerId = usize;
