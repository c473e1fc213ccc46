//! Publish/subscribe matching for spatio-textual streams.

pub mod adjust;
pub mod dispatch;
pub mod error;
pub mod model;
pub mod partition;
pub mod runtime;
pub mod worker;
pub mod workload;

pub use error::{Error, Result};
