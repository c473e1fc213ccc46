use crate::error::{Error, Result};

/// Per-operation work coefficients of the worker load model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    /// Checking one (object, query) pair.
    pub c1: f64,
    /// Handling one object.
    pub c2: f64,
    /// Handling one query insertion.
    pub c3: f64,
    /// Handling one query deletion.
    pub c4: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        CostModel { c1: 1.0, c2: 1.0, c3: 1.0, c4: 1.0 }
    }
}

impl CostModel {
    pub fn new(c1: f64, c2: f64, c3: f64, c4: f64) -> Result<Self> {
        let c = CostModel { c1, c2, c3, c4 };
        let all = [c1, c2, c3, c4];
        if all.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::invalid("cost coefficients must be finite and non-negative"));
        }
        if all.iter().all(|v| *v == 0.0) {
            return Err(Error::invalid("cost coefficients cannot all be zero"));
        }
        Ok(c)
    }
}

/// Request counts seen by one worker over an accounting window.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WorkerLoadSample {
    pub n_objects: f64,
    pub n_inserts: f64,
    pub n_deletes: f64,
}

impl WorkerLoadSample {
    pub fn new(n_objects: u64, n_inserts: u64, n_deletes: u64) -> Self {
        WorkerLoadSample {
            n_objects: n_objects as f64,
            n_inserts: n_inserts as f64,
            n_deletes: n_deletes as f64,
        }
    }
}

/// `c1*|O|*|Qi| + c2*|O| + c3*|Qi| + c4*|Qd|`
pub fn worker_load(s: &WorkerLoadSample, c: &CostModel) -> f64 {
    c.c1 * s.n_objects * s.n_inserts + c.c2 * s.n_objects + c.c3 * s.n_inserts + c.c4 * s.n_deletes
}
