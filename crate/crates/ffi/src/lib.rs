//! C interface to the spatext engine.
//!
//! Every function returns an [`SpxStatus`]; on failure the message is kept
//! per thread and read back with [`spx_last_error`]. Engines are opaque and
//! must be released with [`spx_engine_free`].

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use spatext::adjust::MigrationAlgo;
use spatext::model::{BooleanExpr, GeoPoint, MatchResult, Rect, SpatioTextualObject, StreamElement, StsQuery, TermId, TermSet};
use spatext::partition::PartitionStrategy;
use spatext::runtime::{Cluster, RunConfig};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    UnknownQuery = 3,
    DuplicateQuery = 4,
    Finished = 5,
    NotFinished = 6,
    BufferTooSmall = 7,
    Internal = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpxStrategy {
    Hybrid = 0,
    SpaceGrid = 1,
    SpaceKdtree = 2,
    TextFrequency = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpxMigration {
    Off = 0,
    Dp = 1,
    Gr = 2,
    Si = 3,
    Ra = 4,
}

/// Engine settings. Fill with [`spx_config_default`] and adjust.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct SpxConfig {
    pub workers: u32,
    pub dispatchers: u32,
    pub strategy: SpxStrategy,
    pub migration: SpxMigration,
    /// Balance threshold, above 1.
    pub sigma: f64,
    /// Elements held back to build the initial partitioning.
    pub warmup: u64,
    /// Elements per accounting window.
    pub window: u64,
    pub seed: u64,
}

/// One (query, object) match.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct SpxMatch {
    pub query_id: u64,
    pub object_id: u64,
}

/// Opaque engine handle.
pub struct SpxEngine {
    cfg: RunConfig,
    pending: Vec<StreamElement>,
    cluster: Option<Cluster>,
    queries: HashMap<u64, StsQuery>,
    results: Option<Vec<SpxMatch>>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn fail(status: SpxStatus, msg: impl Into<String>) -> SpxStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> SpxStatus) -> SpxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(SpxStatus::Panic, msg)
        }
    }
}

/// Message of the last failed call on this thread, or NULL. Valid until the next failing call.
#[no_mangle]
pub extern "C" fn spx_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn spx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must point to writable memory for one `SpxConfig`.
#[no_mangle]
pub unsafe extern "C" fn spx_config_default(out: *mut SpxConfig) -> SpxStatus {
    if out.is_null() {
        return fail(SpxStatus::NullPointer, "config pointer is null");
    }
    let d = RunConfig::new(1);
    out.write(SpxConfig {
        workers: 1,
        dispatchers: d.d as u32,
        strategy: SpxStrategy::Hybrid,
        migration: SpxMigration::Gr,
        sigma: d.params.sigma,
        warmup: d.warmup as u64,
        window: d.window as u64,
        seed: d.seed,
    });
    SpxStatus::Ok
}

fn run_config(c: &SpxConfig) -> Result<RunConfig, String> {
    if c.workers == 0 || c.dispatchers == 0 || c.window == 0 {
        return Err("workers, dispatchers and window must be positive".into());
    }
    let mut cfg = RunConfig::new(c.workers as usize);
    cfg.d = c.dispatchers as usize;
    cfg.strategy = match c.strategy {
        SpxStrategy::Hybrid => PartitionStrategy::Hybrid,
        SpxStrategy::SpaceGrid => PartitionStrategy::SpaceGrid,
        SpxStrategy::SpaceKdtree => PartitionStrategy::SpaceKdtree,
        SpxStrategy::TextFrequency => PartitionStrategy::TextFrequency,
    };
    cfg.migration = match c.migration {
        SpxMigration::Off => MigrationAlgo::Off,
        SpxMigration::Dp => MigrationAlgo::Dp,
        SpxMigration::Gr => MigrationAlgo::Gr,
        SpxMigration::Si => MigrationAlgo::Si,
        SpxMigration::Ra => MigrationAlgo::Ra,
    };
    cfg.params.sigma = c.sigma;
    cfg.warmup = c.warmup as usize;
    cfg.window = c.window as usize;
    cfg.seed = c.seed;
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

/// Creates an engine. On success `*out` owns a new handle.
///
/// # Safety
/// `config` must be NULL or point to a valid `SpxConfig`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spx_engine_new(config: *const SpxConfig, out: *mut *mut SpxEngine) -> SpxStatus {
    guard(|| {
        if out.is_null() {
            return fail(SpxStatus::NullPointer, "output pointer is null");
        }
        let c = if config.is_null() {
            let mut c = std::mem::MaybeUninit::uninit();
            spx_config_default(c.as_mut_ptr());
            c.assume_init()
        } else {
            *config
        };
        match run_config(&c) {
            Ok(cfg) => {
                let e = SpxEngine { cfg, pending: Vec::new(), cluster: None, queries: HashMap::new(), results: None };
                out.write(Box::into_raw(Box::new(e)));
                SpxStatus::Ok
            }
            Err(m) => fail(SpxStatus::InvalidArgument, m),
        }
    })
}

/// Releases an engine. NULL is ignored.
///
/// # Safety
/// `engine` must be NULL or a handle from `spx_engine_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn spx_engine_free(engine: *mut SpxEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

unsafe fn engine_mut<'a>(engine: *mut SpxEngine) -> Result<&'a mut SpxEngine, SpxStatus> {
    engine.as_mut().ok_or_else(|| fail(SpxStatus::NullPointer, "engine is null"))
}

unsafe fn terms_of(terms: *const u32, n: usize) -> Result<Vec<TermId>, SpxStatus> {
    if n == 0 {
        return Ok(Vec::new());
    }
    if terms.is_null() {
        return Err(fail(SpxStatus::NullPointer, "term array is null"));
    }
    Ok(slice::from_raw_parts(terms, n).iter().map(|&t| TermId(t)).collect())
}

impl SpxEngine {
    fn push(&mut self, e: StreamElement) -> SpxStatus {
        if self.results.is_some() {
            return fail(SpxStatus::Finished, "engine already finished");
        }
        if let Some(c) = &mut self.cluster {
            return match c.push(&e) {
                Ok(()) => SpxStatus::Ok,
                Err(err) => fail(SpxStatus::Internal, err.to_string()),
            };
        }
        self.pending.push(e);
        if self.pending.len() >= self.cfg.warmup {
            return self.start();
        }
        SpxStatus::Ok
    }

    /// Builds the cluster on the held-back prefix and replays it.
    fn start(&mut self) -> SpxStatus {
        let pending = std::mem::take(&mut self.pending);
        let mut c = match Cluster::new(self.cfg.clone(), &pending) {
            Ok(c) => c,
            Err(err) => return fail(SpxStatus::Internal, err.to_string()),
        };
        for e in &pending {
            if let Err(err) = c.push(e) {
                return fail(SpxStatus::Internal, err.to_string());
            }
        }
        self.cluster = Some(c);
        SpxStatus::Ok
    }
}

/// Feeds one object with `n_terms` term ids.
///
/// # Safety
/// `engine` must be a live handle; `terms` must hold `n_terms` values.
#[no_mangle]
pub unsafe extern "C" fn spx_engine_push_object(engine: *mut SpxEngine, id: u64, x: f64, y: f64, terms: *const u32, n_terms: usize) -> SpxStatus {
    guard(|| {
        let e = match engine_mut(engine) {
            Ok(e) => e,
            Err(s) => return s,
        };
        let ts = match terms_of(terms, n_terms) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match SpatioTextualObject::new(id, GeoPoint::new(x, y), TermSet::new(ts)) {
            Ok(o) => e.push(StreamElement::Object(o)),
            Err(err) => fail(SpxStatus::InvalidArgument, err.to_string()),
        }
    })
}

/// Subscribes a query. The expression is a conjunction of `n_clauses`
/// disjunctions; clause `i` holds `clause_lens[i]` consecutive ids of `terms`.
///
/// # Safety
/// `engine` must be a live handle; `clause_lens` must hold `n_clauses` values
/// and `terms` their sum.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn spx_engine_insert_query(
    engine: *mut SpxEngine,
    id: u64,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    clause_lens: *const u32,
    n_clauses: usize,
    terms: *const u32,
) -> SpxStatus {
    guard(|| {
        let e = match engine_mut(engine) {
            Ok(e) => e,
            Err(s) => return s,
        };
        if e.queries.contains_key(&id) {
            return fail(SpxStatus::DuplicateQuery, format!("query {id} is already live"));
        }
        if n_clauses == 0 || clause_lens.is_null() {
            return fail(SpxStatus::InvalidArgument, "a query needs at least one clause");
        }
        let lens = slice::from_raw_parts(clause_lens, n_clauses);
        let total: usize = lens.iter().map(|&n| n as usize).sum();
        let all = match terms_of(terms, total) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let mut clauses = Vec::with_capacity(n_clauses);
        let mut at = 0;
        for &n in lens {
            clauses.push(TermSet::new(all[at..at + n as usize].to_vec()));
            at += n as usize;
        }
        let q = BooleanExpr::new(clauses).and_then(|expr| StsQuery::new(id, expr, Rect::new(x0, y0, x1, y1)));
        match q {
            Ok(q) => {
                e.queries.insert(id, q.clone());
                e.push(StreamElement::Insert(q))
            }
            Err(err) => fail(SpxStatus::InvalidArgument, err.to_string()),
        }
    })
}

/// Unsubscribes a live query.
///
/// # Safety
/// `engine` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spx_engine_delete_query(engine: *mut SpxEngine, id: u64) -> SpxStatus {
    guard(|| {
        let e = match engine_mut(engine) {
            Ok(e) => e,
            Err(s) => return s,
        };
        if e.results.is_some() {
            return fail(SpxStatus::Finished, "engine already finished");
        }
        match e.queries.remove(&id) {
            Some(q) => e.push(StreamElement::Delete(q)),
            None => fail(SpxStatus::UnknownQuery, format!("query {id} is not live")),
        }
    })
}

/// Drains the engine and collects the deduplicated matches. Later pushes fail.
///
/// # Safety
/// `engine` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn spx_engine_finish(engine: *mut SpxEngine) -> SpxStatus {
    guard(|| {
        let e = match engine_mut(engine) {
            Ok(e) => e,
            Err(s) => return s,
        };
        if e.results.is_some() {
            return fail(SpxStatus::Finished, "engine already finished");
        }
        if e.cluster.is_none() {
            if e.pending.is_empty() {
                e.results = Some(Vec::new());
                return SpxStatus::Ok;
            }
            let s = e.start();
            if s != SpxStatus::Ok {
                return s;
            }
        }
        match e.cluster.take().expect("started").finish() {
            Ok(out) => {
                let mut v: Vec<SpxMatch> = out.matches.iter().map(to_match).collect();
                v.sort_unstable();
                e.results = Some(v);
                SpxStatus::Ok
            }
            Err(err) => fail(SpxStatus::Internal, err.to_string()),
        }
    })
}

fn to_match(m: &MatchResult) -> SpxMatch {
    SpxMatch { query_id: m.query_id.0, object_id: m.object_id.0 }
}

/// Number of matches of a finished engine.
///
/// # Safety
/// `engine` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spx_engine_match_count(engine: *const SpxEngine, out: *mut usize) -> SpxStatus {
    guard(|| {
        let (Some(e), false) = (engine.as_ref(), out.is_null()) else {
            return fail(SpxStatus::NullPointer, "engine or output is null");
        };
        match &e.results {
            Some(r) => {
                out.write(r.len());
                SpxStatus::Ok
            }
            None => fail(SpxStatus::NotFinished, "call spx_engine_finish first"),
        }
    })
}

/// Copies the matches, sorted by query then object id, into `buf`.
/// `*written` receives the number copied; if `cap` is too small nothing is copied.
///
/// # Safety
/// `engine` must be a live handle; `buf` must hold `cap` entries; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spx_engine_matches(engine: *const SpxEngine, buf: *mut SpxMatch, cap: usize, written: *mut usize) -> SpxStatus {
    guard(|| {
        let (Some(e), false) = (engine.as_ref(), written.is_null()) else {
            return fail(SpxStatus::NullPointer, "engine or output is null");
        };
        let Some(r) = &e.results else {
            return fail(SpxStatus::NotFinished, "call spx_engine_finish first");
        };
        written.write(0);
        if r.len() > cap {
            return fail(SpxStatus::BufferTooSmall, format!("{} matches, room for {cap}", r.len()));
        }
        if !r.is_empty() {
            if buf.is_null() {
                return fail(SpxStatus::NullPointer, "buffer is null");
            }
            ptr::copy_nonoverlapping(r.as_ptr(), buf, r.len());
        }
        written.write(r.len());
        SpxStatus::Ok
    })
}

/// Whether `id` is currently subscribed.
///
/// # Safety
/// `engine` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn spx_engine_is_live(engine: *const SpxEngine, id: u64, out: *mut bool) -> SpxStatus {
    let (Some(e), false) = (engine.as_ref(), out.is_null()) else {
        return fail(SpxStatus::NullPointer, "engine or output is null");
    };
    out.write(e.queries.contains_key(&id));
    SpxStatus::Ok
}
