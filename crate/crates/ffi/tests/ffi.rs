use std::ffi::CStr;
use std::path::Path;
use std::process::Command;
use std::ptr;

use spatext::model::StreamElement;
use spatext::runtime::brute_force_matches;
use spatext::workload::Scenario;
use spatext_ffi::*;

struct Engine(*mut SpxEngine);

impl Engine {
    fn new(cfg: &SpxConfig) -> Engine {
        let mut e = ptr::null_mut();
        assert_eq!(unsafe { spx_engine_new(cfg, &mut e) }, SpxStatus::Ok);
        Engine(e)
    }

    fn feed(&self, el: &StreamElement) -> SpxStatus {
        unsafe {
            match el {
                StreamElement::Object(o) => {
                    let ts: Vec<u32> = o.terms.iter().map(|t| t.0).collect();
                    spx_engine_push_object(self.0, o.id.0, o.loc.x, o.loc.y, ts.as_ptr(), ts.len())
                }
                StreamElement::Insert(q) => {
                    let lens: Vec<u32> = q.expr.clauses().iter().map(|c| c.len() as u32).collect();
                    let ts: Vec<u32> = q.expr.clauses().iter().flat_map(|c| c.iter().map(|t| t.0)).collect();
                    let r = q.region;
                    spx_engine_insert_query(self.0, q.id.0, r.min.x, r.min.y, r.max.x, r.max.y, lens.as_ptr(), lens.len(), ts.as_ptr())
                }
                StreamElement::Delete(q) => spx_engine_delete_query(self.0, q.id.0),
            }
        }
    }

    fn matches(&self) -> Vec<SpxMatch> {
        let mut n = 0;
        assert_eq!(unsafe { spx_engine_match_count(self.0, &mut n) }, SpxStatus::Ok);
        let mut buf = vec![SpxMatch { query_id: 0, object_id: 0 }; n];
        let mut written = 0;
        assert_eq!(unsafe { spx_engine_matches(self.0, buf.as_mut_ptr(), n, &mut written) }, SpxStatus::Ok);
        assert_eq!(written, n);
        buf
    }
}

impl Drop for Engine {
    fn drop(&mut self) {
        unsafe { spx_engine_free(self.0) }
    }
}

fn last_error() -> String {
    let p = spx_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn config(m: u32, migration: SpxMigration) -> SpxConfig {
    let mut c = unsafe { std::mem::zeroed() };
    assert_eq!(unsafe { spx_config_default(&mut c) }, SpxStatus::Ok);
    c.workers = m;
    c.migration = migration;
    c.warmup = 1500;
    c.window = 800;
    c
}

fn expected(trace: &[StreamElement]) -> Vec<SpxMatch> {
    let mut v: Vec<SpxMatch> =
        brute_force_matches(trace).iter().map(|m| SpxMatch { query_id: m.query_id.0, object_id: m.object_id.0 }).collect();
    v.sort_unstable();
    v.dedup();
    v
}

#[test]
fn engine_agrees_with_brute_force() {
    let (_, trace) = Scenario::new(6000, 800, "q3", 4).generate().unwrap();
    let want = expected(&trace);
    assert!(!want.is_empty());
    for (m, algo) in [(1, SpxMigration::Off), (4, SpxMigration::Gr), (6, SpxMigration::Dp)] {
        let e = Engine::new(&config(m, algo));
        for el in &trace {
            assert_eq!(e.feed(el), SpxStatus::Ok, "{}", last_error());
        }
        assert_eq!(unsafe { spx_engine_finish(e.0) }, SpxStatus::Ok);
        assert_eq!(e.matches(), want, "m={m}");
    }
}

#[test]
fn short_streams_finish_without_reaching_warmup() {
    let (_, trace) = Scenario::new(300, 40, "q1", 9).generate().unwrap();
    let e = Engine::new(&config(3, SpxMigration::Gr));
    for el in &trace {
        assert_eq!(e.feed(el), SpxStatus::Ok);
    }
    assert_eq!(unsafe { spx_engine_finish(e.0) }, SpxStatus::Ok);
    assert_eq!(e.matches(), expected(&trace));
}

#[test]
fn misuse_is_reported() {
    unsafe {
        let mut c = config(2, SpxMigration::Gr);
        c.workers = 0;
        let mut e = ptr::null_mut();
        assert_eq!(spx_engine_new(&c, &mut e), SpxStatus::InvalidArgument);
        assert!(e.is_null());
        assert_eq!(spx_engine_new(ptr::null(), ptr::null_mut()), SpxStatus::NullPointer);
        assert_eq!(spx_engine_finish(ptr::null_mut()), SpxStatus::NullPointer);

        let e = Engine::new(&config(2, SpxMigration::Gr));
        assert_eq!(spx_engine_delete_query(e.0, 7), SpxStatus::UnknownQuery);
        assert!(last_error().contains('7'));
        assert_eq!(spx_engine_push_object(e.0, 1, 0.0, 0.0, ptr::null(), 0), SpxStatus::InvalidArgument);
        let lens = [1u32];
        let terms = [3u32];
        let q = |id| spx_engine_insert_query(e.0, id, 0.0, 0.0, 1.0, 1.0, lens.as_ptr(), 1, terms.as_ptr());
        assert_eq!(q(7), SpxStatus::Ok);
        assert_eq!(q(7), SpxStatus::DuplicateQuery);
        let mut live = false;
        assert_eq!(spx_engine_is_live(e.0, 7, &mut live), SpxStatus::Ok);
        assert!(live);
        assert_eq!(spx_engine_push_object(e.0, 1, 0.5, 0.5, terms.as_ptr(), 1), SpxStatus::Ok);

        let mut n = 0;
        assert_eq!(spx_engine_match_count(e.0, &mut n), SpxStatus::NotFinished);
        assert_eq!(spx_engine_finish(e.0), SpxStatus::Ok);
        assert_eq!(spx_engine_finish(e.0), SpxStatus::Finished);
        assert_eq!(q(8), SpxStatus::Finished);
        let mut written = 9;
        assert_eq!(spx_engine_matches(e.0, ptr::null_mut(), 0, &mut written), SpxStatus::BufferTooSmall);
        assert_eq!(written, 0);
        assert_eq!(e.matches(), vec![SpxMatch { query_id: 7, object_id: 1 }]);
        spx_engine_free(ptr::null_mut());
    }
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/spatext.h");
    let src = std::env::temp_dir().join(format!("spatext_ffi_{}.c", std::process::id()));
    std::fs::write(
        &src,
        format!(
            "#include \"{}\"\nint main(void) {{ SpxConfig c; SpxEngine *e = 0; spx_config_default(&c); \
             return spx_engine_new(&c, &e) == SPX_STATUS_OK ? 0 : 1; }}\n",
            header.display()
        ),
    )
    .unwrap();
    for (cc, extra) in [("cc", &[][..]), ("c++", &["-x", "c++"][..])] {
        let Ok(out) = Command::new(cc).args(extra).arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg(&src).output() else {
            eprintln!("{cc} not available, skipping");
            continue;
        };
        assert!(out.status.success(), "{cc}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let _ = std::fs::remove_file(src);
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(spx_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}
