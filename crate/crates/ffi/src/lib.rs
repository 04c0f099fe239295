//! C ABI for the TRIZ knowledge base, the retrieval store and scripted runs.
//!
//! Every function returns a [`TrizStatus`]; on failure the message is kept
//! per thread and can be fetched with [`triz_last_error_message`]. Strings
//! handed out by this library must be released with [`triz_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use triz_agents::cli::{execute_run, CliError};
use triz_agents::config::RunConfig;
use triz_agents::llm::BackendKind;
use triz_agents::orchestrator::{AbortKind, RunStatus};
use triz_agents::tools::{RagConfig, RagError, RagStore};
use triz_agents::{KnowledgeBase, KnowledgeError};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrizStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    NotFound = 4,
    BufferTooSmall = 5,
    Io = 6,
    RunAbortedLimits = 7,
    RunAbortedBackend = 8,
    Panic = 9,
}

/// Opaque knowledge base handle.
pub struct TrizKb(KnowledgeBase);

/// Opaque retrieval store handle.
pub struct TrizRag(RagStore);

thread_local! {
    static LAST_ERROR: RefCell<Option<String>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg.into()));
}

fn fail(status: TrizStatus, msg: impl Into<String>) -> TrizStatus {
    set_error(msg);
    status
}

/// Runs `f`, clearing the last error first and turning panics into `Panic`.
fn guard(f: impl FnOnce() -> TrizStatus) -> TrizStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => s,
        Err(_) => fail(TrizStatus::Panic, "internal panic"),
    }
}

unsafe fn str_arg<'a>(p: *const c_char, name: &str) -> Result<&'a str, TrizStatus> {
    if p.is_null() {
        return Err(fail(TrizStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(TrizStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

fn to_c(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("no interior nul").into_raw()
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> TrizStatus {
    *out = to_c(s);
    TrizStatus::Ok
}

fn knowledge_status(e: &KnowledgeError) -> TrizStatus {
    match e {
        KnowledgeError::UnknownParameter(_) | KnowledgeError::UnknownPrinciple(_) => TrizStatus::NotFound,
        KnowledgeError::SameParameter(_) => TrizStatus::InvalidArgument,
        _ => TrizStatus::Io,
    }
}

fn rag_status(e: &RagError) -> TrizStatus {
    match e {
        RagError::Io { .. } => TrizStatus::Io,
        _ => TrizStatus::InvalidArgument,
    }
}

macro_rules! non_null {
    ($($p:ident),+) => {
        $(if $p.is_null() {
            return fail(TrizStatus::NullArgument, concat!(stringify!($p), " is null"));
        })+
    };
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn triz_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failure on this thread, or NULL. Free with
/// `triz_string_free`.
#[no_mangle]
pub extern "C" fn triz_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().clone().map(to_c).unwrap_or(ptr::null_mut()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn triz_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn triz_kb_load_bundled(out: *mut *mut TrizKb) -> TrizStatus {
    guard(|| {
        non_null!(out);
        *out = Box::into_raw(Box::new(TrizKb(KnowledgeBase::bundled())));
        TrizStatus::Ok
    })
}

/// Loads `parameters.tsv`, `principles.tsv` and `matrix.txt` from `dir`.
///
/// # Safety
/// `dir` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn triz_kb_load_dir(dir: *const c_char, out: *mut *mut TrizKb) -> TrizStatus {
    guard(|| {
        non_null!(out);
        let dir = match str_arg(dir, "dir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        match triz_agents::knowledge::load_knowledge_base(&PathBuf::from(dir)) {
            Ok(kb) => {
                *out = Box::into_raw(Box::new(TrizKb(kb)));
                TrizStatus::Ok
            }
            Err(e) => fail(TrizStatus::Io, e.to_string()),
        }
    })
}

/// # Safety
/// `kb` must be NULL or a handle from `triz_kb_load_*`, freed once.
#[no_mangle]
pub unsafe extern "C" fn triz_kb_free(kb: *mut TrizKb) {
    if !kb.is_null() {
        drop(Box::from_raw(kb));
    }
}

/// # Safety
/// `kb` must be a live handle; the out pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn triz_kb_counts(kb: *const TrizKb, parameters: *mut u32, principles: *mut u32) -> TrizStatus {
    guard(|| {
        non_null!(kb, parameters, principles);
        let kb = &(*kb).0;
        *parameters = kb.parameters().len() as u32;
        *principles = kb.principles().len() as u32;
        TrizStatus::Ok
    })
}

/// Writes the principle ids of a matrix cell into `ids` (capacity `cap`)
/// and the cell size into `len`. An empty cell is `Ok` with `len` 0. If
/// `cap` is too small nothing is written except `len`.
///
/// # Safety
/// `kb` must be a live handle, `ids` valid for `cap` elements (may be NULL
/// when `cap` is 0) and `len` valid.
#[no_mangle]
pub unsafe extern "C" fn triz_kb_lookup(
    kb: *const TrizKb,
    improving: u32,
    worsening: u32,
    ids: *mut u32,
    cap: usize,
    len: *mut usize,
) -> TrizStatus {
    guard(|| {
        non_null!(kb, len);
        let cell = match (*kb).0.lookup_matrix(improving, worsening) {
            Ok(c) => c,
            Err(e) => return fail(knowledge_status(&e), e.to_string()),
        };
        *len = cell.len();
        if cell.len() > cap {
            return fail(TrizStatus::BufferTooSmall, format!("cell holds {} principles", cell.len()));
        }
        if !cell.is_empty() {
            non_null!(ids);
            for (i, p) in cell.iter().enumerate() {
                *ids.add(i) = p.get();
            }
        }
        TrizStatus::Ok
    })
}

/// Resolves a parameter id or case-insensitive name.
///
/// # Safety
/// `kb` must be a live handle, `key` a NUL-terminated string, `id` valid.
#[no_mangle]
pub unsafe extern "C" fn triz_kb_resolve_parameter(kb: *const TrizKb, key: *const c_char, id: *mut u32) -> TrizStatus {
    guard(|| {
        non_null!(kb, id);
        let key = match str_arg(key, "key") {
            Ok(k) => k,
            Err(s) => return s,
        };
        match (*kb).0.resolve_parameter(key) {
            Ok(p) => {
                *id = p.get();
                TrizStatus::Ok
            }
            Err(e) => fail(knowledge_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `kb` must be a live handle and `out` valid. Free the result with
/// `triz_string_free`.
#[no_mangle]
pub unsafe extern "C" fn triz_kb_parameter_name(kb: *const TrizKb, id: u32, out: *mut *mut c_char) -> TrizStatus {
    guard(|| {
        non_null!(kb, out);
        match triz_agents::ParameterId::new(id) {
            Some(p) => put_string(out, (*kb).0.parameter(p).name.clone()),
            None => fail(TrizStatus::NotFound, format!("no parameter {id}")),
        }
    })
}

/// A principle as a JSON object (`id`, `name`, `description`,
/// `sub_principles`).
///
/// # Safety
/// `kb` must be a live handle and `out` valid. Free the result with
/// `triz_string_free`.
#[no_mangle]
pub unsafe extern "C" fn triz_kb_principle_json(kb: *const TrizKb, id: u32, out: *mut *mut c_char) -> TrizStatus {
    guard(|| {
        non_null!(kb, out);
        match (*kb).0.principle_details(&[id]) {
            Ok(p) => put_string(out, serde_json::to_string(p[0]).expect("principle serializes")),
            Err(e) => fail(knowledge_status(&e), e.to_string()),
        }
    })
}

/// An empty store. `chunk_size` and `overlap` of 0 pick the defaults.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn triz_rag_new(chunk_size: usize, overlap: usize, out: *mut *mut TrizRag) -> TrizStatus {
    guard(|| {
        non_null!(out);
        let cfg = if chunk_size == 0 && overlap == 0 {
            RagConfig::default()
        } else {
            RagConfig { chunk_size, overlap }
        };
        match RagStore::new(cfg) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(TrizRag(s)));
                TrizStatus::Ok
            }
            Err(e) => fail(rag_status(&e), e.to_string()),
        }
    })
}

/// A store holding the parameter and principle texts of `kb`.
///
/// # Safety
/// `kb` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn triz_rag_seeded(kb: *const TrizKb, out: *mut *mut TrizRag) -> TrizStatus {
    guard(|| {
        non_null!(kb, out);
        match RagStore::seeded(&(*kb).0, RagConfig::default()) {
            Ok(s) => {
                *out = Box::into_raw(Box::new(TrizRag(s)));
                TrizStatus::Ok
            }
            Err(e) => fail(rag_status(&e), e.to_string()),
        }
    })
}

/// # Safety
/// `rag` must be NULL or a handle from `triz_rag_*`, freed once.
#[no_mangle]
pub unsafe extern "C" fn triz_rag_free(rag: *mut TrizRag) {
    if !rag.is_null() {
        drop(Box::from_raw(rag));
    }
}

/// # Safety
/// `rag` must be a live handle, the strings NUL-terminated, `chunks` NULL
/// or valid.
#[no_mangle]
pub unsafe extern "C" fn triz_rag_ingest(
    rag: *mut TrizRag,
    doc_id: *const c_char,
    body: *const c_char,
    chunks: *mut usize,
) -> TrizStatus {
    guard(|| {
        non_null!(rag);
        let (doc_id, body) = match (str_arg(doc_id, "doc_id"), str_arg(body, "body")) {
            (Ok(d), Ok(b)) => (d, b),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        match (*rag).0.ingest(doc_id, body) {
            Ok(stats) => {
                if !chunks.is_null() {
                    *chunks = stats.chunks;
                }
                TrizStatus::Ok
            }
            Err(e) => fail(rag_status(&e), e.to_string()),
        }
    })
}

/// Ranked chunks as a JSON array of `{doc_id, chunk_index, text, score}`.
///
/// # Safety
/// `rag` must be a live handle, `query` NUL-terminated and `out` valid.
/// Free the result with `triz_string_free`.
#[no_mangle]
pub unsafe extern "C" fn triz_rag_query_json(
    rag: *const TrizRag,
    query: *const c_char,
    k: usize,
    out: *mut *mut c_char,
) -> TrizStatus {
    guard(|| {
        non_null!(rag, out);
        let query = match str_arg(query, "query") {
            Ok(q) => q,
            Err(s) => return s,
        };
        match (*rag).0.query(query, k) {
            Ok(a) => put_string(out, serde_json::to_string(&a.chunks).expect("chunks serialize")),
            Err(e) => fail(rag_status(&e), e.to_string()),
        }
    })
}

/// Runs the workflow with the scripted backend and writes the run report
/// JSON to `report_json`.
///
/// `search_fixture` may be NULL for an empty search fixture. With a NULL
/// `run_dir` the artifacts go to a temporary directory that is removed
/// afterwards. A run that aborts still fills `report_json` and returns
/// `RUN_ABORTED_LIMITS` or `RUN_ABORTED_BACKEND`.
///
/// # Safety
/// String arguments must be NUL-terminated (or NULL where allowed) and
/// `report_json` valid. Free the result with `triz_string_free`.
#[no_mangle]
pub unsafe extern "C" fn triz_run_scripted(
    problem: *const c_char,
    script_path: *const c_char,
    search_fixture: *const c_char,
    run_dir: *const c_char,
    report_json: *mut *mut c_char,
) -> TrizStatus {
    guard(|| {
        non_null!(report_json);
        let (problem, script) = match (str_arg(problem, "problem"), str_arg(script_path, "script_path")) {
            (Ok(p), Ok(s)) => (p, s),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let fixture = if search_fixture.is_null() {
            None
        } else {
            match str_arg(search_fixture, "search_fixture") {
                Ok(f) => Some(PathBuf::from(f)),
                Err(s) => return s,
            }
        };
        let temp;
        let dir = if run_dir.is_null() {
            temp = match tempfile::tempdir() {
                Ok(t) => t,
                Err(e) => return fail(TrizStatus::Io, e.to_string()),
            };
            temp.path().join("run")
        } else {
            match str_arg(run_dir, "run_dir") {
                Ok(d) => PathBuf::from(d),
                Err(s) => return s,
            }
        };
        let mut cfg = RunConfig::default();
        cfg.backend.kind = BackendKind::Scripted;
        cfg.backend.script = Some(PathBuf::from(script));
        cfg.search.fixture = fixture;
        let run_id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "run".into());
        if let Some(parent) = dir.parent() {
            cfg.output.dir = parent.to_path_buf();
        }
        match execute_run(&cfg, problem, &dir, &run_id) {
            Ok(state) => {
                put_string(report_json, state.report.to_json());
                match &state.report.status {
                    RunStatus::Aborted { kind: AbortKind::Limits, reason } => fail(TrizStatus::RunAbortedLimits, reason.clone()),
                    RunStatus::Aborted { kind: AbortKind::Backend, reason } => fail(TrizStatus::RunAbortedBackend, reason.clone()),
                    _ => TrizStatus::Ok,
                }
            }
            Err(e @ CliError::Input(_)) => fail(TrizStatus::InvalidArgument, e.to_string()),
            Err(e) => fail(TrizStatus::Io, e.to_string()),
        }
    })
}
