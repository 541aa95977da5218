//! C interface to the nodule-extract pipeline.
//!
//! Every function returns an [`NeStatus`]; results come back through out
//! pointers. Strings handed out by the library are NUL-terminated UTF-8 and
//! must be released with [`ne_string_free`]. After a failure,
//! [`ne_last_error_message`] describes it (per thread).

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use nodule_extract::corpus::{parse_json_lines, Loaded};
use nodule_extract::eval::{report_json, score_ner, score_relations, EvalOptions, MatchMode};
use nodule_extract::linker::LinkerModel;
use nodule_extract::pipeline::{MentionSource, Pipeline};
use nodule_extract::schema::{validate_document, AnnotatedDocument};
use nodule_extract::tagger::{Lexicon, TaggerModel};
use nodule_extract::tirads::PointTable;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    /// A file could not be read or a model/table file is malformed.
    Load = 3,
    /// Input JSON is malformed or a document fails validation.
    InvalidInput = 4,
    /// Gold and predicted documents disagree (text, duplicate or missing ids).
    Eval = 5,
    /// A Rust panic was caught at the boundary.
    Internal = 6,
}

/// Opaque pipeline handle: a tagger, a linker and an optional TI-RADS table.
pub struct NePipeline(Pipeline);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(NeStatus, String);

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> NeStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NeStatus::Ok,
        Ok(Err(Fail(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal error".into());
            NeStatus::Internal
        }
    }
}

unsafe fn string<'a>(p: *const c_char, name: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(NeStatus::NullArgument, format!("{name} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(NeStatus::InvalidUtf8, format!("{name} is not UTF-8")))
}

unsafe fn optional<'a>(p: *const c_char, name: &str) -> Result<Option<&'a str>, Fail> {
    if p.is_null() {
        Ok(None)
    } else {
        string(p, name).map(Some)
    }
}

fn give(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| Fail(NeStatus::Internal, "output contains NUL".into()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn check_out<T>(out: *mut T) -> Result<(), Fail> {
    if out.is_null() {
        Err(Fail(NeStatus::NullArgument, "out is null".into()))
    } else {
        Ok(())
    }
}

fn load_err<E: std::fmt::Display>(e: E) -> Fail {
    Fail(NeStatus::Load, e.to_string())
}

fn input_err<E: std::fmt::Display>(e: E) -> Fail {
    Fail(NeStatus::InvalidInput, e.to_string())
}

fn build(
    tagger: MentionSource,
    linker_path: Option<&str>,
    table: Option<&str>,
    out: *mut *mut NePipeline,
) -> Result<(), Fail> {
    let mut p = Pipeline::new(tagger);
    if let Some(l) = linker_path {
        p.linker = LinkerModel::load(Path::new(l)).map_err(|e| Fail(NeStatus::Load, format!("{l}: {e}")))?;
    }
    p.table = match table {
        None => None,
        Some("builtin") => Some(PointTable::acr_default()),
        Some(t) => Some(PointTable::load(Path::new(t)).map_err(load_err)?),
    };
    unsafe { *out = Box::into_raw(Box::new(NePipeline(p))) };
    Ok(())
}

/// Loads a pipeline from a tagger model file. `linker_path` may be null
/// (nearest-anchor linking); `tirads_table` may be null (no scoring), the
/// string `builtin`, or a table file path.
///
/// # Safety
/// String arguments must be null or valid NUL-terminated strings; `out`
/// must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_pipeline_load(
    tagger_path: *const c_char,
    linker_path: *const c_char,
    tirads_table: *const c_char,
    out: *mut *mut NePipeline,
) -> NeStatus {
    guard(|| {
        check_out(out)?;
        let t = string(tagger_path, "tagger_path")?;
        let tagger = TaggerModel::load(Path::new(t)).map_err(|e| Fail(NeStatus::Load, format!("{t}: {e}")))?;
        build(MentionSource::Model(Box::new(tagger)), optional(linker_path, "linker_path")?, optional(tirads_table, "tirads_table")?, out)
    })
}

/// A pipeline that tags with a lexicon instead of a model. A null
/// `lexicon_path` selects the built-in lexicon.
///
/// # Safety
/// As for [`ne_pipeline_load`].
#[no_mangle]
pub unsafe extern "C" fn ne_pipeline_load_lexicon(
    lexicon_path: *const c_char,
    linker_path: *const c_char,
    tirads_table: *const c_char,
    out: *mut *mut NePipeline,
) -> NeStatus {
    guard(|| {
        check_out(out)?;
        let lex = match optional(lexicon_path, "lexicon_path")? {
            Some(p) => Lexicon::load(Path::new(p)).map_err(load_err)?,
            None => Lexicon::builtin(),
        };
        build(MentionSource::Lexicon(lex), optional(linker_path, "linker_path")?, optional(tirads_table, "tirads_table")?, out)
    })
}

/// # Safety
/// `pipeline` must be null or a handle from `ne_pipeline_load*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ne_pipeline_free(pipeline: *mut NePipeline) {
    if !pipeline.is_null() {
        drop(Box::from_raw(pipeline));
    }
}

fn parse_document(json: &str) -> Result<AnnotatedDocument, Fail> {
    let doc: AnnotatedDocument = serde_json::from_str(json).map_err(input_err)?;
    if let Some(v) = validate_document(&doc).first() {
        return Err(Fail(NeStatus::InvalidInput, format!("document {}: {v}", doc.id)));
    }
    Ok(doc)
}

/// Runs the pipeline on one JSON document object and returns the extraction
/// as a JSON object.
///
/// # Safety
/// `pipeline` must be a live handle; `document_json` a valid string; `out`
/// a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_extract_json(
    pipeline: *const NePipeline,
    document_json: *const c_char,
    out: *mut *mut c_char,
) -> NeStatus {
    guard(|| {
        check_out(out)?;
        let p = pipeline.as_ref().ok_or_else(|| Fail(NeStatus::NullArgument, "pipeline is null".into()))?;
        let doc = parse_document(string(document_json, "document_json")?)?;
        let x = p.0.extract(&doc);
        give(out, serde_json::to_string(&x).map_err(|e| Fail(NeStatus::Internal, e.to_string()))?)
    })
}

/// Runs the pipeline on raw report text.
///
/// # Safety
/// As for [`ne_extract_json`].
#[no_mangle]
pub unsafe extern "C" fn ne_extract_text(
    pipeline: *const NePipeline,
    id: *const c_char,
    text: *const c_char,
    out: *mut *mut c_char,
) -> NeStatus {
    guard(|| {
        check_out(out)?;
        let p = pipeline.as_ref().ok_or_else(|| Fail(NeStatus::NullArgument, "pipeline is null".into()))?;
        let doc = AnnotatedDocument::new(string(id, "id")?, string(text, "text")?);
        let x = p.0.extract(&doc);
        give(out, serde_json::to_string(&x).map_err(|e| Fail(NeStatus::Internal, e.to_string()))?)
    })
}

fn corpus(text: &str, name: &str) -> Result<Vec<AnnotatedDocument>, Fail> {
    let Loaded { documents, invalid, .. } = parse_json_lines(text).map_err(input_err)?;
    if let Some(bad) = invalid.first() {
        let v = bad.violations.first().map(|v| v.to_string()).unwrap_or_default();
        return Err(Fail(NeStatus::InvalidInput, format!("{name}: document {}: {v}", bad.id)));
    }
    Ok(documents)
}

/// Scores predicted against gold JSON-lines corpora. `endpoint_mode` is 0
/// for strict and 1 for lenient relation endpoints; relations are scored
/// when `relations` is non-zero. Returns the JSON report.
///
/// # Safety
/// String arguments must be valid; `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ne_eval_json(
    gold_jsonl: *const c_char,
    pred_jsonl: *const c_char,
    relations: i32,
    endpoint_mode: i32,
    strict_ids: i32,
    out: *mut *mut c_char,
) -> NeStatus {
    guard(|| {
        check_out(out)?;
        let gold = corpus(string(gold_jsonl, "gold_jsonl")?, "gold")?;
        let pred = corpus(string(pred_jsonl, "pred_jsonl")?, "pred")?;
        let options = EvalOptions { strict_ids: strict_ids != 0 };
        let mode = match endpoint_mode {
            0 => MatchMode::Strict,
            1 => MatchMode::Lenient,
            n => return Err(Fail(NeStatus::InvalidInput, format!("endpoint_mode must be 0 or 1, got {n}"))),
        };
        let eval = |e: nodule_extract::eval::EvalError| Fail(NeStatus::Eval, e.to_string());
        let report = score_ner(&gold, &pred, options).map_err(eval)?;
        let rel = if relations != 0 { Some(score_relations(&gold, &pred, mode, options).map_err(eval)?) } else { None };
        give(out, report_json(&report, rel.as_ref()).to_string())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ne_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// The message for the last failure on this thread, or null. Valid until the
/// next call into the library on the same thread; do not free.
#[no_mangle]
pub extern "C" fn ne_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn ne_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(s: &str) -> CString {
        CString::new(s).unwrap()
    }

    unsafe fn take(p: *mut c_char) -> String {
        let s = CStr::from_ptr(p).to_str().unwrap().to_string();
        ne_string_free(p);
        s
    }

    fn last_error() -> String {
        let p = ne_last_error_message();
        assert!(!p.is_null());
        unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
    }

    #[test]
    fn version() {
        let v = unsafe { CStr::from_ptr(ne_version()) };
        assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn lexicon_pipeline_extracts_and_scores() {
        unsafe {
            let mut p = ptr::null_mut();
            let table = c("builtin");
            assert_eq!(ne_pipeline_load_lexicon(ptr::null(), ptr::null(), table.as_ptr(), &mut p), NeStatus::Ok);
            let mut out = ptr::null_mut();
            let text = c("There is a solid hypoechoic nodule in the right lobe, measuring 1.2 cm. TI-RADS 4 (TR4).");
            let id = c("r1");
            assert_eq!(ne_extract_text(p, id.as_ptr(), text.as_ptr(), &mut out), NeStatus::Ok);
            let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
            assert_eq!(v["id"], "r1");
            assert_eq!(v["profiles"].as_array().unwrap().len(), 1);
            assert_eq!(v["tirads"][0]["level"], "TR4");

            let doc = c(r#"{"id":"d","text":"Spongiform nodule."}"#);
            assert_eq!(ne_extract_json(p, doc.as_ptr(), &mut out), NeStatus::Ok);
            let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
            assert_eq!(v["mentions"][0]["category"], "COMPOSITION");
            ne_pipeline_free(p);
        }
    }

    #[test]
    fn errors_are_reported() {
        unsafe {
            let mut p = ptr::null_mut();
            let missing = c("/definitely/not/here.model");
            assert_eq!(ne_pipeline_load(missing.as_ptr(), ptr::null(), ptr::null(), &mut p), NeStatus::Load);
            assert!(p.is_null());
            assert!(last_error().contains("here.model"));

            assert_eq!(ne_pipeline_load(ptr::null(), ptr::null(), ptr::null(), &mut p), NeStatus::NullArgument);

            assert_eq!(ne_pipeline_load_lexicon(ptr::null(), ptr::null(), ptr::null(), &mut p), NeStatus::Ok);
            let mut out = ptr::null_mut();
            let bad = c("{not json");
            assert_eq!(ne_extract_json(p, bad.as_ptr(), &mut out), NeStatus::InvalidInput);
            let bad_span = c(r#"{"id":"d","text":"abc","mentions":[{"id":"T1","category":"SHAPE","start":0,"end":9,"text":"abc"}]}"#);
            assert_eq!(ne_extract_json(p, bad_span.as_ptr(), &mut out), NeStatus::InvalidInput);
            ne_pipeline_free(p);

            let ok = c("x");
            assert_eq!(ne_extract_text(ptr::null(), ok.as_ptr(), ok.as_ptr(), &mut out), NeStatus::NullArgument);
            assert!(!ne_last_error_message().is_null());
            ne_pipeline_free(ptr::null_mut());
            ne_string_free(ptr::null_mut());
        }
    }

    #[test]
    fn eval_round_trip() {
        let gold = c(concat!(
            r#"{"id":"a","text":"solid nodule","mentions":[{"id":"T1","category":"COMPOSITION","start":0,"end":5,"text":"solid"},"#,
            r#"{"id":"T2","category":"THYROID_NODULE","start":6,"end":12,"text":"nodule"}],"#,
            r#""relations":[{"type":"ATTRIBUTE_OF","head":"T1","tail":"T2"}]}"#,
            "\n"
        ));
        unsafe {
            let mut out = ptr::null_mut();
            assert_eq!(ne_eval_json(gold.as_ptr(), gold.as_ptr(), 1, 0, 1, &mut out), NeStatus::Ok);
            let v: serde_json::Value = serde_json::from_str(&take(out)).unwrap();
            assert_eq!(v["strict"]["overall"]["f1"], 1.0);
            assert_eq!(v["relations"]["f1"], 1.0);

            let other = c(r#"{"id":"a","text":"other text","mentions":[]}"#);
            assert_eq!(ne_eval_json(gold.as_ptr(), other.as_ptr(), 0, 0, 0, &mut out), NeStatus::Eval);
            assert_eq!(ne_eval_json(gold.as_ptr(), gold.as_ptr(), 1, 7, 0, &mut out), NeStatus::InvalidInput);
        }
    }
}
