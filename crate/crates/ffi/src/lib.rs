//! C interface to milo-core.
//!
//! Every function returns a [`MiloStatus`]; on failure the message is
//! available from [`milo_last_error`] on the same thread until the next call.
//! Models are opaque `MiloModel` handles released with [`milo_model_free`];
//! strings returned through out-parameters are released with
//! [`milo_string_free`]. Passing NULL for a required pointer yields
//! `MILO_STATUS_INVALID_ARGUMENT`; no function panics across the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use milo::harness::CsvTable;
use milo::models::{Dataset, Model};
use milo::transport::{
    export_model, import_model, load_document, save_document, sign_document, signing_key_from_hex,
    validate_document, validate_node, verify_document, verifying_key_from_hex, ModelDocument,
    SignedEnvelope,
};
use milo::{Error, Node, Tensor};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MiloStatus {
    Ok = 0,
    InvalidArgument = 1,
    Io = 2,
    Parse = 3,
    Validation = 4,
    Model = 5,
    Signature = 6,
    Transport = 7,
    Panic = 99,
}

/// An imported or trained model.
pub struct MiloModel {
    model: Model,
    model_type: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> MiloStatus {
    match err {
        Error::IoFailure { .. } => MiloStatus::Io,
        Error::ParseFailure(_)
        | Error::MissingEnvelopeKey(_)
        | Error::MalformedNode { .. }
        | Error::MissingKey(_)
        | Error::DTypeUnknown(_)
        | Error::ShapeMismatch { .. }
        | Error::UnknownTypeTag(_)
        | Error::UnsupportedStructure { .. }
        | Error::Csv(_) => MiloStatus::Parse,
        Error::ValidationRejected(_) | Error::VersionMismatch(_) => MiloStatus::Validation,
        Error::InvalidKey(_) | Error::MalformedEnvelope(_) => MiloStatus::Signature,
        Error::PayloadTooLarge { .. }
        | Error::AuthenticationFailure
        | Error::DecompressionFailure(_)
        | Error::UnsupportedVersion(_)
        | Error::BindFailure(_)
        | Error::ModelLoadFailure(_)
        | Error::TransportFailure(_)
        | Error::RemoteError { .. }
        | Error::UnknownAttribute(_)
        | Error::NoHostedModel => MiloStatus::Transport,
        Error::InvalidArgs(_) | Error::Config(_) | Error::LengthMismatch(..) => MiloStatus::InvalidArgument,
        _ => MiloStatus::Model,
    }
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MiloStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MiloStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(_) => {
            set_last_error("internal panic".into());
            MiloStatus::Panic
        }
    }
}

struct Failure(MiloStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), format!("{}: {e}", e.kind()))
    }
}

fn invalid(message: &str) -> Failure {
    Failure(MiloStatus::InvalidArgument, message.to_owned())
}

unsafe fn text<'a>(p: *const c_char, name: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid(&format!("`{name}` is NULL")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(&format!("`{name}` is not UTF-8")))
}

unsafe fn model_ref<'a>(p: *const MiloModel) -> Result<&'a MiloModel, Failure> {
    p.as_ref().ok_or_else(|| invalid("`model` is NULL"))
}

fn out_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("`out` is NULL"));
    }
    let c = CString::new(s).map_err(|_| invalid("output contains NUL"))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn out_model(out: *mut *mut MiloModel, model: Model) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("`out` is NULL"));
    }
    let model_type = CString::new(model.model_type()).expect("type names have no NUL");
    let boxed = Box::new(MiloModel { model, model_type });
    unsafe { *out = Box::into_raw(boxed) };
    Ok(())
}

fn import_validated(doc: &ModelDocument) -> Result<Model, Failure> {
    let report = validate_document(doc);
    if !report.ok {
        let errors: Vec<String> = report.errors().map(ToString::to_string).collect();
        return Err(Error::ValidationRejected(errors).into());
    }
    Ok(import_model(doc)?)
}

unsafe fn matrix(x: *const f64, n_rows: usize, n_cols: usize) -> Result<Tensor, Failure> {
    if x.is_null() {
        return Err(invalid("`x` is NULL"));
    }
    let len = n_rows
        .checked_mul(n_cols)
        .ok_or_else(|| invalid("matrix size overflows"))?;
    let values = std::slice::from_raw_parts(x, len).to_vec();
    Ok(Tensor::from_f64(values, vec![n_rows, n_cols])?)
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn milo_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. Owned by the
/// library; valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn milo_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads, validates and imports a model file.
#[no_mangle]
pub unsafe extern "C" fn milo_model_load(path: *const c_char, out: *mut *mut MiloModel) -> MiloStatus {
    guard(|| {
        let doc = load_document(text(path, "path")?)?;
        out_model(out, import_validated(&doc)?)
    })
}

/// Validates and imports a model document given as JSON text.
#[no_mangle]
pub unsafe extern "C" fn milo_model_from_json(json: *const c_char, out: *mut *mut MiloModel) -> MiloStatus {
    guard(|| {
        let doc = ModelDocument::parse(text(json, "json")?)?;
        out_model(out, import_validated(&doc)?)
    })
}

/// Exports `model` as indented JSON; free the result with `milo_string_free`.
#[no_mangle]
pub unsafe extern "C" fn milo_model_to_json(model: *const MiloModel, out: *mut *mut c_char) -> MiloStatus {
    guard(|| {
        let doc = export_model(&model_ref(model)?.model)?;
        out_string(out, doc.to_pretty_string())
    })
}

#[no_mangle]
pub unsafe extern "C" fn milo_model_save(model: *const MiloModel, path: *const c_char) -> MiloStatus {
    guard(|| {
        let doc = export_model(&model_ref(model)?.model)?;
        Ok(save_document(&doc, text(path, "path")?)?)
    })
}

/// Fits a new model on a row-major `n_rows` x `n_cols` matrix. `y` holds
/// `n_rows` targets (class labels as integral values) and may be NULL only
/// for KMeans.
#[no_mangle]
pub unsafe extern "C" fn milo_model_train(
    model_type: *const c_char,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    y: *const f64,
    out: *mut *mut MiloModel,
) -> MiloStatus {
    guard(|| {
        let mut model = Model::unfitted(text(model_type, "model_type")?)?;
        let x = matrix(x, n_rows, n_cols)?;
        let y = (!y.is_null()).then(|| Tensor::vector_f64(std::slice::from_raw_parts(y, n_rows).to_vec()));
        model.fit(&Dataset::new(x, y)?)?;
        out_model(out, model)
    })
}

/// Fits a new model on a CSV file with a header row. `target` may be NULL
/// only for KMeans.
#[no_mangle]
pub unsafe extern "C" fn milo_model_train_csv(
    model_type: *const c_char,
    csv_path: *const c_char,
    target: *const c_char,
    out: *mut *mut MiloModel,
) -> MiloStatus {
    guard(|| {
        let mut model = Model::unfitted(text(model_type, "model_type")?)?;
        let table = CsvTable::read(text(csv_path, "csv_path")?)?;
        let ds = if target.is_null() {
            Dataset::new(table.features(None)?, None)?
        } else {
            let (x, y) = table.split_target(text(target, "target")?)?;
            Dataset::new(x, Some(y))?
        };
        model.fit(&ds)?;
        out_model(out, model)
    })
}

/// Writes `n_rows` predictions into `out`; class and cluster labels are
/// returned as integral doubles.
#[no_mangle]
pub unsafe extern "C" fn milo_model_predict(
    model: *const MiloModel,
    x: *const f64,
    n_rows: usize,
    n_cols: usize,
    out: *mut f64,
) -> MiloStatus {
    guard(|| {
        let m = model_ref(model)?;
        if out.is_null() {
            return Err(invalid("`out` is NULL"));
        }
        let y = m.model.predict(&matrix(x, n_rows, n_cols)?)?.to_f64_vec();
        std::slice::from_raw_parts_mut(out, n_rows).copy_from_slice(&y);
        Ok(())
    })
}

/// The model's type name; owned by the handle.
#[no_mangle]
pub unsafe extern "C" fn milo_model_type(model: *const MiloModel) -> *const c_char {
    model.as_ref().map_or(ptr::null(), |m| m.model_type.as_ptr())
}

#[no_mangle]
pub unsafe extern "C" fn milo_model_n_features(model: *const MiloModel, out: *mut usize) -> MiloStatus {
    guard(|| {
        let n = model_ref(model)?.model.n_features_in()?;
        out.as_mut().map(|o| *o = n).ok_or_else(|| invalid("`out` is NULL"))
    })
}

#[no_mangle]
pub unsafe extern "C" fn milo_model_free(model: *mut MiloModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Validates JSON text. `ok` receives the verdict; `report`, if not NULL,
/// receives one finding per line (free with `milo_string_free`).
#[no_mangle]
pub unsafe extern "C" fn milo_validate_json(
    json: *const c_char,
    ok: *mut bool,
    report: *mut *mut c_char,
) -> MiloStatus {
    guard(|| {
        let r = validate_node(&Node::parse(text(json, "json")?)?);
        *ok.as_mut().ok_or_else(|| invalid("`ok` is NULL"))? = r.ok;
        if !report.is_null() {
            let lines: Vec<String> = r.findings.iter().map(ToString::to_string).collect();
            out_string(report, lines.join("\n"))?;
        }
        Ok(())
    })
}

/// Signs a model document with a 64-hex-character secret seed and returns
/// the signed file text.
#[no_mangle]
pub unsafe extern "C" fn milo_sign_json(
    json: *const c_char,
    secret_hex: *const c_char,
    out: *mut *mut c_char,
) -> MiloStatus {
    guard(|| {
        let doc = ModelDocument::parse(text(json, "json")?)?;
        let key = signing_key_from_hex(text(secret_hex, "secret_hex")?)?;
        out_string(out, sign_document(&doc, &key).to_pretty_string()?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn milo_verify_json(
    signed_json: *const c_char,
    public_hex: *const c_char,
    valid: *mut bool,
) -> MiloStatus {
    guard(|| {
        let env = SignedEnvelope::parse(text(signed_json, "signed_json")?)?;
        let key = verifying_key_from_hex(text(public_hex, "public_hex")?)?;
        let verdict = verify_document(&env, &key)?;
        *valid.as_mut().ok_or_else(|| invalid("`valid` is NULL"))? = verdict;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn milo_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
