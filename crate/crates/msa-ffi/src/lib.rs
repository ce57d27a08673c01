//! C ABI over the many-sorted algebra engine.
//!
//! The surface mirrors the command line: parse an instance into an opaque
//! handle, validate, run theorem checks, construct limit algebras, and
//! generate seeded instances. Strings returned through out-parameters are
//! owned by the library and released with [`msa_string_free`]; failures
//! return a status code and leave a message in a thread-local slot read
//! by [`msa_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use msa_core::generate::{generate, GeneratorConfig};
use msa_core::report::{
    cmd_check, cmd_construct, cmd_validate, CheckKind, ConstructKind, SCHEMA_VERSION,
};

/// Status codes of every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsaStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An input string was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The instance text did not parse or validate.
    ParseError = 3,
    /// The requested check ran and at least one verdict failed.
    CheckFailed = 4,
    /// An argument value was not recognized.
    InvalidArgument = 5,
    /// The construction could not be carried out.
    ConstructError = 6,
    /// An internal invariant was violated.
    Internal = 7,
}

/// An opaque, fully validated instance.
pub struct MsaInstance {
    text: String,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg: String = msg.into();
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn read_str<'a>(ptr: *const c_char) -> Result<&'a str, MsaStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(MsaStatus::NullArgument);
    }
    unsafe { CStr::from_ptr(ptr) }.to_str().map_err(|_| {
        set_error("string argument is not UTF-8");
        MsaStatus::InvalidUtf8
    })
}

fn give_string(out: *mut *mut c_char, value: String) -> Result<(), MsaStatus> {
    if out.is_null() {
        set_error("null output argument");
        return Err(MsaStatus::NullArgument);
    }
    let c = CString::new(value.replace('\0', " ")).map_err(|_| MsaStatus::Internal)?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn guarded(f: impl FnOnce() -> MsaStatus) -> MsaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            MsaStatus::Internal
        }
    }
}

/// The report schema version this library emits.
#[no_mangle]
pub extern "C" fn msa_schema_version() -> u32 {
    SCHEMA_VERSION
}

/// The message of the most recent failure on this thread. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn msa_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Parses and validates instance text into a handle. On failure the
/// located diagnostics are joined into the error message.
///
/// # Safety
/// `text` must point to a NUL-terminated string and `out` must be a
/// valid location to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn msa_instance_parse(
    text: *const c_char,
    out: *mut *mut MsaInstance,
) -> MsaStatus {
    guarded(|| {
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        if out.is_null() {
            set_error("null output argument");
            return MsaStatus::NullArgument;
        }
        match msa_core::dsl::parse(text) {
            Ok(_) => {
                let handle = Box::new(MsaInstance {
                    text: text.to_string(),
                });
                unsafe { *out = Box::into_raw(handle) };
                MsaStatus::Ok
            }
            Err(diags) => {
                let msg: Vec<String> = diags.iter().map(|d| d.to_string()).collect();
                set_error(msg.join("; "));
                MsaStatus::ParseError
            }
        }
    })
}

/// Releases an instance handle.
///
/// # Safety
/// `inst` must be null or a handle previously returned by this library,
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn msa_instance_free(inst: *mut MsaInstance) {
    if !inst.is_null() {
        drop(unsafe { Box::from_raw(inst) });
    }
}

/// Releases a string returned by this library.
///
/// # Safety
/// `s` must be null or a string previously returned by this library,
/// not yet freed.
#[no_mangle]
pub unsafe extern "C" fn msa_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Runs the structural validators over raw text and returns the JSON
/// report. A failing report is still returned, with `CheckFailed`.
///
/// # Safety
/// `text` must point to a NUL-terminated string and `report_json` must
/// be a valid location to write to.
#[no_mangle]
pub unsafe extern "C" fn msa_validate(
    text: *const c_char,
    report_json: *mut *mut c_char,
) -> MsaStatus {
    guarded(|| {
        let text = match read_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        let report = cmd_validate(text);
        let pass = report.pass();
        if let Err(s) = give_string(report_json, report.to_json()) {
            return s;
        }
        if pass {
            MsaStatus::Ok
        } else {
            set_error("validation failed");
            MsaStatus::CheckFailed
        }
    })
}

/// Runs the named check family (`all`, `prop25`, `prop28`, `prop29`,
/// `retraction`, `naturality`, `cylinder`, `composition`) over every
/// applicable declared instance and returns the JSON report.
///
/// # Safety
/// `inst` must be a live handle from this library, `which` a
/// NUL-terminated string, and `report_json` a valid write location.
#[no_mangle]
pub unsafe extern "C" fn msa_instance_check(
    inst: *const MsaInstance,
    which: *const c_char,
    max_iso_search: usize,
    report_json: *mut *mut c_char,
) -> MsaStatus {
    guarded(|| {
        if inst.is_null() {
            set_error("null instance");
            return MsaStatus::NullArgument;
        }
        let which = match read_str(which) {
            Ok(w) => w,
            Err(s) => return s,
        };
        let Some(kind) = CheckKind::parse(which) else {
            set_error(format!("unknown check `{which}`"));
            return MsaStatus::InvalidArgument;
        };
        let text = unsafe { &(*inst).text };
        let report = cmd_check(text, kind, max_iso_search);
        let pass = report.pass();
        if let Err(s) = give_string(report_json, report.to_json()) {
            return s;
        }
        if pass {
            MsaStatus::Ok
        } else {
            set_error("at least one verdict failed");
            MsaStatus::CheckFailed
        }
    })
}

/// Computes a construction (`projlim`, `indlim`, `ultraproduct`,
/// `reducedproduct`) for the named declaration and returns the emitted
/// instance text.
///
/// # Safety
/// `inst` must be a live handle from this library, `what` and `name`
/// NUL-terminated strings, and `out_text` a valid write location.
#[no_mangle]
pub unsafe extern "C" fn msa_instance_construct(
    inst: *const MsaInstance,
    what: *const c_char,
    name: *const c_char,
    out_text: *mut *mut c_char,
) -> MsaStatus {
    guarded(|| {
        if inst.is_null() {
            set_error("null instance");
            return MsaStatus::NullArgument;
        }
        let what = match read_str(what) {
            Ok(w) => w,
            Err(s) => return s,
        };
        let name = match read_str(name) {
            Ok(n) => n,
            Err(s) => return s,
        };
        let Some(kind) = ConstructKind::parse(what) else {
            set_error(format!("unknown construction `{what}`"));
            return MsaStatus::InvalidArgument;
        };
        let text = unsafe { &(*inst).text };
        match cmd_construct(text, kind, name) {
            Ok((_, emitted)) => match give_string(out_text, emitted) {
                Ok(()) => MsaStatus::Ok,
                Err(s) => s,
            },
            Err(report) => {
                let why = report
                    .checks
                    .iter()
                    .filter(|c| !c.pass)
                    .map(|c| format!("{}: {:?}", c.name, c.witness))
                    .collect::<Vec<_>>()
                    .join("; ");
                set_error(why);
                MsaStatus::ConstructError
            }
        }
    })
}

/// Generator configuration; the caps match the engine's desk scale.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MsaGenConfig {
    pub seed: u64,
    pub max_sorts: usize,
    pub max_carrier: usize,
    pub max_ops: usize,
    pub max_index: usize,
    pub force_constant_support: bool,
    pub force_surjective_transitions: bool,
    pub inject_support_violation: bool,
}

/// Generates a seeded instance file; the same configuration always
/// yields the same bytes.
///
/// # Safety
/// `config` must point to a valid configuration and `out_text` must be
/// a valid write location.
#[no_mangle]
pub unsafe extern "C" fn msa_generate(
    config: *const MsaGenConfig,
    out_text: *mut *mut c_char,
) -> MsaStatus {
    guarded(|| {
        if config.is_null() {
            set_error("null configuration");
            return MsaStatus::NullArgument;
        }
        let c = unsafe { *config };
        let config = GeneratorConfig {
            seed: c.seed,
            max_sorts: c.max_sorts,
            max_carrier: c.max_carrier,
            max_ops: c.max_ops,
            max_index: c.max_index,
            force_constant_support: c.force_constant_support,
            force_surjective_transitions: c.force_surjective_transitions,
            inject_support_violation: c.inject_support_violation,
        };
        match generate(&config) {
            Ok(file) => {
                match give_string(out_text, msa_core::dsl::serialize(&file)) {
                    Ok(()) => MsaStatus::Ok,
                    Err(s) => s,
                }
            }
            Err(e) => {
                set_error(e.to_string());
                MsaStatus::InvalidArgument
            }
        }
    })
}
