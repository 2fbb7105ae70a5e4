//! C ABI over the logdag streaming parser.
//!
//! A parser is an opaque `LogdagParser *` created by [`logdag_parser_new`]
//! and released with [`logdag_parser_free`]. Every fallible call returns a
//! [`LogdagStatus`]; on failure a message can be read with
//! [`logdag_last_error`] on the same thread. Strings handed out by the
//! library are owned by the caller and must be released with
//! [`logdag_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use logdag::config::{ConfigFile, RunConfig};
use logdag::pipeline::StreamParser;
use logdag::state::DagState;
use logdag::OutputId;

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LogdagStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// The configuration text was rejected.
    InvalidConfig = 3,
    /// The state snapshot could not be read or was inconsistent.
    InvalidState = 4,
    /// The line did not fit the configured line format and was skipped.
    MalformedLine = 5,
    /// No output node has the requested id.
    UnknownTemplate = 6,
    /// A Rust panic was caught at the boundary; the parser should be freed.
    Internal = 7,
}

/// Opaque parser handle.
pub struct LogdagParser {
    config: RunConfig,
    inner: StreamParser,
}

/// One parsed line.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct LogdagRecord {
    pub line_id: u64,
    pub group_id: u64,
    pub output_id: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn fail(status: LogdagStatus, msg: impl Into<String>) -> LogdagStatus {
    set_error(msg);
    status
}

fn guard(f: impl FnOnce() -> LogdagStatus) -> LogdagStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => fail(LogdagStatus::Internal, "panic inside logdag"),
    }
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, LogdagStatus> {
    if s.is_null() {
        return Err(fail(LogdagStatus::NullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(s).to_str().map_err(|_| {
        fail(
            LogdagStatus::InvalidUtf8,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn read_config(text: *const c_char) -> Result<RunConfig, LogdagStatus> {
    if text.is_null() {
        return Ok(RunConfig::default());
    }
    let text = read_str(text, "config")?;
    ConfigFile::parse(text)
        .and_then(RunConfig::from_file)
        .map_err(|e| fail(LogdagStatus::InvalidConfig, e.to_string()))
}

fn hand_out(s: String, out: *mut *mut c_char) {
    // Content from the parser never holds NUL: tokens come from &str lines
    // and the C side could not have passed one in.
    let c = CString::new(s).unwrap_or_else(|e| {
        let mut bytes = e.into_vec();
        bytes.retain(|b| *b != 0);
        CString::new(bytes).expect("no nul left")
    });
    unsafe { *out = c.into_raw() };
}

/// Creates a parser.
///
/// `config_toml` holds configuration in the same TOML form the CLI reads;
/// null selects the defaults. The member-id lists are not kept, so memory
/// stays proportional to the number of templates.
///
/// # Safety
///
/// `config_toml` is null or a NUL-terminated string. `out` is a valid
/// pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn logdag_parser_new(
    config_toml: *const c_char,
    out: *mut *mut LogdagParser,
) -> LogdagStatus {
    guard(|| {
        if out.is_null() {
            return fail(LogdagStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let config = match read_config(config_toml) {
            Ok(c) => c,
            Err(status) => return status,
        };
        let inner = StreamParser::new(&config, false);
        *out = Box::into_raw(Box::new(LogdagParser { config, inner }));
        LogdagStatus::Ok
    })
}

/// Creates a parser that continues from a snapshot taken with
/// [`logdag_parser_snapshot`]. Graph settings come from the snapshot;
/// `config_toml` supplies the preprocessing rules and line format.
///
/// # Safety
///
/// `config_toml` is null or NUL-terminated; `state_json` is NUL-terminated;
/// `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn logdag_parser_restore(
    config_toml: *const c_char,
    state_json: *const c_char,
    out: *mut *mut LogdagParser,
) -> LogdagStatus {
    guard(|| {
        if out.is_null() {
            return fail(LogdagStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let config = match read_config(config_toml) {
            Ok(c) => c,
            Err(status) => return status,
        };
        let json = match read_str(state_json, "state_json") {
            Ok(s) => s,
            Err(status) => return status,
        };
        let dag = match DagState::from_json(json).and_then(DagState::restore) {
            Ok(dag) => dag,
            Err(e) => return fail(LogdagStatus::InvalidState, e.to_string()),
        };
        let inner = StreamParser::resume(&config, dag);
        *out = Box::into_raw(Box::new(LogdagParser { config, inner }));
        LogdagStatus::Ok
    })
}

/// Releases a parser. Null is ignored.
///
/// # Safety
///
/// `parser` is null or a handle from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn logdag_parser_free(parser: *mut LogdagParser) {
    if !parser.is_null() {
        drop(Box::from_raw(parser));
    }
}

/// Parses one raw log line (without its terminator).
///
/// On [`LogdagStatus::Ok`] the record is written to `out`. A line that does
/// not fit the line format yields [`LogdagStatus::MalformedLine`] and leaves
/// the parser usable.
///
/// # Safety
///
/// `parser` is a live handle, `line` is NUL-terminated, and `out` is valid
/// for one write. A handle must not be used from two threads at once.
#[no_mangle]
pub unsafe extern "C" fn logdag_parser_feed(
    parser: *mut LogdagParser,
    line: *const c_char,
    out: *mut LogdagRecord,
) -> LogdagStatus {
    guard(|| {
        let Some(parser) = parser.as_mut() else {
            return fail(LogdagStatus::NullArgument, "parser is null");
        };
        if out.is_null() {
            return fail(LogdagStatus::NullArgument, "out is null");
        }
        let line = match read_str(line, "line") {
            Ok(s) => s,
            Err(status) => return status,
        };
        match parser.inner.feed(line) {
            Some(r) => {
                *out = LogdagRecord {
                    line_id: r.line_id,
                    group_id: r.group_id.0,
                    output_id: r.output_id.0,
                };
                LogdagStatus::Ok
            }
            None => fail(
                LogdagStatus::MalformedLine,
                format!(
                    "line does not have the {} configured fields",
                    parser.config.line_format.field_names().len()
                ),
            ),
        }
    })
}

/// Number of output nodes (templates) so far. Output ids run from 1 to
/// this count. Returns 0 for a null handle.
///
/// # Safety
///
/// `parser` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn logdag_parser_template_count(parser: *const LogdagParser) -> u64 {
    parser
        .as_ref()
        .map_or(0, |p| p.inner.dag().outputs().len() as u64)
}

/// Number of lines parsed so far. Returns 0 for a null handle.
///
/// # Safety
///
/// `parser` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn logdag_parser_lines_parsed(parser: *const LogdagParser) -> u64 {
    parser.as_ref().map_or(0, |p| p.inner.lines_parsed())
}

/// Writes the current template text of output node `output_id` to `*out`.
/// Release it with [`logdag_string_free`].
///
/// # Safety
///
/// `parser` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn logdag_parser_template(
    parser: *const LogdagParser,
    output_id: u64,
    out: *mut *mut c_char,
) -> LogdagStatus {
    guard(|| {
        let Some(parser) = parser.as_ref() else {
            return fail(LogdagStatus::NullArgument, "parser is null");
        };
        if out.is_null() {
            return fail(LogdagStatus::NullArgument, "out is null");
        }
        *out = ptr::null_mut();
        let dag = parser.inner.dag();
        if output_id == 0 || output_id > dag.outputs().len() as u64 {
            return fail(
                LogdagStatus::UnknownTemplate,
                format!("no template with id {output_id}"),
            );
        }
        hand_out(dag.output_template(OutputId(output_id)).render(), out);
        LogdagStatus::Ok
    })
}

/// Serializes the parser's graph as JSON to `*out`, for
/// [`logdag_parser_restore`]. Release it with [`logdag_string_free`].
///
/// # Safety
///
/// `parser` is a live handle; `out` is valid for one write.
#[no_mangle]
pub unsafe extern "C" fn logdag_parser_snapshot(
    parser: *const LogdagParser,
    out: *mut *mut c_char,
) -> LogdagStatus {
    guard(|| {
        let Some(parser) = parser.as_ref() else {
            return fail(LogdagStatus::NullArgument, "parser is null");
        };
        if out.is_null() {
            return fail(LogdagStatus::NullArgument, "out is null");
        }
        hand_out(DagState::capture(parser.inner.dag()).to_json(), out);
        LogdagStatus::Ok
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
///
/// `s` is null or a string from this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn logdag_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on this thread;
/// do not free it.
#[no_mangle]
pub extern "C" fn logdag_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn logdag_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
