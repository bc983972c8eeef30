use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, UnwindSafe};

use sublinopt::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SublinStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    NormViolation = 5,
    Contract = 6,
    AmplificationFailed = 7,
    OracleNonConvergence = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

pub(crate) struct Failure {
    pub status: SublinStatus,
    pub message: String,
}

impl Failure {
    pub fn new(status: SublinStatus, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    pub fn null(what: &str) -> Self {
        Self::new(SublinStatus::NullPointer, format!("{what} is NULL"))
    }

    pub fn invalid(message: impl Into<String>) -> Self {
        Self::new(SublinStatus::InvalidArgument, message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::Io { .. } => SublinStatus::Io,
            Error::Parse { .. } => SublinStatus::Parse,
            Error::NormViolation { .. } => SublinStatus::NormViolation,
            Error::IndexOutOfRange { .. }
            | Error::EmptyInstance
            | Error::InvalidParameter(_)
            | Error::Config(_) => SublinStatus::InvalidArgument,
            Error::Contract(_) => SublinStatus::Contract,
            Error::AmplificationFailed { .. } => SublinStatus::AmplificationFailed,
            Error::OracleNonConvergence(_) => SublinStatus::OracleNonConvergence,
        };
        Self::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `f`, recording its failure message and turning panics into
/// [`SublinStatus::Panic`].
pub(crate) fn guard(f: impl FnOnce() -> Result<(), Failure> + UnwindSafe) -> SublinStatus {
    match catch_unwind(f) {
        Ok(Ok(())) => SublinStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_last_error(&format!("panic: {msg}"));
            SublinStatus::Panic
        }
    }
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sublin_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(c) => c.as_ptr(),
        None => std::ptr::null(),
    })
}

/// Forgets the last error message of this thread.
#[no_mangle]
pub extern "C" fn sublin_clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
}
