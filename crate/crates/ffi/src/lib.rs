//! C ABI over `sublinopt`.
//!
//! Matrices and reports are opaque handles created by `sublin_*` calls and
//! released with the matching `*_free`. Fallible calls return a
//! [`SublinStatus`]; on failure `sublin_last_error` describes what went
//! wrong. No call unwinds across the boundary.

mod error;

use std::ffi::{c_char, CStr, CString};
use std::panic::AssertUnwindSafe;
use std::path::Path;

use sublinopt::kernels::{kernelized_meb, sublinear_kernel_perceptron, KernelSpec};
use sublinopt::matrix::{load_instance_with, LoadOptions, NormPolicy};
use sublinopt::solvers::{margin_estimate, QpInstance};
use sublinopt::verification::{
    amplified_meb, amplified_perceptron, exact_margin, exact_meb, las_vegas_classifier,
    las_vegas_kernel_meb, las_vegas_kernel_perceptron, las_vegas_meb, Certificate, Certified,
};
use sublinopt::{
    sublinear_meb, sublinear_perceptron, sublinear_qp_simplex, zero_sum_game, DataMatrix, Profile,
    SolutionReport, SolverConfig,
};

use error::{guard, Failure};
pub use error::{sublin_clear_error, sublin_last_error, SublinStatus};

pub const SUBLIN_PROBLEM_PERCEPTRON: u32 = 0;
pub const SUBLIN_PROBLEM_MEB: u32 = 1;
pub const SUBLIN_PROBLEM_MARGIN: u32 = 2;
pub const SUBLIN_PROBLEM_GAME: u32 = 3;
pub const SUBLIN_PROBLEM_KERNEL_PERCEPTRON: u32 = 4;
pub const SUBLIN_PROBLEM_KERNEL_MEB: u32 = 5;

pub const SUBLIN_PROFILE_PAPER: u32 = 0;
pub const SUBLIN_PROFILE_TUNED: u32 = 1;

/// One run, probability 1/2 guarantee.
pub const SUBLIN_MODE_SINGLE: u32 = 0;
/// Repeated runs with verification until failure probability `delta`.
pub const SUBLIN_MODE_AMPLIFIED: u32 = 1;
/// Repeated runs until an exact check accepts.
pub const SUBLIN_MODE_LAS_VEGAS: u32 = 2;

/// Solver parameters. Start from `sublin_config_default()`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SublinConfig {
    pub eps: f64,
    pub delta: f64,
    pub seed: u64,
    /// `SUBLIN_PROFILE_*`.
    pub profile: u32,
    /// `SUBLIN_MODE_*`.
    pub mode: u32,
    /// Iteration count override; 0 keeps the schedule.
    pub iterations: u64,
}

/// An instance matrix.
pub struct SublinMatrix {
    inner: DataMatrix,
}

/// A solver result, with a certificate when the mode produced one.
pub struct SublinReport {
    report: SolutionReport,
    certificate: Option<Certificate>,
}

type Outcome<T> = Result<T, Failure>;

impl SublinConfig {
    fn to_solver(self) -> Outcome<SolverConfig> {
        let profile = match self.profile {
            SUBLIN_PROFILE_PAPER => Profile::Paper,
            SUBLIN_PROFILE_TUNED => Profile::Tuned,
            p => return Err(Failure::invalid(format!("unknown profile {p}"))),
        };
        if self.mode > SUBLIN_MODE_LAS_VEGAS {
            return Err(Failure::invalid(format!("unknown mode {}", self.mode)));
        }
        let mut cfg = SolverConfig::new(self.eps, self.seed).with_profile(profile);
        cfg.delta = self.delta;
        cfg.iterations = (self.iterations > 0).then_some(self.iterations);
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn sublin_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// `eps = 0.1`, `delta = 0.1`, seed 0, paper profile, single run.
#[no_mangle]
pub extern "C" fn sublin_config_default() -> SublinConfig {
    let d = SolverConfig::default();
    SublinConfig {
        eps: d.eps,
        delta: d.delta,
        seed: d.seed,
        profile: SUBLIN_PROFILE_PAPER,
        mode: SUBLIN_MODE_SINGLE,
        iterations: 0,
    }
}

unsafe fn write_out<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

unsafe fn matrix_ref<'a>(m: *const SublinMatrix) -> Outcome<&'a DataMatrix> {
    m.as_ref()
        .map(|h| &h.inner)
        .ok_or_else(|| Failure::null("matrix"))
}

unsafe fn config_of(cfg: *const SublinConfig) -> Outcome<(SolverConfig, u32)> {
    let c = *cfg.as_ref().ok_or_else(|| Failure::null("config"))?;
    Ok((c.to_solver()?, c.mode))
}

fn policy(check_norms: bool) -> NormPolicy {
    if check_norms {
        NormPolicy::UnitBall
    } else {
        NormPolicy::Unchecked
    }
}

/// Builds a matrix from `n * d` row-major doubles. With `check_norms`, rows
/// outside the unit ball are rejected.
///
/// # Safety
/// `data` must point to `n * d` readable doubles and `out` to writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn sublin_matrix_from_dense(
    data: *const f64,
    n: usize,
    d: usize,
    check_norms: bool,
    out: *mut *mut SublinMatrix,
) -> SublinStatus {
    guard(AssertUnwindSafe(|| {
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        if data.is_null() && n * d > 0 {
            return Err(Failure::null("data"));
        }
        let len = n
            .checked_mul(d)
            .ok_or_else(|| Failure::invalid("n * d overflows"))?;
        let flat = if len == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(data, len)
        };
        let rows: Vec<Vec<f64>> = (0..n).map(|i| flat[i * d..(i + 1) * d].to_vec()).collect();
        let inner = DataMatrix::from_dense_with(&rows, policy(check_norms))?;
        write_out(out, SublinMatrix { inner });
        Ok(())
    }))
}

/// Loads an instance file (header `n d`, then `col:value` pairs per row).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sublin_matrix_load(
    path: *const c_char,
    check_norms: bool,
    out: *mut *mut SublinMatrix,
) -> SublinStatus {
    guard(AssertUnwindSafe(|| {
        if path.is_null() {
            return Err(Failure::null("path"));
        }
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let p = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| Failure::invalid("path is not UTF-8"))?;
        let opts = LoadOptions {
            norms: policy(check_norms),
        };
        let inner = load_instance_with(Path::new(p), opts)?;
        write_out(out, SublinMatrix { inner });
        Ok(())
    }))
}

/// Number of rows; 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn sublin_matrix_rows(m: *const SublinMatrix) -> usize {
    m.as_ref().map_or(0, |h| h.inner.n_rows())
}

/// Number of columns; 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn sublin_matrix_cols(m: *const SublinMatrix) -> usize {
    m.as_ref().map_or(0, |h| h.inner.n_cols())
}

/// Number of nonzero entries; 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn sublin_matrix_nnz(m: *const SublinMatrix) -> usize {
    m.as_ref().map_or(0, |h| h.inner.nnz())
}

/// Releases a matrix; NULL is ignored.
///
/// # Safety
/// `m` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn sublin_matrix_free(m: *mut SublinMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

fn finish(out: *mut *mut SublinReport, r: Result<Certified, sublinopt::Error>) -> Outcome<()> {
    let c = r?;
    unsafe {
        write_out(
            out,
            SublinReport {
                report: c.report,
                certificate: Some(c.certificate),
            },
        )
    };
    Ok(())
}

fn finish_plain(
    out: *mut *mut SublinReport,
    r: Result<SolutionReport, sublinopt::Error>,
) -> Outcome<()> {
    let report = r?;
    unsafe {
        write_out(
            out,
            SublinReport {
                report,
                certificate: None,
            },
        )
    };
    Ok(())
}

fn mode_unsupported(problem: u32, mode: u32) -> Failure {
    Failure::invalid(format!(
        "mode {mode} is not available for problem {problem}"
    ))
}

/// Runs a linear solver (`SUBLIN_PROBLEM_PERCEPTRON`, `_MEB`, `_MARGIN`,
/// `_GAME`). Amplified mode covers perceptron and MEB; Las Vegas mode
/// covers perceptron and MEB.
///
/// # Safety
/// `m` and `cfg` must be live, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sublin_solve(
    m: *const SublinMatrix,
    problem: u32,
    cfg: *const SublinConfig,
    out: *mut *mut SublinReport,
) -> SublinStatus {
    guard(AssertUnwindSafe(|| {
        let m = matrix_ref(m)?;
        let (cfg, mode) = config_of(cfg)?;
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        match (problem, mode) {
            (SUBLIN_PROBLEM_PERCEPTRON, SUBLIN_MODE_SINGLE) => {
                finish_plain(out, sublinear_perceptron(m, &cfg))
            }
            (SUBLIN_PROBLEM_PERCEPTRON, SUBLIN_MODE_AMPLIFIED) => {
                finish(out, amplified_perceptron(m, &cfg))
            }
            (SUBLIN_PROBLEM_PERCEPTRON, _) => finish(out, las_vegas_classifier(m, &cfg)),
            (SUBLIN_PROBLEM_MEB, SUBLIN_MODE_SINGLE) => finish_plain(out, sublinear_meb(m, &cfg)),
            (SUBLIN_PROBLEM_MEB, SUBLIN_MODE_AMPLIFIED) => finish(out, amplified_meb(m, &cfg)),
            (SUBLIN_PROBLEM_MEB, _) => finish(out, las_vegas_meb(m, &cfg)),
            (SUBLIN_PROBLEM_MARGIN, SUBLIN_MODE_SINGLE) => {
                finish_plain(out, margin_estimate(m, &cfg))
            }
            (SUBLIN_PROBLEM_GAME, SUBLIN_MODE_SINGLE) => finish_plain(out, zero_sum_game(m, &cfg)),
            (SUBLIN_PROBLEM_MARGIN | SUBLIN_PROBLEM_GAME, mode) => {
                Err(mode_unsupported(problem, mode))
            }
            (SUBLIN_PROBLEM_KERNEL_PERCEPTRON | SUBLIN_PROBLEM_KERNEL_MEB, _) => Err(
                Failure::invalid("kernel problems go through sublin_solve_kernel"),
            ),
            (p, _) => Err(Failure::invalid(format!("unknown problem {p}"))),
        }
    }))
}

/// Runs the QP over the simplex with linear term `b` (`n_b` = rows, each
/// `|b(i)| <= 1`). Single mode only.
///
/// # Safety
/// `m` and `cfg` must be live, `b` must hold `n_b` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sublin_solve_qp(
    m: *const SublinMatrix,
    b: *const f64,
    n_b: usize,
    cfg: *const SublinConfig,
    out: *mut *mut SublinReport,
) -> SublinStatus {
    guard(AssertUnwindSafe(|| {
        let m = matrix_ref(m)?;
        let (cfg, mode) = config_of(cfg)?;
        if mode != SUBLIN_MODE_SINGLE {
            return Err(Failure::invalid("the QP solver supports single mode only"));
        }
        if b.is_null() && n_b > 0 {
            return Err(Failure::null("b"));
        }
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let b = if n_b == 0 {
            &[][..]
        } else {
            std::slice::from_raw_parts(b, n_b)
        };
        finish_plain(
            out,
            QpInstance::new(m, b).and_then(|q| sublinear_qp_simplex(&q, &cfg)),
        )
    }))
}

/// Runs `SUBLIN_PROBLEM_KERNEL_PERCEPTRON` or `_KERNEL_MEB` with a kernel
/// given as text (`"poly:q=2"`, `"gauss:kappa=1.5"`). `labels` may be NULL;
/// otherwise it holds `n_labels` values of +-1 (perceptron only). Single and
/// Las Vegas modes.
///
/// # Safety
/// `m` and `cfg` must be live, `kernel` NUL-terminated, `labels` NULL or
/// `n_labels` doubles, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sublin_solve_kernel(
    m: *const SublinMatrix,
    problem: u32,
    kernel: *const c_char,
    labels: *const f64,
    n_labels: usize,
    cfg: *const SublinConfig,
    out: *mut *mut SublinReport,
) -> SublinStatus {
    guard(AssertUnwindSafe(|| {
        let m = matrix_ref(m)?;
        let (cfg, mode) = config_of(cfg)?;
        if kernel.is_null() {
            return Err(Failure::null("kernel"));
        }
        if out.is_null() {
            return Err(Failure::null("out"));
        }
        let spec: KernelSpec = CStr::from_ptr(kernel)
            .to_str()
            .map_err(|_| Failure::invalid("kernel is not UTF-8"))?
            .parse()?;
        let labels = if labels.is_null() {
            None
        } else {
            Some(std::slice::from_raw_parts(labels, n_labels))
        };
        match (problem, mode) {
            (SUBLIN_PROBLEM_KERNEL_PERCEPTRON, SUBLIN_MODE_SINGLE) => {
                finish_plain(out, sublinear_kernel_perceptron(m, &spec, labels, &cfg))
            }
            (SUBLIN_PROBLEM_KERNEL_PERCEPTRON, SUBLIN_MODE_LAS_VEGAS) => {
                finish(out, las_vegas_kernel_perceptron(m, &spec, labels, &cfg))
            }
            (SUBLIN_PROBLEM_KERNEL_MEB, _) if labels.is_some() => Err(Failure::invalid(
                "labels apply to the kernel perceptron only",
            )),
            (SUBLIN_PROBLEM_KERNEL_MEB, SUBLIN_MODE_SINGLE) => {
                finish_plain(out, kernelized_meb(m, &spec, &cfg))
            }
            (SUBLIN_PROBLEM_KERNEL_MEB, SUBLIN_MODE_LAS_VEGAS) => {
                finish(out, las_vegas_kernel_meb(m, &spec, &cfg))
            }
            (SUBLIN_PROBLEM_KERNEL_PERCEPTRON | SUBLIN_PROBLEM_KERNEL_MEB, mode) => {
                Err(mode_unsupported(problem, mode))
            }
            (p, _) => Err(Failure::invalid(format!(
                "problem {p} is not a kernel problem"
            ))),
        }
    }))
}

/// Exact objective of the returned point (margin, squared radius, value);
/// NaN for NULL.
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn sublin_report_achieved(r: *const SublinReport) -> f64 {
    r.as_ref().map_or(f64::NAN, |h| h.report.achieved_value)
}

/// Exact bound certified by the dual average; NaN for NULL.
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn sublin_report_dual_bound(r: *const SublinReport) -> f64 {
    r.as_ref().map_or(f64::NAN, |h| h.report.dual_bound)
}

/// Iterations of the accepted run; 0 for NULL.
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn sublin_report_iterations(r: *const SublinReport) -> u64 {
    r.as_ref().map_or(0, |h| h.report.iterations)
}

/// Matrix entries read, including every attempt and verification when a
/// certificate is present; 0 for NULL.
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn sublin_report_entries_read(r: *const SublinReport) -> u64 {
    r.as_ref().map_or(0, |h| match &h.certificate {
        Some(c) => c.entries_read,
        None => h.report.entries_read,
    })
}

/// Wall time of the accepted run in seconds; NaN for NULL.
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn sublin_report_wall_time(r: *const SublinReport) -> f64 {
    r.as_ref().map_or(f64::NAN, |h| h.report.wall_time_secs)
}

/// Length of `x_bar` (0 for kernel problems and NULL).
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn sublin_report_x_len(r: *const SublinReport) -> usize {
    r.as_ref().map_or(0, |h| h.report.x_bar.len())
}

/// Copies `x_bar` into `buf`, which holds `len` doubles.
///
/// # Safety
/// `r` must be live and `buf` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn sublin_report_x_bar(
    r: *const SublinReport,
    buf: *mut f64,
    len: usize,
) -> SublinStatus {
    guard(AssertUnwindSafe(|| {
        let h = r.as_ref().ok_or_else(|| Failure::null("report"))?;
        let x = &h.report.x_bar;
        if len < x.len() {
            return Err(Failure::new(
                SublinStatus::BufferTooSmall,
                format!("x_bar has {} entries, buffer holds {len}", x.len()),
            ));
        }
        if x.is_empty() {
            return Ok(());
        }
        if buf.is_null() {
            return Err(Failure::null("buf"));
        }
        std::ptr::copy_nonoverlapping(x.as_ptr(), buf, x.len());
        Ok(())
    }))
}

/// 1 if the report carries an accepted certificate, 0 if rejected, -1 if
/// there is none (single mode or NULL).
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn sublin_report_certificate(r: *const SublinReport) -> i32 {
    match r.as_ref().and_then(|h| h.certificate.as_ref()) {
        Some(c) if c.accepted => 1,
        Some(_) => 0,
        None => -1,
    }
}

/// The full report as JSON (floats to 17 significant digits). Free with
/// `sublin_string_free`; NULL on failure.
///
/// # Safety
/// `r` must be NULL or a live report handle.
#[no_mangle]
pub unsafe extern "C" fn sublin_report_to_json(r: *const SublinReport) -> *mut c_char {
    let Some(h) = r.as_ref() else {
        return std::ptr::null_mut();
    };
    let text = sublinopt::json::to_json(&(&h.report, &h.certificate));
    CString::new(text).map_or(std::ptr::null_mut(), CString::into_raw)
}

/// Releases a string returned by this library; NULL is ignored.
///
/// # Safety
/// `s` must be NULL or a string from `sublin_report_to_json` not freed before.
#[no_mangle]
pub unsafe extern "C" fn sublin_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Releases a report; NULL is ignored.
///
/// # Safety
/// `r` must be NULL or a handle not freed before.
#[no_mangle]
pub unsafe extern "C" fn sublin_report_free(r: *mut SublinReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Exact margin of the rows to additive tolerance `tol`.
///
/// # Safety
/// `m` must be live and `value` writable.
#[no_mangle]
pub unsafe extern "C" fn sublin_exact_margin(
    m: *const SublinMatrix,
    tol: f64,
    value: *mut f64,
) -> SublinStatus {
    guard(AssertUnwindSafe(|| {
        let m = matrix_ref(m)?;
        if value.is_null() {
            return Err(Failure::null("value"));
        }
        *value = exact_margin(m, tol)?.value;
        Ok(())
    }))
}

/// Exact squared radius of the minimum enclosing ball of the rows.
///
/// # Safety
/// `m` must be live and `sq_radius` writable.
#[no_mangle]
pub unsafe extern "C" fn sublin_exact_meb(
    m: *const SublinMatrix,
    tol: f64,
    sq_radius: *mut f64,
) -> SublinStatus {
    guard(AssertUnwindSafe(|| {
        let m = matrix_ref(m)?;
        if sq_radius.is_null() {
            return Err(Failure::null("sq_radius"));
        }
        *sq_radius = exact_meb(m, tol)?.sq_radius;
        Ok(())
    }))
}
