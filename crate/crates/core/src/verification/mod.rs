//! Certification of candidate solutions: sampled verification, success
//! amplification by generate-and-verify, Las Vegas wrappers with exact
//! checks, and exact oracles for small instances.

mod oracles;

pub use oracles::{
    exact_game, exact_margin, exact_meb, gram, kernel_exact_margin, kernel_exact_meb,
    margin_from_gram, meb_from_gram, meb_grid_refine, MebOracle, OracleValue, ORACLE_TOL,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::{kernelized_meb, sublinear_kernel_perceptron, KernelSpec};
use crate::linalg::norm;
use crate::matrix::{AccessCounter, DataMatrix};
use crate::sampling::{derive_seed, rng_from_seed, DotEstimator};
use crate::solvers::{sublinear_meb, sublinear_perceptron, SolutionReport, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    MarginVerified,
    MebVerified,
    LasVegasExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateMethod {
    /// Per-row median-of-means estimates.
    Sampled,
    /// Full exact scans, no sampling.
    ExactScan,
}

/// Outcome of a verification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub kind: CertificateKind,
    pub accepted: bool,
    /// The value the candidate was tested against.
    pub claimed: f64,
    /// Bound established for the candidate: a margin lower bound, or the
    /// exact squared radius for MEB.
    pub verified_bound: f64,
    pub method: CertificateMethod,
    /// `1 - delta` for sampled checks; `None` when exact.
    pub confidence: Option<f64>,
    /// Candidates generated before this one was accepted (1-based).
    pub attempts: usize,
    /// Entries read by the verification and all generating runs.
    pub entries_read: u64,
}

/// Tests whether `min_i A_i x >= sigma_claim - eps` using one
/// `(eps, delta / n)` dot-product estimate per row; the answer is wrong with
/// probability at most `delta`.
pub fn verify_classifier<R: Rng + ?Sized>(
    m: &DataMatrix,
    x: &[f64],
    sigma_claim: f64,
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<Certificate> {
    let n = m.n_rows();
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    if x.len() != m.n_cols() {
        return Err(invalid(format!(
            "candidate has {} entries for {} columns",
            x.len(),
            m.n_cols()
        )));
    }
    if norm(x) > 1.0 + 1e-9 {
        return Err(invalid("candidate must lie in the unit ball"));
    }
    let est = DotEstimator::new(x, eps, delta / n as f64)?;
    let mut counter = AccessCounter::new();
    let mut min_est = f64::INFINITY;
    let mut accepted = true;
    for i in 0..n {
        let e = est.estimate(|j| m.get_entry(i, j, &mut counter).unwrap_or(0.0), rng);
        min_est = min_est.min(e);
        if e < sigma_claim - eps {
            accepted = false;
            break;
        }
    }
    Ok(Certificate {
        kind: CertificateKind::MarginVerified,
        accepted,
        claimed: sigma_claim,
        verified_bound: min_est - eps,
        method: CertificateMethod::Sampled,
        confidence: Some(1.0 - delta),
        attempts: 1,
        entries_read: counter.total(),
    })
}

/// `ceil(20 log2(1/delta))`, at least 1.
pub fn attempt_cap(delta: f64) -> usize {
    ((20.0 * (1.0 / delta).log2()).ceil() as usize).max(1)
}

/// Attempts allowed to a Las Vegas loop before it reports failure instead of
/// running on.
pub const LAS_VEGAS_SAFETY_CAP: usize = 10_000;

/// An accepted candidate and its certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Certified {
    pub report: SolutionReport,
    pub certificate: Certificate,
}

/// Generates candidates with `run(attempt)` until `verify` accepts one, at
/// most [`attempt_cap`]`(delta)` times.
pub fn amplify<F, V>(mut run: F, mut verify: V, delta: f64) -> Result<Certified>
where
    F: FnMut(usize) -> Result<SolutionReport>,
    V: FnMut(usize, &SolutionReport) -> Result<Certificate>,
{
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    repeat_until(attempt_cap(delta), &mut run, &mut verify)
}

fn repeat_until<F, V>(cap: usize, run: &mut F, verify: &mut V) -> Result<Certified>
where
    F: FnMut(usize) -> Result<SolutionReport>,
    V: FnMut(usize, &SolutionReport) -> Result<Certificate>,
{
    let mut spent = 0u64;
    for a in 0..cap {
        let report = run(a)?;
        spent += report.entries_read;
        let mut c = verify(a, &report)?;
        spent += c.entries_read;
        if c.accepted {
            c.attempts = a + 1;
            c.entries_read = spent;
            return Ok(Certified {
                report,
                certificate: c,
            });
        }
    }
    Err(Error::AmplificationFailed { attempts: cap })
}

fn at_eps(cfg: &SolverConfig, eps: f64, attempt: usize) -> SolverConfig {
    let mut c = cfg.clone();
    c.eps = eps;
    c.seed = derive_seed(cfg.seed, attempt as u64);
    c
}

/// Perceptron with failure probability `cfg.delta`: runs at `eps/3` and
/// accepts `x_bar` once sampled verification shows
/// `min_i A_i x_bar >= |p_bar^T A| - eps` (up to the verifier's `eps/3`).
pub fn amplified_perceptron(m: &DataMatrix, cfg: &SolverConfig) -> Result<Certified> {
    cfg.validate()?;
    let eps = cfg.eps;
    let cap = attempt_cap(cfg.delta);
    let dv = cfg.delta / cap as f64;
    amplify(
        |a| sublinear_perceptron(m, &at_eps(cfg, eps / 3.0, a)),
        |a, r| {
            let mut rng = rng_from_seed(derive_seed(cfg.seed ^ 0x5eed_ce47, a as u64));
            verify_classifier(
                m,
                &r.x_bar,
                r.dual_bound - eps / 3.0,
                eps / 3.0,
                dv,
                &mut rng,
            )
        },
        cfg.delta,
    )
}

fn exact_margin_check(r: &SolutionReport, eps: f64, m_nnz: u64) -> Certificate {
    Certificate {
        kind: CertificateKind::LasVegasExact,
        accepted: r.achieved_value >= r.dual_bound - eps,
        claimed: r.dual_bound - eps,
        verified_bound: r.achieved_value,
        method: CertificateMethod::ExactScan,
        confidence: None,
        attempts: 1,
        entries_read: m_nnz,
    }
}

fn exact_meb_check(r: &SolutionReport, eps: f64, m_nnz: u64) -> Certificate {
    Certificate {
        kind: CertificateKind::LasVegasExact,
        accepted: r.achieved_value <= r.dual_bound + eps,
        claimed: r.dual_bound + eps,
        verified_bound: r.achieved_value,
        method: CertificateMethod::ExactScan,
        confidence: None,
        attempts: 1,
        entries_read: m_nnz,
    }
}

/// Repeats the perceptron at `eps/2` until the exact test
/// `min_i A_i x_bar >= |p_bar^T A| - eps` passes. A returned certificate is
/// never wrong: `x_bar` has margin at least `sigma - eps`.
pub fn las_vegas_classifier(m: &DataMatrix, cfg: &SolverConfig) -> Result<Certified> {
    cfg.validate()?;
    let eps = cfg.eps;
    let nnz = m.nnz() as u64;
    repeat_until(
        LAS_VEGAS_SAFETY_CAP,
        &mut |a| sublinear_perceptron(m, &at_eps(cfg, eps / 2.0, a)),
        &mut |_, r| Ok(exact_margin_check(r, eps, nnz)),
    )
}

/// Repeats MEB at `eps/2` until the exact squared radius of `x_bar` is
/// within `eps` of the lower bound certified by `p_bar`.
pub fn las_vegas_meb(m: &DataMatrix, cfg: &SolverConfig) -> Result<Certified> {
    cfg.validate()?;
    let eps = cfg.eps;
    let nnz = m.nnz() as u64;
    repeat_until(
        LAS_VEGAS_SAFETY_CAP,
        &mut |a| sublinear_meb(m, &at_eps(cfg, eps / 2.0, a)),
        &mut |_, r| Ok(exact_meb_check(r, eps, nnz)),
    )
}

/// MEB with failure probability `cfg.delta`: the Las Vegas test capped at
/// [`attempt_cap`] attempts.
pub fn amplified_meb(m: &DataMatrix, cfg: &SolverConfig) -> Result<Certified> {
    cfg.validate()?;
    let eps = cfg.eps;
    let nnz = m.nnz() as u64;
    amplify(
        |a| sublinear_meb(m, &at_eps(cfg, eps / 2.0, a)),
        |_, r| {
            let mut c = exact_meb_check(r, eps, nnz);
            c.kind = CertificateKind::MebVerified;
            Ok(c)
        },
        cfg.delta,
    )
}

/// Las Vegas kernel perceptron. The exact test costs kernel evaluations
/// against the whole support rather than `O(nnz)` entry reads.
pub fn las_vegas_kernel_perceptron(
    m: &DataMatrix,
    spec: &KernelSpec,
    labels: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<Certified> {
    cfg.validate()?;
    let eps = cfg.eps;
    repeat_until(
        LAS_VEGAS_SAFETY_CAP,
        &mut |a| sublinear_kernel_perceptron(m, spec, labels, &at_eps(cfg, eps / 2.0, a)),
        &mut |_, r| Ok(exact_margin_check(r, eps, 0)),
    )
}

/// Las Vegas kernelized MEB.
pub fn las_vegas_kernel_meb(
    m: &DataMatrix,
    spec: &KernelSpec,
    cfg: &SolverConfig,
) -> Result<Certified> {
    cfg.validate()?;
    let eps = cfg.eps;
    repeat_until(
        LAS_VEGAS_SAFETY_CAP,
        &mut |a| kernelized_meb(m, spec, &at_eps(cfg, eps / 2.0, a)),
        &mut |_, r| Ok(exact_meb_check(r, eps, 0)),
    )
}
