use std::path::PathBuf;

use clap::{Args, ValueEnum};
use sublinopt::error::{Error, Result};
use sublinopt::linalg::norm;
use sublinopt::sampling::rng_from_seed;
use sublinopt::solvers::objective::{meb_sq_radius, min_margin};
use sublinopt::verification::{verify_classifier, Certificate, CertificateKind, CertificateMethod};

use super::output::{
    read_text, read_vector, to_json, InstanceInfo, RunReport, VerifyReport, SCHEMA_VERSION,
};
use super::solve::load;
use super::{invalid, ProblemArg};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VerifyProblem {
    /// Margin of a classifier: `min_i A_i x >= claim - eps`.
    Perceptron,
    /// Squared radius of a center: `max_i |A_i - x|^2 <= claim + eps`.
    Meb,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(value_enum, default_value = "perceptron")]
    pub problem: VerifyProblem,
    #[arg(short = 'i', long = "instance")]
    pub instance: PathBuf,
    /// Candidate point, whitespace-separated.
    #[arg(long, conflicts_with = "report")]
    pub x: Option<PathBuf>,
    /// JSON report of an earlier `solve --json`; supplies `x_bar` and the claim.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Claimed margin or squared radius. From a report it defaults to the
    /// report's dual bound, less `eps` for classifiers.
    #[arg(long)]
    pub claim: Option<f64>,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.1)]
    pub delta: f64,
    #[arg(long, env = "SUBLINOPT_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Scan the whole matrix instead of sampling (classifiers).
    #[arg(long)]
    pub exact: bool,
    #[arg(long)]
    pub json: bool,
}

pub fn run(a: &VerifyArgs) -> Result<String> {
    if !(a.eps > 0.0 && a.eps < 1.0) || !(a.delta > 0.0 && a.delta < 1.0) {
        return Err(invalid("eps and delta must lie in (0, 1)"));
    }
    let problem = match a.problem {
        VerifyProblem::Perceptron => ProblemArg::Perceptron,
        VerifyProblem::Meb => ProblemArg::Meb,
    };
    let m = load(problem, &a.instance)?;
    let (x, default_claim) = match (&a.x, &a.report) {
        (Some(p), _) => (read_vector(p)?, None),
        (None, Some(p)) => {
            let r: RunReport = serde_json::from_str(&read_text(p)?).map_err(|e| Error::Parse {
                line: e.line(),
                message: e.to_string(),
            })?;
            let claim = match a.problem {
                VerifyProblem::Perceptron => r.report.dual_bound - a.eps,
                VerifyProblem::Meb => r.report.dual_bound,
            };
            (r.report.x_bar, Some(claim))
        }
        (None, None) => return Err(invalid("give a candidate with --x or --report")),
    };
    let claim = a
        .claim
        .or(default_claim)
        .ok_or_else(|| invalid("--claim is required with --x"))?;
    if x.len() != m.n_cols() {
        return Err(invalid(format!(
            "candidate has {} entries for {} columns",
            x.len(),
            m.n_cols()
        )));
    }
    let nnz = m.nnz() as u64;
    let certificate = match a.problem {
        VerifyProblem::Perceptron if a.exact => {
            if norm(&x) > 1.0 + 1e-9 {
                return Err(invalid("candidate must lie in the unit ball"));
            }
            let value = min_margin(&m, &x);
            exact_certificate(
                CertificateKind::MarginVerified,
                value >= claim - a.eps,
                claim,
                value,
                nnz,
            )
        }
        VerifyProblem::Perceptron => {
            let mut rng = rng_from_seed(a.seed);
            verify_classifier(&m, &x, claim, a.eps, a.delta, &mut rng)?
        }
        VerifyProblem::Meb => {
            let value = meb_sq_radius(&m, &x);
            exact_certificate(
                CertificateKind::MebVerified,
                value <= claim + a.eps,
                claim,
                value,
                nnz,
            )
        }
    };
    let out = VerifyReport {
        schema_version: SCHEMA_VERSION,
        problem: problem.name().to_string(),
        instance: InstanceInfo::new(&a.instance, &m),
        seed: a.seed,
        certificate,
    };
    if a.json {
        return Ok(to_json(&out));
    }
    let c = &out.certificate;
    Ok(format!(
        "{}: {} (claim {:.6}, bound {:.6}, {:?}, {} entries read)",
        out.problem,
        if c.accepted { "accepted" } else { "rejected" },
        c.claimed,
        c.verified_bound,
        c.method,
        c.entries_read
    ))
}

fn exact_certificate(
    kind: CertificateKind,
    accepted: bool,
    claimed: f64,
    value: f64,
    nnz: u64,
) -> Certificate {
    Certificate {
        kind,
        accepted,
        claimed,
        verified_bound: value,
        method: CertificateMethod::ExactScan,
        confidence: None,
        attempts: 1,
        entries_read: nnz,
    }
}
