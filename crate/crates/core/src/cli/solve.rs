use std::fmt::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use sublinopt::error::Result;
use sublinopt::kernels::{kernelized_meb, sublinear_kernel_perceptron, KernelRows, KernelSpec};
use sublinopt::matrix::{load_instance_with, LoadOptions, NormPolicy};
use sublinopt::solvers::{
    margin_estimate, sublinear_meb, sublinear_perceptron, sublinear_qp_simplex, zero_sum_game,
    QpInstance, SolutionReport,
};
use sublinopt::verification::{
    amplified_meb, amplified_perceptron, exact_game, exact_margin, exact_meb, kernel_exact_margin,
    kernel_exact_meb, las_vegas_classifier, las_vegas_kernel_meb, las_vegas_kernel_perceptron,
    las_vegas_meb, Certificate, Certified, ORACLE_TOL,
};
use sublinopt::DataMatrix;

use super::output::{
    read_meta, read_vector, sidecar_path, to_json, InstanceInfo, OracleComparison, OracleSource,
    RunReport, SCHEMA_VERSION,
};
use super::{invalid, ProblemArg, RunFlags};

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[arg(value_enum)]
    pub problem: ProblemArg,
    /// Instance file (header `n d`, then `col:value` pairs per row).
    #[arg(short = 'i', long = "instance")]
    pub instance: PathBuf,
    #[command(flatten)]
    pub run: RunFlags,
    /// Repeat until an exact check certifies the answer.
    #[arg(long)]
    pub las_vegas: bool,
    /// Kernel for the kernel problems, e.g. `poly:q=2` or `gauss:kappa=1.5`.
    #[arg(long)]
    pub kernel: Option<KernelSpec>,
    /// File of +-1 labels, one per row (kernel perceptron).
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// File of the QP linear term `b`; defaults to `b(i) = -|A_i|^2`.
    #[arg(long)]
    pub b: Option<PathBuf>,
    /// Compare against the exact oracle.
    #[arg(long)]
    pub oracle: bool,
    /// Metadata sidecar; looked up next to the instance when absent.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    /// Record `(i_t, j_t)` for every iteration.
    #[arg(long)]
    pub trace: bool,
    /// Perceptron: update the primal point with probability `1 / ln T`.
    #[arg(long)]
    pub skip_primal: bool,
    /// MEB / QP: batch MW updates between primal moves.
    #[arg(long)]
    pub batch_epochs: bool,
}

enum Outcome {
    Plain(SolutionReport),
    Certified(Certified),
}

impl Outcome {
    fn split(self) -> (SolutionReport, Option<Certificate>) {
        match self {
            Outcome::Plain(r) => (r, None),
            Outcome::Certified(c) => (c.report, Some(c.certificate)),
        }
    }
}

fn check_flags(a: &SolveArgs) -> Result<()> {
    let kernel_problem = matches!(
        a.problem,
        ProblemArg::KernelPerceptron | ProblemArg::KernelMeb
    );
    if kernel_problem && a.kernel.is_none() {
        return Err(invalid(
            "kernel problems need --kernel, e.g. --kernel poly:q=2",
        ));
    }
    if !kernel_problem && a.kernel.is_some() {
        return Err(invalid(
            "--kernel applies only to kernel-perceptron and kernel-meb",
        ));
    }
    if a.labels.is_some() && a.problem != ProblemArg::KernelPerceptron {
        return Err(invalid("--labels applies only to kernel-perceptron"));
    }
    if a.b.is_some() && a.problem != ProblemArg::Qp {
        return Err(invalid("--b applies only to qp"));
    }
    let certifiable = matches!(
        a.problem,
        ProblemArg::Perceptron
            | ProblemArg::Meb
            | ProblemArg::KernelPerceptron
            | ProblemArg::KernelMeb
    );
    if a.las_vegas && !certifiable {
        return Err(invalid(format!(
            "--las-vegas is not available for {}",
            a.problem.name()
        )));
    }
    if a.run.delta.is_some()
        && !a.las_vegas
        && !matches!(a.problem, ProblemArg::Perceptron | ProblemArg::Meb)
    {
        return Err(invalid(
            "--delta amplification is available for perceptron and meb",
        ));
    }
    Ok(())
}

pub fn load(problem: ProblemArg, path: &Path) -> Result<DataMatrix> {
    let norms = if problem == ProblemArg::Game {
        NormPolicy::Unchecked
    } else {
        NormPolicy::UnitBall
    };
    load_instance_with(path, LoadOptions { norms })
}

pub fn run(a: &SolveArgs) -> Result<String> {
    check_flags(a)?;
    let m = load(a.problem, &a.instance)?;
    let mut cfg = a.run.config();
    cfg.retain_trace = a.trace;
    cfg.skip_primal = a.skip_primal;
    cfg.batch_epochs = a.batch_epochs;
    cfg.validate()?;
    let labels = a.labels.as_deref().map(read_vector).transpose()?;
    let amplified = a.run.delta.is_some();
    let outcome =
        match (a.problem, a.kernel) {
            (ProblemArg::Perceptron, _) if a.las_vegas => {
                Outcome::Certified(las_vegas_classifier(&m, &cfg)?)
            }
            (ProblemArg::Perceptron, _) if amplified => {
                Outcome::Certified(amplified_perceptron(&m, &cfg)?)
            }
            (ProblemArg::Perceptron, _) => Outcome::Plain(sublinear_perceptron(&m, &cfg)?),
            (ProblemArg::Meb, _) if a.las_vegas => Outcome::Certified(las_vegas_meb(&m, &cfg)?),
            (ProblemArg::Meb, _) if amplified => Outcome::Certified(amplified_meb(&m, &cfg)?),
            (ProblemArg::Meb, _) => Outcome::Plain(sublinear_meb(&m, &cfg)?),
            (ProblemArg::Qp, _) => {
                let b = match &a.b {
                    Some(p) => read_vector(p)?,
                    None => m.row_sq_norms().iter().map(|v| -v).collect(),
                };
                Outcome::Plain(sublinear_qp_simplex(&QpInstance::new(&m, &b)?, &cfg)?)
            }
            (ProblemArg::Margin, _) => Outcome::Plain(margin_estimate(&m, &cfg)?),
            (ProblemArg::Game, _) => Outcome::Plain(zero_sum_game(&m, &cfg)?),
            (ProblemArg::KernelPerceptron, Some(spec)) if a.las_vegas => Outcome::Certified(
                las_vegas_kernel_perceptron(&m, &spec, labels.as_deref(), &cfg)?,
            ),
            (ProblemArg::KernelPerceptron, Some(spec)) => Outcome::Plain(
                sublinear_kernel_perceptron(&m, &spec, labels.as_deref(), &cfg)?,
            ),
            (ProblemArg::KernelMeb, Some(spec)) if a.las_vegas => {
                Outcome::Certified(las_vegas_kernel_meb(&m, &spec, &cfg)?)
            }
            (ProblemArg::KernelMeb, Some(spec)) => Outcome::Plain(kernelized_meb(&m, &spec, &cfg)?),
            (ProblemArg::KernelPerceptron | ProblemArg::KernelMeb, None) => {
                unreachable!("checked above")
            }
        };
    let (report, certificate) = outcome.split();
    let oracle = if a.oracle {
        Some(exact_oracle(
            a,
            &m,
            labels.as_deref(),
            report.achieved_value,
        )?)
    } else {
        metadata_oracle(a, report.achieved_value)?
    };
    let run = RunReport {
        schema_version: SCHEMA_VERSION,
        problem: a.problem.name().to_string(),
        instance: InstanceInfo::new(&a.instance, &m),
        config: cfg,
        kernel: a.kernel,
        report,
        certificate,
        oracle,
    };
    Ok(if a.run.json {
        to_json(&run)
    } else {
        summary(&run)
    })
}

fn comparison(
    source: OracleSource,
    value: f64,
    lower: f64,
    upper: f64,
    achieved: f64,
) -> OracleComparison {
    OracleComparison {
        source,
        value,
        lower,
        upper,
        achieved_minus_optimum: achieved - value,
    }
}

fn exact_oracle(
    a: &SolveArgs,
    m: &DataMatrix,
    labels: Option<&[f64]>,
    achieved: f64,
) -> Result<OracleComparison> {
    let exact = OracleSource::Exact;
    Ok(match a.problem {
        ProblemArg::Perceptron => {
            let o = exact_margin(m, ORACLE_TOL)?;
            comparison(exact, o.value, o.lower, o.upper, achieved)
        }
        ProblemArg::Meb => {
            let o = exact_meb(m, ORACLE_TOL)?;
            comparison(exact, o.sq_radius, o.lower, o.sq_radius, achieved)
        }
        ProblemArg::Game => {
            let o = exact_game(m, 1e-4)?;
            comparison(exact, o.value, o.lower, o.upper, achieved)
        }
        ProblemArg::KernelPerceptron => {
            let spec = a.kernel.expect("checked");
            let o = kernel_exact_margin(&KernelRows::new(m, &spec, labels)?, ORACLE_TOL)?;
            comparison(exact, o.value, o.lower, o.upper, achieved)
        }
        ProblemArg::KernelMeb => {
            let spec = a.kernel.expect("checked");
            let o = kernel_exact_meb(&KernelRows::new(m, &spec, None)?, ORACLE_TOL)?;
            comparison(exact, o.sq_radius, o.lower, o.sq_radius, achieved)
        }
        ProblemArg::Qp | ProblemArg::Margin => {
            return Err(invalid(format!("no exact oracle for {}", a.problem.name())))
        }
    })
}

/// The generator's recorded optimum, when it describes this problem.
fn metadata_oracle(a: &SolveArgs, achieved: f64) -> Result<Option<OracleComparison>> {
    let path = match &a.meta {
        Some(p) => p.clone(),
        None => {
            let p = sidecar_path(&a.instance);
            if !p.exists() {
                return Ok(None);
            }
            p
        }
    };
    let meta = read_meta(&path)?;
    let matches = match a.problem {
        ProblemArg::Perceptron => !meta.family.starts_with("meb") && meta.family != "game",
        ProblemArg::Meb => meta.family.starts_with("meb"),
        _ => false,
    };
    Ok(match (matches, meta.optimum) {
        (true, Some(v)) => Some(comparison(OracleSource::Metadata, v, v, v, achieved)),
        _ => None,
    })
}

fn summary(r: &RunReport) -> String {
    let s = &r.report;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{} on {} ({} x {}, nnz {})",
        r.problem,
        r.instance.path.display(),
        r.instance.n,
        r.instance.d,
        r.instance.nnz
    );
    let _ = writeln!(out, "achieved value  {:.6}", s.achieved_value);
    let _ = writeln!(out, "dual bound      {:.6}", s.dual_bound);
    let _ = writeln!(
        out,
        "iterations      {} (eta {:.3e}, alpha {:.3})",
        s.iterations, s.schedule.eta, s.schedule.alpha
    );
    let _ = writeln!(
        out,
        "entries read    {} ({:.3} of nnz)",
        s.entries_read,
        s.entries_read as f64 / r.instance.nnz.max(1) as f64
    );
    let _ = writeln!(out, "wall time       {:.3} s", s.wall_time_secs);
    if let Some(c) = &r.certificate {
        let _ = writeln!(
            out,
            "certificate     {:?}, accepted {}, bound {:.6}, attempts {}",
            c.kind, c.accepted, c.verified_bound, c.attempts
        );
    }
    if let Some(o) = &r.oracle {
        let _ = writeln!(
            out,
            "optimum         {:.6} ({:?}), achieved - optimum {:+.6}",
            o.value, o.source, o.achieved_minus_optimum
        );
    }
    out.trim_end().to_string()
}
