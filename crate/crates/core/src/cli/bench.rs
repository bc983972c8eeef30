use std::fmt::Write;

use clap::Args;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sublinopt::error::{Error, Result};
use sublinopt::gen::gen_dense_unit;
use sublinopt::linalg::log_n;
use sublinopt::solvers::{sublinear_perceptron, Profile, SolverConfig};

use super::invalid;
use super::output::{to_json, SCHEMA_VERSION};

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_values_t = [500usize, 1000])]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [500usize, 1000])]
    pub d: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.2f64, 0.1])]
    pub eps: Vec<f64>,
    /// Runs per cell; seeds are `seed + run index`.
    #[arg(long, default_value_t = 3)]
    pub repeats: usize,
    #[arg(long, env = "SUBLINOPT_SEED", default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "tuned")]
    pub profile: Profile,
    /// Worker threads; defaults to the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchCell {
    pub n: usize,
    pub d: usize,
    pub eps: f64,
    pub nnz: usize,
    pub iterations: u64,
    pub median_entries_read: f64,
    pub median_wall_secs: f64,
    /// `entries_read / ((n + d) eps^-2 ln n)`.
    pub ratio: f64,
    /// `entries_read >= nnz`: the run read as much as a full scan.
    pub not_sublinear: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub schema_version: u32,
    pub profile: Profile,
    pub repeats: usize,
    pub seed: u64,
    pub cells: Vec<BenchCell>,
    pub ratio_min: f64,
    pub ratio_median: f64,
    pub ratio_max: f64,
    pub not_sublinear_cells: usize,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

pub fn run(a: &BenchArgs) -> Result<String> {
    if a.repeats == 0 || a.n.is_empty() || a.d.is_empty() || a.eps.is_empty() {
        return Err(invalid("bench needs at least one n, d, eps and repeat"));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = a.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let report = pool.install(|| measure(a))?;
    Ok(if a.json {
        to_json(&report)
    } else {
        table(&report)
    })
}

fn measure(a: &BenchArgs) -> Result<BenchReport> {
    let mut cells = Vec::new();
    for &n in &a.n {
        for &d in &a.d {
            let m = gen_dense_unit(n, d, a.seed)?.matrix;
            for &eps in &a.eps {
                let runs: Vec<(u64, f64, u64)> = (0..a.repeats as u64)
                    .into_par_iter()
                    .map(|r| {
                        let cfg = SolverConfig::new(eps, a.seed + r).with_profile(a.profile);
                        sublinear_perceptron(&m, &cfg)
                            .map(|rep| (rep.entries_read, rep.wall_time_secs, rep.iterations))
                    })
                    .collect::<Result<_>>()?;
                let entries = median(runs.iter().map(|r| r.0 as f64).collect());
                let scale = (n + d) as f64 / (eps * eps) * log_n(n);
                cells.push(BenchCell {
                    n,
                    d,
                    eps,
                    nnz: m.nnz(),
                    iterations: runs[0].2,
                    median_entries_read: entries,
                    median_wall_secs: median(runs.iter().map(|r| r.1).collect()),
                    ratio: entries / scale,
                    not_sublinear: entries >= m.nnz() as f64,
                });
            }
        }
    }
    let ratios: Vec<f64> = cells.iter().map(|c| c.ratio).collect();
    Ok(BenchReport {
        schema_version: SCHEMA_VERSION,
        profile: a.profile,
        repeats: a.repeats,
        seed: a.seed,
        ratio_min: ratios.iter().copied().fold(f64::INFINITY, f64::min),
        ratio_max: ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        ratio_median: median(ratios),
        not_sublinear_cells: cells.iter().filter(|c| c.not_sublinear).count(),
        cells,
    })
}

fn table(r: &BenchReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>7} {:>7} {:>6} {:>10} {:>10} {:>14} {:>10} {:>8}  flag",
        "n", "d", "eps", "nnz", "T", "entries", "secs", "ratio"
    );
    for c in &r.cells {
        let _ = writeln!(
            out,
            "{:>7} {:>7} {:>6.3} {:>10} {:>10} {:>14.0} {:>10.3} {:>8.4}  {}",
            c.n,
            c.d,
            c.eps,
            c.nnz,
            c.iterations,
            c.median_entries_read,
            c.median_wall_secs,
            c.ratio,
            if c.not_sublinear {
                "entries >= nnz"
            } else {
                ""
            }
        );
    }
    let _ = write!(
        out,
        "ratio entries / ((n + d) eps^-2 ln n): min {:.4}, median {:.4}, max {:.4}; {} cell(s) not sublinear",
        r.ratio_min, r.ratio_median, r.ratio_max, r.not_sublinear_cells
    );
    out
}
