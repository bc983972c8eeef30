use std::time::Instant;

use rand::Rng;

use super::norm::{choose_route, KernelPrimalState};
use super::spec::{KernelRows, KernelSpec, NormRoute};
use crate::error::{Error, Result};
use crate::matrix::{AccessCounter, DataMatrix};
use crate::online::MwState;
use crate::sampling::{clip, rng_from_seed};
use crate::solvers::report::sparse_counts;
use crate::solvers::{Extras, Problem, SolutionReport, SolverConfig, TraceStep};

/// `x = sum_k coef_k Psi(row_k)` over distinct rows, evaluated exactly.
struct KernelPoint<'r, 'a> {
    rows: &'r KernelRows<'a>,
    support: Vec<usize>,
    coef: Vec<f64>,
    exact_calls: u64,
}

impl<'r, 'a> KernelPoint<'r, 'a> {
    fn new(rows: &'r KernelRows<'a>, coef_by_row: &[f64]) -> Self {
        let support: Vec<usize> = (0..coef_by_row.len())
            .filter(|&r| coef_by_row[r] != 0.0)
            .collect();
        let coef = support.iter().map(|&r| coef_by_row[r]).collect();
        Self {
            rows,
            support,
            coef,
            exact_calls: 0,
        }
    }

    fn scale(&mut self, f: f64) {
        self.coef.iter_mut().for_each(|c| *c *= f);
    }

    /// `<x, Psi(A_i)>` (labeled).
    fn inner(&mut self, i: usize) -> f64 {
        self.exact_calls += self.support.len() as u64;
        self.support
            .iter()
            .zip(&self.coef)
            .map(|(&r, &c)| c * self.rows.exact(r, i))
            .sum()
    }

    fn sq_norm(&mut self) -> f64 {
        quad_form(self.rows, &self.support, &self.coef, &mut self.exact_calls)
    }
}

/// `sum_{a, b} w_a w_b k(rows_a, rows_b)`.
fn quad_form(rows: &KernelRows<'_>, idx: &[usize], w: &[f64], calls: &mut u64) -> f64 {
    let mut s = 0.0;
    for a in 0..idx.len() {
        s += w[a] * w[a] * rows.diag(idx[a]);
        for b in 0..a {
            s += 2.0 * w[a] * w[b] * rows.exact(idx[a], idx[b]);
        }
    }
    *calls += (idx.len() * (idx.len() + 1) / 2) as u64;
    s.max(0.0)
}

fn p_bar(counts: &[u64], t: u64) -> (Vec<usize>, Vec<f64>) {
    sparse_counts(counts)
        .into_iter()
        .map(|(i, c)| (i, c as f64 / t as f64))
        .unzip()
}

/// Sublinear kernel perceptron: the sublinear perceptron with the primal
/// iterate kept implicitly as a sum of feature vectors and the per-row
/// products replaced by running sums of kernel estimates.
///
/// `labels` (optional, `+-1`) make the kernel between rows `a, b` equal to
/// `y_a y_b k(A_a, A_b)`, i.e. the rows are `y_i Psi(A_i)`.
/// `achieved_value` is the exact margin of the averaged point after
/// projection to the unit ball; `dual_bound` is `|sum_i p_i y_i Psi(A_i)|`.
pub fn sublinear_kernel_perceptron(
    m: &DataMatrix,
    spec: &KernelSpec,
    labels: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<SolutionReport> {
    let start = Instant::now();
    let n = m.n_rows();
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    let rows = KernelRows::new(m, spec, labels)?;
    let sched = cfg.perceptron_schedule(n)?;
    let t_total = sched.iterations;
    let route = choose_route(&rows, t_total, cfg.eps, cfg.delta);
    let mut state = KernelPrimalState::new(rows, t_total, route, cfg.eps, cfg.delta)?;
    let mut rng = rng_from_seed(cfg.seed);
    let mut counter = AccessCounter::new();
    let mut mw = MwState::new(n, sched.eta)?;
    let cap = 1.0 / sched.eta;
    let mut counts = vec![0u64; n];
    let mut trace = cfg
        .retain_trace
        .then(|| Vec::with_capacity(t_total as usize));

    // Support element added at iteration tau contributes 1/m_t for every
    // later t: coef = total - prefix(tau), accumulated per row.
    let mut prefix = 0.0;
    let mut minus_prefix = vec![0.0; n];
    let mut added = vec![0u64; n];

    for _ in 0..t_total {
        let i = mw.sample(&mut rng);
        counts[i] += 1;
        if !state.support().is_empty() {
            for r in 0..n {
                mw.apply(r, clip(state.cached_ell2(r), cap));
            }
        }
        mw.end_round();
        prefix += 1.0 / state.scale();
        state.push(i, &mut rng, &mut counter);
        minus_prefix[i] -= prefix;
        added[i] += 1;
        if let Some(tr) = trace.as_mut() {
            tr.push(TraceStep {
                i,
                j: None,
                primal_updated: true,
            });
        }
    }

    let tf = t_total as f64;
    let norm_factor = tf * (2.0 * tf).sqrt();
    let coef_by_row: Vec<f64> = (0..n)
        .map(|r| (added[r] as f64 * prefix + minus_prefix[r]).max(0.0) / norm_factor)
        .collect();
    let mut point = KernelPoint::new(&rows, &coef_by_row);
    let raw_sq = point.sq_norm();
    let proj = raw_sq.sqrt().max(1.0);
    point.scale(1.0 / proj);
    let sq_norm = raw_sq / (proj * proj);
    let achieved = (0..n).map(|i| point.inner(i)).fold(f64::INFINITY, f64::min);

    let mut exact_calls = point.exact_calls;
    let (p_idx, p_w) = p_bar(&counts, t_total);
    let dual_bound = quad_form(&rows, &p_idx, &p_w, &mut exact_calls).sqrt();

    let norm_bias = (route == NormRoute::Estimate).then(|| {
        let (idx, w): (Vec<usize>, Vec<f64>) = (0..n)
            .filter(|&r| added[r] > 0)
            .map(|r| (r, added[r] as f64 / (2.0 * tf).sqrt()))
            .unzip();
        let exact = quad_form(&rows, &idx, &w, &mut exact_calls).sqrt();
        (state.y_norm() - exact).abs()
    });

    let coefficients = point
        .support
        .iter()
        .zip(&point.coef)
        .map(|(&r, &c)| c * rows.label(r))
        .collect();
    Ok(SolutionReport {
        problem: Problem::KernelPerceptron,
        n_rows: n,
        x_bar: Vec::new(),
        dual_counts: sparse_counts(&counts),
        achieved_value: achieved,
        dual_bound,
        iterations: t_total,
        primal_updates: t_total,
        entries_read: counter.total(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
        schedule: sched,
        trace,
        extras: Extras::Kernel {
            support: point.support.clone(),
            coefficients,
            sq_norm,
            exact_kernel_calls: exact_calls + state.exact_calls(),
            estimator_calls: state.estimator_calls(),
            norm_bias,
        },
    })
}

/// Minimum enclosing ball of `Psi(A_1), ..., Psi(A_n)`.
///
/// The primal point is the mean of the rows sampled at successful coin
/// flips; `<x, Psi(A_i)>` and `|x|^2` come from running sums of kernel
/// estimates updated only when the point moves. `achieved_value` is the
/// exact squared feature-space radius of the averaged point and
/// `dual_bound` the lower bound `sum_i p_i k(A_i, A_i) - |sum_i p_i Psi(A_i)|^2`.
pub fn kernelized_meb(
    m: &DataMatrix,
    spec: &KernelSpec,
    cfg: &SolverConfig,
) -> Result<SolutionReport> {
    let start = Instant::now();
    let n = m.n_rows();
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    let rows = KernelRows::new(m, spec, None)?;
    let sched = cfg.meb_schedule(n)?;
    let t_total = sched.iterations;
    let mut rng = rng_from_seed(cfg.seed);
    let mut counter = AccessCounter::new();
    let mut mw = MwState::new(n, sched.eta)?;
    let cap = 1.0 / sched.eta;
    let diag: Vec<f64> = (0..n).map(|i| rows.diag(i)).collect();
    let mut sums = vec![0.0; n];
    let mut g = 0.0;
    let mut support: Vec<usize> = Vec::new();
    // held iterations at each support size k >= 1
    let mut level_weight: Vec<u64> = vec![0];
    let mut held = 0u64;
    let mut undefined = 0u64;
    let mut estimator_calls = 0u64;
    let mut counts = vec![0u64; n];
    let mut trace = cfg.retain_trace.then(Vec::new);

    for _ in 0..t_total {
        let i = mw.sample(&mut rng);
        counts[i] += 1;
        let coin = rng.gen::<f64>() < sched.alpha;
        let k = support.len() as f64;
        for r in 0..n {
            let v = if support.is_empty() {
                diag[r]
            } else {
                diag[r] - 2.0 * sums[r] / k + g / (k * k)
            };
            mw.apply(r, clip(-v, cap));
        }
        mw.end_round();
        held += 1;
        if coin {
            if support.is_empty() {
                undefined += held;
            } else {
                level_weight[support.len()] += held;
            }
            held = 0;
            g += 2.0 * sums[i] + diag[i];
            let prep = rows.prepare(i, &mut counter);
            for (r, s) in sums.iter_mut().enumerate() {
                *s += rows.estimate(&prep, r, &mut rng, &mut counter);
            }
            estimator_calls += n as u64;
            support.push(i);
            level_weight.push(0);
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(TraceStep {
                i,
                j: None,
                primal_updated: coin,
            });
        }
    }
    if support.is_empty() {
        undefined += held;
    } else {
        level_weight[support.len()] += held;
    }

    // x_bar = sum_l Psi(a_l) sum_{k >= l} w_k / k
    let denom = (t_total - undefined).max(1) as f64;
    let mut coef_by_row = vec![0.0; n];
    let mut suffix = 0.0;
    for l in (1..=support.len()).rev() {
        suffix += level_weight[l] as f64 / (l as f64 * denom);
        coef_by_row[support[l - 1]] += suffix;
    }
    let mut point = KernelPoint::new(&rows, &coef_by_row);
    let xx = point.sq_norm();
    let achieved = (0..n)
        .map(|i| (diag[i] - 2.0 * point.inner(i)) + xx)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    let mut exact_calls = point.exact_calls;
    let (p_idx, p_w) = p_bar(&counts, t_total);
    let spread: f64 = p_idx.iter().zip(&p_w).map(|(&i, &w)| w * diag[i]).sum();
    let lower = spread - quad_form(&rows, &p_idx, &p_w, &mut exact_calls);

    Ok(SolutionReport {
        problem: Problem::KernelMeb,
        n_rows: n,
        x_bar: Vec::new(),
        dual_counts: sparse_counts(&counts),
        achieved_value: achieved,
        dual_bound: lower,
        iterations: t_total,
        primal_updates: support.len() as u64,
        entries_read: counter.total(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
        schedule: sched,
        trace,
        extras: Extras::Kernel {
            support: point.support.clone(),
            coefficients: point.coef.clone(),
            sq_norm: xx,
            exact_kernel_calls: exact_calls,
            estimator_calls,
            norm_bias: None,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::Profile;

    fn tuned(eps: f64, seed: u64) -> SolverConfig {
        SolverConfig::new(eps, seed).with_profile(Profile::Tuned)
    }

    #[test]
    fn linear_kernel_single_point() {
        let m = DataMatrix::from_dense(&[vec![1.0, 0.0]]).unwrap();
        let spec = KernelSpec::polynomial(1).unwrap();
        let r = sublinear_kernel_perceptron(&m, &spec, None, &tuned(0.1, 1)).unwrap();
        assert!(r.achieved_value >= 0.9, "{}", r.achieved_value);
        assert!(r.achieved_value <= r.dual_bound + 1e-9);
    }

    #[test]
    fn identical_rows_zero_radius() {
        let m = DataMatrix::from_dense(&vec![vec![0.6, 0.8]; 3]).unwrap();
        let spec = KernelSpec::polynomial(2).unwrap();
        let r = kernelized_meb(&m, &spec, &tuned(0.1, 2)).unwrap();
        assert!(r.achieved_value.abs() < 1e-9, "{}", r.achieved_value);
    }

    #[test]
    fn orthonormal_pair_half_radius() {
        let m = DataMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let spec = KernelSpec::polynomial(2).unwrap();
        let r = kernelized_meb(&m, &spec, &tuned(0.1, 3)).unwrap();
        assert!(r.achieved_value >= 0.5 - 1e-9);
        assert!(r.achieved_value <= 0.5 + 0.1, "{}", r.achieved_value);
        assert!(r.dual_bound <= 0.5 + 1e-9);
    }
}
