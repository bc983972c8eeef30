use std::time::Instant;

use rand::Rng;

use super::config::{Schedule, SolverConfig};
use super::objective::{meb_lower_bound, meb_sq_radius, qp_upper_bound, qp_value};
use super::report::{sparse_counts, Extras, MarginOutcome, Problem, SolutionReport, TraceStep};
use crate::error::{contract, Error, Result};
use crate::linalg::sq_norm;
use crate::matrix::{AccessCounter, DataMatrix};
use crate::online::{mw_multiplier, MwState};
use crate::sampling::{rng_from_seed, L2Sampler, SolverRng};

/// A QP over the simplex, `min_{p in simplex} p^T b + |A^T p|^2`, solved
/// through its dual `max_x min_i b(i) + 2 A_i x - |x|^2`.
#[derive(Debug, Clone, Copy)]
pub struct QpInstance<'a> {
    pub a: &'a DataMatrix,
    pub b: &'a [f64],
}

impl<'a> QpInstance<'a> {
    pub fn new(a: &'a DataMatrix, b: &'a [f64]) -> Result<Self> {
        if b.len() != a.n_rows() {
            return Err(contract(format!(
                "b has {} entries for {} rows",
                b.len(),
                a.n_rows()
            )));
        }
        if let Some((i, v)) = b.iter().enumerate().find(|(_, v)| !(v.abs() <= 1.0)) {
            return Err(contract(format!("|b({i})| = {} exceeds 1", v.abs())));
        }
        Ok(Self { a, b })
    }
}

/// Per-row loss handed to MW (which minimizes it) given `A_i . x` estimated
/// by `e` and `xx = |x|^2`.
#[derive(Clone, Copy)]
enum Loss<'a> {
    /// `-((|A_i|^2 - 2e) + xx)`: MW keeps weight on far rows.
    Meb(&'a [f64]),
    /// `(b(i) + 2e) - xx`.
    Qp(&'a [f64]),
}

impl Loss<'_> {
    #[inline]
    fn at(&self, i: usize, e: f64, xx: f64) -> f64 {
        match self {
            Loss::Meb(sq) => -((sq[i] - 2.0 * e) + xx),
            Loss::Qp(b) => (b[i] + 2.0 * e) - xx,
        }
    }
}

struct DriverOutput {
    x_bar: Vec<f64>,
    counts: Vec<u64>,
    updates: u64,
    entries: u64,
    trace: Option<Vec<TraceStep>>,
    sched: Schedule,
}

/// Shared primal-dual loop for MEB and the simplex QP: follow-the-leader on
/// the sampled rows (applied with probability alpha) against MW on
/// l2-sampled per-row objective estimates.
fn driver(m: &DataMatrix, cfg: &SolverConfig, loss: Loss<'_>) -> Result<DriverOutput> {
    let n = m.n_rows();
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    let sched = cfg.meb_schedule(n)?;
    let mut st = State {
        rng: rng_from_seed(cfg.seed),
        counter: AccessCounter::new(),
        mw: MwState::new(n, sched.eta)?,
        y: vec![0.0; m.n_cols()],
        applied: 0,
        sampler: L2Sampler::default(),
        xx: 0.0,
        x_sum: vec![0.0; m.n_cols()],
        held: 0,
        undefined: 0,
        counts: vec![0; n],
        trace: cfg.retain_trace.then(Vec::new),
    };
    if cfg.batch_epochs {
        st.run_batched(m, &sched, loss);
    } else {
        st.run(m, &sched, loss);
    }
    st.flush();
    // Iterations before the first primal update have no point to average.
    let tf = (sched.iterations - st.undefined).max(1) as f64;
    Ok(DriverOutput {
        x_bar: st.x_sum.iter().map(|s| s / tf).collect(),
        counts: st.counts,
        updates: st.applied,
        entries: st.counter.total(),
        trace: st.trace,
        sched,
    })
}

struct State {
    rng: SolverRng,
    counter: AccessCounter,
    mw: MwState,
    y: Vec<f64>,
    /// Applied primal updates; `x = y / applied`.
    applied: u64,
    sampler: L2Sampler,
    xx: f64,
    x_sum: Vec<f64>,
    /// Iterations since `x` last moved.
    held: u64,
    /// Iterations that ran before any primal update.
    undefined: u64,
    counts: Vec<u64>,
    trace: Option<Vec<TraceStep>>,
}

impl State {
    fn flush(&mut self) {
        if self.applied > 0 && self.held > 0 {
            let f = self.held as f64 / self.applied as f64;
            self.x_sum
                .iter_mut()
                .zip(&self.y)
                .for_each(|(s, v)| *s += f * v);
        } else {
            self.undefined += self.held;
        }
        self.held = 0;
    }

    fn move_primal(&mut self, m: &DataMatrix, i: usize) {
        self.flush();
        for (k, a) in m.read_row(i, &mut self.counter) {
            self.y[k] += a;
        }
        self.applied += 1;
        let scale = 1.0 / self.applied as f64;
        self.sampler.rebuild(&self.y, scale);
        self.xx = self.sampler.sq_norm();
    }

    /// Computes the loss of every row at the current point from one
    /// coordinate sample and hands it to `apply`.
    fn losses(
        &mut self,
        m: &DataMatrix,
        loss: Loss<'_>,
        mut apply: impl FnMut(&mut MwState, usize, f64),
    ) -> Option<usize> {
        let n = m.n_rows();
        let xx = self.xx;
        if self.sampler.is_zero() {
            for i in 0..n {
                apply(&mut self.mw, i, loss.at(i, 0.0, xx));
            }
            return None;
        }
        let s = self.sampler.sample(&mut self.rng);
        let col = m.read_column(s.j, &mut self.counter);
        let mut next = 0;
        for (&r, &a) in col.rows.iter().zip(col.vals) {
            let r = r as usize;
            for i in next..r {
                apply(&mut self.mw, i, loss.at(i, 0.0, xx));
            }
            apply(&mut self.mw, r, loss.at(r, a * s.inv_coord, xx));
            next = r + 1;
        }
        for i in next..n {
            apply(&mut self.mw, i, loss.at(i, 0.0, xx));
        }
        Some(s.j)
    }

    fn run(&mut self, m: &DataMatrix, sched: &Schedule, loss: Loss<'_>) {
        let cap = 1.0 / sched.eta;
        for _ in 0..sched.iterations {
            let i = self.mw.sample(&mut self.rng);
            self.counts[i] += 1;
            let coin = self.rng.gen::<f64>() < sched.alpha;
            let j = self.losses(m, loss, |mw, r, q| mw.apply(r, q.clamp(-cap, cap)));
            self.mw.end_round();
            self.held += 1;
            if coin {
                self.move_primal(m, i);
            }
            if let Some(tr) = self.trace.as_mut() {
                tr.push(TraceStep {
                    i,
                    j,
                    primal_updated: coin,
                });
            }
        }
    }

    /// Epochs run until the next successful coin; every iteration of an
    /// epoch sees the same point and reuses one coordinate sample, so the
    /// epoch's MW updates collapse into one power of the multiplier.
    fn run_batched(&mut self, m: &DataMatrix, sched: &Schedule, loss: Loss<'_>) {
        let cap = 1.0 / sched.eta;
        let eta = sched.eta;
        let total = sched.iterations;
        let mut t = 0u64;
        while t < total {
            let draw = if sched.alpha >= 1.0 {
                1
            } else {
                let u: f64 = 1.0 - self.rng.gen::<f64>();
                1 + (u.ln() / (1.0 - sched.alpha).ln()).floor() as u64
            };
            let len = draw.min(total - t);
            let success = draw <= total - t;
            let power = len as i32;
            let j = self.losses(m, loss, |mw, r, q| {
                mw.scale(r, mw_multiplier(eta, q.clamp(-cap, cap)).powi(power))
            });
            self.mw.renormalize();
            let i = self.mw.sample(&mut self.rng);
            self.counts[i] += len;
            self.held += len;
            if success {
                self.move_primal(m, i);
            }
            if let Some(tr) = self.trace.as_mut() {
                tr.push(TraceStep {
                    i,
                    j,
                    primal_updated: success,
                });
            }
            t += len;
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: Problem,
    m: &DataMatrix,
    cfg: &SolverConfig,
    out: DriverOutput,
    achieved: f64,
    dual_bound: f64,
    extras: Extras,
    start: Instant,
) -> SolutionReport {
    SolutionReport {
        problem,
        n_rows: m.n_rows(),
        x_bar: out.x_bar,
        dual_counts: sparse_counts(&out.counts),
        achieved_value: achieved,
        dual_bound,
        iterations: out.sched.iterations,
        primal_updates: out.updates,
        entries_read: out.entries,
        wall_time_secs: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
        schedule: out.sched,
        trace: out.trace,
        extras,
    }
}

fn p_sparse(counts: &[u64], t: u64) -> Vec<(usize, f64)> {
    sparse_counts(counts)
        .into_iter()
        .map(|(i, c)| (i, c as f64 / t as f64))
        .collect()
}

/// Sublinear minimum enclosing ball. `achieved_value` is the exact squared
/// radius `max_i |x_bar - A_i|^2`; `dual_bound` is the lower bound certified
/// by `p_bar`.
pub fn sublinear_meb(m: &DataMatrix, cfg: &SolverConfig) -> Result<SolutionReport> {
    let start = Instant::now();
    let out = driver(m, cfg, Loss::Meb(m.row_sq_norms()))?;
    let p = p_sparse(&out.counts, out.sched.iterations);
    let achieved = meb_sq_radius(m, &out.x_bar);
    let lower = meb_lower_bound(m, &p);
    Ok(finish(
        Problem::Meb,
        m,
        cfg,
        out,
        achieved,
        lower,
        Extras::None,
        start,
    ))
}

/// Sublinear solver for the simplex QP. `achieved_value` is the exact dual
/// objective `min_i b(i) + 2 A_i x_bar - |x_bar|^2`; `dual_bound` is
/// `p_bar^T b + |A^T p_bar|^2`.
pub fn sublinear_qp_simplex(inst: &QpInstance<'_>, cfg: &SolverConfig) -> Result<SolutionReport> {
    let start = Instant::now();
    let m = inst.a;
    let out = driver(m, cfg, Loss::Qp(inst.b))?;
    let p = p_sparse(&out.counts, out.sched.iterations);
    let achieved = qp_value(m, inst.b, &out.x_bar);
    let upper = qp_upper_bound(m, inst.b, &p);
    Ok(finish(
        Problem::Qp,
        m,
        cfg,
        out,
        achieved,
        upper,
        Extras::None,
        start,
    ))
}

/// Margin estimation through the shortest vector in the hull of the rows
/// (the QP with `b = 0`, whose value is `sigma^2` when `sigma > 0`).
///
/// When the value exceeds `eps`, `x_bar` is rescaled to
/// `x_hat = beta x_bar` with `beta = min_i A_i x_bar / |x_bar|^2` and
/// `achieved_value` is the exact margin `sigma_hat` of `x_bar / |x_bar|`,
/// with `sigma_hat^2 >= sigma^2 - eps` on success. Otherwise the result is
/// inconclusive and `achieved_value` is that margin anyway (or 0).
pub fn margin_estimate(m: &DataMatrix, cfg: &SolverConfig) -> Result<SolutionReport> {
    let start = Instant::now();
    let zeros = vec![0.0; m.n_rows()];
    let out = driver(m, cfg, Loss::Qp(&zeros))?;
    let p = p_sparse(&out.counts, out.sched.iterations);
    let value = qp_value(m, &zeros, &out.x_bar);
    let upper = qp_upper_bound(m, &zeros, &p);
    let xx = sq_norm(&out.x_bar);
    let min_dot = super::objective::min_margin(m, &out.x_bar);
    let direction_margin = if xx > 0.0 { min_dot / xx.sqrt() } else { 0.0 };
    let extras = if value > cfg.eps {
        let beta = min_dot / xx;
        Extras::Margin {
            outcome: MarginOutcome::Estimated,
            dual_value: value,
            sigma_sq_hat: Some(min_dot * min_dot / xx),
            x_hat: Some(out.x_bar.iter().map(|v| beta * v).collect()),
        }
    } else {
        Extras::Margin {
            outcome: MarginOutcome::Inconclusive,
            dual_value: value,
            sigma_sq_hat: None,
            x_hat: None,
        }
    };
    // dual bound: sigma^2 <= p^T A A^T p, reported on the margin scale
    Ok(finish(
        Problem::Margin,
        m,
        cfg,
        out,
        direction_margin,
        upper.max(0.0).sqrt(),
        extras,
        start,
    ))
}
