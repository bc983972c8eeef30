use std::time::Instant;

use super::config::SolverConfig;
use super::report::{sparse_counts, Extras, Problem, SolutionReport, TraceStep};
use crate::error::{contract, Error, Result};
use crate::linalg::log_n;
use crate::matrix::{AccessCounter, DataMatrix};
use crate::online::{MwState, OgdState, OgdVariant};
use crate::sampling::{rng_from_seed, sample_weighted, L2Sampler, SolverRng};

/// Primal learner over the domain `K` for costs `c_i` that it maximizes.
pub trait LowRegretLearner {
    fn dim(&self) -> usize;

    /// Smallest horizon `T` with `R(T) / T <= eps`.
    fn iterations_for(&self, eps: f64) -> u64;

    /// Resets the learner for a run of `horizon` steps.
    fn start(&mut self, horizon: u64) -> Result<()>;

    fn point(&self) -> &[f64];

    /// Feeds the cost `c_i` chosen by the dual player.
    fn observe(&mut self, i: usize, counter: &mut AccessCounter) -> Result<()>;
}

/// Unbiased, variance-bounded estimates of every `c_i(x)`.
pub trait CostSampler {
    fn n_costs(&self) -> usize;

    /// Declared bound on the variance of each estimate; must be at most 1.
    fn variance_bound(&self) -> f64;

    /// Visits `(i, estimate)` for every row whose estimate is nonzero, and
    /// returns the sampled coordinate if there was one.
    fn sample(
        &mut self,
        x: &[f64],
        rng: &mut SolverRng,
        counter: &mut AccessCounter,
        visit: &mut dyn FnMut(usize, f64),
    ) -> Option<usize>;

    /// Exact `c_i(x)`, uncounted.
    fn exact(&self, i: usize, x: &[f64]) -> f64;

    /// Exact bound on `max_x min_i c_i(x)` certified by the dual average.
    fn dual_bound(&self, p: &[(usize, f64)]) -> f64;
}

/// Generic sublinear primal-dual loop: `T = max(T_eps(LRA), C ln n / eps^2)`
/// iterations of MW on sampled costs against the learner.
pub fn generic_primal_dual<L, S>(
    learner: &mut L,
    sampler: &mut S,
    cfg: &SolverConfig,
) -> Result<SolutionReport>
where
    L: LowRegretLearner + ?Sized,
    S: CostSampler + ?Sized,
{
    let start = Instant::now();
    let n = sampler.n_costs();
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    let vb = sampler.variance_bound();
    if !(vb <= 1.0 + 1e-12) {
        return Err(Error::Config(format!(
            "cost sampler declares variance {vb}, the framework needs at most 1"
        )));
    }
    let sched = cfg.generic_schedule(n, learner.iterations_for(cfg.eps))?;
    let t_total = sched.iterations;
    learner.start(t_total)?;
    let d = learner.dim();
    let mut rng = rng_from_seed(cfg.seed);
    let mut counter = AccessCounter::new();
    let mut mw = MwState::new(n, sched.eta)?;
    let cap = 1.0 / sched.eta;
    let mut counts = vec![0u64; n];
    let mut x_sum = vec![0.0; d];
    let mut trace = cfg.retain_trace.then(Vec::new);

    for _ in 0..t_total {
        let i = mw.sample(&mut rng);
        counts[i] += 1;
        let x = learner.point();
        x_sum.iter_mut().zip(x).for_each(|(s, v)| *s += v);
        let j = sampler.sample(x, &mut rng, &mut counter, &mut |r, v| {
            mw.apply(r, v.clamp(-cap, cap))
        });
        mw.end_round();
        learner.observe(i, &mut counter)?;
        if let Some(tr) = trace.as_mut() {
            tr.push(TraceStep {
                i,
                j,
                primal_updated: true,
            });
        }
    }

    let tf = t_total as f64;
    let x_bar: Vec<f64> = x_sum.iter().map(|s| s / tf).collect();
    let dual_counts = sparse_counts(&counts);
    let p: Vec<(usize, f64)> = dual_counts
        .iter()
        .map(|&(i, c)| (i, c as f64 / tf))
        .collect();
    let achieved = (0..n)
        .map(|i| sampler.exact(i, &x_bar))
        .fold(f64::INFINITY, f64::min);
    Ok(SolutionReport {
        problem: Problem::Generic,
        n_rows: n,
        dual_bound: sampler.dual_bound(&p),
        achieved_value: achieved,
        x_bar,
        dual_counts,
        iterations: t_total,
        primal_updates: t_total,
        entries_read: counter.total(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
        schedule: sched,
        trace,
        extras: Extras::None,
    })
}

/// Lazy-projection OGD on the unit ball for the linear costs `A_i . x`.
#[derive(Debug, Clone)]
pub struct BallLearner<'a> {
    m: &'a DataMatrix,
    ogd: OgdState,
    grad: Vec<f64>,
}

impl<'a> BallLearner<'a> {
    pub fn new(m: &'a DataMatrix) -> Result<Self> {
        Ok(Self {
            m,
            ogd: OgdState::new(m.n_cols(), 1, OgdVariant::Lazy)?,
            grad: vec![0.0; m.n_cols()],
        })
    }
}

impl LowRegretLearner for BallLearner<'_> {
    fn dim(&self) -> usize {
        self.m.n_cols()
    }

    /// `2 sqrt(2T) <= eps T`.
    fn iterations_for(&self, eps: f64) -> u64 {
        (8.0 / (eps * eps)).ceil() as u64
    }

    fn start(&mut self, horizon: u64) -> Result<()> {
        self.ogd = OgdState::new(self.m.n_cols(), horizon, OgdVariant::Lazy)?;
        Ok(())
    }

    fn point(&self) -> &[f64] {
        self.ogd.x()
    }

    fn observe(&mut self, i: usize, counter: &mut AccessCounter) -> Result<()> {
        self.grad.iter_mut().for_each(|g| *g = 0.0);
        for (k, a) in self.m.read_row(i, counter) {
            self.grad[k] = a;
        }
        self.ogd.step(&self.grad)
    }
}

/// l2-sampling estimates of `A_i . x` for every row from one column read.
#[derive(Debug, Clone)]
pub struct L2CostSampler<'a> {
    m: &'a DataMatrix,
    sampler: L2Sampler,
}

impl<'a> L2CostSampler<'a> {
    pub fn new(m: &'a DataMatrix) -> Self {
        Self {
            m,
            sampler: L2Sampler::default(),
        }
    }
}

impl CostSampler for L2CostSampler<'_> {
    fn n_costs(&self) -> usize {
        self.m.n_rows()
    }

    fn variance_bound(&self) -> f64 {
        1.0
    }

    fn sample(
        &mut self,
        x: &[f64],
        rng: &mut SolverRng,
        counter: &mut AccessCounter,
        visit: &mut dyn FnMut(usize, f64),
    ) -> Option<usize> {
        self.sampler.rebuild(x, 1.0);
        if self.sampler.is_zero() {
            return None;
        }
        let s = self.sampler.sample(rng);
        for (i, a) in self.m.read_column(s.j, counter).iter() {
            visit(i, a * s.inv_coord);
        }
        Some(s.j)
    }

    fn exact(&self, i: usize, x: &[f64]) -> f64 {
        self.m.row_dot(i, x)
    }

    fn dual_bound(&self, p: &[(usize, f64)]) -> f64 {
        super::objective::dual_norm(self.m, p)
    }
}

/// Multiplicative weights over the columns (mixed strategies of the column
/// player), maximizing `A_i . x`.
#[derive(Debug, Clone)]
pub struct SimplexLearner<'a> {
    m: &'a DataMatrix,
    mw: MwState,
    x: Vec<f64>,
}

impl<'a> SimplexLearner<'a> {
    pub fn new(m: &'a DataMatrix) -> Result<Self> {
        let d = m.n_cols();
        if d == 0 {
            return Err(contract("simplex learner over zero columns"));
        }
        Ok(Self {
            m,
            mw: MwState::new(d, 1.0)?,
            x: vec![1.0 / d as f64; d],
        })
    }
}

impl LowRegretLearner for SimplexLearner<'_> {
    fn dim(&self) -> usize {
        self.m.n_cols()
    }

    /// `2 sqrt(T ln d) <= eps T`.
    fn iterations_for(&self, eps: f64) -> u64 {
        (4.0 * log_n(self.m.n_cols()) / (eps * eps)).ceil() as u64
    }

    fn start(&mut self, horizon: u64) -> Result<()> {
        let d = self.m.n_cols();
        let eta = (log_n(d) / horizon as f64).sqrt().min(1.0);
        self.mw = MwState::new(d, eta)?;
        self.x = self.mw.probabilities();
        Ok(())
    }

    fn point(&self) -> &[f64] {
        &self.x
    }

    fn observe(&mut self, i: usize, counter: &mut AccessCounter) -> Result<()> {
        for (j, a) in self.m.read_row(i, counter) {
            self.mw.apply(j, -a);
        }
        self.mw.end_round();
        let total = self.mw.total();
        self.x
            .iter_mut()
            .zip(self.mw.weights())
            .for_each(|(x, w)| *x = w / total);
        Ok(())
    }
}

/// l1-sampling: draw `j ~ x` and return `A_i(j)` for every row.
#[derive(Debug, Clone)]
pub struct L1CostSampler<'a> {
    m: &'a DataMatrix,
}

impl<'a> L1CostSampler<'a> {
    pub fn new(m: &'a DataMatrix) -> Self {
        Self { m }
    }
}

impl CostSampler for L1CostSampler<'_> {
    fn n_costs(&self) -> usize {
        self.m.n_rows()
    }

    fn variance_bound(&self) -> f64 {
        1.0
    }

    fn sample(
        &mut self,
        x: &[f64],
        rng: &mut SolverRng,
        counter: &mut AccessCounter,
        visit: &mut dyn FnMut(usize, f64),
    ) -> Option<usize> {
        let j = sample_weighted(x, 1.0, rng);
        for (i, a) in self.m.read_column(j, counter).iter() {
            visit(i, a);
        }
        Some(j)
    }

    fn exact(&self, i: usize, x: &[f64]) -> f64 {
        self.m.row_dot(i, x)
    }

    /// `max_j (p^T A)_j`.
    fn dual_bound(&self, p: &[(usize, f64)]) -> f64 {
        super::objective::dual_point(self.m, p)
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Zero-sum game `max_{x in simplex_d} min_{p in simplex_n} p^T A x` with
/// payoffs in `[-1, 1]`, by multiplicative weights on both sides.
///
/// `achieved_value` is `min_i A_i x_bar`, `dual_bound` is
/// `max_j (p_bar^T A)_j`; the game value lies between them.
pub fn zero_sum_game(payoff: &DataMatrix, cfg: &SolverConfig) -> Result<SolutionReport> {
    for i in 0..payoff.n_rows() {
        if let Some((j, v)) = payoff.row_entries(i).find(|(_, v)| !(v.abs() <= 1.0)) {
            return Err(contract(format!(
                "payoff ({i}, {j}) = {v} lies outside [-1, 1]"
            )));
        }
    }
    let mut learner = SimplexLearner::new(payoff)?;
    let mut sampler = L1CostSampler::new(payoff);
    let mut r = generic_primal_dual(&mut learner, &mut sampler, cfg)?;
    r.problem = Problem::Game;
    r.extras = Extras::Game {
        lower: r.achieved_value,
        upper: r.dual_bound,
        gap: r.dual_bound - r.achieved_value,
    };
    Ok(r)
}

/// The ball / linear-cost / lazy-OGD / l2-sampling instantiation, equivalent
/// in guarantee to the sublinear perceptron.
pub fn generic_perceptron(m: &DataMatrix, cfg: &SolverConfig) -> Result<SolutionReport> {
    let mut learner = BallLearner::new(m)?;
    let mut sampler = L2CostSampler::new(m);
    generic_primal_dual(&mut learner, &mut sampler, cfg)
}
