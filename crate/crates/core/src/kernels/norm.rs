use rand::Rng;

use super::spec::{KernelRows, NormRoute};
use crate::error::{invalid, Result};
use crate::matrix::AccessCounter;
use crate::sampling::clip;

/// Stepwise estimate of `|y_t|` for `y_t = sum_{tau <= t} Psi(a_tau) / sqrt(2T)`.
///
/// With `Y_t = 2T |y_t|^2 / t^2`, step `t` estimates the `2t - 1` new
/// kernel summands `k(a_t, a_t) + 2 sum_{tau < t} k(a_t, a_tau)` from
/// `n_t = ceil(N_Y / t^2)` rounds of draws, each draw clipped to the clip
/// level. Earlier steps are never recomputed.
#[derive(Debug, Clone)]
pub struct NormEstimator {
    horizon: u64,
    n_y: u64,
    clip_level: f64,
    y_hat: Vec<f64>,
    sum: f64,
    calls: u64,
}

impl NormEstimator {
    /// `N_Y = ceil((8/3) ln(1/delta) T^2 / eps^2)`; clip level `T / eps`
    /// unless overridden.
    pub fn new(horizon: u64, eps: f64, delta: f64, clip_level: Option<f64>) -> Result<Self> {
        if horizon == 0 {
            return Err(invalid("norm estimator needs a positive horizon"));
        }
        if !(eps > 0.0 && delta > 0.0 && delta < 1.0) {
            return Err(invalid("norm estimator needs eps > 0 and delta in (0, 1)"));
        }
        let t = horizon as f64;
        let n_y = ((8.0 / 3.0) * (1.0 / delta).ln() * t * t / (eps * eps)).ceil() as u64;
        Ok(Self {
            horizon,
            n_y: n_y.max(1),
            clip_level: clip_level.unwrap_or(t / eps),
            y_hat: Vec::new(),
            sum: 0.0,
            calls: 0,
        })
    }

    pub fn n_y(&self) -> u64 {
        self.n_y
    }

    /// `n_t` for step `t >= 1`.
    pub fn rounds_at(&self, t: u64) -> u64 {
        self.n_y.div_ceil(t * t).max(1)
    }

    /// Expected estimator calls over all `T` steps.
    pub fn planned_calls(horizon: u64, eps: f64, delta: f64) -> f64 {
        let t = horizon as f64;
        let n_y = ((8.0 / 3.0) * (1.0 / delta).ln() * t * t / (eps * eps)).ceil();
        (1..=horizon)
            .map(|s| (n_y / (s * s) as f64).ceil().max(1.0) * (2 * s - 1) as f64)
            .sum()
    }

    /// Steps taken so far.
    pub fn steps(&self) -> usize {
        self.y_hat.len()
    }

    pub fn calls(&self) -> u64 {
        self.calls
    }

    /// `Y~_t = sum_{tau <= t} Y^_tau / t^2`.
    pub fn y_tilde(&self) -> f64 {
        let t = self.y_hat.len() as f64;
        if t == 0.0 {
            0.0
        } else {
            self.sum / (t * t)
        }
    }

    /// `|y_t| = sqrt(Y~_t t^2 / 2T)`, floored at zero.
    pub fn y_norm(&self) -> f64 {
        (self.sum.max(0.0) / (2.0 * self.horizon as f64)).sqrt()
    }

    /// Adds the last element of `support` and returns the new `Y~_t`.
    pub fn push<R: Rng + ?Sized>(
        &mut self,
        rows: &KernelRows<'_>,
        support: &[usize],
        rng: &mut R,
        counter: &mut AccessCounter,
    ) -> f64 {
        let t = support.len();
        assert!(
            t == self.y_hat.len() + 1,
            "norm estimator pushed out of order"
        );
        let a_t = support[t - 1];
        let prep = rows.prepare(a_t, counter);
        let rounds = self.rounds_at(t as u64);
        let c = self.clip_level;
        let mut acc = 0.0;
        for _ in 0..rounds {
            let mut draw = clip(rows.estimate(&prep, a_t, rng, counter), c);
            for &a in &support[..t - 1] {
                draw += clip(rows.estimate(&prep, a, rng, counter), c);
                draw += clip(rows.estimate(&prep, a, rng, counter), c);
            }
            acc += draw;
        }
        self.calls += rounds * (2 * t as u64 - 1);
        let y = acc / rounds as f64;
        self.y_hat.push(y);
        self.sum += y;
        self.y_tilde()
    }
}

/// `|y_t|` from the estimator's current state.
pub fn estimate_y_norm(est: &NormEstimator) -> f64 {
    est.y_norm()
}

#[derive(Debug, Clone)]
enum NormTracker {
    /// `G = sum_{tau, tau'} k(a_tau, a_tau')` kept exactly over distinct
    /// support rows.
    Exact {
        g: f64,
        counts: Vec<u64>,
        distinct: Vec<usize>,
    },
    Estimate(NormEstimator),
}

/// The implicit kernel iterate `y_t = sum_{tau <= t} Psi(a_tau) / sqrt(2T)`
/// with per-row running sums `S_i = sum_tau k~(a_tau, A_i)`.
#[derive(Debug, Clone)]
pub struct KernelPrimalState<'a> {
    rows: KernelRows<'a>,
    horizon: u64,
    support: Vec<usize>,
    sums: Vec<f64>,
    norm: NormTracker,
    estimator_calls: u64,
    exact_calls: u64,
}

impl<'a> KernelPrimalState<'a> {
    /// `route` must be `Exact` or `Estimate`; `Auto` is resolved by
    /// [`choose_route`].
    pub fn new(
        rows: KernelRows<'a>,
        horizon: u64,
        route: NormRoute,
        eps: f64,
        delta: f64,
    ) -> Result<Self> {
        let norm = match route {
            NormRoute::Estimate => NormTracker::Estimate(NormEstimator::new(
                horizon,
                eps,
                delta,
                rows.spec.clip_level,
            )?),
            NormRoute::Exact | NormRoute::Auto => NormTracker::Exact {
                g: 0.0,
                counts: vec![0; rows.n()],
                distinct: Vec::new(),
            },
        };
        Ok(Self {
            sums: vec![0.0; rows.n()],
            rows,
            horizon,
            support: Vec::new(),
            norm,
            estimator_calls: 0,
            exact_calls: 0,
        })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn estimator_calls(&self) -> u64 {
        self.estimator_calls
            + match &self.norm {
                NormTracker::Estimate(e) => e.calls(),
                NormTracker::Exact { .. } => 0,
            }
    }

    pub fn exact_calls(&self) -> u64 {
        self.exact_calls
    }

    /// Current `|y_t|` (exact or estimated, depending on the route).
    pub fn y_norm(&self) -> f64 {
        match &self.norm {
            NormTracker::Exact { g, .. } => (g.max(0.0) / (2.0 * self.horizon as f64)).sqrt(),
            NormTracker::Estimate(e) => e.y_norm(),
        }
    }

    /// `max(1, |y_t|)`, the divisor giving `x_t`.
    pub fn scale(&self) -> f64 {
        self.y_norm().max(1.0)
    }

    /// Cached estimate of `<x_t, Psi(A_i)>`.
    pub fn cached_ell2(&self, i: usize) -> f64 {
        self.sums[i] / ((2.0 * self.horizon as f64).sqrt() * self.scale())
    }

    /// Fresh estimate of `<x_t, Psi(A_i)>` with one `k~` call per support
    /// element.
    pub fn kernel_ell2<R: Rng + ?Sized>(
        &mut self,
        i: usize,
        rng: &mut R,
        counter: &mut AccessCounter,
    ) -> f64 {
        if self.support.is_empty() {
            return 0.0;
        }
        let mut s = 0.0;
        for k in 0..self.support.len() {
            let prep = self.rows.prepare(self.support[k], counter);
            s += self.rows.estimate(&prep, i, rng, counter);
        }
        self.estimator_calls += self.support.len() as u64;
        s / ((2.0 * self.horizon as f64).sqrt() * self.scale())
    }

    /// Appends row `a` to the support, updating every `S_i` with one `k~`
    /// call and the norm.
    pub fn push<R: Rng + ?Sized>(&mut self, a: usize, rng: &mut R, counter: &mut AccessCounter) {
        let prep = self.rows.prepare(a, counter);
        for (i, s) in self.sums.iter_mut().enumerate() {
            *s += self.rows.estimate(&prep, i, rng, counter);
        }
        self.estimator_calls += self.sums.len() as u64;
        self.support.push(a);
        match &mut self.norm {
            NormTracker::Estimate(e) => {
                e.push(&self.rows, &self.support, rng, counter);
            }
            NormTracker::Exact {
                g,
                counts,
                distinct,
            } => {
                let m = self.rows.m;
                let mut cross = 0.0;
                for &b in distinct.iter() {
                    cross += counts[b] as f64 * self.rows.exact(a, b);
                    counter.record((m.row_nnz(a) + m.row_nnz(b)) as u64);
                }
                self.exact_calls += distinct.len() as u64 + 1;
                *g += 2.0 * cross + self.rows.diag(a);
                if counts[a] == 0 {
                    distinct.push(a);
                }
                counts[a] += 1;
            }
        }
    }
}

/// Resolves `Auto` to whichever route is expected to read fewer entries.
pub fn choose_route(rows: &KernelRows<'_>, horizon: u64, eps: f64, delta: f64) -> NormRoute {
    match rows.spec.norm_route {
        NormRoute::Auto => {
            let n = rows.n();
            let nnz = rows.m.nnz() as f64 / n.max(1) as f64;
            let t = horizon as f64;
            let exact = t * (t.min(n as f64)) * 2.0 * nnz;
            let est = NormEstimator::planned_calls(horizon.min(1 << 20), eps, delta)
                * rows.spec.estimate_cost();
            if est < exact {
                NormRoute::Estimate
            } else {
                NormRoute::Exact
            }
        }
        r => r,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::spec::KernelSpec;
    use crate::matrix::DataMatrix;
    use crate::sampling::rng_from_seed;

    #[test]
    fn single_and_repeated_support() {
        let m = DataMatrix::from_dense(&[vec![1.0, 0.0]]).unwrap();
        let spec = KernelSpec::polynomial(2).unwrap();
        let rows = KernelRows::new(&m, &spec, None).unwrap();
        let mut est = NormEstimator::new(10, 0.5, 0.1, None).unwrap();
        let mut rng = rng_from_seed(3);
        let mut c = AccessCounter::new();
        assert_eq!(est.push(&rows, &[0], &mut rng, &mut c), 1.0);
        assert_eq!(est.push(&rows, &[0, 0], &mut rng, &mut c), 1.0);
        assert!((est.y_norm() - (4.0f64 / 20.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn empty_support_ell2_is_zero() {
        let m = DataMatrix::from_dense(&[vec![0.6, 0.8]]).unwrap();
        let spec = KernelSpec::polynomial(1).unwrap();
        let rows = KernelRows::new(&m, &spec, None).unwrap();
        let mut st = KernelPrimalState::new(rows, 8, NormRoute::Exact, 0.1, 0.1).unwrap();
        let mut rng = rng_from_seed(0);
        let mut c = AccessCounter::new();
        assert_eq!(st.kernel_ell2(0, &mut rng, &mut c), 0.0);
        st.push(0, &mut rng, &mut c);
        assert!((st.y_norm() - (1.0f64 / 16.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn exact_and_estimated_routes_agree_on_constant_kernel() {
        let m = DataMatrix::from_dense(&[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        let spec = KernelSpec::polynomial(3).unwrap();
        let rows = KernelRows::new(&m, &spec, None).unwrap();
        let mut a = KernelPrimalState::new(rows, 4, NormRoute::Exact, 0.5, 0.1).unwrap();
        let mut b = KernelPrimalState::new(rows, 4, NormRoute::Estimate, 0.5, 0.1).unwrap();
        let mut rng = rng_from_seed(9);
        let mut c = AccessCounter::new();
        for i in [0, 1, 1, 0] {
            a.push(i, &mut rng, &mut c);
            b.push(i, &mut rng, &mut c);
            assert!((a.y_norm() - b.y_norm()).abs() < 1e-12);
        }
    }
}
