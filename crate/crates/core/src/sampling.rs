//! Unbiased inner-product estimation: l2-sampling from ball vectors,
//! l1-sampling from simplex weights, clipping, and a median-of-means
//! dot-product estimator with an (eps, delta) guarantee.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{contract, Result};
use crate::matrix::{AccessCounter, DataMatrix};

/// Generator used by every solver; seeded runs are reproducible across
/// platforms.
pub type SolverRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SolverRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for run `index` of a batch (splitmix64).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Coordinates smaller than this are treated as zero when l2-sampling.
pub const TINY_COORD: f64 = 1e-300;

/// `min(V, max(-V, z))`.
#[inline]
pub fn clip(z: f64, v: f64) -> f64 {
    debug_assert!(v > 0.0);
    z.clamp(-v, v)
}

/// A coordinate drawn by l2-sampling together with `|x|^2 / x(j)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2SampleIndex {
    pub j: usize,
    pub inv_coord: f64,
}

/// Prefix sums of squared coordinates of `x = scale * y`; draws in
/// `O(log d)` after an `O(d)` rebuild.
#[derive(Debug, Clone, Default)]
pub struct L2Sampler {
    coords: Vec<f64>,
    prefix: Vec<f64>,
    scale: f64,
    total: f64,
}

impl L2Sampler {
    /// Sampler for `x`; `None` when `x` is (numerically) zero.
    pub fn new(x: &[f64]) -> Option<Self> {
        let mut s = Self::default();
        s.rebuild(x, 1.0);
        (!s.is_zero()).then_some(s)
    }

    /// Rebuilds for the vector `scale * y`.
    pub fn rebuild(&mut self, y: &[f64], scale: f64) {
        self.coords.clear();
        self.coords.extend_from_slice(y);
        self.prefix.clear();
        let mut acc = 0.0;
        for &c in y {
            if c.abs() >= TINY_COORD {
                acc += c * c;
            }
            self.prefix.push(acc);
        }
        self.total = acc;
        self.scale = scale;
    }

    pub fn is_zero(&self) -> bool {
        self.total == 0.0 || self.scale == 0.0
    }

    /// `|x|^2`.
    pub fn sq_norm(&self) -> f64 {
        self.total * self.scale * self.scale
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Draws `j` with probability `x(j)^2 / |x|^2`.
    ///
    /// Panics if the vector is zero; callers check [`Self::is_zero`].
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> L2SampleIndex {
        assert!(!self.is_zero(), "l2-sampling from a zero vector");
        let target = rng.gen::<f64>() * self.total;
        let j = self
            .prefix
            .partition_point(|&p| p <= target)
            .min(self.prefix.len() - 1);
        // prefix[j] > target >= prefix[j-1], so coords[j] is not tiny
        let yj = self.coords[j];
        // |x|^2 / x(j) = s^2 |y|^2 / (s y(j))
        L2SampleIndex {
            j,
            inv_coord: self.scale * self.total / yj,
        }
    }
}

/// One l2-sample from `x`; `None` for the zero vector.
pub fn l2_sample<R: Rng + ?Sized>(x: &[f64], rng: &mut R) -> Option<L2SampleIndex> {
    L2Sampler::new(x).map(|s| s.sample(rng))
}

/// Unbiased estimate of `A_i . x` from one l2-sample of `x`.
pub fn l2_estimate_row(
    m: &DataMatrix,
    i: usize,
    s: L2SampleIndex,
    counter: &mut AccessCounter,
) -> Result<f64> {
    Ok(m.get_entry(i, s.j, counter)? * s.inv_coord)
}

/// Draws `i` with probability `p(i)`. `p` must be a distribution.
pub fn l1_sample<R: Rng + ?Sized>(p: &[f64], rng: &mut R) -> Result<usize> {
    if p.is_empty() {
        return Err(contract("l1-sampling from an empty distribution"));
    }
    if p.iter().any(|&x| !(x >= 0.0)) {
        return Err(contract("distribution has a negative or NaN entry"));
    }
    let total: f64 = p.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(contract(format!("distribution sums to {total}, not 1")));
    }
    Ok(sample_weighted(p, total, rng))
}

/// Linear-scan draw from unnormalized nonnegative weights with known total.
/// Scans blocks of four so the running sum is not one long dependency chain.
#[inline]
pub fn sample_weighted<R: Rng + ?Sized>(w: &[f64], total: f64, rng: &mut R) -> usize {
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut base = 0;
    for chunk in w.chunks(4) {
        let block: f64 = chunk.iter().sum();
        if acc + block > target {
            for (k, &x) in chunk.iter().enumerate() {
                if x > 0.0 {
                    acc += x;
                    if acc > target {
                        return base + k;
                    }
                }
            }
        } else {
            acc += block;
        }
        base += chunk.len();
    }
    // rounding left the target at the very end: last positive weight
    w.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Median-of-means schedule for [`estimate_dot`]: `R = ceil(8 ln(1/delta))`
/// means of `ceil(1/eps^2)` samples each.
pub fn median_of_means_shape(eps: f64, delta: f64) -> (usize, usize) {
    let groups = (8.0 * (1.0 / delta).ln()).ceil().max(1.0) as usize;
    let per = (1.0 / (eps * eps)).ceil().max(1.0) as usize;
    (groups, per)
}

/// Median-of-means estimator of `u . v` built on l2-samples of `u`, read
/// through `v_at`. Prepared once per `u` so many `v` can be probed.
#[derive(Debug, Clone)]
pub struct DotEstimator {
    sampler: Option<L2Sampler>,
    groups: usize,
    per_group: usize,
}

impl DotEstimator {
    pub fn new(u: &[f64], eps: f64, delta: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0 && delta > 0.0 && delta < 1.0) {
            return Err(contract("estimate_dot needs eps, delta in (0, 1)"));
        }
        let (groups, per_group) = median_of_means_shape(eps, delta);
        Ok(Self {
            sampler: L2Sampler::new(u),
            groups,
            per_group,
        })
    }

    pub fn samples_per_estimate(&self) -> usize {
        self.groups * self.per_group
    }

    pub fn estimate<R: Rng + ?Sized>(
        &self,
        mut v_at: impl FnMut(usize) -> f64,
        rng: &mut R,
    ) -> f64 {
        let Some(s) = &self.sampler else {
            return 0.0;
        };
        let mut means: Vec<f64> = (0..self.groups)
            .map(|_| {
                let sum: f64 = (0..self.per_group)
                    .map(|_| {
                        let k = s.sample(rng);
                        v_at(k.j) * k.inv_coord
                    })
                    .sum();
                sum / self.per_group as f64
            })
            .collect();
        median(&mut means)
    }
}

/// `X_{eps,delta}`: `|X - u.v| <= eps` with probability at least `1 - delta`
/// for `u, v` in the unit ball.
pub fn estimate_dot<R: Rng + ?Sized>(
    u: &[f64],
    v: &[f64],
    eps: f64,
    delta: f64,
    rng: &mut R,
) -> Result<f64> {
    if u.len() != v.len() {
        return Err(contract("estimate_dot on vectors of different length"));
    }
    let est = DotEstimator::new(u, eps, delta)?;
    Ok(est.estimate(|j| v[j], rng))
}

pub(crate) fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        0.5 * (xs[k / 2 - 1] + xs[k / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_cases() {
        assert_eq!(clip(0.5, 1.0), 0.5);
        assert_eq!(clip(5.0, 1.0), 1.0);
        assert_eq!(clip(-5.0, 1.0), -1.0);
    }

    #[test]
    fn point_mass_sample() {
        let mut rng = rng_from_seed(1);
        for _ in 0..100 {
            let s = l2_sample(&[1.0, 0.0, 0.0], &mut rng).unwrap();
            assert_eq!(s.j, 0);
            assert_eq!(s.inv_coord, 1.0);
        }
        assert!(l2_sample(&[0.0, 0.0], &mut rng).is_none());
    }

    #[test]
    fn two_point_frequency() {
        let mut rng = rng_from_seed(2);
        let s = L2Sampler::new(&[0.6, 0.8]).unwrap();
        let draws = 100_000;
        let zeros = (0..draws).filter(|_| s.sample(&mut rng).j == 0).count();
        let f = zeros as f64 / draws as f64;
        assert!((f - 0.36).abs() < 0.01, "{f}");
    }

    #[test]
    fn hand_evaluated_estimate() {
        // x = (0.6, 0.8), A_i = (0.3, 0.4): sample j = 1 gives 0.4 * 1.0 / 0.8
        let m = DataMatrix::from_dense(&[vec![0.3, 0.4]]).unwrap();
        let mut c = AccessCounter::new();
        let s = L2SampleIndex {
            j: 1,
            inv_coord: 1.0 / 0.8,
        };
        let v = l2_estimate_row(&m, 0, s, &mut c).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        assert_eq!(c.total(), 1);
    }

    #[test]
    fn exact_expectation_over_both_outcomes() {
        // Brute force: sum over j of P(j) * A(j) * |x|^2 / x(j).
        let x = [0.6, 0.8];
        let a = [0.3, 0.4];
        let sq: f64 = x.iter().map(|v| v * v).sum();
        let e: f64 = (0..2).map(|j| x[j] * x[j] / sq * a[j] * sq / x[j]).sum();
        assert!((e - 0.5).abs() < 1e-15);
    }

    #[test]
    fn deterministic_samples() {
        let x = [0.1, -0.5, 0.3, 0.0, 0.7];
        let s = L2Sampler::new(&x).unwrap();
        let mut a = rng_from_seed(9);
        let mut b = rng_from_seed(9);
        for _ in 0..1000 {
            assert_eq!(s.sample(&mut a), s.sample(&mut b));
        }
    }

    #[test]
    fn zero_coordinates_are_never_drawn() {
        let s = L2Sampler::new(&[0.0, 1e-301, 0.5, 0.0]).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..10_000 {
            assert_eq!(s.sample(&mut rng).j, 2);
        }
    }

    #[test]
    fn l1_point_mass_and_validation() {
        let mut rng = rng_from_seed(4);
        for _ in 0..100 {
            assert_eq!(l1_sample(&[1.0, 0.0, 0.0], &mut rng).unwrap(), 0);
        }
        assert!(l1_sample(&[0.5, 0.6], &mut rng).is_err());
        assert!(l1_sample(&[-0.1, 1.1], &mut rng).is_err());
        assert!(l1_sample(&[], &mut rng).is_err());
    }

    #[test]
    fn l1_uniform_pair() {
        let mut rng = rng_from_seed(5);
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| l1_sample(&[0.5, 0.5], &mut rng).unwrap() == 1)
            .count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn estimate_dot_edge_cases() {
        let mut rng = rng_from_seed(6);
        let e1 = [1.0, 0.0, 0.0];
        assert_eq!(estimate_dot(&e1, &e1, 0.3, 0.1, &mut rng).unwrap(), 1.0);
        assert_eq!(
            estimate_dot(&[0.0; 3], &e1, 0.3, 0.1, &mut rng).unwrap(),
            0.0
        );
        assert!(estimate_dot(&e1, &e1, 0.0, 0.1, &mut rng).is_err());
    }

    #[test]
    fn median_of_means_shape_constants() {
        // R = ceil(8 ln 100) = 37, per = ceil(1 / 0.01) = 100
        assert_eq!(median_of_means_shape(0.1, 0.01), (37, 100));
    }

    #[test]
    fn derived_seeds_differ() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(7, i)).collect();
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), a.len());
    }
}
