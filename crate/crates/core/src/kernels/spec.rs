use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, sq_dist, sq_norm};
use crate::matrix::{AccessCounter, DataMatrix};
use crate::sampling::L2Sampler;

/// Default number of independent Gaussian estimates averaged per call.
pub const GAUSSIAN_AVERAGING: usize = 4;

/// Poisson indices above this are folded into index 0.
pub const POISSON_CAP: u64 = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum KernelFamily {
    /// `(u . v)^q`.
    Polynomial { q: u32 },
    /// `exp(-|u - v|^2 / (2 kappa^2))`.
    Gaussian { kappa: f64 },
}

/// How the kernel perceptron obtains `|y_t|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum NormRoute {
    /// Whichever of the other two needs less work.
    #[default]
    Auto,
    /// The stepwise estimator built on `k~` calls.
    Estimate,
    /// Incremental exact kernel sums, `O(T^2)` kernel evaluations.
    Exact,
}

/// A kernel and its estimator budgets.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Gaussian estimator: independent estimates averaged per call.
    pub averaging: usize,
    /// Overrides the norm estimator's clip level (default `T / eps`).
    pub clip_level: Option<f64>,
    pub norm_route: NormRoute,
}

impl KernelSpec {
    pub fn polynomial(q: u32) -> Result<Self> {
        let s = Self {
            family: KernelFamily::Polynomial { q },
            averaging: 1,
            clip_level: None,
            norm_route: NormRoute::Auto,
        };
        s.validate()?;
        Ok(s)
    }

    /// The estimator variance stays below 1 only for `kappa >= 1`; smaller
    /// bandwidths are accepted but noisier.
    pub fn gaussian(kappa: f64) -> Result<Self> {
        let s = Self {
            family: KernelFamily::Gaussian { kappa },
            averaging: GAUSSIAN_AVERAGING,
            clip_level: None,
            norm_route: NormRoute::Auto,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        match self.family {
            KernelFamily::Polynomial { q } if q < 1 => {
                Err(invalid("polynomial degree must be at least 1"))
            }
            KernelFamily::Gaussian { kappa } if !(kappa > 0.0 && kappa.is_finite()) => Err(
                invalid(format!("Gaussian bandwidth must be positive, got {kappa}")),
            ),
            _ if self.averaging == 0 => Err(invalid("averaging count must be at least 1")),
            _ => Ok(()),
        }
    }

    /// `gamma = 1 / kappa^2` and `c = ceil(gamma)` for the Gaussian family.
    fn gaussian_params(kappa: f64) -> (f64, usize) {
        let gamma = 1.0 / (kappa * kappa);
        (gamma, (gamma.ceil() as usize).max(1))
    }

    /// Largest admissible row norm.
    pub fn max_norm(&self) -> f64 {
        match self.family {
            KernelFamily::Polynomial { .. } => 1.0,
            KernelFamily::Gaussian { kappa } => (kappa / 2.0).min(1.0),
        }
    }

    fn check_norm(&self, sq: f64) -> Result<()> {
        let lim = self.max_norm();
        if sq.sqrt() > lim * (1.0 + 1e-9) {
            return Err(Error::InvalidParameter(format!(
                "vector norm {} exceeds the kernel's limit {lim}",
                sq.sqrt()
            )));
        }
        Ok(())
    }

    /// Rejects matrices with a row the estimator does not support.
    pub fn check_matrix(&self, m: &DataMatrix) -> Result<()> {
        for (i, &s) in m.row_sq_norms().iter().enumerate() {
            self.check_norm(s)
                .map_err(|e| Error::InvalidParameter(format!("row {i}: {e}")))?;
        }
        Ok(())
    }

    /// Expected l2-samples per estimator call, a unit-free cost.
    pub fn estimate_cost(&self) -> f64 {
        match self.family {
            KernelFamily::Polynomial { q } => q as f64,
            KernelFamily::Gaussian { kappa } => {
                let (gamma, c) = Self::gaussian_params(kappa);
                self.averaging as f64 * (1.0 + gamma * c as f64)
            }
        }
    }
}

impl std::str::FromStr for KernelSpec {
    type Err = Error;

    /// `poly:q=2`, `gauss:kappa=1.5`, optionally followed by `,avg=8`.
    fn from_str(s: &str) -> Result<Self> {
        let (family, rest) = s.split_once(':').unwrap_or((s, ""));
        let mut kv = std::collections::BTreeMap::new();
        for part in rest.split(',').filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| invalid(format!("kernel parameter {part:?} is not key=value")))?;
            kv.insert(k.trim().to_string(), v.trim().to_string());
        }
        let take = |kv: &mut std::collections::BTreeMap<String, String>, key: &str| kv.remove(key);
        let mut spec = match family {
            "poly" | "polynomial" => {
                let q = take(&mut kv, "q")
                    .ok_or_else(|| invalid("polynomial kernel needs q"))?
                    .parse::<u32>()
                    .map_err(|e| invalid(format!("bad q: {e}")))?;
                KernelSpec::polynomial(q)?
            }
            "gauss" | "gaussian" => {
                let kappa = take(&mut kv, "kappa")
                    .ok_or_else(|| invalid("Gaussian kernel needs kappa"))?
                    .parse::<f64>()
                    .map_err(|e| invalid(format!("bad kappa: {e}")))?;
                KernelSpec::gaussian(kappa)?
            }
            other => return Err(invalid(format!("unknown kernel family {other:?}"))),
        };
        if let Some(a) = take(&mut kv, "avg") {
            spec.averaging = a.parse().map_err(|e| invalid(format!("bad avg: {e}")))?;
        }
        if let Some(k) = kv.keys().next() {
            return Err(invalid(format!("unknown kernel parameter {k:?}")));
        }
        spec.validate()?;
        Ok(spec)
    }
}

/// Exact `k(u, v)`.
pub fn kernel_exact(spec: &KernelSpec, u: &[f64], v: &[f64]) -> Result<f64> {
    if let KernelFamily::Gaussian { .. } = spec.family {
        spec.check_norm(sq_norm(u))?;
        spec.check_norm(sq_norm(v))?;
    }
    Ok(exact_unchecked(spec, u, v))
}

fn exact_unchecked(spec: &KernelSpec, u: &[f64], v: &[f64]) -> f64 {
    match spec.family {
        KernelFamily::Polynomial { q } => dot(u, v).powi(q as i32),
        KernelFamily::Gaussian { kappa } => (-sq_dist(u, v) / (2.0 * kappa * kappa)).exp(),
    }
}

/// `k(u, v)` from `u . v` and the squared norms.
#[inline]
pub(crate) fn kernel_from_dot(spec: &KernelSpec, uv: f64, uu: f64, vv: f64) -> f64 {
    match spec.family {
        KernelFamily::Polynomial { q } => uv.powi(q as i32),
        KernelFamily::Gaussian { kappa } => {
            let d2 = (uu + vv - 2.0 * uv).max(0.0);
            (-d2 / (2.0 * kappa * kappa)).exp()
        }
    }
}

/// An unbiased kernel estimator with the l2-sampler of its first argument
/// prepared, so one `u` can be paired with many `v`.
#[derive(Debug, Clone)]
pub struct PreparedKernel {
    spec: KernelSpec,
    sampler: Option<L2Sampler>,
    uu: f64,
    poisson: Option<Poisson<f64>>,
}

impl PreparedKernel {
    pub fn new(spec: &KernelSpec, u: &[f64]) -> Self {
        let poisson = match spec.family {
            KernelFamily::Gaussian { kappa } => {
                let (gamma, _) = KernelSpec::gaussian_params(kappa);
                Some(Poisson::new(gamma).expect("positive Poisson rate"))
            }
            KernelFamily::Polynomial { .. } => None,
        };
        Self {
            spec: *spec,
            sampler: L2Sampler::new(u),
            uu: sq_norm(u),
            poisson,
        }
    }

    /// One l2-sample estimate of `u . v`.
    #[inline]
    fn dot_sample<R: Rng + ?Sized>(&self, v_at: &mut impl FnMut(usize) -> f64, rng: &mut R) -> f64 {
        match &self.sampler {
            None => 0.0,
            Some(s) => {
                let k = s.sample(rng);
                v_at(k.j) * k.inv_coord
            }
        }
    }

    /// Unbiased estimate of `k(u, v)` given `v`'s entries through `v_at`
    /// and `|v|^2`.
    pub fn estimate<R: Rng + ?Sized>(
        &self,
        mut v_at: impl FnMut(usize) -> f64,
        vv: f64,
        rng: &mut R,
    ) -> f64 {
        match self.spec.family {
            KernelFamily::Polynomial { q } => {
                let mut prod = 1.0;
                for _ in 0..q {
                    prod *= self.dot_sample(&mut v_at, rng);
                    if prod == 0.0 {
                        break;
                    }
                }
                prod
            }
            KernelFamily::Gaussian { kappa } => {
                let (gamma, c) = KernelSpec::gaussian_params(kappa);
                let poisson = self.poisson.as_ref().expect("Gaussian sampler");
                let mut acc = 0.0;
                for _ in 0..self.spec.averaging {
                    let mut i = poisson.sample(rng) as u64;
                    if i > POISSON_CAP {
                        i = 0;
                    }
                    let mut prod = gamma.exp();
                    for _ in 0..i {
                        let x: f64 =
                            (0..c).map(|_| self.dot_sample(&mut v_at, rng)).sum::<f64>() / c as f64;
                        prod *= x;
                    }
                    acc += prod;
                }
                let prefactor = (-(self.uu + vv) / (2.0 * kappa * kappa)).exp();
                prefactor * acc / self.spec.averaging as f64
            }
        }
    }
}

/// Exact mean of one Gaussian-estimator factor `e^gamma X^i` with
/// `i ~ Poisson(gamma)` folded at [`POISSON_CAP`] and `E[X] = mu`; equals
/// `exp(gamma mu)` up to the folded tail.
pub fn poisson_mixture_mean(gamma: f64, mu: f64) -> f64 {
    let mut prob = (-gamma).exp();
    let mut power = 1.0;
    let mut acc = 0.0;
    let mut mass = 0.0;
    for i in 0..=POISSON_CAP {
        if i > 0 {
            prob *= gamma / i as f64;
            power *= mu;
        }
        acc += prob * power;
        mass += prob;
    }
    // Draws above the cap are treated as i = 0.
    acc += (1.0 - mass).max(0.0);
    gamma.exp() * acc
}

/// Unbiased estimate `k~(u, v)`.
pub fn kernel_estimate<R: Rng + ?Sized>(
    spec: &KernelSpec,
    u: &[f64],
    v: &[f64],
    rng: &mut R,
) -> Result<f64> {
    if let KernelFamily::Gaussian { .. } = spec.family {
        spec.check_norm(sq_norm(u))?;
        spec.check_norm(sq_norm(v))?;
    } else if sq_norm(u) > 1.0 + 1e-9 || sq_norm(v) > 1.0 + 1e-9 {
        return Err(invalid(
            "polynomial kernel estimates need vectors in the unit ball",
        ));
    }
    let p = PreparedKernel::new(spec, u);
    Ok(p.estimate(|j| v[j], sq_norm(v), rng))
}

/// Rows of a matrix seen through a kernel, with optional `+-1` labels that
/// turn `k(A_a, A_b)` into `y_a y_b k(A_a, A_b)`.
#[derive(Debug, Clone, Copy)]
pub struct KernelRows<'a> {
    pub m: &'a DataMatrix,
    pub spec: &'a KernelSpec,
    pub labels: Option<&'a [f64]>,
}

impl<'a> KernelRows<'a> {
    pub fn new(m: &'a DataMatrix, spec: &'a KernelSpec, labels: Option<&'a [f64]>) -> Result<Self> {
        spec.validate()?;
        spec.check_matrix(m)?;
        if let Some(l) = labels {
            if l.len() != m.n_rows() {
                return Err(invalid(format!(
                    "{} labels for {} rows",
                    l.len(),
                    m.n_rows()
                )));
            }
            if l.iter().any(|&y| y != 1.0 && y != -1.0) {
                return Err(invalid("labels must be +1 or -1"));
            }
        }
        Ok(Self { m, spec, labels })
    }

    pub fn n(&self) -> usize {
        self.m.n_rows()
    }

    #[inline]
    pub fn label(&self, i: usize) -> f64 {
        self.labels.map_or(1.0, |l| l[i])
    }

    /// Exact labeled kernel value between rows `a` and `b`.
    pub fn exact(&self, a: usize, b: usize) -> f64 {
        let k = kernel_from_dot(
            self.spec,
            self.m.rows_dot(a, b),
            self.m.row_sq_norm(a),
            self.m.row_sq_norm(b),
        );
        self.label(a) * self.label(b) * k
    }

    /// Exact labeled `k(A_i, A_i)`.
    pub fn diag(&self, i: usize) -> f64 {
        kernel_from_dot(
            self.spec,
            self.m.row_sq_norm(i),
            self.m.row_sq_norm(i),
            self.m.row_sq_norm(i),
        )
    }

    /// Reads row `a` (counted) and prepares its sampler.
    pub fn prepare(&self, a: usize, counter: &mut AccessCounter) -> PreparedRow {
        let mut u = vec![0.0; self.m.n_cols()];
        for (j, v) in self.m.read_row(a, counter) {
            u[j] = v;
        }
        PreparedRow {
            row: a,
            kernel: PreparedKernel::new(self.spec, &u),
        }
    }

    /// Labeled `k~(A_a, A_b)`, one counted entry read per l2-sample.
    pub fn estimate<R: Rng + ?Sized>(
        &self,
        a: &PreparedRow,
        b: usize,
        rng: &mut R,
        counter: &mut AccessCounter,
    ) -> f64 {
        let m = self.m;
        let mut reads = 0u64;
        let k = a.kernel.estimate(
            |j| {
                reads += 1;
                m.entry(b, j).unwrap_or(0.0)
            },
            m.row_sq_norm(b),
            rng,
        );
        counter.record(reads);
        self.label(a.row) * self.label(b) * k
    }

    /// Exact labeled Gram matrix (small instances only).
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut g = vec![vec![0.0; n]; n];
        for a in 0..n {
            for b in a..n {
                let v = self.exact(a, b);
                g[a][b] = v;
                g[b][a] = v;
            }
        }
        g
    }
}

/// A row prepared for repeated kernel estimates.
#[derive(Debug, Clone)]
pub struct PreparedRow {
    pub row: usize,
    kernel: PreparedKernel,
}
