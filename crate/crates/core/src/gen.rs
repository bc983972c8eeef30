//! Seeded instance generators with known optima, and the hard families used
//! to stress the solvers.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::linalg::{dot, norm};
use crate::matrix::{DataMatrix, NormPolicy};
use crate::sampling::{rng_from_seed, SolverRng};

/// Sidecar description of a generated instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenMeta {
    pub family: String,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
    /// Family parameters as `(name, value)`.
    pub params: Vec<(String, f64)>,
    /// Known margin, squared radius or game value, when the construction
    /// fixes it.
    pub optimum: Option<f64>,
    /// Separating direction or MEB center, when known.
    pub witness: Option<Vec<f64>>,
}

/// A generated matrix with its metadata.
#[derive(Debug, Clone)]
pub struct Generated {
    pub matrix: DataMatrix,
    pub meta: GenMeta,
}

impl Generated {
    fn new(rows: &[Vec<f64>], policy: NormPolicy, meta: GenMeta) -> Result<Self> {
        Ok(Self {
            matrix: DataMatrix::from_dense_with(rows, policy)?,
            meta,
        })
    }
}

fn meta(family: &str, n: usize, d: usize, seed: u64, params: &[(&str, f64)]) -> GenMeta {
    GenMeta {
        family: family.to_string(),
        n,
        d,
        seed,
        params: params.iter().map(|&(k, v)| (k.to_string(), v)).collect(),
        optimum: None,
        witness: None,
    }
}

/// Uniform random unit vector.
pub fn random_unit(d: usize, rng: &mut SolverRng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let s = norm(&v);
        if s > 1e-6 {
            return v.into_iter().map(|x| x / s).collect();
        }
    }
}

/// Random unit vector orthogonal to the unit vector `x`.
fn random_orthogonal_unit(x: &[f64], rng: &mut SolverRng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..x.len()).map(|_| rng.sample(StandardNormal)).collect();
        let c = dot(&v, x);
        v.iter_mut().zip(x).for_each(|(a, b)| *a -= c * b);
        let s = norm(&v);
        if s > 1e-6 {
            return v.into_iter().map(|a| a / s).collect();
        }
    }
}

/// Scales `v` down (never up) to the unit ball, absorbing rounding.
fn into_ball(mut v: Vec<f64>) -> Vec<f64> {
    let s = norm(&v);
    if s > 1.0 {
        v.iter_mut().for_each(|a| *a /= s);
    }
    v
}

/// Unit rows `A_i = sigma x* + sqrt(1 - sigma^2) u_i` with `u_i` orthogonal
/// to `x*`. Rows 0 and 1 use `u` and `-u`, which puts `sigma x*` in the hull
/// and makes `sigma` the exact margin with witness `x*`.
pub fn gen_separable(n: usize, d: usize, sigma: f64, seed: u64) -> Result<Generated> {
    if !(sigma > 0.0 && sigma <= 1.0) {
        return Err(invalid(format!("sigma must lie in (0, 1], got {sigma}")));
    }
    if d < 2 {
        return Err(invalid("separable instances need d >= 2"));
    }
    if n < 2 && sigma < 1.0 {
        return Err(invalid("a margin below 1 needs at least two rows"));
    }
    let mut rng = rng_from_seed(seed);
    let x = random_unit(d, &mut rng);
    let s = (1.0 - sigma * sigma).max(0.0).sqrt();
    let pair = random_orthogonal_unit(&x, &mut rng);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let u = match i {
                0 => pair.clone(),
                1 => pair.iter().map(|v| -v).collect(),
                _ => random_orthogonal_unit(&x, &mut rng),
            };
            into_ball(x.iter().zip(&u).map(|(a, b)| sigma * a + s * b).collect())
        })
        .collect();
    let mut m = meta("separable", n, d, seed, &[("sigma", sigma)]);
    m.optimum = Some(sigma);
    m.witness = Some(x);
    Generated::new(&rows, NormPolicy::UnitBall, m)
}

/// Which half of a planted pair was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    /// Margin `tau sqrt(1 + eps)`.
    Yes,
    /// Margin at most `tau`.
    No,
}

/// Two nearly opposite rows that agree in the first coordinate and, in the
/// YES branch, in a hidden planted column `j*`; the remaining rows are
/// `((1 + eps) tau, sqrt(1 - (1 + eps)^2 tau^2), 0, ...)`. Telling the
/// branches apart requires finding `j*`. Small entries `zeta = 1/d^3` fill
/// the other columns of the first two rows.
pub fn gen_planted_classification(
    n: usize,
    d: usize,
    tau: f64,
    eps: f64,
    branch: Branch,
    seed: u64,
) -> Result<Generated> {
    if n < 2 || d < 3 {
        return Err(invalid("planted instances need n >= 2 and d >= 3"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid(format!("eps must lie in (0, 1), got {eps}")));
    }
    if !(tau > 0.0 && tau <= 1.0 - eps && (1.0 + eps) * tau <= 1.0) {
        return Err(invalid(format!("tau must lie in (0, 1 - eps], got {tau}")));
    }
    let mut rng = rng_from_seed(seed);
    let j_star = rng.gen_range(2..d);
    let zeta = 1.0 / (d as f64).powi(3);
    let planted = eps.sqrt() * tau;
    let x = tau * tau + (d as f64 - 3.0) * zeta * zeta + eps * tau * tau;
    if x > 1.0 {
        return Err(invalid("planted parameters exceed the unit norm"));
    }
    let mut r1 = vec![zeta; d];
    r1[0] = tau;
    r1[1] = (1.0 - x).sqrt();
    r1[j_star] = planted;
    let mut r2: Vec<f64> = r1.iter().map(|v| -v).collect();
    r2[0] = tau;
    if branch == Branch::Yes {
        r2[j_star] = planted;
    }
    let rest_first = (1.0 + eps) * tau;
    let mut rest = vec![0.0; d];
    rest[0] = rest_first;
    rest[1] = (1.0 - rest_first * rest_first).max(0.0).sqrt();
    let mut rows = vec![into_ball(r1), into_ball(r2)];
    rows.extend(std::iter::repeat_n(into_ball(rest), n - 2));

    let mut m = meta(
        "planted",
        n,
        d,
        seed,
        &[
            ("tau", tau),
            ("eps", eps),
            ("j_star", j_star as f64),
            ("zeta", zeta),
        ],
    );
    match branch {
        Branch::Yes => {
            let s = (1.0 + eps).sqrt();
            let mut w = vec![0.0; d];
            w[0] = 1.0 / s;
            w[j_star] = eps.sqrt() / s;
            m.optimum = Some(tau * s);
            m.witness = Some(w);
        }
        Branch::No => {
            // both the first pair's midpoint (norm tau) and e_1 certify tau
            let mut w = vec![0.0; d];
            w[0] = 1.0;
            m.optimum = Some(tau);
            m.witness = Some(w);
        }
    }
    m.params
        .push(("yes".into(), (branch == Branch::Yes) as u8 as f64));
    Generated::new(&rows, NormPolicy::UnitBall, m)
}

/// Rows `(tau, sqrt(1 - tau^2), 0, ...)`; in the NO branch one random row has
/// its second entry negated, dropping the margin from 1 to `tau`.
pub fn gen_planted_row(
    n: usize,
    d: usize,
    tau: f64,
    branch: Branch,
    seed: u64,
) -> Result<Generated> {
    if n < 1 || d < 2 {
        return Err(invalid("planted-row instances need n >= 1 and d >= 2"));
    }
    if !(tau > 0.0 && tau < 1.0) {
        return Err(invalid(format!("tau must lie in (0, 1), got {tau}")));
    }
    let mut rng = rng_from_seed(seed);
    let i_star = rng.gen_range(0..n);
    let mut base = vec![0.0; d];
    base[0] = tau;
    base[1] = (1.0 - tau * tau).sqrt();
    let mut rows = vec![base.clone(); n];
    let mut m = meta(
        "planted-row",
        n,
        d,
        seed,
        &[("tau", tau), ("i_star", i_star as f64)],
    );
    if branch == Branch::No && n > 1 {
        rows[i_star][1] = -rows[i_star][1];
        let mut w = vec![0.0; d];
        w[0] = 1.0;
        m.optimum = Some(tau);
        m.witness = Some(w);
    } else {
        m.optimum = Some(1.0);
        m.witness = Some(base);
    }
    Generated::new(&rows, NormPolicy::UnitBall, m)
}

/// Number of `-1/sqrt(d)` coordinates beyond `d/4` in a special vertex:
/// `12 d D` with `D = ln n / sqrt(d)`, rounded and clamped to `[1, 3d/4]`.
pub fn special_shift(n: usize, d: usize) -> usize {
    let big_d = (n.max(2) as f64).ln() / (d as f64).sqrt();
    ((12.0 * d as f64 * big_d).round() as usize).clamp(1, 3 * d / 4)
}

/// Vertices of `{-1/sqrt(d), 1/sqrt(d)}^d`: regular ones have `3d/4`
/// positive coordinates, the optional special one (last row) has
/// [`special_shift`] fewer.
pub fn gen_meb_hypercube(n: usize, d: usize, special: bool, seed: u64) -> Result<Generated> {
    if d == 0 || !d.is_multiple_of(4) {
        return Err(invalid(format!(
            "hypercube instances need d divisible by 4, got {d}"
        )));
    }
    if n == 0 {
        return Err(invalid("hypercube instances need n >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let h = 1.0 / (d as f64).sqrt();
    let vertex = |negatives: usize, rng: &mut SolverRng| {
        let mut v: Vec<f64> = (0..d).map(|k| if k < negatives { -h } else { h }).collect();
        v.shuffle(rng);
        into_ball(v)
    };
    let shift = special_shift(n, d);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            if special && i == n - 1 {
                vertex(d / 4 + shift, &mut rng)
            } else {
                vertex(d / 4, &mut rng)
            }
        })
        .collect();
    let mut m = meta(
        "meb-hypercube",
        n,
        d,
        seed,
        &[("special", special as u8 as f64), ("shift", shift as f64)],
    );
    if !special {
        // every regular vertex is at squared distance 3/4 from 1/(2 sqrt d)
        m.witness = Some(vec![0.5 * h; d]);
    }
    Generated::new(&rows, NormPolicy::UnitBall, m)
}

/// Points on the sphere of radius `radius` around a random center of norm
/// `center_norm`, with rows 0 and 1 antipodal so the MEB is that sphere.
pub fn gen_meb_known(
    n: usize,
    d: usize,
    radius: f64,
    center_norm: f64,
    seed: u64,
) -> Result<Generated> {
    if d == 0 || n == 0 {
        return Err(invalid("MEB instances need n, d >= 1"));
    }
    if !(radius >= 0.0 && center_norm >= 0.0) || radius + center_norm > 1.0 {
        return Err(invalid(format!(
            "radius + |center| must not exceed 1, got {radius} + {center_norm}"
        )));
    }
    if n < 2 && radius > 0.0 {
        return Err(invalid("a positive radius needs at least two points"));
    }
    let mut rng = rng_from_seed(seed);
    let c: Vec<f64> = random_unit(d, &mut rng)
        .into_iter()
        .map(|v| v * center_norm)
        .collect();
    let first = random_unit(d, &mut rng);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let u = match i {
                0 => first.clone(),
                1 => first.iter().map(|v| -v).collect(),
                _ => random_unit(d, &mut rng),
            };
            into_ball(c.iter().zip(&u).map(|(a, b)| a + radius * b).collect())
        })
        .collect();
    let mut m = meta(
        "meb-known",
        n,
        d,
        seed,
        &[("radius", radius), ("center_norm", center_norm)],
    );
    m.optimum = Some(radius * radius);
    m.witness = Some(c);
    Generated::new(&rows, NormPolicy::UnitBall, m)
}

/// Payoff matrix with i.i.d. uniform entries in `[-1, 1]`.
pub fn gen_game(n: usize, d: usize, seed: u64) -> Result<Generated> {
    if n == 0 || d == 0 {
        return Err(invalid("games need n, d >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..=1.0)).collect())
        .collect();
    Generated::new(&rows, NormPolicy::Unchecked, meta("game", n, d, seed, &[]))
}

/// Dense matrix of i.i.d. uniform unit rows, for access-count benchmarks.
pub fn gen_dense_unit(n: usize, d: usize, seed: u64) -> Result<Generated> {
    if n == 0 || d == 0 {
        return Err(invalid("dense instances need n, d >= 1"));
    }
    let mut rng = rng_from_seed(seed);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| into_ball(random_unit(d, &mut rng)))
        .collect();
    Generated::new(&rows, NormPolicy::UnitBall, meta("dense", n, d, seed, &[]))
}
