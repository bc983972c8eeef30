//! Exact oracles for small instances. They only read the matrix and share no
//! estimation code with the sublinear solvers.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::kernels::KernelRows;
use crate::matrix::DataMatrix;

/// Default additive tolerance of the oracles.
pub const ORACLE_TOL: f64 = 1e-6;

const MAX_ITERATIONS: u64 = 5_000_000;
const CHECK_EVERY: u64 = 64;
const REFRESH_EVERY: u64 = 4096;

/// A value bracketed by certified bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleValue {
    /// Midpoint of `[lower, upper]`.
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub iterations: u64,
    /// Optimal simplex weights (rows), or the column player's strategy for
    /// games.
    pub weights: Vec<f64>,
}

/// Exact minimum enclosing ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MebOracle {
    /// `sum_i p_i A_i`; empty for kernel instances.
    pub center: Vec<f64>,
    /// Squared radius of the ball around `center` containing every row.
    pub sq_radius: f64,
    /// Certified lower bound on the optimal squared radius.
    pub lower: f64,
    pub iterations: u64,
    pub weights: Vec<f64>,
}

/// Dense symmetric `Q` with `Q_ab = A_a . A_b`.
pub fn gram(m: &DataMatrix) -> Vec<Vec<f64>> {
    let n = m.n_rows();
    let mut q = vec![vec![0.0; n]; n];
    for a in 0..n {
        q[a][a] = m.row_sq_norm(a);
        for b in 0..a {
            let v = m.rows_dot(a, b);
            q[a][b] = v;
            q[b][a] = v;
        }
    }
    q
}

struct Fw<'q> {
    q: &'q [Vec<f64>],
    c: Vec<f64>,
    p: Vec<f64>,
    qp: Vec<f64>,
}

impl<'q> Fw<'q> {
    fn new(q: &'q [Vec<f64>], c: Vec<f64>) -> Self {
        let n = q.len();
        let p = vec![1.0 / n as f64; n];
        let mut s = Self {
            q,
            c,
            p,
            qp: vec![0.0; n],
        };
        s.refresh();
        s
    }

    fn refresh(&mut self) {
        for (a, out) in self.qp.iter_mut().enumerate() {
            *out = self.q[a].iter().zip(&self.p).map(|(x, y)| x * y).sum();
        }
    }

    fn pqp(&self) -> f64 {
        self.p.iter().zip(&self.qp).map(|(x, y)| x * y).sum()
    }

    /// One pairwise step on `f(p) = p^T Q p + c^T p`; false at a vertex
    /// where no pair improves.
    fn step(&mut self) -> bool {
        let n = self.p.len();
        let g = |k: usize| 2.0 * self.qp[k] + self.c[k];
        let mut s = 0;
        let mut v = usize::MAX;
        for k in 0..n {
            if g(k) < g(s) {
                s = k;
            }
            if self.p[k] > 0.0 && (v == usize::MAX || g(k) > g(v)) {
                v = k;
            }
        }
        let slope = g(v) - g(s);
        if s == v || slope <= 0.0 {
            return false;
        }
        let curv = self.q[s][s] + self.q[v][v] - 2.0 * self.q[s][v];
        let gamma = if curv > 0.0 {
            (slope / (2.0 * curv)).min(self.p[v])
        } else {
            self.p[v]
        };
        if gamma <= 0.0 {
            return false;
        }
        self.p[s] += gamma;
        if gamma == self.p[v] {
            self.p[v] = 0.0;
        } else {
            self.p[v] -= gamma;
        }
        for k in 0..n {
            self.qp[k] += gamma * (self.q[k][s] - self.q[k][v]);
        }
        true
    }

    /// Iterates until `bounds` brackets the optimum within `tol`.
    fn solve(
        &mut self,
        tol: f64,
        what: &str,
        mut bounds: impl FnMut(&Self) -> (f64, f64),
    ) -> Result<(f64, f64, u64)> {
        let mut it = 0u64;
        loop {
            if it.is_multiple_of(CHECK_EVERY) {
                if it.is_multiple_of(REFRESH_EVERY) {
                    self.refresh();
                }
                let (lo, hi) = bounds(self);
                if hi - lo <= tol {
                    return Ok((lo, hi, it));
                }
            }
            if it >= MAX_ITERATIONS {
                let (lo, hi) = bounds(self);
                return Err(Error::OracleNonConvergence(format!(
                    "{what}: gap {} after {it} iterations",
                    hi - lo
                )));
            }
            if !self.step() {
                self.refresh();
                let (lo, hi) = bounds(self);
                if hi - lo <= tol {
                    return Ok((lo, hi, it));
                }
                return Err(Error::OracleNonConvergence(format!(
                    "{what}: stalled with gap {} after {it} iterations",
                    hi - lo
                )));
            }
            it += 1;
        }
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0 && tol.is_finite()) {
        return Err(invalid(format!(
            "oracle tolerance must be positive, got {tol}"
        )));
    }
    Ok(())
}

/// Margin `max_{|x| <= 1} min_i <x, r_i>` for rows with Gram matrix `q`:
/// the distance from the origin to the hull of the rows.
pub fn margin_from_gram(q: &[Vec<f64>], tol: f64) -> Result<OracleValue> {
    check_tol(tol)?;
    if q.is_empty() {
        return Err(Error::EmptyInstance);
    }
    let mut fw = Fw::new(q, vec![0.0; q.len()]);
    let (lower, upper, iterations) = fw.solve(tol, "margin oracle", |s| {
        let sq = s.pqp().max(0.0);
        let upper = sq.sqrt();
        let lower = if sq > 0.0 {
            let min = s.qp.iter().copied().fold(f64::INFINITY, f64::min);
            (min / upper).max(0.0)
        } else {
            0.0
        };
        (lower, upper)
    })?;
    Ok(OracleValue {
        value: 0.5 * (lower + upper),
        lower,
        upper,
        iterations,
        weights: fw.p,
    })
}

/// Squared MEB radius of rows with Gram matrix `q`, as weights and bounds.
pub fn meb_from_gram(q: &[Vec<f64>], tol: f64) -> Result<(Vec<f64>, f64, f64, u64)> {
    check_tol(tol)?;
    if q.is_empty() {
        return Err(Error::EmptyInstance);
    }
    let diag: Vec<f64> = (0..q.len()).map(|k| q[k][k]).collect();
    let mut fw = Fw::new(q, diag.iter().map(|v| -v).collect());
    let (lower, upper, iterations) = fw.solve(tol, "MEB oracle", |s| {
        let pqp = s.pqp();
        let lower = s.p.iter().zip(&diag).map(|(p, d)| p * d).sum::<f64>() - pqp;
        let upper = (0..diag.len())
            .map(|k| (diag[k] - 2.0 * s.qp[k]) + pqp)
            .fold(f64::NEG_INFINITY, f64::max);
        (lower, upper)
    })?;
    Ok((fw.p, lower, upper, iterations))
}

/// Exact margin of a linear instance to additive `tol`.
pub fn exact_margin(m: &DataMatrix, tol: f64) -> Result<OracleValue> {
    margin_from_gram(&gram(m), tol)
}

/// Exact minimum enclosing ball to additive `tol` on the squared radius.
pub fn exact_meb(m: &DataMatrix, tol: f64) -> Result<MebOracle> {
    let (p, lower, _, iterations) = meb_from_gram(&gram(m), tol)?;
    let center = m.weighted_row_sum(p.iter().copied().enumerate());
    // recompute the radius from the center itself
    let cc: f64 = center.iter().map(|v| v * v).sum();
    let sq_radius = (0..m.n_rows())
        .map(|i| (m.row_sq_norm(i) - 2.0 * m.row_dot(i, &center)) + cc)
        .fold(f64::NEG_INFINITY, f64::max)
        .max(0.0);
    Ok(MebOracle {
        center,
        sq_radius,
        lower: lower.max(0.0),
        iterations,
        weights: p,
    })
}

/// Hilbert-space margin of labeled kernel rows.
pub fn kernel_exact_margin(rows: &KernelRows<'_>, tol: f64) -> Result<OracleValue> {
    margin_from_gram(&rows.gram(), tol)
}

/// Squared feature-space MEB radius of kernel rows (labels ignored).
pub fn kernel_exact_meb(rows: &KernelRows<'_>, tol: f64) -> Result<MebOracle> {
    let unlabeled = KernelRows::new(rows.m, rows.spec, None)?;
    let (p, lower, upper, iterations) = meb_from_gram(&unlabeled.gram(), tol)?;
    Ok(MebOracle {
        center: Vec::new(),
        sq_radius: upper.max(0.0),
        lower: lower.max(0.0),
        iterations,
        weights: p,
    })
}

/// Value of `max_{x in simplex_d} min_{p in simplex_n} p^T A x` by
/// deterministic optimistic multiplicative weights on both sides with exact
/// payoffs, to certified gap `tol`.
pub fn exact_game(payoff: &DataMatrix, tol: f64) -> Result<OracleValue> {
    check_tol(tol)?;
    let n = payoff.n_rows();
    let d = payoff.n_cols();
    if n == 0 || d == 0 {
        return Err(Error::EmptyInstance);
    }
    let a: Vec<Vec<f64>> = (0..n).map(|i| payoff.row_dense(i)).collect();
    let eta = 0.1;
    // log-weights: rows minimize A x, columns maximize p^T A
    let mut lp = vec![0.0; n];
    let mut lx = vec![0.0; d];
    let mut last_p_loss = vec![0.0; n];
    let mut last_x_gain = vec![0.0; d];
    let mut p_sum = vec![0.0; n];
    let mut x_sum = vec![0.0; d];
    let softmax = |l: &[f64]| {
        let mx = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = l.iter().map(|v| (v - mx).exp()).collect();
        let s: f64 = w.iter().sum();
        w.into_iter().map(|v| v / s).collect::<Vec<f64>>()
    };
    let bounds = |p_sum: &[f64], x_sum: &[f64]| {
        let tp: f64 = p_sum.iter().sum();
        let tx: f64 = x_sum.iter().sum();
        let lower = (0..n)
            .map(|i| a[i].iter().zip(x_sum).map(|(v, x)| v * x).sum::<f64>() / tx)
            .fold(f64::INFINITY, f64::min);
        let upper = (0..d)
            .map(|j| (0..n).map(|i| p_sum[i] * a[i][j]).sum::<f64>() / tp)
            .fold(f64::NEG_INFINITY, f64::max);
        (lower, upper)
    };
    let cap = MAX_ITERATIONS / 10;
    for t in 1..=cap {
        // optimistic step: play against the last observed payoff once more
        let p = softmax(
            &lp.iter()
                .zip(&last_p_loss)
                .map(|(l, g)| l - eta * g)
                .collect::<Vec<_>>(),
        );
        let x = softmax(
            &lx.iter()
                .zip(&last_x_gain)
                .map(|(l, g)| l + eta * g)
                .collect::<Vec<_>>(),
        );
        let p_loss: Vec<f64> = a
            .iter()
            .map(|r| r.iter().zip(&x).map(|(v, w)| v * w).sum())
            .collect();
        let mut x_gain = vec![0.0; d];
        for i in 0..n {
            for j in 0..d {
                x_gain[j] += p[i] * a[i][j];
            }
        }
        lp.iter_mut().zip(&p_loss).for_each(|(l, g)| *l -= eta * g);
        lx.iter_mut().zip(&x_gain).for_each(|(l, g)| *l += eta * g);
        last_p_loss = p_loss;
        last_x_gain = x_gain;
        p_sum.iter_mut().zip(&p).for_each(|(s, v)| *s += v);
        x_sum.iter_mut().zip(&x).for_each(|(s, v)| *s += v);
        if t % CHECK_EVERY == 0 || t == cap {
            let (lower, upper) = bounds(&p_sum, &x_sum);
            if upper - lower <= tol {
                let tx: f64 = x_sum.iter().sum();
                return Ok(OracleValue {
                    value: 0.5 * (lower + upper),
                    lower,
                    upper,
                    iterations: t,
                    weights: x_sum.iter().map(|v| v / tx).collect(),
                });
            }
        }
    }
    let (lower, upper) = bounds(&p_sum, &x_sum);
    Err(Error::OracleNonConvergence(format!(
        "game oracle: gap {} after {cap} iterations",
        upper - lower
    )))
}

/// Pattern search for the MEB center on shrinking grids (for `d <= 3`),
/// an oracle-independent cross-check of [`exact_meb`].
pub fn meb_grid_refine(m: &DataMatrix, levels: usize) -> Result<(Vec<f64>, f64)> {
    let d = m.n_cols();
    if d == 0 || d > 3 {
        return Err(invalid("grid refinement supports 1 <= d <= 3"));
    }
    if m.n_rows() == 0 {
        return Err(Error::EmptyInstance);
    }
    let rows: Vec<Vec<f64>> = (0..m.n_rows()).map(|i| m.row_dense(i)).collect();
    let radius2 = |c: &[f64]| {
        rows.iter()
            .map(|r| r.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
            .fold(0.0, f64::max)
    };
    const K: i64 = 8;
    let mut best = vec![0.0; d];
    let mut best_val = radius2(&best);
    let mut h = 1.0 / K as f64;
    let mut offsets = vec![vec![]];
    for _ in 0..d {
        offsets = offsets
            .into_iter()
            .flat_map(|o: Vec<i64>| {
                (-K..=K).map(move |k| {
                    let mut o = o.clone();
                    o.push(k);
                    o
                })
            })
            .collect();
    }
    for _ in 0..levels {
        let base = best.clone();
        for o in &offsets {
            let c: Vec<f64> = base.iter().zip(o).map(|(b, &k)| b + k as f64 * h).collect();
            let v = radius2(&c);
            if v < best_val {
                best_val = v;
                best = c;
            }
        }
        h *= 0.5;
    }
    Ok((best, best_val))
}
