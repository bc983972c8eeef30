use std::time::Instant;

use rand::Rng;

use super::config::SolverConfig;
use super::objective::{dual_norm, min_margin};
use super::report::{sparse_counts, Extras, Problem, SolutionReport, TraceStep};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::matrix::{AccessCounter, DataMatrix};
use crate::online::MwState;
use crate::sampling::{rng_from_seed, L2Sampler};

/// Sublinear perceptron: lazy-projection OGD on the ball against
/// l2-sampled multiplicative weights on the rows.
///
/// With probability at least 1/2, `min_i A_i x_bar >= sigma - eps`.
/// Each iteration reads one column (`n` entries) and one row.
pub fn sublinear_perceptron(m: &DataMatrix, cfg: &SolverConfig) -> Result<SolutionReport> {
    let start = Instant::now();
    let n = m.n_rows();
    if n == 0 {
        return Err(Error::EmptyInstance);
    }
    let d = m.n_cols();
    let sched = cfg.perceptron_schedule(n)?;
    let t_total = sched.iterations;
    let mut rng = rng_from_seed(cfg.seed);
    let mut counter = AccessCounter::new();
    let mut mw = MwState::new(n, sched.eta)?;

    let tf = t_total as f64;
    let (step, update_prob) = if cfg.skip_primal {
        (1.0 / (2.0 * tf.sqrt()), (1.0 / tf.max(3.0).ln()).min(1.0))
    } else {
        (1.0 / (2.0 * tf).sqrt(), 1.0)
    };

    let mut y = vec![0.0; d];
    // x_t = scale * y_t
    let mut scale = 0.0;
    let mut sampler = L2Sampler::default();
    let mut x_sum = vec![0.0; d];
    let mut held = 0u64;
    let mut counts = vec![0u64; n];
    let mut updates = 0u64;
    let mut trace = cfg
        .retain_trace
        .then(|| Vec::with_capacity(t_total as usize));

    for _ in 0..t_total {
        let i = mw.sample(&mut rng);
        counts[i] += 1;
        let moved = !cfg.skip_primal || rng.gen::<f64>() < update_prob;

        // Dual step on x_t. A zero x_t gives every estimate exactly 0.
        let j = if sampler.is_zero() {
            None
        } else {
            let s = sampler.sample(&mut rng);
            let col = m.read_column(s.j, &mut counter);
            mw.apply_sparse(col.rows, col.vals, s.inv_coord, 1.0);
            Some(s.j)
        };
        mw.end_round();
        held += 1;

        if moved {
            if scale != 0.0 {
                let f = held as f64 * scale;
                x_sum.iter_mut().zip(&y).for_each(|(s, v)| *s += f * v);
            }
            held = 0;
            for (k, a) in m.read_row(i, &mut counter) {
                y[k] += step * a;
            }
            scale = 1.0 / norm(&y).max(1.0);
            sampler.rebuild(&y, scale);
            updates += 1;
        }
        if let Some(tr) = trace.as_mut() {
            tr.push(TraceStep {
                i,
                j,
                primal_updated: moved,
            });
        }
    }
    if scale != 0.0 && held > 0 {
        let f = held as f64 * scale;
        x_sum.iter_mut().zip(&y).for_each(|(s, v)| *s += f * v);
    }
    let x_bar: Vec<f64> = x_sum.iter().map(|s| s / tf).collect();
    let dual_counts = sparse_counts(&counts);
    let p_sparse: Vec<(usize, f64)> = dual_counts
        .iter()
        .map(|&(i, c)| (i, c as f64 / tf))
        .collect();

    Ok(SolutionReport {
        problem: Problem::Perceptron,
        n_rows: n,
        achieved_value: min_margin(m, &x_bar),
        dual_bound: dual_norm(m, &p_sparse),
        x_bar,
        dual_counts,
        iterations: t_total,
        primal_updates: updates,
        entries_read: counter.total(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        seed: cfg.seed,
        schedule: sched,
        trace,
        extras: Extras::None,
    })
}
