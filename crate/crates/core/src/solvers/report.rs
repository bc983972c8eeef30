use serde::{Deserialize, Serialize};

use super::config::Schedule;

/// Which solver produced a report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    Perceptron,
    Meb,
    Qp,
    Margin,
    Generic,
    Game,
    KernelPerceptron,
    KernelMeb,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Perceptron => "perceptron",
            Problem::Meb => "meb",
            Problem::Qp => "qp",
            Problem::Margin => "margin",
            Problem::Generic => "generic",
            Problem::Game => "game",
            Problem::KernelPerceptron => "kernel-perceptron",
            Problem::KernelMeb => "kernel-meb",
        }
    }
}

/// One iteration: sampled row, sampled coordinate (absent while the primal
/// point is zero), and whether the primal point moved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub i: usize,
    pub j: Option<usize>,
    pub primal_updated: bool,
}

/// Outcome of margin estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MarginOutcome {
    Estimated,
    /// The shortest-vector value did not exceed eps; nothing can be said.
    Inconclusive,
}

/// Problem-specific results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Extras {
    None,
    Margin {
        outcome: MarginOutcome,
        /// `min_i 2 A_i x - |x|^2` at the averaged point.
        dual_value: f64,
        sigma_sq_hat: Option<f64>,
        /// Rescaled point `x_hat = beta x_bar`.
        x_hat: Option<Vec<f64>>,
    },
    Game {
        /// `min_i A_i x_bar`: guaranteed to the column player.
        lower: f64,
        /// `max_j (p_bar^T A)_j`: the row player concedes at most this.
        upper: f64,
        gap: f64,
    },
    Kernel {
        /// `x_bar = sum_k coef_k Psi(A_{row_k})`.
        support: Vec<usize>,
        coefficients: Vec<f64>,
        /// `|x_bar|_H^2`, computed exactly.
        sq_norm: f64,
        /// Exact kernel evaluations spent on the final report.
        exact_kernel_calls: u64,
        /// Kernel estimator calls made by the run itself.
        estimator_calls: u64,
        /// Largest `|bias|` of the norm estimate against the exact norm, when
        /// the run tracked it.
        norm_bias: Option<f64>,
    },
}

/// Result of one solver run. `achieved_value` and `dual_bound` are always
/// recomputed exactly from the matrix, never taken from estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionReport {
    pub problem: Problem,
    pub n_rows: usize,
    /// Primal average; empty for kernel problems (see `Extras::Kernel`).
    pub x_bar: Vec<f64>,
    /// Sparse counts of the sampled rows `i_t`, sorted by row.
    pub dual_counts: Vec<(usize, u64)>,
    /// Exact objective of `x_bar`: margin, squared radius, QP value, ...
    pub achieved_value: f64,
    /// Exact bound on the optimum certified by `p_bar`: an upper bound for
    /// maximization problems, a lower bound for MEB.
    pub dual_bound: f64,
    pub iterations: u64,
    pub primal_updates: u64,
    pub entries_read: u64,
    pub wall_time_secs: f64,
    pub seed: u64,
    pub schedule: Schedule,
    pub trace: Option<Vec<TraceStep>>,
    pub extras: Extras,
}

impl SolutionReport {
    /// Dense `p_bar`.
    pub fn p_bar(&self) -> Vec<f64> {
        let total: u64 = self.dual_counts.iter().map(|&(_, c)| c).sum();
        let mut p = vec![0.0; self.n_rows];
        if total > 0 {
            for &(i, c) in &self.dual_counts {
                p[i] = c as f64 / total as f64;
            }
        }
        p
    }

    /// `p_bar` restricted to its support.
    pub fn p_bar_sparse(&self) -> Vec<(usize, f64)> {
        let total: u64 = self.dual_counts.iter().map(|&(_, c)| c).sum();
        self.dual_counts
            .iter()
            .map(|&(i, c)| (i, c as f64 / total.max(1) as f64))
            .collect()
    }

    /// `|dual_bound - achieved_value|`.
    pub fn duality_gap(&self) -> f64 {
        (self.dual_bound - self.achieved_value).abs()
    }

    /// Equality ignoring wall time.
    pub fn same_run(&self, other: &Self) -> bool {
        let mut a = self.clone();
        a.wall_time_secs = other.wall_time_secs;
        a == *other
    }
}

pub(crate) fn sparse_counts(counts: &[u64]) -> Vec<(usize, u64)> {
    counts
        .iter()
        .enumerate()
        .filter(|&(_, &c)| c > 0)
        .map(|(i, &c)| (i, c))
        .collect()
}
