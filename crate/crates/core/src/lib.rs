//! Sublinear-time primal-dual approximation for problems of the form
//! `max_{x in ball} min_{p in simplex} p^T A x`: the perceptron (largest
//! margin), minimum enclosing ball, convex QP over the simplex, margin
//! estimation, zero-sum games, and their kernel versions.
//!
//! Each iteration reads one column of `A` and one sampled entry per row, so
//! a run touches `O~((n + d) / eps^2)` entries rather than the whole matrix.
//! Every reported objective is recomputed exactly; only the path to it is
//! randomized.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod gen;
pub mod json;
pub mod kernels;
pub mod linalg;
pub mod matrix;
pub mod online;
pub mod sampling;
pub mod solvers;
pub mod verification;

pub use error::{Error, Result};
pub use kernels::{kernelized_meb, sublinear_kernel_perceptron, KernelSpec};
pub use matrix::{load_instance, parse_instance, AccessCounter, DataMatrix, NormPolicy};
pub use solvers::{
    generic_perceptron, margin_estimate, sublinear_meb, sublinear_perceptron, sublinear_qp_simplex,
    zero_sum_game, Extras, Profile, QpInstance, SolutionReport, SolverConfig,
};
pub use verification::{Certificate, Certified};
