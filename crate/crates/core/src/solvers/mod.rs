//! End-to-end sublinear solvers.

mod config;
mod generic;
mod meb;
pub mod objective;
mod perceptron;
pub(crate) mod report;

pub use config::{Profile, Schedule, SolverConfig, MEB_T_CONSTANT};
pub use generic::{
    generic_perceptron, generic_primal_dual, zero_sum_game, BallLearner, CostSampler,
    L1CostSampler, L2CostSampler, LowRegretLearner, SimplexLearner,
};
pub use meb::{margin_estimate, sublinear_meb, sublinear_qp_simplex, QpInstance};
pub use perceptron::sublinear_perceptron;
pub use report::{Extras, MarginOutcome, Problem, SolutionReport, TraceStep};
