//! Kernelized perceptron and MEB: the primal iterate lives in the feature
//! space of a kernel and is never expanded; every product with it comes
//! from unbiased kernel estimates.

mod norm;
mod solvers;
mod spec;

pub use norm::{choose_route, estimate_y_norm, KernelPrimalState, NormEstimator};
pub use solvers::{kernelized_meb, sublinear_kernel_perceptron};
pub use spec::{
    kernel_estimate, kernel_exact, poisson_mixture_mean, KernelFamily, KernelRows, KernelSpec,
    NormRoute, PreparedKernel, PreparedRow, GAUSSIAN_AVERAGING, POISSON_CAP,
};
