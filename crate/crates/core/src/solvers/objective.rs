//! Exact objective evaluations by full scans. Uncounted: they are used for
//! reporting and certification, not by the sublinear iterations.

use crate::linalg::{norm, sq_norm};
use crate::matrix::DataMatrix;

/// `min_i A_i x`.
pub fn min_margin(m: &DataMatrix, x: &[f64]) -> f64 {
    (0..m.n_rows())
        .map(|i| m.row_dot(i, x))
        .fold(f64::INFINITY, f64::min)
}

/// `A^T p` for sparse `p`.
pub fn dual_point(m: &DataMatrix, p: &[(usize, f64)]) -> Vec<f64> {
    m.weighted_row_sum(p.iter().copied())
}

/// `|A^T p|`, an upper bound on the margin for every `p` in the simplex.
pub fn dual_norm(m: &DataMatrix, p: &[(usize, f64)]) -> f64 {
    norm(&dual_point(m, p))
}

/// `max_i |x - A_i|^2`, evaluated as `(|A_i|^2 - 2 A_i x) + |x|^2`.
pub fn meb_sq_radius(m: &DataMatrix, x: &[f64]) -> f64 {
    let xx = sq_norm(x);
    (0..m.n_rows())
        .map(|i| (m.row_sq_norm(i) - 2.0 * m.row_dot(i, x)) + xx)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `sum_i p_i |A_i|^2 - |A^T p|^2`, a lower bound on the optimal squared
/// radius for every `p` in the simplex.
pub fn meb_lower_bound(m: &DataMatrix, p: &[(usize, f64)]) -> f64 {
    let s: f64 = p.iter().map(|&(i, w)| w * m.row_sq_norm(i)).sum();
    s - sq_norm(&dual_point(m, p))
}

/// `min_i b(i) + 2 A_i x - |x|^2`, evaluated as `(b(i) + 2 A_i x) - |x|^2`
/// so that `b = -|A_i|^2` gives exactly the negated [`meb_sq_radius`].
pub fn qp_value(m: &DataMatrix, b: &[f64], x: &[f64]) -> f64 {
    let xx = sq_norm(x);
    (0..m.n_rows())
        .map(|i| (b[i] + 2.0 * m.row_dot(i, x)) - xx)
        .fold(f64::INFINITY, f64::min)
}

/// `p^T b + |A^T p|^2`, an upper bound on the QP value for every `p`.
pub fn qp_upper_bound(m: &DataMatrix, b: &[f64], p: &[(usize, f64)]) -> f64 {
    let s: f64 = p.iter().map(|&(i, w)| w * b[i]).sum();
    s + sq_norm(&dual_point(m, p))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qp_is_negated_meb() {
        let m =
            DataMatrix::from_dense(&[vec![0.3, 0.4], vec![-0.5, 0.1], vec![0.0, -0.9]]).unwrap();
        let b: Vec<f64> = m.row_sq_norms().iter().map(|v| -v).collect();
        let x = [0.123, -0.0456];
        assert_eq!(qp_value(&m, &b, &x), -meb_sq_radius(&m, &x));
    }

    #[test]
    fn antipodal_bounds() {
        let m = DataMatrix::from_dense(&[vec![1.0, 0.0], vec![-1.0, 0.0]]).unwrap();
        let p = [(0, 0.5), (1, 0.5)];
        assert_eq!(meb_lower_bound(&m, &p), 1.0);
        assert_eq!(meb_sq_radius(&m, &[0.0, 0.0]), 1.0);
        assert_eq!(dual_norm(&m, &p), 0.0);
    }
}
