//! Exact oracles on instances whose optimum is known in closed form.

use std::f64::consts::FRAC_1_SQRT_2;

use sublinopt::gen::{gen_meb_hypercube, gen_meb_known, gen_separable};
use sublinopt::solvers::objective::{meb_sq_radius, min_margin};
use sublinopt::verification::{exact_game, exact_margin, exact_meb, meb_grid_refine, ORACLE_TOL};
use sublinopt::{DataMatrix, NormPolicy};

fn m(rows: &[&[f64]]) -> DataMatrix {
    let rows: Vec<Vec<f64>> = rows.iter().map(|r| r.to_vec()).collect();
    DataMatrix::from_dense_with(&rows, NormPolicy::Unchecked).unwrap()
}

#[test]
fn margin_of_two_axes() {
    let o = exact_margin(&m(&[&[1.0, 0.0], &[0.0, 1.0]]), ORACLE_TOL).unwrap();
    assert!((o.value - FRAC_1_SQRT_2).abs() < ORACLE_TOL);
    assert!(o.lower <= o.upper && o.upper - o.lower <= ORACLE_TOL);
    assert!((o.weights[0] - 0.5).abs() < 1e-3);
}

#[test]
fn margin_of_opposite_points_is_zero() {
    let o = exact_margin(&m(&[&[0.8, 0.0], &[-0.8, 0.0]]), ORACLE_TOL).unwrap();
    assert!(o.value.abs() < ORACLE_TOL);
}

#[test]
fn margin_of_single_row_is_its_norm() {
    let o = exact_margin(&m(&[&[0.3, 0.4]]), ORACLE_TOL).unwrap();
    assert!((o.value - 0.5).abs() < ORACLE_TOL);
}

#[test]
fn margin_matches_generator() {
    for seed in 0..5 {
        let g = gen_separable(60, 8, 0.25, seed).unwrap();
        let o = exact_margin(&g.matrix, ORACLE_TOL).unwrap();
        assert!((o.value - 0.25).abs() < 1e-5, "seed {seed}: {}", o.value);
    }
}

#[test]
fn meb_of_square() {
    let o = exact_meb(
        &m(&[&[0.5, 0.5], &[0.5, -0.5], &[-0.5, 0.5], &[-0.5, -0.5]]),
        ORACLE_TOL,
    )
    .unwrap();
    assert!((o.sq_radius - 0.5).abs() < ORACLE_TOL);
    assert!(o.center.iter().all(|c| c.abs() < 1e-3));
}

#[test]
fn meb_of_one_point() {
    let a = m(&[&[0.2, -0.1, 0.4]]);
    let o = exact_meb(&a, ORACLE_TOL).unwrap();
    assert!(o.sq_radius < ORACLE_TOL);
    assert!(meb_sq_radius(&a, &o.center) < ORACLE_TOL);
}

#[test]
fn meb_matches_generator_and_grid() {
    let g = gen_meb_known(30, 3, 0.4, 0.3, 11).unwrap();
    let o = exact_meb(&g.matrix, ORACLE_TOL).unwrap();
    assert!((o.sq_radius - 0.16).abs() < 1e-5, "{}", o.sq_radius);
    let (_, grid) = meb_grid_refine(&g.matrix, 12).unwrap();
    assert!(grid >= o.sq_radius - ORACLE_TOL);
    assert!(grid <= o.sq_radius + 1e-3);
}

#[test]
fn hypercube_radius() {
    // all four vertices with one negative coordinate appear; the ball
    // around their centroid has squared radius 3/4
    let g = gen_meb_hypercube(16, 4, false, 0).unwrap();
    let witness = g.meta.witness.as_ref().unwrap();
    assert!((meb_sq_radius(&g.matrix, witness) - 0.75).abs() < 1e-12);
    let o = exact_meb(&g.matrix, ORACLE_TOL).unwrap();
    assert!((o.sq_radius - 0.75).abs() < 1e-5, "{}", o.sq_radius);
}

#[test]
fn matching_pennies() {
    let o = exact_game(&m(&[&[1.0, -1.0], &[-1.0, 1.0]]), 1e-4).unwrap();
    assert!(o.value.abs() < 1e-4);
    assert!(o.upper - o.lower <= 1e-4);
}

#[test]
fn game_with_pure_optimum() {
    let o = exact_game(&m(&[&[0.5, 0.2], &[0.6, 0.1]]), 1e-4).unwrap();
    assert!((o.value - 0.5).abs() < 1e-4, "{}", o.value);
}

#[test]
fn identity_game() {
    let o = exact_game(
        &m(&[&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], &[0.0, 0.0, 1.0]]),
        1e-4,
    )
    .unwrap();
    assert!((o.value - 1.0 / 3.0).abs() < 1e-4);
}

#[test]
fn oracle_weights_attain_margin() {
    let g = gen_separable(40, 6, 0.4, 3).unwrap();
    let o = exact_margin(&g.matrix, ORACLE_TOL).unwrap();
    let w = g
        .matrix
        .weighted_row_sum(o.weights.iter().copied().enumerate());
    let n = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    let x: Vec<f64> = w.iter().map(|v| v / n).collect();
    assert!((min_margin(&g.matrix, &x) - o.value).abs() < 1e-4);
}

#[test]
fn bad_tolerance_is_rejected() {
    let a = m(&[&[0.5]]);
    assert!(exact_margin(&a, 0.0).is_err());
    assert!(exact_meb(&a, f64::NAN).is_err());
}
