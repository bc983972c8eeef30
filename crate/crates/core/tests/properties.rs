//! Randomized properties of the building blocks.

use proptest::prelude::*;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use sublinopt::json::to_json;
use sublinopt::online::{mw_multiplier, mw_regret_audit, MwHistory, MwState};
use sublinopt::sampling::{clip, derive_seed, l1_sample, l2_sample, rng_from_seed};
use sublinopt::{parse_instance, DataMatrix};

fn unit_rows(max_n: usize, max_d: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    (1..=max_n, 1..=max_d).prop_flat_map(|(n, d)| {
        prop::collection::vec(
            prop::collection::vec(prop_oneof![Just(0.0), -1.0..1.0f64], d),
            n,
        )
        .prop_map(|rows| {
            rows.into_iter()
                .map(|r| {
                    let s = r.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if s > 1.0 {
                        r.iter().map(|v| v / s).collect()
                    } else {
                        r
                    }
                })
                .collect()
        })
    })
}

proptest! {
    #[test]
    fn multiplier_is_bounded_below(eta in 1e-6..1.0f64, q in -1e6..1e6f64) {
        prop_assert!(mw_multiplier(eta, q) >= 0.75);
    }

    #[test]
    fn clip_stays_in_range(z in -1e9..1e9f64, v in 1e-3..1e3f64) {
        let c = clip(z, v);
        prop_assert!(c.abs() <= v);
        if z.abs() <= v {
            prop_assert_eq!(c, z);
        }
    }

    #[test]
    fn mw_stays_on_simplex(n in 1usize..20, seed in any::<u64>(), rounds in 1usize..300) {
        let eta = 0.3;
        let mut s = MwState::new(n, eta).unwrap();
        let mut rng = rng_from_seed(seed);
        for _ in 0..rounds {
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0 / eta..=1.0 / eta)).collect();
            s.update(&q).unwrap();
        }
        let p = s.probabilities();
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(p.iter().all(|&x| x > 0.0));
    }

    #[test]
    fn mw_regret_inequality(n in 2usize..8, seed in any::<u64>(), t in 1usize..200, scale in 0.1..1.0f64) {
        let eta = scale * ((n as f64).ln() / t as f64).sqrt();
        let mut rng = rng_from_seed(seed);
        let losses: Vec<Vec<f64>> = (0..t)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect())
            .collect();
        let h = MwHistory::run(n, eta.min(1.0), &losses).unwrap();
        let audit = mw_regret_audit(&h, eta.min(1.0));
        prop_assert!(audit.holds(), "{audit:?}");
    }

    #[test]
    fn instance_text_round_trip(rows in unit_rows(12, 6)) {
        let m = DataMatrix::from_dense(&rows).unwrap();
        let back = parse_instance(&m.to_instance_string()).unwrap();
        prop_assert_eq!(back.n_rows(), m.n_rows());
        prop_assert_eq!(back.n_cols(), m.n_cols());
        prop_assert_eq!(back.nnz(), m.nnz());
        for i in 0..m.n_rows() {
            prop_assert_eq!(back.row_dense(i), m.row_dense(i));
        }
    }

    #[test]
    fn json_keeps_every_bit(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
        let back: f64 = serde_json::from_str(&to_json(&x)).unwrap();
        prop_assert_eq!(back.to_bits(), x.to_bits());
    }

    #[test]
    fn l2_sample_hits_support(x in prop::collection::vec(prop_oneof![Just(0.0), -1.0..1.0f64], 1..10), seed in any::<u64>()) {
        let mut rng = rng_from_seed(seed);
        match l2_sample(&x, &mut rng) {
            None => prop_assert!(x.iter().all(|&v| v == 0.0)),
            Some(s) => {
                prop_assert!(x[s.j] != 0.0);
                let sq: f64 = x.iter().map(|v| v * v).sum();
                prop_assert!((s.inv_coord * x[s.j] - sq).abs() <= 1e-9 * sq.max(1.0));
            }
        }
    }
}

#[test]
fn derived_seeds_are_distinct() {
    let mut seen = std::collections::HashSet::new();
    for master in 0..50 {
        for k in 0..200 {
            assert!(seen.insert(derive_seed(master, k)));
        }
    }
}

/// Pearson test of l1-sampling against its distribution at level 1e-6.
#[test]
fn l1_sampling_frequencies() {
    let p = [0.05, 0.1, 0.15, 0.2, 0.5];
    let draws = 200_000;
    let mut counts = [0usize; 5];
    let mut rng = rng_from_seed(17);
    for _ in 0..draws {
        counts[l1_sample(&p, &mut rng).unwrap()] += 1;
    }
    let stat: f64 = counts
        .iter()
        .zip(&p)
        .map(|(&c, &pi)| {
            let e = pi * draws as f64;
            (c as f64 - e).powi(2) / e
        })
        .sum();
    let crit = ChiSquared::new(4.0).unwrap().inverse_cdf(1.0 - 1e-6);
    assert!(stat < crit, "chi2 = {stat}, critical {crit}");
}

/// Pearson test of l2-sampling: coordinate j is drawn with probability
/// `x(j)^2 / |x|^2`.
#[test]
fn l2_sampling_frequencies() {
    let x = [0.1, -0.3, 0.0, 0.5, 0.2];
    let sq: f64 = x.iter().map(|v| v * v).sum();
    let draws = 200_000;
    let mut counts = [0usize; 5];
    let mut rng = rng_from_seed(23);
    for _ in 0..draws {
        counts[l2_sample(&x, &mut rng).unwrap().j] += 1;
    }
    assert_eq!(counts[2], 0);
    let stat: f64 = [0, 1, 3, 4]
        .iter()
        .map(|&j| {
            let e = x[j] * x[j] / sq * draws as f64;
            (counts[j] as f64 - e).powi(2) / e
        })
        .sum();
    let crit = ChiSquared::new(3.0).unwrap().inverse_cdf(1.0 - 1e-6);
    assert!(stat < crit, "chi2 = {stat}, critical {crit}");
}
