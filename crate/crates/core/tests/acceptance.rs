//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Run with `cargo test --test acceptance`.

use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use sublinopt::gen::{gen_dense_unit, gen_game, gen_meb_known, gen_separable, random_unit};
use sublinopt::kernels::{
    kernel_exact, poisson_mixture_mean, sublinear_kernel_perceptron, KernelRows, KernelSpec,
    PreparedKernel,
};
use sublinopt::linalg::{dot, norm, sq_norm};
use sublinopt::matrix::{AccessCounter, DataMatrix, NormPolicy};
use sublinopt::online::{
    mw_regret_audit, ogd_regret_audit, LossSpec, MwHistory, MwState, OgdHistory, OgdVariant,
};
use sublinopt::sampling::{estimate_dot, l2_estimate_row, L2Sampler};
use sublinopt::solvers::objective::meb_sq_radius;
use sublinopt::solvers::{
    sublinear_meb, sublinear_perceptron, sublinear_qp_simplex, zero_sum_game, Extras, Profile,
    QpInstance, SolverConfig,
};
use sublinopt::verification::{
    exact_game, exact_margin, exact_meb, kernel_exact_margin, las_vegas_meb, CertificateMethod,
    ORACLE_TOL,
};

/// Slack added to every oracle comparison on top of `eps`.
const ORACLE_SLACK: f64 = 1e-5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn ball_point(d: usize, rng: &mut ChaCha8Rng, max_norm: f64) -> Vec<f64> {
    let mut seed_rng = sublinopt::sampling::rng_from_seed(rng.gen());
    let r = max_norm * rng.gen_range(0.05..=1.0f64);
    random_unit(d, &mut seed_rng)
        .into_iter()
        .map(|v| v * r)
        .collect()
}

fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn mw_etas(n: usize, t: usize) -> [f64; 3] {
    let base = ((n as f64).ln().max(2f64.ln()) / t as f64).sqrt();
    [0.01 * base, 0.25 * base, base]
}

fn criterion_1() -> Outcome {
    let mut r = rng(101);
    let mut failures = 0;
    let mut checked = 0;
    for k in 0..1000 {
        let n = [2, 10, 100][k % 3];
        let t = [10, 1000][(k / 3) % 2];
        let eta = mw_etas(n, t)[(k / 6) % 3];
        let cap = 1.0 / eta;
        let family = (k / 18) % 4;
        let losses: Vec<Vec<f64>> = (0..t)
            .map(|_| {
                (0..n)
                    .map(|_| match family {
                        0 => r.gen_range(-1.0..=1.0),
                        1 => r.gen_range(-cap..=cap),
                        2 => {
                            let z: f64 = r.gen_range(-1.0..=1.0);
                            (z / r.gen_range(0.001..1.0f64)).clamp(-cap, cap)
                        }
                        _ => {
                            if r.gen_bool(0.05) {
                                cap * r.gen_range(-1.0..=1.0)
                            } else {
                                r.gen_range(0.0..=0.1)
                            }
                        }
                    })
                    .collect()
            })
            .collect();
        let h = MwHistory::run(n, eta, &losses).expect("bounded losses");
        checked += 1;
        if !mw_regret_audit(&h, eta).holds() {
            failures += 1;
        }
    }
    for kind in 0..10 {
        let (n, t) = (10, 1000);
        let eta = mw_etas(n, t)[2];
        let cap = 1.0 / eta;
        let mut s = MwState::new(n, eta).unwrap();
        let mut losses = Vec::with_capacity(t);
        for round in 0..t {
            let p = s.probabilities();
            let hi = (0..n).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
            let lo = (0..n).min_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
            let q: Vec<f64> = (0..n)
                .map(|i| match kind {
                    0 => cap,
                    1 => -cap,
                    2 => {
                        if i == 0 {
                            -cap
                        } else {
                            cap
                        }
                    }
                    3 => {
                        if i == round % n {
                            cap
                        } else {
                            0.0
                        }
                    }
                    4 => {
                        if i == hi {
                            cap
                        } else if i == lo {
                            -cap
                        } else {
                            0.0
                        }
                    }
                    5 => 1e-12 * if i % 2 == 0 { 1.0 } else { -1.0 },
                    6 => {
                        if (i + round) % 2 == 0 {
                            cap
                        } else {
                            -cap
                        }
                    }
                    7 => {
                        if round % 2 == 0 {
                            cap
                        } else {
                            -cap
                        }
                    }
                    8 => {
                        if i == 0 && round % 10 == 0 {
                            cap
                        } else {
                            -0.01
                        }
                    }
                    _ => {
                        if i == hi {
                            cap
                        } else {
                            -cap
                        }
                    }
                })
                .collect();
            s.update(&q).unwrap();
            losses.push(q);
        }
        let h = MwHistory::run(n, eta, &losses).unwrap();
        checked += 1;
        if !mw_regret_audit(&h, eta).holds() {
            failures += 1;
        }
    }
    Outcome {
        pass: failures == 0,
        detail: format!("{failures} violations in {checked} sequences"),
    }
}

fn gradient_stream(r: &mut ChaCha8Rng, dim: usize, t: usize, max_norm: f64) -> Vec<Vec<f64>> {
    let style = r.gen_range(0..3);
    let fixed = ball_point(dim, r, 1.0);
    (0..t)
        .map(|k| {
            let g: Vec<f64> = match style {
                0 => ball_point(dim, r, 1.0),
                1 => {
                    let noise = ball_point(dim, r, 0.3);
                    fixed.iter().zip(&noise).map(|(a, b)| a + b).collect()
                }
                _ => {
                    let s = if k % 2 == 0 { 1.0 } else { -1.0 };
                    fixed.iter().map(|a| s * a).collect()
                }
            };
            let len = norm(&g);
            let target = max_norm * r.gen_range(0.5..=1.0f64);
            if len > 0.0 {
                g.iter().map(|v| v * target / len).collect()
            } else {
                g
            }
        })
        .collect()
}

fn criterion_2() -> Outcome {
    let mut r = rng(202);
    let mut failures = [0usize; 4];
    let mut worst = [0.0f64; 4];
    for _ in 0..200 {
        for (slot, variant) in [
            OgdVariant::Eager,
            OgdVariant::Lazy,
            OgdVariant::StronglyConvex,
            OgdVariant::EagerStronglyConvex { h: 2.0 },
        ]
        .into_iter()
        .enumerate()
        {
            let dim = r.gen_range(1..=20);
            let t = r.gen_range(1..=2000);
            let (signals, spec) = match variant {
                OgdVariant::Eager => {
                    let c = r.gen_range(0.5..=3.0);
                    (gradient_stream(&mut r, dim, t, c), LossSpec::linear(c))
                }
                OgdVariant::Lazy => (gradient_stream(&mut r, dim, t, 1.0), LossSpec::linear(1.0)),
                _ => {
                    let pts: Vec<Vec<f64>> = (0..t).map(|_| ball_point(dim, &mut r, 1.0)).collect();
                    (pts, LossSpec::meb())
                }
            };
            let h = OgdHistory::run(dim, variant, &signals).expect("valid stream");
            let audit = ogd_regret_audit(&h, &spec).expect("audit");
            if !audit.holds() {
                failures[slot] += 1;
            }
            if audit.bound > 0.0 {
                worst[slot] = worst[slot].max(audit.regret / audit.bound);
            }
        }
    }
    Outcome {
        pass: failures.iter().all(|&f| f == 0),
        detail: format!(
            "violations eager/lazy/ftl/eager-sc = {:?} over 200 streams each; worst regret/bound {:.3}/{:.3}/{:.3}/{:.3}",
            failures, worst[0], worst[1], worst[2], worst[3]
        ),
    }
}

struct PerceptronRuns {
    successes: usize,
    runs: usize,
    sandwich_violations: usize,
}

fn perceptron_batch(instances: u64, seeds: u64, profile: Profile) -> PerceptronRuns {
    let cells: Vec<(u64, u64)> = (0..instances)
        .flat_map(|k| (0..seeds).map(move |s| (k, s)))
        .collect();
    let oracles: Vec<(DataMatrix, f64)> = (0..instances)
        .map(|k| {
            let g = gen_separable(200, 50, 0.3, 3000 + k).expect("instance");
            let o = exact_margin(&g.matrix, ORACLE_TOL).expect("oracle");
            (g.matrix, o.value)
        })
        .collect();
    let results: Vec<(bool, bool)> = cells
        .par_iter()
        .map(|&(k, s)| {
            let (m, sigma) = &oracles[k as usize];
            let cfg = SolverConfig::new(0.1, 10_000 * k + s).with_profile(profile);
            let rep = sublinear_perceptron(m, &cfg).expect("run");
            (
                rep.achieved_value >= sigma - 0.1 - ORACLE_SLACK,
                rep.achieved_value <= rep.dual_bound + 1e-9,
            )
        })
        .collect();
    PerceptronRuns {
        successes: results.iter().filter(|r| r.0).count(),
        runs: results.len(),
        sandwich_violations: results.iter().filter(|r| !r.1).count(),
    }
}

fn criterion_3_and_8() -> (Outcome, Outcome) {
    let tuned = perceptron_batch(10, 50, Profile::Tuned);
    let paper = perceptron_batch(5, 10, Profile::Paper);
    let ft = tuned.successes as f64 / tuned.runs as f64;
    let fp = paper.successes as f64 / paper.runs as f64;
    let c3 = Outcome {
        pass: ft >= 0.42 && fp >= 0.5,
        detail: format!(
            "tuned {}/{} = {:.3} (need >= 0.42), paper {}/{} = {:.3} (need >= 0.5)",
            tuned.successes, tuned.runs, ft, paper.successes, paper.runs, fp
        ),
    };
    let bad = tuned.sandwich_violations + paper.sandwich_violations;
    let c8 = Outcome {
        pass: bad == 0,
        detail: format!("{bad} violations in {} runs", tuned.runs + paper.runs),
    };
    (c3, c8)
}

fn criterion_4() -> Outcome {
    let instances: Vec<(DataMatrix, f64)> = (0..5u64)
        .map(|k| {
            let radius = 0.3 + 0.1 * k as f64;
            let g = gen_meb_known(50, 5, radius, 0.2, 4000 + k).expect("instance");
            let o = exact_meb(&g.matrix, ORACLE_TOL).expect("oracle");
            (g.matrix, o.sq_radius)
        })
        .collect();
    let mut successes = 0;
    for s in 0..50u64 {
        let (m, opt) = &instances[(s % 5) as usize];
        let rep = sublinear_meb(m, &SolverConfig::new(0.1, 500 + s)).expect("run");
        if rep.achieved_value <= opt + 0.1 + ORACLE_SLACK {
            successes += 1;
        }
    }
    let mut correct = 0;
    for s in 0..100u64 {
        let (m, opt) = &instances[(s % 5) as usize];
        let c = las_vegas_meb(m, &SolverConfig::new(0.1, 9000 + s)).expect("las vegas run");
        let recomputed = meb_sq_radius(m, &c.report.x_bar);
        if c.certificate.accepted
            && c.certificate.method == CertificateMethod::ExactScan
            && c.certificate.verified_bound == recomputed
            && recomputed <= opt + 0.1 + ORACLE_SLACK
        {
            correct += 1;
        }
    }
    let frac = successes as f64 / 50.0;
    Outcome {
        pass: frac >= 0.42 && correct == 100,
        detail: format!(
            "success {successes}/50 = {frac:.2} (need >= 0.42), exact certificates {correct}/100"
        ),
    }
}

fn criterion_5() -> Outcome {
    let mut r = rng(505);
    let draws = 20_000;
    let mut mean_fail = 0;
    let mut moment_fail = 0;
    for _ in 0..100 {
        let d = r.gen_range(2..=60);
        let mut x = ball_point(d, &mut r, 1.0);
        let a = ball_point(d, &mut r, 1.0);
        for v in x.iter_mut() {
            if r.gen_bool(0.2) {
                *v = 0.0;
            }
        }
        if sq_norm(&x) == 0.0 {
            x[0] = 0.5;
        }
        let m = DataMatrix::from_dense(std::slice::from_ref(&a)).unwrap();
        let sampler = L2Sampler::new(&x).unwrap();
        let mut counter = AccessCounter::new();
        let vs: Vec<f64> = (0..draws)
            .map(|_| l2_estimate_row(&m, 0, sampler.sample(&mut r), &mut counter).unwrap())
            .collect();
        let (mean, se) = mean_and_se(&vs);
        if (mean - dot(&a, &x)).abs() > 4.0 * se + 1e-12 {
            mean_fail += 1;
        }
        let squares: Vec<f64> = vs.iter().map(|v| v * v).collect();
        let (second, se2) = mean_and_se(&squares);
        if second > sq_norm(&a) * sq_norm(&x) + 4.0 * se2 + 1e-12 {
            moment_fail += 1;
        }
    }
    Outcome {
        pass: mean_fail == 0 && moment_fail == 0,
        detail: format!(
            "mean outside 4 SE: {mean_fail}/100, second moment above bound: {moment_fail}/100"
        ),
    }
}

fn criterion_6() -> Outcome {
    let mut r = rng(606);
    let trials = 2000;
    let mut failures = 0;
    for _ in 0..trials {
        let d = r.gen_range(5..=200);
        let u = ball_point(d, &mut r, 1.0);
        let v = ball_point(d, &mut r, 1.0);
        let x = estimate_dot(&u, &v, 0.1, 0.05, &mut r).unwrap();
        if (x - dot(&u, &v)).abs() > 0.1 {
            failures += 1;
        }
    }
    let rate = failures as f64 / trials as f64;
    Outcome {
        pass: rate <= 0.08,
        detail: format!("failure rate {failures}/{trials} = {rate:.4} (need <= 0.08)"),
    }
}

fn xor_instance() -> (DataMatrix, Vec<f64>) {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let rows = vec![vec![h, h], vec![-h, -h], vec![h, -h], vec![-h, h]];
    (
        DataMatrix::from_dense_with(&rows, NormPolicy::UnitBall).unwrap(),
        vec![1.0, 1.0, -1.0, -1.0],
    )
}

fn criterion_7() -> Outcome {
    let mut r = rng(707);
    let draws = 1_000_000;
    let mut biased = Vec::new();
    for pair in 0..40 {
        let spec = if pair < 20 {
            KernelSpec::polynomial(1 + (pair % 4) as u32).unwrap()
        } else {
            KernelSpec::gaussian(r.gen_range(1.0..=2.5)).unwrap()
        };
        let bound = spec.max_norm().min(1.0);
        let d = r.gen_range(2..=20);
        let u = ball_point(d, &mut r, bound);
        let v = ball_point(d, &mut r, bound);
        let exact = kernel_exact(&spec, &u, &v).unwrap();
        let prep = PreparedKernel::new(&spec, &u);
        let vv = sq_norm(&v);
        let xs: Vec<f64> = (0..draws)
            .map(|_| prep.estimate(|j| v[j], vv, &mut r))
            .collect();
        let (mean, se) = mean_and_se(&xs);
        if (mean - exact).abs() > 4.0 * se + 1e-12 {
            biased.push(pair);
        }
    }
    let mut series_err: f64 = 0.0;
    for gamma in [0.1, 0.25, 0.5, 1.0, 2.0] {
        for mu in [-1.0_f64, -0.5, 0.0, 0.3, 0.7, 1.0] {
            let exact = (gamma * mu).exp();
            series_err = series_err.max((poisson_mixture_mean(gamma, mu) - exact).abs());
        }
    }
    let (m, labels) = xor_instance();
    let spec = KernelSpec::polynomial(2).unwrap();
    let rows = KernelRows::new(&m, &spec, Some(&labels)).unwrap();
    let oracle = kernel_exact_margin(&rows, ORACLE_TOL).unwrap();
    let positive = (0..50u64)
        .filter(|&s| {
            let cfg = SolverConfig::new(0.1, 7000 + s).with_profile(Profile::Tuned);
            let rep = sublinear_kernel_perceptron(&m, &spec, Some(&labels), &cfg).unwrap();
            rep.achieved_value > 0.0 && rep.achieved_value <= oracle.upper + 1e-9
        })
        .count();
    let linear_oracle = exact_margin(&labeled(&m, &labels), ORACLE_TOL).unwrap();
    let frac = positive as f64 / 50.0;
    Outcome {
        pass: biased.is_empty() && series_err <= 1e-12 && frac >= 0.4 && oracle.lower > 0.0,
        detail: format!(
            "biased pairs {:?} of 40; series error {:.1e}; XOR positive margin {positive}/50 (kernel oracle {:.4}, linear oracle {:.4})",
            biased, series_err, oracle.value, linear_oracle.value
        ),
    }
}

fn labeled(m: &DataMatrix, labels: &[f64]) -> DataMatrix {
    let rows: Vec<Vec<f64>> = (0..m.n_rows())
        .map(|i| m.row_dense(i).into_iter().map(|v| v * labels[i]).collect())
        .collect();
    DataMatrix::from_dense(&rows).unwrap()
}

fn criterion_9() -> Outcome {
    let base = gen_dense_unit(2000, 2000, 909).unwrap().matrix;
    let wide = gen_dense_unit(2000, 4000, 910).unwrap().matrix;
    let cfg = |eps: f64| SolverConfig::new(eps, 99).with_profile(Profile::Tuned);
    let e_base = sublinear_perceptron(&base, &cfg(0.2)).unwrap().entries_read;
    let e_wide = sublinear_perceptron(&wide, &cfg(0.2)).unwrap().entries_read;
    let e_fine = sublinear_perceptron(&base, &cfg(0.1)).unwrap().entries_read;
    let nnz = base.nnz() as u64;
    let d_ratio = e_wide as f64 / e_base as f64;
    let eps_ratio = e_fine as f64 / e_base as f64;
    let sub = e_base < nnz / 10;
    Outcome {
        pass: sub && d_ratio <= 2.2 && eps_ratio <= 4.4,
        detail: format!(
            "entries {e_base} vs nnz/10 = {} ({}); d doubled x{d_ratio:.3} (<= 2.2); eps halved x{eps_ratio:.3} (<= 4.4)",
            nnz / 10,
            if sub { "ok" } else { "not met" }
        ),
    }
}

fn game_midpoint(extras: &Extras) -> f64 {
    match extras {
        Extras::Game { lower, upper, .. } => 0.5 * (lower + upper),
        other => panic!("expected game extras, got {other:?}"),
    }
}

fn criterion_10() -> Outcome {
    let pennies =
        DataMatrix::from_dense_with(&[vec![1.0, -1.0], vec![-1.0, 1.0]], NormPolicy::Unchecked)
            .unwrap();
    let cfg = |seed: u64| SolverConfig::new(0.05, seed).with_profile(Profile::Tuned);
    let rep = zero_sum_game(&pennies, &cfg(1)).unwrap();
    let pennies_value = game_midpoint(&rep.extras);
    let mut close = 0;
    for s in 0..50u64 {
        let g = gen_game(20, 30, 1000 + s).unwrap();
        let oracle = exact_game(&g.matrix, 1e-4).unwrap();
        let rep = zero_sum_game(&g.matrix, &cfg(s)).unwrap();
        if (game_midpoint(&rep.extras) - oracle.value).abs() <= 0.05 + 1e-4 {
            close += 1;
        }
    }
    let frac = close as f64 / 50.0;
    Outcome {
        pass: pennies_value.abs() <= 0.05 && frac >= 0.42,
        detail: format!(
            "matching pennies {pennies_value:.4}; random 20x30 within eps {close}/50 = {frac:.2}"
        ),
    }
}

fn criterion_11() -> Outcome {
    let mut identical = 0;
    for k in 0..10u64 {
        let m = gen_meb_known(40 + 5 * k as usize, 3 + k as usize % 4, 0.5, 0.3, 1100 + k)
            .unwrap()
            .matrix;
        let b: Vec<f64> = m.row_sq_norms().iter().map(|v| -v).collect();
        let cfg = SolverConfig::new(0.1, 77 + k).with_trace();
        let meb = sublinear_meb(&m, &cfg).unwrap();
        let qp = sublinear_qp_simplex(&QpInstance::new(&m, &b).unwrap(), &cfg).unwrap();
        if meb.trace.is_some()
            && meb.trace == qp.trace
            && meb.x_bar == qp.x_bar
            && meb.dual_counts == qp.dual_counts
        {
            identical += 1;
        }
    }
    Outcome {
        pass: identical == 10,
        detail: format!("identical traces on {identical}/10 instances"),
    }
}

fn report(id: usize, budget_secs: f64, elapsed: f64, o: &Outcome) -> bool {
    let timing = if elapsed <= budget_secs {
        format!("{elapsed:.1} s")
    } else {
        format!("{elapsed:.1} s, over the {budget_secs:.0} s budget")
    };
    println!(
        "criterion {id}: {} ({}; {timing})",
        if o.pass { "PASS" } else { "FAIL" },
        o.detail
    );
    o.pass
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Id, budget in seconds, check.
type Criterion = (usize, f64, fn() -> Outcome);

/// Criterion ids given on the command line restrict the run (8 rides on 3).
fn main() -> ExitCode {
    let only: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let want = |id: usize| only.is_empty() || only.contains(&id);
    let mut all = true;
    let simple: [Criterion; 9] = [
        (1, 30.0, criterion_1),
        (2, 30.0, criterion_2),
        (4, 300.0, criterion_4),
        (5, 60.0, criterion_5),
        (6, 60.0, criterion_6),
        (7, 300.0, criterion_7),
        (9, 180.0, criterion_9),
        (10, 120.0, criterion_10),
        (11, 30.0, criterion_11),
    ];
    for id in 1..=11 {
        if id == 3 && (want(3) || want(8)) {
            let ((c3, c8), t) = timed(criterion_3_and_8);
            all &= report(3, 300.0, t, &c3);
            all &= report(8, f64::INFINITY, 0.0, &c8);
        }
        if let Some(&(_, budget, f)) = simple.iter().find(|c| c.0 == id) {
            if want(id) {
                let (o, t) = timed(f);
                all &= report(id, budget, t, &o);
            }
        }
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
