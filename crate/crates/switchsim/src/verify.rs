//! Built-in cross-validation suites, exposed through the CLI.
//!
//! Each suite re-derives a slice of the simulator from an independent
//! reference (exhaustive enumeration, closed forms, or a brute-force
//! construction) and compares. They exist so a binary install can
//! demonstrate its own correctness without the source test suite.

use crate::geometry::{frobenius_norm, project_cone, project_subspace};
use crate::mat::Square;
use crate::oracle::{
    active_set_projection, brute_force_matching, exact_expected_weight, exact_single_queue_mean,
    ExactPolicy,
};
use crate::sched::{
    flip_step, max_weight_argmax, max_weight_matching, max_weight_value, power_of_d, random_d_flip,
};
use crate::switch::{weight, QueueMatrix};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use thiserror::Error;

pub const SUITES: &[&str] = &["matching", "projection", "expected_weight", "single_queue", "weight_bound"];

#[derive(Debug, Error)]
pub enum VerifyError {
    #[error("unknown suite {0:?}; expected one of matching, projection, expected_weight, single_queue, weight_bound, all")]
    UnknownSuite(String),
}

/// Outcome of one named group of checks.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn report(name: &str, passed: bool, detail: String) -> CheckReport {
    CheckReport { name: name.to_string(), passed, detail }
}

/// Runs a suite by name; `all` runs every suite in order.
pub fn run_suite(name: &str) -> Result<Vec<CheckReport>, VerifyError> {
    match name {
        "matching" => Ok(matching_suite()),
        "projection" => Ok(projection_suite()),
        "expected_weight" => Ok(expected_weight_suite()),
        "single_queue" => Ok(single_queue_suite()),
        "weight_bound" => Ok(weight_bound_suite()),
        "all" => {
            let mut out = Vec::new();
            for suite in SUITES {
                out.extend(run_suite(suite)?);
            }
            Ok(out)
        }
        other => Err(VerifyError::UnknownSuite(other.to_string())),
    }
}

fn random_queue(n: usize, hi: i64, rng: &mut SmallRng) -> QueueMatrix {
    QueueMatrix::from_matrix(Square::from_fn(n, |_, _| rng.random_range(0..=hi))).unwrap()
}

fn matching_suite() -> Vec<CheckReport> {
    let mut rng = SmallRng::seed_from_u64(0xF1E1);
    let mut cases = 0usize;
    let mut agree = 0usize;
    for n in 2..=6 {
        for _ in 0..150 {
            let q = random_queue(n, 100, &mut rng);
            let (bw, bs) = brute_force_matching(&q).unwrap();
            let s = max_weight_matching(&q);
            cases += 1;
            if s == bs && max_weight_value(&q) == bw {
                agree += 1;
            }
        }
    }
    let solver = report(
        "matching/solver-vs-enumeration",
        agree == cases,
        format!("{agree}/{cases} random matrices agree in value and schedule"),
    );

    let mut tie_cases = 0usize;
    let mut tie_agree = 0usize;
    for n in 2..=5 {
        for _ in 0..150 {
            let q = random_queue(n, 2, &mut rng);
            let (bw, bs) = brute_force_matching(&q).unwrap();
            tie_cases += 1;
            if max_weight_matching(&q) == bs && bw == max_weight_value(&q) {
                tie_agree += 1;
            }
        }
    }
    let ties = report(
        "matching/tie-break-vs-enumeration",
        tie_agree == tie_cases,
        format!("{tie_agree}/{tie_cases} tie-heavy matrices pick the same matching"),
    );

    let mut fast_cases = 0usize;
    let mut fast_agree = 0usize;
    for n in 2..=6 {
        for _ in 0..100 {
            let q = random_queue(n, 5, &mut rng);
            let (w, s) = max_weight_argmax(&q);
            fast_cases += 1;
            if w == brute_force_matching(&q).unwrap().0 && weight(&q, &s) == w {
                fast_agree += 1;
            }
        }
    }
    let fast = report(
        "matching/fast-argmax-optimality",
        fast_agree == fast_cases,
        format!("{fast_agree}/{fast_cases} single-pass solutions attain the enumerated optimum"),
    );
    vec![solver, ties, fast]
}

fn projection_suite() -> Vec<CheckReport> {
    let mut rng = SmallRng::seed_from_u64(0xF1E2);
    let mut worst: f64 = 0.0;
    let mut cases = 0usize;
    for n in 2..=3 {
        for _ in 0..150 {
            let x = Square::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
            let iterative = project_cone(&x).unwrap().parallel;
            let exact = active_set_projection(&x).unwrap();
            for (a, b) in iterative.as_slice().iter().zip(exact.as_slice()) {
                worst = worst.max((a - b).abs());
            }
            cases += 1;
        }
    }
    let against_oracle = report(
        "projection/iterative-vs-exhaustive",
        worst <= 1e-6,
        format!("{cases} matrices, max entry difference {worst:.2e}"),
    );

    let mut bad = 0usize;
    let mut checks = 0usize;
    for _ in 0..100 {
        let x = Square::from_fn(4, |_, _| rng.random_range(-8.0..8.0));
        let cone = project_cone(&x).unwrap();
        let sub = project_subspace(&x);
        let dot: f64 = cone
            .parallel
            .as_slice()
            .iter()
            .zip(cone.perp.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        let norm2: f64 = x.as_slice().iter().map(|v| v * v).sum();
        let split = cone.norm_parallel().powi(2) + cone.norm_perp().powi(2);
        checks += 1;
        if dot.abs() > 1e-6 * norm2.max(1.0)
            || (norm2 - split).abs() > 1e-6 * norm2.max(1.0)
            || sub.norm_perp() > cone.norm_perp() + 1e-9
        {
            bad += 1;
        }
    }
    let invariants = report(
        "projection/orthogonality-invariants",
        bad == 0,
        format!("{}/{checks} samples satisfy the split identities", checks - bad),
    );
    vec![against_oracle, invariants]
}

fn expected_weight_suite() -> Vec<CheckReport> {
    let mut rng = SmallRng::seed_from_u64(0xF1E3);
    let diag = QueueMatrix::from_matrix(Square::from([[3, 0, 0], [0, 0, 0], [0, 0, 0]])).unwrap();
    let mut reports = Vec::new();

    for (name, exact_policy, frozen) in [
        ("expected_weight/power-of-2", ExactPolicy::PowerOfD { d: 2 }, 5.0 / 3.0),
        ("expected_weight/random-1-flip", ExactPolicy::RandomOneFlip, 5.0 / 3.0),
    ] {
        let exact = exact_expected_weight(&diag, exact_policy).unwrap();
        let draws = 200_000;
        let mut total = 0i64;
        for _ in 0..draws {
            let s = match exact_policy {
                ExactPolicy::PowerOfD { d } => power_of_d(&diag, d, &mut rng),
                ExactPolicy::RandomOneFlip => random_d_flip(&diag, 1, &mut rng),
            };
            total += weight(&diag, &s);
        }
        let mc = total as f64 / draws as f64;
        // Per-draw weight is 0 or 3 here, so the spread is at most 1.5.
        let se = 1.5 / (draws as f64).sqrt();
        let ok = (exact - frozen).abs() < 1e-12 && (mc - exact).abs() <= 4.0 * se;
        reports.push(report(
            name,
            ok,
            format!("closed form {exact:.6}, simulated {mc:.6} over {draws} draws"),
        ));
    }

    let q = random_queue(4, 9, &mut rng);
    let exact = exact_expected_weight(&q, ExactPolicy::PowerOfD { d: 3 }).unwrap();
    let draws = 150_000;
    let mut total = 0i64;
    for _ in 0..draws {
        total += weight(&q, &power_of_d(&q, 3, &mut rng));
    }
    let mc = total as f64 / draws as f64;
    let spread = (4 * 9) as f64 / 2.0;
    let ok = (mc - exact).abs() <= 4.0 * spread / (draws as f64).sqrt();
    reports.push(report(
        "expected_weight/power-of-3-random-matrix",
        ok,
        format!("enumerated {exact:.4}, simulated {mc:.4}"),
    ));
    reports
}

fn single_queue_suite() -> Vec<CheckReport> {
    let (lambda, mu) = (0.45, 0.5);
    let solution = exact_single_queue_mean(lambda, mu).unwrap();
    let frozen_ok = (solution.mean - 4.5).abs() < 1e-9;
    let mut reports = vec![report(
        "single_queue/closed-form-mean",
        frozen_ok,
        format!("birth-death mean {:.9} (expected 4.5)", solution.mean),
    )];

    let mut rng = SmallRng::seed_from_u64(0xF1E4);
    let slots = 2_000_000u64;
    let mut q = 0i64;
    let mut series = Vec::with_capacity((slots / 10) as usize);
    for t in 0..slots {
        if t % 10 == 0 {
            series.push(q as f64);
        }
        let a = i64::from(rng.random::<f64>() < lambda);
        let s = i64::from(rng.random::<f64>() < mu);
        q = (q + a - s).max(0);
    }
    let est = crate::metrics::estimate_mean(&series, 0.2, 30).unwrap();
    let ok = (est.mean - solution.mean).abs() <= 3.0 * est.half_width.max(0.02);
    reports.push(report(
        "single_queue/simulation-vs-closed-form",
        ok,
        format!(
            "simulated {:.4} +/- {:.4} vs exact {:.4}",
            est.mean, est.half_width, solution.mean
        ),
    ));
    reports
}

fn weight_bound_suite() -> Vec<CheckReport> {
    // A max weight schedule must beat the uniform average by a margin
    // proportional to the distance from the cone.
    let mut rng = SmallRng::seed_from_u64(0xF1E5);
    let mut worst_slack = f64::INFINITY;
    let mut violations = 0usize;
    let mut cases = 0usize;
    for n in [3usize, 4] {
        let c = 1.0 / (2.0 * (n as f64).powi(3));
        for _ in 0..200 {
            let q = random_queue(n, 60, &mut rng);
            let x = q.matrix().map(|v| v as f64);
            let perp = project_cone(&x).unwrap().perp;
            let bound = q.total() as f64 / n as f64 + c * frobenius_norm(&perp);
            let slack = max_weight_value(&q) as f64 - bound;
            worst_slack = worst_slack.min(slack);
            if slack < -1e-9 {
                violations += 1;
            }
            cases += 1;
        }
    }
    let lower_bound = report(
        "weight_bound/max-weight-lower-bound",
        violations == 0,
        format!("{cases} states, {violations} violations, smallest slack {worst_slack:.4}"),
    );

    // The flip step never decreases weight, one route to the same
    // conclusion through local moves.
    let mut flip_bad = 0usize;
    for _ in 0..300 {
        let q = random_queue(4, 30, &mut rng);
        let s = crate::sched::random_schedule(4, &mut rng);
        let mut t = s.clone();
        flip_step(&q, &mut t, &mut rng);
        if weight(&q, &t) < weight(&q, &s) {
            flip_bad += 1;
        }
    }
    let flips = report(
        "weight_bound/flip-step-monotone",
        flip_bad == 0,
        format!("300 random flips, {flip_bad} weight decreases"),
    );
    vec![lower_bound, flips]
}
