//! Independent cross-checking oracles.
//!
//! Everything here recomputes quantities the simulator also produces, but
//! by a different route: exact stationary distributions instead of Monte
//! Carlo, exhaustive enumeration instead of combinatorial optimization,
//! and active-set quadratic programming instead of iterative projection.
//! Tests compare the two routes; the oracles deliberately share no code
//! with the modules they certify.

use crate::mat::Square;
use crate::switch::{QueueMatrix, Schedule};
use thiserror::Error;

/// Largest switch the matching enumeration accepts (8! = 40320 schedules).
pub const BRUTE_FORCE_LIMIT: usize = 8;
/// Limits for the expected-weight enumerations.
pub const POWER_OF_D_LIMIT: (usize, u32) = (4, 3);
pub const RANDOM_ONE_FLIP_LIMIT: usize = 5;
/// Largest switch the active-set projection accepts (2^(n*n) zero patterns).
pub const ACTIVE_SET_LIMIT: usize = 3;

const TAIL_TARGET: f64 = 1e-10;
const MAX_STATES: usize = 1 << 22;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("{what} supports n <= {limit}, got n = {n}")]
    SizeLimit { what: &'static str, n: usize, limit: usize },
    #[error("power-of-d enumeration supports d in 1..={limit}, got d = {d}")]
    DepthLimit { d: u32, limit: u32 },
    #[error("rate {name} = {value} is outside (0, 1)")]
    BadRate { name: &'static str, value: f64 },
    #[error("arrival rate {lambda} >= service rate {mu}: queue has no stationary distribution")]
    Unstable { lambda: f64, mu: f64 },
    #[error("birth-death truncation passed {0} states without meeting the tail target")]
    TruncationLimit(usize),
}

/// Exact stationary solution of a truncated single-queue birth-death chain.
#[derive(Debug, Clone)]
pub struct BirthDeathSolution {
    /// Stationary mean queue length.
    pub mean: f64,
    /// Stationary distribution over 0..=q_max.
    pub pi: Vec<f64>,
    /// Truncation level reached by the automatic growth.
    pub q_max: usize,
}

/// Solves the single queue `q(t+1) = [q(t) + a(t) - s(t)]^+` with
/// `a ~ Bernoulli(lambda)` and `s ~ Bernoulli(mu)` drawn independently.
///
/// The chain moves up with probability `lambda * (1 - mu)` from any state
/// and down with probability `mu * (1 - lambda)` from any positive state,
/// so the truncated transition matrix is birth-death and its stationary
/// vector follows from detailed balance. The truncation level grows
/// until the untruncated tail mass falls below 1e-10.
pub fn exact_single_queue_mean(lambda: f64, mu: f64) -> Result<BirthDeathSolution, OracleError> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(OracleError::BadRate { name: "lambda", value: lambda });
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(OracleError::BadRate { name: "mu", value: mu });
    }
    let up = lambda * (1.0 - mu);
    let down = mu * (1.0 - lambda);
    let rho = up / down;
    if rho >= 1.0 {
        return Err(OracleError::Unstable { lambda, mu });
    }

    let mut q_max = 64usize;
    loop {
        // Unnormalized ladder pi_k = rho^k, built multiplicatively so the
        // same numbers satisfy detailed balance to machine precision.
        let mut ladder = Vec::with_capacity(q_max + 1);
        let mut p = 1.0f64;
        let mut total = 0.0f64;
        for _ in 0..=q_max {
            ladder.push(p);
            total += p;
            p *= rho;
        }
        // Geometric tail mass the truncation discards, relative to the total.
        let tail = ladder[q_max] * rho / (1.0 - rho) / total;
        if tail < TAIL_TARGET {
            let mut mean = 0.0;
            let mut pi = ladder;
            for (k, v) in pi.iter_mut().enumerate() {
                *v /= total;
                mean += k as f64 * *v;
            }
            return Ok(BirthDeathSolution { mean, pi, q_max });
        }
        q_max *= 2;
        if q_max > MAX_STATES {
            return Err(OracleError::TruncationLimit(MAX_STATES));
        }
    }
}

/// Advances `perm` to its lexicographic successor; false once exhausted.
fn next_permutation(perm: &mut [usize]) -> bool {
    if perm.len() < 2 {
        return false;
    }
    let mut i = perm.len() - 1;
    while i > 0 && perm[i - 1] >= perm[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = perm.len() - 1;
    while perm[j] <= perm[i - 1] {
        j -= 1;
    }
    perm.swap(i - 1, j);
    perm[i..].reverse();
    true
}

/// Weight of the matching `perm` computed through the 0/1 matrix form,
/// not through the simulator's map-based accessor.
fn matrix_weight(q: &Square<i64>, perm: &[usize]) -> i64 {
    let n = q.n();
    let mut w = 0i64;
    for i in 0..n {
        for j in 0..n {
            if perm[i] == j {
                w += q[(i, j)];
            }
        }
    }
    w
}

/// Exhaustive maximum-weight matching: every schedule is enumerated in
/// lexicographic order and the first maximizer is kept, so ties resolve
/// to the lexicographically smallest schedule.
pub fn brute_force_matching(q: &QueueMatrix) -> Result<(i64, Schedule), OracleError> {
    let n = q.n();
    if n > BRUTE_FORCE_LIMIT {
        return Err(OracleError::SizeLimit { what: "brute-force matching", n, limit: BRUTE_FORCE_LIMIT });
    }
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best_w = matrix_weight(q.matrix(), &perm);
    let mut best = perm.clone();
    while next_permutation(&mut perm) {
        let w = matrix_weight(q.matrix(), &perm);
        if w > best_w {
            best_w = w;
            best = perm.clone();
        }
    }
    Ok((best_w, Schedule::from_map(best).expect("enumerated permutation")))
}

/// Randomized policies whose one-shot expected weight is enumerable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactPolicy {
    /// Best of d schedules drawn uniformly with replacement.
    PowerOfD { d: u32 },
    /// Uniform random schedule followed by one flip step.
    RandomOneFlip,
}

/// Exact expected schedule weight `E[<q, s>]` under `policy`, by full
/// enumeration of the policy's sample space.
pub fn exact_expected_weight(q: &QueueMatrix, policy: ExactPolicy) -> Result<f64, OracleError> {
    let n = q.n();
    let mut perms = Vec::new();
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perms.push(perm.clone());
        if !next_permutation(&mut perm) {
            break;
        }
    }
    let weights: Vec<i64> = perms.iter().map(|p| matrix_weight(q.matrix(), p)).collect();
    let count = perms.len();

    match policy {
        ExactPolicy::PowerOfD { d } => {
            let (n_limit, d_limit) = POWER_OF_D_LIMIT;
            if n > n_limit {
                return Err(OracleError::SizeLimit { what: "power-of-d enumeration", n, limit: n_limit });
            }
            if d == 0 || d > d_limit {
                return Err(OracleError::DepthLimit { d, limit: d_limit });
            }
            // Odometer over all count^d ordered draws.
            let d = d as usize;
            let mut idx = vec![0usize; d];
            let mut total = 0i128;
            let tuples = (count as i128).pow(d as u32);
            loop {
                let max_w = idx.iter().map(|&k| weights[k]).max().expect("d >= 1");
                total += max_w as i128;
                let mut pos = d;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    idx[pos] += 1;
                    if idx[pos] < count {
                        break;
                    }
                    idx[pos] = 0;
                }
                if idx.iter().all(|&k| k == 0) {
                    break;
                }
            }
            Ok(total as f64 / tuples as f64)
        }
        ExactPolicy::RandomOneFlip => {
            if n > RANDOM_ONE_FLIP_LIMIT {
                return Err(OracleError::SizeLimit { what: "random 1-flip enumeration", n, limit: RANDOM_ONE_FLIP_LIMIT });
            }
            let pairs = n * (n - 1) / 2;
            let mut total = 0i128;
            for (p, &w) in perms.iter().zip(&weights) {
                for i in 0..n {
                    for k in i + 1..n {
                        let kept = q.get(i, p[i]) + q.get(k, p[k]);
                        let swapped = q.get(i, p[k]) + q.get(k, p[i]);
                        // The flip step swaps only on strict improvement,
                        // so the post-flip weight is the larger of the two.
                        let after = if swapped > kept { w - kept + swapped } else { w };
                        total += after as i128;
                    }
                }
            }
            Ok(total as f64 / (count * pairs) as f64)
        }
    }
}

/// Row-reduces `rows` and returns a basis of its nullspace in R^cols.
fn nullspace(mut rows: Vec<Vec<f64>>, cols: usize) -> Vec<Vec<f64>> {
    let tol = 1e-9;
    let mut pivot_cols = Vec::new();
    let mut rank = 0usize;
    for col in 0..cols {
        let pivot = (rank..rows.len()).max_by(|&a, &b| {
            rows[a][col].abs().partial_cmp(&rows[b][col].abs()).expect("finite")
        });
        let Some(pivot) = pivot else { break };
        if rows[pivot][col].abs() <= tol {
            continue;
        }
        rows.swap(rank, pivot);
        let lead = rows[rank][col];
        for v in rows[rank].iter_mut() {
            *v /= lead;
        }
        for r in 0..rows.len() {
            if r != rank && rows[r][col].abs() > 0.0 {
                let factor = rows[r][col];
                for c in 0..cols {
                    let sub = factor * rows[rank][c];
                    rows[r][c] -= sub;
                }
            }
        }
        pivot_cols.push(col);
        rank += 1;
    }
    let mut basis = Vec::new();
    for free in 0..cols {
        if pivot_cols.contains(&free) {
            continue;
        }
        let mut v = vec![0.0; cols];
        v[free] = 1.0;
        for (r, &pc) in pivot_cols.iter().enumerate() {
            v[pc] = -rows[r][free];
        }
        basis.push(v);
    }
    basis
}

/// Projects `x` onto the cone `K = S intersect R+` by enumerating active
/// sets: every zero pattern Z yields the linear subspace
/// `{y in S : y_Z = 0}`, `x` is projected onto each via an orthonormal
/// basis, and the best candidate with nonnegative entries wins. The
/// pattern of the true projection is among those enumerated, so the
/// result is exact up to floating-point rounding.
pub fn active_set_projection(x: &Square<f64>) -> Result<Square<f64>, OracleError> {
    let n = x.n();
    if n > ACTIVE_SET_LIMIT {
        return Err(OracleError::SizeLimit { what: "active-set projection", n, limit: ACTIVE_SET_LIMIT });
    }
    let dim = n * n;
    let params = 2 * n; // y_ij = r_i + c_j
    let mut best: Option<(f64, Vec<f64>)> = None;

    for mask in 0u32..(1 << dim) {
        let mut constraints = Vec::new();
        for bit in 0..dim {
            if mask & (1 << bit) != 0 {
                let (i, j) = (bit / n, bit % n);
                let mut row = vec![0.0; params];
                row[i] = 1.0;
                row[n + j] = 1.0;
                constraints.push(row);
            }
        }
        let param_basis = if constraints.is_empty() {
            (0..params)
                .map(|k| {
                    let mut v = vec![0.0; params];
                    v[k] = 1.0;
                    v
                })
                .collect()
        } else {
            nullspace(constraints, params)
        };

        // Push each parameter direction into y-space and orthonormalize.
        let mut ortho: Vec<Vec<f64>> = Vec::new();
        for w in &param_basis {
            let mut v = vec![0.0; dim];
            for i in 0..n {
                for j in 0..n {
                    v[i * n + j] = w[i] + w[n + j];
                }
            }
            for e in &ortho {
                let dot: f64 = v.iter().zip(e).map(|(a, b)| a * b).sum();
                for (vv, ee) in v.iter_mut().zip(e) {
                    *vv -= dot * ee;
                }
            }
            let norm: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            if norm > 1e-10 {
                for vv in v.iter_mut() {
                    *vv /= norm;
                }
                ortho.push(v);
            }
        }

        let mut y = vec![0.0; dim];
        for e in &ortho {
            let dot: f64 = x.as_slice().iter().zip(e).map(|(a, b)| a * b).sum();
            for (yy, ee) in y.iter_mut().zip(e) {
                *yy += dot * ee;
            }
        }
        if y.iter().any(|&v| v < -1e-9) {
            continue;
        }
        let objective: f64 = x.as_slice().iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        if best.as_ref().is_none_or(|(obj, _)| objective < *obj) {
            best = Some((objective, y));
        }
    }

    let (_, y) = best.expect("the all-zero pattern is always feasible");
    Ok(Square::from_fn(n, |i, j| y[i * n + j]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    fn diag3() -> QueueMatrix {
        QueueMatrix::from_matrix(Square::from([[3, 0, 0], [0, 0, 0], [0, 0, 0]])).unwrap()
    }

    #[test]
    fn birth_death_matches_geometric_closed_form() {
        // rho = (0.45 * 0.5) / (0.5 * 0.55) = 9/11, mean = rho / (1 - rho) = 4.5.
        let sol = exact_single_queue_mean(0.45, 0.5).unwrap();
        assert!((sol.mean - 4.5).abs() < 1e-6, "mean {}", sol.mean);
    }

    #[test]
    fn birth_death_distribution_is_consistent() {
        let sol = exact_single_queue_mean(0.2375, 0.25).unwrap();
        let total: f64 = sol.pi.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let up = 0.2375 * 0.75;
        let down = 0.25 * 0.7625;
        for k in 0..sol.q_max {
            let residual = sol.pi[k] * up - sol.pi[k + 1] * down;
            assert!(residual.abs() < 1e-12, "balance residual {residual} at {k}");
        }
        assert!(sol.pi[sol.q_max] < 1e-9);
    }

    #[test]
    fn birth_death_mean_is_monotone_in_lambda() {
        let mut last = 0.0;
        for k in 1..=9 {
            let lambda = 0.025 * k as f64;
            let mean = exact_single_queue_mean(lambda, 0.25).unwrap().mean;
            assert!(mean > last, "mean not increasing at lambda {lambda}");
            last = mean;
        }
    }

    #[test]
    fn birth_death_rejects_bad_parameters() {
        assert!(matches!(exact_single_queue_mean(0.3, 0.25), Err(OracleError::Unstable { .. })));
        assert!(matches!(exact_single_queue_mean(0.0, 0.25), Err(OracleError::BadRate { .. })));
        assert!(matches!(exact_single_queue_mean(0.5, 1.2), Err(OracleError::BadRate { .. })));
    }

    #[test]
    fn brute_force_finds_heavy_corner() {
        let q = QueueMatrix::from_matrix(Square::from([[0, 0], [0, 5]])).unwrap();
        let (w, s) = brute_force_matching(&q).unwrap();
        assert_eq!(w, 5);
        assert_eq!(s, Schedule::identity(2));
    }

    #[test]
    fn brute_force_breaks_ties_lexicographically() {
        let q = QueueMatrix::from_matrix(Square::filled(3, 7)).unwrap();
        let (w, s) = brute_force_matching(&q).unwrap();
        assert_eq!(w, 21);
        assert_eq!(s, Schedule::identity(3));
    }

    #[test]
    fn brute_force_respects_size_limit() {
        let q = QueueMatrix::zeros(9).unwrap();
        assert!(matches!(brute_force_matching(&q), Err(OracleError::SizeLimit { .. })));
    }

    #[test]
    fn power_of_one_is_the_average_schedule_weight() {
        let mut rng = SmallRng::seed_from_u64(7);
        for _ in 0..20 {
            let q = QueueMatrix::from_matrix(Square::from_fn(4, |_, _| rng.random_range(0..50i64))).unwrap();
            let exact = exact_expected_weight(&q, ExactPolicy::PowerOfD { d: 1 }).unwrap();
            let total: i64 = q.matrix().as_slice().iter().sum();
            assert!((exact - total as f64 / 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn power_of_two_on_single_heavy_queue() {
        // Both draws miss the weight-3 edge with probability (2/3)^2.
        let exact = exact_expected_weight(&diag3(), ExactPolicy::PowerOfD { d: 2 }).unwrap();
        assert!((exact - 5.0 / 3.0).abs() < 1e-12, "got {exact}");
    }

    #[test]
    fn random_one_flip_on_single_heavy_queue() {
        // 18-case enumeration: the two schedules hitting (0,0) keep weight 3;
        // each of the other four flips into it when the sampled pair is
        // {0, s^-1(0)}, so E = (2*3 + 4*1) / 6 = 5/3.
        let exact = exact_expected_weight(&diag3(), ExactPolicy::RandomOneFlip).unwrap();
        assert!((exact - 5.0 / 3.0).abs() < 1e-12, "got {exact}");
    }

    #[test]
    fn expected_weights_are_ordered() {
        let mut rng = SmallRng::seed_from_u64(11);
        for _ in 0..20 {
            let q = QueueMatrix::from_matrix(Square::from_fn(3, |_, _| rng.random_range(0..30i64))).unwrap();
            let p1 = exact_expected_weight(&q, ExactPolicy::PowerOfD { d: 1 }).unwrap();
            let p2 = exact_expected_weight(&q, ExactPolicy::PowerOfD { d: 2 }).unwrap();
            let p3 = exact_expected_weight(&q, ExactPolicy::PowerOfD { d: 3 }).unwrap();
            let flip = exact_expected_weight(&q, ExactPolicy::RandomOneFlip).unwrap();
            let (max_w, _) = brute_force_matching(&q).unwrap();
            assert!(p1 <= p2 + 1e-9 && p2 <= p3 + 1e-9 && p3 <= max_w as f64 + 1e-9);
            assert!(flip + 1e-9 >= p1, "one flip cannot lower the average weight");
        }
    }

    #[test]
    fn enumeration_size_limits() {
        let q5 = QueueMatrix::zeros(5).unwrap();
        assert!(matches!(
            exact_expected_weight(&q5, ExactPolicy::PowerOfD { d: 2 }),
            Err(OracleError::SizeLimit { .. })
        ));
        let q4 = QueueMatrix::zeros(4).unwrap();
        assert!(matches!(
            exact_expected_weight(&q4, ExactPolicy::PowerOfD { d: 4 }),
            Err(OracleError::DepthLimit { .. })
        ));
        let q6 = QueueMatrix::zeros(6).unwrap();
        assert!(matches!(
            exact_expected_weight(&q6, ExactPolicy::RandomOneFlip),
            Err(OracleError::SizeLimit { .. })
        ));
    }

    #[test]
    fn active_set_projects_pure_perp_to_zero() {
        let x = Square::from([[2.0, -2.0], [-2.0, 2.0]]);
        let y = active_set_projection(&x).unwrap();
        for &v in y.as_slice() {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn active_set_keeps_feasible_points() {
        // x = r + c with r = (1, 0), c = (1, 0) lies in S and is nonnegative.
        let x = Square::from([[2.0, 1.0], [1.0, 0.0]]);
        let y = active_set_projection(&x).unwrap();
        for ((i, j), &v) in y.indexed() {
            assert!((v - x[(i, j)]).abs() < 1e-9);
        }
    }

    #[test]
    fn active_set_output_is_a_cone_point_orthogonal_to_residual() {
        let mut rng = SmallRng::seed_from_u64(23);
        for _ in 0..50 {
            let x = Square::from_fn(3, |_, _| rng.random_range(-5.0..5.0));
            let y = active_set_projection(&x).unwrap();
            // Inside the orthant.
            for &v in y.as_slice() {
                assert!(v >= -1e-9);
            }
            // Inside S: the closed-form subspace projection fixes y.
            let n = 3usize;
            let row: Vec<f64> = (0..n).map(|i| (0..n).map(|j| y[(i, j)]).sum::<f64>() / n as f64).collect();
            let col: Vec<f64> = (0..n).map(|j| (0..n).map(|i| y[(i, j)]).sum::<f64>() / n as f64).collect();
            let grand: f64 = y.as_slice().iter().sum::<f64>() / (n * n) as f64;
            for i in 0..n {
                for j in 0..n {
                    assert!((y[(i, j)] - (row[i] + col[j] - grand)).abs() < 1e-8);
                }
            }
            // Moreau orthogonality of the projection and its residual.
            let dot: f64 = x
                .as_slice()
                .iter()
                .zip(y.as_slice())
                .map(|(a, b)| (a - b) * b)
                .sum();
            assert!(dot.abs() < 1e-7, "residual not orthogonal: {dot}");
            // Idempotence.
            let yy = active_set_projection(&y).unwrap();
            for (a, b) in yy.as_slice().iter().zip(y.as_slice()) {
                assert!((a - b).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn active_set_respects_size_limit() {
        let x = Square::filled(4, 1.0);
        assert!(matches!(active_set_projection(&x), Err(OracleError::SizeLimit { .. })));
    }
}
