//! Exact maximum-weight matching on the queue matrix.
//!
//! The solver is the O(n^3) assignment algorithm with row and column
//! potentials, run on negated weights. Ties between maximum-weight
//! matchings are broken deterministically: `max_weight_matching` returns
//! the lexicographically smallest output map among the maximizers, found
//! by fixing rows greedily and re-solving the reduced problem to confirm
//! the optimum stays reachable.

use crate::mat::Square;
use crate::switch::{QueueMatrix, Schedule};

/// Minimum-cost perfect assignment of rows to columns.
/// Returns the total cost and the column assigned to each row.
fn min_cost_assignment(cost: &Square<i64>) -> (i64, Vec<usize>) {
    let n = cost.n();
    if n == 0 {
        return (0, Vec::new());
    }
    let mut u = vec![0i64; n];
    let mut v = vec![0i64; n + 1];
    // matched_row[j] is the row currently assigned to column j; column n
    // is the virtual start of every augmenting path.
    let mut matched_row = vec![usize::MAX; n + 1];
    for i in 0..n {
        matched_row[n] = i;
        let mut j0 = n;
        let mut minv = vec![i64::MAX; n + 1];
        let mut way = vec![n; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = i64::MAX;
            let mut j1 = n;
            for j in 0..n {
                if !used[j] {
                    let cur = cost[(i0, j)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    if matched_row[j] != usize::MAX {
                        u[matched_row[j]] += delta;
                    }
                    v[j] -= delta;
                } else if minv[j] != i64::MAX {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == usize::MAX {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }
    let mut assign = vec![usize::MAX; n];
    for j in 0..n {
        if matched_row[j] != usize::MAX {
            assign[matched_row[j]] = j;
        }
    }
    let total = assign.iter().enumerate().map(|(i, &j)| cost[(i, j)]).sum();
    (total, assign)
}

fn max_value_of(q: &Square<i64>) -> i64 {
    let neg = q.map(|v| -v);
    -min_cost_assignment(&neg).0
}

/// Maximum achievable schedule weight `max_s <q, s>`, without the
/// tie-break pass. This is the cheap form used by per-slot audits.
pub fn max_weight_value(q: &QueueMatrix) -> i64 {
    max_value_of(q.matrix())
}

/// A maximum-weight matching and its value in a single O(n^3) solve,
/// without the lexicographic tie-break pass. Deterministic for a given
/// queue matrix, so simulations stay reproducible; use
/// [`max_weight_matching`] when the canonical tie-break matters.
pub fn max_weight_argmax(q: &QueueMatrix) -> (i64, Schedule) {
    let neg = q.matrix().map(|v| -v);
    let (cost, assign) = min_cost_assignment(&neg);
    let schedule = Schedule::from_map(assign).expect("assignment yields a permutation");
    (-cost, schedule)
}

/// Best value over matchings of rows `start_row..` to the unused columns.
fn remaining_max(q: &Square<i64>, start_row: usize, used_col: &[bool]) -> i64 {
    let n = q.n();
    let cols: Vec<usize> = (0..n).filter(|&j| !used_col[j]).collect();
    debug_assert_eq!(cols.len(), n - start_row);
    if cols.is_empty() {
        return 0;
    }
    let reduced = Square::from_fn(cols.len(), |r, c| -q[(start_row + r, cols[c])]);
    -min_cost_assignment(&reduced).0
}

/// The maximum-weight matching of `q`; ties resolve to the
/// lexicographically smallest output map.
pub fn max_weight_matching(q: &QueueMatrix) -> Schedule {
    let n = q.n();
    let qm = q.matrix();
    let best_total = max_value_of(qm);
    let mut used_col = vec![false; n];
    let mut map = Vec::with_capacity(n);
    let mut prefix = 0i64;
    for i in 0..n {
        for j in 0..n {
            if used_col[j] {
                continue;
            }
            used_col[j] = true;
            let rest = remaining_max(qm, i + 1, &used_col);
            if prefix + qm[(i, j)] + rest == best_total {
                map.push(j);
                prefix += qm[(i, j)];
                break;
            }
            used_col[j] = false;
        }
        debug_assert_eq!(map.len(), i + 1, "some column must keep the optimum reachable");
    }
    Schedule::from_map(map).expect("greedy column fixing yields a permutation")
}
