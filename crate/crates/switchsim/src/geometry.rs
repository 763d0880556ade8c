//! Projections onto the subspace and cone that organize heavy-traffic
//! behavior.
//!
//! `S` is the span of the row and column indicator matrices: exactly the
//! matrices of the form `x_ij = r_i + c_j`. The cone `K = S ∩ R+` holds
//! the states good schedulers collapse towards; the distance `|q_perp_K|`
//! from that cone is the collapse metric. The subspace projection has a
//! closed form; the cone projection runs Dykstra's alternating method
//! between `S` and the nonnegative orthant with correction terms.
//!
//! Everything here is generic over the floating scalar; the crate root
//! fixes `f64` aliases for simulator use.

use crate::mat::Square;
use crate::switch::QueueMatrix;
use num_traits::Float;
use thiserror::Error;

/// Default stop threshold on the change between successive iterates.
pub const DEFAULT_TOL: f64 = 1e-9;
/// Default iteration budget before the projection reports failure.
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("cone projection did not converge within {iters} iterations (last change {residual:e})")]
    NonConvergence { iters: usize, residual: f64 },
}

/// An orthogonal split `x = parallel + perp` relative to `S` or `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposition<F> {
    pub parallel: Square<F>,
    pub perp: Square<F>,
}

impl<F: Float> Decomposition<F> {
    pub fn norm_parallel(&self) -> F {
        frobenius_norm(&self.parallel)
    }

    pub fn norm_perp(&self) -> F {
        frobenius_norm(&self.perp)
    }
}

/// Frobenius norm of a matrix.
pub fn frobenius_norm<F: Float>(m: &Square<F>) -> F {
    m.as_slice()
        .iter()
        .fold(F::zero(), |acc, &v| acc + v * v)
        .sqrt()
}

fn cast<F: Float>(v: usize) -> F {
    F::from(v).expect("small integer fits any float")
}

/// Orthogonal projection onto `S` via the closed form
/// `x_par_ij = row_mean_i + col_mean_j - grand_mean`.
pub fn project_subspace<F: Float>(x: &Square<F>) -> Decomposition<F> {
    let n = x.n();
    let inv_n = F::one() / cast::<F>(n);
    let mut row = vec![F::zero(); n];
    let mut col = vec![F::zero(); n];
    let mut grand = F::zero();
    for ((i, j), &v) in x.indexed() {
        row[i] = row[i] + v;
        col[j] = col[j] + v;
        grand = grand + v;
    }
    for v in row.iter_mut().chain(col.iter_mut()) {
        *v = *v * inv_n;
    }
    grand = grand * inv_n * inv_n;
    let parallel = Square::from_fn(n, |i, j| row[i] + col[j] - grand);
    let perp = Square::from_fn(n, |i, j| x[(i, j)] - parallel[(i, j)]);
    Decomposition { parallel, perp }
}

/// Orthogonal projection onto the cone `K = S ∩ R+` with the default
/// tolerance and iteration budget.
pub fn project_cone<F: Float>(x: &Square<F>) -> Result<Decomposition<F>, GeometryError> {
    project_cone_with(x, F::from(DEFAULT_TOL).expect("tolerance fits the scalar"), DEFAULT_MAX_ITER)
}

/// Dykstra's alternating projection between `S` and the nonnegative
/// orthant. Stops once successive iterates move less than `tol` in
/// Frobenius norm; errors if `max_iter` rounds pass first.
pub fn project_cone_with<F: Float>(
    x: &Square<F>,
    tol: F,
    max_iter: usize,
) -> Result<Decomposition<F>, GeometryError> {
    let n = x.n();
    let mut cur = x.clone();
    let mut corr_subspace = Square::filled(n, F::zero());
    let mut corr_orthant = Square::filled(n, F::zero());
    let mut residual = F::infinity();
    for _ in 0..max_iter {
        let shifted = Square::from_fn(n, |i, j| cur[(i, j)] + corr_subspace[(i, j)]);
        let onto_s = project_subspace(&shifted).parallel;
        corr_subspace = Square::from_fn(n, |i, j| shifted[(i, j)] - onto_s[(i, j)]);

        let shifted = Square::from_fn(n, |i, j| onto_s[(i, j)] + corr_orthant[(i, j)]);
        let onto_plus = shifted.map(|v| v.max(F::zero()));
        corr_orthant = Square::from_fn(n, |i, j| shifted[(i, j)] - onto_plus[(i, j)]);

        residual = frobenius_norm(&Square::from_fn(n, |i, j| onto_plus[(i, j)] - cur[(i, j)]));
        cur = onto_plus;
        if residual <= tol {
            let perp = Square::from_fn(n, |i, j| x[(i, j)] - cur[(i, j)]);
            return Ok(Decomposition { parallel: cur, perp });
        }
    }
    Err(GeometryError::NonConvergence {
        iters: max_iter,
        residual: residual.to_f64().unwrap_or(f64::NAN),
    })
}

/// Collapse metrics of a queue state, all relative to Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SscSample {
    /// Distance from the cone `K`.
    pub norm_perp_cone: f64,
    /// Length of the cone component.
    pub norm_parallel_cone: f64,
    /// Distance from the subspace `S`.
    pub norm_perp_subspace: f64,
}

/// Computes the collapse metrics of `q` on the simulator scalar.
pub fn ssc_metrics(q: &QueueMatrix) -> Result<SscSample, GeometryError> {
    let x = q.matrix().map(|v| v as f64);
    let sub = project_subspace(&x);
    let cone = project_cone(&x)?;
    Ok(SscSample {
        norm_perp_cone: cone.norm_perp(),
        norm_parallel_cone: cone.norm_parallel(),
        norm_perp_subspace: sub.norm_perp(),
    })
}
