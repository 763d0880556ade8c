//! Admissible traffic: arrival rate construction and per-slot sampling.
//!
//! Arrival rates are built as `lambda = (1 - epsilon) * nu` where `nu` is
//! doubly stochastic, so `epsilon` is the distance to the capacity
//! boundary and `1 - epsilon` the offered load. Doubly stochastic
//! matrices are constructed as convex combinations of permutation
//! matrices, which keeps row and column sums exact by construction.
//! Arrivals are drawn independently across slots and across port pairs.

use crate::mat::Square;
use crate::switch::Schedule;
use rand::Rng;
use thiserror::Error;

const WEIGHT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("epsilon must lie in (0, 1), got {0}")]
    BadEpsilon(f64),
    #[error("switch needs at least 2 ports, got {0}")]
    TooFewPorts(usize),
    #[error("mixture is empty")]
    EmptyMixture,
    #[error("mixture weights must be positive, got {0}")]
    NonPositiveWeight(f64),
    #[error("mixture weights sum to {0}, expected 1 within {WEIGHT_SUM_TOL:e}")]
    WeightsDoNotSumToOne(f64),
    #[error("mixture permutation has {got} ports, expected {expected}")]
    MixtureSizeMismatch { expected: usize, got: usize },
    #[error("a_max must be at least 1")]
    BadPeakRate,
}

/// Per-slot arrival distribution of a single (input, output) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArrivalFamily {
    /// 0/1 arrivals: `a ~ Bernoulli(lambda)`.
    Bernoulli,
    /// Batched arrivals `a = a_max * Bernoulli(lambda / a_max)`, keeping
    /// the mean at `lambda` with a peak of `a_max` packets per slot.
    ScaledBernoulli { a_max: u32 },
}

impl ArrivalFamily {
    pub fn a_max(&self) -> i64 {
        match *self {
            ArrivalFamily::Bernoulli => 1,
            ArrivalFamily::ScaledBernoulli { a_max } => i64::from(a_max),
        }
    }
}

/// A fully resolved arrival process for one experiment.
#[derive(Debug, Clone)]
pub struct TrafficSpec {
    n: usize,
    epsilon: f64,
    family: ArrivalFamily,
    nu: Square<f64>,
    lambda: Square<f64>,
    nu_min: f64,
}

impl TrafficSpec {
    fn assemble(n: usize, epsilon: f64, nu: Square<f64>, family: ArrivalFamily) -> Result<Self, TrafficError> {
        if n < 2 {
            return Err(TrafficError::TooFewPorts(n));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(TrafficError::BadEpsilon(epsilon));
        }
        if family.a_max() < 1 {
            return Err(TrafficError::BadPeakRate);
        }
        let lambda = nu.map(|v| (1.0 - epsilon) * v);
        let nu_min = nu.as_slice().iter().copied().fold(f64::INFINITY, f64::min);
        Ok(TrafficSpec { n, epsilon, family, nu, lambda, nu_min })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Offered load `1 - epsilon`.
    pub fn load(&self) -> f64 {
        1.0 - self.epsilon
    }

    pub fn family(&self) -> ArrivalFamily {
        self.family
    }

    /// Peak packets per slot on one pair.
    pub fn a_max(&self) -> i64 {
        self.family.a_max()
    }

    /// The doubly stochastic saturation matrix.
    pub fn nu(&self) -> &Square<f64> {
        &self.nu
    }

    /// Mean arrival rates `(1 - epsilon) * nu`.
    pub fn lambda(&self) -> &Square<f64> {
        &self.lambda
    }

    /// Smallest entry of `nu`; zero disables the geometric drift bounds
    /// that assume every pair sees traffic.
    pub fn nu_min(&self) -> f64 {
        self.nu_min
    }

    /// Per-pair arrival variances.
    pub fn sigma2(&self) -> Square<f64> {
        match self.family {
            ArrivalFamily::Bernoulli => self.lambda.map(|l| l * (1.0 - l)),
            ArrivalFamily::ScaledBernoulli { a_max } => {
                let a = f64::from(a_max);
                self.lambda.map(|l| {
                    let p = l / a;
                    a * a * p * (1.0 - p)
                })
            }
        }
    }

    /// Total arrival variance `sum_ij sigma^2_ij`.
    pub fn sigma_norm2(&self) -> f64 {
        self.sigma2().as_slice().iter().sum()
    }

    /// Non-fatal observations about the construction.
    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.nu_min <= 0.0 {
            out.push("nu_min = 0: some port pairs carry no traffic, so bounds that divide by nu_min do not apply".to_string());
        }
        out
    }
}

/// Uniform traffic: every pair at rate `(1 - epsilon) / n`.
pub fn make_uniform(n: usize, epsilon: f64, family: ArrivalFamily) -> Result<TrafficSpec, TrafficError> {
    if n < 2 {
        return Err(TrafficError::TooFewPorts(n));
    }
    let nu = Square::filled(n, 1.0 / n as f64);
    TrafficSpec::assemble(n, epsilon, nu, family)
}

/// Non-uniform traffic from an explicit convex combination of
/// permutation matrices.
pub fn make_nonuniform(
    n: usize,
    epsilon: f64,
    mixture: &[(f64, Schedule)],
    family: ArrivalFamily,
) -> Result<TrafficSpec, TrafficError> {
    if n < 2 {
        return Err(TrafficError::TooFewPorts(n));
    }
    if mixture.is_empty() {
        return Err(TrafficError::EmptyMixture);
    }
    let mut total = 0.0;
    for (alpha, perm) in mixture {
        if *alpha <= 0.0 {
            return Err(TrafficError::NonPositiveWeight(*alpha));
        }
        if perm.n() != n {
            return Err(TrafficError::MixtureSizeMismatch { expected: n, got: perm.n() });
        }
        total += alpha;
    }
    if (total - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(TrafficError::WeightsDoNotSumToOne(total));
    }
    let mut nu = Square::filled(n, 0.0);
    for (alpha, perm) in mixture {
        for i in 0..n {
            nu[(i, perm.output_of(i))] += alpha;
        }
    }
    TrafficSpec::assemble(n, epsilon, nu, family)
}

/// The cyclic shift `i -> (i + k) mod n`.
pub fn rotation(n: usize, k: usize) -> Schedule {
    Schedule::from_map((0..n).map(|i| (i + k) % n).collect()).expect("rotation is a permutation")
}

/// Built-in non-uniform pattern: 0.6 parts uniform plus 0.4 parts of a
/// geometrically weighted mix of the n cyclic shifts, so traffic leans
/// onto the diagonal while every pair keeps a strictly positive rate.
pub fn nonuniform_preset(n: usize, epsilon: f64, family: ArrivalFamily) -> Result<TrafficSpec, TrafficError> {
    if n < 2 {
        return Err(TrafficError::TooFewPorts(n));
    }
    let geo_total = 2.0 - (2.0f64).powi(1 - n as i32);
    let mixture: Vec<(f64, Schedule)> = (0..n)
        .map(|k| {
            let alpha = 0.6 / n as f64 + 0.4 * (2.0f64).powi(-(k as i32)) / geo_total;
            (alpha, rotation(n, k))
        })
        .collect();
    make_nonuniform(n, epsilon, &mixture, family)
}

/// Draws one slot of arrivals: independent entries, each 0 or the peak.
pub fn sample_arrivals<R: Rng>(spec: &TrafficSpec, rng: &mut R) -> Square<i64> {
    let a_max = spec.a_max();
    let scale = a_max as f64;
    Square::from_fn(spec.n, |i, j| {
        let p = spec.lambda[(i, j)] / scale;
        if rng.random::<f64>() < p {
            a_max
        } else {
            0
        }
    })
}
