//! Crossbar switch state and exact one-slot dynamics.
//!
//! An n x n input-queued switch keeps one virtual output queue per
//! (input, output) pair. Each time slot a scheduler picks a matching
//! (a permutation of outputs), every matched nonempty queue sends one
//! packet, and arrivals are added. The update is exact integer
//! arithmetic:
//!
//! ```text
//! q(t+1) = q(t) + a(t) - s(t) + u(t)
//! ```
//!
//! where `u` is the unused service (1 on matched empty queues) and
//! `<q(t+1), u(t)> = 0` always holds.

use crate::mat::Square;
use thiserror::Error;

/// Smallest supported switch size.
pub const MIN_PORTS: usize = 2;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SwitchError {
    #[error("switch needs at least {MIN_PORTS} ports, got {0}")]
    TooFewPorts(usize),
    #[error("dimension mismatch: expected {expected}x{expected}, got {got}x{got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("negative entry {value} at ({i}, {j})")]
    NegativeEntry { i: usize, j: usize, value: i64 },
    #[error("queue entry at ({i}, {j}) overflowed 64-bit range")]
    Overflow { i: usize, j: usize },
    #[error("schedule is not a permutation: {0:?}")]
    NotAPermutation(Vec<usize>),
}

/// Queue lengths of an n x n switch; entries are nonnegative packet counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueueMatrix {
    inner: Square<i64>,
}

impl QueueMatrix {
    /// An empty switch with n input and n output ports.
    pub fn zeros(n: usize) -> Result<Self, SwitchError> {
        if n < MIN_PORTS {
            return Err(SwitchError::TooFewPorts(n));
        }
        Ok(QueueMatrix { inner: Square::filled(n, 0) })
    }

    /// Builds a queue matrix from explicit entries, rejecting negatives.
    pub fn from_matrix(m: Square<i64>) -> Result<Self, SwitchError> {
        if m.n() < MIN_PORTS {
            return Err(SwitchError::TooFewPorts(m.n()));
        }
        for ((i, j), &v) in m.indexed() {
            if v < 0 {
                return Err(SwitchError::NegativeEntry { i, j, value: v });
            }
        }
        Ok(QueueMatrix { inner: m })
    }

    pub fn n(&self) -> usize {
        self.inner.n()
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.inner[(i, j)]
    }

    /// Read-only view of the underlying matrix.
    pub fn matrix(&self) -> &Square<i64> {
        &self.inner
    }

    /// Sum of all queue lengths. Exact for any representable state.
    pub fn total(&self) -> i128 {
        self.inner.as_slice().iter().map(|&v| v as i128).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.inner.as_slice().iter().all(|&v| v == 0)
    }
}

/// A crossbar matching: input i is wired to output `map[i]`.
///
/// Schedules order lexicographically by their output map, which is the
/// tie-break order used by the deterministic matching solver.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Schedule {
    map: Vec<usize>,
}

impl Schedule {
    /// The identity matching: input i to output i.
    pub fn identity(n: usize) -> Self {
        Schedule { map: (0..n).collect() }
    }

    /// Validates that `map` is a permutation of 0..n.
    pub fn from_map(map: Vec<usize>) -> Result<Self, SwitchError> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &j in &map {
            if j >= n || seen[j] {
                return Err(SwitchError::NotAPermutation(map));
            }
            seen[j] = true;
        }
        Ok(Schedule { map })
    }

    pub fn n(&self) -> usize {
        self.map.len()
    }

    /// Output port matched to input `i`.
    pub fn output_of(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_map(&self) -> &[usize] {
        &self.map
    }

    /// The 0/1 permutation matrix view of this matching.
    pub fn matrix(&self) -> Square<u8> {
        Square::from_fn(self.map.len(), |i, j| u8::from(self.map[i] == j))
    }

    /// Exchanges the outputs of inputs `i` and `k` in place.
    pub fn swap_outputs(&mut self, i: usize, k: usize) {
        self.map.swap(i, k);
    }
}

/// Result of one slot of switch dynamics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotOutcome {
    /// Queue lengths after the slot.
    pub next: QueueMatrix,
    /// Unused service: 1 exactly on scheduled queues that were empty.
    pub unused: Square<u8>,
}

/// Advances the switch one slot: `q(t+1) = [q(t) + a(t) - s(t)]^+`.
///
/// Arrivals must be nonnegative and all dimensions must match. Entries
/// that would leave 64-bit range abort with `SwitchError::Overflow`.
pub fn step(q: &QueueMatrix, arrivals: &Square<i64>, s: &Schedule) -> Result<SlotOutcome, SwitchError> {
    let n = q.n();
    if arrivals.n() != n {
        return Err(SwitchError::DimensionMismatch { expected: n, got: arrivals.n() });
    }
    if s.n() != n {
        return Err(SwitchError::DimensionMismatch { expected: n, got: s.n() });
    }
    let mut next = Square::filled(n, 0i64);
    let mut unused = Square::filled(n, 0u8);
    for i in 0..n {
        for j in 0..n {
            let a = arrivals[(i, j)];
            if a < 0 {
                return Err(SwitchError::NegativeEntry { i, j, value: a });
            }
            let served = i64::from(s.output_of(i) == j);
            let grown = q.get(i, j).checked_add(a).ok_or(SwitchError::Overflow { i, j })?;
            let after = grown - served;
            if after < 0 {
                // Only a scheduled empty queue can go negative; the slot
                // of service is wasted and the queue stays at zero.
                next[(i, j)] = 0;
                unused[(i, j)] = 1;
            } else {
                next[(i, j)] = after;
            }
        }
    }
    Ok(SlotOutcome { next: QueueMatrix { inner: next }, unused })
}

/// Schedule weight `<q, s>`: total queue length on the matched edges.
pub fn weight(q: &QueueMatrix, s: &Schedule) -> i64 {
    debug_assert_eq!(q.n(), s.n());
    let mut w = 0i64;
    for i in 0..q.n() {
        w = w.checked_add(q.get(i, s.output_of(i))).expect("schedule weight overflowed i64");
    }
    w
}
