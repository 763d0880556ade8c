//! Schedulers: one decision per slot, from exact maximum-weight matching
//! down to constant-time randomized heuristics.
//!
//! Stateless building blocks (`random_schedule`, `power_of_d`,
//! `flip_step`, `random_d_flip`) are free functions. Policies that carry
//! memory between slots (previous schedule, recompute counters, the
//! pipeline buffer) run through [`SchedulerState`].

mod assignment;

pub use assignment::{max_weight_argmax, max_weight_matching, max_weight_value};

use crate::switch::{weight, QueueMatrix, Schedule};
use rand::seq::SliceRandom;
use rand::Rng;
use std::collections::VecDeque;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("{policy}: {message}")]
    InvalidParameter { policy: &'static str, message: String },
}

/// Scheduling policy and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Policy {
    /// Exact maximum-weight matching every slot.
    MaxWeight,
    /// Uniformly random matching every slot.
    Random,
    /// Best of d uniformly random matchings.
    PowerOfD { d: u32 },
    /// Fresh random matching improved by d flip steps.
    RandomDFlip { d: u32 },
    /// Previous schedule improved by d flip steps.
    DFlip { d: u32 },
    /// Maximum-weight matching recomputed every m-th slot; the recompute
    /// counter restarts whenever the switch drains empty.
    BurstyMaxWeight { m: u32 },
    /// Maximum-weight matching of the queues m slots ago.
    PipelinedMaxWeight { m: u32 },
    /// Recompute maximum weight with probability delta, else keep the
    /// previous schedule.
    RandomlyDelayedMaxWeight { delta: f64 },
    /// Power-of-d candidate kept only if it beats the previous schedule.
    PickAndCompare { d: u32 },
}

impl Policy {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::MaxWeight => "maxweight",
            Policy::Random => "random",
            Policy::PowerOfD { .. } => "power_of_d",
            Policy::RandomDFlip { .. } => "random_d_flip",
            Policy::DFlip { .. } => "d_flip",
            Policy::BurstyMaxWeight { .. } => "bursty_mw",
            Policy::PipelinedMaxWeight { .. } => "pipelined_mw",
            Policy::RandomlyDelayedMaxWeight { .. } => "randomly_delayed_mw",
            Policy::PickAndCompare { .. } => "pick_and_compare",
        }
    }

    pub fn d(&self) -> Option<u32> {
        match *self {
            Policy::PowerOfD { d } | Policy::RandomDFlip { d } | Policy::DFlip { d } | Policy::PickAndCompare { d } => Some(d),
            _ => None,
        }
    }

    pub fn m(&self) -> Option<u32> {
        match *self {
            Policy::BurstyMaxWeight { m } | Policy::PipelinedMaxWeight { m } => Some(m),
            _ => None,
        }
    }

    pub fn delta(&self) -> Option<f64> {
        match *self {
            Policy::RandomlyDelayedMaxWeight { delta } => Some(delta),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let bad = |message: String| PolicyError::InvalidParameter { policy: self.name(), message };
        if let Some(d) = self.d() {
            if d == 0 {
                return Err(bad("d must be at least 1".into()));
            }
        }
        if let Some(m) = self.m() {
            if m == 0 {
                return Err(bad("m must be at least 1".into()));
            }
        }
        if let Some(delta) = self.delta() {
            if !(delta > 0.0 && delta <= 1.0) {
                return Err(bad(format!("delta must lie in (0, 1], got {delta}")));
            }
        }
        Ok(())
    }
}

/// A uniformly random matching (Fisher-Yates shuffle of the outputs).
pub fn random_schedule<R: Rng>(n: usize, rng: &mut R) -> Schedule {
    let mut map: Vec<usize> = (0..n).collect();
    map.shuffle(rng);
    Schedule::from_map(map).expect("shuffle keeps a permutation")
}

/// Best of d random matchings; on equal weight the earliest draw wins.
pub fn power_of_d<R: Rng>(q: &QueueMatrix, d: u32, rng: &mut R) -> Schedule {
    debug_assert!(d >= 1);
    let mut best = random_schedule(q.n(), rng);
    let mut best_w = weight(q, &best);
    for _ in 1..d {
        let cand = random_schedule(q.n(), rng);
        let w = weight(q, &cand);
        if w > best_w {
            best = cand;
            best_w = w;
        }
    }
    best
}

/// Uniform draw of two distinct inputs.
fn random_distinct_pair<R: Rng>(n: usize, rng: &mut R) -> (usize, usize) {
    let i = rng.random_range(0..n);
    let mut k = rng.random_range(0..n - 1);
    if k >= i {
        k += 1;
    }
    (i, k)
}

/// One flip on the fixed input pair {i, k}: the outputs are exchanged
/// exactly when that strictly increases the schedule weight.
pub fn flip_step_pair(q: &QueueMatrix, s: &Schedule, i: usize, k: usize) -> Schedule {
    let mut out = s.clone();
    flip_pair_in_place(q, &mut out, i, k);
    out
}

fn flip_pair_in_place(q: &QueueMatrix, s: &mut Schedule, i: usize, k: usize) {
    let kept = q.get(i, s.output_of(i)) + q.get(k, s.output_of(k));
    let swapped = q.get(i, s.output_of(k)) + q.get(k, s.output_of(i));
    if swapped > kept {
        s.swap_outputs(i, k);
    }
}

fn flip_once<R: Rng>(q: &QueueMatrix, s: &mut Schedule, rng: &mut R) {
    let (i, k) = random_distinct_pair(s.n(), rng);
    flip_pair_in_place(q, s, i, k);
}

/// One flip on a uniformly random pair of matched edges.
pub fn flip_step<R: Rng>(q: &QueueMatrix, s: &Schedule, rng: &mut R) -> Schedule {
    let mut out = s.clone();
    flip_once(q, &mut out, rng);
    out
}

/// Fresh random matching improved by d flips.
pub fn random_d_flip<R: Rng>(q: &QueueMatrix, d: u32, rng: &mut R) -> Schedule {
    let mut s = random_schedule(q.n(), rng);
    for _ in 0..d {
        flip_once(q, &mut s, rng);
    }
    s
}

/// One slot's scheduling decision.
#[derive(Debug, Clone)]
pub struct Decision {
    pub schedule: Schedule,
    /// Whether the exact matching solver ran this slot.
    pub solver_ran: bool,
    /// Schedules sampled or flips applied by randomized policies.
    pub candidates: u32,
}

/// Per-run scheduler memory.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    policy: Policy,
    prev: Schedule,
    pipeline: VecDeque<Schedule>,
    counter: u32,
}

impl SchedulerState {
    /// Fresh state for an n-port switch. Policies bootstrap from the
    /// identity schedule.
    pub fn new(n: usize, policy: Policy) -> Result<Self, PolicyError> {
        policy.validate()?;
        let pipeline = match policy {
            Policy::PipelinedMaxWeight { m } => (0..m).map(|_| Schedule::identity(n)).collect(),
            _ => VecDeque::new(),
        };
        Ok(SchedulerState { policy, prev: Schedule::identity(n), pipeline, counter: 0 })
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    /// The schedule applied on the previous slot (identity before the
    /// first decision).
    pub fn previous(&self) -> &Schedule {
        &self.prev
    }

    /// Chooses the schedule for the current slot, given queues `q`.
    pub fn decide<R: Rng>(&mut self, q: &QueueMatrix, rng: &mut R) -> Decision {
        match self.policy {
            Policy::MaxWeight => {
                self.prev = max_weight_argmax(q).1;
                Decision { schedule: self.prev.clone(), solver_ran: true, candidates: 1 }
            }
            Policy::Random => {
                self.prev = random_schedule(q.n(), rng);
                Decision { schedule: self.prev.clone(), solver_ran: false, candidates: 1 }
            }
            Policy::PowerOfD { d } => {
                self.prev = power_of_d(q, d, rng);
                Decision { schedule: self.prev.clone(), solver_ran: false, candidates: d }
            }
            Policy::RandomDFlip { d } => {
                self.prev = random_d_flip(q, d, rng);
                Decision { schedule: self.prev.clone(), solver_ran: false, candidates: d }
            }
            Policy::DFlip { d } => {
                let mut s = self.prev.clone();
                for _ in 0..d {
                    flip_once(q, &mut s, rng);
                }
                self.prev = s.clone();
                Decision { schedule: s, solver_ran: false, candidates: d }
            }
            Policy::BurstyMaxWeight { m } => {
                if q.is_zero() {
                    self.counter = 0;
                }
                let ran = self.counter == 0;
                if ran {
                    self.prev = max_weight_argmax(q).1;
                }
                self.counter = (self.counter + 1) % m;
                Decision { schedule: self.prev.clone(), solver_ran: ran, candidates: 1 }
            }
            Policy::PipelinedMaxWeight { .. } => {
                self.pipeline.push_back(max_weight_argmax(q).1);
                let s = self.pipeline.pop_front().expect("pipeline holds m schedules");
                self.prev = s.clone();
                Decision { schedule: s, solver_ran: true, candidates: 1 }
            }
            Policy::RandomlyDelayedMaxWeight { delta } => {
                let ran = rng.random::<f64>() < delta;
                if ran {
                    self.prev = max_weight_argmax(q).1;
                }
                Decision { schedule: self.prev.clone(), solver_ran: ran, candidates: 1 }
            }
            Policy::PickAndCompare { d } => {
                let cand = power_of_d(q, d, rng);
                if weight(q, &cand) > weight(q, &self.prev) {
                    self.prev = cand;
                }
                Decision { schedule: self.prev.clone(), solver_ran: false, candidates: d }
            }
        }
    }
}
