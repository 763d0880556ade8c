//! The slot-by-slot simulation loop and the replication driver.
//!
//! Each slot observes the queues, asks the policy for a schedule, then
//! applies departures and fresh arrivals in one update. Recording is
//! opt-in per series so long runs keep a small footprint: total queue
//! length is thinned, collapse metrics are sampled on their own period,
//! and the full per-decision trace is only kept when an audit asks.

use crate::geometry::{ssc_metrics, GeometryError, SscSample};
use crate::metrics::DecisionRecord;
use crate::sched::{max_weight_value, Policy, PolicyError, SchedulerState};
use crate::switch::{step, weight, QueueMatrix, SwitchError};
use crate::traffic::{sample_arrivals, TrafficSpec};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Switch(#[from] SwitchError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("horizon must be at least 1 slot")]
    ZeroHorizon,
    #[error("thinning period must be at least 1")]
    ZeroThinning,
    #[error("collapse sampling period must be at least 1")]
    ZeroSscPeriod,
    #[error("need at least 1 replication")]
    ZeroReplications,
}

/// What to run and which series to keep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimSettings {
    /// Number of slots to simulate.
    pub horizon: u64,
    /// Record total queue length every this many slots.
    pub thinning: u64,
    /// Record collapse metrics every this many slots, if at all.
    pub ssc_every: Option<u64>,
    /// Keep the per-slot decision trace for audits.
    pub record_decisions: bool,
}

impl SimSettings {
    pub fn new(horizon: u64) -> SimSettings {
        SimSettings { horizon, thinning: 10, ssc_every: None, record_decisions: false }
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.horizon == 0 {
            return Err(SimError::ZeroHorizon);
        }
        if self.thinning == 0 {
            return Err(SimError::ZeroThinning);
        }
        if self.ssc_every == Some(0) {
            return Err(SimError::ZeroSscPeriod);
        }
        Ok(())
    }
}

/// Everything recorded from one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    /// Total queue length at the start of every `thinning`-th slot.
    pub sum_series: Vec<f64>,
    /// Collapse metrics on their own sampling grid.
    pub ssc_series: Vec<SscSample>,
    /// Per-slot decision records, when requested.
    pub trace: Vec<DecisionRecord>,
    pub slots: u64,
    /// Total queue length after the last slot.
    pub final_total: i128,
    /// Packets that arrived over the run.
    pub total_arrivals: i128,
    /// Packets actually transmitted over the run.
    pub total_served: i128,
}

/// Simulates one trajectory from empty queues.
pub fn run_trajectory<R: Rng>(
    traffic: &TrafficSpec,
    policy: Policy,
    settings: &SimSettings,
    rng: &mut R,
) -> Result<RunRecord, SimError> {
    settings.validate()?;
    let n = traffic.n();
    let mut state = SchedulerState::new(n, policy)?;
    let mut q = QueueMatrix::zeros(n)?;

    let mut sum_series = Vec::with_capacity((settings.horizon / settings.thinning + 1) as usize);
    let mut ssc_series = Vec::new();
    let mut trace = Vec::new();
    if settings.record_decisions {
        trace.reserve(settings.horizon as usize);
    }
    let mut total_arrivals: i128 = 0;
    let mut total_served: i128 = 0;

    for t in 0..settings.horizon {
        if t % settings.thinning == 0 {
            sum_series.push(q.total() as f64);
        }
        if let Some(k) = settings.ssc_every {
            if t % k == 0 {
                ssc_series.push(ssc_metrics(&q)?);
            }
        }
        let prev_weight = weight(&q, state.previous());
        let decision = state.decide(&q, rng);
        if settings.record_decisions {
            trace.push(DecisionRecord {
                chosen_weight: weight(&q, &decision.schedule),
                max_weight: max_weight_value(&q),
                prev_weight,
                solver_ran: decision.solver_ran,
            });
        }
        let arrivals = sample_arrivals(traffic, rng);
        total_arrivals += arrivals.as_slice().iter().map(|&a| a as i128).sum::<i128>();
        let outcome = step(&q, &arrivals, &decision.schedule)?;
        for ((i, j), &u) in outcome.unused.indexed() {
            if decision.schedule.output_of(i) == j && u == 0 {
                total_served += 1;
            }
        }
        q = outcome.next;
    }

    Ok(RunRecord {
        sum_series,
        ssc_series,
        trace,
        slots: settings.horizon,
        final_total: q.total(),
        total_arrivals,
        total_served,
    })
}

/// The deterministic generator for replication `rep` of a master seed.
/// Streams keep replications independent while any one of them stays
/// reproducible in isolation.
pub fn replication_rng(master_seed: u64, rep: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(u64::from(rep));
    rng
}

/// Runs `replications` independent trajectories, spread over at most
/// `threads` worker threads. Results are ordered by replication index
/// and do not depend on the thread count.
pub fn run_replications(
    traffic: &TrafficSpec,
    policy: Policy,
    settings: &SimSettings,
    master_seed: u64,
    replications: u32,
    threads: usize,
) -> Result<Vec<RunRecord>, SimError> {
    if replications == 0 {
        return Err(SimError::ZeroReplications);
    }
    settings.validate()?;
    let workers = threads.max(1).min(replications as usize);
    if workers == 1 {
        let mut out = Vec::with_capacity(replications as usize);
        for rep in 0..replications {
            let mut rng = replication_rng(master_seed, rep);
            out.push(run_trajectory(traffic, policy, settings, &mut rng)?);
        }
        return Ok(out);
    }

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<RunRecord, SimError>>>> =
        Mutex::new((0..replications).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let rep = next.fetch_add(1, Ordering::Relaxed);
                if rep >= replications as usize {
                    break;
                }
                let mut rng = replication_rng(master_seed, rep as u32);
                let result = run_trajectory(traffic, policy, settings, &mut rng);
                slots.lock().expect("result mutex")[rep] = Some(result);
            });
        }
    });
    slots
        .into_inner()
        .expect("result mutex")
        .into_iter()
        .map(|r| r.expect("every replication ran"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{audit_mw_recovery, audit_weight_gap, estimate_mean};
    use crate::traffic::{make_uniform, ArrivalFamily};

    fn uniform(n: usize, epsilon: f64) -> TrafficSpec {
        make_uniform(n, epsilon, ArrivalFamily::Bernoulli).unwrap()
    }

    #[test]
    fn settings_are_validated() {
        let traffic = uniform(3, 0.2);
        let mut rng = replication_rng(1, 0);
        let bad = SimSettings { horizon: 0, ..SimSettings::new(1) };
        assert_eq!(
            run_trajectory(&traffic, Policy::MaxWeight, &bad, &mut rng).unwrap_err(),
            SimError::ZeroHorizon
        );
        let bad = SimSettings { thinning: 0, ..SimSettings::new(10) };
        assert_eq!(
            run_trajectory(&traffic, Policy::MaxWeight, &bad, &mut rng).unwrap_err(),
            SimError::ZeroThinning
        );
        let bad = SimSettings { ssc_every: Some(0), ..SimSettings::new(10) };
        assert_eq!(
            run_trajectory(&traffic, Policy::MaxWeight, &bad, &mut rng).unwrap_err(),
            SimError::ZeroSscPeriod
        );
        assert_eq!(
            run_replications(&traffic, Policy::MaxWeight, &SimSettings::new(10), 1, 0, 1)
                .unwrap_err(),
            SimError::ZeroReplications
        );
    }

    #[test]
    fn packet_flow_balances_exactly() {
        let traffic = uniform(4, 0.2);
        let mut rng = replication_rng(0x51A0, 0);
        let settings = SimSettings { thinning: 1, ..SimSettings::new(4000) };
        let rec = run_trajectory(&traffic, Policy::Random, &settings, &mut rng).unwrap();
        assert_eq!(rec.sum_series.len(), 4000);
        assert_eq!(rec.sum_series[0], 0.0);
        assert_eq!(rec.final_total, rec.total_arrivals - rec.total_served);
        assert!(rec.final_total >= 0);
    }

    #[test]
    fn same_seed_reproduces_and_streams_differ() {
        let traffic = uniform(3, 0.15);
        let settings = SimSettings { record_decisions: true, ..SimSettings::new(2000) };
        let mut a = replication_rng(7, 0);
        let mut b = replication_rng(7, 0);
        let mut c = replication_rng(7, 1);
        let ra = run_trajectory(&traffic, Policy::PowerOfD { d: 2 }, &settings, &mut a).unwrap();
        let rb = run_trajectory(&traffic, Policy::PowerOfD { d: 2 }, &settings, &mut b).unwrap();
        let rc = run_trajectory(&traffic, Policy::PowerOfD { d: 2 }, &settings, &mut c).unwrap();
        assert_eq!(ra, rb);
        assert_ne!(ra.sum_series, rc.sum_series);
    }

    #[test]
    fn replication_results_ignore_thread_count() {
        let traffic = uniform(3, 0.2);
        let settings = SimSettings::new(3000);
        let serial =
            run_replications(&traffic, Policy::MaxWeight, &settings, 42, 4, 1).unwrap();
        let parallel =
            run_replications(&traffic, Policy::MaxWeight, &settings, 42, 4, 3).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial.len(), 4);
        assert_ne!(serial[0].sum_series, serial[1].sum_series);
    }

    #[test]
    fn max_weight_trace_attains_the_max_every_slot() {
        let traffic = uniform(4, 0.2);
        let mut rng = replication_rng(0x51A1, 0);
        let settings = SimSettings { record_decisions: true, ..SimSettings::new(5000) };
        let rec = run_trajectory(&traffic, Policy::MaxWeight, &settings, &mut rng).unwrap();
        let audit = audit_mw_recovery(&rec.trace);
        assert_eq!(audit.mw_slots, 5000);
        assert_eq!(audit.monotonicity_violations, 0);
        assert_eq!(audit.solver_slots, 5000);
    }

    #[test]
    fn bursty_trace_respects_its_weight_gap_bound() {
        let traffic = uniform(4, 0.2);
        let mut rng = replication_rng(0x51A2, 0);
        let settings = SimSettings { record_decisions: true, ..SimSettings::new(20_000) };
        let m = 5u32;
        let rec =
            run_trajectory(&traffic, Policy::BurstyMaxWeight { m }, &settings, &mut rng).unwrap();
        let threshold = 2 * i64::from(m) * 4 * traffic.a_max();
        let audit = audit_weight_gap(&rec.trace, threshold);
        assert_eq!(audit.violations, 0, "max gap {}", audit.max_gap);
        assert!(audit.max_gap > 0, "bursty runs should trail the max sometimes");
    }

    #[test]
    fn collapse_series_samples_on_its_own_grid() {
        let traffic = uniform(3, 0.2);
        let mut rng = replication_rng(0x51A3, 0);
        let settings = SimSettings { ssc_every: Some(250), ..SimSettings::new(5000) };
        let rec = run_trajectory(&traffic, Policy::MaxWeight, &settings, &mut rng).unwrap();
        assert_eq!(rec.ssc_series.len(), 20);
        for s in &rec.ssc_series {
            assert!(s.norm_perp_cone.is_finite() && s.norm_perp_cone >= 0.0);
            assert!(s.norm_parallel_cone.is_finite());
            assert!(s.norm_perp_subspace <= s.norm_perp_cone + 1e-9);
        }
    }

    #[test]
    fn moderate_load_stays_stable_under_max_weight() {
        let traffic = uniform(4, 0.3);
        let mut rng = replication_rng(0x51A4, 0);
        let settings = SimSettings { thinning: 5, ..SimSettings::new(40_000) };
        let rec = run_trajectory(&traffic, Policy::MaxWeight, &settings, &mut rng).unwrap();
        let est = estimate_mean(&rec.sum_series, 0.2, 30).unwrap();
        assert!(est.mean > 0.5, "queues should not be empty on average");
        assert!(est.mean < 100.0, "mean total queue {} blew up", est.mean);
    }
}
