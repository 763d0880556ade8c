//! Estimation and audit tools for simulation output.
//!
//! Steady-state means come from the batch-means method: discard a warmup
//! prefix, split the rest into equal batches, and build a Student-t
//! confidence interval over the batch means. The audit helpers consume
//! per-slot decision records and check the structural guarantees the
//! scheduler classes promise (bounded weight gap, weight monotonicity,
//! geometric recovery to a max weight schedule).

use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("warmup fraction {0} must lie in [0, 1)")]
    BadWarmup(f64),
    #[error("need at least 2 batches, got {0}")]
    BadBatchCount(usize),
    #[error("series too short: {have} points after warmup, need at least {need}")]
    SeriesTooShort { have: usize, need: usize },
}

/// A point estimate with a symmetric confidence interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
    pub batches: usize,
    pub samples: usize,
}

impl Estimate {
    pub fn contains(&self, value: f64) -> bool {
        (value - self.mean).abs() <= self.half_width
    }

    /// Rescales the interval; exact because the transform is linear.
    pub fn scaled(self, factor: f64) -> Estimate {
        Estimate {
            mean: self.mean * factor,
            half_width: self.half_width * factor.abs(),
            ..self
        }
    }
}

/// Batch-means estimate of the steady-state mean of `series` at 95%
/// confidence. The first `warmup_fraction` of the series is dropped and
/// any remainder that does not fill `num_batches` equal batches is
/// trimmed from the front so the latest data is always used.
pub fn estimate_mean(
    series: &[f64],
    warmup_fraction: f64,
    num_batches: usize,
) -> Result<Estimate, MetricsError> {
    if !(0.0..1.0).contains(&warmup_fraction) {
        return Err(MetricsError::BadWarmup(warmup_fraction));
    }
    if num_batches < 2 {
        return Err(MetricsError::BadBatchCount(num_batches));
    }
    let skip = (series.len() as f64 * warmup_fraction).floor() as usize;
    let kept = series.len() - skip;
    if kept < num_batches {
        return Err(MetricsError::SeriesTooShort { have: kept, need: num_batches });
    }
    let batch_size = kept / num_batches;
    let used = batch_size * num_batches;
    let data = &series[series.len() - used..];

    let batch_means: Vec<f64> = data
        .chunks_exact(batch_size)
        .map(|chunk| chunk.iter().sum::<f64>() / batch_size as f64)
        .collect();
    let b = num_batches as f64;
    let mean = batch_means.iter().sum::<f64>() / b;
    let var = batch_means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1.0);
    let t = StudentsT::new(0.0, 1.0, b - 1.0)
        .expect("valid t distribution")
        .inverse_cdf(0.975);
    Ok(Estimate {
        mean,
        half_width: t * (var / b).sqrt(),
        batches: num_batches,
        samples: used,
    })
}

/// One scheduler decision, scored against the queue state it acted on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DecisionRecord {
    /// Weight of the schedule actually applied this slot.
    pub chosen_weight: i64,
    /// Weight of a max weight schedule for the same queue state.
    pub max_weight: i64,
    /// Weight of the previous slot's schedule re-scored on this slot's
    /// queues.
    pub prev_weight: i64,
    /// Whether the policy ran its full solver this slot.
    pub solver_ran: bool,
}

/// Result of checking the bounded weight gap guarantee.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GapAudit {
    pub slots: usize,
    pub violations: u64,
    pub max_gap: i64,
}

/// Counts slots where the applied schedule trails the max weight by more
/// than `threshold`.
pub fn audit_weight_gap(trace: &[DecisionRecord], threshold: i64) -> GapAudit {
    let mut violations = 0;
    let mut max_gap = 0;
    for rec in trace {
        let gap = rec.max_weight - rec.chosen_weight;
        max_gap = max_gap.max(gap);
        if gap > threshold {
            violations += 1;
        }
    }
    GapAudit { slots: trace.len(), violations, max_gap }
}

/// Result of checking the recover-to-max-weight guarantees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MwAudit {
    pub slots: usize,
    /// Slots whose applied schedule attains the max weight.
    pub mw_slots: usize,
    /// Slots where the policy ran its full solver.
    pub solver_slots: usize,
    /// Slots where the new schedule scored below the old one on the same
    /// queues.
    pub monotonicity_violations: u64,
    /// Distances between consecutive max weight slots.
    pub gaps: Vec<u32>,
}

impl MwAudit {
    pub fn mw_fraction(&self) -> f64 {
        self.mw_slots as f64 / self.slots as f64
    }

    pub fn solver_fraction(&self) -> f64 {
        self.solver_slots as f64 / self.slots as f64
    }

    /// Fraction of recorded gaps strictly larger than `c`.
    pub fn gap_ccdf(&self, c: u32) -> f64 {
        if self.gaps.is_empty() {
            return 0.0;
        }
        let above = self.gaps.iter().filter(|&&g| g > c).count();
        above as f64 / self.gaps.len() as f64
    }
}

/// Scans a trace for max weight attainment, solver activity, weight
/// monotonicity violations, and the gaps between max weight slots.
pub fn audit_mw_recovery(trace: &[DecisionRecord]) -> MwAudit {
    let mut mw_slots = 0;
    let mut solver_slots = 0;
    let mut monotonicity_violations = 0;
    let mut gaps = Vec::new();
    let mut last_mw: Option<usize> = None;
    for (t, rec) in trace.iter().enumerate() {
        if rec.solver_ran {
            solver_slots += 1;
        }
        if rec.chosen_weight < rec.prev_weight {
            monotonicity_violations += 1;
        }
        if rec.chosen_weight == rec.max_weight {
            mw_slots += 1;
            if let Some(prev) = last_mw {
                gaps.push((t - prev) as u32);
            }
            last_mw = Some(t);
        }
    }
    MwAudit {
        slots: trace.len(),
        mw_slots,
        solver_slots,
        monotonicity_violations,
        gaps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::SmallRng;
    use rand::{Rng, SeedableRng};

    #[test]
    fn alternating_series_has_exact_mean_and_no_spread() {
        let series: Vec<f64> = (0..600).map(|t| (t % 2) as f64).collect();
        let est = estimate_mean(&series, 0.0, 30).unwrap();
        assert_eq!(est.mean, 0.5);
        assert_eq!(est.half_width, 0.0);
        assert_eq!(est.samples, 600);
    }

    #[test]
    fn warmup_drops_a_prefix() {
        // First half is garbage; the estimator must ignore it.
        let mut series = vec![1000.0; 500];
        series.extend(std::iter::repeat(2.0).take(500));
        let est = estimate_mean(&series, 0.5, 10).unwrap();
        assert_eq!(est.mean, 2.0);
        assert_eq!(est.half_width, 0.0);
    }

    #[test]
    fn bad_parameters_are_rejected() {
        let series = vec![1.0; 100];
        assert_eq!(estimate_mean(&series, 1.0, 10).unwrap_err(), MetricsError::BadWarmup(1.0));
        assert_eq!(estimate_mean(&series, -0.1, 10).unwrap_err(), MetricsError::BadWarmup(-0.1));
        assert_eq!(estimate_mean(&series, 0.2, 1).unwrap_err(), MetricsError::BadBatchCount(1));
        assert_eq!(
            estimate_mean(&series, 0.9, 30).unwrap_err(),
            MetricsError::SeriesTooShort { have: 10, need: 30 }
        );
    }

    #[test]
    fn interval_covers_the_truth_at_nominal_rate() {
        // 100 independent estimates of a known mean; the 95% interval
        // should cover it close to 95 times. Binomial(100, .95) puts
        // 88+ successes at probability > 0.999.
        let mut rng = SmallRng::seed_from_u64(0x43A1);
        let mut covered = 0;
        for _ in 0..100 {
            let series: Vec<f64> = (0..3000).map(|_| rng.random::<f64>()).collect();
            let est = estimate_mean(&series, 0.2, 30).unwrap();
            if est.contains(0.5) {
                covered += 1;
            }
        }
        assert!(covered >= 88, "covered only {covered}/100");
    }

    #[test]
    fn scaling_is_linear_in_mean_and_width() {
        let est = Estimate { mean: 4.0, half_width: 0.5, batches: 30, samples: 900 };
        let scaled = est.scaled(-0.25);
        assert_eq!(scaled.mean, -1.0);
        assert_eq!(scaled.half_width, 0.125);
    }

    fn rec(chosen: i64, max: i64, prev: i64, ran: bool) -> DecisionRecord {
        DecisionRecord { chosen_weight: chosen, max_weight: max, prev_weight: prev, solver_ran: ran }
    }

    #[test]
    fn gap_audit_counts_threshold_crossings() {
        let trace = [rec(10, 10, 0, true), rec(7, 10, 0, false), rec(2, 10, 0, false)];
        let audit = audit_weight_gap(&trace, 4);
        assert_eq!(audit.slots, 3);
        assert_eq!(audit.violations, 1);
        assert_eq!(audit.max_gap, 8);
    }

    #[test]
    fn recovery_audit_extracts_gaps_and_fractions() {
        // MW at slots 0, 3, 4; solver at 0 and 3; one monotonicity dip.
        let trace = [
            rec(10, 10, 0, true),
            rec(8, 11, 9, false),
            rec(9, 12, 9, false),
            rec(12, 12, 9, true),
            rec(13, 13, 13, false),
        ];
        let audit = audit_mw_recovery(&trace);
        assert_eq!(audit.mw_slots, 3);
        assert_eq!(audit.solver_slots, 2);
        assert_eq!(audit.monotonicity_violations, 1);
        assert_eq!(audit.gaps, vec![3, 1]);
        assert!((audit.mw_fraction() - 0.6).abs() < 1e-12);
        assert!((audit.solver_fraction() - 0.4).abs() < 1e-12);
        assert_eq!(audit.gap_ccdf(0), 1.0);
        assert!((audit.gap_ccdf(1) - 0.5).abs() < 1e-12);
        assert_eq!(audit.gap_ccdf(3), 0.0);
    }

    #[test]
    fn geometric_gaps_match_their_ccdf_bound() {
        // Gaps drawn as Geometric(delta) must sit under (1-delta)^c.
        let delta = 0.3;
        let mut rng = SmallRng::seed_from_u64(0x43A2);
        let mut gaps = Vec::new();
        for _ in 0..20000 {
            let mut g = 1u32;
            while rng.random::<f64>() >= delta {
                g += 1;
            }
            gaps.push(g);
        }
        let audit = MwAudit {
            slots: 0,
            mw_slots: 0,
            solver_slots: 0,
            monotonicity_violations: 0,
            gaps,
        };
        let n = 20000f64;
        for c in 0..15u32 {
            let bound = (1.0 - delta).powi(c as i32);
            let slack = 4.0 * (bound * (1.0 - bound) / n).sqrt();
            assert!(
                audit.gap_ccdf(c) <= bound + slack,
                "ccdf({c}) = {} exceeds {bound} + {slack}",
                audit.gap_ccdf(c)
            );
        }
    }
}
