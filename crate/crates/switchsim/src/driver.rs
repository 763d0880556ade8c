//! Turns a validated config into simulation runs and result rows.
//!
//! A config expands into work units, one per (sweep value, scheduler)
//! pair in sweep-major order. Every unit runs its replications with the
//! same master seed, so replication `r` sees identical arrival
//! randomness across units and scheduler comparisons are paired.
//! Aggregation across replications uses a Student-t interval over the
//! per-replication means; a single replication falls back to its
//! batch-means interval.

use crate::config::{Config, ConfigError, MetricKind, SweepAxis};
use crate::metrics::{
    audit_mw_recovery, audit_weight_gap, estimate_mean, Estimate, MetricsError,
};
use crate::report::Row;
use crate::sched::Policy;
use crate::sim::{run_replications, RunRecord, SimError, SimSettings};
use crate::traffic::{ArrivalFamily, TrafficSpec};
use thiserror::Error;

/// Batches used for every within-run confidence interval.
pub const BATCHES: usize = 30;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("estimation failed: {0}")]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Unsupported(String),
}

/// One fully resolved simulation: a switch size, a traffic spec, and a
/// policy.
#[derive(Debug, Clone)]
pub struct WorkUnit {
    pub n: usize,
    pub traffic: TrafficSpec,
    pub traffic_label: &'static str,
    pub policy: Policy,
}

/// Expands the config into work units in sweep-major order.
pub fn expand(config: &Config) -> Result<Vec<WorkUnit>, ConfigError> {
    let mut units = Vec::new();
    let mut push_for = |n: usize, sweep_eps: Option<f64>, sweep_d: Option<u32>| -> Result<(), ConfigError> {
        for sched in config.scheduler.as_slice() {
            units.push(WorkUnit {
                n,
                traffic: config.traffic.build(n, sweep_eps)?,
                traffic_label: config.traffic.kind.label(),
                policy: sched.to_policy(sweep_d)?,
            });
        }
        Ok(())
    };
    match &config.sweep {
        None => push_for(config.sizes()?[0], None, None)?,
        Some(sweep) => match sweep.axis {
            SweepAxis::Epsilon => {
                for &v in &sweep.values {
                    push_for(config.sizes()?[0], Some(v), None)?;
                }
            }
            SweepAxis::Load => {
                for &v in &sweep.values {
                    push_for(config.sizes()?[0], Some(1.0 - v), None)?;
                }
            }
            SweepAxis::D => {
                for &v in &sweep.values {
                    push_for(config.sizes()?[0], None, Some(v as u32))?;
                }
            }
            SweepAxis::N => {
                for n in config.sizes()? {
                    push_for(n, None, None)?;
                }
            }
        },
    }
    Ok(units)
}

fn family_label(family: ArrivalFamily) -> &'static str {
    match family {
        ArrivalFamily::Bernoulli => "bernoulli",
        ArrivalFamily::ScaledBernoulli { .. } => "scaled_bernoulli",
    }
}

fn base_row(config: &Config, unit: &WorkUnit, metric: &str) -> Row {
    Row {
        n: unit.n,
        traffic: unit.traffic_label.to_string(),
        family: family_label(unit.traffic.family()).to_string(),
        a_max: unit.traffic.a_max(),
        epsilon: unit.traffic.epsilon(),
        load: unit.traffic.load(),
        scheduler: unit.policy.name().to_string(),
        d: unit.policy.d(),
        m: unit.policy.m(),
        delta: unit.policy.delta(),
        horizon: config.horizon,
        warmup_fraction: config.warmup_fraction,
        thinning: config.thinning,
        replications: config.replications,
        master_seed: config.master_seed,
        metric: metric.to_string(),
        mean: 0.0,
        ci_half_width: 0.0,
        samples: 0,
    }
}

/// Combines per-replication estimates: one replication keeps its own
/// interval, several get a t interval over their means.
fn aggregate(per_rep: &[Estimate]) -> Result<(f64, f64, u64), MetricsError> {
    let samples: u64 = per_rep.iter().map(|e| e.samples as u64).sum();
    if per_rep.len() == 1 {
        return Ok((per_rep[0].mean, per_rep[0].half_width, samples));
    }
    let means: Vec<f64> = per_rep.iter().map(|e| e.mean).collect();
    let combined = estimate_mean(&means, 0.0, means.len())?;
    Ok((combined.mean, combined.half_width, samples))
}

/// Combines per-replication fractions the same way, with zero width
/// when only one replication ran.
fn aggregate_fractions(fractions: &[f64], samples: u64) -> Result<(f64, f64, u64), MetricsError> {
    if fractions.len() == 1 {
        return Ok((fractions[0], 0.0, samples));
    }
    let combined = estimate_mean(fractions, 0.0, fractions.len())?;
    Ok((combined.mean, combined.half_width, samples))
}

fn count_row(config: &Config, unit: &WorkUnit, metric: &str, value: f64, samples: u64) -> Row {
    Row { mean: value, samples, ..base_row(config, unit, metric) }
}

fn metric_rows(
    config: &Config,
    unit: &WorkUnit,
    metric: MetricKind,
    records: &[RunRecord],
) -> Result<Vec<Row>, DriverError> {
    let warmup = config.warmup_fraction;
    let total_slots: u64 = records.iter().map(|r| r.slots).sum();
    match metric {
        MetricKind::ScaledQ => {
            let eps = unit.traffic.epsilon();
            let per_rep: Vec<Estimate> = records
                .iter()
                .map(|rec| estimate_mean(&rec.sum_series, warmup, BATCHES).map(|e| e.scaled(eps)))
                .collect::<Result<_, _>>()?;
            let (mean, hw, samples) = aggregate(&per_rep)?;
            let mut row = base_row(config, unit, "scaled_q");
            row.mean = mean;
            row.ci_half_width = hw;
            row.samples = samples;
            Ok(vec![row])
        }
        MetricKind::Ssc => {
            let mut rows = Vec::new();
            let components: [(&str, fn(&crate::geometry::SscSample) -> f64); 3] = [
                ("ssc_perp_cone", |s| s.norm_perp_cone),
                ("ssc_parallel_cone", |s| s.norm_parallel_cone),
                ("ssc_perp_subspace", |s| s.norm_perp_subspace),
            ];
            for (name, extract) in components {
                let per_rep: Vec<Estimate> = records
                    .iter()
                    .map(|rec| {
                        let series: Vec<f64> = rec.ssc_series.iter().map(extract).collect();
                        estimate_mean(&series, warmup, BATCHES)
                    })
                    .collect::<Result<_, _>>()?;
                let (mean, hw, samples) = aggregate(&per_rep)?;
                let mut row = base_row(config, unit, name);
                row.mean = mean;
                row.ci_half_width = hw;
                row.samples = samples;
                rows.push(row);
            }
            Ok(rows)
        }
        MetricKind::Pi2Audit => {
            let m = unit.policy.m().ok_or_else(|| {
                DriverError::Unsupported(format!(
                    "pi2_audit needs a scheduler with recompute period m, got {}",
                    unit.policy.name()
                ))
            })?;
            let threshold = 2 * i64::from(m) * unit.n as i64 * unit.traffic.a_max();
            let mut violations = 0u64;
            let mut max_gap = 0i64;
            for rec in records {
                let audit = audit_weight_gap(&rec.trace, threshold);
                violations += audit.violations;
                max_gap = max_gap.max(audit.max_gap);
            }
            Ok(vec![
                count_row(config, unit, "pi2_violations", violations as f64, total_slots),
                count_row(config, unit, "pi2_max_gap", max_gap as f64, total_slots),
            ])
        }
        MetricKind::Pi3Audit => {
            let mut monotonicity = 0u64;
            let mut max_gap = 0u32;
            let mut gap_count = 0u64;
            let mut mw_fracs = Vec::new();
            let mut solver_fracs = Vec::new();
            for rec in records {
                let audit = audit_mw_recovery(&rec.trace);
                monotonicity += audit.monotonicity_violations;
                max_gap = max_gap.max(audit.gaps.iter().copied().max().unwrap_or(0));
                gap_count += audit.gaps.len() as u64;
                mw_fracs.push(audit.mw_fraction());
                solver_fracs.push(audit.solver_fraction());
            }
            let (mw_mean, mw_hw, _) = aggregate_fractions(&mw_fracs, total_slots)?;
            let (sv_mean, sv_hw, _) = aggregate_fractions(&solver_fracs, total_slots)?;
            let mut mw_row = base_row(config, unit, "pi3_mw_fraction");
            mw_row.mean = mw_mean;
            mw_row.ci_half_width = mw_hw;
            mw_row.samples = total_slots;
            let mut sv_row = base_row(config, unit, "pi3_solver_fraction");
            sv_row.mean = sv_mean;
            sv_row.ci_half_width = sv_hw;
            sv_row.samples = total_slots;
            Ok(vec![
                count_row(config, unit, "pi3_monotonicity_violations", monotonicity as f64, total_slots),
                mw_row,
                sv_row,
                count_row(config, unit, "pi3_max_recovery_gap", f64::from(max_gap), gap_count),
            ])
        }
        MetricKind::Tau => {
            let mut gaps: Vec<u32> = Vec::new();
            for rec in records {
                gaps.extend(audit_mw_recovery(&rec.trace).gaps);
            }
            gaps.sort_unstable();
            let count = gaps.len() as u64;
            let mean = if gaps.is_empty() {
                0.0
            } else {
                gaps.iter().map(|&g| f64::from(g)).sum::<f64>() / count as f64
            };
            let p99 = gaps
                .get(((gaps.len() as f64 * 0.99).ceil() as usize).saturating_sub(1))
                .copied()
                .unwrap_or(0);
            let max = gaps.last().copied().unwrap_or(0);
            Ok(vec![
                count_row(config, unit, "tau_mean", mean, count),
                count_row(config, unit, "tau_p99", f64::from(p99), count),
                count_row(config, unit, "tau_max", f64::from(max), count),
            ])
        }
    }
}

/// Runs every work unit of the config and returns the result rows.
pub fn run_config(config: &Config, threads: usize) -> Result<Vec<Row>, DriverError> {
    let units = expand(config)?;
    let needs_trace = config
        .metrics
        .iter()
        .any(|m| matches!(m, MetricKind::Pi2Audit | MetricKind::Pi3Audit | MetricKind::Tau));
    let wants_ssc = config.metrics.contains(&MetricKind::Ssc);
    let settings = SimSettings {
        horizon: config.horizon,
        thinning: config.thinning,
        ssc_every: wants_ssc.then_some(config.ssc_every),
        record_decisions: needs_trace,
    };
    let mut rows = Vec::new();
    for unit in &units {
        let records = run_replications(
            &unit.traffic,
            unit.policy,
            &settings,
            config.master_seed,
            config.replications,
            threads,
        )?;
        for &metric in &config.metrics {
            rows.extend(metric_rows(config, unit, metric, &records)?);
        }
    }
    Ok(rows)
}
