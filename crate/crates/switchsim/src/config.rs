//! JSON run configuration: schema, defaults, and validation.
//!
//! A config names the switch size, the traffic pattern, one or more
//! schedulers, and the run lengths. An optional sweep block varies a
//! single axis (`epsilon`, `load`, `d`, or `n`) across a list of values;
//! the swept quantity must then be omitted from its usual spot so every
//! value has exactly one source.

use crate::sched::Policy;
use crate::switch::Schedule;
use crate::traffic::{self, ArrivalFamily, TrafficSpec};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

/// Accepts either a single value or a list for the same key.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    pub fn as_slice(&self) -> &[T] {
        match self {
            OneOrMany::One(v) => std::slice::from_ref(v),
            OneOrMany::Many(vs) => vs,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrafficKind {
    Uniform,
    NonuniformPreset,
    Birkhoff,
}

impl TrafficKind {
    pub fn label(&self) -> &'static str {
        match self {
            TrafficKind::Uniform => "uniform",
            TrafficKind::NonuniformPreset => "nonuniform_preset",
            TrafficKind::Birkhoff => "birkhoff",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    #[default]
    Bernoulli,
    ScaledBernoulli,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureEntry {
    pub weight: f64,
    pub map: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    pub kind: TrafficKind,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub load: Option<f64>,
    #[serde(default)]
    pub family: FamilyKind,
    #[serde(default)]
    pub a_max: Option<u32>,
    #[serde(default)]
    pub mixture: Option<Vec<MixtureEntry>>,
}

impl TrafficConfig {
    pub fn arrival_family(&self) -> Result<ArrivalFamily, ConfigError> {
        match (self.family, self.a_max) {
            (FamilyKind::Bernoulli, None) => Ok(ArrivalFamily::Bernoulli),
            (FamilyKind::Bernoulli, Some(_)) => {
                Err(invalid("a_max only applies to the scaled_bernoulli family"))
            }
            (FamilyKind::ScaledBernoulli, Some(a_max)) => {
                Ok(ArrivalFamily::ScaledBernoulli { a_max })
            }
            (FamilyKind::ScaledBernoulli, None) => {
                Err(invalid("scaled_bernoulli requires a_max"))
            }
        }
    }

    /// The slack value to run at, combining the inline `epsilon`/`load`
    /// pair with an optional sweep-supplied value.
    pub fn epsilon_for(&self, sweep_value: Option<f64>) -> Result<f64, ConfigError> {
        if let Some(eps) = sweep_value {
            if self.epsilon.is_some() || self.load.is_some() {
                return Err(invalid(
                    "traffic.epsilon and traffic.load must be omitted when sweeping epsilon or load",
                ));
            }
            return Ok(eps);
        }
        match (self.epsilon, self.load) {
            (Some(eps), None) => Ok(eps),
            (None, Some(load)) => Ok(1.0 - load),
            (None, None) => Err(invalid("traffic needs exactly one of epsilon or load")),
            (Some(_), Some(_)) => Err(invalid("traffic takes epsilon or load, not both")),
        }
    }

    /// Builds the runtime traffic spec for switch size `n`.
    pub fn build(&self, n: usize, sweep_epsilon: Option<f64>) -> Result<TrafficSpec, ConfigError> {
        let epsilon = self.epsilon_for(sweep_epsilon)?;
        let family = self.arrival_family()?;
        match self.kind {
            TrafficKind::Uniform => {
                if self.mixture.is_some() {
                    return Err(invalid("mixture only applies to the birkhoff kind"));
                }
                traffic::make_uniform(n, epsilon, family).map_err(|e| invalid(e.to_string()))
            }
            TrafficKind::NonuniformPreset => {
                if self.mixture.is_some() {
                    return Err(invalid("mixture only applies to the birkhoff kind"));
                }
                traffic::nonuniform_preset(n, epsilon, family).map_err(|e| invalid(e.to_string()))
            }
            TrafficKind::Birkhoff => {
                let entries = self
                    .mixture
                    .as_ref()
                    .ok_or_else(|| invalid("birkhoff traffic requires a mixture"))?;
                let mut mixture = Vec::with_capacity(entries.len());
                for entry in entries {
                    if entry.map.len() != n {
                        return Err(invalid(format!(
                            "mixture map {:?} does not match n = {n}",
                            entry.map
                        )));
                    }
                    let schedule = Schedule::from_map(entry.map.clone())
                        .map_err(|e| invalid(e.to_string()))?;
                    mixture.push((entry.weight, schedule));
                }
                traffic::make_nonuniform(n, epsilon, &mixture, family)
                    .map_err(|e| invalid(e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchedulerConfig {
    pub name: String,
    #[serde(default)]
    pub d: Option<u32>,
    #[serde(default)]
    pub m: Option<u32>,
    #[serde(default)]
    pub delta: Option<f64>,
}

impl SchedulerConfig {
    fn reject_params(&self, allow_d: bool, allow_m: bool, allow_delta: bool) -> Result<(), ConfigError> {
        if self.d.is_some() && !allow_d {
            return Err(invalid(format!("scheduler {} does not take d", self.name)));
        }
        if self.m.is_some() && !allow_m {
            return Err(invalid(format!("scheduler {} does not take m", self.name)));
        }
        if self.delta.is_some() && !allow_delta {
            return Err(invalid(format!("scheduler {} does not take delta", self.name)));
        }
        Ok(())
    }

    fn required_d(&self, sweep_d: Option<u32>) -> Result<u32, ConfigError> {
        match (self.d, sweep_d) {
            (Some(_), Some(_)) => {
                Err(invalid(format!("scheduler {} must omit d while sweeping d", self.name)))
            }
            (Some(d), None) | (None, Some(d)) => Ok(d),
            (None, None) => Err(invalid(format!("scheduler {} requires d", self.name))),
        }
    }

    /// Whether the named policy takes a `d` parameter.
    pub fn takes_d(&self) -> bool {
        matches!(self.name.as_str(), "power_of_d" | "random_d_flip" | "d_flip" | "pick_and_compare")
    }

    /// Builds the runtime policy, with `sweep_d` supplying `d` when the
    /// config sweeps that axis.
    pub fn to_policy(&self, sweep_d: Option<u32>) -> Result<Policy, ConfigError> {
        let policy = match self.name.as_str() {
            "maxweight" => {
                self.reject_params(false, false, false)?;
                Policy::MaxWeight
            }
            "random" => {
                self.reject_params(false, false, false)?;
                Policy::Random
            }
            "power_of_d" => {
                self.reject_params(true, false, false)?;
                Policy::PowerOfD { d: self.required_d(sweep_d)? }
            }
            "random_d_flip" => {
                self.reject_params(true, false, false)?;
                Policy::RandomDFlip { d: self.required_d(sweep_d)? }
            }
            "d_flip" => {
                self.reject_params(true, false, false)?;
                Policy::DFlip { d: self.required_d(sweep_d)? }
            }
            "pick_and_compare" => {
                self.reject_params(true, false, false)?;
                Policy::PickAndCompare { d: self.required_d(sweep_d)? }
            }
            "bursty_mw" => {
                self.reject_params(false, true, false)?;
                let m = self.m.ok_or_else(|| invalid("bursty_mw requires m"))?;
                Policy::BurstyMaxWeight { m }
            }
            "pipelined_mw" => {
                self.reject_params(false, true, false)?;
                let m = self.m.ok_or_else(|| invalid("pipelined_mw requires m"))?;
                Policy::PipelinedMaxWeight { m }
            }
            "randomly_delayed_mw" => {
                self.reject_params(false, false, true)?;
                let delta = self.delta.ok_or_else(|| invalid("randomly_delayed_mw requires delta"))?;
                Policy::RandomlyDelayedMaxWeight { delta }
            }
            other => return Err(invalid(format!("unknown scheduler name {other:?}"))),
        };
        policy.validate().map_err(|e| invalid(e.to_string()))?;
        Ok(policy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    ScaledQ,
    Ssc,
    Pi2Audit,
    Pi3Audit,
    Tau,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Epsilon,
    Load,
    D,
    N,
}

impl SweepAxis {
    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::Epsilon => "epsilon",
            SweepAxis::Load => "load",
            SweepAxis::D => "d",
            SweepAxis::N => "n",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn default_warmup_fraction() -> f64 {
    0.2
}

fn default_thinning() -> u64 {
    10
}

fn default_ssc_every() -> u64 {
    100
}

fn default_replications() -> u32 {
    1
}

fn default_metrics() -> Vec<MetricKind> {
    vec![MetricKind::ScaledQ]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default)]
    pub n: Option<usize>,
    pub traffic: TrafficConfig,
    #[serde(alias = "schedulers")]
    pub scheduler: OneOrMany<SchedulerConfig>,
    pub horizon: u64,
    #[serde(default = "default_warmup_fraction")]
    pub warmup_fraction: f64,
    #[serde(default = "default_thinning")]
    pub thinning: u64,
    #[serde(default = "default_ssc_every")]
    pub ssc_every: u64,
    #[serde(default = "default_replications")]
    pub replications: u32,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricKind>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

impl Config {
    /// Parses and validates a JSON config.
    pub fn from_json(text: &str) -> Result<Config, ConfigError> {
        let config: Config = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Switch sizes this config runs at: the sweep values for an `n`
    /// sweep, otherwise the single top-level `n`.
    pub fn sizes(&self) -> Result<Vec<usize>, ConfigError> {
        match &self.sweep {
            Some(sweep) if sweep.axis == SweepAxis::N => sweep
                .values
                .iter()
                .map(|&v| {
                    let n = v as usize;
                    if v.fract() != 0.0 || n < 2 {
                        Err(invalid(format!("sweep value {v} is not a valid switch size")))
                    } else {
                        Ok(n)
                    }
                })
                .collect(),
            _ => {
                let n = self.n.ok_or_else(|| invalid("n is required unless sweeping n"))?;
                Ok(vec![n])
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.horizon == 0 {
            return Err(invalid("horizon must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.warmup_fraction) {
            return Err(invalid("warmup_fraction must lie in [0, 1)"));
        }
        if self.thinning == 0 {
            return Err(invalid("thinning must be at least 1"));
        }
        if self.ssc_every == 0 {
            return Err(invalid("ssc_every must be at least 1"));
        }
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        if self.metrics.is_empty() {
            return Err(invalid("metrics must not be empty"));
        }
        if self.scheduler.as_slice().is_empty() {
            return Err(invalid("at least one scheduler is required"));
        }

        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(invalid("sweep.values must not be empty"));
            }
            match sweep.axis {
                SweepAxis::Epsilon | SweepAxis::Load => {
                    if self.traffic.epsilon.is_some() || self.traffic.load.is_some() {
                        return Err(invalid(
                            "traffic.epsilon and traffic.load must be omitted when sweeping epsilon or load",
                        ));
                    }
                    for &v in &sweep.values {
                        if !(0.0 < v && v < 1.0) {
                            return Err(invalid(format!(
                                "sweep value {v} outside (0, 1) for axis {}",
                                sweep.axis.label()
                            )));
                        }
                    }
                }
                SweepAxis::D => {
                    for &v in &sweep.values {
                        if v.fract() != 0.0 || v < 1.0 {
                            return Err(invalid(format!("sweep value {v} is not a valid d")));
                        }
                    }
                    for sched in self.scheduler.as_slice() {
                        if !sched.takes_d() {
                            return Err(invalid(format!(
                                "scheduler {} cannot be swept over d",
                                sched.name
                            )));
                        }
                        if sched.d.is_some() {
                            return Err(invalid(format!(
                                "scheduler {} must omit d while sweeping d",
                                sched.name
                            )));
                        }
                    }
                }
                SweepAxis::N => {
                    if self.n.is_some() {
                        return Err(invalid("omit top-level n when sweeping n"));
                    }
                    if self.traffic.kind == TrafficKind::Birkhoff {
                        return Err(invalid(
                            "birkhoff traffic pins the mixture to one n and cannot sweep n",
                        ));
                    }
                }
            }
        }

        // Dry-build every (size, scheduler) combination so bad parameter
        // sets fail before any simulation starts.
        let sweep_d_probe = match &self.sweep {
            Some(s) if s.axis == SweepAxis::D => Some(s.values[0] as u32),
            _ => None,
        };
        for sched in self.scheduler.as_slice() {
            sched.to_policy(sweep_d_probe)?;
        }
        let sweep_eps_probe = match &self.sweep {
            Some(s) if s.axis == SweepAxis::Epsilon => Some(s.values[0]),
            Some(s) if s.axis == SweepAxis::Load => Some(1.0 - s.values[0]),
            _ => None,
        };
        for n in self.sizes()? {
            self.traffic.build(n, sweep_eps_probe)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "n": 4,
            "traffic": {"kind": "uniform", "epsilon": 0.1},
            "scheduler": {"name": "maxweight"},
            "horizon": 1000
        }"#
    }

    #[test]
    fn minimal_config_fills_defaults() {
        let config = Config::from_json(minimal()).unwrap();
        assert_eq!(config.sizes().unwrap(), vec![4]);
        assert_eq!(config.warmup_fraction, 0.2);
        assert_eq!(config.thinning, 10);
        assert_eq!(config.replications, 1);
        assert_eq!(config.master_seed, 0);
        assert_eq!(config.metrics, vec![MetricKind::ScaledQ]);
        assert!(config.sweep.is_none());
        let policy = config.scheduler.as_slice()[0].to_policy(None).unwrap();
        assert_eq!(policy, Policy::MaxWeight);
    }

    #[test]
    fn scheduler_list_and_parameters_parse() {
        let text = r#"{
            "n": 3,
            "traffic": {"kind": "uniform", "load": 0.9},
            "schedulers": [
                {"name": "power_of_d", "d": 2},
                {"name": "bursty_mw", "m": 5},
                {"name": "randomly_delayed_mw", "delta": 0.25}
            ],
            "horizon": 100,
            "metrics": ["scaled_q", "pi3_audit"]
        }"#;
        let config = Config::from_json(text).unwrap();
        let policies: Vec<Policy> = config
            .scheduler
            .as_slice()
            .iter()
            .map(|s| s.to_policy(None).unwrap())
            .collect();
        assert_eq!(
            policies,
            vec![
                Policy::PowerOfD { d: 2 },
                Policy::BurstyMaxWeight { m: 5 },
                Policy::RandomlyDelayedMaxWeight { delta: 0.25 },
            ]
        );
        let spec = config.traffic.build(3, None).unwrap();
        assert!((spec.epsilon() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn unknown_fields_and_names_are_rejected() {
        let unknown_top = r#"{"n": 4, "traffic": {"kind": "uniform", "epsilon": 0.1},
            "scheduler": {"name": "maxweight"}, "horizon": 10, "bogus": 1}"#;
        assert!(Config::from_json(unknown_top).is_err());

        let unknown_sched_key = minimal().replace(r#""name": "maxweight""#, r#""name": "maxweight", "k": 3"#);
        assert!(Config::from_json(&unknown_sched_key).is_err());

        let unknown_name = minimal().replace("maxweight", "roundrobin");
        let err = Config::from_json(&unknown_name).unwrap_err();
        assert!(err.to_string().contains("unknown scheduler"));
    }

    #[test]
    fn epsilon_load_exclusivity() {
        let both = minimal().replace(r#""epsilon": 0.1"#, r#""epsilon": 0.1, "load": 0.9"#);
        assert!(Config::from_json(&both).is_err());
        let neither = minimal().replace(r#", "epsilon": 0.1"#, "");
        assert!(Config::from_json(&neither).is_err());
    }

    #[test]
    fn parameter_rules_are_enforced() {
        let missing_d = minimal().replace(r#"{"name": "maxweight"}"#, r#"{"name": "power_of_d"}"#);
        assert!(Config::from_json(&missing_d).is_err());
        let stray_d = minimal().replace(r#"{"name": "maxweight"}"#, r#"{"name": "maxweight", "d": 2}"#);
        assert!(Config::from_json(&stray_d).is_err());
        let bad_delta = minimal()
            .replace(r#"{"name": "maxweight"}"#, r#"{"name": "randomly_delayed_mw", "delta": 1.5}"#);
        assert!(Config::from_json(&bad_delta).is_err());
    }

    #[test]
    fn birkhoff_round_trip() {
        let text = r#"{
            "n": 2,
            "traffic": {
                "kind": "birkhoff",
                "epsilon": 0.2,
                "mixture": [
                    {"weight": 0.75, "map": [0, 1]},
                    {"weight": 0.25, "map": [1, 0]}
                ]
            },
            "scheduler": {"name": "maxweight"},
            "horizon": 10
        }"#;
        let config = Config::from_json(text).unwrap();
        let spec = config.traffic.build(2, None).unwrap();
        assert!((spec.lambda()[(0, 0)] - 0.8 * 0.75).abs() < 1e-12);
        assert!((spec.lambda()[(0, 1)] - 0.8 * 0.25).abs() < 1e-12);

        let bad_map = text.replace("[1, 0]", "[1, 1]");
        assert!(Config::from_json(&bad_map).is_err());
        let missing_mixture = r#"{"n": 2, "traffic": {"kind": "birkhoff", "epsilon": 0.2},
            "scheduler": {"name": "maxweight"}, "horizon": 10}"#;
        assert!(Config::from_json(missing_mixture).is_err());
    }

    #[test]
    fn sweep_rules() {
        let eps_sweep = r#"{
            "n": 4,
            "traffic": {"kind": "uniform"},
            "scheduler": {"name": "maxweight"},
            "horizon": 100,
            "sweep": {"axis": "epsilon", "values": [0.2, 0.1, 0.05]}
        }"#;
        assert!(Config::from_json(eps_sweep).is_ok());
        let clash = eps_sweep.replace(r#"{"kind": "uniform"}"#, r#"{"kind": "uniform", "epsilon": 0.1}"#);
        assert!(Config::from_json(&clash).is_err());

        let d_sweep = r#"{
            "n": 4,
            "traffic": {"kind": "uniform", "epsilon": 0.1},
            "scheduler": {"name": "power_of_d"},
            "horizon": 100,
            "sweep": {"axis": "d", "values": [1, 2, 4]}
        }"#;
        assert!(Config::from_json(d_sweep).is_ok());
        let not_d = d_sweep.replace("power_of_d", "maxweight");
        assert!(Config::from_json(&not_d).is_err());
        let inline_d = d_sweep.replace(r#"{"name": "power_of_d"}"#, r#"{"name": "power_of_d", "d": 2}"#);
        assert!(Config::from_json(&inline_d).is_err());

        let n_sweep = r#"{
            "traffic": {"kind": "uniform", "epsilon": 0.1},
            "scheduler": {"name": "maxweight"},
            "horizon": 100,
            "sweep": {"axis": "n", "values": [4, 8, 16]}
        }"#;
        let config = Config::from_json(n_sweep).unwrap();
        assert_eq!(config.sizes().unwrap(), vec![4, 8, 16]);
        let with_n = n_sweep.replace(r#""traffic""#, r#""n": 4, "traffic""#);
        assert!(Config::from_json(&with_n).is_err());
    }
}
