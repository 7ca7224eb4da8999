//! Scenario configuration and random-stream plan.
//!
//! A run is fully determined by a [`ScenarioConfig`] and a master seed. The
//! config is read from a TOML document (flat keys plus dotted sections such as
//! `learning.rate_scale`); physical values may carry units and are stored in SI.

mod rng;
pub mod units;

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

pub use rng::{RngPlan, SimRng, Stream};
use units::{parse_quantity, Dimension};

use crate::error::{ConfigError, Error};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Oe,
    ChannelAware,
    QueueAware,
    Random,
}

impl PolicyKind {
    pub fn label(self) -> &'static str {
        match self {
            PolicyKind::Oe => "oe",
            PolicyKind::ChannelAware => "channel_aware",
            PolicyKind::QueueAware => "queue_aware",
            PolicyKind::Random => "random",
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        [
            PolicyKind::Oe,
            PolicyKind::ChannelAware,
            PolicyKind::QueueAware,
            PolicyKind::Random,
        ]
        .into_iter()
        .find(|p| p.label() == text)
    }
}

/// Distribution of the per-slot fading gain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingModel {
    /// Power gain of a unit-mean Rayleigh channel: Exp(1).
    Exponential,
    /// Raw Rayleigh amplitude with unit scale, used directly as the gain.
    RayleighAmplitude,
    /// No fading (gain fixed at 1).
    Unit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArrivalModel {
    Poisson,
    /// Exactly `round(arrival_rate)` packets every slot.
    Deterministic,
}

/// How a Q-factor entry absorbs a new sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QUpdate {
    /// Overwrite with the sample.
    Verbatim,
    /// Move toward the sample by the current learning rate.
    Smoothed,
}

/// What the learning-rate schedule counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateClock {
    /// Updates the agent has made so far, one per slot.
    Slots,
    /// Earlier updates of the same post-decision entry.
    Visits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningConfig {
    pub rate_scale: f64,
    pub rate_exponent: f64,
    pub init_value_v: f64,
    pub init_value_q: f64,
    pub convergence_epsilon: f64,
    pub convergence_window: usize,
    /// Probability of a uniformly random departure choice (0 = pure greedy).
    pub exploration: f64,
    pub q_update: QUpdate,
    pub rate_clock: RateClock,
}

impl Default for LearningConfig {
    fn default() -> Self {
        LearningConfig {
            rate_scale: 0.3,
            rate_exponent: 0.7,
            init_value_v: 0.0,
            init_value_q: 0.0,
            convergence_epsilon: 1e-3,
            convergence_window: 100,
            exploration: 0.0,
            q_update: QUpdate::Verbatim,
            rate_clock: RateClock::Slots,
        }
    }
}

impl LearningConfig {
    /// Learning rate after `count` ticks of the rate clock:
    /// `rate_scale / (1 + count)^rate_exponent`.
    pub fn rate(&self, count: u64) -> f64 {
        self.rate_scale / (1.0 + count as f64).powf(self.rate_exponent)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusteringConfig {
    /// Gaussian affinity width in meters.
    pub kernel_width: f64,
    pub restarts: usize,
    pub max_iterations: usize,
}

/// Complete, validated description of a scenario. All values are SI.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub num_pairs: usize,
    pub num_groups: usize,
    pub region_side: f64,
    pub num_intersections_per_axis: usize,
    pub lane_width: f64,
    pub vehicle_speed: f64,
    pub pair_distance: f64,
    pub intersection_radius: f64,
    /// Path loss scale for LOS/WLOS links (linear).
    pub pathloss_exponent_coeff: f64,
    /// Distance exponent of the path loss.
    pub pathloss_coefficient: f64,
    /// Path loss scale for NLOS links (linear).
    pub nlos_exponent: f64,
    pub bandwidth: f64,
    pub interference: f64,
    pub noise_psd: f64,
    pub slot_duration: f64,
    pub continue_prob: f64,
    pub power_weight: f64,
    pub packet_size: f64,
    pub max_power: f64,
    pub max_queue: usize,
    pub arrival_rate: f64,
    /// (straight, left, right)
    pub turn_probs: [f64; 3],
    pub horizon_slots: u64,
    pub warmup_slots: u64,
    pub learning: LearningConfig,
    pub clustering: ClusteringConfig,
    pub policy: PolicyKind,
    /// Per-agent policy overrides for mixed populations; empty means homogeneous.
    pub agent_policies: Vec<PolicyKind>,
    pub fading_model: FadingModel,
    pub arrival_model: ArrivalModel,
    /// When false, queues are never terminated (used for frozen test environments).
    pub termination: bool,
}

impl ScenarioConfig {
    pub fn policy_of(&self, agent: usize) -> PolicyKind {
        self.agent_policies.get(agent).copied().unwrap_or(self.policy)
    }

    /// Path loss of a link whose endpoints are `pair_distance` apart along a
    /// rectilinear trail (identical for LOS and WLOS).
    pub fn nominal_path_loss(&self) -> f64 {
        self.pathloss_exponent_coeff * self.pair_distance.powf(-self.pathloss_coefficient)
    }

    pub fn nlos_bound(&self) -> f64 {
        self.pathloss_exponent_coeff * (self.intersection_radius / 2.0).powf(self.pathloss_coefficient)
    }

    /// Check every invariant; the error names the first offending key.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("region_side", self.region_side),
            ("lane_width", self.lane_width),
            ("vehicle_speed", self.vehicle_speed),
            ("pair_distance", self.pair_distance),
            ("intersection_radius", self.intersection_radius),
            ("pathloss_exponent_coeff", self.pathloss_exponent_coeff),
            ("pathloss_coefficient", self.pathloss_coefficient),
            ("nlos_exponent", self.nlos_exponent),
            ("bandwidth", self.bandwidth),
            ("interference", self.interference),
            ("noise_psd", self.noise_psd),
            ("slot_duration", self.slot_duration),
            ("power_weight", self.power_weight),
            ("packet_size", self.packet_size),
            ("max_power", self.max_power),
            ("clustering.kernel_width", self.clustering.kernel_width),
        ];
        for (key, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(ConfigError::invalid(key, "must be finite and strictly positive"));
            }
        }
        if self.num_pairs == 0 {
            return Err(ConfigError::invalid("num_pairs", "must be at least 1"));
        }
        if self.num_groups == 0 {
            return Err(ConfigError::invalid("num_groups", "must be at least 1"));
        }
        if self.num_intersections_per_axis < 2 {
            return Err(ConfigError::invalid("num_intersections_per_axis", "must be at least 2"));
        }
        if !(self.continue_prob > 0.0 && self.continue_prob < 1.0) {
            return Err(ConfigError::invalid("continue_prob", "out of (0,1)"));
        }
        if self.pair_distance > self.intersection_radius {
            return Err(ConfigError::invalid(
                "pair_distance",
                "must not exceed intersection_radius",
            ));
        }
        if self.nlos_exponent >= self.nlos_bound() {
            return Err(ConfigError::invalid(
                "nlos_exponent",
                "must be below pathloss_exponent_coeff * (intersection_radius/2)^pathloss_coefficient",
            ));
        }
        if !(self.arrival_rate.is_finite() && self.arrival_rate >= 0.0) {
            return Err(ConfigError::invalid("arrival_rate", "must be finite and non-negative"));
        }
        if self.turn_probs.iter().any(|p| !(p.is_finite() && *p >= 0.0))
            || (self.turn_probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(ConfigError::invalid("turn_probs", "must be a probability simplex"));
        }
        if self.horizon_slots == 0 {
            return Err(ConfigError::invalid("horizon_slots", "must be at least 1"));
        }
        if self.warmup_slots >= self.horizon_slots {
            return Err(ConfigError::invalid("warmup_slots", "must be below horizon_slots"));
        }
        if !self.agent_policies.is_empty() && self.agent_policies.len() != self.num_pairs {
            return Err(ConfigError::invalid("agent_policies", "must list one policy per pair"));
        }
        let l = &self.learning;
        if !(l.rate_scale > 0.0 && l.rate_scale < 1.0) {
            return Err(ConfigError::invalid("learning.rate_scale", "out of (0,1)"));
        }
        if !(l.rate_exponent > 0.5 && l.rate_exponent <= 1.0) {
            return Err(ConfigError::invalid("learning.rate_exponent", "out of (0.5,1]"));
        }
        if !(l.init_value_v.is_finite() && l.init_value_q.is_finite()) {
            return Err(ConfigError::invalid("learning.init_value_v", "must be finite"));
        }
        if !(l.convergence_epsilon > 0.0) {
            return Err(ConfigError::invalid("learning.convergence_epsilon", "must be positive"));
        }
        if l.convergence_window == 0 {
            return Err(ConfigError::invalid("learning.convergence_window", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&l.exploration) {
            return Err(ConfigError::invalid("learning.exploration", "out of [0,1]"));
        }
        if self.clustering.restarts == 0 || self.clustering.max_iterations == 0 {
            return Err(ConfigError::invalid("clustering.restarts", "must be at least 1"));
        }
        Ok(())
    }
}

/// A parsed but not yet validated config document. Overrides are applied here
/// before [`ConfigDocument::build`] resolves defaults and validates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigDocument {
    table: Table,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let table: Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        Ok(ConfigDocument { table })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        Ok(Self::parse(&text)?)
    }

    /// Set a dotted key. `value` is read as a TOML value when it parses as
    /// one and kept as a string otherwise, so `--set vehicle_speed=40 km/h` works.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let parsed = format!("v = {value}")
            .parse::<Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(value.to_string()));
        let mut parts: Vec<&str> = key.split('.').collect();
        let leaf = parts.pop().filter(|s| !s.is_empty()).ok_or_else(|| {
            ConfigError::invalid(key, "is not a valid key")
        })?;
        let mut table = &mut self.table;
        for part in parts {
            let entry = table
                .entry(part.to_string())
                .or_insert_with(|| Value::Table(Table::new()));
            table = entry
                .as_table_mut()
                .ok_or_else(|| ConfigError::invalid(key, "crosses a non-table value"))?;
        }
        table.insert(leaf.to_string(), parsed);
        Ok(())
    }

    /// Apply a `key=value` assignment.
    pub fn apply_override(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::Parse(format!("override `{assignment}` is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    pub fn build(&self) -> Result<ScenarioConfig, ConfigError> {
        let mut r = Reader::new(&self.table);
        let rho = r.quantity("pathloss_exponent_coeff", Dimension::Ratio)?.unwrap_or(10f64.powf(-6.85));
        let e = r.quantity("pathloss_coefficient", Dimension::Dimensionless)?.unwrap_or(1.61);
        let phi0 = r.quantity("intersection_radius", Dimension::Length)?.unwrap_or(30.0);
        let region_side = r.quantity("region_side", Dimension::Length)?.unwrap_or(250.0);
        let num_pairs = r.integer("num_pairs")?.ok_or(ConfigError::Missing("num_pairs"))?;
        let defaults = LearningConfig::default();
        let learning = LearningConfig {
            rate_scale: r.quantity("learning.rate_scale", Dimension::Dimensionless)?.unwrap_or(defaults.rate_scale),
            rate_exponent: r
                .quantity("learning.rate_exponent", Dimension::Dimensionless)?
                .unwrap_or(defaults.rate_exponent),
            init_value_v: r
                .quantity("learning.init_value_v", Dimension::Dimensionless)?
                .unwrap_or(defaults.init_value_v),
            init_value_q: r
                .quantity("learning.init_value_q", Dimension::Dimensionless)?
                .unwrap_or(defaults.init_value_q),
            convergence_epsilon: r
                .quantity("learning.convergence_epsilon", Dimension::Dimensionless)?
                .unwrap_or(defaults.convergence_epsilon),
            convergence_window: r
                .integer("learning.convergence_window")?
                .unwrap_or(defaults.convergence_window),
            exploration: r
                .quantity("learning.exploration", Dimension::Dimensionless)?
                .unwrap_or(defaults.exploration),
            q_update: match r.string("learning.q_update")?.as_deref() {
                None | Some("verbatim") => QUpdate::Verbatim,
                Some("smoothed") => QUpdate::Smoothed,
                Some(other) => {
                    return Err(ConfigError::invalid("learning.q_update", format!("unknown variant `{other}`")))
                }
            },
            rate_clock: match r.string("learning.rate_clock")?.as_deref() {
                None | Some("slots") => RateClock::Slots,
                Some("visits") => RateClock::Visits,
                Some(other) => {
                    return Err(ConfigError::invalid("learning.rate_clock", format!("unknown variant `{other}`")))
                }
            },
        };
        let clustering = ClusteringConfig {
            kernel_width: r
                .quantity("clustering.kernel_width", Dimension::Length)?
                .unwrap_or(region_side / (num_pairs.max(1) as f64).sqrt()),
            restarts: r.integer("clustering.restarts")?.unwrap_or(20),
            max_iterations: r.integer("clustering.max_iterations")?.unwrap_or(100),
        };
        let policy = match r.string("policy")? {
            None => PolicyKind::Oe,
            Some(text) => PolicyKind::parse(&text)
                .ok_or_else(|| ConfigError::invalid("policy", format!("unknown policy `{text}`")))?,
        };
        let agent_policies = match r.take("agent_policies") {
            None => Vec::new(),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| v.as_str().and_then(PolicyKind::parse))
                .collect::<Option<Vec<_>>>()
                .ok_or_else(|| ConfigError::invalid("agent_policies", "must be an array of policy names"))?,
            Some(_) => return Err(ConfigError::invalid("agent_policies", "must be an array")),
        };
        let config = ScenarioConfig {
            num_pairs,
            num_groups: r.integer("num_groups")?.unwrap_or(15),
            region_side,
            num_intersections_per_axis: r.integer("num_intersections_per_axis")?.unwrap_or(3),
            lane_width: r.quantity("lane_width", Dimension::Length)?.unwrap_or(4.0),
            vehicle_speed: r.quantity("vehicle_speed", Dimension::Speed)?.unwrap_or(40.0 / 3.6),
            pair_distance: r
                .quantity("pair_distance", Dimension::Length)?
                .ok_or(ConfigError::Missing("pair_distance"))?,
            intersection_radius: phi0,
            pathloss_exponent_coeff: rho,
            pathloss_coefficient: e,
            nlos_exponent: r
                .quantity("nlos_exponent", Dimension::Ratio)?
                .unwrap_or(rho * (phi0 / 2.0).powf(e) / 2.0),
            bandwidth: r.quantity("bandwidth", Dimension::Frequency)?.unwrap_or(5e5),
            interference: r.quantity("interference", Dimension::Power)?.unwrap_or(2e-12),
            noise_psd: r
                .quantity("noise_psd", Dimension::PowerSpectralDensity)?
                .unwrap_or(3.98e-21),
            slot_duration: r.quantity("slot_duration", Dimension::Time)?.unwrap_or(9e-3),
            continue_prob: r.quantity("continue_prob", Dimension::Dimensionless)?.unwrap_or(0.1),
            power_weight: r.quantity("power_weight", Dimension::Dimensionless)?.unwrap_or(6.0),
            packet_size: r.quantity("packet_size", Dimension::Bits)?.unwrap_or(5000.0),
            max_power: r.quantity("max_power", Dimension::Power)?.unwrap_or(2.0),
            max_queue: r.integer("max_queue")?.ok_or(ConfigError::Missing("max_queue"))?,
            arrival_rate: r
                .quantity("arrival_rate", Dimension::Dimensionless)?
                .ok_or(ConfigError::Missing("arrival_rate"))?,
            turn_probs: r.triple("turn_probs")?.unwrap_or([0.5, 0.25, 0.25]),
            horizon_slots: r.integer("horizon_slots")?.map(|v| v as u64).unwrap_or(20_000),
            warmup_slots: r.integer("warmup_slots")?.map(|v| v as u64).unwrap_or(1_000),
            learning,
            clustering,
            policy,
            agent_policies,
            fading_model: match r.string("fading_model")?.as_deref() {
                None | Some("exponential") => FadingModel::Exponential,
                Some("rayleigh_amplitude") => FadingModel::RayleighAmplitude,
                Some("unit") => FadingModel::Unit,
                Some(other) => {
                    return Err(ConfigError::invalid("fading_model", format!("unknown variant `{other}`")))
                }
            },
            arrival_model: match r.string("arrival_model")?.as_deref() {
                None | Some("poisson") => ArrivalModel::Poisson,
                Some("deterministic") => ArrivalModel::Deterministic,
                Some(other) => {
                    return Err(ConfigError::invalid("arrival_model", format!("unknown variant `{other}`")))
                }
            },
            termination: r.boolean("termination")?.unwrap_or(true),
        };
        r.finish()?;
        config.validate()?;
        Ok(config)
    }
}

/// Parse and validate a config document.
pub fn load_config(text: &str) -> Result<ScenarioConfig, ConfigError> {
    ConfigDocument::parse(text)?.build()
}

/// Pulls dotted keys out of a TOML table and reports any key left unread.
struct Reader<'a> {
    table: &'a Table,
    consumed: BTreeSet<String>,
}

impl<'a> Reader<'a> {
    fn new(table: &'a Table) -> Self {
        Reader {
            table,
            consumed: BTreeSet::new(),
        }
    }

    fn take(&mut self, key: &str) -> Option<&'a Value> {
        self.consumed.insert(key.to_string());
        let mut parts = key.split('.');
        let mut value = self.table.get(parts.next()?)?;
        for part in parts {
            value = value.as_table()?.get(part)?;
        }
        Some(value)
    }

    fn quantity(&mut self, key: &str, dim: Dimension) -> Result<Option<f64>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::String(s)) => parse_quantity(s, dim)
                .map(Some)
                .map_err(|reason| ConfigError::invalid(key, reason)),
            Some(_) => Err(ConfigError::invalid(key, "must be a number or a quantity string")),
        }
    }

    fn integer(&mut self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as usize)),
            Some(_) => Err(ConfigError::invalid(key, "must be a non-negative integer")),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(_) => Err(ConfigError::invalid(key, "must be a string")),
        }
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>, ConfigError> {
        match self.take(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(_) => Err(ConfigError::invalid(key, "must be a boolean")),
        }
    }

    fn triple(&mut self, key: &str) -> Result<Option<[f64; 3]>, ConfigError> {
        let bad = || ConfigError::invalid(key, "must be an array of three numbers");
        match self.take(key) {
            None => Ok(None),
            Some(Value::Array(items)) if items.len() == 3 => {
                let mut out = [0.0; 3];
                for (slot, item) in out.iter_mut().zip(items) {
                    *slot = match item {
                        Value::Integer(i) => *i as f64,
                        Value::Float(f) => *f,
                        _ => return Err(bad()),
                    };
                }
                Ok(Some(out))
            }
            Some(_) => Err(bad()),
        }
    }

    fn finish(self) -> Result<(), ConfigError> {
        let mut leaves = Vec::new();
        collect_leaves(self.table, "", &mut leaves);
        match leaves.into_iter().find(|k| !self.consumed.contains(k)) {
            Some(key) => Err(ConfigError::invalid(key, "is not a recognised key")),
            None => Ok(()),
        }
    }
}

fn collect_leaves(table: &Table, prefix: &str, out: &mut Vec<String>) {
    for (key, value) in table {
        let path = if prefix.is_empty() {
            key.clone()
        } else {
            format!("{prefix}.{key}")
        };
        match value {
            Value::Table(inner) => collect_leaves(inner, &path, out),
            _ => out.push(path),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const REQUIRED: &str = "num_pairs = 28\npair_distance = 26\narrival_rate = 6\nmax_queue = 5\n";

    #[test]
    fn empty_document_requires_core_keys() {
        assert_eq!(load_config("").unwrap_err(), ConfigError::Missing("num_pairs"));
        let err = load_config("num_pairs = 28\npair_distance = 26\narrival_rate = 6").unwrap_err();
        assert_eq!(err, ConfigError::Missing("max_queue"));
    }

    #[test]
    fn defaults_follow_parameter_table() {
        let c = load_config(REQUIRED).unwrap();
        assert_eq!(c.num_groups, 15);
        assert_eq!(c.intersection_radius, 30.0);
        assert!((c.pathloss_exponent_coeff - 1.412_537_544_622_754e-7).abs() < 1e-20);
        assert_eq!(c.pathloss_coefficient, 1.61);
        assert_eq!(c.bandwidth, 5e5);
        assert_eq!(c.interference, 2e-12);
        assert_eq!(c.noise_psd, 3.98e-21);
        assert_eq!(c.slot_duration, 9e-3);
        assert_eq!(c.continue_prob, 0.1);
        assert_eq!(c.power_weight, 6.0);
        assert_eq!(c.packet_size, 5000.0);
        assert_eq!(c.max_power, 2.0);
        assert!((c.vehicle_speed - 11.1111).abs() < 1e-4);
        assert!(c.nlos_exponent < c.nlos_bound());
        assert!((c.clustering.kernel_width - 250.0 / 28f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn speed_with_units() {
        let c = load_config(&format!("{REQUIRED}vehicle_speed = \"40 km/h\"")).unwrap();
        assert!((c.vehicle_speed - 40.0 * 1000.0 / 3600.0).abs() < 1e-12);
        assert!((c.vehicle_speed - 11.1111).abs() < 1e-4);
    }

    #[test]
    fn continue_prob_bound_message() {
        let err = load_config(&format!("{REQUIRED}continue_prob = 1.2")).unwrap_err();
        assert_eq!(err.to_string(), "continue_prob out of (0,1)");
    }

    #[test]
    fn every_invariant_violation_names_its_key() {
        let cases: &[(&str, &str)] = &[
            ("num_pairs", "0"),
            ("num_groups", "0"),
            ("region_side", "-1"),
            ("num_intersections_per_axis", "1"),
            ("lane_width", "0"),
            ("vehicle_speed", "0"),
            ("pair_distance", "31"),
            ("intersection_radius", "0"),
            ("pathloss_exponent_coeff", "0"),
            ("pathloss_coefficient", "-1"),
            ("nlos_exponent", "1.0"),
            ("bandwidth", "0"),
            ("interference", "0"),
            ("noise_psd", "0"),
            ("slot_duration", "0"),
            ("continue_prob", "0"),
            ("continue_prob", "1"),
            ("power_weight", "0"),
            ("packet_size", "0"),
            ("max_power", "0"),
            ("arrival_rate", "-1"),
            ("turn_probs", "[0.5, 0.5, 0.5]"),
            ("horizon_slots", "0"),
            ("warmup_slots", "30000"),
            ("learning.rate_scale", "1.5"),
            ("learning.rate_exponent", "0.5"),
            ("learning.rate_exponent", "1.1"),
            ("learning.convergence_epsilon", "0"),
            ("learning.convergence_window", "0"),
            ("learning.exploration", "2"),
            ("learning.rate_clock", "\"hours\""),
            ("clustering.kernel_width", "0"),
            ("policy", "\"greedy\""),
            ("agent_policies", "[\"oe\"]"),
            ("bogus_key", "1"),
        ];
        for (key, value) in cases {
            let mut doc = ConfigDocument::parse(REQUIRED).unwrap();
            doc.set(key, value).unwrap();
            let err = doc.build().expect_err(key);
            assert_eq!(err.key(), Some(*key), "{key}={value}: {err}");
        }
    }

    #[test]
    fn overrides_use_dotted_keys() {
        let mut doc = ConfigDocument::parse(REQUIRED).unwrap();
        doc.apply_override("learning.rate_scale=0.25").unwrap();
        doc.apply_override("vehicle_speed=36 km/h").unwrap();
        doc.apply_override("policy=random").unwrap();
        let c = doc.build().unwrap();
        assert_eq!(c.learning.rate_scale, 0.25);
        assert!((c.vehicle_speed - 10.0).abs() < 1e-12);
        assert_eq!(c.policy, PolicyKind::Random);
    }

    #[test]
    fn config_echo_reloads() {
        let c = load_config(REQUIRED).unwrap();
        let echoed = toml::to_string(&c).unwrap();
        assert_eq!(load_config(&echoed).unwrap(), c);
    }

    /// The partial sums of the learning-rate schedule over the first 10^6
    /// terms sit between the analytic integral bounds, which diverge for the
    /// plain sum and converge for the squared sum whenever the exponent is in
    /// (0.5, 1].
    #[test]
    fn rate_schedule_partial_sums_match_integral_bounds() {
        let n: u64 = 1_000_000;
        for kappa in [0.51, 0.6, 0.7, 0.85, 1.0] {
            let l = LearningConfig {
                rate_exponent: kappa,
                ..LearningConfig::default()
            };
            let z0 = l.rate_scale;
            let (mut s1, mut s2) = (0.0, 0.0);
            for visits in 0..n {
                let z = l.rate(visits);
                s1 += z;
                s2 += z * z;
            }
            // Terms are z0 * m^-kappa for m = 1..=n.
            let int = |p: f64, a: f64, b: f64| {
                if (p - 1.0).abs() < 1e-12 {
                    (b / a).ln()
                } else {
                    (b.powf(1.0 - p) - a.powf(1.0 - p)) / (1.0 - p)
                }
            };
            let nf = n as f64;
            let lo1 = z0 * int(kappa, 1.0, nf + 1.0);
            let hi1 = z0 * (1.0 + int(kappa, 1.0, nf));
            assert!(s1 >= lo1 && s1 <= hi1, "kappa {kappa}: {lo1} <= {s1} <= {hi1}");
            let p2 = 2.0 * kappa;
            let tail_bound = z0 * z0 * (1.0 + 1.0 / (p2 - 1.0));
            assert!(s2 <= tail_bound, "kappa {kappa}: squared sum {s2} exceeds {tail_bound}");
        }
    }
}
