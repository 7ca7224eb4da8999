//! Comparison policies: channel-aware, queue-aware and random bidding.
//!
//! All three send as many packets as the power cap allows when they win.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::LinkBudget;
use crate::scenario::{PolicyKind, ScenarioConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselinePolicy {
    ChannelAware,
    QueueAware,
    Random,
}

impl BaselinePolicy {
    pub fn from_kind(kind: PolicyKind) -> Option<Self> {
        match kind {
            PolicyKind::Oe => None,
            PolicyKind::ChannelAware => Some(BaselinePolicy::ChannelAware),
            PolicyKind::QueueAware => Some(BaselinePolicy::QueueAware),
            PolicyKind::Random => Some(BaselinePolicy::Random),
        }
    }
}

/// Scale constants shared by the bid rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BidScale {
    /// Path loss at the nominal pair distance; channel bids are `g / reference_quality`.
    pub reference_quality: f64,
    /// Upper end of the random bid range.
    pub random_ceiling: f64,
    pub history_weight: f64,
    pub history_decay: f64,
}

impl BidScale {
    pub fn from_config(config: &ScenarioConfig) -> Self {
        BidScale {
            reference_quality: config.nominal_path_loss(),
            random_ceiling: 1.0 + config.power_weight + 1.0 / config.continue_prob,
            history_weight: 1.0,
            history_decay: 0.99,
        }
    }
}

/// A baseline policy plus the departure history the queue-aware rule keeps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineAgent {
    pub policy: BaselinePolicy,
    pub scale: BidScale,
    /// Exponentially weighted average of past departures.
    pub departure_average: f64,
}

impl BaselineAgent {
    pub fn new(policy: BaselinePolicy, scale: BidScale) -> Self {
        BaselineAgent {
            policy,
            scale,
            departure_average: 0.0,
        }
    }

    /// `rng` is only drawn from by the random policy.
    pub fn bid<R: Rng + ?Sized>(&self, queue: usize, quality: f64, budget: &LinkBudget, rng: &mut R) -> f64 {
        match self.policy {
            BaselinePolicy::ChannelAware => quality / self.scale.reference_quality,
            BaselinePolicy::QueueAware => {
                queue.min(budget.capacity(quality)) as f64 + self.scale.history_weight * self.departure_average
            }
            BaselinePolicy::Random => rng.random::<f64>() * self.scale.random_ceiling,
        }
    }

    pub fn schedule(&self, queue: usize, quality: f64, won: bool, budget: &LinkBudget) -> usize {
        if won {
            budget.max_departures(quality, queue)
        } else {
            0
        }
    }

    /// Fold one slot's departures (zero for a lost slot) into the history.
    pub fn record_departures(&mut self, departures: usize) {
        let decay = self.scale.history_decay;
        self.departure_average = decay * self.departure_average + (1.0 - decay) * departures as f64;
    }
}
