use serde::{Deserialize, Serialize};

use crate::grouping::GroupOutcome;
use crate::mobility::{LinkClass, Point};
use crate::scenario::ScenarioConfig;

/// One pair's slot, as observed after the queue step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSlot {
    /// Queue length at the start of the slot.
    pub queue: usize,
    pub bid: f64,
    pub won: bool,
    pub departures: usize,
    /// Transmit power; zero unless the pair won and sent something.
    pub power: f64,
    pub payment: f64,
    pub arrivals: usize,
    pub overflow: usize,
    pub terminated: bool,
    pub next_queue: usize,
    /// Slot utility: queue, weighted power and overflow satisfaction.
    pub utility: f64,
    pub transmitter: Point,
    pub receiver: Point,
    pub link: LinkClass,
    pub path_loss: f64,
    pub fading: f64,
    /// Absolute change of the agent's updated value entry (0 for baselines).
    pub value_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    pub slot: u64,
    pub pairs: Vec<PairSlot>,
    pub groups: Vec<GroupOutcome>,
    pub clustering_fallback: bool,
}

impl SlotMetrics {
    fn mean(&self, f: impl Fn(&PairSlot) -> f64) -> f64 {
        self.pairs.iter().map(f).sum::<f64>() / self.pairs.len() as f64
    }

    pub fn winners(&self) -> usize {
        self.pairs.iter().filter(|p| p.won).count()
    }

    pub fn max_value_change(&self) -> f64 {
        self.pairs.iter().map(|p| p.value_change).fold(0.0, f64::max)
    }

    pub fn row(&self) -> SeriesRow {
        SeriesRow {
            slot: self.slot,
            mean_queue: self.mean(|p| p.queue as f64),
            mean_power: self.mean(|p| p.power),
            mean_overflow: self.mean(|p| p.overflow as f64),
            mean_utility: self.mean(|p| p.utility),
            mean_payment: self.mean(|p| p.payment),
            winners: self.winners(),
            max_value_change: self.max_value_change(),
        }
    }
}

/// Fleet means of one slot; one line of the exported series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub slot: u64,
    pub mean_queue: f64,
    pub mean_power: f64,
    pub mean_overflow: f64,
    pub mean_utility: f64,
    pub mean_payment: f64,
    pub winners: usize,
    pub max_value_change: f64,
}

impl SeriesRow {
    pub const HEADER: &'static str =
        "slot,mean_queue,mean_power,mean_overflow,mean_utility,mean_payment,winners,max_value_change";
}

/// Time averages of the fleet means over the post-warmup slots.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Averages {
    pub queue: f64,
    pub power: f64,
    pub overflow: f64,
    pub utility: f64,
    pub payment: f64,
}

impl Averages {
    pub fn over(rows: &[SeriesRow]) -> Self {
        let n = rows.len() as f64;
        let mean = |f: fn(&SeriesRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
        Averages {
            queue: mean(|r| r.mean_queue),
            power: mean(|r| r.mean_power),
            overflow: mean(|r| r.mean_overflow),
            utility: mean(|r| r.mean_utility),
            payment: mean(|r| r.mean_payment),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ScenarioConfig,
    pub seed: u64,
    pub slots: u64,
    #[serde(skip)]
    pub series: Vec<SeriesRow>,
    pub averages: Averages,
    /// First slot at which the value tables are judged settled, if any.
    pub convergence_slot: Option<u64>,
    /// Mean realized discounted return from post-warmup post-decision states.
    pub empirical_return: Option<f64>,
    /// Mean final learned value at the same visited states.
    pub learned_return: Option<f64>,
    /// Post-warmup distribution of slot-start queue lengths over all pairs.
    pub queue_distribution: Vec<f64>,
    pub clustering_fallbacks: u64,
}

/// First slot `t >= window` such that every change in the `window` slots
/// before `t` is below `epsilon`.
pub fn detect_convergence(changes: &[f64], epsilon: f64, window: usize) -> Option<u64> {
    let window = window.max(1);
    let mut quiet = 0usize;
    for (t, &c) in changes.iter().enumerate() {
        quiet = if c < epsilon { quiet + 1 } else { 0 };
        if quiet >= window {
            return Some(t as u64 + 1);
        }
    }
    None
}

/// Realized discounted return from each slot's post-decision state:
/// `R_t = γ·(overflow_t + γ·immediate_{t+1} + R_{t+1})`, truncated at the
/// end of the record. `overflow` holds overflow satisfaction and `immediate`
/// the queue and power satisfaction net of payment.
pub fn discounted_returns(immediate: &[f64], overflow: &[f64], discount: f64) -> Vec<f64> {
    assert_eq!(immediate.len(), overflow.len());
    let n = overflow.len();
    let mut out = vec![0.0; n];
    let mut next = 0.0;
    for t in (0..n).rev() {
        let ahead = if t + 1 < n { discount * immediate[t + 1] + next } else { 0.0 };
        out[t] = discount * (overflow[t] + ahead);
        next = out[t];
    }
    out
}

/// Number of trailing slots whose truncated return is off by more than
/// `tolerance` relative to the untruncated one.
pub fn truncation_tail(discount: f64, tolerance: f64) -> usize {
    if discount <= 0.0 {
        return 1;
    }
    (tolerance.ln() / discount.ln()).ceil().max(1.0) as usize
}
