//! Per-pair packet queue: arrivals, overflow, termination and accounting.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scenario::ArrivalModel;

/// Queue length plus cumulative packet accounting.
///
/// `arrived == departed + dropped + reset_losses + length` at all times.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueState {
    pub length: usize,
    pub arrived: u64,
    pub departed: u64,
    pub dropped: u64,
    pub reset_losses: u64,
}

impl QueueState {
    pub fn is_conserved(&self) -> bool {
        self.arrived == self.departed + self.dropped + self.reset_losses + self.length as u64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SlotQueueOutcome {
    pub post_decision: usize,
    pub arrivals: usize,
    pub overflow: usize,
    pub terminated: bool,
    pub next: usize,
}

/// Draw a slot's arrivals. A zero rate yields no packets.
pub fn draw_arrivals<R: Rng + ?Sized>(model: ArrivalModel, rate: f64, rng: &mut R) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    match model {
        ArrivalModel::Poisson => Poisson::new(rate).expect("positive finite rate").sample(rng) as usize,
        ArrivalModel::Deterministic => rate.round() as usize,
    }
}

/// True when the queue terminates this slot, which happens with probability `1 - continue_prob`.
pub fn draw_termination<R: Rng + ?Sized>(continue_prob: f64, rng: &mut R) -> bool {
    rng.random::<f64>() >= continue_prob
}

/// Apply one slot to `state`: `departures` leave if `won`, then `arrivals`
/// join, excess beyond `max_queue` overflows, and a terminated queue is
/// emptied into `reset_losses`.
pub fn step_queue(
    state: &mut QueueState,
    won: bool,
    departures: usize,
    arrivals: usize,
    terminated: bool,
    max_queue: usize,
) -> Result<SlotQueueOutcome, Error> {
    let q = state.length;
    if departures > q {
        return Err(Error::QueueContract {
            queue: q,
            departures,
        });
    }
    let sent = if won { departures } else { 0 };
    let post_decision = q - sent;
    let offered = post_decision + arrivals;
    let overflow = offered.saturating_sub(max_queue);
    let kept = offered - overflow;
    state.arrived += arrivals as u64;
    state.departed += sent as u64;
    state.dropped += overflow as u64;
    let next = if terminated {
        state.reset_losses += kept as u64;
        0
    } else {
        kept
    };
    state.length = next;
    debug_assert!(state.is_conserved());
    Ok(SlotQueueOutcome {
        post_decision,
        arrivals,
        overflow,
        terminated,
        next,
    })
}
