//! Online oblivious-equilibrium agent.
//!
//! Each agent keeps a value table over post-decision queue states (the queue
//! right after transmission, before arrivals) and a Q-factor table over
//! `(queue, won, departures)`. Per slot it bids the value of winning the
//! resource, schedules departures greedily from the Q-factors, and afterwards
//! folds the observed slot into both tables.

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::LinkBudget;
use crate::error::Error;
use crate::scenario::{LearningConfig, QUpdate, RateClock, ScenarioConfig};

/// Satisfaction functions `exp(-x)` for queue length, power and overflow.
pub mod utility {
    pub fn queue(q: usize) -> f64 {
        (-(q as f64)).exp()
    }

    pub fn power(c: f64) -> f64 {
        (-c).exp()
    }

    pub fn overflow(o: usize) -> f64 {
        (-(o as f64)).exp()
    }

    /// Slot utility: queue + weight · power + overflow satisfaction.
    pub fn slot(q: usize, c: f64, o: usize, power_weight: f64) -> f64 {
        queue(q) + power_weight * power(c) + overflow(o)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValueTables {
    max_queue: usize,
    v_tilde: Vec<f64>,
    /// Indexed by `(queue * 2 + won) * (max_queue + 1) + departures`.
    q_factor: Vec<f64>,
    visits: Vec<u64>,
    updates: u64,
}

impl ValueTables {
    pub fn new(max_queue: usize, init_v: f64, init_q: f64) -> Self {
        let states = max_queue + 1;
        ValueTables {
            max_queue,
            v_tilde: vec![init_v; states],
            q_factor: vec![init_q; states * 2 * states],
            visits: vec![0; states],
            updates: 0,
        }
    }

    pub fn max_queue(&self) -> usize {
        self.max_queue
    }

    fn index(&self, queue: usize, won: bool, departures: usize) -> usize {
        assert!(queue <= self.max_queue && departures <= self.max_queue);
        (queue * 2 + won as usize) * (self.max_queue + 1) + departures
    }

    pub fn v(&self, post_decision: usize) -> f64 {
        self.v_tilde[post_decision]
    }

    pub fn v_tilde(&self) -> &[f64] {
        &self.v_tilde
    }

    pub fn set_v(&mut self, post_decision: usize, value: f64) {
        self.v_tilde[post_decision] = value;
    }

    pub fn q(&self, queue: usize, won: bool, departures: usize) -> f64 {
        self.q_factor[self.index(queue, won, departures)]
    }

    pub fn set_q(&mut self, queue: usize, won: bool, departures: usize, value: f64) {
        let i = self.index(queue, won, departures);
        self.q_factor[i] = value;
    }

    pub fn visits(&self, post_decision: usize) -> u64 {
        self.visits[post_decision]
    }

    /// Value updates made so far across all entries.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// Best Q-factor available from `queue`: losing (which sends nothing) or
    /// winning with any departure count the queue can supply.
    pub fn best_q(&self, queue: usize) -> f64 {
        (0..=queue)
            .map(|d| self.q(queue, true, d))
            .fold(self.q(queue, false, 0), f64::max)
    }

    /// Delimited-text snapshot: `table,queue,won,departures,value` rows.
    pub fn to_delimited(&self) -> String {
        let mut out = String::from("table,queue,won,departures,value\n");
        for (q, v) in self.v_tilde.iter().enumerate() {
            writeln!(out, "v,{q},,,{v:?}").unwrap();
        }
        for (q, n) in self.visits.iter().enumerate() {
            writeln!(out, "visits,{q},,,{n}").unwrap();
        }
        writeln!(out, "updates,,,,{}", self.updates).unwrap();
        for q in 0..=self.max_queue {
            for won in [false, true] {
                for d in 0..=self.max_queue {
                    writeln!(out, "q,{q},{},{d},{:?}", won as u8, self.q(q, won, d)).unwrap();
                }
            }
        }
        out
    }

    pub fn from_delimited(text: &str) -> Result<Self, Error> {
        let bad = |line: &str| Error::Transcript(format!("bad table snapshot row `{line}`"));
        let rows: Vec<Vec<&str>> = text.lines().skip(1).filter(|l| !l.is_empty()).map(|l| l.split(',').collect()).collect();
        let max_queue = rows
            .iter()
            .filter(|r| r[0] == "v")
            .count()
            .checked_sub(1)
            .ok_or_else(|| bad("<no v rows>"))?;
        let mut tables = ValueTables::new(max_queue, 0.0, 0.0);
        for (line, row) in text.lines().skip(1).filter(|l| !l.is_empty()).zip(&rows) {
            if row.len() != 5 {
                return Err(bad(line));
            }
            if row[0] == "updates" {
                tables.updates = row[4].parse().map_err(|_| bad(line))?;
                continue;
            }
            let q: usize = row[1].parse().map_err(|_| bad(line))?;
            if q > max_queue {
                return Err(bad(line));
            }
            match row[0] {
                "v" => tables.v_tilde[q] = row[4].parse().map_err(|_| bad(line))?,
                "visits" => tables.visits[q] = row[4].parse().map_err(|_| bad(line))?,
                "q" => {
                    let won = row[2] == "1";
                    let d: usize = row[3].parse().map_err(|_| bad(line))?;
                    if d > max_queue {
                        return Err(bad(line));
                    }
                    tables.set_q(q, won, d, row[4].parse().map_err(|_| bad(line))?);
                }
                _ => return Err(bad(line)),
            }
        }
        Ok(tables)
    }
}

/// What an agent observes about one slot once it is over.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub queue: usize,
    pub won: bool,
    pub departures: usize,
    pub power: f64,
    pub payment: f64,
    pub post_decision: usize,
    pub arrivals: usize,
    pub overflow: usize,
    pub next_queue: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlotDecision {
    pub bid: f64,
    pub departures: usize,
    pub power: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OeAgent {
    pub tables: ValueTables,
    pub learning: LearningConfig,
    /// Continuation probability γ, doubling as the discount factor.
    pub discount: f64,
    pub power_weight: f64,
}

impl OeAgent {
    pub fn new(max_queue: usize, learning: LearningConfig, discount: f64, power_weight: f64) -> Self {
        OeAgent {
            tables: ValueTables::new(max_queue, learning.init_value_v, learning.init_value_q),
            learning,
            discount,
            power_weight,
        }
    }

    pub fn from_config(config: &ScenarioConfig) -> Self {
        Self::new(
            config.max_queue,
            config.learning.clone(),
            config.continue_prob,
            config.power_weight,
        )
    }

    /// Greedy departures: the Q-maximizing count among those the queue and
    /// the power cap allow, smallest on ties. Nothing is sent without the resource.
    pub fn select_departures(&self, queue: usize, won: bool, quality: f64, budget: &LinkBudget) -> usize {
        if !won {
            return 0;
        }
        let feasible = budget.max_departures(quality, queue);
        let mut best = 0;
        let mut best_q = self.tables.q(queue, true, 0);
        for d in 1..=feasible {
            let q = self.tables.q(queue, true, d);
            if q > best_q {
                best = d;
                best_q = q;
            }
        }
        best
    }

    /// Truthful bid: the value of holding the resource this slot with the
    /// departures that would then be scheduled.
    pub fn compute_bid(&self, queue: usize, quality: f64, budget: &LinkBudget) -> SlotDecision {
        let departures = self.select_departures(queue, true, quality, budget);
        self.decision_for(queue, departures, quality, budget)
    }

    fn decision_for(&self, queue: usize, departures: usize, quality: f64, budget: &LinkBudget) -> SlotDecision {
        let power = budget.required_power(quality, true, departures);
        let bid = utility::queue(queue)
            + self.power_weight * utility::power(power)
            + self.tables.v(queue - departures) / self.discount;
        SlotDecision {
            // negative only if the value table was initialized below zero
            bid: bid.max(0.0),
            departures,
            power,
        }
    }

    /// [`OeAgent::compute_bid`], except that with probability
    /// `learning.exploration` the departures are drawn uniformly from the
    /// feasible range. `rng` is untouched when exploration is off.
    pub fn decide<R: Rng + ?Sized>(&self, queue: usize, quality: f64, budget: &LinkBudget, rng: &mut R) -> SlotDecision {
        if self.learning.exploration > 0.0 && rng.random::<f64>() < self.learning.exploration {
            let feasible = budget.max_departures(quality, queue);
            let d = rng.random_range(0..=feasible);
            return self.decision_for(queue, d, quality, budget);
        }
        self.compute_bid(queue, quality, budget)
    }

    /// Rate the next update of `post_decision` would use.
    pub fn learning_rate(&self, post_decision: usize) -> f64 {
        self.learning.rate(match self.learning.rate_clock {
            RateClock::Slots => self.tables.updates(),
            RateClock::Visits => self.tables.visits(post_decision),
        })
    }

    /// Fold one slot into the tables with the scheduled learning rate.
    /// Returns the absolute change of the updated value entry.
    pub fn observe_and_update(&mut self, tr: &Transcript) -> Result<f64, Error> {
        self.check(tr)?;
        let rate = self.learning_rate(tr.post_decision);
        self.apply(tr, rate)
    }

    /// As [`OeAgent::observe_and_update`] but with an explicit learning rate.
    pub fn update_with_rate(&mut self, tr: &Transcript, rate: f64) -> Result<f64, Error> {
        self.check(tr)?;
        self.apply(tr, rate)
    }

    fn check(&self, tr: &Transcript) -> Result<(), Error> {
        let max = self.tables.max_queue();
        if tr.won && tr.departures > tr.queue {
            return Err(Error::QueueContract {
                queue: tr.queue,
                departures: tr.departures,
            });
        }
        if !tr.won && tr.departures != 0 {
            return Err(Error::Transcript("a loser cannot schedule departures".into()));
        }
        if tr.queue > max || tr.next_queue > max {
            return Err(Error::Transcript(format!("queue beyond max_queue {max}")));
        }
        if tr.post_decision != tr.queue - tr.departures {
            return Err(Error::Transcript(format!(
                "post-decision state {} != {} - {}",
                tr.post_decision, tr.queue, tr.departures
            )));
        }
        Ok(())
    }

    fn apply(&mut self, tr: &Transcript, rate: f64) -> Result<f64, Error> {
        let gamma = self.discount;
        let post = tr.post_decision;
        let old_v = self.tables.v(post);
        let target = gamma * (utility::overflow(tr.overflow) + self.tables.best_q(tr.next_queue));
        let new_v = (1.0 - rate) * old_v + rate * target;
        self.tables.v_tilde[post] = new_v;
        self.tables.visits[post] += 1;
        self.tables.updates += 1;

        let sample = gamma * (utility::queue(tr.queue) + self.power_weight * utility::power(tr.power) - tr.payment) + new_v;
        let q = match self.learning.q_update {
            QUpdate::Verbatim => sample,
            QUpdate::Smoothed => {
                let old = self.tables.q(tr.queue, tr.won, tr.departures);
                (1.0 - rate) * old + rate * sample
            }
        };
        self.tables.set_q(tr.queue, tr.won, tr.departures, q);
        if !new_v.is_finite() || !q.is_finite() {
            return Err(Error::Transcript("value table diverged".into()));
        }
        Ok((new_v - old_v).abs())
    }
}

/// Empirical distribution of queue lengths over a window of slots, each slot
/// holding the queue lengths of every peer.
pub fn measure_queue_distribution(history: &[Vec<usize>], max_queue: usize) -> Vec<f64> {
    let mut hist = QueueHistogram::new(max_queue);
    for slot in history {
        hist.record(slot);
    }
    hist.distribution()
}

/// Streaming form of [`measure_queue_distribution`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueueHistogram {
    counts: Vec<u64>,
}

impl QueueHistogram {
    pub fn new(max_queue: usize) -> Self {
        QueueHistogram {
            counts: vec![0; max_queue + 1],
        }
    }

    pub fn record(&mut self, queues: &[usize]) {
        for &q in queues {
            self.counts[q] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn distribution(&self) -> Vec<f64> {
        let total = self.total();
        if total == 0 {
            return vec![0.0; self.counts.len()];
        }
        self.counts.iter().map(|&c| c as f64 / total as f64).collect()
    }
}

/// Total-variation distance between two distributions on the same support.
pub fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}
