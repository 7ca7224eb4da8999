//! The slot loop: mobility, channels, bids, grouping and auction, transmission,
//! queue dynamics and learning, followed by metric recording.

mod experiment;
pub mod export;
mod metrics;

pub use experiment::{run_experiment, sweep, Aggregate, Experiment, SweepRow};
pub use metrics::{
    detect_convergence, discounted_returns, truncation_tail, Averages, PairSlot, RunSummary, SeriesRow, SlotMetrics,
};

use rand::Rng;

use crate::baselines::{BaselineAgent, BaselinePolicy, BidScale};
use crate::channel::{draw_fading, path_loss, ChannelState, LinkBudget, PathLossParams};
use crate::error::{Error, Result};
use crate::grouping::{cluster, determine_winners, ClusterParams};
use crate::learner::{utility, OeAgent, QueueHistogram, SlotDecision, Transcript};
use crate::mobility::{GridMap, LinkGeometry, VuePairKinematics};
use crate::par::{self, Execution};
use crate::queueing::{draw_arrivals, draw_termination, step_queue, QueueState};
use crate::scenario::{PolicyKind, RngPlan, ScenarioConfig, SimRng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub enum Agent {
    Oe(OeAgent),
    Baseline(BaselineAgent),
}

impl Agent {
    pub fn as_oe(&self) -> Option<&OeAgent> {
        match self {
            Agent::Oe(a) => Some(a),
            Agent::Baseline(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
struct PairStreams {
    mobility: SimRng,
    fading: SimRng,
    arrivals: SimRng,
    termination: SimRng,
    bids: SimRng,
    exploration: SimRng,
}

impl PairStreams {
    fn new(plan: &RngPlan, index: u64) -> Self {
        PairStreams {
            mobility: plan.substream(Stream::Mobility, index),
            fading: plan.substream(Stream::Fading, index),
            arrivals: plan.substream(Stream::Arrivals, index),
            termination: plan.substream(Stream::Termination, index),
            bids: plan.substream(Stream::BaselineBids, index),
            exploration: plan.substream(Stream::Exploration, index),
        }
    }
}

/// One transmitter/receiver pair with its queue, policy and random streams.
#[derive(Debug, Clone)]
pub struct Pair {
    pub kinematics: VuePairKinematics,
    pub queue: QueueState,
    pub agent: Agent,
    streams: PairStreams,
}

/// A pair's view of the slot before the auction.
struct Intent {
    geometry: LinkGeometry,
    channel: ChannelState,
    decision: SlotDecision,
}

/// Read-only context shared by every pair during a slot.
struct Shared<'a> {
    config: &'a ScenarioConfig,
    grid: &'a GridMap,
    path_loss: PathLossParams,
    budget: LinkBudget,
}

impl Pair {
    fn observe(&mut self, ctx: &Shared) -> Result<Intent> {
        let cfg = ctx.config;
        let step = cfg.vehicle_speed * cfg.slot_duration;
        self.kinematics
            .advance(ctx.grid, step, &cfg.turn_probs, &mut self.streams.mobility);
        let geometry = self.kinematics.classify(cfg.intersection_radius);
        let loss = path_loss(&geometry, &ctx.path_loss)?;
        let channel = ChannelState::new(loss, draw_fading(cfg.fading_model, &mut self.streams.fading));
        let q = self.queue.length;
        let decision = match &self.agent {
            Agent::Oe(a) => a.decide(q, channel.quality, &ctx.budget, &mut self.streams.exploration),
            Agent::Baseline(b) => {
                let departures = b.schedule(q, channel.quality, true, &ctx.budget);
                SlotDecision {
                    bid: b.bid(q, channel.quality, &ctx.budget, &mut self.streams.bids),
                    departures,
                    power: ctx.budget.required_power(channel.quality, true, departures),
                }
            }
        };
        Ok(Intent {
            geometry,
            channel,
            decision,
        })
    }

    fn settle(&mut self, ctx: &Shared, slot: u64, intent: &Intent, won: bool, payment: f64) -> Result<PairSlot> {
        let cfg = ctx.config;
        let q = self.queue.length;
        let departures = if won { intent.decision.departures } else { 0 };
        let power = ctx.budget.required_power(intent.channel.quality, won, departures);
        if power > cfg.max_power {
            return Err(Error::Invariant {
                slot,
                message: format!("transmit power {power} W exceeds the {} W cap", cfg.max_power),
            });
        }
        let arrivals = draw_arrivals(cfg.arrival_model, cfg.arrival_rate, &mut self.streams.arrivals);
        let terminated = cfg.termination && draw_termination(cfg.continue_prob, &mut self.streams.termination);
        let outcome = step_queue(&mut self.queue, won, departures, arrivals, terminated, cfg.max_queue)?;
        if !self.queue.is_conserved() {
            return Err(Error::Invariant {
                slot,
                message: format!("packet accounting broken: {:?}", self.queue),
            });
        }
        let value_change = match &mut self.agent {
            Agent::Oe(agent) => agent.observe_and_update(&Transcript {
                queue: q,
                won,
                departures,
                power,
                payment,
                post_decision: outcome.post_decision,
                arrivals,
                overflow: outcome.overflow,
                next_queue: outcome.next,
            })?,
            Agent::Baseline(agent) => {
                agent.record_departures(departures);
                0.0
            }
        };
        Ok(PairSlot {
            queue: q,
            bid: intent.decision.bid,
            won,
            departures,
            power,
            payment,
            arrivals,
            overflow: outcome.overflow,
            terminated,
            next_queue: outcome.next,
            utility: utility::slot(q, power, outcome.overflow, cfg.power_weight),
            transmitter: self.kinematics.vtx,
            receiver: self.kinematics.vrx,
            link: intent.geometry.class,
            path_loss: intent.channel.path_loss,
            fading: intent.channel.fading,
            value_change,
        })
    }
}

/// Complete simulator state for one run.
#[derive(Debug, Clone)]
pub struct World {
    pub config: ScenarioConfig,
    pub grid: GridMap,
    pub pairs: Vec<Pair>,
    pub slot: u64,
    pub exec: Execution,
    cluster_params: ClusterParams,
    tie_breaks: SimRng,
    clustering: SimRng,
}

impl World {
    pub fn new(config: &ScenarioConfig, seed: u64, exec: Execution) -> Result<Self> {
        config.validate()?;
        let plan = RngPlan::new(seed);
        let grid = GridMap::from_config(config)?;
        let scale = BidScale::from_config(config);
        let pairs = (0..config.num_pairs)
            .map(|k| {
                let mut streams = PairStreams::new(&plan, k as u64);
                let kinematics =
                    VuePairKinematics::place(&grid, config.pair_distance, &config.turn_probs, &mut streams.mobility)?;
                let agent = match BaselinePolicy::from_kind(config.policy_of(k)) {
                    None => Agent::Oe(OeAgent::from_config(config)),
                    Some(policy) => Agent::Baseline(BaselineAgent::new(policy, scale)),
                };
                Ok(Pair {
                    kinematics,
                    queue: QueueState::default(),
                    agent,
                    streams,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(World {
            cluster_params: ClusterParams {
                groups: config.num_groups,
                kernel_width: config.clustering.kernel_width,
                restarts: config.clustering.restarts,
                max_iterations: config.clustering.max_iterations,
                region_side: config.region_side,
            },
            config: config.clone(),
            grid,
            pairs,
            slot: 0,
            exec,
            tie_breaks: plan.substream(Stream::TieBreaks, 0),
            clustering: plan.substream(Stream::Clustering, 0),
        })
    }

    pub fn has_learners(&self) -> bool {
        (0..self.config.num_pairs).any(|k| self.config.policy_of(k) == PolicyKind::Oe)
    }

    /// Advance the world by one slot.
    pub fn run_slot(&mut self) -> Result<SlotMetrics> {
        let slot = self.slot;
        let ctx = Shared {
            config: &self.config,
            grid: &self.grid,
            path_loss: PathLossParams::from_config(&self.config),
            budget: LinkBudget::from_config(&self.config),
        };
        let intents = par::map_mut(self.exec, &mut self.pairs, |_, pair| pair.observe(&ctx))
            .into_iter()
            .collect::<Result<Vec<_>>>()?;

        let positions: Vec<_> = self.pairs.iter().map(|p| p.kinematics.vtx).collect();
        let assignment = cluster(&positions, &self.cluster_params, self.clustering.random(), self.exec);
        let bids: Vec<f64> = intents.iter().map(|i| i.decision.bid).collect();
        if let Some(k) = bids.iter().position(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::Invariant {
                slot,
                message: format!("pair {k} bid {}", bids[k]),
            });
        }
        let (round, groups) = determine_winners(&bids, &assignment, &mut self.tie_breaks);
        if round.winners.iter().filter(|&&w| w).count() > self.config.num_groups {
            return Err(Error::Invariant {
                slot,
                message: "more winners than groups".into(),
            });
        }

        let pairs = par::map_mut(self.exec, &mut self.pairs, |k, pair| {
            pair.settle(&ctx, slot, &intents[k], round.winners[k], round.payments[k])
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        self.slot += 1;
        Ok(SlotMetrics {
            slot,
            pairs,
            groups,
            clustering_fallback: assignment.fallback,
        })
    }
}

/// Accumulates slot metrics into a [`RunSummary`].
struct Recorder {
    warmup: u64,
    series: Vec<SeriesRow>,
    histogram: QueueHistogram,
    fallbacks: u64,
    /// Per pair: post-decision state, overflow satisfaction and net
    /// queue/power satisfaction of every post-warmup slot.
    trajectories: Vec<(Vec<usize>, Vec<f64>, Vec<f64>)>,
}

impl Recorder {
    fn new(config: &ScenarioConfig) -> Self {
        Recorder {
            warmup: config.warmup_slots,
            series: Vec::with_capacity(config.horizon_slots as usize),
            histogram: QueueHistogram::new(config.max_queue),
            fallbacks: 0,
            trajectories: vec![Default::default(); config.num_pairs],
        }
    }

    fn record(&mut self, m: &SlotMetrics, power_weight: f64) {
        self.series.push(m.row());
        self.fallbacks += m.clustering_fallback as u64;
        if m.slot < self.warmup {
            return;
        }
        for (p, (post, overflow, immediate)) in m.pairs.iter().zip(&mut self.trajectories) {
            post.push(p.queue - p.departures);
            overflow.push(utility::overflow(p.overflow));
            immediate.push(utility::queue(p.queue) + power_weight * utility::power(p.power) - p.payment);
        }
        self.histogram.record(&m.pairs.iter().map(|p| p.queue).collect::<Vec<_>>());
    }

    fn finish(self, world: &World, seed: u64) -> RunSummary {
        let cfg = &world.config;
        let after: Vec<SeriesRow> = self.series.iter().filter(|r| r.slot >= self.warmup).copied().collect();
        let learners = world.has_learners();
        let changes: Vec<f64> = self.series.iter().map(|r| r.max_value_change).collect();
        let convergence_slot = if learners {
            detect_convergence(&changes, cfg.learning.convergence_epsilon, cfg.learning.convergence_window)
        } else {
            None
        };
        let (empirical_return, learned_return) = if learners {
            let tail = truncation_tail(cfg.continue_prob, 1e-9);
            let (mut realized, mut learned, mut n) = (0.0, 0.0, 0usize);
            for (pair, (post, overflow, immediate)) in world.pairs.iter().zip(&self.trajectories) {
                let Some(agent) = pair.agent.as_oe() else { continue };
                let returns = discounted_returns(immediate, overflow, cfg.continue_prob);
                let keep = returns.len().saturating_sub(tail);
                for (r, &s) in returns[..keep].iter().zip(post) {
                    realized += r;
                    learned += agent.tables.v(s);
                    n += 1;
                }
            }
            if n > 0 {
                (Some(realized / n as f64), Some(learned / n as f64))
            } else {
                (None, None)
            }
        } else {
            (None, None)
        };
        RunSummary {
            config: cfg.clone(),
            seed,
            slots: world.slot,
            averages: Averages::over(&after),
            series: self.series,
            convergence_slot,
            empirical_return,
            learned_return,
            queue_distribution: self.histogram.distribution(),
            clustering_fallbacks: self.fallbacks,
        }
    }
}

/// Run `config.horizon_slots` slots and summarize.
pub fn run(config: &ScenarioConfig, seed: u64, exec: Execution) -> Result<RunSummary> {
    run_observed(config, seed, exec, |_| Ok(()))
}

/// As [`run`], handing every slot's metrics to `observer` (for traces).
pub fn run_observed(
    config: &ScenarioConfig,
    seed: u64,
    exec: Execution,
    mut observer: impl FnMut(&SlotMetrics) -> Result<()>,
) -> Result<RunSummary> {
    let mut world = World::new(config, seed, exec)?;
    let mut recorder = Recorder::new(config);
    for _ in 0..config.horizon_slots {
        let metrics = world.run_slot()?;
        observer(&metrics)?;
        recorder.record(&metrics, config.power_weight);
    }
    Ok(recorder.finish(&world, seed))
}
