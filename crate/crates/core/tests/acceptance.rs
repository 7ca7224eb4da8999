//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use v2v_oe::channel::{path_loss, LinkBudget, PathLossParams};
use v2v_oe::engine::{self, export, World};
use v2v_oe::grouping::{cluster, determine_winners, ClusterParams, GroupAssignment};
use v2v_oe::learner::OeAgent;
use v2v_oe::mobility::{GridMap, LinkClass, Point, VuePairKinematics};
use v2v_oe::scenario::{ConfigDocument, LearningConfig, ScenarioConfig};
use v2v_oe::Execution;

type Outcome = Result<String, String>;

const FIG2: &str = "num_pairs = 28\npair_distance = 26\narrival_rate = 6\nmax_queue = 5\n";

fn config(base: &str, overrides: &[&str]) -> ScenarioConfig {
    let mut doc = ConfigDocument::parse(base).unwrap();
    for o in overrides {
        doc.apply_override(o).unwrap();
    }
    doc.build().unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Outcome {
    let cfg = config(FIG2, &["horizon_slots=2000", "warmup_slots=500"]);
    let timed = || {
        let start = Instant::now();
        engine::run(&cfg, 17, Execution::Parallel).map(|s| (s, start.elapsed()))
    };
    let (first, t1) = timed().map_err(|e| e.to_string())?;
    let (second, t2) = timed().map_err(|e| e.to_string())?;
    // the faster of two identical runs, to keep scheduler noise out
    let elapsed = t1.min(t2);
    let other = engine::run(&cfg, 18, Execution::Parallel).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let read = |name: &str, s: &engine::RunSummary| -> Vec<Vec<u8>> {
        let out = dir.path().join(name);
        export::write_summary(s, &out).unwrap();
        [export::SUMMARY_FILE, export::SERIES_FILE]
            .iter()
            .map(|f| fs::read(out.join(f)).unwrap())
            .collect()
    };
    let (a, b, c) = (read("a", &first), read("b", &second), read("c", &other));
    let identical = a == b;
    let distinct = a[1] != c[1];
    check(
        identical && distinct && elapsed < Duration::from_secs(1),
        format!("same seed identical: {identical}, other seed differs: {distinct}, K=28 x 2000 slots in {elapsed:.2?}"),
    )
}

/// Brute force over every allocation with at most one winner per group.
fn brute_force_value(bids: &[f64], groups: &[usize], num_groups: usize) -> f64 {
    let k = bids.len();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << k) {
        let mut used = vec![false; num_groups];
        let mut feasible = true;
        let mut value = 0.0;
        for i in 0..k {
            if mask & (1 << i) != 0 {
                if used[groups[i]] {
                    feasible = false;
                    break;
                }
                used[groups[i]] = true;
                value += bids[i];
            }
        }
        if feasible {
            best = best.max(value);
        }
    }
    best
}

fn auction_correctness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut bad = 0;
    for instance in 0..1000 {
        let k = rng.random_range(1..=8);
        let num_groups = rng.random_range(1..=3);
        let groups: Vec<usize> = (0..k).map(|_| rng.random_range(0..num_groups)).collect();
        // every third instance uses a coarse grid so ties occur
        let bids: Vec<f64> = (0..k)
            .map(|_| {
                if instance % 3 == 0 {
                    rng.random_range(0..5) as f64 * 0.5
                } else {
                    rng.random_range(0.0..10.0)
                }
            })
            .collect();
        let assignment = GroupAssignment::from_labels(groups.clone(), num_groups);
        let (round, _) = determine_winners(&bids, &assignment, &mut rng);
        let mut ok = round.allocated_value() == brute_force_value(&bids, &groups, num_groups);
        for i in 0..k {
            let rivals = (0..k).filter(|&j| j != i && groups[j] == groups[i]).map(|j| bids[j]);
            let second = rivals.fold(0.0, f64::max);
            let expected = if round.winners[i] { second } else { 0.0 };
            ok &= round.payments[i] == expected;
        }
        for g in 0..num_groups {
            ok &= (0..k).filter(|&i| groups[i] == g && round.winners[i]).count() == usize::from(groups.contains(&g));
        }
        if !ok {
            bad += 1;
        }
    }
    check(bad == 0, format!("{bad} of 1000 instances disagree with brute force"))
}

/// Outcome for bidder 0 as (won, payment) against `rivals`.
fn outcome_for(bid: f64, rivals: &[f64], rng: &mut ChaCha8Rng) -> (bool, f64) {
    let mut bids = vec![bid];
    bids.extend_from_slice(rivals);
    let assignment = GroupAssignment::from_labels(vec![0; bids.len()], 1);
    let (round, _) = determine_winners(&bids, &assignment, rng);
    (round.winners[0], round.payments[0])
}

fn truthfulness() -> Outcome {
    const STEPS: usize = 101;
    let grid: Vec<f64> = (0..STEPS).map(|i| i as f64 / 10.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0u64;
    let mut profiles = 0u64;
    // rivals as non-decreasing index tuples: order does not change bidder 0's outcome
    let mut rival_sets: Vec<Vec<usize>> = vec![vec![]];
    for a in 0..STEPS {
        rival_sets.push(vec![a]);
        for b in a..STEPS {
            rival_sets.push(vec![a, b]);
            for c in b..STEPS {
                rival_sets.push(vec![a, b, c]);
            }
        }
    }
    let mut utility = vec![0.0; STEPS];
    for set in &rival_sets {
        let rivals: Vec<f64> = set.iter().map(|&i| grid[i]).collect();
        let outcomes: Vec<(bool, f64)> = grid.iter().map(|&b| outcome_for(b, &rivals, &mut rng)).collect();
        for (vi, &value) in grid.iter().enumerate() {
            for (u, &(won, pay)) in utility.iter_mut().zip(&outcomes) {
                *u = if won { value - pay } else { 0.0 };
            }
            let truthful = utility[vi];
            violations += utility.iter().filter(|&&u| u > truthful + 1e-12).count() as u64;
            profiles += 1;
        }
    }

    // the learner's bid is its own break-even payment
    let mut bid_violations = 0;
    let budget = LinkBudget::from_config(&config(FIG2, &[]));
    for trial in 0..200 {
        let mut agent = OeAgent::new(5, LearningConfig::default(), 0.1, 6.0);
        for q in 0..=5 {
            agent.tables.set_v(q, rng.random_range(0.0..0.5));
        }
        let queue = trial % 6;
        let quality = 10f64.powf(rng.random_range(-12.0..-7.0));
        let decision = agent.compute_bid(queue, quality, &budget);
        let value = decision.bid;
        for &rival in &grid {
            let mut alternatives = grid.clone();
            alternatives.push(value);
            let realized: Vec<f64> = alternatives
                .iter()
                .map(|&b| {
                    let (won, pay) = outcome_for(b, &[rival], &mut rng);
                    if won {
                        value - pay
                    } else {
                        0.0
                    }
                })
                .collect();
            let own = *realized.last().unwrap();
            bid_violations += realized.iter().filter(|&&u| u > own + 1e-12).count();
        }
    }
    check(
        violations == 0 && bid_violations == 0,
        format!(
            "{violations} profitable deviations over {profiles} (value, rivals) profiles; \
             {bid_violations} beating the learner's bid"
        ),
    )
}

fn conservation() -> Outcome {
    let cfg = config(
        "num_pairs = 8\npair_distance = 26\narrival_rate = 4\nmax_queue = 5\nnum_groups = 3\nhorizon_slots = 100000\n\
         agent_policies = [\"random\", \"random\", \"random\", \"channel_aware\", \"queue_aware\", \"random\", \"oe\", \"random\"]\n",
        &[],
    );
    let mut world = World::new(&cfg, 4, Execution::Parallel).map_err(|e| e.to_string())?;
    let mut violations = 0u64;
    let mut arrived = 0u64;
    for _ in 0..100_000 {
        world.run_slot().map_err(|e| e.to_string())?;
        for p in &world.pairs {
            let q = p.queue;
            if q.arrived != q.departed + q.dropped + q.reset_losses + q.length as u64 {
                violations += 1;
            }
        }
    }
    for p in &world.pairs {
        arrived += p.queue.arrived;
    }
    check(violations == 0, format!("{violations} violations over 10^5 slots, {arrived} packets arrived"))
}

fn constant_path_loss() -> Outcome {
    let cfg = config(FIG2, &[]);
    let grid = GridMap::from_config(&cfg).map_err(|e| e.to_string())?;
    let params = PathLossParams::from_config(&cfg);
    let expected = cfg.pathloss_exponent_coeff * 26f64.powf(-cfg.pathloss_coefficient);
    let step = cfg.vehicle_speed * cfg.slot_duration;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut pairs: Vec<VuePairKinematics> = (0..4)
        .map(|_| VuePairKinematics::place(&grid, 26.0, &cfg.turn_probs, &mut rng).unwrap())
        .collect();
    let (mut worst, mut nlos, mut wlos) = (0.0f64, 0, 0);
    for _ in 0..100_000 {
        for p in &mut pairs {
            p.advance(&grid, step, &cfg.turn_probs, &mut rng);
            let geometry = p.classify(cfg.intersection_radius);
            match geometry.class {
                LinkClass::Nlos => nlos += 1,
                LinkClass::Wlos => wlos += 1,
                LinkClass::Los => {}
            }
            let h = path_loss(&geometry, &params).map_err(|e| e.to_string())?;
            worst = worst.max((h - expected).abs() / expected);
        }
    }
    check(
        worst <= 1e-9 && nlos == 0,
        format!("max relative deviation {worst:.2e}, {nlos} NLOS, {wlos} WLOS over 4 x 10^5 steps"),
    )
}

/// Value iteration on the frozen single-agent chain: deterministic arrivals,
/// fixed channel, the agent always wins for free.
fn value_iteration_oracle(cfg: &ScenarioConfig) -> Vec<f64> {
    let gamma = cfg.continue_prob;
    let alpha = cfg.power_weight;
    let qmax = cfg.max_queue;
    let arrivals = cfg.arrival_rate.round() as usize;
    let quality = cfg.pathloss_exponent_coeff * cfg.pair_distance.powf(-cfg.pathloss_coefficient);
    let noise = cfg.interference + cfg.bandwidth * cfg.noise_psd;
    let power = |d: usize| {
        if d == 0 {
            0.0
        } else {
            noise / quality * (2f64.powf(cfg.packet_size * d as f64 / (cfg.bandwidth * cfg.slot_duration)) - 1.0)
        }
    };
    let mut v = vec![0.0; qmax + 1];
    for _ in 0..10_000 {
        let next: Vec<f64> = (0..=qmax)
            .map(|post| {
                let offered = post + arrivals;
                let overflow = offered.saturating_sub(qmax);
                let q = offered - overflow;
                let best = (0..=q)
                    .filter(|&d| power(d) <= cfg.max_power)
                    .map(|d| gamma * ((-(q as f64)).exp() + alpha * (-power(d)).exp()) + v[q - d])
                    .fold(f64::NEG_INFINITY, f64::max);
                gamma * ((-(overflow as f64)).exp() + best)
            })
            .collect();
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < 1e-15 {
            break;
        }
    }
    v
}

fn learner_fixed_point() -> Outcome {
    let cfg = config(
        "num_pairs = 1\nnum_groups = 1\npair_distance = 26\narrival_rate = 1\nmax_queue = 3\n\
         fading_model = \"unit\"\narrival_model = \"deterministic\"\ntermination = false\n\
         horizon_slots = 100000\nlearning.exploration = 0.3\nlearning.rate_clock = \"visits\"\n",
        &[],
    );
    let start = Instant::now();
    let mut world = World::new(&cfg, 6, Execution::Sequential).map_err(|e| e.to_string())?;
    for _ in 0..100_000 {
        world.run_slot().map_err(|e| e.to_string())?;
    }
    let elapsed = start.elapsed();
    let learned = world.pairs[0].agent.as_oe().unwrap().tables.v_tilde().to_vec();
    let oracle = value_iteration_oracle(&cfg);
    let gap = learned.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    check(
        gap <= 1e-3 && elapsed < Duration::from_secs(10),
        format!("max |learned - oracle| = {gap:.2e} after 10^5 slots in {elapsed:.2?}; oracle {oracle:.5?}"),
    )
}

fn convergence() -> Outcome {
    let cfg = config(FIG2, &["horizon_slots=5000", "warmup_slots=1000"]);
    let mut slots = Vec::new();
    let mut slowest = Duration::ZERO;
    for seed in 1..=10 {
        let start = Instant::now();
        let s = engine::run(&cfg, seed, Execution::Parallel).map_err(|e| e.to_string())?;
        slowest = slowest.max(start.elapsed());
        slots.push(s.convergence_slot);
    }
    let reached = slots.iter().filter(|s| matches!(s, Some(t) if *t <= 5000)).count();
    check(
        reached >= 9 && slowest < Duration::from_secs(30),
        format!("{reached}/10 seeds converged, slots {slots:?}, slowest seed {slowest:.2?}"),
    )
}

fn mean_utility(cfg: &ScenarioConfig, seed: u64) -> f64 {
    engine::run(cfg, seed, Execution::Parallel).unwrap().averages.utility
}

const TREND_RUN: &[&str] = &["horizon_slots=4000", "warmup_slots=1000"];

fn oe_beats_random() -> Outcome {
    let base = "num_pairs = 56\npair_distance = 20\narrival_rate = 3\nmax_queue = 5\n";
    let oe = config(base, TREND_RUN);
    let random = config(base, &[TREND_RUN, &["policy=\"random\""]].concat());
    let seeds = 1..=10u64;
    let wins = seeds.clone().filter(|&s| mean_utility(&oe, s) > mean_utility(&random, s)).count();
    let n = seeds.count();
    // one-sided sign test: P(at least `wins` successes of n | p = 1/2)
    let choose = |n: u64, k: u64| (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64);
    let p: f64 = (wins as u64..=n as u64).map(|k| choose(n as u64, k)).sum::<f64>() / 2f64.powi(n as i32);
    check(p < 0.05, format!("OE ahead on {wins}/{n} paired seeds, sign test p = {p:.4}"))
}

fn utility_falls_with_load() -> Outcome {
    let means: Vec<f64> = [3, 5, 7]
        .iter()
        .map(|lambda| {
            let cfg = config(
                &format!("num_pairs = 56\npair_distance = 28\narrival_rate = {lambda}\nmax_queue = 5\n"),
                TREND_RUN,
            );
            (1..=5).map(|s| mean_utility(&cfg, s)).sum::<f64>() / 5.0
        })
        .collect();
    let inversions: Vec<f64> = means.windows(2).filter(|w| w[1] > w[0]).map(|w| (w[1] - w[0]) / w[0]).collect();
    let ok = inversions.is_empty() || (inversions.len() == 1 && inversions[0] <= 0.02);
    check(ok, format!("mean utility at lambda 3, 5, 7: {means:.4?}"))
}

fn rate_schedule() -> Outcome {
    let l = LearningConfig::default();
    const N: u64 = 1_000_000;
    const BLOCK: u64 = 100_000;
    let (mut sum, mut squares) = (0.0, 0.0);
    let mut block_adds = Vec::new();
    let mut block = 0.0;
    for t in 0..N {
        let z = l.rate(t);
        sum += z;
        squares += z * z;
        block += z * z;
        if (t + 1) % BLOCK == 0 {
            block_adds.push(block);
            block = 0.0;
        }
    }
    // the first block holds the large early terms; the tail is what must shrink
    let tail_ok = block_adds[1..].iter().all(|&b| b < 1e-3) && block_adds.windows(2).all(|w| w[1] < w[0]);
    check(
        sum > 50.0 && tail_ok,
        format!(
            "sum {sum:.2}, sum of squares {squares:.5}, later blocks add {:.2e} down to {:.2e}",
            block_adds[1],
            block_adds[block_adds.len() - 1]
        ),
    )
}

fn clustering() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let params = ClusterParams {
        groups: 15,
        kernel_width: 10.0,
        restarts: 20,
        max_iterations: 100,
        region_side: 250.0,
    };
    let mut exact = 0;
    for trial in 0..100u64 {
        let mut points: Vec<(Point, usize)> = Vec::new();
        for row in 0..3 {
            for col in 0..5 {
                let cx = 50.0 * col as f64 + 25.0 + rng.random_range(-10.0..10.0);
                let cy = 250.0 / 3.0 * (row as f64 + 0.5) + rng.random_range(-10.0..10.0);
                for _ in 0..2 {
                    let p = (cx + rng.random_range(-0.5..0.5), cy + rng.random_range(-0.5..0.5));
                    points.push((p, row * 5 + col));
                }
            }
        }
        points.shuffle(&mut rng);
        let positions: Vec<Point> = points.iter().map(|p| p.0).collect();
        let g = cluster(&positions, &params, trial, Execution::Parallel);
        let truth: Vec<usize> = points.iter().map(|p| p.1).collect();
        if same_partition(&g.group_of, &truth) {
            exact += 1;
        }
    }
    let cfg = config("num_pairs = 60\npair_distance = 26\narrival_rate = 6\nmax_queue = 5\n", &[]);
    let wide = ClusterParams {
        groups: cfg.num_groups,
        kernel_width: cfg.clustering.kernel_width,
        restarts: cfg.clustering.restarts,
        max_iterations: cfg.clustering.max_iterations,
        region_side: cfg.region_side,
    };
    let mut slowest = Duration::ZERO;
    for trial in 0..20 {
        let positions: Vec<Point> =
            (0..60).map(|_| (rng.random_range(0.0..250.0), rng.random_range(0.0..250.0))).collect();
        let start = Instant::now();
        cluster(&positions, &wide, trial, Execution::Parallel).assert_partition();
        slowest = slowest.max(start.elapsed());
    }
    check(
        exact >= 95 && slowest < Duration::from_millis(50),
        format!("{exact}/100 exact recoveries, slowest K=60 call {slowest:.2?}"),
    )
}

fn same_partition(a: &[usize], b: &[usize]) -> bool {
    let mut fwd = std::collections::HashMap::new();
    let mut back = std::collections::HashMap::new();
    a.iter().zip(b).all(|(x, y)| *fwd.entry(x).or_insert(y) == y && *back.entry(y).or_insert(x) == x)
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("determinism", determinism),
        ("auction matches brute force", auction_correctness),
        ("truthful bidding", truthfulness),
        ("queue conservation", conservation),
        ("constant path loss", constant_path_loss),
        ("learner fixed point", learner_fixed_point),
        ("convergence", convergence),
        ("OE beats random at K=56", oe_beats_random),
        ("utility falls with load", utility_falls_with_load),
        ("learning-rate schedule", rate_schedule),
        ("spectral clustering", clustering),
    ];
    let mut failed = 0;
    for (i, (name, criterion)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(criterion)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let (tag, detail) = match outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name}: {detail} [{:.1?}]", i + 1, start.elapsed());
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
