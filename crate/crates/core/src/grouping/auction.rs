use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GroupAssignment;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuctionRound {
    pub bids: Vec<f64>,
    pub winners: Vec<bool>,
    pub payments: Vec<f64>,
}

impl AuctionRound {
    pub fn revenue(&self) -> f64 {
        self.payments.iter().sum()
    }

    /// Σ θ_k · B_k, the objective the allocation maximizes.
    pub fn allocated_value(&self) -> f64 {
        self.winners
            .iter()
            .zip(&self.bids)
            .filter(|(w, _)| **w)
            .map(|(_, b)| b)
            .sum()
    }
}

/// Outcome of one group's auction, for logging.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupOutcome {
    pub group: usize,
    pub winner: Option<usize>,
    pub winning_bid: f64,
    pub payment: f64,
}

/// Resolve the auction: in each group the highest bid wins (ties drawn
/// uniformly from `tie_rng`) and pays the highest competing bid, or nothing
/// when bidding alone. Losers pay nothing.
pub fn determine_winners<R: Rng + ?Sized>(
    bids: &[f64],
    assignment: &GroupAssignment,
    tie_rng: &mut R,
) -> (AuctionRound, Vec<GroupOutcome>) {
    debug_assert!(bids.iter().all(|b| b.is_finite() && *b >= 0.0));
    let n = bids.len();
    let mut winners = vec![false; n];
    let mut payments = vec![0.0; n];
    let mut outcomes = Vec::with_capacity(assignment.num_groups());
    let mut top = Vec::new();
    for (group, members) in assignment.members.iter().enumerate() {
        if members.is_empty() {
            outcomes.push(GroupOutcome {
                group,
                winner: None,
                winning_bid: 0.0,
                payment: 0.0,
            });
            continue;
        }
        let best = members.iter().map(|&k| bids[k]).fold(f64::NEG_INFINITY, f64::max);
        top.clear();
        top.extend(members.iter().copied().filter(|&k| bids[k] == best));
        let winner = if top.len() == 1 {
            top[0]
        } else {
            top[tie_rng.random_range(0..top.len())]
        };
        let price = members
            .iter()
            .filter(|&&k| k != winner)
            .map(|&k| bids[k])
            .fold(0.0, f64::max);
        winners[winner] = true;
        payments[winner] = price;
        outcomes.push(GroupOutcome {
            group,
            winner: Some(winner),
            winning_bid: best,
            payment: price,
        });
    }
    (
        AuctionRound {
            bids: bids.to_vec(),
            winners,
            payments,
        },
        outcomes,
    )
}
