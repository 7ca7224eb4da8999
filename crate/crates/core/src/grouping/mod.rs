//! Geographic grouping of pairs and the per-group sealed second-price auction.

mod auction;
mod spectral;

pub use auction::{determine_winners, AuctionRound, GroupOutcome};
pub use spectral::{cluster, grid_partition, ClusterParams};

use serde::{Deserialize, Serialize};

/// A partition of pair indices into groups (`0..members.len()`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAssignment {
    pub group_of: Vec<usize>,
    pub members: Vec<Vec<usize>>,
    /// Set when spectral clustering failed and the grid partition was used.
    pub fallback: bool,
}

impl GroupAssignment {
    pub fn from_labels(labels: Vec<usize>, groups: usize) -> Self {
        let mut members = vec![Vec::new(); groups];
        for (pair, &g) in labels.iter().enumerate() {
            members[g].push(pair);
        }
        GroupAssignment {
            group_of: labels,
            members,
            fallback: false,
        }
    }

    pub fn num_groups(&self) -> usize {
        self.members.len()
    }

    /// Panics unless the groups are disjoint, exhaustive and consistent with `group_of`.
    pub fn assert_partition(&self) {
        let mut seen = vec![false; self.group_of.len()];
        for (g, members) in self.members.iter().enumerate() {
            for &k in members {
                assert!(!seen[k], "pair {k} in two groups");
                assert_eq!(self.group_of[k], g);
                seen[k] = true;
            }
        }
        assert!(seen.into_iter().all(|s| s), "a pair has no group");
    }
}
