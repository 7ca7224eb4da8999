use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Generator type used for every random draw in the simulator.
pub type SimRng = ChaCha8Rng;

/// Named random substreams. Each stochastic component draws from its own
/// stream so that changing one component leaves every other draw intact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stream {
    Mobility,
    Fading,
    Arrivals,
    Termination,
    TieBreaks,
    BaselineBids,
    Exploration,
    Clustering,
}

impl Stream {
    pub const ALL: [Stream; 8] = [
        Stream::Mobility,
        Stream::Fading,
        Stream::Arrivals,
        Stream::Termination,
        Stream::TieBreaks,
        Stream::BaselineBids,
        Stream::Exploration,
        Stream::Clustering,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Stream::Mobility => "mobility",
            Stream::Fading => "fading",
            Stream::Arrivals => "arrivals",
            Stream::Termination => "termination",
            Stream::TieBreaks => "tie_breaks",
            Stream::BaselineBids => "baseline_bids",
            Stream::Exploration => "exploration",
            Stream::Clustering => "clustering",
        }
    }

    fn id(self) -> u64 {
        Stream::ALL.iter().position(|s| *s == self).unwrap() as u64 + 1
    }
}

impl fmt::Display for Stream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Stream {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stream::ALL
            .into_iter()
            .find(|stream| stream.label() == s)
            .ok_or_else(|| Error::UnknownStream(s.to_string()))
    }
}

/// Deterministic substream plan derived from one master seed.
///
/// A substream is a ChaCha8 keystream keyed by the master seed and selected
/// by `(stream, index)` through the cipher's 64-bit stream id: the top 16
/// bits carry the stream label and the low 48 bits the agent (or slot) index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngPlan {
    pub master_seed: u64,
}

const INDEX_BITS: u32 = 48;

impl RngPlan {
    pub fn new(master_seed: u64) -> Self {
        RngPlan { master_seed }
    }

    pub fn substream(&self, stream: Stream, index: u64) -> SimRng {
        assert!(index < 1 << INDEX_BITS, "substream index {index} out of range");
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream((stream.id() << INDEX_BITS) | index);
        rng
    }

    /// Label-based lookup, for callers holding stream names as text.
    pub fn derive_substream(&self, label: &str, index: u64) -> Result<SimRng, Error> {
        Ok(self.substream(label.parse()?, index))
    }
}
