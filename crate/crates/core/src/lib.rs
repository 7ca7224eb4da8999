//! Slotted vehicle-to-vehicle radio resource simulator.
//!
//! Transmitter/receiver pairs drive a Manhattan grid and share one frequency
//! resource per geographic group. Each slot a roadside unit clusters the
//! pairs and runs a sealed second-price auction per group; winners transmit
//! queued packets at the power their channel requires. Pairs bid either with
//! an online learner over post-decision queue states or with one of three
//! baseline rules.
//!
//! ```no_run
//! use v2v_oe::{engine, scenario::load_config, Execution};
//!
//! let config = load_config("num_pairs = 28\npair_distance = 26\narrival_rate = 6\nmax_queue = 5").unwrap();
//! let summary = engine::run(&config, 1, Execution::Parallel).unwrap();
//! println!("{:?} {:?}", summary.averages, summary.convergence_slot);
//! ```

pub mod baselines;
pub mod channel;
pub mod engine;
pub mod error;
pub mod grouping;
pub mod learner;
pub mod mobility;
mod par;
pub mod queueing;
pub mod scenario;

pub use error::{ConfigError, Error, Result};
pub use par::Execution;
