use serde::{Deserialize, Serialize};

use super::{run, RunSummary};
use crate::error::{ConfigError, Result};
use crate::par::{self, Execution};
use crate::scenario::{ConfigDocument, ScenarioConfig};

/// Cross-seed mean and sample standard deviation of the post-warmup averages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub mean_q: f64,
    pub mean_c: f64,
    pub mean_o: f64,
    pub mean_u: f64,
    pub std_q: f64,
    pub std_c: f64,
    pub std_o: f64,
    pub std_u: f64,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl Aggregate {
    pub fn of(runs: &[RunSummary]) -> Self {
        let column = |f: fn(&RunSummary) -> f64| mean_std(&runs.iter().map(f).collect::<Vec<_>>());
        let (mean_q, std_q) = column(|r| r.averages.queue);
        let (mean_c, std_c) = column(|r| r.averages.power);
        let (mean_o, std_o) = column(|r| r.averages.overflow);
        let (mean_u, std_u) = column(|r| r.averages.utility);
        Aggregate {
            runs: runs.len(),
            mean_q,
            mean_c,
            mean_o,
            mean_u,
            std_q,
            std_c,
            std_o,
            std_u,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Experiment {
    pub runs: Vec<RunSummary>,
    pub aggregate: Aggregate,
}

/// Independent runs of `config`, one per seed, in seed order.
pub fn run_experiment(config: &ScenarioConfig, seeds: &[u64], exec: Execution) -> Result<Experiment> {
    if seeds.is_empty() {
        return Err(ConfigError::invalid("seeds", "at least one seed is required").into());
    }
    let runs = par::map_range(exec, seeds.len(), |i| run(config, seeds[i], exec))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let aggregate = Aggregate::of(&runs);
    Ok(Experiment { runs, aggregate })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub aggregate: Aggregate,
}

/// Vary one config key over `values`, holding the rest of `document` fixed.
pub fn sweep(
    document: &ConfigDocument,
    param: &str,
    values: &[String],
    seeds: &[u64],
    exec: Execution,
) -> Result<Vec<SweepRow>> {
    let configs = values
        .iter()
        .map(|value| {
            let mut doc = document.clone();
            doc.set(param, value)?;
            doc.build()
        })
        .collect::<Result<Vec<_>, ConfigError>>()?;
    let results = par::map_range(exec, configs.len(), |i| run_experiment(&configs[i], seeds, exec))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(values
        .iter()
        .zip(results)
        .map(|(value, e)| SweepRow {
            param: value.clone(),
            aggregate: e.aggregate,
        })
        .collect())
}
