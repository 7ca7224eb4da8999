//! Result files.
//!
//! A run directory holds `summary.json` (everything but the series) and
//! `series.csv` (one row per slot). A sweep directory holds `sweep.csv` and
//! `sweep.json`. Optional traces go to `mobility_trace.csv` and
//! `auction_trace.csv`. Floats are written in shortest round-trip form, so
//! identical summaries give identical bytes and re-import is exact.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{RunSummary, SeriesRow, SlotMetrics, SweepRow};
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.json";
pub const SERIES_FILE: &str = "series.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const SWEEP_JSON_FILE: &str = "sweep.json";
pub const MOBILITY_TRACE_FILE: &str = "mobility_trace.csv";
pub const AUCTION_TRACE_FILE: &str = "auction_trace.csv";

pub const SWEEP_HEADER: &str = "param,mean_q,mean_c,mean_o,mean_u,std_u";

pub fn series_csv(rows: &[SeriesRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 96);
    out.push_str(SeriesRow::HEADER);
    out.push('\n');
    for r in rows {
        writeln!(
            out,
            "{},{:?},{:?},{:?},{:?},{:?},{},{:?}",
            r.slot,
            r.mean_queue,
            r.mean_power,
            r.mean_overflow,
            r.mean_utility,
            r.mean_payment,
            r.winners,
            r.max_value_change
        )
        .unwrap();
    }
    out
}

pub fn parse_series(text: &str) -> Result<Vec<SeriesRow>> {
    let mut lines = text.lines();
    if lines.next() != Some(SeriesRow::HEADER) {
        return Err(Error::Transcript("series file has an unexpected header".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|line| {
            let bad = || Error::Transcript(format!("bad series row `{line}`"));
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 8 {
                return Err(bad());
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad());
            Ok(SeriesRow {
                slot: f[0].parse().map_err(|_| bad())?,
                mean_queue: num(1)?,
                mean_power: num(2)?,
                mean_overflow: num(3)?,
                mean_utility: num(4)?,
                mean_payment: num(5)?,
                winners: f[6].parse().map_err(|_| bad())?,
                max_value_change: num(7)?,
            })
        })
        .collect()
}

pub fn write_summary(summary: &RunSummary, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut json = serde_json::to_string_pretty(summary)?;
    json.push('\n');
    fs::write(dir.join(SUMMARY_FILE), json)?;
    fs::write(dir.join(SERIES_FILE), series_csv(&summary.series))?;
    Ok(())
}

pub fn read_summary(dir: &Path) -> Result<RunSummary> {
    let mut summary: RunSummary = serde_json::from_str(&fs::read_to_string(dir.join(SUMMARY_FILE))?)?;
    summary.series = parse_series(&fs::read_to_string(dir.join(SERIES_FILE))?)?;
    Ok(summary)
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in rows {
        let a = &r.aggregate;
        writeln!(out, "{},{:?},{:?},{:?},{:?},{:?}", r.param, a.mean_q, a.mean_c, a.mean_o, a.mean_u, a.std_u).unwrap();
    }
    out
}

pub fn write_sweep(rows: &[SweepRow], dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SWEEP_FILE), sweep_csv(rows))?;
    let mut json = serde_json::to_string_pretty(rows)?;
    json.push('\n');
    fs::write(dir.join(SWEEP_JSON_FILE), json)?;
    Ok(())
}

pub fn read_sweep(dir: &Path) -> Result<Vec<SweepRow>> {
    Ok(serde_json::from_str(&fs::read_to_string(dir.join(SWEEP_JSON_FILE))?)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceKind {
    Mobility,
    Auction,
}

/// Streams per-slot trace rows to delimited-text files.
pub struct TraceWriter {
    mobility: Option<BufWriter<File>>,
    auction: Option<BufWriter<File>>,
}

impl TraceWriter {
    pub fn create(dir: &Path, kinds: &[TraceKind]) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let open = |name: &str, header: &str| -> Result<BufWriter<File>> {
            let mut w = BufWriter::new(File::create(dir.join(name))?);
            writeln!(w, "{header}")?;
            Ok(w)
        };
        Ok(TraceWriter {
            mobility: kinds
                .contains(&TraceKind::Mobility)
                .then(|| {
                    open(
                        MOBILITY_TRACE_FILE,
                        "slot,pair,tx_x,tx_y,rx_x,rx_y,link,path_loss,fading",
                    )
                })
                .transpose()?,
            auction: kinds
                .contains(&TraceKind::Auction)
                .then(|| open(AUCTION_TRACE_FILE, "slot,group,winner,winning_bid,payment"))
                .transpose()?,
        })
    }

    pub fn record(&mut self, m: &SlotMetrics) -> Result<()> {
        if let Some(w) = &mut self.mobility {
            for (k, p) in m.pairs.iter().enumerate() {
                writeln!(
                    w,
                    "{},{k},{:?},{:?},{:?},{:?},{},{:?},{:?}",
                    m.slot,
                    p.transmitter.0,
                    p.transmitter.1,
                    p.receiver.0,
                    p.receiver.1,
                    p.link.label(),
                    p.path_loss,
                    p.fading
                )?;
            }
        }
        if let Some(w) = &mut self.auction {
            for g in &m.groups {
                let winner = g.winner.map(|k| k.to_string()).unwrap_or_default();
                writeln!(w, "{},{},{winner},{:?},{:?}", m.slot, g.group, g.winning_bid, g.payment)?;
            }
        }
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        for mut w in [self.mobility, self.auction].into_iter().flatten() {
            w.flush()?;
        }
        Ok(())
    }
}
