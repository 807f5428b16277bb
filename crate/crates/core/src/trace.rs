//! Per-minute episode record and its CSV form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::reward::{PrivacyCase, RewardBreakdown};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub minute: usize,
    pub demand: f64,
    pub requested_action: f64,
    pub applied_action: f64,
    pub delta_b: f64,
    pub masked_load: f64,
    pub battery_before: f64,
    pub battery_after: f64,
    pub price: f64,
    pub done: bool,
    pub reward: RewardBreakdown,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EpisodeTrace {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: [&str; 21] = [
    "minute",
    "demand_kw",
    "requested_kw",
    "applied_kw",
    "delta_b_kwh",
    "masked_kw",
    "battery_before_kwh",
    "battery_after_kwh",
    "price_gbp_per_kwh",
    "done",
    "privacy_raw",
    "cost_raw",
    "system_raw",
    "battery_raw",
    "privacy_norm",
    "cost_norm",
    "system_norm",
    "total",
    "tau_kw",
    "delta_t_kw",
    "privacy_case",
];

impl EpisodeTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn demand(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.demand).collect()
    }

    pub fn masked(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.masked_load).collect()
    }

    pub fn initial_battery(&self) -> Option<f64> {
        self.rows.first().map(|r| r.battery_before)
    }

    pub fn final_battery(&self) -> Option<f64> {
        self.rows.last().map(|r| r.battery_after)
    }

    pub fn total_reward(&self) -> f64 {
        self.rows.iter().map(|r| r.reward.total).sum()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        writeln!(w, "{}", TRACE_HEADER.join(",")).map_err(io)?;
        for r in &self.rows {
            let b = &r.reward;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.minute,
                r.demand,
                r.requested_action,
                r.applied_action,
                r.delta_b,
                r.masked_load,
                r.battery_before,
                r.battery_after,
                r.price,
                u8::from(r.done),
                b.privacy_raw,
                b.cost_raw,
                b.system_raw,
                b.battery_raw,
                b.privacy_norm,
                b.cost_norm,
                b.system_norm,
                b.total,
                b.tau,
                b.delta_t,
                b.case.as_str(),
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_path(path)?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
        if header != TRACE_HEADER {
            return Err(Error::Parse {
                path: path.into(),
                line: 1,
                msg: "unexpected trace header".into(),
            });
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            let bad = |msg: String| Error::Parse {
                path: path.into(),
                line,
                msg,
            };
            let f = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|e| bad(format!("column {}: {e}", TRACE_HEADER[i])))
            };
            let minute = rec[0]
                .parse::<usize>()
                .map_err(|e| bad(format!("minute: {e}")))?;
            let case = PrivacyCase::parse(&rec[20])
                .ok_or_else(|| bad(format!("unknown privacy case {:?}", &rec[20])))?;
            rows.push(TraceRow {
                minute,
                demand: f(1)?,
                requested_action: f(2)?,
                applied_action: f(3)?,
                delta_b: f(4)?,
                masked_load: f(5)?,
                battery_before: f(6)?,
                battery_after: f(7)?,
                price: f(8)?,
                done: &rec[9] == "1",
                reward: RewardBreakdown {
                    privacy_raw: f(10)?,
                    cost_raw: f(11)?,
                    system_raw: f(12)?,
                    battery_raw: f(13)?,
                    privacy_norm: f(14)?,
                    cost_norm: f(15)?,
                    system_norm: f(16)?,
                    total: f(17)?,
                    tau: f(18)?,
                    delta_t: f(19)?,
                    case,
                },
            });
        }
        Ok(Self { rows })
    }
}
