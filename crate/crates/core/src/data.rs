//! Appliance/aggregate power data: CSV ingestion, one-minute resampling,
//! day extraction and seeded synthetic households.
//!
//! Timestamps are epoch seconds read as local wall-clock time, so minute
//! `k` of a day is `k` minutes after local midnight.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{NaiveDate, NaiveDateTime};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::MINUTES_PER_DAY;
use crate::error::{Error, Result};
use crate::nilm::{classify, ON_THRESHOLD_KW};
use crate::seed::{self, Stream};

const SECONDS_PER_DAY: i64 = 86_400;

/// One metered channel: strictly increasing timestamps and power in kW.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSeries {
    pub name: String,
    pub timestamps: Vec<i64>,
    pub power: Vec<f64>,
}

impl ChannelSeries {
    pub fn new(name: impl Into<String>, timestamps: Vec<i64>, power: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if timestamps.len() != power.len() {
            return Err(Error::LengthMismatch {
                what: "channel timestamps vs power",
                left: timestamps.len(),
                right: power.len(),
            });
        }
        if timestamps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Data(format!("{name}: timestamps not strictly increasing")));
        }
        if power.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Data(format!("{name}: power must be finite and non-negative")));
        }
        Ok(Self {
            name,
            timestamps,
            power,
        })
    }

    pub fn len(&self) -> usize {
        self.power.len()
    }

    pub fn is_empty(&self) -> bool {
        self.power.is_empty()
    }

    /// Energy in kWh assuming each sample holds until the next one
    /// (the last sample holds for `last_hold_s` seconds).
    pub fn energy_kwh(&self, last_hold_s: i64) -> f64 {
        let mut e = 0.0;
        for (i, p) in self.power.iter().enumerate() {
            let hold = match self.timestamps.get(i + 1) {
                Some(next) => next - self.timestamps[i],
                None => last_hold_s,
            };
            e += p * hold as f64 / 3600.0;
        }
        e
    }

    /// The 1440 values of `date`, or `None` unless every minute is present.
    fn day_values(&self, date: NaiveDate) -> Option<Vec<f64>> {
        let start = day_start(date);
        let i = self.timestamps.binary_search(&start).ok()?;
        let end = i + MINUTES_PER_DAY;
        if end > self.timestamps.len() || self.timestamps[end - 1] != start + SECONDS_PER_DAY - 60 {
            return None;
        }
        Some(self.power[i..end].to_vec())
    }
}

fn day_start(date: NaiveDate) -> i64 {
    date.and_hms_opt(0, 0, 0)
        .expect("midnight exists")
        .and_utc()
        .timestamp()
}

fn date_of(ts: i64) -> NaiveDate {
    chrono::DateTime::from_timestamp(ts, 0)
        .map(|d| d.date_naive())
        .unwrap_or_default()
}

fn parse_err(path: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads a two-column `timestamp_unix_s,power_w` file (commas or whitespace;
/// an optional header line is skipped). Watts become kW, rows are sorted and
/// duplicate timestamps collapse to their mean.
pub fn load_csv(path: &Path, name: &str) -> Result<ChannelSeries> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows: Vec<(i64, f64)> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(parse_err(
                path,
                line_no,
                format!("expected 2 fields, found {}", fields.len()),
            ));
        }
        let ts = fields[0].parse::<f64>();
        if idx == 0 && rows.is_empty() && ts.is_err() {
            continue; // header
        }
        let ts = ts.map_err(|e| parse_err(path, line_no, format!("timestamp: {e}")))?;
        let watts = fields[1]
            .parse::<f64>()
            .map_err(|e| parse_err(path, line_no, format!("power: {e}")))?;
        if !(ts.is_finite() && watts.is_finite()) {
            return Err(parse_err(path, line_no, "non-finite value"));
        }
        if watts < 0.0 {
            return Err(parse_err(path, line_no, "negative power"));
        }
        rows.push((ts.floor() as i64, watts / 1000.0));
    }
    if rows.is_empty() {
        return Err(Error::Data(format!("{}: no data rows", path.display())));
    }
    rows.sort_by_key(|r| r.0);
    let mut timestamps = Vec::with_capacity(rows.len());
    let mut power = Vec::with_capacity(rows.len());
    let mut i = 0;
    while i < rows.len() {
        let ts = rows[i].0;
        let mut j = i;
        let mut sum = 0.0;
        while j < rows.len() && rows[j].0 == ts {
            sum += rows[j].1;
            j += 1;
        }
        timestamps.push(ts);
        power.push(sum / (j - i) as f64);
        i = j;
    }
    ChannelSeries::new(name, timestamps, power)
}

/// Mean per wall-clock minute. Runs of missing minutes shorter than
/// `gap_limit_minutes` repeat the previous value; longer runs are zero-filled
/// and logged.
pub fn resample_1min(series: &ChannelSeries, gap_limit_minutes: usize) -> Result<ChannelSeries> {
    if series.is_empty() {
        return Err(Error::Data(format!("{}: cannot resample an empty series", series.name)));
    }
    let mut buckets: Vec<(i64, f64, usize)> = Vec::new();
    for (&ts, &p) in series.timestamps.iter().zip(&series.power) {
        let minute = ts.div_euclid(60);
        match buckets.last_mut() {
            Some((m, sum, n)) if *m == minute => {
                *sum += p;
                *n += 1;
            }
            _ => buckets.push((minute, p, 1)),
        }
    }
    let mut timestamps = Vec::new();
    let mut power = Vec::new();
    let mut prev: Option<(i64, f64)> = None;
    for (minute, sum, n) in buckets {
        let mean = sum / n as f64;
        if let Some((last_minute, last_value)) = prev {
            let missing = (minute - last_minute - 1) as usize;
            if missing > 0 {
                let fill = if missing < gap_limit_minutes {
                    last_value
                } else {
                    log::warn!(
                        "{}: {missing}-minute gap after {} zero-filled",
                        series.name,
                        (last_minute + 1) * 60
                    );
                    0.0
                };
                for k in last_minute + 1..minute {
                    timestamps.push(k * 60);
                    power.push(fill);
                }
            }
        }
        timestamps.push(minute * 60);
        power.push(mean);
        prev = Some((minute, mean));
    }
    ChannelSeries::new(series.name.clone(), timestamps, power)
}

/// Aggregate plus named appliance channels on a shared one-minute grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Household {
    pub aggregate: ChannelSeries,
    pub appliances: BTreeMap<String, ChannelSeries>,
}

/// One day's aligned series, ready to drive the simulator and score the attacker.
#[derive(Clone, Debug, PartialEq)]
pub struct DayData {
    pub date: NaiveDate,
    pub demand: Vec<f64>,
    pub appliances: BTreeMap<String, Vec<f64>>,
    /// Ground-truth on/off labels (same strict threshold as the attacker).
    pub truth: BTreeMap<String, Vec<bool>>,
}

pub fn truth_labels(power: &[f64]) -> Vec<bool> {
    power.iter().map(|&p| classify(p, ON_THRESHOLD_KW)).collect()
}

impl Household {
    /// Days the aggregate channel fully covers.
    pub fn days(&self) -> Vec<NaiveDate> {
        let mut days: Vec<NaiveDate> = self
            .aggregate
            .timestamps
            .iter()
            .map(|&t| date_of(t))
            .collect();
        days.dedup();
        days.retain(|d| self.aggregate.day_values(*d).is_some());
        days
    }

    /// Fraction of shared minutes where the aggregate is at least the largest
    /// single appliance reading.
    pub fn aggregate_dominance(&self) -> f64 {
        let mut by_ts: BTreeMap<i64, f64> = BTreeMap::new();
        for ch in self.appliances.values() {
            for (&t, &p) in ch.timestamps.iter().zip(&ch.power) {
                let e = by_ts.entry(t).or_insert(0.0);
                *e = e.max(p);
            }
        }
        let (mut ok, mut total) = (0usize, 0usize);
        for (&t, &p) in self.aggregate.timestamps.iter().zip(&self.aggregate.power) {
            if let Some(&m) = by_ts.get(&t) {
                total += 1;
                if p + 1e-9 >= m {
                    ok += 1;
                }
            }
        }
        if total == 0 {
            1.0
        } else {
            ok as f64 / total as f64
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dom = self.aggregate_dominance();
        if dom < 0.99 {
            return Err(Error::Data(format!(
                "aggregate below the largest appliance at {:.2}% of minutes",
                100.0 * (1.0 - dom)
            )));
        }
        Ok(())
    }

    /// Writes the wide aligned CSV `timestamp,aggregate_w,<appliance>_w,...`
    /// for the minutes of `dates` (all days when `None`).
    pub fn write_wide_csv(&self, path: &Path, dates: Option<&[NaiveDate]>) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let names: Vec<&String> = self.appliances.keys().collect();
        write!(w, "timestamp,aggregate_w").map_err(io)?;
        for n in &names {
            write!(w, ",{n}_w").map_err(io)?;
        }
        writeln!(w).map_err(io)?;
        let lookup: Vec<BTreeMap<i64, f64>> = names
            .iter()
            .map(|n| {
                let ch = &self.appliances[*n];
                ch.timestamps.iter().copied().zip(ch.power.iter().copied()).collect()
            })
            .collect();
        for (&t, &p) in self.aggregate.timestamps.iter().zip(&self.aggregate.power) {
            if let Some(ds) = dates {
                if !ds.contains(&date_of(t)) {
                    continue;
                }
            }
            write!(w, "{t},{}", p * 1000.0).map_err(io)?;
            for l in &lookup {
                let v = l.get(&t).copied().ok_or_else(|| {
                    Error::Data(format!("appliance channel has no sample at {t}"))
                })?;
                write!(w, ",{}", v * 1000.0).map_err(io)?;
            }
            writeln!(w).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    /// Reads a wide aligned CSV written by [`Household::write_wide_csv`].
    pub fn read_wide_csv(path: &Path) -> Result<Self> {
        Self::read_wide_csvs(&[path.to_path_buf()])
    }

    /// Reads and concatenates several wide CSVs sharing the same columns.
    pub fn read_wide_csvs(paths: &[PathBuf]) -> Result<Self> {
        let mut header: Option<Vec<String>> = None;
        let mut rows: Vec<(i64, Vec<f64>)> = Vec::new();
        for path in paths {
            let mut rdr = csv::Reader::from_path(path)?;
            let h: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
            if h.len() < 2 || h[0] != "timestamp" || h[1] != "aggregate_w" {
                return Err(parse_err(path, 1, "header must start with timestamp,aggregate_w"));
            }
            if let Some(bad) = h[2..].iter().find(|c| !c.ends_with("_w")) {
                return Err(parse_err(path, 1, format!("column {bad:?} lacks the _w suffix")));
            }
            match &header {
                Some(prev) if prev != &h => {
                    return Err(parse_err(path, 1, "columns differ from earlier files"))
                }
                _ => header = Some(h.clone()),
            }
            for rec in rdr.records() {
                let rec = rec?;
                let line = rec.position().map_or(0, |p| p.line());
                if rec.len() != h.len() {
                    return Err(parse_err(path, line, format!("expected {} fields", h.len())));
                }
                let ts = rec[0]
                    .parse::<i64>()
                    .map_err(|e| parse_err(path, line, format!("timestamp: {e}")))?;
                let vals = rec
                    .iter()
                    .skip(1)
                    .map(|v| {
                        let w = v
                            .parse::<f64>()
                            .map_err(|e| parse_err(path, line, format!("power: {e}")))?;
                        if !(w.is_finite() && w >= 0.0) {
                            return Err(parse_err(path, line, "power must be finite and >= 0"));
                        }
                        Ok(w / 1000.0)
                    })
                    .collect::<Result<Vec<f64>>>()?;
                rows.push((ts, vals));
            }
        }
        let header = header.ok_or_else(|| Error::Data("no wide CSV files given".into()))?;
        if rows.is_empty() {
            return Err(Error::Data("wide CSV input has no rows".into()));
        }
        rows.sort_by_key(|r| r.0);
        let timestamps: Vec<i64> = rows.iter().map(|r| r.0).collect();
        let column = |i: usize| rows.iter().map(|r| r.1[i]).collect::<Vec<f64>>();
        let aggregate = ChannelSeries::new("aggregate", timestamps.clone(), column(0))?;
        let mut appliances = BTreeMap::new();
        for (i, name) in header[2..].iter().enumerate() {
            let n = name.trim_end_matches("_w").to_string();
            appliances.insert(n.clone(), ChannelSeries::new(n, timestamps.clone(), column(i + 1))?);
        }
        Ok(Self {
            aggregate,
            appliances,
        })
    }

    /// Every `*.csv` in `dir`, in file-name order.
    pub fn read_dir(dir: &Path) -> Result<Self> {
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "csv"))
            .collect();
        paths.sort();
        if paths.is_empty() {
            return Err(Error::Data(format!("no CSV files in {}", dir.display())));
        }
        Self::read_wide_csvs(&paths)
    }

    /// Extracts the 1440 aligned minutes of `date` for the aggregate and the
    /// appliances. Errors name the first channel that does not cover the day.
    pub fn make_day(&self, date: NaiveDate) -> Result<DayData> {
        let missing = |name: &str| Error::Data(format!("channel {name} does not cover {date}"));
        let demand = self
            .aggregate
            .day_values(date)
            .ok_or_else(|| missing(&self.aggregate.name))?;
        let mut appliances = BTreeMap::new();
        let mut truth = BTreeMap::new();
        for (name, ch) in &self.appliances {
            let v = ch.day_values(date).ok_or_else(|| missing(name))?;
            truth.insert(name.clone(), truth_labels(&v));
            appliances.insert(name.clone(), v);
        }
        Ok(DayData {
            date,
            demand,
            appliances,
            truth,
        })
    }
}

/// Free-function form of [`Household::make_day`].
pub fn make_day(household: &Household, date: NaiveDate) -> Result<DayData> {
    household.make_day(date)
}

/// Rectangular usage pulses of one appliance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseSpec {
    pub name: String,
    pub power_kw: f64,
    pub duration_minutes: usize,
    pub per_day: usize,
    /// Allowed wall-clock span `[earliest_minute, latest_minute)` for the pulses.
    pub earliest_minute: usize,
    pub latest_minute: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub start_date: NaiveDate,
    pub base_load_kw: f64,
    pub noise_sigma_kw: f64,
    pub appliances: Vec<PulseSpec>,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            start_date: NaiveDate::from_ymd_opt(2013, 5, 19).unwrap(),
            base_load_kw: 0.3,
            noise_sigma_kw: 0.01,
            appliances: vec![
                PulseSpec {
                    name: "kettle".into(),
                    power_kw: 2.5,
                    duration_minutes: 3,
                    per_day: 2,
                    earliest_minute: 420,
                    latest_minute: 1380,
                },
                PulseSpec {
                    name: "toaster".into(),
                    power_kw: 1.2,
                    duration_minutes: 4,
                    per_day: 1,
                    earliest_minute: 420,
                    latest_minute: 600,
                },
            ],
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic: {m}")));
        if !(self.base_load_kw >= 0.0 && self.base_load_kw.is_finite()) {
            return bad("base_load_kw must be >= 0".into());
        }
        if !(self.noise_sigma_kw >= 0.0 && self.noise_sigma_kw.is_finite()) {
            return bad("noise_sigma_kw must be >= 0".into());
        }
        let mut names: Vec<&str> = self.appliances.iter().map(|a| a.name.as_str()).collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return bad("appliance names must be unique".into());
        }
        for a in &self.appliances {
            if a.name.is_empty() || a.name == "aggregate" || a.name.contains([',', ' ']) {
                return bad(format!("invalid appliance name {:?}", a.name));
            }
            if !(a.power_kw >= 0.0 && a.power_kw.is_finite()) {
                return bad(format!("{}: power_kw must be >= 0", a.name));
            }
            if a.duration_minutes == 0 {
                return bad(format!("{}: duration must be at least one minute", a.name));
            }
            if a.latest_minute > MINUTES_PER_DAY || a.earliest_minute >= a.latest_minute {
                return bad(format!("{}: allowed span must lie within one day", a.name));
            }
            let span = a.latest_minute - a.earliest_minute;
            if a.duration_minutes * a.per_day > span {
                return bad(format!(
                    "{}: {} pulses of {} minutes do not fit in {} minutes",
                    a.name, a.per_day, a.duration_minutes, span
                ));
            }
        }
        Ok(())
    }
}

fn place_pulses<R: Rng + ?Sized>(rng: &mut R, p: &PulseSpec) -> Result<Vec<usize>> {
    let last_start = p.latest_minute - p.duration_minutes;
    for _ in 0..1000 {
        let mut starts: Vec<usize> = (0..p.per_day)
            .map(|_| rng.random_range(p.earliest_minute..=last_start))
            .collect();
        starts.sort_unstable();
        if starts.windows(2).all(|w| w[1] >= w[0] + p.duration_minutes) {
            return Ok(starts);
        }
    }
    Err(Error::Config(format!(
        "synthetic: could not place {} non-overlapping {} pulses",
        p.per_day, p.name
    )))
}

/// Seeded synthetic household: constant base load, rectangular appliance
/// pulses and clamped Gaussian measurement noise on the aggregate.
pub fn generate_synthetic(spec: &SyntheticSpec, days: usize) -> Result<Household> {
    spec.validate()?;
    if days == 0 {
        return Err(Error::Config("synthetic: days must be >= 1".into()));
    }
    let n = days * MINUTES_PER_DAY;
    let t0 = day_start(spec.start_date);
    let timestamps: Vec<i64> = (0..n as i64).map(|i| t0 + 60 * i).collect();
    let mut place_rng = seed::rng(spec.seed, Stream::Synth);
    let mut noise_rng = seed::rng(spec.seed, Stream::EnvNoise);

    let mut appliances = BTreeMap::new();
    let mut sum = vec![spec.base_load_kw; n];
    for a in &spec.appliances {
        let mut power = vec![0.0; n];
        for d in 0..days {
            for start in place_pulses(&mut place_rng, a)? {
                for m in start..start + a.duration_minutes {
                    power[d * MINUTES_PER_DAY + m] = a.power_kw;
                }
            }
        }
        for (s, p) in sum.iter_mut().zip(&power) {
            *s += p;
        }
        appliances.insert(
            a.name.clone(),
            ChannelSeries::new(a.name.clone(), timestamps.clone(), power)?,
        );
    }
    let aggregate: Vec<f64> = if spec.noise_sigma_kw > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma_kw)
            .map_err(|e| Error::Config(format!("synthetic noise: {e}")))?;
        sum.iter()
            .map(|s| (s + normal.sample(&mut noise_rng)).max(0.0))
            .collect()
    } else {
        sum
    };
    Ok(Household {
        aggregate: ChannelSeries::new("aggregate", timestamps, aggregate)?,
        appliances,
    })
}

/// Parses a `YYYY-MM-DD HH:MM:SS` wall-clock time into epoch seconds.
pub fn parse_local_timestamp(s: &str) -> Result<i64> {
    NaiveDateTime::parse_from_str(s, "%Y-%m-%d %H:%M:%S")
        .map(|d| d.and_utc().timestamp())
        .map_err(|e| Error::Data(format!("bad timestamp {s:?}: {e}")))
}
