//! Attack quality and cost scoring for one evaluated day.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{BatteryConfig, TariffSchedule};
use crate::error::{Error, Result};
use crate::nilm::{attack, AttackOutput, NilmModel};
use crate::reward::PrivacyCase;
use crate::trace::EpisodeTrace;

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub true_negatives: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassificationReport {
    /// Minute-level on/off comparison. Empty denominators score 0.
    pub fn from_labels(truth: &[bool], predicted: &[bool]) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::LengthMismatch {
                what: "truth vs predicted labels",
                left: truth.len(),
                right: predicted.len(),
            });
        }
        let mut r = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (true, true) => r.true_positives += 1,
                (false, true) => r.false_positives += 1,
                (true, false) => r.false_negatives += 1,
                (false, false) => r.true_negatives += 1,
            }
        }
        let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        r.precision = ratio(r.true_positives, r.true_positives + r.false_positives);
        r.recall = ratio(r.true_positives, r.true_positives + r.false_negatives);
        r.f1 = f1_score(r.precision, r.recall);
        Ok(r)
    }
}

/// Cost of refilling the battery at the peak price after the day:
/// `battery_cost + (b_max - b_final) * peak_price`.
pub fn compensated_cost(battery_cost: f64, final_battery: f64, b_max: f64, peak_price: f64) -> f64 {
    battery_cost + (b_max - final_battery) * peak_price
}

/// Same as [`compensated_cost`] with the final charge given as a percentage.
pub fn compensated_cost_from_pct(battery_cost: f64, remaining_pct: f64, b_max: f64, peak_price: f64) -> f64 {
    compensated_cost(battery_cost, remaining_pct / 100.0 * b_max, b_max, peak_price)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    /// Price-weighted energy moved into the battery, `sum(delta_b * price)`; negative when
    /// the day's discharge was worth more than its charging.
    pub battery_cost: f64,
    /// What the meter bills: `sum(masked * dt * price)`.
    pub masked_bill: f64,
    /// The bill without a battery: `sum(demand * dt * price)`.
    pub original_bill: f64,
    pub final_battery_kwh: f64,
    pub remaining_pct: f64,
    pub compensated_cost: f64,
}

impl CostReport {
    pub fn from_trace(trace: &EpisodeTrace, battery: &BatteryConfig, tariff: &TariffSchedule) -> Result<Self> {
        let final_battery = trace
            .final_battery()
            .ok_or_else(|| Error::Data("cannot score an empty trace".into()))?;
        let mut battery_cost = 0.0;
        let mut masked_bill = 0.0;
        let mut original_bill = 0.0;
        for r in &trace.rows {
            battery_cost += r.delta_b * r.price;
            masked_bill += r.masked_load * battery.dt_hours * r.price;
            original_bill += r.demand * battery.dt_hours * r.price;
        }
        Ok(Self {
            battery_cost,
            masked_bill,
            original_bill,
            final_battery_kwh: final_battery,
            remaining_pct: final_battery / battery.b_max * 100.0,
            compensated_cost: compensated_cost(battery_cost, final_battery, battery.b_max, tariff.peak_price),
        })
    }
}

/// How often each privacy outcome occurred over a trace.
pub fn privacy_case_counts(trace: &EpisodeTrace) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = [
        PrivacyCase::Hidden,
        PrivacyCase::Leaked,
        PrivacyCase::Artificial,
        PrivacyCase::Idle,
    ]
    .iter()
    .map(|c| (c.as_str().to_string(), 0))
    .collect();
    for r in &trace.rows {
        *counts.get_mut(r.reward.case.as_str()).unwrap() += 1;
    }
    counts
}

/// Attacks the trace's masked load with each model and scores it against
/// that appliance's truth labels.
pub fn privacy_leak_summary(
    trace: &EpisodeTrace,
    models: &[NilmModel],
    truth: &BTreeMap<String, Vec<bool>>,
) -> Result<BTreeMap<String, ClassificationReport>> {
    let masked = trace.masked();
    let mut out = BTreeMap::new();
    for model in models {
        let labels = truth
            .get(&model.appliance)
            .ok_or_else(|| Error::Data(format!("no truth labels for {}", model.appliance)))?;
        let attack = attack(model, &masked)?;
        out.insert(
            model.appliance.clone(),
            ClassificationReport::from_labels(labels, &attack.predicted_on)?,
        );
    }
    Ok(out)
}

/// Attack output next to the true appliance series.
#[derive(Clone, Debug, PartialEq)]
pub struct Disaggregation {
    pub appliance: String,
    pub true_kw: Vec<f64>,
    pub attack: AttackOutput,
}

/// Writes `load_curves.csv` and one `disagg_<appliance>.csv` per entry into `dir`.
pub fn export_figures(dir: &Path, trace: &EpisodeTrace, disaggregations: &[Disaggregation]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("load_curves.csv");
    let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(&path, e);
    writeln!(w, "minute,demand_kw,masked_kw").map_err(io)?;
    for r in &trace.rows {
        writeln!(w, "{},{},{}", r.minute, r.demand, r.masked_load).map_err(io)?;
    }
    w.flush().map_err(io)?;

    for d in disaggregations {
        let n = d.true_kw.len();
        if d.attack.predicted_kw.len() != n {
            return Err(Error::LengthMismatch {
                what: "true vs predicted appliance series",
                left: n,
                right: d.attack.predicted_kw.len(),
            });
        }
        let path = dir.join(format!("disagg_{}.csv", d.appliance));
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| Error::io(&path, e);
        writeln!(w, "minute,true_kw,predicted_kw,predicted_on").map_err(io)?;
        for i in 0..n {
            writeln!(
                w,
                "{},{},{},{}",
                i + 1,
                d.true_kw[i],
                d.attack.predicted_kw[i],
                u8::from(d.attack.predicted_on[i])
            )
            .map_err(io)?;
        }
        w.flush().map_err(io)?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
pub struct LoadCurveRow {
    pub minute: usize,
    pub demand_kw: f64,
    pub masked_kw: f64,
}

#[derive(Debug, Deserialize)]
pub struct DisaggRow {
    pub minute: usize,
    pub true_kw: f64,
    pub predicted_kw: f64,
    pub predicted_on: u8,
}

pub fn read_load_curves(path: &Path) -> Result<Vec<LoadCurveRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn read_disaggregation(path: &Path) -> Result<Vec<DisaggRow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.deserialize().map(|r| r.map_err(Error::from)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_worked_example() {
        assert_close!(f1_score(0.65, 0.25), 0.3611, 1e-4);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn report_counts() {
        let truth = [true, true, false, false, true];
        let pred = [true, false, true, false, true];
        let r = ClassificationReport::from_labels(&truth, &pred).unwrap();
        assert_eq!(
            (r.true_positives, r.false_positives, r.false_negatives, r.true_negatives),
            (2, 1, 1, 1)
        );
        assert_close!(r.precision, 2.0 / 3.0, 1e-12);
        assert_close!(r.recall, 2.0 / 3.0, 1e-12);
    }

    #[test]
    fn nothing_predicted_scores_zero() {
        let r = ClassificationReport::from_labels(&[true, false], &[false, false]).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
        assert!(ClassificationReport::from_labels(&[true], &[]).is_err());
    }

    #[test]
    fn compensated_worked_examples() {
        assert_close!(compensated_cost_from_pct(-0.324, 1.94, 1.5, 0.304), 0.123, 1e-3);
        assert_close!(compensated_cost_from_pct(-0.085, 65.7, 1.5, 0.304), 0.071, 1e-3);
        assert_close!(compensated_cost(0.0, 1.5, 1.5, 0.304), 0.0, 1e-15);
    }
}
