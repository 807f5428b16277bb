//! Train a Seq2Point attacker on synthetic days and read a kettle out of a
//! held-out day's aggregate.
//!
//! cargo run --release --example nilm_attack -- [iterations]

use loadshape::data::{generate_synthetic, SyntheticSpec};
use loadshape::metrics::ClassificationReport;
use loadshape::nilm::{attack, train_nilm, NilmTrainConfig, Seq2PointSpec};

fn main() -> loadshape::Result<()> {
    let iterations: usize = std::env::args().nth(1).map_or(5_000, |a| a.parse().expect("iterations"));
    let household = generate_synthetic(&SyntheticSpec { seed: 4, ..SyntheticSpec::default() }, 6)?;
    let days = household.days();
    let (train_days, test_day) = days.split_at(5);

    let mut aggregate = Vec::new();
    let mut kettle = Vec::new();
    for d in train_days {
        let day = household.make_day(*d)?;
        aggregate.extend(day.demand);
        kettle.extend(&day.appliances["kettle"]);
    }
    let cfg = NilmTrainConfig { iterations, ..NilmTrainConfig::default() };
    let trained = train_nilm("kettle", &aggregate, &kettle, &Seq2PointSpec::default(), &cfg)?;
    let n = trained.losses.len() / 20;
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    println!(
        "loss: first 5% {:.5}, last 5% {:.5}",
        mean(&trained.losses[..n]),
        mean(&trained.losses[trained.losses.len() - n..])
    );

    let test = household.make_day(test_day[0])?;
    let out = attack(&trained.model, &test.demand)?;
    let report = ClassificationReport::from_labels(&test.truth["kettle"], &out.predicted_on)?;
    println!(
        "held-out day: precision {:.3}, recall {:.3}, F1 {:.3}",
        report.precision, report.recall, report.f1
    );
    for (t, on) in out.predicted_on.iter().enumerate().filter(|(_, on)| **on) {
        println!("  minute {:4}: predicted {:.2} kW, true {:.2} kW ({on})", t + 1, out.predicted_kw[t], test.appliances["kettle"][t]);
    }
    Ok(())
}
