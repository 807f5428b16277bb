//! Generate synthetic households, write them as wide CSVs, and import a
//! per-channel recording the way a UK-DALE export would be imported.
//!
//! cargo run --example synthetic_data -- [out_dir]

use std::collections::BTreeMap;
use std::path::PathBuf;

use loadshape::data::{generate_synthetic, load_csv, resample_1min, ChannelSeries, Household, PulseSpec, SyntheticSpec};

fn main() -> loadshape::Result<()> {
    let out: PathBuf = std::env::args()
        .nth(1)
        .map_or_else(|| std::env::temp_dir().join("loadshape_synthetic"), PathBuf::from);
    std::fs::create_dir_all(&out).expect("create output dir");

    let mut spec = SyntheticSpec::default();
    spec.appliances.push(PulseSpec {
        name: "microwave".into(),
        power_kw: 1.1,
        duration_minutes: 2,
        per_day: 3,
        earliest_minute: 720,
        latest_minute: 1320,
    });
    let household = generate_synthetic(&spec, 3)?;
    household.validate()?;
    for day in household.days() {
        let path = out.join(format!("day_{day}.csv"));
        household.write_wide_csv(&path, Some(&[day]))?;
        let d = household.make_day(day)?;
        let on: BTreeMap<_, usize> = d.truth.iter().map(|(k, v)| (k.as_str(), v.iter().filter(|b| **b).count())).collect();
        println!("{} -> on-minutes {on:?}", path.display());
    }
    let back = Household::read_dir(&out)?;
    println!("read back {} days", back.days().len());

    // Two-column `timestamp power_w` channel at 6 s, as exported per meter channel.
    let raw = out.join("channel_kettle.dat");
    let t0 = back.aggregate.timestamps[0];
    let lines: String = (0..600)
        .map(|i| format!("{} {}\n", t0 + 6 * i, if (200..230).contains(&i) { 2400 } else { 1 }))
        .collect();
    std::fs::write(&raw, lines).expect("write channel file");
    let kettle = resample_1min(&load_csv(&raw, "kettle")?, 5)?;
    let aggregate = ChannelSeries::new("aggregate", kettle.timestamps.clone(), kettle.power.iter().map(|p| p + 0.3).collect())?;
    let imported = Household {
        aggregate,
        appliances: BTreeMap::from([("kettle".to_string(), kettle)]),
    };
    println!(
        "imported channel: {} minutes, {:.3} kWh",
        imported.appliances["kettle"].len(),
        imported.appliances["kettle"].energy_kwh(60)
    );
    Ok(())
}
