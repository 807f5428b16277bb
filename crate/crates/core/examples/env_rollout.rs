//! Roll a hand-written policy through one synthetic day and compare the meter
//! reading with the raw demand.
//!
//! cargo run --example env_rollout

use loadshape::data::{generate_synthetic, SyntheticSpec};
use loadshape::env::{run_episode, EnvState, Policy};
use loadshape::metrics::CostReport;
use loadshape::{BatteryConfig, EnvConfig, LoadCoupling, RewardConfig, RewardEngine};

/// Discharge flat out whenever demand spikes, recharge slowly otherwise.
struct PeakShaver {
    spike_kw: f64,
}

impl Policy for PeakShaver {
    fn act(&mut self, state: &EnvState) -> f64 {
        if state.demand > self.spike_kw {
            -5.0
        } else if state.battery < 1.5 {
            0.5
        } else {
            0.0
        }
    }
}

fn main() -> loadshape::Result<()> {
    let household = generate_synthetic(&SyntheticSpec::default(), 1)?;
    let day = household.make_day(household.days()[0])?;

    let cfg = EnvConfig {
        battery: BatteryConfig {
            coupling: LoadCoupling::Power,
            ..BatteryConfig::default()
        },
        ..EnvConfig::default()
    };
    let mut engine = RewardEngine::new(RewardConfig::default(), cfg.battery.clone())?;
    let trace = run_episode(&mut PeakShaver { spike_kw: 1.0 }, &day.demand, &cfg, &mut engine)?;

    let peak = |v: &[f64]| v.iter().copied().fold(0.0, f64::max);
    println!("peak demand {:.2} kW, peak meter reading {:.2} kW", peak(&trace.demand()), peak(&trace.masked()));
    let cost = CostReport::from_trace(&trace, &cfg.battery, &cfg.tariff)?;
    println!(
        "battery cost £{:.4}, {:.1}% charge left, compensated £{:.4}",
        cost.battery_cost, cost.remaining_pct, cost.compensated_cost
    );
    for r in trace.rows.iter().filter(|r| r.demand > 1.0).take(5) {
        println!(
            "minute {:4}: demand {:.2} kW -> meter {:.2} kW ({})",
            r.minute,
            r.demand,
            r.masked_load,
            r.reward.case.as_str()
        );
    }
    Ok(())
}
