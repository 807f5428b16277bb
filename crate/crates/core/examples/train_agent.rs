//! Train the load-shaping agent on one synthetic day and inspect its policy.
//!
//! cargo run --release --example train_agent -- [episodes] [lambda]

use loadshape::data::{generate_synthetic, SyntheticSpec};
use loadshape::dqn::{extract_policy, train, AgentCheckpoint, HouseholdTask, TrainConfig};
use loadshape::env::run_episode;
use loadshape::metrics::{privacy_case_counts, CostReport};
use loadshape::{BatteryConfig, EnvConfig, LoadCoupling, RewardConfig, RewardEngine};

fn main() -> loadshape::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().map_or(20, |a| a.parse().expect("episodes"));
    let lambda: f64 = args.next().map_or(1.0, |a| a.parse().expect("lambda"));

    let household = generate_synthetic(&SyntheticSpec::default(), 1)?;
    let day = household.make_day(household.days()[0])?;
    let cfg = EnvConfig {
        battery: BatteryConfig {
            coupling: LoadCoupling::Power,
            ..BatteryConfig::default()
        },
        ..EnvConfig::default()
    };
    let reward = RewardConfig { lambda, ..RewardConfig::default() };
    let train_cfg = TrainConfig { episodes, ..TrainConfig::default() };

    let mut task = HouseholdTask::new(cfg.clone(), day.demand.clone(), reward.clone())?;
    let outcome = train(&mut task, &train_cfg)?;
    for e in outcome.log.iter().step_by((episodes / 10).max(1)) {
        println!("episode {:4}: reward {:9.2}, epsilon {:.3}", e.episode, e.cumulative_total_reward, e.epsilon);
    }

    let ck = AgentCheckpoint::new(&outcome.network, &cfg.actions, task.demand_scale(), &cfg.battery, &reward, &train_cfg);
    let path = std::env::temp_dir().join("loadshape_agent.json");
    ck.save(&path)?;
    println!("checkpoint: {}", path.display());

    let mut policy = extract_policy(&AgentCheckpoint::load(&path)?)?;
    let mut engine = RewardEngine::new(reward, cfg.battery.clone())?;
    let trace = run_episode(&mut policy, &day.demand, &cfg, &mut engine)?;
    let cost = CostReport::from_trace(&trace, &cfg.battery, &cfg.tariff)?;
    println!("greedy day: {:?}", privacy_case_counts(&trace));
    println!("{:.1}% battery left, compensated cost £{:.4}", cost.remaining_pct, cost.compensated_cost);
    Ok(())
}
