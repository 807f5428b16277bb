//! The privacy reward regions and how the engine composes the four terms.
//!
//! cargo run --example reward_shaping

use loadshape::env::{step, EnvState};
use loadshape::reward::{privacy_case, privacy_reward, threshold, SlidingWindow, StepContext};
use loadshape::{EnvConfig, RewardConfig, RewardEngine};

fn main() -> loadshape::Result<()> {
    println!("demand masked  tau  -> case        reward");
    for (d, m, tau) in [(2.0, 0.3, 0.2), (2.0, 1.0, 0.2), (0.3, 1.2, 0.2), (0.3, 0.2, 0.2)] {
        println!(
            "{d:6.2} {m:6.2} {tau:4.2} -> {:<10} {:8.3}",
            privacy_case(d, m, 0.5_f64.max(tau)).as_str(),
            privacy_reward(d, m, tau, 0.5)
        );
    }

    let window = SlidingWindow::from_values(vec![0.2, 0.25, 0.2, 0.3, 0.2])?;
    println!("\nwindow threshold: {:.4} kW", threshold(&window, 3.0));

    let cfg = EnvConfig::default();
    for lambda in [1.0, 0.3, 0.0] {
        let mut engine = RewardEngine::new(RewardConfig { lambda, ..RewardConfig::default() }, cfg.battery.clone())?;
        engine.reset_episode(0.2);
        let mut state = EnvState { demand: 0.2, battery: 1.0, minute: 1 };
        let demand = [0.2, 0.2, 2.5, 2.5, 0.2];
        let mut totals = Vec::new();
        for (t, action) in [0.0, 0.5, -5.0, -5.0, 0.5].into_iter().enumerate() {
            let next = demand[(t + 1).min(demand.len() - 1)];
            let res = step(&cfg, &state, action, next, demand.len())?;
            let r = engine.step(&StepContext::from_step(&state, &res, demand.len()));
            totals.push(format!("{:.3}", r.total));
            state = res.next_state;
        }
        println!("lambda {lambda}: totals {}", totals.join(" "));
    }
    Ok(())
}
