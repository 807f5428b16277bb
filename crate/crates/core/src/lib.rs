//! Privacy-preserving load shaping for smart meters.
//!
//! A household battery sits between the appliances and the meter. A deep
//! Q-network decides every minute how hard to charge or discharge so that the
//! meter reading hides appliance signatures from a non-intrusive load
//! monitoring (NILM) attacker while keeping the electricity cost down.
//!
//! * [`env`]: battery, tariff and the one-day simulator.
//! * [`reward`]: privacy/cost/system/battery reward terms and their composition.
//! * [`dqn`]: replay-buffer DQN trainer and greedy policy checkpoints.
//! * [`nilm`]: Seq2Point CNN attacker.
//! * [`data`]: CSV ingestion, resampling, day extraction and synthetic households.
//! * [`metrics`]: precision/recall/F1 and battery cost reports.
//! * [`experiment`]: config-driven pipeline behind the `loadshape` binary.

#[cfg(test)]
macro_rules! assert_close {
    ($a:expr, $b:expr, $tol:expr) => {{
        let (a, b, tol): (f64, f64, f64) = ($a, $b, $tol);
        assert!((a - b).abs() <= tol, "{} = {a}, expected {b} ± {tol}", stringify!($a));
    }};
}

pub mod data;
pub mod dqn;
pub mod env;
pub mod error;
pub mod experiment;
pub mod metrics;
pub mod nilm;
pub mod nn;
pub mod reward;
pub mod seed;
pub mod trace;

pub use env::{ActionSpace, BatteryConfig, EnvConfig, EnvState, HouseholdEnv, LoadCoupling, TariffSchedule};
pub use error::{Error, Result};
pub use reward::{RewardConfig, RewardEngine};
pub use trace::EpisodeTrace;
