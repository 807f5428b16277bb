//! Minute-resolution household simulator with a rechargeable battery between
//! the appliances and the smart meter.
//!
//! Each step the controller requests a charge (+) or discharge (−) rate. The
//! environment clips the request into the feasible region, moves energy in or
//! out of the battery and reports the load the meter sees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reward::{RewardEngine, StepContext};
use crate::trace::{EpisodeTrace, TraceRow};

/// Minutes in one tariff day.
pub const MINUTES_PER_DAY: usize = 1440;

/// How a battery energy exchange shows up on the meter.
///
/// `Energy` adds the per-step energy exchange ΔB (kWh) directly to the demand
/// reading, which is the literal form of the battery model. `Power` adds the
/// equivalent average power ΔB/Δt (kW), which keeps the meter reading in kW.
/// With one-minute steps the two differ by a factor of 60 in how much the
/// battery can move the reading.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadCoupling {
    #[default]
    Energy,
    Power,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    /// kWh
    pub b_min: f64,
    /// kWh
    pub b_max: f64,
    /// Maximum charge/discharge rate, kW.
    pub e_max: f64,
    pub eta: f64,
    /// kWh at the start of every episode.
    pub b_initial: f64,
    /// Sampling interval in hours.
    pub dt_hours: f64,
    pub coupling: LoadCoupling,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            b_min: 0.0,
            b_max: 1.5,
            e_max: 5.0,
            eta: 1.0,
            b_initial: 1.5,
            dt_hours: 1.0 / 60.0,
            coupling: LoadCoupling::Energy,
        }
    }
}

impl BatteryConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.b_min,
            self.b_max,
            self.e_max,
            self.eta,
            self.b_initial,
            self.dt_hours,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::Config("battery parameters must be finite".into()));
        }
        if !(0.0 <= self.b_min && self.b_min < self.b_max) {
            return Err(Error::Config(format!(
                "battery requires 0 <= b_min < b_max (got {} and {})",
                self.b_min, self.b_max
            )));
        }
        if self.e_max <= 0.0 {
            return Err(Error::Config("battery e_max must be positive".into()));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Config("battery eta must lie in (0, 1]".into()));
        }
        if !(self.b_min <= self.b_initial && self.b_initial <= self.b_max) {
            return Err(Error::Config(
                "battery b_initial must lie in [b_min, b_max]".into(),
            ));
        }
        if self.dt_hours <= 0.0 {
            return Err(Error::Config("battery dt_hours must be positive".into()));
        }
        Ok(())
    }

    /// Factor converting an energy exchange (kWh) into a change of the meter reading.
    pub fn meter_gain(&self) -> f64 {
        match self.coupling {
            LoadCoupling::Energy => 1.0,
            LoadCoupling::Power => 1.0 / self.dt_hours,
        }
    }
}

/// Two-rate time-of-use tariff. The peak span is `[peak_start_minute,
/// peak_end_minute)` in wall-clock minutes after midnight and may wrap
/// around midnight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TariffSchedule {
    pub peak_price: f64,
    pub offpeak_price: f64,
    pub peak_start_minute: usize,
    pub peak_end_minute: usize,
}

impl Default for TariffSchedule {
    /// Economy 7: £0.132/kWh from 00:00 to 07:00, £0.304/kWh otherwise.
    fn default() -> Self {
        Self {
            peak_price: 0.304,
            offpeak_price: 0.132,
            peak_start_minute: 420,
            peak_end_minute: MINUTES_PER_DAY,
        }
    }
}

impl TariffSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.offpeak_price.is_finite() && self.peak_price.is_finite()) {
            return Err(Error::Config("tariff prices must be finite".into()));
        }
        if !(0.0 <= self.offpeak_price && self.offpeak_price <= self.peak_price) {
            return Err(Error::Config(
                "tariff requires 0 <= offpeak_price <= peak_price".into(),
            ));
        }
        if self.peak_start_minute > MINUTES_PER_DAY || self.peak_end_minute > MINUTES_PER_DAY {
            return Err(Error::Config(
                "tariff peak boundaries must lie within one day".into(),
            ));
        }
        Ok(())
    }

    /// Price for the 1-based sample `minute`, which covers wall-clock
    /// `[minute - 1, minute)` minutes after midnight.
    pub fn price_at(&self, minute: usize) -> Result<f64> {
        if minute == 0 || minute > MINUTES_PER_DAY {
            return Err(Error::MinuteOutOfRange {
                minute,
                max: MINUTES_PER_DAY,
            });
        }
        let wall = minute - 1;
        let (start, end) = (self.peak_start_minute, self.peak_end_minute);
        let peak = if start <= end {
            start <= wall && wall < end
        } else {
            wall >= start || wall < end
        };
        Ok(if peak {
            self.peak_price
        } else {
            self.offpeak_price
        })
    }
}

/// Free-function form of [`TariffSchedule::price_at`].
pub fn price_at(minute: usize, tariff: &TariffSchedule) -> Result<f64> {
    tariff.price_at(minute)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvState {
    /// kW
    pub demand: f64,
    /// kWh
    pub battery: f64,
    /// 1-based step index within the episode.
    pub minute: usize,
}

/// Discrete charge/discharge rates (kW) the agent chooses from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionSpace {
    levels: Vec<f64>,
}

impl ActionSpace {
    /// `count` evenly spaced levels from `-e_max` to `+e_max`. `count` must be odd
    /// so that 0 is one of the levels.
    pub fn uniform(count: usize, e_max: f64) -> Result<Self> {
        if count < 3 || count % 2 == 0 {
            return Err(Error::Config(format!(
                "action level count must be odd and >= 3 (got {count})"
            )));
        }
        let half = (count / 2) as f64;
        let levels = (0..count)
            .map(|i| {
                let k = i as f64 - half;
                if k == 0.0 {
                    0.0
                } else {
                    e_max * k / half
                }
            })
            .collect();
        Self::from_levels(levels, e_max)
    }

    pub fn from_levels(levels: Vec<f64>, e_max: f64) -> Result<Self> {
        let space = Self { levels };
        space.validate(e_max)?;
        Ok(space)
    }

    pub fn validate(&self, e_max: f64) -> Result<()> {
        let lv = &self.levels;
        if lv.is_empty() || lv.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("action levels must be finite and non-empty".into()));
        }
        if lv.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("action levels must be strictly increasing".into()));
        }
        if !lv.contains(&0.0) {
            return Err(Error::Config("action levels must contain 0".into()));
        }
        let tol = 1e-9 * e_max.max(1.0);
        for (lo, hi) in lv.iter().zip(lv.iter().rev()) {
            if (lo + hi).abs() > tol {
                return Err(Error::Config("action levels must be symmetric about 0".into()));
            }
        }
        if lv.iter().any(|v| v.abs() > e_max + tol) {
            return Err(Error::Config(format!(
                "action levels must lie within [-{e_max}, {e_max}]"
            )));
        }
        Ok(())
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn level(&self, index: usize) -> f64 {
        self.levels[index]
    }

    pub fn index_of(&self, action: f64) -> Option<usize> {
        self.levels.iter().position(|&l| (l - action).abs() <= 1e-12)
    }
}

/// Battery, tariff and action set: everything `step` needs besides the state.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvConfig {
    pub battery: BatteryConfig,
    pub tariff: TariffSchedule,
    pub actions: ActionSpace,
}

impl EnvConfig {
    pub fn new(battery: BatteryConfig, tariff: TariffSchedule, actions: ActionSpace) -> Result<Self> {
        battery.validate()?;
        tariff.validate()?;
        actions.validate(battery.e_max)?;
        Ok(Self {
            battery,
            tariff,
            actions,
        })
    }
}

impl Default for EnvConfig {
    fn default() -> Self {
        let battery = BatteryConfig::default();
        let actions = ActionSpace::uniform(21, battery.e_max).expect("default action space");
        Self {
            battery,
            tariff: TariffSchedule::default(),
            actions,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepResult {
    /// Meter reading, kW.
    pub masked_load: f64,
    /// Energy moved into the battery this step, kWh.
    pub delta_b: f64,
    pub next_state: EnvState,
    pub applied_action: f64,
    pub requested_action: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub price: f64,
    pub done: bool,
}

/// Feasible action interval `(a_min, a_max)` in kW: the meter reading stays
/// non-negative, the battery stays within its capacity and the rate stays
/// within `e_max`. Zero is always inside.
pub fn feasible_action_bounds(state: &EnvState, cfg: &BatteryConfig) -> (f64, f64) {
    let scale = cfg.dt_hours * cfg.eta;
    let meter_floor = -state.demand / cfg.meter_gain();
    let lower = meter_floor.max(cfg.b_min - state.battery) / scale;
    let upper = (cfg.b_max - state.battery) / scale;
    // Rounding near an empty/full battery must not push 0 out of the interval.
    let a_min = lower.max(-cfg.e_max).min(0.0);
    let a_max = upper.min(cfg.e_max).max(0.0);
    (a_min, a_max)
}

/// Applies one requested action. `horizon` is the episode length T.
pub fn step(
    cfg: &EnvConfig,
    state: &EnvState,
    requested_action: f64,
    next_demand: f64,
    horizon: usize,
) -> Result<StepResult> {
    if !requested_action.is_finite() {
        return Err(Error::NonFinite(format!("requested action {requested_action}")));
    }
    if cfg.actions.index_of(requested_action).is_none() {
        return Err(Error::UnknownAction(requested_action));
    }
    if !(next_demand.is_finite() && next_demand >= 0.0) {
        return Err(Error::Data(format!(
            "demand must be finite and non-negative (got {next_demand})"
        )));
    }
    let b = &cfg.battery;
    let (a_min, a_max) = feasible_action_bounds(state, b);
    let applied = requested_action.clamp(a_min, a_max);
    let delta_b = applied * b.dt_hours * b.eta;
    let masked_load = (state.demand + delta_b * b.meter_gain()).max(0.0);
    let battery = (state.battery + delta_b).clamp(b.b_min, b.b_max);
    let price = cfg.tariff.price_at(state.minute)?;
    Ok(StepResult {
        masked_load,
        delta_b,
        next_state: EnvState {
            demand: next_demand,
            battery,
            minute: state.minute + 1,
        },
        applied_action: applied,
        requested_action,
        a_min,
        a_max,
        price,
        done: state.minute == horizon,
    })
}

/// Maps an observed state to a requested action level (kW).
pub trait Policy {
    fn act(&mut self, state: &EnvState) -> f64;
}

/// Always requests the same level.
#[derive(Clone, Copy, Debug)]
pub struct ConstantPolicy(pub f64);

impl Policy for ConstantPolicy {
    fn act(&mut self, _state: &EnvState) -> f64 {
        self.0
    }
}

/// The "do nothing" baseline: the meter sees the raw demand.
pub fn no_op_policy() -> ConstantPolicy {
    ConstantPolicy(0.0)
}

/// Single-day simulator over a fixed demand series.
#[derive(Clone, Debug)]
pub struct HouseholdEnv {
    cfg: EnvConfig,
    demand: Vec<f64>,
    state: EnvState,
}

impl HouseholdEnv {
    pub fn new(cfg: EnvConfig, demand: Vec<f64>) -> Result<Self> {
        if demand.is_empty() {
            return Err(Error::Data("demand series is empty".into()));
        }
        if demand.len() > MINUTES_PER_DAY {
            return Err(Error::Data(format!(
                "demand series covers more than one day ({} samples)",
                demand.len()
            )));
        }
        if let Some(bad) = demand.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(Error::Data(format!(
                "demand must be finite and non-negative (got {bad})"
            )));
        }
        let state = Self::initial_state(&cfg, &demand);
        Ok(Self { cfg, demand, state })
    }

    fn initial_state(cfg: &EnvConfig, demand: &[f64]) -> EnvState {
        EnvState {
            demand: demand[0],
            battery: cfg.battery.b_initial,
            minute: 1,
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn demand(&self) -> &[f64] {
        &self.demand
    }

    pub fn horizon(&self) -> usize {
        self.demand.len()
    }

    pub fn state(&self) -> &EnvState {
        &self.state
    }

    pub fn reset(&mut self) -> EnvState {
        self.state = Self::initial_state(&self.cfg, &self.demand);
        self.state
    }

    /// Steps the simulator. After the final step the state sits one past the horizon.
    pub fn step(&mut self, requested_action: f64) -> Result<StepResult> {
        let t = self.state.minute;
        if t > self.horizon() {
            return Err(Error::Data("episode already finished; call reset".into()));
        }
        let next_demand = self.demand[t.min(self.horizon() - 1)];
        let result = step(&self.cfg, &self.state, requested_action, next_demand, self.horizon())?;
        self.state = result.next_state;
        Ok(result)
    }
}

/// Rolls one full episode of `policy` over `demand`, scoring every step with
/// `engine`. The engine's sliding window is reset from the first demand sample;
/// its normalizers carry over from whatever it has already seen.
pub fn run_episode<P: Policy + ?Sized>(
    policy: &mut P,
    demand: &[f64],
    cfg: &EnvConfig,
    engine: &mut RewardEngine,
) -> Result<EpisodeTrace> {
    let mut env = HouseholdEnv::new(cfg.clone(), demand.to_vec())?;
    engine.reset_episode(demand[0]);
    let horizon = env.horizon();
    let mut rows = Vec::with_capacity(horizon);
    loop {
        let state = *env.state();
        let requested = policy.act(&state);
        let res = env.step(requested)?;
        let reward = engine.step(&StepContext::from_step(&state, &res, horizon));
        rows.push(TraceRow {
            minute: state.minute,
            demand: state.demand,
            requested_action: res.requested_action,
            applied_action: res.applied_action,
            delta_b: res.delta_b,
            masked_load: res.masked_load,
            battery_before: state.battery,
            battery_after: res.next_state.battery,
            price: res.price,
            done: res.done,
            reward,
        });
        if res.done {
            break;
        }
    }
    Ok(EpisodeTrace { rows })
}
