//! Composite load-shaping reward.
//!
//! A sliding window over recent demand yields a signature threshold
//! `tau = mean + k·std`. Demand above `max(delta, tau)` counts as an appliance
//! signature, and the privacy term scores whether the meter reading hides it,
//! leaks it, or shows an artificial one. Privacy, cost and the constraint
//! penalty are min–max normalized against everything seen so far in the
//! run. The end-of-day battery bonus is added unnormalized.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::env::{BatteryConfig, EnvState, StepResult};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardConfig {
    /// Privacy weight λ; cost gets `1 - λ`.
    pub lambda: f64,
    /// Noise floor δ for signature detection, kW.
    pub noise_threshold_delta: f64,
    pub sigma_multiplier: f64,
    pub battery_bonus_scale: f64,
    pub window_len: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            noise_threshold_delta: 0.5,
            sigma_multiplier: 3.0,
            battery_bonus_scale: 10.0,
            window_len: 5,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::Config(format!(
                "reward lambda must lie in [0, 1] (got {})",
                self.lambda
            )));
        }
        if !(self.noise_threshold_delta > 0.0 && self.noise_threshold_delta.is_finite()) {
            return Err(Error::Config(
                "reward noise_threshold_delta must be positive".into(),
            ));
        }
        if !(self.sigma_multiplier.is_finite() && self.battery_bonus_scale.is_finite()) {
            return Err(Error::Config("reward multipliers must be finite".into()));
        }
        if self.window_len == 0 {
            return Err(Error::Config("reward window_len must be at least 1".into()));
        }
        Ok(())
    }
}

/// Fixed-length buffer of recent demand values (kW), oldest first.
#[derive(Clone, Debug, PartialEq)]
pub struct SlidingWindow {
    values: VecDeque<f64>,
}

impl SlidingWindow {
    /// Window of `len` copies of `value`.
    pub fn filled(len: usize, value: f64) -> Result<Self> {
        Self::from_values(vec![value; len])
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("sliding window must not be empty".into()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Data(
                "sliding window entries must be finite and non-negative".into(),
            ));
        }
        Ok(Self {
            values: values.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().copied()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Population standard deviation.
    pub fn std(&self) -> f64 {
        let mean = self.mean();
        let var = self
            .values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / self.values.len() as f64;
        var.sqrt()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Signature threshold: window mean plus `sigma_multiplier` population standard deviations.
pub fn threshold(window: &SlidingWindow, sigma_multiplier: f64) -> f64 {
    window.mean() + sigma_multiplier * window.std()
}

/// Drops the oldest entry and appends either the demand or, when the demand
/// is above `tau`, the pre-update window mean. Returns the appended value.
pub fn update_window(window: &mut SlidingWindow, demand: f64, tau: f64) -> f64 {
    let appended = if demand > tau { window.mean() } else { demand };
    window.values.pop_front();
    window.values.push_back(appended);
    appended
}

/// Which of the four privacy regions a step falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrivacyCase {
    /// Real signature, meter reading below the threshold.
    Hidden,
    /// Real signature visible on the meter.
    Leaked,
    /// No real signature but the meter shows one.
    Artificial,
    /// Neither.
    Idle,
}

impl PrivacyCase {
    pub fn as_str(self) -> &'static str {
        match self {
            PrivacyCase::Hidden => "hidden",
            PrivacyCase::Leaked => "leaked",
            PrivacyCase::Artificial => "artificial",
            PrivacyCase::Idle => "idle",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "hidden" => PrivacyCase::Hidden,
            "leaked" => PrivacyCase::Leaked,
            "artificial" => PrivacyCase::Artificial,
            "idle" => PrivacyCase::Idle,
            _ => return None,
        })
    }
}

/// Signature decision threshold `max(delta, tau)`.
pub fn decision_threshold(tau: f64, delta: f64) -> f64 {
    delta.max(tau)
}

pub fn privacy_case(demand: f64, masked: f64, decision: f64) -> PrivacyCase {
    match (demand >= decision, masked >= decision) {
        (true, false) => PrivacyCase::Hidden,
        (true, true) => PrivacyCase::Leaked,
        (false, true) => PrivacyCase::Artificial,
        (false, false) => PrivacyCase::Idle,
    }
}

pub fn privacy_reward(demand: f64, masked: f64, tau: f64, delta: f64) -> f64 {
    match privacy_case(demand, masked, decision_threshold(tau, delta)) {
        PrivacyCase::Hidden => 100.0 + 0.05 * (demand - tau),
        PrivacyCase::Leaked => -50.0 - 0.05 * (masked - tau),
        PrivacyCase::Artificial => 20.0 + 0.05 * (masked - tau),
        PrivacyCase::Idle => -20.0,
    }
}

/// Negative cost (£) of the energy moved into the battery at `price`.
pub fn cost_reward(action: f64, dt_hours: f64, eta: f64, price: f64) -> f64 {
    -action * dt_hours * eta * price
}

/// End-of-day bonus proportional to the stored energy; zero before the last step.
pub fn battery_reward(
    battery_after: f64,
    minute: usize,
    horizon: usize,
    bonus_scale: f64,
    cfg: &BatteryConfig,
) -> f64 {
    if minute == horizon {
        bonus_scale * battery_after / (cfg.b_max - cfg.b_min)
    } else {
        0.0
    }
}

/// Distance by which the requested action leaves `[a_min, a_max]`, negated.
pub fn system_penalty(requested: f64, a_min: f64, a_max: f64) -> f64 {
    if requested > a_max {
        -(requested - a_max)
    } else if requested < a_min {
        -(a_min - requested)
    } else {
        0.0
    }
}

/// Running min–max scaler for one reward term.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunningNormalizer {
    range: Option<(f64, f64)>,
}

impl RunningNormalizer {
    pub fn observe(&mut self, value: f64) {
        self.range = Some(match self.range {
            None => (value, value),
            Some((lo, hi)) => (lo.min(value), hi.max(value)),
        });
    }

    /// Scales `value` into [0, 1] against the observed range. A degenerate
    /// (or empty) range maps to 0.5.
    pub fn normalize(&self, value: f64) -> f64 {
        match self.range {
            Some((lo, hi)) if hi > lo => ((value - lo) / (hi - lo)).clamp(0.0, 1.0),
            _ => 0.5,
        }
    }

    pub fn observe_and_normalize(&mut self, value: f64) -> f64 {
        self.observe(value);
        self.normalize(value)
    }

    pub fn range(&self) -> Option<(f64, f64)> {
        self.range
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub privacy_raw: f64,
    pub cost_raw: f64,
    pub system_raw: f64,
    pub battery_raw: f64,
    pub privacy_norm: f64,
    pub cost_norm: f64,
    pub system_norm: f64,
    pub total: f64,
    pub tau: f64,
    pub delta_t: f64,
    pub case: PrivacyCase,
}

impl RewardBreakdown {
    /// The composite reward before normalization, for logging.
    pub fn raw_total(&self, lambda: f64) -> f64 {
        lambda * self.privacy_raw + (1.0 - lambda) * self.cost_raw + self.system_raw + self.battery_raw
    }
}

/// Everything the reward needs to know about one environment step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepContext {
    pub demand: f64,
    pub masked: f64,
    pub requested_action: f64,
    pub applied_action: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub price: f64,
    pub battery_after: f64,
    pub minute: usize,
    pub horizon: usize,
}

impl StepContext {
    pub fn from_step(state: &EnvState, res: &StepResult, horizon: usize) -> Self {
        Self {
            demand: state.demand,
            masked: res.masked_load,
            requested_action: res.requested_action,
            applied_action: res.applied_action,
            a_min: res.a_min,
            a_max: res.a_max,
            price: res.price,
            battery_after: res.next_state.battery,
            minute: state.minute,
            horizon,
        }
    }
}

/// Stateful reward: the sliding window lives for one episode, the
/// normalizers for a whole training run.
#[derive(Clone, Debug)]
pub struct RewardEngine {
    cfg: RewardConfig,
    battery: BatteryConfig,
    window: SlidingWindow,
    privacy: RunningNormalizer,
    cost: RunningNormalizer,
    system: RunningNormalizer,
}

impl RewardEngine {
    pub fn new(cfg: RewardConfig, battery: BatteryConfig) -> Result<Self> {
        cfg.validate()?;
        battery.validate()?;
        let window = SlidingWindow::filled(cfg.window_len, 0.0)?;
        Ok(Self {
            cfg,
            battery,
            window,
            privacy: RunningNormalizer::default(),
            cost: RunningNormalizer::default(),
            system: RunningNormalizer::default(),
        })
    }

    pub fn config(&self) -> &RewardConfig {
        &self.cfg
    }

    pub fn window(&self) -> &SlidingWindow {
        &self.window
    }

    /// Refills the window with the episode's first demand sample. Normalizers are kept.
    pub fn reset_episode(&mut self, first_demand: f64) {
        self.window = SlidingWindow::filled(self.cfg.window_len, first_demand.max(0.0))
            .expect("window_len validated at construction");
    }

    pub fn tau(&self) -> f64 {
        threshold(&self.window, self.cfg.sigma_multiplier)
    }

    /// Scores one step against the current window. Updates the normalizers
    /// but not the window.
    pub fn compose(&mut self, ctx: &StepContext) -> RewardBreakdown {
        let tau = self.tau();
        let delta_t = decision_threshold(tau, self.cfg.noise_threshold_delta);
        let case = privacy_case(ctx.demand, ctx.masked, delta_t);
        let privacy_raw = privacy_reward(ctx.demand, ctx.masked, tau, self.cfg.noise_threshold_delta);
        let cost_raw = cost_reward(
            ctx.applied_action,
            self.battery.dt_hours,
            self.battery.eta,
            ctx.price,
        );
        let system_raw = system_penalty(ctx.requested_action, ctx.a_min, ctx.a_max);
        let battery_raw = battery_reward(
            ctx.battery_after,
            ctx.minute,
            ctx.horizon,
            self.cfg.battery_bonus_scale,
            &self.battery,
        );
        let privacy_norm = self.privacy.observe_and_normalize(privacy_raw);
        let cost_norm = self.cost.observe_and_normalize(cost_raw);
        let system_norm = self.system.observe_and_normalize(system_raw);
        let lambda = self.cfg.lambda;
        let total = lambda * privacy_norm + (1.0 - lambda) * cost_norm + system_norm + battery_raw;
        RewardBreakdown {
            privacy_raw,
            cost_raw,
            system_raw,
            battery_raw,
            privacy_norm,
            cost_norm,
            system_norm,
            total,
            tau,
            delta_t,
            case,
        }
    }

    /// Feeds the step's demand into the window using the threshold it was scored with.
    pub fn observe_demand(&mut self, demand: f64, tau: f64) -> f64 {
        update_window(&mut self.window, demand, tau)
    }

    /// `compose` followed by the window update.
    pub fn step(&mut self, ctx: &StepContext) -> RewardBreakdown {
        let r = self.compose(ctx);
        self.observe_demand(ctx.demand, r.tau);
        r
    }
}
