//! Deep Q-network agent: online and target MLPs, FIFO replay, ε-greedy
//! exploration and the squared TD-error update.

use std::fs;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{ActionSpace, BatteryConfig, EnvConfig, EnvState, HouseholdEnv, Policy};
use crate::error::{Error, Result};
use crate::nn::{argmax, Adam, Mlp, MlpTape};
use crate::reward::{RewardConfig, RewardEngine, StepContext};
use crate::seed::{self, Stream};

/// Observation width: scaled demand and scaled battery level.
pub const OBS_DIM: usize = 2;

pub type Observation = [f64; OBS_DIM];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub gamma: f64,
    /// Copy online weights into the target network every this many environment steps.
    pub target_sync_every: u64,
    pub episodes: usize,
    pub steps_per_episode: usize,
    pub eps_initial: f64,
    pub eps_final: f64,
    /// Fraction of all environment steps over which ε decays linearly.
    pub eps_decay_fraction: f64,
    pub batch_size: usize,
    /// Stored transitions required before the first gradient step.
    pub learning_starts: usize,
    pub buffer_capacity: usize,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-4,
            gamma: 0.99,
            target_sync_every: 10_000,
            episodes: 1500,
            steps_per_episode: 1440,
            eps_initial: 1.0,
            eps_final: 0.05,
            eps_decay_fraction: 0.1,
            batch_size: 32,
            learning_starts: 1000,
            buffer_capacity: 1_000_000,
            hidden: vec![64, 64],
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("train: {m}")));
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad("gamma must lie in (0, 1]");
        }
        if !(0.0 <= self.eps_final && self.eps_final <= self.eps_initial && self.eps_initial <= 1.0) {
            return bad("exploration rates must satisfy 0 <= eps_final <= eps_initial <= 1");
        }
        if !(0.0..=1.0).contains(&self.eps_decay_fraction) {
            return bad("eps_decay_fraction must lie in [0, 1]");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad("batch_size must be >= 1 and fit in the replay buffer");
        }
        if self.target_sync_every == 0 || self.episodes == 0 || self.steps_per_episode == 0 {
            return bad("target_sync_every, episodes and steps_per_episode must be >= 1");
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return bad("hidden layer widths must be >= 1");
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        self.episodes as u64 * self.steps_per_episode as u64
    }
}

/// Linear decay from `eps_initial` to `eps_final` over the first
/// `eps_decay_fraction` of all steps, flat afterwards.
pub fn epsilon_at(global_step: u64, cfg: &TrainConfig) -> f64 {
    let horizon = cfg.eps_decay_fraction * cfg.total_steps() as f64;
    let s = global_step as f64;
    if horizon <= 0.0 || s >= horizon {
        return cfg.eps_final;
    }
    cfg.eps_initial + (cfg.eps_final - cfg.eps_initial) * s / horizon
}

/// ε-greedy choice over precomputed Q-values.
pub fn epsilon_greedy<R: Rng + ?Sized>(q_values: &[f64], epsilon: f64, rng: &mut R) -> usize {
    if epsilon > 0.0 && rng.random::<f64>() < epsilon {
        rng.random_range(0..q_values.len())
    } else {
        argmax(q_values)
    }
}

/// `reward + γ·max_a' Q_target(s', a')`, or just `reward` for terminal transitions.
pub fn td_target(reward: f64, gamma: f64, next_q_target: &[f64], done: bool) -> f64 {
    if done {
        reward
    } else {
        let best = next_q_target.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        reward + gamma * best
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplayTransition {
    pub state: Observation,
    pub action: usize,
    pub reward: f64,
    pub next_state: Observation,
    pub done: bool,
}

/// Fixed-capacity ring buffer; once full, each push evicts the oldest transition.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    items: Vec<ReplayTransition>,
    head: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: Vec::new(),
            head: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn push(&mut self, t: ReplayTransition) {
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            self.items[self.head] = t;
            self.head = (self.head + 1) % self.capacity;
        }
    }

    /// Oldest to newest.
    pub fn iter(&self) -> impl Iterator<Item = &ReplayTransition> {
        let (newer, older) = self.items.split_at(self.head);
        older.iter().chain(newer)
    }

    /// Uniform sample with replacement.
    pub fn sample<R: Rng + ?Sized>(&self, batch_size: usize, rng: &mut R, out: &mut Vec<ReplayTransition>) {
        out.clear();
        if self.items.is_empty() {
            return;
        }
        for _ in 0..batch_size {
            out.push(self.items[rng.random_range(0..self.items.len())]);
        }
    }
}

/// Q-network with `OBS_DIM` inputs, ReLU hidden layers and one output per action.
pub fn q_network<R: Rng + ?Sized>(hidden: &[usize], n_actions: usize, rng: &mut R) -> Mlp {
    let mut sizes = Vec::with_capacity(hidden.len() + 2);
    sizes.push(OBS_DIM);
    sizes.extend_from_slice(hidden);
    sizes.push(n_actions);
    Mlp::new(&sizes, rng)
}

/// Reusable buffers for [`loss_and_grad`].
#[derive(Debug, Default)]
pub struct LearnScratch {
    online: Option<MlpTape>,
    target: Option<MlpTape>,
    grad_out: Vec<f64>,
    grads: Vec<f64>,
}

/// Mean squared TD error over `batch` and its gradient w.r.t. the online
/// parameters. The gradient is left in `scratch` and also returned.
pub fn loss_and_grad<'s>(
    online: &Mlp,
    target: &Mlp,
    batch: &[ReplayTransition],
    gamma: f64,
    scratch: &'s mut LearnScratch,
) -> (f64, &'s [f64]) {
    let n_params = online.params().len();
    let on_tape = scratch.online.get_or_insert_with(|| online.new_tape());
    let tg_tape = scratch.target.get_or_insert_with(|| target.new_tape());
    scratch.grads.clear();
    scratch.grads.resize(n_params, 0.0);
    scratch.grad_out.clear();
    scratch.grad_out.resize(online.output_dim(), 0.0);
    let n = batch.len() as f64;
    let mut loss = 0.0;
    for tr in batch {
        let next_q = target.forward_tape(&tr.next_state, tg_tape);
        let y = td_target(tr.reward, gamma, next_q, tr.done);
        let q = online.forward_tape(&tr.state, on_tape)[tr.action];
        let err = y - q;
        loss += err * err / n;
        scratch.grad_out[tr.action] = -2.0 * err / n;
        online.backward(on_tape, &scratch.grad_out, &mut scratch.grads);
        scratch.grad_out[tr.action] = 0.0;
    }
    (loss, &scratch.grads)
}

/// One gradient step on the online network. The target network is read only.
pub fn learn_step(
    online: &mut Mlp,
    target: &Mlp,
    batch: &[ReplayTransition],
    gamma: f64,
    optimizer: &mut Adam,
    learning_rate: f64,
    scratch: &mut LearnScratch,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Config("learn_step needs a non-empty batch".into()));
    }
    let (loss, _) = loss_and_grad(online, target, batch, gamma, scratch);
    if !loss.is_finite() {
        return Err(Error::Numerical {
            step: optimizer.steps(),
            msg: format!("TD loss is {loss} over a batch of {}", batch.len()),
        });
    }
    optimizer.step(online.params_mut(), &scratch.grads, learning_rate);
    Ok(loss)
}

/// Result of one environment transition as seen by the learner.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Feedback {
    /// Reward used for learning.
    pub reward: f64,
    /// Unnormalized reward, for logs.
    pub raw_reward: f64,
    pub next_obs: Observation,
    pub done: bool,
}

/// Episodic task with a discrete action set, as seen by [`train`].
pub trait Environment {
    fn num_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    fn reset(&mut self) -> Observation;
    fn step(&mut self, action: usize) -> Result<Feedback>;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    pub cumulative_raw_reward: f64,
    pub cumulative_total_reward: f64,
    /// ε at the end of the episode.
    pub epsilon: f64,
    /// `None` before learning starts.
    pub loss_mean: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub network: Mlp,
    pub log: Vec<EpisodeLog>,
    /// Target-network refreshes after the initial copy.
    pub target_syncs: u64,
    /// Loss of every gradient step, in order.
    pub losses: Vec<f64>,
}

/// Runs DQN training on `env`. Randomness comes from the `agent-init` and
/// `agent-explore` streams of `cfg.seed`.
pub fn train<E: Environment + ?Sized>(env: &mut E, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.steps_per_episode != env.horizon() {
        return Err(Error::Config(format!(
            "train: steps_per_episode is {} but the environment horizon is {}",
            cfg.steps_per_episode,
            env.horizon()
        )));
    }
    let mut init_rng = seed::rng(cfg.seed, Stream::AgentInit);
    let mut rng = seed::rng(cfg.seed, Stream::AgentExplore);
    let mut online = q_network(&cfg.hidden, env.num_actions(), &mut init_rng);
    let mut target = online.clone();
    let mut adam = Adam::new(online.params().len());
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity);
    let mut scratch = LearnScratch::default();
    let mut act_tape = online.new_tape();
    let mut batch = Vec::with_capacity(cfg.batch_size);
    let mut log = Vec::with_capacity(cfg.episodes);
    let mut losses = Vec::new();
    let mut global_step: u64 = 0;
    let mut target_syncs = 0;
    let warmup = cfg.learning_starts.max(cfg.batch_size);

    for episode in 0..cfg.episodes {
        let mut obs = env.reset();
        let (mut raw_sum, mut total_sum) = (0.0, 0.0);
        let (mut loss_sum, mut loss_n) = (0.0, 0usize);
        let mut epsilon;
        loop {
            epsilon = epsilon_at(global_step, cfg);
            let q = online.forward_tape(&obs, &mut act_tape);
            let action = epsilon_greedy(q, epsilon, &mut rng);
            let fb = env.step(action)?;
            raw_sum += fb.raw_reward;
            total_sum += fb.reward;
            buffer.push(ReplayTransition {
                state: obs,
                action,
                reward: fb.reward,
                next_state: fb.next_obs,
                done: fb.done,
            });
            if buffer.len() >= warmup {
                buffer.sample(cfg.batch_size, &mut rng, &mut batch);
                let loss = learn_step(
                    &mut online,
                    &target,
                    &batch,
                    cfg.gamma,
                    &mut adam,
                    cfg.learning_rate,
                    &mut scratch,
                )
                .map_err(|e| match e {
                    Error::Numerical { msg, .. } => Error::Numerical {
                        step: global_step,
                        msg: format!("episode {episode}: {msg}"),
                    },
                    other => other,
                })?;
                losses.push(loss);
                loss_sum += loss;
                loss_n += 1;
            }
            global_step += 1;
            if global_step % cfg.target_sync_every == 0 {
                target.params_mut().copy_from_slice(online.params());
                target_syncs += 1;
            }
            obs = fb.next_obs;
            if fb.done {
                break;
            }
        }
        log.push(EpisodeLog {
            episode,
            cumulative_raw_reward: raw_sum,
            cumulative_total_reward: total_sum,
            epsilon,
            loss_mean: (loss_n > 0).then(|| loss_sum / loss_n as f64),
        });
        log::debug!(
            "episode {episode}: total reward {total_sum:.3}, epsilon {epsilon:.3}, loss {:?}",
            log.last().and_then(|l| l.loss_mean)
        );
    }
    Ok(TrainOutcome {
        network: online,
        log,
        target_syncs,
        losses,
    })
}

pub fn write_log_csv(log: &[EpisodeLog], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "episode",
        "cumulative_raw_reward",
        "cumulative_total_reward",
        "epsilon",
        "loss_mean",
    ])?;
    for l in log {
        w.write_record([
            l.episode.to_string(),
            l.cumulative_raw_reward.to_string(),
            l.cumulative_total_reward.to_string(),
            l.epsilon.to_string(),
            l.loss_mean.map(|v| v.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Network input for a household state.
pub fn observe(state: &EnvState, demand_scale: f64, battery_scale: f64) -> Observation {
    [state.demand / demand_scale, state.battery / battery_scale]
}

/// The household simulator plus reward engine, exposed to the learner.
#[derive(Clone, Debug)]
pub struct HouseholdTask {
    env: HouseholdEnv,
    engine: RewardEngine,
    demand_scale: f64,
}

impl HouseholdTask {
    /// `demand_scale` defaults to the largest demand in the series.
    pub fn new(cfg: EnvConfig, demand: Vec<f64>, reward: RewardConfig) -> Result<Self> {
        let engine = RewardEngine::new(reward, cfg.battery.clone())?;
        let env = HouseholdEnv::new(cfg, demand)?;
        let peak = env.demand().iter().copied().fold(0.0, f64::max);
        let demand_scale = if peak > 0.0 { peak } else { 1.0 };
        Ok(Self {
            env,
            engine,
            demand_scale,
        })
    }

    pub fn with_demand_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config("demand_scale must be positive".into()));
        }
        self.demand_scale = scale;
        Ok(self)
    }

    pub fn demand_scale(&self) -> f64 {
        self.demand_scale
    }

    pub fn engine(&self) -> &RewardEngine {
        &self.engine
    }

    fn obs(&self, state: &EnvState) -> Observation {
        observe(state, self.demand_scale, self.env.config().battery.b_max)
    }
}

impl Environment for HouseholdTask {
    fn num_actions(&self) -> usize {
        self.env.config().actions.len()
    }

    fn horizon(&self) -> usize {
        self.env.horizon()
    }

    fn reset(&mut self) -> Observation {
        let s = self.env.reset();
        self.engine.reset_episode(s.demand);
        self.obs(&s)
    }

    fn step(&mut self, action: usize) -> Result<Feedback> {
        let state = *self.env.state();
        let level = self.env.config().actions.level(action);
        let res = self.env.step(level)?;
        let r = self
            .engine
            .step(&StepContext::from_step(&state, &res, self.env.horizon()));
        Ok(Feedback {
            reward: r.total,
            raw_reward: r.raw_total(self.engine.config().lambda),
            next_obs: self.obs(&res.next_state),
            done: res.done,
        })
    }
}

pub const CHECKPOINT_FORMAT: &str = "loadshape-dqn";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to rebuild the greedy policy of a trained agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentCheckpoint {
    pub format: String,
    pub version: u32,
    pub levels: Vec<f64>,
    pub demand_scale: f64,
    pub battery: BatteryConfig,
    pub reward: RewardConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
}

impl AgentCheckpoint {
    pub fn new(
        network: &Mlp,
        actions: &ActionSpace,
        demand_scale: f64,
        battery: &BatteryConfig,
        reward: &RewardConfig,
        train: &TrainConfig,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            levels: actions.levels().to_vec(),
            demand_scale,
            battery: battery.clone(),
            reward: reward.clone(),
            train: train.clone(),
            seed: train.seed,
            sizes: network.sizes().to_vec(),
            params: network.params().to_vec(),
        }
    }

    pub fn network(&self) -> Result<Mlp> {
        Mlp::from_params(self.sizes.clone(), self.params.clone()).ok_or_else(|| {
            Error::Mismatch("agent checkpoint parameter count does not match its layer sizes".into())
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ck: Self = serde_json::from_str(s)?;
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(Error::Mismatch(format!(
                "expected {CHECKPOINT_FORMAT} v{CHECKPOINT_VERSION}, found {} v{}",
                ck.format, ck.version
            )));
        }
        if ck.levels.len() != *ck.sizes.last().unwrap_or(&0) {
            return Err(Error::Mismatch(
                "agent checkpoint output width differs from its action levels".into(),
            ));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}

/// Deterministic argmax policy over a trained Q-network.
#[derive(Clone, Debug)]
pub struct GreedyPolicy {
    network: Mlp,
    levels: Vec<f64>,
    demand_scale: f64,
    battery_scale: f64,
}

impl GreedyPolicy {
    pub fn new(network: Mlp, levels: Vec<f64>, demand_scale: f64, battery_scale: f64) -> Self {
        Self {
            network,
            levels,
            demand_scale,
            battery_scale,
        }
    }

    pub fn q_values(&self, state: &EnvState) -> Vec<f64> {
        self.network
            .forward(&observe(state, self.demand_scale, self.battery_scale))
    }

    pub fn action_index(&self, state: &EnvState) -> usize {
        argmax(&self.q_values(state))
    }
}

impl Policy for GreedyPolicy {
    fn act(&mut self, state: &EnvState) -> f64 {
        self.levels[self.action_index(state)]
    }
}

pub fn extract_policy(ck: &AgentCheckpoint) -> Result<GreedyPolicy> {
    Ok(GreedyPolicy::new(
        ck.network()?,
        ck.levels.clone(),
        ck.demand_scale,
        ck.battery.b_max,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tr(i: usize) -> ReplayTransition {
        ReplayTransition {
            state: [i as f64, 0.0],
            action: 0,
            reward: i as f64,
            next_state: [0.0, 0.0],
            done: false,
        }
    }

    #[test]
    fn replay_is_fifo() {
        let mut b = ReplayBuffer::new(4);
        for i in 0..11 {
            b.push(tr(i));
            assert!(b.len() <= 4);
        }
        let kept: Vec<f64> = b.iter().map(|t| t.reward).collect();
        assert_eq!(kept, vec![7.0, 8.0, 9.0, 10.0]);
    }

    #[test]
    fn epsilon_schedule() {
        let cfg = TrainConfig {
            episodes: 10,
            steps_per_episode: 100,
            ..Default::default()
        };
        // decay horizon = 0.1 * 1000 = 100 steps
        assert_eq!(epsilon_at(0, &cfg), 1.0);
        assert_close!(epsilon_at(50, &cfg), 0.525, 1e-12);
        assert_eq!(epsilon_at(100, &cfg), 0.05);
        assert_eq!(epsilon_at(5000, &cfg), 0.05);
    }

    #[test]
    fn greedy_selection() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(epsilon_greedy(&[1.0, 3.0, 2.0], 0.0, &mut rng), 1);
        assert_eq!(epsilon_greedy(&[5.0, 5.0, 1.0], 0.0, &mut rng), 0);
    }

    #[test]
    fn td_target_examples() {
        assert_eq!(td_target(2.0, 0.99, &[100.0, 5.0], true), 2.0);
        assert_close!(td_target(1.0, 0.99, &[0.0, 10.0], false), 10.9, 1e-12);
        assert_eq!(td_target(3.0, 0.0, &[7.0, 1.0], false), 3.0);
    }

    #[test]
    fn scalar_network_loss_by_hand() {
        // 2 inputs -> 1 output, no hidden layer: Q = w0*s0 + w1*s1 + b
        let online = Mlp::from_params(vec![2, 1], vec![0.5, -1.0, 0.25]).unwrap();
        let target = Mlp::from_params(vec![2, 1], vec![1.0, 1.0, 0.0]).unwrap();
        let t = ReplayTransition {
            state: [2.0, 1.0],
            action: 0,
            reward: 1.0,
            next_state: [1.0, 2.0],
            done: false,
        };
        // Q = 1 - 1 + 0.25 = 0.25 ; target = 1 + 0.5 * 3 = 2.5 ; loss = 2.25^2
        let mut s = LearnScratch::default();
        let (loss, grads) = loss_and_grad(&online, &target, &[t], 0.5, &mut s);
        assert_close!(loss, 5.0625, 1e-12);
        // dL/dw = -2 * err * s
        assert_close!(grads[0], -9.0, 1e-12);
        assert_close!(grads[1], -4.5, 1e-12);
        assert_close!(grads[2], -4.5, 1e-12);
    }

    #[test]
    fn learn_step_at_fixed_point_is_zero_loss() {
        let online = Mlp::from_params(vec![2, 1], vec![0.0, 0.0, 2.0]).unwrap();
        let target = online.clone();
        let t = ReplayTransition {
            state: [0.3, 0.7],
            action: 0,
            reward: 2.0,
            next_state: [0.0, 0.0],
            done: true,
        };
        let mut net = online.clone();
        let mut adam = Adam::new(3);
        let mut s = LearnScratch::default();
        let loss = learn_step(&mut net, &target, &[t], 0.9, &mut adam, 1e-3, &mut s).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(net.params(), online.params());
    }

    #[test]
    fn non_finite_loss_is_reported() {
        let online = Mlp::from_params(vec![2, 1], vec![0.0, 0.0, 0.0]).unwrap();
        let t = ReplayTransition {
            state: [0.0, 0.0],
            action: 0,
            reward: f64::NAN,
            next_state: [0.0, 0.0],
            done: true,
        };
        let mut net = online.clone();
        let err = learn_step(
            &mut net,
            &online,
            &[t],
            0.9,
            &mut Adam::new(3),
            1e-3,
            &mut LearnScratch::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Numerical { .. }));
    }

    #[test]
    fn train_config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for cfg in [
            TrainConfig { gamma: 0.0, ..Default::default() },
            TrainConfig { eps_final: 0.5, eps_initial: 0.2, ..Default::default() },
            TrainConfig { batch_size: 0, ..Default::default() },
        ] {
            assert!(cfg.validate().is_err());
        }
    }

    #[test]
    fn checkpoint_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let actions = ActionSpace::uniform(21, 5.0).unwrap();
        let net = q_network(&[8, 8], actions.len(), &mut rng);
        let ck = AgentCheckpoint::new(
            &net,
            &actions,
            3.2,
            &BatteryConfig::default(),
            &RewardConfig::default(),
            &TrainConfig::default(),
        );
        let back = AgentCheckpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.network().unwrap(), net);

        let mut wrong = ck.clone();
        wrong.version = 99;
        assert!(AgentCheckpoint::from_json(&wrong.to_json().unwrap()).is_err());
    }
}
