//! Fixtures shared by the integration and acceptance tests.
#![allow(dead_code)]

use loadshape::dqn::{loss_and_grad, q_network, Environment, Feedback, LearnScratch, Observation, ReplayTransition, TrainConfig};
use loadshape::nilm::{Seq2PointNet, Seq2PointSpec};
use loadshape::nn::{argmax, Mlp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two states, two actions, deterministic. Action 0 stays, action 1 switches.
/// Staying in state 0 pays a small immediate reward, staying in state 1 pays
/// more, switching pays nothing.
pub const REWARD: [[f64; 2]; 2] = [[0.3, 0.0], [1.0, 0.0]];
pub const NEXT: [[usize; 2]; 2] = [[0, 1], [1, 0]];

pub struct Toy {
    pub state: usize,
    pub t: usize,
    pub episodes: usize,
    pub horizon: usize,
    pub obs_scale: f64,
}

impl Toy {
    pub fn new(obs_scale: f64) -> Self {
        Self {
            state: 0,
            t: 0,
            episodes: 0,
            horizon: 100,
            obs_scale,
        }
    }

    pub fn obs(&self) -> Observation {
        [self.state as f64 * self.obs_scale, (1 - self.state) as f64 * self.obs_scale]
    }
}

impl Environment for Toy {
    fn num_actions(&self) -> usize {
        2
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn reset(&mut self) -> Observation {
        // Alternate the start state so both states are visited early.
        self.state = self.episodes % 2;
        self.episodes += 1;
        self.t = 0;
        self.obs()
    }
    fn step(&mut self, action: usize) -> loadshape::Result<Feedback> {
        let r = REWARD[self.state][action];
        self.state = NEXT[self.state][action];
        self.t += 1;
        Ok(Feedback {
            reward: r,
            raw_reward: r,
            next_obs: self.obs(),
            done: self.t == self.horizon,
        })
    }
}

pub fn value_iteration_policy(gamma: f64) -> [usize; 2] {
    let mut v = [0.0f64; 2];
    for _ in 0..2000 {
        let mut next = [0.0; 2];
        for s in 0..2 {
            next[s] = (0..2)
                .map(|a| REWARD[s][a] + gamma * v[NEXT[s][a]])
                .fold(f64::MIN, f64::max);
        }
        v = next;
    }
    let mut policy = [0; 2];
    for s in 0..2 {
        let q: Vec<f64> = (0..2).map(|a| REWARD[s][a] + gamma * v[NEXT[s][a]]).collect();
        policy[s] = argmax(&q);
    }
    policy
}

pub fn toy_config(seed: u64) -> TrainConfig {
    TrainConfig {
        learning_rate: 1e-3,
        gamma: 0.9,
        target_sync_every: 200,
        episodes: 60,
        steps_per_episode: 100,
        eps_initial: 1.0,
        eps_final: 0.05,
        eps_decay_fraction: 0.3,
        batch_size: 32,
        learning_starts: 200,
        buffer_capacity: 10_000,
        hidden: vec![16, 16],
        seed,
    }
}

pub fn greedy_on_toy(net: &Mlp, scale: f64) -> [usize; 2] {
    let mut p = [0; 2];
    for (s, slot) in p.iter_mut().enumerate() {
        let env = Toy {
            state: s,
            t: 0,
            episodes: 0,
            horizon: 1,
            obs_scale: scale,
        };
        *slot = argmax(&net.forward(&env.obs()));
    }
    p
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
}

/// Worst per-parameter relative error between the analytic TD-loss gradient
/// and central differences.
pub fn q_gradient_worst_error(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let online = q_network(&[8, 8], 3, &mut rng);
    let target = q_network(&[8, 8], 3, &mut rng);
    let batch: Vec<ReplayTransition> = (0..6)
        .map(|i| ReplayTransition {
            state: [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
            action: i % 3,
            reward: rng.random_range(-1.0..1.0),
            next_state: [rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)],
            done: i == 5,
        })
        .collect();
    let mut scratch = LearnScratch::default();
    let (_, g) = loss_and_grad(&online, &target, &batch, 0.99, &mut scratch);
    let analytic = g.to_vec();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, a) in analytic.iter().enumerate() {
        let mut plus = online.clone();
        plus.params_mut()[i] += h;
        let mut minus = online.clone();
        minus.params_mut()[i] -= h;
        let (lp, _) = loss_and_grad(&plus, &target, &batch, 0.99, &mut LearnScratch::default());
        let (lm, _) = loss_and_grad(&minus, &target, &batch, 0.99, &mut LearnScratch::default());
        worst = worst.max(relative_error(*a, (lp - lm) / (2.0 * h)));
    }
    worst
}

/// Same check for the Seq2Point regression loss.
pub fn seq2point_gradient_worst_error(seed: u64) -> f64 {
    let spec = Seq2PointSpec {
        sequence_length: 5,
        conv1_channels: 3,
        conv2_channels: 4,
        kernel: 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let net = Seq2PointNet::new(spec, &mut rng).unwrap();
    let windows: Vec<Vec<f64>> = (0..4)
        .map(|_| (0..5).map(|_| rng.random_range(0.0..1.0)).collect())
        .collect();
    let refs: Vec<&[f64]> = windows.iter().map(|w| w.as_slice()).collect();
    let targets = [0.1, 0.9, 0.0, 0.5];
    let mut grads = Vec::new();
    net.mse_and_grad(&refs, &targets, &mut grads);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for (i, g) in grads.iter().enumerate() {
        let mut plus = net.clone();
        plus.params_mut()[i] += h;
        let mut minus = net.clone();
        minus.params_mut()[i] -= h;
        let lp = plus.mse_and_grad(&refs, &targets, &mut Vec::new());
        let lm = minus.mse_and_grad(&refs, &targets, &mut Vec::new());
        worst = worst.max(relative_error(*g, (lp - lm) / (2.0 * h)));
    }
    worst
}
