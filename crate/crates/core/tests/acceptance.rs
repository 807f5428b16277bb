//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Criteria 5-9 share one desk-profile sweep (3 seeds, λ ∈ {0, 0.3, 1}).

mod common;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use common::*;
use loadshape::dqn::train;
use loadshape::env::{step, ActionSpace, BatteryConfig, EnvConfig, EnvState, LoadCoupling, TariffSchedule};
use loadshape::experiment::{self, median, EvaluationResults, ExperimentConfig, Profile};
use loadshape::metrics::{compensated_cost_from_pct, f1_score};
use loadshape::reward::privacy_reward;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SEEDS: [u64; 3] = [0, 1, 2];
const LAMBDAS: [f64; 3] = [0.0, 0.3, 1.0];
const PULSE_APPLIANCE: &str = "kettle";

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn table_arithmetic() -> Outcome {
    // (precision, recall, printed F1)
    let f1_rows = [
        (0.500, 0.895, 0.642),
        (0.286, 0.250, 0.267),
        (0.235, 0.842, 0.368),
        (0.123, 0.500, 0.198),
        (0.020, 0.053, 0.029),
        (0.031, 0.062, 0.042),
        (0.042, 0.053, 0.047),
        (0.040, 0.062, 0.049),
        (0.043, 0.053, 0.048),
        (0.056, 0.062, 0.059),
        (0.481, 0.684, 0.565),
        (0.250, 0.125, 0.167),
    ];
    // (cost, remaining %, printed compensated cost)
    let cost_rows = [
        (-0.324, 1.94, 0.123),
        (-0.085, 65.7, 0.071),
        (-0.003, 92.7, 0.030),
        (0.025, 100.0, 0.025),
        (0.023, 100.0, 0.023),
    ];
    let f1_err = f1_rows
        .iter()
        .map(|&(p, r, f)| (f1_score(p, r) - f).abs())
        .fold(0.0, f64::max);
    let cost_err = cost_rows
        .iter()
        .map(|&(c, pct, want)| (compensated_cost_from_pct(c, pct, 1.5, 0.304) - want).abs())
        .fold(0.0, f64::max);
    check(
        f1_err <= 1e-3 + 1e-12 && cost_err <= 1e-3 + 1e-12,
        format!("max |F1 error| {f1_err:.5}, max |compensated cost error| {cost_err:.5} (tolerance 0.001)"),
    )
}

fn privacy_oracle(demand: f64, masked: f64, tau: f64, delta: f64) -> f64 {
    let d = if tau > delta { tau } else { delta };
    let mut hits = Vec::new();
    if demand >= d && masked < d {
        hits.push(100.0 + 0.05 * (demand - tau));
    }
    if demand >= d && masked >= d {
        hits.push(-50.0 - 0.05 * (masked - tau));
    }
    if demand < d && masked >= d {
        hits.push(20.0 + 0.05 * (masked - tau));
    }
    if demand < d && masked < d {
        hits.push(-20.0);
    }
    assert_eq!(hits.len(), 1);
    hits[0]
}

fn reward_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..10_000 {
        let demand = rng.random_range(0.0..5.0);
        let masked = rng.random_range(0.0..5.0);
        let tau = rng.random_range(0.0..3.0);
        worst = worst.max((privacy_reward(demand, masked, tau, 0.5) - privacy_oracle(demand, masked, tau, 0.5)).abs());
    }
    check(worst <= 1e-9, format!("10^4 triples, max deviation {worst:.2e}"))
}

fn environment_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut violations = 0usize;
    let mut worst_bookkeeping: f64 = 0.0;
    for i in 0..100_000 {
        let battery = BatteryConfig {
            coupling: if i % 2 == 0 { LoadCoupling::Energy } else { LoadCoupling::Power },
            ..BatteryConfig::default()
        };
        let cfg = EnvConfig::new(battery, TariffSchedule::default(), ActionSpace::uniform(21, 5.0).unwrap()).unwrap();
        let state = EnvState {
            demand: rng.random_range(0.0..6.0),
            battery: rng.random_range(0.0..=1.5),
            minute: rng.random_range(1..=1440),
        };
        let action = cfg.actions.level(rng.random_range(0..21));
        let res = step(&cfg, &state, action, rng.random_range(0.0..6.0), 1440).unwrap();
        let b = res.next_state.battery;
        if !(cfg.battery.b_min <= b && b <= cfg.battery.b_max) || res.masked_load < 0.0 {
            violations += 1;
        }
        worst_bookkeeping = worst_bookkeeping.max((b - state.battery - res.delta_b).abs());
    }
    check(
        violations == 0 && worst_bookkeeping <= 1e-9,
        format!("10^5 steps, {violations} bound violations, max bookkeeping error {worst_bookkeeping:.2e}"),
    )
}

fn dqn_correctness() -> Outcome {
    let oracle = value_iteration_policy(0.9);
    let mut agree = 0;
    for seed in 0..3 {
        let out = train(&mut Toy::new(1.0), &toy_config(seed)).map_err(|e| e.to_string())?;
        if greedy_on_toy(&out.network, 1.0) == oracle {
            agree += 1;
        }
    }
    let q_err = q_gradient_worst_error(21);
    let cnn_err = seq2point_gradient_worst_error(8);
    check(
        agree == 3 && q_err <= 1e-4 && cnn_err <= 1e-4,
        format!(
            "toy MDP policy matches value iteration for {agree}/3 seeds; gradient rel. error Q {q_err:.2e}, CNN {cnn_err:.2e}"
        ),
    )
}

struct Sweep {
    root: PathBuf,
    config: ExperimentConfig,
    /// seed -> results per policy key ("original" or the λ label)
    results: BTreeMap<u64, BTreeMap<String, EvaluationResults>>,
    seconds: f64,
}

fn sweep_config(root: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Profile::Desk);
    cfg.paths.output = root.to_path_buf();
    cfg.lambdas = LAMBDAS.to_vec();
    cfg.seeds = SEEDS.to_vec();
    cfg
}

fn key(lambda: Option<f64>) -> String {
    lambda.map_or_else(|| "original".into(), experiment::lambda_label)
}

fn run_sweep(root: &Path) -> Result<Sweep, String> {
    let config = sweep_config(root);
    let start = Instant::now();
    let mut results = BTreeMap::new();
    for &s in &SEEDS {
        let cell = experiment::seed_config(&config, s);
        let rs = experiment::run_pipeline(&cell).map_err(|e| e.to_string())?;
        results.insert(s, rs.into_iter().map(|r| (key(r.lambda), r)).collect());
    }
    experiment::cmd_report(root).map_err(|e| e.to_string())?;
    Ok(Sweep {
        root: root.to_path_buf(),
        config,
        results,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn per_seed(sweep: &Sweep, policy: &str, f: impl Fn(&EvaluationResults) -> f64) -> Vec<f64> {
    sweep.results.values().map(|m| f(&m[policy])).collect()
}

fn fmt_values(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
}

fn adversary_sanity(sweep: &Sweep) -> Outcome {
    let f1 = per_seed(sweep, "original", |r| r.unmasked[PULSE_APPLIANCE].f1);
    let worst = f1.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        worst >= 0.8,
        format!("{PULSE_APPLIANCE} F1 on the unmasked held-out day per seed [{}] (need >= 0.8)", fmt_values(&f1)),
    )
}

fn defense_effectiveness(sweep: &Sweep) -> Outcome {
    let label = experiment::lambda_label(1.0);
    let mut masked = per_seed(sweep, &label, |r| r.masked[PULSE_APPLIANCE].f1);
    let mut unmasked = per_seed(sweep, &label, |r| r.unmasked[PULSE_APPLIANCE].f1);
    let detail = format!("λ=1 masked F1 [{}] vs unmasked [{}]", fmt_values(&masked), fmt_values(&unmasked));
    let m = median(&mut masked).unwrap();
    let u = median(&mut unmasked).unwrap();
    check(m <= 0.5 * u, format!("{detail}; median {m:.3} <= 0.5 × {u:.3}"))
}

fn battery_consistency(sweep: &Sweep) -> Outcome {
    let label = experiment::lambda_label(0.3);
    let mut pct = per_seed(sweep, &label, |r| r.cost.as_ref().unwrap().remaining_pct);
    let detail = format!("λ=0.3 final battery % [{}]", fmt_values(&pct));
    let m = median(&mut pct).unwrap();
    check(m >= 80.0, format!("{detail}; median {m:.1}% (need >= 80%)"))
}

fn lambda_monotonicity(sweep: &Sweep) -> Outcome {
    let cost = |l: f64| per_seed(sweep, &experiment::lambda_label(l), |r| r.cost.as_ref().unwrap().compensated_cost);
    let mut c0 = cost(0.0);
    let mut c1 = cost(1.0);
    let detail = format!("compensated cost λ=0 [{}], λ=1 [{}]", fmt_values(&c0), fmt_values(&c1));
    let m0 = median(&mut c0).unwrap();
    let m1 = median(&mut c1).unwrap();
    check(m0 <= m1, format!("{detail}; median {m0:.4} <= {m1:.4}"))
}

fn collect_results(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let eval = dir.join("eval");
    for entry in fs::read_dir(&eval).unwrap() {
        let p = entry.unwrap().path().join("results.json");
        out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
    }
    out
}

fn determinism(sweep: &Sweep) -> Outcome {
    let again = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cell = experiment::seed_config(&sweep.config, SEEDS[0]);
    cell.paths.output = again.path().to_path_buf();
    experiment::run_pipeline(&cell).map_err(|e| e.to_string())?;
    let first = collect_results(&sweep.root.join(format!("seed_{}", SEEDS[0])));
    let second = collect_results(again.path());
    let identical = first.len() == second.len() && first == second;
    check(
        identical,
        format!("{} results.json files from two seed-{} pipelines byte-identical: {identical}", first.len(), SEEDS[0]),
    )
}

fn run(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(p) => Err(p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panicked".into())),
    };
    let secs = start.elapsed().as_secs_f64();
    match &outcome {
        Ok(d) => println!("criterion {id} PASS  {name}: {d} ({secs:.1}s)"),
        Err(d) => println!("criterion {id} FAIL  {name}: {d} ({secs:.1}s)"),
    }
    outcome.is_ok()
}

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let wanted = |id: usize| filter.is_empty() || filter.iter().any(|f| f == &id.to_string());
    let mut failed = Vec::new();
    let mut record = |id: usize, ok: bool| {
        if !ok {
            failed.push(id);
        }
    };

    if wanted(1) {
        record(1, run(1, "table arithmetic", table_arithmetic));
    }
    if wanted(2) {
        record(2, run(2, "reward-case oracle", reward_oracle));
    }
    if wanted(3) {
        record(3, run(3, "environment invariants", environment_invariants));
    }
    if wanted(4) {
        record(4, run(4, "DQN and CNN correctness", dqn_correctness));
    }

    if (5..=9).any(wanted) {
        let dir = tempfile::tempdir().expect("temp dir");
        let sweep = match panic::catch_unwind(AssertUnwindSafe(|| run_sweep(dir.path()))) {
            Ok(Ok(s)) => {
                println!("desk sweep: {} seeds × λ {:?} in {:.0}s", SEEDS.len(), LAMBDAS, s.seconds);
                Some(s)
            }
            Ok(Err(e)) => {
                println!("desk sweep failed: {e}");
                None
            }
            Err(_) => {
                println!("desk sweep panicked");
                None
            }
        };
        let criteria: [(usize, &str, fn(&Sweep) -> Outcome); 5] = [
            (5, "adversary sanity", adversary_sanity),
            (6, "defense effectiveness", defense_effectiveness),
            (7, "battery consistency", battery_consistency),
            (8, "lambda monotonicity", lambda_monotonicity),
            (9, "determinism", determinism),
        ];
        for (id, name, f) in criteria {
            if !wanted(id) {
                continue;
            }
            let ok = match &sweep {
                Some(s) => run(id, name, || f(s)),
                None => run(id, name, || Err("sweep did not complete".into())),
            };
            record(id, ok);
        }
        if let Some(s) = &sweep {
            if let Ok(md) = fs::read_to_string(s.root.join("report.md")) {
                println!("\n{md}");
            }
        }
    }

    if failed.is_empty() {
        println!("acceptance: all selected criteria passed");
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
