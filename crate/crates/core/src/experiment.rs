//! Config-driven pipeline: synthetic data, attacker training, defense
//! training, evaluation and reporting. The `loadshape` binary is a thin
//! wrapper over the `cmd_*` functions here.
//!
//! Output layout under `paths.output`:
//!
//! ```text
//! data/day_<date>.csv              wide aligned CSVs (synthetic source)
//! nilm/<appliance>.json            attacker checkpoint
//! nilm/<appliance>_loss.csv
//! agent/lambda_<λ>/agent.json      policy checkpoint
//! agent/lambda_<λ>/train_log.csv
//! eval/lambda_<λ>/results.json     plus load_curves.csv, disagg_*.csv, trace.csv
//! eval/original/results.json       no-op baseline
//! manifest.json
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{generate_synthetic, DayData, Household, SyntheticSpec};
use crate::dqn::{extract_policy, train, write_log_csv, AgentCheckpoint, HouseholdTask, TrainConfig};
use crate::env::{no_op_policy, run_episode, ActionSpace, BatteryConfig, EnvConfig, LoadCoupling, Policy, TariffSchedule};
use crate::error::{Error, Result};
use crate::metrics::{export_figures, privacy_case_counts, ClassificationReport, CostReport, Disaggregation};
use crate::nilm::{attack, train_nilm, write_loss_csv, NilmModel, NilmTrainConfig, Seq2PointSpec};
use crate::reward::{RewardConfig, RewardEngine};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 200 episodes, 10⁴ attacker iterations, synthetic data.
    #[default]
    Desk,
    /// 1500 episodes, 10⁵ attacker iterations, recorded household data.
    Paper,
}

impl std::str::FromStr for Profile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            other => Err(Error::Config(format!("unknown profile {other:?} (expected desk or paper)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// `gen-synthetic` writes the days into the data directory.
    Synthetic,
    /// The data directory already holds wide aligned CSVs.
    Files,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Directory of wide CSVs. Defaults to `<output>/data`.
    pub data: Option<PathBuf>,
    pub output: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DataSource,
    /// Days generated by `gen-synthetic`.
    pub synthetic_days: usize,
    /// Days the attacker trains on (the evaluation day is never among them).
    pub train_days: usize,
    /// Day the defense is trained and evaluated on; defaults to the last covered day.
    pub eval_day: Option<NaiveDate>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NilmConfig {
    pub model: Seq2PointSpec,
    pub train: NilmTrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub profile: Profile,
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub paths: PathsConfig,
    pub dataset: DatasetConfig,
    pub battery: BatteryConfig,
    pub tariff: TariffSchedule,
    /// Number of evenly spaced action levels in `[-e_max, e_max]`.
    pub action_levels: usize,
    pub reward: RewardConfig,
    pub train: TrainConfig,
    pub nilm: NilmConfig,
    pub synthetic: SyntheticSpec,
    pub lambdas: Vec<f64>,
    pub seeds: Vec<u64>,
    pub appliances: Vec<String>,
}

impl ExperimentConfig {
    pub fn preset(profile: Profile) -> Self {
        let battery = BatteryConfig {
            coupling: LoadCoupling::Power,
            ..BatteryConfig::default()
        };
        let (episodes, iterations, source, output) = match profile {
            Profile::Desk => (200, 10_000, DataSource::Synthetic, "runs/desk"),
            Profile::Paper => (1500, 100_000, DataSource::Files, "runs/paper"),
        };
        Self {
            profile,
            seed: 0,
            paths: PathsConfig {
                data: None,
                output: PathBuf::from(output),
            },
            dataset: DatasetConfig {
                source,
                synthetic_days: 11,
                train_days: 10,
                eval_day: None,
            },
            battery,
            tariff: TariffSchedule::default(),
            action_levels: 21,
            reward: RewardConfig::default(),
            train: TrainConfig {
                episodes,
                ..TrainConfig::default()
            },
            nilm: NilmConfig {
                model: Seq2PointSpec::default(),
                train: NilmTrainConfig {
                    iterations,
                    ..NilmTrainConfig::default()
                },
            },
            synthetic: SyntheticSpec::default(),
            lambdas: vec![0.0, 0.3, 0.7, 1.0],
            seeds: vec![0, 1, 2],
            appliances: vec!["kettle".into(), "toaster".into()],
        }
    }

    /// Parses TOML text layered over the preset of `profile` (or the file's
    /// own `profile` key, or `desk`).
    pub fn from_toml_str(text: &str, profile: Option<Profile>) -> Result<Self> {
        let overlay: toml::Table = toml::from_str(text).map_err(|e| Error::Config(format!("config: {e}")))?;
        let file_profile = match overlay.get("profile") {
            Some(toml::Value::String(s)) => Some(s.parse::<Profile>()?),
            Some(_) => return Err(Error::Config("config: profile must be a string".into())),
            None => None,
        };
        let profile = profile.or(file_profile).unwrap_or_default();
        let mut base = toml::Table::try_from(Self::preset(profile))
            .map_err(|e| Error::Config(format!("config preset: {e}")))?;
        merge(&mut base, overlay);
        base.insert("profile".into(), toml::Value::try_from(profile).expect("profile serializes"));
        let mut cfg: Self = toml::Value::Table(base)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("config: {e}")))?;
        cfg.apply_seed(cfg.seed);
        Ok(cfg)
    }

    pub fn load(path: Option<&Path>, profile: Option<Profile>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                Self::from_toml_str(&text, profile)
            }
            None => {
                let mut cfg = Self::preset(profile.unwrap_or_default());
                cfg.apply_seed(cfg.seed);
                Ok(cfg)
            }
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config: {e}")))
    }

    /// Sets the master seed and the seeds of every component derived from it.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.train.seed = seed;
        self.nilm.train.seed = seed;
        self.synthetic.seed = seed;
    }

    pub fn data_dir(&self) -> PathBuf {
        self.paths
            .data
            .clone()
            .unwrap_or_else(|| self.paths.output.join("data"))
    }

    pub fn env_config(&self) -> Result<EnvConfig> {
        EnvConfig::new(
            self.battery.clone(),
            self.tariff.clone(),
            ActionSpace::uniform(self.action_levels, self.battery.e_max)?,
        )
    }

    pub fn reward_config(&self, lambda: f64) -> RewardConfig {
        RewardConfig {
            lambda,
            ..self.reward.clone()
        }
    }

    /// Checks every sub-config before any work starts.
    pub fn validate(&self) -> Result<()> {
        self.env_config()?;
        self.reward.validate()?;
        self.train.validate()?;
        if self.train.steps_per_episode != crate::env::MINUTES_PER_DAY {
            return Err(Error::Config("train.steps_per_episode must equal the 1440-minute day".into()));
        }
        self.nilm.model.validate()?;
        self.nilm.train.validate()?;
        self.synthetic.validate()?;
        for &l in &self.lambdas {
            self.reward_config(l).validate()?;
        }
        if self.lambdas.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("lambdas and seeds must be non-empty".into()));
        }
        if self.appliances.is_empty() {
            return Err(Error::Config("at least one appliance is required".into()));
        }
        if self.dataset.train_days == 0 {
            return Err(Error::Config("dataset.train_days must be >= 1".into()));
        }
        if self.dataset.source == DataSource::Synthetic {
            if self.dataset.synthetic_days <= self.dataset.train_days {
                return Err(Error::Config(
                    "dataset.synthetic_days must exceed train_days to leave a held-out day".into(),
                ));
            }
            for a in &self.appliances {
                if !self.synthetic.appliances.iter().any(|s| &s.name == a) {
                    return Err(Error::Config(format!("appliance {a} is not generated by the synthetic spec")));
                }
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring paths so that runs in
    /// different directories share a hash.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths = PathsConfig {
            data: None,
            output: PathBuf::new(),
        };
        let json = serde_json::to_string(&c).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

fn merge(base: &mut toml::Table, overlay: toml::Table) {
    for (k, v) in overlay {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

pub fn lambda_label(lambda: f64) -> String {
    format!("lambda_{lambda}")
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub command: String,
    pub seed: u64,
    pub lambda: Option<f64>,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub artifacts: Vec<PathBuf>,
}

/// Record of what ran in an output directory and what it produced.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub code_version: String,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

impl RunManifest {
    pub fn path(output: &Path) -> PathBuf {
        output.join("manifest.json")
    }

    pub fn load(output: &Path) -> Result<Option<Self>> {
        let p = Self::path(output);
        if !p.exists() {
            return Ok(None);
        }
        let s = fs::read_to_string(&p).map_err(|e| Error::io(&p, e))?;
        Ok(Some(serde_json::from_str(&s)?))
    }

    /// Appends `entry` and rewrites the manifest in one rename.
    pub fn record(cfg: &ExperimentConfig, entry: ManifestEntry) -> Result<()> {
        let out = &cfg.paths.output;
        create_dir(out)?;
        let hash = cfg.hash();
        let mut m = match Self::load(out)? {
            Some(m) if m.config_hash == hash => m,
            _ => RunManifest {
                config_hash: hash,
                code_version: env!("CARGO_PKG_VERSION").into(),
                seed: cfg.seed,
                entries: Vec::new(),
            },
        };
        m.entries.push(entry);
        write_atomic(&Self::path(out), serde_json::to_string_pretty(&m)?.as_bytes())
    }
}

struct Recorder<'a> {
    cfg: &'a ExperimentConfig,
    command: &'static str,
    lambda: Option<f64>,
    started: u64,
    artifacts: Vec<PathBuf>,
}

impl<'a> Recorder<'a> {
    fn start(cfg: &'a ExperimentConfig, command: &'static str, lambda: Option<f64>) -> Self {
        log::info!("{command}: seed {}{}", cfg.seed, lambda.map(|l| format!(", lambda {l}")).unwrap_or_default());
        Self {
            cfg,
            command,
            lambda,
            started: unix_now(),
            artifacts: Vec::new(),
        }
    }

    fn add(&mut self, p: PathBuf) {
        self.artifacts.push(p);
    }

    fn finish(self) -> Result<Vec<PathBuf>> {
        RunManifest::record(
            self.cfg,
            ManifestEntry {
                command: self.command.into(),
                seed: self.cfg.seed,
                lambda: self.lambda,
                started_unix_s: self.started,
                finished_unix_s: unix_now(),
                artifacts: self.artifacts.clone(),
            },
        )?;
        Ok(self.artifacts)
    }
}

/// Writes `synthetic_days` wide CSVs, one per day, into the data directory.
pub fn cmd_gen_synthetic(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mut rec = Recorder::start(cfg, "gen-synthetic", None);
    let household = generate_synthetic(&cfg.synthetic, cfg.dataset.synthetic_days)?;
    household.validate()?;
    let dir = cfg.data_dir();
    create_dir(&dir)?;
    for day in household.days() {
        let p = dir.join(format!("day_{day}.csv"));
        household.write_wide_csv(&p, Some(&[day]))?;
        rec.add(p);
    }
    rec.finish()
}

fn load_household(cfg: &ExperimentConfig) -> Result<Household> {
    let dir = cfg.data_dir();
    if !dir.is_dir() {
        return Err(Error::Config(format!(
            "data directory {} does not exist (run gen-synthetic first)",
            dir.display()
        )));
    }
    let h = Household::read_dir(&dir)?;
    for a in &cfg.appliances {
        if !h.appliances.contains_key(a) {
            return Err(Error::Config(format!(
                "appliance {a} has no {a}_w column in {}",
                dir.display()
            )));
        }
    }
    Ok(h)
}

/// The evaluation day and the attacker's training days.
fn split_days(cfg: &ExperimentConfig, h: &Household) -> Result<(NaiveDate, Vec<NaiveDate>)> {
    let days = h.days();
    let eval = match cfg.dataset.eval_day {
        Some(d) if days.contains(&d) => d,
        Some(d) => return Err(Error::Data(format!("evaluation day {d} is not fully covered"))),
        None => *days
            .last()
            .ok_or_else(|| Error::Data("no fully covered day in the data".into()))?,
    };
    let train: Vec<NaiveDate> = days
        .into_iter()
        .filter(|d| *d != eval)
        .take(cfg.dataset.train_days)
        .collect();
    if train.len() < cfg.dataset.train_days {
        return Err(Error::Data(format!(
            "need {} training days besides {eval}, found {}",
            cfg.dataset.train_days,
            train.len()
        )));
    }
    Ok((eval, train))
}

fn eval_day(cfg: &ExperimentConfig) -> Result<DayData> {
    let h = load_household(cfg)?;
    let (eval, _) = split_days(cfg, &h)?;
    h.make_day(eval)
}

pub fn nilm_checkpoint_path(cfg: &ExperimentConfig, appliance: &str) -> PathBuf {
    cfg.paths.output.join("nilm").join(format!("{appliance}.json"))
}

pub fn agent_dir(cfg: &ExperimentConfig, lambda: f64) -> PathBuf {
    cfg.paths.output.join("agent").join(lambda_label(lambda))
}

pub fn eval_dir(cfg: &ExperimentConfig, lambda: Option<f64>) -> PathBuf {
    let name = lambda.map_or_else(|| "original".to_string(), lambda_label);
    cfg.paths.output.join("eval").join(name)
}

/// Trains one attacker per configured appliance on the training days.
pub fn cmd_train_nilm(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let h = load_household(cfg)?;
    let (_, train_days) = split_days(cfg, &h)?;
    let mut rec = Recorder::start(cfg, "train-nilm", None);
    let days = train_days
        .iter()
        .map(|d| h.make_day(*d))
        .collect::<Result<Vec<_>>>()?;
    let aggregate: Vec<f64> = days.iter().flat_map(|d| d.demand.iter().copied()).collect();
    let dir = cfg.paths.output.join("nilm");
    create_dir(&dir)?;
    for name in &cfg.appliances {
        let target: Vec<f64> = days
            .iter()
            .flat_map(|d| d.appliances[name].iter().copied())
            .collect();
        let trained = train_nilm(name, &aggregate, &target, &cfg.nilm.model, &cfg.nilm.train)?;
        let ck = nilm_checkpoint_path(cfg, name);
        trained.model.save(&ck)?;
        let loss = dir.join(format!("{name}_loss.csv"));
        write_loss_csv(&trained.losses, &loss)?;
        rec.add(ck);
        rec.add(loss);
    }
    rec.finish()
}

/// Trains the defense for one privacy weight on the evaluation day.
pub fn cmd_train_agent(cfg: &ExperimentConfig, lambda: f64) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let reward = cfg.reward_config(lambda);
    reward.validate()?;
    let day = eval_day(cfg)?;
    let mut rec = Recorder::start(cfg, "train-agent", Some(lambda));
    let env_cfg = cfg.env_config()?;
    let mut task = HouseholdTask::new(env_cfg.clone(), day.demand, reward.clone())?;
    let outcome = train(&mut task, &cfg.train)?;
    let ck = AgentCheckpoint::new(
        &outcome.network,
        &env_cfg.actions,
        task.demand_scale(),
        &env_cfg.battery,
        &reward,
        &cfg.train,
    );
    let dir = agent_dir(cfg, lambda);
    create_dir(&dir)?;
    let ck_path = dir.join("agent.json");
    ck.save(&ck_path)?;
    let log_path = dir.join("train_log.csv");
    write_log_csv(&outcome.log, &log_path)?;
    rec.add(ck_path);
    rec.add(log_path);
    rec.finish()
}

/// Everything `evaluate` reports for one policy on the evaluation day.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationResults {
    pub config_hash: String,
    pub seed: u64,
    /// `"dqn"` or `"no-op"`.
    pub policy: String,
    pub lambda: Option<f64>,
    pub eval_day: NaiveDate,
    /// Attack on the meter reading the policy produced.
    pub masked: BTreeMap<String, ClassificationReport>,
    /// Attack on the raw demand.
    pub unmasked: BTreeMap<String, ClassificationReport>,
    /// Absent for the no-op baseline.
    pub cost: Option<CostReport>,
    pub privacy_cases: BTreeMap<String, usize>,
}

impl EvaluationResults {
    pub fn load(path: &Path) -> Result<Self> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&s)?)
    }
}

fn check_agent(ck: &AgentCheckpoint, env_cfg: &EnvConfig, reward: &RewardConfig) -> Result<()> {
    if ck.levels != env_cfg.actions.levels() {
        return Err(Error::Mismatch(format!(
            "agent was trained with {} action levels, config has {}",
            ck.levels.len(),
            env_cfg.actions.len()
        )));
    }
    if ck.battery != env_cfg.battery {
        return Err(Error::Mismatch("agent was trained with a different battery".into()));
    }
    if ck.reward != *reward {
        return Err(Error::Mismatch("agent was trained with a different reward configuration".into()));
    }
    Ok(())
}

/// Rolls one greedy episode (or the no-op baseline when `lambda` is `None`),
/// attacks the meter reading and writes `results.json` plus figure data.
pub fn cmd_evaluate(cfg: &ExperimentConfig, lambda: Option<f64>) -> Result<EvaluationResults> {
    cfg.validate()?;
    let env_cfg = cfg.env_config()?;
    let mut models = Vec::new();
    for name in &cfg.appliances {
        let p = nilm_checkpoint_path(cfg, name);
        if !p.exists() {
            return Err(Error::Config(format!("missing attacker checkpoint {}", p.display())));
        }
        let m = NilmModel::load(&p)?;
        if m.net.spec != cfg.nilm.model {
            return Err(Error::Mismatch(format!("{} was trained with a different architecture", p.display())));
        }
        models.push(m);
    }
    let (mut policy, reward): (Box<dyn Policy>, RewardConfig) = match lambda {
        Some(l) => {
            let reward = cfg.reward_config(l);
            let p = agent_dir(cfg, l).join("agent.json");
            if !p.exists() {
                return Err(Error::Config(format!("missing agent checkpoint {}", p.display())));
            }
            let ck = AgentCheckpoint::load(&p)?;
            check_agent(&ck, &env_cfg, &reward)?;
            (Box::new(extract_policy(&ck)?), reward)
        }
        None => (Box::new(no_op_policy()), cfg.reward.clone()),
    };
    let day = eval_day(cfg)?;
    let mut rec = Recorder::start(cfg, "evaluate", lambda);
    let mut engine = RewardEngine::new(reward, env_cfg.battery.clone())?;
    let trace = run_episode(policy.as_mut(), &day.demand, &env_cfg, &mut engine)?;
    let masked_series = trace.masked();

    let mut masked = BTreeMap::new();
    let mut unmasked = BTreeMap::new();
    let mut figures = Vec::new();
    for m in &models {
        let truth = &day.truth[&m.appliance];
        let on_masked = attack(m, &masked_series)?;
        let on_raw = attack(m, &day.demand)?;
        masked.insert(m.appliance.clone(), ClassificationReport::from_labels(truth, &on_masked.predicted_on)?);
        unmasked.insert(m.appliance.clone(), ClassificationReport::from_labels(truth, &on_raw.predicted_on)?);
        figures.push(Disaggregation {
            appliance: m.appliance.clone(),
            true_kw: day.appliances[&m.appliance].clone(),
            attack: on_masked,
        });
    }
    let results = EvaluationResults {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        policy: if lambda.is_some() { "dqn" } else { "no-op" }.into(),
        lambda,
        eval_day: day.date,
        masked,
        unmasked,
        cost: match lambda {
            Some(_) => Some(CostReport::from_trace(&trace, &env_cfg.battery, &env_cfg.tariff)?),
            None => None,
        },
        privacy_cases: privacy_case_counts(&trace),
    };

    let dir = eval_dir(cfg, lambda);
    create_dir(&dir)?;
    let results_path = dir.join("results.json");
    write_atomic(&results_path, serde_json::to_string_pretty(&results)?.as_bytes())?;
    export_figures(&dir, &trace, &figures)?;
    let trace_path = dir.join("trace.csv");
    trace.write_csv(&trace_path)?;
    rec.add(results_path);
    rec.add(dir.join("load_curves.csv"));
    for f in &figures {
        rec.add(dir.join(format!("disagg_{}.csv", f.appliance)));
    }
    rec.add(trace_path);
    rec.finish()?;
    Ok(results)
}

/// The whole pipeline for one seed: data, attackers, baseline, then one
/// agent per λ.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<Vec<EvaluationResults>> {
    cfg.validate()?;
    if cfg.dataset.source == DataSource::Synthetic {
        cmd_gen_synthetic(cfg)?;
    }
    cmd_train_nilm(cfg)?;
    let mut out = vec![cmd_evaluate(cfg, None)?];
    for &l in &cfg.lambdas {
        cmd_train_agent(cfg, l)?;
        out.push(cmd_evaluate(cfg, Some(l))?);
    }
    Ok(out)
}

/// Runs [`run_pipeline`] for every configured seed in `<output>/seed_<s>`,
/// one after another, then writes the report.
pub fn cmd_sweep(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    for &s in &cfg.seeds {
        let cell = seed_config(cfg, s);
        run_pipeline(&cell)?;
    }
    cmd_report(&cfg.paths.output)
}

/// The configuration of one sweep cell.
pub fn seed_config(cfg: &ExperimentConfig, seed: u64) -> ExperimentConfig {
    let mut cell = cfg.clone();
    cell.apply_seed(seed);
    cell.paths.output = cfg.paths.output.join(format!("seed_{seed}"));
    if cfg.dataset.source == DataSource::Synthetic {
        cell.paths.data = None;
    }
    cell
}

/// Median-over-seeds summary of one policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub policy: String,
    pub lambda: Option<f64>,
    pub runs: usize,
    pub precision: BTreeMap<String, f64>,
    pub recall: BTreeMap<String, f64>,
    pub f1: BTreeMap<String, f64>,
    pub battery_cost: Option<f64>,
    pub remaining_pct: Option<f64>,
    pub compensated_cost: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<ReportRow>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    })
}

fn find_results(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    let mut entries: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for p in entries {
        if p.is_dir() {
            find_results(&p, out)?;
        } else if p.file_name().is_some_and(|n| n == "results.json") {
            out.push(p);
        }
    }
    Ok(())
}

impl Report {
    pub fn from_results(results: &[EvaluationResults]) -> Self {
        let mut groups: BTreeMap<(u8, String), Vec<&EvaluationResults>> = BTreeMap::new();
        for r in results {
            let key = match r.lambda {
                None => (0, String::new()),
                Some(l) => (1, format!("{:020.6}", 1.0 - l)),
            };
            groups.entry(key).or_default().push(r);
        }
        let rows = groups
            .into_values()
            .map(|g| {
                let per_app = |f: fn(&ClassificationReport) -> f64| {
                    let mut names: Vec<&String> = g.iter().flat_map(|r| r.masked.keys()).collect();
                    names.sort();
                    names.dedup();
                    names
                        .into_iter()
                        .filter_map(|n| {
                            let mut v: Vec<f64> = g.iter().filter_map(|r| r.masked.get(n).map(f)).collect();
                            median(&mut v).map(|m| (n.clone(), m))
                        })
                        .collect::<BTreeMap<_, _>>()
                };
                let cost = |f: fn(&CostReport) -> f64| {
                    let mut v: Vec<f64> = g.iter().filter_map(|r| r.cost.as_ref().map(f)).collect();
                    median(&mut v)
                };
                ReportRow {
                    policy: g[0].policy.clone(),
                    lambda: g[0].lambda,
                    runs: g.len(),
                    precision: per_app(|c| c.precision),
                    recall: per_app(|c| c.recall),
                    f1: per_app(|c| c.f1),
                    battery_cost: cost(|c| c.battery_cost),
                    remaining_pct: cost(|c| c.remaining_pct),
                    compensated_cost: cost(|c| c.compensated_cost),
                }
            })
            .collect();
        Report { rows }
    }

    fn label(row: &ReportRow) -> String {
        match row.lambda {
            None => "original load".into(),
            Some(l) => format!("defended, lambda={l}"),
        }
    }

    pub fn to_markdown(&self) -> String {
        let apps: Vec<String> = self
            .rows
            .iter()
            .flat_map(|r| r.f1.keys().cloned())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        let fmt = |v: Option<f64>, digits: usize| v.map_or("-".to_string(), |x| format!("{x:.digits$}"));
        let mut s = String::from("| policy | runs |");
        for a in &apps {
            s += &format!(" {a} precision | {a} recall | {a} F1 |");
        }
        s += " cost (£) | battery left (%) | compensated cost (£) |\n|---|---|";
        s += &"---|".repeat(apps.len() * 3 + 3);
        s.push('\n');
        for r in &self.rows {
            s += &format!("| {} | {} |", Self::label(r), r.runs);
            for a in &apps {
                s += &format!(
                    " {} | {} | {} |",
                    fmt(r.precision.get(a).copied(), 3),
                    fmt(r.recall.get(a).copied(), 3),
                    fmt(r.f1.get(a).copied(), 3)
                );
            }
            s += &format!(
                " {} | {} | {} |\n",
                fmt(r.battery_cost, 3),
                fmt(r.remaining_pct, 2),
                fmt(r.compensated_cost, 3)
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "policy",
            "lambda",
            "runs",
            "appliance",
            "precision",
            "recall",
            "f1",
            "battery_cost",
            "remaining_pct",
            "compensated_cost",
        ])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.rows {
            for (app, f1) in &r.f1 {
                w.write_record([
                    r.policy.clone(),
                    opt(r.lambda),
                    r.runs.to_string(),
                    app.clone(),
                    r.precision[app].to_string(),
                    r.recall[app].to_string(),
                    f1.to_string(),
                    opt(r.battery_cost),
                    opt(r.remaining_pct),
                    opt(r.compensated_cost),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Collects every `results.json` below `output` and writes `report.md` and
/// `report.csv` there.
pub fn cmd_report(output: &Path) -> Result<Report> {
    let mut paths = Vec::new();
    find_results(output, &mut paths)?;
    if paths.is_empty() {
        return Err(Error::Data(format!("no results.json under {}", output.display())));
    }
    let results = paths
        .iter()
        .map(|p| EvaluationResults::load(p))
        .collect::<Result<Vec<_>>>()?;
    let report = Report::from_results(&results);
    write_atomic(&output.join("report.md"), report.to_markdown().as_bytes())?;
    report.write_csv(&output.join("report.csv"))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        ExperimentConfig::preset(Profile::Desk).validate().unwrap();
        let paper = ExperimentConfig::preset(Profile::Paper);
        paper.validate().unwrap();
        assert_eq!(paper.train.episodes, 1500);
        assert_eq!(paper.nilm.train.iterations, 100_000);
    }

    #[test]
    fn overlay_keeps_unset_keys() {
        let cfg = ExperimentConfig::from_toml_str("seed = 4\n[train]\nepisodes = 7\n", None).unwrap();
        assert_eq!(cfg.train.episodes, 7);
        assert_eq!(cfg.train.gamma, 0.99);
        assert_eq!(cfg.train.seed, 4);
        assert_eq!(cfg.synthetic.seed, 4);
        assert_eq!(cfg.profile, Profile::Desk);
    }

    #[test]
    fn profile_flag_beats_file() {
        let cfg = ExperimentConfig::from_toml_str("profile = \"desk\"", Some(Profile::Paper)).unwrap();
        assert_eq!(cfg.profile, Profile::Paper);
        assert_eq!(cfg.train.episodes, 1500);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ExperimentConfig::from_toml_str("[battery]\ncapacity = 3\n", None).is_err());
        assert!(ExperimentConfig::from_toml_str("profile = \"huge\"", None).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::preset(Profile::Desk);
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml().unwrap(), None).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn validation_catches_sub_config_errors() {
        let mut cfg = ExperimentConfig::preset(Profile::Desk);
        cfg.lambdas.push(1.5);
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::preset(Profile::Desk);
        cfg.battery.b_initial = 9.0;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::preset(Profile::Desk);
        cfg.action_levels = 20;
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::preset(Profile::Desk);
        cfg.appliances.push("fridge".into());
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("fridge"));
    }

    #[test]
    fn hash_ignores_paths_only() {
        let a = ExperimentConfig::preset(Profile::Desk);
        let mut b = a.clone();
        b.paths.output = "/elsewhere".into();
        assert_eq!(a.hash(), b.hash());
        b.apply_seed(9);
        assert_ne!(a.hash(), b.hash());
    }

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }
}
