use std::fs;
use std::path::Path;

use loadshape::data::{load_csv, resample_1min, Household};
use loadshape::env::{no_op_policy, run_episode, ConstantPolicy, EnvConfig};
use loadshape::experiment::{self, DataSource, ExperimentConfig, Profile, RunManifest};
use loadshape::metrics::{export_figures, read_disaggregation, read_load_curves, CostReport, Disaggregation};
use loadshape::nilm::attack;
use loadshape::{Error, RewardConfig, RewardEngine};

fn tiny(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::preset(Profile::Desk);
    cfg.paths.output = out.to_path_buf();
    cfg.dataset.synthetic_days = 4;
    cfg.dataset.train_days = 3;
    cfg.train.episodes = 2;
    cfg.train.learning_starts = 500;
    cfg.nilm.train.iterations = 300;
    cfg.lambdas = vec![1.0];
    cfg.seeds = vec![3];
    cfg.apply_seed(3);
    cfg
}

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

#[test]
fn fixture_channel_loads_and_resamples() {
    let s = load_csv(&fixture("kettle_6s.dat"), "kettle").unwrap();
    assert!(s.power.iter().all(|&p| p >= 0.0));
    let r = resample_1min(&s, 5).unwrap();
    assert!(r.timestamps.windows(2).all(|w| w[1] - w[0] == 60));
    assert!(r.power.iter().any(|&p| p > 2.0));
}

#[test]
fn gen_synthetic_writes_one_file_per_day() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    let files = experiment::cmd_gen_synthetic(&cfg).unwrap();
    assert_eq!(files.len(), 4);
    for f in &files {
        let text = fs::read_to_string(f).unwrap();
        assert!(text.starts_with("timestamp,aggregate_w,kettle_w,toaster_w\n"));
        assert_eq!(text.lines().count(), 1441);
    }
    let first: Vec<String> = files.iter().map(|f| fs::read_to_string(f).unwrap()).collect();
    experiment::cmd_gen_synthetic(&cfg).unwrap();
    let again: Vec<String> = files.iter().map(|f| fs::read_to_string(f).unwrap()).collect();
    assert_eq!(first, again);
    let manifest = RunManifest::load(dir.path()).unwrap().unwrap();
    assert_eq!(manifest.entries.len(), 2);
    assert_eq!(manifest.config_hash, cfg.hash());
}

#[test]
fn train_nilm_rejects_missing_appliance() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = tiny(dir.path());
    experiment::cmd_gen_synthetic(&cfg).unwrap();
    cfg.dataset.source = DataSource::Files;
    cfg.appliances.push("microwave".into());
    let err = experiment::cmd_train_nilm(&cfg).unwrap_err();
    assert!(err.to_string().contains("microwave"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn train_nilm_without_data_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = experiment::cmd_train_nilm(&tiny(dir.path())).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn pipeline_end_to_end_is_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = experiment::run_pipeline(&tiny(a.path())).unwrap();
    let rb = experiment::run_pipeline(&tiny(b.path())).unwrap();
    assert_eq!(ra, rb);
    for sub in ["eval/original/results.json", "eval/lambda_1/results.json"] {
        assert_eq!(fs::read(a.path().join(sub)).unwrap(), fs::read(b.path().join(sub)).unwrap(), "{sub}");
    }
    for sub in ["nilm/kettle.json", "agent/lambda_1/agent.json", "agent/lambda_1/train_log.csv"] {
        assert_eq!(fs::read(a.path().join(sub)).unwrap(), fs::read(b.path().join(sub)).unwrap(), "{sub}");
    }

    let baseline = &ra[0];
    assert_eq!(baseline.policy, "no-op");
    assert!(baseline.cost.is_none());
    assert_eq!(baseline.masked, baseline.unmasked);
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(a.path().join("eval/original/results.json")).unwrap()).unwrap();
    assert!(json["cost"].is_null());
    assert!(json["masked"]["kettle"]["f1"].is_number());

    let log = fs::read_to_string(a.path().join("agent/lambda_1/train_log.csv")).unwrap();
    assert_eq!(log.lines().count(), 1 + 2);
    let curves = read_load_curves(&a.path().join("eval/lambda_1/load_curves.csv")).unwrap();
    assert_eq!(curves.len(), 1440);

    let report = experiment::cmd_report(a.path()).unwrap();
    assert_eq!(report.rows.len(), 2);
    assert!(a.path().join("report.md").exists());
}

#[test]
fn evaluate_rejects_mismatched_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    experiment::cmd_gen_synthetic(&cfg).unwrap();
    experiment::cmd_train_nilm(&cfg).unwrap();
    experiment::cmd_train_agent(&cfg, 1.0).unwrap();
    let mut other = cfg.clone();
    other.action_levels = 11;
    let err = experiment::cmd_evaluate(&other, Some(1.0)).unwrap_err();
    assert!(matches!(err, Error::Mismatch(_)), "{err}");
    assert_eq!(err.exit_code(), 2);
    let mut other = cfg.clone();
    other.battery.b_max = 3.0;
    other.battery.b_initial = 3.0;
    assert!(matches!(experiment::cmd_evaluate(&other, Some(1.0)), Err(Error::Mismatch(_))));
}

#[test]
fn figures_round_trip_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    experiment::cmd_gen_synthetic(&cfg).unwrap();
    experiment::cmd_train_nilm(&cfg).unwrap();
    let h = Household::read_dir(&cfg.data_dir()).unwrap();
    let day = h.make_day(*h.days().last().unwrap()).unwrap();
    let env = cfg.env_config().unwrap();
    let mut engine = RewardEngine::new(RewardConfig::default(), env.battery.clone()).unwrap();
    let trace = run_episode(&mut ConstantPolicy(-1.0), &day.demand, &env, &mut engine).unwrap();
    let model = loadshape::nilm::NilmModel::load(&experiment::nilm_checkpoint_path(&cfg, "kettle")).unwrap();
    let out = attack(&model, &trace.masked()).unwrap();
    let figs = dir.path().join("figs");
    export_figures(
        &figs,
        &trace,
        &[Disaggregation {
            appliance: "kettle".into(),
            true_kw: day.appliances["kettle"].clone(),
            attack: out.clone(),
        }],
    )
    .unwrap();
    let header = fs::read_to_string(figs.join("load_curves.csv")).unwrap();
    assert!(header.starts_with("minute,demand_kw,masked_kw\n"));
    let curves = read_load_curves(&figs.join("load_curves.csv")).unwrap();
    assert_eq!(curves.len(), 1440);
    for (row, tr) in curves.iter().zip(&trace.rows) {
        assert_eq!(row.minute, tr.minute);
        assert_eq!(row.demand_kw.to_bits(), tr.demand.to_bits());
        assert_eq!(row.masked_kw.to_bits(), tr.masked_load.to_bits());
    }
    let disagg = read_disaggregation(&figs.join("disagg_kettle.csv")).unwrap();
    assert_eq!(disagg.len(), 1440);
    for (i, row) in disagg.iter().enumerate() {
        assert_eq!(row.predicted_kw.to_bits(), out.predicted_kw[i].to_bits());
        assert_eq!(row.predicted_on == 1, out.predicted_on[i]);
    }
    let head = fs::read_to_string(figs.join("disagg_kettle.csv")).unwrap();
    assert!(head.starts_with("minute,true_kw,predicted_kw,predicted_on\n"));
}

#[test]
fn cost_report_identities() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    experiment::cmd_gen_synthetic(&cfg).unwrap();
    let h = Household::read_dir(&cfg.data_dir()).unwrap();
    let day = h.make_day(h.days()[0]).unwrap();
    let env: EnvConfig = cfg.env_config().unwrap();
    let mut engine = RewardEngine::new(RewardConfig::default(), env.battery.clone()).unwrap();
    let trace = run_episode(&mut ConstantPolicy(-0.5), &day.demand, &env, &mut engine).unwrap();
    let c = CostReport::from_trace(&trace, &env.battery, &env.tariff).unwrap();
    let via_actions: f64 = trace
        .rows
        .iter()
        .map(|r| r.applied_action * env.battery.dt_hours * env.battery.eta * r.price)
        .sum();
    assert!((c.battery_cost - via_actions).abs() <= 1e-9);
    let expect = c.battery_cost + (env.battery.b_max - c.final_battery_kwh) * env.tariff.peak_price;
    assert!((c.compensated_cost - expect).abs() <= 1e-12);

    let mut engine = RewardEngine::new(RewardConfig::default(), env.battery.clone()).unwrap();
    let idle = run_episode(&mut no_op_policy(), &day.demand, &env, &mut engine).unwrap();
    let c = CostReport::from_trace(&idle, &env.battery, &env.tariff).unwrap();
    assert_eq!(c.compensated_cost, c.battery_cost);
    assert_eq!(c.remaining_pct, 100.0);
    assert!((c.masked_bill - c.original_bill).abs() <= 1e-12);
}

#[test]
fn leak_summary_of_no_op_equals_attack_on_original() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny(dir.path());
    experiment::cmd_gen_synthetic(&cfg).unwrap();
    experiment::cmd_train_nilm(&cfg).unwrap();
    let h = Household::read_dir(&cfg.data_dir()).unwrap();
    let day = h.make_day(*h.days().last().unwrap()).unwrap();
    let env = cfg.env_config().unwrap();
    let model = loadshape::nilm::NilmModel::load(&experiment::nilm_checkpoint_path(&cfg, "kettle")).unwrap();
    let mut engine = RewardEngine::new(RewardConfig::default(), env.battery.clone()).unwrap();
    let trace = run_episode(&mut no_op_policy(), &day.demand, &env, &mut engine).unwrap();
    let summary = loadshape::metrics::privacy_leak_summary(&trace, std::slice::from_ref(&model), &day.truth).unwrap();
    let direct = attack(&model, &day.demand).unwrap();
    let expect = loadshape::metrics::ClassificationReport::from_labels(&day.truth["kettle"], &direct.predicted_on).unwrap();
    assert_eq!(summary["kettle"], expect);
    let again = loadshape::metrics::privacy_leak_summary(&trace, &[model], &day.truth).unwrap();
    assert_eq!(summary, again);
}

#[test]
fn config_file_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.toml");
    fs::write(&path, "profile = \"desk\"\nseed = 12\nlambdas = [0.0, 1.0]\n[battery]\nb_max = 2.0\nb_initial = 2.0\n").unwrap();
    let cfg = ExperimentConfig::load(Some(&path), None).unwrap();
    assert_eq!(cfg.seed, 12);
    assert_eq!(cfg.lambdas, vec![0.0, 1.0]);
    assert_eq!(cfg.battery.b_max, 2.0);
    assert_eq!(cfg.battery.e_max, 5.0);
    cfg.validate().unwrap();
}
