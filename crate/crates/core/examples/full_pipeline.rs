//! The whole experiment for one seed: synthetic data, attackers, the no-op
//! baseline and one defended run per λ, then the summary table.
//!
//! cargo run --release --example full_pipeline -- [episodes] [out_dir]

use std::path::PathBuf;

use loadshape::experiment::{cmd_report, run_pipeline, ExperimentConfig, Profile};

fn main() -> loadshape::Result<()> {
    let mut args = std::env::args().skip(1);
    let episodes: usize = args.next().map_or(10, |a| a.parse().expect("episodes"));
    let out = args
        .next()
        .map_or_else(|| std::env::temp_dir().join("loadshape_pipeline"), PathBuf::from);

    let mut cfg = ExperimentConfig::preset(Profile::Desk);
    cfg.paths.output = out.clone();
    cfg.train.episodes = episodes;
    cfg.lambdas = vec![0.0, 1.0];
    cfg.validate()?;

    for r in run_pipeline(&cfg)? {
        let f1: Vec<String> = r.masked.iter().map(|(a, c)| format!("{a} F1 {:.3}", c.f1)).collect();
        println!("{:7} lambda {:?}: {}", r.policy, r.lambda, f1.join(", "));
    }
    print!("\n{}", cmd_report(&out)?.to_markdown());
    println!("artifacts in {}", out.display());
    Ok(())
}
