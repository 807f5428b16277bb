//! Attack and cost metrics, from raw counts and from published-style
//! precision/recall and cost/battery pairs.
//!
//! cargo run --example metrics_table

use loadshape::metrics::{compensated_cost_from_pct, f1_score, ClassificationReport};

fn main() -> loadshape::Result<()> {
    let truth: Vec<bool> = (0..1440).map(|t| (480..483).contains(&t) || (1100..1103).contains(&t)).collect();
    let predicted: Vec<bool> = (0..1440).map(|t| (481..484).contains(&t) || t == 700).collect();
    let r = ClassificationReport::from_labels(&truth, &predicted)?;
    println!(
        "tp {} fp {} fn {} tn {} -> precision {:.3} recall {:.3} F1 {:.3}",
        r.true_positives, r.false_positives, r.false_negatives, r.true_negatives, r.precision, r.recall, r.f1
    );

    println!("\n precision recall    F1");
    for (p, rc) in [(0.5, 0.895), (0.235, 0.842), (0.02, 0.053)] {
        println!("{p:10.3} {rc:6.3} {:5.3}", f1_score(p, rc));
    }

    println!("\n   cost  left%  compensated");
    for (cost, pct) in [(-0.324, 1.94), (-0.085, 65.7), (0.025, 100.0)] {
        println!("{cost:7.3} {pct:6.2} {:8.3}", compensated_cost_from_pct(cost, pct, 1.5, 0.304));
    }
    Ok(())
}
