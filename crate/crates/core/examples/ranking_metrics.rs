//! Precision-recall sweep, optimum threshold and ranking metrics for a small
//! score vector.
//!
//! ```text
//! cargo run --example ranking_metrics
//! ```

use hmc_core::metrics::{evaluate, pr_curve};

fn main() -> hmc_core::error::Result<()> {
    let scores = [0.95, 0.9, 0.8, 0.8, 0.7, 0.5, 0.4, 0.3, 0.2, 0.1];
    let labels = [true, true, false, true, true, false, true, false, false, false];
    println!("threshold\tprecision\trecall");
    for p in pr_curve(&scores, &labels)? {
        println!("{}\t{:.3}\t{:.3}", p.threshold, p.precision, p.recall);
    }
    let m = evaluate(&scores, &labels)?;
    println!(
        "optimum {} -> f1 {:.3}, tpr {:.3}, tnr {:.3}, ap {:.3}, auc {:.3}",
        m.threshold, m.f1, m.tpr, m.tnr, m.average_precision, m.roc_auc
    );
    Ok(())
}
