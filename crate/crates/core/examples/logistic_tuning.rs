//! Grid-tunes the built-in logistic learner by cross-validated AUCPR and
//! reports ranking metrics of the winner.
//!
//! ```text
//! cargo run --release --example logistic_tuning
//! ```

use hmc_core::learn::{matrix, tune, HyperGrid, Learner, Logistic, Schema};
use hmc_core::metrics::evaluate;
use hmc_core::resample::stratified_kfold;
use hmc_core::seed;
use rand::Rng;

fn main() -> hmc_core::error::Result<()> {
    let mut rng = seed::rng(21);
    let rows: Vec<Vec<f64>> = (0..300)
        .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(0.0..50.0)])
        .collect();
    // noisy linear concept; the third column is irrelevant and badly scaled
    let y: Vec<bool> = rows
        .iter()
        .map(|r| r[0] - 0.5 * r[1] + rng.random_range(-0.3..0.3) > 0.2)
        .collect();
    let x = matrix(&rows);
    let schema = Schema::new(vec!["x0".into(), "x1".into(), "noise".into()]);
    let folds = stratified_kfold(&y, 5, 1)?;
    let grid = HyperGrid::default_grid();
    let out = tune(&Logistic, x.view(), &y, &schema, &grid, &folds, None)?;
    for (c, s) in grid.candidates.iter().zip(&out.scores) {
        println!("lr {:<5} l2 {:<4} epochs {:<4} aucpr {s:.4}", c.learning_rate, c.l2_strength, c.epochs);
    }
    let fit = Logistic.fit_predict(x.view(), &y, x.view(), &schema, &out.best)?;
    let m = evaluate(&fit.probabilities, &y)?;
    println!(
        "best #{}: threshold {:.3} f1 {:.3} ap {:.3} auc {:.3}",
        out.best_index, m.threshold, m.f1, m.average_precision, m.roc_auc
    );
    Ok(())
}
