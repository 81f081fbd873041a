//! Stratified folds and SMOTE on an imbalanced toy set.
//!
//! ```text
//! cargo run --example smote_oversampling
//! ```

use hmc_core::learn::matrix;
use hmc_core::resample::{oversample, stratified_kfold, Provenance, SmoteConfig};

fn main() -> hmc_core::error::Result<()> {
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 8) as f64, (i / 8) as f64]).collect();
    let y: Vec<bool> = (0..40).map(|i| i % 8 == 0).collect();

    let folds = stratified_kfold(&y, 5, 3)?;
    for f in 0..folds.k {
        let test = folds.test_rows(f);
        let pos = test.iter().filter(|&&i| y[i]).count();
        println!("fold {f}: {} rows, {pos} positive", test.len());
    }

    let aug = oversample(matrix(&rows).view(), &y, &SmoteConfig::default())?;
    let synthetic = aug.provenance.iter().filter(|p| matches!(p, Provenance::Synthetic)).count();
    println!(
        "after SMOTE: {} positive, {} negative, {synthetic} synthetic",
        aug.y.iter().filter(|&&v| v).count(),
        aug.y.iter().filter(|&&v| !v).count()
    );
    for i in aug.x.nrows() - 3..aug.x.nrows() {
        println!("  ({:.2}, {:.2})", aug.x[[i, 0]], aug.x[[i, 1]]);
    }
    Ok(())
}
