//! Runs every pipeline stage on the bundled synthetic fixture and prints the
//! per-class evaluation.
//!
//! ```text
//! cargo run --release --example end_to_end
//! ```

use hmc_core::config::RunConfig;
use hmc_core::pipeline::{Pipeline, STAGES};

fn main() -> hmc_core::error::Result<()> {
    let fixture = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/synthetic/hmc.toml");
    let mut cfg = RunConfig::load(&fixture)?;
    let out = tempfile::tempdir().map_err(|e| hmc_core::error::Error::io(std::env::temp_dir(), e))?;
    cfg.run.output = out.path().to_path_buf();
    let pipeline = Pipeline::new(cfg)?;
    for stage in STAGES {
        let t = std::time::Instant::now();
        pipeline.run_stage(stage)?;
        println!("{stage:<10} {:>8.3}s", t.elapsed().as_secs_f64());
    }
    let report = pipeline.eval()?;
    println!("class\tf1\ttpr\ttnr\tap\tauc");
    for sub in &report.subhierarchies {
        for c in &sub.classes {
            println!(
                "{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
                c.class, c.f1, c.tpr, c.tnr, c.average_precision, c.roc_auc
            );
        }
    }
    Ok(())
}
