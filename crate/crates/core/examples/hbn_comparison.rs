//! Engine versus the HBN-style baseline on the planted benchmark.
//!
//! ```text
//! cargo run --release --example hbn_comparison -- [p_in] [p_out] [hide] [seed]
//! ```

use hmc_core::config::RunConfig;
use hmc_core::io::write_text;
use hmc_core::pipeline::Pipeline;
use hmc_core::synthetic::{planted_benchmark, PlantedConfig};

fn main() -> hmc_core::error::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: f64| args.get(i).and_then(|s| s.parse().ok()).unwrap_or(default);
    let defaults = PlantedConfig::default();
    let planted = PlantedConfig {
        p_in: arg(0, defaults.p_in),
        p_out: arg(1, defaults.p_out),
        hide: arg(2, defaults.hide),
        seed: arg(3, defaults.seed as f64) as u64,
        ..defaults
    };
    let inst = planted_benchmark(&planted)?;
    let dir = tempfile::tempdir().map_err(|e| hmc_core::error::Error::io(std::env::temp_dir(), e))?;
    let p = dir.path();
    write_text(&p.join("edges.tsv"), &inst.edges_tsv())?;
    write_text(&p.join("hierarchy.tsv"), &inst.hierarchy_tsv())?;
    write_text(&p.join("annotations.tsv"), &inst.annotations_tsv())?;

    let mut cfg = RunConfig::from_toml(
        "[input]\nedges = \"edges.tsv\"\nannotations = \"annotations.tsv\"\nhierarchy = \"hierarchy.tsv\"\n",
    )?;
    cfg.resolve_paths(p);
    cfg.run.seed = planted.seed;
    cfg.run.workers = 1;
    cfg.run.baseline = true;

    let start = std::time::Instant::now();
    Pipeline::new(cfg)?.run()?;
    println!("{:?} in {:.1}s", planted, start.elapsed().as_secs_f64());
    print!("{}", std::fs::read_to_string(p.join("out/baseline/comparison.tsv")).unwrap_or_default());
    print!("{}", std::fs::read_to_string(p.join("out/baseline/timing.tsv")).unwrap_or_default());
    Ok(())
}
