//! Writes the planted synthetic benchmark as pipeline inputs.
//!
//! ```text
//! cargo run --example make_fixture -- crates/core/fixtures/synthetic
//! ```

use std::path::PathBuf;

use hmc_core::io::write_text;
use hmc_core::synthetic::{planted_benchmark, PlantedConfig};

const CONFIG: &str = r#"[input]
edges = "edges.tsv"
annotations = "annotations.tsv"
hierarchy = "hierarchy.tsv"

[classes]
min_size = 5
max_size = 300

[cv]
folds = 5

[walk]
walk_length = 20
walks_per_node = 5

[embedding]
dimension = 16
epochs = 2

[classifier]
learning_rates = [0.05, 0.1]
l2_strengths = [0.0, 0.1]
epochs = [30]

[run]
seed = 42
output = "out"
baseline = true
"#;

fn main() -> hmc_core::error::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map_or_else(|| PathBuf::from("crates/core/fixtures/synthetic"), PathBuf::from);
    let inst = planted_benchmark(&PlantedConfig::default())?;
    write_text(&dir.join("edges.tsv"), &inst.edges_tsv())?;
    write_text(&dir.join("hierarchy.tsv"), &inst.hierarchy_tsv())?;
    write_text(&dir.join("annotations.tsv"), &inst.annotations_tsv())?;
    write_text(&dir.join("hmc.toml"), CONFIG)?;
    println!(
        "{} nodes, {} edges, {} classes -> {}",
        inst.net.node_count(),
        inst.net.edge_count(),
        inst.hierarchy()?.len(),
        dir.display()
    );
    Ok(())
}
