//! Parses an OBO fragment and closes a few annotations under the true-path
//! rule.
//!
//! ```text
//! cargo run --example obo_closure
//! ```

use hmc_core::graph::{load_network, EdgeRecord};
use hmc_core::hierarchy::{close_annotations, AnnotationMap};
use hmc_core::obo::parse_obo_lite;

const OBO: &str = "format-version: 1.2

[Term]
id: GO:0008150
name: biological_process

[Term]
id: GO:0009987
name: cellular process
is_a: GO:0008150 ! biological_process

[Term]
id: GO:0008152
name: metabolic process
is_a: GO:0008150 ! biological_process

[Term]
id: GO:0044237
name: cellular metabolic process
is_a: GO:0009987 ! cellular process
is_a: GO:0008152 ! metabolic process

[Term]
id: GO:0000004
is_obsolete: true
";

fn main() -> hmc_core::error::Result<()> {
    let h = parse_obo_lite(OBO)?;
    println!("{} classes, {} is_a edges", h.len(), h.edge_count());
    let net = load_network([EdgeRecord::new("geneA", "geneB", 1.0)])?;
    let (raw, _) = AnnotationMap::from_pairs(&net, &h, &[("geneA", "GO:0044237"), ("geneB", "GO:0009987")])?;
    let closed = close_annotations(&raw, &h)?;
    for v in 0..net.node_count() {
        let names: Vec<&str> = closed.classes_of(v).iter().map(|&c| h.name(c)).collect();
        println!("{}\t{}", net.name(v), names.join(","));
    }
    Ok(())
}
