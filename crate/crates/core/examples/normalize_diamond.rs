//! Normalizes the five-class example DAG and prints its edge weights.
//!
//! ```text
//! cargo run --example normalize_diamond
//! ```

use hmc_core::graph::read_network;
use hmc_core::hierarchy::{
    close_annotations, edge_weight, normalize, parse_annotations_tsv, read_hierarchy, AnnotationMap, ClassCensus,
};
use hmc_core::io::read_text;

fn main() -> hmc_core::error::Result<()> {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/diamond");
    let h = read_hierarchy(&dir.join("hierarchy.tsv"))?;
    let net = read_network(&dir.join("edges.tsv"), None)?;
    let pairs = parse_annotations_tsv(&read_text(&dir.join("annotations.tsv"))?)?;
    let (raw, _) = AnnotationMap::from_pairs(&net, &h, &pairs)?;
    let closed = close_annotations(&raw, &h)?;
    let census = ClassCensus::new(&h, &closed);

    println!("parent\tchild\tweight");
    for (p, c) in h.edges() {
        println!("{}\t{}\t{}", h.name(p), h.name(c), edge_weight(&census, p, c)?);
    }
    let norm = normalize(&h, &census)?;
    for (p, c) in &norm.removed {
        println!("removed {} -> {}", h.name(*p), h.name(*c));
    }
    Ok(())
}
