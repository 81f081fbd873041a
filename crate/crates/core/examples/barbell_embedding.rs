//! node2vec embeddings of a barbell graph; nodes of the same clique end up
//! closer.
//!
//! ```text
//! cargo run --release --example barbell_embedding -- [p] [q]
//! ```

use hmc_core::embed::{embed_network, EmbeddingConfig};
use hmc_core::graph::{load_network, EdgeRecord};

fn main() -> hmc_core::error::Result<()> {
    let args: Vec<f64> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut edges = Vec::new();
    for side in ["a", "b"] {
        for i in 0..6 {
            for j in i + 1..6 {
                edges.push(EdgeRecord::new(format!("{side}{i}"), format!("{side}{j}"), 1.0));
            }
        }
    }
    edges.push(EdgeRecord::new("a0", "b0", 1.0));
    let net = load_network(edges)?;

    let mut cfg = EmbeddingConfig::default();
    cfg.walk.p = args.first().copied().unwrap_or(1.0);
    cfg.walk.q = args.get(1).copied().unwrap_or(1.0);
    let emb = embed_network(&net, &cfg)?;

    let a1 = net.index_of("a1").unwrap();
    for other in ["a2", "a0", "b0", "b3"] {
        let v = net.index_of(other).unwrap();
        println!("cos(a1, {other}) = {:.3}", emb.cosine(a1, v));
    }
    Ok(())
}
