//! Synthetic inputs: stochastic block models with community-aligned class
//! hierarchies, and random DAGs.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::graph::{load_network_with_nodes, EdgeRecord, Network};
use crate::hierarchy::Hierarchy;
use crate::seed;

/// An undirected stochastic block model with unit edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SbmConfig {
    pub block_sizes: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

/// Node `i` is named `n{i:04}`; returns the network and each node's block.
pub fn sbm(cfg: &SbmConfig) -> Result<(Network, Vec<usize>)> {
    let blocks: Vec<usize> = cfg
        .block_sizes
        .iter()
        .enumerate()
        .flat_map(|(b, &s)| std::iter::repeat_n(b, s))
        .collect();
    let n = blocks.len();
    let names: Vec<String> = (0..n).map(node_name).collect();
    let mut rng = seed::rng(seed::mix(cfg.seed, &[0x5b]));
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let p = if blocks[i] == blocks[j] { cfg.p_in } else { cfg.p_out };
            if rng.random::<f64>() < p {
                edges.push(EdgeRecord::new(names[i].clone(), names[j].clone(), 1.0));
            }
        }
    }
    let net = load_network_with_nodes(edges, names.iter().cloned())?;
    // load order may differ from generation order
    let by_name: Vec<usize> = (0..n)
        .map(|v| net.name(v)[1..].parse::<usize>().map(|i| blocks[i]).unwrap_or(0))
        .collect();
    Ok((net, by_name))
}

pub fn node_name(i: usize) -> String {
    format!("n{i:04}")
}

/// A network with a class hierarchy and raw annotations, ready for the
/// pipeline.
#[derive(Debug, Clone)]
pub struct Instance {
    pub net: Network,
    pub blocks: Vec<usize>,
    /// `parent -> child` edges.
    pub hierarchy_edges: Vec<(String, String)>,
    /// `(node, class)` raw annotations, most specific class only.
    pub annotations: Vec<(String, String)>,
}

impl Instance {
    pub fn hierarchy(&self) -> Result<Hierarchy> {
        Hierarchy::from_edges(&self.hierarchy_edges, &[])
    }

    pub fn edges_tsv(&self) -> String {
        let mut out = String::new();
        for (a, b, w) in self.net.edges() {
            out.push_str(&format!("{}\t{}\t{w}\n", self.net.name(a), self.net.name(b)));
        }
        out
    }

    pub fn hierarchy_tsv(&self) -> String {
        self.hierarchy_edges.iter().map(|(p, c)| format!("{p}\t{c}\n")).collect()
    }

    pub fn annotations_tsv(&self) -> String {
        self.annotations.iter().map(|(n, c)| format!("{n}\t{c}\n")).collect()
    }
}

/// Parameters of the planted three-level benchmark.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedConfig {
    pub block_size: usize,
    pub p_in: f64,
    pub p_out: f64,
    /// Probability that a node's most specific annotation is replaced by its
    /// parent class, hiding the deeper label.
    pub hide: f64,
    pub seed: u64,
}

impl Default for PlantedConfig {
    fn default() -> Self {
        PlantedConfig {
            block_size: 60,
            p_in: 0.1,
            p_out: 0.02,
            hide: 0.0,
            seed: 7,
        }
    }
}

/// Seven classes over five blocks:
///
/// ```text
/// R (all)
/// └── S (blocks 0-3)
///     ├── A (0, 1)
///     │   ├── A1 (0)
///     │   └── A2 (1)
///     └── B (2, 3)
///         └── B1 (2)
/// ```
///
/// Block 4 carries only `R`. With the default 60-node blocks this is a
/// 300-node graph whose single sub-hierarchy is rooted at `S`.
pub fn planted_benchmark(cfg: &PlantedConfig) -> Result<Instance> {
    let (net, blocks) = sbm(&SbmConfig {
        block_sizes: vec![cfg.block_size; 5],
        p_in: cfg.p_in,
        p_out: cfg.p_out,
        seed: cfg.seed,
    })?;
    let edges = [("R", "S"), ("S", "A"), ("S", "B"), ("A", "A1"), ("A", "A2"), ("B", "B1")];
    let deepest = ["A1", "A2", "B1", "B", "R"];
    let parent_of = |c: &str| edges.iter().find(|e| e.1 == c).map(|e| e.0);
    let mut rng = seed::rng(seed::mix(cfg.seed, &[0xa2]));
    let annotations = (0..net.node_count())
        .map(|v| {
            let mut c = deepest[blocks[v]];
            if rng.random::<f64>() < cfg.hide {
                c = parent_of(c).unwrap_or(c);
            }
            (net.name(v).to_string(), c.to_string())
        })
        .collect();
    Ok(Instance {
        net,
        blocks,
        hierarchy_edges: edges.iter().map(|&(p, c)| (p.into(), c.into())).collect(),
        annotations,
    })
}

/// A small random instance: 3 to 6 blocks, a random tree of block groups
/// under one sub-hierarchy, occasionally a second parent (making the input a
/// DAG), and some hidden labels.
pub fn random_instance(seed: u64) -> Result<Instance> {
    let mut rng = seed::rng(seed::mix(seed, &[0x4a]));
    let m = rng.random_range(3..=6);
    let sizes: Vec<usize> = (0..m).map(|_| rng.random_range(14..=24)).collect();
    let (net, blocks) = sbm(&SbmConfig {
        block_sizes: sizes,
        p_in: rng.random_range(0.2..0.4),
        p_out: rng.random_range(0.01..0.04),
        seed,
    })?;

    // S covers all but possibly the last block
    let covered: Vec<usize> = if rng.random_bool(0.5) { (0..m - 1).collect() } else { (0..m).collect() };
    let mut edges: Vec<(String, String)> = vec![("R".into(), "S".into())];
    let mut deepest = vec!["R".to_string(); m];
    let mut counter = 0;
    grow(&mut rng, "S", &covered, &mut edges, &mut deepest, &mut counter, 0);

    if let Some((_, grandchild)) = edges.iter().find(|(p, _)| p != "R" && p != "S").cloned() {
        if rng.random_bool(0.5) {
            edges.push(("S".into(), grandchild));
        }
    }

    let hide = rng.random_range(0.0..0.2);
    let annotations = (0..net.node_count())
        .map(|v| {
            let mut c = deepest[blocks[v]].clone();
            if rng.random::<f64>() < hide {
                if let Some((p, _)) = edges.iter().find(|(_, ch)| *ch == c) {
                    c = p.clone();
                }
            }
            (net.name(v).to_string(), c)
        })
        .collect();
    Ok(Instance {
        net,
        blocks,
        hierarchy_edges: edges,
        annotations,
    })
}

fn grow(
    rng: &mut ChaCha8Rng,
    class: &str,
    blocks: &[usize],
    edges: &mut Vec<(String, String)>,
    deepest: &mut [String],
    counter: &mut usize,
    depth: usize,
) {
    for &b in blocks {
        deepest[b] = class.to_string();
    }
    if blocks.is_empty() || depth >= 3 || (depth > 0 && rng.random_bool(0.3)) {
        return;
    }
    let mut shuffled = blocks.to_vec();
    shuffled.shuffle(rng);
    let parts = if shuffled.len() >= 2 { rng.random_range(1..=shuffled.len().min(3)) } else { 1 };
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); parts];
    for (i, b) in shuffled.into_iter().enumerate() {
        groups[i % parts].push(b);
    }
    for g in groups {
        // a child may leave some of its blocks to the parent only
        let take = if g.len() > 1 && rng.random_bool(0.3) { g.len() - 1 } else { g.len() };
        *counter += 1;
        let child = format!("C{}", *counter);
        edges.push((class.to_string(), child.clone()));
        let mut sorted = g[..take].to_vec();
        sorted.sort_unstable();
        grow(rng, &child, &sorted, edges, deepest, counter, depth + 1);
    }
}

/// A random DAG over classes `c0..c{n-1}` with exactly `edges` edges, each
/// pointing from a lower to a higher index.
pub fn random_dag(n: usize, edges: usize, seed: u64) -> Vec<(String, String)> {
    let max = n * n.saturating_sub(1) / 2;
    let target = edges.min(max);
    let mut rng = seed::rng(seed::mix(seed, &[0xda9]));
    let mut set = BTreeSet::new();
    while set.len() < target {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            set.insert((a.min(b), a.max(b)));
        }
    }
    let mut out: Vec<(usize, usize)> = set.into_iter().collect();
    out.shuffle(&mut rng);
    out.into_iter().map(|(a, b)| (format!("c{a}"), format!("c{b}"))).collect()
}
