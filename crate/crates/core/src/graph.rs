//! The undirected weighted network and per-node topological features.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hierarchy::{AnnotationMap, ClassId};

/// One line of an edge list.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeRecord {
    pub a: String,
    pub b: String,
    pub weight: f64,
    /// 1-based source line, used in error messages.
    pub line: usize,
}

impl EdgeRecord {
    pub fn new(a: impl Into<String>, b: impl Into<String>, weight: f64) -> Self {
        EdgeRecord {
            a: a.into(),
            b: b.into(),
            weight,
            line: 0,
        }
    }
}

/// Undirected weighted graph with dense node indices.
///
/// Nodes are indexed in first-appearance order. Adjacency lists are sorted by
/// neighbor index, which keeps every traversal deterministic.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    names: Vec<String>,
    index: HashMap<String, usize>,
    adjacency: Vec<Vec<(usize, f64)>>,
    edge_count: usize,
}

impl Network {
    pub fn node_count(&self) -> usize {
        self.names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn name(&self, node: usize) -> &str {
        &self.names[node]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    /// Neighbors of `node` with edge weights, ascending by index.
    pub fn neighbors(&self, node: usize) -> &[(usize, f64)] {
        &self.adjacency[node]
    }

    pub fn neighbor_ids(&self, node: usize) -> impl Iterator<Item = usize> + '_ {
        self.adjacency[node].iter().map(|&(u, _)| u)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a]
            .binary_search_by_key(&b, |&(u, _)| u)
            .is_ok()
    }

    pub fn weight(&self, a: usize, b: usize) -> Option<f64> {
        let adj = &self.adjacency[a];
        adj.binary_search_by_key(&b, |&(u, _)| u)
            .ok()
            .map(|i| adj[i].1)
    }

    /// Each undirected edge once, as `(low, high, weight)`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(a, adj)| {
            adj.iter()
                .filter(move |&&(b, _)| a < b)
                .map(move |&(b, w)| (a, b, w))
        })
    }

    /// The subgraph induced by `nodes`, which keeps the given order as its
    /// node indexing.
    pub fn induced_subgraph(&self, nodes: &[usize]) -> Network {
        let mut local = vec![usize::MAX; self.node_count()];
        for (i, &v) in nodes.iter().enumerate() {
            local[v] = i;
        }
        let mut edge_count = 0;
        let adjacency: Vec<Vec<(usize, f64)>> = nodes
            .iter()
            .map(|&v| {
                let mut adj: Vec<(usize, f64)> = self.adjacency[v]
                    .iter()
                    .filter(|&&(u, _)| local[u] != usize::MAX)
                    .map(|&(u, w)| (local[u], w))
                    .collect();
                adj.sort_by_key(|&(u, _)| u);
                edge_count += adj.len();
                adj
            })
            .collect();
        let names: Vec<String> = nodes.iter().map(|&v| self.names[v].clone()).collect();
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        Network {
            names,
            index,
            adjacency,
            edge_count: edge_count / 2,
        }
    }

    /// Breadth-first hop distances from `source`; `usize::MAX` when unreachable.
    pub fn bfs_distances(&self, source: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.node_count()];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            for u in self.neighbor_ids(v) {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        dist
    }
}

/// Builds a network from edge records.
pub fn load_network(records: impl IntoIterator<Item = EdgeRecord>) -> Result<Network> {
    load_network_with_nodes(records, std::iter::empty::<String>())
}

/// Like [`load_network`], additionally declaring nodes (possibly isolated)
/// that appear after the edge endpoints in index order.
pub fn load_network_with_nodes(
    records: impl IntoIterator<Item = EdgeRecord>,
    nodes: impl IntoIterator<Item = String>,
) -> Result<Network> {
    let mut names: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut adjacency: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut seen: HashMap<(usize, usize), f64> = HashMap::new();

    let mut intern = |name: &str, names: &mut Vec<String>, adjacency: &mut Vec<Vec<(usize, f64)>>| {
        *index.entry(name.to_string()).or_insert_with(|| {
            names.push(name.to_string());
            adjacency.push(Vec::new());
            names.len() - 1
        })
    };

    let mut any = false;
    for rec in records {
        any = true;
        if rec.a == rec.b {
            return Err(Error::SelfLoop {
                line: rec.line,
                node: rec.a,
            });
        }
        if !(rec.weight >= 0.0) || !rec.weight.is_finite() {
            return Err(Error::NegativeWeight {
                line: rec.line,
                weight: rec.weight,
            });
        }
        let a = intern(&rec.a, &mut names, &mut adjacency);
        let b = intern(&rec.b, &mut names, &mut adjacency);
        let key = (a.min(b), a.max(b));
        if let Some(&w) = seen.get(&key) {
            return Err(Error::DuplicateEdge {
                line: rec.line,
                a: rec.a,
                b: rec.b,
                conflicting: w != rec.weight,
            });
        }
        seen.insert(key, rec.weight);
        adjacency[a].push((b, rec.weight));
        adjacency[b].push((a, rec.weight));
    }
    let mut declared = false;
    for node in nodes {
        declared = true;
        intern(&node, &mut names, &mut adjacency);
    }
    if !any && !declared {
        return Err(Error::Empty("edge list has no records".into()));
    }
    for adj in &mut adjacency {
        adj.sort_by_key(|&(u, _)| u);
    }
    Ok(Network {
        names,
        index,
        adjacency,
        edge_count: seen.len(),
    })
}

/// Parses a tab-separated `node_a<TAB>node_b<TAB>weight` edge list; lines
/// starting with `#` and blank lines are skipped.
pub fn parse_edge_list(text: &str) -> Result<Vec<EdgeRecord>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                "edge list",
                line,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        let weight: f64 = fields[2].trim().parse().map_err(|_| {
            Error::parse("edge list", line, format!("bad weight `{}`", fields[2]))
        })?;
        out.push(EdgeRecord {
            a: fields[0].trim().to_string(),
            b: fields[1].trim().to_string(),
            weight,
            line,
        });
    }
    Ok(out)
}

/// Reads an edge list file and an optional node-list file.
pub fn read_network(edges: &Path, nodes: Option<&Path>) -> Result<Network> {
    let text = std::fs::read_to_string(edges).map_err(|e| Error::io(edges, e))?;
    let records = parse_edge_list(&text)?;
    let node_names = match nodes {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Error::io(path, e))?
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect(),
        None => Vec::new(),
    };
    if records.is_empty() {
        return Err(Error::Empty(format!("{} has no edge records", edges.display())));
    }
    load_network_with_nodes(records, node_names)
}

/// Topological properties of one node, computed on the unweighted skeleton.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeFeatures {
    pub degree: usize,
    pub average_neighbor_degree: f64,
    pub degree_centrality: f64,
    /// Harmonic closeness: sum of reciprocal hop distances over `|V| - 1`.
    pub closeness_centrality: f64,
    /// Largest hop distance within the node's connected component.
    pub eccentricity: usize,
    pub clustering_coefficient: f64,
}

/// Which optional feature columns to emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FeatureOptions {
    pub clustering: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions { clustering: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeFeatureTable {
    pub node_names: Vec<String>,
    pub rows: Vec<NodeFeatures>,
    pub options: FeatureOptions,
}

const BASE_COLUMNS: [&str; 5] = [
    "degree",
    "average_neighbor_degree",
    "degree_centrality",
    "closeness_centrality",
    "eccentricity",
];

impl NodeFeatureTable {
    pub fn column_names(&self) -> Vec<&'static str> {
        let mut cols = BASE_COLUMNS.to_vec();
        if self.options.clustering {
            cols.push("clustering_coefficient");
        }
        cols
    }

    pub fn values(&self, row: usize) -> Vec<f64> {
        let f = &self.rows[row];
        let mut v = vec![
            f.degree as f64,
            f.average_neighbor_degree,
            f.degree_centrality,
            f.closeness_centrality,
            f.eccentricity as f64,
        ];
        if self.options.clustering {
            v.push(f.clustering_coefficient);
        }
        v
    }

    pub fn to_tsv(&self) -> String {
        let mut out = format!("node\t{}\n", self.column_names().join("\t"));
        for (i, name) in self.node_names.iter().enumerate() {
            out.push_str(name);
            for v in self.values(i) {
                out.push('\t');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<NodeFeatureTable> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Empty("feature table".into()))?;
        let cols: Vec<&str> = header.split('\t').skip(1).collect();
        let clustering = match cols.len() {
            5 => false,
            6 => true,
            n => return Err(Error::parse("feature table", 1, format!("{n} columns"))),
        };
        let mut node_names = Vec::new();
        let mut rows = Vec::new();
        for (i, line) in lines {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != cols.len() + 1 {
                return Err(Error::parse("feature table", i + 1, "wrong field count"));
            }
            let num = |j: usize| -> Result<f64> {
                f[j].parse()
                    .map_err(|_| Error::parse("feature table", i + 1, format!("bad value `{}`", f[j])))
            };
            node_names.push(f[0].to_string());
            rows.push(NodeFeatures {
                degree: num(1)? as usize,
                average_neighbor_degree: num(2)?,
                degree_centrality: num(3)?,
                closeness_centrality: num(4)?,
                eccentricity: num(5)? as usize,
                clustering_coefficient: if clustering { num(6)? } else { 0.0 },
            });
        }
        Ok(NodeFeatureTable {
            node_names,
            rows,
            options: FeatureOptions { clustering },
        })
    }
}

fn clustering_coefficient(net: &Network, v: usize) -> f64 {
    let d = net.degree(v);
    if d < 2 {
        return 0.0;
    }
    let nbrs = net.neighbors(v);
    let mut links = 0usize;
    for (i, &(a, _)) in nbrs.iter().enumerate() {
        for &(b, _) in &nbrs[i + 1..] {
            if net.has_edge(a, b) {
                links += 1;
            }
        }
    }
    links as f64 / (d * (d - 1) / 2) as f64
}

/// Computes the per-node feature table. Distances are hop counts; edge
/// weights are not used.
pub fn topological_features(net: &Network, options: FeatureOptions) -> Result<NodeFeatureTable> {
    let n = net.node_count();
    if n == 0 {
        return Err(Error::Empty("network has no nodes".into()));
    }
    let denom = (n.saturating_sub(1)) as f64;
    let rows: Vec<NodeFeatures> = (0..n)
        .into_par_iter()
        .map(|v| {
            let degree = net.degree(v);
            let average_neighbor_degree = if degree == 0 {
                0.0
            } else {
                net.neighbor_ids(v).map(|u| net.degree(u)).sum::<usize>() as f64 / degree as f64
            };
            let dist = net.bfs_distances(v);
            let mut harmonic = 0.0;
            let mut eccentricity = 0;
            for (u, &d) in dist.iter().enumerate() {
                if u == v || d == usize::MAX {
                    continue;
                }
                harmonic += 1.0 / d as f64;
                eccentricity = eccentricity.max(d);
            }
            let (degree_centrality, closeness_centrality) = if n > 1 {
                (degree as f64 / denom, harmonic / denom)
            } else {
                (0.0, 0.0)
            };
            NodeFeatures {
                degree,
                average_neighbor_degree,
                degree_centrality,
                closeness_centrality,
                eccentricity,
                clustering_coefficient: if options.clustering {
                    clustering_coefficient(net, v)
                } else {
                    0.0
                },
            }
        })
        .collect();
    Ok(NodeFeatureTable {
        node_names: net.names().to_vec(),
        rows,
        options,
    })
}

/// Fraction of each node's neighbors that carry `class` in the closed
/// annotation map. Nodes without neighbors get 0.
pub fn neighborhood_class_ratio(
    net: &Network,
    closed: &AnnotationMap,
    class: ClassId,
) -> Result<Vec<f64>> {
    if class.index() >= closed.class_count() {
        return Err(Error::UnknownClass(class.to_string()));
    }
    if closed.node_count() != net.node_count() {
        return Err(Error::Shape(format!(
            "annotation map covers {} nodes, network has {}",
            closed.node_count(),
            net.node_count()
        )));
    }
    Ok((0..net.node_count())
        .map(|v| {
            let d = net.degree(v);
            if d == 0 {
                0.0
            } else {
                let hits = net.neighbor_ids(v).filter(|&u| closed.has(u, class)).count();
                hits as f64 / d as f64
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn net(edges: &[(&str, &str)]) -> Network {
        load_network(edges.iter().map(|&(a, b)| EdgeRecord::new(a, b, 1.0))).unwrap()
    }

    #[test]
    fn minimal_graph() {
        let g = net(&[("a", "b")]);
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.index_of("b"), Some(1));
    }

    #[test]
    fn rejects_duplicates_self_loops_and_negative_weights() {
        let dup = load_network(vec![EdgeRecord::new("a", "b", 1.0), EdgeRecord::new("b", "a", 1.0)]);
        assert!(matches!(dup, Err(Error::DuplicateEdge { conflicting: false, .. })));
        let conflict = load_network(vec![EdgeRecord::new("a", "b", 1.0), EdgeRecord::new("a", "b", 2.0)]);
        assert!(matches!(conflict, Err(Error::DuplicateEdge { conflicting: true, .. })));

        let text = "# comment\na\tb\t0.5\nc\tc\t1\n";
        let recs = parse_edge_list(text).unwrap();
        match load_network(recs) {
            Err(Error::SelfLoop { line, node }) => {
                assert_eq!(line, 3);
                assert_eq!(node, "c");
            }
            other => panic!("unexpected {other:?}"),
        }
        let neg = load_network(vec![EdgeRecord::new("a", "b", -0.1)]);
        assert!(matches!(neg, Err(Error::NegativeWeight { .. })));
        assert!(matches!(load_network(Vec::new()), Err(Error::Empty(_))));
    }

    #[test]
    fn isolated_nodes_via_node_list() {
        let g = load_network_with_nodes(vec![EdgeRecord::new("a", "b", 1.0)], vec!["z".to_string(), "a".to_string()]).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.degree(2), 0);
    }

    #[test]
    fn path_eccentricity() {
        let g = net(&[("a", "b"), ("b", "c")]);
        let t = topological_features(&g, FeatureOptions::default()).unwrap();
        assert_eq!(t.rows[1].eccentricity, 1);
        assert_eq!(t.rows[0].eccentricity, 2);
        assert_eq!(t.rows[2].eccentricity, 2);
        assert_eq!(t.rows[0].closeness_centrality, (1.0 + 0.5) / 2.0);
    }

    #[test]
    fn triangle_features() {
        let g = net(&[("a", "b"), ("b", "c"), ("a", "c")]);
        let t = topological_features(&g, FeatureOptions::default()).unwrap();
        for row in &t.rows {
            assert_eq!(row.degree, 2);
            assert_eq!(row.average_neighbor_degree, 2.0);
            assert_eq!(row.clustering_coefficient, 1.0);
            assert_eq!(row.degree_centrality, 1.0);
        }
    }

    #[test]
    fn star_average_neighbor_degree() {
        let g = net(&[("c", "l1"), ("c", "l2"), ("c", "l3"), ("c", "l4")]);
        let t = topological_features(&g, FeatureOptions::default()).unwrap();
        assert_eq!(t.rows[0].average_neighbor_degree, 1.0);
        for leaf in 1..5 {
            assert_eq!(t.rows[leaf].average_neighbor_degree, 4.0);
        }
    }

    #[test]
    fn disconnected_components_use_local_eccentricity() {
        let g = net(&[("a", "b"), ("c", "d"), ("d", "e")]);
        let t = topological_features(&g, FeatureOptions { clustering: false }).unwrap();
        assert_eq!(t.rows[0].eccentricity, 1);
        assert_eq!(t.rows[3].eccentricity, 1);
        assert_eq!(t.column_names().len(), 5);
        let back = NodeFeatureTable::from_tsv(&t.to_tsv()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn induced_subgraph_keeps_given_order() {
        let g = net(&[("a", "b"), ("b", "c"), ("c", "d")]);
        let s = g.induced_subgraph(&[2, 1, 3]);
        assert_eq!(s.names(), &["c", "b", "d"]);
        assert_eq!(s.edge_count(), 2);
        assert!(s.has_edge(0, 1));
        assert!(s.has_edge(0, 2));
        assert!(!s.has_edge(1, 2));
    }
}
