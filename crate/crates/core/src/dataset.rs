//! Per-class training matrices.
//!
//! Column layout, identical for every class of a sub-hierarchy:
//! topological features (standardized), embedding dimensions (raw),
//! `ratio_self`, `ratio_parent`, `parent_prediction`.

use ndarray::Array2;

use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::graph::{neighborhood_class_ratio, Network, NodeFeatureTable};
use crate::hierarchy::{AnnotationMap, ClassId, SubHierarchy, TreeHierarchy};
use crate::learn::Schema;

/// A network with closed annotations, topological features and embeddings
/// all aligned to the network's node order.
#[derive(Debug, Clone)]
pub struct FeatureSpace {
    pub net: Network,
    pub closed: AnnotationMap,
    topo_columns: Vec<&'static str>,
    topo: Array2<f64>,
    embedding: Array2<f64>,
}

impl FeatureSpace {
    /// Aligns feature and embedding tables to `net` by node name.
    pub fn new(
        net: Network,
        closed: AnnotationMap,
        feats: &NodeFeatureTable,
        emb: &EmbeddingMatrix,
    ) -> Result<FeatureSpace> {
        if closed.node_count() != net.node_count() {
            return Err(Error::Shape("annotation map does not match network".into()));
        }
        let n = net.node_count();
        let topo_columns = feats.column_names();
        let feat_index: std::collections::HashMap<&str, usize> = feats
            .node_names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let emb_index: std::collections::HashMap<&str, usize> = emb
            .node_names
            .iter()
            .enumerate()
            .map(|(i, s)| (s.as_str(), i))
            .collect();
        let mut topo = Array2::zeros((n, topo_columns.len()));
        let mut embedding = Array2::zeros((n, emb.dimension()));
        for v in 0..n {
            let name = net.name(v);
            let fi = *feat_index
                .get(name)
                .ok_or_else(|| Error::UnknownNode(format!("{name} (missing from feature table)")))?;
            let ei = *emb_index
                .get(name)
                .ok_or_else(|| Error::UnknownNode(format!("{name} (missing from embeddings)")))?;
            for (j, x) in feats.values(fi).into_iter().enumerate() {
                topo[[v, j]] = x;
            }
            embedding.row_mut(v).assign(&emb.vectors.row(ei));
        }
        Ok(FeatureSpace {
            net,
            closed,
            topo_columns,
            topo,
            embedding,
        })
    }

    /// Feature space over a sub-hierarchy's own subgraph.
    pub fn for_subhierarchy(
        sub: &SubHierarchy,
        closed_global: &AnnotationMap,
        feats: &NodeFeatureTable,
        emb: &EmbeddingMatrix,
    ) -> Result<FeatureSpace> {
        FeatureSpace::new(sub.subgraph.clone(), closed_global.restrict(&sub.node_ids), feats, emb)
    }

    pub fn schema(&self) -> Schema {
        let mut cols: Vec<String> = self.topo_columns.iter().map(|s| s.to_string()).collect();
        cols.extend((0..self.embedding.ncols()).map(|i| format!("emb_{i}")));
        cols.extend(["ratio_self", "ratio_parent", "parent_prediction"].map(String::from));
        Schema::new(cols)
    }
}

/// Mean and standard deviation per topological column.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardization {
    fn fit(topo: &Array2<f64>, rows: &[usize]) -> Standardization {
        let d = topo.ncols();
        let n = rows.len().max(1) as f64;
        let mut means = vec![0.0; d];
        let mut stds = vec![0.0; d];
        for j in 0..d {
            let m = rows.iter().map(|&r| topo[[r, j]]).sum::<f64>() / n;
            let var = rows.iter().map(|&r| (topo[[r, j]] - m).powi(2)).sum::<f64>() / n;
            means[j] = m;
            // constant columns are centered only
            stds[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
        }
        Standardization { means, stds }
    }
}

#[derive(Debug, Clone)]
pub struct ClassDataset {
    pub class: ClassId,
    /// Row order; indices into the feature space's network.
    pub rows: Vec<usize>,
    pub node_names: Vec<String>,
    pub schema: Schema,
    pub x: Array2<f64>,
    /// `class ∈ closed(node)` per row.
    pub labels: Vec<bool>,
    pub standardization: Standardization,
}

impl ClassDataset {
    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|&&y| y).count()
    }

    /// Tab-separated dump: header `node<TAB>columns..<TAB>label`.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("node\t{}\tlabel\n", self.schema.columns.join("\t"));
        for (i, name) in self.node_names.iter().enumerate() {
            out.push_str(name);
            for v in self.x.row(i) {
                out.push('\t');
                out.push_str(&v.to_string());
            }
            out.push_str(if self.labels[i] { "\t1\n" } else { "\t0\n" });
        }
        out
    }
}

/// Builds the dataset of `class` over `rows` of the feature space.
///
/// `parent_predictions` (aligned with `rows`) must be given exactly when the
/// class has a parent in `tree`; the root gets constant 1.0 columns for the
/// parent ratio and parent prediction. Topological columns are standardized
/// with `standardization`, or with statistics fitted on `rows` when `None`.
pub fn build_dataset(
    space: &FeatureSpace,
    rows: &[usize],
    tree: &TreeHierarchy,
    class: ClassId,
    parent_predictions: Option<&[f64]>,
    standardization: Option<&Standardization>,
) -> Result<ClassDataset> {
    if !tree.contains(class) {
        return Err(Error::UnknownClass(tree.name(class).to_string()));
    }
    let parent = tree.parent(class);
    match (parent, parent_predictions) {
        (Some(p), None) => {
            return Err(Error::Config(format!(
                "class {} needs predictions of its parent {}",
                tree.name(class),
                tree.name(p)
            )))
        }
        (None, Some(_)) => {
            return Err(Error::Config(format!(
                "root class {} takes no parent predictions",
                tree.name(class)
            )))
        }
        (_, Some(pp)) if pp.len() != rows.len() => {
            return Err(Error::Shape(format!("{} parent predictions for {} rows", pp.len(), rows.len())))
        }
        _ => {}
    }
    let ratio_self = neighborhood_class_ratio(&space.net, &space.closed, class)?;
    let ratio_parent = match parent {
        Some(p) => Some(neighborhood_class_ratio(&space.net, &space.closed, p)?),
        None => None,
    };
    let stdz = match standardization {
        Some(s) => s.clone(),
        None => Standardization::fit(&space.topo, rows),
    };
    let schema = space.schema();
    let t = space.topo.ncols();
    let e = space.embedding.ncols();
    let mut x = Array2::zeros((rows.len(), schema.columns.len()));
    for (i, &r) in rows.iter().enumerate() {
        for j in 0..t {
            x[[i, j]] = (space.topo[[r, j]] - stdz.means[j]) / stdz.stds[j];
        }
        for j in 0..e {
            x[[i, t + j]] = space.embedding[[r, j]];
        }
        x[[i, t + e]] = ratio_self[r];
        x[[i, t + e + 1]] = ratio_parent.as_ref().map_or(1.0, |rp| rp[r]);
        x[[i, t + e + 2]] = parent_predictions.map_or(1.0, |pp| pp[i]);
    }
    Ok(ClassDataset {
        class,
        rows: rows.to_vec(),
        node_names: rows.iter().map(|&r| space.net.name(r).to_string()).collect(),
        schema,
        x,
        labels: rows.iter().map(|&r| space.closed.has(r, class)).collect(),
        standardization: stdz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embed::EmbeddingMatrix;
    use crate::graph::{load_network, topological_features, EdgeRecord, FeatureOptions};
    use crate::hierarchy::{close_annotations, Hierarchy};

    struct Fixture {
        space: FeatureSpace,
        tree: TreeHierarchy,
        h: Hierarchy,
    }

    fn fixture() -> Fixture {
        // star around `hub` plus a tail
        let net = load_network(
            ["a", "b", "c", "d"]
                .iter()
                .map(|&l| EdgeRecord::new("hub", l, 1.0))
                .chain([EdgeRecord::new("d", "e", 1.0)]),
        )
        .unwrap();
        let h = Hierarchy::from_edges(&[("R", "C")], &[]).unwrap();
        let tree = TreeHierarchy::from_edges(&h, &h.edges()).unwrap();
        let mut sets = vec![vec![h.id("R").unwrap()]; net.node_count()];
        for leaf in ["a", "b", "c", "d"] {
            sets[net.index_of(leaf).unwrap()] = vec![h.id("C").unwrap()];
        }
        let closed = close_annotations(&AnnotationMap::from_sets(sets, h.len()).unwrap(), &h).unwrap();
        let feats = topological_features(&net, FeatureOptions::default()).unwrap();
        let emb = EmbeddingMatrix {
            node_names: net.names().to_vec(),
            vectors: Array2::from_shape_fn((net.node_count(), 2), |(i, j)| (i + j) as f64),
            config_hash: "x".into(),
        };
        let space = FeatureSpace::new(net, closed, &feats, &emb).unwrap();
        Fixture { space, tree, h }
    }

    #[test]
    fn root_uses_constant_parent_columns() {
        let f = fixture();
        let rows: Vec<usize> = (0..f.space.net.node_count()).collect();
        let ds = build_dataset(&f.space, &rows, &f.tree, f.h.id("R").unwrap(), None, None).unwrap();
        let d = ds.schema.columns.len();
        assert_eq!(&ds.schema.columns[d - 3..], ["ratio_self", "ratio_parent", "parent_prediction"]);
        assert!(ds.x.column(d - 1).iter().all(|&v| v == 1.0));
        assert!(ds.x.column(d - 2).iter().all(|&v| v == 1.0));
        assert_eq!(ds.positives(), rows.len());
    }

    #[test]
    fn ratio_and_labels_for_child() {
        let f = fixture();
        let rows: Vec<usize> = (0..f.space.net.node_count()).collect();
        let c = f.h.id("C").unwrap();
        let pp = vec![0.5; rows.len()];
        let ds = build_dataset(&f.space, &rows, &f.tree, c, Some(&pp), None).unwrap();
        let d = ds.schema.columns.len();
        let hub = f.space.net.index_of("hub").unwrap();
        assert_eq!(ds.x[[hub, d - 3]], 1.0);
        assert_eq!(ds.labels, rows.iter().map(|&r| f.space.closed.has(r, c)).collect::<Vec<_>>());
        assert_eq!(ds.positives(), 4);
        // standardized topological columns have zero mean
        let mean: f64 = ds.x.column(0).sum() / rows.len() as f64;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn parent_prediction_contract() {
        let f = fixture();
        let rows = vec![0, 1];
        let c = f.h.id("C").unwrap();
        let r = f.h.id("R").unwrap();
        assert!(build_dataset(&f.space, &rows, &f.tree, c, None, None).is_err());
        assert!(build_dataset(&f.space, &rows, &f.tree, r, Some(&[1.0, 1.0]), None).is_err());
        assert!(build_dataset(&f.space, &rows, &f.tree, c, Some(&[1.0]), None).is_err());
    }

    #[test]
    fn missing_embedding_row_names_node() {
        let f = fixture();
        let feats = topological_features(&f.space.net, FeatureOptions::default()).unwrap();
        let emb = EmbeddingMatrix {
            node_names: vec!["hub".into()],
            vectors: Array2::zeros((1, 2)),
            config_hash: String::new(),
        };
        let err = FeatureSpace::new(f.space.net.clone(), f.space.closed.clone(), &feats, &emb).unwrap_err();
        assert!(err.to_string().contains("missing from embeddings"));
    }
}
