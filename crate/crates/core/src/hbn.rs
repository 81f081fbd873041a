//! HBN-style baseline: a Bayes posterior over a binomial model of annotated
//! neighbor counts, multiplied down hierarchy paths.
//!
//! For class `C` with extent `E` (closed annotations):
//!
//! ```text
//! p1 = (Σ_{v∈E} |N(v) ∩ E| + 1) / (Σ_{v∈E} |N(v)| + 2)
//! p0 = (Σ_{v∉E} |N(v) ∩ E| + 1) / (Σ_{v∉E} |N(v)| + 2)
//! π  = |E| / |E(parent)|          (prevalence for a root)
//! posterior(v) = π·B(k; n, p1) / (π·B(k; n, p1) + (1 − π)·B(k; n, p0))
//! ```
//!
//! with `n = |N(v)|` and `k = |N(v) ∩ E|`. The binomial coefficient cancels
//! and is never computed.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::ProbTable;
use crate::error::{Error, Result};
use crate::graph::Network;
use crate::hierarchy::{AnnotationMap, ClassId, TreeHierarchy};
use crate::resample::FoldAssignment;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HbnClassParams {
    pub p1: f64,
    pub p0: f64,
    pub prior: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct HbnParams {
    pub classes: BTreeMap<ClassId, HbnClassParams>,
}

impl HbnParams {
    pub fn get(&self, c: ClassId) -> Option<&HbnClassParams> {
        self.classes.get(&c)
    }
}

/// Fits every class of `tree` using all nodes.
pub fn fit_hbn(net: &Network, closed: &AnnotationMap, tree: &TreeHierarchy) -> Result<HbnParams> {
    let known = vec![true; net.node_count()];
    let classes: Vec<ClassId> = tree.classes().collect();
    fit_hbn_masked(net, closed, tree, &classes, &known)
}

/// Fits `classes` (closed under ancestors within `tree`) using only nodes with
/// `known[v]` as the sums' centers. Neighbor labels are always read in full.
pub fn fit_hbn_masked(
    net: &Network,
    closed: &AnnotationMap,
    tree: &TreeHierarchy,
    classes: &[ClassId],
    known: &[bool],
) -> Result<HbnParams> {
    if known.len() != net.node_count() || closed.node_count() != net.node_count() {
        return Err(Error::Shape("mask or annotations do not match network".into()));
    }
    let known_total = known.iter().filter(|&&k| k).count();
    let extent_size = |c: ClassId| (0..net.node_count()).filter(|&v| known[v] && closed.has(v, c)).count();
    let mut out = HbnParams::default();
    for &c in classes {
        let mut in_hits = 0usize;
        let mut in_deg = 0usize;
        let mut out_hits = 0usize;
        let mut out_deg = 0usize;
        for v in (0..net.node_count()).filter(|&v| known[v]) {
            let k = net.neighbor_ids(v).filter(|&u| closed.has(u, c)).count();
            if closed.has(v, c) {
                in_hits += k;
                in_deg += net.degree(v);
            } else {
                out_hits += k;
                out_deg += net.degree(v);
            }
        }
        let size = extent_size(c);
        let prior = match tree.parent(c) {
            Some(p) => {
                let parent_size = extent_size(p);
                if parent_size == 0 {
                    return Err(Error::UnpopulatedAncestor(tree.name(p).to_string()));
                }
                size as f64 / parent_size as f64
            }
            None => {
                if known_total == 0 {
                    return Err(Error::Empty("no nodes to fit on".into()));
                }
                size as f64 / known_total as f64
            }
        };
        out.classes.insert(
            c,
            HbnClassParams {
                p1: (in_hits as f64 + 1.0) / (in_deg as f64 + 2.0),
                p0: (out_hits as f64 + 1.0) / (out_deg as f64 + 2.0),
                prior: prior.min(1.0),
            },
        );
    }
    Ok(out)
}

/// Bayes posterior of membership given `k` annotated neighbors out of `n`.
pub fn posterior(params: &HbnClassParams, k: usize, n: usize) -> f64 {
    let pi = params.prior;
    if pi <= 0.0 {
        return 0.0;
    }
    if pi >= 1.0 {
        return 1.0;
    }
    let (k, m) = (k as f64, (n - k) as f64);
    let l1 = pi.ln() + k * params.p1.ln() + m * (1.0 - params.p1).ln();
    let l0 = (1.0 - pi).ln() + k * params.p0.ln() + m * (1.0 - params.p0).ln();
    1.0 / (1.0 + (l0 - l1).exp())
}

fn local_posterior(params: &HbnParams, net: &Network, closed: &AnnotationMap, node: usize, c: ClassId) -> Result<f64> {
    let p = params
        .get(c)
        .ok_or_else(|| Error::UnknownClass(format!("{c} has no fitted baseline parameters")))?;
    let k = net.neighbor_ids(node).filter(|&u| u != node && closed.has(u, c)).count();
    Ok(posterior(p, k, net.degree(node)))
}

/// Score of `node` for `class`: the product of posteriors from the tree root
/// down to `class`.
pub fn predict_hbn(
    params: &HbnParams,
    net: &Network,
    closed: &AnnotationMap,
    tree: &TreeHierarchy,
    node: usize,
    class: ClassId,
) -> Result<f64> {
    let mut score = local_posterior(params, net, closed, node, class)?;
    for a in tree.ancestors(class) {
        score *= local_posterior(params, net, closed, node, a)?;
    }
    Ok(score)
}

/// Scores for every fitted class over `rows`.
pub fn predict_all(
    params: &HbnParams,
    net: &Network,
    closed: &AnnotationMap,
    tree: &TreeHierarchy,
    rows: &[usize],
) -> Result<ProbTable> {
    params
        .classes
        .keys()
        .map(|&c| {
            let scores = rows
                .par_iter()
                .map(|&v| predict_hbn(params, net, closed, tree, v, c))
                .collect::<Result<Vec<f64>>>()?;
            Ok((c, scores))
        })
        .collect()
}

/// Out-of-fold baseline scores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct HbnScores {
    /// Posterior of the class alone.
    pub local: ProbTable,
    /// Product of posteriors along the path.
    pub cumulative: ProbTable,
}

/// Out-of-fold baseline scores using the engine's folds.
///
/// For each class in `folds` and each fold, parameters for the class and its
/// ancestors are fitted on the fold's training rows; the held-out rows are
/// then scored. Fold indices refer to positions in `rows`.
pub fn cross_validated_scores(
    net: &Network,
    closed: &AnnotationMap,
    tree: &TreeHierarchy,
    rows: &[usize],
    folds: &BTreeMap<ClassId, FoldAssignment>,
) -> Result<HbnScores> {
    let per_class = folds
        .par_iter()
        .map(|(&c, fa)| {
            if fa.fold.len() != rows.len() {
                return Err(Error::Shape(format!("folds of {} do not match rows", tree.name(c))));
            }
            let mut path = tree.ancestors(c);
            path.push(c);
            let mut local = vec![0.0; rows.len()];
            let mut cumulative = vec![0.0; rows.len()];
            for f in 0..fa.k {
                let mut known = vec![false; net.node_count()];
                for i in fa.train_rows(f) {
                    known[rows[i]] = true;
                }
                let params = fit_hbn_masked(net, closed, tree, &path, &known)?;
                for i in fa.test_rows(f) {
                    local[i] = local_posterior(&params, net, closed, rows[i], c)?;
                    cumulative[i] = predict_hbn(&params, net, closed, tree, rows[i], c)?;
                }
            }
            Ok((c, local, cumulative))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = HbnScores::default();
    for (c, local, cumulative) in per_class {
        out.local.insert(c, local);
        out.cumulative.insert(c, cumulative);
    }
    Ok(out)
}
