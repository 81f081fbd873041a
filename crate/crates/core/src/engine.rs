//! Top-down training over a sub-hierarchy, cumulative path probabilities,
//! optimum thresholds and true-path consistent decisions.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use ndarray::{concatenate, Axis};
use serde::{Deserialize, Serialize};

use crate::dataset::{build_dataset, FeatureSpace};
use crate::error::{Error, Result};
use crate::hierarchy::{ClassId, SubHierarchy, TreeHierarchy};
use crate::learn::{tune, ClassifierConfig, HyperGrid, Learner, TrainedModel};
use crate::metrics::{average_precision, optimum_threshold};
use crate::resample::{oversample, stratified_kfold, FoldAssignment, SmoteConfig};
use crate::seed;

/// Per-class probabilities over a row set.
pub type ProbTable = BTreeMap<ClassId, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    /// Cross-validation folds.
    pub folds: usize,
    /// `None` disables oversampling.
    pub smote: Option<SmoteConfig>,
    pub grid: HyperGrid,
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            folds: 5,
            smote: Some(SmoteConfig::default()),
            grid: HyperGrid::default_grid(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ClassStatus {
    /// A classifier was trained and produced out-of-fold probabilities.
    Trained,
    /// Outside the size bounds; passes probability 1.0 through.
    Structural,
    /// Every row is positive (always the case for the sub-hierarchy root);
    /// passes probability 1.0 through.
    ConstantPositive,
    /// Too few positives or negatives for stratified folds.
    Skipped { reason: String },
    /// An ancestor was skipped, so this class is too.
    SkippedBelow { ancestor: String },
}

impl ClassStatus {
    pub fn has_probabilities(&self) -> bool {
        matches!(
            self,
            ClassStatus::Trained | ClassStatus::Structural | ClassStatus::ConstantPositive
        )
    }

    pub fn label(&self) -> &'static str {
        match self {
            ClassStatus::Trained => "trained",
            ClassStatus::Structural => "structural",
            ClassStatus::ConstantPositive => "constant-positive",
            ClassStatus::Skipped { .. } => "skipped",
            ClassStatus::SkippedBelow { .. } => "skipped-below",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub test_rows: usize,
    pub test_positives: usize,
    pub train_rows_after_smote: usize,
    /// Average precision of the fold's local probabilities.
    pub average_precision: f64,
}

#[derive(Debug, Clone)]
pub struct ClassResult {
    pub class: ClassId,
    pub status: ClassStatus,
    pub tuned: Option<ClassifierConfig>,
    /// Mean AUCPR per grid candidate.
    pub grid_scores: Vec<f64>,
    pub fold_models: Vec<TrainedModel>,
    pub fold_summaries: Vec<FoldSummary>,
    pub folds: Option<FoldAssignment>,
    /// Optimum threshold on cumulative probabilities (trained classes).
    pub threshold: Option<f64>,
}

impl ClassResult {
    fn passthrough(class: ClassId, status: ClassStatus) -> Self {
        ClassResult {
            class,
            status,
            tuned: None,
            grid_scores: Vec::new(),
            fold_models: Vec::new(),
            fold_summaries: Vec::new(),
            folds: None,
            threshold: None,
        }
    }
}

/// Scores for a set of nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRows {
    /// Indices into the feature space's network.
    pub rows: Vec<usize>,
    pub node_names: Vec<String>,
    pub p_local: ProbTable,
    pub p_cumulative: ProbTable,
}

/// Output of [`train_subhierarchy`].
#[derive(Debug, Clone)]
pub struct SubHierarchyRun {
    pub root: ClassId,
    /// The sub-hierarchy tree (root has no parent).
    pub tree: TreeHierarchy,
    /// Processing order, parents before children.
    pub order: Vec<ClassId>,
    pub results: Vec<ClassResult>,
    /// Out-of-fold scores for the training rows.
    pub scored: ScoredRows,
    /// Fold-ensemble scores for widened candidates, if any.
    pub extra: Option<ScoredRows>,
}

impl SubHierarchyRun {
    pub fn result(&self, c: ClassId) -> Option<&ClassResult> {
        self.results.iter().find(|r| r.class == c)
    }

    pub fn thresholds(&self) -> BTreeMap<ClassId, f64> {
        self.results
            .iter()
            .filter_map(|r| r.threshold.map(|t| (r.class, t)))
            .collect()
    }
}

/// Rows to train on and, optionally, extra candidate rows that only receive
/// fold-ensemble predictions.
#[derive(Debug, Clone, Copy)]
pub struct Candidates<'a> {
    pub training: &'a [usize],
    pub extra: &'a [usize],
}

/// `p_cum(root) = p_local(root)`, `p_cum(C) = p_cum(parent(C)) · p_local(C)`.
///
/// Every ancestor (within `tree`) of every class in `p_local` must have
/// probabilities too.
pub fn cumulative_probabilities(tree: &TreeHierarchy, p_local: &ProbTable) -> Result<ProbTable> {
    let mut by_depth: Vec<(usize, ClassId)> = Vec::with_capacity(p_local.len());
    for &c in p_local.keys() {
        for a in tree.ancestors(c) {
            if !p_local.contains_key(&a) {
                return Err(Error::MissingProbability {
                    class: tree.name(c).to_string(),
                    ancestor: tree.name(a).to_string(),
                });
            }
        }
        by_depth.push((tree.depth(c), c));
    }
    by_depth.sort();
    let mut out = ProbTable::new();
    for (_, c) in by_depth {
        let local = &p_local[&c];
        let cum = match tree.parent(c) {
            Some(p) => {
                let parent = &out[&p];
                if parent.len() != local.len() {
                    return Err(Error::Shape(format!(
                        "{} has {} rows, parent {} has {}",
                        tree.name(c),
                        local.len(),
                        tree.name(p),
                        parent.len()
                    )));
                }
                parent.iter().zip(local).map(|(a, b)| a * b).collect()
            }
            None => local.clone(),
        };
        out.insert(c, cum);
    }
    Ok(out)
}

/// Counts `(node, class)` pairs where the cumulative probability exceeds the
/// parent's or the local probability.
pub fn monotonicity_violations(tree: &TreeHierarchy, p_local: &ProbTable, p_cum: &ProbTable) -> usize {
    let mut violations = 0;
    for (&c, cum) in p_cum {
        let local = &p_local[&c];
        violations += cum.iter().zip(local).filter(|(c, l)| c > l).count();
        if let Some(parent) = tree.parent(c).and_then(|p| p_cum.get(&p)) {
            violations += cum.iter().zip(parent).filter(|(c, p)| c > p).count();
        }
    }
    violations
}

fn class_seed(cfg: &EngineConfig, tree: &TreeHierarchy, root: ClassId, class: ClassId, purpose: &str) -> u64 {
    seed::derive(cfg.seed, &[tree.name(root), tree.name(class), purpose])
}

/// Trains every class of a sub-hierarchy from the root down.
///
/// For each target class: builds its dataset (the parent's out-of-fold
/// cumulative probabilities become the ancestor feature), splits rows into
/// stratified folds, oversamples training folds with SMOTE, tunes the
/// classifier on the grid, then trains one model per fold and keeps each
/// row's probability from the model that held it out. Structural and
/// constant-positive classes contribute probability 1.0. Classes without
/// enough positives or negatives are skipped along with their descendants.
pub fn train_subhierarchy(
    space: &FeatureSpace,
    candidates: Candidates<'_>,
    sub: &SubHierarchy,
    global: &TreeHierarchy,
    learner: &dyn Learner,
    cfg: &EngineConfig,
) -> Result<SubHierarchyRun> {
    if sub.targets.is_empty() {
        return Err(Error::Config(format!("sub-hierarchy {} has no targets", global.name(sub.root))));
    }
    let tree = sub.tree(global);
    let order = tree.subtree(sub.root);
    let rows = candidates.training;
    let extra_rows = candidates.extra;
    let n = rows.len();
    let k = cfg.folds;

    let mut p_local = ProbTable::new();
    let mut p_cum = ProbTable::new();
    let mut x_local = ProbTable::new();
    let mut x_cum = ProbTable::new();
    let mut results = Vec::with_capacity(order.len());
    let mut blocked: HashSet<ClassId> = HashSet::new();

    for &class in &order {
        let name = tree.name(class);
        let parent = tree.parent(class);
        if let Some(p) = parent.filter(|p| blocked.contains(p)) {
            blocked.insert(class);
            results.push(ClassResult::passthrough(
                class,
                ClassStatus::SkippedBelow {
                    ancestor: tree.name(p).to_string(),
                },
            ));
            continue;
        }
        let labels: Vec<bool> = rows.iter().map(|&r| space.closed.has(r, class)).collect();
        let positives = labels.iter().filter(|&&y| y).count();
        let negatives = n - positives;

        let status = if !sub.is_target(class) {
            Some(ClassStatus::Structural)
        } else if negatives == 0 {
            Some(ClassStatus::ConstantPositive)
        } else if positives < k || negatives < k {
            let reason = format!("{positives} positives, {negatives} negatives, {k} folds");
            log::warn!("skipping class {name}: {reason}");
            blocked.insert(class);
            results.push(ClassResult::passthrough(class, ClassStatus::Skipped { reason }));
            continue;
        } else {
            None
        };

        let parent_cum = parent.map(|p| p_cum[&p].clone());
        let parent_cum_extra = parent.map(|p| x_cum[&p].clone());

        let (local, local_extra, result) = match status {
            Some(status) => (
                vec![1.0; n],
                vec![1.0; extra_rows.len()],
                ClassResult::passthrough(class, status),
            ),
            None => train_class(
                space,
                rows,
                extra_rows,
                &tree,
                sub.root,
                class,
                &labels,
                parent_cum.as_deref(),
                parent_cum_extra.as_deref(),
                learner,
                cfg,
            )?,
        };

        let cum: Vec<f64> = match &parent_cum {
            Some(pc) => pc.iter().zip(&local).map(|(a, b)| a * b).collect(),
            None => local.clone(),
        };
        let cum_extra: Vec<f64> = match &parent_cum_extra {
            Some(pc) => pc.iter().zip(&local_extra).map(|(a, b)| a * b).collect(),
            None => local_extra.clone(),
        };
        p_local.insert(class, local);
        p_cum.insert(class, cum);
        x_local.insert(class, local_extra);
        x_cum.insert(class, cum_extra);
        results.push(result);
    }

    let recomputed = cumulative_probabilities(&tree, &p_local)?;
    if recomputed != p_cum {
        return Err(Error::Invariant("cumulative probabilities diverged".into()));
    }
    let violations = monotonicity_violations(&tree, &p_local, &p_cum);
    if violations > 0 {
        return Err(Error::Invariant(format!("{violations} cumulative probabilities increase along a path")));
    }

    for r in results.iter_mut().filter(|r| r.status == ClassStatus::Trained) {
        let labels: Vec<bool> = rows.iter().map(|&v| space.closed.has(v, r.class)).collect();
        r.threshold = Some(optimum_threshold(&p_cum[&r.class], &labels)?);
    }

    let names = |rs: &[usize]| rs.iter().map(|&r| space.net.name(r).to_string()).collect();
    Ok(SubHierarchyRun {
        root: sub.root,
        tree,
        order,
        results,
        scored: ScoredRows {
            rows: rows.to_vec(),
            node_names: names(rows),
            p_local,
            p_cumulative: p_cum,
        },
        extra: (!extra_rows.is_empty()).then(|| ScoredRows {
            rows: extra_rows.to_vec(),
            node_names: names(extra_rows),
            p_local: x_local,
            p_cumulative: x_cum,
        }),
    })
}

#[allow(clippy::too_many_arguments)]
fn train_class(
    space: &FeatureSpace,
    rows: &[usize],
    extra_rows: &[usize],
    tree: &TreeHierarchy,
    root: ClassId,
    class: ClassId,
    labels: &[bool],
    parent_cum: Option<&[f64]>,
    parent_cum_extra: Option<&[f64]>,
    learner: &dyn Learner,
    cfg: &EngineConfig,
) -> Result<(Vec<f64>, Vec<f64>, ClassResult)> {
    let ds = build_dataset(space, rows, tree, class, parent_cum, None)?;
    let extra_x = if extra_rows.is_empty() {
        None
    } else {
        Some(build_dataset(space, extra_rows, tree, class, parent_cum_extra, Some(&ds.standardization))?.x)
    };
    let folds = stratified_kfold(labels, cfg.folds, class_seed(cfg, tree, root, class, "folds"))?;
    let smote = cfg.smote.as_ref().map(|s| SmoteConfig {
        seed: class_seed(cfg, tree, root, class, "smote"),
        ..s.clone()
    });
    let model_seed = class_seed(cfg, tree, root, class, "model");
    let grid = HyperGrid {
        candidates: cfg
            .grid
            .candidates
            .iter()
            .map(|c| ClassifierConfig { seed: model_seed, ..c.clone() })
            .collect(),
        metric: cfg.grid.metric,
    };
    let tuned = tune(learner, ds.x.view(), labels, &ds.schema, &grid, &folds, smote.as_ref())?;

    let n = rows.len();
    let mut local = vec![f64::NAN; n];
    let mut local_extra = vec![0.0; extra_rows.len()];
    let mut models = Vec::with_capacity(folds.k);
    let mut summaries = Vec::with_capacity(folds.k);
    for f in 0..folds.k {
        let train_rows = folds.train_rows(f);
        let test_rows = folds.test_rows(f);
        let tx = ds.x.select(Axis(0), &train_rows);
        let ty: Vec<bool> = train_rows.iter().map(|&i| labels[i]).collect();
        let (tx, ty) = match &smote {
            Some(s) => {
                let aug = oversample(tx.view(), &ty, s)?;
                (aug.x, aug.y)
            }
            None => (tx, ty),
        };
        let mut test_x = ds.x.select(Axis(0), &test_rows);
        if let Some(ex) = &extra_x {
            test_x = concatenate(Axis(0), &[test_x.view(), ex.view()]).map_err(|e| Error::Shape(e.to_string()))?;
        }
        let fit = learner.fit_predict(tx.view(), &ty, test_x.view(), &ds.schema, &tuned.best)?;
        if fit.probabilities.len() != test_x.nrows() {
            return Err(Error::Shape("learner returned the wrong number of probabilities".into()));
        }
        for (j, &r) in test_rows.iter().enumerate() {
            local[r] = fit.probabilities[j];
        }
        for (j, p) in fit.probabilities[test_rows.len()..].iter().enumerate() {
            local_extra[j] += p / folds.k as f64;
        }
        let vy: Vec<bool> = test_rows.iter().map(|&i| labels[i]).collect();
        summaries.push(FoldSummary {
            fold: f,
            test_rows: test_rows.len(),
            test_positives: vy.iter().filter(|&&y| y).count(),
            train_rows_after_smote: ty.len(),
            average_precision: average_precision(&fit.probabilities[..test_rows.len()], &vy)?,
        });
        models.extend(fit.model);
    }
    debug_assert!(local.iter().all(|p| p.is_finite()));
    Ok((
        local,
        local_extra,
        ClassResult {
            class,
            status: ClassStatus::Trained,
            tuned: Some(tuned.best),
            grid_scores: tuned.scores,
            fold_models: models,
            fold_summaries: summaries,
            folds: Some(folds),
            threshold: None,
        },
    ))
}

/// One emitted prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictionRecord {
    pub node: String,
    pub class: ClassId,
    pub p_local: f64,
    pub p_cumulative: f64,
    pub threshold: f64,
    pub decision: bool,
}

/// `φ′`: per node, its closed annotations plus predicted classes (and their
/// ancestors).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtendedAnnotation {
    pub sets: BTreeMap<String, BTreeSet<ClassId>>,
}

impl ExtendedAnnotation {
    pub fn merge(&mut self, other: ExtendedAnnotation) {
        for (node, set) in other.sets {
            self.sets.entry(node).or_default().extend(set);
        }
    }

    /// `(node, class)` pairs whose class has an ancestor (in `tree`) missing
    /// from the node's set.
    pub fn violations(&self, tree: &TreeHierarchy) -> usize {
        self.sets
            .values()
            .map(|set| {
                set.iter()
                    .filter(|&&c| tree.ancestors(c).iter().any(|a| !set.contains(a)))
                    .count()
            })
            .sum()
    }
}

/// Applies thresholds down the tree: a class is predicted for a node only if
/// its cumulative probability reaches the threshold and its parent is
/// predicted. Pass-through classes (probabilities but no threshold) follow
/// their parent; classes without probabilities are never predicted.
///
/// `closed_sets` holds each scored row's closed annotations; `global` is the
/// full normalized tree, used to close the output under ancestors.
pub fn decide_and_extend(
    sub_tree: &TreeHierarchy,
    root: ClassId,
    global: &TreeHierarchy,
    scored: &ScoredRows,
    thresholds: &BTreeMap<ClassId, f64>,
    closed_sets: &[Vec<ClassId>],
) -> Result<(ExtendedAnnotation, Vec<PredictionRecord>)> {
    let n = scored.node_names.len();
    if closed_sets.len() != n {
        return Err(Error::Shape("closed annotations do not match scored rows".into()));
    }
    let order = sub_tree.subtree(root);
    let mut decided: BTreeMap<ClassId, Vec<bool>> = BTreeMap::new();
    let mut records = Vec::new();
    for &c in &order {
        let parent_dec = sub_tree.parent(c).map(|p| &decided[&p]);
        let dec: Vec<bool> = match (thresholds.get(&c), scored.p_cumulative.get(&c)) {
            (Some(&t), Some(cum)) => {
                let local = &scored.p_local[&c];
                let dec: Vec<bool> = (0..n)
                    .map(|v| cum[v] >= t && parent_dec.is_none_or(|pd| pd[v]))
                    .collect();
                for v in 0..n {
                    records.push(PredictionRecord {
                        node: scored.node_names[v].clone(),
                        class: c,
                        p_local: local[v],
                        p_cumulative: cum[v],
                        threshold: t,
                        decision: dec[v],
                    });
                }
                dec
            }
            (Some(_), None) => {
                return Err(Error::MissingProbability {
                    class: sub_tree.name(c).to_string(),
                    ancestor: sub_tree.name(c).to_string(),
                })
            }
            (None, Some(_)) => parent_dec.map_or_else(|| vec![true; n], Clone::clone),
            (None, None) => vec![false; n],
        };
        decided.insert(c, dec);
    }

    let mut ext = ExtendedAnnotation::default();
    for v in 0..n {
        let mut set: BTreeSet<ClassId> = closed_sets[v].iter().copied().collect();
        for (&c, dec) in &decided {
            if dec[v] && thresholds.contains_key(&c) {
                set.insert(c);
                set.extend(global.ancestors(c));
            }
        }
        ext.sets.insert(scored.node_names[v].clone(), set);
    }
    let violations = ext.violations(global);
    if violations > 0 {
        return Err(Error::Invariant(format!("{violations} predictions break the true-path rule")));
    }
    Ok((ext, records))
}

/// Counts records predicted positive while the parent's record for the same
/// node is negative.
pub fn decision_violations(tree: &TreeHierarchy, records: &[PredictionRecord]) -> usize {
    let index: BTreeMap<(&str, ClassId), bool> = records
        .iter()
        .map(|r| ((r.node.as_str(), r.class), r.decision))
        .collect();
    records
        .iter()
        .filter(|r| {
            r.decision
                && tree
                    .parent(r.class)
                    .and_then(|p| index.get(&(r.node.as_str(), p)))
                    .is_some_and(|&pd| !pd)
        })
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hierarchy::Hierarchy;

    fn chain() -> (Hierarchy, TreeHierarchy) {
        let h = Hierarchy::from_edges(&[("r", "a"), ("a", "b")], &[]).unwrap();
        let t = TreeHierarchy::from_edges(&h, &h.edges()).unwrap();
        (h, t)
    }

    #[test]
    fn cumulative_base_case_and_products() {
        let (h, t) = chain();
        let id = |n| h.id(n).unwrap();
        let mut p = ProbTable::new();
        p.insert(id("r"), vec![0.8, 0.9]);
        p.insert(id("a"), vec![1.0, 0.5]);
        p.insert(id("b"), vec![0.5, 0.4]);
        let cum = cumulative_probabilities(&t, &p).unwrap();
        assert_eq!(cum[&id("r")], vec![0.8, 0.9]);
        assert_eq!(cum[&id("a")][1], 0.45);
        assert!((cum[&id("b")][1] - 0.18).abs() < 1e-15);
        assert_eq!(monotonicity_violations(&t, &p, &cum), 0);
    }

    #[test]
    fn zero_at_root_zeroes_descendants() {
        let (h, t) = chain();
        let p: ProbTable = h.classes().map(|c| (c, vec![if h.name(c) == "r" { 0.0 } else { 0.9 }])).collect();
        let cum = cumulative_probabilities(&t, &p).unwrap();
        assert!(cum.values().all(|v| v[0] == 0.0));
    }

    #[test]
    fn missing_ancestor_is_an_error() {
        let (h, t) = chain();
        let mut p = ProbTable::new();
        p.insert(h.id("b").unwrap(), vec![0.5]);
        assert!(matches!(
            cumulative_probabilities(&t, &p),
            Err(Error::MissingProbability { .. })
        ));
    }

    fn scored(h: &Hierarchy, local: &[(&str, f64)]) -> ScoredRows {
        let p_local: ProbTable = local.iter().map(|&(c, p)| (h.id(c).unwrap(), vec![p])).collect();
        ScoredRows {
            rows: vec![0],
            node_names: vec!["v".into()],
            p_local,
            p_cumulative: ProbTable::new(),
        }
    }

    #[test]
    fn child_above_threshold_under_rejected_parent_is_rejected() {
        let (h, t) = chain();
        let id = |n| h.id(n).unwrap();
        let mut s = scored(&h, &[("r", 1.0), ("a", 0.5), ("b", 1.0)]);
        s.p_cumulative = cumulative_probabilities(&t, &s.p_local).unwrap();
        let thresholds: BTreeMap<ClassId, f64> = [(id("a"), 0.6), (id("b"), 0.1)].into();
        let (ext, recs) = decide_and_extend(&t, id("r"), &t, &s, &thresholds, &[vec![id("r")]]).unwrap();
        assert_eq!(recs.len(), 2);
        assert!(recs.iter().all(|r| !r.decision));
        assert_eq!(ext.sets["v"], BTreeSet::from([id("r")]));
    }

    #[test]
    fn zero_thresholds_predict_whole_paths() {
        let (h, t) = chain();
        let id = |n| h.id(n).unwrap();
        let mut s = scored(&h, &[("r", 1.0), ("a", 0.01), ("b", 0.01)]);
        s.p_cumulative = cumulative_probabilities(&t, &s.p_local).unwrap();
        let thresholds: BTreeMap<ClassId, f64> = [(id("a"), 0.0), (id("b"), 0.0)].into();
        let (ext, recs) = decide_and_extend(&t, id("r"), &t, &s, &thresholds, &[vec![]]).unwrap();
        assert!(recs.iter().all(|r| r.decision));
        assert_eq!(ext.sets["v"].len(), 3);
        assert_eq!(ext.violations(&t), 0);
        assert_eq!(decision_violations(&t, &recs), 0);
    }
}
