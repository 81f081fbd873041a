//! Class hierarchies, annotations, true-path closure, DAG-to-tree
//! normalization and sub-hierarchy splitting.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::path::Path;

use fixedbitset::FixedBitSet;
use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::graph::Network;

/// Dense index of a class inside a [`Hierarchy`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct ClassId(pub u32);

impl ClassId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    fn from_index(i: usize) -> Self {
        ClassId(i as u32)
    }
}

impl fmt::Display for ClassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Directed acyclic graph of classes, edges pointing from parent to child.
#[derive(Debug, Clone)]
pub struct Hierarchy {
    names: Vec<String>,
    index: HashMap<String, ClassId>,
    parents: Vec<Vec<ClassId>>,
    children: Vec<Vec<ClassId>>,
    /// Roots first.
    order: Vec<ClassId>,
}

impl Hierarchy {
    /// Builds a hierarchy from `parent -> child` edges plus optional extra
    /// (possibly isolated) classes. Duplicate edges are collapsed.
    pub fn from_edges<S: AsRef<str>>(
        edges: &[(S, S)],
        extra_classes: &[S],
    ) -> Result<Hierarchy> {
        let mut names = Vec::new();
        let mut index = HashMap::new();
        let mut intern = |name: &str| -> ClassId {
            *index.entry(name.to_string()).or_insert_with(|| {
                names.push(name.to_string());
                ClassId::from_index(names.len() - 1)
            })
        };
        let mut pairs = Vec::with_capacity(edges.len());
        for (p, c) in edges {
            let p = intern(p.as_ref());
            let c = intern(c.as_ref());
            pairs.push((p, c));
        }
        for c in extra_classes {
            intern(c.as_ref());
        }
        let n = names.len();
        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut seen = HashSet::with_capacity(pairs.len());
        for (p, c) in pairs {
            if seen.insert((p, c)) {
                parents[c.index()].push(p);
                children[p.index()].push(c);
            }
        }
        for list in parents.iter_mut().chain(children.iter_mut()) {
            list.sort_by(|a, b| names[a.index()].cmp(&names[b.index()]));
        }
        let order = topological_order(&parents, &children).map_err(|stuck| {
            let mut cyc: Vec<String> = stuck.iter().map(|c| names[c.index()].clone()).collect();
            cyc.sort();
            Error::Cycle(cyc)
        })?;
        Ok(Hierarchy {
            names,
            index,
            parents,
            children,
            order,
        })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn name(&self, c: ClassId) -> &str {
        &self.names[c.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn id(&self, name: &str) -> Option<ClassId> {
        self.index.get(name).copied()
    }

    pub fn require(&self, name: &str) -> Result<ClassId> {
        self.id(name).ok_or_else(|| Error::UnknownClass(name.to_string()))
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> {
        (0..self.len()).map(ClassId::from_index)
    }

    pub fn parents(&self, c: ClassId) -> &[ClassId] {
        &self.parents[c.index()]
    }

    pub fn children(&self, c: ClassId) -> &[ClassId] {
        &self.children[c.index()]
    }

    pub fn edge_count(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    /// `(parent, child)` pairs, children in topological order.
    pub fn edges(&self) -> Vec<(ClassId, ClassId)> {
        self.order
            .iter()
            .flat_map(|&c| self.parents(c).iter().map(move |&p| (p, c)))
            .collect()
    }

    /// Topological order, every class after all of its parents.
    pub fn topological_order(&self) -> &[ClassId] {
        &self.order
    }

    /// Strict ancestors of every class, sorted by id.
    pub fn ancestor_sets(&self) -> Vec<Vec<ClassId>> {
        let n = self.len();
        let mut sets: Vec<FixedBitSet> = vec![FixedBitSet::with_capacity(n); n];
        for &c in &self.order {
            let mut acc = FixedBitSet::with_capacity(n);
            for &p in self.parents(c) {
                acc.insert(p.index());
                acc.union_with(&sets[p.index()]);
            }
            sets[c.index()] = acc;
        }
        sets.iter()
            .map(|s| s.ones().map(ClassId::from_index).collect())
            .collect()
    }
}

/// Kahn's algorithm; on failure returns the classes left on a cycle.
fn topological_order(
    parents: &[Vec<ClassId>],
    children: &[Vec<ClassId>],
) -> std::result::Result<Vec<ClassId>, Vec<ClassId>> {
    let n = parents.len();
    let mut indegree: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut queue: VecDeque<ClassId> = (0..n)
        .filter(|&i| indegree[i] == 0)
        .map(ClassId::from_index)
        .collect();
    let mut order = Vec::with_capacity(n);
    while let Some(c) = queue.pop_front() {
        order.push(c);
        for &d in &children[c.index()] {
            indegree[d.index()] -= 1;
            if indegree[d.index()] == 0 {
                queue.push_back(d);
            }
        }
    }
    if order.len() == n {
        Ok(order)
    } else {
        Err((0..n)
            .filter(|&i| indegree[i] > 0)
            .map(ClassId::from_index)
            .collect())
    }
}

/// Parses a `parent<TAB>child` hierarchy file.
pub fn parse_hierarchy_tsv(text: &str) -> Result<Vec<(String, String)>> {
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 2 {
            return Err(Error::parse(
                "hierarchy",
                i + 1,
                format!("expected `parent<TAB>child`, found {} fields", f.len()),
            ));
        }
        edges.push((f[0].trim().to_string(), f[1].trim().to_string()));
    }
    Ok(edges)
}

/// Reads a hierarchy from a tab-separated edge file or, for `.obo` paths,
/// from an OBO-style ontology.
pub fn read_hierarchy(path: &Path) -> Result<Hierarchy> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("obo")) {
        crate::obo::parse_obo_lite(&text)
    } else {
        let edges = parse_hierarchy_tsv(&text)?;
        if edges.is_empty() {
            return Err(Error::Empty(format!("{} has no edges", path.display())));
        }
        Hierarchy::from_edges(&edges, &[])
    }
}

/// Assignment of classes to network nodes, indexed by node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationMap {
    sets: Vec<Vec<ClassId>>,
    class_count: usize,
}

impl AnnotationMap {
    pub fn empty(node_count: usize, class_count: usize) -> Self {
        AnnotationMap {
            sets: vec![Vec::new(); node_count],
            class_count,
        }
    }

    /// Builds a map from explicit per-node class sets.
    pub fn from_sets(sets: Vec<Vec<ClassId>>, class_count: usize) -> Result<Self> {
        let mut map = AnnotationMap::empty(sets.len(), class_count);
        for (v, set) in sets.into_iter().enumerate() {
            for c in set {
                map.insert(v, c)?;
            }
        }
        Ok(map)
    }

    /// Builds a map from `(node, class)` name pairs. Pairs whose node is not
    /// in the network are skipped; their count is returned alongside.
    pub fn from_pairs<S: AsRef<str>>(
        net: &Network,
        hierarchy: &Hierarchy,
        pairs: &[(S, S)],
    ) -> Result<(Self, usize)> {
        let mut map = AnnotationMap::empty(net.node_count(), hierarchy.len());
        let mut skipped = 0;
        for (node, class) in pairs {
            let c = hierarchy.require(class.as_ref())?;
            match net.index_of(node.as_ref()) {
                Some(v) => map.insert(v, c)?,
                None => skipped += 1,
            }
        }
        Ok((map, skipped))
    }

    pub fn insert(&mut self, node: usize, class: ClassId) -> Result<()> {
        if class.index() >= self.class_count {
            return Err(Error::UnknownClass(class.to_string()));
        }
        let set = &mut self.sets[node];
        if let Err(pos) = set.binary_search(&class) {
            set.insert(pos, class);
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.sets.len()
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn classes_of(&self, node: usize) -> &[ClassId] {
        &self.sets[node]
    }

    pub fn has(&self, node: usize, class: ClassId) -> bool {
        self.sets[node].binary_search(&class).is_ok()
    }

    /// Nodes carrying `class`, ascending.
    pub fn extent(&self, class: ClassId) -> Vec<usize> {
        (0..self.sets.len()).filter(|&v| self.has(v, class)).collect()
    }

    pub fn indicator(&self, class: ClassId) -> Vec<bool> {
        (0..self.sets.len()).map(|v| self.has(v, class)).collect()
    }

    /// Number of nodes annotated with each class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.class_count];
        for set in &self.sets {
            for c in set {
                counts[c.index()] += 1;
            }
        }
        counts
    }

    pub fn assignment_count(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }

    /// The map re-indexed to a node subset (`nodes[i]` becomes node `i`).
    pub fn restrict(&self, nodes: &[usize]) -> AnnotationMap {
        AnnotationMap {
            sets: nodes.iter().map(|&v| self.sets[v].clone()).collect(),
            class_count: self.class_count,
        }
    }
}

/// Parses a `node<TAB>class` annotation file.
pub fn parse_annotations_tsv(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 2 {
            return Err(Error::parse(
                "annotations",
                i + 1,
                format!("expected `node<TAB>class`, found {} fields", f.len()),
            ));
        }
        pairs.push((f[0].trim().to_string(), f[1].trim().to_string()));
    }
    Ok(pairs)
}

/// Closes annotations under the true-path rule: every ancestor of an
/// assigned class is assigned too. The result is the smallest such superset.
pub fn close_annotations(phi: &AnnotationMap, h: &Hierarchy) -> Result<AnnotationMap> {
    if phi.class_count != h.len() {
        return Err(Error::Shape(format!(
            "annotation map expects {} classes, hierarchy has {}",
            phi.class_count,
            h.len()
        )));
    }
    let ancestors = h.ancestor_sets();
    let sets = phi
        .sets
        .iter()
        .map(|set| {
            let mut closed: Vec<ClassId> = set.clone();
            for c in set {
                closed.extend_from_slice(&ancestors[c.index()]);
            }
            closed.sort_unstable();
            closed.dedup();
            closed
        })
        .collect();
    Ok(AnnotationMap {
        sets,
        class_count: phi.class_count,
    })
}

/// Per-class annotation and descendant counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassCensus {
    /// `|closed⁻¹(C)|`
    pub annotated: Vec<usize>,
    /// Number of distinct strict descendants.
    pub descendants: Vec<usize>,
}

impl ClassCensus {
    pub fn new(h: &Hierarchy, closed: &AnnotationMap) -> Self {
        ClassCensus {
            annotated: closed.class_counts(),
            descendants: descendant_counts(h),
        }
    }

    pub fn annotated(&self, c: ClassId) -> usize {
        self.annotated[c.index()]
    }
}

/// Counts distinct strict descendants per class (diamonds counted once).
pub fn descendant_counts(h: &Hierarchy) -> Vec<usize> {
    let n = h.len();
    let mut reach: Vec<FixedBitSet> = vec![FixedBitSet::with_capacity(n); n];
    for &c in h.topological_order().iter().rev() {
        let mut acc = FixedBitSet::with_capacity(n);
        for &d in h.children(c) {
            acc.insert(d.index());
            acc.union_with(&reach[d.index()]);
        }
        reach[c.index()] = acc;
    }
    reach.iter().map(|r| r.count_ones(..)).collect()
}

/// Ratio of nodes annotated with `child` to nodes annotated with `parent`.
/// Counts must come from a closed annotation map.
pub fn edge_weight(census: &ClassCensus, parent: ClassId, child: ClassId) -> Result<Ratio<u64>> {
    let p = census.annotated(parent) as u64;
    if p == 0 {
        return Err(Error::UnpopulatedAncestor(parent.to_string()));
    }
    Ok(Ratio::new(census.annotated(child) as u64, p))
}

/// Tree (or forest) over the classes of a [`Hierarchy`].
///
/// Uses the class id space of the hierarchy it was derived from. A tree may
/// be restricted to a subset of member classes; non-members are ignored by
/// every query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreeHierarchy {
    names: Vec<String>,
    parent: Vec<Option<ClassId>>,
    children: Vec<Vec<ClassId>>,
    member: Vec<bool>,
}

impl TreeHierarchy {
    /// Builds a tree over `h`'s classes from a subset of its edges.
    pub fn from_edges(h: &Hierarchy, edges: &[(ClassId, ClassId)]) -> Result<TreeHierarchy> {
        let n = h.len();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        for &(p, c) in edges {
            if !h.parents(c).contains(&p) {
                return Err(Error::ForeignEdge {
                    parent: h.name(p).to_string(),
                    child: h.name(c).to_string(),
                });
            }
            if parent[c.index()].replace(p).is_some_and(|old| old != p) {
                return Err(Error::NotATree(h.name(c).to_string()));
            }
            if !children[p.index()].contains(&c) {
                children[p.index()].push(c);
            }
        }
        for list in &mut children {
            list.sort_by(|a: &ClassId, b: &ClassId| h.name(*a).cmp(h.name(*b)));
        }
        Ok(TreeHierarchy {
            names: h.names().to_vec(),
            parent,
            children,
            member: vec![true; n],
        })
    }

    pub fn name(&self, c: ClassId) -> &str {
        &self.names[c.index()]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, c: ClassId) -> bool {
        self.member.get(c.index()).copied().unwrap_or(false)
    }

    pub fn parent(&self, c: ClassId) -> Option<ClassId> {
        self.parent[c.index()]
    }

    pub fn children(&self, c: ClassId) -> &[ClassId] {
        &self.children[c.index()]
    }

    /// Member classes without a parent, sorted by name.
    pub fn roots(&self) -> Vec<ClassId> {
        let mut r: Vec<ClassId> = self
            .classes()
            .filter(|&c| self.parent(c).is_none())
            .collect();
        r.sort_by(|a, b| self.name(*a).cmp(self.name(*b)));
        r
    }

    pub fn classes(&self) -> impl Iterator<Item = ClassId> + '_ {
        (0..self.member.len())
            .filter(|&i| self.member[i])
            .map(ClassId::from_index)
    }

    /// `(parent, child)` edges, sorted by child name.
    pub fn edges(&self) -> Vec<(ClassId, ClassId)> {
        let mut e: Vec<(ClassId, ClassId)> = self
            .classes()
            .filter_map(|c| self.parent(c).map(|p| (p, c)))
            .collect();
        e.sort_by(|a, b| self.name(a.1).cmp(self.name(b.1)));
        e
    }

    /// Ancestors of `c` from its parent up to the root.
    pub fn ancestors(&self, c: ClassId) -> Vec<ClassId> {
        let mut out = Vec::new();
        let mut cur = self.parent(c);
        while let Some(p) = cur {
            out.push(p);
            cur = self.parent(p);
        }
        out
    }

    pub fn depth(&self, c: ClassId) -> usize {
        self.ancestors(c).len()
    }

    /// The subtree rooted at `root` in breadth-first order (parents first,
    /// siblings by name).
    pub fn subtree(&self, root: ClassId) -> Vec<ClassId> {
        let mut out = vec![root];
        let mut i = 0;
        while i < out.len() {
            let c = out[i];
            out.extend_from_slice(self.children(c));
            i += 1;
        }
        out
    }

    /// A tree over the same id space whose only members are `classes`.
    /// Edges leaving the subset are dropped.
    pub fn restrict(&self, classes: &[ClassId]) -> TreeHierarchy {
        let n = self.names.len();
        let mut member = vec![false; n];
        for c in classes {
            member[c.index()] = true;
        }
        let parent = (0..n)
            .map(|i| {
                if !member[i] {
                    return None;
                }
                self.parent[i].filter(|p| member[p.index()])
            })
            .collect();
        let children = (0..n)
            .map(|i| {
                if !member[i] {
                    return Vec::new();
                }
                self.children[i]
                    .iter()
                    .copied()
                    .filter(|c| member[c.index()])
                    .collect()
            })
            .collect();
        TreeHierarchy {
            names: self.names.clone(),
            parent,
            children,
            member,
        }
    }
}

/// Result of [`normalize`]: the tree plus the audit trail of removed edges.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalization {
    pub tree: TreeHierarchy,
    /// `(parent, child)` edges dropped from the input DAG.
    pub removed: Vec<(ClassId, ClassId)>,
}

fn weight_or_zero(census: &ClassCensus, parent: ClassId, child: ClassId) -> Ratio<u64> {
    // a class with no annotations weighs 0 on every incoming edge
    if census.annotated(child) == 0 {
        return Ratio::from_integer(0);
    }
    edge_weight(census, parent, child).unwrap_or_else(|_| Ratio::from_integer(0))
}

/// Converts the DAG into a tree by keeping, for every class with several
/// parents, the incoming edge of maximum weight. Ties go to the parent with
/// the lexicographically smallest identifier.
///
/// Runs in `O(|V| + |E|)`.
pub fn normalize(h: &Hierarchy, census: &ClassCensus) -> Result<Normalization> {
    if census.annotated.len() != h.len() {
        return Err(Error::Shape(format!(
            "census covers {} classes, hierarchy has {}",
            census.annotated.len(),
            h.len()
        )));
    }
    let mut kept = Vec::with_capacity(h.len());
    let mut removed = Vec::new();
    // leaves first
    for &child in h.topological_order().iter().rev() {
        let parents = h.parents(child);
        let Some(&first) = parents.first() else {
            continue;
        };
        let mut best = first;
        let mut best_w = weight_or_zero(census, first, child);
        for &p in &parents[1..] {
            let w = weight_or_zero(census, p, child);
            let better = match w.cmp(&best_w) {
                Ordering::Greater => true,
                Ordering::Equal => h.name(p) < h.name(best),
                Ordering::Less => false,
            };
            if better {
                best = p;
                best_w = w;
            }
        }
        kept.push((best, child));
        removed.extend(parents.iter().filter(|&&p| p != best).map(|&p| (p, child)));
    }
    removed.sort_by(|a, b| (h.name(a.0), h.name(a.1)).cmp(&(h.name(b.0), h.name(b.1))));
    Ok(Normalization {
        tree: TreeHierarchy::from_edges(h, &kept)?,
        removed,
    })
}

/// A subtree of the normalized hierarchy treated as an independent problem,
/// with the subgraph of nodes annotated with its root.
#[derive(Debug, Clone)]
pub struct SubHierarchy {
    pub root: ClassId,
    /// Breadth-first from the root.
    pub classes: Vec<ClassId>,
    /// Classes inside the size bounds, in `classes` order.
    pub targets: Vec<ClassId>,
    /// Global network indices of the subgraph nodes, ascending.
    pub node_ids: Vec<usize>,
    pub subgraph: Network,
}

impl SubHierarchy {
    pub fn is_target(&self, c: ClassId) -> bool {
        self.targets.contains(&c)
    }

    /// The sub-hierarchy's own tree: `root` becomes a root.
    pub fn tree(&self, global: &TreeHierarchy) -> TreeHierarchy {
        global.restrict(&self.classes)
    }
}

/// Splits the tree into sub-hierarchies rooted at the children of every
/// global root. Classes with `min_count ≤ |closed⁻¹(C)| ≤ max_count` become
/// targets; the others stay as structural pass-throughs. Subtrees without
/// targets are discarded. The result is sorted by root name.
pub fn split_subhierarchies(
    t: &TreeHierarchy,
    closed: &AnnotationMap,
    net: &Network,
    min_count: usize,
    max_count: usize,
) -> Result<Vec<SubHierarchy>> {
    if closed.node_count() != net.node_count() {
        return Err(Error::Shape("annotation map and network disagree on node count".into()));
    }
    let counts = closed.class_counts();
    let in_range = |c: ClassId| {
        let n = counts[c.index()];
        n >= min_count && n <= max_count
    };
    if !t.classes().any(in_range) {
        return Err(Error::NoClassesInRange {
            min: min_count,
            max: max_count,
        });
    }
    let mut subs = Vec::new();
    for root in t.roots() {
        for &sub_root in t.children(root) {
            let classes = t.subtree(sub_root);
            let targets: Vec<ClassId> = classes.iter().copied().filter(|&c| in_range(c)).collect();
            if targets.is_empty() {
                continue;
            }
            let node_ids = closed.extent(sub_root);
            let subgraph = net.induced_subgraph(&node_ids);
            subs.push(SubHierarchy {
                root: sub_root,
                classes,
                targets,
                node_ids,
                subgraph,
            });
        }
    }
    if subs.is_empty() {
        return Err(Error::NoClassesInRange {
            min: min_count,
            max: max_count,
        });
    }
    subs.sort_by(|a, b| t.name(a.root).cmp(t.name(b.root)));
    Ok(subs)
}
