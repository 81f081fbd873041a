mod common;

use hmc_core::error::Error;
use hmc_core::graph::{load_network, read_network, EdgeRecord, Network};
use hmc_core::hierarchy::{
    close_annotations, edge_weight, normalize, parse_annotations_tsv, read_hierarchy, split_subhierarchies,
    AnnotationMap, ClassCensus, Hierarchy,
};
use hmc_core::io::read_text;
use hmc_core::obo::parse_obo_lite;
use hmc_core::seed;
use hmc_core::synthetic::random_dag;
use num_rational::Ratio;
use proptest::prelude::*;
use rand::Rng;

struct Diamond {
    h: Hierarchy,
    net: Network,
    closed: AnnotationMap,
}

fn diamond() -> Diamond {
    let dir = common::fixture("diamond");
    let h = read_hierarchy(&dir.join("hierarchy.tsv")).unwrap();
    let net = read_network(&dir.join("edges.tsv"), None).unwrap();
    let pairs = parse_annotations_tsv(&read_text(&dir.join("annotations.tsv")).unwrap()).unwrap();
    let (raw, skipped) = AnnotationMap::from_pairs(&net, &h, &pairs).unwrap();
    assert_eq!(skipped, 0);
    let closed = close_annotations(&raw, &h).unwrap();
    Diamond { h, net, closed }
}

#[test]
fn diamond_weights_and_removed_edge() {
    let f = diamond();
    let census = ClassCensus::new(&f.h, &f.closed);
    let id = |n: &str| f.h.id(n).unwrap();
    assert_eq!(census.annotated(id("A")), 14);
    assert_eq!(census.annotated(id("B")), 12);
    assert_eq!(census.annotated(id("C")), 6);
    assert_eq!(edge_weight(&census, id("B"), id("E")).unwrap(), Ratio::new(1, 3));
    assert_eq!(edge_weight(&census, id("C"), id("E")).unwrap(), Ratio::new(2, 3));
    let norm = normalize(&f.h, &census).unwrap();
    assert_eq!(norm.removed, vec![(id("B"), id("E"))]);
    assert_eq!(norm.tree.parent(id("E")), Some(id("C")));
    assert_eq!(norm.tree.parent(id("D")), Some(id("B")));
}

#[test]
fn diamond_split() {
    let f = diamond();
    let census = ClassCensus::new(&f.h, &f.closed);
    let tree = normalize(&f.h, &census).unwrap().tree;
    let subs = split_subhierarchies(&tree, &f.closed, &f.net, 1, 300).unwrap();
    let names: Vec<&str> = subs.iter().map(|s| f.h.name(s.root)).collect();
    assert_eq!(names, ["B", "C"]);
    // the subgraph follows the DAG closure, so E's nodes stay under B
    assert_eq!(subs[0].node_ids.len(), 12);
    assert_eq!(subs[1].node_ids.len(), 6);
}

#[test]
fn weight_ties_pick_smallest_parent_name() {
    // both parents hold exactly the child's nodes
    let h = Hierarchy::from_edges(&[("R", "Q"), ("R", "P"), ("Q", "X"), ("P", "X")], &[]).unwrap();
    let net = load_network([EdgeRecord::new("a", "b", 1.0)]).unwrap();
    let (raw, _) = AnnotationMap::from_pairs(&net, &h, &[("a", "X"), ("b", "X")]).unwrap();
    let closed = close_annotations(&raw, &h).unwrap();
    let norm = normalize(&h, &ClassCensus::new(&h, &closed)).unwrap();
    let id = |n: &str| h.id(n).unwrap();
    assert_eq!(norm.tree.parent(id("X")), Some(id("P")));
    assert_eq!(norm.removed, vec![(id("Q"), id("X"))]);
}

#[test]
fn cycles_are_rejected() {
    let err = Hierarchy::from_edges(&[("a", "b"), ("b", "c"), ("c", "a")], &[]).unwrap_err();
    assert!(matches!(err, Error::Cycle(_)));
}

#[test]
fn obo_and_tsv_agree() {
    let obo = "format-version: 1.2\n\n[Term]\nid: GO:1\nname: root\n\n[Term]\nid: GO:2\nis_a: GO:1 ! root\n\n\
               [Term]\nid: GO:3\nis_a: GO:1\nis_a: GO:2 ! two\n\n[Typedef]\nid: part_of\n";
    let a = parse_obo_lite(obo).unwrap();
    let b = Hierarchy::from_edges(&[("GO:1", "GO:2"), ("GO:1", "GO:3"), ("GO:2", "GO:3")], &[]).unwrap();
    let mut ea: Vec<(String, String)> =
        a.edges().iter().map(|&(p, c)| (a.name(p).into(), a.name(c).into())).collect();
    let mut eb: Vec<(String, String)> =
        b.edges().iter().map(|&(p, c)| (b.name(p).into(), b.name(c).into())).collect();
    ea.sort();
    eb.sort();
    assert_eq!(ea, eb);
}

/// Random DAG plus random raw annotations over `nodes` nodes.
fn random_case(seed: u64, nodes: usize) -> (Hierarchy, AnnotationMap) {
    let mut rng = seed::rng(seed);
    let n = rng.random_range(2..=50);
    let e = rng.random_range(0..=(n * (n - 1) / 2).min(3 * n));
    let edges = random_dag(n, e, seed);
    let names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    let h = Hierarchy::from_edges(&edges, &names).unwrap();
    let mut raw = AnnotationMap::empty(nodes, h.len());
    for v in 0..nodes {
        for _ in 0..rng.random_range(0..3) {
            let c = h.id(&format!("c{}", rng.random_range(0..n))).unwrap();
            raw.insert(v, c).unwrap();
        }
    }
    (h, raw)
}

/// Ancestors by plain reachability, for comparison.
fn brute_closure(h: &Hierarchy, raw: &AnnotationMap) -> Vec<Vec<bool>> {
    (0..raw.node_count())
        .map(|v| {
            let mut mark = vec![false; h.len()];
            let mut stack: Vec<_> = raw.classes_of(v).to_vec();
            while let Some(c) = stack.pop() {
                if !mark[c.index()] {
                    mark[c.index()] = true;
                    stack.extend_from_slice(h.parents(c));
                }
            }
            mark
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closure_properties(seed in any::<u64>()) {
        let (h, raw) = random_case(seed, 12);
        let closed = close_annotations(&raw, &h).unwrap();
        let brute = brute_closure(&h, &raw);
        for v in 0..raw.node_count() {
            for c in h.classes() {
                prop_assert_eq!(closed.has(v, c), brute[v][c.index()]);
            }
            for &c in raw.classes_of(v) {
                prop_assert!(closed.has(v, c));
            }
        }
        prop_assert_eq!(&close_annotations(&closed, &h).unwrap(), &closed);
        for (p, c) in h.edges() {
            for v in closed.extent(c) {
                prop_assert!(closed.has(v, p));
            }
        }
    }

    #[test]
    fn normalization_keeps_a_maximum_weight_parent(seed in any::<u64>()) {
        let (h, raw) = random_case(seed, 20);
        let closed = close_annotations(&raw, &h).unwrap();
        let census = ClassCensus::new(&h, &closed);
        let norm = normalize(&h, &census).unwrap();
        let mut removed = 0;
        for c in h.classes() {
            let parents = h.parents(c);
            match norm.tree.parent(c) {
                None => prop_assert!(parents.is_empty()),
                Some(kept) => {
                    prop_assert!(parents.contains(&kept));
                    if census.annotated(c) > 0 {
                        let w = edge_weight(&census, kept, c).unwrap();
                        prop_assert!(w <= Ratio::from_integer(1));
                        for &p in parents {
                            prop_assert!(edge_weight(&census, p, c).unwrap() <= w);
                        }
                    }
                    removed += parents.len() - 1;
                }
            }
        }
        prop_assert_eq!(norm.removed.len(), removed);
    }
}

#[test]
fn normalization_time_grows_linearly() {
    let time = |edges: usize| {
        let n = edges / 25;
        let names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let h = Hierarchy::from_edges(&random_dag(n, edges, 4), &names).unwrap();
        let closed = AnnotationMap::empty(1, h.len());
        (0..5)
            .map(|_| {
                let t = std::time::Instant::now();
                let census = ClassCensus::new(&h, &closed);
                normalize(&h, &census).unwrap();
                t.elapsed()
            })
            .min()
            .unwrap()
    };
    let small = time(20_000);
    let large = time(40_000);
    let ratio = large.as_secs_f64() / small.as_secs_f64();
    assert!(ratio < 3.0, "{small:?} -> {large:?}");
}
