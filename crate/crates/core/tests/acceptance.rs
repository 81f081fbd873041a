//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! ```text
//! cargo test --release --test acceptance
//! ```

mod common;

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use hmc_core::config::RunConfig;
use hmc_core::embed::{embed_network, EmbeddingConfig};
use hmc_core::graph::{load_network, read_network, EdgeRecord};
use hmc_core::hierarchy::{
    close_annotations, edge_weight, normalize, parse_annotations_tsv, read_hierarchy, AnnotationMap, ClassCensus,
    Hierarchy,
};
use hmc_core::io::{read_text, write_text};
use hmc_core::learn::{logistic_gradient, logistic_loss, matrix, predict_proba, train, ClassifierConfig};
use hmc_core::metrics::{average_precision, confusion, optimum_threshold_with_f1, roc_auc};
use hmc_core::pipeline::Pipeline;
use hmc_core::resample::{oversample, smote, stratified_kfold, SmoteConfig};
use hmc_core::seed;
use hmc_core::synthetic::{planted_benchmark, random_dag, random_instance, PlantedConfig};
use num_rational::Ratio;
use rand::Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn secs(d: Duration) -> String {
    format!("{:.3}s", d.as_secs_f64())
}

fn diamond_golden() -> Outcome {
    let dir = common::fixture("diamond");
    let h = read_hierarchy(&dir.join("hierarchy.tsv")).unwrap();
    let net = read_network(&dir.join("edges.tsv"), None).unwrap();
    let pairs = parse_annotations_tsv(&read_text(&dir.join("annotations.tsv")).unwrap()).unwrap();
    let (raw, _) = AnnotationMap::from_pairs(&net, &h, &pairs).unwrap();
    let closed = close_annotations(&raw, &h).unwrap();
    let id = |n: &str| h.id(n).unwrap();

    let start = Instant::now();
    let census = ClassCensus::new(&h, &closed);
    let norm = normalize(&h, &census).unwrap();
    let elapsed = start.elapsed();

    let w_be = edge_weight(&census, id("B"), id("E")).unwrap();
    let w_ce = edge_weight(&census, id("C"), id("E")).unwrap();
    let removed: Vec<String> = norm
        .removed
        .iter()
        .map(|&(p, c)| format!("{}->{}", h.name(p), h.name(c)))
        .collect();
    let pass = w_be == Ratio::new(1, 3)
        && w_ce == Ratio::new(2, 3)
        && removed == ["B->E"]
        && elapsed < Duration::from_millis(1);
    outcome(
        pass,
        format!("w(B,E)={w_be} w(C,E)={w_ce} removed={removed:?} in {:.1}us", elapsed.as_secs_f64() * 1e6),
    )
}

fn closure_suite() -> Outcome {
    let mut violations = 0usize;
    let mut checks = 0usize;
    for s in 0..200u64 {
        let mut rng = seed::rng(seed::mix(s, &[2]));
        let n = rng.random_range(2..=50);
        let e = rng.random_range(0..=(n * (n - 1) / 2).min(4 * n));
        let names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
        let h = Hierarchy::from_edges(&random_dag(n, e, s), &names).unwrap();
        let nodes = 30;
        let mut phi = AnnotationMap::empty(nodes, h.len());
        let mut sub = AnnotationMap::empty(nodes, h.len());
        for v in 0..nodes {
            for _ in 0..rng.random_range(0..4) {
                let c = h.id(&names[rng.random_range(0..n)]).unwrap();
                phi.insert(v, c).unwrap();
                if rng.random_bool(0.5) {
                    sub.insert(v, c).unwrap();
                }
            }
        }
        let closed = close_annotations(&phi, &h).unwrap();
        let closed_sub = close_annotations(&sub, &h).unwrap();
        let again = close_annotations(&closed, &h).unwrap();
        checks += 1;
        violations += usize::from(again != closed);
        for v in 0..nodes {
            for c in h.classes() {
                checks += 2;
                violations += usize::from(phi.has(v, c) && !closed.has(v, c));
                violations += usize::from(closed_sub.has(v, c) && !closed.has(v, c));
            }
        }
        for (p, c) in h.edges() {
            for v in closed.extent(c) {
                checks += 1;
                violations += usize::from(!closed.has(v, p));
            }
        }
        let census = ClassCensus::new(&h, &closed);
        for (p, c) in h.edges() {
            if census.annotated(p) > 0 {
                let w = edge_weight(&census, p, c).unwrap();
                checks += 1;
                violations += usize::from(w > Ratio::from_integer(1));
            }
        }
    }
    outcome(violations == 0, format!("200 DAGs, {checks} checks, {violations} violations"))
}

/// Violations of the true-path rule in one finished run directory.
fn consistency_violations(out: &Path) -> Result<(usize, usize, usize), String> {
    let parent: HashMap<String, String> = read_text(&out.join("normalize/tree.tsv"))
        .map_err(|e| e.to_string())?
        .lines()
        .filter_map(|l| l.split_once('\t'))
        .map(|(p, c)| (c.to_string(), p.to_string()))
        .collect();
    let mut violations = 0;
    let mut checks = 0;
    let mut trained = 0;
    for entry in std::fs::read_dir(out.join("train")).map_err(|e| e.to_string())? {
        let dir = entry.map_err(|e| e.to_string())?.path();
        if !dir.is_dir() {
            continue;
        }
        let classes = read_text(&dir.join("classes.tsv")).map_err(|e| e.to_string())?;
        trained += classes.lines().filter(|l| l.split('\t').nth(2) == Some("trained")).count();
        let probs = read_text(&dir.join("probabilities.tsv")).map_err(|e| e.to_string())?;
        let mut cum: HashMap<(String, String), HashMap<String, f64>> = HashMap::new();
        for l in probs.lines().skip(1) {
            let f: Vec<&str> = l.split('\t').collect();
            cum.entry((f[0].into(), f[2].into()))
                .or_default()
                .insert(f[1].into(), f[4].parse().unwrap());
        }
        for per_class in cum.values() {
            for (c, &p) in per_class {
                if let Some(pp) = parent.get(c).and_then(|pc| per_class.get(pc)) {
                    checks += 1;
                    violations += usize::from(p > *pp);
                }
            }
        }
    }
    let predictions = read_text(&out.join("predict/predictions.tsv")).map_err(|e| e.to_string())?;
    let mut decided: HashMap<&str, HashMap<&str, bool>> = HashMap::new();
    for l in predictions.lines().skip(1) {
        let f: Vec<&str> = l.split('\t').collect();
        decided.entry(f[0]).or_default().insert(f[1], f[5] == "1");
    }
    let ext = read_text(&out.join("predict/extended_annotations.tsv")).map_err(|e| e.to_string())?;
    let mut sets: HashMap<&str, Vec<&str>> = HashMap::new();
    for l in ext.lines().skip(1) {
        let f: Vec<&str> = l.split('\t').collect();
        sets.entry(f[0]).or_default().push(f[1]);
    }
    for (node, per_class) in &decided {
        for (c, &d) in per_class {
            if d {
                checks += 1;
                let p = parent.get(*c);
                let in_set = |x: &str| sets.get(node).is_some_and(|s| s.contains(&x));
                violations += usize::from(!in_set(c) || p.is_some_and(|p| !in_set(p)));
            }
        }
    }
    for classes in sets.values() {
        for c in classes {
            if let Some(p) = parent.get(*c) {
                checks += 1;
                violations += usize::from(!classes.contains(&p.as_str()));
            }
        }
    }
    Ok((violations, checks, trained))
}

fn true_path_consistency() -> Outcome {
    let mut violations = 0;
    let mut checks = 0;
    let mut trained = 0;
    let mut failures = Vec::new();
    for s in 0..50u64 {
        let dir = tempfile::tempdir().unwrap();
        let inst = random_instance(1000 + s).unwrap();
        let extra = format!("{}\n[run]\nseed = {s}\n", common::FAST);
        let cfg = common::write_instance(dir.path(), &inst, &extra);
        let result = Pipeline::new(common::load(&cfg)).and_then(|p| p.run());
        match result.map_err(|e| e.to_string()).and_then(|_| consistency_violations(&dir.path().join("out"))) {
            Ok((v, c, t)) => {
                violations += v;
                checks += c;
                trained += t;
            }
            Err(e) => failures.push(format!("seed {}: {e}", 1000 + s)),
        }
    }
    outcome(
        violations == 0 && failures.is_empty() && trained > 0,
        format!("50 runs, {trained} trained classes, {checks} checks, {violations} violations, failed runs {failures:?}"),
    )
}

fn metric_oracles() -> Outcome {
    let mut worst = 0.0f64;
    let mut mismatched = 0;
    let mut instances = 0;
    let mut s = 0u64;
    while instances < 1000 {
        s += 1;
        let mut rng = seed::rng(seed::mix(s, &[4]));
        let n = rng.random_range(2..=100);
        let levels = rng.random_range(2..=40);
        let scores: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.3)).collect();
        if labels.iter().all(|&y| y) || labels.iter().all(|&y| !y) {
            continue;
        }
        instances += 1;
        let mut pairs = 0.0;
        let mut wins = 0.0;
        for i in 0..n {
            for j in 0..n {
                if labels[i] && !labels[j] {
                    pairs += 1.0;
                    wins += if scores[i] > scores[j] {
                        1.0
                    } else if scores[i] == scores[j] {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
        }
        let auc = wins / pairs;
        let pos = labels.iter().filter(|&&y| y).count() as f64;
        let mut thresholds = scores.clone();
        thresholds.sort_by(|a, b| b.total_cmp(a));
        thresholds.dedup();
        let mut ap = 0.0;
        let mut prev = 0.0;
        let mut best = (f64::NAN, -1.0);
        for &t in &thresholds {
            let (mut tp, mut fp) = (0.0, 0.0);
            for (&sc, &y) in scores.iter().zip(&labels) {
                if sc >= t {
                    if y {
                        tp += 1.0;
                    } else {
                        fp += 1.0;
                    }
                }
            }
            let recall = tp / pos;
            ap += (recall - prev) * tp / (tp + fp);
            prev = recall;
            let f1 = 2.0 * tp / (2.0 * tp + fp + (pos - tp));
            // descending scan: ties move to the smaller threshold
            if f1 >= best.1 {
                best = (t, f1);
            }
        }
        let (t, f1) = optimum_threshold_with_f1(&scores, &labels).unwrap();
        let cm_f1 = confusion(&scores, &labels, t).f1();
        let errs = [
            (roc_auc(&scores, &labels).unwrap() - auc).abs(),
            (average_precision(&scores, &labels).unwrap() - ap).abs(),
            (f1 - best.1).abs(),
            (cm_f1 - best.1).abs(),
        ];
        worst = errs.iter().fold(worst, |a, &b| a.max(b));
        mismatched += usize::from(t != best.0 || errs.iter().any(|&e| e >= 1e-12));
    }
    outcome(
        mismatched == 0,
        format!("{instances} instances, max abs error {worst:.2e}, {mismatched} mismatches"),
    )
}

fn resampling_suite() -> Outcome {
    let mut strat_bad = 0;
    let mut segment_bad = 0;
    let mut target_bad = 0;
    for s in 0..200u64 {
        let mut rng = seed::rng(seed::mix(s, &[5]));
        let n = rng.random_range(20..400);
        let rate = rng.random_range(0.05..0.5);
        let y: Vec<bool> = (0..n).map(|_| rng.random_bool(rate)).collect();
        let pos = y.iter().filter(|&&v| v).count();
        if pos >= 5 && n - pos >= 5 {
            let f = stratified_kfold(&y, 5, s).unwrap();
            let ideal = pos as f64 / 5.0;
            for k in 0..5 {
                let p = f.test_rows(k).iter().filter(|&&i| y[i]).count() as f64;
                strat_bad += usize::from((p - ideal).abs() >= 1.0);
            }
        }

        let m = rng.random_range(2..40);
        let d = rng.random_range(1..6);
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| rng.random_range(-10.0..10.0)).collect()).collect();
        let x = matrix(&rows);
        let cfg = SmoteConfig {
            k_neighbors: rng.random_range(1..8),
            target_ratio: 1.0,
            seed: s,
        };
        let out = smote(x.view(), 50, &cfg).unwrap();
        for (r, &(a, b)) in out.sources.iter().enumerate() {
            for j in 0..d {
                let (lo, hi) = (x[[a, j]].min(x[[b, j]]), x[[a, j]].max(x[[b, j]]));
                segment_bad += usize::from(!(out.rows[[r, j]] >= lo && out.rows[[r, j]] <= hi));
            }
        }

        let minority = rng.random_range(2..30);
        let majority = rng.random_range(31..200);
        let ratio = rng.random_range(0.2..=1.0);
        let rows: Vec<Vec<f64>> = (0..minority + majority).map(|i| vec![i as f64, (i % 7) as f64]).collect();
        let labels: Vec<bool> = (0..minority + majority).map(|i| i < minority).collect();
        let aug = oversample(matrix(&rows).view(), &labels, &SmoteConfig { target_ratio: ratio, ..cfg }).unwrap();
        let target = ((ratio * majority as f64).round() as usize).max(minority);
        target_bad += usize::from(aug.y.iter().filter(|&&v| v).count() != target);
    }
    outcome(
        strat_bad + segment_bad + target_bad == 0,
        format!("200 rounds: stratification {strat_bad}, segment {segment_bad}, target count {target_bad} violations"),
    )
}

fn learner_checks() -> Outcome {
    let mut worst = 0.0f64;
    for s in 0..20u64 {
        let mut rng = seed::rng(seed::mix(s, &[6]));
        let rows: Vec<Vec<f64>> = (0..50).map(|_| (0..4).map(|_| rng.random_range(-3.0..3.0)).collect()).collect();
        let x = matrix(&rows);
        let y: Vec<bool> = (0..50).map(|_| rng.random_bool(0.5)).collect();
        let w: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let l2 = 0.1 * (s % 3) as f64;
        let g = logistic_gradient(&w, x.view(), &y, l2);
        for j in 0..w.len() {
            let (mut up, mut down) = (w.clone(), w.clone());
            up[j] += 1e-6;
            down[j] -= 1e-6;
            let fd = (logistic_loss(&up, x.view(), &y, l2) - logistic_loss(&down, x.view(), &y, l2)) / 2e-6;
            worst = worst.max((fd - g[j]).abs() / fd.abs().max(g[j].abs()).max(1e-8));
        }
    }

    // two blobs separated by a band of width 2 around x + y = 0
    let mut rng = seed::rng(66);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    while rows.len() < 500 {
        let label = rows.len() % 2 == 0;
        let c = if label { 2.0 } else { -2.0 };
        let p = [c + rng.random_range(-2.5..2.5), c + rng.random_range(-2.5..2.5)];
        let margin = (p[0] + p[1]) / 2f64.sqrt();
        if (label && margin >= 1.0) || (!label && margin <= -1.0) {
            rows.push(p.to_vec());
            labels.push(label);
        }
    }
    let x = matrix(&rows);
    let start = Instant::now();
    let model = train(x.view(), &labels, "blobs", &ClassifierConfig::default()).unwrap();
    let p = predict_proba(&model, x.view(), "blobs").unwrap();
    let elapsed = start.elapsed();
    let correct = p.iter().zip(&labels).filter(|(p, y)| (**p >= 0.5) == **y).count();
    let accuracy = correct as f64 / labels.len() as f64;
    outcome(
        worst < 1e-4 && accuracy >= 0.95 && elapsed < Duration::from_secs(5),
        format!("max gradient rel error {worst:.2e}, blob accuracy {accuracy:.3} in {}", secs(elapsed)),
    )
}

fn embedding_sanity() -> Outcome {
    let mut edges = Vec::new();
    for side in ["a", "b"] {
        for i in 0..6 {
            for j in i + 1..6 {
                edges.push(EdgeRecord::new(format!("{side}{i}"), format!("{side}{j}"), 1.0));
            }
        }
    }
    edges.push(EdgeRecord::new("a0", "b0", 1.0));
    let net = load_network(edges).unwrap();
    let start = Instant::now();
    let emb = embed_network(&net, &EmbeddingConfig::default()).unwrap();
    let elapsed = start.elapsed();
    let side = |v: usize| net.name(v).starts_with('a');
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0, 0.0, 0);
    for u in 0..net.node_count() {
        for v in u + 1..net.node_count() {
            let c = emb.cosine(u, v);
            if side(u) == side(v) {
                intra += c;
                ni += 1;
            } else {
                inter += c;
                nx += 1;
            }
        }
    }
    let gap = intra / ni as f64 - inter / nx as f64;
    outcome(
        gap >= 0.1 && elapsed < Duration::from_secs(30),
        format!("intra-inter cosine gap {gap:.3} in {}", secs(elapsed)),
    )
}

struct Benchmark {
    dir: tempfile::TempDir,
    elapsed: Duration,
}

fn run_benchmark() -> Result<Benchmark, String> {
    let planted = PlantedConfig::default();
    let inst = planted_benchmark(&planted).map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let p = dir.path();
    write_text(&p.join("edges.tsv"), &inst.edges_tsv()).map_err(|e| e.to_string())?;
    write_text(&p.join("hierarchy.tsv"), &inst.hierarchy_tsv()).map_err(|e| e.to_string())?;
    write_text(&p.join("annotations.tsv"), &inst.annotations_tsv()).map_err(|e| e.to_string())?;
    let mut cfg = RunConfig::from_toml(
        "[input]\nedges = \"edges.tsv\"\nannotations = \"annotations.tsv\"\nhierarchy = \"hierarchy.tsv\"\n",
    )
    .map_err(|e| e.to_string())?;
    cfg.resolve_paths(p);
    cfg.run.seed = planted.seed;
    cfg.run.workers = 1;
    cfg.run.baseline = true;
    let start = Instant::now();
    Pipeline::new(cfg).and_then(|p| p.run()).map_err(|e| e.to_string())?;
    Ok(Benchmark {
        dir,
        elapsed: start.elapsed(),
    })
}

fn tsv_rows(text: &str) -> Vec<BTreeMap<String, String>> {
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split('\t').collect();
    lines
        .map(|l| header.iter().map(|h| h.to_string()).zip(l.split('\t').map(String::from)).collect())
        .collect()
}

/// Baseline F1 when decisions use the posterior's own 0.5 cut instead of an
/// optimized threshold. Reported only.
fn hbn_bayes_f1(out: &Path) -> Option<f64> {
    let inst = planted_benchmark(&PlantedConfig::default()).ok()?;
    let h = inst.hierarchy().ok()?;
    let (raw, _) = AnnotationMap::from_pairs(&inst.net, &h, &inst.annotations).ok()?;
    let closed = close_annotations(&raw, &h).ok()?;
    let rows = tsv_rows(&read_text(&out.join("baseline/hbn_predictions.tsv")).ok()?);
    let mut per_class: BTreeMap<String, (Vec<f64>, Vec<bool>)> = BTreeMap::new();
    for r in rows {
        let v = inst.net.index_of(&r["node"])?;
        let c = h.id(&r["class"])?;
        let e = per_class.entry(r["class"].clone()).or_default();
        e.0.push(r["p_cumulative"].parse().ok()?);
        e.1.push(closed.has(v, c));
    }
    let f1s: Vec<f64> = per_class
        .values()
        .filter(|(_, y)| y.iter().any(|&b| b) && y.iter().any(|&b| !b))
        .map(|(s, y)| confusion(s, y, 0.5).f1())
        .collect();
    (!f1s.is_empty()).then(|| f1s.iter().sum::<f64>() / f1s.len() as f64)
}

fn synthetic_benchmark(bench: &Result<Benchmark, String>) -> Outcome {
    let bench = match bench {
        Ok(b) => b,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let out = bench.dir.path().join("out");
    let rows = match read_text(&out.join("baseline/comparison.tsv")) {
        Ok(t) => tsv_rows(&t),
        Err(e) => return outcome(false, e.to_string()),
    };
    let f = |r: &BTreeMap<String, String>, k: &str| r[k].parse::<f64>().unwrap();
    let hbn_mean = rows.iter().map(|r| f(r, "hbn_threshold_f1")).sum::<f64>() / rows.len() as f64;
    let engine_mean = rows.iter().map(|r| f(r, "engine_threshold_f1")).sum::<f64>() / rows.len() as f64;
    let per_class: Vec<String> = rows
        .iter()
        .map(|r| format!("{}={:.3}/{:.3}", r["class"], f(r, "engine_threshold_f1"), f(r, "hbn_threshold_f1")))
        .collect();
    let below: Vec<&str> = rows
        .iter()
        .filter(|r| f(r, "engine_threshold_f1") < hbn_mean)
        .map(|r| r["class"].as_str())
        .collect();
    // top trained level: children of the constant-positive sub-hierarchy root
    let tree: HashMap<String, String> = read_text(&out.join("normalize/tree.tsv"))
        .unwrap_or_default()
        .lines()
        .filter_map(|l| l.split_once('\t'))
        .map(|(p, c)| (c.to_string(), p.to_string()))
        .collect();
    let sub_roots: Vec<String> = rows.iter().map(|r| r["root"].clone()).collect();
    let top: Vec<(&str, f64)> = rows
        .iter()
        .filter(|r| tree.get(&r["class"]).is_some_and(|p| sub_roots.contains(p)))
        .map(|r| (r["class"].as_str(), f(r, "engine_threshold_f1")))
        .collect();
    let top_ok = !top.is_empty() && top.iter().all(|&(_, v)| v >= 0.6);
    let fast = bench.elapsed < Duration::from_secs(120);
    let bayes = hbn_bayes_f1(&out).map_or("n/a".to_string(), |v| format!("{v:.3}"));
    outcome(
        below.is_empty() && top_ok && fast,
        format!(
            "engine/hbn F1 {}; hbn mean {hbn_mean:.3}, engine mean {engine_mean:.3}; below hbn mean {below:?}; \
             top level {top:?}; hbn mean F1 at posterior 0.5 {bayes}; {} single-threaded",
            per_class.join(" "),
            secs(bench.elapsed)
        ),
    )
}

fn scale_harness(bench: &Result<Benchmark, String>) -> Outcome {
    let n = 2000;
    let edges = random_dag(n, 100_000, 99);
    let names: Vec<String> = (0..n).map(|i| format!("c{i}")).collect();
    let h = Hierarchy::from_edges(&edges, &names).unwrap();
    let mut rng = seed::rng(99);
    let nodes = 5000;
    let mut raw = AnnotationMap::empty(nodes, h.len());
    for v in 0..nodes {
        for _ in 0..3 {
            raw.insert(v, h.id(&names[rng.random_range(0..n)]).unwrap()).unwrap();
        }
    }
    let closed = close_annotations(&raw, &h).unwrap();
    let start = Instant::now();
    let census = ClassCensus::new(&h, &closed);
    let norm = normalize(&h, &census).unwrap();
    let elapsed = start.elapsed();
    let tree_edges = norm.tree.edges().len();

    let table = bench
        .as_ref()
        .ok()
        .and_then(|b| read_text(&b.dir.path().join("out/baseline/timing.tsv")).ok())
        .unwrap_or_default();
    let rows = tsv_rows(&table);
    let has_table = table.starts_with("root\tclasses\tnodes\tengine_seconds\thbn_seconds\thbn_over_engine")
        && !rows.is_empty();
    let ratios: Vec<String> = rows
        .iter()
        .map(|r| format!("{} engine {}s hbn {}s ratio {}", r["root"], r["engine_seconds"], r["hbn_seconds"], r["hbn_over_engine"]))
        .collect();
    outcome(
        h.edge_count() == 100_000 && tree_edges + norm.removed.len() == 100_000 && elapsed < Duration::from_secs(1) && has_table,
        format!(
            "{} edges over {n} classes normalized in {}; timing table: {}",
            h.edge_count(),
            secs(elapsed),
            ratios.join("; ")
        ),
    )
}

fn determinism() -> Outcome {
    let run = || -> Result<Vec<(String, Vec<u8>)>, String> {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let cfg = common::copy_fixture("synthetic", dir.path());
        let o = Command::new(env!("CARGO_BIN_EXE_hmc"))
            .arg("--config")
            .arg(&cfg)
            .arg("run")
            .output()
            .map_err(|e| e.to_string())?;
        if !o.status.success() {
            return Err(String::from_utf8_lossy(&o.stderr).into_owned());
        }
        let out = dir.path().join("out");
        Ok(["predict", "eval", "baseline"]
            .iter()
            .flat_map(|s| {
                common::snapshot(&out.join(s), &["timing.tsv"])
                    .into_iter()
                    .map(move |(p, b)| (format!("{s}/{p}"), b))
            })
            .collect())
    };
    match (run(), run()) {
        (Ok(a), Ok(b)) => {
            let differing: Vec<&str> = a
                .iter()
                .zip(&b)
                .filter(|(x, y)| x != y)
                .map(|(x, _)| x.0.as_str())
                .collect();
            outcome(
                a.len() == b.len() && differing.is_empty() && !a.is_empty(),
                format!("{} artifacts compared, differing {differing:?}", a.len()),
            )
        }
        (Err(e), _) | (_, Err(e)) => outcome(false, format!("run failed: {e}")),
    }
}

fn main() -> ExitCode {
    let mut all = true;
    let mut report = |n: usize, name: &str, o: Outcome| {
        all &= o.pass;
        println!("criterion {n:>2} {name:<24} {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    };
    report(1, "diamond golden", diamond_golden());
    report(2, "closure and poset", closure_suite());
    report(3, "true-path consistency", true_path_consistency());
    report(4, "metric oracles", metric_oracles());
    report(5, "resampling", resampling_suite());
    report(6, "learner", learner_checks());
    report(7, "embedding sanity", embedding_sanity());
    let bench = run_benchmark();
    report(8, "synthetic benchmark", synthetic_benchmark(&bench));
    report(9, "scale and timing", scale_harness(&bench));
    report(10, "determinism", determinism());
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
