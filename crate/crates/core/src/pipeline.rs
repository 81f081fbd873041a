//! Stage-wise batch pipeline over an output directory.
//!
//! | stage       | consumes            | writes                                              |
//! |-------------|---------------------|-----------------------------------------------------|
//! | `normalize` | inputs              | `tree.tsv`, `removed_edges.tsv`, `edge_weights.tsv` |
//! | `split`     | normalize           | `summary.tsv`, one `<root>.tsv` per sub-hierarchy   |
//! | `features`  | split               | `<root>.tsv` topological features                   |
//! | `embed`     | split               | `<root>.tsv` node embeddings                        |
//! | `train`     | features, embed     | `<root>/{probabilities,classes,folds,grid}.tsv`     |
//! | `predict`   | train               | `predictions.tsv`, `extended_annotations.tsv`       |
//! | `eval`      | predict             | `metrics.json`, `curves/<root>/<class>.csv`         |
//! | `baseline`  | train               | `hbn_predictions.tsv`, `metrics.json`, comparisons  |
//!
//! Every stage writes `<stage>/manifest.tsv` with SHA-256 hashes of its
//! outputs and of the upstream manifests it consumed; downstream stages
//! refuse to run on missing or modified artifacts. Wall-clock timings go to
//! `<stage>/timing.tsv`, outside the manifests, so reruns with the same seed
//! reproduce every manifest byte for byte.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::dataset::FeatureSpace;
use crate::embed::{embed_network, EmbeddingMatrix};
use crate::engine::{
    decide_and_extend, train_subhierarchy, Candidates, ClassStatus, ExtendedAnnotation, PredictionRecord, ProbTable,
    ScoredRows, SubHierarchyRun,
};
use crate::error::{Error, Result};
use crate::graph::{read_network, topological_features, Network, NodeFeatureTable};
use crate::hbn::cross_validated_scores;
use crate::hierarchy::{
    close_annotations, normalize, parse_annotations_tsv, read_hierarchy, split_subhierarchies, AnnotationMap,
    ClassCensus, ClassId, Hierarchy, SubHierarchy, TreeHierarchy,
};
use crate::io::{file_token, hash_file, read_text, write_text};
use crate::learn::{ClassifierKind, Learner, Logistic};
use crate::metrics::{average_precision, confusion, optimum_threshold, pr_curve, pr_curve_csv, roc_auc, ConfusionMatrix};
use crate::resample::FoldAssignment;
use crate::seed;

pub const STAGES: [&str; 8] = ["normalize", "split", "features", "embed", "train", "predict", "eval", "baseline"];

const PREDICTION_HEADER: &str = "node\tclass\tp_local\tp_cumulative\tthreshold\tdecision";

fn upstream_of(stage: &str) -> &'static [&'static str] {
    match stage {
        "split" => &["normalize"],
        "features" | "embed" => &["split"],
        "train" => &["features", "embed"],
        "predict" | "baseline" => &["train"],
        "eval" => &["predict"],
        _ => &[],
    }
}

/// Hashes recorded by a stage.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Manifest {
    pub stage: String,
    pub seed: u64,
    /// `(role, sha256)` of external input files.
    pub inputs: Vec<(String, String)>,
    /// `(stage, sha256 of its manifest)`.
    pub upstream: Vec<(String, String)>,
    /// `(path relative to the output directory, sha256)`.
    pub outputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn to_tsv(&self) -> String {
        let mut out = format!("stage\t{}\nseed\t{}\n", self.stage, self.seed);
        for (kind, entries) in [("input", &self.inputs), ("upstream", &self.upstream), ("output", &self.outputs)] {
            for (k, v) in entries {
                out.push_str(&format!("{kind}\t{k}\t{v}\n"));
            }
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<Manifest> {
        let mut m = Manifest::default();
        for (i, line) in text.lines().enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            let bad = || Error::parse("manifest", i + 1, format!("unexpected line `{line}`"));
            match (f.first().copied(), f.len()) {
                (Some("stage"), 2) => m.stage = f[1].to_string(),
                (Some("seed"), 2) => m.seed = f[1].parse().map_err(|_| bad())?,
                (Some("input"), 3) => m.inputs.push((f[1].into(), f[2].into())),
                (Some("upstream"), 3) => m.upstream.push((f[1].into(), f[2].into())),
                (Some("output"), 3) => m.outputs.push((f[1].into(), f[2].into())),
                _ => return Err(bad()),
            }
        }
        Ok(m)
    }
}

/// Parsed and closed inputs.
#[derive(Debug, Clone)]
pub struct Inputs {
    pub net: Network,
    pub hierarchy: Hierarchy,
    pub closed: AnnotationMap,
    /// `(role, sha256)` per input file.
    pub hashes: Vec<(String, String)>,
    /// Annotations naming nodes absent from the network.
    pub skipped_annotations: usize,
}

/// Everything downstream stages rebuild from inputs and the normalized tree.
#[derive(Debug, Clone)]
pub struct Context {
    pub inputs: Inputs,
    pub tree: TreeHierarchy,
    pub subs: Vec<SubHierarchy>,
}

impl Context {
    pub fn root_name(&self, sub: &SubHierarchy) -> &str {
        self.tree.name(sub.root)
    }
}

/// One sub-hierarchy's row in the split summary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SplitRow {
    pub root: String,
    pub classes: usize,
    pub targets: usize,
    pub nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub split: Vec<SplitRow>,
    /// `(stage, seconds)`.
    pub stage_seconds: Vec<(String, f64)>,
    pub output: PathBuf,
}

/// Collects a stage's outputs and writes its manifest.
struct StageWriter<'a> {
    out: &'a Path,
    manifest: Manifest,
}

impl<'a> StageWriter<'a> {
    fn start(out: &'a Path, stage: &str, seed: u64) -> Result<Self> {
        let dir = out.join(stage);
        if dir.exists() {
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        let mut manifest = Manifest {
            stage: stage.to_string(),
            seed,
            ..Manifest::default()
        };
        for up in upstream_of(stage) {
            let path = out.join(up).join("manifest.tsv");
            manifest.upstream.push((up.to_string(), hash_file(&path)?));
        }
        Ok(StageWriter { out, manifest })
    }

    fn write(&mut self, rel: &str, contents: &str) -> Result<()> {
        let rel = format!("{}/{rel}", self.manifest.stage);
        write_text(&self.out.join(&rel), contents)?;
        self.manifest.outputs.push((rel, crate::io::sha256_hex(contents.as_bytes())));
        Ok(())
    }

    /// Writes a file that is not part of the manifest.
    fn write_untracked(&self, rel: &str, contents: &str) -> Result<()> {
        write_text(&self.out.join(&self.manifest.stage).join(rel), contents)
    }

    fn finish(self) -> Result<()> {
        write_text(
            &self.out.join(&self.manifest.stage).join("manifest.tsv"),
            &self.manifest.to_tsv(),
        )
    }
}

fn timing_tsv(rows: &[(String, f64)]) -> String {
    let mut out = String::from("scope\tseconds\n");
    for (k, s) in rows {
        out.push_str(&format!("{k}\t{s:.6}\n"));
    }
    out
}

/// Splits a tab-separated table, checking its header.
fn table<'t>(text: &'t str, context: &str, header: &str) -> Result<Vec<Vec<&'t str>>> {
    let mut lines = text.lines();
    if lines.next() != Some(header) {
        return Err(Error::parse(context, 1, format!("expected header `{header}`")));
    }
    let width = header.split('\t').count();
    lines
        .enumerate()
        .map(|(i, l)| {
            let f: Vec<&str> = l.split('\t').collect();
            if f.len() == width {
                Ok(f)
            } else {
                Err(Error::parse(context, i + 2, format!("expected {width} fields")))
            }
        })
        .collect()
}

fn num<T: std::str::FromStr>(s: &str, context: &str) -> Result<T> {
    s.parse()
        .map_err(|_| Error::parse(context, 0, format!("not a number: `{s}`")))
}

/// Per-class evaluation of scored, decided records.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassReport {
    pub class: String,
    pub samples: usize,
    pub positives: usize,
    pub threshold: f64,
    /// Of the true-path consistent decisions.
    pub confusion: ConfusionMatrix,
    pub tpr: f64,
    pub tnr: f64,
    pub precision: f64,
    pub f1: f64,
    /// F1 of `p_cumulative ≥ threshold`, before parent gating.
    pub threshold_f1: f64,
    pub average_precision: f64,
    pub roc_auc: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct MeanReport {
    pub classes: usize,
    pub tpr: f64,
    pub tnr: f64,
    pub precision: f64,
    pub f1: f64,
    pub threshold_f1: f64,
    pub average_precision: f64,
    pub roc_auc: f64,
}

impl MeanReport {
    fn of(reports: &[&ClassReport]) -> MeanReport {
        let n = reports.len();
        if n == 0 {
            return MeanReport::default();
        }
        let mean = |f: fn(&ClassReport) -> f64| reports.iter().map(|r| f(r)).sum::<f64>() / n as f64;
        MeanReport {
            classes: n,
            tpr: mean(|r| r.tpr),
            tnr: mean(|r| r.tnr),
            precision: mean(|r| r.precision),
            f1: mean(|r| r.f1),
            threshold_f1: mean(|r| r.threshold_f1),
            average_precision: mean(|r| r.average_precision),
            roc_auc: mean(|r| r.roc_auc),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubHierarchyReport {
    pub root: String,
    pub nodes: usize,
    pub mean: MeanReport,
    pub classes: Vec<ClassReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub model: String,
    pub overall: MeanReport,
    pub subhierarchies: Vec<SubHierarchyReport>,
}

impl MetricsReport {
    pub fn class(&self, name: &str) -> Option<&ClassReport> {
        self.subhierarchies
            .iter()
            .flat_map(|s| &s.classes)
            .find(|c| c.class == name)
    }
}

/// Rows of one sub-hierarchy as read back from the `train` stage.
#[derive(Debug, Clone)]
struct TrainedArtifacts {
    scored: ScoredRows,
    extra: Option<ScoredRows>,
    thresholds: BTreeMap<ClassId, f64>,
    statuses: BTreeMap<ClassId, String>,
}

pub struct Pipeline {
    cfg: RunConfig,
    learner: Box<dyn Learner>,
}

impl Pipeline {
    /// Uses the built-in logistic learner, or the external command when the
    /// configuration asks for one.
    pub fn new(cfg: RunConfig) -> Result<Pipeline> {
        let learner: Box<dyn Learner> = match (cfg.classifier.kind, cfg.external_command()) {
            (ClassifierKind::External, Some(cmd)) => Box::new(cmd),
            (ClassifierKind::External, None) => {
                return Err(Error::Config("external classifier without a command".into()))
            }
            (ClassifierKind::BuiltinLogistic, _) => Box::new(Logistic),
        };
        Ok(Pipeline::with_learner(cfg, learner))
    }

    pub fn with_learner(cfg: RunConfig, learner: Box<dyn Learner>) -> Pipeline {
        Pipeline { cfg, learner }
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn output_dir(&self) -> &Path {
        &self.cfg.run.output
    }

    fn seed(&self) -> u64 {
        self.cfg.run.seed
    }

    /// Runs one stage by name.
    pub fn run_stage(&self, stage: &str) -> Result<()> {
        match stage {
            "normalize" => self.normalize(),
            "split" => self.split().map(|_| ()),
            "features" => self.features(),
            "embed" => self.embed(),
            "train" => self.train(),
            "predict" => self.predict(),
            "eval" => self.eval().map(|_| ()),
            "baseline" => self.baseline().map(|_| ()),
            other => Err(Error::Config(format!("unknown stage `{other}`"))),
        }
    }

    /// All stages in order (the baseline only when configured), on a worker
    /// pool of `run.workers` threads.
    pub fn run(&self) -> Result<RunReport> {
        let workers = match self.cfg.run.workers {
            0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
            n => n,
        };
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?;
        pool.install(|| {
            let mut stage_seconds = Vec::new();
            for stage in STAGES {
                if stage == "baseline" && !self.cfg.run.baseline {
                    continue;
                }
                let t = Instant::now();
                self.run_stage(stage)?;
                stage_seconds.push((stage.to_string(), t.elapsed().as_secs_f64()));
                log::info!("{stage} done in {:.3}s", t.elapsed().as_secs_f64());
            }
            write_text(&self.output_dir().join("timing.tsv"), &timing_tsv(&stage_seconds))?;
            Ok(RunReport {
                split: self.read_split_summary()?,
                stage_seconds,
                output: self.output_dir().to_path_buf(),
            })
        })
    }

    fn load_inputs_unchecked(&self) -> Result<Inputs> {
        let inp = &self.cfg.input;
        let load = || -> Result<Inputs> {
            let net = read_network(&inp.edges, inp.nodes.as_deref())?;
            let hierarchy = read_hierarchy(&inp.hierarchy)?;
            let pairs = parse_annotations_tsv(&read_text(&inp.annotations)?)?;
            let (raw, skipped) = AnnotationMap::from_pairs(&net, &hierarchy, &pairs)?;
            if skipped > 0 {
                log::warn!("{skipped} annotations name nodes outside the network");
            }
            let closed = close_annotations(&raw, &hierarchy)?;
            let mut hashes = vec![
                ("edges".to_string(), hash_file(&inp.edges)?),
                ("annotations".to_string(), hash_file(&inp.annotations)?),
                ("hierarchy".to_string(), hash_file(&inp.hierarchy)?),
            ];
            if let Some(n) = &inp.nodes {
                hashes.push(("nodes".to_string(), hash_file(n)?));
            }
            Ok(Inputs {
                net,
                hierarchy,
                closed,
                hashes,
                skipped_annotations: skipped,
            })
        };
        load().map_err(|e| e.in_stage("ingest", None))
    }

    /// Loads inputs and checks they are the ones `normalize` saw.
    pub fn load_inputs(&self) -> Result<Inputs> {
        let inputs = self.load_inputs_unchecked()?;
        let m = self.require("normalize")?;
        if m.inputs != inputs.hashes {
            let changed = inputs
                .hashes
                .iter()
                .find(|h| !m.inputs.contains(h))
                .map_or("inputs", |h| h.0.as_str());
            let path = match changed {
                "edges" => self.cfg.input.edges.clone(),
                "annotations" => self.cfg.input.annotations.clone(),
                "hierarchy" => self.cfg.input.hierarchy.clone(),
                _ => self.cfg.input.nodes.clone().unwrap_or_default(),
            };
            return Err(Error::StaleArtifact {
                stage: "normalize".into(),
                path,
            });
        }
        Ok(inputs)
    }

    /// Verifies a stage's manifest, its outputs and, recursively, its
    /// upstream stages.
    pub fn require(&self, stage: &str) -> Result<Manifest> {
        let out = self.output_dir();
        let path = out.join(stage).join("manifest.tsv");
        if !path.exists() {
            return Err(Error::MissingArtifact {
                stage: stage.to_string(),
                path,
            });
        }
        let m = Manifest::from_tsv(&read_text(&path)?)?;
        for (rel, sha) in &m.outputs {
            let p = out.join(rel);
            if !p.exists() {
                return Err(Error::MissingArtifact {
                    stage: stage.to_string(),
                    path: p,
                });
            }
            if &hash_file(&p)? != sha {
                return Err(Error::StaleArtifact {
                    stage: stage.to_string(),
                    path: p,
                });
            }
        }
        for (up, sha) in &m.upstream {
            self.require(up)?;
            if &hash_file(&out.join(up).join("manifest.tsv"))? != sha {
                return Err(Error::StaleArtifact {
                    stage: stage.to_string(),
                    path,
                });
            }
        }
        Ok(m)
    }

    pub fn normalize(&self) -> Result<()> {
        let inner = || -> Result<()> {
            let inputs = self.load_inputs_unchecked()?;
            let h = &inputs.hierarchy;
            let census = ClassCensus::new(h, &inputs.closed);
            let norm = normalize(h, &census)?;
            let mut w = StageWriter::start(self.output_dir(), "normalize", self.seed())?;
            w.manifest.inputs = inputs.hashes.clone();
            let by_name = |e: &[(ClassId, ClassId)]| {
                let mut v: Vec<(&str, &str)> = e.iter().map(|&(p, c)| (h.name(p), h.name(c))).collect();
                v.sort();
                v.iter().map(|(p, c)| format!("{p}\t{c}\n")).collect::<String>()
            };
            w.write("tree.tsv", &by_name(&norm.tree.edges()))?;
            w.write("removed_edges.tsv", &by_name(&norm.removed))?;
            let mut weights = String::from("parent\tchild\tweight\tkept\n");
            let mut edges: Vec<(ClassId, ClassId)> = h.edges();
            edges.sort_by(|a, b| (h.name(a.0), h.name(a.1)).cmp(&(h.name(b.0), h.name(b.1))));
            for (p, c) in edges {
                let wt = if census.annotated(c) == 0 {
                    "0".to_string()
                } else {
                    crate::hierarchy::edge_weight(&census, p, c).map_or("0".to_string(), |r| r.to_string())
                };
                let kept = norm.tree.parent(c) == Some(p);
                weights.push_str(&format!("{}\t{}\t{wt}\t{}\n", h.name(p), h.name(c), u8::from(kept)));
            }
            w.write("edge_weights.tsv", &weights)?;
            w.finish()
        };
        inner().map_err(|e| e.in_stage("normalize", None))
    }

    /// Rebuilds inputs, the normalized tree and the sub-hierarchies.
    pub fn context(&self) -> Result<Context> {
        let inputs = self.load_inputs()?;
        let text = read_text(&self.output_dir().join("normalize/tree.tsv"))?;
        let h = &inputs.hierarchy;
        let edges = crate::hierarchy::parse_hierarchy_tsv(&text)?
            .iter()
            .map(|(p, c)| Ok((h.require(p)?, h.require(c)?)))
            .collect::<Result<Vec<_>>>()?;
        let tree = TreeHierarchy::from_edges(h, &edges)?;
        let c = &self.cfg.classes;
        let subs = split_subhierarchies(&tree, &inputs.closed, &inputs.net, c.min_size, c.max_size)?;
        Ok(Context { inputs, tree, subs })
    }

    fn split_rows(ctx: &Context) -> Vec<SplitRow> {
        let mut rows: Vec<SplitRow> = ctx
            .subs
            .iter()
            .map(|s| SplitRow {
                root: ctx.root_name(s).to_string(),
                classes: s.classes.len(),
                targets: s.targets.len(),
                nodes: s.node_ids.len(),
            })
            .collect();
        rows.sort_by(|a, b| (a.classes, &a.root).cmp(&(b.classes, &b.root)));
        rows
    }

    /// Writes the sub-hierarchy summary, sorted by ascending class count.
    pub fn split(&self) -> Result<Vec<SplitRow>> {
        let inner = || -> Result<Vec<SplitRow>> {
            self.require("normalize")?;
            let ctx = self.context()?;
            let rows = Self::split_rows(&ctx);
            let mut w = StageWriter::start(self.output_dir(), "split", self.seed())?;
            let mut summary = String::from("root\tclasses\ttargets\tnodes\n");
            for r in &rows {
                summary.push_str(&format!("{}\t{}\t{}\t{}\n", r.root, r.classes, r.targets, r.nodes));
            }
            w.write("summary.tsv", &summary)?;
            let counts = ctx.inputs.closed.class_counts();
            for sub in &ctx.subs {
                let mut text = String::from("class\tparent\tannotated\trole\n");
                for &c in &sub.classes {
                    let role = if c == sub.root {
                        "root"
                    } else if sub.is_target(c) {
                        "target"
                    } else {
                        "structural"
                    };
                    let parent = if c == sub.root {
                        "-"
                    } else {
                        ctx.tree.parent(c).map_or("-", |p| ctx.tree.name(p))
                    };
                    text.push_str(&format!("{}\t{parent}\t{}\t{role}\n", ctx.tree.name(c), counts[c.index()]));
                }
                w.write(&format!("{}.tsv", file_token(ctx.root_name(sub))), &text)?;
            }
            w.finish()?;
            Ok(rows)
        };
        inner().map_err(|e| e.in_stage("split", None))
    }

    pub fn read_split_summary(&self) -> Result<Vec<SplitRow>> {
        let text = read_text(&self.output_dir().join("split/summary.tsv"))?;
        table(&text, "split summary", "root\tclasses\ttargets\tnodes")?
            .into_iter()
            .map(|f| {
                Ok(SplitRow {
                    root: f[0].to_string(),
                    classes: num(f[1], "split summary")?,
                    targets: num(f[2], "split summary")?,
                    nodes: num(f[3], "split summary")?,
                })
            })
            .collect()
    }

    /// `(artifact name, network)` pairs to compute node features on: the
    /// whole network when widening, otherwise each sub-hierarchy's subgraph.
    fn feature_targets<'c>(&self, ctx: &'c Context) -> Vec<(String, &'c Network)> {
        if self.cfg.run.widen {
            vec![("network".to_string(), &ctx.inputs.net)]
        } else {
            ctx.subs
                .iter()
                .map(|s| (ctx.root_name(s).to_string(), &s.subgraph))
                .collect()
        }
    }

    fn per_target_stage<F>(&self, stage: &'static str, compute: F) -> Result<()>
    where
        F: Fn(&str, &Network) -> Result<String> + Sync,
    {
        let inner = || -> Result<()> {
            self.require("split")?;
            let ctx = self.context()?;
            let targets = self.feature_targets(&ctx);
            let results = targets
                .par_iter()
                .map(|(name, net)| {
                    let t = Instant::now();
                    let text = compute(name, net).map_err(|e| e.in_stage(stage, Some(name)))?;
                    Ok((name.clone(), text, t.elapsed().as_secs_f64()))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut w = StageWriter::start(self.output_dir(), stage, self.seed())?;
            let mut timing = Vec::new();
            for (name, text, secs) in results {
                w.write(&format!("{}.tsv", file_token(&name)), &text)?;
                timing.push((name, secs));
            }
            w.write_untracked("timing.tsv", &timing_tsv(&timing))?;
            w.finish()
        };
        inner().map_err(|e| e.in_stage(stage, None))
    }

    pub fn features(&self) -> Result<()> {
        let options = self.cfg.features;
        self.per_target_stage("features", |_, net| Ok(topological_features(net, options)?.to_tsv()))
    }

    pub fn embed(&self) -> Result<()> {
        let base = self.cfg.embedding_config();
        let master = self.seed();
        self.per_target_stage("embed", |name, net| {
            let mut cfg = base.clone();
            cfg.walk.seed = seed::derive(master, &[name, "walk"]);
            cfg.skipgram.seed = seed::derive(master, &[name, "skipgram"]);
            Ok(embed_network(net, &cfg)?.to_tsv())
        })
    }

    fn read_space_tables(&self, name: &str) -> Result<(NodeFeatureTable, EmbeddingMatrix)> {
        let out = self.output_dir();
        let token = file_token(name);
        let feats = NodeFeatureTable::from_tsv(&read_text(&out.join(format!("features/{token}.tsv")))?)?;
        let emb = EmbeddingMatrix::from_tsv(&read_text(&out.join(format!("embed/{token}.tsv")))?)?;
        Ok((feats, emb))
    }

    fn train_one(&self, ctx: &Context, sub: &SubHierarchy) -> Result<SubHierarchyRun> {
        let name = ctx.root_name(sub);
        let engine = self.cfg.engine_config();
        if self.cfg.run.widen {
            let (feats, emb) = self.read_space_tables("network")?;
            let space = FeatureSpace::new(ctx.inputs.net.clone(), ctx.inputs.closed.clone(), &feats, &emb)?;
            let mut inside = vec![false; ctx.inputs.net.node_count()];
            for &v in &sub.node_ids {
                inside[v] = true;
            }
            let extra: Vec<usize> = (0..inside.len()).filter(|&v| !inside[v]).collect();
            let candidates = Candidates {
                training: &sub.node_ids,
                extra: &extra,
            };
            train_subhierarchy(&space, candidates, sub, &ctx.tree, self.learner.as_ref(), &engine)
        } else {
            let (feats, emb) = self.read_space_tables(name)?;
            let space = FeatureSpace::for_subhierarchy(sub, &ctx.inputs.closed, &feats, &emb)?;
            let rows: Vec<usize> = (0..sub.node_ids.len()).collect();
            let candidates = Candidates {
                training: &rows,
                extra: &[],
            };
            train_subhierarchy(&space, candidates, sub, &ctx.tree, self.learner.as_ref(), &engine)
        }
    }

    pub fn train(&self) -> Result<()> {
        let inner = || -> Result<()> {
            self.require("features")?;
            self.require("embed")?;
            let ctx = self.context()?;
            let runs = ctx
                .subs
                .par_iter()
                .map(|sub| {
                    let t = Instant::now();
                    let run = self
                        .train_one(&ctx, sub)
                        .map_err(|e| e.in_stage("train", Some(ctx.root_name(sub))))?;
                    Ok((run, t.elapsed().as_secs_f64()))
                })
                .collect::<Result<Vec<_>>>()?;
            let mut w = StageWriter::start(self.output_dir(), "train", self.seed())?;
            let mut timing = Vec::new();
            for ((run, secs), sub) in runs.iter().zip(&ctx.subs) {
                let name = ctx.root_name(sub);
                let dir = file_token(name);
                let files = train_artifacts(&ctx, sub, run, &self.cfg.grid())?;
                for (file, text) in files {
                    w.write(&format!("{dir}/{file}"), &text)?;
                }
                timing.push((name.to_string(), *secs));
            }
            w.write_untracked("timing.tsv", &timing_tsv(&timing))?;
            w.finish()
        };
        inner().map_err(|e| e.in_stage("train", None))
    }

    fn read_trained(&self, ctx: &Context, sub: &SubHierarchy) -> Result<TrainedArtifacts> {
        let dir = self.output_dir().join("train").join(file_token(ctx.root_name(sub)));
        let mut thresholds = BTreeMap::new();
        let mut statuses = BTreeMap::new();
        let classes = read_text(&dir.join("classes.tsv"))?;
        for f in table(&classes, "classes.tsv", CLASSES_HEADER)? {
            let c = ctx.inputs.hierarchy.require(f[0])?;
            statuses.insert(c, f[2].to_string());
            if f[4] != "-" {
                thresholds.insert(c, num::<f64>(f[4], "classes.tsv")?);
            }
        }
        let probs = read_text(&dir.join("probabilities.tsv"))?;
        let mut tables: BTreeMap<&str, (Vec<String>, ProbTable, ProbTable)> = BTreeMap::new();
        for f in table(&probs, "probabilities.tsv", PROBABILITIES_HEADER)? {
            let c = ctx.inputs.hierarchy.require(f[1])?;
            let entry = tables.entry(f[2]).or_default();
            entry.1.entry(c).or_default().push(num(f[3], "probabilities.tsv")?);
            entry.2.entry(c).or_default().push(num(f[4], "probabilities.tsv")?);
            // node order repeats per class; take it from the first
            if entry.1.len() == 1 {
                entry.0.push(f[0].to_string());
            }
        }
        let build = |scope: &str, tables: &mut BTreeMap<&str, (Vec<String>, ProbTable, ProbTable)>| {
            tables.remove(scope).map(|(names, p_local, p_cumulative)| ScoredRows {
                rows: names
                    .iter()
                    .map(|n| ctx.inputs.net.index_of(n).unwrap_or(usize::MAX))
                    .collect(),
                node_names: names,
                p_local,
                p_cumulative,
            })
        };
        let scored = build("oof", &mut tables)
            .ok_or_else(|| Error::Empty(format!("no probabilities for {}", ctx.root_name(sub))))?;
        let extra = build("extra", &mut tables);
        Ok(TrainedArtifacts {
            scored,
            extra,
            thresholds,
            statuses,
        })
    }

    /// Engine predictions of one sub-hierarchy from the `train` artifacts.
    fn engine_decisions(
        &self,
        ctx: &Context,
        sub: &SubHierarchy,
        art: &TrainedArtifacts,
    ) -> Result<(ExtendedAnnotation, Vec<PredictionRecord>)> {
        let sub_tree = sub.tree(&ctx.tree);
        let mut ext = ExtendedAnnotation::default();
        let mut records = Vec::new();
        for scored in std::iter::once(&art.scored).chain(&art.extra) {
            let closed_sets: Vec<Vec<ClassId>> = scored
                .rows
                .iter()
                .map(|&v| ctx.inputs.closed.classes_of(v).to_vec())
                .collect();
            let (e, r) = decide_and_extend(&sub_tree, sub.root, &ctx.tree, scored, &art.thresholds, &closed_sets)?;
            ext.merge(e);
            records.extend(r);
        }
        Ok((ext, records))
    }

    pub fn predict(&self) -> Result<()> {
        let inner = || -> Result<()> {
            self.require("train")?;
            let ctx = self.context()?;
            let mut ext = ExtendedAnnotation::default();
            let net = &ctx.inputs.net;
            for v in 0..net.node_count() {
                ext.sets
                    .insert(net.name(v).to_string(), ctx.inputs.closed.classes_of(v).iter().copied().collect());
            }
            let mut predictions = format!("{PREDICTION_HEADER}\n");
            for sub in &ctx.subs {
                let art = self
                    .read_trained(&ctx, sub)
                    .map_err(|e| e.in_stage("predict", Some(ctx.root_name(sub))))?;
                let (e, records) = self
                    .engine_decisions(&ctx, sub, &art)
                    .map_err(|e| e.in_stage("predict", Some(ctx.root_name(sub))))?;
                ext.merge(e);
                predictions.push_str(&records_tsv(&ctx.tree, &records, None));
            }
            if ext.violations(&ctx.tree) > 0 {
                return Err(Error::Invariant("extended annotations break the true-path rule".into()));
            }
            let mut extended = String::from("node\tclass\tsource\n");
            for (node, set) in &ext.sets {
                let v = net.index_of(node);
                let mut names: Vec<(&str, bool)> = set
                    .iter()
                    .map(|&c| {
                        let annotated = v.is_some_and(|v| ctx.inputs.closed.has(v, c));
                        (ctx.tree.name(c), annotated)
                    })
                    .collect();
                names.sort();
                for (c, annotated) in names {
                    let source = if annotated { "annotated" } else { "predicted" };
                    extended.push_str(&format!("{node}\t{c}\t{source}\n"));
                }
            }
            let mut w = StageWriter::start(self.output_dir(), "predict", self.seed())?;
            w.write("predictions.tsv", &predictions)?;
            w.write("extended_annotations.tsv", &extended)?;
            w.finish()
        };
        inner().map_err(|e| e.in_stage("predict", None))
    }

    /// Evaluates `predict/predictions.tsv` against the closed annotations.
    pub fn eval(&self) -> Result<MetricsReport> {
        let inner = || -> Result<MetricsReport> {
            self.require("predict")?;
            let ctx = self.context()?;
            let text = read_text(&self.output_dir().join("predict/predictions.tsv"))?;
            let records = parse_records(&ctx, &text, PREDICTION_HEADER)?;
            let report = metrics_report(&ctx, "engine", &records)?;
            let mut w = StageWriter::start(self.output_dir(), "eval", self.seed())?;
            w.write("metrics.json", &to_json(&report))?;
            for (path, csv) in curve_files(&ctx, &records)? {
                w.write(&path, &csv)?;
            }
            w.finish()?;
            Ok(report)
        };
        inner().map_err(|e| e.in_stage("eval", None))
    }

    /// Runs the HBN-style baseline on the engine's folds and writes its
    /// predictions, metrics, a per-class comparison and a timing table.
    pub fn baseline(&self) -> Result<MetricsReport> {
        let inner = || -> Result<MetricsReport> {
            self.require("train")?;
            let ctx = self.context()?;
            let mut records = Vec::new();
            let mut engine_records = Vec::new();
            let mut hbn_seconds = BTreeMap::new();
            for sub in &ctx.subs {
                let name = ctx.root_name(sub);
                let art = self
                    .read_trained(&ctx, sub)
                    .map_err(|e| e.in_stage("baseline", Some(name)))?;
                let t = Instant::now();
                let r = self
                    .baseline_one(&ctx, sub, &art)
                    .map_err(|e| e.in_stage("baseline", Some(name)))?;
                hbn_seconds.insert(name.to_string(), t.elapsed().as_secs_f64());
                records.extend(r);
                let (_, er) = self.engine_decisions(&ctx, sub, &art)?;
                engine_records.extend(er.into_iter().filter(|r| art.scored.node_names.contains(&r.node)));
            }
            let report = metrics_report(&ctx, "hbn", &records)?;
            let engine = metrics_report(&ctx, "engine", &engine_records)?;

            let mut w = StageWriter::start(self.output_dir(), "baseline", self.seed())?;
            let mut predictions = format!("{PREDICTION_HEADER}\tmodel\n");
            predictions.push_str(&records_tsv(&ctx.tree, &records, Some("hbn")));
            w.write("hbn_predictions.tsv", &predictions)?;
            w.write("metrics.json", &to_json(&report))?;
            w.write("comparison.tsv", &comparison_tsv(&engine, &report))?;
            w.write_untracked("timing.tsv", &self.timing_comparison(&ctx, &hbn_seconds)?)?;
            w.finish()?;
            Ok(report)
        };
        inner().map_err(|e| e.in_stage("baseline", None))
    }

    fn baseline_one(&self, ctx: &Context, sub: &SubHierarchy, art: &TrainedArtifacts) -> Result<Vec<PredictionRecord>> {
        let sub_tree = sub.tree(&ctx.tree);
        let net = &sub.subgraph;
        let closed = ctx.inputs.closed.restrict(&sub.node_ids);
        let rows: Vec<usize> = (0..sub.node_ids.len()).collect();
        let folds = read_folds(self.output_dir(), ctx, sub)?;
        let scores = cross_validated_scores(net, &closed, &sub_tree, &rows, &folds)?;

        let n = rows.len();
        let mut p_local = ProbTable::new();
        let mut p_cumulative = ProbTable::new();
        let mut thresholds = BTreeMap::new();
        for &c in &sub.classes {
            if let (Some(l), Some(cum)) = (scores.local.get(&c), scores.cumulative.get(&c)) {
                let labels: Vec<bool> = rows.iter().map(|&v| closed.has(v, c)).collect();
                thresholds.insert(c, optimum_threshold(cum, &labels)?);
                p_local.insert(c, l.clone());
                p_cumulative.insert(c, cum.clone());
            } else if art.statuses.get(&c).is_some_and(|s| passes_through(s)) {
                p_local.insert(c, vec![1.0; n]);
                p_cumulative.insert(c, vec![1.0; n]);
            }
        }
        let scored = ScoredRows {
            rows: sub.node_ids.clone(),
            node_names: net.names().to_vec(),
            p_local,
            p_cumulative,
        };
        let closed_sets: Vec<Vec<ClassId>> = rows.iter().map(|&v| closed.classes_of(v).to_vec()).collect();
        let (_, records) = decide_and_extend(&sub_tree, sub.root, &ctx.tree, &scored, &thresholds, &closed_sets)?;
        Ok(records)
    }

    fn timing_comparison(&self, ctx: &Context, hbn: &BTreeMap<String, f64>) -> Result<String> {
        let read = |stage: &str| -> Result<HashMap<String, f64>> {
            let path = self.output_dir().join(stage).join("timing.tsv");
            if !path.exists() {
                return Ok(HashMap::new());
            }
            let text = read_text(&path)?;
            table(&text, "timing", "scope\tseconds")?
                .into_iter()
                .map(|f| Ok((f[0].to_string(), num(f[1], "timing")?)))
                .collect()
        };
        let (feat, emb, train) = (read("features")?, read("embed")?, read("train")?);
        let mut out = String::from("root\tclasses\tnodes\tengine_seconds\thbn_seconds\thbn_over_engine\n");
        for sub in &ctx.subs {
            let name = ctx.root_name(sub);
            let engine = [&feat, &emb, &train]
                .iter()
                .map(|t| t.get(name).copied().unwrap_or(0.0))
                .sum::<f64>();
            let h = hbn.get(name).copied().unwrap_or(0.0);
            let ratio = if engine > 0.0 { h / engine } else { f64::NAN };
            out.push_str(&format!(
                "{name}\t{}\t{}\t{engine:.6}\t{h:.6}\t{ratio:.3}\n",
                sub.classes.len(),
                sub.node_ids.len()
            ));
        }
        Ok(out)
    }
}

fn passes_through(status: &str) -> bool {
    matches!(status, "structural" | "constant-positive")
}

const CLASSES_HEADER: &str =
    "class\tparent\tstatus\tpositives\tthreshold\tlearning_rate\tl2_strength\tepochs\tbest_aucpr\tdetail";
const PROBABILITIES_HEADER: &str = "node\tclass\tscope\tp_local\tp_cumulative";

fn train_artifacts(
    ctx: &Context,
    sub: &SubHierarchy,
    run: &SubHierarchyRun,
    grid_cfg: &crate::learn::HyperGrid,
) -> Result<Vec<(&'static str, String)>> {
    let tree = &ctx.tree;
    let mut classes = format!("{CLASSES_HEADER}\n");
    let mut folds = String::from("node\tclass\tfold\n");
    let mut schema = String::from("class\tstatus\tschema_hash\n");
    let mut grid = String::from("class\tcandidate\tlearning_rate\tl2_strength\tepochs\tmean_aucpr\n");
    let mut models: BTreeMap<&str, &[crate::learn::TrainedModel]> = BTreeMap::new();
    for r in &run.results {
        let name = tree.name(r.class);
        let parent = if r.class == sub.root {
            "-"
        } else {
            tree.parent(r.class).map_or("-", |p| tree.name(p))
        };
        let positives = sub
            .node_ids
            .iter()
            .filter(|&&v| ctx.inputs.closed.has(v, r.class))
            .count();
        let threshold = r.threshold.map_or("-".to_string(), |t| t.to_string());
        let (lr, l2, ep) = r.tuned.as_ref().map_or(("-".into(), "-".into(), "-".into()), |t| {
            (t.learning_rate.to_string(), t.l2_strength.to_string(), t.epochs.to_string())
        });
        let best = r
            .grid_scores
            .iter()
            .copied()
            .fold(None, |acc: Option<f64>, s| Some(acc.map_or(s, |a| a.max(s))))
            .map_or("-".to_string(), |b| b.to_string());
        let detail = match &r.status {
            ClassStatus::Skipped { reason } => reason.clone(),
            ClassStatus::SkippedBelow { ancestor } => format!("below {ancestor}"),
            _ => "-".to_string(),
        };
        classes.push_str(&format!(
            "{name}\t{parent}\t{}\t{positives}\t{threshold}\t{lr}\t{l2}\t{ep}\t{best}\t{detail}\n",
            r.status.label()
        ));
        if let Some(fa) = &r.folds {
            for (i, f) in fa.fold.iter().enumerate() {
                folds.push_str(&format!("{}\t{name}\t{f}\n", run.scored.node_names[i]));
            }
        }
        if r.tuned.is_some() {
            for (i, (cand, score)) in grid_cfg.candidates.iter().zip(&r.grid_scores).enumerate() {
                grid.push_str(&format!(
                    "{name}\t{i}\t{}\t{}\t{}\t{score}\n",
                    cand.learning_rate, cand.l2_strength, cand.epochs
                ));
            }
        }
        if let Some(m) = r.fold_models.first() {
            schema.push_str(&format!("{name}\t{}\t{}\n", r.status.label(), m.schema_hash));
            models.insert(name, &r.fold_models);
        }
    }
    let mut probs = format!("{PROBABILITIES_HEADER}\n");
    for (scope, scored) in std::iter::once(("oof", &run.scored)).chain(run.extra.iter().map(|e| ("extra", e))) {
        for &c in &run.order {
            if let (Some(l), Some(cum)) = (scored.p_local.get(&c), scored.p_cumulative.get(&c)) {
                for (i, node) in scored.node_names.iter().enumerate() {
                    probs.push_str(&format!("{node}\t{}\t{scope}\t{}\t{}\n", tree.name(c), l[i], cum[i]));
                }
            }
        }
    }
    Ok(vec![
        ("classes.tsv", classes),
        ("probabilities.tsv", probs),
        ("folds.tsv", folds),
        ("grid.tsv", grid),
        ("schema.tsv", schema),
        ("models.json", to_json(&models)),
    ])
}

fn read_folds(out: &Path, ctx: &Context, sub: &SubHierarchy) -> Result<BTreeMap<ClassId, FoldAssignment>> {
    let path = out.join("train").join(file_token(ctx.root_name(sub))).join("folds.tsv");
    let text = read_text(&path)?;
    let position: HashMap<&str, usize> = sub
        .subgraph
        .names()
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut folds: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
    for f in table(&text, "folds.tsv", "node\tclass\tfold")? {
        let c = ctx.inputs.hierarchy.require(f[1])?;
        let i = *position
            .get(f[0])
            .ok_or_else(|| Error::UnknownNode(f[0].to_string()))?;
        let v = folds.entry(c).or_insert_with(|| vec![usize::MAX; position.len()]);
        v[i] = num(f[2], "folds.tsv")?;
    }
    let k = ctx_k(&folds);
    folds
        .into_iter()
        .map(|(c, fold)| {
            if fold.contains(&usize::MAX) {
                return Err(Error::Shape(format!("incomplete folds for {}", ctx.tree.name(c))));
            }
            Ok((c, FoldAssignment { k, fold }))
        })
        .collect()
}

fn ctx_k(folds: &BTreeMap<ClassId, Vec<usize>>) -> usize {
    folds
        .values()
        .flat_map(|f| f.iter().filter(|&&x| x != usize::MAX))
        .max()
        .map_or(0, |m| m + 1)
}

fn records_tsv(tree: &TreeHierarchy, records: &[PredictionRecord], model: Option<&str>) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.node,
            tree.name(r.class),
            r.p_local,
            r.p_cumulative,
            r.threshold,
            u8::from(r.decision)
        ));
        if let Some(m) = model {
            out.push('\t');
            out.push_str(m);
        }
        out.push('\n');
    }
    out
}

fn parse_records(ctx: &Context, text: &str, header: &str) -> Result<Vec<PredictionRecord>> {
    table(text, "predictions", header)?
        .into_iter()
        .map(|f| {
            Ok(PredictionRecord {
                node: f[0].to_string(),
                class: ctx.inputs.hierarchy.require(f[1])?,
                p_local: num(f[2], "predictions")?,
                p_cumulative: num(f[3], "predictions")?,
                threshold: num(f[4], "predictions")?,
                decision: f[5] == "1",
            })
        })
        .collect()
}

/// Records of one class restricted to the nodes of its sub-hierarchy.
fn class_rows<'r>(ctx: &Context, sub: &SubHierarchy, records: &'r [PredictionRecord], c: ClassId) -> Vec<&'r PredictionRecord> {
    records
        .iter()
        .filter(|r| {
            r.class == c
                && ctx
                    .inputs
                    .net
                    .index_of(&r.node)
                    .is_some_and(|v| ctx.inputs.closed.has(v, sub.root))
        })
        .collect()
}

fn labels_of(ctx: &Context, rows: &[&PredictionRecord]) -> Vec<bool> {
    rows.iter()
        .map(|r| {
            ctx.inputs
                .net
                .index_of(&r.node)
                .is_some_and(|v| ctx.inputs.closed.has(v, r.class))
        })
        .collect()
}

/// Per-class and per-sub-hierarchy metrics of decided records.
pub fn metrics_report(ctx: &Context, model: &str, records: &[PredictionRecord]) -> Result<MetricsReport> {
    let mut subs = Vec::new();
    for sub in &ctx.subs {
        let mut classes = Vec::new();
        for &c in &sub.classes {
            let rows = class_rows(ctx, sub, records, c);
            if rows.is_empty() {
                continue;
            }
            let labels = labels_of(ctx, &rows);
            let scores: Vec<f64> = rows.iter().map(|r| r.p_cumulative).collect();
            let decisions: Vec<f64> = rows.iter().map(|r| f64::from(u8::from(r.decision))).collect();
            let threshold = rows[0].threshold;
            let cm = confusion(&decisions, &labels, 0.5);
            classes.push(ClassReport {
                class: ctx.tree.name(c).to_string(),
                samples: rows.len(),
                positives: cm.tp + cm.fn_,
                threshold,
                tpr: cm.tpr(),
                tnr: cm.tnr(),
                precision: cm.precision(),
                f1: cm.f1(),
                threshold_f1: confusion(&scores, &labels, threshold).f1(),
                average_precision: average_precision(&scores, &labels)?,
                roc_auc: roc_auc(&scores, &labels)?,
                confusion: cm,
            });
        }
        subs.push(SubHierarchyReport {
            root: ctx.root_name(sub).to_string(),
            nodes: sub.node_ids.len(),
            mean: MeanReport::of(&classes.iter().collect::<Vec<_>>()),
            classes,
        });
    }
    let all: Vec<&ClassReport> = subs.iter().flat_map(|s| &s.classes).collect();
    Ok(MetricsReport {
        model: model.to_string(),
        overall: MeanReport::of(&all),
        subhierarchies: subs,
    })
}

fn curve_files(ctx: &Context, records: &[PredictionRecord]) -> Result<Vec<(String, String)>> {
    let mut files = Vec::new();
    for sub in &ctx.subs {
        for &c in &sub.classes {
            let rows = class_rows(ctx, sub, records, c);
            if rows.is_empty() {
                continue;
            }
            let labels = labels_of(ctx, &rows);
            let scores: Vec<f64> = rows.iter().map(|r| r.p_cumulative).collect();
            files.push((
                format!(
                    "curves/{}/{}.csv",
                    file_token(ctx.root_name(sub)),
                    file_token(ctx.tree.name(c))
                ),
                pr_curve_csv(&pr_curve(&scores, &labels)?),
            ));
        }
    }
    Ok(files)
}

fn comparison_tsv(engine: &MetricsReport, hbn: &MetricsReport) -> String {
    let mut out = String::from(
        "root\tclass\tengine_f1\thbn_f1\tengine_threshold_f1\thbn_threshold_f1\tengine_ap\thbn_ap\tengine_auc\thbn_auc\tengine_tnr\thbn_tnr\n",
    );
    for sub in &engine.subhierarchies {
        for e in &sub.classes {
            if let Some(h) = hbn.class(&e.class) {
                out.push_str(&format!(
                    "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\t{:.6}\n",
                    sub.root,
                    e.class,
                    e.f1,
                    h.f1,
                    e.threshold_f1,
                    h.threshold_f1,
                    e.average_precision,
                    h.average_precision,
                    e.roc_auc,
                    h.roc_auc,
                    e.tnr,
                    h.tnr
                ));
            }
        }
    }
    out
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serializes");
    s.push('\n');
    s
}

/// Reads a metrics report written by `eval` or `baseline`.
pub fn read_metrics(path: &Path) -> Result<serde_json::Value> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::parse(path.display().to_string(), 0, e.to_string()))
}
