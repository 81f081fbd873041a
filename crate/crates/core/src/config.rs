//! Run configuration, read from a sectioned `key = value` (TOML) file.
//!
//! ```toml
//! [input]
//! edges = "edges.tsv"            # node_a<TAB>node_b<TAB>weight
//! annotations = "annotations.tsv" # node<TAB>class
//! hierarchy = "hierarchy.tsv"     # parent<TAB>child, or an .obo file
//!
//! [classes]
//! min_size = 5
//! max_size = 300
//!
//! [run]
//! seed = 42
//! output = "out"
//! ```
//!
//! Relative paths are resolved against the configuration file's directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::embed::{EmbeddingConfig, SkipGramConfig, WalkConfig};
use crate::engine::EngineConfig;
use crate::error::{Error, Result};
use crate::graph::FeatureOptions;
use crate::learn::{ClassifierConfig, ClassifierKind, ExternalCommand, HyperGrid};
use crate::resample::SmoteConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputSection {
    pub edges: PathBuf,
    pub annotations: PathBuf,
    pub hierarchy: PathBuf,
    /// Optional node list adding isolated nodes.
    #[serde(default)]
    pub nodes: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassesSection {
    pub min_size: usize,
    pub max_size: usize,
}

impl Default for ClassesSection {
    fn default() -> Self {
        ClassesSection {
            min_size: 5,
            max_size: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CvSection {
    pub folds: usize,
}

impl Default for CvSection {
    fn default() -> Self {
        CvSection { folds: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkSection {
    pub p: f64,
    pub q: f64,
    pub walk_length: usize,
    pub walks_per_node: usize,
}

impl Default for WalkSection {
    fn default() -> Self {
        let w = WalkConfig::default();
        WalkSection {
            p: w.p,
            q: w.q,
            walk_length: w.walk_length,
            walks_per_node: w.walks_per_node,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingSection {
    pub dimension: usize,
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let s = SkipGramConfig::default();
        EmbeddingSection {
            dimension: s.dimension,
            window: s.window,
            negative_samples: s.negative_samples,
            epochs: s.epochs,
            learning_rate: s.learning_rate,
            min_learning_rate: s.min_learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmoteSection {
    pub enabled: bool,
    pub k_neighbors: usize,
    pub target_ratio: f64,
}

impl Default for SmoteSection {
    fn default() -> Self {
        SmoteSection {
            enabled: true,
            k_neighbors: 5,
            target_ratio: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub kind: ClassifierKind,
    /// The grid is the product of these three lists.
    pub learning_rates: Vec<f64>,
    pub l2_strengths: Vec<f64>,
    pub epochs: Vec<usize>,
    pub batch_size: usize,
    /// Program and arguments for `kind = "external"`.
    pub command: Vec<String>,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        ClassifierSection {
            kind: ClassifierKind::BuiltinLogistic,
            learning_rates: vec![0.01, 0.05, 0.1],
            l2_strengths: vec![0.0, 0.1, 1.0],
            epochs: vec![50, 200],
            batch_size: 32,
            command: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub output: PathBuf,
    /// Worker threads; 0 uses the available parallelism.
    pub workers: usize,
    /// Also run the HBN-style baseline.
    pub baseline: bool,
    /// Score nodes outside a sub-hierarchy's subgraph too.
    pub widen: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 42,
            output: PathBuf::from("out"),
            workers: 0,
            baseline: false,
            widen: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub input: InputSection,
    #[serde(default)]
    pub classes: ClassesSection,
    #[serde(default)]
    pub cv: CvSection,
    #[serde(default)]
    pub walk: WalkSection,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default)]
    pub smote: SmoteSection,
    #[serde(default)]
    pub classifier: ClassifierSection,
    #[serde(default)]
    pub features: FeatureOptions,
    #[serde(default)]
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves its relative paths.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = crate::io::read_text(path)?;
        let mut cfg = RunConfig::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.input.edges);
        fix(&mut self.input.annotations);
        fix(&mut self.input.hierarchy);
        if let Some(n) = self.input.nodes.as_mut() {
            fix(n);
        }
        fix(&mut self.run.output);
    }

    pub fn validate(&self) -> Result<()> {
        let c = &self.classes;
        if !(1 <= c.min_size && c.min_size <= c.max_size) {
            return Err(Error::Config(format!(
                "class size bounds must satisfy 1 <= min <= max, got {}..{}",
                c.min_size, c.max_size
            )));
        }
        if self.cv.folds < 2 {
            return Err(Error::Config("cv.folds must be >= 2".into()));
        }
        self.embedding_config().walk.validate()?;
        self.embedding_config().skipgram.validate()?;
        if self.smote.enabled {
            self.smote_config().unwrap_or_default().validate()?;
        }
        let grid = self.grid();
        if grid.candidates.is_empty() {
            return Err(Error::Config("classifier grid is empty".into()));
        }
        for cand in &grid.candidates {
            cand.validate()?;
        }
        if self.classifier.kind == ClassifierKind::External && self.classifier.command.is_empty() {
            return Err(Error::Config("classifier.command is required for external classifiers".into()));
        }
        Ok(())
    }

    pub fn embedding_config(&self) -> EmbeddingConfig {
        let w = &self.walk;
        let e = &self.embedding;
        EmbeddingConfig {
            walk: WalkConfig {
                p: w.p,
                q: w.q,
                walk_length: w.walk_length,
                walks_per_node: w.walks_per_node,
                seed: self.run.seed,
            },
            skipgram: SkipGramConfig {
                dimension: e.dimension,
                window: e.window,
                negative_samples: e.negative_samples,
                epochs: e.epochs,
                learning_rate: e.learning_rate,
                min_learning_rate: e.min_learning_rate,
                seed: self.run.seed,
            },
        }
    }

    pub fn smote_config(&self) -> Option<SmoteConfig> {
        self.smote.enabled.then(|| SmoteConfig {
            k_neighbors: self.smote.k_neighbors,
            target_ratio: self.smote.target_ratio,
            seed: self.run.seed,
        })
    }

    pub fn grid(&self) -> HyperGrid {
        let c = &self.classifier;
        let mut grid = HyperGrid::product(&c.learning_rates, &c.l2_strengths, &c.epochs);
        for cand in &mut grid.candidates {
            *cand = ClassifierConfig {
                kind: c.kind,
                batch_size: c.batch_size,
                ..cand.clone()
            };
        }
        grid
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            folds: self.cv.folds,
            smote: self.smote_config(),
            grid: self.grid(),
            seed: self.run.seed,
        }
    }

    pub fn external_command(&self) -> Option<ExternalCommand> {
        match (self.classifier.kind, self.classifier.command.split_first()) {
            (ClassifierKind::External, Some((program, args))) => Some(ExternalCommand {
                program: program.into(),
                args: args.to_vec(),
            }),
            _ => None,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}
