//! Node embeddings from second-order biased random walks and skip-gram with
//! negative sampling.
//!
//! Transition weights are computed on the fly at every step, costing
//! `O(deg(v))` per step and no extra memory. Precomputed second-order alias
//! tables would make steps `O(1)` but need `O(Σ deg²)` memory, which only
//! pays off for graphs far larger than a sub-hierarchy subgraph.

use ndarray::Array2;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Network;
use crate::learn::sigmoid;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WalkConfig {
    /// Return parameter `p`.
    pub p: f64,
    /// In-out parameter `q`.
    pub q: f64,
    pub walk_length: usize,
    pub walks_per_node: usize,
    pub seed: u64,
}

impl Default for WalkConfig {
    fn default() -> Self {
        WalkConfig {
            p: 1.0,
            q: 1.0,
            walk_length: 30,
            walks_per_node: 10,
            seed: 0,
        }
    }
}

impl WalkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.q > 0.0) {
            return Err(Error::Config("walk p and q must be positive".into()));
        }
        if self.walk_length < 2 {
            return Err(Error::Config("walk_length must be >= 2".into()));
        }
        if self.walks_per_node == 0 {
            return Err(Error::Config("walks_per_node must be >= 1".into()));
        }
        Ok(())
    }
}

/// Normalized transition distribution out of `current`, having arrived from
/// `previous`. Each neighbor `x` weighs `f(current, x) · α` with `α = 1/p`
/// when `x` is the previous node, `1` when `x` neighbors the previous node
/// and `1/q` otherwise. Empty when the total weight is zero.
pub fn transition_probabilities(
    net: &Network,
    cfg: &WalkConfig,
    previous: Option<usize>,
    current: usize,
) -> Vec<(usize, f64)> {
    let weights = biased_weights(net, cfg, previous, current);
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return Vec::new();
    }
    net.neighbor_ids(current)
        .zip(weights)
        .map(|(x, w)| (x, w / total))
        .collect()
}

fn biased_weights(net: &Network, cfg: &WalkConfig, previous: Option<usize>, current: usize) -> Vec<f64> {
    net.neighbors(current)
        .iter()
        .map(|&(x, w)| {
            let alpha = match previous {
                None => 1.0,
                Some(t) if x == t => 1.0 / cfg.p,
                Some(t) if net.has_edge(t, x) => 1.0,
                Some(_) => 1.0 / cfg.q,
            };
            w * alpha
        })
        .collect()
}

fn walk_from(net: &Network, cfg: &WalkConfig, start: usize, walk_index: usize) -> Vec<usize> {
    let mut rng = seed::rng(seed::mix(cfg.seed, &[start as u64, walk_index as u64]));
    let mut walk = Vec::with_capacity(cfg.walk_length);
    walk.push(start);
    while walk.len() < cfg.walk_length {
        let current = *walk.last().unwrap();
        let previous = walk.len().checked_sub(2).map(|i| walk[i]);
        let weights = biased_weights(net, cfg, previous, current);
        let Ok(dist) = WeightedIndex::new(&weights) else {
            break; // dead end
        };
        walk.push(net.neighbors(current)[dist.sample(&mut rng)].0);
    }
    walk
}

/// Generates `walks_per_node` walks from every non-isolated node, ordered by
/// walk round then start node. Each walk draws from its own substream keyed
/// by `(seed, start, round)`.
pub fn generate_walks(net: &Network, cfg: &WalkConfig) -> Result<Vec<Vec<usize>>> {
    cfg.validate()?;
    if net.edge_count() == 0 {
        return Err(Error::IsolatedGraph);
    }
    let starts: Vec<usize> = (0..net.node_count()).filter(|&v| net.degree(v) > 0).collect();
    let jobs: Vec<(usize, usize)> = (0..cfg.walks_per_node)
        .flat_map(|r| starts.iter().map(move |&s| (r, s)))
        .collect();
    Ok(jobs
        .par_iter()
        .map(|&(r, s)| walk_from(net, cfg, s, r))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SkipGramConfig {
    pub dimension: usize,
    pub window: usize,
    pub negative_samples: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        SkipGramConfig {
            dimension: 64,
            window: 5,
            negative_samples: 5,
            epochs: 5,
            learning_rate: 0.025,
            min_learning_rate: 0.0001,
            seed: 0,
        }
    }
}

impl SkipGramConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dimension == 0 {
            return Err(Error::Config("embedding dimension must be >= 1".into()));
        }
        if self.window == 0 {
            return Err(Error::Config("window must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) || self.min_learning_rate < 0.0 {
            return Err(Error::Config("learning rates must be positive".into()));
        }
        Ok(())
    }
}

/// One positive `(center, context)` pair with its negative contexts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SgnsSample {
    pub center: usize,
    pub context: usize,
    pub negatives: Vec<usize>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn log_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        -(-z).exp().ln_1p()
    } else {
        z - z.exp().ln_1p()
    }
}

/// Trained skip-gram parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipGram {
    /// Node (input) vectors; these are the embeddings.
    pub input: Array2<f64>,
    /// Context (output) vectors.
    pub output: Array2<f64>,
    /// Mean loss per positive pair of a fixed evaluation sample, after each
    /// epoch.
    pub epoch_losses: Vec<f64>,
}

impl SkipGram {
    /// Fresh parameters: input uniform in `±0.5/d`, output zero.
    pub fn init(node_count: usize, dimension: usize, seed: u64) -> SkipGram {
        let mut rng = crate::seed::rng(seed);
        let half = 0.5 / dimension as f64;
        let input = Array2::from_shape_simple_fn((node_count, dimension), || rng.random_range(-half..half));
        SkipGram {
            input,
            output: Array2::zeros((node_count, dimension)),
            epoch_losses: Vec::new(),
        }
    }

    /// `−log σ(u_o·v_c) − Σ_k log σ(−u_k·v_c)` summed over samples.
    pub fn objective(&self, samples: &[SgnsSample]) -> f64 {
        samples
            .iter()
            .map(|s| {
                let v = self.input.row(s.center);
                let v = v.as_slice().unwrap();
                let mut loss = -log_sigmoid(dot(v, self.output.row(s.context).as_slice().unwrap()));
                for &k in &s.negatives {
                    loss -= log_sigmoid(-dot(v, self.output.row(k).as_slice().unwrap()));
                }
                loss
            })
            .sum()
    }

    /// Gradient of [`SkipGram::objective`] as `(d input, d output)`.
    pub fn gradient(&self, samples: &[SgnsSample]) -> (Array2<f64>, Array2<f64>) {
        let mut gi = Array2::zeros(self.input.raw_dim());
        let mut go = Array2::zeros(self.output.raw_dim());
        for s in samples {
            let v = self.input.row(s.center).to_owned();
            let targets = std::iter::once((s.context, 1.0)).chain(s.negatives.iter().map(|&k| (k, 0.0)));
            for (j, label) in targets {
                let u = self.output.row(j).to_owned();
                let g = sigmoid(v.dot(&u)) - label;
                gi.row_mut(s.center).scaled_add(g, &u);
                go.row_mut(j).scaled_add(g, &v);
            }
        }
        (gi, go)
    }

    /// One stochastic step on a single sample; returns the sample's loss
    /// before the update.
    fn step(&mut self, s: &SgnsSample, lr: f64, grad_center: &mut [f64]) -> f64 {
        let dim = self.input.ncols();
        grad_center.iter_mut().for_each(|g| *g = 0.0);
        let mut loss = 0.0;
        let targets = std::iter::once((s.context, 1.0)).chain(s.negatives.iter().map(|&k| (k, 0.0)));
        for (j, label) in targets {
            let z = {
                let v = self.input.row(s.center);
                let u = self.output.row(j);
                dot(v.as_slice().unwrap(), u.as_slice().unwrap())
            };
            loss -= if label > 0.5 { log_sigmoid(z) } else { log_sigmoid(-z) };
            let g = sigmoid(z) - label;
            for d in 0..dim {
                grad_center[d] += g * self.output[[j, d]];
            }
            for d in 0..dim {
                let v = self.input[[s.center, d]];
                self.output[[j, d]] -= lr * g * v;
            }
        }
        for d in 0..dim {
            self.input[[s.center, d]] -= lr * grad_center[d];
        }
        loss
    }
}

/// Trains skip-gram with negative sampling on a walk corpus. Negatives are
/// drawn from the unigram distribution raised to the 0.75 power; the
/// learning rate decays linearly to `min_learning_rate`. Single-threaded
/// and deterministic for a fixed seed.
pub fn train_embeddings(walks: &[Vec<usize>], node_count: usize, cfg: &SkipGramConfig) -> Result<SkipGram> {
    cfg.validate()?;
    if walks.iter().all(|w| w.len() < 2) {
        return Err(Error::Empty("walk corpus has no pairs".into()));
    }
    let mut counts = vec![0.0f64; node_count];
    for w in walks {
        for &v in w {
            if v >= node_count {
                return Err(Error::Shape(format!("walk visits node {v} of {node_count}")));
            }
            counts[v] += 1.0;
        }
    }
    let noise = WeightedIndex::new(counts.iter().map(|c| c.powf(0.75)))
        .map_err(|e| Error::Shape(e.to_string()))?;
    let mut model = SkipGram::init(node_count, cfg.dimension, cfg.seed);
    let mut rng = seed::rng(seed::mix(cfg.seed, &[1]));

    let pairs_per_epoch: usize = walks
        .iter()
        .map(|w| {
            (0..w.len())
                .map(|i| i.min(cfg.window) + (w.len() - 1 - i).min(cfg.window))
                .sum::<usize>()
        })
        .sum();
    let total = (pairs_per_epoch * cfg.epochs).max(1) as f64;
    let mut done = 0usize;
    let mut grad = vec![0.0; cfg.dimension];
    let mut sample = SgnsSample {
        center: 0,
        context: 0,
        negatives: Vec::with_capacity(cfg.negative_samples),
    };
    let eval = evaluation_sample(walks, cfg, &noise);
    for _ in 0..cfg.epochs {
        for w in walks {
            for i in 0..w.len() {
                let lo = i.saturating_sub(cfg.window);
                let hi = (i + cfg.window).min(w.len() - 1);
                for j in lo..=hi {
                    if j == i {
                        continue;
                    }
                    sample.center = w[i];
                    sample.context = w[j];
                    sample.negatives.clear();
                    for _ in 0..cfg.negative_samples {
                        let k = noise.sample(&mut rng);
                        if k != sample.context {
                            sample.negatives.push(k);
                        }
                    }
                    let progress = done as f64 / total;
                    let lr = (cfg.learning_rate - (cfg.learning_rate - cfg.min_learning_rate) * progress)
                        .max(cfg.min_learning_rate);
                    model.step(&sample, lr, &mut grad);
                    done += 1;
                }
            }
        }
        model.epoch_losses.push(model.objective(&eval) / eval.len() as f64);
    }
    Ok(model)
}

const EVAL_PAIRS: usize = 20_000;

/// Fixed positive pairs, evenly strided through the corpus, with negatives
/// from their own stream.
fn evaluation_sample(walks: &[Vec<usize>], cfg: &SkipGramConfig, noise: &WeightedIndex<f64>) -> Vec<SgnsSample> {
    let mut pairs = Vec::new();
    for w in walks {
        for i in 0..w.len() {
            let lo = i.saturating_sub(cfg.window);
            let hi = (i + cfg.window).min(w.len() - 1);
            pairs.extend((lo..=hi).filter(|&j| j != i).map(|j| (w[i], w[j])));
        }
    }
    let stride = pairs.len().div_ceil(EVAL_PAIRS).max(1);
    let mut rng = seed::rng(seed::mix(cfg.seed, &[2]));
    pairs
        .into_iter()
        .step_by(stride)
        .map(|(center, context)| SgnsSample {
            center,
            context,
            negatives: (0..cfg.negative_samples)
                .map(|_| noise.sample(&mut rng))
                .filter(|&k| k != context)
                .collect(),
        })
        .collect()
}

/// Walk and skip-gram settings together.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct EmbeddingConfig {
    pub walk: WalkConfig,
    pub skipgram: SkipGramConfig,
}

impl EmbeddingConfig {
    /// Identifies the configuration in persisted embedding headers.
    pub fn hash(&self) -> String {
        crate::io::sha256_hex(serde_json::to_string(self).expect("config serializes").as_bytes())
    }
}

/// One embedding vector per node.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub node_names: Vec<String>,
    pub vectors: Array2<f64>,
    pub config_hash: String,
}

impl EmbeddingMatrix {
    pub fn dimension(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.node_names.iter().position(|n| n == name)
    }

    pub fn cosine(&self, a: usize, b: usize) -> f64 {
        let x = self.vectors.row(a);
        let y = self.vectors.row(b);
        let denom = x.dot(&x).sqrt() * y.dot(&y).sqrt();
        if denom == 0.0 {
            0.0
        } else {
            x.dot(&y) / denom
        }
    }

    /// `# dimension=D config=HASH` header, then `node<TAB>v1..vD` rows.
    pub fn to_tsv(&self) -> String {
        let mut out = format!("# dimension={} config={}\n", self.dimension(), self.config_hash);
        for (i, name) in self.node_names.iter().enumerate() {
            out.push_str(name);
            for v in self.vectors.row(i) {
                out.push('\t');
                out.push_str(&v.to_string());
            }
            out.push('\n');
        }
        out
    }

    pub fn from_tsv(text: &str) -> Result<EmbeddingMatrix> {
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| Error::Empty("embedding file".into()))?;
        let mut dimension = None;
        let mut config_hash = String::new();
        for token in header.trim_start_matches('#').split_whitespace() {
            if let Some(d) = token.strip_prefix("dimension=") {
                dimension = d.parse::<usize>().ok();
            } else if let Some(h) = token.strip_prefix("config=") {
                config_hash = h.to_string();
            }
        }
        let dim = dimension.ok_or_else(|| Error::parse("embeddings", 1, "missing dimension"))?;
        let mut node_names = Vec::new();
        let mut values = Vec::new();
        for (i, line) in lines.enumerate() {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != dim + 1 {
                return Err(Error::parse("embeddings", i + 2, format!("expected {} fields", dim + 1)));
            }
            node_names.push(f[0].to_string());
            for v in &f[1..] {
                values.push(v.parse::<f64>().map_err(|_| Error::parse("embeddings", i + 2, "bad value"))?);
            }
        }
        let vectors = Array2::from_shape_vec((node_names.len(), dim), values)
            .map_err(|e| Error::Shape(e.to_string()))?;
        Ok(EmbeddingMatrix {
            node_names,
            vectors,
            config_hash,
        })
    }
}

/// Walks plus skip-gram over a whole network.
pub fn embed_network(net: &Network, cfg: &EmbeddingConfig) -> Result<EmbeddingMatrix> {
    let walks = generate_walks(net, &cfg.walk)?;
    let model = train_embeddings(&walks, net.node_count(), &cfg.skipgram)?;
    Ok(EmbeddingMatrix {
        node_names: net.names().to_vec(),
        vectors: model.input,
        config_hash: cfg.hash(),
    })
}
