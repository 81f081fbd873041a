//! Stratified k-fold assignment and SMOTE oversampling.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Fold index per row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub fold: Vec<usize>,
}

impl FoldAssignment {
    pub fn test_rows(&self, f: usize) -> Vec<usize> {
        (0..self.fold.len()).filter(|&i| self.fold[i] == f).collect()
    }

    pub fn train_rows(&self, f: usize) -> Vec<usize> {
        (0..self.fold.len()).filter(|&i| self.fold[i] != f).collect()
    }

    pub fn to_tsv(&self, names: &[String]) -> String {
        let mut out = String::from("row\tfold\n");
        for (name, f) in names.iter().zip(&self.fold) {
            out.push_str(&format!("{name}\t{f}\n"));
        }
        out
    }
}

/// Assigns rows to `k` folds so that each fold's label distribution matches
/// the whole. Within each stratum rows are shuffled and dealt round-robin;
/// negatives continue the deal where positives stopped, so fold sizes also
/// differ by at most one.
pub fn stratified_kfold(labels: &[bool], k: usize, seed: u64) -> Result<FoldAssignment> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut pos: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let mut neg: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if pos.len() < k {
        return Err(Error::InsufficientStratum {
            stratum: "positives",
            found: pos.len(),
            k,
        });
    }
    if neg.len() < k {
        return Err(Error::InsufficientStratum {
            stratum: "negatives",
            found: neg.len(),
            k,
        });
    }
    let mut rng = seed::rng(seed);
    pos.shuffle(&mut rng);
    neg.shuffle(&mut rng);
    let mut fold = vec![0; labels.len()];
    for (i, &row) in pos.iter().enumerate() {
        fold[row] = i % k;
    }
    let offset = pos.len() % k;
    for (i, &row) in neg.iter().enumerate() {
        fold[row] = (offset + i) % k;
    }
    Ok(FoldAssignment { k, fold })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    /// Minority:majority ratio after oversampling.
    pub target_ratio: f64,
    pub seed: u64,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            k_neighbors: 5,
            target_ratio: 1.0,
            seed: 0,
        }
    }
}

impl SmoteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(Error::Config("smote k_neighbors must be >= 1".into()));
        }
        if !(self.target_ratio > 0.0 && self.target_ratio <= 1.0) {
            return Err(Error::Config(format!(
                "smote target_ratio must be in (0, 1], got {}",
                self.target_ratio
            )));
        }
        Ok(())
    }
}

/// Synthetic rows together with the pair that generated each of them.
#[derive(Debug, Clone)]
pub struct SmoteOutput {
    pub rows: Array2<f64>,
    /// `(base, neighbor)` minority row indices per synthetic row.
    pub sources: Vec<(usize, usize)>,
}

fn squared_distance(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Exact k nearest neighbors (excluding the row itself), ties by index.
fn nearest_neighbors(rows: ArrayView2<f64>, k: usize) -> Vec<Vec<usize>> {
    let n = rows.nrows();
    (0..n)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (squared_distance(rows.row(i), rows.row(j)), j))
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Generates `synthetic_count` rows, each `x + u·(x_nn − x)` for a random
/// minority row `x`, one of its nearest minority neighbors `x_nn` and
/// `u ~ U[0, 1]`. Results are clamped onto the segment.
pub fn smote(
    minority_rows: ArrayView2<f64>,
    synthetic_count: usize,
    cfg: &SmoteConfig,
) -> Result<SmoteOutput> {
    cfg.validate()?;
    let n = minority_rows.nrows();
    if n < 2 {
        return Err(Error::Shape(format!(
            "SMOTE needs at least 2 minority rows to interpolate, got {n}"
        )));
    }
    let k = cfg.k_neighbors.min(n - 1);
    let neighbors = nearest_neighbors(minority_rows, k);
    let mut rng = seed::rng(cfg.seed);
    let dim = minority_rows.ncols();
    let mut rows = Array2::zeros((synthetic_count, dim));
    let mut sources = Vec::with_capacity(synthetic_count);
    for s in 0..synthetic_count {
        let base = rng.random_range(0..n);
        let nn = neighbors[base][rng.random_range(0..k)];
        let u: f64 = rng.random();
        let x = minority_rows.row(base);
        let y = minority_rows.row(nn);
        for j in 0..dim {
            let (lo, hi) = if x[j] <= y[j] { (x[j], y[j]) } else { (y[j], x[j]) };
            rows[[s, j]] = (x[j] + u * (y[j] - x[j])).clamp(lo, hi);
        }
        sources.push((base, nn));
    }
    Ok(SmoteOutput { rows, sources })
}

/// Where a row of an augmented training set came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Original(usize),
    Synthetic,
}

#[derive(Debug, Clone)]
pub struct Augmented {
    pub x: Array2<f64>,
    pub y: Vec<bool>,
    pub provenance: Vec<Provenance>,
}

/// Oversamples the minority label of a training split until
/// `minority = round(target_ratio · majority)`.
pub fn oversample(x: ArrayView2<f64>, y: &[bool], cfg: &SmoteConfig) -> Result<Augmented> {
    let pos = y.iter().filter(|&&v| v).count();
    let neg = y.len() - pos;
    let minority_label = pos <= neg;
    let (minority, majority) = if minority_label { (pos, neg) } else { (neg, pos) };
    let target = (cfg.target_ratio * majority as f64).round() as usize;
    let mut provenance: Vec<Provenance> = (0..y.len()).map(Provenance::Original).collect();
    if target <= minority || minority < 2 {
        return Ok(Augmented {
            x: x.to_owned(),
            y: y.to_vec(),
            provenance,
        });
    }
    let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    let minority_rows = x.select(Axis(0), &idx);
    let synth = smote(minority_rows.view(), target - minority, cfg)?;
    let mut out = x.to_owned();
    out.append(Axis(0), synth.rows.view())
        .map_err(|e| Error::Shape(e.to_string()))?;
    let mut labels = y.to_vec();
    labels.extend(std::iter::repeat_n(minority_label, synth.rows.nrows()));
    provenance.extend(std::iter::repeat_n(Provenance::Synthetic, synth.rows.nrows()));
    Ok(Augmented {
        x: out,
        y: labels,
        provenance,
    })
}
