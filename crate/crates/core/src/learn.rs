//! Binary probabilistic classifiers: the pluggable [`Learner`] interface, the
//! built-in L2-regularized logistic model, and grid hyper-parameter tuning.
//!
//! Reference configuration for a gradient-boosted-tree adapter, as used for
//! the original rice gene-function study: `gbtree` booster, `aucpr` eval
//! metric, `eta` 0.05, `max_depth` 6, `subsample` 0.9, `min_child_weight` 3.

use std::io::Write as _;
use std::path::PathBuf;
use std::process::Command;

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::average_precision;
use crate::resample::{oversample, FoldAssignment, SmoteConfig};
use crate::seed;

/// Probabilities are kept inside `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ClassifierKind {
    #[default]
    BuiltinLogistic,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2_strength: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            kind: ClassifierKind::BuiltinLogistic,
            learning_rate: 0.05,
            epochs: 200,
            l2_strength: 0.0,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl ClassifierConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config("learning_rate must be > 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if !(self.l2_strength >= 0.0) {
            return Err(Error::Config("l2_strength must be >= 0".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SelectionMetric {
    #[default]
    Aucpr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub candidates: Vec<ClassifierConfig>,
    #[serde(default)]
    pub metric: SelectionMetric,
}

impl HyperGrid {
    /// learning rate {0.01, 0.05, 0.1} × l2 {0, 0.1, 1} × epochs {50, 200}.
    pub fn default_grid() -> HyperGrid {
        Self::product(&[0.01, 0.05, 0.1], &[0.0, 0.1, 1.0], &[50, 200])
    }

    pub fn product(learning_rates: &[f64], l2: &[f64], epochs: &[usize]) -> HyperGrid {
        let mut candidates = Vec::new();
        for &learning_rate in learning_rates {
            for &l2_strength in l2 {
                for &e in epochs {
                    candidates.push(ClassifierConfig {
                        learning_rate,
                        l2_strength,
                        epochs: e,
                        ..ClassifierConfig::default()
                    });
                }
            }
        }
        HyperGrid {
            candidates,
            metric: SelectionMetric::Aucpr,
        }
    }
}

/// Logistic model: one weight per feature followed by the bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub weights: Vec<f64>,
    pub config: ClassifierConfig,
    pub schema_hash: String,
    /// Full-data regularized loss after each epoch.
    pub loss_history: Vec<f64>,
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn score(weights: &[f64], row: ArrayView1<f64>) -> f64 {
    let d = row.len();
    weights[d] + row.iter().zip(&weights[..d]).map(|(x, w)| x * w).sum::<f64>()
}

/// `-log σ(z)` without overflow.
fn softplus_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

/// Mean logistic loss plus `l2/2 · ‖w‖²` (bias not penalized).
pub fn logistic_loss(weights: &[f64], x: ArrayView2<f64>, y: &[bool], l2: f64) -> f64 {
    let n = x.nrows() as f64;
    let data: f64 = x
        .rows()
        .into_iter()
        .zip(y)
        .map(|(row, &label)| {
            let z = score(weights, row);
            if label {
                softplus_neg(z)
            } else {
                softplus_neg(-z)
            }
        })
        .sum::<f64>()
        / n;
    let d = x.ncols();
    data + 0.5 * l2 * weights[..d].iter().map(|w| w * w).sum::<f64>()
}

/// Gradient of [`logistic_loss`] with respect to the weights.
pub fn logistic_gradient(weights: &[f64], x: ArrayView2<f64>, y: &[bool], l2: f64) -> Vec<f64> {
    let d = x.ncols();
    let n = x.nrows() as f64;
    let mut grad = vec![0.0; d + 1];
    for (row, &label) in x.rows().into_iter().zip(y) {
        let err = sigmoid(score(weights, row)) - if label { 1.0 } else { 0.0 };
        for (g, v) in grad[..d].iter_mut().zip(row.iter()) {
            *g += err * v;
        }
        grad[d] += err;
    }
    for g in &mut grad {
        *g /= n;
    }
    for (g, w) in grad[..d].iter_mut().zip(&weights[..d]) {
        *g += l2 * w;
    }
    grad
}

fn check_inputs(x: ArrayView2<f64>, y: &[bool]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::Shape(format!("{} rows for {} labels", x.nrows(), y.len())));
    }
    for ((r, c), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(Error::NonFinite { row: r, column: c });
        }
    }
    Ok(())
}

/// Fits the logistic model by seeded mini-batch gradient descent with an
/// inverse-scaling learning-rate decay.
///
/// Columns are centered and scaled by their training statistics while
/// fitting; the returned weights apply to the raw columns. The L2 penalty and
/// `loss_history` refer to the scaled problem.
pub fn train(
    x: ArrayView2<f64>,
    y: &[bool],
    schema_hash: &str,
    cfg: &ClassifierConfig,
) -> Result<TrainedModel> {
    cfg.validate()?;
    check_inputs(x, y)?;
    let pos = y.iter().filter(|&&v| v).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateLabels);
    }
    let d = x.ncols();
    let means = x.mean_axis(Axis(0)).unwrap_or_else(|| ndarray::Array1::zeros(d));
    let stds = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
    let z = (&x - &means) / &stds;
    let mut weights = vec![0.0; d + 1];
    let mut rng = seed::rng(cfg.seed);
    let mut order: Vec<usize> = (0..z.nrows()).collect();
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate / (1.0 + epoch as f64 / cfg.epochs as f64);
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let bx = z.select(Axis(0), batch);
            let by: Vec<bool> = batch.iter().map(|&i| y[i]).collect();
            let grad = logistic_gradient(&weights, bx.view(), &by, cfg.l2_strength);
            for (w, g) in weights.iter_mut().zip(&grad) {
                *w -= lr * g;
            }
        }
        loss_history.push(logistic_loss(&weights, z.view(), y, cfg.l2_strength));
    }
    for j in 0..d {
        weights[j] /= stds[j];
        weights[d] -= weights[j] * means[j];
    }
    Ok(TrainedModel {
        weights,
        config: cfg.clone(),
        schema_hash: schema_hash.to_string(),
        loss_history,
    })
}

/// `σ(w·x + b)` per row, clamped into `[1e-15, 1 - 1e-15]`.
pub fn predict_proba(model: &TrainedModel, x: ArrayView2<f64>, schema_hash: &str) -> Result<Vec<f64>> {
    if model.schema_hash != schema_hash {
        return Err(Error::SchemaMismatch {
            expected: model.schema_hash.clone(),
            found: schema_hash.to_string(),
        });
    }
    if x.ncols() + 1 != model.weights.len() {
        return Err(Error::Shape(format!(
            "model has {} features, input has {}",
            model.weights.len() - 1,
            x.ncols()
        )));
    }
    Ok(x.rows()
        .into_iter()
        .map(|row| sigmoid(score(&model.weights, row)).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
        .collect())
}

/// Probabilities for held-out rows, plus the model when it is inspectable.
#[derive(Debug, Clone)]
pub struct FoldFit {
    pub probabilities: Vec<f64>,
    pub model: Option<TrainedModel>,
}

/// A binary probabilistic classifier the engine can train per fold.
pub trait Learner: Send + Sync {
    fn fit_predict(
        &self,
        train_x: ArrayView2<f64>,
        train_y: &[bool],
        test_x: ArrayView2<f64>,
        schema: &Schema,
        cfg: &ClassifierConfig,
    ) -> Result<FoldFit>;
}

/// Ordered feature names plus their hash.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schema {
    pub columns: Vec<String>,
    pub hash: String,
}

impl Schema {
    pub fn new(columns: Vec<String>) -> Self {
        let hash = crate::io::sha256_hex(columns.join("\t").as_bytes());
        Schema { columns, hash }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Logistic;

impl Learner for Logistic {
    fn fit_predict(
        &self,
        train_x: ArrayView2<f64>,
        train_y: &[bool],
        test_x: ArrayView2<f64>,
        schema: &Schema,
        cfg: &ClassifierConfig,
    ) -> Result<FoldFit> {
        let model = train(train_x, train_y, &schema.hash, cfg)?;
        let probabilities = predict_proba(&model, test_x, &schema.hash)?;
        Ok(FoldFit {
            probabilities,
            model: Some(model),
        })
    }
}

/// Adapter for an out-of-process classifier.
///
/// The program is invoked as `program [args..] TRAIN TEST OUT`. `TRAIN` is a
/// tab-separated matrix with a header of feature names followed by a
/// `label` column (0/1); `TEST` has the same header without `label`. The
/// program must write `OUT` as a `row<TAB>probability` table with a header
/// and one line per test row.
#[derive(Debug, Clone)]
pub struct ExternalCommand {
    pub program: PathBuf,
    pub args: Vec<String>,
}

fn write_matrix(path: &std::path::Path, columns: &[String], x: ArrayView2<f64>, y: Option<&[bool]>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&columns.join("\t"));
    if y.is_some() {
        out.push_str("\tlabel");
    }
    out.push('\n');
    for (i, row) in x.rows().into_iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join("\t"));
        if let Some(y) = y {
            out.push_str(if y[i] { "\t1" } else { "\t0" });
        }
        out.push('\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(out.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

/// Parses and validates an adapter's `row<TAB>probability` output.
pub fn parse_probability_table(text: &str, expected_rows: usize) -> Result<Vec<f64>> {
    let mut probs = vec![f64::NAN; expected_rows];
    let mut seen = 0;
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split('\t').collect();
        let bad = |m: String| Error::External(format!("output line {}: {m}", i + 1));
        if f.len() != 2 {
            return Err(bad("expected `row<TAB>probability`".into()));
        }
        let row: usize = f[0].trim().parse().map_err(|_| bad(format!("bad row `{}`", f[0])))?;
        let p: f64 = f[1].trim().parse().map_err(|_| bad(format!("bad probability `{}`", f[1])))?;
        if row >= expected_rows {
            return Err(bad(format!("row {row} out of range")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(bad(format!("probability {p} outside [0, 1]")));
        }
        if !probs[row].is_nan() {
            return Err(bad(format!("row {row} repeated")));
        }
        probs[row] = p;
        seen += 1;
    }
    if seen != expected_rows {
        return Err(Error::External(format!(
            "expected {expected_rows} probabilities, got {seen}"
        )));
    }
    Ok(probs)
}

impl Learner for ExternalCommand {
    fn fit_predict(
        &self,
        train_x: ArrayView2<f64>,
        train_y: &[bool],
        test_x: ArrayView2<f64>,
        schema: &Schema,
        _cfg: &ClassifierConfig,
    ) -> Result<FoldFit> {
        check_inputs(train_x, train_y)?;
        let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
        let train_path = dir.path().join("train.tsv");
        let test_path = dir.path().join("test.tsv");
        let out_path = dir.path().join("out.tsv");
        write_matrix(&train_path, &schema.columns, train_x, Some(train_y))?;
        write_matrix(&test_path, &schema.columns, test_x, None)?;
        let status = Command::new(&self.program)
            .args(&self.args)
            .arg(&train_path)
            .arg(&test_path)
            .arg(&out_path)
            .status()
            .map_err(|e| Error::io(&self.program, e))?;
        if !status.success() {
            return Err(Error::External(format!("{} exited with {status}", self.program.display())));
        }
        let text = std::fs::read_to_string(&out_path).map_err(|e| Error::io(&out_path, e))?;
        Ok(FoldFit {
            probabilities: parse_probability_table(&text, test_x.nrows())?,
            model: None,
        })
    }
}

/// Outcome of [`tune`]: the winner and every candidate's mean AUCPR
/// (`-inf` for candidates that failed).
#[derive(Debug, Clone)]
pub struct TuneOutcome {
    pub best: ClassifierConfig,
    pub best_index: usize,
    pub scores: Vec<f64>,
}

fn cv_score(
    learner: &dyn Learner,
    x: ArrayView2<f64>,
    y: &[bool],
    schema: &Schema,
    cfg: &ClassifierConfig,
    folds: &FoldAssignment,
    smote: Option<&SmoteConfig>,
) -> Result<f64> {
    let mut total = 0.0;
    for f in 0..folds.k {
        let train_rows = folds.train_rows(f);
        let test_rows = folds.test_rows(f);
        let tx = x.select(Axis(0), &train_rows);
        let ty: Vec<bool> = train_rows.iter().map(|&i| y[i]).collect();
        let (tx, ty) = match smote {
            Some(s) => {
                let aug = oversample(tx.view(), &ty, s)?;
                (aug.x, aug.y)
            }
            None => (tx, ty),
        };
        let vx = x.select(Axis(0), &test_rows);
        let vy: Vec<bool> = test_rows.iter().map(|&i| y[i]).collect();
        let fit = learner.fit_predict(tx.view(), &ty, vx.view(), schema, cfg)?;
        total += average_precision(&fit.probabilities, &vy)?;
    }
    Ok(total / folds.k as f64)
}

/// Picks the grid candidate with the highest mean area under the
/// precision-recall curve across folds. Ties keep grid order; failing
/// candidates score `-inf`.
pub fn tune(
    learner: &dyn Learner,
    x: ArrayView2<f64>,
    y: &[bool],
    schema: &Schema,
    grid: &HyperGrid,
    folds: &FoldAssignment,
    smote: Option<&SmoteConfig>,
) -> Result<TuneOutcome> {
    if grid.candidates.is_empty() {
        return Err(Error::Config("hyper-parameter grid is empty".into()));
    }
    if folds.fold.len() != y.len() {
        return Err(Error::Shape("fold assignment does not match labels".into()));
    }
    let scores: Vec<f64> = grid
        .candidates
        .iter()
        .map(|cfg| {
            cv_score(learner, x, y, schema, cfg, folds, smote).unwrap_or_else(|e| {
                log::debug!("candidate {cfg:?} failed: {e}");
                f64::NEG_INFINITY
            })
        })
        .collect();
    let mut best_index = None;
    for (i, &s) in scores.iter().enumerate() {
        if s.is_finite() && best_index.is_none_or(|b: usize| s > scores[b]) {
            best_index = Some(i);
        }
    }
    let best_index = best_index.ok_or(Error::AllCandidatesFailed)?;
    Ok(TuneOutcome {
        best: grid.candidates[best_index].clone(),
        best_index,
        scores,
    })
}

/// Row-major matrix from nested rows, for tests and examples.
pub fn matrix(rows: &[Vec<f64>]) -> Array2<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn schema(d: usize) -> Schema {
        Schema::new((0..d).map(|i| format!("f{i}")).collect())
    }

    #[test]
    fn constant_labels_are_rejected() {
        let x = array![[1.0], [2.0]];
        assert!(matches!(
            train(x.view(), &[true, true], "h", &ClassifierConfig::default()),
            Err(Error::DegenerateLabels)
        ));
    }

    #[test]
    fn non_finite_features_are_rejected() {
        let x = array![[1.0], [f64::NAN]];
        assert!(matches!(
            train(x.view(), &[true, false], "h", &ClassifierConfig::default()),
            Err(Error::NonFinite { row: 1, column: 0 })
        ));
    }

    #[test]
    fn zero_model_predicts_half() {
        let m = TrainedModel {
            weights: vec![0.0; 3],
            config: ClassifierConfig::default(),
            schema_hash: "h".into(),
            loss_history: vec![],
        };
        let p = predict_proba(&m, array![[1.0, 2.0], [-5.0, 0.0]].view(), "h").unwrap();
        assert_eq!(p, vec![0.5, 0.5]);
        assert!(matches!(
            predict_proba(&m, array![[1.0, 2.0]].view(), "other"),
            Err(Error::SchemaMismatch { .. })
        ));
    }

    #[test]
    fn extreme_scores_are_clamped() {
        let m = TrainedModel {
            weights: vec![1.0, 0.0],
            config: ClassifierConfig::default(),
            schema_hash: "h".into(),
            loss_history: vec![],
        };
        let p = predict_proba(&m, array![[100.0], [-100.0], [36.0]].view(), "h").unwrap();
        assert_eq!(p[0], 1.0 - PROB_FLOOR);
        assert_eq!(p[1], PROB_FLOOR);
        assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn duplicate_rows_get_identical_probabilities() {
        let x = array![[0.0, 1.0], [1.0, 0.0], [0.0, 1.0], [2.0, -1.0]];
        let y = [true, false, true, false];
        let s = schema(2);
        let m = train(x.view(), &y, &s.hash, &ClassifierConfig::default()).unwrap();
        let p = predict_proba(&m, x.view(), &s.hash).unwrap();
        assert_eq!(p[0], p[2]);
    }

    #[test]
    fn single_candidate_grid() {
        let x = array![[0.0], [0.1], [0.2], [1.0], [1.1], [1.2], [0.3], [1.3], [0.05], [1.05]];
        let y: Vec<bool> = x.column(0).iter().map(|&v| v > 0.5).collect();
        let folds = crate::resample::stratified_kfold(&y, 2, 0).unwrap();
        let grid = HyperGrid {
            candidates: vec![ClassifierConfig { epochs: 5, ..Default::default() }],
            metric: SelectionMetric::Aucpr,
        };
        let out = tune(&Logistic, x.view(), &y, &schema(1), &grid, &folds, None).unwrap();
        assert_eq!(out.best_index, 0);
    }

    #[test]
    fn probability_table_validation() {
        assert_eq!(parse_probability_table("row\tprobability\n1\t0.25\n0\t1\n", 2).unwrap(), vec![1.0, 0.25]);
        assert!(parse_probability_table("row\tprobability\n0\t1.5\n", 1).is_err());
        assert!(parse_probability_table("row\tprobability\n0\t0.5\n", 2).is_err());
        assert!(parse_probability_table("row\tprobability\n0\t0.5\n0\t0.5\n", 2).is_err());
    }
}
