//! Confusion-matrix statistics and ranking metrics.
//!
//! Decisions are always `score >= threshold`. Tied scores collapse into a
//! single threshold step in every sweep.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    /// Recall; 0 when there are no positives.
    pub fn tpr(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn tnr(&self) -> f64 {
        ratio(self.tn, self.tn + self.fp)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        self.tpr()
    }

    /// `2PR / (P + R)`, 0 when both are 0. Computed as `2tp / (2tp + fp + fn)`
    /// so that equal rationals compare equal.
    pub fn f1(&self) -> f64 {
        ratio(2 * self.tp, 2 * self.tp + self.fp + self.fn_)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn confusion(scores: &[f64], labels: &[bool], threshold: f64) -> ConfusionMatrix {
    let mut cm = ConfusionMatrix::default();
    for (&s, &y) in scores.iter().zip(labels) {
        match (s >= threshold, y) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fp += 1,
            (false, false) => cm.tn += 1,
            (false, true) => cm.fn_ += 1,
        }
    }
    cm
}

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::DegenerateLabels);
    }
    Ok((pos, neg))
}

/// One step of a descending threshold sweep: cumulative counts of rows with
/// `score >= threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Step {
    threshold: f64,
    tp: usize,
    fp: usize,
}

fn sweep(scores: &[f64], labels: &[bool]) -> Vec<Step> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut steps = Vec::new();
    let (mut tp, mut fp) = (0, 0);
    let mut i = 0;
    while i < order.len() {
        let t = scores[order[i]];
        while i < order.len() && scores[order[i]] == t {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        steps.push(Step { threshold: t, tp, fp });
    }
    steps
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrPoint {
    pub threshold: f64,
    pub precision: f64,
    pub recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

/// Precision-recall curve over distinct thresholds, strictly decreasing.
/// The first point is the anchor `(+inf, precision 1, recall 0)`.
pub fn pr_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<PrPoint>> {
    let (pos, _) = check_binary(scores, labels)?;
    let mut pts = vec![PrPoint {
        threshold: f64::INFINITY,
        precision: 1.0,
        recall: 0.0,
    }];
    pts.extend(sweep(scores, labels).into_iter().map(|s| PrPoint {
        threshold: s.threshold,
        precision: s.tp as f64 / (s.tp + s.fp) as f64,
        recall: s.tp as f64 / pos as f64,
    }));
    Ok(pts)
}

/// ROC curve over distinct thresholds, starting at `(+inf, 0, 0)`.
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = check_binary(scores, labels)?;
    let mut pts = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    pts.extend(sweep(scores, labels).into_iter().map(|s| RocPoint {
        threshold: s.threshold,
        fpr: s.fp as f64 / neg as f64,
        tpr: s.tp as f64 / pos as f64,
    }));
    Ok(pts)
}

/// Non-interpolated average precision: `Σ (R_i − R_{i−1}) · P_i`.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let curve = pr_curve(scores, labels)?;
    Ok(curve
        .windows(2)
        .map(|w| (w[1].recall - w[0].recall) * w[1].precision)
        .sum())
}

/// Area under the ROC curve by the trapezoidal rule. Ties contribute one
/// half, matching the pairwise definition.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    // accumulate in integer units of 1/(2·pos·neg) to stay exact
    let mut twice_area: u128 = 0;
    let (mut prev_tp, mut prev_fp) = (0u128, 0u128);
    for s in sweep(scores, labels) {
        let (tp, fp) = (s.tp as u128, s.fp as u128);
        twice_area += (fp - prev_fp) * (tp + prev_tp);
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok(twice_area as f64 / (2 * pos as u128 * neg as u128) as f64)
}

/// Threshold among the distinct scores that maximizes F1; ties resolve to
/// the smallest threshold.
pub fn optimum_threshold(scores: &[f64], labels: &[bool]) -> Result<f64> {
    optimum_threshold_with_f1(scores, labels).map(|(t, _)| t)
}

pub fn optimum_threshold_with_f1(scores: &[f64], labels: &[bool]) -> Result<(f64, f64)> {
    let (pos, _) = check_binary(scores, labels)?;
    let mut best = (f64::NAN, -1.0);
    for s in sweep(scores, labels) {
        let cm = ConfusionMatrix {
            tp: s.tp,
            fp: s.fp,
            tn: 0,
            fn_: pos - s.tp,
        };
        let f1 = cm.f1();
        // descending sweep: `>=` moves ties to the smaller threshold
        if f1 >= best.1 {
            best = (s.threshold, f1);
        }
    }
    Ok(best)
}

/// Summary statistics for one class at a given threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub threshold: f64,
    pub tpr: f64,
    pub tnr: f64,
    pub precision: f64,
    pub f1: f64,
    pub average_precision: f64,
    pub roc_auc: f64,
    pub positives: usize,
    pub samples: usize,
    pub confusion: ConfusionMatrix,
}

/// Evaluates scores at their optimum threshold.
pub fn evaluate(scores: &[f64], labels: &[bool]) -> Result<ClassMetrics> {
    let threshold = optimum_threshold(scores, labels)?;
    let cm = confusion(scores, labels, threshold);
    Ok(ClassMetrics {
        threshold,
        tpr: cm.tpr(),
        tnr: cm.tnr(),
        precision: cm.precision(),
        f1: cm.f1(),
        average_precision: average_precision(scores, labels)?,
        roc_auc: roc_auc(scores, labels)?,
        positives: cm.tp + cm.fn_,
        samples: cm.total(),
        confusion: cm,
    })
}

/// `threshold,precision,recall` rows for external plotting.
pub fn pr_curve_csv(curve: &[PrPoint]) -> String {
    let mut out = String::from("threshold,precision,recall\n");
    for p in curve {
        out.push_str(&format!("{},{},{}\n", p.threshold, p.precision, p.recall));
    }
    out
}
