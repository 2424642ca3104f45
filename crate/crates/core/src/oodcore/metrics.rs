//! Threshold detector and ranking metrics. ID is the positive class
//! throughout: a detector flags a sample as ID when its score is at least
//! the threshold.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::nn::MlpModel;
use crate::synthdata::LabeledSet;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Id,
    Ood,
}

/// Inclusive threshold: a score equal to `gamma` is ID.
pub fn detect(score: f64, gamma: f64) -> Decision {
    if score >= gamma {
        Decision::Id
    } else {
        Decision::Ood
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionReport {
    pub gamma: f64,
    pub fpr95: f64,
    pub auroc: f64,
    pub aupr: f64,
    pub id_acc: f64,
}

fn non_empty(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::input(format!("{name} scores are empty")));
    }
    if xs.iter().any(|x| x.is_nan()) {
        return Err(Error::input(format!("{name} scores contain NaN")));
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Number of ID samples that must be accepted to reach `tpr_target`.
fn required_accepts(n: usize, tpr_target: f64) -> usize {
    // The slack absorbs representation error in products like 0.95 * 20.
    let need = (tpr_target * n as f64 - 1e-9).ceil();
    (need.max(1.0) as usize).min(n)
}

/// Largest threshold that still accepts at least `tpr_target` of the ID scores.
pub fn calibrate_gamma(id_scores: &[f64], tpr_target: f64) -> Result<f64> {
    non_empty("id", id_scores)?;
    if !(tpr_target > 0.0 && tpr_target <= 1.0) {
        return Err(Error::param(format!("tpr target must be in (0, 1], got {tpr_target}")));
    }
    let s = sorted(id_scores);
    let accepts = required_accepts(s.len(), tpr_target);
    Ok(s[s.len() - accepts])
}

/// Fraction of OOD scores accepted as ID at the calibrated threshold.
pub fn fpr_at_tpr(id_scores: &[f64], ood_scores: &[f64], tpr_target: f64) -> Result<f64> {
    non_empty("ood", ood_scores)?;
    let gamma = calibrate_gamma(id_scores, tpr_target)?;
    let fp = ood_scores.iter().filter(|&&s| detect(s, gamma) == Decision::Id).count();
    Ok(fp as f64 / ood_scores.len() as f64)
}

/// AUROC as the Mann-Whitney statistic with half credit for ties.
///
/// Sort-based; the pair counts are integers, so the result is exact up to the
/// final division.
pub fn auroc(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    non_empty("id", id_scores)?;
    non_empty("ood", ood_scores)?;
    let id = sorted(id_scores);
    let ood = sorted(ood_scores);
    // For each ID score, count OOD strictly below and equal.
    let (mut below, mut upto) = (0usize, 0usize);
    let mut wins: u128 = 0;
    let mut ties: u128 = 0;
    for &s in &id {
        while below < ood.len() && ood[below] < s {
            below += 1;
        }
        if upto < below {
            upto = below;
        }
        while upto < ood.len() && ood[upto] <= s {
            upto += 1;
        }
        wins += below as u128;
        ties += (upto - below) as u128;
    }
    let pairs = (id.len() * ood.len()) as f64;
    Ok((wins as f64 + 0.5 * ties as f64) / pairs)
}

/// One ROC / PR operating point per distinct score, swept from high to low.
/// Each entry is the cumulative (true positive, false positive) count.
fn sweep(id_scores: &[f64], ood_scores: &[f64]) -> Vec<(usize, usize)> {
    let mut all: Vec<(f64, bool)> = id_scores
        .iter()
        .map(|&s| (s, true))
        .chain(ood_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut points = Vec::new();
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < all.len() {
        let s = all[i].0;
        while i < all.len() && all[i].0.total_cmp(&s) == Ordering::Equal {
            if all[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push((tp, fp));
    }
    points
}

/// AUROC as the trapezoidal area under the swept ROC curve.
pub fn auroc_trapezoid(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    non_empty("id", id_scores)?;
    non_empty("ood", ood_scores)?;
    let (n_pos, n_neg) = (id_scores.len() as f64, ood_scores.len() as f64);
    let mut area = 0.0;
    let (mut prev_tp, mut prev_fp) = (0usize, 0usize);
    for (tp, fp) in sweep(id_scores, ood_scores) {
        // trapezoid in count units; normalized once at the end
        area += (fp - prev_fp) as f64 * (tp + prev_tp) as f64 / 2.0;
        prev_tp = tp;
        prev_fp = fp;
    }
    Ok(area / (n_pos * n_neg))
}

/// Step-wise average precision with ID as the positive class.
pub fn aupr(id_scores: &[f64], ood_scores: &[f64]) -> Result<f64> {
    non_empty("id", id_scores)?;
    non_empty("ood", ood_scores)?;
    let n_pos = id_scores.len() as f64;
    let mut ap = 0.0;
    let mut prev_tp = 0usize;
    for (tp, fp) in sweep(id_scores, ood_scores) {
        if tp > prev_tp {
            let delta_recall = (tp - prev_tp) as f64 / n_pos;
            let precision = tp as f64 / (tp + fp) as f64;
            ap += delta_recall * precision;
        }
        prev_tp = tp;
    }
    Ok(ap)
}

/// Index of the largest of the first `num_classes` logits; ties go to the lowest index.
pub(crate) fn argmax_classes(logits: &[f64], num_classes: usize) -> usize {
    let mut best = 0;
    for (i, &v) in logits.iter().enumerate().take(num_classes).skip(1) {
        if v > logits[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose argmax over the class logits equals the label.
/// An outlier head, if present, takes no part in the argmax.
pub fn id_accuracy(model: &MlpModel, set: &LabeledSet, num_classes: usize) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::input("empty labeled set"));
    }
    let logits = model.forward(set.points())?;
    let correct = logits
        .iter_rows()
        .zip(set.labels())
        .filter(|(row, &y)| argmax_classes(row, num_classes) == y)
        .count();
    Ok(correct as f64 / set.len() as f64)
}
