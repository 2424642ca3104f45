use std::io::Write;

use super::train::HistoryRow;
use crate::nn::MlpModel;
use crate::oodcore::{aupr, auroc, calibrate_gamma, fpr_at_tpr, id_accuracy, score_rows, DetectionReport, ScoreKind};
use crate::synthdata::{LabeledSet, OutlierSet};
use crate::{Error, Result};

const TPR_TARGET: f64 = 0.95;

#[derive(Debug, Clone, PartialEq)]
pub struct SetReport {
    pub name: String,
    pub report: DetectionReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub per_set: Vec<SetReport>,
    /// Unweighted mean of `per_set`.
    pub aggregate: DetectionReport,
    pub history: Vec<HistoryRow>,
    pub wall_ms: u128,
}

/// Scores the ID test set once, then reports each OOD set and their mean.
pub fn evaluate(
    model: &MlpModel,
    id_test: &LabeledSet,
    ood_tests: &[(String, OutlierSet)],
    score_kind: ScoreKind,
    num_classes: usize,
) -> Result<RunResult> {
    if id_test.is_empty() {
        return Err(Error::input("empty ID test set"));
    }
    if ood_tests.is_empty() {
        return Err(Error::input("no OOD test sets"));
    }
    let id_scores = score_rows(&model.forward(id_test.points())?, score_kind, num_classes)?;
    let gamma = calibrate_gamma(&id_scores, TPR_TARGET)?;
    let id_acc = id_accuracy(model, id_test, num_classes)?;

    let mut per_set = Vec::with_capacity(ood_tests.len());
    for (name, set) in ood_tests {
        if set.is_empty() {
            return Err(Error::input(format!("OOD test set `{name}` is empty")));
        }
        let ood_scores = score_rows(&model.forward(&set.points)?, score_kind, num_classes)?;
        per_set.push(SetReport {
            name: name.clone(),
            report: DetectionReport {
                gamma,
                fpr95: fpr_at_tpr(&id_scores, &ood_scores, TPR_TARGET)?,
                auroc: auroc(&id_scores, &ood_scores)?,
                aupr: aupr(&id_scores, &ood_scores)?,
                id_acc,
            },
        });
    }
    let n = per_set.len() as f64;
    let mean = |f: fn(&DetectionReport) -> f64| per_set.iter().map(|s| f(&s.report)).sum::<f64>() / n;
    let aggregate = DetectionReport {
        gamma,
        fpr95: mean(|r| r.fpr95),
        auroc: mean(|r| r.auroc),
        aupr: mean(|r| r.aupr),
        id_acc,
    };
    Ok(RunResult { per_set, aggregate, history: Vec::new(), wall_ms: 0 })
}

/// Writes `source,score` rows with `source` in {id, ood}.
pub fn write_scores_csv<W: Write>(id_scores: &[f64], ood_scores: &[f64], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["source", "score"])?;
    for s in id_scores {
        wtr.serialize(("id", s))?;
    }
    for s in ood_scores {
        wtr.serialize(("ood", s))?;
    }
    wtr.flush()?;
    Ok(())
}
