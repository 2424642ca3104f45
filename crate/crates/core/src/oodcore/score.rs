use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::{softmax_row, Matrix};
use crate::{Error, Result};

/// Which scalar a model's logits are reduced to. Higher always means "more ID".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreKind {
    /// Log-sum-exp over the K class logits.
    Energy,
    /// Maximum softmax probability over the K class logits.
    Msp,
    /// Negative softmax mass on the extra outlier logit.
    Kplus1,
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScoreKind::Energy => "energy",
            ScoreKind::Msp => "msp",
            ScoreKind::Kplus1 => "kplus1",
        })
    }
}

impl FromStr for ScoreKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "energy" => Ok(ScoreKind::Energy),
            "msp" => Ok(ScoreKind::Msp),
            "kplus1" => Ok(ScoreKind::Kplus1),
            other => Err(Error::config(format!("unknown score kind `{other}`"))),
        }
    }
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Scores one logit vector for a `num_classes`-way task.
///
/// Energy and MSP look only at the first `num_classes` logits, so a model with
/// an extra outlier head can still be scored by them.
pub fn score(logits: &[f64], kind: ScoreKind, num_classes: usize) -> Result<f64> {
    if num_classes < 2 {
        return Err(Error::input(format!("need at least 2 classes, got {num_classes}")));
    }
    match kind {
        ScoreKind::Energy | ScoreKind::Msp if logits.len() < num_classes => Err(Error::shape(
            format!("{} logits for {num_classes} classes", logits.len()),
        )),
        ScoreKind::Energy => Ok(log_sum_exp(&logits[..num_classes])),
        ScoreKind::Msp => Ok(softmax_row(&logits[..num_classes])
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)),
        ScoreKind::Kplus1 => {
            if logits.len() != num_classes + 1 {
                return Err(Error::config(format!(
                    "kplus1 score needs {} logits, model has {}",
                    num_classes + 1,
                    logits.len()
                )));
            }
            Ok(-softmax_row(logits)[num_classes])
        }
    }
}

/// Scores every row of a logit matrix.
pub fn score_rows(logits: &Matrix, kind: ScoreKind, num_classes: usize) -> Result<Vec<f64>> {
    logits.iter_rows().map(|row| score(row, kind, num_classes)).collect()
}
