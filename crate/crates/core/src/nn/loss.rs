use super::model::{Gradients, MlpModel};
use crate::numerics::{softmax_row, Matrix};
use crate::oodcore::{aux_loss_and_grad, log_sum_exp, RegLossSpec, ScoreKind};
use crate::synthdata::LabeledSet;
use crate::{Error, Result};

/// Components of the training objective `ce + omega * reg`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    pub ce: f64,
    pub reg: f64,
    pub total: f64,
}

/// Mean cross-entropy of `logits` against integer `labels`.
pub fn cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<f64> {
    if logits.rows() != labels.len() {
        return Err(Error::shape("one label per logit row required"));
    }
    if labels.is_empty() {
        return Err(Error::input("empty batch"));
    }
    let mut sum = 0.0;
    for (z, &y) in logits.iter_rows().zip(labels) {
        if y >= z.len() {
            return Err(Error::input(format!("label {y} out of range")));
        }
        sum += log_sum_exp(z) - z[y];
    }
    Ok(sum / labels.len() as f64)
}

fn check_heads(
    model: &MlpModel,
    reg: &RegLossSpec,
    score_kind: ScoreKind,
    num_classes: usize,
) -> Result<()> {
    let want = reg.output_dim(num_classes);
    if model.output_dim() != want {
        return Err(Error::config(format!(
            "{:?} regularizer with {num_classes} classes needs {want} outputs, model has {}",
            reg.variant,
            model.output_dim()
        )));
    }
    if score_kind == ScoreKind::Kplus1 && model.output_dim() != num_classes + 1 {
        return Err(Error::config("kplus1 score needs a K+1 output head"));
    }
    Ok(())
}

/// Objective value and its exact gradient.
///
/// The ID rows and outlier rows share one forward/backward pass. An empty
/// outlier batch is allowed and contributes nothing to the outlier terms.
pub fn loss_and_grad(
    model: &MlpModel,
    id_batch: &LabeledSet,
    outliers: &Matrix,
    reg: &RegLossSpec,
    score_kind: ScoreKind,
    num_classes: usize,
) -> Result<(LossBreakdown, Gradients)> {
    reg.validate()?;
    check_heads(model, reg, score_kind, num_classes)?;
    let n_id = id_batch.len();
    if n_id == 0 {
        return Err(Error::input("empty ID batch"));
    }
    if id_batch.labels().iter().any(|&y| y >= num_classes) {
        return Err(Error::input("ID label out of range"));
    }
    let n_out = outliers.rows();
    let stacked = if n_out > 0 { id_batch.points().vstack(outliers)? } else { id_batch.points().clone() };
    let cache = model.forward_cached(&stacked)?;
    let logits = &cache.logits;
    let width = logits.cols();

    let id_idx: Vec<usize> = (0..n_id).collect();
    let out_idx: Vec<usize> = (n_id..n_id + n_out).collect();
    let id_logits = logits.select_rows(&id_idx);
    let out_logits = logits.select_rows(&out_idx);

    let ce = cross_entropy(&id_logits, id_batch.labels())?;
    let mut d = Matrix::zeros(n_id + n_out, width);
    for (r, &y) in id_batch.labels().iter().enumerate() {
        let p = softmax_row(id_logits.row(r));
        let row = d.row_mut(r);
        for (dv, p) in row.iter_mut().zip(p) {
            *dv = p / n_id as f64;
        }
        row[y] -= 1.0 / n_id as f64;
    }

    let mut reg_value = 0.0;
    if reg.omega > 0.0 {
        let aux = aux_loss_and_grad(&id_logits, &out_logits, reg, num_classes)?;
        reg_value = aux.loss;
        for r in 0..n_id {
            for (dv, g) in d.row_mut(r).iter_mut().zip(aux.d_id.row(r)) {
                *dv += reg.omega * g;
            }
        }
        for r in 0..n_out {
            d.row_mut(n_id + r).copy_from_slice(aux.d_outliers.row(r));
            d.row_mut(n_id + r).iter_mut().for_each(|v| *v *= reg.omega);
        }
    }

    let grads = model.backward(&cache, d)?;
    let total = ce + reg.omega * reg_value;
    Ok((LossBreakdown { ce, reg: reg_value, total }, grads))
}
