use serde::{Deserialize, Serialize};

use super::score::log_sum_exp;
use crate::numerics::{softmax_row, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RegVariant {
    /// Squared hinges pulling ID energy above `m_in` and outlier energy below `m_out`.
    Energy { m_in: f64, m_out: f64 },
    /// Cross-entropy of outlier predictions against the uniform distribution.
    Oe,
    /// Cross-entropy of outliers toward an extra (K+1)-th class.
    Kplus1,
}

/// Outlier regularizer and its weight in the total objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegLossSpec {
    pub variant: RegVariant,
    pub omega: f64,
}

impl RegLossSpec {
    pub fn energy(m_in: f64, m_out: f64, omega: f64) -> Self {
        Self { variant: RegVariant::Energy { m_in, m_out }, omega }
    }

    pub fn oe(omega: f64) -> Self {
        Self { variant: RegVariant::Oe, omega }
    }

    pub fn kplus1(omega: f64) -> Self {
        Self { variant: RegVariant::Kplus1, omega }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega >= 0.0) || !self.omega.is_finite() {
            return Err(Error::config(format!("omega must be >= 0, got {}", self.omega)));
        }
        if let RegVariant::Energy { m_in, m_out } = self.variant {
            if !(m_in > m_out) || !m_in.is_finite() || !m_out.is_finite() {
                return Err(Error::config(format!(
                    "energy margins need m_in > m_out, got m_in={m_in} m_out={m_out}"
                )));
            }
        }
        Ok(())
    }

    /// Output width the classifier needs for this regularizer.
    pub fn output_dim(&self, num_classes: usize) -> usize {
        match self.variant {
            RegVariant::Kplus1 => num_classes + 1,
            _ => num_classes,
        }
    }
}

/// What a regularizer consumes: energy works on scores, OE and K+1 on logits.
#[derive(Debug, Clone, Copy)]
pub enum RegInput<'a> {
    Scores { id: &'a [f64], ood: &'a [f64] },
    Logits { outliers: &'a Matrix, num_classes: usize },
}

fn mean_or_zero(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

fn energy_terms(id: &[f64], ood: &[f64], m_in: f64, m_out: f64) -> f64 {
    let id_term: f64 = id.iter().map(|s| (m_in - s).max(0.0).powi(2)).sum();
    let ood_term: f64 = ood.iter().map(|s| (s - m_out).max(0.0).powi(2)).sum();
    mean_or_zero(id_term, id.len()) + mean_or_zero(ood_term, ood.len())
}

/// Value of the (unweighted) regularizer.
pub fn reg_loss(input: RegInput<'_>, spec: &RegLossSpec) -> Result<f64> {
    spec.validate()?;
    match (spec.variant, input) {
        (RegVariant::Energy { m_in, m_out }, RegInput::Scores { id, ood }) => {
            Ok(energy_terms(id, ood, m_in, m_out))
        }
        (RegVariant::Oe, RegInput::Logits { outliers, num_classes }) => {
            check_width(outliers, num_classes)?;
            let sum: f64 = outliers
                .iter_rows()
                .map(|z| {
                    let z = &z[..num_classes];
                    log_sum_exp(z) - z.iter().sum::<f64>() / num_classes as f64
                })
                .sum();
            Ok(mean_or_zero(sum, outliers.rows()))
        }
        (RegVariant::Kplus1, RegInput::Logits { outliers, num_classes }) => {
            check_kplus1(outliers, num_classes)?;
            let sum: f64 = outliers.iter_rows().map(|z| log_sum_exp(z) - z[num_classes]).sum();
            Ok(mean_or_zero(sum, outliers.rows()))
        }
        (variant, _) => Err(Error::config(format!(
            "regularizer {variant:?} does not accept this input kind"
        ))),
    }
}

fn check_width(logits: &Matrix, num_classes: usize) -> Result<()> {
    if logits.rows() > 0 && logits.cols() < num_classes {
        return Err(Error::shape(format!(
            "{} logit columns for {num_classes} classes",
            logits.cols()
        )));
    }
    Ok(())
}

fn check_kplus1(logits: &Matrix, num_classes: usize) -> Result<()> {
    if logits.cols() != num_classes + 1 {
        return Err(Error::config(format!(
            "kplus1 regularizer needs {} outputs, model has {}",
            num_classes + 1,
            logits.cols()
        )));
    }
    Ok(())
}

/// Regularizer value with its gradient w.r.t. the ID and outlier logits.
#[derive(Debug, Clone)]
pub struct AuxLossGrad {
    pub loss: f64,
    pub d_id: Matrix,
    pub d_outliers: Matrix,
}

/// Regularizer value and exact logit gradients, before weighting by omega.
pub fn aux_loss_and_grad(
    id_logits: &Matrix,
    outlier_logits: &Matrix,
    spec: &RegLossSpec,
    num_classes: usize,
) -> Result<AuxLossGrad> {
    spec.validate()?;
    check_width(id_logits, num_classes)?;
    check_width(outlier_logits, num_classes)?;
    let mut d_id = Matrix::zeros(id_logits.rows(), id_logits.cols());
    let mut d_out = Matrix::zeros(outlier_logits.rows(), outlier_logits.cols());
    let n_id = id_logits.rows();
    let n_out = outlier_logits.rows();
    let mut loss = 0.0;

    match spec.variant {
        RegVariant::Energy { m_in, m_out } => {
            let mut id_sum = 0.0;
            for r in 0..n_id {
                let z = &id_logits.row(r)[..num_classes];
                let h = (m_in - log_sum_exp(z)).max(0.0);
                id_sum += h * h;
                if h > 0.0 {
                    let p = softmax_row(z);
                    let scale = -2.0 * h / n_id as f64;
                    for (d, p) in d_id.row_mut(r).iter_mut().zip(p) {
                        *d = scale * p;
                    }
                }
            }
            let mut out_sum = 0.0;
            for r in 0..n_out {
                let z = &outlier_logits.row(r)[..num_classes];
                let h = (log_sum_exp(z) - m_out).max(0.0);
                out_sum += h * h;
                if h > 0.0 {
                    let p = softmax_row(z);
                    let scale = 2.0 * h / n_out as f64;
                    for (d, p) in d_out.row_mut(r).iter_mut().zip(p) {
                        *d = scale * p;
                    }
                }
            }
            loss = mean_or_zero(id_sum, n_id) + mean_or_zero(out_sum, n_out);
        }
        RegVariant::Oe => {
            let k = num_classes as f64;
            let mut sum = 0.0;
            for r in 0..n_out {
                let z = &outlier_logits.row(r)[..num_classes];
                sum += log_sum_exp(z) - z.iter().sum::<f64>() / k;
                let p = softmax_row(z);
                for (d, p) in d_out.row_mut(r).iter_mut().zip(p) {
                    *d = (p - 1.0 / k) / n_out as f64;
                }
            }
            loss = mean_or_zero(sum, n_out);
        }
        RegVariant::Kplus1 => {
            check_kplus1(outlier_logits, num_classes)?;
            let mut sum = 0.0;
            for r in 0..n_out {
                let z = outlier_logits.row(r);
                sum += log_sum_exp(z) - z[num_classes];
                let p = softmax_row(z);
                let row = d_out.row_mut(r);
                for (d, p) in row.iter_mut().zip(p) {
                    *d = p / n_out as f64;
                }
                row[num_classes] -= 1.0 / n_out as f64;
            }
            if n_out > 0 {
                loss = sum / n_out as f64;
            }
        }
    }
    Ok(AuxLossGrad { loss, d_id, d_outliers: d_out })
}
