//! Outlier interpolation: vanilla mixup, score-adaptive mixup, a
//! coordinate-mask variant, and the shuffle-and-pair batch step.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::numerics::{beta_sample, Matrix, RngState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MixKind {
    /// Outliers pass through unchanged.
    None,
    /// `lambda ~ Beta(alpha, alpha)`.
    Vanilla,
    /// `lambda ~ Beta(s_i alpha, s_j alpha)` with score-adaptive weights.
    DiverseMix,
    /// Coordinate mask covering a `lambda` share of the input.
    Cutmask,
}

impl fmt::Display for MixKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MixKind::None => "none",
            MixKind::Vanilla => "vanilla",
            MixKind::DiverseMix => "diversemix",
            MixKind::Cutmask => "cutmask",
        })
    }
}

impl FromStr for MixKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(MixKind::None),
            "vanilla" => Ok(MixKind::Vanilla),
            "diversemix" => Ok(MixKind::DiverseMix),
            "cutmask" => Ok(MixKind::Cutmask),
            other => Err(Error::config(format!("unknown mix kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixStrategy {
    pub kind: MixKind,
    pub alpha: f64,
    pub temperature: f64,
}

impl MixStrategy {
    pub fn none() -> Self {
        Self { kind: MixKind::None, alpha: 4.0, temperature: 10.0 }
    }

    pub fn vanilla(alpha: f64) -> Self {
        Self { kind: MixKind::Vanilla, alpha, temperature: 10.0 }
    }

    pub fn diverse_mix(alpha: f64, temperature: f64) -> Self {
        Self { kind: MixKind::DiverseMix, alpha, temperature }
    }

    pub fn cutmask(alpha: f64) -> Self {
        Self { kind: MixKind::Cutmask, alpha, temperature: 10.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(Error::config(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if self.kind == MixKind::DiverseMix
            && (!(self.temperature > 0.0) || !self.temperature.is_finite())
        {
            return Err(Error::config(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        Ok(())
    }
}

/// Two-way temperature softmax of a score pair, stabilized by the max.
pub fn adaptive_weights(s_i: f64, s_j: f64, temperature: f64) -> (f64, f64) {
    let (a, b) = (s_i / temperature, s_j / temperature);
    let m = a.max(b);
    let (ea, eb) = ((a - m).exp(), (b - m).exp());
    let w_i = ea / (ea + eb);
    (w_i, 1.0 - w_i)
}

/// `lambda x_i + (1 - lambda) x_j`, exact at both endpoints.
pub fn interpolate(x_i: &[f64], x_j: &[f64], lambda: f64) -> Vec<f64> {
    if lambda == 1.0 {
        return x_i.to_vec();
    }
    if lambda == 0.0 {
        return x_j.to_vec();
    }
    // written from x_j so that x_i == x_j reproduces the point bit-exactly
    x_i.iter().zip(x_j).map(|(a, b)| b + lambda * (a - b)).collect()
}

fn same_dim(x_i: &[f64], x_j: &[f64]) -> Result<()> {
    if x_i.len() != x_j.len() {
        return Err(Error::shape(format!("mixing {}-d with {}-d point", x_i.len(), x_j.len())));
    }
    Ok(())
}

fn positive_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("alpha must be > 0, got {alpha}")))
    }
}

/// Draws the interpolation weight for a pair under `strategy`.
pub fn sample_lambda(s_i: f64, s_j: f64, strategy: &MixStrategy, rng: &mut RngState) -> Result<f64> {
    match strategy.kind {
        MixKind::None => Ok(1.0),
        MixKind::Vanilla | MixKind::Cutmask => {
            positive_alpha(strategy.alpha)?;
            beta_sample(strategy.alpha, strategy.alpha, rng)
        }
        MixKind::DiverseMix => {
            strategy.validate()?;
            let (w_i, w_j) = adaptive_weights(s_i, s_j, strategy.temperature);
            // a weight can underflow to 0 for extreme score gaps; Beta needs > 0
            let a = (w_i * strategy.alpha).max(f64::MIN_POSITIVE);
            let b = (w_j * strategy.alpha).max(f64::MIN_POSITIVE);
            beta_sample(a, b, rng)
        }
    }
}

/// Score-adaptive pair mix. Returns the mixed point and its weight.
pub fn diversemix_pair(
    x_i: &[f64],
    x_j: &[f64],
    s_i: f64,
    s_j: f64,
    strategy: &MixStrategy,
    rng: &mut RngState,
) -> Result<(Vec<f64>, f64)> {
    if strategy.kind != MixKind::DiverseMix {
        return Err(Error::config(format!("diversemix_pair called with {} strategy", strategy.kind)));
    }
    same_dim(x_i, x_j)?;
    let lambda = sample_lambda(s_i, s_j, strategy, rng)?;
    Ok((interpolate(x_i, x_j, lambda), lambda))
}

pub fn vanilla_mixup_pair(x_i: &[f64], x_j: &[f64], alpha: f64, rng: &mut RngState) -> Result<(Vec<f64>, f64)> {
    positive_alpha(alpha)?;
    same_dim(x_i, x_j)?;
    let lambda = beta_sample(alpha, alpha, rng)?;
    Ok((interpolate(x_i, x_j, lambda), lambda))
}

/// Takes `round(lambda d)` coordinates, chosen uniformly, from `x_i` and the rest from `x_j`.
pub fn cutmask_with_lambda(x_i: &[f64], x_j: &[f64], lambda: f64, rng: &mut RngState) -> Result<Vec<f64>> {
    same_dim(x_i, x_j)?;
    if x_i.is_empty() {
        return Err(Error::param("cutmask needs dimension >= 1"));
    }
    let d = x_i.len();
    let take = ((lambda * d as f64).round() as usize).min(d);
    let order = rng.permutation(d);
    let mut out = x_j.to_vec();
    for &c in &order[..take] {
        out[c] = x_i[c];
    }
    Ok(out)
}

pub fn cutmask_pair(x_i: &[f64], x_j: &[f64], alpha: f64, rng: &mut RngState) -> Result<(Vec<f64>, f64)> {
    positive_alpha(alpha)?;
    same_dim(x_i, x_j)?;
    let lambda = beta_sample(alpha, alpha, rng)?;
    Ok((cutmask_with_lambda(x_i, x_j, lambda, rng)?, lambda))
}

/// One mixed row: source row `i`, its shuffled partner `j`, and the weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixProvenance {
    pub i: usize,
    pub j: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixedBatch {
    pub points: Matrix,
    pub provenance: Vec<MixProvenance>,
}

impl MixedBatch {
    /// Debug dump as `i,j,lambda,x,y` (first two coordinates).
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(["i", "j", "lambda", "x", "y"])?;
        for (p, row) in self.provenance.iter().zip(self.points.iter_rows()) {
            let x = row.first().copied().unwrap_or(f64::NAN);
            let y = row.get(1).copied().unwrap_or(f64::NAN);
            wtr.serialize((p.i, p.j, p.lambda, x, y))?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Shuffles the batch (and its scores, with the same permutation) and mixes
/// row `t` with shuffled row `t`. Self-pairs are allowed.
pub fn mix_batch(batch: &Matrix, scores: &[f64], strategy: &MixStrategy, rng: &mut RngState) -> Result<MixedBatch> {
    if scores.len() != batch.rows() {
        return Err(Error::input(format!(
            "{} scores for a batch of {}",
            scores.len(),
            batch.rows()
        )));
    }
    strategy.validate()?;
    let n = batch.rows();
    if strategy.kind == MixKind::None {
        return Ok(MixedBatch {
            points: batch.clone(),
            provenance: (0..n).map(|t| MixProvenance { i: t, j: t, lambda: 1.0 }).collect(),
        });
    }
    let perm = rng.permutation(n);
    let shuffled_scores: Vec<f64> = perm.iter().map(|&p| scores[p]).collect();
    let mut values = Vec::with_capacity(n * batch.cols());
    let mut provenance = Vec::with_capacity(n);
    for t in 0..n {
        let j = perm[t];
        let (x_i, x_j) = (batch.row(t), batch.row(j));
        let lambda = sample_lambda(scores[t], shuffled_scores[t], strategy, rng)?;
        let mixed = match strategy.kind {
            MixKind::Cutmask => cutmask_with_lambda(x_i, x_j, lambda, rng)?,
            _ => interpolate(x_i, x_j, lambda),
        };
        values.extend(mixed);
        provenance.push(MixProvenance { i: t, j, lambda });
    }
    Ok(MixedBatch { points: Matrix::from_vec(n, batch.cols(), values)?, provenance })
}
