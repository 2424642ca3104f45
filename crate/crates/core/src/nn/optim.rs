use serde::{Deserialize, Serialize};

use super::model::{Gradients, MlpModel};
use crate::{Error, Result};

/// Multiply the learning rate by `factor` once each milestone step is reached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepDecay {
    pub milestones: Vec<usize>,
    pub factor: f64,
}

/// SGD with heavy-ball momentum (`v <- mu v + g; theta <- theta - lr v`),
/// or the Nesterov look-ahead form when `nesterov` is set.
#[derive(Debug, Clone)]
pub struct OptimState {
    learning_rate: f64,
    momentum: f64,
    nesterov: bool,
    schedule: Option<StepDecay>,
    velocity: Gradients,
    steps: usize,
}

impl OptimState {
    pub fn new(model: &MlpModel, learning_rate: f64, momentum: f64) -> Result<Self> {
        if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
            return Err(Error::param(format!("learning rate must be >= 0, got {learning_rate}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::param(format!("momentum must be in [0, 1), got {momentum}")));
        }
        Ok(Self {
            learning_rate,
            momentum,
            nesterov: false,
            schedule: None,
            velocity: Gradients::zeros_like(model),
            steps: 0,
        })
    }

    pub fn with_nesterov(mut self, nesterov: bool) -> Self {
        self.nesterov = nesterov;
        self
    }

    pub fn with_schedule(mut self, schedule: Option<StepDecay>) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn velocity(&self) -> &Gradients {
        &self.velocity
    }

    /// Learning rate in effect for the next step.
    pub fn current_lr(&self) -> f64 {
        match &self.schedule {
            Some(s) => {
                let passed = s.milestones.iter().filter(|&&m| self.steps >= m).count();
                self.learning_rate * s.factor.powi(passed as i32)
            }
            None => self.learning_rate,
        }
    }
}

/// Applies one momentum step in place.
///
/// Rejects non-finite gradients before touching any state, and reports a
/// divergence if the update itself produced non-finite parameters.
pub fn sgd_step(model: &mut MlpModel, grads: &Gradients, opt: &mut OptimState) -> Result<()> {
    let shapes_match = grads.layers.len() == model.layers().len()
        && grads.layers.iter().zip(model.layers()).all(|(g, l)| {
            g.weights.rows() == l.weights.rows()
                && g.weights.cols() == l.weights.cols()
                && g.biases.len() == l.biases.len()
        });
    if !shapes_match {
        return Err(Error::shape("gradients do not match model layers"));
    }
    if !grads.is_finite() {
        let bad = grads.flatten().iter().filter(|v| !v.is_finite()).count();
        return Err(Error::Divergence {
            iteration: opt.steps,
            detail: format!("{bad} non-finite gradient components"),
        });
    }
    let lr = opt.current_lr();
    let mu = opt.momentum;
    let nesterov = opt.nesterov;
    for ((layer, g), v) in model.layers_mut().iter_mut().zip(&grads.layers).zip(&mut opt.velocity.layers) {
        update(layer.weights.values_mut(), g.weights.values(), v.weights.values_mut(), lr, mu, nesterov);
        update(&mut layer.biases, &g.biases, &mut v.biases, lr, mu, nesterov);
    }
    opt.steps += 1;
    if !model.is_finite() {
        return Err(Error::Divergence {
            iteration: opt.steps - 1,
            detail: "non-finite parameters after update".into(),
        });
    }
    Ok(())
}

fn update(theta: &mut [f64], g: &[f64], v: &mut [f64], lr: f64, mu: f64, nesterov: bool) {
    for ((t, &g), v) in theta.iter_mut().zip(g).zip(v) {
        *v = mu * *v + g;
        let step = if nesterov { g + mu * *v } else { *v };
        *t -= lr * step;
    }
}
