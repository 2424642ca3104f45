//! Multilayer perceptron with ReLU hidden layers, hand-written backprop and
//! SGD with momentum.

mod checkpoint;
mod loss;
mod model;
mod optim;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use loss::{cross_entropy, loss_and_grad, LossBreakdown};
pub use model::{Gradients, Layer, MlpModel};
pub use optim::{sgd_step, OptimState, StepDecay};
