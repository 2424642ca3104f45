//! Scoring functions, outlier regularizers, the threshold detector and
//! ranking metrics.

mod metrics;
mod regloss;
mod score;

pub use metrics::{
    aupr, auroc, auroc_trapezoid, calibrate_gamma, detect, fpr_at_tpr, id_accuracy, Decision,
    DetectionReport,
};
pub use regloss::{aux_loss_and_grad, reg_loss, AuxLossGrad, RegInput, RegLossSpec, RegVariant};
pub use score::{log_sum_exp, score, score_rows, ScoreKind};
