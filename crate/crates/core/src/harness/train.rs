use std::io::Write;

use serde::Serialize;

use super::config::{ExperimentConfig, TestOodKind};
use crate::mixing::{mix_batch, MixKind, MixedBatch};
use crate::nn::{loss_and_grad, sgd_step, MlpModel, OptimState};
use crate::numerics::{Matrix, RngState};
use crate::oodcore::score_rows;
use crate::synthdata::{
    make_aux_outliers, make_id_dataset, make_test_far, make_test_ood, make_test_ring, LabeledSet,
    OutlierSet,
};
use crate::{Error, Result};

/// Everything one run trains and evaluates on.
#[derive(Debug, Clone)]
pub struct Datasets {
    pub id_train: LabeledSet,
    pub aux: Option<OutlierSet>,
    pub id_test: LabeledSet,
    pub ood_tests: Vec<(String, OutlierSet)>,
}

/// Generates the datasets for `cfg`. Each set has its own labeled substream,
/// so ID data and test sets are shared by every method run with the same seed.
pub fn build_data(cfg: &ExperimentConfig) -> Result<Datasets> {
    let root = RngState::new(cfg.seed, "data");
    let g = &cfg.geometry;
    let id_train = make_id_dataset(cfg.id_train_per_class, g, &mut root.substream("id-train"))?;
    let aux = match &cfg.aux {
        Some(a) => Some(make_aux_outliers(a.k, a.m, g, &mut root.substream(&format!("aux-k{}", a.k)))?),
        None => None,
    };
    let id_test = make_id_dataset(cfg.id_test_per_class, g, &mut root.substream("id-test"))?;
    let mut ood_tests = Vec::new();
    for kind in &cfg.test_ood.sets {
        let mut rng = root.substream(&format!("ood-{kind}"));
        let set = match kind {
            TestOodKind::Ring => make_test_ring(cfg.test_ood.m, g, &mut rng)?,
            TestOodKind::Far => make_test_far(cfg.test_ood.m, g, &mut rng)?,
            TestOodKind::Mixed => make_test_ood(cfg.test_ood.m, g, &mut rng)?,
        };
        ood_tests.push((kind.to_string(), set));
    }
    Ok(Datasets { id_train, aux, id_test, ood_tests })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HistoryRow {
    pub iteration: usize,
    pub ce_loss: f64,
    pub reg_loss: f64,
    pub total_loss: f64,
}

/// Hooks into the training loop, for instrumentation and tests.
pub trait TrainObserver {
    /// Called after outliers are scored and before the update of `iteration`.
    /// `scores` is present when the mixing strategy consumes scores.
    fn before_step(
        &mut self,
        _iteration: usize,
        _model: &MlpModel,
        _outliers: &Matrix,
        _scores: Option<&[f64]>,
    ) {
    }

    /// The mixed outlier batch that enters the loss of `iteration`.
    fn on_mix(&mut self, _iteration: usize, _batch: &MixedBatch) {}

    fn after_step(&mut self, _iteration: usize, _model: &MlpModel) {}
}

pub struct NoopObserver;

impl TrainObserver for NoopObserver {}

pub fn train(cfg: &ExperimentConfig, data: &Datasets) -> Result<(MlpModel, Vec<HistoryRow>)> {
    train_with_observer(cfg, data, &mut NoopObserver)
}

/// Outlier-regularized training. Per iteration: sample N ID rows and the
/// outlier batch, score the outliers with the current model, mix them, then
/// take one SGD step on `CE + omega * L_aux`.
pub fn train_with_observer(
    cfg: &ExperimentConfig,
    data: &Datasets,
    observer: &mut dyn TrainObserver,
) -> Result<(MlpModel, Vec<HistoryRow>)> {
    cfg.validate()?;
    let k = cfg.num_classes();
    let root = RngState::new(cfg.seed, "train");
    let mut model = MlpModel::new(&cfg.layer_dims(), &mut root.substream("init"))?;
    let mut opt = OptimState::new(&model, cfg.optimizer.lr, cfg.optimizer.momentum)?
        .with_nesterov(cfg.optimizer.nesterov)
        .with_schedule(cfg.optimizer.schedule.clone());
    // Separate streams: ID batches are identical whether or not outliers are used.
    let mut id_rng = root.substream("id-batch");
    let mut out_rng = root.substream("outlier-batch");
    let mut mix_rng = root.substream("mix");

    let aux = match (&cfg.aux, &data.aux) {
        (Some(_), Some(set)) => Some(set),
        (None, _) => None,
        (Some(_), None) => return Err(Error::config("config asks for outliers but none were generated")),
    };
    if data.id_train.is_empty() {
        return Err(Error::input("empty ID training set"));
    }
    let n_out = cfg.outlier_batch();
    let mut history = Vec::new();

    for it in 0..cfg.iterations {
        let idx: Vec<usize> = (0..cfg.batch_size).map(|_| id_rng.index(data.id_train.len())).collect();
        let id_batch = data.id_train.select(&idx);

        let outliers = match aux {
            Some(set) => {
                let oidx: Vec<usize> = (0..n_out).map(|_| out_rng.index(set.len())).collect();
                let raw = set.points.select_rows(&oidx);
                let scores = if cfg.mix.kind == MixKind::DiverseMix {
                    Some(score_rows(&model.forward(&raw)?, cfg.score, k)?)
                } else {
                    None
                };
                observer.before_step(it, &model, &raw, scores.as_deref());
                let fallback;
                let s = match &scores {
                    Some(s) => s.as_slice(),
                    None => {
                        fallback = vec![0.0; raw.rows()];
                        &fallback
                    }
                };
                let mixed = mix_batch(&raw, s, &cfg.mix, &mut mix_rng)?;
                observer.on_mix(it, &mixed);
                mixed.points
            }
            None => {
                let empty = Matrix::zeros(0, 2);
                observer.before_step(it, &model, &empty, None);
                empty
            }
        };

        let (loss, grads) = loss_and_grad(&model, &id_batch, &outliers, &cfg.reg, cfg.score, k)?;
        if !loss.total.is_finite() {
            return Err(Error::Divergence {
                iteration: it,
                detail: format!("loss is {} (ce={}, reg={})", loss.total, loss.ce, loss.reg),
            });
        }
        if it % cfg.log_every == 0 || it + 1 == cfg.iterations {
            history.push(HistoryRow {
                iteration: it,
                ce_loss: loss.ce,
                reg_loss: loss.reg,
                total_loss: loss.total,
            });
        }
        sgd_step(&mut model, &grads, &mut opt).map_err(|e| match e {
            Error::Divergence { detail, .. } => Error::Divergence { iteration: it, detail },
            other => other,
        })?;
        observer.after_step(it, &model);
    }
    Ok((model, history))
}

pub fn write_history_csv<W: Write>(rows: &[HistoryRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for r in rows {
        wtr.serialize(r)?;
    }
    if rows.is_empty() {
        wtr.write_record(["iteration", "ce_loss", "reg_loss", "total_loss"])?;
    }
    wtr.flush()?;
    Ok(())
}
