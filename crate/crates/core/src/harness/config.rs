use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mixing::{MixKind, MixStrategy};
use crate::nn::StepDecay;
use crate::oodcore::{RegLossSpec, RegVariant, ScoreKind};
use crate::synthdata::Geometry;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxParams {
    /// Mixture components on the outlier ring (the diversity level).
    pub k: usize,
    /// Auxiliary outlier pool size.
    pub m: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestOodKind {
    /// Held-out ring components interleaved with the auxiliary ring.
    Ring,
    /// Uniform far-field annulus.
    Far,
    /// Per-point mixture of the two.
    Mixed,
}

impl fmt::Display for TestOodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestOodKind::Ring => "ring",
            TestOodKind::Far => "far",
            TestOodKind::Mixed => "mixed",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestOodParams {
    /// Points per test set.
    pub m: usize,
    pub sets: Vec<TestOodKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerParams {
    pub lr: f64,
    pub momentum: f64,
    #[serde(default)]
    pub nesterov: bool,
    #[serde(default)]
    pub schedule: Option<StepDecay>,
}

/// One training + evaluation run. Loaded from JSON; unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub geometry: Geometry,
    pub id_train_per_class: usize,
    pub id_test_per_class: usize,
    /// `null` trains on ID data only.
    pub aux: Option<AuxParams>,
    pub test_ood: TestOodParams,
    pub hidden: Vec<usize>,
    pub optimizer: OptimizerParams,
    pub iterations: usize,
    /// ID rows per step (N).
    pub batch_size: usize,
    /// Outlier rows per step as a multiple of `batch_size`.
    pub outlier_ratio: f64,
    pub mix: MixStrategy,
    pub reg: RegLossSpec,
    pub score: ScoreKind,
    /// History is logged every `log_every` iterations and at the last one.
    pub log_every: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            geometry: Geometry::default(),
            id_train_per_class: 1000,
            id_test_per_class: 1000,
            aux: Some(AuxParams { k: 10, m: 10_000 }),
            test_ood: TestOodParams { m: 3000, sets: vec![TestOodKind::Ring, TestOodKind::Far] },
            hidden: vec![64, 64],
            optimizer: OptimizerParams { lr: 0.05, momentum: 0.9, nesterov: false, schedule: None },
            iterations: 2000,
            batch_size: 128,
            outlier_ratio: 1.0,
            mix: MixStrategy::none(),
            reg: RegLossSpec::energy(1.0, 0.0, 0.01),
            score: ScoreKind::Energy,
            log_every: 100,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self =
            serde_json::from_str(text).map_err(|e| Error::config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn num_classes(&self) -> usize {
        self.geometry.num_classes
    }

    /// Layer widths from input to output.
    pub fn layer_dims(&self) -> Vec<usize> {
        let mut dims = vec![2];
        dims.extend(&self.hidden);
        dims.push(self.reg.output_dim(self.num_classes()));
        dims
    }

    /// Outlier rows per training step.
    pub fn outlier_batch(&self) -> usize {
        (self.outlier_ratio * self.batch_size as f64).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.mix.validate()?;
        self.reg.validate()?;
        if self.iterations == 0 {
            return Err(Error::config("iterations must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be >= 1"));
        }
        if self.id_train_per_class == 0 || self.id_test_per_class == 0 {
            return Err(Error::config("ID set sizes must be >= 1"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        if self.log_every == 0 {
            return Err(Error::config("log_every must be >= 1"));
        }
        if self.test_ood.m == 0 || self.test_ood.sets.is_empty() {
            return Err(Error::config("need at least one non-empty test OOD set"));
        }
        if !(self.optimizer.lr >= 0.0) || !(0.0..1.0).contains(&self.optimizer.momentum) {
            return Err(Error::config("optimizer needs lr >= 0 and momentum in [0, 1)"));
        }
        if let Some(aux) = &self.aux {
            if aux.k == 0 || aux.m < aux.k {
                return Err(Error::config(format!(
                    "aux needs k >= 1 and m >= k, got k={} m={}",
                    aux.k, aux.m
                )));
            }
            if !(self.outlier_ratio > 0.0) || self.outlier_batch() == 0 {
                return Err(Error::config("outlier_ratio must give at least one outlier per step"));
            }
        } else if self.mix.kind != MixKind::None {
            return Err(Error::config("mixing requires auxiliary outliers"));
        }
        let kplus1_reg = matches!(self.reg.variant, RegVariant::Kplus1);
        if self.score == ScoreKind::Kplus1 && !kplus1_reg {
            return Err(Error::config("kplus1 score requires the kplus1 regularizer's extra head"));
        }
        Ok(())
    }
}

/// A named training recipe applied on top of a base config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Cross-entropy only, no outliers.
    NoAux,
    /// Raw auxiliary outliers.
    Aux,
    /// Outliers mixed with `lambda ~ Beta(alpha, alpha)`.
    Mixup,
    /// Outliers mixed with score-adaptive Beta weights.
    DiverseMix,
    /// Coordinate-mask mixing.
    Cutmask,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::NoAux => "no-aux",
            Method::Aux => "aux",
            Method::Mixup => "mixup",
            Method::DiverseMix => "diversemix",
            Method::Cutmask => "cutmask",
        }
    }

    /// The method a config describes.
    pub fn infer(cfg: &ExperimentConfig) -> Method {
        match (&cfg.aux, cfg.mix.kind) {
            (None, _) => Method::NoAux,
            (Some(_), MixKind::None) => Method::Aux,
            (Some(_), MixKind::Vanilla) => Method::Mixup,
            (Some(_), MixKind::DiverseMix) => Method::DiverseMix,
            (Some(_), MixKind::Cutmask) => Method::Cutmask,
        }
    }

    pub fn uses_aux(self) -> bool {
        self != Method::NoAux
    }

    /// Base config with this method's outlier usage and mixing applied.
    pub fn apply(self, base: &ExperimentConfig, k: usize) -> ExperimentConfig {
        let mut cfg = base.clone();
        let (alpha, temperature) = (base.mix.alpha, base.mix.temperature);
        let m = base.aux.as_ref().map_or(10_000, |a| a.m).max(k);
        cfg.mix = match self {
            Method::NoAux | Method::Aux => MixStrategy { kind: MixKind::None, alpha, temperature },
            Method::Mixup => MixStrategy { kind: MixKind::Vanilla, alpha, temperature },
            Method::DiverseMix => MixStrategy { kind: MixKind::DiverseMix, alpha, temperature },
            Method::Cutmask => MixStrategy { kind: MixKind::Cutmask, alpha, temperature },
        };
        if self == Method::NoAux {
            cfg.aux = None;
            cfg.reg.omega = 0.0;
        } else {
            cfg.aux = Some(AuxParams { k, m });
        }
        cfg
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no-aux" => Ok(Method::NoAux),
            "aux" => Ok(Method::Aux),
            "mixup" | "vanilla" => Ok(Method::Mixup),
            "diversemix" => Ok(Method::DiverseMix),
            "cutmask" => Ok(Method::Cutmask),
            other => Err(Error::config(format!("unknown method `{other}`"))),
        }
    }
}

pub(crate) fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    Ok(dir.to_path_buf())
}
