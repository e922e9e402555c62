//! Run configuration: a single JSON document that pins everything a
//! training or evaluation run depends on — model shape, method, optimizer
//! schedule, dataset, and evaluation queries.
//!
//! Unknown keys are rejected and schema errors carry the path of the
//! offending field, so a typo in a sweep script fails loudly instead of
//! silently training with a default.

use std::path::Path;

use mpdbm_core::model::{CenteringInit, InitConfig, ModelShape, VisibleOffsets};
use mpdbm_core::mp::{EarlyStopConfig, MpConfig, SgdConfig, SparsityConfig};
use mpdbm_core::pcd::{PcdConfig, StatsMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub shape: ShapeConfig,
    pub method: Method,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub init: InitSection,
    #[serde(default)]
    pub sgd: SgdSection,
    #[serde(default)]
    pub mp: MpSection,
    #[serde(default)]
    pub pcd: PcdSection,
    pub data: DataConfig,
    #[serde(default)]
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeConfig {
    pub d: usize,
    pub layers: Vec<usize>,
    pub k: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Multi-prediction training.
    Mp,
    /// Stochastic maximum likelihood with persistent chains on a centered
    /// model.
    PcdCentered,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSection {
    pub weight_scale: f64,
    pub bias_value: f64,
    /// Seed visible biases at the logit of the training-set pixel means.
    pub visible_bias_from_data: bool,
}

impl Default for InitSection {
    fn default() -> Self {
        InitSection {
            weight_scale: 0.05,
            bias_value: 0.0,
            visible_bias_from_data: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgdSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub max_col_norm: Option<f64>,
    pub shuffle: bool,
    /// Early stopping on validation classification error: stop after
    /// `patience` epochs without an improvement of at least `min_delta`.
    pub patience: Option<usize>,
    pub min_delta: f64,
}

impl Default for SgdSection {
    fn default() -> Self {
        SgdSection {
            epochs: 10,
            batch_size: 100,
            lr: 0.1,
            momentum: 0.5,
            max_col_norm: Some(4.0),
            shuffle: true,
            patience: None,
            min_delta: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpSection {
    /// Mean field sweeps unrolled during training.
    pub n_iters: usize,
    pub sparsity: Option<SparsitySection>,
}

impl Default for MpSection {
    fn default() -> Self {
        MpSection {
            n_iters: 10,
            sparsity: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparsitySection {
    pub target: f64,
    pub tolerance: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PcdSection {
    pub n_chains: usize,
    pub gibbs_steps: usize,
    pub mf_iters: usize,
    pub rao_blackwell: bool,
}

impl Default for PcdSection {
    fn default() -> Self {
        PcdSection {
            n_chains: 100,
            gibbs_steps: 5,
            mf_iters: 10,
            rao_blackwell: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "source", rename_all = "snake_case")]
pub enum DataConfig {
    /// Synthetic prototype-plus-noise patterns.
    Synth {
        classes: usize,
        d: usize,
        noise: f64,
        n_train: usize,
        n_val: usize,
        seed: u64,
    },
    /// IDX image/label pairs (the MNIST container format), binarized.
    Idx {
        images: String,
        labels: String,
        #[serde(default)]
        binarize: BinarizeSection,
        /// Examples carved off the end of the training set for validation.
        val_split: usize,
        /// Optional cap on training examples (after the split), for smoke
        /// runs.
        #[serde(default)]
        limit: Option<usize>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case", tag = "mode")]
pub enum BinarizeSection {
    Threshold { threshold: f64 },
    Stochastic { seed: u64 },
}

impl Default for BinarizeSection {
    fn default() -> Self {
        BinarizeSection::Threshold { threshold: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    pub mode: EvalMode,
    /// Missing-pixel fractions for `missing_inputs`.
    pub fractions: Vec<f64>,
    /// Prediction-target subset sizes for `general_query`.
    pub sizes: Vec<usize>,
    pub inference: InferenceSection,
    pub n_iters: usize,
    /// Seed for query-mask sampling.
    pub seed: u64,
    /// Queries sampled per example for `general_query`.
    pub queries_per_example: usize,
    /// Pixel fraction hidden by `inpaint`.
    pub inpaint_fraction: f64,
    /// Examples dumped by `inpaint`.
    pub inpaint_limit: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            mode: EvalMode::Classify,
            fractions: vec![0.0, 0.25, 0.5, 0.75],
            sizes: vec![1, 2, 4],
            inference: InferenceSection::MeanField,
            n_iters: 10,
            seed: 0,
            queries_per_example: 1,
            inpaint_fraction: 0.5,
            inpaint_limit: 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Classify,
    MissingInputs,
    GeneralQuery,
    Inpaint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InferenceSection {
    MeanField,
    MultiInference,
}

impl RunConfig {
    /// Parse and validate a config file. Schema violations report the JSON
    /// path of the offending key.
    pub fn load(path: &Path) -> Result<RunConfig, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            CliError::Usage(format!(
                "config schema error at `{}`: {}",
                e.path(),
                e.inner()
            ))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Usage(msg));
        if self.shape.d == 0 {
            return bad("shape.d must be >= 1".into());
        }
        if self.shape.layers.is_empty() || self.shape.layers.contains(&0) {
            return bad("shape.layers must be non-empty with positive sizes".into());
        }
        if self.sgd.batch_size == 0 {
            return bad("sgd.batch_size must be >= 1".into());
        }
        if !(self.sgd.lr.is_finite() && self.sgd.lr >= 0.0) {
            return bad(format!("sgd.lr must be finite and >= 0, got {}", self.sgd.lr));
        }
        if self.mp.n_iters == 0 {
            return bad("mp.n_iters must be >= 1".into());
        }
        if self.pcd.n_chains == 0 || self.pcd.gibbs_steps == 0 || self.pcd.mf_iters == 0 {
            return bad("pcd.n_chains, pcd.gibbs_steps, pcd.mf_iters must be >= 1".into());
        }
        if self.eval.n_iters == 0 {
            return bad("eval.n_iters must be >= 1".into());
        }
        for &f in &self.eval.fractions {
            if !(0.0..=1.0).contains(&f) {
                return bad(format!("eval.fractions entry {f} outside [0, 1]"));
            }
        }
        if !(0.0..=1.0).contains(&self.eval.inpaint_fraction) {
            return bad(format!(
                "eval.inpaint_fraction {} outside [0, 1]",
                self.eval.inpaint_fraction
            ));
        }
        match &self.data {
            DataConfig::Synth {
                classes,
                d,
                noise,
                n_train,
                ..
            } => {
                if *classes == 0 || *d == 0 || *n_train == 0 {
                    return bad("data: classes, d, n_train must be >= 1".into());
                }
                if !(0.0..=0.5).contains(noise) {
                    return bad(format!("data.noise {noise} outside [0, 0.5]"));
                }
                if *d != self.shape.d {
                    return bad(format!(
                        "data.d = {d} does not match shape.d = {}",
                        self.shape.d
                    ));
                }
            }
            DataConfig::Idx { val_split, .. } => {
                let _ = val_split;
            }
        }
        Ok(())
    }

    pub fn model_shape(&self) -> Result<ModelShape, CliError> {
        ModelShape::new(self.shape.d, self.shape.layers.clone(), self.shape.k)
            .map_err(|e| CliError::Usage(format!("invalid shape: {e}")))
    }

    /// Initialization recipe implied by the method: centered offsets for
    /// the centered baseline, plain for multi-prediction training.
    pub fn init_config(&self, train_pixel_means: &[f64]) -> InitConfig {
        let visible_bias_means = if self.init.visible_bias_from_data {
            Some(train_pixel_means.to_vec())
        } else {
            None
        };
        let centering = match self.method {
            Method::Mp => None,
            Method::PcdCentered => Some(CenteringInit {
                visible: VisibleOffsets::Means(train_pixel_means.to_vec()),
                hidden: 0.5,
                label: if self.shape.k > 0 {
                    1.0 / self.shape.k as f64
                } else {
                    0.5
                },
            }),
        };
        InitConfig {
            weight_scale: self.init.weight_scale,
            bias_value: self.init.bias_value,
            visible_bias_means,
            centering,
        }
    }

    pub fn sgd_config(&self) -> SgdConfig {
        SgdConfig {
            epochs: self.sgd.epochs,
            batch_size: self.sgd.batch_size,
            lr: self.sgd.lr,
            momentum: self.sgd.momentum,
            max_col_norm: self.sgd.max_col_norm,
            max_steps: None,
            shuffle: self.sgd.shuffle,
            early_stop: self.sgd.patience.map(|patience| EarlyStopConfig {
                patience,
                min_delta: self.sgd.min_delta,
            }),
        }
    }

    pub fn mp_config(&self) -> MpConfig {
        MpConfig {
            n_iters: self.mp.n_iters,
            sparsity: self.mp.sparsity.as_ref().map(|s| SparsityConfig {
                target: s.target,
                tolerance: s.tolerance,
                weight: s.weight,
            }),
        }
    }

    pub fn pcd_config(&self) -> PcdConfig {
        PcdConfig {
            n_chains: self.pcd.n_chains,
            gibbs_steps: self.pcd.gibbs_steps,
            mf_iters: self.pcd.mf_iters,
            stats: if self.pcd.rao_blackwell {
                StatsMode::RaoBlackwell
            } else {
                StatsMode::Plain
            },
        }
    }
}
