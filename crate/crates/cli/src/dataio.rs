//! Turns a config's `data` section into in-memory train/validation splits.

use mpdbm_core::data::{binarize, load_idx, synth_patterns, BinarizeMode, Dataset};

use crate::config::{BinarizeSection, DataConfig, RunConfig};
use crate::CliError;

/// Materialize the (train, validation) datasets a config describes.
pub fn build_datasets(cfg: &RunConfig) -> Result<(Dataset, Dataset), CliError> {
    match &cfg.data {
        DataConfig::Synth {
            classes,
            d,
            noise,
            n_train,
            n_val,
            seed,
        } => {
            let train = synth_patterns(*classes, *d, *noise, *n_train, *seed)?;
            let val = synth_patterns(*classes, *d, *noise, *n_val, seed.wrapping_add(1))?;
            Ok((train, val))
        }
        DataConfig::Idx {
            images,
            labels,
            binarize: bin,
            val_split,
            limit,
        } => {
            let raw = load_idx(images.as_ref(), labels.as_ref())?;
            let mode = match bin {
                BinarizeSection::Threshold { threshold } => BinarizeMode::Threshold(*threshold),
                BinarizeSection::Stochastic { seed } => BinarizeMode::Stochastic { seed: *seed },
            };
            let ds = binarize(&raw, mode);
            if ds.d != cfg.shape.d {
                return Err(CliError::Usage(format!(
                    "IDX images have {} pixels but shape.d = {}",
                    ds.d, cfg.shape.d
                )));
            }
            if *val_split >= ds.len() {
                return Err(CliError::Usage(format!(
                    "val_split {} leaves no training examples (dataset has {})",
                    val_split,
                    ds.len()
                )));
            }
            let cut = ds.len() - val_split;
            let mut train_examples = ds.examples;
            let val_examples = train_examples.split_off(cut);
            if let Some(cap) = limit {
                train_examples.truncate(*cap);
            }
            if train_examples.is_empty() {
                return Err(CliError::Usage("data.limit leaves no training examples".into()));
            }
            let train = Dataset {
                d: ds.d,
                num_classes: ds.num_classes,
                examples: train_examples,
            };
            let val = Dataset {
                d: ds.d,
                num_classes: ds.num_classes,
                examples: val_examples,
            };
            Ok((train, val))
        }
    }
}

/// Per-pixel mean of the training images; feeds visible offsets and the
/// data-driven visible bias initialization.
pub fn pixel_means(ds: &Dataset) -> Vec<f64> {
    let mut means = vec![0.0; ds.d];
    if ds.is_empty() {
        return means;
    }
    for ex in &ds.examples {
        for (m, &x) in means.iter_mut().zip(&ex.v) {
            *m += x;
        }
    }
    let n = ds.len() as f64;
    for m in &mut means {
        *m /= n;
    }
    means
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn synth_config() -> RunConfig {
        let text = r#"{
            "shape": {"d": 8, "layers": [4], "k": 2},
            "method": "mp",
            "data": {"source": "synth", "classes": 2, "d": 8,
                     "noise": 0.1, "n_train": 50, "n_val": 20, "seed": 3}
        }"#;
        serde_json::from_str(text).unwrap()
    }

    #[test]
    fn synth_splits_have_requested_sizes() {
        let (train, val) = build_datasets(&synth_config()).unwrap();
        assert_eq!(train.len(), 50);
        assert_eq!(val.len(), 20);
        assert_eq!(train.d, 8);
        assert!(train.examples.iter().all(|e| e.label.is_some()));
        // Different seeds: the splits should not be copies of each other.
        assert_ne!(train.examples[..20], val.examples[..]);
    }

    #[test]
    fn pixel_means_are_column_averages() {
        let (train, _) = build_datasets(&synth_config()).unwrap();
        let means = pixel_means(&train);
        assert_eq!(means.len(), 8);
        let by_hand: f64 =
            train.examples.iter().map(|e| e.v[3]).sum::<f64>() / train.len() as f64;
        assert!((means[3] - by_hand).abs() < 1e-15);
        assert!(means.iter().all(|&m| (0.0..=1.0).contains(&m)));
    }
}
