//! Datasets: IDX loading, binarization, and synthetic pattern generation.
//!
//! The model consumes binary visible vectors with optional class labels.
//! [`load_idx`] reads the classic big-endian IDX image/label pair (plain or
//! gzip-compressed) into `[0, 1]`-scaled reals; [`binarize`] converts those
//! to hard bits. [`synth_patterns`] builds a small structured corpus —
//! noisy copies of well-separated class prototypes — that a model can
//! demonstrably learn in seconds, which is what most end-to-end tests and
//! the acceptance checks run on.

use std::io::Read;
use std::path::Path;

use crate::inference::Mask;
use crate::numerics::Rng;
use crate::{Error, Result};

/// One training or evaluation case: a visible vector (binary after
/// [`binarize`]) and an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub v: Vec<f64>,
    pub label: Option<usize>,
}

/// A collection of like-shaped examples.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    /// Visible dimensionality shared by every example.
    pub d: usize,
    /// Number of label classes; 0 means unlabeled data.
    pub num_classes: usize,
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// How [`binarize`] turns `[0, 1]` intensities into bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BinarizeMode {
    /// `1` where the value exceeds the threshold.
    Threshold(f64),
    /// Each value becomes an independent Bernoulli draw with that success
    /// probability, using the given seed.
    Stochastic { seed: u64 },
}

/// Convert intensities to hard `{0, 1}` bits; labels pass through.
pub fn binarize(dataset: &Dataset, mode: BinarizeMode) -> Dataset {
    let mut rng = match mode {
        BinarizeMode::Stochastic { seed } => Some(Rng::new(seed)),
        BinarizeMode::Threshold(_) => None,
    };
    let examples = dataset
        .examples
        .iter()
        .map(|ex| Example {
            v: ex.v
                .iter()
                .map(|&x| match mode {
                    BinarizeMode::Threshold(t) => {
                        if x > t {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    BinarizeMode::Stochastic { .. } => {
                        if rng.as_mut().unwrap().flip(x.clamp(0.0, 1.0)) {
                            1.0
                        } else {
                            0.0
                        }
                    }
                })
                .collect(),
            label: ex.label,
        })
        .collect();
    Dataset {
        d: dataset.d,
        num_classes: dataset.num_classes,
        examples,
    }
}

const IDX_IMAGE_MAGIC: u32 = 0x0000_0803;
const IDX_LABEL_MAGIC: u32 = 0x0000_0801;

fn read_file_maybe_gzip(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        flate2::read::GzDecoder::new(&raw[..])
            .read_to_end(&mut out)
            .map_err(|e| Error::Data(format!("{}: gzip decode failed: {e}", path.display())))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    let end = at + 4;
    if bytes.len() < end {
        return Err(Error::Data(format!("truncated file: missing {what}")));
    }
    Ok(u32::from_be_bytes(bytes[at..end].try_into().unwrap()))
}

/// Load an IDX image/label file pair (the MNIST container format),
/// transparently decompressing gzip. Pixels are scaled to `[0, 1]`;
/// binarize before training. `num_classes` is `max label + 1`.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Dataset> {
    let img = read_file_maybe_gzip(images_path)?;
    let lab = read_file_maybe_gzip(labels_path)?;

    let magic = be_u32(&img, 0, "image magic")?;
    if magic != IDX_IMAGE_MAGIC {
        return Err(Error::Data(format!(
            "bad magic in {}: expected 0x{IDX_IMAGE_MAGIC:08x}, got 0x{magic:08x}",
            images_path.display()
        )));
    }
    let n = be_u32(&img, 4, "image count")? as usize;
    let rows = be_u32(&img, 8, "row count")? as usize;
    let cols = be_u32(&img, 12, "column count")? as usize;
    let d = rows * cols;
    let need = 16 + n * d;
    if img.len() < need {
        return Err(Error::Data(format!(
            "truncated file {}: need {need} bytes, have {}",
            images_path.display(),
            img.len()
        )));
    }

    let magic = be_u32(&lab, 0, "label magic")?;
    if magic != IDX_LABEL_MAGIC {
        return Err(Error::Data(format!(
            "bad magic in {}: expected 0x{IDX_LABEL_MAGIC:08x}, got 0x{magic:08x}",
            labels_path.display()
        )));
    }
    let n_lab = be_u32(&lab, 4, "label count")? as usize;
    if n_lab != n {
        return Err(Error::Data(format!(
            "count mismatch: {n} images but {n_lab} labels"
        )));
    }
    if lab.len() < 8 + n {
        return Err(Error::Data(format!(
            "truncated file {}: need {} bytes, have {}",
            labels_path.display(),
            8 + n,
            lab.len()
        )));
    }

    let mut examples = Vec::with_capacity(n);
    let mut max_label = 0u8;
    for i in 0..n {
        let px = &img[16 + i * d..16 + (i + 1) * d];
        let label = lab[8 + i];
        max_label = max_label.max(label);
        examples.push(Example {
            v: px.iter().map(|&b| b as f64 / 255.0).collect(),
            label: Some(label as usize),
        });
    }
    Ok(Dataset {
        d,
        num_classes: if n == 0 { 0 } else { max_label as usize + 1 },
        examples,
    })
}

/// Class prototypes used by [`synth_patterns`]: prototype `c` sets the
/// contiguous bit block `[c*d/n, (c+1)*d/n)`, so distinct prototypes are
/// disjoint and easy to tell apart even under noise.
pub fn pattern_prototypes(n_classes: usize, d: usize) -> Vec<Vec<f64>> {
    (0..n_classes)
        .map(|c| {
            let start = c * d / n_classes;
            let end = (c + 1) * d / n_classes;
            (0..d)
                .map(|j| if (start..end).contains(&j) { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Synthetic labeled corpus: balanced noisy copies of the block
/// prototypes. Each bit of a prototype flips independently with
/// probability `noise_rate`. Deterministic in `seed`.
pub fn synth_patterns(
    n_classes: usize,
    d: usize,
    noise_rate: f64,
    n_examples: usize,
    seed: u64,
) -> Result<Dataset> {
    if n_classes == 0 || d == 0 {
        return Err(Error::InvalidConfig(
            "synth_patterns needs n_classes >= 1 and d >= 1".into(),
        ));
    }
    if n_classes > d {
        return Err(Error::InvalidConfig(format!(
            "synth_patterns: {n_classes} classes do not fit {d} bits"
        )));
    }
    if !(0.0..=0.5).contains(&noise_rate) {
        return Err(Error::InvalidConfig(format!(
            "synth_patterns: noise_rate {noise_rate} outside [0, 0.5]"
        )));
    }
    let protos = pattern_prototypes(n_classes, d);
    let mut rng = Rng::new(seed);
    let examples = (0..n_examples)
        .map(|i| {
            let c = i % n_classes;
            let v = protos[c]
                .iter()
                .map(|&bit| if rng.flip(noise_rate) { 1.0 - bit } else { bit })
                .collect();
            Example { v, label: Some(c) }
        })
        .collect();
    Ok(Dataset {
        d,
        num_classes: n_classes,
        examples,
    })
}

/// Build missing-input evaluation queries: each example is paired with a
/// mask hiding a fixed fraction of its pixels (and always the label).
/// Deterministic in `seed`; the hidden pixel set varies per example.
pub fn make_missing_input_queries(
    dataset: &Dataset,
    fraction: f64,
    seed: u64,
) -> Result<Vec<(Example, Mask)>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidConfig(format!(
            "missing-input fraction {fraction} outside [0, 1]"
        )));
    }
    let d = dataset.d;
    let n_hidden = ((fraction * d as f64).floor() as usize).min(d);
    let mut rng = Rng::new(seed);
    Ok(dataset
        .examples
        .iter()
        .map(|ex| {
            // Partial Fisher-Yates: the first n_hidden entries of idx end up
            // a uniform sample of distinct positions.
            let mut idx: Vec<usize> = (0..d).collect();
            for i in 0..n_hidden {
                let j = i + rng.below(d - i);
                idx.swap(i, j);
            }
            let mut observed = vec![true; d];
            for &j in &idx[..n_hidden] {
                observed[j] = false;
            }
            (ex.clone(), Mask::new(observed, false))
        })
        .collect())
}
