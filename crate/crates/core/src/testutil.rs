//! Shared helpers for unit tests: seeded random parameters and states.

use crate::model::{FullState, InitConfig, ModelShape, Params};
use crate::numerics::Rng;

/// Parameters with weights uniform in `(-scale, scale)` and biases uniform
/// in `(-0.4, 0.4)`, fully determined by the seed.
pub(crate) fn random_params(seed: u64, shape: ModelShape, scale: f64) -> Params {
    let mut rng = Rng::new(seed);
    let mut p = Params::init(
        shape,
        &mut rng,
        &InitConfig {
            weight_scale: scale,
            ..Default::default()
        },
    )
    .unwrap();
    for b in &mut p.b_v {
        *b = rng.uniform_range(-0.4, 0.4);
    }
    for layer in &mut p.b_h {
        for b in layer.iter_mut() {
            *b = rng.uniform_range(-0.4, 0.4);
        }
    }
    if let Some(by) = &mut p.b_y {
        for b in by.iter_mut() {
            *b = rng.uniform_range(-0.4, 0.4);
        }
    }
    p
}

/// A uniformly random joint configuration.
pub(crate) fn random_state(seed: u64, shape: &ModelShape) -> FullState {
    let mut rng = Rng::new(seed);
    FullState {
        v: (0..shape.d)
            .map(|_| if rng.flip(0.5) { 1.0 } else { 0.0 })
            .collect(),
        h: shape
            .layer_sizes
            .iter()
            .map(|&n| {
                (0..n)
                    .map(|_| if rng.flip(0.5) { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect(),
        y: if shape.has_label() {
            Some(rng.below(shape.k))
        } else {
            None
        },
    }
}
