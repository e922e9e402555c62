//! Small shared helpers for the commands and test suites.

use mpdbm_core::model::{InitConfig, ModelShape, Params};
use mpdbm_core::numerics::Rng;

/// Random parameters for self-checks and acceptance runs: uniform weights
/// in `±scale`, biases in `±0.4`, no centering.
pub fn random_params(seed: u64, shape: ModelShape, scale: f64) -> Params {
    let mut rng = Rng::new(seed);
    let mut p = Params::init(
        shape,
        &mut rng,
        &InitConfig {
            weight_scale: scale,
            ..Default::default()
        },
    )
    .expect("init cannot fail for a valid shape");
    for b in &mut p.b_v {
        *b = rng.uniform_range(-0.4, 0.4);
    }
    for layer in &mut p.b_h {
        for b in layer {
            *b = rng.uniform_range(-0.4, 0.4);
        }
    }
    if let Some(by) = &mut p.b_y {
        for b in by {
            *b = rng.uniform_range(-0.4, 0.4);
        }
    }
    p
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let rx = average_ranks(xs);
    let ry = average_ranks(ys);
    pearson(&rx, &ry)
}

fn average_ranks(vals: &[f64]) -> Vec<f64> {
    let n = vals.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap());
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && vals[order[j + 1]] == vals[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx) * (x - mx);
        vy += (y - my) * (y - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}
