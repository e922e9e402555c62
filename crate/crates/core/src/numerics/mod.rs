//! Deterministic numerical kernels and random number generation.
//!
//! Everything downstream (energies, mean field sweeps, gradients, Gibbs
//! chains) is built on the pieces here. Two properties matter more than
//! speed:
//!
//! - reductions use a fixed left-to-right summation order so repeated runs
//!   produce bit-identical results, and
//! - the RNG is an explicit, portable algorithm (ChaCha with 8 rounds,
//!   seeded from a 64-bit value), so seeded streams agree across platforms
//!   and across processes.
//!
//! All arithmetic is in `f64`; the gradient checks elsewhere in the crate
//! need that precision.

mod matrix;
mod rng;

pub use matrix::Matrix;
pub use rng::Rng;

use crate::{Error, Result};

/// Logistic function `1 / (1 + exp(-x))`, evaluated without overflow for
/// any finite `x` (large negative inputs underflow gracefully to 0).
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Derivative of the logistic function expressed through its output:
/// `sigmoid'(x) = m (1 - m)` where `m = sigmoid(x)`.
#[inline]
pub fn sigmoid_deriv_from_output(m: f64) -> f64 {
    m * (1.0 - m)
}

/// Max-subtraction stabilized softmax.
///
/// Invariant under adding a constant to every input; entries sum to 1 up to
/// rounding. Errors on an empty slice.
pub fn softmax(xs: &[f64]) -> Result<Vec<f64>> {
    if xs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = xs.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for o in &mut out {
        *o /= sum;
    }
    Ok(out)
}

/// `log(sum(exp(xs)))` with max subtraction. Panics on an empty slice.
pub fn logsumexp(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "logsumexp of empty slice");
    let max = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let sum: f64 = xs.iter().map(|&x| (x - max).exp()).sum();
    max + sum.ln()
}

/// Inverse of the logistic function, with the argument clamped away from
/// {0, 1} so the result stays finite. Used to seed visible biases from
/// data marginals.
pub fn logit(p: f64) -> f64 {
    let p = p.clamp(1e-8, 1.0 - 1e-8);
    (p / (1.0 - p)).ln()
}

/// Streaming accumulator helpers on plain slices.
///
/// `y += alpha * x`, in index order.
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(
        x.len(),
        y.len(),
        "axpy: length {} vs {}",
        x.len(),
        y.len()
    );
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Dot product with left-to-right accumulation.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: length {} vs {}", a.len(), b.len());
    let mut acc = 0.0;
    for (x, y) in a.iter().zip(b) {
        acc += x * y;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(sigmoid(0.0), 0.5);
    }

    #[test]
    fn sigmoid_saturates_without_overflow() {
        assert!((sigmoid(750.0) - 1.0).abs() < 1e-15);
        assert!(sigmoid(-750.0).abs() < 1e-15);
        assert!(sigmoid(1e3).is_finite());
        assert!(sigmoid(-1e3).is_finite());
    }

    #[test]
    fn sigmoid_matches_high_precision_reference() {
        // 1/(1+e^-2) evaluated with 60-digit arithmetic: 0.8807970779778824...
        assert!((sigmoid(2.0) - 0.8807970779778824).abs() < 1e-15);
    }

    #[test]
    fn softmax_uniform_on_equal_inputs() {
        let p = softmax(&[0.0, 0.0, 0.0]).unwrap();
        for v in p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_saturation_and_shift_invariance() {
        for c in [-500.0, 0.0, 500.0] {
            let p = softmax(&[c, c + 1000.0]).unwrap();
            assert!(p[0] < 1e-300);
            assert!((p[1] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_matches_high_precision_reference() {
        // softmax([1,2,3]) via 60-digit arithmetic.
        let p = softmax(&[1.0, 2.0, 3.0]).unwrap();
        let expect = [0.09003057317038046, 0.24472847105479764, 0.6652409557748219];
        for (a, b) in p.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn softmax_empty_is_error() {
        assert!(matches!(softmax(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn logsumexp_handles_extremes() {
        assert!((logsumexp(&[0.0, 0.0]) - std::f64::consts::LN_2).abs() < 1e-15);
        let v = logsumexp(&[-1000.0, -1000.0, -1000.0]);
        assert!((v - (-1000.0 + 3.0f64.ln())).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn sigmoid_symmetry(x in -1e3..1e3f64) {
            prop_assert!((sigmoid(x) + sigmoid(-x) - 1.0).abs() < 1e-15);
        }

        #[test]
        fn sigmoid_monotone(x in -100.0..100.0f64, d in 1e-6..10.0f64) {
            prop_assert!(sigmoid(x + d) >= sigmoid(x));
        }

        #[test]
        fn softmax_is_probability_vector(xs in proptest::collection::vec(-700.0..700.0f64, 1..8)) {
            let p = softmax(&xs).unwrap();
            let sum: f64 = p.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
    }
}
