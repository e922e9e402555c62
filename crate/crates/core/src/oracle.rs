//! Brute-force enumeration oracle for small models.
//!
//! Everything here is written for auditability, not speed: plain counters
//! over the joint state space, energies recomputed from scratch per state,
//! and log-domain accumulation. The oracle is the ground truth that the
//! approximate machinery (mean field, Gibbs sampling, the training
//! gradients) is tested against, so it deliberately shares as little code
//! with that machinery as possible — just the energy function and the
//! sufficient-statistics accumulators.
//!
//! All entry points refuse models whose state space exceeds an explicit
//! bound rather than silently taking hours.

use crate::data::Example;
use crate::inference::{Mask, MeanFieldState};
use crate::model::{
    accumulate_bias_stats, accumulate_edge_stats, energy, FullState, Gradient, ModelShape, Params,
};
use crate::{Error, Result};

/// Cap on the number of joint states an oracle call may enumerate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumBound {
    /// The limit is `2^max_total_units` states (label classes count toward
    /// the product).
    pub max_total_units: u32,
}

impl Default for EnumBound {
    fn default() -> Self {
        EnumBound { max_total_units: 22 }
    }
}

impl EnumBound {
    fn check(&self, states: u128) -> Result<()> {
        let limit = 1u128 << self.max_total_units.min(127);
        if states > limit {
            Err(Error::EnumerationBoundExceeded {
                states,
                bound_log2: self.max_total_units,
            })
        } else {
            Ok(())
        }
    }
}

/// A free binary coordinate in a completion space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coord {
    V(usize),
    H { layer: usize, unit: usize },
}

/// The set of joint states compatible with some observed evidence: free
/// binary coordinates (unobserved visibles and all hiddens) plus the label
/// when unobserved. Indexes states as `code * label_states + y`, where bit
/// `b` of `code` is the value of the `b`-th free coordinate.
#[derive(Debug, Clone)]
pub struct CompletionSpace {
    shape: ModelShape,
    base: FullState,
    coords: Vec<Coord>,
    label_free: bool,
}

impl CompletionSpace {
    /// Completions of `(data, mask)`: observed coordinates are clamped to
    /// the data, everything else enumerates.
    pub fn conditional(shape: &ModelShape, data: &Example, mask: &Mask) -> Result<Self> {
        if data.v.len() != shape.d || mask.visible_observed.len() != shape.d {
            return Err(Error::shape(
                format!("{} visibles", shape.d),
                format!(
                    "{} data values, mask over {}",
                    data.v.len(),
                    mask.visible_observed.len()
                ),
            ));
        }
        let mut base = FullState::zeros(shape);
        let mut coords = Vec::new();
        for j in 0..shape.d {
            if mask.visible_observed[j] {
                base.v[j] = data.v[j];
            } else {
                coords.push(Coord::V(j));
            }
        }
        for (layer, &n) in shape.layer_sizes.iter().enumerate() {
            for unit in 0..n {
                coords.push(Coord::H { layer, unit });
            }
        }
        let label_free = if shape.has_label() {
            if mask.label_observed {
                let c = data.label.ok_or_else(|| {
                    Error::Data("mask observes the label but the example is unlabeled".into())
                })?;
                if c >= shape.k {
                    return Err(Error::shape(
                        format!("label < {}", shape.k),
                        format!("label {c}"),
                    ));
                }
                base.y = Some(c);
                false
            } else {
                true
            }
        } else {
            false
        };
        Ok(CompletionSpace {
            shape: shape.clone(),
            base,
            coords,
            label_free,
        })
    }

    /// The full joint space (nothing observed).
    pub fn joint(shape: &ModelShape) -> Self {
        let data = Example {
            v: vec![0.0; shape.d],
            label: None,
        };
        CompletionSpace::conditional(shape, &data, &Mask::fully_unobserved(shape))
            .expect("unconditional space is always valid")
    }

    fn label_states(&self) -> usize {
        if self.label_free {
            self.shape.k
        } else {
            1
        }
    }

    /// Number of states, saturating at `u128::MAX` for absurd shapes.
    pub fn num_states(&self) -> u128 {
        if self.coords.len() >= 120 {
            return u128::MAX;
        }
        (1u128 << self.coords.len()).saturating_mul(self.label_states() as u128)
    }

    pub fn check(&self, bound: &EnumBound) -> Result<()> {
        bound.check(self.num_states())
    }

    /// Visit every state as `(flat_index, state)` in index order. The state
    /// reference borrows a scratch buffer; clone it to keep it.
    pub fn for_each<F: FnMut(usize, &FullState)>(&self, mut f: F) {
        let nb = self.coords.len();
        let ls = self.label_states();
        let mut s = self.base.clone();
        for code in 0u64..(1u64 << nb) {
            for (b, c) in self.coords.iter().enumerate() {
                let bit = ((code >> b) & 1) as f64;
                match *c {
                    Coord::V(j) => s.v[j] = bit,
                    Coord::H { layer, unit } => s.h[layer][unit] = bit,
                }
            }
            for yi in 0..ls {
                if self.label_free {
                    s.y = Some(yi);
                }
                f(code as usize * ls + yi, &s);
            }
        }
    }

    /// Flat index of a concrete state (used to bin samples against exact
    /// probabilities). The state's clamped coordinates are assumed
    /// compatible.
    pub fn index_of(&self, state: &FullState) -> usize {
        let mut code = 0u64;
        for (b, c) in self.coords.iter().enumerate() {
            let val = match *c {
                Coord::V(j) => state.v[j],
                Coord::H { layer, unit } => state.h[layer][unit],
            };
            if val > 0.5 {
                code |= 1 << b;
            }
        }
        let yi = if self.label_free {
            state.y.expect("label expected")
        } else {
            0
        };
        code as usize * self.label_states() + yi
    }
}

/// Streaming `log(sum(exp(x_i)))`: numerically stable one-pass
/// accumulation, so enumeration never has to materialize all energies.
struct LogSumExp {
    max: f64,
    /// `sum(exp(x_i - max))` over everything pushed so far.
    sum: f64,
}

impl LogSumExp {
    fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    fn push(&mut self, x: f64) {
        if x <= self.max {
            self.sum += (x - self.max).exp();
        } else {
            if self.max.is_finite() {
                self.sum = self.sum * (self.max - x).exp() + 1.0;
            } else {
                self.sum = 1.0;
            }
            self.max = x;
        }
    }

    fn value(&self) -> f64 {
        if self.max == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else {
            self.max + self.sum.ln()
        }
    }
}

fn state_energy(params: &Params, s: &FullState) -> f64 {
    energy(params, s).expect("enumerated state matches model shape")
}

/// Exact log partition function by full enumeration.
pub fn exact_log_z(params: &Params, bound: &EnumBound) -> Result<f64> {
    let space = CompletionSpace::joint(&params.shape);
    space.check(bound)?;
    let mut lse = LogSumExp::new();
    space.for_each(|_, s| lse.push(-state_energy(params, s)));
    Ok(lse.value())
}

/// Exact `sum_e log P(v_e, y_e)` for fully-observed examples. Labeled
/// models require every example to carry a label.
pub fn exact_log_likelihood(
    params: &Params,
    examples: &[Example],
    bound: &EnumBound,
) -> Result<f64> {
    let log_z = exact_log_z(params, bound)?;
    let mask = Mask::all_observed(&params.shape);
    let mut total = 0.0;
    for ex in examples {
        let space = CompletionSpace::conditional(&params.shape, ex, &mask)?;
        space.check(bound)?;
        let mut lse = LogSumExp::new();
        space.for_each(|_, s| lse.push(-state_energy(params, s)));
        total += lse.value() - log_z;
    }
    Ok(total)
}

/// Exact conditional distribution over the completions of `(data, mask)`.
#[derive(Debug, Clone)]
pub struct Conditional {
    pub space: CompletionSpace,
    /// Normalized probabilities indexed by the space's flat index.
    pub probs: Vec<f64>,
    /// `log sum exp(-E)` over the completions (the clamped log partition
    /// function).
    pub log_norm: f64,
}

/// Enumerate the exact conditional `P(unobserved | observed)`.
pub fn exact_conditional(
    params: &Params,
    data: &Example,
    mask: &Mask,
    bound: &EnumBound,
) -> Result<Conditional> {
    let space = CompletionSpace::conditional(&params.shape, data, mask)?;
    space.check(bound)?;
    let n = space.num_states() as usize;
    let mut neg_e = vec![0.0; n];
    space.for_each(|i, s| neg_e[i] = -state_energy(params, s));
    let log_norm = crate::numerics::logsumexp(&neg_e);
    let probs = neg_e.iter().map(|&x| (x - log_norm).exp()).collect();
    Ok(Conditional {
        space,
        probs,
        log_norm,
    })
}

/// Exact conditional marginals, shaped like a mean-field state: one mean
/// per unit and a label distribution. Observed coordinates carry the
/// clamped data.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactMarginals {
    pub v: Vec<f64>,
    pub h: Vec<Vec<f64>>,
    pub y: Option<Vec<f64>>,
}

/// Enumerate the exact per-unit conditional means.
pub fn exact_marginals(
    params: &Params,
    data: &Example,
    mask: &Mask,
    bound: &EnumBound,
) -> Result<ExactMarginals> {
    let shape = &params.shape;
    let cond = exact_conditional(params, data, mask, bound)?;
    let mut v = vec![0.0; shape.d];
    let mut h: Vec<Vec<f64>> = shape.layer_sizes.iter().map(|&n| vec![0.0; n]).collect();
    let mut y = if shape.has_label() {
        Some(vec![0.0; shape.k])
    } else {
        None
    };
    cond.space.for_each(|i, s| {
        let p = cond.probs[i];
        for (acc, &val) in v.iter_mut().zip(&s.v) {
            *acc += p * val;
        }
        for (hl, sl) in h.iter_mut().zip(&s.h) {
            for (acc, &val) in hl.iter_mut().zip(sl) {
                *acc += p * val;
            }
        }
        if let (Some(y), Some(c)) = (&mut y, s.y) {
            y[c] += p;
        }
    });
    Ok(ExactMarginals { v, h, y })
}

/// Exact ascent gradient of `sum_e log P(v_e, y_e)`: data-conditional
/// expected sufficient statistics minus `n` times the model expectation.
pub fn exact_ll_grad(params: &Params, examples: &[Example], bound: &EnumBound) -> Result<Gradient> {
    exact_ll_grad_weighted(params, examples, &vec![1.0; examples.len()], bound)
}

/// Weighted variant: ascent gradient of `sum_e w_e log P(v_e, y_e)`.
/// Feeding every joint visible configuration weighted by its own model
/// probability yields the zero gradient (moment matching), which is how
/// tests pin the estimator down.
pub fn exact_ll_grad_weighted(
    params: &Params,
    examples: &[Example],
    weights: &[f64],
    bound: &EnumBound,
) -> Result<Gradient> {
    if examples.len() != weights.len() {
        return Err(Error::shape(
            format!("{} weights", examples.len()),
            format!("{}", weights.len()),
        ));
    }
    let shape = &params.shape;
    let mask = Mask::all_observed(shape);
    let mut grad = Gradient::zeros(shape);

    // Positive phase: expectation under P(h | v_e, y_e) per example.
    for (ex, &wt) in examples.iter().zip(weights) {
        let cond = exact_conditional(params, ex, &mask, bound)?;
        cond.space.for_each(|i, s| {
            let w = wt * cond.probs[i];
            let y1 = s.y_onehot(shape.k);
            accumulate_edge_stats(params, &s.v, &s.h, y1.as_deref(), w, &mut grad);
            accumulate_bias_stats(params, &s.v, &s.h, y1.as_deref(), w, &mut grad);
        });
    }

    // Negative phase: expectation under the joint, scaled by total weight.
    let total_w: f64 = weights.iter().sum();
    let neg = exact_model_stats(params, bound)?;
    grad.add_scaled(&neg, -total_w);
    Ok(grad)
}

/// Expected sufficient statistics under the model's joint distribution:
/// the exact value every negative-phase sampler is estimating.
pub fn exact_model_stats(params: &Params, bound: &EnumBound) -> Result<Gradient> {
    let shape = &params.shape;
    let joint = CompletionSpace::joint(shape);
    joint.check(bound)?;
    let log_z = exact_log_z(params, bound)?;
    let mut stats = Gradient::zeros(shape);
    joint.for_each(|_, s| {
        let p = (-state_energy(params, s) - log_z).exp();
        let y1 = s.y_onehot(shape.k);
        accumulate_edge_stats(params, &s.v, &s.h, y1.as_deref(), p, &mut stats);
        accumulate_bias_stats(params, &s.v, &s.h, y1.as_deref(), p, &mut stats);
    });
    Ok(stats)
}

/// Exact `KL(Q || P(unobserved | observed))` between a factorial
/// mean-field state and the true conditional:
/// `sum_s Q(s) ln Q(s) + sum_s Q(s) E(s) + ln Z_cond`.
/// States with `Q(s) = 0` contribute nothing (the `x ln x -> 0` limit).
pub fn kl_factorial_to_conditional(
    params: &Params,
    data: &Example,
    mask: &Mask,
    q: &MeanFieldState,
    bound: &EnumBound,
) -> Result<f64> {
    let shape = &params.shape;
    let space = CompletionSpace::conditional(shape, data, mask)?;
    space.check(bound)?;
    if q.v.len() != shape.d || q.h.len() != shape.num_layers() {
        return Err(Error::shape(
            format!("state for {} visibles, {} layers", shape.d, shape.num_layers()),
            format!("state with {} visibles, {} layers", q.v.len(), q.h.len()),
        ));
    }

    let mut log_norm = LogSumExp::new();
    space.for_each(|_, s| log_norm.push(-state_energy(params, s)));

    // Probability the factorial Q assigns to one completion.
    let q_of = |s: &FullState| -> f64 {
        let mut prob = 1.0;
        for c in &space.coords {
            let (mean, val) = match *c {
                Coord::V(j) => (q.v[j], s.v[j]),
                Coord::H { layer, unit } => (q.h[layer][unit], s.h[layer][unit]),
            };
            prob *= if val > 0.5 { mean } else { 1.0 - mean };
        }
        if space.label_free {
            let ys = q.y.as_ref().expect("labeled model requires label means");
            prob *= ys[s.y.expect("label expected")];
        }
        prob
    };

    let mut entropy_neg = 0.0; // sum Q ln Q
    let mut avg_energy = 0.0; // sum Q E
    space.for_each(|_, s| {
        let prob = q_of(s);
        if prob > 0.0 {
            entropy_neg += prob * prob.ln();
            avg_energy += prob * state_energy(params, s);
        }
    });
    Ok(entropy_neg + avg_energy + log_norm.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::{mf_run, mf_sweep, InferenceMode};
    
    use crate::numerics::sigmoid;
    use crate::testutil::{random_params, random_state};

    fn bound() -> EnumBound {
        EnumBound::default()
    }

    #[test]
    fn log_z_of_zero_params_counts_states() {
        // All energies 0: Z = number of joint states.
        let p = Params::zeros(ModelShape::new(3, vec![2], 0).unwrap());
        let lz = exact_log_z(&p, &bound()).unwrap();
        assert!((lz - (32.0f64).ln()).abs() < 1e-12);
        let p = Params::zeros(ModelShape::new(3, vec![2], 2).unwrap());
        let lz = exact_log_z(&p, &bound()).unwrap();
        assert!((lz - (64.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn log_z_matches_closed_form_for_bias_only_model() {
        // Independent units: Z = prod_a (1 + e^{b_a}) times k label terms.
        let mut p = Params::zeros(ModelShape::new(1, vec![1], 0).unwrap());
        p.b_v[0] = 0.7;
        p.b_h[0][0] = -0.3;
        let expect = (0.7f64).exp().ln_1p() + (-0.3f64).exp().ln_1p();
        assert!((exact_log_z(&p, &bound()).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn log_z_agrees_with_independently_ordered_summation() {
        let p = random_params(4, ModelShape::new(3, vec![2, 2], 2).unwrap(), 0.9);
        let streamed = exact_log_z(&p, &bound()).unwrap();
        // Second path: materialize all energies, reverse the order, and use
        // the slice-based logsumexp.
        let space = CompletionSpace::joint(&p.shape);
        let mut neg_e = Vec::new();
        space.for_each(|_, s| neg_e.push(-energy(&p, s).unwrap()));
        neg_e.reverse();
        let batch = crate::numerics::logsumexp(&neg_e);
        assert!((streamed - batch).abs() < 1e-10, "{streamed} vs {batch}");
    }

    #[test]
    fn oversized_shape_is_rejected() {
        let p = Params::zeros(ModelShape::new(20, vec![10], 0).unwrap());
        match exact_log_z(&p, &bound()) {
            Err(Error::EnumerationBoundExceeded { states, bound_log2 }) => {
                assert_eq!(states, 1u128 << 30);
                assert_eq!(bound_log2, 22);
            }
            other => panic!("expected bound error, got {other:?}"),
        }
    }

    #[test]
    fn zero_weight_conditional_factorizes_to_sigmoids() {
        let mut p = Params::zeros(ModelShape::new(3, vec![2], 2).unwrap());
        p.b_v = vec![0.4, -0.7, 1.1];
        p.b_h[0] = vec![0.2, -0.2];
        p.b_y = Some(vec![0.3, -0.3]);
        let data = Example {
            v: vec![1.0, 0.0, 0.0],
            label: None,
        };
        let mask = Mask::new(vec![true, false, false], false);
        let m = exact_marginals(&p, &data, &mask, &bound()).unwrap();
        assert_eq!(m.v[0], 1.0); // clamped
        assert!((m.v[1] - sigmoid(-0.7)).abs() < 1e-12);
        assert!((m.v[2] - sigmoid(1.1)).abs() < 1e-12);
        assert!((m.h[0][0] - sigmoid(0.2)).abs() < 1e-12);
        let y = m.y.unwrap();
        let sm = crate::numerics::softmax(&[0.3, -0.3]).unwrap();
        assert!((y[0] - sm[0]).abs() < 1e-12);
        assert!((y[1] - sm[1]).abs() < 1e-12);
    }

    #[test]
    fn conditional_probabilities_sum_to_one_and_index_round_trips() {
        let p = random_params(7, ModelShape::new(3, vec![2, 2], 2).unwrap(), 1.1);
        let data = Example {
            v: vec![1.0, 1.0, 0.0],
            label: Some(1),
        };
        let mask = Mask::new(vec![true, false, true], false);
        let cond = exact_conditional(&p, &data, &mask, &bound()).unwrap();
        let total: f64 = cond.probs.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let mut seen = vec![false; cond.probs.len()];
        cond.space.for_each(|i, s| {
            assert_eq!(cond.space.index_of(s), i);
            assert!(!seen[i]);
            seen[i] = true;
            // Clamped coordinates always carry the data.
            assert_eq!(s.v[0], 1.0);
            assert_eq!(s.v[2], 0.0);
        });
        assert!(seen.iter().all(|&b| b));
    }

    #[test]
    fn strong_bias_concentrates_conditional_to_point_mass() {
        let mut p = Params::zeros(ModelShape::new(2, vec![1], 0).unwrap());
        p.b_v = vec![50.0, -50.0];
        p.b_h[0][0] = 50.0;
        let data = Example {
            v: vec![0.0, 0.0],
            label: None,
        };
        let mask = Mask::fully_unobserved(&p.shape);
        let cond = exact_conditional(&p, &data, &mask, &bound()).unwrap();
        let target = FullState {
            v: vec![1.0, 0.0],
            h: vec![vec![1.0]],
            y: None,
        };
        let idx = cond.space.index_of(&target);
        assert!(cond.probs[idx] > 1.0 - 1e-12);
    }

    #[test]
    fn ll_grad_matches_finite_differences() {
        let p = random_params(13, ModelShape::new(2, vec![2], 2).unwrap(), 0.8);
        let examples = vec![
            Example {
                v: vec![1.0, 0.0],
                label: Some(0),
            },
            Example {
                v: vec![0.0, 1.0],
                label: Some(1),
            },
        ];
        let grad = exact_ll_grad(&p, &examples, &bound()).unwrap();
        let eps = 1e-6;
        for id in p.tensor_ids() {
            for i in 0..p.tensor(id).len() {
                let mut plus = p.clone();
                plus.tensor_mut(id)[i] += eps;
                let mut minus = p.clone();
                minus.tensor_mut(id)[i] -= eps;
                let fd = (exact_log_likelihood(&plus, &examples, &bound()).unwrap()
                    - exact_log_likelihood(&minus, &examples, &bound()).unwrap())
                    / (2.0 * eps);
                let bp = grad.tensor(id)[i];
                assert!(
                    (bp - fd).abs() <= 1e-6_f64.max(1e-6 * bp.abs()),
                    "{id}[{i}]: analytic {bp} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn ll_grad_matches_finite_differences_with_centering() {
        let mut p = random_params(29, ModelShape::new(2, vec![2], 2).unwrap(), 0.8);
        p.offsets = Some(crate::model::Offsets {
            v: vec![0.3, 0.6],
            h: vec![vec![0.5, 0.4]],
            y: Some(vec![0.5, 0.5]),
        });
        let examples = vec![Example {
            v: vec![1.0, 1.0],
            label: Some(1),
        }];
        let grad = exact_ll_grad(&p, &examples, &bound()).unwrap();
        let eps = 1e-6;
        for id in p.tensor_ids() {
            for i in 0..p.tensor(id).len() {
                let mut plus = p.clone();
                plus.tensor_mut(id)[i] += eps;
                let mut minus = p.clone();
                minus.tensor_mut(id)[i] -= eps;
                let fd = (exact_log_likelihood(&plus, &examples, &bound()).unwrap()
                    - exact_log_likelihood(&minus, &examples, &bound()).unwrap())
                    / (2.0 * eps);
                let bp = grad.tensor(id)[i];
                assert!(
                    (bp - fd).abs() <= 1e-6_f64.max(1e-6 * bp.abs()),
                    "{id}[{i}]: analytic {bp} vs fd {fd}"
                );
            }
        }
    }

    #[test]
    fn model_distribution_as_data_gives_zero_gradient() {
        // Moment matching: if the "dataset" is every (v, y) configuration
        // weighted by its own model probability, positive and negative
        // statistics coincide.
        let p = random_params(17, ModelShape::new(2, vec![2], 2).unwrap(), 0.9);
        let mut examples = Vec::new();
        let mut weights = Vec::new();
        for code in 0..4u64 {
            for y in 0..2 {
                let ex = Example {
                    v: vec![(code & 1) as f64, ((code >> 1) & 1) as f64],
                    label: Some(y),
                };
                let lp = exact_log_likelihood(&p, std::slice::from_ref(&ex), &bound()).unwrap();
                weights.push(lp.exp());
                examples.push(ex);
            }
        }
        assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        let grad = exact_ll_grad_weighted(&p, &examples, &weights, &bound()).unwrap();
        assert!(
            grad.max_abs(&p.shape) < 1e-8,
            "max |grad| = {}",
            grad.max_abs(&p.shape)
        );
    }

    #[test]
    fn mean_field_kl_is_zero_for_factorial_model() {
        // Zero weights make the true conditional factorial, so one sweep of
        // mean field recovers it exactly.
        let mut p = Params::zeros(ModelShape::new(3, vec![2], 2).unwrap());
        p.b_v = vec![0.4, -0.7, 1.1];
        p.b_h[0] = vec![0.2, -0.2];
        p.b_y = Some(vec![0.3, -0.3]);
        let data = Example {
            v: vec![1.0, 0.0, 0.0],
            label: None,
        };
        let mask = Mask::new(vec![true, false, false], false);
        let (st, _) = mf_run(&p, &data, &mask, 2, InferenceMode::Standard).unwrap();
        let kl = crate::inference::mf_kl_to_exact(&p, &data, &mask, &st).unwrap();
        assert!(kl.abs() < 1e-10, "kl = {kl}");
    }

    #[test]
    fn mean_field_kl_is_monotone_in_sweeps() {
        let p = random_params(23, ModelShape::new(3, vec![2, 2], 2).unwrap(), 1.2);
        let data = Example {
            v: vec![1.0, 0.0, 1.0],
            label: Some(0),
        };
        let mask = Mask::new(vec![true, false, true], false);
        let mut st = crate::inference::mf_init(&p, &data, &mask);
        let mut prev = kl_factorial_to_conditional(&p, &data, &mask, &st, &bound()).unwrap();
        assert!(prev >= -1e-12);
        for _ in 0..8 {
            mf_sweep(&p, &mut st, &mask);
            let kl = kl_factorial_to_conditional(&p, &data, &mask, &st, &bound()).unwrap();
            assert!(kl <= prev + 1e-10, "kl rose: {prev} -> {kl}");
            assert!(kl >= -1e-12);
            prev = kl;
        }
    }

    #[test]
    fn random_state_indexing_is_consistent() {
        let shape = ModelShape::new(3, vec![2, 2], 2).unwrap();
        let space = CompletionSpace::joint(&shape);
        for seed in 0..20 {
            let s = random_state(seed, &shape);
            let idx = space.index_of(&s);
            let mut found = None;
            space.for_each(|i, t| {
                if i == idx {
                    found = Some(t.clone());
                }
            });
            assert_eq!(found.unwrap(), s);
        }
    }
}
