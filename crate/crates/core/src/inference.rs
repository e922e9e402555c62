//! Masked block mean field inference over the layered model.
//!
//! The variational posterior `Q` is factorial: one mean per unclamped unit,
//! plus a probability vector for the label. A sweep alternates two blocks
//! that are conditionally independent given each other:
//!
//! - odd block: `h^(1), h^(3), ...` and the label when the top layer sits
//!   in the even block;
//! - even block: unobserved visibles, `h^(2), h^(4), ...`, and the label
//!   otherwise.
//!
//! Each block update is the exact coordinate minimizer of
//! `KL(Q || P(unobserved | observed))` given the complementary block, so
//! the KL is non-increasing sweep over sweep; the enumeration oracle makes
//! that testable on tiny models.
//!
//! [`mf_run`] unrolls a fixed number of sweeps and records every
//! intermediate state in a [`Trace`], which is what training
//! backpropagates through. Multi-inference mode additionally computes the
//! reconstruction `r` (the update the visibles would receive if they were
//! unobserved) at the start of each sweep and feeds `0.5 (v + r)` in place
//! of the observed visibles, which approximates geometric-mean averaging
//! over the family of prediction problems the model was trained on.

use crate::data::Example;
use crate::model::{preact_hidden, preact_label, preact_visible, ModelShape, Params};
use crate::numerics::{sigmoid, softmax};
use crate::{Error, Result};

/// Partition of the maskable variables (visibles and the label) into
/// observed inputs and prediction targets. Hidden units are never observed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub visible_observed: Vec<bool>,
    pub label_observed: bool,
}

impl Mask {
    pub fn new(visible_observed: Vec<bool>, label_observed: bool) -> Self {
        Mask {
            visible_observed,
            label_observed,
        }
    }

    /// Everything observed (the classification query masks the label only
    /// when `label_observed` is cleared afterwards).
    pub fn all_observed(shape: &ModelShape) -> Self {
        Mask {
            visible_observed: vec![true; shape.d],
            label_observed: shape.has_label(),
        }
    }

    /// Nothing observed: unconditional inference.
    pub fn fully_unobserved(shape: &ModelShape) -> Self {
        Mask {
            visible_observed: vec![false; shape.d],
            label_observed: false,
        }
    }

    /// The standard classification query: all pixels in, label out.
    pub fn classify(shape: &ModelShape) -> Self {
        Mask {
            visible_observed: vec![true; shape.d],
            label_observed: false,
        }
    }

    /// Number of observed variables, counting the label when present.
    pub fn num_observed(&self, has_label: bool) -> usize {
        let mut n = self.visible_observed.iter().filter(|&&b| b).count();
        if has_label && self.label_observed {
            n += 1;
        }
        n
    }

    /// Number of prediction targets, counting the label when present.
    pub fn num_targets(&self, has_label: bool) -> usize {
        let mut n = self.visible_observed.iter().filter(|&&b| !b).count();
        if has_label && !self.label_observed {
            n += 1;
        }
        n
    }

    fn matches(&self, shape: &ModelShape) -> bool {
        self.visible_observed.len() == shape.d && (shape.has_label() || !self.label_observed)
    }
}

/// Inference flavor for [`mf_run`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceMode {
    Standard,
    MultiInference,
}

/// Factorial variational state. Observed coordinates carry the clamped data
/// and are never modified by a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanFieldState {
    /// Visible means; observed positions hold the data bits.
    pub v: Vec<f64>,
    /// Hidden means per layer, each in `[0, 1]`.
    pub h: Vec<Vec<f64>>,
    /// Label probabilities (one-hot when the label is observed).
    pub y: Option<Vec<f64>>,
    /// Multi-inference reconstruction from the most recent sweep.
    pub r: Option<Vec<f64>>,
}

impl MeanFieldState {
    /// Largest absolute coordinate difference across all means.
    pub fn max_abs_diff(&self, other: &MeanFieldState) -> f64 {
        let mut m: f64 = 0.0;
        for (a, b) in self.v.iter().zip(&other.v) {
            m = m.max((a - b).abs());
        }
        for (ha, hb) in self.h.iter().zip(&other.h) {
            for (a, b) in ha.iter().zip(hb) {
                m = m.max((a - b).abs());
            }
        }
        if let (Some(ya), Some(yb)) = (&self.y, &other.y) {
            for (a, b) in ya.iter().zip(yb) {
                m = m.max((a - b).abs());
            }
        }
        m
    }

    /// Predicted class: argmax of the label probabilities (first index wins
    /// ties).
    pub fn predicted_class(&self) -> Option<usize> {
        self.y.as_ref().map(|y| {
            let mut best = 0;
            for (i, &p) in y.iter().enumerate() {
                if p > y[best] {
                    best = i;
                }
            }
            best
        })
    }
}

/// Record of one unrolled inference run: the post-init state and the state
/// after every half-sweep, plus the multi-inference reconstructions. This
/// is everything reverse-mode differentiation needs to walk the computation
/// backward, and enough to replay it forward bit-exactly.
#[derive(Debug, Clone)]
pub struct Trace {
    pub n_iters: usize,
    pub mode: InferenceMode,
    /// `states[0]` is the initial state; `states[1 + 2s]` and
    /// `states[2 + 2s]` follow the odd and even half-sweeps of sweep `s`.
    pub states: Vec<MeanFieldState>,
    /// Reconstruction `r` computed at the start of each sweep
    /// (multi-inference mode only).
    pub r_history: Vec<Vec<f64>>,
}

impl Trace {
    pub fn final_state(&self) -> &MeanFieldState {
        self.states.last().expect("trace has at least the init state")
    }

    /// Recompute the run from the recorded initial state, returning the
    /// final state. The forward pass is deterministic, so the result is
    /// bit-identical to the recorded final state; tests assert this.
    pub fn replay(&self, params: &Params, data: &Example, mask: &Mask) -> MeanFieldState {
        let mut st = self.states[0].clone();
        for _ in 0..self.n_iters {
            let v_eff = effective_visible_input(params, &mut st, mask, self.mode);
            phase_odd(params, &mut st, mask, v_eff.as_deref());
            phase_even(params, &mut st, mask);
        }
        let _ = data;
        st
    }
}

fn validate_inputs(params: &Params, data: &Example, mask: &Mask) -> Result<()> {
    let shape = &params.shape;
    if data.v.len() != shape.d {
        return Err(Error::shape(
            format!("{} visibles", shape.d),
            format!("{} data values", data.v.len()),
        ));
    }
    if !mask.matches(shape) {
        return Err(Error::shape(
            format!("mask over {} visibles (k={})", shape.d, shape.k),
            format!(
                "mask over {} visibles (label_observed={})",
                mask.visible_observed.len(),
                mask.label_observed
            ),
        ));
    }
    if let Some(c) = data.label {
        if !shape.has_label() || c >= shape.k {
            return Err(Error::shape(
                format!("label < {}", shape.k),
                format!("label {c}"),
            ));
        }
    } else if shape.has_label() && mask.label_observed {
        return Err(Error::Data(
            "mask observes the label but the example is unlabeled".into(),
        ));
    }
    Ok(())
}

/// Initial variational state: observed coordinates are clamped to the data;
/// unobserved visibles start at `sigmoid(b_v)`, hidden means at
/// `sigmoid(b_h)`, and the label at `softmax(b_y)`.
pub fn mf_init(params: &Params, data: &Example, mask: &Mask) -> MeanFieldState {
    let shape = &params.shape;
    let v = (0..shape.d)
        .map(|j| {
            if mask.visible_observed[j] {
                data.v[j]
            } else {
                sigmoid(params.b_v[j])
            }
        })
        .collect();
    let h = (0..shape.num_layers())
        .map(|l| params.b_h[l].iter().map(|&b| sigmoid(b)).collect())
        .collect();
    let y = if shape.has_label() {
        if mask.label_observed {
            let c = data.label.expect("observed label requires a labeled example");
            let mut onehot = vec![0.0; shape.k];
            onehot[c] = 1.0;
            Some(onehot)
        } else {
            Some(softmax(params.b_y.as_ref().unwrap()).expect("k >= 1"))
        }
    } else {
        None
    };
    MeanFieldState { v, h, y, r: None }
}

/// True when hidden layer `l` (0-based, so `l = 0` is `h^(1)`) belongs to
/// the odd block.
#[inline]
pub(crate) fn layer_in_odd_block(l: usize) -> bool {
    l % 2 == 0
}

/// True when the label belongs to the odd block: the label always sits
/// opposite its only neighbor, the top hidden layer.
#[inline]
pub(crate) fn label_in_odd_block(num_layers: usize) -> bool {
    num_layers % 2 == 0
}

/// Update every odd-block group in place. `v_input` overrides the visible
/// values fed to `h^(1)` (multi-inference substitution); the visible means
/// themselves are not touched here.
pub(crate) fn phase_odd(
    params: &Params,
    st: &mut MeanFieldState,
    mask: &Mask,
    v_input: Option<&[f64]>,
) {
    let nl = params.num_layers();
    for l in (0..nl).filter(|&l| layer_in_odd_block(l)) {
        let new_h: Vec<f64> = {
            let below: &[f64] = if l == 0 {
                v_input.unwrap_or(&st.v)
            } else {
                &st.h[l - 1]
            };
            let above: Option<&[f64]> = if l + 1 < nl {
                Some(&st.h[l + 1])
            } else {
                st.y.as_deref()
            };
            preact_hidden(params, l, below, above)
                .into_iter()
                .map(sigmoid)
                .collect()
        };
        st.h[l] = new_h;
    }
    if params.shape.has_label() && label_in_odd_block(nl) && !mask.label_observed {
        let a = preact_label(params, &st.h[nl - 1]);
        st.y = Some(softmax(&a).expect("k >= 1"));
    }
}

/// Update every even-block group in place: unobserved visibles, even hidden
/// layers, and the label when it sits in the even block.
pub(crate) fn phase_even(params: &Params, st: &mut MeanFieldState, mask: &Mask) {
    let nl = params.num_layers();
    let a_v = preact_visible(params, &st.h[0]);
    for (j, obs) in mask.visible_observed.iter().enumerate() {
        if !obs {
            st.v[j] = sigmoid(a_v[j]);
        }
    }
    for l in (0..nl).filter(|&l| !layer_in_odd_block(l)) {
        let new_h: Vec<f64> = {
            let below: &[f64] = &st.h[l - 1];
            let above: Option<&[f64]> = if l + 1 < nl {
                Some(&st.h[l + 1])
            } else {
                st.y.as_deref()
            };
            preact_hidden(params, l, below, above)
                .into_iter()
                .map(sigmoid)
                .collect()
        };
        st.h[l] = new_h;
    }
    if params.shape.has_label() && !label_in_odd_block(nl) && !mask.label_observed {
        let a = preact_label(params, &st.h[nl - 1]);
        st.y = Some(softmax(&a).expect("k >= 1"));
    }
}

/// Compute the visible values fed into the sweep. Standard mode uses the
/// state as-is; multi-inference recomputes `r = sigmoid(W^(1) h^(1) + b_v)`
/// and substitutes `0.5 (v + r)` at observed positions only.
fn effective_visible_input(
    params: &Params,
    st: &mut MeanFieldState,
    mask: &Mask,
    mode: InferenceMode,
) -> Option<Vec<f64>> {
    match mode {
        InferenceMode::Standard => None,
        InferenceMode::MultiInference => {
            let r: Vec<f64> = preact_visible(params, &st.h[0])
                .into_iter()
                .map(sigmoid)
                .collect();
            let v_eff = st
                .v
                .iter()
                .zip(&r)
                .zip(&mask.visible_observed)
                .map(|((&v, &r), &obs)| if obs { 0.5 * (v + r) } else { v })
                .collect();
            st.r = Some(r);
            Some(v_eff)
        }
    }
}

/// One full sweep (odd block then even block) in place.
pub fn mf_sweep(params: &Params, st: &mut MeanFieldState, mask: &Mask) {
    phase_odd(params, st, mask, None);
    phase_even(params, st, mask);
}

/// Run `n_iters` full sweeps from [`mf_init`], recording a [`Trace`].
pub fn mf_run(
    params: &Params,
    data: &Example,
    mask: &Mask,
    n_iters: usize,
    mode: InferenceMode,
) -> Result<(MeanFieldState, Trace)> {
    mf_run_with_r_override(params, data, mask, n_iters, mode, None)
}

/// Internal variant with a seam for substituting the multi-inference
/// reconstruction; used by tests to force `r = v`.
pub(crate) fn mf_run_with_r_override(
    params: &Params,
    data: &Example,
    mask: &Mask,
    n_iters: usize,
    mode: InferenceMode,
    r_override: Option<&dyn Fn(usize, &MeanFieldState) -> Vec<f64>>,
) -> Result<(MeanFieldState, Trace)> {
    if n_iters == 0 {
        return Err(Error::InvalidConfig("n_iters must be >= 1".into()));
    }
    validate_inputs(params, data, mask)?;
    let mut st = mf_init(params, data, mask);
    let mut trace = Trace {
        n_iters,
        mode,
        states: Vec::with_capacity(1 + 2 * n_iters),
        r_history: Vec::new(),
    };
    trace.states.push(st.clone());
    for sweep in 0..n_iters {
        let v_eff = match (mode, r_override) {
            (InferenceMode::MultiInference, Some(f)) => {
                let r = f(sweep, &st);
                let v_eff = st
                    .v
                    .iter()
                    .zip(&r)
                    .zip(&mask.visible_observed)
                    .map(|((&v, &r), &obs)| if obs { 0.5 * (v + r) } else { v })
                    .collect::<Vec<f64>>();
                st.r = Some(r);
                Some(v_eff)
            }
            _ => effective_visible_input(params, &mut st, mask, mode),
        };
        if let Some(r) = &st.r {
            if mode == InferenceMode::MultiInference {
                trace.r_history.push(r.clone());
            }
        }
        phase_odd(params, &mut st, mask, v_eff.as_deref());
        trace.states.push(st.clone());
        phase_even(params, &mut st, mask);
        trace.states.push(st.clone());
    }
    Ok((st, trace))
}

/// Evaluation-only variant: sweep until the largest mean change falls below
/// `tol` or `max_iters` is reached. Returns the state and the number of
/// sweeps executed. Training never uses this; it differentiates a
/// fixed-depth graph.
pub fn mf_run_converged(
    params: &Params,
    data: &Example,
    mask: &Mask,
    max_iters: usize,
    tol: f64,
    mode: InferenceMode,
) -> Result<(MeanFieldState, usize)> {
    if max_iters == 0 {
        return Err(Error::InvalidConfig("max_iters must be >= 1".into()));
    }
    validate_inputs(params, data, mask)?;
    let mut st = mf_init(params, data, mask);
    for sweep in 0..max_iters {
        let prev = st.clone();
        let v_eff = effective_visible_input(params, &mut st, mask, mode);
        phase_odd(params, &mut st, mask, v_eff.as_deref());
        phase_even(params, &mut st, mask);
        if st.max_abs_diff(&prev) < tol {
            return Ok((st, sweep + 1));
        }
    }
    Ok((st, max_iters))
}

/// Exact `KL(Q || P(unobserved | observed))` between the factorial state and
/// the true conditional, by enumeration. Errors when the model exceeds the
/// enumeration bound.
pub fn mf_kl_to_exact(
    params: &Params,
    data: &Example,
    mask: &Mask,
    state: &MeanFieldState,
) -> Result<f64> {
    crate::oracle::kl_factorial_to_conditional(
        params,
        data,
        mask,
        state,
        &crate::oracle::EnumBound::default(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitConfig, ModelShape};
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn tiny_shape() -> ModelShape {
        ModelShape::new(3, vec![2, 2], 2).unwrap()
    }

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

    fn random_mask(rng: &mut Rng, shape: &ModelShape) -> Mask {
        loop {
            let m = Mask::new(
                (0..shape.d).map(|_| rng.flip(0.5)).collect(),
                shape.has_label() && rng.flip(0.5),
            );
            if m.num_observed(shape.has_label()) > 0 && m.num_targets(shape.has_label()) > 0 {
                return m;
            }
        }
    }

    fn example(shape: &ModelShape, bits: &[f64], label: Option<usize>) -> Example {
        assert_eq!(bits.len(), shape.d);
        Example {
            v: bits.to_vec(),
            label,
        }
    }

    #[test]
    fn init_zero_biases_everything_unobserved_gives_half() {
        let p = Params::zeros(tiny_shape());
        let data = example(&p.shape, &[0.0, 1.0, 0.0], None);
        let mask = Mask::fully_unobserved(&p.shape);
        let st = mf_init(&p, &data, &mask);
        assert!(st.v.iter().all(|&m| m == 0.5));
        assert!(st.h.iter().all(|h| h.iter().all(|&m| m == 0.5)));
        assert!(st.y.unwrap().iter().all(|&m| m == 0.5));
    }

    #[test]
    fn init_fully_observed_equals_data() {
        let p = random_params(3, tiny_shape(), 0.5);
        let data = example(&p.shape, &[1.0, 0.0, 1.0], Some(1));
        let mask = Mask::all_observed(&p.shape);
        let st = mf_init(&p, &data, &mask);
        assert_eq!(st.v, data.v);
        assert_eq!(st.y, Some(vec![0.0, 1.0]));
    }

    #[test]
    fn init_hidden_means_are_sigmoid_of_bias() {
        let mut p = Params::zeros(tiny_shape());
        p.b_h[0] = vec![2.0, -2.0];
        let data = example(&p.shape, &[0.0, 0.0, 0.0], None);
        let st = mf_init(&p, &data, &Mask::fully_unobserved(&p.shape));
        assert_eq!(st.h[0], vec![sigmoid(2.0), sigmoid(-2.0)]);
    }

    #[test]
    fn zero_weights_reach_fixed_point_after_one_sweep() {
        let mut p = Params::zeros(tiny_shape());
        p.b_v = vec![0.3, -0.2, 0.1];
        p.b_h[0] = vec![0.5, -0.5];
        p.b_h[1] = vec![1.0, -1.0];
        p.b_y = Some(vec![0.2, -0.2]);
        let data = example(&p.shape, &[1.0, 0.0, 1.0], Some(0));
        let mask = Mask::new(vec![true, false, true], false);
        let mut st = mf_init(&p, &data, &mask);
        mf_sweep(&p, &mut st, &mask);
        let once = st.clone();
        for _ in 0..5 {
            mf_sweep(&p, &mut st, &mask);
        }
        assert_eq!(st, once);
    }

    #[test]
    fn converged_run_stops_early_and_is_deterministic() {
        let p = random_params(8, tiny_shape(), 0.6);
        let data = example(&p.shape, &[1.0, 1.0, 0.0], Some(1));
        let mask = Mask::new(vec![true, false, true], false);
        let (st, iters) = mf_run_converged(&p, &data, &mask, 500, 1e-12, InferenceMode::Standard)
            .unwrap();
        assert!(iters < 500, "never met the tolerance");
        // At the stopping point a further sweep moves nothing appreciably.
        let mut again = st.clone();
        mf_sweep(&p, &mut again, &mask);
        assert!(again.max_abs_diff(&st) < 1e-10);
        // And the whole run is a pure function of its inputs.
        let (st2, iters2) =
            mf_run_converged(&p, &data, &mask, 500, 1e-12, InferenceMode::Standard).unwrap();
        assert_eq!(st2, st);
        assert_eq!(iters2, iters);
    }

    #[test]
    fn clamped_coordinates_never_move() {
        let p = random_params(11, tiny_shape(), 1.0);
        let data = example(&p.shape, &[1.0, 0.0, 1.0], Some(1));
        let mut rng = Rng::new(4);
        for _ in 0..20 {
            let mask = random_mask(&mut rng, &p.shape);
            let (st, _) = mf_run(&p, &data, &mask, 10, InferenceMode::Standard).unwrap();
            for j in 0..p.shape.d {
                if mask.visible_observed[j] {
                    assert_eq!(st.v[j], data.v[j]);
                }
            }
            if mask.label_observed {
                assert_eq!(st.y, Some(vec![0.0, 1.0]));
            }
        }
    }

    #[test]
    fn zero_iterations_is_error() {
        let p = Params::zeros(tiny_shape());
        let data = example(&p.shape, &[0.0, 0.0, 0.0], None);
        let mask = Mask::fully_unobserved(&p.shape);
        assert!(mf_run(&p, &data, &mask, 0, InferenceMode::Standard).is_err());
    }

    #[test]
    fn multi_inference_with_r_forced_to_v_equals_standard() {
        let p = random_params(21, tiny_shape(), 0.8);
        let data = example(&p.shape, &[1.0, 0.0, 1.0], Some(0));
        let mask = Mask::new(vec![true, true, false], false);
        let (standard, _) = mf_run(&p, &data, &mask, 7, InferenceMode::Standard).unwrap();
        let data_v = data.v.clone();
        let force_v = move |_sweep: usize, _st: &MeanFieldState| data_v.clone();
        let (forced, _) = mf_run_with_r_override(
            &p,
            &data,
            &mask,
            7,
            InferenceMode::MultiInference,
            Some(&force_v),
        )
        .unwrap();
        assert_eq!(forced.v, standard.v);
        assert_eq!(forced.h, standard.h);
        assert_eq!(forced.y, standard.y);
    }

    #[test]
    fn multi_inference_r_is_sigmoid_of_visible_bias_for_zero_weights() {
        let mut p = Params::zeros(tiny_shape());
        p.b_v = vec![0.7, -0.3, 0.0];
        let data = example(&p.shape, &[1.0, 1.0, 1.0], Some(0));
        let mask = Mask::all_observed(&p.shape);
        let (_, trace) = mf_run(&p, &data, &mask, 4, InferenceMode::MultiInference).unwrap();
        let expect: Vec<f64> = p.b_v.iter().map(|&b| sigmoid(b)).collect();
        assert_eq!(trace.r_history.len(), 4);
        for r in &trace.r_history {
            assert_eq!(r, &expect);
        }
    }

    #[test]
    fn multi_inference_label_query_differs_but_stays_normalized() {
        let p = random_params(33, tiny_shape(), 1.2);
        let data = example(&p.shape, &[1.0, 0.0, 1.0], Some(0));
        let mask = Mask::classify(&p.shape);
        let (std_st, _) = mf_run(&p, &data, &mask, 6, InferenceMode::Standard).unwrap();
        let (mi_st, _) = mf_run(&p, &data, &mask, 6, InferenceMode::MultiInference).unwrap();
        let ys = std_st.y.unwrap();
        let ym = mi_st.y.unwrap();
        assert!(ys.iter().zip(&ym).any(|(a, b)| (a - b).abs() > 1e-9));
        for y in [&ys, &ym] {
            assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(y.iter().all(|&p| (0.0..=1.0).contains(&p)));
        }
    }

    #[test]
    fn trace_replay_is_bit_exact() {
        let p = random_params(55, tiny_shape(), 0.9);
        let data = example(&p.shape, &[0.0, 1.0, 1.0], Some(1));
        let mask = Mask::new(vec![false, true, true], false);
        for mode in [InferenceMode::Standard, InferenceMode::MultiInference] {
            let (st, trace) = mf_run(&p, &data, &mask, 5, mode).unwrap();
            let replayed = trace.replay(&p, &data, &mask);
            assert_eq!(replayed.v, st.v);
            assert_eq!(replayed.h, st.h);
            assert_eq!(replayed.y, st.y);
            assert_eq!(trace.final_state().v, st.v);
        }
    }

    #[test]
    fn single_hidden_layer_blocks() {
        // L = 1: the label shares the even block with v; a sweep must still
        // leave clamped data alone and produce valid means.
        let shape = ModelShape::new(4, vec![3], 3).unwrap();
        let p = random_params(70, shape, 0.8);
        let data = example(&p.shape, &[1.0, 0.0, 0.0, 1.0], Some(2));
        let mask = Mask::classify(&p.shape);
        let (st, _) = mf_run(&p, &data, &mask, 8, InferenceMode::Standard).unwrap();
        assert_eq!(st.v, data.v);
        let y = st.y.unwrap();
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn means_stay_in_unit_interval_under_large_weights(
            seed in 0u64..1000,
            scale in 0.1..50.0f64,
        ) {
            let p = random_params(seed, tiny_shape(), scale);
            let data = Example { v: vec![1.0, 0.0, 1.0], label: Some(0) };
            let mut rng = Rng::new(seed ^ 0xabcd);
            let mask = random_mask(&mut rng, &p.shape);
            let (st, _) = mf_run(&p, &data, &mask, 5, InferenceMode::Standard).unwrap();
            prop_assert!(st.v.iter().all(|&m| (0.0..=1.0).contains(&m)));
            prop_assert!(st.h.iter().all(|h| h.iter().all(|&m| (0.0..=1.0).contains(&m))));
            let y = st.y.unwrap();
            prop_assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
