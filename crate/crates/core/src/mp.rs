//! Multi-prediction training: the masked prediction objective, exact
//! reverse-mode differentiation through the unrolled mean field graph, the
//! regularizers, and the SGD loop.
//!
//! For each example a random mask splits the visibles and the label into
//! observed inputs and prediction targets. A fixed number of mean field
//! sweeps infers the targets from the inputs; the loss is the negative log
//! probability the factorial posterior assigns to the targets:
//! cross-entropy of the unobserved visibles plus cross-entropy of the label
//! when it is hidden. Because the mask is resampled every visit, one set of
//! parameters is trained to answer every conditional query at once.
//!
//! The gradient is not an approximation: [`mp_grad`] walks the recorded
//! [`Trace`] backward half-sweep by half-sweep, treating each block update
//! as an ordinary differentiable layer whose weights are shared across the
//! unrolling. The finite-difference tests in this module hold the analytic
//! gradient to `1e-5` relative error, sparsity and centering included.
//!
//! Reductions over a batch are always performed sequentially in example
//! order (only the forward passes fan out to threads), so results are
//! bit-identical regardless of thread count.

use crate::data::{Dataset, Example};
use crate::inference::{mf_run, InferenceMode, Mask, MeanFieldState, Trace};
use crate::model::{
    centered, Gradient, ModelShape, Params,
};
use crate::numerics::{sigmoid_deriv_from_output, Rng};
use crate::{Error, Result};

/// Floor/ceiling applied to predicted probabilities inside logarithms.
const PROB_CLIP: f64 = 1e-12;

/// Configuration of the multi-prediction objective.
#[derive(Debug, Clone)]
pub struct MpConfig {
    /// Mean field sweeps unrolled per prediction (the depth of the
    /// differentiated graph).
    pub n_iters: usize,
    pub sparsity: Option<SparsityConfig>,
}

impl Default for MpConfig {
    fn default() -> Self {
        MpConfig {
            n_iters: 5,
            sparsity: None,
        }
    }
}

/// Dead-zone sparsity penalty on the batch-mean final hidden activations:
/// `weight * sum_j max(|mean_j - target| - tolerance, 0)` over every hidden
/// unit of every layer. Units inside the tolerance band feel no pressure.
#[derive(Debug, Clone)]
pub struct SparsityConfig {
    pub target: f64,
    pub tolerance: f64,
    pub weight: f64,
}

/// Draw a mask: each visible is observed with probability 1/2, as is the
/// label when the model has one. Degenerate draws (no observed variable, or
/// no prediction target) are rejected and redrawn; after 1000 rejections
/// the shape admits no valid mask and an error is returned.
pub fn sample_mask(shape: &ModelShape, rng: &mut Rng) -> Result<Mask> {
    sample_mask_for(shape, shape.has_label(), rng)
}

/// Variant that never observes the label, for unlabeled examples under a
/// labeled model.
fn sample_mask_for(shape: &ModelShape, may_observe_label: bool, rng: &mut Rng) -> Result<Mask> {
    const MAX_ATTEMPTS: usize = 1000;
    for _ in 0..MAX_ATTEMPTS {
        let mask = Mask::new(
            (0..shape.d).map(|_| rng.flip(0.5)).collect(),
            may_observe_label && rng.flip(0.5),
        );
        if mask.num_observed(shape.has_label()) > 0 && mask.num_targets(shape.has_label()) > 0 {
            return Ok(mask);
        }
    }
    Err(Error::NoValidMask {
        attempts: MAX_ATTEMPTS,
    })
}

/// `-[t ln p + (1-t) ln(1-p)]` with `p` clipped into
/// `[PROB_CLIP, 1 - PROB_CLIP]`.
fn bce(t: f64, p: f64) -> f64 {
    let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
}

/// Derivative of [`bce`] with respect to `p`; the clip passes gradients
/// straight through (it only guards the logarithms).
fn bce_dp(t: f64, p: f64) -> f64 {
    let p = p.clamp(PROB_CLIP, 1.0 - PROB_CLIP);
    -t / p + (1.0 - t) / (1.0 - p)
}

/// Prediction loss of one inferred state: cross-entropy of every unobserved
/// visible, plus cross-entropy of the label when it is a target and the
/// example carries one.
fn example_loss(data: &Example, mask: &Mask, state: &MeanFieldState) -> f64 {
    let mut loss = 0.0;
    for (j, &obs) in mask.visible_observed.iter().enumerate() {
        if !obs {
            loss += bce(data.v[j], state.v[j]);
        }
    }
    if !mask.label_observed {
        if let (Some(c), Some(y)) = (data.label, &state.y) {
            loss += -y[c].clamp(PROB_CLIP, 1.0 - PROB_CLIP).ln();
        }
    }
    loss
}

/// Forward pass over a batch: one trace per example (threaded), plus the
/// mean prediction loss.
fn forward_batch(
    params: &Params,
    batch: &[(Example, Mask)],
    n_iters: usize,
) -> Result<(Vec<Trace>, f64)> {
    let results = crate::parallel::map_indexed(batch.len(), |i| {
        let (ex, mask) = &batch[i];
        mf_run(params, ex, mask, n_iters, InferenceMode::Standard)
    });
    let mut traces = Vec::with_capacity(batch.len());
    let mut loss = 0.0;
    for (r, (ex, mask)) in results.into_iter().zip(batch) {
        let (state, trace) = r?;
        loss += example_loss(ex, mask, &state);
        traces.push(trace);
    }
    Ok((traces, loss / batch.len() as f64))
}

/// Batch-mean final hidden activations, per layer.
fn batch_mean_hidden(shape: &ModelShape, traces: &[Trace]) -> Vec<Vec<f64>> {
    let mut mean: Vec<Vec<f64>> = shape.layer_sizes.iter().map(|&n| vec![0.0; n]).collect();
    for t in traces {
        for (acc, h) in mean.iter_mut().zip(&t.final_state().h) {
            crate::numerics::axpy(1.0 / traces.len() as f64, h, acc);
        }
    }
    mean
}

/// Sparsity penalty value and its derivative with respect to each
/// batch-mean activation.
fn sparsity_penalty(cfg: &SparsityConfig, mean_h: &[Vec<f64>]) -> (f64, Vec<Vec<f64>>) {
    let mut value = 0.0;
    let d_mean: Vec<Vec<f64>> = mean_h
        .iter()
        .map(|layer| {
            layer
                .iter()
                .map(|&m| {
                    let dev = m - cfg.target;
                    if dev.abs() > cfg.tolerance {
                        value += dev.abs() - cfg.tolerance;
                        dev.signum()
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect();
    (
        cfg.weight * value,
        d_mean
            .into_iter()
            .map(|l| l.into_iter().map(|g| g * cfg.weight).collect())
            .collect(),
    )
}

/// Multi-prediction loss of a batch with fixed masks: mean example loss
/// plus the sparsity penalty.
pub fn mp_loss(params: &Params, batch: &[(Example, Mask)], cfg: &MpConfig) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (traces, base) = forward_batch(params, batch, cfg.n_iters)?;
    let penalty = match &cfg.sparsity {
        Some(s) => sparsity_penalty(s, &batch_mean_hidden(&params.shape, &traces)).0,
        None => 0.0,
    };
    Ok(base + penalty)
}

/// Adjoint buffers mirroring a mean field state: the partial derivative of
/// the batch loss with respect to each group's current value.
struct Adjoints {
    v: Vec<f64>,
    h: Vec<Vec<f64>>,
    y: Option<Vec<f64>>,
}

impl Adjoints {
    fn zeros(shape: &ModelShape) -> Self {
        Adjoints {
            v: vec![0.0; shape.d],
            h: shape.layer_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            y: if shape.has_label() {
                Some(vec![0.0; shape.k])
            } else {
                None
            },
        }
    }
}

/// `d(softmax(a))^T dy` pulled back to the pre-activations:
/// `da_c = y_c (dy_c - sum_i y_i dy_i)`.
fn softmax_backward(y: &[f64], dy: &[f64]) -> Vec<f64> {
    let inner: f64 = y.iter().zip(dy).map(|(a, b)| a * b).sum();
    y.iter().zip(dy).map(|(yi, di)| yi * (di - inner)).collect()
}

/// Undo one odd half-sweep: consume the adjoints of the groups it wrote
/// (odd hidden layers, the label when it sits in the odd block), accumulate
/// parameter gradients, and route input adjoints to the pre-update state.
fn backward_phase_odd(
    params: &Params,
    mask: &Mask,
    m_prev: &MeanFieldState,
    m_a: &MeanFieldState,
    adj: &mut Adjoints,
    grad: &mut Gradient,
) {
    let nl = params.num_layers();
    if params.shape.has_label()
        && crate::inference::label_in_odd_block(nl)
        && !mask.label_observed
    {
        let y_out = m_a.y.as_ref().unwrap();
        let da = softmax_backward(y_out, adj.y.as_ref().unwrap());
        let h_top_c = centered(&m_prev.h[nl - 1], params.beta_h(nl - 1));
        grad.wy.as_mut().unwrap().add_outer(&h_top_c, &da, 1.0);
        crate::numerics::axpy(1.0, &da, grad.b_y.as_mut().unwrap());
        let up = params.wy.as_ref().unwrap().matvec(&da);
        crate::numerics::axpy(1.0, &up, &mut adj.h[nl - 1]);
        adj.y.as_mut().unwrap().iter_mut().for_each(|x| *x = 0.0);
    }
    for l in (0..nl).rev().filter(|&l| crate::inference::layer_in_odd_block(l)) {
        let out = &m_a.h[l];
        let da: Vec<f64> = adj.h[l]
            .iter()
            .zip(out)
            .map(|(&d, &m)| d * sigmoid_deriv_from_output(m))
            .collect();
        // Below input.
        if l == 0 {
            let v_c = centered(&m_prev.v, params.beta_v());
            grad.w[0].add_outer(&v_c, &da, 1.0);
            let down = params.w[0].matvec(&da);
            crate::numerics::axpy(1.0, &down, &mut adj.v);
        } else {
            let below_c = centered(&m_prev.h[l - 1], params.beta_h(l - 1));
            grad.w[l].add_outer(&below_c, &da, 1.0);
            let down = params.w[l].matvec(&da);
            crate::numerics::axpy(1.0, &down, &mut adj.h[l - 1]);
        }
        // Above input.
        if l + 1 < nl {
            let above_c = centered(&m_prev.h[l + 1], params.beta_h(l + 1));
            grad.w[l + 1].add_outer(&da, &above_c, 1.0);
            let up = params.w[l + 1].matvec_t(&da);
            crate::numerics::axpy(1.0, &up, &mut adj.h[l + 1]);
        } else if params.shape.has_label() {
            let y_c = centered(m_prev.y.as_ref().unwrap(), params.beta_y());
            grad.wy.as_mut().unwrap().add_outer(&da, &y_c, 1.0);
            let up = params.wy.as_ref().unwrap().matvec_t(&da);
            crate::numerics::axpy(1.0, &up, adj.y.as_mut().unwrap());
        }
        crate::numerics::axpy(1.0, &da, &mut grad.b_h[l]);
        adj.h[l].iter_mut().for_each(|x| *x = 0.0);
    }
}

/// Undo one even half-sweep (unobserved visibles, even hidden layers, the
/// label when it sits in the even block).
fn backward_phase_even(
    params: &Params,
    mask: &Mask,
    m_a: &MeanFieldState,
    m_b: &MeanFieldState,
    adj: &mut Adjoints,
    grad: &mut Gradient,
) {
    let nl = params.num_layers();
    if params.shape.has_label()
        && !crate::inference::label_in_odd_block(nl)
        && !mask.label_observed
    {
        let y_out = m_b.y.as_ref().unwrap();
        let da = softmax_backward(y_out, adj.y.as_ref().unwrap());
        let h_top_c = centered(&m_a.h[nl - 1], params.beta_h(nl - 1));
        grad.wy.as_mut().unwrap().add_outer(&h_top_c, &da, 1.0);
        crate::numerics::axpy(1.0, &da, grad.b_y.as_mut().unwrap());
        let up = params.wy.as_ref().unwrap().matvec(&da);
        crate::numerics::axpy(1.0, &up, &mut adj.h[nl - 1]);
        adj.y.as_mut().unwrap().iter_mut().for_each(|x| *x = 0.0);
    }
    for l in (0..nl).rev().filter(|&l| !crate::inference::layer_in_odd_block(l)) {
        let out = &m_b.h[l];
        let da: Vec<f64> = adj.h[l]
            .iter()
            .zip(out)
            .map(|(&d, &m)| d * sigmoid_deriv_from_output(m))
            .collect();
        let below_c = centered(&m_a.h[l - 1], params.beta_h(l - 1));
        grad.w[l].add_outer(&below_c, &da, 1.0);
        let down = params.w[l].matvec(&da);
        crate::numerics::axpy(1.0, &down, &mut adj.h[l - 1]);
        if l + 1 < nl {
            let above_c = centered(&m_a.h[l + 1], params.beta_h(l + 1));
            grad.w[l + 1].add_outer(&da, &above_c, 1.0);
            let up = params.w[l + 1].matvec_t(&da);
            crate::numerics::axpy(1.0, &up, &mut adj.h[l + 1]);
        } else if params.shape.has_label() {
            let y_c = centered(m_a.y.as_ref().unwrap(), params.beta_y());
            grad.wy.as_mut().unwrap().add_outer(&da, &y_c, 1.0);
            let up = params.wy.as_ref().unwrap().matvec_t(&da);
            crate::numerics::axpy(1.0, &up, adj.y.as_mut().unwrap());
        }
        crate::numerics::axpy(1.0, &da, &mut grad.b_h[l]);
        adj.h[l].iter_mut().for_each(|x| *x = 0.0);
    }
    // Unobserved visibles, updated from the post-odd h^(1).
    let da_v: Vec<f64> = (0..params.shape.d)
        .map(|j| {
            if mask.visible_observed[j] {
                0.0
            } else {
                adj.v[j] * sigmoid_deriv_from_output(m_b.v[j])
            }
        })
        .collect();
    let h1_c = centered(&m_a.h[0], params.beta_h(0));
    grad.w[0].add_outer(&da_v, &h1_c, 1.0);
    crate::numerics::axpy(1.0, &da_v, &mut grad.b_v);
    let up = params.w[0].matvec_t(&da_v);
    crate::numerics::axpy(1.0, &up, &mut adj.h[0]);
    for (j, &obs) in mask.visible_observed.iter().enumerate() {
        if !obs {
            adj.v[j] = 0.0;
        }
    }
}

/// Reverse-mode walk over one example's trace. `adj` enters seeded with the
/// loss derivatives at the final state and finishes absorbed into the bias
/// gradients through the initialization (`sigmoid(b)` / `softmax(b_y)` for
/// unobserved groups).
fn backward_example(
    params: &Params,
    mask: &Mask,
    trace: &Trace,
    mut adj: Adjoints,
    grad: &mut Gradient,
) {
    assert!(
        trace.mode == InferenceMode::Standard,
        "only standard-mode inference is differentiated"
    );
    for s in (0..trace.n_iters).rev() {
        let m_prev = &trace.states[2 * s];
        let m_a = &trace.states[2 * s + 1];
        let m_b = &trace.states[2 * s + 2];
        backward_phase_even(params, mask, m_a, m_b, &mut adj, grad);
        backward_phase_odd(params, mask, m_prev, m_a, &mut adj, grad);
    }
    // Initialization: unobserved groups came from their own biases.
    let m0 = &trace.states[0];
    for (j, &obs) in mask.visible_observed.iter().enumerate() {
        if !obs {
            grad.b_v[j] += adj.v[j] * sigmoid_deriv_from_output(m0.v[j]);
        }
    }
    for l in 0..params.num_layers() {
        for (g, (&d, &m)) in grad.b_h[l]
            .iter_mut()
            .zip(adj.h[l].iter().zip(&m0.h[l]))
        {
            *g += d * sigmoid_deriv_from_output(m);
        }
    }
    if params.shape.has_label() && !mask.label_observed {
        let da = softmax_backward(m0.y.as_ref().unwrap(), adj.y.as_ref().unwrap());
        crate::numerics::axpy(1.0, &da, grad.b_y.as_mut().unwrap());
    }
}

/// Loss and exact gradient of the multi-prediction objective on a batch
/// with fixed masks. Errors if any gradient entry is non-finite.
pub fn mp_grad(
    params: &Params,
    batch: &[(Example, Mask)],
    cfg: &MpConfig,
) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let shape = &params.shape;
    let (traces, base_loss) = forward_batch(params, batch, cfg.n_iters)?;
    let inv_b = 1.0 / batch.len() as f64;

    // Sparsity couples examples through the batch mean; compute its value
    // and the per-unit derivative once, then fold 1/B into each example's
    // hidden seed below.
    let (penalty, d_mean_h) = match &cfg.sparsity {
        Some(s) => {
            let (p, d) = sparsity_penalty(s, &batch_mean_hidden(shape, &traces));
            (p, Some(d))
        }
        None => (0.0, None),
    };

    let mut grad = Gradient::zeros(shape);
    for ((ex, mask), trace) in batch.iter().zip(&traces) {
        let final_state = trace.final_state();
        let mut adj = Adjoints::zeros(shape);
        for (j, &obs) in mask.visible_observed.iter().enumerate() {
            if !obs {
                adj.v[j] = inv_b * bce_dp(ex.v[j], final_state.v[j]);
            }
        }
        if !mask.label_observed {
            if let (Some(c), Some(y)) = (ex.label, &final_state.y) {
                adj.y.as_mut().unwrap()[c] =
                    inv_b * (-1.0 / y[c].clamp(PROB_CLIP, 1.0 - PROB_CLIP));
            }
        }
        if let Some(dm) = &d_mean_h {
            for (al, dl) in adj.h.iter_mut().zip(dm) {
                crate::numerics::axpy(inv_b, dl, al);
            }
        }
        backward_example(params, mask, trace, adj, &mut grad);
    }

    if let Some(tensor) = grad.find_non_finite(shape) {
        return Err(Error::NonFiniteGradient { tensor });
    }
    Ok((base_loss + penalty, grad))
}

/// Monte Carlo estimate of the mask-averaged prediction objective: for each
/// example, draw `n_mask_samples` masks and average the prediction loss
/// (no sparsity term). Deterministic in `seed`.
pub fn mp_objective_estimate(
    params: &Params,
    examples: &[Example],
    n_mask_samples: usize,
    n_iters: usize,
    seed: u64,
) -> Result<f64> {
    if examples.is_empty() || n_mask_samples == 0 {
        return Err(Error::EmptyInput);
    }
    let shape = &params.shape;
    let mut rng = Rng::new(seed);
    let mut total = 0.0;
    for ex in examples {
        for _ in 0..n_mask_samples {
            let mask = sample_mask_for(shape, shape.has_label() && ex.label.is_some(), &mut rng)?;
            let (state, _) = mf_run(params, ex, &mask, n_iters, InferenceMode::Standard)?;
            total += example_loss(ex, &mask, &state);
        }
    }
    Ok(total / (examples.len() * n_mask_samples) as f64)
}

/// Exact mask-averaged prediction objective by enumerating every valid mask
/// per example (uniform over valid masks, matching [`sample_mask`]'s
/// rejection scheme). Only feasible for small `d`; the mask space is capped
/// at 2^20.
pub fn exact_mp_objective(params: &Params, examples: &[Example], n_iters: usize) -> Result<f64> {
    const MASK_BITS_LIMIT: u32 = 20;
    if examples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let shape = &params.shape;
    let mut total = 0.0;
    for ex in examples {
        let label_maskable = shape.has_label() && ex.label.is_some();
        let bits = shape.d + usize::from(label_maskable);
        if bits as u32 > MASK_BITS_LIMIT {
            return Err(Error::EnumerationBoundExceeded {
                states: 1u128.checked_shl(bits as u32).unwrap_or(u128::MAX),
                bound_log2: MASK_BITS_LIMIT,
            });
        }
        let mut sum = 0.0;
        let mut count = 0usize;
        for code in 0u64..(1u64 << bits) {
            let visible_observed: Vec<bool> =
                (0..shape.d).map(|j| (code >> j) & 1 == 1).collect();
            let label_observed = label_maskable && (code >> shape.d) & 1 == 1;
            let mask = Mask::new(visible_observed, label_observed);
            if mask.num_observed(shape.has_label()) == 0 || mask.num_targets(shape.has_label()) == 0
            {
                continue;
            }
            let (state, _) = mf_run(params, ex, &mask, n_iters, InferenceMode::Standard)?;
            sum += example_loss(ex, &mask, &state);
            count += 1;
        }
        total += sum / count as f64;
    }
    Ok(total / examples.len() as f64)
}

/// Rescale every weight-matrix column whose L2 norm exceeds `cap` back onto
/// the cap. Biases and offsets are untouched; columns within the cap are
/// untouched bitwise.
pub fn max_norm_project(params: &mut Params, cap: f64) {
    let clip = |m: &mut crate::numerics::Matrix| {
        for c in 0..m.cols() {
            let norm = m.col_norm(c);
            if norm > cap {
                m.scale_col(c, cap / norm);
            }
        }
    };
    for w in &mut params.w {
        clip(w);
    }
    if let Some(wy) = &mut params.wy {
        clip(wy);
    }
}

/// One SGD-with-momentum update:
/// `velocity = momentum * velocity - lr * grad; params += velocity`,
/// followed by the max-norm projection when a cap is configured.
pub fn sgd_step(
    params: &mut Params,
    grad: &Gradient,
    velocity: &mut Gradient,
    lr: f64,
    momentum: f64,
    max_col_norm: Option<f64>,
) {
    velocity.scale(momentum);
    velocity.add_scaled(grad, -lr);
    params.add_scaled_gradient(velocity, 1.0);
    if let Some(cap) = max_col_norm {
        max_norm_project(params, cap);
    }
}

/// Optimizer schedule shared by both trainers.
#[derive(Debug, Clone)]
pub struct SgdConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub max_col_norm: Option<f64>,
    /// Stop after this many updates regardless of epochs (handy for fixed
    /// step-count experiments).
    pub max_steps: Option<usize>,
    pub shuffle: bool,
    pub early_stop: Option<EarlyStopConfig>,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            epochs: 10,
            batch_size: 100,
            lr: 0.1,
            momentum: 0.5,
            max_col_norm: Some(4.0),
            max_steps: None,
            shuffle: true,
            early_stop: None,
        }
    }
}

/// Stop when the epoch loss has not improved by at least `min_delta` for
/// `patience` consecutive epochs.
#[derive(Debug, Clone)]
pub struct EarlyStopConfig {
    pub patience: usize,
    pub min_delta: f64,
}

/// Mutable optimizer state, kept outside the loop so callers can checkpoint
/// and resume mid-run.
#[derive(Debug, Clone)]
pub struct TrainerState {
    pub velocity: Gradient,
    pub epoch: usize,
    pub step: usize,
    pub best_loss: f64,
    pub epochs_since_best: usize,
}

impl TrainerState {
    pub fn new(shape: &ModelShape) -> Self {
        TrainerState {
            velocity: Gradient::zeros(shape),
            epoch: 0,
            step: 0,
            best_loss: f64::INFINITY,
            epochs_since_best: 0,
        }
    }

    /// Record an epoch loss, updating the best-so-far bookkeeping; returns
    /// true when early stopping is configured and patience has run out.
    pub fn note_epoch_loss(&mut self, loss: f64, cfg: &Option<EarlyStopConfig>) -> bool {
        let min_delta = cfg.as_ref().map_or(0.0, |es| es.min_delta);
        if loss < self.best_loss - min_delta {
            self.best_loss = loss;
            self.epochs_since_best = 0;
            false
        } else {
            self.epochs_since_best += 1;
            cfg.as_ref()
                .is_some_and(|es| self.epochs_since_best >= es.patience)
        }
    }
}

/// Per-epoch summary handed to metrics consumers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub batches: usize,
    pub steps_total: usize,
}

/// Outcome of a full training run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainReport {
    pub epochs_run: usize,
    pub final_loss: f64,
    pub steps: usize,
    pub stopped_early: bool,
}

/// Fisher-Yates shuffle of example indices, one uniform draw per swap.
pub(crate) fn shuffled_indices(n: usize, shuffle: bool, rng: &mut Rng) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    if shuffle {
        for i in 0..n.saturating_sub(1) {
            let j = i + rng.below(n - i);
            idx.swap(i, j);
        }
    }
    idx
}

/// One epoch of multi-prediction SGD: shuffle, sample one mask per example
/// visit, take a step per batch. Returns the epoch's mean batch loss.
pub fn train_epoch_mp(
    params: &mut Params,
    data: &Dataset,
    sgd: &SgdConfig,
    mp: &MpConfig,
    rng: &mut Rng,
    state: &mut TrainerState,
) -> Result<EpochStats> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if sgd.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }
    let shape = params.shape.clone();
    let idx = shuffled_indices(data.len(), sgd.shuffle, rng);
    let mut loss_sum = 0.0;
    let mut batches = 0usize;
    for chunk in idx.chunks(sgd.batch_size) {
        if let Some(cap) = sgd.max_steps {
            if state.step >= cap {
                break;
            }
        }
        let batch: Vec<(Example, Mask)> = chunk
            .iter()
            .map(|&i| {
                let ex = data.examples[i].clone();
                let mask =
                    sample_mask_for(&shape, shape.has_label() && ex.label.is_some(), rng)?;
                Ok((ex, mask))
            })
            .collect::<Result<_>>()?;
        let (loss, grad) = mp_grad(params, &batch, mp)?;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step: state.step });
        }
        sgd_step(
            params,
            &grad,
            &mut state.velocity,
            sgd.lr,
            sgd.momentum,
            sgd.max_col_norm,
        );
        state.step += 1;
        loss_sum += loss;
        batches += 1;
    }
    state.epoch += 1;
    Ok(EpochStats {
        epoch: state.epoch,
        mean_loss: if batches > 0 { loss_sum / batches as f64 } else { f64::NAN },
        batches,
        steps_total: state.step,
    })
}

/// Full multi-prediction training loop with optional early stopping; the
/// callback sees every epoch's stats (pass `|_| {}` to ignore them).
pub fn train_mp(
    params: &mut Params,
    data: &Dataset,
    sgd: &SgdConfig,
    mp: &MpConfig,
    rng: &mut Rng,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainReport> {
    let mut state = TrainerState::new(&params.shape);
    let mut last = f64::NAN;
    let mut stopped_early = false;
    let mut epochs_run = 0;
    for _ in 0..sgd.epochs {
        let stats = train_epoch_mp(params, data, sgd, mp, rng, &mut state)?;
        if stats.batches == 0 {
            break; // max_steps exhausted before this epoch
        }
        epochs_run += 1;
        last = stats.mean_loss;
        on_epoch(&stats);
        if state.note_epoch_loss(stats.mean_loss, &sgd.early_stop) {
            stopped_early = true;
            break;
        }
        if sgd.max_steps.is_some_and(|cap| state.step >= cap) {
            break;
        }
    }
    Ok(TrainReport {
        epochs_run,
        final_loss: last,
        steps: state.step,
        stopped_early,
    })
}
