//! Generative training baseline: stochastic maximum likelihood with
//! persistent contrastive divergence.
//!
//! The gradient of the log likelihood splits into a data term and a model
//! term. The data term is computed per example by clamping the observed
//! variables (all visibles, plus the label when the example has one) and
//! running mean field over the hidden layers. The model term is estimated
//! by a pool of persistent block Gibbs chains that survive across updates,
//! advanced a few sweeps per gradient step.
//!
//! Chain statistics come in two flavors: raw binary samples, or
//! Rao-Blackwellized values that replace one endpoint of every edge (and
//! every unit for the bias terms) with its exact conditional mean given the
//! opposite block. Both are unbiased at stationarity; the conditioned
//! version has strictly smaller variance, which the tests verify against
//! the enumeration oracle.
//!
//! Each chain owns a forked RNG, so advancing the pool is an independent
//! per-chain computation: it fans out to threads while remaining
//! bit-reproducible for a fixed seed regardless of thread count.

use crate::data::{Dataset, Example};
use crate::inference::{mf_run, InferenceMode, Mask, MeanFieldState};
use crate::model::{
    accumulate_bias_stats, accumulate_edge_stats, energy_of_values, preact_hidden, preact_label,
    preact_visible, FullState, Gradient, ModelShape, Params,
};
use crate::mp::{sgd_step, shuffled_indices, EpochStats, SgdConfig, TrainReport, TrainerState};
use crate::numerics::{sigmoid, softmax, Rng};
use crate::{Error, Result};

/// How chain states are converted into sufficient statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StatsMode {
    /// Use the binary samples directly.
    Plain,
    /// Replace each block with its conditional means given the opposite
    /// block's samples; every edge then pairs one sample with one mean.
    RaoBlackwell,
}

/// Configuration of the persistent-chain estimator.
#[derive(Debug, Clone)]
pub struct PcdConfig {
    /// Number of persistent Gibbs chains.
    pub n_chains: usize,
    /// Full Gibbs sweeps applied to every chain per gradient update.
    pub gibbs_steps: usize,
    /// Mean field sweeps for the clamped (data) phase.
    pub mf_iters: usize,
    pub stats: StatsMode,
}

impl Default for PcdConfig {
    fn default() -> Self {
        PcdConfig {
            n_chains: 100,
            gibbs_steps: 5,
            mf_iters: 10,
            stats: StatsMode::RaoBlackwell,
        }
    }
}

impl PcdConfig {
    fn validate(&self) -> Result<()> {
        if self.n_chains == 0 {
            return Err(Error::InvalidConfig("n_chains must be >= 1".into()));
        }
        if self.gibbs_steps == 0 {
            return Err(Error::InvalidConfig("gibbs_steps must be >= 1".into()));
        }
        if self.mf_iters == 0 {
            return Err(Error::InvalidConfig("mf_iters must be >= 1".into()));
        }
        Ok(())
    }
}

/// Persistent sampler state: one binary configuration and one private RNG
/// per chain.
#[derive(Debug, Clone)]
pub struct ChainPool {
    pub states: Vec<FullState>,
    pub rngs: Vec<Rng>,
}

impl ChainPool {
    /// Fresh pool with uniform random states; each chain's RNG is forked
    /// from `rng` so the pool's trajectory is a pure function of the seed.
    pub fn new(shape: &ModelShape, n_chains: usize, rng: &mut Rng) -> Self {
        let mut states = Vec::with_capacity(n_chains);
        let mut rngs = Vec::with_capacity(n_chains);
        for _ in 0..n_chains {
            let mut r = rng.child();
            let mut s = FullState::zeros(shape);
            for x in &mut s.v {
                *x = f64::from(r.flip(0.5));
            }
            for layer in &mut s.h {
                for x in layer {
                    *x = f64::from(r.flip(0.5));
                }
            }
            if shape.has_label() {
                s.y = Some(r.below(shape.k));
            }
            states.push(s);
            rngs.push(r);
        }
        ChainPool { states, rngs }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Advance every chain `n_sweeps` full Gibbs sweeps. Chains are
    /// independent, so this fans out across threads; results are identical
    /// for any thread count.
    pub fn advance(&mut self, params: &Params, n_sweeps: usize) {
        let updated = crate::parallel::map_indexed(self.states.len(), |i| {
            let mut st = self.states[i].clone();
            let mut rng = self.rngs[i].clone();
            for _ in 0..n_sweeps {
                gibbs_sweep(params, &mut st, None, &mut rng);
            }
            (st, rng)
        });
        for (i, (st, rng)) in updated.into_iter().enumerate() {
            self.states[i] = st;
            self.rngs[i] = rng;
        }
    }
}

/// One full block Gibbs sweep in place: resample the odd block (odd hidden
/// layers, plus the label when it couples to an even top layer), then the
/// even block (visibles, even hidden layers, the label otherwise).
///
/// With `clamp = Some((example, mask))` the masked-observed visibles and
/// label keep their current values and consume no randomness; hidden units
/// are always resampled. The caller is responsible for having loaded the
/// clamped values into `st` beforehand.
pub fn gibbs_sweep(
    params: &Params,
    st: &mut FullState,
    clamp: Option<(&Example, &Mask)>,
    rng: &mut Rng,
) {
    let nl = params.num_layers();
    let shape = &params.shape;
    let label_clamped = clamp.is_some_and(|(_, m)| m.label_observed);
    let y_vals = st.y_onehot(shape.k);

    // Odd block.
    for l in (0..nl).filter(|&l| crate::inference::layer_in_odd_block(l)) {
        let below: &[f64] = if l == 0 { &st.v } else { &st.h[l - 1] };
        let above: Option<&[f64]> = if l + 1 < nl {
            Some(&st.h[l + 1])
        } else {
            y_vals.as_deref()
        };
        let pre = preact_hidden(params, l, below, above);
        for (x, a) in st.h[l].iter_mut().zip(pre) {
            *x = f64::from(rng.bernoulli(sigmoid(a)).unwrap());
        }
    }
    if shape.has_label() && crate::inference::label_in_odd_block(nl) && !label_clamped {
        let probs = softmax(&preact_label(params, &st.h[nl - 1])).unwrap();
        st.y = Some(rng.categorical(&probs));
    }

    // Even block.
    let pre_v = preact_visible(params, &st.h[0]);
    let observed = clamp.map(|(_, m)| m.visible_observed.as_slice());
    for (j, a) in pre_v.into_iter().enumerate() {
        if observed.is_some_and(|o| o[j]) {
            continue;
        }
        st.v[j] = f64::from(rng.bernoulli(sigmoid(a)).unwrap());
    }
    let y_vals = st.y_onehot(shape.k);
    for l in (0..nl).filter(|&l| !crate::inference::layer_in_odd_block(l)) {
        let above: Option<&[f64]> = if l + 1 < nl {
            Some(&st.h[l + 1])
        } else {
            y_vals.as_deref()
        };
        let pre = preact_hidden(params, l, &st.h[l - 1], above);
        for (x, a) in st.h[l].iter_mut().zip(pre) {
            *x = f64::from(rng.bernoulli(sigmoid(a)).unwrap());
        }
    }
    if shape.has_label() && !crate::inference::label_in_odd_block(nl) && !label_clamped {
        let probs = softmax(&preact_label(params, &st.h[nl - 1])).unwrap();
        st.y = Some(rng.categorical(&probs));
    }
}

/// Lift a binary chain state into a mean field state (labels become
/// one-hot vectors) so the inference phase updates can compute conditional
/// means in place.
fn lift(shape: &ModelShape, s: &FullState) -> MeanFieldState {
    MeanFieldState {
        v: s.v.clone(),
        h: s.h.clone(),
        y: s.y_onehot(shape.k),
        r: None,
    }
}

/// Average sufficient statistics of a set of chain states, in the
/// requested mode. Weights sum to one across chains.
pub fn chain_stats(params: &Params, states: &[FullState], mode: StatsMode) -> Result<Gradient> {
    if states.is_empty() {
        return Err(Error::EmptyInput);
    }
    let shape = &params.shape;
    let w = 1.0 / states.len() as f64;
    let mut grad = Gradient::zeros(shape);
    let free = Mask::fully_unobserved(shape);
    for s in states {
        match mode {
            StatsMode::Plain => {
                let y1 = s.y_onehot(shape.k);
                accumulate_edge_stats(params, &s.v, &s.h, y1.as_deref(), w, &mut grad);
                accumulate_bias_stats(params, &s.v, &s.h, y1.as_deref(), w, &mut grad);
            }
            StatsMode::RaoBlackwell => {
                // Odd groups replaced by their means given the even
                // samples: every edge pairs one sample with one mean, and
                // the conditional expectation factorizes across the edge.
                let mut odd = lift(shape, s);
                crate::inference::phase_odd(params, &mut odd, &free, None);
                accumulate_edge_stats(params, &odd.v, &odd.h, odd.y.as_deref(), w, &mut grad);
                // Bias terms take each unit's own conditional mean given
                // the opposite block.
                let mut even = lift(shape, s);
                crate::inference::phase_even(params, &mut even, &free);
                let h_mixed: Vec<Vec<f64>> = (0..params.num_layers())
                    .map(|l| {
                        if crate::inference::layer_in_odd_block(l) {
                            odd.h[l].clone()
                        } else {
                            even.h[l].clone()
                        }
                    })
                    .collect();
                let y_mixed = if crate::inference::label_in_odd_block(params.num_layers()) {
                    odd.y.clone()
                } else {
                    even.y.clone()
                };
                accumulate_bias_stats(params, &even.v, &h_mixed, y_mixed.as_deref(), w, &mut grad);
            }
        }
    }
    Ok(grad)
}

/// Clamped-phase inference for one example: all visibles observed, label
/// observed when present. Returns the final mean field state.
fn positive_state(params: &Params, ex: &Example, mf_iters: usize) -> Result<MeanFieldState> {
    let mut mask = Mask::all_observed(&params.shape);
    if ex.label.is_none() {
        mask.label_observed = false;
    }
    let (state, _) = mf_run(params, ex, &mask, mf_iters, InferenceMode::Standard)?;
    Ok(state)
}

/// Variational free energy of an example under its clamped-phase state:
/// expected energy minus the entropy of the factorial posterior. The batch
/// mean of this quantity is the monitored training metric (an upper bound
/// on the negative unnormalized log likelihood, tight when mean field is
/// exact).
fn free_energy(params: &Params, ex: &Example, st: &MeanFieldState) -> f64 {
    let e = energy_of_values(params, &ex.v, &st.h, st.y.as_deref());
    let mut entropy = 0.0;
    let bin_ent = |m: f64| {
        if m <= 0.0 || m >= 1.0 {
            0.0
        } else {
            -m * m.ln() - (1.0 - m) * (1.0 - m).ln()
        }
    };
    for layer in &st.h {
        entropy += layer.iter().map(|&m| bin_ent(m)).sum::<f64>();
    }
    if ex.label.is_none() {
        if let Some(y) = &st.y {
            entropy += y.iter().filter(|&&p| p > 0.0).map(|&p| -p * p.ln()).sum::<f64>();
        }
    }
    e - entropy
}

/// One stochastic maximum-likelihood gradient estimate: advance the
/// persistent chains, then return (batch mean free energy, model
/// statistics minus data statistics). The gradient points in the descent
/// direction of the negative log likelihood, matching [`sgd_step`].
pub fn pcd_grad(
    params: &Params,
    batch: &[Example],
    chains: &mut ChainPool,
    cfg: &PcdConfig,
) -> Result<(f64, Gradient)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    cfg.validate()?;
    let shape = &params.shape;

    // Data phase: factorial posterior per example, threaded.
    let states = crate::parallel::map_indexed(batch.len(), |i| {
        positive_state(params, &batch[i], cfg.mf_iters)
    });
    let mut pos = Gradient::zeros(shape);
    let w = 1.0 / batch.len() as f64;
    let mut fe_sum = 0.0;
    for (ex, st) in batch.iter().zip(states) {
        let st = st?;
        accumulate_edge_stats(params, &ex.v, &st.h, st.y.as_deref(), w, &mut pos);
        accumulate_bias_stats(params, &ex.v, &st.h, st.y.as_deref(), w, &mut pos);
        fe_sum += free_energy(params, ex, &st);
    }

    // Model phase: persistent chains.
    chains.advance(params, cfg.gibbs_steps);
    let mut grad = chain_stats(params, &chains.states, cfg.stats)?;
    grad.add_scaled(&pos, -1.0);

    if let Some(tensor) = grad.find_non_finite(shape) {
        return Err(Error::NonFiniteGradient { tensor });
    }
    Ok((fe_sum * w, grad))
}

/// Everything a generative training run mutates besides the parameters.
#[derive(Debug, Clone)]
pub struct PcdTrainerState {
    pub opt: TrainerState,
    pub chains: ChainPool,
}

impl PcdTrainerState {
    pub fn new(shape: &ModelShape, n_chains: usize, rng: &mut Rng) -> Self {
        PcdTrainerState {
            opt: TrainerState::new(shape),
            chains: ChainPool::new(shape, n_chains, rng),
        }
    }
}

/// Combined schedule for generative training.
#[derive(Debug, Clone, Default)]
pub struct TrainPcdConfig {
    pub sgd: SgdConfig,
    pub pcd: PcdConfig,
}

/// One epoch of stochastic maximum likelihood. The reported loss is the
/// batch-mean variational free energy of the data (lower = better fit,
/// up to the partition function).
pub fn train_epoch_pcd(
    params: &mut Params,
    data: &Dataset,
    cfg: &TrainPcdConfig,
    rng: &mut Rng,
    state: &mut PcdTrainerState,
) -> Result<EpochStats> {
    if data.is_empty() {
        return Err(Error::EmptyInput);
    }
    if cfg.sgd.batch_size == 0 {
        return Err(Error::InvalidConfig("batch_size must be >= 1".into()));
    }
    let idx = shuffled_indices(data.len(), cfg.sgd.shuffle, rng);
    let mut loss_sum = 0.0;
    let mut batches = 0usize;
    for chunk in idx.chunks(cfg.sgd.batch_size) {
        if let Some(cap) = cfg.sgd.max_steps {
            if state.opt.step >= cap {
                break;
            }
        }
        let batch: Vec<Example> = chunk.iter().map(|&i| data.examples[i].clone()).collect();
        let (fe, grad) = pcd_grad(params, &batch, &mut state.chains, &cfg.pcd)?;
        if !fe.is_finite() {
            return Err(Error::NonFiniteLoss {
                step: state.opt.step,
            });
        }
        sgd_step(
            params,
            &grad,
            &mut state.opt.velocity,
            cfg.sgd.lr,
            cfg.sgd.momentum,
            cfg.sgd.max_col_norm,
        );
        state.opt.step += 1;
        loss_sum += fe;
        batches += 1;
    }
    state.opt.epoch += 1;
    Ok(EpochStats {
        epoch: state.opt.epoch,
        mean_loss: if batches > 0 {
            loss_sum / batches as f64
        } else {
            f64::NAN
        },
        batches,
        steps_total: state.opt.step,
    })
}

/// Full generative training loop; mirrors the multi-prediction trainer,
/// with the persistent chain pool seeded from `rng` up front.
pub fn train_pcd(
    params: &mut Params,
    data: &Dataset,
    cfg: &TrainPcdConfig,
    rng: &mut Rng,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainReport> {
    cfg.pcd.validate()?;
    let mut state = PcdTrainerState::new(&params.shape, cfg.pcd.n_chains, rng);
    let mut last = f64::NAN;
    let mut stopped_early = false;
    let mut epochs_run = 0;
    for _ in 0..cfg.sgd.epochs {
        let stats = train_epoch_pcd(params, data, cfg, rng, &mut state)?;
        if stats.batches == 0 {
            break;
        }
        epochs_run += 1;
        last = stats.mean_loss;
        on_epoch(&stats);
        if state.opt.note_epoch_loss(stats.mean_loss, &cfg.sgd.early_stop) {
            stopped_early = true;
            break;
        }
        if cfg.sgd.max_steps.is_some_and(|cap| state.opt.step >= cap) {
            break;
        }
    }
    Ok(TrainReport {
        epochs_run,
        final_loss: last,
        steps: state.opt.step,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_patterns;
    use crate::model::to_uncentered;
    use crate::oracle::{
        exact_log_likelihood, exact_log_z, exact_model_stats, CompletionSpace, EnumBound,
    };
    use crate::testutil::{random_params, random_state};

    #[test]
    fn decoupled_gibbs_matches_bias_marginals() {
        // With zero weights every sweep resamples each unit independently
        // from its bias, so sweep-to-sweep samples are iid.
        let shape = ModelShape::new(2, vec![2], 2).unwrap();
        let mut p = Params::zeros(shape.clone());
        p.b_v = vec![1.0, -0.8];
        p.b_h[0] = vec![0.4, -1.2];
        p.b_y = Some(vec![0.7, 0.0]);
        let mut rng = Rng::new(202);
        let mut st = FullState::zeros(&shape);
        let n = 4000usize;
        let mut v_count = [0.0f64; 2];
        let mut h_count = [0.0f64; 2];
        let mut y0_count = 0.0f64;
        for _ in 0..n {
            gibbs_sweep(&p, &mut st, None, &mut rng);
            for j in 0..2 {
                v_count[j] += st.v[j];
                h_count[j] += st.h[0][j];
            }
            if st.y == Some(0) {
                y0_count += 1.0;
            }
        }
        let three_sigma = |prob: f64| 3.0 * (prob * (1.0 - prob) / n as f64).sqrt();
        for j in 0..2 {
            let pv = sigmoid(p.b_v[j]);
            assert!((v_count[j] / n as f64 - pv).abs() < three_sigma(pv));
            let ph = sigmoid(p.b_h[0][j]);
            assert!((h_count[j] / n as f64 - ph).abs() < three_sigma(ph));
        }
        let py0 = softmax(&[0.7, 0.0]).unwrap()[0];
        assert!((y0_count / n as f64 - py0).abs() < three_sigma(py0));
    }

    #[test]
    fn clamped_coordinates_never_move_and_free_ones_do() {
        let p = random_params(88, ModelShape::new(3, vec![2, 2], 2).unwrap(), 0.8);
        let ex = Example {
            v: vec![1.0, 0.0, 1.0],
            label: Some(1),
        };
        let mask = Mask::new(vec![true, false, true], true);
        let mut st = FullState::zeros(&p.shape);
        st.v = ex.v.clone();
        st.y = ex.label;
        let h_init = st.h.clone();
        let mut free_visible_moved = false;
        let mut hidden_moved = false;
        let mut rng = Rng::new(7);
        let mut prev_v1 = st.v[1];
        for _ in 0..200 {
            gibbs_sweep(&p, &mut st, Some((&ex, &mask)), &mut rng);
            assert_eq!(st.v[0], 1.0);
            assert_eq!(st.v[2], 1.0);
            assert_eq!(st.y, Some(1));
            free_visible_moved |= st.v[1] != prev_v1;
            prev_v1 = st.v[1];
            hidden_moved |= st.h != h_init;
        }
        assert!(free_visible_moved, "unobserved visible never resampled");
        assert!(hidden_moved, "hidden units never resampled");
    }

    #[test]
    fn long_chain_matches_exact_joint_in_total_variation() {
        // 3 + 2 + 2 binary units, no label: 128 joint states, enumerable.
        let p = random_params(91, ModelShape::new(3, vec![2, 2], 0).unwrap(), 0.4);
        let space = CompletionSpace::joint(&p.shape);
        let n_states = space.num_states() as usize;
        let log_z = exact_log_z(&p, &EnumBound::default()).unwrap();
        let mut exact = vec![0.0f64; n_states];
        space.for_each(|i, s| {
            exact[i] = (-crate::model::energy(&p, s).unwrap() - log_z).exp();
        });

        let mut st = FullState::zeros(&p.shape);
        let mut rng = Rng::new(17);
        for _ in 0..1000 {
            gibbs_sweep(&p, &mut st, None, &mut rng);
        }
        let n = 2_000_000usize;
        let mut counts = vec![0.0f64; n_states];
        for _ in 0..n {
            gibbs_sweep(&p, &mut st, None, &mut rng);
            counts[space.index_of(&st)] += 1.0;
        }
        let tv: f64 = counts
            .iter()
            .zip(&exact)
            .map(|(c, e)| (c / n as f64 - e).abs())
            .sum::<f64>()
            / 2.0;
        assert!(tv < 0.015, "total variation {tv}");
    }

    #[test]
    fn rao_blackwell_is_unbiased_with_lower_variance() {
        let p = random_params(93, ModelShape::new(3, vec![2], 2).unwrap(), 0.5);
        let exact = exact_model_stats(&p, &EnumBound::default()).unwrap();
        let mut rng = Rng::new(29);
        let mut pool = ChainPool::new(&p.shape, 64, &mut rng);
        pool.advance(&p, 100); // burn-in

        let ids = p.tensor_ids();
        let n_updates = 300;
        let mut acc: Vec<(Vec<f64>, Vec<f64>)> = Vec::new(); // per mode: (sum, sum_sq)
        for _ in 0..2 {
            let total: usize = ids.iter().map(|&id| p.tensor(id).len()).sum();
            acc.push((vec![0.0; total], vec![0.0; total]));
        }
        for _ in 0..n_updates {
            pool.advance(&p, 1);
            for (m, mode) in [StatsMode::Plain, StatsMode::RaoBlackwell]
                .into_iter()
                .enumerate()
            {
                let stats = chain_stats(&p, &pool.states, mode).unwrap();
                let mut off = 0;
                for &id in &ids {
                    for &g in stats.tensor(id) {
                        acc[m].0[off] += g;
                        acc[m].1[off] += g * g;
                        off += 1;
                    }
                }
            }
        }

        let exact_flat: Vec<f64> = ids
            .iter()
            .flat_map(|&id| exact.tensor(id).to_vec())
            .collect();
        let mut var_mean = [0.0f64; 2];
        for m in 0..2 {
            for (i, &e) in exact_flat.iter().enumerate() {
                let mean = acc[m].0[i] / n_updates as f64;
                assert!(
                    (mean - e).abs() < 0.04,
                    "mode {m} entry {i}: mean {mean} vs exact {e}"
                );
                var_mean[m] += acc[m].1[i] / n_updates as f64 - mean * mean;
            }
            var_mean[m] /= exact_flat.len() as f64;
        }
        assert!(
            var_mean[1] < 0.5 * var_mean[0],
            "conditioning did not shrink variance: plain {} vs rb {}",
            var_mean[0],
            var_mean[1]
        );
    }

    #[test]
    fn time_averaged_gradient_matches_exact_likelihood_gradient() {
        // Single hidden layer, no label: the clamped phase is exact, so
        // the only noise is the chain estimate of the model statistics.
        let p = random_params(97, ModelShape::new(3, vec![2], 0).unwrap(), 0.7);
        let examples = vec![
            Example {
                v: vec![1.0, 0.0, 1.0],
                label: None,
            },
            Example {
                v: vec![0.0, 1.0, 1.0],
                label: None,
            },
        ];
        let exact_ascent =
            crate::oracle::exact_ll_grad(&p, &examples, &EnumBound::default()).unwrap();
        let cfg = PcdConfig {
            n_chains: 256,
            gibbs_steps: 2,
            mf_iters: 5,
            stats: StatsMode::RaoBlackwell,
        };
        let mut rng = Rng::new(31);
        let mut pool = ChainPool::new(&p.shape, cfg.n_chains, &mut rng);
        pool.advance(&p, 50);
        let mut mean = Gradient::zeros(&p.shape);
        let n_updates = 300;
        for _ in 0..n_updates {
            let (_, g) = pcd_grad(&p, &examples, &mut pool, &cfg).unwrap();
            mean.add_scaled(&g, 1.0 / n_updates as f64);
        }
        // Descent gradient of the mean per-example NLL should equal
        // -(1/n) * ascent gradient of the summed LL.
        for id in p.tensor_ids() {
            for (got, want) in mean
                .tensor(id)
                .iter()
                .zip(exact_ascent.tensor(id).iter().map(|g| -g / 2.0))
            {
                assert!(
                    (got - want).abs() < 0.02,
                    "{id}: time-averaged {got} vs exact {want}"
                );
            }
        }
    }

    #[test]
    fn zero_learning_rate_leaves_params_bitwise_unchanged() {
        let mut p = random_params(101, ModelShape::new(3, vec![2], 2).unwrap(), 0.5);
        let before = p.clone();
        let ds = synth_patterns(2, 3, 0.1, 8, 6).unwrap();
        let cfg = TrainPcdConfig {
            sgd: SgdConfig {
                epochs: 2,
                batch_size: 4,
                lr: 0.0,
                momentum: 0.9,
                max_col_norm: None,
                ..Default::default()
            },
            pcd: PcdConfig {
                n_chains: 8,
                gibbs_steps: 2,
                mf_iters: 3,
                stats: StatsMode::Plain,
            },
        };
        train_pcd(&mut p, &ds, &cfg, &mut Rng::new(2), |_| {}).unwrap();
        assert_eq!(p, before);
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let ds = synth_patterns(2, 4, 0.1, 12, 9).unwrap();
        let shape = ModelShape::new(4, vec![3], 2).unwrap();
        let cfg = TrainPcdConfig {
            sgd: SgdConfig {
                epochs: 3,
                batch_size: 4,
                lr: 0.1,
                momentum: 0.5,
                max_col_norm: Some(4.0),
                ..Default::default()
            },
            pcd: PcdConfig {
                n_chains: 16,
                gibbs_steps: 2,
                mf_iters: 4,
                stats: StatsMode::RaoBlackwell,
            },
        };
        let run = || {
            let mut p = random_params(5, shape.clone(), 0.05);
            train_pcd(&mut p, &ds, &cfg, &mut Rng::new(77), |_| {}).unwrap();
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn training_increases_exact_log_likelihood() {
        let ds = synth_patterns(2, 4, 0.05, 24, 13).unwrap();
        let shape = ModelShape::new(4, vec![3], 2).unwrap();
        let mut p = random_params(19, shape, 0.05);
        let bound = EnumBound::default();
        let before = exact_log_likelihood(&p, &ds.examples, &bound).unwrap();
        let cfg = TrainPcdConfig {
            sgd: SgdConfig {
                epochs: 25,
                batch_size: 8,
                lr: 0.1,
                momentum: 0.5,
                max_col_norm: Some(4.0),
                ..Default::default()
            },
            pcd: PcdConfig {
                n_chains: 64,
                gibbs_steps: 3,
                mf_iters: 5,
                stats: StatsMode::RaoBlackwell,
            },
        };
        train_pcd(&mut p, &ds, &cfg, &mut Rng::new(23), |_| {}).unwrap();
        let after = exact_log_likelihood(&p, &ds.examples, &bound).unwrap();
        assert!(
            after > before,
            "log likelihood did not improve: {before} -> {after}"
        );
    }

    #[test]
    fn unlabeled_examples_marginalize_the_label() {
        // Mixed labeled/unlabeled batch under a labeled model must run and
        // produce finite gradients; the unlabeled clamped phase leaves the
        // label soft.
        let p = random_params(103, ModelShape::new(3, vec![2], 2).unwrap(), 0.5);
        let batch = vec![
            Example {
                v: vec![1.0, 0.0, 1.0],
                label: Some(0),
            },
            Example {
                v: vec![0.0, 1.0, 0.0],
                label: None,
            },
        ];
        let st = positive_state(&p, &batch[1], 5).unwrap();
        let y = st.y.as_ref().unwrap();
        assert!((y.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(y.iter().all(|&q| q > 0.0 && q < 1.0), "label not soft: {y:?}");
        let mut rng = Rng::new(3);
        let mut pool = ChainPool::new(&p.shape, 8, &mut rng);
        let cfg = PcdConfig {
            n_chains: 8,
            gibbs_steps: 1,
            mf_iters: 3,
            stats: StatsMode::Plain,
        };
        let (fe, grad) = pcd_grad(&p, &batch, &mut pool, &cfg).unwrap();
        assert!(fe.is_finite());
        assert!(grad.find_non_finite(&p.shape).is_none());
    }

    #[test]
    fn centered_gradient_is_the_pullback_of_the_uncentered_one() {
        // The two parameterizations describe the same distribution; on any
        // fixed positive/negative statistics the centered gradient must
        // equal the uncentered one pulled back through the bias folding:
        // dW_c[a][b] = dW_u[a][b] - beta_b db_u[a] - beta_a db_u[b],
        // biases unchanged.
        let mut p = random_params(107, ModelShape::new(3, vec![2, 2], 2).unwrap(), 0.6);
        p.offsets = Some(crate::model::Offsets {
            v: vec![0.2, 0.6, 0.5],
            h: vec![vec![0.4, 0.7], vec![0.3, 0.5]],
            y: Some(vec![0.5, 0.5]),
        });
        let p_u = to_uncentered(&p);

        let neg: Vec<FullState> = (0..4).map(|i| random_state(500 + i, &p.shape)).collect();
        let pos: Vec<FullState> = (0..3).map(|i| random_state(600 + i, &p.shape)).collect();
        let diff = |params: &Params| {
            let mut g = chain_stats(params, &neg, StatsMode::Plain).unwrap();
            let gp = chain_stats(params, &pos, StatsMode::Plain).unwrap();
            g.add_scaled(&gp, -1.0);
            g
        };
        let g_c = diff(&p);
        let g_u = diff(&p_u);

        let off = p.offsets.as_ref().unwrap();
        let tol = 1e-12;
        // Visible-to-first-layer weights.
        for a in 0..p.shape.d {
            for b in 0..p.shape.layer_sizes[0] {
                let want = g_u.w[0].get(a, b) - off.h[0][b] * g_u.b_v[a] - off.v[a] * g_u.b_h[0][b];
                assert!((g_c.w[0].get(a, b) - want).abs() < tol);
            }
        }
        // Layer-to-layer weights.
        for a in 0..p.shape.layer_sizes[0] {
            for b in 0..p.shape.layer_sizes[1] {
                let want =
                    g_u.w[1].get(a, b) - off.h[1][b] * g_u.b_h[0][a] - off.h[0][a] * g_u.b_h[1][b];
                assert!((g_c.w[1].get(a, b) - want).abs() < tol);
            }
        }
        // Top-layer-to-label weights.
        let by_u = g_u.b_y.as_ref().unwrap();
        let beta_y = off.y.as_ref().unwrap();
        for a in 0..p.shape.layer_sizes[1] {
            for b in 0..p.shape.k {
                let want = g_u.wy.as_ref().unwrap().get(a, b)
                    - beta_y[b] * g_u.b_h[1][a]
                    - off.h[1][a] * by_u[b];
                assert!((g_c.wy.as_ref().unwrap().get(a, b) - want).abs() < tol);
            }
        }
        // Bias gradients agree exactly across parameterizations.
        for (a, b) in g_c.b_v.iter().zip(&g_u.b_v) {
            assert!((a - b).abs() < tol);
        }
        for l in 0..2 {
            for (a, b) in g_c.b_h[l].iter().zip(&g_u.b_h[l]) {
                assert!((a - b).abs() < tol);
            }
        }
        for (a, b) in g_c.b_y.as_ref().unwrap().iter().zip(by_u) {
            assert!((a - b).abs() < tol);
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let shape = ModelShape::new(3, vec![2], 0).unwrap();
        let p = Params::zeros(shape.clone());
        let ex = vec![Example {
            v: vec![1.0, 0.0, 1.0],
            label: None,
        }];
        let mut rng = Rng::new(1);
        let mut pool = ChainPool::new(&shape, 4, &mut rng);
        for bad in [
            PcdConfig {
                n_chains: 0,
                ..Default::default()
            },
            PcdConfig {
                gibbs_steps: 0,
                ..Default::default()
            },
            PcdConfig {
                mf_iters: 0,
                ..Default::default()
            },
        ] {
            match pcd_grad(&p, &ex, &mut pool, &bad) {
                Err(Error::InvalidConfig(_)) => {}
                other => panic!("expected InvalidConfig, got {other:?}"),
            }
        }
    }
}
