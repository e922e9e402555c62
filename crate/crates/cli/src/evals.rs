//! Evaluation measurements shared by the `eval` subcommand and the
//! acceptance checks: classification error, missing-input robustness, and
//! cross-entropy on randomly chosen prediction targets.

use mpdbm_core::data::{make_missing_input_queries, Dataset, Example};
use mpdbm_core::inference::{mf_run, InferenceMode, Mask};
use mpdbm_core::model::Params;
use mpdbm_core::numerics::Rng;
use mpdbm_core::parallel;

use crate::CliError;

/// Keeps `ln` away from exact 0/1 predictions.
const PROB_CLIP: f64 = 1e-12;

/// Fraction of labeled examples whose predicted class disagrees with the
/// label, inferring from the full image.
pub fn classify_error(
    params: &Params,
    ds: &Dataset,
    n_iters: usize,
    mode: InferenceMode,
) -> Result<f64, CliError> {
    let mask = Mask::classify(&params.shape);
    let labeled: Vec<&Example> = ds.examples.iter().filter(|e| e.label.is_some()).collect();
    if labeled.is_empty() {
        return Err(CliError::Usage(
            "classification eval needs labeled examples".into(),
        ));
    }
    let outcomes = parallel::map_indexed(labeled.len(), |i| {
        let ex = labeled[i];
        let (state, _) = mf_run(params, ex, &mask, n_iters, mode)?;
        Ok::<bool, mpdbm_core::Error>(state.predicted_class() != ex.label)
    });
    let mut wrong = 0usize;
    for o in outcomes {
        if o? {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / labeled.len() as f64)
}

/// Classification error when a random fraction of each image is hidden
/// along with the label. At fraction zero this is exactly
/// [`classify_error`]: the mask generator hides no pixels.
pub fn missing_inputs_error(
    params: &Params,
    ds: &Dataset,
    fraction: f64,
    seed: u64,
    n_iters: usize,
    mode: InferenceMode,
) -> Result<f64, CliError> {
    let queries = make_missing_input_queries(ds, fraction, seed)?;
    let labeled: Vec<&(Example, Mask)> =
        queries.iter().filter(|(e, _)| e.label.is_some()).collect();
    if labeled.is_empty() {
        return Err(CliError::Usage(
            "missing-input eval needs labeled examples".into(),
        ));
    }
    let outcomes = parallel::map_indexed(labeled.len(), |i| {
        let (ex, mask) = labeled[i];
        let (state, _) = mf_run(params, ex, mask, n_iters, mode)?;
        Ok::<bool, mpdbm_core::Error>(state.predicted_class() != ex.label)
    });
    let mut wrong = 0usize;
    for o in outcomes {
        if o? {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / labeled.len() as f64)
}

/// Mean per-variable cross-entropy when predicting `size` randomly chosen
/// pixels from everything else (remaining pixels and label observed).
/// Averages over `queries_per_example` random target sets per example.
pub fn general_query_ce(
    params: &Params,
    ds: &Dataset,
    size: usize,
    queries_per_example: usize,
    seed: u64,
    n_iters: usize,
    mode: InferenceMode,
) -> Result<f64, CliError> {
    let d = ds.d;
    if size == 0 || size > d {
        return Err(CliError::Usage(format!(
            "query size {size} outside 1..={d}"
        )));
    }
    if queries_per_example == 0 {
        return Err(CliError::Usage("queries_per_example must be >= 1".into()));
    }
    // Pre-draw every target set sequentially so the work items are pure.
    let mut rng = Rng::new(seed);
    let mut queries: Vec<(usize, Mask)> = Vec::with_capacity(ds.len() * queries_per_example);
    for (i, ex) in ds.examples.iter().enumerate() {
        for _ in 0..queries_per_example {
            // Partial Fisher-Yates: first `size` entries become the targets.
            let mut idx: Vec<usize> = (0..d).collect();
            for t in 0..size {
                let j = t + rng.below(d - t);
                idx.swap(t, j);
            }
            let mut observed = vec![true; d];
            for &t in &idx[..size] {
                observed[t] = false;
            }
            queries.push((i, Mask::new(observed, ex.label.is_some())));
        }
    }
    let per_query = parallel::map_indexed(queries.len(), |q| {
        let (i, mask) = &queries[q];
        let ex = &ds.examples[*i];
        let (state, _) = mf_run(params, ex, mask, n_iters, mode)?;
        let mut ce = 0.0;
        let mut count = 0usize;
        for (j, obs) in mask.visible_observed.iter().enumerate() {
            if !obs {
                let p = state.v[j].clamp(PROB_CLIP, 1.0 - PROB_CLIP);
                ce -= ex.v[j] * p.ln() + (1.0 - ex.v[j]) * (1.0 - p).ln();
                count += 1;
            }
        }
        Ok::<f64, mpdbm_core::Error>(ce / count as f64)
    });
    let n = per_query.len();
    let mut total = 0.0;
    for q in per_query {
        total += q?;
    }
    Ok(total / n as f64)
}
