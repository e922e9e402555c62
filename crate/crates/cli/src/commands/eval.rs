//! `eval`: run one of the evaluation suites against a checkpoint.
//!
//! Evaluation uses the config's validation split when it is non-empty,
//! otherwise the full (training) split — point the data section at a test
//! set with `val_split: 0` to evaluate on all of it.

use std::io::Write;
use std::path::Path;

use mpdbm_core::data::{make_missing_input_queries, Dataset};
use mpdbm_core::inference::{mf_run, InferenceMode};
use mpdbm_core::model::Params;
use serde_json::{json, Value};

use crate::checkpoint::load_checkpoint;
use crate::config::{EvalMode, InferenceSection, RunConfig};
use crate::dataio::build_datasets;
use crate::evals::{classify_error, general_query_ce, missing_inputs_error};
use crate::metrics::{fnum, MetricsWriter};
use crate::CliError;

const METRIC_KEYS: [&str; 7] = [
    "mode",
    "inference",
    "n_iters",
    "fraction",
    "size",
    "value",
    "n_examples",
];

pub fn cmd_eval(config_path: &Path, checkpoint: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = RunConfig::load(config_path)?;
    let shape = cfg.model_shape()?;
    let ck = load_checkpoint(checkpoint)?;
    if ck.params.shape != shape {
        return Err(CliError::Usage(format!(
            "checkpoint shape ({}) does not match config shape",
            ck.params.shape
        )));
    }
    let (train, val) = build_datasets(&cfg)?;
    let ds = if val.is_empty() { &train } else { &val };
    if shape.has_label() && ds.num_classes > shape.k {
        return Err(CliError::Usage(format!(
            "dataset has {} classes but shape.k = {}",
            ds.num_classes, shape.k
        )));
    }
    std::fs::create_dir_all(out)?;
    let mode = match cfg.eval.inference {
        InferenceSection::MeanField => InferenceMode::Standard,
        InferenceSection::MultiInference => InferenceMode::MultiInference,
    };
    let mode_name = match cfg.eval.inference {
        InferenceSection::MeanField => "mean_field",
        InferenceSection::MultiInference => "multi_inference",
    };
    let n_iters = cfg.eval.n_iters;
    let mut metrics = MetricsWriter::create(out, "eval", &METRIC_KEYS)?;
    let row = |kind: &str,
                   fraction: Option<f64>,
                   size: Option<usize>,
                   value: f64,
                   n: usize,
                   metrics: &mut MetricsWriter| {
        metrics.write(&[
            json!(kind),
            json!(mode_name),
            json!(n_iters),
            fraction.map_or(Value::Null, fnum),
            size.map_or(Value::Null, |s| json!(s)),
            fnum(value),
            json!(n),
        ])
    };

    match cfg.eval.mode {
        EvalMode::Classify => {
            let err = classify_error(&ck.params, ds, n_iters, mode)?;
            row("classify", None, None, err, ds.len(), &mut metrics)?;
            println!("classify error {err:.4} over {} examples", ds.len());
        }
        EvalMode::MissingInputs => {
            for &f in &cfg.eval.fractions {
                let err = missing_inputs_error(
                    &ck.params,
                    ds,
                    f,
                    cfg.eval.seed,
                    n_iters,
                    mode,
                )?;
                row("missing_inputs", Some(f), None, err, ds.len(), &mut metrics)?;
                println!("missing fraction {f:.2}: error {err:.4}");
            }
        }
        EvalMode::GeneralQuery => {
            for &size in &cfg.eval.sizes {
                let ce = general_query_ce(
                    &ck.params,
                    ds,
                    size,
                    cfg.eval.queries_per_example,
                    cfg.eval.seed,
                    n_iters,
                    mode,
                )?;
                row("general_query", None, Some(size), ce, ds.len(), &mut metrics)?;
                println!("query size {size}: cross-entropy {ce:.4}");
            }
        }
        EvalMode::Inpaint => {
            let (n, mean_bce) = dump_inpaint(&ck.params, &cfg, ds, out, mode)?;
            row(
                "inpaint",
                Some(cfg.eval.inpaint_fraction),
                None,
                mean_bce,
                n,
                &mut metrics,
            )?;
            println!(
                "inpaint: {n} examples at fraction {:.2}, masked-pixel cross-entropy {mean_bce:.4}; \
                 dumps in {}",
                cfg.eval.inpaint_fraction,
                out.join("inpaint.jsonl").display()
            );
        }
    }
    Ok(())
}

/// Write per-example reconstructions to `inpaint.jsonl` and return the
/// example count and mean cross-entropy over hidden pixels.
fn dump_inpaint(
    params: &Params,
    cfg: &RunConfig,
    ds: &Dataset,
    out: &Path,
    mode: InferenceMode,
) -> Result<(usize, f64), CliError> {
    let queries = make_missing_input_queries(ds, cfg.eval.inpaint_fraction, cfg.eval.seed)?;
    let take = queries.len().min(cfg.eval.inpaint_limit);
    let mut file = std::io::BufWriter::new(std::fs::File::create(out.join("inpaint.jsonl"))?);
    let mut bce_sum = 0.0;
    let mut bce_count = 0usize;
    for (i, (ex, mask)) in queries.iter().take(take).enumerate() {
        let (state, _) = mf_run(params, ex, mask, cfg.eval.n_iters, mode)?;
        for (j, obs) in mask.visible_observed.iter().enumerate() {
            if !obs {
                let p = state.v[j].clamp(1e-12, 1.0 - 1e-12);
                bce_sum -= ex.v[j] * p.ln() + (1.0 - ex.v[j]) * (1.0 - p).ln();
                bce_count += 1;
            }
        }
        let record = json!({
            "index": i,
            "observed": mask.visible_observed,
            "v": ex.v,
            "v_hat": state.v,
            "y_hat": state.y,
            "label": ex.label,
        });
        writeln!(file, "{record}")?;
    }
    file.flush()?;
    let mean = if bce_count > 0 {
        bce_sum / bce_count as f64
    } else {
        0.0
    };
    Ok((take, mean))
}
