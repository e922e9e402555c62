//! `train`: fit a model per the config, streaming per-epoch metrics and
//! checkpointing after every epoch.

use std::path::Path;
use std::time::Instant;

use mpdbm_core::inference::InferenceMode;
use mpdbm_core::model::Params;
use mpdbm_core::mp::{mp_objective_estimate, train_epoch_mp, TrainerState};
use mpdbm_core::numerics::Rng;
use mpdbm_core::pcd::{train_epoch_pcd, ChainPool, PcdTrainerState, TrainPcdConfig};
use serde_json::{json, Value};

use crate::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use crate::config::{Method, RunConfig};
use crate::dataio::{build_datasets, pixel_means};
use crate::evals::classify_error;
use crate::metrics::{fnum, MetricsWriter};
use crate::CliError;

const METRIC_KEYS: [&str; 6] = [
    "epoch",
    "train_loss",
    "val_objective",
    "val_error",
    "seconds",
    "steps",
];

pub fn cmd_train(
    config_path: &Path,
    seed_override: Option<u64>,
    out: &Path,
    resume: Option<&Path>,
) -> Result<(), CliError> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(seed) = seed_override {
        cfg.seed = seed;
    }
    let shape = cfg.model_shape()?;
    let (train, val) = build_datasets(&cfg)?;
    if shape.has_label() && train.num_classes > shape.k {
        return Err(CliError::Usage(format!(
            "dataset has {} classes but shape.k = {}",
            train.num_classes, shape.k
        )));
    }
    std::fs::create_dir_all(out)?;
    // `checkpoint` always holds the latest epoch (the resume point);
    // `best` holds the epoch with the lowest early-stopping metric.
    let ckpt_dir = out.join("checkpoint");
    let best_dir = out.join("best");

    // Fresh runs fork one RNG stream per concern so resume only has to
    // restore the training stream (chain streams live in the pool).
    let (mut params, mut opt, mut chains, mut rng, resumed) = match resume {
        Some(dir) => {
            let ck = load_checkpoint(dir)?;
            if ck.params.shape != shape {
                return Err(CliError::Usage(format!(
                    "checkpoint shape ({}) does not match config shape",
                    ck.params.shape
                )));
            }
            if ck.method != cfg.method {
                return Err(CliError::Usage(
                    "checkpoint was written by a different training method".into(),
                ));
            }
            (ck.params, ck.opt, ck.chains, ck.rng, true)
        }
        None => {
            let mut root = Rng::new(cfg.seed);
            let mut init_rng = root.child();
            let train_rng = root.child();
            let mut chain_rng = root.child();
            let means = pixel_means(&train);
            let params = Params::init(shape.clone(), &mut init_rng, &cfg.init_config(&means))?;
            let chains = match cfg.method {
                Method::Mp => None,
                Method::PcdCentered => Some(ChainPool::new(
                    &shape,
                    cfg.pcd.n_chains,
                    &mut chain_rng,
                )),
            };
            (params, TrainerState::new(&shape), chains, train_rng, false)
        }
    };

    let sgd = cfg.sgd_config();
    let mp = cfg.mp_config();
    let pcd_cfg = TrainPcdConfig {
        sgd: sgd.clone(),
        pcd: cfg.pcd_config(),
    };
    let early_stop = sgd.early_stop.clone();
    let eval_iters = match cfg.method {
        Method::Mp => cfg.mp.n_iters,
        Method::PcdCentered => cfg.pcd.mf_iters,
    };

    let mut metrics = MetricsWriter::create(out, "train", &METRIC_KEYS)?;
    let save = |params: &Params, opt: &TrainerState, chains: &Option<ChainPool>, rng: &Rng| {
        save_checkpoint(
            &ckpt_dir,
            &Checkpoint {
                method: cfg.method,
                params: params.clone(),
                opt: opt.clone(),
                rng: rng.clone(),
                chains: chains.clone(),
            },
        )
    };
    if !resumed {
        save(&params, &opt, &chains, &rng)?;
    }

    let mut stopped_early = false;
    while opt.epoch < cfg.sgd.epochs {
        let t0 = Instant::now();
        let stats = match cfg.method {
            Method::Mp => train_epoch_mp(&mut params, &train, &sgd, &mp, &mut rng, &mut opt)?,
            Method::PcdCentered => {
                let pool = chains.take().expect("persistent chains missing");
                let mut st = PcdTrainerState { opt, chains: pool };
                let result = train_epoch_pcd(&mut params, &train, &pcd_cfg, &mut rng, &mut st);
                opt = st.opt;
                chains = Some(st.chains);
                result?
            }
        };
        let val_error = if shape.has_label() && !val.is_empty() {
            Some(classify_error(
                &params,
                &val,
                eval_iters,
                InferenceMode::Standard,
            )?)
        } else {
            None
        };
        let val_objective = if val.is_empty() {
            None
        } else {
            Some(mp_objective_estimate(
                &params,
                &val.examples,
                1,
                cfg.mp.n_iters,
                cfg.seed,
            )?)
        };
        // Early stopping tracks validation classification error when it
        // exists, the training loss otherwise.
        let metric = val_error.unwrap_or(stats.mean_loss);
        let stop = opt.note_epoch_loss(metric, &early_stop);
        save(&params, &opt, &chains, &rng)?;
        if opt.epochs_since_best == 0 {
            save_checkpoint(
                &best_dir,
                &Checkpoint {
                    method: cfg.method,
                    params: params.clone(),
                    opt: opt.clone(),
                    rng: rng.clone(),
                    chains: chains.clone(),
                },
            )?;
        }
        let seconds = t0.elapsed().as_secs_f64();
        metrics.write(&[
            json!(stats.epoch),
            fnum(stats.mean_loss),
            val_objective.map_or(Value::Null, fnum),
            val_error.map_or(Value::Null, fnum),
            fnum(seconds),
            json!(stats.steps_total),
        ])?;
        let val_str = val_error.map_or("-".into(), |e| format!("{e:.4}"));
        println!(
            "epoch {:>4}  loss {:>10.5}  val_err {val_str}  ({seconds:.1}s)",
            stats.epoch, stats.mean_loss
        );
        if stop {
            stopped_early = true;
            println!(
                "early stop: no improvement for {} epochs",
                opt.epochs_since_best
            );
            break;
        }
    }

    println!(
        "done: {} epochs, {} steps{}; checkpoint at {}{}",
        opt.epoch,
        opt.step,
        if stopped_early { " (stopped early)" } else { "" },
        ckpt_dir.display(),
        if best_dir.is_dir() {
            format!(", best epoch at {}", best_dir.display())
        } else {
            String::new()
        }
    );
    Ok(())
}
