//! `inspect`: validate a checkpoint and print a human-readable summary.

use std::path::Path;

use crate::checkpoint::{load_checkpoint, FORMAT_VERSION};
use crate::config::Method;
use crate::CliError;

pub fn cmd_inspect(checkpoint: &Path) -> Result<(), CliError> {
    let ck = load_checkpoint(checkpoint)?;
    let shape = &ck.params.shape;
    println!("version   {FORMAT_VERSION}");
    println!(
        "method    {}",
        match ck.method {
            Method::Mp => "mp",
            Method::PcdCentered => "pcd_centered",
        }
    );
    println!("shape     {shape}");
    println!("centered  {}", ck.params.offsets.is_some());
    println!("epoch     {}", ck.opt.epoch);
    println!("steps     {}", ck.opt.step);
    match ck.opt.best_loss.is_finite() {
        true => println!("best      {:.6}", ck.opt.best_loss),
        false => println!("best      -"),
    }
    println!(
        "chains    {}",
        ck.chains.as_ref().map_or(0, |c| c.len())
    );
    println!("tensors:");
    for id in ck.params.tensor_ids() {
        let t = ck.params.tensor(id);
        let l2 = t.iter().map(|x| x * x).sum::<f64>().sqrt();
        let vel = ck.opt.velocity.tensor(id);
        let vl2 = vel.iter().map(|x| x * x).sum::<f64>().sqrt();
        println!("  {id:<8} len {:>6}  |w| {l2:>10.4}  |vel| {vl2:>10.4}", t.len());
    }
    Ok(())
}
