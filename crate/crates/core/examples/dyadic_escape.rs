//! Time spent in each dyadic band on the way down.
//!
//! For GBM every halving of the level takes ln 2 on average, so the sum
//! over bands grows without bound.

use zeroset::stopping_times::dyadic_escape_batch;
use zeroset::{FieldSpec, StepPolicy};

fn main() -> zeroset::Result<()> {
    let field = FieldSpec::Linear1d {}.build()?;
    let depth = 8;
    let records = dyadic_escape_batch(&field, &[1.0], depth, 50.0, &StepPolicy::fixed(1e-3), 1000, 6)?;
    let t0 = records[0].t0;
    println!("t0 = {t0:.6}, ln 2 = {:.4}", 2f64.ln());
    for k in 0..depth {
        let seen: Vec<f64> = records.iter().filter_map(|r| r.increments[k]).collect();
        let mean = seen.iter().sum::<f64>() / seen.len() as f64;
        let long = seen.iter().filter(|&&v| v >= t0).count();
        println!("k = {k}: mean {mean:.4}  observed {}  >= t0 {long}", seen.len());
    }
    Ok(())
}
