//! One Euler–Maruyama path of geometric Brownian motion, written as CSV.

use std::io;

use zeroset::{simulate_path, FieldSpec, PathSeed, StepPolicy};

fn main() -> zeroset::Result<()> {
    let field = FieldSpec::Linear1d {}.build()?;
    let path = simulate_path(&field, &[1.0], 1.0, &StepPolicy::fixed(0.05), PathSeed::new(42, 0))?;
    path.write_csv(io::stdout().lock())?;

    // same seed, same path
    let again = simulate_path(&field, &[1.0], 1.0, &StepPolicy::fixed(0.05), PathSeed::new(42, 0))?;
    assert_eq!(path.states, again.states);
    eprintln!("terminated by {:?}", path.termination);
    Ok(())
}
