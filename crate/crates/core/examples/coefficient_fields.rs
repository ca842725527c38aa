//! Built-in coefficient fields: the level `‖σ‖² + ‖b‖²` and where it vanishes.

use zeroset::coefficients::catalog;

fn main() -> zeroset::Result<()> {
    for entry in catalog() {
        let f = &entry.field;
        let x = vec![0.5; f.d()];
        let k = f.lipschitz().map(|b| format!("{:.4} ({:?})", b.value, b.source));
        println!("{} (d={}, m={})", entry.name, f.d(), f.m());
        println!("  level(0.5, ..) = {:.6}", f.level(&x)?);
        println!("  in Lambda at origin: {}", f.in_lambda(&vec![0.0; f.d()])?);
        println!("  K = {}", k.unwrap_or_else(|| "none".into()));
        println!("  {}", entry.analytic_notes);
    }
    Ok(())
}
