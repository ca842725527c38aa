//! Strong convergence of Euler–Maruyama against the exact GBM solution.

use zeroset::sde_engine::strong_order_study;

fn main() -> zeroset::Result<()> {
    let study = strong_order_study(1.0, 1.0, &[4, 5, 6, 7, 8, 9, 10], 2000, 1)?;
    println!("{:>12} {:>6} {:>12} {:>12}", "h", "steps", "error", "ci_high");
    for row in &study.rows {
        println!("{:>12.3e} {:>6} {:>12.5e} {:>12.5e}", row.h, row.steps, row.error.point, row.error.ci_high);
    }
    println!("fitted order: {:.3} (expect 0.5)", study.slope);
    Ok(())
}
