//! Wilson, Clopper–Pearson and normal intervals side by side.

use zeroset::verification::{estimate_with_ci, CiMethod};

fn main() -> zeroset::Result<()> {
    for (hits, n) in [(0, 100), (3, 100), (50, 100), (997, 1000)] {
        for method in [CiMethod::Wilson, CiMethod::ClopperPearson, CiMethod::Normal] {
            let e = estimate_with_ci(hits, n, method)?;
            println!("{hits:>4}/{n:<5} {:<15} [{:.5}, {:.5}]", format!("{:?}", e.method), e.ci_low, e.ci_high);
        }
    }
    Ok(())
}
