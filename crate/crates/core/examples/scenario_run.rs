//! Parse a scenario document and run it in memory.

use zeroset::scenario::{parse_scenario, run};

const CONFIG: &str = r#"{
    "schema": "zeroset.scenario/v1",
    "field": {"name": "linear-1d"},
    "start": [0.7071067811865476],
    "horizon": 1.0,
    "policy": {"kind": "fixed", "h": 1e-5},
    "n_paths": 5000,
    "master_seed": 17,
    "experiment": {"kind": "sqrt-bound", "k": 1}
}"#;

fn main() -> zeroset::Result<()> {
    let cfg = parse_scenario(CONFIG)?;
    println!("defaults applied: {:?}", cfg.defaults_applied);
    let report = run(&cfg)?;
    println!("{}", serde_json::to_string_pretty(&report.payload)?);
    println!("all satisfied: {}", report.all_satisfied());

    match parse_scenario(&CONFIG.replace("sqrt-bound", "sqrt-bond")) {
        Err(e) => println!("typo caught: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
