//! Runs the desk-scale forgetting experiment and prints the comparison table.
//!
//! cargo run --release --example forgetting

use std::time::Instant;

use protoner::eval::compare;
use protoner::experiment::{run_experiment, ExperimentConfig, ExperimentOutcome};
use protoner::Execution;

fn main() -> protoner::Result<()> {
    let start = Instant::now();
    let out = run_experiment(&ExperimentConfig::default(), Execution::default())?;
    println!(
        "{}",
        compare(&[out.protoner.clone(), out.full.clone(), out.naive.clone()])
    );
    println!(
        "base old-class macro F1      {:.3}",
        ExperimentOutcome::old_f1(&out.base)
    );
    for (name, r) in [
        ("protoner", &out.protoner),
        ("naive", &out.naive),
        ("full", &out.full),
    ] {
        println!(
            "{name:<9} old {:.3}  new {:.3}",
            ExperimentOutcome::old_f1(r),
            ExperimentOutcome::new_f1(r)
        );
    }
    println!(
        "protoner macro delta old {:+.3}",
        out.protoner_forgetting.macro_delta_old
    );
    println!(
        "naive    macro delta old {:+.3}",
        out.naive_forgetting.macro_delta_old
    );
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
