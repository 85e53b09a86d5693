//! The acceptance suite (harness = false so the per-criterion lines are
//! visible in a plain `cargo test`): prints one line per criterion and
//! fails if any criterion fails.

use vortexlab_core::acceptance::{run_criterion, CRITERIA};

fn main() {
    let mut failed = Vec::new();
    for (i, name) in CRITERIA {
        let t0 = std::time::Instant::now();
        let r = run_criterion(i);
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {i:2} ({name}): {verdict} [{:.1?}] — {}",
            t0.elapsed(),
            r.detail
        );
        if !r.passed {
            failed.push(i);
        }
    }
    if !failed.is_empty() {
        eprintln!("criteria failed: {failed:?}");
        std::process::exit(1);
    }
}
