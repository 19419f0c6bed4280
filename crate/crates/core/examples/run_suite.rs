//! Runs the shipped scenario suite through the library entry point and
//! prints the text report.

use std::path::Path;

use efsep::cli::{emit_report, run_scenario_file, Format, RunOptions};

fn main() -> efsep::Result<()> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios/suite.json");
    let report = run_scenario_file(&path, &RunOptions::default())?;
    print!("{}", emit_report(&report, Format::Text));
    println!("passed: {}", report.passed());
    Ok(())
}
