//! Reduced property suites; `rionc check` runs the full-size version.

use rionc::check::{run_checks, CheckConfig, Suite};

fn main() -> rionc::Result<()> {
    let report = run_checks(Suite::All, &CheckConfig::quick(0))?;
    for p in &report.properties {
        println!("{p}");
    }
    println!("all passed: {}", report.passed);
    Ok(())
}
