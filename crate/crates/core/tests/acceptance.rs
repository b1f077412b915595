//! Runs every runtime check on the default 32x32 configuration and prints
//! one PASS/FAIL line each. Exits non-zero if any check fails or errors.

use nematic_core::verify::CHECKS;
use nematic_core::SimulationParams;
use std::time::Instant;

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let base = SimulationParams::default();
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, check) in CHECKS {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str()) || *f == id.to_string()) {
            continue;
        }
        ran += 1;
        let t0 = Instant::now();
        match check(&base) {
            Ok(c) => {
                println!("{}  [{:.1}s]", c.line(), t0.elapsed().as_secs_f64());
                if !c.passed {
                    failed += 1;
                }
            }
            Err(e) => {
                println!("FAIL {id:>2} {name}: error: {e}");
                failed += 1;
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
