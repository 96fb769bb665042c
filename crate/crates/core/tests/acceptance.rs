//! One line per reproduction check; exits nonzero if any fails.

use epiconj::reproduce::{run_all, DEFAULT_SEED};

fn main() {
    let checks = run_all(DEFAULT_SEED);
    for c in &checks {
        println!("{c}");
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    println!("acceptance: {} passed, {failed} failed", checks.len() - failed);
    if failed > 0 || checks.len() != 8 {
        std::process::exit(1);
    }
}
