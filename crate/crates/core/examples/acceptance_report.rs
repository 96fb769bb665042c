//! Runs the built-in reproduction checks and the two demonstrations.

use epiconj::reproduce::{flat_annulus_zeros, loose_tolerance_demo, run_all, DEFAULT_SEED};

fn main() -> epiconj::Result<()> {
    for c in run_all(DEFAULT_SEED) {
        println!("{c}");
    }
    println!("{}", loose_tolerance_demo(DEFAULT_SEED));
    println!("flat annulus det zeros: {:?}", flat_annulus_zeros()?);
    Ok(())
}
