//! The smallest eigenvalue of the discretized index form on [0, T] crosses
//! zero exactly at the first conjugate time.

use std::f64::consts::TAU;

use epiconj::flow::ConstantPullback;
use epiconj::geometry::Vec3;
use epiconj::jacobi::{index_form_lambda, morse_index, reduced_coefficients, IndexFormOptions, WkbDirection};

fn main() -> epiconj::Result<()> {
    let src = ConstantPullback::identity(Vec3::new(0.0, 0.0, 1.0));
    let sys = reduced_coefficients(src, WkbDirection::from_angles(0.5, 0.0))?;
    let first = TAU / sys.c;
    println!("c = {:.6}, first conjugate time 2pi/c = {first:.6}", sys.c);
    for n in [100, 400] {
        let opts = IndexFormOptions { n };
        println!("N = {n}");
        for frac in [0.8, 0.95, 0.99, 1.01, 1.05, 1.5, 2.5] {
            let t = frac * first;
            println!(
                "  T = {frac:.2} t1  lambda_min = {:+.4e}  index = {}",
                index_form_lambda(&sys, t, opts)?,
                morse_index(&sys, t, opts)?
            );
        }
    }
    Ok(())
}
