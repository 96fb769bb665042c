//! In two dimensions the reduced equation is (a f')' = 0 and its solution
//! ∫₀ᵗ 1/a never returns to zero, however wildly a oscillates.

use epiconj::jacobi::two_dim_degeneracy_check;

fn main() {
    let cases: [(&str, Box<dyn Fn(f64) -> f64>); 3] = [
        ("constant", Box::new(|_| 1.0)),
        ("near-vanishing", Box::new(|t: f64| 1.0005 + (3.0 * t).sin())),
        ("sign change", Box::new(|t: f64| (0.5 * t).cos())),
    ];
    for (name, a) in cases {
        let cert = two_dim_degeneracy_check(a, 20.0);
        println!(
            "{name:>15}: min a = {:+.3e}  min increment = {:+.3e}  f(20) = {:.4}  certified: {}",
            cert.min_coefficient,
            cert.min_increment,
            cert.final_value,
            cert.holds()
        );
    }
}
