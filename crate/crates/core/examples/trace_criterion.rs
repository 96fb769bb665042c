//! Tr W = 2 against det S = 0 for a single direction of a synthetic
//! coefficient path, with the invariants that tie them together.

use epiconj::flow::FnPullback;
use epiconj::geometry::{Mat3, Vec3};
use epiconj::jacobi::{evolve_w, reduced_coefficients, wkb_conjugate_times, WkbDirection};
use epiconj::events::EventOptions;
use epiconj::ode::Tolerances;

fn main() -> epiconj::Result<()> {
    let src = FnPullback {
        lambda: |t: f64| {
            let s = 0.2 * (0.7 * t).sin();
            Mat3::new(1.0 + s, 0.1 * s, 0.0, 0.1 * s, 1.0 - s, 0.05, 0.0, 0.05, 1.0 + 0.5 * s)
        },
        omega: Vec3::new(0.2, -0.4, 1.1),
    };
    let sys = reduced_coefficients(&src, WkbDirection::from_angles(0.6, 1.9))?.canonical();
    let t_max = 30.0;
    let path = evolve_w(&sys, t_max, Tolerances::new(1e-12, 1e-14))?;
    println!("c = {:.6}", sys.c);
    println!("max |det W - 1| = {:.2e}", path.det_drift(2000));
    for e in wkb_conjugate_times(&path, t_max, &EventOptions::for_span(t_max)) {
        let s = path.s(e.t);
        let sv = s.singular_values();
        println!(
            "t = {:.10}  {}  det S = {:+.2e}  sigma_min/sigma_max = {:.2e}  closure = {:.2e}",
            e.t,
            e.mode,
            s.determinant(),
            sv.min() / sv.max(),
            path.closure_residual(e.t)
        );
    }
    Ok(())
}
