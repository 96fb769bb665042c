//! The amplitude transported along η (right form) equals the pushforward of
//! the frozen-frame amplitude (left form).

use epiconj::geometry::{ChartPoint, Vec3};
use epiconj::jacobi::transport::{admissible_amplitude, left_right_discrepancy, solve_right_form};
use epiconj::model::builtin;
use epiconj::ode::Tolerances;

fn main() -> epiconj::Result<()> {
    let tol = Tolerances::new(1e-12, 1e-14);
    for (name, model, x) in [
        ("annulus", builtin::annulus("sin(x1)"), ChartPoint::new(0.4, 1.0, 1.3)),
        ("shear", builtin::shear(), ChartPoint::new(0.0, 0.5, 0.0)),
    ] {
        let grad = Vec3::new(0.3, 1.0, -0.4);
        let a0 = admissible_amplitude(&model, &x, &grad, &Vec3::new(1.0, 0.2, 0.7));
        let right = solve_right_form(&model, &x, &grad, &a0, 10.0, tol)?;
        let end = right.state(10.0)?;
        println!("{name}: |grad Phi(10)| = {:.6}, q(10) = {:+.6}", end.grad_phi.norm(), end.q);
        println!("  sup |alpha - D eta beta| on [0, 10] = {:.2e}", left_right_discrepancy(&model, &x, &grad, &a0, 10.0, tol, 400)?);
    }
    Ok(())
}
