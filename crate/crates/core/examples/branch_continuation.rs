//! Follows a conjugate-time branch t(ξ) along a great circle of directions
//! and re-checks each point with an independent solve.

use epiconj::flow::FnPullback;
use epiconj::geometry::{Mat3, Vec3};
use epiconj::jacobi::reduced::direction_times;
use epiconj::jacobi::{reduced_coefficients, WkbDirection};
use epiconj::ode::Tolerances;
use epiconj::sphere::{continue_branch, ContinuationOptions, GreatCircle};

fn main() -> epiconj::Result<()> {
    let src = FnPullback {
        lambda: |t: f64| Mat3::identity() + Mat3::new(0.2, 0.05, 0.0, 0.05, -0.1, 0.0, 0.0, 0.0, 0.1) * (0.9 * t).sin(),
        omega: Vec3::new(0.1, 0.3, 1.0),
    };
    let start = WkbDirection::from_angles(0.4, 0.3);
    let circle = GreatCircle::through(&start.xi0, &start.xi1)?;
    let tol = Tolerances::new(1e-11, 1e-13);
    let sys = reduced_coefficients(&src, circle.direction(0.0))?;
    let (events, _) = direction_times(&sys, 30.0, tol)?;
    let Some(first) = events.first() else {
        println!("no conjugate time below 30 at the start direction");
        return Ok(());
    };
    let opts = ContinuationOptions { dy: 0.05, steps: 16, tol, ..Default::default() };
    let branch = continue_branch(&src, &circle, first.t, &opts)?;
    println!("{:>6} {:>16} {:>12} {:>10}", "y", "t", "dt/dy", "recheck");
    for p in &branch {
        let sys = reduced_coefficients(&src, p.dir)?;
        let (ev, _) = direction_times(&sys, p.t + 1.0, tol)?;
        let gap = ev.iter().map(|e| (e.t - p.t).abs()).fold(f64::INFINITY, f64::min);
        println!("{:>6.3} {:>16.10} {:>12.5} {:>10.1e}{}", p.y, p.t, p.slope, gap, if p.tangential { "  contact" } else { "" });
    }
    Ok(())
}
