//! The annulus example with f = sin: det Υ first vanishes at t = 2π for
//! every (x, z), while the WKB criterion fires strictly later.

use std::f64::consts::TAU;

use epiconj::flow::IntegratedPullback;
use epiconj::geometry::ChartPoint;
use epiconj::jacobi::{first_conjugate_time_full, AnnulusSolution};
use epiconj::model::builtin;
use epiconj::ode::Tolerances;
use epiconj::sphere::{scan_intervals, ScanOptions};

fn main() -> epiconj::Result<()> {
    let model = builtin::annulus("sin(x1)");
    let f = builtin::profile("sin(x1)")?;
    let tol = Tolerances::new(1e-11, 1e-13);
    println!("{:>6} {:>6} {:>16} {:>16} {:>12}", "x", "z", "det zero", "WKB first", "|det(2pi)|");
    for (x, z) in [(0.0, 1.0), (1.0, 1.5), (2.5, 1.9), (4.0, 1.2)] {
        let p = ChartPoint::new(x, 0.0, z);
        let src = IntegratedPullback::new(&model, &p, 20.0, tol)?;
        let full = first_conjugate_time_full(&src, 20.0, tol)?.map(|e| e.t);
        let (_, set) = scan_intervals(&src, 3, &ScanOptions::new(20.0));
        let wkb = set.intervals.first().map(|iv| iv[0]);
        let exact = AnnulusSolution::new(f.clone(), x, z, TAU + 0.5);
        println!(
            "{x:>6.2} {z:>6.2} {:>16.10} {:>16.10} {:>12.2e}",
            full.unwrap_or(f64::NAN),
            wkb.unwrap_or(f64::NAN),
            exact.det_upsilon(TAU).abs()
        );
    }
    Ok(())
}
