//! Rigid rotation of R³: every direction has conjugate times 2πk/⟨ω,ξ⟩, so
//! the scan over the sphere fills the single interval [2π/|ω|, H].
//!
//!     cargo run --example killing_interval -- [grid_level] [horizon]

use epiconj::flow::IntegratedPullback;
use epiconj::geometry::ChartPoint;
use epiconj::model::builtin;
use epiconj::ode::Tolerances;
use epiconj::sphere::{assemble_intervals, scan_intervals, ScanOptions};

fn main() -> epiconj::Result<()> {
    let mut args = std::env::args().skip(1);
    let level: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(3);
    let horizon: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(40.0);

    let model = builtin::rigid_rotation([0.0, 0.6, 0.8]);
    let x = ChartPoint::new(0.3, -0.2, 0.5);
    let src = IntegratedPullback::new(&model, &x, horizon, Tolerances::default().tightened(1e-2))?;

    let (scan, refined) = scan_intervals(&src, level, &ScanOptions::new(horizon));
    let raw = assemble_intervals(&scan);
    println!("nodes {}  branches {}  gap threshold {:.3e}", scan.grid.len(), scan.branches.len(), raw.gap);
    println!("grid intervals    {:?}", raw.intervals);
    println!("refined intervals {:?}  reaches horizon: {}", refined.intervals, refined.reaches_horizon);
    if let Some(iv) = refined.intervals.first() {
        println!("left end - 2pi = {:.3e}", iv[0] - std::f64::consts::TAU);
    }
    Ok(())
}
