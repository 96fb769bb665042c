use epiconj::flow::{AnnulusPullback, FnPullback};
use epiconj::geometry::{Mat3, Vec3};
use epiconj::model::builtin;
use epiconj::sphere::scan::verify_node;
use epiconj::sphere::{icosphere, scan_intervals, scan_sphere, ScanOptions};

fn wobbly() -> FnPullback<impl Fn(f64) -> Mat3 + Sync> {
    FnPullback {
        lambda: |t: f64| Mat3::identity() + Mat3::new(0.1, 0.05, 0.0, 0.05, -0.08, 0.02, 0.0, 0.02, 0.06) * (0.8 * t).sin(),
        omega: Vec3::new(0.3, -0.2, 0.9),
    }
}

#[test]
fn coinciding_nodes_agree_across_levels() {
    let src = wobbly();
    let opts = ScanOptions::new(20.0);
    let coarse = scan_sphere(&src, icosphere(1), &opts);
    let fine = scan_sphere(&src, icosphere(2), &opts);
    // coarse nodes are a prefix of the finer grid
    for i in 0..coarse.grid.len() {
        assert!((coarse.grid.nodes[i] - fine.grid.nodes[i]).norm() < 1e-15);
        let a: Vec<f64> = coarse.nodes[i].times().collect();
        let b: Vec<f64> = fine.nodes[i].times().collect();
        assert_eq!(a.len(), b.len(), "node {i}");
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6, "node {i}: {x} vs {y}");
        }
    }
}

#[test]
fn antipodal_nodes_share_times() {
    let src = wobbly();
    let scan = scan_sphere(&src, icosphere(2), &ScanOptions::new(20.0));
    for i in 0..scan.grid.len() {
        let j = scan.grid.antipode[i];
        let a: Vec<f64> = scan.nodes[i].times().collect();
        let b: Vec<f64> = scan.nodes[j].times().collect();
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-6);
        }
    }
    // the mirrored half was never solved directly; re-solve a few of them
    for i in (0..scan.grid.len()).filter(|&i| scan.grid.antipode[i] < i).take(8) {
        assert!(verify_node(&src, &scan, i, &ScanOptions::new(20.0)).unwrap() < 1e-6);
    }
}

#[test]
fn intervals_grow_with_the_horizon() {
    let src = AnnulusPullback::new(builtin::profile("sin(x1)").unwrap(), 0.7, 1.4);
    let (_, short) = scan_intervals(&src, 2, &ScanOptions::new(12.0));
    let (_, long) = scan_intervals(&src, 2, &ScanOptions::new(20.0));
    assert!(!short.is_empty());
    for [a, b] in &short.intervals {
        assert!(long.intervals.iter().any(|[c, d]| c <= &(a + 1e-6) && b - 1e-6 <= *d), "{short:?} vs {long:?}");
    }
}

#[test]
fn annulus_intervals_stable_across_levels() {
    let src = AnnulusPullback::new(builtin::profile("sin(x1)").unwrap(), 0.7, 1.4);
    let (_, l2) = scan_intervals(&src, 2, &ScanOptions::new(20.0));
    let (_, l3) = scan_intervals(&src, 3, &ScanOptions::new(20.0));
    assert_eq!(l2.intervals.len(), l3.intervals.len(), "{l2:?} vs {l3:?}");
    for (p, q) in l2.intervals.iter().zip(&l3.intervals) {
        assert!((p[0] - q[0]).abs() < 1e-4 && (p[1] - q[1]).abs() < 1e-4, "{p:?} vs {q:?}");
    }
}
