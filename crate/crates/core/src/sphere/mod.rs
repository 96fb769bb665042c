//! Sweeps of the WKB direction over the sphere at a fixed point.

pub mod continuation;
pub mod grid;
pub mod intervals;
pub mod scan;

pub use continuation::{branch_slope, continue_branch, BranchPoint, ContinuationOptions, GreatCircle};
pub use grid::{icosphere, SphereGrid};
pub use intervals::{
    assemble_intervals, cluster_times, first_epiconjugate_summary, first_times_ordered, refine_endpoints, scan_intervals, IntervalSet,
    SummaryRow,
};
pub use scan::{scan_directions, scan_sphere, Branch, NodeResult, NodeStatus, ScanOptions, ScanResult};
