//! Per-direction conjugate times over an icosphere, grouped into branches.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flow::PullbackSource;
use crate::geometry::Vec3;
use crate::jacobi::reduced::{direction_times, reduced_coefficients};
use crate::jacobi::{ConjugateEvent, EventMode, WkbDirection};
use crate::ode::Tolerances;

use super::grid::SphereGrid;

/// Nodes with `|c| < NEAR_DEGENERATE · |ω₀|` are solved with tighter tolerances.
pub const NEAR_DEGENERATE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    pub horizon: f64,
    pub tol: Tolerances,
    pub first_only: bool,
}

impl ScanOptions {
    pub fn new(horizon: f64) -> Self {
        ScanOptions {
            horizon,
            tol: Tolerances::default(),
            first_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeStatus {
    Solved,
    Degenerate,
    Failed(String),
}

#[derive(Debug, Clone)]
pub struct NodeResult {
    pub dir: WkbDirection,
    pub c: f64,
    pub status: NodeStatus,
    pub events: Vec<ConjugateEvent>,
    pub det_drift: f64,
}

impl NodeResult {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.events.iter().map(|e| e.t)
    }
}

/// Solves one direction; never fails, errors are recorded in the status.
pub fn solve_direction<P: PullbackSource>(src: &P, dir: WkbDirection, opts: &ScanOptions) -> NodeResult {
    let omega = src.vorticity();
    let c = omega.dot(&dir.xi0);
    let mut out = NodeResult {
        dir,
        c,
        status: NodeStatus::Solved,
        events: Vec::new(),
        det_drift: 0.0,
    };
    let sys = match reduced_coefficients(src, dir) {
        Ok(s) => s,
        Err(Error::DegenerateDirection { .. }) => {
            out.status = NodeStatus::Degenerate;
            return out;
        }
        Err(e) => {
            out.status = NodeStatus::Failed(e.to_string());
            return out;
        }
    };
    let tol = if c.abs() < NEAR_DEGENERATE * omega.norm() {
        opts.tol.tightened(1e-2)
    } else {
        opts.tol
    };
    let horizon = opts.horizon.min(src.horizon());
    match direction_times(&sys, horizon, tol) {
        Ok((mut events, drift)) => {
            if opts.first_only {
                events.truncate(1);
            }
            out.events = events;
            out.det_drift = drift;
        }
        Err(e) => out.status = NodeStatus::Failed(e.to_string()),
    }
    out
}

/// Solves each direction in parallel; results keep the input order.
pub fn scan_directions<P: PullbackSource>(src: &P, dirs: &[WkbDirection], opts: &ScanOptions) -> Vec<NodeResult> {
    dirs.par_iter().map(|d| solve_direction(src, *d, opts)).collect()
}

/// Connected set of `(node, event index)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: usize,
    pub members: Vec<(usize, usize)>,
}

#[derive(Debug, Clone)]
pub struct ScanResult {
    pub grid: SphereGrid,
    pub horizon: f64,
    /// Frame components of `ω₀`.
    pub omega: Vec3,
    pub nodes: Vec<NodeResult>,
    pub branches: Vec<Branch>,
    /// `branch_of[node][event]`.
    pub branch_of: Vec<Vec<usize>>,
    /// `|t_i − t_j|` over matched neighbour pairs.
    pub neighbour_jumps: Vec<f64>,
}

impl ScanResult {
    pub fn all_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.nodes.iter().flat_map(|n| n.times()).collect();
        t.sort_by(f64::total_cmp);
        t
    }

    pub fn degenerate_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.status == NodeStatus::Degenerate).count()
    }

    pub fn failed_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.status, NodeStatus::Failed(_))).count()
    }
}

/// The spherical frame of node `i`. At the poles `φ` is whatever `atan2`
/// returns, which still gives an orthonormal frame.
pub fn node_direction(grid: &SphereGrid, i: usize) -> WkbDirection {
    let mut d = WkbDirection::from_angles(grid.angles[i].0, grid.angles[i].1);
    d.xi0 = grid.nodes[i];
    d
}

pub fn scan_sphere<P: PullbackSource>(src: &P, grid: SphereGrid, opts: &ScanOptions) -> ScanResult {
    // one representative per antipodal pair
    let reps: Vec<usize> = (0..grid.len()).filter(|&i| grid.antipode[i] >= i).collect();
    let dirs: Vec<WkbDirection> = reps.iter().map(|&i| node_direction(&grid, i)).collect();
    let solved = scan_directions(src, &dirs, opts);

    let mut nodes: Vec<Option<NodeResult>> = vec![None; grid.len()];
    for (&i, r) in reps.iter().zip(solved) {
        let j = grid.antipode[i];
        if j != i {
            let mut mirror = r.clone();
            mirror.dir = node_direction(&grid, j);
            mirror.c = -r.c;
            for e in &mut mirror.events {
                e.direction = Some(mirror.dir);
                // frame flip (ξ₁, ξ₂) → (ξ₁, −ξ₂) at the antipode
                if e.kernel.len() == 2 {
                    e.kernel[1] = -e.kernel[1];
                }
            }
            nodes[j] = Some(mirror);
        }
        nodes[i] = Some(r);
    }
    let nodes: Vec<NodeResult> = nodes.into_iter().map(|n| n.expect("every node solved")).collect();
    let (branches, branch_of, neighbour_jumps) = link_branches(&grid, &nodes);
    ScanResult {
        horizon: opts.horizon,
        omega: src.vorticity(),
        grid,
        nodes,
        branches,
        branch_of,
        neighbour_jumps,
    }
}

fn find(parent: &mut [usize], mut i: usize) -> usize {
    while parent[i] != i {
        parent[i] = parent[parent[i]];
        i = parent[i];
    }
    i
}

/// Links the `k`-th event of each node to the `k`-th event of its
/// neighbours. Times are ordered per node, so this follows each branch until
/// it leaves the horizon.
fn link_branches(grid: &SphereGrid, nodes: &[NodeResult]) -> (Vec<Branch>, Vec<Vec<usize>>, Vec<f64>) {
    let mut offset = Vec::with_capacity(nodes.len() + 1);
    offset.push(0);
    for n in nodes {
        offset.push(offset.last().unwrap() + n.events.len());
    }
    let total = *offset.last().unwrap();
    let mut parent: Vec<usize> = (0..total).collect();
    let mut jumps = Vec::new();
    for &(a, b) in &grid.edges {
        for (k, (ea, eb)) in nodes[a].events.iter().zip(&nodes[b].events).enumerate() {
            jumps.push((ea.t - eb.t).abs());
            let (ra, rb) = (find(&mut parent, offset[a] + k), find(&mut parent, offset[b] + k));
            if ra != rb {
                parent[ra.max(rb)] = ra.min(rb);
            }
        }
    }
    let mut id_of_root = std::collections::HashMap::new();
    let mut branches: Vec<Branch> = Vec::new();
    let mut branch_of = vec![Vec::new(); nodes.len()];
    for (i, n) in nodes.iter().enumerate() {
        for k in 0..n.events.len() {
            let root = find(&mut parent, offset[i] + k);
            let id = *id_of_root.entry(root).or_insert_with(|| {
                branches.push(Branch {
                    id: branches.len(),
                    members: Vec::new(),
                });
                branches.len() - 1
            });
            branches[id].members.push((i, k));
            branch_of[i].push(id);
        }
    }
    (branches, branch_of, jumps)
}

/// Rows of the surface dump: `(θ, φ, ξ, branch, t)` per event.
pub fn surface_rows(scan: &ScanResult) -> Vec<(f64, f64, Vec3, usize, f64, EventMode)> {
    let mut rows = Vec::new();
    for (i, n) in scan.nodes.iter().enumerate() {
        let (th, ph) = scan.grid.angles[i];
        for (k, e) in n.events.iter().enumerate() {
            rows.push((th, ph, scan.grid.nodes[i], scan.branch_of[i][k], e.t, e.mode));
        }
    }
    rows
}

/// Re-solves one node and checks it against the stored times.
pub fn verify_node<P: PullbackSource>(src: &P, scan: &ScanResult, i: usize, opts: &ScanOptions) -> Result<f64> {
    let fresh = solve_direction(src, node_direction(&scan.grid, i), opts);
    let old: Vec<f64> = scan.nodes[i].times().collect();
    let new: Vec<f64> = fresh.times().collect();
    if old.len() != new.len() {
        return Err(Error::InvalidInput(format!(
            "node {i}: {} events stored, {} on re-solve",
            old.len(),
            new.len()
        )));
    }
    Ok(old.iter().zip(&new).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ConstantPullback;
    use crate::sphere::grid::icosphere;
    use std::f64::consts::TAU;

    #[test]
    fn killing_scan_matches_closed_form() {
        let omega = Vec3::new(0.3, -0.2, 0.9).normalize();
        let src = ConstantPullback::identity(omega);
        let scan = scan_sphere(&src, icosphere(2), &ScanOptions::new(25.0));
        assert_eq!(scan.failed_count(), 0);
        for n in &scan.nodes {
            let c = n.dir.xi0.dot(&omega);
            for (k, t) in n.times().enumerate() {
                let want = TAU * (k + 1) as f64 / c.abs();
                assert!((t - want).abs() < 1e-6, "{t} vs {want}");
            }
            let expected = (25.0 * c.abs() / TAU).floor() as usize;
            assert_eq!(n.events.len(), expected);
        }
        // antipodal nodes carry the same times
        for i in 0..scan.grid.len() {
            let j = scan.grid.antipode[i];
            let a: Vec<f64> = scan.nodes[i].times().collect();
            let b: Vec<f64> = scan.nodes[j].times().collect();
            assert_eq!(a, b);
        }
        // one branch per event index in each hemisphere
        assert_eq!(scan.branches.len(), 6);
    }

    #[test]
    fn zero_vorticity_is_all_degenerate() {
        let src = ConstantPullback::identity(Vec3::zeros());
        let scan = scan_sphere(&src, icosphere(1), &ScanOptions::new(10.0));
        assert_eq!(scan.degenerate_count(), scan.grid.len());
        assert!(scan.all_times().is_empty());
    }
}
