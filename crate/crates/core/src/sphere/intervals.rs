//! Closed intervals of conjugate-time values collected over the sphere.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::flow::{IntegratedPullback, PullbackSource};
use crate::geometry::{ChartPoint, Vec3};
use crate::jacobi::reduced::{evolve_w, reduced_coefficients};
use crate::jacobi::{first_conjugate_time_full, WkbDirection};
use crate::events::{locate_roots, EventOptions};
use crate::model::FieldModel;
use crate::ode::Tolerances;

use super::grid::icosphere;
use super::scan::{scan_sphere, ScanOptions, ScanResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSet {
    pub intervals: Vec<[f64; 2]>,
    pub reaches_horizon: bool,
    pub horizon: f64,
    /// Clustering threshold that produced the set.
    pub gap: f64,
}

impl IntervalSet {
    pub fn empty(horizon: f64) -> Self {
        IntervalSet {
            intervals: Vec::new(),
            reaches_horizon: false,
            horizon,
            gap: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, t: f64) -> bool {
        self.intervals.iter().any(|[a, b]| *a <= t && t <= *b)
    }

    fn merge(&mut self) {
        self.intervals.sort_by(|p, q| p[0].total_cmp(&q[0]));
        let mut out: Vec<[f64; 2]> = Vec::with_capacity(self.intervals.len());
        for iv in self.intervals.drain(..) {
            match out.last_mut() {
                Some(last) if iv[0] <= last[1] + self.gap => last[1] = last[1].max(iv[1]),
                _ => out.push(iv),
            }
        }
        self.intervals = out;
        if let Some(last) = self.intervals.last_mut() {
            if self.horizon - last[1] <= self.gap {
                last[1] = self.horizon;
                self.reaches_horizon = true;
            }
        }
    }
}

/// Groups sorted times into clusters separated by more than `gap`.
pub fn cluster_times(times: &[f64], gap: f64, horizon: f64) -> IntervalSet {
    let mut t: Vec<f64> = times.iter().copied().filter(|v| *v > 0.0 && *v <= horizon).collect();
    t.sort_by(f64::total_cmp);
    let mut set = IntervalSet {
        intervals: t.iter().map(|&v| [v, v]).collect(),
        reaches_horizon: false,
        horizon,
        gap,
    };
    set.merge();
    set
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Three times the median time jump between matched neighbouring nodes.
pub fn gap_threshold(scan: &ScanResult) -> f64 {
    median(scan.neighbour_jumps.clone())
        .filter(|m| *m > 0.0)
        .map(|m| 3.0 * m)
        .unwrap_or(1e-3 * scan.horizon)
}

pub fn assemble_intervals(scan: &ScanResult) -> IntervalSet {
    cluster_times(&scan.all_times(), gap_threshold(scan), scan.horizon)
}

/// Direction at tangent-plane offset `(u, v)` from `base`.
fn offset_direction(base: &WkbDirection, p: [f64; 2]) -> WkbDirection {
    WkbDirection::from_vector(&(base.xi0 + base.xi1 * p[0] + base.xi2 * p[1]))
}

/// Conjugate time of `dir` nearest to `t_ref`, searched on `(0, t_cap]`.
fn tracked_time<P: PullbackSource>(src: &P, dir: WkbDirection, t_ref: f64, t_cap: f64, tol: Tolerances) -> Option<f64> {
    let sys = reduced_coefficients(src, dir).ok()?;
    let t_cap = t_cap.min(src.horizon());
    let path = evolve_w(&sys, t_cap, tol).ok()?;
    locate_roots(
        |t| path.trace(t) - 2.0,
        |t| path.dtrace(t),
        0.0,
        t_cap,
        &EventOptions::for_span(t_cap),
    )
    .into_iter()
    .map(|r| r.t)
    .min_by(|a, b| (a - t_ref).abs().total_cmp(&(b - t_ref).abs()))
}

/// Nelder–Mead in two variables; `f` may return `+∞` outside its domain.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], step: f64, x_tol: f64, max_evals: usize) -> ([f64; 2], f64) {
    let mut pts = [start, [start[0] + step, start[1]], [start[0], start[1] + step]];
    let mut vals = pts.map(&f);
    let mut evals = 3;
    while evals < max_evals {
        let mut order = [0usize, 1, 2];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.map(|i| pts[i]);
        vals = order.map(|i| vals[i]);
        let size = (1..3)
            .map(|i| ((pts[i][0] - pts[0][0]).powi(2) + (pts[i][1] - pts[0][1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        if size < x_tol {
            break;
        }
        let centroid = [(pts[0][0] + pts[1][0]) / 2.0, (pts[0][1] + pts[1][1]) / 2.0];
        let along = |s: f64| [centroid[0] + s * (pts[2][0] - centroid[0]), centroid[1] + s * (pts[2][1] - centroid[1])];
        let xr = along(-1.0);
        let fr = f(xr);
        evals += 1;
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = f(xe);
            evals += 1;
            if fe < fr {
                (pts[2], vals[2]) = (xe, fe);
            } else {
                (pts[2], vals[2]) = (xr, fr);
            }
        } else if fr < vals[1] {
            (pts[2], vals[2]) = (xr, fr);
        } else {
            let xc = if fr < vals[2] { along(-0.5) } else { along(0.5) };
            let fc = f(xc);
            evals += 1;
            if fc < vals[2].min(fr) {
                (pts[2], vals[2]) = (xc, fc);
            } else {
                for i in 1..3 {
                    pts[i] = [(pts[i][0] + pts[0][0]) / 2.0, (pts[i][1] + pts[0][1]) / 2.0];
                    vals[i] = f(pts[i]);
                    evals += 1;
                }
            }
        }
    }
    let best = (0..3).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap();
    (pts[best], vals[best])
}

/// Local extremum of the tracked conjugate time around node `node`, starting
/// at its event time `t`. `sign = 1` minimizes, `−1` maximizes.
fn polish<P: PullbackSource>(src: &P, scan: &ScanResult, node: usize, t: f64, sign: f64, tol: Tolerances) -> f64 {
    let base = scan.nodes[node].dir;
    let cap = if sign > 0.0 { (1.5 * t).min(scan.horizon) } else { scan.horizon };
    let objective = |p: [f64; 2]| {
        tracked_time(src, offset_direction(&base, p), t, cap, tol)
            .filter(|v| (v - t).abs() < 0.5 * t)
            .map(|v| sign * v)
            .unwrap_or(f64::INFINITY)
    };
    let step = 0.5 * scan.grid.mean_spacing();
    let (_, v) = nelder_mead(objective, [0.0, 0.0], step, 1e-7, 400);
    if v.is_finite() {
        sign * v
    } else {
        t
    }
}

/// Moves each interval endpoint to the local extremum of the conjugate time
/// near the node that attains it. Endpoints only move outwards.
pub fn refine_endpoints<P: PullbackSource>(src: &P, scan: &ScanResult, set: &IntervalSet, tol: Tolerances) -> IntervalSet {
    let mut out = set.clone();
    let locate = |target: f64| {
        scan.nodes.iter().enumerate().find_map(|(i, n)| n.times().any(|t| t == target).then_some(i))
    };
    for iv in out.intervals.iter_mut() {
        if let Some(i) = locate(iv[0]) {
            iv[0] = iv[0].min(polish(src, scan, i, iv[0], 1.0, tol)).max(0.0);
        }
        if iv[1] < set.horizon {
            if let Some(i) = locate(iv[1]) {
                iv[1] = iv[1].max(polish(src, scan, i, iv[1], -1.0, tol)).min(set.horizon);
            }
        }
    }
    out.merge();
    out
}

/// Scan, assemble, and refine.
pub fn scan_intervals<P: PullbackSource>(src: &P, level: u32, opts: &ScanOptions) -> (ScanResult, IntervalSet) {
    let scan = scan_sphere(src, icosphere(level), opts);
    let raw = assemble_intervals(&scan);
    let refined = refine_endpoints(src, &scan, &raw, opts.tol);
    (scan, refined)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub x: ChartPoint,
    /// Smallest conjugate time over all WKB directions.
    pub wkb_first: Option<f64>,
    /// First zero of `det Υ`.
    pub full_first: Option<f64>,
    pub full_kernel: Option<Vec3>,
    /// `wkb_first ≥ full_first` up to `1e-3`, or neither found.
    pub ordered: bool,
}

/// The WKB-first time may not precede the first zero of `det Υ`.
pub fn first_times_ordered(wkb_first: Option<f64>, full_first: Option<f64>) -> bool {
    match (wkb_first, full_first) {
        (Some(w), Some(f)) => w >= f - 1e-3,
        (Some(_), None) => false,
        _ => true,
    }
}

pub fn first_epiconjugate_summary(
    model: &FieldModel,
    points: &[ChartPoint],
    horizon: f64,
    level: u32,
    tol: Tolerances,
) -> Vec<Result<SummaryRow>> {
    points
        .iter()
        .map(|x| {
            let src = IntegratedPullback::new(model, x, horizon, tol.tightened(1e-2))?;
            let full = first_conjugate_time_full(&src, horizon, tol)?;
            let opts = ScanOptions {
                horizon,
                tol,
                first_only: true,
            };
            let (_, set) = scan_intervals(&src, level, &opts);
            let wkb_first = set.intervals.first().map(|iv| iv[0]);
            let full_first = full.as_ref().map(|e| e.t);
            let ordered = first_times_ordered(wkb_first, full_first);
            Ok(SummaryRow {
                x: *x,
                wkb_first,
                full_first,
                full_kernel: full.map(|e| Vec3::from_column_slice(&e.kernel)),
                ordered,
            })
        })
        .collect()
}
