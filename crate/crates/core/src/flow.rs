//! Lagrangian flow `η(t, x)`, its Jacobian, and the metric pullback
//! `Λ(t, x) = Fᵀ Dηᵀ g(η) Dη F` in an orthonormal frame `F` at `x`.

use std::io::Write;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::geometry::{Chart, ChartPoint, Frame, Mat3, MetricSpec, Vec3};
use crate::io::csv_row;
use crate::model::FieldModel;
use crate::ode::{integrate, DenseSolution, OdeSystem, SolverOptions, Tolerances};

/// State `(η, Dη)` with `Dη` stored row-major.
struct FlowSystem<'a> {
    model: &'a FieldModel,
}

impl OdeSystem for FlowSystem<'_> {
    fn dim(&self) -> usize {
        12
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let eta = Vec3::new(y[0], y[1], y[2]);
        let u = self.model.velocity.at(t, &eta);
        let du = self.model.velocity.jacobian(t, &eta);
        let d = Mat3::from_row_slice(&y[3..12]);
        let dd = du * d;
        dy[..3].copy_from_slice(u.as_slice());
        for i in 0..3 {
            for j in 0..3 {
                dy[3 + 3 * i + j] = dd[(i, j)];
            }
        }
        Ok(())
    }

    fn check_state(&self, t: f64, y: &[f64]) -> Result<()> {
        let eta = Vec3::new(y[0], y[1], y[2]);
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::StepFailure {
                t,
                reason: "non-finite flow state".into(),
            });
        }
        if !self.model.chart.contains(&eta) {
            return Err(Error::TrajectoryLeftChart {
                t,
                point: [eta[0], eta[1], eta[2]],
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowState {
    pub t: f64,
    /// Wrapped into the chart box.
    pub eta: ChartPoint,
    pub d_eta: Mat3,
}

#[derive(Debug, Clone)]
pub struct FlowPath {
    start: ChartPoint,
    chart: Chart,
    sol: DenseSolution,
}

impl FlowPath {
    pub fn start(&self) -> &ChartPoint {
        &self.start
    }

    pub fn t_end(&self) -> f64 {
        self.sol.t_end()
    }

    pub fn step_count(&self) -> usize {
        self.sol.step_count()
    }

    /// `(η, Dη)` with periodic coordinates left unwrapped.
    pub fn unwrapped(&self, t: f64) -> (Vec3, Mat3) {
        let mut y = [0.0; 12];
        self.sol.eval_into(t, &mut y);
        (Vec3::new(y[0], y[1], y[2]), Mat3::from_row_slice(&y[3..12]))
    }

    pub fn state(&self, t: f64) -> FlowState {
        let (eta, d_eta) = self.unwrapped(t);
        FlowState {
            t,
            eta: self.chart.wrap(&eta).into(),
            d_eta,
        }
    }
}

pub fn advance_flow(model: &FieldModel, x: &ChartPoint, t_end: f64, tol: Tolerances) -> Result<FlowPath> {
    if !model.chart.contains(&x.coords) {
        return Err(Error::TrajectoryLeftChart {
            t: 0.0,
            point: x.as_array(),
        });
    }
    let mut y0 = vec![0.0; 12];
    y0[..3].copy_from_slice(x.coords.as_slice());
    y0[3] = 1.0;
    y0[7] = 1.0;
    y0[11] = 1.0;
    let sol = integrate(&FlowSystem { model }, 0.0, &y0, t_end, &SolverOptions::from(tol))?;
    Ok(FlowPath {
        start: *x,
        chart: model.chart.clone(),
        sol,
    })
}

/// `Dη(t)` at the requested times.
pub fn flow_jacobian(
    model: &FieldModel,
    x: &ChartPoint,
    t_end: f64,
    tol: Tolerances,
    times: &[f64],
) -> Result<Vec<Mat3>> {
    let path = advance_flow(model, x, t_end, tol)?;
    Ok(times.iter().map(|&t| path.unwrapped(t).1).collect())
}

/// `det Dη · √det g(η) / √det g(x) − 1`, zero for a volume-preserving flow.
pub fn volume_defect(metric: &MetricSpec, path: &FlowPath, t: f64) -> f64 {
    let (eta, d) = path.unwrapped(t);
    d.determinant() * metric.volume_density(&eta) / metric.volume_density(&path.start.coords) - 1.0
}

/// `Fᵀ Dηᵀ g(η) Dη F`, symmetrized.
pub fn pullback_at(metric: &MetricSpec, frame: &Frame, eta: &Vec3, d_eta: &Mat3) -> Mat3 {
    let m = d_eta * frame.basis;
    let l = m.transpose() * metric.at(eta) * m;
    0.5 * (l + l.transpose())
}

#[derive(Debug, Clone, PartialEq)]
pub struct PullbackPath {
    pub times: Vec<f64>,
    pub lambda: Vec<Mat3>,
    /// Frame components of the initial vorticity.
    pub vorticity: Vec3,
}

pub fn metric_pullback(
    path: &FlowPath,
    model: &FieldModel,
    frame: &Frame,
    times: &[f64],
) -> Result<PullbackPath> {
    let mut lambda = Vec::with_capacity(times.len());
    for &t in times {
        let (eta, d) = path.unwrapped(t);
        let l = pullback_at(&model.metric, frame, &eta, &d);
        if l.cholesky().is_none() {
            return Err(Error::NonSpdPullback { t });
        }
        lambda.push(l);
    }
    Ok(PullbackPath {
        times: times.to_vec(),
        lambda,
        vorticity: frame.components(&model.vorticity(&path.start)),
    })
}

/// Continuous access to `Λ(t)` and the frame components of `ω₀` at a fixed
/// point. The Jacobi solvers are generic over this.
pub trait PullbackSource: Sync {
    fn lambda(&self, t: f64) -> Mat3;

    fn vorticity(&self) -> Vec3;

    /// Largest `t` for which `lambda` is valid.
    fn horizon(&self) -> f64 {
        f64::INFINITY
    }
}

impl<P: PullbackSource + ?Sized> PullbackSource for &P {
    fn lambda(&self, t: f64) -> Mat3 {
        (**self).lambda(t)
    }
    fn vorticity(&self) -> Vec3 {
        (**self).vorticity()
    }
    fn horizon(&self) -> f64 {
        (**self).horizon()
    }
}

/// Time-independent `Λ`. With `Λ = id` this is the Killing-field case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPullback {
    pub lambda: Mat3,
    pub omega: Vec3,
}

impl ConstantPullback {
    pub fn identity(omega: Vec3) -> Self {
        ConstantPullback {
            lambda: Mat3::identity(),
            omega,
        }
    }
}

impl PullbackSource for ConstantPullback {
    fn lambda(&self, _t: f64) -> Mat3 {
        self.lambda
    }
    fn vorticity(&self) -> Vec3 {
        self.omega
    }
}

/// Closure-backed source, handy for synthetic coefficient paths.
pub struct FnPullback<F> {
    pub lambda: F,
    pub omega: Vec3,
}

impl<F: Fn(f64) -> Mat3 + Sync> PullbackSource for FnPullback<F> {
    fn lambda(&self, t: f64) -> Mat3 {
        (self.lambda)(t)
    }
    fn vorticity(&self) -> Vec3 {
        self.omega
    }
}

/// The annulus example: `Λ = [[1,0,0],[0,1,k],[0,k,1+k²]]` with
/// `k = √z (f(t+x) − f(x))` and `ω₀ = e₂`.
pub fn annulus_closed_form(f: &Expr, x: f64, z: f64, t: f64) -> (Mat3, Vec3) {
    let fx = |s: f64| f.eval(&[s, 0.0, 0.0], 0.0);
    let k = z.sqrt() * (fx(t + x) - fx(x));
    let l = Mat3::new(1.0, 0.0, 0.0, 0.0, 1.0, k, 0.0, k, 1.0 + k * k);
    (l, Vec3::y())
}

#[derive(Debug, Clone)]
pub struct AnnulusPullback {
    pub f: Expr,
    pub x: f64,
    pub z: f64,
}

impl AnnulusPullback {
    pub fn new(f: Expr, x: f64, z: f64) -> Self {
        AnnulusPullback { f, x, z }
    }

    pub fn k(&self, t: f64) -> f64 {
        let fx = |s: f64| self.f.eval(&[s, 0.0, 0.0], 0.0);
        self.z.sqrt() * (fx(t + self.x) - fx(self.x))
    }
}

impl PullbackSource for AnnulusPullback {
    fn lambda(&self, t: f64) -> Mat3 {
        annulus_closed_form(&self.f, self.x, self.z, t).0
    }
    fn vorticity(&self) -> Vec3 {
        Vec3::y()
    }
}

/// `Λ` from one integrated flow, read off the dense output.
#[derive(Debug, Clone)]
pub struct IntegratedPullback {
    path: FlowPath,
    metric: MetricSpec,
    frame: Frame,
    omega: Vec3,
}

impl IntegratedPullback {
    pub fn new(model: &FieldModel, x: &ChartPoint, horizon: f64, tol: Tolerances) -> Result<Self> {
        let frame = model.frame(x)?;
        let path = advance_flow(model, x, horizon, tol)?;
        Ok(IntegratedPullback {
            omega: frame.components(&model.vorticity(x)),
            metric: model.metric.clone(),
            frame,
            path,
        })
    }

    pub fn path(&self) -> &FlowPath {
        &self.path
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }
}

impl PullbackSource for IntegratedPullback {
    fn lambda(&self, t: f64) -> Mat3 {
        let (eta, d) = self.path.unwrapped(t);
        pullback_at(&self.metric, &self.frame, &eta, &d)
    }
    fn vorticity(&self) -> Vec3 {
        self.omega
    }
    fn horizon(&self) -> f64 {
        self.path.t_end()
    }
}

pub const TRAJECTORY_HEADER: &str = "t,eta1,eta2,eta3,\
Deta11,Deta12,Deta13,Deta21,Deta22,Deta23,Deta31,Deta32,Deta33,\
Lambda11,Lambda12,Lambda13,Lambda21,Lambda22,Lambda23,Lambda31,Lambda32,Lambda33";

/// Trajectory dump, one row per requested time. `η` is wrapped.
pub fn write_trajectory_csv(
    out: &mut impl Write,
    path: &FlowPath,
    metric: &MetricSpec,
    frame: &Frame,
    times: &[f64],
) -> Result<()> {
    writeln!(out, "{TRAJECTORY_HEADER}")?;
    for &t in times {
        let (raw, d) = path.unwrapped(t);
        let eta = path.chart.wrap(&raw);
        let l = pullback_at(metric, frame, &raw, &d);
        let mut row = vec![t, eta[0], eta[1], eta[2]];
        for m in [&d, &l] {
            for i in 0..3 {
                for j in 0..3 {
                    row.push(m[(i, j)]);
                }
            }
        }
        writeln!(out, "{}", csv_row(&row))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::builtin;
    use std::f64::consts::{PI, TAU};

    fn tight() -> Tolerances {
        Tolerances::new(1e-11, 1e-13)
    }

    #[test]
    fn constant_field_translates() {
        let model = FieldModel::from_json(
            r#"{"chart": {"bounds": [[-50, 50], [-50, 50], [-50, 50]]}, "velocity": [0.5, -1, 2]}"#,
        )
        .unwrap();
        let path = advance_flow(&model, &ChartPoint::new(0.1, 0.2, 0.3), 3.0, tight()).unwrap();
        let s = path.state(3.0);
        assert!((s.eta.coords - Vec3::new(1.6, -2.8, 6.3)).norm() < 1e-12);
        assert!((s.d_eta - Mat3::identity()).norm() < 1e-14);
    }

    #[test]
    fn leaving_the_chart_is_reported() {
        let model = FieldModel::from_json(
            r#"{"chart": {"bounds": [[0, 1], [0, 1], [0, 1]]}, "velocity": [1, 0, 0]}"#,
        )
        .unwrap();
        let err = advance_flow(&model, &ChartPoint::new(0.5, 0.5, 0.5), 2.0, tight()).unwrap_err();
        assert!(matches!(err, Error::TrajectoryLeftChart { .. }));
    }

    #[test]
    fn annulus_flow_translates_and_wraps() {
        let model = builtin::annulus("sin(x1)");
        let x = ChartPoint::new(5.0, 1.0, 1.5);
        let path = advance_flow(&model, &x, 4.0, tight()).unwrap();
        let s = path.state(4.0);
        assert!((s.eta.coords[0] - (9.0 - TAU)).abs() < 1e-11);
        assert!((s.eta.coords[1] - 1.0).abs() < 1e-14);
        assert!(volume_defect(&model.metric, &path, 4.0).abs() < 1e-12);
    }

    #[test]
    fn shear_matches_linear_flow() {
        let model = builtin::shear();
        let x = ChartPoint::new(0.3, -0.7, 0.2);
        let path = advance_flow(&model, &x, 2.5, Tolerances::default()).unwrap();
        for t in [0.0, 0.7, 2.5] {
            let s = path.state(t);
            let want = Vec3::new(0.3 - 0.7 * t, -0.7, 0.2);
            assert!((s.eta.coords - want).norm() < 1e-9);
            let mut d = Mat3::identity();
            d[(0, 1)] = t;
            assert!((s.d_eta - d).norm() < 1e-9);
        }
    }

    #[test]
    fn killing_jacobian_is_orthogonal_and_pullback_trivial() {
        let model = builtin::rigid_rotation([0.0, 0.0, 1.0]);
        let x = ChartPoint::new(0.4, -0.2, 0.9);
        let src = IntegratedPullback::new(&model, &x, 10.0, Tolerances::default()).unwrap();
        for k in 0..=20 {
            let t = 0.5 * k as f64;
            let (_, d) = src.path().unwrapped(t);
            assert!((d.transpose() * d - Mat3::identity()).norm() < 1e-8);
            assert!((src.lambda(t) - Mat3::identity()).norm() < 1e-8);
        }
        assert!((src.vorticity() - Vec3::z()).norm() < 1e-14);
    }

    #[test]
    fn annulus_closed_form_matches_integration() {
        let model = builtin::annulus("sin(x1)");
        let f = builtin::profile("sin(x1)").unwrap();
        for (x, z) in [(0.3, 1.2), (2.0, 1.9), (4.5, 1.5)] {
            let src = IntegratedPullback::new(&model, &ChartPoint::new(x, 0.4, z), 4.0 * PI, tight())
                .unwrap();
            let mut worst: f64 = 0.0;
            for k in 0..=200 {
                let t = 4.0 * PI * k as f64 / 200.0;
                let (l, w) = annulus_closed_form(&f, x, z, t);
                worst = worst.max((src.lambda(t) - l).abs().max());
                assert!((w - src.vorticity()).norm() < 1e-14);
            }
            assert!(worst < 1e-8, "sup error {worst:e}");
        }
    }

    #[test]
    fn closed_form_trivial_cases() {
        let zero = builtin::profile("0").unwrap();
        let sin = builtin::profile("sin(x1)").unwrap();
        assert_eq!(annulus_closed_form(&zero, 1.0, 1.5, 3.0).0, Mat3::identity());
        assert_eq!(annulus_closed_form(&sin, 1.0, 1.5, 0.0).0, Mat3::identity());
    }

    #[test]
    fn pullback_path_starts_at_identity() {
        let model = builtin::annulus("cos(2*x1)");
        let x = ChartPoint::new(1.0, 2.0, 1.3);
        let frame = model.frame(&x).unwrap();
        let path = advance_flow(&model, &x, 5.0, tight()).unwrap();
        let pb = metric_pullback(&path, &model, &frame, &[0.0, 1.0, 5.0]).unwrap();
        assert!((pb.lambda[0] - Mat3::identity()).norm() < 1e-12);
        for l in &pb.lambda {
            assert_eq!(*l, l.transpose());
        }
    }

    #[test]
    fn trajectory_csv_shape() {
        let model = builtin::shear();
        let x = ChartPoint::new(0.0, 1.0, 0.0);
        let frame = model.frame(&x).unwrap();
        let path = advance_flow(&model, &x, 1.0, tight()).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &path, &model.metric, &frame, &[0.0, 0.5, 1.0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines.iter().all(|l| l.split(',').count() == 22));
    }
}
