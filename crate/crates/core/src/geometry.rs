//! Charts, metrics, orthonormal frames and the first-order operators
//! (divergence, curl, Lie bracket) used throughout the crate.
//!
//! Every tensor is stored in chart components. Orthonormal frame components
//! are produced on demand through [`Frame`].

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{self, Expr, Var};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;

/// Box-shaped coordinate domain with optionally periodic directions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chart {
    pub bounds: [[f64; 2]; 3],
    #[serde(default)]
    pub periodic: [bool; 3],
}

impl Chart {
    pub fn unbounded() -> Self {
        Chart {
            bounds: [[-1e12, 1e12]; 3],
            periodic: [false; 3],
        }
    }

    pub fn period(&self, axis: usize) -> Option<f64> {
        self.periodic[axis].then(|| self.bounds[axis][1] - self.bounds[axis][0])
    }

    /// Non-periodic coordinates must lie inside the box; periodic ones are free.
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| {
            self.periodic[k] || (p[k] >= self.bounds[k][0] && p[k] <= self.bounds[k][1])
        })
    }

    /// Maps periodic coordinates back into `[lo, hi)`.
    pub fn wrap(&self, p: &Vec3) -> Vec3 {
        let mut q = *p;
        for k in 0..3 {
            if let Some(period) = self.period(k) {
                let lo = self.bounds[k][0];
                q[k] = lo + (q[k] - lo).rem_euclid(period);
            }
        }
        q
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub coords: Vec3,
}

impl ChartPoint {
    pub fn new(x1: f64, x2: f64, x3: f64) -> Self {
        ChartPoint {
            coords: Vec3::new(x1, x2, x3),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.coords[0], self.coords[1], self.coords[2]]
    }
}

impl From<Vec3> for ChartPoint {
    fn from(coords: Vec3) -> Self {
        ChartPoint { coords }
    }
}

fn parse_entry(src: &str, params: &BTreeMap<String, f64>, location: String) -> Result<Expr> {
    Expr::parse(src, params).map_err(|source| Error::Expression { location, source })
}

fn arr(v: &Vec3) -> [f64; 3] {
    [v[0], v[1], v[2]]
}

/// Covariant metric coefficients `g_ij(x)` with their symbolic first derivatives.
#[derive(Debug, Clone)]
pub struct MetricSpec {
    g: [[Expr; 3]; 3],
    // dg[k][i][j] = d g_ij / d x_k
    dg: [[[Expr; 3]; 3]; 3],
}

impl MetricSpec {
    pub fn euclidean() -> Self {
        let g = std::array::from_fn(|i| {
            std::array::from_fn(|j| Expr::constant(if i == j { 1.0 } else { 0.0 }))
        });
        Self::from_exprs(g)
    }

    /// Builds a metric from expressions. The upper triangle is authoritative.
    pub fn from_exprs(g: [[Expr; 3]; 3]) -> Self {
        let g: [[Expr; 3]; 3] =
            std::array::from_fn(|i| std::array::from_fn(|j| g[i.min(j)][i.max(j)].clone()));
        let dg = std::array::from_fn(|k| {
            std::array::from_fn(|i| std::array::from_fn(|j| g[i][j].diff(Var::COORDS[k])))
        });
        MetricSpec { g, dg }
    }

    pub fn parse(src: &[[&str; 3]; 3], params: &BTreeMap<String, f64>) -> Result<Self> {
        let mut g: [[Expr; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| Expr::constant(0.0)));
        for i in 0..3 {
            for j in 0..3 {
                g[i][j] = parse_entry(src[i][j], params, format!("metric[{i}][{j}]"))?;
            }
        }
        Ok(Self::from_exprs(g))
    }

    pub fn expr(&self, i: usize, j: usize) -> &Expr {
        &self.g[i][j]
    }

    pub fn at(&self, x: &Vec3) -> Mat3 {
        let p = arr(x);
        Mat3::from_fn(|i, j| self.g[i][j].eval(&p, 0.0))
    }

    /// `d g / d x_k` as a matrix.
    pub fn derivative(&self, k: usize, x: &Vec3) -> Mat3 {
        let p = arr(x);
        Mat3::from_fn(|i, j| self.dg[k][i][j].eval(&p, 0.0))
    }

    pub fn volume_density(&self, x: &Vec3) -> f64 {
        self.at(x).determinant().sqrt()
    }

    /// Symmetric positive-definiteness of `g(x)`.
    pub fn check_spd(&self, x: &Vec3) -> Result<Mat3> {
        let g = self.at(x);
        let scale = g.abs().max().max(1.0);
        let symmetric = (g - g.transpose()).abs().max() <= 1e-12 * scale;
        if symmetric && g.iter().all(|v| v.is_finite()) && g.cholesky().is_some() {
            Ok(g)
        } else {
            Err(Error::NonSpdMetric { point: arr(x) })
        }
    }

    /// Christoffel symbols of the second kind; `gamma[i][(j, k)] = Γ^i_jk`.
    pub fn christoffel(&self, x: &Vec3) -> [Mat3; 3] {
        let ginv = self.at(x).try_inverse().unwrap_or_else(Mat3::zeros);
        let d: [Mat3; 3] = std::array::from_fn(|k| self.derivative(k, x));
        // lowered[l][(j,k)] = 1/2 (d_j g_lk + d_k g_lj - d_l g_jk)
        let lowered: [Mat3; 3] = std::array::from_fn(|l| {
            Mat3::from_fn(|j, k| 0.5 * (d[j][(l, k)] + d[k][(l, j)] - d[l][(j, k)]))
        });
        std::array::from_fn(|i| {
            let mut m = Mat3::zeros();
            for (l, low) in lowered.iter().enumerate() {
                m += low * ginv[(i, l)];
            }
            m
        })
    }
}

/// Orthonormal frame at a point; the columns of `basis` are `e1, e2, e3` in
/// chart components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    pub basis: Mat3,
    pub metric: Mat3,
}

impl Frame {
    pub fn e(&self, i: usize) -> Vec3 {
        self.basis.column(i).into_owned()
    }

    /// Frame components of a chart vector.
    pub fn components(&self, v: &Vec3) -> Vec3 {
        self.basis.transpose() * self.metric * v
    }

    /// Chart vector with the given frame components.
    pub fn vector(&self, comps: &Vec3) -> Vec3 {
        self.basis * comps
    }

    pub fn gram(&self) -> Mat3 {
        self.basis.transpose() * self.metric * self.basis
    }
}

/// Gram–Schmidt on the coordinate basis `∂1, ∂2, ∂3` with respect to `g(x)`.
/// The result has the chart orientation.
pub fn orthonormal_frame(metric: &MetricSpec, x: &ChartPoint) -> Result<Frame> {
    let g = metric.check_spd(&x.coords)?;
    let ip = |a: &Vec3, b: &Vec3| (a.transpose() * g * b)[(0, 0)];
    let mut cols: [Vec3; 3] = [Vec3::x(), Vec3::y(), Vec3::z()];
    for i in 0..3 {
        let mut v = cols[i];
        // two passes of modified Gram–Schmidt
        for _ in 0..2 {
            for c in cols.iter().take(i) {
                v -= *c * ip(c, &v);
            }
        }
        let n = ip(&v, &v).sqrt();
        cols[i] = v / n;
    }
    Ok(Frame {
        basis: Mat3::from_columns(&cols),
        metric: g,
    })
}

/// Velocity field `u(t, x)` in contravariant chart components together with
/// its symbolic Jacobian.
#[derive(Debug, Clone)]
pub struct VelocityFieldSpec {
    u: [Expr; 3],
    // du[i][j] = d u^i / d x_j
    du: [[Expr; 3]; 3],
    // du_dt[i] = d u^i / dt
    du_dt: [Expr; 3],
    steady: bool,
}

impl VelocityFieldSpec {
    pub fn from_exprs(u: [Expr; 3]) -> Self {
        let du = std::array::from_fn(|i| std::array::from_fn(|j| u[i].diff(Var::COORDS[j])));
        let du_dt = std::array::from_fn(|i| u[i].diff(Var::T));
        let steady = !u.iter().any(|e| e.depends_on(Var::T));
        VelocityFieldSpec {
            u,
            du,
            du_dt,
            steady,
        }
    }

    pub fn parse(src: &[&str; 3], params: &BTreeMap<String, f64>) -> Result<Self> {
        let mut u: [Expr; 3] = std::array::from_fn(|_| Expr::constant(0.0));
        for i in 0..3 {
            u[i] = parse_entry(src[i], params, format!("velocity[{i}]"))?;
        }
        Ok(Self::from_exprs(u))
    }

    pub fn is_steady(&self) -> bool {
        self.steady
    }

    pub fn expr(&self, i: usize) -> &Expr {
        &self.u[i]
    }

    pub fn at(&self, t: f64, x: &Vec3) -> Vec3 {
        let p = arr(x);
        Vec3::from_fn(|i, _| self.u[i].eval(&p, t))
    }

    /// `(∇u)_ij = d u^i / d x_j`.
    pub fn jacobian(&self, t: f64, x: &Vec3) -> Mat3 {
        let p = arr(x);
        Mat3::from_fn(|i, j| self.du[i][j].eval(&p, t))
    }

    pub fn time_derivative(&self, t: f64, x: &Vec3) -> Vec3 {
        let p = arr(x);
        Vec3::from_fn(|i, _| self.du_dt[i].eval(&p, t))
    }
}

/// `div u = d_i u^i + u^i d_i log sqrt(det g)`.
pub fn divergence(field: &VelocityFieldSpec, metric: &MetricSpec, x: &ChartPoint, t: f64) -> f64 {
    let p = &x.coords;
    let u = field.at(t, p);
    let du = field.jacobian(t, p);
    let ginv = metric.at(p).try_inverse().unwrap_or_else(Mat3::zeros);
    let mut div = du.trace();
    for k in 0..3 {
        div += u[k] * 0.5 * (ginv * metric.derivative(k, p)).trace();
    }
    div
}

fn levi_civita_curl(dflat: &Mat3, density: f64) -> Vec3 {
    // dflat[(j, k)] = d_j (u_flat)_k
    Vec3::new(
        dflat[(1, 2)] - dflat[(2, 1)],
        dflat[(2, 0)] - dflat[(0, 2)],
        dflat[(0, 1)] - dflat[(1, 0)],
    ) / density
}

/// Contravariant curl: `(curl u)^i = (1/sqrt(det g)) ε^{ijk} d_j (g_kl u^l)`.
pub fn curl(field: &VelocityFieldSpec, metric: &MetricSpec, x: &ChartPoint, t: f64) -> Vec3 {
    let p = &x.coords;
    let u = field.at(t, p);
    let du = field.jacobian(t, p);
    let g = metric.at(p);
    let mut dflat = Mat3::zeros();
    for j in 0..3 {
        let dg = metric.derivative(j, p);
        let row = dg * u + g * du.column(j);
        for k in 0..3 {
            dflat[(j, k)] = row[k];
        }
    }
    levi_civita_curl(&dflat, g.determinant().sqrt())
}

/// `[a, b]^i = a^j d_j b^i - b^j d_j a^i` from values and Jacobians.
pub fn lie_bracket(a: &Vec3, da: &Mat3, b: &Vec3, db: &Mat3) -> Vec3 {
    db * a - da * b
}

pub fn metric_norm(g: &Mat3, v: &Vec3) -> f64 {
    (v.transpose() * g * v)[(0, 0)].max(0.0).sqrt()
}

/// Symbolic curl of a velocity field, kept so its Jacobian is available
/// for the vorticity transport residual.
#[derive(Debug, Clone)]
pub struct VorticityField {
    w: [Expr; 3],
    dw: [[Expr; 3]; 3],
    dw_dt: [Expr; 3],
}

impl VorticityField {
    pub fn new(field: &VelocityFieldSpec, metric: &MetricSpec) -> Self {
        let flat: Vec<Expr> = (0..3)
            .map(|k| {
                (0..3).fold(Expr::constant(0.0), |acc, l| {
                    expr::add(acc, expr::mul(metric.expr(k, l).clone(), field.expr(l).clone()))
                })
            })
            .collect();
        let m = |i: usize, j: usize| metric.expr(i, j).clone();
        let det = {
            let minor = |a: usize, b: usize, c: usize, d: usize| {
                expr::sub(expr::mul(m(a, c), m(b, d)), expr::mul(m(a, d), m(b, c)))
            };
            expr::add(
                expr::sub(
                    expr::mul(m(0, 0), minor(1, 2, 1, 2)),
                    expr::mul(m(0, 1), minor(1, 2, 0, 2)),
                ),
                expr::mul(m(0, 2), minor(1, 2, 0, 1)),
            )
        };
        let density = expr::call(expr::Func::Sqrt, det);
        let d = |k: usize, j: usize| flat[k].diff(Var::COORDS[j]);
        let w: [Expr; 3] = [
            expr::div(expr::sub(d(2, 1), d(1, 2)), density.clone()),
            expr::div(expr::sub(d(0, 2), d(2, 0)), density.clone()),
            expr::div(expr::sub(d(1, 0), d(0, 1)), density),
        ];
        let dw = std::array::from_fn(|i| std::array::from_fn(|j| w[i].diff(Var::COORDS[j])));
        let dw_dt = std::array::from_fn(|i| w[i].diff(Var::T));
        VorticityField { w, dw, dw_dt }
    }

    pub fn at(&self, t: f64, x: &Vec3) -> Vec3 {
        let p = arr(x);
        Vec3::from_fn(|i, _| self.w[i].eval(&p, t))
    }

    pub fn jacobian(&self, t: f64, x: &Vec3) -> Mat3 {
        let p = arr(x);
        Mat3::from_fn(|i, j| self.dw[i][j].eval(&p, t))
    }

    pub fn time_derivative(&self, t: f64, x: &Vec3) -> Vec3 {
        let p = arr(x);
        Vec3::from_fn(|i, _| self.dw_dt[i].eval(&p, t))
    }
}

/// Supremum over the samples of `|[u, curl u]|_g` at `t = 0`.
pub fn steadiness_residual(
    field: &VelocityFieldSpec,
    metric: &MetricSpec,
    samples: &[ChartPoint],
) -> f64 {
    let vort = VorticityField::new(field, metric);
    samples
        .iter()
        .map(|x| {
            let p = &x.coords;
            let b = lie_bracket(
                &field.at(0.0, p),
                &field.jacobian(0.0, p),
                &vort.at(0.0, p),
                &vort.jacobian(0.0, p),
            );
            metric_norm(&metric.at(p), &b)
        })
        .fold(0.0, f64::max)
}

/// Supremum of `|d/dt curl u + [u, curl u]|_g` over samples and times. For a
/// steady field at `t = 0` this is [`steadiness_residual`].
pub fn vorticity_transport_residual(
    field: &VelocityFieldSpec,
    metric: &MetricSpec,
    samples: &[ChartPoint],
    times: &[f64],
) -> f64 {
    let vort = VorticityField::new(field, metric);
    let mut worst: f64 = 0.0;
    for &t in times {
        for x in samples {
            let p = &x.coords;
            let r = vort.time_derivative(t, p)
                + lie_bracket(
                    &field.at(t, p),
                    &field.jacobian(t, p),
                    &vort.at(t, p),
                    &vort.jacobian(t, p),
                );
            worst = worst.max(metric_norm(&metric.at(p), &r));
        }
    }
    worst
}

/// Cross-product matrix: `cross_matrix(w) * v = w × v`.
pub fn cross_matrix(w: &Vec3) -> Mat3 {
    Mat3::new(0.0, -w[2], w[1], w[2], 0.0, -w[0], -w[1], w[0], 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn no_params() -> BTreeMap<String, f64> {
        BTreeMap::new()
    }

    fn annulus_metric() -> MetricSpec {
        MetricSpec::parse(
            &[
                ["x3", "0", "0"],
                ["0", "1", "sin(x1)"],
                ["0", "sin(x1)", "sin(x1)^2 + 1/x3"],
            ],
            &no_params(),
        )
        .unwrap()
    }

    #[test]
    fn euclidean_frame_is_standard_basis() {
        let f = orthonormal_frame(&MetricSpec::euclidean(), &ChartPoint::new(0.3, -2.0, 5.0)).unwrap();
        assert!((f.basis - Mat3::identity()).abs().max() < 1e-15);
    }

    #[test]
    fn annulus_frame_matches_closed_form() {
        let metric = annulus_metric();
        for &(x, z) in &[(0.4, 1.2), (2.5, 1.9), (5.0, 1.0)] {
            let p = ChartPoint::new(x, 0.7, z);
            let f = orthonormal_frame(&metric, &p).unwrap();
            let e1 = Vec3::new(z.powf(-0.5), 0.0, 0.0);
            let e2 = Vec3::new(0.0, 1.0, 0.0);
            let e3 = Vec3::new(0.0, -x.sin() * z.sqrt(), z.sqrt());
            assert!((f.e(0) - e1).norm() < 1e-12);
            assert!((f.e(1) - e2).norm() < 1e-12);
            assert!((f.e(2) - e3).norm() < 1e-12);
            assert!(f.basis.determinant() > 0.0);
        }
    }

    #[test]
    fn non_spd_metric_is_rejected() {
        let m = MetricSpec::parse(&[["1", "0", "0"], ["0", "-1", "0"], ["0", "0", "1"]], &no_params()).unwrap();
        assert!(matches!(
            orthonormal_frame(&m, &ChartPoint::new(0.0, 0.0, 0.0)),
            Err(Error::NonSpdMetric { .. })
        ));
    }

    #[test]
    fn random_spd_frames_are_orthonormal() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let a = Mat3::from_fn(|_, _| rng.gen_range(-1.0..1.0));
            let g = a * a.transpose() + Mat3::identity() * 0.2;
            let exprs = std::array::from_fn(|i| std::array::from_fn(|j| Expr::constant(g[(i, j)])));
            let m = MetricSpec::from_exprs(exprs);
            let f = orthonormal_frame(&m, &ChartPoint::new(0.0, 0.0, 0.0)).unwrap();
            assert!((f.gram() - Mat3::identity()).abs().max() < 1e-12);
            assert!(f.basis.determinant() > 0.0);
        }
    }

    #[test]
    fn annulus_curl_is_d_y_and_flow_is_steady() {
        let metric = annulus_metric();
        let u = VelocityFieldSpec::parse(&["1", "0", "0"], &no_params()).unwrap();
        let samples: Vec<_> = (0..20)
            .map(|k| ChartPoint::new(0.31 * k as f64, 0.2 * k as f64, 1.0 + 0.05 * k as f64))
            .collect();
        for p in &samples {
            let w = curl(&u, &metric, p, 0.0);
            assert!((w - Vec3::y()).norm() < 1e-13, "{w:?}");
            assert!(divergence(&u, &metric, p, 0.0).abs() < 1e-14);
        }
        assert!(steadiness_residual(&u, &metric, &samples) < 1e-13);
    }

    #[test]
    fn constant_field_has_no_curl() {
        let u = VelocityFieldSpec::parse(&["1.5", "-2", "0.25"], &no_params()).unwrap();
        let w = curl(&u, &MetricSpec::euclidean(), &ChartPoint::new(1.0, 2.0, 3.0), 0.0);
        assert_eq!(w, Vec3::zeros());
    }

    #[test]
    fn rigid_rotation_is_steady() {
        let u = VelocityFieldSpec::parse(&["-x2/2", "x1/2", "0"], &no_params()).unwrap();
        let samples = [ChartPoint::new(0.3, -1.0, 2.0), ChartPoint::new(-4.0, 2.0, 0.5)];
        let w = curl(&u, &MetricSpec::euclidean(), &samples[0], 0.0);
        assert!((w - Vec3::z()).norm() < 1e-15);
        assert!(steadiness_residual(&u, &MetricSpec::euclidean(), &samples) < 1e-15);
    }

    #[test]
    fn christoffel_symbols_of_polar_like_metric() {
        // g = diag(1, x1^2, 1): Γ^1_22 = -x1, Γ^2_12 = Γ^2_21 = 1/x1
        let m = MetricSpec::parse(&[["1", "0", "0"], ["0", "x1^2", "0"], ["0", "0", "1"]], &no_params()).unwrap();
        let x = Vec3::new(2.0, 0.3, 0.0);
        let gamma = m.christoffel(&x);
        assert!((gamma[0][(1, 1)] + 2.0).abs() < 1e-14);
        assert!((gamma[1][(0, 1)] - 0.5).abs() < 1e-14);
        assert!((gamma[1][(1, 0)] - 0.5).abs() < 1e-14);
        assert!(gamma[2].abs().max() < 1e-14);
    }

    #[test]
    fn chart_wrap_and_contains() {
        let chart = Chart {
            bounds: [[0.0, 1.0], [0.0, 2.0], [1.0, 2.0]],
            periodic: [true, true, false],
        };
        let q = chart.wrap(&Vec3::new(2.25, -0.5, 1.5));
        assert!((q - Vec3::new(0.25, 1.5, 1.5)).norm() < 1e-15);
        assert!(chart.contains(&Vec3::new(7.0, -3.0, 1.5)));
        assert!(!chart.contains(&Vec3::new(0.5, 0.5, 2.5)));
    }
}
