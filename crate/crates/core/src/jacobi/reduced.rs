//! WKB-reduced 2×2 system for a fixed direction `ξ₀`.
//!
//! With `B = [ξ₁ ξ₂]`, `Λ̃ = Bᵀ Λ B`, `c = ⟨ω₀, ξ₀⟩` and `Θ = c Λ̃⁻¹`:
//!
//! ```text
//! W' = −J Θ W,   W(0) = id
//! S' = Λ̃⁻¹ W,    S(0) = 0
//! ```
//!
//! `det W ≡ 1` and `W + c J S ≡ id`, so `det S = (2 − Tr W) / c²` and the
//! conjugate times of the direction are the roots of `Tr W = 2`.

use nalgebra::{Matrix2, Matrix3x2, Vector2};

use crate::error::{Error, Result};
use crate::events::{locate_roots, EventOptions, RootKind};
use crate::flow::PullbackSource;
use crate::geometry::{Mat3, Vec3};
use crate::ode::{integrate, DenseSolution, OdeSystem, SolverOptions, Tolerances};

use super::{ConjugateEvent, EventMode};

pub type Mat2 = Matrix2<f64>;
pub type Vec2 = Vector2<f64>;

/// `J = [[0, −1], [1, 0]]`, the action of `ξ₀ ×` on `span{ξ₁, ξ₂}`.
pub fn j_matrix() -> Mat2 {
    Mat2::new(0.0, -1.0, 1.0, 0.0)
}

/// Relative width of the excluded band around `⟨ω₀, ξ₀⟩ = 0`.
pub const DEGENERATE_BAND: f64 = 1e-8;

/// Unit direction with a positively oriented orthonormal frame
/// `ξ₀ × ξ₁ = ξ₂`, all in frame components at `x`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WkbDirection {
    pub xi0: Vec3,
    pub xi1: Vec3,
    pub xi2: Vec3,
    pub theta: f64,
    pub phi: f64,
}

impl WkbDirection {
    /// `ξ₀ = (sinθ cosφ, sinθ sinφ, cosθ)`, `ξ₁ = ∂_θ ξ₀`, `ξ₂ = ∂_φ ξ₀ / sinθ`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        WkbDirection {
            xi0: Vec3::new(st * cp, st * sp, ct),
            xi1: Vec3::new(ct * cp, ct * sp, -st),
            xi2: Vec3::new(-sp, cp, 0.0),
            theta,
            phi,
        }
    }

    /// Spherical frame of `v / |v|`. `v` must be nonzero.
    pub fn from_vector(v: &Vec3) -> Self {
        let n = v.normalize();
        let mut d = Self::from_angles(n[2].clamp(-1.0, 1.0).acos(), n[1].atan2(n[0]));
        d.xi0 = n;
        d
    }

    /// Arbitrary orthonormal completion; `xi1` is re-orthogonalized against `xi0`.
    pub fn with_frame(xi0: Vec3, xi1: Vec3) -> Self {
        let xi0 = xi0.normalize();
        let xi1 = (xi1 - xi0 * xi0.dot(&xi1)).normalize();
        WkbDirection {
            xi0,
            xi1,
            xi2: xi0.cross(&xi1),
            theta: xi0[2].clamp(-1.0, 1.0).acos(),
            phi: xi0[1].atan2(xi0[0]),
        }
    }

    /// `−ξ₀` with frame `(ξ₁, −ξ₂)`; the spherical frame at the antipode.
    pub fn antipodal(&self) -> Self {
        let mut phi = self.phi + std::f64::consts::PI;
        if phi > std::f64::consts::PI {
            phi -= std::f64::consts::TAU;
        }
        WkbDirection {
            xi0: -self.xi0,
            xi1: self.xi1,
            xi2: -self.xi2,
            theta: std::f64::consts::PI - self.theta,
            phi,
        }
    }

    pub fn complement(&self) -> Matrix3x2<f64> {
        Matrix3x2::from_columns(&[self.xi1, self.xi2])
    }

    /// 3D vector with components `v` in `(ξ₁, ξ₂)`.
    pub fn lift(&self, v: &Vec2) -> Vec3 {
        self.xi1 * v[0] + self.xi2 * v[1]
    }
}

pub(crate) fn project(l: &Mat3, b: &Matrix3x2<f64>) -> Mat2 {
    let m = b.transpose() * l * b;
    0.5 * (m + m.transpose())
}

pub(crate) fn inverse2(m: &Mat2, t: f64) -> Result<Mat2> {
    let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
    if !(m[(0, 0)] > 0.0 && det > 0.0) {
        return Err(Error::NonSpdPullback { t });
    }
    Ok(Mat2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

#[derive(Debug, Clone, Copy)]
pub struct ReducedSystem<P> {
    pub src: P,
    pub dir: WkbDirection,
    pub c: f64,
}

pub fn reduced_coefficients<P: PullbackSource>(src: P, dir: WkbDirection) -> Result<ReducedSystem<P>> {
    let omega = src.vorticity();
    let c = omega.dot(&dir.xi0);
    if c.abs() < DEGENERATE_BAND * omega.norm() || c == 0.0 {
        return Err(Error::DegenerateDirection { c });
    }
    Ok(ReducedSystem { src, dir, c })
}

impl<P: PullbackSource> ReducedSystem<P> {
    /// `Λ̃ = [⟨ξᵢ, Λ ξⱼ⟩]`.
    pub fn lambda_tilde(&self, t: f64) -> Mat2 {
        project(&self.src.lambda(t), &self.dir.complement())
    }

    /// `Θ = c Λ̃⁻¹`.
    pub fn theta(&self, t: f64) -> Result<Mat2> {
        Ok(inverse2(&self.lambda_tilde(t), t)? * self.c)
    }

    /// The same problem posed for `−ξ₀` when `c < 0`, so that `Θ` is
    /// positive definite. Conjugate times are unchanged.
    pub fn canonical(self) -> Self {
        if self.c >= 0.0 {
            return self;
        }
        ReducedSystem {
            dir: self.dir.antipodal(),
            c: -self.c,
            src: self.src,
        }
    }
}

struct WSystem<'a, P> {
    sys: &'a ReducedSystem<P>,
}

impl<P: PullbackSource> OdeSystem for WSystem<'_, P> {
    fn dim(&self) -> usize {
        8
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let w = Mat2::new(y[0], y[1], y[2], y[3]);
        let li = inverse2(&self.sys.lambda_tilde(t), t)?;
        let dw = -j_matrix() * li * w * self.sys.c;
        let ds = li * w;
        dy[..4].copy_from_slice(&[dw[(0, 0)], dw[(0, 1)], dw[(1, 0)], dw[(1, 1)]]);
        dy[4..].copy_from_slice(&[ds[(0, 0)], ds[(0, 1)], ds[(1, 0)], ds[(1, 1)]]);
        Ok(())
    }
}

/// Co-integrated `(W, S)` with dense output.
pub struct WPath<'a, P> {
    pub sys: &'a ReducedSystem<P>,
    sol: DenseSolution,
}

impl<P: PullbackSource> WPath<'_, P> {
    pub fn t_end(&self) -> f64 {
        self.sol.t_end()
    }

    fn eval(&self, t: f64) -> [f64; 8] {
        let mut y = [0.0; 8];
        self.sol.eval_into(t, &mut y);
        y
    }

    pub fn w(&self, t: f64) -> Mat2 {
        let y = self.eval(t);
        Mat2::new(y[0], y[1], y[2], y[3])
    }

    pub fn s(&self, t: f64) -> Mat2 {
        let y = self.eval(t);
        Mat2::new(y[4], y[5], y[6], y[7])
    }

    pub fn trace(&self, t: f64) -> f64 {
        let y = self.eval(t);
        y[0] + y[3]
    }

    /// `d/dt Tr W = −Tr(J Θ W)`.
    pub fn dtrace(&self, t: f64) -> f64 {
        match self.sys.theta(t) {
            Ok(th) => -(j_matrix() * th * self.w(t)).trace(),
            Err(_) => f64::NAN,
        }
    }

    /// `‖W + c J S − id‖_F`.
    pub fn closure_residual(&self, t: f64) -> f64 {
        (self.w(t) + j_matrix() * self.s(t) * self.sys.c - Mat2::identity()).norm()
    }

    /// `max |det W − 1|` over the step mesh and `samples` extra uniform points.
    pub fn det_drift(&self, samples: usize) -> f64 {
        let (a, b) = (self.sol.t_start(), self.t_end());
        let uniform = (0..=samples).map(|k| a + (b - a) * k as f64 / samples.max(1) as f64);
        self.sol
            .mesh()
            .chain(uniform)
            .map(|t| (self.w(t).determinant() - 1.0).abs())
            .fold(0.0, f64::max)
    }
}

pub fn evolve_w<P: PullbackSource>(sys: &ReducedSystem<P>, t_max: f64, tol: Tolerances) -> Result<WPath<'_, P>> {
    let y0 = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
    let sol = integrate(&WSystem { sys }, 0.0, &y0, t_max, &SolverOptions::from(tol))?;
    Ok(WPath { sys, sol })
}

/// `‖W − id‖_F` below which a root is reported as a tangential contact.
pub const CONTACT_TOL: f64 = 1e-6;

fn null_vector(s: &Mat2) -> Vec<f64> {
    // S is rank ≤ 1 at a root; take the row with more weight
    let (r0, r1) = (s.row(0).norm(), s.row(1).norm());
    let row = if r0 >= r1 { s.row(0) } else { s.row(1) };
    if row.norm() == 0.0 {
        return vec![1.0, 0.0];
    }
    let mut v = vec![-row[1], row[0]];
    let n = (v[0] * v[0] + v[1] * v[1]).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
    let big = if v[0].abs() >= v[1].abs() { v[0] } else { v[1] };
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// Roots of `Tr W − 2` on `(0, t_max]`.
pub fn wkb_conjugate_times<P: PullbackSource>(
    path: &WPath<'_, P>,
    t_max: f64,
    opts: &EventOptions,
) -> Vec<ConjugateEvent> {
    let t_max = t_max.min(path.t_end());
    locate_roots(|t| path.trace(t) - 2.0, |t| path.dtrace(t), 0.0, t_max, opts)
        .into_iter()
        .map(|r| {
            let contact = (path.w(r.t) - Mat2::identity()).norm() < CONTACT_TOL;
            let mode = if contact || r.kind == RootKind::Tangential {
                EventMode::TangentialContact
            } else {
                EventMode::TraceCrossing
            };
            ConjugateEvent {
                t: r.t,
                mode,
                direction: Some(path.sys.dir),
                kernel: null_vector(&path.s(r.t)),
            }
        })
        .collect()
}

/// Integrates and locates all conjugate times of one direction.
pub fn direction_times<P: PullbackSource>(
    sys: &ReducedSystem<P>,
    t_max: f64,
    tol: Tolerances,
) -> Result<(Vec<ConjugateEvent>, f64)> {
    let path = evolve_w(sys, t_max, tol)?;
    let events = wkb_conjugate_times(&path, t_max, &EventOptions::for_span(t_max));
    Ok((events, path.det_drift(64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{AnnulusPullback, ConstantPullback, FnPullback};
    use crate::model::builtin;
    use std::f64::consts::TAU;

    #[test]
    fn spherical_frame_is_oriented() {
        for (th, ph) in [(0.3, 1.2), (2.9, -2.0), (0.0, 0.5), (std::f64::consts::PI, 0.1)] {
            let d = WkbDirection::from_angles(th, ph);
            let m = Mat3::from_columns(&[d.xi0, d.xi1, d.xi2]);
            assert!((m.transpose() * m - Mat3::identity()).norm() < 1e-14);
            assert!((d.xi0.cross(&d.xi1) - d.xi2).norm() < 1e-14);
            let a = d.antipodal();
            assert!((a.xi0.cross(&a.xi1) - a.xi2).norm() < 1e-14);
            let b = WkbDirection::from_angles(a.theta, a.phi);
            assert!((b.xi0 - a.xi0).norm() < 1e-14 && (b.xi2 - a.xi2).norm() < 1e-14);
        }
    }

    #[test]
    fn identity_pullback_gives_scalar_theta() {
        let src = ConstantPullback::identity(Vec3::new(0.0, 0.0, 2.0));
        let sys = reduced_coefficients(src, WkbDirection::from_angles(0.4, 0.9)).unwrap();
        let th = sys.theta(3.0).unwrap();
        assert!((th - Mat2::identity() * sys.c).norm() < 1e-14);
    }

    #[test]
    fn degenerate_direction_rejected() {
        let src = ConstantPullback::identity(Vec3::z());
        let err = reduced_coefficients(src, WkbDirection::from_angles(std::f64::consts::FRAC_PI_2, 0.3));
        assert!(matches!(err, Err(Error::DegenerateDirection { .. })));
        let none = ConstantPullback::identity(Vec3::zeros());
        assert!(reduced_coefficients(none, WkbDirection::from_angles(0.2, 0.3)).is_err());
    }

    #[test]
    fn constant_theta_rotates() {
        let src = ConstantPullback::identity(Vec3::new(0.0, 0.0, 1.5));
        let sys = reduced_coefficients(src, WkbDirection::from_angles(0.0, 0.0)).unwrap();
        let path = evolve_w(&sys, 10.0, Tolerances::default()).unwrap();
        for t in [0.0f64, 1.0, 4.2, 10.0] {
            let (s, c) = (1.5 * t).sin_cos();
            let want = Mat2::new(c, s, -s, c);
            assert!((path.w(t) - want).norm() < 1e-8);
        }
        let ev = wkb_conjugate_times(&path, 10.0, &EventOptions::for_span(10.0));
        assert_eq!(ev.len(), 2);
        for (n, e) in ev.iter().enumerate() {
            assert!((e.t - TAU * (n + 1) as f64 / 1.5).abs() < 1e-8);
            assert_eq!(e.mode, EventMode::TangentialContact);
        }
        let short = wkb_conjugate_times(&path, TAU / 1.5 - 0.1, &EventOptions::for_span(4.0));
        assert!(short.is_empty());
    }

    #[test]
    fn annulus_block_for_first_frame_vector() {
        let f = builtin::profile("sin(x1)").unwrap();
        let src = AnnulusPullback::new(f, 0.7, 1.4);
        // ξ₀ = e₁ with ξ₁ = e₂, ξ₂ = e₃
        let dir = WkbDirection::with_frame(Vec3::x(), Vec3::y());
        assert!(reduced_coefficients(&src, dir).is_err());
        let dir = WkbDirection::with_frame(Vec3::y(), Vec3::z());
        let sys = reduced_coefficients(&src, dir).unwrap();
        assert!((sys.c - 1.0).abs() < 1e-15);
        let k = src.k(2.0);
        let l = sys.lambda_tilde(2.0);
        // (ξ₁, ξ₂) = (e₃, e₁)
        assert!((l - Mat2::new(1.0 + k * k, 0.0, 0.0, 1.0)).norm() < 1e-14);
    }

    #[test]
    fn antipodal_times_agree() {
        let src = FnPullback {
            lambda: |t: f64| {
                let s = 0.3 * (1.3 * t).sin();
                Mat3::new(1.0 + s * s, s, 0.1 * s, s, 1.0, 0.0, 0.1 * s, 0.0, 1.2)
            },
            omega: Vec3::new(0.2, 0.7, -0.4),
        };
        let d = WkbDirection::from_angles(1.1, 0.4);
        let a = reduced_coefficients(&src, d).unwrap();
        let b = reduced_coefficients(&src, d.antipodal()).unwrap();
        let (ea, _) = direction_times(&a, 40.0, Tolerances::default()).unwrap();
        let (eb, _) = direction_times(&b, 40.0, Tolerances::default()).unwrap();
        assert!(!ea.is_empty());
        assert_eq!(ea.len(), eb.len());
        for (x, y) in ea.iter().zip(&eb) {
            assert!((x.t - y.t).abs() < 1e-8);
        }
        let c = a.canonical();
        assert!(c.c > 0.0);
    }
}
