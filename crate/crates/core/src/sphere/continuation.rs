//! Continuation of the level set `Tr W(t, ξ(y)) = 2` along a great circle
//! `ξ(y) = cos y · a + sin y · b`.
//!
//! The chart frame is `ξ₁ = ∂_y ξ = −sin y · a + cos y · b`, `ξ₂ = a × b`,
//! so `∂_y ξ₁ = −ξ₀`, `∂_y ξ₂ = 0`, and `Z = ∂_y W` solves
//!
//! ```text
//! Z' = −J (∂_y Θ · W + Θ Z),   Z(0) = 0.
//! ```
//!
//! Away from `W = id` the branch slope is `dt/dy = −Tr Z / Tr Ẇ`. At `W = id`
//! both traces vanish and `det(Ẇ s + Z) = 0` gives a quadratic for `s`.

use nalgebra::Matrix3x2;

use crate::error::{Error, Result};
use crate::events::{locate_roots, EventOptions};
use crate::flow::PullbackSource;
use crate::geometry::Vec3;
use crate::jacobi::reduced::{
    evolve_w, inverse2, j_matrix, reduced_coefficients, Mat2, CONTACT_TOL,
};
use crate::jacobi::WkbDirection;
use crate::ode::{integrate, OdeSystem, SolverOptions, Tolerances};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GreatCircle {
    pub a: Vec3,
    pub b: Vec3,
}

impl GreatCircle {
    /// Circle through `xi0` leaving in the direction of `tangent`.
    pub fn through(xi0: &Vec3, tangent: &Vec3) -> Result<Self> {
        let a = xi0.normalize();
        let b = tangent - a * a.dot(tangent);
        if b.norm() < 1e-12 {
            return Err(Error::InvalidInput("continuation tangent is parallel to the direction".into()));
        }
        Ok(GreatCircle { a, b: b.normalize() })
    }

    pub fn direction(&self, y: f64) -> WkbDirection {
        let (s, c) = y.sin_cos();
        WkbDirection::with_frame(self.a * c + self.b * s, self.b * c - self.a * s)
    }
}

struct SensitivitySystem<'a, P> {
    src: &'a P,
    dir: WkbDirection,
    omega: Vec3,
}

impl<P: PullbackSource> SensitivitySystem<'_, P> {
    /// `(Θ, ∂_y Θ)` at time `t`.
    fn coefficients(&self, t: f64) -> Result<(Mat2, Mat2)> {
        let l = self.src.lambda(t);
        let f = self.dir.complement();
        let df = Matrix3x2::from_columns(&[-self.dir.xi0, Vec3::zeros()]);
        let lt = f.transpose() * l * f;
        let dlt = df.transpose() * l * f + f.transpose() * l * df;
        let li = inverse2(&(0.5 * (lt + lt.transpose())), t)?;
        let c = self.omega.dot(&self.dir.xi0);
        let dc = self.omega.dot(&self.dir.xi1);
        Ok((li * c, li * dc - li * dlt * li * c))
    }
}

impl<P: PullbackSource> OdeSystem for SensitivitySystem<'_, P> {
    fn dim(&self) -> usize {
        8
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let w = Mat2::new(y[0], y[1], y[2], y[3]);
        let z = Mat2::new(y[4], y[5], y[6], y[7]);
        let (th, dth) = self.coefficients(t)?;
        let j = j_matrix();
        let dw = -j * th * w;
        let dz = -j * (dth * w + th * z);
        dy[..4].copy_from_slice(&[dw[(0, 0)], dw[(0, 1)], dw[(1, 0)], dw[(1, 1)]]);
        dy[4..].copy_from_slice(&[dz[(0, 0)], dz[(0, 1)], dz[(1, 0)], dz[(1, 1)]]);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slope {
    /// `Ẇ = −J Θ W` at the point.
    pub w_dot: Mat2,
    /// `∂_y W` at the point.
    pub z: Mat2,
    /// True when `W = id` to within the contact tolerance.
    pub tangential: bool,
    /// Candidate values of `dt/dy`, smallest magnitude first.
    pub candidates: Vec<f64>,
}

impl Slope {
    pub fn best(&self) -> f64 {
        self.candidates.first().copied().unwrap_or(0.0)
    }
}

/// `dt/dy` of the branch through `(t, y)`.
pub fn branch_slope<P: PullbackSource>(
    src: &P,
    circle: &GreatCircle,
    y: f64,
    t: f64,
    tol: Tolerances,
) -> Result<Slope> {
    let dir = circle.direction(y);
    let sys = SensitivitySystem {
        src,
        dir,
        omega: src.vorticity(),
    };
    let y0 = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0];
    let sol = integrate(&sys, 0.0, &y0, t, &SolverOptions::from(tol))?;
    let v = sol.eval(t);
    let w = Mat2::new(v[0], v[1], v[2], v[3]);
    let z = Mat2::new(v[4], v[5], v[6], v[7]);
    let (th, _) = sys.coefficients(t)?;
    let w_dot = -j_matrix() * th * w;
    let tangential = (w - Mat2::identity()).norm() < CONTACT_TOL;
    let mut candidates = if tangential {
        // det(Ẇ s + Z) = −½ Tr((Ẇ s + Z)²) for traceless Ẇ, Z
        let a = (w_dot * w_dot).trace();
        let b = (w_dot * z).trace();
        let c = (z * z).trace();
        let disc = (b * b - a * c).max(0.0).sqrt();
        if a.abs() < 1e-300 {
            vec![0.0]
        } else {
            vec![(-b + disc) / a, (-b - disc) / a]
        }
    } else {
        vec![-z.trace() / w_dot.trace()]
    };
    candidates.sort_by(|p, q| p.abs().total_cmp(&q.abs()));
    candidates.dedup();
    Ok(Slope {
        w_dot,
        z,
        tangential,
        candidates,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchPoint {
    pub y: f64,
    pub dir: WkbDirection,
    pub t: f64,
    pub slope: f64,
    pub tangential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContinuationOptions {
    pub dy: f64,
    pub steps: usize,
    pub tol: Tolerances,
    /// Maximum step halvings before the branch is reported lost.
    pub max_halvings: usize,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        ContinuationOptions {
            dy: 0.02,
            steps: 20,
            tol: Tolerances::default(),
            max_halvings: 5,
        }
    }
}

/// Root of `Tr W − 2` for direction `ξ(y)` nearest to `t_pred` within `±half_width`.
pub fn correct<P: PullbackSource>(
    src: &P,
    circle: &GreatCircle,
    y: f64,
    t_pred: f64,
    half_width: f64,
    tol: Tolerances,
) -> Option<f64> {
    let sys = reduced_coefficients(src, circle.direction(y)).ok()?;
    let (lo, hi) = ((t_pred - half_width).max(0.0), t_pred + half_width);
    if hi > src.horizon() {
        return None;
    }
    let path = evolve_w(&sys, hi, tol).ok()?;
    let opts = EventOptions::for_span(hi - lo);
    locate_roots(|t| path.trace(t) - 2.0, |t| path.dtrace(t), lo, hi, &opts)
        .into_iter()
        .map(|r| r.t)
        .min_by(|a, b| (a - t_pred).abs().total_cmp(&(b - t_pred).abs()))
}

fn window(t: f64, dt: f64) -> f64 {
    (4.0 * dt.abs()).max(0.02 * t).max(1e-6)
}

/// Predictor–corrector continuation from `(t0, ξ(0))`.
pub fn continue_branch<P: PullbackSource>(
    src: &P,
    circle: &GreatCircle,
    t0: f64,
    opts: &ContinuationOptions,
) -> Result<Vec<BranchPoint>> {
    let t_start = correct(src, circle, 0.0, t0, window(t0, 0.0), opts.tol).ok_or(Error::BranchLost {
        y: 0.0,
        attempts: 0,
    })?;
    if (t_start - t0).abs() > 1e-6 * t0.max(1.0) {
        return Err(Error::InvalidInput(format!(
            "start time {t0} is not on a branch (nearest root {t_start})"
        )));
    }
    let slope = branch_slope(src, circle, 0.0, t_start, opts.tol)?;
    let mut points = vec![BranchPoint {
        y: 0.0,
        dir: circle.direction(0.0),
        t: t_start,
        slope: slope.best(),
        tangential: slope.tangential,
    }];
    for _ in 0..opts.steps {
        let last = points.last().unwrap().clone();
        let mut dy = opts.dy;
        let mut attempts = 0;
        let next = loop {
            let y = last.y + dy;
            let t_pred = last.t + last.slope * dy;
            if let Some(t) = correct(src, circle, y, t_pred, window(t_pred, last.slope * dy), opts.tol) {
                break (y, t);
            }
            attempts += 1;
            if attempts > opts.max_halvings {
                return Err(Error::BranchLost { y, attempts });
            }
            dy *= 0.5;
        };
        let slope = branch_slope(src, circle, next.0, next.1, opts.tol)?;
        points.push(BranchPoint {
            y: next.0,
            dir: circle.direction(next.0),
            t: next.1,
            slope: slope.best(),
            tangential: slope.tangential,
        });
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{ConstantPullback, FnPullback};
    use crate::geometry::Mat3;
    use crate::jacobi::reduced::direction_times;
    use std::f64::consts::TAU;

    #[test]
    fn killing_branch_follows_closed_form() {
        let omega = Vec3::new(0.2, 0.5, -0.8).normalize();
        let src = ConstantPullback::identity(omega);
        let circle = GreatCircle::through(&omega, &Vec3::x()).unwrap();
        let opts = ContinuationOptions {
            dy: 0.05,
            steps: 12,
            ..Default::default()
        };
        let pts = continue_branch(&src, &circle, TAU, &opts).unwrap();
        assert!(pts[0].slope.abs() < 1e-8 && pts[0].tangential);
        for p in &pts {
            let want = TAU / p.y.cos();
            assert!((p.t - want).abs() < 1e-6, "y = {}: {} vs {want}", p.y, p.t);
            let exact = TAU * p.y.sin() / p.y.cos().powi(2);
            assert!((p.slope - exact).abs() < 1e-5, "slope {} vs {exact}", p.slope);
        }
    }

    fn wavy() -> FnPullback<impl Fn(f64) -> Mat3 + Sync> {
        FnPullback {
            lambda: |t: f64| {
                let s = 0.35 * (0.9 * t).sin();
                let r = 0.2 * (1.7 * t + 0.3).cos();
                Mat3::new(1.0 + s * s, s, r, s, 1.0 + r * r, 0.0, r, 0.0, 1.3)
            },
            omega: Vec3::new(0.4, -0.3, 1.1),
        }
    }

    #[test]
    fn transversal_step_matches_resolve() {
        let src = wavy();
        let circle = GreatCircle::through(&Vec3::new(0.3, 0.1, 1.0), &Vec3::new(1.0, -0.5, 0.2)).unwrap();
        let tol = Tolerances::new(1e-12, 1e-14);
        let sys = reduced_coefficients(&src, circle.direction(0.0)).unwrap();
        let (ev, _) = direction_times(&sys, 30.0, tol).unwrap();
        let t0 = ev[0].t;
        let opts = ContinuationOptions {
            dy: 1e-3,
            steps: 1,
            tol,
            ..Default::default()
        };
        let pts = continue_branch(&src, &circle, t0, &opts).unwrap();
        assert!(!pts[0].tangential);
        let moved = reduced_coefficients(&src, circle.direction(1e-3)).unwrap();
        let (ev2, _) = direction_times(&moved, 30.0, tol).unwrap();
        assert!((pts[1].t - ev2[0].t).abs() < 1e-8);
        // the implicit-function slope predicts the step to second order
        assert!((pts[0].t + pts[0].slope * 1e-3 - ev2[0].t).abs() < 1e-5);
    }

    #[test]
    fn slope_matches_finite_difference() {
        let src = wavy();
        let circle = GreatCircle::through(&Vec3::new(-0.5, 0.6, 0.7), &Vec3::z()).unwrap();
        let tol = Tolerances::new(1e-12, 1e-14);
        let t_at = |y: f64| {
            let sys = reduced_coefficients(&src, circle.direction(y)).unwrap();
            direction_times(&sys, 30.0, tol).unwrap().0[0].t
        };
        let t0 = t_at(0.0);
        let s = branch_slope(&src, &circle, 0.0, t0, tol).unwrap();
        let h = 1e-4;
        let fd = (t_at(h) - t_at(-h)) / (2.0 * h);
        assert!((s.best() - fd).abs() < 1e-5 * fd.abs().max(1.0), "{} vs {fd}", s.best());
    }
}
