//! Full pointwise operator `(Λ Υ')' + ω₀ × Υ' = 0`, `Υ(0) = 0`, `Υ'(0) = id`.
//!
//! Integrated in first-order form with the momentum `P = Λ Υ'`:
//! `Υ' = Λ⁻¹ P`, `P' = −Ω Λ⁻¹ P`, `Ω = ω₀×`.

use crate::error::{Error, Result};
use crate::events::{locate_roots, EventOptions};
use crate::flow::PullbackSource;
use crate::geometry::{cross_matrix, Mat3};
use crate::ode::{integrate, DenseSolution, OdeSystem, SolverOptions, Tolerances};

use super::{ConjugateEvent, EventMode};

struct FullSystem<'a, P: ?Sized> {
    src: &'a P,
    omega: Mat3,
}

fn inverse(l: &Mat3, t: f64) -> Result<Mat3> {
    l.cholesky()
        .map(|c| c.inverse())
        .ok_or(Error::NonSpdPullback { t })
}

impl<P: PullbackSource + ?Sized> OdeSystem for FullSystem<'_, P> {
    fn dim(&self) -> usize {
        18
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let p = Mat3::from_row_slice(&y[9..18]);
        let v = inverse(&self.src.lambda(t), t)? * p;
        let dp = -self.omega * v;
        for i in 0..3 {
            for j in 0..3 {
                dy[3 * i + j] = v[(i, j)];
                dy[9 + 3 * i + j] = dp[(i, j)];
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct FullOperatorPath {
    sol: DenseSolution,
}

fn cofactor_transpose(a: &Mat3) -> Mat3 {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| a[(r0, c0)] * a[(r1, c1)] - a[(r0, c1)] * a[(r1, c0)];
    Mat3::new(
        c(1, 2, 1, 2),
        -c(0, 2, 1, 2),
        c(0, 1, 1, 2),
        -c(1, 2, 0, 2),
        c(0, 2, 0, 2),
        -c(0, 1, 0, 2),
        c(1, 2, 0, 1),
        -c(0, 2, 0, 1),
        c(0, 1, 0, 1),
    )
}

impl FullOperatorPath {
    pub fn t_end(&self) -> f64 {
        self.sol.t_end()
    }

    fn eval(&self, t: f64) -> (Mat3, Mat3) {
        let mut y = [0.0; 18];
        self.sol.eval_into(t, &mut y);
        (Mat3::from_row_slice(&y[..9]), Mat3::from_row_slice(&y[9..]))
    }

    pub fn upsilon(&self, t: f64) -> Mat3 {
        self.eval(t).0
    }

    /// `P = Λ Υ'`.
    pub fn momentum(&self, t: f64) -> Mat3 {
        self.eval(t).1
    }

    /// `det Υ / ‖Υ‖_F³`, which stays O(1) as `Υ` grows. Column norms would
    /// hide zeros at which whole columns of `Υ` vanish.
    pub fn normalized_det(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 1.0;
        }
        let u = self.upsilon(t);
        let n = u.norm();
        if n == 0.0 {
            return 1.0;
        }
        u.determinant() / n.powi(3)
    }

    fn normalized_det_rate(&self, src: &(impl PullbackSource + ?Sized), t: f64) -> f64 {
        let (u, p) = self.eval(t);
        let Some(li) = src.lambda(t).cholesky().map(|c| c.inverse()) else {
            return f64::NAN;
        };
        let n = u.norm();
        if n == 0.0 {
            return 0.0;
        }
        let du = li * p;
        let det_rate = (cofactor_transpose(&u) * du).trace();
        let norm_rate = u.dot(&du) / n;
        det_rate / n.powi(3) - 3.0 * u.determinant() * norm_rate / n.powi(4)
    }
}

pub fn solve_full_operator<P: PullbackSource + ?Sized>(
    src: &P,
    t_max: f64,
    tol: Tolerances,
) -> Result<FullOperatorPath> {
    let sys = FullSystem {
        src,
        omega: cross_matrix(&src.vorticity()),
    };
    let p0 = src.lambda(0.0);
    let mut y0 = vec![0.0; 18];
    for i in 0..3 {
        for j in 0..3 {
            y0[9 + 3 * i + j] = p0[(i, j)];
        }
    }
    let sol = integrate(&sys, 0.0, &y0, t_max, &SolverOptions::from(tol))?;
    Ok(FullOperatorPath { sol })
}

fn kernel(u: &Mat3) -> Vec<f64> {
    let svd = u.svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let k = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut v: Vec<f64> = v_t.row(k).iter().copied().collect();
    // fix the sign so output is reproducible
    let big = v.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if big < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

/// All zeros of `det Υ` on `(0, t_max]`.
pub fn conjugate_times_full<P: PullbackSource + ?Sized>(
    src: &P,
    path: &FullOperatorPath,
    t_max: f64,
    opts: &EventOptions,
) -> Vec<ConjugateEvent> {
    let t_max = t_max.min(path.t_end());
    locate_roots(
        |t| path.normalized_det(t),
        |t| path.normalized_det_rate(src, t),
        0.0,
        t_max,
        opts,
    )
    .into_iter()
    .map(|r| ConjugateEvent {
        t: r.t,
        mode: EventMode::DetZero3D,
        direction: None,
        kernel: kernel(&path.upsilon(r.t)),
    })
    .collect()
}

/// Smallest zero of `det Υ`, with the null vector of `Υ` there.
pub fn first_conjugate_time_full<P: PullbackSource + ?Sized>(
    src: &P,
    t_max: f64,
    tol: Tolerances,
) -> Result<Option<ConjugateEvent>> {
    let path = solve_full_operator(src, t_max, tol)?;
    let opts = EventOptions::for_span(t_max);
    Ok(conjugate_times_full(src, &path, t_max, &opts).into_iter().next())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{ConstantPullback, FnPullback};
    use crate::geometry::Vec3;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn free_equation_is_linear() {
        let src = ConstantPullback::identity(Vec3::zeros());
        let path = solve_full_operator(&src, 5.0, Tolerances::default()).unwrap();
        for t in [0.5, 2.0, 5.0] {
            assert!((path.upsilon(t) - Mat3::identity() * t).norm() < 1e-12);
        }
        assert!(first_conjugate_time_full(&src, 20.0, Tolerances::default()).unwrap().is_none());
    }

    #[test]
    fn no_vorticity_never_conjugate() {
        let src = FnPullback {
            lambda: |t: f64| {
                let s = 0.4 * t.sin();
                Mat3::new(1.0 + s * s, s, 0.0, s, 1.0, 0.1 * s, 0.0, 0.1 * s, 1.5)
            },
            omega: Vec3::zeros(),
        };
        assert!(first_conjugate_time_full(&src, 30.0, Tolerances::default()).unwrap().is_none());
    }

    #[test]
    fn killing_det_and_first_zero() {
        for w in [1.0, 2.5] {
            let omega = Vec3::new(0.3, -0.5, 0.8).normalize() * w;
            let src = ConstantPullback::identity(omega);
            let path = solve_full_operator(&src, 4.0 * PI / w + 0.1, Tolerances::default()).unwrap();
            for t in [0.3, 1.7, 4.0] {
                let want = t * (2.0 - 2.0 * (w * t).cos()) / (w * w);
                assert!((path.upsilon(t).determinant() - want).abs() < 1e-8);
            }
            let ev = first_conjugate_time_full(&src, 10.0, Tolerances::default()).unwrap().unwrap();
            assert!((ev.t - TAU / w).abs() < 1e-6, "{} vs {}", ev.t, TAU / w);
            // Υ(2π/w) is the projection onto ω, so the kernel is orthogonal to it
            let k = Vec3::from_column_slice(&ev.kernel);
            assert!(k.dot(&omega).abs() < 1e-6);
        }
    }

    #[test]
    fn cofactor_identity() {
        let a = Mat3::new(2.0, -1.0, 0.5, 0.3, 1.2, -0.7, 0.9, 0.1, 1.1);
        let adj = cofactor_transpose(&a);
        assert!((adj * a - Mat3::identity() * a.determinant()).norm() < 1e-14);
    }
}
