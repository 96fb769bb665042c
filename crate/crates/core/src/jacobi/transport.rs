//! Amplitude transport along a Lagrangian path, in two equivalent forms.
//!
//! Right form, for a vector field `α` along `t ↦ η(t, x)`:
//!
//! ```text
//! Dα/dt + ∇_α u = 2 ⟨∇_α u, ∇Φ⟩ / ⟨∇Φ, ∇Φ⟩ ∇Φ,   ∇Φ(t) = (Dη⁻¹)* ∇Φ₀
//! ```
//!
//! Left form, for `β(t) ∈ T_x M` with `⟨β, ξ₀⟩ = 0`:
//!
//! ```text
//! d/dt (π Λ β) + ⟨ξ₀, ω₀⟩ ξ₀ × β = 0
//! ```
//!
//! For an Euler solution the two agree through `α = Dη β`.

use nalgebra::Matrix3x2;

use crate::error::{Error, Result};
use crate::flow::{IntegratedPullback, PullbackSource};
use crate::geometry::{metric_norm, ChartPoint, Frame, Mat3, Vec3};
use crate::model::FieldModel;
use crate::ode::{integrate, DenseSolution, OdeSystem, SolverOptions, Tolerances};

use super::reduced::{inverse2, j_matrix, project, Mat2, Vec2, WkbDirection};

/// Gradient norm below which the phase is considered stationary.
pub const GRADIENT_FLOOR: f64 = 1e-12;

/// Contravariant `∇Φ(t)` at `η` from `∇Φ₀` at `x`.
fn transported_gradient(g_eta: &Mat3, g_x: &Mat3, d_eta: &Mat3, grad0: &Vec3) -> Option<Vec3> {
    let covector = d_eta.transpose().lu().solve(&(g_x * grad0))?;
    g_eta.cholesky().map(|c| c.solve(&covector))
}

/// State `(η, Dη, α)`: 15 components, `Dη` row-major.
struct RightSystem<'a> {
    model: &'a FieldModel,
    g_x: Mat3,
    grad0: Vec3,
}

impl RightSystem<'_> {
    fn gradient(&self, t: f64, eta: &Vec3, d: &Mat3) -> Result<(Mat3, Vec3)> {
        let g = self.model.metric.at(eta);
        let grad = transported_gradient(&g, &self.g_x, d, &self.grad0).ok_or(Error::GradientVanished { t })?;
        if metric_norm(&g, &grad) < GRADIENT_FLOOR {
            return Err(Error::GradientVanished { t });
        }
        Ok((g, grad))
    }
}

fn christoffel_contract(gamma: &[Mat3; 3], a: &Vec3, b: &Vec3) -> Vec3 {
    Vec3::from_fn(|i, _| (a.transpose() * gamma[i] * b)[(0, 0)])
}

impl OdeSystem for RightSystem<'_> {
    fn dim(&self) -> usize {
        15
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let eta = Vec3::new(y[0], y[1], y[2]);
        let d = Mat3::from_row_slice(&y[3..12]);
        let alpha = Vec3::new(y[12], y[13], y[14]);
        let u = self.model.velocity.at(t, &eta);
        let du = self.model.velocity.jacobian(t, &eta);
        let gamma = self.model.metric.christoffel(&eta);
        let (g, grad) = self.gradient(t, &eta, &d)?;

        let cov_du = du * alpha + christoffel_contract(&gamma, &alpha, &u);
        let q = (cov_du.transpose() * g * grad)[(0, 0)] / (grad.transpose() * g * grad)[(0, 0)];
        let da = -christoffel_contract(&gamma, &u, &alpha) - cov_du + grad * (2.0 * q);

        let dd = du * d;
        dy[..3].copy_from_slice(u.as_slice());
        for i in 0..3 {
            for j in 0..3 {
                dy[3 + 3 * i + j] = dd[(i, j)];
            }
        }
        dy[12..].copy_from_slice(da.as_slice());
        Ok(())
    }

    fn check_state(&self, t: f64, y: &[f64]) -> Result<()> {
        let eta = Vec3::new(y[0], y[1], y[2]);
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
pub struct RightFormState {
    pub t: f64,
    /// Unwrapped chart coordinates.
    pub eta: Vec3,
    pub d_eta: Mat3,
    pub alpha: Vec3,
    pub grad_phi: Vec3,
    /// `⟨∇_α u, ∇Φ⟩ / ⟨∇Φ, ∇Φ⟩`.
    pub q: f64,
}

pub struct RightFormPath<'a> {
    sys: RightSystem<'a>,
    sol: DenseSolution,
}

impl RightFormPath<'_> {
    pub fn t_end(&self) -> f64 {
        self.sol.t_end()
    }

    pub fn state(&self, t: f64) -> Result<RightFormState> {
        let mut y = [0.0; 15];
        self.sol.eval_into(t, &mut y);
        let eta = Vec3::new(y[0], y[1], y[2]);
        let d_eta = Mat3::from_row_slice(&y[3..12]);
        let alpha = Vec3::new(y[12], y[13], y[14]);
        let (g, grad_phi) = self.sys.gradient(t, &eta, &d_eta)?;
        let model = self.sys.model;
        let gamma = model.metric.christoffel(&eta);
        let u = model.velocity.at(t, &eta);
        let cov_du = model.velocity.jacobian(t, &eta) * alpha + christoffel_contract(&gamma, &alpha, &u);
        let q = (cov_du.transpose() * g * grad_phi)[(0, 0)] / (grad_phi.transpose() * g * grad_phi)[(0, 0)];
        Ok(RightFormState {
            t,
            eta,
            d_eta,
            alpha,
            grad_phi,
            q,
        })
    }

    /// `|⟨α, ∇Φ⟩_g| / (|α| |∇Φ|)` at `t`; stays zero along exact solutions.
    pub fn constraint_defect(&self, t: f64) -> Result<f64> {
        let s = self.state(t)?;
        let g = self.sys.model.metric.at(&s.eta);
        let ip = (s.alpha.transpose() * g * s.grad_phi)[(0, 0)];
        let scale = metric_norm(&g, &s.alpha) * metric_norm(&g, &s.grad_phi);
        Ok(if scale > 0.0 { ip.abs() / scale } else { 0.0 })
    }
}

/// `∇Φ₀` and `α₀` are contravariant chart components at `x`.
pub fn solve_right_form<'a>(
    model: &'a FieldModel,
    x: &ChartPoint,
    grad_phi0: &Vec3,
    alpha0: &Vec3,
    t_max: f64,
    tol: Tolerances,
) -> Result<RightFormPath<'a>> {
    let g_x = model.metric.check_spd(&x.coords)?;
    let gn = metric_norm(&g_x, grad_phi0);
    if gn < GRADIENT_FLOOR {
        return Err(Error::GradientVanished { t: 0.0 });
    }
    let ip = (alpha0.transpose() * g_x * grad_phi0)[(0, 0)];
    if ip.abs() > 1e-10 * gn * metric_norm(&g_x, alpha0).max(1.0) {
        return Err(Error::InvalidInput("initial amplitude is not orthogonal to the phase gradient".into()));
    }
    let sys = RightSystem {
        model,
        g_x,
        grad0: *grad_phi0,
    };
    let mut y0 = vec![0.0; 15];
    y0[..3].copy_from_slice(x.coords.as_slice());
    y0[3] = 1.0;
    y0[7] = 1.0;
    y0[11] = 1.0;
    y0[12..].copy_from_slice(alpha0.as_slice());
    let sol = integrate(&sys, 0.0, &y0, t_max, &SolverOptions::from(tol))?;
    Ok(RightFormPath { sys, sol })
}

/// `m = Λ̃ b` in `(ξ₁, ξ₂)` components: `m' = −c J Λ̃⁻¹ m`.
struct LeftSystem<'a> {
    src: &'a IntegratedPullback,
    basis: Matrix3x2<f64>,
    c: f64,
}

impl OdeSystem for LeftSystem<'_> {
    fn dim(&self) -> usize {
        2
    }

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
        let li = inverse2(&project(&self.src.lambda(t), &self.basis), t)?;
        let dm = -(j_matrix() * li * Vec2::new(y[0], y[1])) * self.c;
        dy[0] = dm[0];
        dy[1] = dm[1];
        Ok(())
    }
}

pub struct LeftFormPath {
    src: IntegratedPullback,
    dir: WkbDirection,
    frame: Frame,
    sol: DenseSolution,
}

impl LeftFormPath {
    pub fn direction(&self) -> &WkbDirection {
        &self.dir
    }

    pub fn pullback(&self) -> &IntegratedPullback {
        &self.src
    }

    /// `β(t)` in frame components at `x`.
    pub fn beta_frame(&self, t: f64) -> Result<Vec3> {
        let mut m = [0.0; 2];
        self.sol.eval_into(t, &mut m);
        let b = self.dir.complement();
        let li: Mat2 = inverse2(&project(&self.src.lambda(t), &b), t)?;
        Ok(self.dir.lift(&(li * Vec2::new(m[0], m[1]))))
    }

    /// `β(t)` in chart components at `x`.
    pub fn beta(&self, t: f64) -> Result<Vec3> {
        Ok(self.frame.vector(&self.beta_frame(t)?))
    }

    /// `Dη(t) β(t)`, chart components at `η(t)`.
    pub fn pushed_forward(&self, t: f64) -> Result<Vec3> {
        Ok(self.src.path().unwrapped(t).1 * self.beta(t)?)
    }
}

pub fn solve_left_form(
    model: &FieldModel,
    x: &ChartPoint,
    grad_phi0: &Vec3,
    beta0: &Vec3,
    t_max: f64,
    tol: Tolerances,
) -> Result<LeftFormPath> {
    let src = IntegratedPullback::new(model, x, t_max, tol.tightened(1e-2))?;
    let frame = *src.frame();
    let xi = frame.components(grad_phi0);
    if xi.norm() < GRADIENT_FLOOR {
        return Err(Error::GradientVanished { t: 0.0 });
    }
    let dir = WkbDirection::from_vector(&xi);
    let b0 = frame.components(beta0);
    if b0.dot(&dir.xi0).abs() > 1e-10 * b0.norm().max(1.0) {
        return Err(Error::InvalidInput("initial amplitude is not orthogonal to the phase gradient".into()));
    }
    let basis = dir.complement();
    let c = src.vorticity().dot(&dir.xi0);
    let m0 = project(&src.lambda(0.0), &basis) * (basis.transpose() * b0);
    let sol = {
        let sys = LeftSystem { src: &src, basis, c };
        integrate(&sys, 0.0, m0.as_slice(), t_max, &SolverOptions::from(tol))?
    };
    Ok(LeftFormPath { src, dir, frame, sol })
}

/// `sup_t |α(t) − Dη(t) β(t)|_g` over `samples + 1` uniform times on `[0, t_max]`.
pub fn left_right_discrepancy(
    model: &FieldModel,
    x: &ChartPoint,
    grad_phi0: &Vec3,
    a0: &Vec3,
    t_max: f64,
    tol: Tolerances,
    samples: usize,
) -> Result<f64> {
    let right = solve_right_form(model, x, grad_phi0, a0, t_max, tol)?;
    let left = solve_left_form(model, x, grad_phi0, a0, t_max, tol)?;
    let mut worst: f64 = 0.0;
    for k in 0..=samples {
        let t = t_max * k as f64 / samples as f64;
        let s = right.state(t)?;
        let diff = s.alpha - left.pushed_forward(t)?;
        worst = worst.max(metric_norm(&model.metric.at(&s.eta), &diff));
    }
    Ok(worst)
}

/// Removes the `∇Φ₀` component of `v` in the metric at `x`.
pub fn admissible_amplitude(model: &FieldModel, x: &ChartPoint, grad_phi0: &Vec3, v: &Vec3) -> Vec3 {
    let g = model.metric.at(&x.coords);
    let ip = |a: &Vec3, b: &Vec3| (a.transpose() * g * b)[(0, 0)];
    v - grad_phi0 * (ip(v, grad_phi0) / ip(grad_phi0, grad_phi0))
}
