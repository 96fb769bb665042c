//! Closed-form solution operator of the annulus example.
//!
//! With `k(t) = √z (f(t + x) − f(x))`, `F = ∫ k cos`, `G = ∫ k sin`:
//!
//! ```text
//!     ⎡ sin t     F sin t − G cos t    cos t − 1 ⎤
//! Υ = ⎢ −G        t + K + H            −F        ⎥
//!     ⎣ 1 − cos t −F cos t − G sin t   sin t     ⎦
//! ```
//!
//! where `K = ∫ k²` and `H = ∫ (G F' − F G')`.

use crate::expr::Expr;
use crate::flow::AnnulusPullback;
use crate::geometry::{Mat3, Vec3};
use crate::quad::integrate;

const PIECE: f64 = 0.25;
const QUAD_TOL: f64 = 1e-13;

/// Cumulative integrals tabulated at breakpoints `PIECE` apart.
#[derive(Debug, Clone)]
pub struct AnnulusSolution {
    k: AnnulusPullback,
    f: Vec<f64>,
    g: Vec<f64>,
    k2: Vec<f64>,
    h: Vec<f64>,
}

impl AnnulusSolution {
    pub fn new(f: Expr, x: f64, z: f64, t_max: f64) -> Self {
        let mut s = AnnulusSolution {
            k: AnnulusPullback::new(f, x, z),
            f: vec![0.0],
            g: vec![0.0],
            k2: vec![0.0],
            h: vec![0.0],
        };
        let pieces = (t_max.max(0.0) / PIECE).ceil() as usize;
        for i in 0..pieces {
            let (a, b) = (i as f64 * PIECE, (i + 1) as f64 * PIECE);
            let df = integrate(|t| s.k.k(t) * t.cos(), a, b, QUAD_TOL);
            let dg = integrate(|t| s.k.k(t) * t.sin(), a, b, QUAD_TOL);
            let dk2 = integrate(|t| s.k.k(t).powi(2), a, b, QUAD_TOL);
            let dh = integrate(|t| s.h_integrand(t), a, b, QUAD_TOL);
            s.f.push(s.f[i] + df);
            s.g.push(s.g[i] + dg);
            s.k2.push(s.k2[i] + dk2);
            s.h.push(s.h[i] + dh);
        }
        s
    }

    fn split(&self, t: f64) -> (usize, f64) {
        let i = ((t / PIECE).floor().max(0.0) as usize).min(self.f.len() - 1);
        (i, i as f64 * PIECE)
    }

    /// `(F(t), G(t))`.
    pub fn fg(&self, t: f64) -> (f64, f64) {
        let (i, a) = self.split(t);
        (
            self.f[i] + integrate(|s| self.k.k(s) * s.cos(), a, t, QUAD_TOL),
            self.g[i] + integrate(|s| self.k.k(s) * s.sin(), a, t, QUAD_TOL),
        )
    }

    fn h_integrand(&self, t: f64) -> f64 {
        let (f, g) = self.fg(t);
        let k = self.k.k(t);
        k * (g * t.cos() - f * t.sin())
    }

    /// `Υ₂₂ = t + ∫ k² + ∫ (G F' − F G')`.
    pub fn middle(&self, t: f64) -> f64 {
        let (i, a) = self.split(t);
        let k2 = self.k2[i] + integrate(|s| self.k.k(s).powi(2), a, t, QUAD_TOL);
        let h = self.h[i] + integrate(|s| self.h_integrand(s), a, t, QUAD_TOL);
        t + k2 + h
    }

    pub fn upsilon(&self, t: f64) -> Mat3 {
        let (f, g) = self.fg(t);
        let (s, c) = t.sin_cos();
        Mat3::new(
            s,
            f * s - g * c,
            c - 1.0,
            -g,
            self.middle(t),
            -f,
            1.0 - c,
            -f * c - g * s,
            s,
        )
    }

    pub fn det_upsilon(&self, t: f64) -> f64 {
        let (f, g) = self.fg(t);
        -t.sin() * (f * f + g * g) + 2.0 * (1.0 - t.cos()) * self.middle(t)
    }

    /// `(F(2π), 0, −G(2π))`, the null vector of `Υ(2π)`.
    pub fn kernel_at_two_pi(&self) -> Vec3 {
        let (f, g) = self.fg(std::f64::consts::TAU);
        Vec3::new(f, 0.0, -g)
    }
}

pub fn annulus_det_upsilon(f: &Expr, x: f64, z: f64, t: f64) -> f64 {
    AnnulusSolution::new(f.clone(), x, z, t).det_upsilon(t)
}
