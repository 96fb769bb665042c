//! Index form of the reduced equation on `[0, T]`:
//!
//! ```text
//! I(γ, γ) = ∫ ⟨Λ̃ γ', γ'⟩ + c ⟨J γ, γ'⟩ dt,     γ = (f, g),  γ(0) = γ(T) = 0
//! ```
//!
//! discretized with continuous piecewise-linear elements. The smallest
//! eigenvalue of `I` relative to `∫|γ|²` is positive before the first
//! conjugate time and negative after it.
//!
//! Unknowns are interleaved `(f₁, g₁, f₂, g₂, …)`, giving a symmetric band
//! matrix of half-bandwidth 3. Eigenvalues are bracketed with Sylvester
//! inertia counts from an `LDLᵀ` factorization and polished by inverse
//! iteration.

use crate::error::{Error, Result};
use crate::flow::PullbackSource;

use super::reduced::{Mat2, ReducedSystem};

const BW: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexFormOptions {
    /// Number of elements.
    pub n: usize,
}

impl Default for IndexFormOptions {
    fn default() -> Self {
        IndexFormOptions { n: 400 }
    }
}

/// Symmetric band matrix, lower part: `band[i][k] = A[i][i - k]`.
#[derive(Debug, Clone)]
struct Band {
    band: Vec<[f64; BW + 1]>,
}

impl Band {
    fn zeros(n: usize) -> Self {
        Band {
            band: vec![[0.0; BW + 1]; n],
        }
    }

    fn n(&self) -> usize {
        self.band.len()
    }

    fn add(&mut self, i: usize, j: usize, v: f64) {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        self.band[r][r - c] += v;
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        let (r, c) = if i >= j { (i, j) } else { (j, i) };
        if r - c > BW {
            0.0
        } else {
            self.band[r][r - c]
        }
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(BW);
            let hi = (i + BW).min(n - 1);
            y[i] = (lo..=hi).map(|j| self.get(i, j) * x[j]).sum();
        }
        y
    }
}

/// `A − σ M = L D Lᵀ` without pivoting.
struct Ldl {
    l: Vec<[f64; BW + 1]>,
    d: Vec<f64>,
}

impl Ldl {
    fn factor(a: &Band, m: &Band, sigma: f64) -> Self {
        let n = a.n();
        let mut l = vec![[0.0; BW + 1]; n];
        let mut d = vec![0.0; n];
        let scale = a.band.iter().map(|r| r[0].abs()).fold(1.0, f64::max);
        for i in 0..n {
            for k in (1..=BW.min(i)).rev() {
                let j = i - k;
                // L[i][j] = (A[i][j] − Σ_{m<j} L[i][m] L[j][m] D[m]) / D[j]
                let mut s = a.get(i, j) - sigma * m.get(i, j);
                for mm in j.saturating_sub(BW)..j {
                    if i - mm <= BW {
                        s -= l[i][i - mm] * l[j][j - mm] * d[mm];
                    }
                }
                l[i][k] = s / d[j];
            }
            let mut s = a.get(i, i) - sigma * m.get(i, i);
            for k in 1..=BW.min(i) {
                s -= l[i][k] * l[i][k] * d[i - k];
            }
            if s == 0.0 {
                s = f64::EPSILON * scale;
            }
            d[i] = s;
        }
        Ldl { l, d }
    }

    fn negatives(&self) -> usize {
        self.d.iter().filter(|v| **v < 0.0).count()
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 1..=BW.min(i) {
                y[i] -= self.l[i][k] * y[i - k];
            }
        }
        for i in 0..n {
            y[i] /= self.d[i];
        }
        for i in (0..n).rev() {
            for k in 1..=BW.min(n - 1 - i) {
                y[i] -= self.l[i + k][k] * y[i + k];
            }
        }
        y
    }
}

/// Assembled stiffness `A` and mass `M` of the discretized index form.
#[derive(Debug, Clone)]
pub struct IndexForm {
    a: Band,
    m: Band,
}

impl IndexForm {
    /// `lambda_tilde` is the 2×2 coefficient path, `c = ⟨ω₀ × ξ₁, ξ₂⟩`.
    pub fn assemble(lambda_tilde: impl Fn(f64) -> Mat2, c: f64, t_end: f64, n: usize) -> Result<Self> {
        if !(t_end > 0.0) || n < 2 {
            return Err(Error::InvalidInput("index form needs T > 0 and at least two elements".into()));
        }
        let dim = 2 * (n - 1);
        let mut a = Band::zeros(dim);
        let mut m = Band::zeros(dim);
        let h = t_end / n as f64;
        // element e spans nodes e, e+1; node k (1..n-1) has unknowns 2(k-1), 2(k-1)+1
        let idx = |node: usize, comp: usize| (node >= 1 && node < n).then(|| 2 * (node - 1) + comp);
        for e in 0..n {
            let t0 = e as f64 * h;
            let lt = (lambda_tilde(t0) + lambda_tilde(t0 + 0.5 * h) * 4.0 + lambda_tilde(t0 + h)) / 6.0;
            let nodes = [e, e + 1];
            for (li, &ni) in nodes.iter().enumerate() {
                for (lj, &nj) in nodes.iter().enumerate() {
                    let sign = if li == lj { 1.0 } else { -1.0 };
                    let mass = if li == lj { h / 3.0 } else { h / 6.0 };
                    for p in 0..2 {
                        let Some(r) = idx(ni, p) else { continue };
                        for q in 0..2 {
                            let Some(s) = idx(nj, q) else { continue };
                            if r >= s {
                                a.add(r, s, sign * lt[(p, q)] / h);
                            }
                        }
                        if let Some(s) = idx(nj, p) {
                            if r >= s {
                                m.add(r, s, mass);
                            }
                        }
                    }
                }
            }
            // c (f_L g_R − f_R g_L), split symmetrically
            let pairs = [(idx(e, 0), idx(e + 1, 1), 0.5 * c), (idx(e + 1, 0), idx(e, 1), -0.5 * c)];
            for (r, s, v) in pairs {
                if let (Some(r), Some(s)) = (r, s) {
                    a.add(r, s, v);
                }
            }
        }
        Ok(IndexForm { a, m })
    }

    pub fn dim(&self) -> usize {
        self.a.n()
    }

    /// Number of generalized eigenvalues below `sigma`.
    pub fn count_below(&self, sigma: f64) -> usize {
        Ldl::factor(&self.a, &self.m, sigma).negatives()
    }

    /// Smallest generalized eigenvalue.
    pub fn lambda_min(&self) -> Result<f64> {
        let fail = |what: &str| Error::EigSolveFailure(what.to_string());
        let (mut lo, mut hi) = (-1.0, 1.0);
        let mut guard = 0;
        while self.count_below(lo) > 0 {
            lo *= 4.0;
            guard += 1;
            if guard > 200 || !lo.is_finite() {
                return Err(fail("no lower bound for the spectrum"));
            }
        }
        while self.count_below(hi) == 0 {
            hi *= 4.0;
            guard += 1;
            if guard > 400 || !hi.is_finite() {
                return Err(fail("no upper bound for the spectrum"));
            }
        }
        let scale = lo.abs().max(hi.abs());
        for _ in 0..200 {
            if hi - lo <= 1e-11 * scale.max(1.0) * 1e-2 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) == 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        // inverse iteration just below the eigenvalue, then a Rayleigh quotient
        let shift = lo - (hi - lo).max(1e-12 * scale);
        let f = Ldl::factor(&self.a, &self.m, shift);
        let mut v = vec![1.0; self.dim()];
        for (i, x) in v.iter_mut().enumerate() {
            *x += 0.01 * (i as f64).sin();
        }
        for _ in 0..4 {
            let mv = self.m.mul(&v);
            v = f.solve(&mv);
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(fail("inverse iteration diverged"));
            }
            v.iter_mut().for_each(|x| *x /= norm);
        }
        let av = self.a.mul(&v);
        let mv = self.m.mul(&v);
        let num: f64 = v.iter().zip(&av).map(|(a, b)| a * b).sum();
        let den: f64 = v.iter().zip(&mv).map(|(a, b)| a * b).sum();
        let rq = num / den;
        if !rq.is_finite() {
            return Err(fail("non-finite Rayleigh quotient"));
        }
        Ok(rq.clamp(lo, hi))
    }
}

pub fn index_form_lambda<P: PullbackSource>(
    sys: &ReducedSystem<P>,
    t_end: f64,
    opts: IndexFormOptions,
) -> Result<f64> {
    IndexForm::assemble(|t| sys.lambda_tilde(t), sys.c, t_end, opts.n)?.lambda_min()
}

/// Number of negative directions of the discretized index form.
pub fn morse_index<P: PullbackSource>(sys: &ReducedSystem<P>, t_end: f64, opts: IndexFormOptions) -> Result<usize> {
    Ok(IndexForm::assemble(|t| sys.lambda_tilde(t), sys.c, t_end, opts.n)?.count_below(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::ConstantPullback;
    use crate::geometry::Vec3;
    use crate::jacobi::reduced::{reduced_coefficients, WkbDirection};
    use nalgebra::DMatrix;
    use std::f64::consts::TAU;

    fn killing(c: f64) -> ReducedSystem<ConstantPullback> {
        reduced_coefficients(ConstantPullback::identity(Vec3::z() * c), WkbDirection::from_angles(0.0, 0.0)).unwrap()
    }

    #[test]
    fn sign_changes_at_first_conjugate_time() {
        let sys = killing(1.3);
        let t0 = TAU / 1.3;
        let opts = IndexFormOptions::default();
        let before = index_form_lambda(&sys, 0.95 * t0, opts).unwrap();
        let at = index_form_lambda(&sys, t0, opts).unwrap();
        let after = index_form_lambda(&sys, 1.05 * t0, opts).unwrap();
        assert!(before > 0.0 && after < 0.0, "{before} {after}");
        assert!(at.abs() < 50.0 / (opts.n * opts.n) as f64, "{at}");
        assert_eq!(morse_index(&sys, 0.95 * t0, opts).unwrap(), 0);
        assert!(morse_index(&sys, 1.05 * t0, opts).unwrap() >= 1);
    }

    #[test]
    fn free_form_matches_dirichlet_spectrum() {
        // c = 0: two copies of −d²/dt², smallest eigenvalue (π/T)²
        let f = IndexForm::assemble(|_| Mat2::identity(), 0.0, 2.0, 200).unwrap();
        let want = (std::f64::consts::PI / 2.0).powi(2);
        assert!((f.lambda_min().unwrap() - want).abs() < 1e-3);
    }

    #[test]
    fn band_solver_matches_dense() {
        let lt = |t: f64| Mat2::new(1.0 + 0.3 * t.sin(), 0.1, 0.1, 2.0);
        let f = IndexForm::assemble(lt, 0.8, 3.0, 12).unwrap();
        let n = f.dim();
        let a = DMatrix::from_fn(n, n, |i, j| f.a.get(i, j));
        let m = DMatrix::from_fn(n, n, |i, j| f.m.get(i, j));
        let l = m.clone().cholesky().unwrap().l();
        let li = l.clone().try_inverse().unwrap();
        let c = &li * a * li.transpose();
        let eig = c.symmetric_eigen();
        let want = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
        assert!((f.lambda_min().unwrap() - want).abs() < 1e-9 * want.abs().max(1.0));
        for sigma in [-3.0, 0.0, 2.0, 10.0] {
            let below = eig.eigenvalues.iter().filter(|v| **v < sigma).count();
            assert_eq!(f.count_below(sigma), below);
        }
    }
}
