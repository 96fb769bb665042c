//! In two dimensions the reduced equation is scalar, `(a f')' = 0`, and
//! `f(t) = ∫₀ᵗ 1/a` never returns to zero while `a > 0`.

use crate::quad::integrate;

#[derive(Debug, Clone, PartialEq)]
pub struct DegeneracyCertificate {
    pub t_max: f64,
    /// Smallest sampled coefficient value.
    pub min_coefficient: f64,
    /// Smallest increment of `f` between consecutive samples.
    pub min_increment: f64,
    /// `f(t_max)`.
    pub final_value: f64,
    /// True when the coefficient stayed positive and `f` increased on every
    /// sample interval.
    pub monotone: bool,
}

impl DegeneracyCertificate {
    pub fn holds(&self) -> bool {
        self.monotone
    }
}

pub fn two_dim_degeneracy_check(coefficient: impl Fn(f64) -> f64, t_max: f64) -> DegeneracyCertificate {
    let n = 2000usize;
    let h = t_max / n as f64;
    let mut min_coefficient = f64::INFINITY;
    let mut min_increment = f64::INFINITY;
    let mut value = 0.0;
    let mut positive = true;
    for i in 0..n {
        let (a, b) = (i as f64 * h, (i + 1) as f64 * h);
        for t in [a, 0.5 * (a + b), b] {
            let c = coefficient(t);
            min_coefficient = min_coefficient.min(c);
            positive &= c > 0.0 && c.is_finite();
        }
        let step = integrate(|t| 1.0 / coefficient(t), a, b, 1e-12);
        min_increment = min_increment.min(step);
        value += step;
    }
    DegeneracyCertificate {
        t_max,
        min_coefficient,
        min_increment,
        final_value: value,
        monotone: positive && min_increment > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_coefficient() {
        let c = two_dim_degeneracy_check(|_| 1.0, 5.0);
        assert!(c.holds());
        assert!((c.final_value - 5.0).abs() < 1e-12);
    }

    #[test]
    fn large_oscillation_still_monotone() {
        let c = two_dim_degeneracy_check(|t| 1.001 + (7.0 * t).sin(), 20.0);
        assert!(c.holds());
        assert!(c.min_coefficient < 0.01);
    }

    #[test]
    fn sign_change_is_not_certified() {
        assert!(!two_dim_degeneracy_check(|t| (t - 1.0).cos(), 5.0).holds());
    }
}
