//! Dormand–Prince 5(4) with the 4th-order continuous extension. The whole
//! trajectory is kept so any time in the integration range can be evaluated
//! afterwards; event location and Λ interpolation both rely on that.

use crate::error::{Error, Result};

pub trait OdeSystem {
    fn dim(&self) -> usize;

    fn rhs(&self, t: f64, y: &[f64], dy: &mut [f64]) -> Result<()>;

    /// Called after each accepted step; used for domain checks.
    fn check_state(&self, _t: f64, _y: &[f64]) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            rtol: 1e-9,
            atol: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn new(rtol: f64, atol: f64) -> Self {
        Tolerances { rtol, atol }
    }

    pub fn tightened(self, factor: f64) -> Self {
        Tolerances {
            rtol: self.rtol * factor,
            atol: self.atol * factor,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    pub tol: Tolerances,
    pub max_steps: usize,
    pub h_max: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: Tolerances::default(),
            max_steps: 2_000_000,
            h_max: f64::INFINITY,
        }
    }
}

impl From<Tolerances> for SolverOptions {
    fn from(tol: Tolerances) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// One accepted step with its interpolation coefficients.
#[derive(Debug, Clone)]
struct DenseStep {
    t0: f64,
    h: f64,
    // 5 * dim coefficients, grouped by coefficient index
    coeffs: Vec<f64>,
}

/// Continuous solution on `[t_start, t_end]`.
#[derive(Debug, Clone)]
pub struct DenseSolution {
    dim: usize,
    t_start: f64,
    t_end: f64,
    y_start: Vec<f64>,
    steps: Vec<DenseStep>,
}

impl DenseSolution {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn step_count(&self) -> usize {
        self.steps.len()
    }

    /// Times at the end of every accepted step.
    pub fn mesh(&self) -> impl Iterator<Item = f64> + '_ {
        std::iter::once(self.t_start).chain(self.steps.iter().map(|s| s.t0 + s.h))
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    /// Clamps `t` into the solution range.
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if self.steps.is_empty() {
            out.copy_from_slice(&self.y_start);
            return;
        }
        let t = t.clamp(self.t_start, self.t_end);
        let idx = self
            .steps
            .partition_point(|s| s.t0 + s.h < t)
            .min(self.steps.len() - 1);
        let s = &self.steps[idx];
        let theta = (t - s.t0) / s.h;
        let theta1 = 1.0 - theta;
        let n = self.dim;
        let c = &s.coeffs;
        for i in 0..n {
            out[i] = c[i]
                + theta * (c[n + i] + theta1 * (c[2 * n + i] + theta * (c[3 * n + i] + theta1 * c[4 * n + i])));
        }
    }
}

fn error_norm(err: &[f64], y0: &[f64], y1: &[f64], tol: &Tolerances) -> f64 {
    let n = err.len();
    let sum: f64 = (0..n)
        .map(|i| {
            let sc = tol.atol + tol.rtol * y0[i].abs().max(y1[i].abs());
            (err[i] / sc).powi(2)
        })
        .sum();
    (sum / n as f64).sqrt()
}

fn initial_step<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    direction: f64,
    tol: &Tolerances,
    h_max: f64,
) -> Result<f64> {
    let n = y0.len();
    let zero = vec![0.0; n];
    let d0 = error_norm(y0, &zero, y0, tol);
    let d1 = error_norm(f0, &zero, y0, tol);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(h_max);
    let y1: Vec<f64> = (0..n).map(|i| y0[i] + direction * h * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    sys.rhs(t0 + direction * h, &y1, &mut f1)?;
    let df: Vec<f64> = (0..n).map(|i| f1[i] - f0[i]).collect();
    let d2 = error_norm(&df, &zero, y0, tol) / h;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h).min(h1).min(h_max))
}

/// Integrates `sys` from `(t0, y0)` to `t1`, keeping dense output.
pub fn integrate<S: OdeSystem + ?Sized>(
    sys: &S,
    t0: f64,
    y0: &[f64],
    t1: f64,
    opts: &SolverOptions,
) -> Result<DenseSolution> {
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::InvalidInput(format!(
            "initial state has {} entries, system has {n}",
            y0.len()
        )));
    }
    let mut sol = DenseSolution {
        dim: n,
        t_start: t0,
        t_end: t0,
        y_start: y0.to_vec(),
        steps: Vec::new(),
    };
    if t1 == t0 {
        return Ok(sol);
    }
    if t1 < t0 {
        return Err(Error::InvalidInput("backward integration is not supported".into()));
    }
    let tol = &opts.tol;
    let mut t = t0;
    let mut y = y0.to_vec();
    let mut k1 = vec![0.0; n];
    sys.rhs(t, &y, &mut k1)?;
    let mut h = initial_step(sys, t, &y, &k1, 1.0, tol, opts.h_max)?;
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut ytmp = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut last_rejected = false;
    let mut attempts = 0usize;

    while t < t1 {
        attempts += 1;
        if attempts > opts.max_steps {
            return Err(Error::StepFailure {
                t,
                reason: format!("exceeded {} step attempts", opts.max_steps),
            });
        }
        let mut last = false;
        if t + 1.01 * h >= t1 {
            h = t1 - t;
            last = true;
        }
        if h <= (t.abs().max(1.0)) * 1e-14 {
            return Err(Error::StepFailure {
                t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }

        for i in 0..n {
            ytmp[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(t + C2 * h, &ytmp, &mut k2)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * h, &ytmp, &mut k3)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * h, &ytmp, &mut k4)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + C5 * h, &ytmp, &mut k5)?;
        for i in 0..n {
            ytmp[i] = y[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(t + h, &ytmp, &mut k6)?;
        for i in 0..n {
            y1[i] = y[i] + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.rhs(t + h, &y1, &mut k7)?;
        for i in 0..n {
            err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        }
        let e = error_norm(&err, &y, &y1, tol);
        if !e.is_finite() {
            h *= 0.1;
            last_rejected = true;
            continue;
        }

        if e <= 1.0 {
            let mut coeffs = vec![0.0; 5 * n];
            for i in 0..n {
                let ydiff = y1[i] - y[i];
                let bspl = h * k1[i] - ydiff;
                coeffs[i] = y[i];
                coeffs[n + i] = ydiff;
                coeffs[2 * n + i] = bspl;
                coeffs[3 * n + i] = ydiff - h * k7[i] - bspl;
                coeffs[4 * n + i] =
                    h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let t_new = if last { t1 } else { t + h };
            sys.check_state(t_new, &y1)?;
            sol.steps.push(DenseStep { t0: t, h: t_new - t, coeffs });
            t = t_new;
            std::mem::swap(&mut y, &mut y1);
            std::mem::swap(&mut k1, &mut k7);
            let mut fac = 0.9 * e.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            h = (h * fac).min(opts.h_max);
            last_rejected = false;
        } else {
            let fac = (0.9 * e.powf(-0.2)).max(0.2);
            h *= fac;
            last_rejected = true;
        }
    }
    sol.t_end = t1;
    Ok(sol)
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oscillator;

    impl OdeSystem for Oscillator {
        fn dim(&self) -> usize {
            2
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[1];
            dy[1] = -y[0];
            Ok(())
        }
    }

    struct Logistic;

    impl OdeSystem for Logistic {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
            dy[0] = y[0] * (1.0 - y[0]);
            Ok(())
        }
    }

    #[test]
    fn oscillator_end_point_and_dense_output() {
        let opts = SolverOptions::from(Tolerances::new(1e-11, 1e-13));
        let sol = integrate(&Oscillator, 0.0, &[0.0, 1.0], 20.0, &opts).unwrap();
        let end = sol.eval(20.0);
        assert!((end[0] - 20f64.sin()).abs() < 1e-9);
        for k in 0..2000 {
            let t = 0.01 * k as f64 + 0.0037;
            let y = sol.eval(t);
            assert!((y[0] - t.sin()).abs() < 1e-9, "t = {t}");
            assert!((y[1] - t.cos()).abs() < 1e-9, "t = {t}");
        }
    }

    #[test]
    fn logistic_matches_closed_form() {
        let sol = integrate(&Logistic, 0.0, &[0.1], 10.0, &SolverOptions::default()).unwrap();
        for k in 0..=100 {
            let t = 0.1 * k as f64;
            let exact = 1.0 / (1.0 + 9.0 * (-t).exp());
            assert!((sol.eval(t)[0] - exact).abs() < 1e-8);
        }
    }

    #[test]
    fn error_rate_follows_tolerance() {
        let coarse = integrate(&Oscillator, 0.0, &[0.0, 1.0], 10.0, &Tolerances::new(1e-6, 1e-9).into()).unwrap();
        let fine = integrate(&Oscillator, 0.0, &[0.0, 1.0], 10.0, &Tolerances::new(1e-10, 1e-13).into()).unwrap();
        let e_coarse = (coarse.eval(10.0)[0] - 10f64.sin()).abs();
        let e_fine = (fine.eval(10.0)[0] - 10f64.sin()).abs();
        assert!(e_fine < e_coarse);
        assert!(fine.step_count() > coarse.step_count());
    }

    #[test]
    fn zero_length_interval() {
        let sol = integrate(&Oscillator, 1.0, &[0.5, 0.5], 1.0, &SolverOptions::default()).unwrap();
        assert_eq!(sol.eval(1.0), vec![0.5, 0.5]);
    }
}
