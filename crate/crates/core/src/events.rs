//! Root location for scalar event functions sampled from dense output.
//!
//! Transversal roots are bracketed by sign changes on a uniform sampling grid
//! and refined by bisection. Tangential contacts, where the function touches
//! zero without changing sign, are found as roots of the supplied derivative
//! at which the function itself is within a tolerance of zero.

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventOptions {
    /// Sampling step of the bracketing grid.
    pub dt: f64,
    /// Bisection stops once the bracket is this narrow.
    pub root_tol: f64,
    /// A derivative root is a contact if `|g| <= tangential_tol` there.
    pub tangential_tol: f64,
}

impl EventOptions {
    /// Sampling step `min(0.01, span / 2000)`.
    pub fn for_span(span: f64) -> Self {
        EventOptions {
            dt: (span / 2000.0).min(0.01),
            root_tol: 1e-10,
            tangential_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RootKind {
    Crossing,
    Tangential,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Root {
    pub t: f64,
    pub kind: RootKind,
    /// `g` at the located time.
    pub value: f64,
}

fn signs(values: &[f64]) -> Vec<i8> {
    let mut s: Vec<i8> = values
        .iter()
        .map(|v| if *v > 0.0 { 1 } else if *v < 0.0 { -1 } else { 0 })
        .collect();
    // the start point is a known degenerate zero; take its sign from the right
    if s.len() > 1 {
        s[0] = 0;
    }
    let first = s.iter().copied().find(|v| *v != 0).unwrap_or(0);
    let mut prev = first;
    for v in s.iter_mut() {
        if *v == 0 {
            *v = prev;
        } else {
            prev = *v;
        }
    }
    s
}

pub fn bisect(f: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let mut fa = f(a);
    if fa == 0.0 {
        return a;
    }
    for _ in 0..200 {
        if b - a <= tol {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm > 0.0) == (fa > 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Locates the roots of `g` on `(t_start, t_end]`. `dg` must be the time
/// derivative of `g` (or have the same sign pattern near contacts).
pub fn locate_roots(
    g: impl Fn(f64) -> f64,
    dg: impl Fn(f64) -> f64,
    t_start: f64,
    t_end: f64,
    opts: &EventOptions,
) -> Vec<Root> {
    if t_end <= t_start {
        return Vec::new();
    }
    let n = ((t_end - t_start) / opts.dt).ceil().max(1.0) as usize;
    let times: Vec<f64> = (0..=n)
        .map(|k| if k == n { t_end } else { t_start + k as f64 * opts.dt })
        .collect();
    let gv: Vec<f64> = times.iter().map(|&t| g(t)).collect();
    let dv: Vec<f64> = times.iter().map(|&t| dg(t)).collect();
    let gs = signs(&gv);
    let ds = signs(&dv);

    let mut crossings = Vec::new();
    let mut contacts = Vec::new();
    for k in 0..n {
        let (a, b) = (times[k], times[k + 1]);
        if gs[k] != gs[k + 1] {
            let t = bisect(&g, a, b, opts.root_tol);
            crossings.push(Root {
                t,
                kind: RootKind::Crossing,
                value: g(t),
            });
        }
        if ds[k] != ds[k + 1] {
            let t = bisect(&dg, a, b, opts.root_tol);
            let value = g(t);
            if value.abs() <= opts.tangential_tol {
                contacts.push(Root {
                    t,
                    kind: RootKind::Tangential,
                    value,
                });
            }
        }
    }
    // roundoff can split a contact into a pair of nearby sign changes
    crossings.retain(|c| contacts.iter().all(|k| (k.t - c.t).abs() > opts.dt));
    let mut out = crossings;
    out.extend(contacts);
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    out.dedup_by(|b, a| (b.t - a.t).abs() <= 10.0 * opts.root_tol);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sine_crossings() {
        let opts = EventOptions::for_span(10.0);
        let roots = locate_roots(|t| t.sin(), |t| t.cos(), 0.0, 10.0, &opts);
        let want = [std::f64::consts::PI, 2.0 * std::f64::consts::PI, 3.0 * std::f64::consts::PI];
        assert_eq!(roots.len(), 3);
        for (r, w) in roots.iter().zip(want) {
            assert_eq!(r.kind, RootKind::Crossing);
            assert!((r.t - w).abs() < 1e-9);
        }
    }

    #[test]
    fn cosine_contacts() {
        // 2cos t - 2 touches zero at 2πn without changing sign
        let opts = EventOptions::for_span(20.0);
        let roots = locate_roots(|t| 2.0 * t.cos() - 2.0, |t| -2.0 * t.sin(), 0.0, 20.0, &opts);
        assert_eq!(roots.len(), 3);
        for (n, r) in roots.iter().enumerate() {
            assert_eq!(r.kind, RootKind::Tangential);
            assert!((r.t - 2.0 * std::f64::consts::PI * (n + 1) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn slightly_positive_contact_is_merged() {
        let t0 = 3.0;
        let g = |t: f64| 1e-10 - (t - t0).powi(2);
        let dg = |t: f64| -2.0 * (t - t0);
        let opts = EventOptions::for_span(6.0);
        let roots = locate_roots(g, dg, 0.0, 6.0, &opts);
        assert_eq!(roots.len(), 1);
        assert_eq!(roots[0].kind, RootKind::Tangential);
        assert!((roots[0].t - t0).abs() < 1e-9);
    }

    #[test]
    fn near_miss_is_ignored() {
        let g = |t: f64| -1e-3 - (t - 3.0).powi(2);
        let dg = |t: f64| -2.0 * (t - 3.0);
        let roots = locate_roots(g, dg, 0.0, 6.0, &EventOptions::for_span(6.0));
        assert!(roots.is_empty());
    }
}
