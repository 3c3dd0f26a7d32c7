//! Composite Simpson quadrature for complex-valued integrands, with a
//! doubling refinement loop and a cumulative variant for phase tables.

use num_complex::Complex64;

type C64 = Complex64;

/// Composite Simpson with `panels` panels (2*panels subintervals).
pub fn simpson(f: &mut impl FnMut(f64) -> C64, a: f64, b: f64, panels: usize) -> C64 {
    assert!(panels >= 1);
    let n = 2 * panels;
    let dx = (b - a) / (n as f64);
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let x = a + dx * (k as f64);
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(x) * w;
    }
    acc * (dx / 3.0)
}

/// Refine by doubling until successive values agree to `tol` relative
/// (plus the same absolute floor), or the subinterval cap 2^20 is hit.
/// Returns the last value; convergence at the cap is not an error, the
/// caller sees the achieved tolerance through the pair.
pub fn simpson_refine(f: &mut impl FnMut(f64) -> C64, a: f64, b: f64, tol: f64) -> (C64, f64) {
    let mut panels = 8usize;
    let mut prev = simpson(f, a, b, panels);
    loop {
        panels *= 2;
        let cur = simpson(f, a, b, panels);
        let diff = (cur - prev).norm();
        let scale = cur.norm().max(1e-300);
        if diff <= tol * scale + tol || 2 * panels > (1 << 20) {
            return (cur, diff / scale);
        }
        prev = cur;
    }
}

/// Real-valued convenience wrappers.
pub fn simpson_real(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    simpson(&mut |x| C64::new(f(x), 0.0), a, b, panels).re
}

pub fn simpson_refine_real(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    simpson_refine(&mut |x| C64::new(f(x), 0.0), a, b, tol).0.re
}

/// Cumulative integral along ascending sample points: out[k] integrates
/// from xs[0] to xs[k], each gap handled by its own composite Simpson.
pub fn cumulative(f: &mut impl FnMut(f64) -> C64, xs: &[f64], panels_per_gap: usize) -> Vec<C64> {
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = C64::new(0.0, 0.0);
    out.push(acc);
    for w in xs.windows(2) {
        acc += simpson(f, w[0], w[1], panels_per_gap);
        out.push(acc);
    }
    out
}
