//! Liouville-Green (WKB) approximate solutions of -h^2 y'' + (V - lambda) y = 0.
//!
//! With q = V - lambda kept off the branch cut (-inf, 0], the two
//! approximate solutions and their leading-order derivatives are
//!
//!   y1 = q^{-1/4} e^{+xi/h},   y1' = +h^{-1} q^{+1/4} e^{+xi/h},
//!   y2 = q^{-1/4} e^{-xi/h},   y2' = -h^{-1} q^{+1/4} e^{-xi/h},
//!
//! where xi(x) integrates the principal branch of sqrt(q) from the left
//! endpoint. Their Wronskian y2 y1' - y1 y2' is exactly 2/h at every
//! point. All values live in log space so h as small as 1e-3 cannot
//! overflow.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::Potential;
use crate::quadrature::simpson;

type C64 = Complex64;

/// A nonzero complex number stored as (log magnitude, argument).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogComplex {
    pub ln_mag: f64,
    pub arg: f64,
}

impl LogComplex {
    pub fn from_c64(z: C64) -> LogComplex {
        LogComplex {
            ln_mag: z.norm().ln(),
            arg: z.arg(),
        }
    }

    /// Leave log space; overflows to inf honestly if ln_mag > ~709.
    pub fn to_c64(self) -> C64 {
        C64::from_polar(self.ln_mag.exp(), self.arg)
    }

    pub fn mul(self, other: LogComplex) -> LogComplex {
        LogComplex {
            ln_mag: self.ln_mag + other.ln_mag,
            arg: self.arg + other.arg,
        }
    }

    pub fn div(self, other: LogComplex) -> LogComplex {
        LogComplex {
            ln_mag: self.ln_mag - other.ln_mag,
            arg: self.arg - other.arg,
        }
    }

    pub fn neg(self) -> LogComplex {
        LogComplex {
            ln_mag: self.ln_mag,
            arg: self.arg + std::f64::consts::PI,
        }
    }

    pub fn log10_abs(self) -> f64 {
        self.ln_mag / std::f64::consts::LN_10
    }

    /// self - other, staying in log space: the larger term is factored
    /// out so the correction enters as 1 - small. For widely separated
    /// magnitudes this is the sinh-to-single-exponential collapse.
    pub fn sub(self, other: LogComplex) -> LogComplex {
        let (big, small, flip) = if self.ln_mag >= other.ln_mag {
            (self, other, false)
        } else {
            (other, self, true)
        };
        let ratio = small.div(big).to_c64();
        let corr = C64::new(1.0, 0.0) - ratio;
        let mut out = big.mul(LogComplex::from_c64(corr));
        if flip {
            out = out.neg();
        }
        out
    }
}

/// Principal square root, rejecting the branch cut; the location x is
/// only for the error message.
pub fn branch_sqrt_at(q: C64, x: f64) -> Result<C64> {
    if q.re <= 0.0 && q.im.abs() <= 1e-12 * q.norm().max(1.0) {
        return Err(Error::BranchCut { x });
    }
    Ok(q.sqrt())
}

/// Cumulative eikonal xi(x) = int_a^x sqrt(V - lambda) dt along ascending
/// sample points (anchored at xs[0]); Simpson per gap, gaps split at
/// partition points of V so jumps never sit inside a panel.
pub fn eikonal(v: &Potential, lambda: C64, xs: &[f64]) -> Result<Vec<C64>> {
    if xs.len() < 2 {
        return Err(Error::Domain("eikonal needs at least two points".into()));
    }
    for w in xs.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Domain("eikonal points must ascend".into()));
        }
    }
    use std::cell::Cell;
    let violation: Cell<Option<f64>> = Cell::new(None);
    let mut integrand = |x: f64| -> C64 {
        let q = v.eval(x) - lambda;
        match branch_sqrt_at(q, x) {
            Ok(s) => s,
            Err(_) => {
                if violation.get().is_none() {
                    violation.set(Some(x));
                }
                q.sqrt()
            }
        }
    };
    let mut out = Vec::with_capacity(xs.len());
    let mut acc = C64::new(0.0, 0.0);
    out.push(acc);
    for w in xs.windows(2) {
        let mut breaks = vec![w[0]];
        breaks.extend(
            v.partition()
                .iter()
                .copied()
                .filter(|&p| p > w[0] && p < w[1]),
        );
        breaks.push(w[1]);
        for seg in breaks.windows(2) {
            acc += simpson(&mut integrand, seg[0], seg[1], 8);
        }
        out.push(acc);
    }
    if let Some(x) = violation.get() {
        return Err(Error::BranchCut { x });
    }
    Ok(out)
}

/// WKB pair sampled on an ascending grid.
#[derive(Debug, Clone)]
pub struct WkbPair {
    pub xs: Vec<f64>,
    pub q: Vec<C64>,
    pub xi: Vec<C64>,
    pub h: f64,
    pub y1: Vec<LogComplex>,
    pub y2: Vec<LogComplex>,
    pub dy1: Vec<LogComplex>,
    pub dy2: Vec<LogComplex>,
}

pub fn wkb_pair(v: &Potential, lambda: C64, h: f64, xs: &[f64]) -> Result<WkbPair> {
    if h <= 0.0 {
        return Err(Error::Domain("h must be positive".into()));
    }
    let xi = eikonal(v, lambda, xs)?;
    let mut q = Vec::with_capacity(xs.len());
    for &x in xs {
        let qx = v.eval(x) - lambda;
        branch_sqrt_at(qx, x)?;
        q.push(qx);
    }
    let mut pair = WkbPair {
        xs: xs.to_vec(),
        q: q.clone(),
        xi: xi.clone(),
        h,
        y1: Vec::with_capacity(xs.len()),
        y2: Vec::with_capacity(xs.len()),
        dy1: Vec::with_capacity(xs.len()),
        dy2: Vec::with_capacity(xs.len()),
    };
    let ln_h = h.ln();
    for k in 0..xs.len() {
        let quarter_ln = 0.25 * q[k].norm().ln();
        let quarter_arg = 0.25 * q[k].arg();
        let re = xi[k].re / h;
        let im = xi[k].im / h;
        pair.y1.push(LogComplex {
            ln_mag: re - quarter_ln,
            arg: im - quarter_arg,
        });
        pair.y2.push(LogComplex {
            ln_mag: -re - quarter_ln,
            arg: -im - quarter_arg,
        });
        pair.dy1.push(LogComplex {
            ln_mag: re + quarter_ln - ln_h,
            arg: im + quarter_arg,
        });
        pair.dy2.push(LogComplex {
            ln_mag: -re + quarter_ln - ln_h,
            arg: -im + quarter_arg + std::f64::consts::PI,
        });
    }
    Ok(pair)
}

impl WkbPair {
    /// Wronskian y2 y1' - y1 y2' at node k; exactly 2/h up to rounding.
    pub fn wronskian(&self, k: usize) -> C64 {
        let a = self.y2[k].mul(self.dy1[k]);
        let b = self.y1[k].mul(self.dy2[k]);
        a.sub(b).to_c64()
    }

    /// Two-solution bracket g{alpha; x} = y2(alpha) y1(x) - y2(x) y1(alpha),
    /// the solution vanishing at alpha (up to normalization), in log space.
    pub fn bracket(&self, k_alpha: usize, k_x: usize) -> LogComplex {
        let a = self.y2[k_alpha].mul(self.y1[k_x]);
        let b = self.y2[k_x].mul(self.y1[k_alpha]);
        a.sub(b)
    }

    /// Single-exponential form of the bracket, valid once the eikonal
    /// separation dominates h (relative error e^{-2 Re dxi / h}).
    pub fn bracket_collapsed(&self, k_alpha: usize, k_x: usize) -> LogComplex {
        self.y2[k_alpha].mul(self.y1[k_x])
    }
}

/// Liouville-Green error-control integral: the L1 size of the potential
/// curvature seen by the approximation,
/// int |5 q'^2 / (16 q^{5/2}) - q'' / (4 q^{3/2})| dt per piece; the WKB
/// relative error is of order h times this.
pub fn error_control_integral(v: &Potential, lambda: C64, a: f64, b: f64) -> Result<f64> {
    let (va, vb) = v.interval();
    if a < va || b > vb || a >= b {
        return Err(Error::Domain(format!("bad range ({a}, {b})")));
    }
    let delta = 1e-5 * (vb - va);
    let mut total = 0.0;
    let mut pieces = vec![a];
    pieces.extend(v.partition().iter().copied().filter(|&p| p > a && p < b));
    pieces.push(b);
    for seg in pieces.windows(2) {
        // keep the difference stencil inside the piece
        let (lo, hi) = (seg[0] + delta, seg[1] - delta);
        if hi <= lo {
            continue;
        }
        let integrand = |x: f64| -> f64 {
            let q = v.eval(x) - lambda;
            let qp = (v.eval(x + delta) - v.eval(x - delta)) / (2.0 * delta);
            let qpp = (v.eval(x + delta) - v.eval(x) * 2.0 + v.eval(x - delta)) / (delta * delta);
            let q32 = q.powf(1.5);
            let q52 = q32 * q;
            (qp * qp * (5.0 / 16.0) / q52 - qpp * (0.25) / q32).norm()
        };
        total += simpson(
            &mut |x| C64::new(integrand(x), 0.0),
            lo,
            hi,
            256,
        )
        .re;
    }
    Ok(total)
}

/// Leading-order constants for the decoupling analysis at an interior
/// cut: the Wronskian-normalized product of the two Dirichlet solutions
/// and the squared norm of the normalized kernel profile. Both come from
/// the one-sided limits q+- = V(cut+-) - lambda:
///
///   kappa ~ -h / (sqrt(q+) + sqrt(q-)),
///   |phi|^2 ~ h/(2 Re sqrt(q+)) + h/(2 Re sqrt(q-)).
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticConstants {
    pub kappa: C64,
    pub phi_norm_sq: f64,
}

pub fn asymptotic_constants(
    v: &Potential,
    lambda: C64,
    cut: f64,
    h: f64,
) -> Result<AsymptoticConstants> {
    let (a, b) = v.interval();
    if cut <= a || cut >= b {
        return Err(Error::Domain(format!("cut {cut} outside ({a}, {b})")));
    }
    let qp = v.eval(cut) - lambda;
    let qm = v.eval_left(cut) - lambda;
    let sp = branch_sqrt_at(qp, cut)?;
    let sm = branch_sqrt_at(qm, cut)?;
    Ok(AsymptoticConstants {
        kappa: -h / (sp + sm),
        phi_norm_sq: h / (2.0 * sp.re) + h / (2.0 * sm.re),
    })
}

/// Max relative error of the WKB decaying solution y2 against an RK4
/// reference integrated in its stable direction (from b backwards),
/// sampled at the given number of uniform nodes.
pub fn wkb_vs_rk4_max_rel_error(
    v: &Potential,
    lambda: C64,
    h: f64,
    n_nodes: usize,
) -> Result<f64> {
    let (a, b) = v.interval();
    let xs: Vec<f64> = (0..=n_nodes)
        .map(|k| a + (b - a) * (k as f64) / (n_nodes as f64))
        .collect();
    let pair = wkb_pair(v, lambda, h, &xs)?;
    // backward reference started on the WKB values at b; forward
    // integration of a decaying solution would be exponentially unstable
    let xs_back: Vec<f64> = xs.iter().rev().copied().collect();
    let last = xs.len() - 1;
    let traj = crate::ode::integrate(
        v,
        lambda,
        h,
        &xs_back,
        h / 10.0,
        pair.y2[last].to_c64(),
        pair.dy2[last].to_c64(),
    )?;
    let mut worst = 0.0f64;
    for (kb, &x) in xs_back.iter().enumerate() {
        let kf = last - kb;
        debug_assert!((pair.xs[kf] - x).abs() < 1e-12);
        let reference = traj.value(kb);
        if reference.norm() == 0.0 {
            continue;
        }
        let rel = (pair.y2[kf].to_c64() - reference).norm() / reference.norm();
        worst = worst.max(rel);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..=n)
            .map(|k| a + (b - a) * (k as f64) / (n as f64))
            .collect()
    }

    #[test]
    fn log_complex_round_trip_and_sub() {
        let z = c(3.0, -4.0);
        let l = LogComplex::from_c64(z);
        assert!((l.to_c64() - z).norm() < 1e-12);
        let a = LogComplex::from_c64(c(5.0, 1.0));
        let b = LogComplex::from_c64(c(2.0, -1.0));
        assert!((a.sub(b).to_c64() - c(3.0, 2.0)).norm() < 1e-12);
        // subtraction with the small term first flips correctly
        assert!((b.sub(a).to_c64() - c(-3.0, -2.0)).norm() < 1e-12);
    }

    #[test]
    fn zero_potential_closed_form() {
        // V = 0, lambda = -1, h = 0.1 on (-1, 1): q = 1, xi = x + 1,
        // y2(x) = e^{-(x+1)/h}
        let v = Potential::new("0", (-1.0, 1.0)).unwrap();
        let xs = uniform(-1.0, 1.0, 16);
        let pair = wkb_pair(&v, c(-1.0, 0.0), 0.1, &xs).unwrap();
        for (k, &x) in xs.iter().enumerate() {
            let expected = -(x + 1.0) / 0.1;
            assert!(
                (pair.y2[k].ln_mag - expected).abs() < 1e-9,
                "x={x}: {} vs {expected}",
                pair.y2[k].ln_mag
            );
            assert!(pair.y2[k].arg.abs() < 1e-9);
        }
    }

    #[test]
    fn wronskian_is_two_over_h() {
        let v = Potential::new("i*x+2", (-1.0, 1.0)).unwrap();
        let h = 0.05;
        let xs = uniform(-1.0, 1.0, 40);
        let pair = wkb_pair(&v, c(-0.5, 0.0), h, &xs).unwrap();
        for k in 0..xs.len() {
            let w = pair.wronskian(k);
            assert!(
                (w - c(2.0 / h, 0.0)).norm() < 1e-10 * (2.0 / h),
                "k={k} w={w}"
            );
        }
    }

    #[test]
    fn branch_cut_detected() {
        // lambda = 1 puts q = -1 on the cut for V = 0
        let v = Potential::new("0", (-1.0, 1.0)).unwrap();
        let xs = uniform(-1.0, 1.0, 8);
        assert!(matches!(
            wkb_pair(&v, c(1.0, 0.0), 0.1, &xs),
            Err(Error::BranchCut { .. })
        ));
    }

    #[test]
    fn bracket_collapse_error_is_exponentially_small() {
        let v = Potential::new("i*x", (-1.0, 1.0)).unwrap();
        let h = 0.05;
        let xs = uniform(-1.0, 1.0, 40);
        let pair = wkb_pair(&v, c(-1.0, 0.0), h, &xs).unwrap();
        // alpha at the left end; x far enough that Re dxi >= 5h
        for k in 1..xs.len() {
            let dxi = (pair.xi[k] - pair.xi[0]).re;
            if dxi < 5.0 * h {
                continue;
            }
            let full = pair.bracket(0, k);
            let collapsed = pair.bracket_collapsed(0, k);
            let rel = (full.sub(collapsed).to_c64().norm()) / full.to_c64().norm().max(1e-300);
            let cap = (-2.0 * dxi / h).exp() * 1.001 + 1e-13;
            assert!(rel <= cap, "k={k} rel={rel} cap={cap}");
        }
    }

    #[test]
    fn error_control_scales_with_curvature() {
        // linear potential has constant q' and zero q''; the integral is
        // finite and small when lambda sits far from the range
        let v = Potential::new("i*x", (-1.0, 1.0)).unwrap();
        let far = error_control_integral(&v, c(-4.0, 0.0), -1.0, 1.0).unwrap();
        let near = error_control_integral(&v, c(-0.3, 0.0), -1.0, 1.0).unwrap();
        assert!(far < near, "far={far} near={near}");
        assert!(far > 0.0);
    }

    #[test]
    fn constants_for_flat_potential() {
        // V = 0, lambda = -1: q = 1 on both sides of any cut, so
        // kappa = -h/2 and |phi|^2 = h
        let v = Potential::new("0", (-1.0, 1.0)).unwrap();
        let h = 0.0125;
        let ac = asymptotic_constants(&v, c(-1.0, 0.0), 0.0, h).unwrap();
        assert!((ac.kappa - c(-h / 2.0, 0.0)).norm() < 1e-15);
        assert!((ac.phi_norm_sq - h).abs() < 1e-15);
    }

    #[test]
    fn constants_with_jump() {
        // one-sided limits differ across the cut; both square roots
        // contribute
        let v = Potential::from_pieces(&["i*(x-0.5)", "i*(x+0.5)"], (-1.0, 1.0), &[0.0]).unwrap();
        let h = 0.1;
        let lam = c(1.0, 0.0);
        let ac = asymptotic_constants(&v, lam, 0.0, h).unwrap();
        let sp = (c(0.0, 0.5) - lam).sqrt();
        let sm = (c(0.0, -0.5) - lam).sqrt();
        assert!((ac.kappa - (-h / (sp + sm))).norm() < 1e-15);
        assert!((ac.phi_norm_sq - (h / (2.0 * sp.re) + h / (2.0 * sm.re))).abs() < 1e-15);
    }

    #[test]
    fn rk4_comparison_error_halves_with_h() {
        let v = Potential::new("i*x", (-1.0, 1.0)).unwrap();
        let lam = c(-1.0, 0.0);
        let e1 = wkb_vs_rk4_max_rel_error(&v, lam, 0.08, 100).unwrap();
        let e2 = wkb_vs_rk4_max_rel_error(&v, lam, 0.04, 100).unwrap();
        let e3 = wkb_vs_rk4_max_rel_error(&v, lam, 0.02, 100).unwrap();
        let r1 = e1 / e2;
        let r2 = e2 / e3;
        assert!((1.6..2.4).contains(&r1), "r1={r1}");
        assert!((1.6..2.4).contains(&r2), "r2={r2}");
    }
}
