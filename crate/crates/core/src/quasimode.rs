//! Oscillating-bump quasimodes certifying resolvent-norm lower bounds.
//!
//! f(x) = e^{i gamma x / h} phi((x - c)/h^p) with the smooth compactly
//! supported profile phi(s) = exp(-1/(1-s^2)) and lambda = V(c) + gamma^2.
//! The quasimode is sampled on a grid and its residual is measured
//! against the assembled operator in the discrete 2-norm, so
//! 1/residual_ratio is a certified lower bound for resolvent_norm at
//! lambda on that same grid (Cauchy-Schwarz, no analysis needed).
//! Accuracy of the certificate against the continuum operator needs the
//! grid refined to dx <= h^2; `refined_grid` picks that grid.
//!
//! The closed-form residual bound is k1 h^{2-2p} + k2 h^{1-p} + osc with
//! k1 = |phi''|/|phi|, k2 = 2|gamma| |phi'|/|phi| and osc the worst
//! mismatch of gamma^2 + V - lambda over the support; at p = 1/2 both
//! h-terms and the oscillation of a Lipschitz potential balance at
//! h^{1/2}.

use num_complex::Complex64;

use crate::discretize::Grid;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::potential::Potential;

type C64 = Complex64;

/// L2 norms of the profile and its derivatives on (-1, 1), frozen from a
/// refined quadrature (re-verified by a test).
pub const BUMP_NORM: f64 = 0.3648097049764345;
pub const BUMP_D1_NORM: f64 = 0.6399898911333147;
pub const BUMP_D2_NORM: f64 = 3.2915448973694503;

/// Residual-bound coefficients: k1 = |phi''|/|phi|, k2 = 2|phi'|/|phi|
/// per unit |gamma|.
pub const K1: f64 = BUMP_D2_NORM / BUMP_NORM;
pub const K2_PER_GAMMA: f64 = 2.0 * BUMP_D1_NORM / BUMP_NORM;

/// Feasibility slack for the projection rule: Re(lambda - V(c)) may dip
/// this far below zero before a center is rejected.
const PROJECT_RE_SLACK: f64 = -1e-12;

#[inline]
pub fn bump(s: f64) -> f64 {
    let w = 1.0 - s * s;
    if w <= 1e-12 {
        0.0
    } else {
        (-1.0 / w).exp()
    }
}

#[inline]
pub fn bump_d1(s: f64) -> f64 {
    let w = 1.0 - s * s;
    if w <= 1e-12 {
        0.0
    } else {
        bump(s) * (-2.0 * s / (w * w))
    }
}

#[inline]
pub fn bump_d2(s: f64) -> f64 {
    let w = 1.0 - s * s;
    if w <= 1e-12 {
        0.0
    } else {
        bump(s) * (4.0 * s * s / (w * w * w * w) - (2.0 + 6.0 * s * s) / (w * w * w))
    }
}

/// A quasimode sampled on a grid, tied to the spectral parameter it
/// certifies: lambda = V(center) + gamma^2.
#[derive(Debug, Clone)]
pub struct Quasimode {
    pub lambda: C64,
    pub center: f64,
    /// Frequency of the phase factor e^{i gamma x / h}.
    pub gamma: f64,
    /// Support-width exponent; the support radius is h^p.
    pub p: f64,
    pub h: f64,
    /// Samples of f at the grid nodes.
    pub values: Vec<C64>,
    pub grid: Grid,
}

impl Quasimode {
    pub fn support_radius(&self) -> f64 {
        self.h.powf(self.p)
    }
}

/// Locate the continuity piece [lo, hi] of v containing x.
fn piece_bounds(v: &Potential, x: f64) -> Result<(f64, f64)> {
    let pts = v.breakpoints();
    let (a, b) = v.interval();
    if !(a..=b).contains(&x) {
        return Err(Error::Domain(format!("center {x} outside [{a}, {b}]")));
    }
    for w in pts.windows(2) {
        if x < w[1] || w[1] == b {
            return Ok((w[0], w[1]));
        }
    }
    Ok((pts[pts.len() - 2], b))
}

/// Sample the quasimode on the grid; lambda is set to V(center) + gamma^2.
/// The support ball must stay strictly inside the continuity piece of
/// the center (so also strictly inside the interval).
pub fn build_quasimode(
    v: &Potential,
    center: f64,
    gamma: f64,
    p: f64,
    h: f64,
    grid: &Grid,
) -> Result<Quasimode> {
    if h <= 0.0 || !(0.0..1.0).contains(&p) || p == 0.0 {
        return Err(Error::Domain(format!("need h > 0 and p in (0,1), got h={h} p={p}")));
    }
    let (a, b) = v.interval();
    let (ga, gb) = grid.interval();
    if (ga - a).abs() > 1e-12 || (gb - b).abs() > 1e-12 {
        return Err(Error::Domain("grid interval does not match potential".into()));
    }
    let r = h.powf(p);
    let (lo, hi) = piece_bounds(v, center)?;
    if center - r <= lo || center + r >= hi {
        return Err(Error::Precondition(format!(
            "support ball [{}, {}] touches a partition point or the interval boundary of piece [{lo}, {hi}]",
            center - r,
            center + r
        )));
    }
    let values: Vec<C64> = grid
        .nodes()
        .iter()
        .map(|&x| C64::from_polar(bump((x - center) / r), gamma * x / h))
        .collect();
    if values.iter().all(|z| z.norm_sqr() == 0.0) {
        return Err(Error::Precondition(
            "support fell between grid nodes; use a finer grid".into(),
        ));
    }
    Ok(Quasimode {
        lambda: v.eval(center) + gamma * gamma,
        center,
        gamma,
        p,
        h,
        values,
        grid: grid.clone(),
    })
}

/// Smallest grid with dx <= h^2 whose nodes avoid the partition points
/// of v (same collision tolerance as the assembler).
pub fn refined_grid(v: &Potential, h: f64) -> Result<Grid> {
    if h <= 0.0 {
        return Err(Error::Domain(format!("need h > 0, got {h}")));
    }
    let (a, b) = v.interval();
    let tol = 1e-12 * (b - a);
    let base = ((b - a) / (h * h)).ceil() as usize;
    for attempt in 0..32 {
        let n = (base + attempt).max(3) - 1;
        let grid = Grid::new(a, b, n)?;
        let collision = v
            .partition()
            .iter()
            .any(|&pt| (grid.node(grid.nearest_node(pt)) - pt).abs() <= tol);
        if !collision {
            return Ok(grid);
        }
    }
    Err(Error::Domain(
        "no dx <= h^2 grid avoids the partition points".into(),
    ))
}

/// Discrete residual ||(A - lambda) f||_2 / ||f||_2; by Cauchy-Schwarz
/// resolvent_norm(A, lambda) >= 1/ratio on the same grid.
pub fn residual_ratio(a: &Matrix, q: &Quasimode) -> Result<f64> {
    let n = q.values.len();
    if a.rows() != n || a.cols() != n {
        return Err(Error::Dimension(format!(
            "operator is {}x{}, quasimode has {n} samples",
            a.rows(),
            a.cols()
        )));
    }
    let mut af = vec![C64::new(0.0, 0.0); n];
    a.matvec(&q.values, &mut af);
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for j in 0..n {
        num += (af[j] - q.lambda * q.values[j]).norm_sqr();
        den += q.values[j].norm_sqr();
    }
    Ok((num / den).sqrt())
}

/// Same number as `residual_ratio` on the assembled matrix, computed
/// through the three-point stencil without materializing the matrix;
/// usable at the dx <= h^2 grid sizes where a dense matrix would not fit.
pub fn residual_ratio_direct(v: &Potential, q: &Quasimode) -> Result<f64> {
    let n = q.values.len();
    if n != q.grid.n() {
        return Err(Error::Dimension("quasimode sample count vs grid".into()));
    }
    let dx = q.grid.dx();
    let w = q.h * q.h / (dx * dx);
    let zero = C64::new(0.0, 0.0);
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for j in 0..n {
        let x = q.grid.node(j);
        let left = if j > 0 { q.values[j - 1] } else { zero };
        let right = if j + 1 < n { q.values[j + 1] } else { zero };
        let diag = C64::new(2.0 * w, 0.0) + v.eval(x) - q.lambda;
        let af = diag * q.values[j] - w * (left + right);
        num += af.norm_sqr();
        den += q.values[j].norm_sqr();
    }
    if den == 0.0 {
        return Err(Error::Precondition(
            "support fell between grid nodes; use a finer grid".into(),
        ));
    }
    Ok((num / den).sqrt())
}

/// Closed-form residual bound k1 h^{2-2p} + k2 |gamma| h^{1-p} + osc,
/// where osc is the worst mismatch |gamma^2 + V(x) - lambda| over 101
/// samples of the support ball. For lambda = V(c) + gamma^2 this is the
/// potential oscillation across the support; a foreign lambda adds its
/// representability mismatch automatically.
pub fn residual_bound(v: &Potential, q: &Quasimode) -> Result<f64> {
    let r = q.support_radius();
    let gamma2 = C64::new(q.gamma * q.gamma, 0.0);
    let mut osc = 0.0f64;
    let steps = 100;
    for k in 0..=steps {
        let x = q.center - r + 2.0 * r * (k as f64) / (steps as f64);
        osc = osc.max((gamma2 + v.eval(x) - q.lambda).norm());
    }
    Ok(K1 * q.h.powf(2.0 - 2.0 * q.p)
        + K2_PER_GAMMA * q.gamma.abs() * q.h.powf(1.0 - q.p)
        + osc)
}

/// Lower bound transported from a certified lambda to a nearby w by the
/// resolvent identity: ||R(w)|| >= ||R(l)||/(1 + |w-l| ||R(l)||), and
/// with ||R(l)|| >= 1/ratio this is monotone in ||R(l)||, giving
/// ||R(w)|| >= 1/(ratio + |w - l|).
pub fn extended_lower_bound(ratio: f64, dist: f64) -> f64 {
    1.0 / (ratio + dist)
}

/// Center and frequency resolved from a target spectral parameter.
#[derive(Debug, Clone, Copy)]
pub struct Projection {
    pub center: f64,
    pub gamma: f64,
    /// |Im(lambda - V(center))|; zero when lambda sits exactly on a ray.
    pub im_mismatch: f64,
}

/// Projection rule: center = argmin |Im(lambda - V(x))| subject to
/// Re(lambda - V(x)) >= -1e-12, gamma = sqrt(max(Re(lambda - V(c)), 0)).
/// The argmin over the dense samples is sharpened by a golden-section
/// pass on the winning piece.
pub fn project(v: &Potential, lambda: C64, p: f64) -> Result<Projection> {
    let xs = v.sample_points();
    let objective = |x: f64| (lambda - v.eval(x)).im.abs();
    let feasible = |x: f64| (lambda - v.eval(x)).re >= PROJECT_RE_SLACK;
    let mut best = f64::INFINITY;
    let mut best_k = usize::MAX;
    for (k, &x) in xs.iter().enumerate() {
        if !feasible(x) {
            continue;
        }
        let d = objective(x);
        if d < best {
            best = d;
            best_k = k;
        }
    }
    if best_k == usize::MAX {
        return Err(Error::Precondition(
            "no feasible center: Re(lambda - V) < 0 over the whole interval".into(),
        ));
    }
    // golden refinement between the neighbouring samples
    let lo_k = best_k.saturating_sub(1);
    let hi_k = (best_k + 1).min(xs.len() - 1);
    let (mut lo, mut hi) = (xs[lo_k], xs[hi_k]);
    let phi = 0.5 * (5.0f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
    let (mut f1, mut f2) = (objective(x1), objective(x2));
    for _ in 0..80 {
        if hi - lo < 1e-14 * (1.0 + lo.abs()) {
            break;
        }
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = objective(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = objective(x2);
        }
    }
    let mut center = xs[best_k];
    let refined = if f1 <= f2 { x1 } else { x2 };
    if objective(refined) <= best && feasible(refined) {
        center = refined;
    }
    let gap = lambda - v.eval(center);
    let _ = p;
    Ok(Projection {
        center,
        gamma: gap.re.max(0.0).sqrt(),
        im_mismatch: gap.im.abs(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct BlowupRow {
    pub h: f64,
    pub residual: f64,
    pub bound: f64,
    pub lower_bound: f64,
}

/// Residual sweep over an h list: project lambda once, then per h build
/// the dx <= h^2 grid, sample the quasimode, and certify.
pub fn blowup_sweep(v: &Potential, lambda: C64, p: f64, hs: &[f64]) -> Result<Vec<BlowupRow>> {
    let proj = project(v, lambda, p)?;
    hs.iter()
        .map(|&h| {
            let grid = refined_grid(v, h)?;
            let q = build_quasimode(v, proj.center, proj.gamma, p, h, &grid)?;
            let residual = residual_ratio_direct(v, &q)?;
            let bound = residual_bound(v, &q)?;
            Ok(BlowupRow {
                h,
                residual,
                bound,
                lower_bound: 1.0 / residual,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretize::assemble;
    use crate::linalg::resolvent_norm;
    use crate::quadrature::simpson_refine;
    use crate::util::loglog_slope;

    const SWEEP: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

    fn linear_i() -> Potential {
        Potential::new("i*x", (-1.0, 1.0)).unwrap()
    }

    #[test]
    fn profile_norms_match_frozen_constants() {
        let n0 = simpson_refine(&mut |s| C64::new(bump(s) * bump(s), 0.0), -1.0, 1.0, 1e-12)
            .0
            .re
            .sqrt();
        let n1 = simpson_refine(&mut |s| C64::new(bump_d1(s) * bump_d1(s), 0.0), -1.0, 1.0, 1e-12)
            .0
            .re
            .sqrt();
        let n2 = simpson_refine(&mut |s| C64::new(bump_d2(s) * bump_d2(s), 0.0), -1.0, 1.0, 1e-12)
            .0
            .re
            .sqrt();
        assert!((n0 - BUMP_NORM).abs() < 1e-9, "n0={n0}");
        assert!((n1 - BUMP_D1_NORM).abs() < 1e-9, "n1={n1}");
        assert!((n2 - BUMP_D2_NORM).abs() < 1e-8, "n2={n2}");
    }

    #[test]
    fn projection_rule_linear_i() {
        let v = linear_i();
        // lambda = V(0) + 1 projects to center 0, gamma 1
        let q = project(&v, C64::new(1.0, 0.0), 0.5).unwrap();
        assert!(q.center.abs() < 1e-8, "center={}", q.center);
        assert!((q.gamma - 1.0).abs() < 1e-8, "gamma={}", q.gamma);
        assert!(q.im_mismatch < 1e-8);
        // lambda on the range: zero momentum
        let q = project(&v, C64::new(0.0, 0.5), 0.5).unwrap();
        assert!((q.center - 0.5).abs() < 1e-8, "center={}", q.center);
        assert!(q.gamma.abs() < 1e-8, "gamma={}", q.gamma);
        // left of the range: no feasible center
        assert!(matches!(
            project(&v, C64::new(-0.5, 0.0), 0.5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn linear_i_residuals_pinned() {
        // frozen discrete residuals for V = ix, lambda = 1, p = 1/2 on
        // the dx <= h^2 grids (sizes 49, 199, 799, 3199, 12799)
        let v = linear_i();
        let expected = [2.271249, 1.482220, 0.960070, 0.641344, 0.439342];
        for (&h, &want) in SWEEP.iter().zip(expected.iter()) {
            let grid = refined_grid(&v, h).unwrap();
            let q = build_quasimode(&v, 0.0, 1.0, 0.5, h, &grid).unwrap();
            let got = residual_ratio_direct(&v, &q).unwrap();
            assert!(
                (got - want).abs() < 2e-6 * want,
                "h={h} got={got} want={want}"
            );
        }
    }

    #[test]
    fn dense_residual_and_certificate() {
        // the stencil path reproduces the dense matrix residual, and the
        // certificate 1/ratio is below the actual resolvent norm
        let v = linear_i();
        let h = 0.2;
        let grid = refined_grid(&v, h).unwrap();
        assert_eq!(grid.n(), 49);
        let q = build_quasimode(&v, 0.0, 1.0, 0.5, h, &grid).unwrap();
        let a = assemble(&v, &grid, h).unwrap();
        let dense = residual_ratio(&a, &q).unwrap();
        let direct = residual_ratio_direct(&v, &q).unwrap();
        assert!(
            (dense - direct).abs() <= 1e-13 * dense,
            "dense={dense} direct={direct}"
        );
        let res = resolvent_norm(&a, q.lambda);
        assert!(
            1.0 / dense <= res * (1.0 + 1e-10),
            "certificate {} vs resolvent {res}",
            1.0 / dense
        );
    }

    #[test]
    fn residual_decays_like_sqrt_h() {
        let v = linear_i();
        let rows = blowup_sweep(&v, C64::new(1.0, 0.0), 0.5, &SWEEP).unwrap();
        let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.residual)).collect();
        let slope = loglog_slope(&pairs);
        assert!((0.5..0.65).contains(&slope), "slope={slope}");
        for w in rows.windows(2) {
            assert!(w[1].residual < w[0].residual, "not monotone at h={}", w[1].h);
            // quartering h doubles the certificate at rate 1/2; per
            // halving that is a factor sqrt(2)
            let growth = w[1].lower_bound / w[0].lower_bound;
            assert!(growth >= 1.4, "h={} growth={growth}", w[1].h);
        }
        // spec'd quarter rule between h = 0.1 and h = 0.025
        let quarter = rows[1].residual / rows[3].residual;
        assert!((1.8..2.6).contains(&quarter), "quarter={quarter}");
    }

    #[test]
    fn closed_form_bound_dominates_measurement() {
        let v = linear_i();
        let rows = blowup_sweep(&v, C64::new(1.0, 0.0), 0.5, &SWEEP).unwrap();
        for r in rows {
            assert!(
                r.residual <= r.bound * 1.1,
                "h={}: bound {} < measured {}",
                r.h,
                r.bound,
                r.residual
            );
        }
    }

    #[test]
    fn flat_potential_bound_is_curvature_only() {
        // V constant, gamma = 0: the bound collapses to k1 h^{2-2p} and
        // the measured ratio decays at the same first-order-in-h rate
        let v = Potential::new("2", (-1.0, 1.0)).unwrap();
        let grid = refined_grid(&v, 0.1).unwrap();
        let q = build_quasimode(&v, 0.0, 0.0, 0.5, 0.1, &grid).unwrap();
        assert_eq!(q.lambda, C64::new(2.0, 0.0));
        let bound = residual_bound(&v, &q).unwrap();
        assert!((bound - K1 * 0.1).abs() < 1e-14, "bound={bound}");
        let r1 = residual_ratio_direct(&v, &q).unwrap();
        let grid2 = refined_grid(&v, 0.05).unwrap();
        let q2 = build_quasimode(&v, 0.0, 0.0, 0.5, 0.05, &grid2).unwrap();
        let r2 = residual_ratio_direct(&v, &q2).unwrap();
        let rate = r1 / r2;
        assert!((1.8..2.2).contains(&rate), "rate={rate}");
    }

    #[test]
    fn linear_oscillation_bound_is_exact() {
        // V = ix over radius 0.1: oscillation term is exactly 0.1
        let v = linear_i();
        let grid = refined_grid(&v, 0.01).unwrap();
        let q = build_quasimode(&v, 0.0, 1.0, 0.5, 0.01, &grid).unwrap();
        let bound = residual_bound(&v, &q).unwrap();
        let expected = K1 * 0.01 + K2_PER_GAMMA * 0.1 + 0.1;
        assert!((bound - expected).abs() < 1e-12, "bound={bound} expected={expected}");
    }

    #[test]
    fn support_leaving_interval_is_rejected() {
        let v = linear_i();
        let grid = Grid::new(-1.0, 1.0, 100).unwrap();
        // support radius 0.2^0.5 = 0.447 exceeds the 0.05 gap to the end
        assert!(matches!(
            build_quasimode(&v, 0.95, 1.0, 0.5, 0.2, &grid),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn support_crossing_partition_is_rejected() {
        let v = Potential::from_pieces(&["i*(x-0.5)", "i*(x+0.5)"], (-1.0, 1.0), &[0.0]).unwrap();
        let grid = Grid::new(-1.0, 1.0, 100).unwrap();
        // center 0.1 with radius 0.447 straddles the jump at 0
        assert!(matches!(
            build_quasimode(&v, 0.1, 1.0, 0.5, 0.2, &grid),
            Err(Error::Precondition(_))
        ));
        // narrow support on one side is fine
        assert!(build_quasimode(&v, 0.5, 1.0, 0.5, 0.01, &grid).is_ok());
    }

    #[test]
    fn support_between_nodes_is_rejected() {
        let v = linear_i();
        // nodes -0.5, 0, 0.5; support (0.234, 0.266) misses them all
        let grid = Grid::new(-1.0, 1.0, 3).unwrap();
        assert!(matches!(
            build_quasimode(&v, 0.25, 0.0, 0.9, 0.01, &grid),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn refined_grid_avoids_partitions() {
        let v = Potential::from_pieces(&["i*(x-0.5)", "i*(x+0.5)"], (-1.0, 1.0), &[0.0]).unwrap();
        // base size 50 puts a node at 0; the chooser must step past it
        let g = refined_grid(&v, 0.2).unwrap();
        assert!(g.dx() <= 0.04 + 1e-15);
        let nearest = g.node(g.nearest_node(0.0));
        assert!(nearest.abs() > 1e-12 * 2.0, "node at {nearest}");
    }

    #[test]
    fn extension_follows_resolvent_identity() {
        let lb = extended_lower_bound(0.5, 0.01);
        assert!((lb - 1.0 / 0.51).abs() < 1e-15);
        // transporting by zero distance returns the certificate itself
        assert_eq!(extended_lower_bound(0.25, 0.0), 4.0);
    }
}
