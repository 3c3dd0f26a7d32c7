//! Exact (ODE-integrated) Green kernels for -h^2 d^2 + V - lambda with
//! Dirichlet ends, the rank-one decoupling difference produced by an
//! interior Dirichlet condition, and a shooting eigenvalue finder.
//!
//! With u vanishing at a (u' = 1 there) and v vanishing at b (v' = 1
//! there), the kernel is
//!
//! ```text
//! G(x, y) = -u(min) v(max) / (h^2 W),   W = u v' - u' v,
//! ```
//!
//! the 1/h^2 coming from rewriting -h^2 f'' + (V - lambda) f = r in
//! Sturm-Liouville form. Adding a Dirichlet condition at an interior cut
//! changes the resolvent by the rank-one kernel kappa phi(x) phi(y) / h^2,
//! where phi is the two-sided profile normalized to 1 at the cut and
//! kappa = u(cut) v(cut) / W; |kappa| |phi|^2 is O(h^2), so the
//! operator-level difference |kappa| |phi|^2 / h^2 is O(1), not small.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::ode::{integrate, Trajectory};
use crate::potential::Potential;

type C64 = Complex64;

const MISS_ROOT_TOL: f64 = 1e-9;

/// At an exact eigenvalue the Wronskian is zero in theory and lands at
/// the integrator noise floor in practice; RK4 at step h/20 leaves
/// |W|/scale below 1e-6 h^4 there (measured on the flat potential).
/// Reject two decades above the floor: closer shifts produce kernels
/// dominated by that noise.
fn wronskian_eigen_tol(h: f64) -> f64 {
    (1e-4 * h.powi(4)).max(1e-10)
}

/// Composite Simpson over uniformly spaced samples; sample count must be
/// odd (an even number of panels).
pub fn simpson_uniform_samples(values: &[f64], dx: f64) -> f64 {
    assert!(values.len() >= 3 && values.len() % 2 == 1, "need odd sample count");
    let mut acc = values[0] + values[values.len() - 1];
    for (k, v) in values.iter().enumerate().skip(1).take(values.len() - 2) {
        acc += v * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * dx / 3.0
}

/// Both Dirichlet solutions sampled on a shared ascending grid, with
/// their rescaling ledgers; everything needed to evaluate the kernel.
#[derive(Debug, Clone)]
pub struct GreenKernel {
    pub xs: Vec<f64>,
    pub h: f64,
    u: Trajectory,
    /// v is integrated from b; stored reversed so index k matches xs[k].
    v_y: Vec<C64>,
    v_dy: Vec<C64>,
    v_ln: Vec<f64>,
    /// log |W| and arg W at the reference node, ledger included.
    ln_w: f64,
    arg_w: f64,
}

fn build_solutions(
    v: &Potential,
    lambda: C64,
    h: f64,
    xs: &[f64],
) -> Result<(Trajectory, Vec<C64>, Vec<C64>, Vec<f64>)> {
    let u = integrate(
        v,
        lambda,
        h,
        xs,
        h / 20.0,
        C64::new(0.0, 0.0),
        C64::new(1.0, 0.0),
    )?;
    let xs_back: Vec<f64> = xs.iter().rev().copied().collect();
    let vt = integrate(
        v,
        lambda,
        h,
        &xs_back,
        h / 20.0,
        C64::new(0.0, 0.0),
        C64::new(1.0, 0.0),
    )?;
    let n = xs.len();
    let mut v_y = vec![C64::new(0.0, 0.0); n];
    let mut v_dy = vec![C64::new(0.0, 0.0); n];
    let mut v_ln = vec![0.0f64; n];
    for k in 0..n {
        v_y[k] = vt.y[n - 1 - k];
        v_dy[k] = vt.dy[n - 1 - k];
        v_ln[k] = vt.ln_scale[n - 1 - k];
    }
    Ok((u, v_y, v_dy, v_ln))
}

impl GreenKernel {
    /// Integrate the two boundary solutions and freeze the Wronskian.
    /// The recording grid may be coarse; the integrator still steps at
    /// dx <= h/20 internally.
    pub fn build(v: &Potential, lambda: C64, h: f64, xs: &[f64]) -> Result<GreenKernel> {
        if xs.len() < 3 {
            return Err(Error::Domain("kernel grid needs at least 3 points".into()));
        }
        let (a, b) = v.interval();
        if (xs[0] - a).abs() > 1e-12 || (xs[xs.len() - 1] - b).abs() > 1e-12 {
            return Err(Error::Domain(
                "kernel grid must span the full interval".into(),
            ));
        }
        let (u, v_y, v_dy, v_ln) = build_solutions(v, lambda, h, xs)?;
        // Wronskian at mid-grid; constancy over the grid is a test
        // invariant, smallness is the numerically-an-eigenvalue signal
        let mid = xs.len() / 2;
        let w_raw = u.y[mid] * v_dy[mid] - u.dy[mid] * v_y[mid];
        let scale = u.y[mid].norm().max(u.dy[mid].norm()) * v_y[mid].norm().max(v_dy[mid].norm());
        if w_raw.norm() <= wronskian_eigen_tol(h) * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::Precondition(
                "lambda is (numerically) an eigenvalue: Wronskian ~ 0".into(),
            ));
        }
        let ln_w = w_raw.norm().ln() + u.ln_scale[mid] + v_ln[mid];
        let arg_w = w_raw.arg();
        Ok(GreenKernel {
            xs: xs.to_vec(),
            h,
            u,
            v_y,
            v_dy,
            v_ln,
            ln_w,
            arg_w,
        })
    }

    /// Wronskian u v' - u' v at node k (true value in log form).
    pub fn wronskian_at(&self, k: usize) -> (f64, f64) {
        let w_raw = self.u.y[k] * self.v_dy[k] - self.u.dy[k] * self.v_y[k];
        (
            w_raw.norm().ln() + self.u.ln_scale[k] + self.v_ln[k],
            w_raw.arg(),
        )
    }

    /// Kernel value at a pair of grid nodes.
    pub fn eval(&self, i: usize, j: usize) -> C64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        let uu = self.u.y[lo];
        let vv = self.v_y[hi];
        if uu == C64::new(0.0, 0.0) || vv == C64::new(0.0, 0.0) {
            return C64::new(0.0, 0.0);
        }
        let ln_mag = uu.norm().ln() + self.u.ln_scale[lo] + vv.norm().ln() + self.v_ln[hi]
            - self.ln_w
            - 2.0 * self.h.ln();
        let arg = uu.arg() + vv.arg() - self.arg_w + std::f64::consts::PI;
        C64::from_polar(ln_mag.exp(), arg)
    }

    /// Dense sampled kernel matrix K[i][j] = G(x_i, x_j).
    pub fn kernel_matrix(&self) -> Matrix {
        let n = self.xs.len();
        Matrix::from_fn(n, n, |i, j| self.eval(i, j))
    }

    pub fn u_value(&self, k: usize) -> C64 {
        self.u.value(k)
    }

    pub fn v_value(&self, k: usize) -> C64 {
        self.v_y[k] * self.v_ln[k].exp()
    }

    pub fn u_derivative(&self, k: usize) -> C64 {
        self.u.derivative(k)
    }

    pub fn v_derivative(&self, k: usize) -> C64 {
        self.v_dy[k] * self.v_ln[k].exp()
    }
}

/// The rank-one decoupling data at an interior cut.
#[derive(Debug, Clone)]
pub struct RankOneKernel {
    pub xs: Vec<f64>,
    /// Index of the cut inside xs.
    pub cut_index: usize,
    pub cut: f64,
    pub h: f64,
    /// Two-sided profile, phi(cut) = 1 exactly.
    pub phi: Vec<C64>,
    /// Wronskian-normalized product of the boundary solutions at the cut.
    pub kappa: C64,
    /// |kappa| |phi|_2^2; the h^2-order decoupling size.
    pub norm: f64,
}

impl RankOneKernel {
    /// Operator norm of the resolvent difference kernel
    /// kappa phi(x) phi(y) / h^2.
    pub fn operator_norm(&self) -> f64 {
        self.norm / (self.h * self.h)
    }
}

fn odd_count(len: f64, max_dx: f64) -> usize {
    let mut n = (len / max_dx).ceil() as usize;
    if n % 2 == 1 {
        n += 1;
    }
    n.max(4)
}

/// Grid spanning [a, b] through the cut with odd per-side sample counts
/// (so Simpson applies on each side) and spacing below h/10.
fn cut_grid(a: f64, b: f64, cut: f64, h: f64) -> (Vec<f64>, usize) {
    let max_dx = (h / 10.0).min((b - a) / 64.0);
    let nl = odd_count(cut - a, max_dx);
    let nr = odd_count(b - cut, max_dx);
    let mut xs = Vec::with_capacity(nl + nr + 1);
    for k in 0..=nl {
        xs.push(a + (cut - a) * (k as f64) / (nl as f64));
    }
    for k in 1..=nr {
        xs.push(cut + (b - cut) * (k as f64) / (nr as f64));
    }
    (xs, nl)
}

/// Build the rank-one difference profile for the interior Dirichlet cut.
pub fn rank_one_difference(v: &Potential, lambda: C64, h: f64, cut: f64) -> Result<RankOneKernel> {
    let (a, b) = v.interval();
    if cut <= a || cut >= b {
        return Err(Error::Domain(format!("cut {cut} outside ({a}, {b})")));
    }
    let (xs, cut_index) = cut_grid(a, b, cut, h);
    let kern = GreenKernel::build(v, lambda, h, &xs)?;
    let n = xs.len();
    let c = cut_index;
    let uc = kern.u.y[c];
    let vc = kern.v_y[c];
    if uc.norm() == 0.0 || vc.norm() == 0.0 {
        return Err(Error::Precondition(
            "cut coincides with a zero of a boundary solution".into(),
        ));
    }
    // kappa = u v / (u v' - u' v) at the cut; the rescaling ledgers of u
    // and v cancel between numerator and denominator
    let w_raw = uc * kern.v_dy[c] - kern.u.dy[c] * vc;
    if w_raw.norm() <= wronskian_eigen_tol(h) * (uc.norm() * kern.v_dy[c].norm()).max(1e-300) {
        return Err(Error::Precondition(
            "lambda is (numerically) an eigenvalue of the full operator".into(),
        ));
    }
    let kappa = uc * vc / w_raw;
    // profile: u/u(cut) on the left, v/v(cut) on the right, in log space
    let mut phi = vec![C64::new(0.0, 0.0); n];
    for k in 0..n {
        let (num, num_ln, den, den_ln) = if k <= c {
            (kern.u.y[k], kern.u.ln_scale[k], uc, kern.u.ln_scale[c])
        } else {
            (kern.v_y[k], kern.v_ln[k], vc, kern.v_ln[c])
        };
        if num.norm() == 0.0 {
            continue;
        }
        let ln_mag = num.norm().ln() + num_ln - den.norm().ln() - den_ln;
        phi[k] = C64::from_polar(ln_mag.exp(), num.arg() - den.arg());
    }
    // |phi|^2 by Simpson on each side (both sides have odd sample counts)
    let sq: Vec<f64> = phi.iter().map(|z| z.norm_sqr()).collect();
    let dxl = (cut - a) / (c as f64);
    let dxr = (b - cut) / ((n - 1 - c) as f64);
    let norm_sq =
        simpson_uniform_samples(&sq[..=c], dxl) + simpson_uniform_samples(&sq[c..], dxr);
    Ok(RankOneKernel {
        xs,
        cut_index,
        cut,
        h,
        phi,
        kappa,
        norm: kappa.norm() * norm_sq,
    })
}

/// Sampled kernel of the split operator (independent Dirichlet kernels on
/// each side of the cut, zero across), minus the full kernel; the direct
/// construction of the decoupling difference.
pub fn difference_kernel_sampled(
    v: &Potential,
    lambda: C64,
    h: f64,
    cut: f64,
    per_side: usize,
) -> Result<Matrix> {
    let (a, b) = v.interval();
    if cut <= a || cut >= b {
        return Err(Error::Domain(format!("cut {cut} outside ({a}, {b})")));
    }
    // shared sample grid through the cut
    let mut xs = Vec::with_capacity(2 * per_side + 1);
    for k in 0..=per_side {
        xs.push(a + (cut - a) * (k as f64) / (per_side as f64));
    }
    for k in 1..=per_side {
        xs.push(cut + (b - cut) * (k as f64) / (per_side as f64));
    }
    let c = per_side;
    let full = GreenKernel::build(v, lambda, h, &xs)?;

    // sub-potentials for the two half-intervals
    let left = v.restrict(a, cut)?;
    let right = v.restrict(cut, b)?;
    let kl = GreenKernel::build(&left, lambda, h, &xs[..=c])?;
    let kr_xs: Vec<f64> = xs[c..].to_vec();
    let kr = GreenKernel::build(&right, lambda, h, &kr_xs)?;

    let n = xs.len();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let split = if i <= c && j <= c {
                kl.eval(i, j)
            } else if i >= c && j >= c {
                kr.eval(i - c, j - c)
            } else {
                C64::new(0.0, 0.0)
            };
            d[(i, j)] = split - full.eval(i, j);
        }
    }
    Ok(d)
}

/// A located eigenvalue with the miss-function residue at the root.
#[derive(Debug, Clone, Copy)]
pub struct ShootingRoot {
    pub lambda: C64,
    pub abs_miss: f64,
}

/// Miss function m(lambda): value at b of the solution starting (0, 1)
/// at a, returned with a log offset so magnitudes stay representable.
fn miss(v: &Potential, h: f64, lambda: C64, max_dx: f64) -> Result<(C64, f64)> {
    let (a, b) = v.interval();
    let t = integrate(
        v,
        lambda,
        h,
        &[a, b],
        max_dx,
        C64::new(0.0, 0.0),
        C64::new(1.0, 0.0),
    )?;
    Ok((t.y[1], t.ln_scale[1]))
}

/// Scan the real window for local minima of |m| and refine each seed by
/// a complex secant iteration. Roots keep only if they converge inside
/// the window (with a small margin), satisfy the dimensionless threshold
/// |m| < 1e-9 max|m|_scan, and are not duplicates.
pub fn shooting_eigenvalues(
    v: &Potential,
    h: f64,
    window: (f64, f64),
    scan_points: usize,
) -> Result<Vec<ShootingRoot>> {
    let (lo, hi) = window;
    if !(lo < hi) || scan_points < 8 {
        return Err(Error::Domain("bad shooting window".into()));
    }
    let (a, b) = v.interval();
    let max_dx = (h / 10.0).min((b - a) / 4000.0);
    // coarse scan; the common ledger offset keeps values comparable
    let mut vals: Vec<(f64, C64, f64)> = Vec::with_capacity(scan_points);
    for k in 0..scan_points {
        let lam = lo + (hi - lo) * (k as f64) / ((scan_points - 1) as f64);
        let (m, ln) = miss(v, h, C64::new(lam, 0.0), max_dx)?;
        vals.push((lam, m, ln));
    }
    let ln_ref = vals
        .iter()
        .map(|(_, m, ln)| m.norm().ln() + ln)
        .fold(f64::NEG_INFINITY, f64::max);
    let scaled = |m: C64, ln: f64| -> C64 { m * (ln - ln_ref).exp() };
    let scan_max = vals
        .iter()
        .map(|&(_, m, ln)| scaled(m, ln).norm())
        .fold(0.0f64, f64::max);
    // seeds: interior local minima of |m|
    let mut seeds: Vec<f64> = Vec::new();
    for k in 1..scan_points - 1 {
        let m0 = scaled(vals[k - 1].1, vals[k - 1].2).norm();
        let m1 = scaled(vals[k].1, vals[k].2).norm();
        let m2 = scaled(vals[k + 1].1, vals[k + 1].2).norm();
        if m1 <= m0 && m1 <= m2 {
            seeds.push(vals[k].0);
        }
    }
    let margin = 0.05 * (hi - lo);
    let step0 = (hi - lo) / (scan_points as f64);
    let mut roots: Vec<ShootingRoot> = Vec::new();
    for seed in seeds {
        // complex secant from two nearby real points
        let mut z0 = C64::new(seed - 0.3 * step0, 0.0);
        let mut z1 = C64::new(seed + 0.3 * step0, 1e-8);
        let f = |z: C64| -> Result<C64> {
            let (m, ln) = miss(v, h, z, max_dx)?;
            Ok(scaled(m, ln))
        };
        let mut f0 = f(z0)?;
        let mut f1 = f(z1)?;
        let mut converged = None;
        for _ in 0..60 {
            let denom = f1 - f0;
            if denom.norm() == 0.0 {
                break;
            }
            let z2 = z1 - f1 * (z1 - z0) / denom;
            if !z2.re.is_finite() || !z2.im.is_finite() {
                break;
            }
            // reject refinements that wander out of the search window
            if z2.re < lo - margin || z2.re > hi + margin || z2.im.abs() > (hi - lo) {
                break;
            }
            z0 = z1;
            f0 = f1;
            z1 = z2;
            f1 = f(z1)?;
            if (z1 - z0).norm() <= 1e-13 * (1.0 + z1.norm()) && f1.norm() <= MISS_ROOT_TOL * scan_max
            {
                converged = Some((z1, f1.norm()));
                break;
            }
        }
        if let Some((z, m)) = converged {
            if m <= MISS_ROOT_TOL * scan_max
                && !roots.iter().any(|r| (r.lambda - z).norm() < 1e-6 * (1.0 + z.norm()))
            {
                roots.push(ShootingRoot {
                    lambda: z,
                    abs_miss: m,
                });
            }
        }
    }
    roots.sort_by(|p, q| p.lambda.re.partial_cmp(&q.lambda.re).unwrap());
    Ok(roots)
}

/// min over equal sub-intervals of dist(lambda, conv Phi(V_j)) minus the
/// non-convex distance; shrinks as the partition refines.
pub fn partition_refinement_gap(v: &Potential, lambda: C64, parts: usize) -> Result<f64> {
    let (a, b) = v.interval();
    let full = crate::potential::phi_region(v);
    let target = full.dist_to_phi(lambda);
    let mut min_block = f64::INFINITY;
    for k in 0..parts {
        let lo = a + (b - a) * (k as f64) / (parts as f64);
        let hi = a + (b - a) * ((k + 1) as f64) / (parts as f64);
        let sub = v.restrict(lo, hi)?;
        let region = crate::potential::phi_region(&sub);
        min_block = min_block.min(region.dist_to_conv_phi(lambda));
    }
    Ok((min_block - target).abs())
}
