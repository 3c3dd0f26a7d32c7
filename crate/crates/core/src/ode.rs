//! Classical RK4 for the second-order equation -h^2 y'' + (V - lambda) y = 0,
//! written as y'' = q(x) y / h^2 with q = V - lambda.
//!
//! Solutions grow like e^{Re xi / h}, which overflows doubles long before
//! h gets interesting; whenever the state magnitude passes RESCALE_AT the
//! state is divided down and the log of the factor is carried in a ledger,
//! so the reported value at x is y[k] * exp(ln_scale[k]).

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::Potential;

type C64 = Complex64;

const RESCALE_AT: f64 = 1e100;

/// Second-order trajectory sampled at requested points.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub xs: Vec<f64>,
    pub y: Vec<C64>,
    pub dy: Vec<C64>,
    /// Cumulative rescaling ledger: true value = y * exp(ln_scale).
    pub ln_scale: Vec<f64>,
}

impl Trajectory {
    /// True complex value at node k; may overflow to inf if the caller
    /// insists on leaving log space.
    pub fn value(&self, k: usize) -> C64 {
        self.y[k] * self.ln_scale[k].exp()
    }

    pub fn derivative(&self, k: usize) -> C64 {
        self.dy[k] * self.ln_scale[k].exp()
    }

    /// log10 |y| at node k, overflow-safe.
    pub fn log10_abs(&self, k: usize) -> f64 {
        (self.y[k].norm().ln() + self.ln_scale[k]) / std::f64::consts::LN_10
    }
}

#[inline]
fn rk4_step(q: &impl Fn(f64) -> C64, h2: f64, x: f64, dx: f64, y: C64, p: C64) -> (C64, C64) {
    let f = |x: f64, y: C64, p: C64| -> (C64, C64) { (p, q(x) * y / h2) };
    let (k1y, k1p) = f(x, y, p);
    let (k2y, k2p) = f(x + 0.5 * dx, y + k1y * (0.5 * dx), p + k1p * (0.5 * dx));
    let (k3y, k3p) = f(x + 0.5 * dx, y + k2y * (0.5 * dx), p + k2p * (0.5 * dx));
    let (k4y, k4p) = f(x + dx, y + k3y * dx, p + k3p * dx);
    (
        y + (k1y + (k2y + k3y) * 2.0 + k4y) * (dx / 6.0),
        p + (k1p + (k2p + k3p) * 2.0 + k4p) * (dx / 6.0),
    )
}

/// Integrate from xs[0] through every point of xs (ascending or
/// descending), recording the state at each. Steps never straddle a
/// partition point of V: each gap is split there so the one-sided limits
/// are the values the stages see.
pub fn integrate(
    v: &Potential,
    lambda: C64,
    h: f64,
    xs: &[f64],
    max_dx: f64,
    y0: C64,
    dy0: C64,
) -> Result<Trajectory> {
    if xs.len() < 2 {
        return Err(Error::Domain("need at least two sample points".into()));
    }
    if h <= 0.0 || max_dx <= 0.0 {
        return Err(Error::Domain("h and max_dx must be positive".into()));
    }
    let forward = xs[1] > xs[0];
    for w in xs.windows(2) {
        if (w[1] > w[0]) != forward || w[1] == w[0] {
            return Err(Error::Domain("sample points must be strictly monotone".into()));
        }
    }
    let h2 = h * h;
    let pps = v.breakpoints();
    let pieces = v.pieces_exprs();
    let mut y = y0;
    let mut p = dy0;
    let mut ln_scale = 0.0f64;
    let mut out = Trajectory {
        xs: xs.to_vec(),
        y: vec![y0; xs.len()],
        dy: vec![dy0; xs.len()],
        ln_scale: vec![0.0; xs.len()],
    };
    for (k, w) in xs.windows(2).enumerate() {
        // split the gap at interior partition points of V
        let mut breaks: Vec<f64> = vec![w[0]];
        let mut cuts: Vec<f64> = v
            .partition()
            .iter()
            .copied()
            .filter(|&pp| (pp - w[0]) * (pp - w[1]) < 0.0)
            .collect();
        cuts.sort_by(|a, b| {
            if forward {
                a.partial_cmp(b).unwrap()
            } else {
                b.partial_cmp(a).unwrap()
            }
        });
        breaks.extend(cuts);
        breaks.push(w[1]);
        for seg in breaks.windows(2) {
            let gap = seg[1] - seg[0];
            let n_sub = (gap.abs() / max_dx).ceil().max(1.0) as usize;
            let dx = gap / (n_sub as f64);
            // Stage points can touch (or overshoot by roundoff) a partition
            // point at the segment ends; pin the piece by the segment
            // midpoint so every stage sees this side's one-sided limit.
            let mid = 0.5 * (seg[0] + seg[1]);
            let k_piece = pps[1..pps.len() - 1]
                .iter()
                .take_while(|&&p| mid >= p)
                .count()
                .min(pieces.len() - 1);
            let piece = &pieces[k_piece];
            let q = |x: f64| piece.eval(x) - lambda;
            let mut x = seg[0];
            for _ in 0..n_sub {
                let (ny, np) = rk4_step(&q, h2, x, dx, y, p);
                y = ny;
                p = np;
                x += dx;
                let mag = y.norm().max(p.norm());
                if mag > RESCALE_AT {
                    y /= mag;
                    p /= mag;
                    ln_scale += mag.ln();
                }
                if !(y.is_finite() && p.is_finite()) {
                    return Err(Error::NoConvergence(format!(
                        "state became non-finite near x = {x}"
                    )));
                }
            }
        }
        out.y[k + 1] = y;
        out.dy[k + 1] = p;
        out.ln_scale[k + 1] = ln_scale;
    }
    Ok(out)
}
