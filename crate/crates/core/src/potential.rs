//! Piecewise potentials on an interval and the region Phi(V), the closure
//! of the range of V swept right by the half-line [0, inf).
//!
//! All distance computations reduce to one fact: for a fixed value s the
//! distance from lambda to s + [0, inf) is |lambda - s| when
//! Re(lambda - s) <= 0 and |Im(lambda - s)| otherwise.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::expr::Expr;

const SAMPLES_PER_PIECE: usize = 2048;
const END_OFFSET_REL: f64 = 1e-9;
const HULL_DEDUP: f64 = 1e-12;
/// Far shift closing conv Phi on the right; the two horizontal edges of
/// hull(S union S + RAY_SHIFT) reproduce the Minkowski ray exactly for
/// any query point with real part below the shift.
const RAY_SHIFT: f64 = 1e6;

/// A potential given piecewise by expressions on consecutive sub-intervals.
///
/// `partition` holds the interior breakpoints; piece k lives on
/// [points[k], points[k+1]) with the final piece closed on the right.
#[derive(Debug, Clone)]
pub struct Potential {
    pieces: Vec<Expr>,
    points: Vec<f64>, // a, interior partition..., b
    name: String,
}

impl Potential {
    pub fn from_pieces(
        piece_srcs: &[&str],
        interval: (f64, f64),
        partition: &[f64],
    ) -> Result<Potential> {
        let (a, b) = interval;
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Domain(format!("bad interval ({a}, {b})")));
        }
        if piece_srcs.len() != partition.len() + 1 {
            return Err(Error::Domain(format!(
                "{} pieces need {} interior partition points, got {}",
                piece_srcs.len(),
                piece_srcs.len() - 1,
                partition.len()
            )));
        }
        let mut points = Vec::with_capacity(partition.len() + 2);
        points.push(a);
        for &p in partition {
            if p <= a || p >= b {
                return Err(Error::Domain(format!(
                    "partition point {p} outside ({a}, {b})"
                )));
            }
            if let Some(&last) = points.last() {
                if p <= last {
                    return Err(Error::Domain("partition points must increase".into()));
                }
            }
            points.push(p);
        }
        points.push(b);
        let pieces = piece_srcs
            .iter()
            .map(|s| Expr::parse(s))
            .collect::<Result<Vec<_>>>()?;
        let name = piece_srcs.join(" | ");
        Ok(Potential {
            pieces,
            points,
            name,
        })
    }

    /// Construction from already-parsed pieces; `points` holds the full
    /// ascending breakpoint list including both endpoints.
    pub(crate) fn from_parts(
        pieces: Vec<Expr>,
        points: Vec<f64>,
        name: String,
    ) -> Result<Potential> {
        if points.len() != pieces.len() + 1 {
            return Err(Error::Dimension(format!(
                "{} pieces need {} breakpoints, got {}",
                pieces.len(),
                pieces.len() + 1,
                points.len()
            )));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Domain("breakpoints must increase".into()));
        }
        Ok(Potential {
            pieces,
            points,
            name,
        })
    }

    /// Single-expression potential on (a, b).
    pub fn new(src: &str, interval: (f64, f64)) -> Result<Potential> {
        Potential::from_pieces(&[src], interval, &[])
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.points[0], *self.points.last().unwrap())
    }

    pub fn partition(&self) -> &[f64] {
        &self.points[1..self.points.len() - 1]
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub(crate) fn pieces_exprs(&self) -> &[Expr] {
        &self.pieces
    }

    pub(crate) fn breakpoints(&self) -> &[f64] {
        &self.points
    }

    fn piece_index(&self, x: f64) -> usize {
        // half-open pieces, value at a breakpoint comes from the right
        let k = self.points[1..self.points.len() - 1]
            .iter()
            .take_while(|&&p| x >= p)
            .count();
        k.min(self.pieces.len() - 1)
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        self.pieces[self.piece_index(x)].eval(x)
    }

    /// One-sided limit from the left; differs from `eval` only at
    /// partition points of a discontinuous potential.
    pub fn eval_left(&self, x: f64) -> Complex64 {
        let k = self.points[1..self.points.len() - 1]
            .iter()
            .take_while(|&&p| x > p)
            .count();
        self.pieces[k.min(self.pieces.len() - 1)].eval(x)
    }

    /// Chebyshev-extrema sample points per piece, endpoints pulled inward
    /// one-sidedly so discontinuities are sampled from the correct side.
    pub fn sample_points(&self) -> Vec<f64> {
        let mut xs = Vec::with_capacity(SAMPLES_PER_PIECE * self.pieces.len());
        for k in 0..self.pieces.len() {
            let (lo, hi) = (self.points[k], self.points[k + 1]);
            let len = hi - lo;
            let off = END_OFFSET_REL * len;
            let (mid, rad) = (0.5 * (lo + hi), 0.5 * len);
            for j in 0..SAMPLES_PER_PIECE {
                let t = (j as f64) * std::f64::consts::PI / ((SAMPLES_PER_PIECE - 1) as f64);
                let mut x = mid - rad * t.cos(); // ascending in j
                if x - lo < off {
                    x = lo + off;
                }
                if hi - x < off {
                    x = hi - off;
                }
                xs.push(x);
            }
        }
        xs
    }

    /// Restriction to a sub-interval, keeping the pieces (and interior
    /// partition points) that intersect it.
    pub fn restrict(&self, lo: f64, hi: f64) -> Result<Potential> {
        let (a, b) = self.interval();
        if lo < a - 1e-12 || hi > b + 1e-12 || lo >= hi {
            return Err(Error::Domain(format!("bad restriction [{lo}, {hi}]")));
        }
        let mut pieces = Vec::new();
        let mut points = vec![lo];
        for k in 0..self.pieces.len() {
            let (plo, phi) = (self.points[k], self.points[k + 1]);
            if phi <= lo + 1e-15 || plo >= hi - 1e-15 {
                continue;
            }
            if plo > lo + 1e-15 {
                points.push(plo);
            }
            pieces.push(self.pieces[k].clone());
        }
        points.push(hi);
        Ok(Potential {
            pieces,
            points,
            name: format!("{} on [{lo}, {hi}]", self.name),
        })
    }

    /// Worst-case distance from any value of V to the nearest value at a
    /// grid node; the sampled-coverage slack entering the discrete
    /// resolvent bound.
    pub fn sampling_radius(&self, nodes: &[f64]) -> f64 {
        let node_vals: Vec<Complex64> = nodes.iter().map(|&x| self.eval(x)).collect();
        let mut worst = 0.0f64;
        for x in self.sample_points() {
            let v = self.eval(x);
            let mut best = f64::INFINITY;
            for w in &node_vals {
                best = best.min((v - w).norm());
            }
            worst = worst.max(best);
        }
        worst
    }
}

/// Distance from lambda to the single ray s + [0, inf).
#[inline]
pub fn ray_dist(lambda: Complex64, s: Complex64) -> f64 {
    let d = lambda - s;
    if d.re <= 0.0 {
        d.norm()
    } else {
        d.im.abs()
    }
}

/// Sampled representation of Phi(V) and of its convex hull.
#[derive(Debug, Clone)]
pub struct PhiRegion {
    /// Values of V at the dense sample points, piece by piece.
    pub samples: Vec<Complex64>,
    sample_xs: Vec<f64>,
    /// Convex hull of samples union samples + RAY_SHIFT, counter-clockwise.
    hull: Vec<Complex64>,
    potential: Potential,
}

pub fn phi_region(v: &Potential) -> PhiRegion {
    let sample_xs = v.sample_points();
    let samples: Vec<Complex64> = sample_xs.iter().map(|&x| v.eval(x)).collect();
    let mut pts: Vec<(f64, f64)> = Vec::with_capacity(2 * samples.len() + 4 * v.pieces.len());
    for s in &samples {
        pts.push((s.re, s.im));
        pts.push((s.re + RAY_SHIFT, s.im));
    }
    // the region is built on closure(ran V): one-sided limits at piece
    // endpoints enter exactly, not at the pulled-in sample offsets
    for k in 0..v.pieces.len() {
        for x in [v.points[k], v.points[k + 1]] {
            let s = v.pieces[k].eval(x);
            pts.push((s.re, s.im));
            pts.push((s.re + RAY_SHIFT, s.im));
        }
    }
    let hull = convex_hull(&mut pts)
        .into_iter()
        .map(|(x, y)| Complex64::new(x, y))
        .collect();
    PhiRegion {
        samples,
        sample_xs,
        hull,
        potential: v.clone(),
    }
}

impl PhiRegion {
    /// Distance from lambda to Phi(V) (non-convex): minimum of the per-ray
    /// distance over the sampled range, sharpened by a golden-section pass
    /// around the best sample.
    pub fn dist_to_phi(&self, lambda: Complex64) -> f64 {
        let mut best = f64::INFINITY;
        let mut best_k = 0;
        for (k, &s) in self.samples.iter().enumerate() {
            let d = ray_dist(lambda, s);
            if d < best {
                best = d;
                best_k = k;
            }
        }
        // refine within the bracketing sample interval (same piece)
        let piece = best_k / SAMPLES_PER_PIECE;
        let lo_k = best_k.max(piece * SAMPLES_PER_PIECE + 1) - 1;
        let hi_k = (best_k + 1).min((piece + 1) * SAMPLES_PER_PIECE - 1);
        let (mut lo, mut hi) = (self.sample_xs[lo_k], self.sample_xs[hi_k]);
        let phi = 0.5 * (5.0f64.sqrt() - 1.0);
        let f = |x: f64| ray_dist(lambda, self.potential.eval(x));
        let (mut x1, mut x2) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
        let (mut f1, mut f2) = (f(x1), f(x2));
        for _ in 0..80 {
            if hi - lo < 1e-14 * (1.0 + lo.abs()) {
                break;
            }
            if f1 <= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - phi * (hi - lo);
                f1 = f(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + phi * (hi - lo);
                f2 = f(x2);
            }
        }
        let mut out = best.min(f1).min(f2);
        // closure endpoint limits, evaluated on their own piece
        for k in 0..self.potential.pieces.len() {
            for x in [self.potential.points[k], self.potential.points[k + 1]] {
                out = out.min(ray_dist(lambda, self.potential.pieces[k].eval(x)));
            }
        }
        out
    }

    /// Distance from lambda to conv Phi(V); zero inside.
    pub fn dist_to_conv_phi(&self, lambda: Complex64) -> f64 {
        dist_to_convex_polygon(lambda, &self.hull)
    }

    /// Hull vertices (counter-clockwise; includes the far ray-closure pair).
    pub fn hull(&self) -> &[Complex64] {
        &self.hull
    }
}

/// Monotone-chain convex hull; input order destroyed; output CCW without
/// repetition of the first vertex. Duplicates within HULL_DEDUP collapse.
pub fn convex_hull(pts: &mut Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    pts.dedup_by(|a, b| (a.0 - b.0).abs() <= HULL_DEDUP && (a.1 - b.1).abs() <= HULL_DEDUP);
    let n = pts.len();
    if n <= 2 {
        return pts.clone();
    }
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter() {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn dist_point_segment(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

/// Distance to a convex polygon given CCW (degenerate inputs of one or two
/// vertices are a point and a segment).
pub fn dist_to_convex_polygon(p: Complex64, hull: &[Complex64]) -> f64 {
    match hull.len() {
        0 => f64::INFINITY,
        1 => (p - hull[0]).norm(),
        2 => dist_point_segment(p, hull[0], hull[1]),
        n => {
            let mut inside = true;
            let mut best = f64::INFINITY;
            for k in 0..n {
                let a = hull[k];
                let b = hull[(k + 1) % n];
                let cross = (b.re - a.re) * (p.im - a.im) - (b.im - a.im) * (p.re - a.re);
                if cross < 0.0 {
                    inside = false;
                }
                best = best.min(dist_point_segment(p, a, b));
            }
            if inside {
                0.0
            } else {
                best
            }
        }
    }
}
