//! Finite-difference discretization of -h^2 d^2/dx^2 + V(x) with
//! Dirichlet ends on an interval (a, b).
//!
//! The assembled matrix is tridiagonal: diagonal 2h^2/dx^2 + V(x_j),
//! off-diagonal -h^2/dx^2. Its numerical range lies inside
//! conv{V(x_j)} + [0, 4h^2/dx^2], which is what makes the discrete
//! distance bound exact.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::potential::Potential;

type C64 = Complex64;

/// Uniform grid of n interior nodes on (a, b); endpoints carry the
/// Dirichlet condition and are not stored.
#[derive(Debug, Clone)]
pub struct Grid {
    a: f64,
    b: f64,
    n: usize,
    dx: f64,
}

impl Grid {
    pub fn new(a: f64, b: f64, n: usize) -> Result<Grid> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::Domain(format!("bad interval ({a}, {b})")));
        }
        if n < 2 {
            return Err(Error::Domain("grid needs at least 2 interior nodes".into()));
        }
        let dx = (b - a) / ((n + 1) as f64);
        Ok(Grid { a, b, n, dx })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    pub fn node(&self, j: usize) -> f64 {
        debug_assert!(j < self.n);
        self.a + self.dx * ((j + 1) as f64)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.node(j)).collect()
    }

    /// Index of the interior node nearest to x.
    pub fn nearest_node(&self, x: f64) -> usize {
        let t = (x - self.a) / self.dx - 1.0;
        let j = t.round().max(0.0) as usize;
        j.min(self.n - 1)
    }
}

/// Dense assembly of the Dirichlet operator matrix.
///
/// Nodes exactly on a partition point of V are rejected: the potential
/// value there is ambiguous (one-sided limits differ) and the caller
/// should pick a grid that straddles the cut instead.
pub fn assemble(v: &Potential, grid: &Grid, h: f64) -> Result<Matrix> {
    if h <= 0.0 {
        return Err(Error::Domain(format!("h must be positive, got {h}")));
    }
    let (a, b) = grid.interval();
    let (va, vb) = v.interval();
    if (a - va).abs() > 1e-12 || (b - vb).abs() > 1e-12 {
        return Err(Error::Domain(
            "grid interval differs from potential interval".into(),
        ));
    }
    let tol = 1e-12 * (b - a);
    for j in 0..grid.n() {
        let x = grid.node(j);
        for &p in v.partition() {
            if (x - p).abs() <= tol {
                return Err(Error::NodeOnPartition { x, p });
            }
        }
    }
    let w = h * h / (grid.dx() * grid.dx());
    let n = grid.n();
    let mut m = Matrix::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = C64::new(2.0 * w, 0.0) + v.eval(grid.node(j));
        if j + 1 < n {
            m[(j, j + 1)] = C64::new(-w, 0.0);
            m[(j + 1, j)] = C64::new(-w, 0.0);
        }
    }
    Ok(m)
}

/// Result of deleting the rows and columns at interior cut nodes:
/// the operator decouples into independent Dirichlet blocks.
#[derive(Debug)]
pub struct SplitOperator {
    pub matrix: Matrix,
    /// Node indices (into the original grid) that were deleted.
    pub cut_nodes: Vec<usize>,
    /// Positions the requested cuts snapped to.
    pub cut_positions: Vec<f64>,
    /// Original-grid node index for every remaining row.
    pub kept: Vec<usize>,
}

/// Assemble with extra Dirichlet conditions at the given interior cuts.
/// Each cut snaps to the nearest interior node; that node's row and
/// column are deleted, which decouples the matrix into blocks.
pub fn assemble_split(v: &Potential, grid: &Grid, h: f64, cuts: &[f64]) -> Result<SplitOperator> {
    let full = assemble(v, grid, h)?;
    let n = grid.n();
    let mut cut_nodes: Vec<usize> = Vec::with_capacity(cuts.len());
    let mut cut_positions = Vec::with_capacity(cuts.len());
    for &c in cuts {
        let (a, b) = grid.interval();
        if c <= a || c >= b {
            return Err(Error::Domain(format!("cut {c} outside ({a}, {b})")));
        }
        let j = grid.nearest_node(c);
        if cut_nodes.contains(&j) {
            return Err(Error::Domain(format!(
                "cuts snap to the same node index {j}"
            )));
        }
        cut_nodes.push(j);
        cut_positions.push(grid.node(j));
    }
    cut_nodes.sort_unstable();
    cut_positions.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let kept: Vec<usize> = (0..n).filter(|j| !cut_nodes.contains(j)).collect();
    let mut m = Matrix::zeros(kept.len(), kept.len());
    for (r, &jr) in kept.iter().enumerate() {
        for (s, &js) in kept.iter().enumerate() {
            m[(r, s)] = full[(jr, js)];
        }
    }
    // deleting a tridiagonal row/column must decouple the neighbours
    for (r, &jr) in kept.iter().enumerate() {
        for (s, &js) in kept.iter().enumerate() {
            if jr.abs_diff(js) > 1 {
                debug_assert_eq!(m[(r, s)], C64::new(0.0, 0.0));
            }
        }
    }
    Ok(SplitOperator {
        matrix: m,
        cut_nodes,
        cut_positions,
        kept,
    })
}

/// Eigenvalues of the real symmetric tridiagonal matrix with constant
/// diagonal `diag` entries and constant off-diagonal `off`, by Sturm
/// bisection; an independent oracle for the Dirichlet Laplacian spectrum.
pub fn sturm_eigenvalues(diag: &[f64], off: f64, bisect_tol: f64) -> Vec<f64> {
    let n = diag.len();
    if n == 0 {
        return Vec::new();
    }
    let lo = diag.iter().cloned().fold(f64::INFINITY, f64::min) - 2.0 * off.abs() - 1.0;
    let hi = diag.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 2.0 * off.abs() + 1.0;
    // count of eigenvalues strictly below t via the Sturm sequence signs
    let count_below = |t: f64| -> usize {
        let mut count = 0;
        let mut d = 1.0f64;
        for k in 0..n {
            d = (diag[k] - t) - if k == 0 { 0.0 } else { off * off / d };
            if d == 0.0 {
                d = 1e-300;
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    (0..n)
        .map(|j| {
            let (mut lo, mut hi) = (lo, hi);
            while hi - lo > bisect_tol {
                let mid = 0.5 * (lo + hi);
                if count_below(mid) > j {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            0.5 * (lo + hi)
        })
        .collect()
}
