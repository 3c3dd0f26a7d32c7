//! One-sided Jacobi SVD, kept deliberately independent of the LU /
//! power-iteration path so it can serve as an oracle for resolvent norms.
//!
//! Columns are rotated pairwise until mutually orthogonal; the singular
//! values are then the column norms. Complex pairs are first de-phased so
//! each 2x2 subproblem is real.

use num_complex::Complex64;

use crate::linalg::Matrix;

type C64 = Complex64;

const SWEEP_LIMIT: usize = 60;
const ORTHO_TOL: f64 = 1e-14;

/// All singular values, descending. Exact zeros appear for exactly
/// deficient inputs (zero columns survive as zero norms).
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let (m, n) = (a.rows(), a.cols());
    let work = if m >= n { a.clone() } else { a.transpose_conj() };
    let (wm, wn) = (work.rows(), work.cols());
    // column-major copy
    let mut cols: Vec<Vec<C64>> = (0..wn)
        .map(|j| (0..wm).map(|i| work[(i, j)]).collect())
        .collect();

    for _ in 0..SWEEP_LIMIT {
        let mut worst = 0.0f64;
        for p in 0..wn {
            for q in (p + 1)..wn {
                let mut alpha = 0.0f64;
                let mut beta = 0.0f64;
                let mut gamma = C64::new(0.0, 0.0);
                for i in 0..wm {
                    alpha += cols[p][i].norm_sqr();
                    beta += cols[q][i].norm_sqr();
                    gamma += cols[p][i].conj() * cols[q][i];
                }
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let g = gamma.norm();
                let rel = g / (alpha * beta).sqrt();
                worst = worst.max(rel);
                if rel <= ORTHO_TOL {
                    continue;
                }
                // de-phase column q so the pair inner product is real g
                let phase = gamma / g;
                for i in 0..wm {
                    cols[q][i] /= phase;
                }
                let tau = (beta - alpha) / (2.0 * g);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                for i in 0..wm {
                    let vp = cols[p][i];
                    let vq = cols[q][i];
                    cols[p][i] = vp * c - vq * s;
                    cols[q][i] = vp * s + vq * c;
                }
            }
        }
        if worst <= ORTHO_TOL {
            break;
        }
    }

    let mut sv: Vec<f64> = cols
        .iter()
        .map(|col| col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
    sv
}

/// Smallest singular value (oracle counterpart of 1/resolvent_norm).
pub fn sigma_min_oracle(a: &Matrix) -> f64 {
    *singular_values(a).last().unwrap_or(&0.0)
}
