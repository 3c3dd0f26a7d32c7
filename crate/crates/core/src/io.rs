//! Deterministic text and image output.
//!
//! Every writer produces byte-identical files for identical inputs:
//! UTF-8, '\n' line endings, '.' decimal separator, and Rust's shortest
//! round-trip float formatting. Non-finite resolvent norms serialize as
//! "inf" in CSV and clamp to white in PGM.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::Result;
use crate::green::ShootingRoot;
use crate::linalg::{C64, Matrix, ResolventMap};
use crate::quasimode::BlowupRow;
use crate::twist::TwistRow;

/// Shortest round-trip decimal form; infinities become "inf" / "-inf".
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x == f64::INFINITY {
        "inf".to_string()
    } else if x == f64::NEG_INFINITY {
        "-inf".to_string()
    } else {
        format!("{x}")
    }
}

/// Complex in "a+bi" / "a-bi" form, safe inside comma-separated files.
pub fn fmt_complex(z: C64) -> String {
    if z.im.is_sign_negative() {
        format!("{}-{}i", fmt_f64(z.re), fmt_f64(-z.im))
    } else {
        format!("{}+{}i", fmt_f64(z.re), fmt_f64(z.im))
    }
}

/// One bound-sweep line: h, measured resolvent norm, distance-bound
/// reference it is compared against.
#[derive(Debug, Clone, Copy)]
pub struct BoundRow {
    pub h: f64,
    pub resolvent_norm: f64,
    pub reference: f64,
}

/// One rank-one decoupling line: coupling constant, kernel norm and the
/// operator norm (kernel norm / h^2).
#[derive(Debug, Clone, Copy)]
pub struct RankOneRow {
    pub h: f64,
    pub kappa: C64,
    pub norm: f64,
    pub op_norm: f64,
}

/// One two-sided asymptotics line; `product` is kappa times the squared
/// profile norm over h^2, the predicted decoupling operator norm.
#[derive(Debug, Clone, Copy)]
pub struct WkbRow {
    pub h: f64,
    pub max_rel_err_y2: f64,
    pub kappa: C64,
    pub phi_norm_sq: f64,
    pub product: C64,
}

fn write_text(path: &Path, body: &str) -> Result<()> {
    fs::write(path, body.as_bytes())?;
    Ok(())
}

/// Resolvent-norm grid as CSV: one "re,im,log10norm" row per grid point,
/// imaginary part varying slowest, both axes ascending.
pub fn write_map_csv(path: &Path, map: &ResolventMap) -> Result<()> {
    let mut s = String::from("re,im,log10norm\n");
    for (i, &im) in map.im.iter().enumerate() {
        for (j, &re) in map.re.iter().enumerate() {
            let _ = writeln!(
                s,
                "{},{},{}",
                fmt_f64(re),
                fmt_f64(im),
                fmt_f64(map.at(i, j))
            );
        }
    }
    write_text(path, &s)
}

/// Resolvent-norm grid as binary 8-bit PGM (P5). Finite values scale
/// linearly onto 0..=255 over their own [min, max]; +inf clamps to 255;
/// a constant map renders all black. Top image row is the largest
/// imaginary part.
pub fn write_map_pgm(path: &Path, map: &ResolventMap) -> Result<()> {
    let (w, hgt) = (map.re.len(), map.im.len());
    let finite: Vec<f64> = map.log10norm.iter().copied().filter(|v| v.is_finite()).collect();
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;

    let mut bytes = format!("P5\n{w} {hgt}\n255\n").into_bytes();
    for i in (0..hgt).rev() {
        for j in 0..w {
            let v = map.at(i, j);
            let px = if !v.is_finite() {
                255u8
            } else if !(span > 0.0) || !span.is_finite() {
                0u8
            } else {
                (((v - lo) / span * 255.0).round().clamp(0.0, 255.0)) as u8
            };
            bytes.push(px);
        }
    }
    fs::write(path, bytes)?;
    Ok(())
}

/// Plain-text dense dump: header line "dim h dx a b", then one line per
/// matrix row holding "re im" pairs separated by single spaces.
pub fn write_matrix_dump(path: &Path, m: &Matrix, h: f64, dx: f64, interval: (f64, f64)) -> Result<()> {
    let n = m.rows();
    let mut s = format!(
        "{} {} {} {} {}\n",
        n,
        fmt_f64(h),
        fmt_f64(dx),
        fmt_f64(interval.0),
        fmt_f64(interval.1)
    );
    for i in 0..n {
        for j in 0..m.cols() {
            if j > 0 {
                s.push(' ');
            }
            let z = m[(i, j)];
            let _ = write!(s, "{} {}", fmt_f64(z.re), fmt_f64(z.im));
        }
        s.push('\n');
    }
    write_text(path, &s)
}

/// Pseudomode residual sweep: "h,ratio,bound,lower_bound_resolvent".
pub fn write_blowup_csv(path: &Path, rows: &[BlowupRow]) -> Result<()> {
    let mut s = String::from("h,ratio,bound,lower_bound_resolvent\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            fmt_f64(r.h),
            fmt_f64(r.residual),
            fmt_f64(r.bound),
            fmt_f64(r.lower_bound)
        );
    }
    write_text(path, &s)
}

/// Upper-bound sweep: "h,resolvent_norm,reference".
pub fn write_bound_csv(path: &Path, rows: &[BoundRow]) -> Result<()> {
    let mut s = String::from("h,resolvent_norm,reference\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt_f64(r.h),
            fmt_f64(r.resolvent_norm),
            fmt_f64(r.reference)
        );
    }
    write_text(path, &s)
}

/// Shooting eigenvalues at one h: "re,im,abs_miss,h".
pub fn write_eigs_csv(path: &Path, roots: &[ShootingRoot], h: f64) -> Result<()> {
    let mut s = String::from("re,im,abs_miss,h\n");
    for r in roots {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            fmt_f64(r.lambda.re),
            fmt_f64(r.lambda.im),
            fmt_f64(r.abs_miss),
            fmt_f64(h)
        );
    }
    write_text(path, &s)
}

/// Rank-one decoupling sweep: "h,kappa_re,kappa_im,norm,op_norm".
pub fn write_rankone_csv(path: &Path, rows: &[RankOneRow]) -> Result<()> {
    let mut s = String::from("h,kappa_re,kappa_im,norm,op_norm\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(r.h),
            fmt_f64(r.kappa.re),
            fmt_f64(r.kappa.im),
            fmt_f64(r.norm),
            fmt_f64(r.op_norm)
        );
    }
    write_text(path, &s)
}

/// Conjugation sweep: "h,norm_P,norm_Q,norm_G,res_diff,bound_rhs".
pub fn write_twist_csv(path: &Path, rows: &[TwistRow]) -> Result<()> {
    let mut s = String::from("h,norm_P,norm_Q,norm_G,res_diff,bound_rhs\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_f64(r.h),
            fmt_f64(r.norm_p),
            fmt_f64(r.norm_q),
            fmt_f64(r.norm_g),
            fmt_f64(r.res_diff),
            fmt_f64(r.bound_rhs)
        );
    }
    write_text(path, &s)
}

/// Asymptotic-constants sweep; complex columns use the a+bi form:
/// "h,max_rel_err_y2,kappa,phi_norm_sq,product".
pub fn write_wkb_csv(path: &Path, rows: &[WkbRow]) -> Result<()> {
    let mut s = String::from("h,max_rel_err_y2,kappa,phi_norm_sq,product\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_f64(r.h),
            fmt_f64(r.max_rel_err_y2),
            fmt_complex(r.kappa),
            fmt_f64(r.phi_norm_sq),
            fmt_complex(r.product)
        );
    }
    write_text(path, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formatting_round_trips() {
        for x in [0.1, -2.5, 1e-300, 3.141592653589793, 1e20] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!(fmt_f64(f64::NEG_INFINITY), "-inf");
        assert_eq!(fmt_f64(1.0), "1");
    }

    #[test]
    fn complex_formatting_signs() {
        assert_eq!(fmt_complex(C64::new(1.5, 0.25)), "1.5+0.25i");
        assert_eq!(fmt_complex(C64::new(-2.0, -0.5)), "-2-0.5i");
        assert_eq!(fmt_complex(C64::new(0.0, 1.0)), "0+1i");
    }

    #[test]
    fn map_csv_layout() {
        let map = ResolventMap {
            re: vec![0.0, 1.0],
            im: vec![-1.0, 1.0],
            log10norm: vec![1.0, 2.0, 3.0, f64::INFINITY],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("map.csv");
        write_map_csv(&p, &map).unwrap();
        let got = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            got,
            "re,im,log10norm\n0,-1,1\n1,-1,2\n0,1,3\n1,1,inf\n"
        );
    }

    #[test]
    fn pgm_top_row_is_max_im() {
        let map = ResolventMap {
            re: vec![0.0, 1.0],
            im: vec![-1.0, 1.0],
            log10norm: vec![0.0, 0.0, 4.0, f64::INFINITY],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("map.pgm");
        write_map_pgm(&p, &map).unwrap();
        let got = std::fs::read(&p).unwrap();
        let header = b"P5\n2 2\n255\n";
        assert_eq!(&got[..header.len()], header);
        // top row holds the im = +1 values: max scales to 255, inf clamps
        assert_eq!(&got[header.len()..], &[255, 255, 0, 0]);
    }

    #[test]
    fn constant_map_renders_black() {
        let map = ResolventMap {
            re: vec![0.0],
            im: vec![0.0, 1.0],
            log10norm: vec![7.0, 7.0],
        };
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("flat.pgm");
        write_map_pgm(&p, &map).unwrap();
        let got = std::fs::read(&p).unwrap();
        assert_eq!(&got[got.len() - 2..], &[0, 0]);
    }

    #[test]
    fn matrix_dump_shape() {
        let mut m = Matrix::zeros(2, 2);
        m[(0, 0)] = C64::new(1.0, -2.0);
        m[(1, 1)] = C64::new(0.5, 0.0);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.txt");
        write_matrix_dump(&p, &m, 0.1, 0.25, (0.0, 1.0)).unwrap();
        let got = std::fs::read_to_string(&p).unwrap();
        assert_eq!(got, "2 0.1 0.25 0 1\n1 -2 0 0\n0 0 0.5 0\n");
    }

    #[test]
    fn csv_writers_emit_headers_and_lf() {
        let dir = tempfile::tempdir().unwrap();

        let p = dir.path().join("blowup.csv");
        write_blowup_csv(
            &p,
            &[BlowupRow {
                h: 0.1,
                residual: 2.0,
                bound: 3.0,
                lower_bound: 0.5,
            }],
        )
        .unwrap();
        let got = std::fs::read_to_string(&p).unwrap();
        assert_eq!(got, "h,ratio,bound,lower_bound_resolvent\n0.1,2,3,0.5\n");
        assert!(!got.contains('\r'));

        let p = dir.path().join("wkb.csv");
        write_wkb_csv(
            &p,
            &[WkbRow {
                h: 0.2,
                max_rel_err_y2: 0.01,
                kappa: C64::new(-0.1, 0.0),
                phi_norm_sq: 0.4,
                product: C64::new(-1.0, 0.25),
            }],
        )
        .unwrap();
        let got = std::fs::read_to_string(&p).unwrap();
        assert_eq!(
            got,
            "h,max_rel_err_y2,kappa,phi_norm_sq,product\n0.2,0.01,-0.1+0i,0.4,-1+0.25i\n"
        );
    }
}
