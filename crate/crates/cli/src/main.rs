//! Command-line front end: pseudospectra maps, residual blow-up sweeps,
//! resolvent bound checks, shooting eigenvalues, rank-one decoupling and
//! twist sweeps, and WKB accuracy checks, each writing reproducible CSV
//! (and PGM) artifacts into the output directory.
//!
//! Every run re-serializes the resolved configuration to
//! `run_config.txt`; identical config and seed give byte-identical
//! outputs. The exit code is 0 iff all internal assertion checks passed;
//! otherwise each failed check is printed as a `FAIL <id>: <detail>`
//! line and the exit code is 1 (2 for hard errors).

mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use config::RunConfig;
use phispec_core::discretize::{assemble, Grid};
use phispec_core::green::{difference_kernel_sampled, rank_one_difference, shooting_eigenvalues};
use phispec_core::io::{
    fmt_complex, fmt_f64, write_blowup_csv, write_bound_csv, write_eigs_csv, write_map_csv,
    write_map_pgm, write_matrix_dump, write_rankone_csv, write_twist_csv, write_wkb_csv, BoundRow,
    RankOneRow, WkbRow,
};
use phispec_core::linalg::{pseudospectra_map, resolvent_norm};
use phispec_core::potential::phi_region;
use phispec_core::quasimode::{blowup_sweep, project};
use phispec_core::svd::singular_values;
use phispec_core::twist::twist_sweep;
use phispec_core::util::{loglog_slope, median};
use phispec_core::wkb::{asymptotic_constants, wkb_vs_rk4_max_rel_error};
use phispec_core::{Error, Result};

type C64 = Complex64;

#[derive(Parser)]
#[command(name = "phispec", version, about = "semiclassical pseudospectra toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration file (key = value lines, # comments).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output artifacts (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Recorded in the resolved config; runs are deterministic either way.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for map grids; the output bytes do not depend on it.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Also write the assembled operator matrix per h.
    #[arg(long, global = true)]
    dump_matrix: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Resolvent-norm map over a rectangle of spectral parameters.
    Map,
    /// Quasimode residual sweep with certified resolvent lower bounds.
    Blowup,
    /// Resolvent norms at fixed lambda vs the 1/dist reference.
    Bound,
    /// Shooting eigenvalues in a real window.
    Eigs,
    /// Rank-one decoupling difference across an interior cut.
    Rankone,
    /// Twisted-pair correction norms and resolvent differences.
    Twist,
    /// WKB solution accuracy against an ODE reference.
    Wkbcheck,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Map => "map",
            Command::Blowup => "blowup",
            Command::Bound => "bound",
            Command::Eigs => "eigs",
            Command::Rankone => "rankone",
            Command::Twist => "twist",
            Command::Wkbcheck => "wkbcheck",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(failures) if failures.is_empty() => {
            println!("OK {}", cli.command.name());
            ExitCode::SUCCESS
        }
        Ok(failures) => {
            for f in &failures {
                println!("FAIL {f}");
            }
            println!("{} check(s) failed", failures.len());
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("ERROR {e}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<Vec<String>> {
    let path = cli
        .config
        .as_deref()
        .ok_or_else(|| Error::Domain("--config FILE is required".into()))?;
    let mut cfg = RunConfig::from_file(path)?;
    if cli.threads == 0 {
        return Err(Error::Domain("--threads must be at least 1".into()));
    }
    std::fs::create_dir_all(&cli.out)?;
    cfg.set("subcommand", cli.command.name());
    cfg.set("seed", cli.seed.to_string());
    std::fs::write(cli.out.join("run_config.txt"), cfg.serialize())?;
    match cli.command {
        Command::Map => cmd_map(&cfg, cli),
        Command::Blowup => cmd_blowup(&cfg, cli),
        Command::Bound => cmd_bound(&cfg, cli),
        Command::Eigs => cmd_eigs(&cfg, cli),
        Command::Rankone => cmd_rankone(&cfg, cli),
        Command::Twist => cmd_twist(&cfg, cli),
        Command::Wkbcheck => cmd_wkbcheck(&cfg, cli),
    }
}

fn cmd_map(cfg: &RunConfig, cli: &Cli) -> Result<Vec<String>> {
    let v = cfg.potential()?;
    let (a, b) = v.interval();
    let n = cfg.usize_or("n", 120, (2, 2000))?;
    let hs = cfg.h_list()?;
    let re_range = cfg.pair("re_range")?;
    let im_range = cfg.pair("im_range")?;
    let n_re = cfg.usize_or("re_steps", 60, (2, 400))?;
    let n_im = cfg.usize_or("im_steps", 60, (2, 400))?;
    let grid = Grid::new(a, b, n)?;
    let mut areas: Vec<(f64, f64)> = Vec::new();
    for &h in &hs {
        let m = assemble(&v, &grid, h)?;
        let map = pseudospectra_map(&m, re_range, im_range, n_re, n_im, cli.threads)?;
        let tag = fmt_f64(h);
        write_map_csv(&cli.out.join(format!("map_h{tag}.csv")), &map)?;
        write_map_pgm(&cli.out.join(format!("map_h{tag}.pgm")), &map)?;
        if cli.dump_matrix {
            write_matrix_dump(
                &cli.out.join(format!("matrix_h{tag}.txt")),
                &m,
                h,
                grid.dx(),
                (a, b),
            )?;
        }
        let area = map.area_fraction_at_least(3.0);
        println!(
            "map h={tag} log10 range [{}, {}] area(log10>=3)={}",
            fmt_f64(map.min_finite()),
            fmt_f64(map.max_finite()),
            fmt_f64(area)
        );
        areas.push((h, area));
    }
    if areas.len() >= 2 {
        let (h0, a0) = areas[0];
        let (h1, a1) = areas[areas.len() - 1];
        println!(
            "map area(log10>=3) grows {} (h={}) -> {} (h={})",
            fmt_f64(a0),
            fmt_f64(h0),
            fmt_f64(a1),
            fmt_f64(h1)
        );
    }
    Ok(Vec::new())
}

fn cmd_blowup(cfg: &RunConfig, cli: &Cli) -> Result<Vec<String>> {
    let v = cfg.potential()?;
    let lambda = cfg.lambda()?;
    let p = cfg.f64_or("p", 0.5)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p must be in (0, 1), got {p}")));
    }
    let hs = cfg.h_list()?;
    let proj = project(&v, lambda, p)?;
    println!(
        "blowup lambda={} center={} gamma={}",
        fmt_complex(lambda),
        fmt_f64(proj.center),
        fmt_f64(proj.gamma)
    );
    let rows = blowup_sweep(&v, lambda, p, &hs)?;
    write_blowup_csv(&cli.out.join("blowup.csv"), &rows)?;
    let mut failures = Vec::new();
    if rows.len() >= 3 {
        let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.residual)).collect();
        println!(
            "blowup residual slope={} (prediction {})",
            fmt_f64(loglog_slope(&pairs)),
            fmt_f64(1.0 - p)
        );
    }
    for w in rows.windows(2) {
        if !(w[1].residual < w[0].residual) {
            failures.push(format!(
                "blowup.monotone: residual {} at h={} not below {} at h={}",
                fmt_f64(w[1].residual),
                fmt_f64(w[1].h),
                fmt_f64(w[0].residual),
                fmt_f64(w[0].h)
            ));
        }
    }
    for r in &rows {
        if r.residual > r.bound * 1.1 {
            failures.push(format!(
                "blowup.bound: measured {} above closed form {} at h={}",
                fmt_f64(r.residual),
                fmt_f64(r.bound),
                fmt_f64(r.h)
            ));
        }
    }
    Ok(failures)
}

fn cmd_bound(cfg: &RunConfig, cli: &Cli) -> Result<Vec<String>> {
    let v = cfg.potential()?;
    let lambda = cfg.lambda()?;
    let n = cfg.usize_or("n", 400, (2, 2000))?;
    let hs = cfg.h_list()?;
    let (a, b) = v.interval();
    let region = phi_region(&v);
    let dist = region.dist_to_phi(lambda);
    if dist <= 0.0 {
        return Err(Error::Domain(format!(
            "lambda {} lies in Phi(V); the bound has no content there",
            fmt_complex(lambda)
        )));
    }
    let reference = 1.0 / dist;
    let dist_conv = region.dist_to_conv_phi(lambda);
    let grid = Grid::new(a, b, n)?;
    let sr = v.sampling_radius(&grid.nodes());
    let mut rows = Vec::with_capacity(hs.len());
    let mut failures = Vec::new();
    for &h in &hs {
        let m = assemble(&v, &grid, h)?;
        let rn = resolvent_norm(&m, lambda);
        if cli.dump_matrix {
            write_matrix_dump(
                &cli.out.join(format!("matrix_h{}.txt", fmt_f64(h))),
                &m,
                h,
                grid.dx(),
                (a, b),
            )?;
        }
        // numerical-range bound with the Laplacian pad and the sampled
        // coverage slack subtracted; vacuous when the slack dominates
        let corrected = dist_conv - 4.0 * h * h / (grid.dx() * grid.dx()) - sr;
        if corrected > 0.0 && rn * corrected > 1.0 + 1e-9 {
            failures.push(format!(
                "bound.range: resolvent norm {} above 1/{} at h={}",
                fmt_f64(rn),
                fmt_f64(corrected),
                fmt_f64(h)
            ));
        }
        rows.push(BoundRow {
            h,
            resolvent_norm: rn,
            reference,
        });
    }
    write_bound_csv(&cli.out.join("bound.csv"), &rows)?;
    // rows are sorted coarse to fine; summarize the finest quartile
    let k = rows.len().div_ceil(4);
    let tail: Vec<f64> = rows[rows.len() - k..]
        .iter()
        .map(|r| r.resolvent_norm)
        .collect();
    let lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!(
        "bound reference={} smallest-quartile min={} median={} max={}",
        fmt_f64(reference),
        fmt_f64(lo),
        fmt_f64(median(&tail)),
        fmt_f64(hi)
    );
    Ok(failures)
}

fn cmd_eigs(cfg: &RunConfig, cli: &Cli) -> Result<Vec<String>> {
    let v = cfg.potential()?;
    let hs = cfg.h_list()?;
    let window = cfg.pair("window")?;
    let scan = cfg.usize_or("scan_points", 240, (8, 4096))?;
    let min_roots = cfg.usize_or("min_roots", 1, (0, 64))?;
    let mut failures = Vec::new();
    for &h in &hs {
        let roots = shooting_eigenvalues(&v, h, window, scan)?;
        let name = if hs.len() == 1 {
            "eigs.csv".to_string()
        } else {
            format!("eigs_h{}.csv", fmt_f64(h))
        };
        write_eigs_csv(&cli.out.join(name), &roots, h)?;
        println!("eigs h={} found {} root(s)", fmt_f64(h), roots.len());
        for r in &roots {
            println!(
                "  lambda={} abs_miss={}",
                fmt_complex(r.lambda),
                fmt_f64(r.abs_miss)
            );
        }
        if roots.len() < min_roots {
            failures.push(format!(
                "eigs.count: {} root(s) in [{}, {}] at h={}, expected at least {min_roots}",
                roots.len(),
                fmt_f64(window.0),
                fmt_f64(window.1),
                fmt_f64(h)
            ));
        }
    }
    Ok(failures)
}

fn cmd_rankone(cfg: &RunConfig, cli: &Cli) -> Result<Vec<String>> {
    let v = cfg.potential()?;
    let lambda = cfg.lambda()?;
    let cut = cfg.f64_key("cut")?;
    let hs = cfg.h_list()?;
    let per_side = cfg.usize_or("per_side", 24, (4, 200))?;
    let mut rows = Vec::with_capacity(hs.len());
    for &h in &hs {
        let k = rank_one_difference(&v, lambda, h, cut)?;
        rows.push(RankOneRow {
            h,
            kappa: k.kappa,
            norm: k.norm,
            op_norm: k.operator_norm(),
        });
    }
    write_rankone_csv(&cli.out.join("rankone.csv"), &rows)?;
    let mut failures = Vec::new();
    let d = difference_kernel_sampled(&v, lambda, hs[0], cut, per_side)?;
    let sv = singular_values(&d);
    let ratio = if sv.len() >= 2 && sv[0] > 0.0 {
        sv[1] / sv[0]
    } else {
        0.0
    };
    println!("rankone sigma2/sigma1={} at h={}", fmt_f64(ratio), fmt_f64(hs[0]));
    if ratio > 1e-8 {
        failures.push(format!(
            "rankone.rank: sampled difference kernel has sigma2/sigma1 = {}",
            fmt_f64(ratio)
        ));
    }
    if rows.len() >= 3 {
        let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, r.norm)).collect();
        let slope = loglog_slope(&pairs);
        println!("rankone norm slope={} (prediction 2)", fmt_f64(slope));
        if !(1.8..=2.2).contains(&slope) {
            failures.push(format!(
                "rankone.slope: |kappa| |phi|^2 decays at rate {}, expected within [1.8, 2.2]",
                fmt_f64(slope)
            ));
        }
    }
    Ok(failures)
}

fn cmd_twist(cfg: &RunConfig, cli: &Cli) -> Result<Vec<String>> {
    let v = cfg.potential()?;
    let lambda = cfg.lambda()?;
    let cut = cfg.f64_key("cut")?;
    let g_exp = cfg.f64_or("g_exp", 2.0 / 3.0)?;
    let n = cfg.usize_or("n", 400, (2, 2000))?;
    let hs = cfg.h_list()?;
    let (rows, warnings) = twist_sweep(&v, cut, g_exp, lambda, &hs, n)?;
    for w in &warnings {
        println!("twist warning: {w}");
    }
    write_twist_csv(&cli.out.join("twist.csv"), &rows)?;
    if rows.len() >= 3 {
        let slope =
            |f: fn(&phispec_core::twist::TwistRow) -> f64| -> f64 {
                let pairs: Vec<(f64, f64)> = rows.iter().map(|r| (r.h, f(r))).collect();
                loglog_slope(&pairs)
            };
        println!(
            "twist slopes P={} Q={} G={} res_diff={}",
            fmt_f64(slope(|r| r.norm_p)),
            fmt_f64(slope(|r| r.norm_q)),
            fmt_f64(slope(|r| r.norm_g)),
            fmt_f64(slope(|r| r.res_diff))
        );
    }
    let mut failures = Vec::new();
    for r in &rows {
        if r.res_diff > r.bound_rhs * (1.0 + 1e-6) {
            failures.push(format!(
                "twist.sandwich: resolvent difference {} above bound {} at h={}",
                fmt_f64(r.res_diff),
                fmt_f64(r.bound_rhs),
                fmt_f64(r.h)
            ));
        }
    }
    Ok(failures)
}

fn cmd_wkbcheck(cfg: &RunConfig, cli: &Cli) -> Result<Vec<String>> {
    let v = cfg.potential()?;
    let lambda = cfg.lambda()?;
    let hs = cfg.h_list()?;
    let (a, b) = v.interval();
    let n_nodes = cfg.usize_or("n_nodes", 64, (8, 4096))?;
    let cut = cfg.f64_or("cut", 0.5 * (a + b))?;
    if !(cut > a && cut < b) {
        return Err(Error::Domain(format!("cut {cut} outside ({a}, {b})")));
    }
    let mut rows = Vec::with_capacity(hs.len());
    for &h in &hs {
        let err = wkb_vs_rk4_max_rel_error(&v, lambda, h, n_nodes)?;
        let ac = asymptotic_constants(&v, lambda, cut, h)?;
        println!("wkbcheck h={} max_rel_err={}", fmt_f64(h), fmt_f64(err));
        rows.push(WkbRow {
            h,
            max_rel_err_y2: err,
            kappa: ac.kappa,
            phi_norm_sq: ac.phi_norm_sq,
            product: ac.kappa * ac.phi_norm_sq,
        });
    }
    write_wkb_csv(&cli.out.join("wkbcheck.csv"), &rows)?;
    let mut failures = Vec::new();
    for w in rows.windows(2) {
        // first-order accuracy: halving h should halve the error
        if (w[0].h / w[1].h - 2.0).abs() < 1e-9 && w[1].max_rel_err_y2 > 0.0 {
            let ratio = w[0].max_rel_err_y2 / w[1].max_rel_err_y2;
            if !(1.6..=2.4).contains(&ratio) {
                failures.push(format!(
                    "wkb.halving: error ratio {} between h={} and h={} outside [1.6, 2.4]",
                    fmt_f64(ratio),
                    fmt_f64(w[0].h),
                    fmt_f64(w[1].h)
                ));
            }
        }
    }
    Ok(failures)
}
