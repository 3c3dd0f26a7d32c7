//! Named potentials used throughout the test suites and the CLI.
//!
//! The split-linear family ("example-t5:delta=D") jumps by 2 i D at the
//! origin: V(x) = i (x + D) right of zero and i (x - D) left of it. Any
//! positive real lambda then lies in the convex hull of Phi(V) but not
//! in Phi(V) itself, which is what makes it the stress case for the
//! distance bounds.

use crate::error::{Error, Result};
use crate::potential::Potential;

/// Interval of the flat catalog entry.
pub const ZERO_INTERVAL: (f64, f64) = (0.0, std::f64::consts::PI);

/// Resolve a catalog name: "zero", "linear-i", "example-t5:delta=D".
pub fn catalog(name: &str) -> Result<Potential> {
    if name == "zero" {
        return Potential::new("0", ZERO_INTERVAL);
    }
    if name == "linear-i" {
        return Potential::new("i*x", (-1.0, 1.0));
    }
    if let Some(rest) = name.strip_prefix("example-t5:delta=") {
        let delta: f64 = rest.parse().map_err(|_| {
            Error::Parse {
                pos: name.len() - rest.len(),
                msg: format!("bad delta value {rest:?}"),
            }
        })?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::Domain(format!(
                "delta must be positive and finite, got {delta}"
            )));
        }
        let left = format!("i*(x-{delta})");
        let right = format!("i*(x+{delta})");
        return Potential::from_pieces(&[&left, &right], (-1.0, 1.0), &[0.0]);
    }
    Err(Error::Domain(format!(
        "unknown catalog name {name:?}; expected \"zero\", \"linear-i\" or \"example-t5:delta=D\""
    )))
}

/// All catalog entries exercised by the property suites.
pub fn standard_triple() -> Vec<Potential> {
    vec![
        catalog("zero").unwrap(),
        catalog("linear-i").unwrap(),
        catalog("example-t5:delta=0.5").unwrap(),
    ]
}
