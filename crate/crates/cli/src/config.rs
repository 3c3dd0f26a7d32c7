//! Plain-text run configuration: one `key = value` per line, `#` starts
//! a comment, keys are free-form lowercase identifiers. The store keeps
//! raw strings so a parsed config serializes back byte for byte (keys
//! sorted); typed accessors parse and range-check on demand.

use std::collections::BTreeMap;
use std::path::Path;

use num_complex::Complex64;
use phispec_core::catalog::catalog;
use phispec_core::{Error, Potential, Result};

type C64 = Complex64;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(k) => &raw[..k],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some(eq) = line.find('=') else {
                return Err(Error::Parse {
                    pos: lineno + 1,
                    msg: format!("expected key = value, got {line:?}"),
                });
            };
            let key = line[..eq].trim();
            let value = line[eq + 1..].trim();
            if key.is_empty() {
                return Err(Error::Parse {
                    pos: lineno + 1,
                    msg: "empty key".into(),
                });
            }
            entries.insert(key.to_string(), value.to_string());
        }
        Ok(RunConfig { entries })
    }

    pub fn from_file(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Sorted `key = value` lines; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) {
        self.entries.insert(key.to_string(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Domain(format!("config key {key:?} is required")))
    }

    fn parse_f64(key: &str, s: &str) -> Result<f64> {
        let x: f64 = s
            .trim()
            .parse()
            .map_err(|_| Error::Domain(format!("config key {key:?}: bad number {s:?}")))?;
        if !x.is_finite() {
            return Err(Error::Domain(format!("config key {key:?} must be finite")));
        }
        Ok(x)
    }

    pub fn f64_key(&self, key: &str) -> Result<f64> {
        Self::parse_f64(key, self.require(key)?)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        match self.get(key) {
            Some(s) => Self::parse_f64(key, s),
            None => Ok(default),
        }
    }

    /// Unsigned integer with an inclusive validity range.
    pub fn usize_or(&self, key: &str, default: usize, range: (usize, usize)) -> Result<usize> {
        let n = match self.get(key) {
            Some(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Domain(format!("config key {key:?}: bad integer {s:?}")))?,
            None => default,
        };
        if n < range.0 || n > range.1 {
            return Err(Error::Domain(format!(
                "config key {key:?} = {n} outside [{}, {}]",
                range.0, range.1
            )));
        }
        Ok(n)
    }

    /// Comma-separated list of positive numbers, deduplicated and sorted
    /// descending (sweeps run from coarse to fine).
    pub fn h_list(&self) -> Result<Vec<f64>> {
        let mut hs = Vec::new();
        for part in self.require("h")?.split(',') {
            let h = Self::parse_f64("h", part)?;
            if h <= 0.0 {
                return Err(Error::Domain(format!("config key \"h\": {h} is not positive")));
            }
            hs.push(h);
        }
        hs.sort_by(|a, b| b.partial_cmp(a).unwrap());
        hs.dedup();
        Ok(hs)
    }

    /// `lo,hi` pair with lo < hi.
    pub fn pair(&self, key: &str) -> Result<(f64, f64)> {
        let s = self.require(key)?;
        let parts: Vec<&str> = s.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::Domain(format!(
                "config key {key:?} must be lo,hi, got {s:?}"
            )));
        }
        let lo = Self::parse_f64(key, parts[0])?;
        let hi = Self::parse_f64(key, parts[1])?;
        if lo >= hi {
            return Err(Error::Domain(format!(
                "config key {key:?}: need lo < hi, got {lo} >= {hi}"
            )));
        }
        Ok((lo, hi))
    }

    /// Complex spectral parameter: `re,im`, or just `re` for real lambda.
    pub fn lambda(&self) -> Result<C64> {
        let s = self.require("lambda")?;
        let parts: Vec<&str> = s.split(',').collect();
        match parts.len() {
            1 => Ok(C64::new(Self::parse_f64("lambda", parts[0])?, 0.0)),
            2 => Ok(C64::new(
                Self::parse_f64("lambda", parts[0])?,
                Self::parse_f64("lambda", parts[1])?,
            )),
            _ => Err(Error::Domain(format!("config key \"lambda\": got {s:?}"))),
        }
    }

    /// Potential from either the `potential` catalog name or an explicit
    /// `expr` (pieces separated by `|`) with `interval` and, for more
    /// than one piece, `partition`.
    pub fn potential(&self) -> Result<Potential> {
        if let Some(name) = self.get("potential") {
            if self.get("expr").is_some() {
                return Err(Error::Domain(
                    "give either \"potential\" or \"expr\", not both".into(),
                ));
            }
            return catalog(name);
        }
        let expr = self.require("expr")?;
        let interval = self.pair("interval")?;
        let pieces: Vec<&str> = expr.split('|').map(str::trim).collect();
        let mut partition = Vec::new();
        if let Some(s) = self.get("partition") {
            for part in s.split(',') {
                partition.push(Self::parse_f64("partition", part)?);
            }
        }
        if pieces.len() != partition.len() + 1 {
            return Err(Error::Domain(format!(
                "{} expression pieces need {} partition points, got {}",
                pieces.len(),
                pieces.len() - 1,
                partition.len()
            )));
        }
        Potential::from_pieces(&pieces, interval, &partition)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_byte_for_byte() {
        let text = "# sweep setup\nh = 0.2,0.1,0.05\nlambda = 1,0\npotential = linear-i\n";
        let cfg = RunConfig::parse(text).unwrap();
        let ser = cfg.serialize();
        assert_eq!(ser, "h = 0.2,0.1,0.05\nlambda = 1,0\npotential = linear-i\n");
        assert_eq!(RunConfig::parse(&ser).unwrap(), cfg);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let cfg = RunConfig::parse("\n# only a comment\nn = 40 # trailing\n\n").unwrap();
        assert_eq!(cfg.get("n"), Some("40"));
        assert_eq!(cfg.serialize(), "n = 40\n");
    }

    #[test]
    fn bad_lines_are_rejected_with_position() {
        match RunConfig::parse("h = 0.1\nnot a pair\n") {
            Err(Error::Parse { pos, .. }) => assert_eq!(pos, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(RunConfig::parse("= 3\n").is_err());
    }

    #[test]
    fn typed_accessors_range_check() {
        let cfg = RunConfig::parse("h = 0.2,0.1,0.2\nlambda = 1\nn = 1000\nwindow = 3,15\n")
            .unwrap();
        assert_eq!(cfg.h_list().unwrap(), vec![0.2, 0.1]);
        assert_eq!(cfg.lambda().unwrap(), C64::new(1.0, 0.0));
        assert_eq!(cfg.pair("window").unwrap(), (3.0, 15.0));
        assert!(cfg.usize_or("n", 100, (2, 400)).is_err());
        assert!(cfg.f64_key("missing").is_err());
        let bad = RunConfig::parse("h = 0.1,-0.2\n").unwrap();
        assert!(bad.h_list().is_err());
    }

    #[test]
    fn potential_sources() {
        let by_name = RunConfig::parse("potential = linear-i\n").unwrap();
        assert_eq!(by_name.potential().unwrap().interval(), (-1.0, 1.0));
        let explicit =
            RunConfig::parse("expr = i*(x-0.5) | i*(x+0.5)\ninterval = -1,1\npartition = 0\n")
                .unwrap();
        let v = explicit.potential().unwrap();
        assert_eq!(v.partition(), &[0.0]);
        let mismatched = RunConfig::parse("expr = x | x | x\ninterval = 0,1\npartition = 0.5\n")
            .unwrap();
        assert!(mismatched.potential().is_err());
        let both = RunConfig::parse("potential = zero\nexpr = x\ninterval = 0,1\n").unwrap();
        assert!(both.potential().is_err());
    }
}
