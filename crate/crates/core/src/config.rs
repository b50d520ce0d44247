//! Plain-text `key = value` configuration and the custom potential loader.
//!
//! Recognized keys: `mass` (kg), `beta`, `potential`
//! (`well | linear | harmonic | custom`), `a` (m), `L` (J/m),
//! `omega` (rad/s), `custom_file` (CSV `x,V` in SI, relative to the
//! configuration file). Missing values fall back to the reference well
//! parameters.

use crate::error::{Error, Result};
use crate::problem::{PhysicalSetup, PotentialSpec, ELECTRON_MASS};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const DEFAULT_BETA: f64 = 1e47;
pub const DEFAULT_HALF_WIDTH: f64 = 1e-10;
pub const DEFAULT_SLOPE: f64 = 1e-8;
pub const DEFAULT_OMEGA: f64 = 2e16;

const KEYS: [&str; 7] = ["mass", "beta", "potential", "a", "L", "omega", "custom_file"];

/// Parsed entries with the line each came from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigEntries {
    pub values: BTreeMap<String, (String, usize)>,
}

pub fn parse_entries(text: &str) -> Result<ConfigEntries> {
    let mut values = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Config {
            line: line_no,
            message: format!("expected `key = value`, got `{line}`"),
        })?;
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(Error::Config { line: line_no, message: format!("unknown key `{k}`") });
        }
        if v.is_empty() {
            return Err(Error::Config { line: line_no, message: format!("empty value for `{k}`") });
        }
        if values.insert(k.to_string(), (v.to_string(), line_no)).is_some() {
            return Err(Error::Config { line: line_no, message: format!("duplicate key `{k}`") });
        }
    }
    Ok(ConfigEntries { values })
}

impl ConfigEntries {
    fn number(&self, key: &str) -> Result<Option<f64>> {
        match self.values.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::Config { line: *line, message: format!("`{key}` is not a number: `{v}`") }),
        }
    }

    /// Entry `potential`, if present.
    pub fn potential_name(&self) -> Option<&str> {
        self.values.get("potential").map(|(v, _)| v.as_str())
    }

    /// Build the setup. `potential_override` replaces the `potential` key;
    /// relative custom files resolve against `base_dir`.
    pub fn setup(&self, potential_override: Option<&str>, base_dir: &Path) -> Result<PhysicalSetup> {
        let mass = self.number("mass")?.unwrap_or(ELECTRON_MASS);
        let beta = self.number("beta")?.unwrap_or(DEFAULT_BETA);
        let line_of = |k: &str| self.values.get(k).map(|(_, l)| *l).unwrap_or(0);
        let name = potential_override.or(self.potential_name()).unwrap_or("well");
        let spec = match name {
            "well" => PotentialSpec::InfiniteWell { half_width: self.number("a")?.unwrap_or(DEFAULT_HALF_WIDTH) },
            "linear" => PotentialSpec::Linear { slope: self.number("L")?.unwrap_or(DEFAULT_SLOPE) },
            "harmonic" => PotentialSpec::Harmonic { omega: self.number("omega")?.unwrap_or(DEFAULT_OMEGA) },
            "custom" => {
                let (file, line) = self.values.get("custom_file").ok_or_else(|| Error::Config {
                    line: line_of("potential"),
                    message: "custom potential needs `custom_file`".into(),
                })?;
                let mut path = PathBuf::from(file);
                if path.is_relative() {
                    path = base_dir.join(path);
                }
                let samples = load_custom_potential(&path).map_err(|e| match e {
                    Error::Io(m) => Error::Config { line: *line, message: m },
                    other => other,
                })?;
                PotentialSpec::TabulatedCustom { samples }
            }
            other => {
                return Err(Error::Config {
                    line: line_of("potential"),
                    message: format!("unknown potential `{other}` (well, linear, harmonic, custom)"),
                })
            }
        };
        PhysicalSetup::new(mass, beta, spec)
    }
}

/// Read `x,V` samples (SI). A non-numeric first row is taken as a header.
pub fn load_custom_potential(path: &Path) -> Result<Vec<(f64, f64)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut samples = vec![];
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        if rec.len() != 2 {
            return Err(Error::InvalidSetup(format!("row {}: expected 2 columns, got {}", i + 1, rec.len())));
        }
        match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
            (Ok(x), Ok(v)) => samples.push((x, v)),
            _ if i == 0 => continue,
            _ => return Err(Error::InvalidSetup(format!("row {}: non-numeric sample", i + 1))),
        }
    }
    Ok(samples)
}

/// Text form of a setup that `parse_entries` reads back to the same setup
/// (custom potentials refer to `custom_file`).
pub fn render(setup: &PhysicalSetup, custom_file: Option<&str>) -> String {
    let mut s = format!("mass = {:e}\nbeta = {:e}\n", setup.mass(), setup.beta());
    match setup.potential() {
        PotentialSpec::InfiniteWell { half_width } => s += &format!("potential = well\na = {half_width:e}\n"),
        PotentialSpec::Linear { slope } => s += &format!("potential = linear\nL = {slope:e}\n"),
        PotentialSpec::Harmonic { omega } => s += &format!("potential = harmonic\nomega = {omega:e}\n"),
        PotentialSpec::TabulatedCustom { .. } => {
            s += "potential = custom\n";
            if let Some(f) = custom_file {
                s += &format!("custom_file = {f}\n");
            }
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys_and_comments() {
        let text = "# reference\nmass = 9.10956e-31\nbeta=1e47  # bare number\n\npotential = harmonic\nomega = 1e30\n";
        let e = parse_entries(text).unwrap();
        let s = e.setup(None, Path::new(".")).unwrap();
        assert_eq!(s.potential(), &PotentialSpec::Harmonic { omega: 1e30 });
        assert_eq!(s.beta(), 1e47);
        let back = parse_entries(&render(&s, None)).unwrap().setup(None, Path::new(".")).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn reports_offending_line() {
        for (text, line) in [("mass = 1\nfoo = 2\n", 2), ("beta = x\n", 1), ("a\n", 1), ("a = 1\na = 2\n", 2)] {
            match parse_entries(text).and_then(|e| e.setup(None, Path::new("."))) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
        let e = parse_entries("potential = cubic\n").unwrap();
        assert!(matches!(e.setup(None, Path::new(".")), Err(Error::Config { line: 1, .. })));
        let neg = parse_entries("a = -1\n").unwrap();
        assert!(matches!(neg.setup(None, Path::new(".")), Err(Error::InvalidSetup(_))));
    }
}
