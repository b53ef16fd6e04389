//! Store for empirically calibrated universal constants.
//!
//! Each entry records the value, the id of the run that produced it and a
//! description of the grid it was fitted on. Entries are write-once: a second
//! insert under the same name is an error, and files are never overwritten.

use std::collections::BTreeMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower constant `c` in `c·x/(x+y) ≤ (x B(x,y))^{1/x}`.
pub const BETA1_LO: &str = "beta1_lo";
/// Upper constant `C` in `(x B(x,y))^{1/x} ≤ C·x/(x+y)`.
pub const BETA1_HI: &str = "beta1_hi";
/// Smallest `C` making the thin-shell moment bound hold on the calibration grid.
pub const THEOREM_C: &str = "theorem_C";
/// The same fit on the disjoint validation grid.
pub const THEOREM_C_VALIDATION: &str = "theorem_C_validation";
/// Range constant `c` in `p ≤ c·min(r, n^{1/3})`.
pub const THEOREM_RANGE_C: &str = "theorem_range_c";
/// `Ĉ` in `L̂ ≤ Ĉ max(k,p)² ‖A‖‖A⁻¹‖`.
pub const LOGLIP_C: &str = "loglip_C";
pub const LOGLIP_C_VALIDATION: &str = "loglip_C_validation";
/// `ĉ` in `E h² / (E h)² ≤ exp(ĉ L̂² / n)`.
pub const REVERSE_HOLDER_C: &str = "reverse_holder_c";
/// `c` in `d(K_{m+p}(g), B) ≤ c·d(Z⁺_{max(m,p)}(g), B)`.
pub const KA_DISTANCE_C: &str = "ka_distance_c";
/// `c′` in `ρ_q ≤ c′ q` for isotropic models.
pub const RHOQ_C: &str = "rhoq_c";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibEntry {
    pub name: String,
    pub value: f64,
    pub run_id: String,
    pub grid: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CalibConstants {
    entries: BTreeMap<String, CalibEntry>,
}

impl CalibConstants {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entry: CalibEntry) -> Result<()> {
        if self.entries.contains_key(&entry.name) {
            return Err(Error::Calibration(format!("entry {:?} already written", entry.name)));
        }
        self.entries.insert(entry.name.clone(), entry);
        Ok(())
    }

    pub fn record(&mut self, name: &str, value: f64, run_id: &str, grid: &str) -> Result<()> {
        self.insert(CalibEntry {
            name: name.to_owned(),
            value,
            run_id: run_id.to_owned(),
            grid: grid.to_owned(),
        })
    }

    pub fn get(&self, name: &str) -> Result<&CalibEntry> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::Calibration(format!("missing entry {name:?}")))
    }

    pub fn value(&self, name: &str) -> Result<f64> {
        self.get(name).map(|e| e.value)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CalibEntry> {
        self.entries.values()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Write to a new file; fails if `path` already exists.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut file = OpenOptions::new().write(true).create_new(true).open(path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                Error::Calibration(format!("{} exists; calibration files are write-once", path.display()))
            } else {
                Error::Io(e)
            }
        })?;
        file.write_all(serde_json::to_string_pretty(self)?.as_bytes())?;
        file.write_all(b"\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entries_are_write_once() {
        let mut c = CalibConstants::new();
        c.record(BETA1_LO, 0.36, "run-a", "x,y in [1,1e3]").unwrap();
        assert!(matches!(c.record(BETA1_LO, 0.4, "run-b", ""), Err(Error::Calibration(_))));
        assert_eq!(c.value(BETA1_LO).unwrap(), 0.36);
        assert!(c.value(LOGLIP_C).is_err());
    }

    #[test]
    fn files_round_trip_and_are_not_overwritten() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("calib.json");
        let mut c = CalibConstants::new();
        c.record(THEOREM_C, 0.1987654321, "r1", "grid A").unwrap();
        c.save(&path).unwrap();
        assert_eq!(CalibConstants::load(&path).unwrap(), c);
        assert!(matches!(c.save(&path), Err(Error::Calibration(_))));
    }
}
