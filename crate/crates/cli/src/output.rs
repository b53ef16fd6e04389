//! Artifact writing. CSV files start with a `#` header line carrying the
//! experiment, config hash and seed; JSON files carry the same fields first.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::Experiment;
use crate::error::CliError;

#[derive(Serialize)]
struct Envelope<'a, T> {
    header: String,
    experiment: &'a str,
    config_hash: &'a str,
    seed: u64,
    config: &'a Value,
    passes: Option<bool>,
    calibration: Option<Value>,
    result: &'a T,
}

pub struct Artifacts {
    dir: PathBuf,
    experiment: &'static str,
    hash: String,
    seed: u64,
    config: Value,
    written: Vec<PathBuf>,
}

impl Artifacts {
    pub fn new(exp: &Experiment) -> Result<Self, CliError> {
        let dir = exp.common().out_dir();
        fs::create_dir_all(&dir).map_err(|e| CliError::Usage(format!("output directory {}: {e}", dir.display())))?;
        Ok(Artifacts {
            dir,
            experiment: exp.name(),
            hash: exp.hash(),
            seed: exp.common().seed,
            config: exp.canonical(),
            written: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn header_line(&self) -> String {
        format!("# thinshell experiment={} config_hash={} seed={}", self.experiment, self.hash, self.seed)
    }

    /// Writes `<name>.csv` with the header line, `columns`, then `rows`.
    pub fn csv(&mut self, name: &str, columns: &str, rows: &[String]) -> Result<(), CliError> {
        let path = self.dir.join(format!("{name}.csv"));
        let mut f = std::io::BufWriter::new(fs::File::create(&path)?);
        writeln!(f, "{}", self.header_line())?;
        writeln!(f, "{columns}")?;
        for row in rows {
            writeln!(f, "{row}")?;
        }
        f.flush()?;
        self.written.push(path);
        Ok(())
    }

    /// Writes `<name>.json` wrapping `result` with the run metadata.
    pub fn json<T: Serialize>(
        &mut self,
        name: &str,
        passes: Option<bool>,
        calibration: Option<Value>,
        result: &T,
    ) -> Result<(), CliError> {
        let path = self.dir.join(format!("{name}.json"));
        let doc = Envelope {
            header: self.header_line(),
            experiment: self.experiment,
            config_hash: &self.hash,
            seed: self.seed,
            config: &self.config,
            passes,
            calibration,
            result,
        };
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
