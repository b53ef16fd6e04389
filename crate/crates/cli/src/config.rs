//! Experiment configurations. Every subcommand's arguments double as its
//! JSON config, so `--print-config` output can be fed back through `run`.

use std::path::PathBuf;

use clap::{Args, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "THINSHELL_OUT_DIR";
const DEFAULT_OUT_DIR: &str = "thinshell-out";

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct Common {
    /// Base seed of every random stream.
    #[arg(long, default_value_t = 2024)]
    pub seed: u64,
    /// Output directory [default: $THINSHELL_OUT_DIR or ./thinshell-out].
    #[arg(long)]
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
}

impl Common {
    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }
}

/// Location of the calibration file required by the check subcommands.
#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct CalibPath {
    /// Calibration file written by `calibrate` [default: <out-dir>/calibration.json].
    #[arg(long)]
    #[serde(default)]
    pub calib: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct MomentsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Dimension.
    #[arg(long)]
    pub n: usize,
    /// Tail parameter of f_(n,r).
    #[arg(long)]
    pub r: f64,
    /// Moment orders, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub p: Vec<f64>,
    /// Monte Carlo sample size.
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
    /// Largest accepted |MC − exact| in standard errors.
    #[arg(long, default_value_t = 3.0)]
    pub z_max: f64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct FactArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub r: f64,
    #[arg(long)]
    pub p: f64,
    /// Dimensions, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    pub n_grid: Vec<usize>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ThinShellArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub r: f64,
    /// Sample size.
    #[arg(long = "N", visible_alias = "samples", default_value_t = 1_000_000)]
    pub samples: usize,
    /// Rows of the survival curve CSV.
    #[arg(long, default_value_t = 1000)]
    pub survival_rows: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct BodiesArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub calib: CalibPath,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub r: f64,
    /// Condition number of the stretch diag(cond, 1, …, 1) applied to f_(n,r).
    #[arg(long, default_value_t = 1.0)]
    pub cond: f64,
    /// Smaller K_a parameter.
    #[arg(long)]
    pub a: f64,
    /// Larger K_a parameter.
    #[arg(long)]
    pub b: f64,
    #[arg(long, default_value_t = 64)]
    pub directions: usize,
    /// Random boundary combinations in the convexity test.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    #[arg(long, default_value_t = 1e-8)]
    pub tol: f64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ConcavityArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub calib: CalibPath,
    /// Exponents α, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "3,10,50")]
    pub alpha: Vec<f64>,
    /// Random convex profiles per exponent.
    #[arg(long, default_value_t = 20)]
    pub profiles: usize,
    #[arg(long, default_value_t = 6)]
    pub max_pieces: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct KhinchineArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub calib: CalibPath,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub r: f64,
    #[arg(long, default_value_t = 1.0)]
    pub cond: f64,
    #[arg(long)]
    pub p: f64,
    #[arg(long)]
    pub q: f64,
    #[arg(long, default_value_t = 16)]
    pub directions: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct PolarMomentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub calib: CalibPath,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub r: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub cond: f64,
    /// Haar rotations for non-invariant models.
    #[arg(long, default_value_t = 2000)]
    pub rotations: usize,
    /// Monte Carlo sample size for non-invariant models.
    #[arg(long, default_value_t = 200_000)]
    pub samples: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReverseHolderArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub calib: CalibPath,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 20.0)]
    pub r: f64,
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub p: Vec<f64>,
    #[arg(long, default_value_t = 2.0)]
    pub cond: f64,
    #[arg(long, default_value_t = 1000)]
    pub rotations: usize,
    /// Haar rotations in the slope estimate.
    #[arg(long, default_value_t = 500)]
    pub pairs: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct LoglipArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub calib: CalibPath,
    #[arg(long, value_delimiter = ',', required = true)]
    pub n: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub p: Vec<f64>,
    #[arg(long, value_delimiter = ',', required = true)]
    pub cond: Vec<f64>,
    #[arg(long, default_value_t = 20.0)]
    pub r: f64,
    #[arg(long, default_value_t = 500)]
    pub pairs: usize,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct CalibrateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    /// Destination [default: <out-dir>/calibration.json]; never overwritten.
    #[arg(long)]
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Args, Clone, Debug, Serialize, Deserialize)]
pub struct ReportArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

/// One experiment with all of its parameters.
#[derive(Subcommand, Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Experiment {
    /// Exact and Monte Carlo moments of f_(n,r).
    Moments(MomentsArgs),
    /// Moment defect α_p against n and its limit.
    Fact(FactArgs),
    /// Empirical thin-shell width of f_(n,r).
    #[command(name = "thinshell")]
    #[serde(rename = "thinshell")]
    ThinShell(ThinShellArgs),
    /// K_a inclusion, convexity and distance comparison.
    BodiesCheck(BodiesArgs),
    /// Log-concavity of the H transform for random convex profiles.
    ConcavityCheck(ConcavityArgs),
    /// Reverse Hölder inequality for ⟨x,θ⟩₊.
    Khinchine(KhinchineArgs),
    /// Polar moment identity over SO(n).
    PolarMoment(PolarMomentArgs),
    /// Reverse Hölder inequality for h_(k,p) under Haar measure.
    ReverseHolder(ReverseHolderArgs),
    /// Log-Lipschitz slope envelope of h_(k,p).
    Loglip(LoglipArgs),
    /// Run the fixed calibration sweeps and write the constants file.
    Calibrate(CalibrateArgs),
    /// Summarise the JSON artifacts in the output directory.
    Report(ReportArgs),
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Moments(_) => "moments",
            Experiment::Fact(_) => "fact",
            Experiment::ThinShell(_) => "thinshell",
            Experiment::BodiesCheck(_) => "bodies-check",
            Experiment::ConcavityCheck(_) => "concavity-check",
            Experiment::Khinchine(_) => "khinchine",
            Experiment::PolarMoment(_) => "polar-moment",
            Experiment::ReverseHolder(_) => "reverse-holder",
            Experiment::Loglip(_) => "loglip",
            Experiment::Calibrate(_) => "calibrate",
            Experiment::Report(_) => "report",
        }
    }

    pub fn common(&self) -> &Common {
        match self {
            Experiment::Moments(a) => &a.common,
            Experiment::Fact(a) => &a.common,
            Experiment::ThinShell(a) => &a.common,
            Experiment::BodiesCheck(a) => &a.common,
            Experiment::ConcavityCheck(a) => &a.common,
            Experiment::Khinchine(a) => &a.common,
            Experiment::PolarMoment(a) => &a.common,
            Experiment::ReverseHolder(a) => &a.common,
            Experiment::Loglip(a) => &a.common,
            Experiment::Calibrate(a) => &a.common,
            Experiment::Report(a) => &a.common,
        }
    }

    /// Parses a JSON config; errors name the offending field.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))
    }

    /// The config as JSON without the path fields, which do not affect results.
    pub fn canonical(&self) -> Value {
        let mut v = serde_json::to_value(self).expect("configs serialize");
        if let Value::Object(map) = &mut v {
            for key in ["out_dir", "calib", "output"] {
                map.remove(key);
            }
        }
        v
    }

    /// First 16 hex digits of SHA-256 over the canonical JSON (keys sorted).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().to_string().as_bytes());
        hex::encode(&digest[..8])
    }
}

fn field(name: &str, ok: bool, what: &str) -> Result<(), CliError> {
    if ok {
        Ok(())
    } else {
        Err(CliError::Usage(format!("field `{name}`: {what}")))
    }
}

fn check_r(r: f64) -> Result<(), CliError> {
    field("r", r.is_finite() && r > 0.0, "must be positive and finite")
}

fn check_n(n: usize) -> Result<(), CliError> {
    field("n", n >= 1, "must be at least 1")
}

fn check_cond(cond: f64) -> Result<(), CliError> {
    field("cond", cond.is_finite() && cond >= 1.0, "must be at least 1")
}

impl Experiment {
    /// Structural checks; parameter ranges tied to the model are left to the library.
    pub fn validate(&self) -> Result<(), CliError> {
        match self {
            Experiment::Moments(a) => {
                check_n(a.n)?;
                check_r(a.r)?;
                field("p", !a.p.is_empty(), "needs at least one order")?;
                field("samples", a.samples >= 2, "must be at least 2")?;
                field("z_max", a.z_max > 0.0, "must be positive")
            }
            Experiment::Fact(a) => {
                check_r(a.r)?;
                field("n_grid", a.n_grid.len() >= 2 && a.n_grid.windows(2).all(|w| w[0] < w[1]), "needs at least two increasing dimensions")
            }
            Experiment::ThinShell(a) => {
                check_n(a.n)?;
                field("r", a.r > 2.0, "must exceed 2 for isotropy")?;
                field("samples", a.samples >= 1, "must be at least 1")
            }
            Experiment::BodiesCheck(a) => {
                check_n(a.n)?;
                check_r(a.r)?;
                check_cond(a.cond)?;
                field("a", a.a > 0.0, "must be positive")?;
                field("b", a.b >= a.a, "must be at least a")?;
                field("directions", a.directions >= 2, "must be at least 2")
            }
            Experiment::ConcavityCheck(a) => {
                field("alpha", !a.alpha.is_empty() && a.alpha.iter().all(|&x| x > 0.0), "needs positive exponents")?;
                field("max_pieces", a.max_pieces >= 1, "must be at least 1")
            }
            Experiment::Khinchine(a) => {
                check_n(a.n)?;
                check_r(a.r)?;
                check_cond(a.cond)?;
                field("directions", a.directions >= 1, "must be at least 1")
            }
            Experiment::PolarMoment(a) => {
                check_n(a.n)?;
                check_r(a.r)?;
                check_cond(a.cond)?;
                field("k", a.k.iter().all(|&k| (1..=a.n).contains(&k)), "each k must lie in 1..=n")
            }
            Experiment::ReverseHolder(a) => {
                check_n(a.n)?;
                check_r(a.r)?;
                check_cond(a.cond)?;
                field("k", a.k.iter().all(|&k| (1..=a.n).contains(&k)), "each k must lie in 1..=n")?;
                field("rotations", a.rotations >= 2, "must be at least 2")
            }
            Experiment::Loglip(a) => {
                check_r(a.r)?;
                field("n", a.n.iter().all(|&n| n >= 2), "each n must be at least 2")?;
                field("cond", a.cond.iter().all(|&c| c.is_finite() && c >= 1.0), "each cond must be at least 1")?;
                field("pairs", a.pairs >= 1, "must be at least 1")
            }
            Experiment::Calibrate(_) | Experiment::Report(_) => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fact() -> Experiment {
        Experiment::Fact(FactArgs {
            common: Common { seed: 7, out_dir: Some("/tmp/a".into()) },
            r: 5.0,
            p: 3.0,
            n_grid: vec![100, 1000],
        })
    }

    #[test]
    fn json_round_trip_keeps_hash() {
        let e = fact();
        let back = Experiment::from_json(&serde_json::to_string(&e).unwrap()).unwrap();
        assert_eq!(back.hash(), e.hash());
        assert_eq!(back.name(), "fact");
    }

    #[test]
    fn output_directory_does_not_change_hash() {
        let mut other = fact();
        if let Experiment::Fact(a) = &mut other {
            a.common.out_dir = None;
        }
        assert_eq!(other.hash(), fact().hash());
        if let Experiment::Fact(a) = &mut other {
            a.common.seed = 8;
        }
        assert_ne!(other.hash(), fact().hash());
    }

    #[test]
    fn missing_field_is_named() {
        let err = Experiment::from_json(r#"{"experiment":"fact","seed":1,"p":3,"n_grid":[1,2]}"#).unwrap_err();
        assert!(err.to_string().contains("`r`"), "{err}");
    }
}
