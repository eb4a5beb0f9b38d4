// SPDX-License-Identifier: MIT OR Apache-2.0

//! Run configuration: defaults, an optional JSON file, then flags.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use varseg::pipeline::{DEFAULT_LAMBDA_C, DEFAULT_OMEGA_V, DEFAULT_SELECTION_WINDOW};
use varseg::stage1::{DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use varseg::stage2::{Strategy, DEFAULT_EXHAUSTIVE_CAP};

pub const DEFAULT_OUT: &str = "varseg-out";
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REPLICATES: usize = 20;

/// Fully resolved settings for one command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Input CSV (`detect`) or plot bundle JSON (`plot`).
    pub input: Option<PathBuf>,
    /// Output directory; created when missing.
    pub out: PathBuf,
    /// Lag order.
    pub d: usize,
    /// Constant `C` of the first-stage penalty.
    pub lambda_c: f64,
    /// Second-stage penalty `eta_n`; `gamma_n` when unset.
    pub eta: Option<f64>,
    /// Exponent `v` of the break penalty `omega_n`.
    pub omega_v: f64,
    /// Break penalty `omega_n` itself, overriding `omega_v`.
    pub omega: Option<f64>,
    pub strategy: Strategy,
    pub exhaustive_cap: usize,
    /// Candidate threshold on `|theta_i|_inf`; the solver tolerance scale
    /// when unset.
    pub zero_tol: Option<f64>,
    pub max_sweeps: usize,
    pub tol: f64,
    pub seed: u64,
    pub replicates: usize,
    pub scenario: u8,
    /// Selection window half-width as a fraction of `T`.
    pub window: f64,
    pub difference: bool,
    pub downsample: Option<usize>,
    pub center: bool,
    /// Worker threads for `evaluate`; all cores when unset.
    pub jobs: Option<usize>,
    /// Treat first-stage non-convergence as an error.
    pub strict: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            out: PathBuf::from(DEFAULT_OUT),
            d: 1,
            lambda_c: DEFAULT_LAMBDA_C,
            eta: None,
            omega_v: DEFAULT_OMEGA_V,
            omega: None,
            strategy: Strategy::Backward,
            exhaustive_cap: DEFAULT_EXHAUSTIVE_CAP,
            zero_tol: None,
            max_sweeps: DEFAULT_MAX_SWEEPS,
            tol: DEFAULT_TOL,
            seed: DEFAULT_SEED,
            replicates: DEFAULT_REPLICATES,
            scenario: 1,
            window: DEFAULT_SELECTION_WINDOW,
            difference: false,
            downsample: None,
            center: false,
            jobs: None,
            strict: false,
        }
    }
}

/// A partial configuration: every field is optional. Used for both the
/// config file and the command-line flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub input: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub d: Option<usize>,
    pub lambda_c: Option<f64>,
    pub eta: Option<f64>,
    pub omega_v: Option<f64>,
    pub omega: Option<f64>,
    pub strategy: Option<Strategy>,
    pub exhaustive_cap: Option<usize>,
    pub zero_tol: Option<f64>,
    pub max_sweeps: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub scenario: Option<u8>,
    pub window: Option<f64>,
    pub difference: Option<bool>,
    pub downsample: Option<usize>,
    pub center: Option<bool>,
    pub jobs: Option<usize>,
    pub strict: Option<bool>,
}

impl ConfigLayer {
    pub fn from_json(text: &str) -> Result<Self, String> {
        serde_json::from_str(text).map_err(|e| format!("invalid config: {e}"))
    }

    pub fn from_file(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        Self::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Writes every field set here onto `cfg`.
    pub fn apply(&self, cfg: &mut RunConfig) {
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = &self.$f {
                    cfg.$f = v.clone();
                }
            )*};
        }
        macro_rules! set_opt {
            ($($f:ident),*) => {$(
                if self.$f.is_some() {
                    cfg.$f = self.$f.clone();
                }
            )*};
        }
        set!(
            out,
            d,
            lambda_c,
            omega_v,
            strategy,
            exhaustive_cap,
            max_sweeps,
            tol,
            seed,
            replicates,
            scenario,
            window,
            difference,
            center,
            strict
        );
        set_opt!(input, eta, omega, zero_tol, downsample, jobs);
    }
}

impl RunConfig {
    /// Defaults, overlaid by `file`, overlaid by `flags`.
    pub fn resolve(file: Option<&ConfigLayer>, flags: &ConfigLayer) -> Result<Self, String> {
        let mut cfg = Self::default();
        if let Some(file) = file {
            file.apply(&mut cfg);
        }
        flags.apply(&mut cfg);
        cfg.check()?;
        Ok(cfg)
    }

    pub fn check(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        if self.d == 0 {
            return Err("d must be at least 1".into());
        }
        positive("lambda_c", self.lambda_c)?;
        positive("tol", self.tol)?;
        positive("window", self.window)?;
        positive("omega_v", self.omega_v)?;
        for (name, v) in [("eta", self.eta), ("omega", self.omega)] {
            if let Some(v) = v {
                positive(name, v)?;
            }
        }
        if let Some(z) = self.zero_tol {
            if !(z.is_finite() && z >= 0.0) {
                return Err(format!("zero_tol must be nonnegative, got {z}"));
            }
        }
        if !(1..=3).contains(&self.scenario) {
            return Err(format!("scenario must be 1, 2 or 3, got {}", self.scenario));
        }
        if self.replicates == 0 {
            return Err("replicates must be at least 1".into());
        }
        if self.max_sweeps == 0 {
            return Err("max_sweeps must be at least 1".into());
        }
        if self.downsample == Some(0) {
            return Err("downsample must be at least 1".into());
        }
        if self.jobs == Some(0) {
            return Err("jobs must be at least 1".into());
        }
        Ok(())
    }
}
