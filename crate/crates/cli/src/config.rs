//! TOML run configuration.
//!
//! A document is parsed strictly into [`RawConfig`], command-line overrides
//! are applied, and the result is validated into a [`RunConfig`] with every
//! default filled in. Serializing a `RunConfig` and parsing it back yields
//! the same value.

use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use vqoco::baselines::{OgdOptions, PrimalDualOptions};
use vqoco::harness::Algorithm;
use vqoco::tuner::TunerMode;
use vqoco::{AlgorithmParams, ConstraintFunction, KnownConstants, ProblemInstance, SimpleSet};

use crate::error::CliError;

pub const DEFAULT_HORIZON: usize = 5000;
pub const DEFAULT_N: usize = 2;
pub const DEFAULT_M: usize = 3;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_GRID_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Run,
    Compare,
    Tune,
    ReplicatePaper,
    Doubling,
}

/// Algorithm selection for `--algorithm`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum AlgorithmKind {
    Vq,
    OgdProj,
    PrimalDual,
}

/// One algorithm with its hyperparameters. Unset values take the library
/// defaults for the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", rename_all_fields = "kebab-case", deny_unknown_fields)]
pub enum AlgorithmSpec {
    /// Explicit `gamma`, `alpha` and `eta` must be given together.
    Vq {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        gamma: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eta: Option<f64>,
    },
    OgdProj {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
    },
    PrimalDual {
        #[serde(default = "default_theta")]
        theta_exp: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step_primal: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step_dual: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reg: Option<f64>,
    },
}

fn default_theta() -> f64 {
    0.5
}

impl AlgorithmSpec {
    pub fn vq() -> Self {
        AlgorithmSpec::Vq {
            gamma: None,
            alpha: None,
            eta: None,
        }
    }

    pub fn primal_dual(theta_exp: f64) -> Self {
        AlgorithmSpec::PrimalDual {
            theta_exp,
            step_primal: None,
            step_dual: None,
            reg: None,
        }
    }

    fn from_kind(kind: AlgorithmKind, theta_exp: Option<f64>) -> Self {
        match kind {
            AlgorithmKind::Vq => Self::vq(),
            AlgorithmKind::OgdProj => AlgorithmSpec::OgdProj { step: None, tol: None },
            AlgorithmKind::PrimalDual => Self::primal_dual(theta_exp.unwrap_or_else(default_theta)),
        }
    }

    /// The library algorithm for `horizon` rounds.
    pub fn to_algorithm(&self, horizon: usize) -> Result<Algorithm, CliError> {
        match *self {
            AlgorithmSpec::Vq { gamma, alpha, eta } => match (gamma, alpha, eta) {
                (None, None, None) => Ok(Algorithm::vq()),
                (Some(g), Some(a), Some(e)) => Ok(Algorithm::VirtualQueue {
                    params: Some(AlgorithmParams::new(g, a, e, horizon)?),
                }),
                _ => Err(CliError::config("algorithm: gamma, alpha and eta must be given together")),
            },
            AlgorithmSpec::OgdProj { step, tol } => {
                if step.is_some_and(|s| !(s > 0.0)) || tol.is_some_and(|t| !(t > 0.0)) {
                    return Err(CliError::config("algorithm: step and tol must be positive"));
                }
                Ok(Algorithm::OgdProj(OgdOptions {
                    step,
                    tol: tol.unwrap_or(OgdOptions::default().tol),
                }))
            }
            AlgorithmSpec::PrimalDual {
                theta_exp,
                step_primal,
                step_dual,
                reg,
            } => {
                if !(theta_exp > 0.0 && theta_exp < 1.0) {
                    return Err(CliError::config("algorithm: theta-exp must lie in (0, 1)"));
                }
                Ok(Algorithm::PrimalDual(PrimalDualOptions {
                    theta_exp,
                    step_primal,
                    step_dual,
                    reg,
                }))
            }
        }
    }
}

/// An explicit linear instance `Ax ≤ b` over a box (default `[−1, 1]^n`) or
/// a ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct InstanceSpec {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lower: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
}

impl InstanceSpec {
    fn dims(&self) -> Result<(usize, usize), CliError> {
        let m = self.a.len();
        let n = self.a.first().map_or(0, Vec::len);
        if m == 0 || n == 0 || self.a.iter().any(|r| r.len() != n) {
            return Err(CliError::config("instance.a must be a nonempty rectangular matrix"));
        }
        if self.b.len() != m {
            return Err(CliError::config("instance.b must have one entry per row of instance.a"));
        }
        Ok((n, m))
    }

    /// The instance with constants not yet derived.
    pub fn build(&self) -> Result<ProblemInstance, CliError> {
        let (n, m) = self.dims()?;
        let a = DMatrix::from_fn(m, n, |i, j| self.a[i][j]);
        let b = DVector::from_column_slice(&self.b);
        let set = match (&self.lower, &self.upper, &self.center, self.radius) {
            (None, None, Some(c), Some(r)) if c.len() == n => SimpleSet::new_ball(DVector::from_column_slice(c), r)?,
            (lo, hi, None, None) => {
                let side = |v: &Option<Vec<f64>>, d: f64| -> Result<DVector<f64>, CliError> {
                    match v {
                        Some(v) if v.len() == n => Ok(DVector::from_column_slice(v)),
                        Some(_) => Err(CliError::config("instance bounds must have n entries")),
                        None => Ok(DVector::from_element(n, d)),
                    }
                };
                SimpleSet::new_box(side(lo, -1.0)?, side(hi, 1.0)?)?
            }
            _ => {
                return Err(CliError::config(
                    "instance: give lower/upper for a box or center (n entries) and radius for a ball",
                ))
            }
        };
        Ok(ProblemInstance::new(set, ConstraintFunction::linear(a, b)?)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TuneMode {
    Minimax,
    RegretSubjectToViolation,
    ViolationSubjectToRegret,
}

/// Settings of the `tune` command. Constants default to those of the seeded
/// or inline instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct TuneSpec {
    #[serde(default = "default_tune_mode")]
    pub mode: TuneMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub z0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<KnownConstants>,
    /// Points per axis of the log-grid reference.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_tune_mode() -> TuneMode {
    TuneMode::Minimax
}

fn default_grid_points() -> usize {
    DEFAULT_GRID_POINTS
}

impl Default for TuneSpec {
    fn default() -> Self {
        Self {
            mode: TuneMode::Minimax,
            z0: None,
            r0: None,
            constants: None,
            grid_points: DEFAULT_GRID_POINTS,
        }
    }
}

impl TuneSpec {
    pub fn tuner_mode(&self) -> Result<TunerMode, CliError> {
        match self.mode {
            TuneMode::Minimax => Ok(TunerMode::Minimax),
            TuneMode::RegretSubjectToViolation => self
                .z0
                .map(|z0| TunerMode::RegretSubjectToViolation { z0 })
                .ok_or_else(|| CliError::config("tune.z0 is required for regret-subject-to-violation")),
            TuneMode::ViolationSubjectToRegret => self
                .r0
                .map(|r0| TunerMode::ViolationSubjectToRegret { r0 })
                .ok_or_else(|| CliError::config("tune.r0 is required for violation-subject-to-regret")),
        }
    }
}

/// The document as written, before defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<Command>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seeds: Option<Vec<u64>>,
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plots: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<InstanceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<AlgorithmSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithms: Option<Vec<AlgorithmSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tune: Option<TuneSpec>,
}

/// Command-line values that take precedence over the document.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub command: Option<Command>,
    pub seed: Option<u64>,
    pub horizon: Option<usize>,
    pub out: Option<PathBuf>,
    pub algorithm: Option<AlgorithmKind>,
    pub theta_exp: Option<f64>,
    pub no_plots: bool,
}

/// A validated configuration with all defaults filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seeds: Vec<u64>,
    pub horizon: usize,
    pub n: usize,
    pub m: usize,
    pub out: PathBuf,
    pub plots: bool,
    pub instance: Option<InstanceSpec>,
    /// `run` uses the first entry; `compare` and `replicate-paper` use all.
    pub algorithms: Vec<AlgorithmSpec>,
    pub tune: TuneSpec,
}

/// The queue method against primal-dual with exponents 1/2 and 2/3.
pub fn reference_algorithms() -> Vec<AlgorithmSpec> {
    vec![AlgorithmSpec::vq(), AlgorithmSpec::primal_dual(0.5), AlgorithmSpec::primal_dual(2.0 / 3.0)]
}

/// Parses a TOML document strictly, without overrides.
pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    RunConfig::from_sources(Some(text), &Overrides::default())
}

impl RunConfig {
    /// Builds a configuration from an optional document and overrides.
    pub fn from_sources(text: Option<&str>, overrides: &Overrides) -> Result<Self, CliError> {
        let raw: RawConfig = match text {
            Some(t) => toml::from_str(t).map_err(|e| CliError::config(e.to_string()))?,
            None => RawConfig::default(),
        };
        Self::from_raw(raw, overrides)
    }

    fn from_raw(mut raw: RawConfig, o: &Overrides) -> Result<Self, CliError> {
        if o.command.is_some() {
            raw.command = o.command;
        }
        if let Some(s) = o.seed {
            raw.seed = Some(s);
            raw.seeds = None;
        }
        if o.horizon.is_some() {
            raw.horizon = o.horizon;
        }
        if o.out.is_some() {
            raw.out = o.out.clone();
        }
        if o.no_plots {
            raw.plots = Some(false);
        }

        let command = raw
            .command
            .ok_or_else(|| CliError::config("no command given (pass one or set `command` in the config)"))?;
        let seeds = match (raw.seed, raw.seeds) {
            (Some(_), Some(_)) => return Err(CliError::config("give either seed or seeds, not both")),
            (Some(s), None) => vec![s],
            (None, Some(v)) => v,
            (None, None) => vec![DEFAULT_SEED],
        };
        if seeds.is_empty() {
            return Err(CliError::config("seeds must not be empty"));
        }
        let horizon = raw.horizon.unwrap_or(DEFAULT_HORIZON);
        if horizon == 0 {
            return Err(CliError::config("T must be at least 1"));
        }
        let (n, m) = match &raw.instance {
            Some(inst) => {
                let (n, m) = inst.dims()?;
                if raw.n.is_some_and(|v| v != n) || raw.m.is_some_and(|v| v != m) {
                    return Err(CliError::config("n and m disagree with the inline instance"));
                }
                inst.build()?;
                (n, m)
            }
            None => (raw.n.unwrap_or(DEFAULT_N), raw.m.unwrap_or(DEFAULT_M)),
        };
        if n == 0 || m == 0 {
            return Err(CliError::config("n and m must be at least 1"));
        }

        let mut algorithms = match (raw.algorithm, raw.algorithms) {
            (Some(_), Some(_)) => return Err(CliError::config("give either algorithm or algorithms, not both")),
            (Some(a), None) => vec![a],
            (None, Some(v)) => v,
            (None, None) if matches!(command, Command::Compare | Command::ReplicatePaper) => reference_algorithms(),
            (None, None) => vec![AlgorithmSpec::vq()],
        };
        if let Some(kind) = o.algorithm {
            algorithms = vec![AlgorithmSpec::from_kind(kind, o.theta_exp)];
        }
        if let Some(th) = o.theta_exp {
            for a in &mut algorithms {
                if let AlgorithmSpec::PrimalDual { theta_exp, .. } = a {
                    *theta_exp = th;
                }
            }
        }
        if algorithms.is_empty() {
            return Err(CliError::config("algorithms must not be empty"));
        }
        for a in &algorithms {
            a.to_algorithm(horizon)?;
        }
        if command == Command::Doubling && !matches!(algorithms[..], [AlgorithmSpec::Vq { gamma: None, .. }]) {
            return Err(CliError::config("doubling runs the virtual-queue algorithm with its default schedule"));
        }

        let tune = raw.tune.unwrap_or_default();
        tune.tuner_mode()?;
        if tune.grid_points < 2 {
            return Err(CliError::config("tune.grid-points must be at least 2"));
        }

        Ok(Self {
            command,
            seeds,
            horizon,
            n,
            m,
            out: raw.out.unwrap_or_else(|| PathBuf::from("out")),
            plots: raw.plots.unwrap_or(true),
            instance: raw.instance,
            algorithms,
            tune,
        })
    }

    /// The configuration as a document that parses back to `self`.
    pub fn to_toml(&self) -> String {
        let raw = RawConfig {
            command: Some(self.command),
            seed: None,
            seeds: Some(self.seeds.clone()),
            horizon: Some(self.horizon),
            n: self.instance.is_none().then_some(self.n),
            m: self.instance.is_none().then_some(self.m),
            out: Some(self.out.clone()),
            plots: Some(self.plots),
            instance: self.instance.clone(),
            algorithm: None,
            algorithms: Some(self.algorithms.clone()),
            tune: Some(self.tune),
        };
        toml::to_string(&raw).expect("configuration serializes")
    }
}
