//! Seeded experiments: random instances, adversarial costs, hindsight
//! comparators, metrics and multi-algorithm comparisons.

mod audit;
mod generator;
mod hindsight;
mod metrics;

pub use audit::{audit, Audit, Comparator};
pub use generator::{
    generate_instance, generate_quadratic_instance, CostGenerator, GeneratedInstance, DEFAULT_INTERVALS, MAX_GENERATION_ATTEMPTS,
};
pub use hindsight::{hindsight_optimum, VERTEX_ENUMERATION_MAX_DIM};
pub use metrics::{compute_metrics, Metrics};

use std::time::{Duration, Instant};

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::algorithm::{
    certified_bounds, default_schedule, run_doubling, run_with, AlgorithmParams, CertifiedBounds,
    RunOptions, Trajectory,
};
use crate::baselines::{run_ogd, run_primal_dual, OgdOptions, PrimalDualOptions};
use crate::error::{Error, Result};
use crate::problem::{Constants, LinearLosses, ProblemInstance};

/// Name of the random generator recorded in manifests.
pub const RNG_NAME: &str = "ChaCha8 (rand_chacha), streams: instance=0 bounded=1 drift=2 permutation=3 bootstrap=4 sampling=5";

/// An algorithm to run on an experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Algorithm {
    /// The virtual-queue algorithm; `params = None` selects the default
    /// schedule for the horizon and the instance's β.
    VirtualQueue { params: Option<AlgorithmParams> },
    /// The virtual-queue algorithm restarted in doubling periods.
    Doubling,
    /// Online gradient descent projected onto the full feasible set.
    OgdProj(OgdOptions),
    PrimalDual(PrimalDualOptions),
}

impl Algorithm {
    pub fn vq() -> Self {
        Algorithm::VirtualQueue { params: None }
    }

    pub fn primal_dual(theta_exp: f64) -> Self {
        Algorithm::PrimalDual(PrimalDualOptions::new(theta_exp))
    }

    /// Short label used for CSV columns and file names.
    pub fn label(&self) -> String {
        match self {
            Algorithm::VirtualQueue { .. } => "vq".into(),
            Algorithm::Doubling => "vq-doubling".into(),
            Algorithm::OgdProj(_) => "ogd-proj".into(),
            Algorithm::PrimalDual(o) => format!("primal-dual-{:.4}", o.theta_exp),
        }
    }
}

/// Settings an algorithm actually ran with, after defaults were filled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResolvedSettings {
    VirtualQueue { params: AlgorithmParams },
    Doubling { beta: f64, periods: Vec<AlgorithmParams> },
    OgdProj { step: f64, tol: f64 },
    PrimalDual { theta_exp: f64, step_primal: f64, step_dual: f64, reg: f64 },
}

/// Reproducibility record written next to every trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub algorithm: String,
    pub settings: ResolvedSettings,
    pub seed: u64,
    pub horizon: usize,
    pub n: usize,
    pub m: usize,
    pub rng: String,
    /// Instance draws needed before the Slater margin cleared its floor.
    pub instance_attempts: Option<usize>,
    /// `A` row by row and `b`, when the constraints are linear.
    pub a: Option<Vec<Vec<f64>>>,
    pub b: Option<Vec<f64>>,
    pub constants: Constants,
    pub slater_point: Option<Vec<f64>>,
    /// Bounds for the virtual-queue algorithm with the parameters used.
    pub bounds: Option<CertifiedBounds>,
    pub hindsight_x: Vec<f64>,
    pub hindsight_value: f64,
    pub final_regret: f64,
    pub final_violation: Vec<f64>,
}

/// One algorithm run on one experiment, with metrics.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub trajectory: Trajectory,
    pub metrics: Metrics,
    pub hindsight_x: DVector<f64>,
    pub manifest: Manifest,
    /// Wall-clock time of the run itself. Kept out of the manifest so that
    /// manifests stay byte-stable.
    pub elapsed: Duration,
}

/// An instance with its cost stream.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub seed: u64,
    pub horizon: usize,
    /// The instance with `D` set from the generator.
    pub instance: ProblemInstance,
    pub generator: CostGenerator,
    pub losses: LinearLosses,
    pub instance_attempts: Option<usize>,
}

impl Experiment {
    /// A random instance with `n` variables and `m` linear constraints and
    /// its cost stream, both from `seed`.
    pub fn new(seed: u64, horizon: usize, n: usize, m: usize) -> Result<Self> {
        let gen = generate_instance(seed, n, m)?;
        let mut exp = Self::with_instance(gen.instance, seed, horizon)?;
        exp.instance_attempts = Some(gen.attempts);
        Ok(exp)
    }

    /// Costs from `seed` on a given instance. Constants that are still unset
    /// are derived; `D` is taken from the generator unless already set.
    pub fn with_instance(instance: ProblemInstance, seed: u64, horizon: usize) -> Result<Self> {
        let generator = CostGenerator::new(seed, horizon, instance.dim())?;
        let instance = if instance.constants().d.is_some() {
            instance
        } else {
            instance.with_gradient_bound(generator.gradient_bound())
        };
        let instance = instance.prepared(Some(1000))?;
        let losses = generator.losses()?;
        Ok(Self {
            seed,
            horizon,
            instance,
            generator,
            losses,
            instance_attempts: None,
        })
    }

    /// `x*` and `Σ_{t=1}^{T} c(t)ᵀx*`.
    pub fn hindsight(&self) -> Result<(DVector<f64>, f64)> {
        hindsight_optimum(&self.instance, &self.losses.cost_sum(self.horizon))
    }

    /// Runs `algorithm` and computes metrics against the hindsight optimum.
    pub fn evaluate(&self, algorithm: &Algorithm) -> Result<RunResult> {
        let (x_star, _) = self.hindsight()?;
        self.evaluate_against(algorithm, &x_star)
    }

    /// Like [`Experiment::evaluate`] with a precomputed comparator.
    pub fn evaluate_against(&self, algorithm: &Algorithm, x_star: &DVector<f64>) -> Result<RunResult> {
        let inst = &self.instance;
        let t = self.horizon;
        let start = Instant::now();
        let (trajectory, settings, bounds) = match algorithm {
            Algorithm::VirtualQueue { params } => {
                let p = match params {
                    Some(p) => *p,
                    None => default_schedule(t, inst.beta()?),
                };
                let tr = run_with(inst, &p, &self.losses, t, &RunOptions::default())?;
                let b = certified_bounds(inst, &p, t).ok();
                (tr, ResolvedSettings::VirtualQueue { params: p }, b)
            }
            Algorithm::Doubling => {
                let beta = inst.beta()?;
                if t == 0 {
                    return Err(crate::error::invalid("the doubling wrapper needs at least one round"));
                }
                let tr = run_doubling(inst, &self.losses, beta, t, &RunOptions::default())?;
                let periods = tr.periods.iter().map(|p| p.params).collect();
                (tr, ResolvedSettings::Doubling { beta, periods }, None)
            }
            Algorithm::OgdProj(o) => {
                let step = o.resolved_step(inst, t)?;
                let tr = run_ogd(inst, &self.losses, t, o)?;
                (tr, ResolvedSettings::OgdProj { step, tol: o.tol }, None)
            }
            Algorithm::PrimalDual(o) => {
                let (sp, sd, reg) = o.resolved(inst, t)?;
                let tr = run_primal_dual(inst, &self.losses, t, o)?;
                let s = ResolvedSettings::PrimalDual {
                    theta_exp: o.theta_exp,
                    step_primal: sp,
                    step_dual: sd,
                    reg,
                };
                (tr, s, None)
            }
        };
        let elapsed = start.elapsed();
        let metrics = compute_metrics(&trajectory, &self.losses, x_star)?;
        let linear = inst.constraints().as_linear();
        let manifest = Manifest {
            algorithm: algorithm.label(),
            settings,
            seed: self.seed,
            horizon: t,
            n: inst.dim(),
            m: inst.num_constraints(),
            rng: RNG_NAME.into(),
            instance_attempts: self.instance_attempts,
            a: linear.map(|(a, _)| a.row_iter().map(|r| r.iter().copied().collect()).collect()),
            b: linear.map(|(_, b)| b.iter().copied().collect()),
            constants: *inst.constants(),
            slater_point: inst.slater_point().map(|p| p.iter().copied().collect()),
            bounds,
            hindsight_x: x_star.iter().copied().collect(),
            hindsight_value: metrics.hindsight_value,
            final_regret: metrics.final_regret(),
            final_violation: metrics
                .cumulative_violation
                .last()
                .map(|v| v.iter().copied().collect())
                .unwrap_or_else(|| vec![0.0; inst.num_constraints()]),
        };
        Ok(RunResult {
            trajectory,
            metrics,
            hindsight_x: x_star.clone(),
            manifest,
            elapsed,
        })
    }
}

/// One (algorithm, seed) cell of a comparison.
#[derive(Debug, Clone)]
pub struct ComparisonCell {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub outcome: std::result::Result<RunResult, Error>,
}

/// Results of several algorithms on the same seeded experiments.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    /// Seed-major: all algorithms for `seeds[0]`, then `seeds[1]`, …
    pub cells: Vec<ComparisonCell>,
}

impl Comparison {
    pub fn cell(&self, algorithm: usize, seed: usize) -> &ComparisonCell {
        &self.cells[seed * self.algorithms.len() + algorithm]
    }
}

/// Runs every algorithm on every seed's random experiment, seeds in
/// parallel. Failures are kept per cell.
pub fn compare(algorithms: &[Algorithm], seeds: &[u64], horizon: usize, n: usize, m: usize) -> Comparison {
    compare_with(algorithms, seeds, |seed| Experiment::new(seed, horizon, n, m))
}

/// Like [`compare`] with experiments built by `make` from each seed.
pub fn compare_with<F>(algorithms: &[Algorithm], seeds: &[u64], make: F) -> Comparison
where
    F: Fn(u64) -> Result<Experiment> + Sync,
{
    let cells = seeds
        .par_iter()
        .map(|&seed| {
            let exp = make(seed).and_then(|e| {
                let (x, _) = e.hindsight()?;
                Ok((e, x))
            });
            algorithms
                .iter()
                .map(|alg| ComparisonCell {
                    algorithm: *alg,
                    seed,
                    outcome: exp.as_ref().map_err(Clone::clone).and_then(|(e, x)| e.evaluate_against(alg, x)),
                })
                .collect::<Vec<_>>()
        })
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    Comparison {
        algorithms: algorithms.to_vec(),
        seeds: seeds.to_vec(),
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn experiment_losses_respect_gradient_bound() {
        let e = Experiment::new(5, 400, 2, 3).unwrap();
        assert!(e.losses.max_gradient_norm() <= e.instance.constants().d.unwrap());
    }

    #[test]
    fn regret_matches_recomputation() {
        let e = Experiment::new(7, 300, 2, 3).unwrap();
        let r = e.evaluate(&Algorithm::vq()).unwrap();
        assert_eq!(r.metrics.cumulative_regret.len(), 300);
        let mut acc = 0.0;
        for (i, rec) in r.trajectory.rounds[1..].iter().enumerate() {
            acc += e.losses.cost(rec.t).dot(&rec.x) - e.losses.cost(rec.t).dot(&r.hindsight_x);
            let got = r.metrics.cumulative_regret[i];
            assert!((got - acc).abs() <= 1e-12 * acc.abs().max(1.0));
        }
    }

    #[test]
    fn compare_is_deterministic_and_keeps_errors() {
        let algs = [Algorithm::vq(), Algorithm::vq(), Algorithm::primal_dual(0.5)];
        let c = compare(&algs, &[3, 4], 100, 2, 3);
        assert_eq!(c.cells.len(), 6);
        for s in 0..2 {
            let a = c.cell(0, s).outcome.as_ref().unwrap();
            let b = c.cell(1, s).outcome.as_ref().unwrap();
            assert_eq!(a.metrics, b.metrics);
            assert_eq!(a.manifest, b.manifest);
        }
        let bad = compare(&[Algorithm::primal_dual(1.5)], &[1], 10, 2, 3);
        assert!(bad.cells[0].outcome.is_err());
    }

    #[test]
    fn single_cell() {
        let c = compare(&[Algorithm::vq()], &[42], 50, 2, 3);
        assert_eq!(c.cells.len(), 1);
    }

    #[test]
    fn audit_passes_on_a_seeded_run() {
        let e = Experiment::new(11, 200, 2, 3).unwrap();
        let (x, _) = e.hindsight().unwrap();
        let r = e.evaluate_against(&Algorithm::vq(), &x).unwrap();
        let a = audit(
            &e.instance,
            &r.trajectory,
            Some(Comparator {
                losses: &e.losses,
                x_star: &x,
            }),
        )
        .unwrap();
        assert!(a.holds(1e-9, 1e-6), "{a:?}");
    }
}
