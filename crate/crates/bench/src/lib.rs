//! Seeded fixtures shared by the benchmarks.

use nalgebra::DVector;
use vqoco::algorithm::default_schedule;
use vqoco::harness::{generate_instance, generate_quadratic_instance, Experiment};
use vqoco::{AlgorithmParams, ProblemInstance};

/// Inputs of one decision update.
pub struct StepFixture {
    pub instance: ProblemInstance,
    pub params: AlgorithmParams,
    pub x: DVector<f64>,
    pub grad: DVector<f64>,
    pub queue_next: DVector<f64>,
    pub gtil: DVector<f64>,
}

impl StepFixture {
    /// A mid-run round on a seeded instance with the default schedule for `T = 1000`.
    pub fn new(n: usize, m: usize, quadratic: bool) -> Self {
        let instance = if quadratic {
            generate_quadratic_instance(17, n, m).expect("quadratic instance")
        } else {
            generate_instance(17, n, m).expect("linear instance").instance
        };
        let params = default_schedule(1000, instance.beta().expect("beta"));
        let x = instance.set().center();
        let grad = DVector::from_fn(n, |i, _| if i % 2 == 0 { 0.7 } else { -0.4 });
        let gtil = instance.constraint_values(&x) * params.gamma;
        let queue_next = DVector::from_fn(m, |k, _| (-gtil[k]).max(2.0 + gtil[k]));
        Self {
            instance,
            params,
            x,
            grad,
            queue_next,
            gtil,
        }
    }
}

/// The default experiment for `seed` with two variables and three constraints.
pub fn experiment(seed: u64, horizon: usize) -> Experiment {
    Experiment::new(seed, horizon, 2, 3).expect("experiment")
}
