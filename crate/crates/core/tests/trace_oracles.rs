//! Whole-run checks recomputed from recorded traces.

use std::path::PathBuf;

use vqoco::harness::{
    audit, generate_instance, generate_quadratic_instance, Algorithm, Comparator, CostGenerator, Experiment,
};
use vqoco::vqueue::violation_from_queue;
use vqoco::{default_schedule, run, run_doubling, RunOptions};

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

/// Compares `text` with a golden file; `VQOCO_BLESS=1` rewrites it.
fn check_golden(name: &str, text: &str) {
    let path = golden(name);
    if std::env::var_os("VQOCO_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, text).unwrap();
    }
    let want = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert_eq!(text, want, "{name} drifted");
}

#[test]
fn queue_certifies_violation_on_a_one_dimensional_run() {
    let e = Experiment::new(17, 200, 1, 1).unwrap();
    let p = default_schedule(200, e.instance.beta().unwrap());
    let tr = run(&e.instance, &p, &e.losses, 200).unwrap();
    let summed: f64 = tr.rounds[1..].iter().map(|r| r.g_vals[0]).sum();
    let cert = violation_from_queue(&tr.rounds[200].queue_after, p.gamma).unwrap();
    assert!(summed <= cert[0] + 1e-9, "{summed} > {}", cert[0]);
}

#[test]
fn instance_for_seed_42_is_pinned() {
    let g = generate_instance(42, 2, 3).unwrap();
    let mut text = String::new();
    for k in 0..3 {
        text += &format!("A[{k}] = {:?} {:?}\n", g.a[(k, 0)], g.a[(k, 1)]);
    }
    text += &format!("b = {:?} {:?} {:?}\n", g.b[0], g.b[1], g.b[2]);
    text += &format!("attempts = {}\n", g.attempts);
    check_golden("instance_seed42.txt", &text);
}

#[test]
fn cost_stream_for_seed_42_is_pinned() {
    let g = CostGenerator::new(42, 5000, 2).unwrap();
    let mut text = String::new();
    for t in [0usize, 1, 2, 1500, 1501, 2500, 5000] {
        let c = g.cost_at(t).unwrap();
        text += &format!("c({t}) = {:?} {:?}\n", c[0], c[1]);
    }
    check_golden("costs_seed42.txt", &text);
}

#[test]
fn audit_holds_on_quadratic_constraints() {
    let inst = generate_quadratic_instance(4, 3, 2).unwrap();
    let e = Experiment::with_instance(inst, 4, 150).unwrap();
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

#[test]
fn doubling_with_two_rounds_is_one_complete_period() {
    let e = Experiment::new(3, 2, 2, 3).unwrap();
    let tr = run_doubling(&e.instance, &e.losses, e.instance.beta().unwrap(), 2, &RunOptions::default()).unwrap();
    assert_eq!(tr.periods.len(), 1);
    assert_eq!((tr.periods[0].first_round + 1, tr.periods[0].last_round), (1, 2));
    assert_eq!(tr.periods[0].horizon, 2);
}

#[test]
fn doubling_audit_holds_per_period() {
    let e = Experiment::new(8, 300, 2, 3).unwrap();
    let (x, _) = e.hindsight().unwrap();
    let r = e.evaluate_against(&Algorithm::Doubling, &x).unwrap();
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

#[test]
fn regret_series_is_the_prefix_sum_of_recorded_gaps() {
    for alg in [Algorithm::vq(), Algorithm::primal_dual(0.5), Algorithm::OgdProj(Default::default())] {
        let e = Experiment::new(21, 400, 2, 3).unwrap();
        let r = e.evaluate(&alg).unwrap();
        let mut acc = 0.0;
        for (i, rec) in r.trajectory.rounds[1..].iter().enumerate() {
            let c = e.losses.cost(rec.t);
            acc += c.dot(&rec.x) - c.dot(&r.hindsight_x);
            let got = r.metrics.cumulative_regret[i];
            assert!((got - acc).abs() <= 1e-12 * acc.abs().max(1.0), "{}", alg.label());
        }
    }
}

#[test]
fn queue_method_violates_less_than_slow_primal_dual_on_seed_42() {
    let e = Experiment::new(42, 5000, 2, 3).unwrap();
    let (x, _) = e.hindsight().unwrap();
    let vq = e.evaluate_against(&Algorithm::vq(), &x).unwrap();
    let pd = e.evaluate_against(&Algorithm::primal_dual(2.0 / 3.0), &x).unwrap();
    let (a, b) = (vq.metrics.final_max_violation(), pd.metrics.final_max_violation());
    assert!(a < b, "{a} vs {b}");
}
