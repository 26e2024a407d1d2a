//! The five commands. Each writes its files under the configured output
//! directory and returns a short text report.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use vqoco::algorithm::bounds_from_constants;
use vqoco::harness::{compare_with, Algorithm, Comparison, Experiment, RunResult};
use vqoco::tuner::{grid_reference, tune, BoundValues, TunerProblem};
use vqoco::{KnownConstants, ProblemInstance};

use crate::config::{Command, RunConfig};
use crate::error::CliError;
use crate::output::{
    emit_run, max_violation_series, regret_chart, regret_series, violation_chart, write_file,
};

/// What a command produced. `failure` is set when some runs of a
/// comparison failed after the others were written.
#[derive(Debug)]
pub struct Outcome {
    pub report: String,
    pub files: Vec<PathBuf>,
    pub failure: Option<CliError>,
}

/// Log-grid range of the tuner's reference search.
pub const TUNE_GRID: (f64, f64) = (1e-2, 1e3);

pub fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    check_writable(&cfg.out)?;
    match cfg.command {
        Command::Run => run_each(cfg, &cfg.algorithms[0].to_algorithm(cfg.horizon)?),
        Command::Doubling => run_each(cfg, &Algorithm::Doubling),
        Command::Compare | Command::ReplicatePaper => compare_cmd(cfg),
        Command::Tune => tune_cmd(cfg),
    }
}

fn check_writable(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let probe = dir.join(".vqoco-write-check");
    std::fs::write(&probe, b"").map_err(|e| CliError::io(&probe, e))?;
    std::fs::remove_file(&probe).map_err(|e| CliError::io(&probe, e))
}

fn base_instance(cfg: &RunConfig) -> Result<Option<ProblemInstance>, CliError> {
    cfg.instance.as_ref().map(|i| i.build()).transpose()
}

fn experiment(base: &Option<ProblemInstance>, cfg: &RunConfig, seed: u64) -> vqoco::Result<Experiment> {
    match base {
        Some(inst) => Experiment::with_instance(inst.clone(), seed, cfg.horizon),
        None => Experiment::new(seed, cfg.horizon, cfg.n, cfg.m),
    }
}

fn seed_dir(cfg: &RunConfig, seed: u64) -> PathBuf {
    if cfg.seeds.len() == 1 {
        cfg.out.clone()
    } else {
        cfg.out.join(format!("seed-{seed}"))
    }
}

fn violation_bound(r: &RunResult) -> Option<f64> {
    r.manifest.bounds.map(|b| b.violation)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| format!("{v:?}"))
}

fn run_each(cfg: &RunConfig, alg: &Algorithm) -> Result<Outcome, CliError> {
    let base = base_instance(cfg)?;
    let mut report = String::new();
    let mut files = Vec::new();
    for &seed in &cfg.seeds {
        let exp = experiment(&base, cfg, seed)?;
        let r = exp.evaluate(alg)?;
        let dir = seed_dir(cfg, seed);
        files.extend(emit_run(&r, &dir, cfg.plots)?);
        if let Some(c) = (*alg == Algorithm::Doubling).then(|| exp.instance.constants().resolve()).transpose()? {
            let path = dir.join("periods.csv");
            write_file(&path, &periods_csv(&r, &c))?;
            files.push(path);
        }
        let _ = writeln!(
            report,
            "seed {seed} {}: T = {}, final regret {:.6}, final max violation {:.6}{}",
            r.manifest.algorithm,
            cfg.horizon,
            r.metrics.final_regret(),
            r.metrics.final_max_violation(),
            violation_bound(&r).map_or_else(String::new, |b| format!(" (bound {b:.6})")),
        );
    }
    Ok(Outcome {
        report,
        files,
        failure: None,
    })
}

/// One row per doubling period with its parameters and bounds.
pub fn periods_csv(r: &RunResult, c: &KnownConstants) -> String {
    let mut s = String::from("period,horizon,first_round,last_round,gamma,alpha,eta,regret_bound,violation_bound,violation\n");
    for p in &r.trajectory.periods {
        let b = bounds_from_constants(c, p.params.gamma, p.params.alpha, p.params.eta, p.rounds());
        let viol = r.trajectory.rounds[p.first_round + 1..=p.last_round]
            .iter()
            .fold(nalgebra::DVector::zeros(c_len(r)), |acc, t| acc + &t.g_vals)
            .max();
        let _ = writeln!(
            s,
            "{},{},{},{},{:?},{:?},{:?},{:?},{:?},{:?}",
            p.index,
            p.horizon,
            p.first_round + 1,
            p.last_round,
            p.params.gamma,
            p.params.alpha,
            p.params.eta,
            b.regret,
            b.violation,
            viol
        );
    }
    s
}

fn c_len(r: &RunResult) -> usize {
    r.manifest.m
}

/// Labels made unique by suffixing repeats with `-2`, `-3`, ….
fn unique_labels(algs: &[Algorithm]) -> Vec<String> {
    let mut seen: HashMap<String, usize> = HashMap::new();
    algs.iter()
        .map(|a| {
            let l = a.label();
            let k = seen.entry(l.clone()).or_insert(0);
            *k += 1;
            if *k == 1 {
                l
            } else {
                format!("{l}-{k}")
            }
        })
        .collect()
}

fn compare_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let algs = cfg
        .algorithms
        .iter()
        .map(|a| a.to_algorithm(cfg.horizon))
        .collect::<Result<Vec<_>, _>>()?;
    let labels = unique_labels(&algs);
    let base = base_instance(cfg)?;
    let cmp = compare_with(&algs, &cfg.seeds, |seed| experiment(&base, cfg, seed));
    let mut files = Vec::new();
    let mut failure = None;
    let mut summary = String::from("seed,algorithm,status,final_regret,final_max_violation,violation_bound\n");
    let mut report = String::new();

    for (si, &seed) in cmp.seeds.iter().enumerate() {
        let dir = cfg.out.join(format!("seed-{seed}"));
        let mut ok: Vec<(&str, &RunResult)> = Vec::new();
        for (ai, label) in labels.iter().enumerate() {
            match &cmp.cell(ai, si).outcome {
                Ok(r) => {
                    files.extend(emit_run(r, &dir.join(label), false)?);
                    let _ = writeln!(
                        summary,
                        "{seed},{label},ok,{:?},{:?},{}",
                        r.metrics.final_regret(),
                        r.metrics.final_max_violation(),
                        fmt_opt(violation_bound(r))
                    );
                    let _ = writeln!(
                        report,
                        "seed {seed:>4}  {label:<22} regret {:>14.4}  max violation {:>14.4}",
                        r.metrics.final_regret(),
                        r.metrics.final_max_violation()
                    );
                    ok.push((label, r));
                }
                Err(e) => {
                    let msg = e.to_string().replace([',', '\n'], ";");
                    let _ = writeln!(summary, "{seed},{label},error: {msg},,,");
                    let _ = writeln!(report, "seed {seed:>4}  {label:<22} failed: {e}");
                    failure.get_or_insert(CliError::Core(e.clone()));
                }
            }
        }
        let path = dir.join("comparison.csv");
        write_file(&path, &comparison_csv(&ok, cfg.horizon))?;
        files.push(path);
        if cfg.plots {
            let reg: Vec<_> = ok.iter().map(|(l, r)| regret_series(l, r)).collect();
            let vio: Vec<_> = ok.iter().map(|(l, r)| max_violation_series(l, r)).collect();
            for (name, svg) in [("regret.svg", regret_chart(&reg)), ("violation.svg", violation_chart(&vio))] {
                write_file(&dir.join(name), &svg)?;
                files.push(dir.join(name));
            }
        }
    }
    let path = cfg.out.join("summary.csv");
    write_file(&path, &summary)?;
    files.push(path);
    if cfg.command == Command::ReplicatePaper {
        report += &replication_check(&cmp);
    }
    Ok(Outcome {
        report,
        files,
        failure,
    })
}

/// Aligned cumulative regret and largest cumulative violation per algorithm.
pub fn comparison_csv(runs: &[(&str, &RunResult)], horizon: usize) -> String {
    let mut s = String::from("t");
    for (l, _) in runs {
        let _ = write!(s, ",regret_{l}");
    }
    for (l, _) in runs {
        let _ = write!(s, ",max_viol_{l}");
    }
    s.push('\n');
    for i in 0..horizon {
        let _ = write!(s, "{}", i + 1);
        for (_, r) in runs {
            let _ = write!(s, ",{:?}", r.metrics.cumulative_regret[i]);
        }
        for (_, r) in runs {
            let _ = write!(s, ",{:?}", r.metrics.cumulative_violation[i].max());
        }
        s.push('\n');
    }
    s
}

/// Whether the virtual-queue run has the smallest final violation among the
/// compared algorithms, per seed.
fn replication_check(cmp: &Comparison) -> String {
    let Some(vq) = cmp.algorithms.iter().position(|a| matches!(a, Algorithm::VirtualQueue { .. })) else {
        return String::new();
    };
    let mut s = String::from("\nsmallest final max violation:\n");
    for si in 0..cmp.seeds.len() {
        let Ok(base) = &cmp.cell(vq, si).outcome else { continue };
        let v = base.metrics.final_max_violation();
        let others: Vec<f64> = (0..cmp.algorithms.len())
            .filter(|a| *a != vq)
            .filter_map(|a| cmp.cell(a, si).outcome.as_ref().ok())
            .map(|r| r.metrics.final_max_violation())
            .collect();
        let best = others.iter().all(|o| v < *o);
        let _ = writeln!(s, "seed {:>4}: vq {}", cmp.seeds[si], if best { "yes" } else { "no" });
    }
    s
}

#[derive(Serialize)]
struct TuneReport {
    problem: TunerProblem,
    gamma: f64,
    eta: f64,
    alpha: f64,
    objective: f64,
    bounds: BoundValues,
    grid: GridReport,
    /// Tuner objective over the grid objective; at most 1 when the tuner
    /// does at least as well.
    oracle_gap: f64,
}

#[derive(Serialize)]
struct GridReport {
    points: usize,
    lo: f64,
    hi: f64,
    gamma: f64,
    eta: f64,
    objective: f64,
}

fn tune_cmd(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let constants = match cfg.tune.constants {
        Some(c) => c,
        None => {
            let base = base_instance(cfg)?;
            experiment(&base, cfg, cfg.seeds[0])?.instance.constants().resolve()?
        }
    };
    let problem = TunerProblem {
        mode: cfg.tune.tuner_mode()?,
        constants,
        horizon: cfg.horizon,
    };
    let sol = tune(&problem)?;
    let (gg, ge, gobj) = grid_reference(&problem, cfg.tune.grid_points, TUNE_GRID.0, TUNE_GRID.1);
    let rep = TuneReport {
        problem,
        gamma: sol.params.gamma,
        eta: sol.params.eta,
        alpha: sol.params.alpha,
        objective: sol.objective,
        bounds: sol.bounds,
        grid: GridReport {
            points: cfg.tune.grid_points,
            lo: TUNE_GRID.0,
            hi: TUNE_GRID.1,
            gamma: gg,
            eta: ge,
            objective: gobj,
        },
        oracle_gap: sol.objective / gobj,
    };
    let path = cfg.out.join("tune.json");
    let mut json = serde_json::to_string_pretty(&rep).expect("report serializes");
    json.push('\n');
    write_file(&path, &json)?;
    let report = format!(
        "gamma {:.6}  eta {:.6}  alpha {:.6}\nobjective {:.6}  (grid {:.6}, ratio {:.6})\nregret bound {:.6} (stated) / {:.6} (proof)  violation bound {:.6}\n",
        rep.gamma,
        rep.eta,
        rep.alpha,
        rep.objective,
        gobj,
        rep.oracle_gap,
        sol.bounds.regret_stated,
        sol.bounds.regret_proof,
        sol.bounds.violation
    );
    Ok(Outcome {
        report,
        files: vec![path],
        failure: None,
    })
}
