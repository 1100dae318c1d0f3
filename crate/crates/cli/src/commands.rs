use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde_json::{json, Value};
use sparsact::selection::observer_gain;
use sparsact::{
    gamma_sweep, greedy_select, mm_solve, pg_solve, random_stable_model, sensor_dual, solve_are, swift_hohenberg,
    synthetic_completion, MaskKind, Matrix, MmOptions, MmStatus, Model, PgOptions, Plant, Selection, ShParams, Status,
    SweepOptions,
};

use crate::args::{BenchArgs, CompleteArgs, Family, GenArgs, GreedyArgs, SweepArgs};
use crate::error::CliError;
use crate::output::{write_atomic, write_greedy, write_mm_history, write_pg_history, write_sweep};
use crate::problem_file::{matrix_value, to_canonical_json, JsonObject, Kind, ProblemFile};

pub fn load_problem(path: &Path) -> Result<ProblemFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read problem file {}: {e}", path.display())))?;
    ProblemFile::parse(&text)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    if jobs == 0 {
        return Err(CliError::input("--jobs must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CliError::Internal(e.into()))
}

fn parse_mask(spec: &str) -> Result<MaskKind, CliError> {
    match spec {
        "diagonal" => Ok(MaskKind::Diagonal),
        "full" => Ok(MaskKind::Full),
        other => other
            .parse::<f64>()
            .ok()
            .filter(|d| (0.0..=1.0).contains(d))
            .map(MaskKind::RandomSym)
            .ok_or_else(|| CliError::input(format!("--mask must be diagonal, full, or a density in [0, 1], got `{other}`"))),
    }
}

pub fn cmd_gen(args: &GenArgs) -> Result<(), CliError> {
    let file = match args.family {
        Family::SwiftHohenberg => {
            let params = ShParams { n: args.n, c: args.c, alpha: args.alpha, omega: args.omega, r: args.r };
            ProblemFile::from_model(Kind::Actuator, &swift_hohenberg(&params)?)
        }
        Family::Random => ProblemFile::from_model(Kind::Actuator, &random_stable_model(args.seed, args.n, args.m, args.p)?),
        Family::Completion => {
            let inst = synthetic_completion::<f64>(args.seed, args.n, parse_mask(&args.mask)?)?;
            ProblemFile::from_completion(&inst.model, &inst.data)
        }
        Family::Sensor => {
            // A random stable system observed through p outputs, unit noise.
            let base = random_stable_model::<f64>(args.seed, args.n, args.p, args.p)?;
            let id = |k| Matrix::identity(k, k);
            ProblemFile::from_sensor(&base.a, &base.c, &id(args.n), &id(args.p))
        }
    };
    let path = args.out.join("problem.json");
    write_atomic(&path, &file.to_canonical()?)?;
    println!("wrote {}", path.display());
    Ok(())
}

/// Splits the grid into `jobs` contiguous chunks, each warm-started on its
/// own, and runs them concurrently. Results keep the grid order.
fn run_sweep(model: &Model, gammas: &[f64], args: &SweepArgs) -> Result<Vec<Selection>, CliError> {
    let opts = SweepOptions {
        pg: PgOptions { eps: args.eps, max_iters: args.max_iters, ..PgOptions::default() },
        reweight_steps: args.reweight,
        eps_rw: args.eps_rw,
    };
    opts.pg.validate(model.m())?;
    if !(args.eps_rw > 0.0) {
        return Err(CliError::input("--eps-rw must be positive"));
    }
    let chunk = gammas.len().div_ceil(args.jobs.max(1)).max(1);
    let chunks: Vec<&[f64]> = gammas.chunks(chunk).collect();
    let results = pool(args.jobs)?.install(|| {
        chunks.par_iter().map(|c| gamma_sweep(model, c, &opts)).collect::<Result<Vec<_>, _>>()
    })?;
    Ok(results.into_iter().flatten().collect())
}

fn write_sweep_outputs(out: &Path, results: &[Selection], gain_name: &str, gain: impl Fn(&Matrix) -> Matrix) -> Result<(), CliError> {
    let sweep = write_sweep(&out.join("sweep.csv"), results)?;
    for (idx, r) in results.iter().enumerate() {
        for (round, rep) in r.reports.iter().enumerate() {
            write_pg_history(&out.join("iterations").join(format!("gamma_{idx:03}_round_{round}.csv")), &rep.history)?;
        }
    }
    let entries: Vec<Value> = results
        .iter()
        .map(|r| {
            let mut obj = JsonObject::new();
            obj.insert("gamma".into(), json!(r.gamma));
            obj.insert("support".into(), json!(r.support));
            obj.insert("status".into(), json!(r.status_label()));
            obj.insert(gain_name.into(), matrix_value(&gain(&r.k)));
            Value::Object(obj.into_iter().collect())
        })
        .collect();
    let gains_path = out.join("gains.json");
    write_atomic(&gains_path, &to_canonical_json(&json!({ "results": entries }))?)?;
    for r in results {
        println!(
            "gamma={:<12.6e} nnz_rows={:<4} J={:<14.8e} degradation={:.4}% status={}",
            r.gamma,
            r.support.len(),
            r.j,
            r.degradation_pct,
            r.status_label()
        );
    }
    println!("wrote {} and {}", sweep.display(), gains_path.display());
    Ok(())
}

fn sweep_verdict(results: &[Selection]) -> Result<(), CliError> {
    let failed: Vec<String> = results
        .iter()
        .filter(|r| r.error.is_some() || r.status != Status::Converged)
        .map(|r| format!("gamma={} ({})", r.gamma, r.status_label()))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::NonConvergence(anyhow::anyhow!("{} of {} sweep points failed: {}", failed.len(), results.len(), failed.join(", "))))
    }
}

pub fn cmd_actuator(args: &SweepArgs) -> Result<(), CliError> {
    let file = load_problem(&args.problem)?;
    if file.kind != Kind::Actuator {
        return Err(CliError::input(format!("field `kind`: `actuator` command needs kind actuator, found {:?}", file.kind)));
    }
    let model = file.model()?;
    let gammas = args.gamma.values()?;
    let results = run_sweep(&model, &gammas, args)?;
    write_sweep_outputs(&args.out, &results, "K", |k| k.clone())?;
    sweep_verdict(&results)
}

pub fn cmd_sensor(args: &SweepArgs) -> Result<(), CliError> {
    let file = load_problem(&args.problem)?;
    let (a_s, c, v_d, v_eta) = file.sensor()?;
    let dual = sensor_dual(&a_s, &c, &v_d, &v_eta)?;
    let gammas = args.gamma.values()?;
    let results = run_sweep(&dual, &gammas, args)?;
    write_sweep_outputs(&args.out, &results, "L", observer_gain)?;
    sweep_verdict(&results)
}

pub fn cmd_complete(args: &CompleteArgs) -> Result<(), CliError> {
    let file = load_problem(&args.problem)?;
    let model = file.model()?;
    let data = file.completion()?;
    let plant = Plant::new(model)?;
    let pg = PgOptions { gamma: args.gamma, eps: args.eps, max_iters: args.max_iters, ..PgOptions::default() };
    pg.validate(plant.model().m())?;
    let mut solution = JsonObject::new();

    let converged = if data.is_vacuous() {
        warn!("mask E has no known entries; solving the unconstrained problem with plain PG");
        let rep = pg_solve(&plant, &pg, None)?;
        let hist = write_pg_history(&args.out.join("iterations.csv"), &rep.history)?;
        println!("wrote {}", hist.display());
        for (name, m) in [("K", &rep.k), ("X", &rep.x), ("Y", &rep.y)] {
            solution.insert(name.into(), matrix_value(m));
        }
        solution.insert("status".into(), json!(rep.status.as_str()));
        rep.status == Status::Converged
    } else {
        let opts = MmOptions { eps_p: args.eps_p, eps_d: args.eps_d, max_outer: args.max_outer, pg, ..MmOptions::default() };
        let rep = mm_solve(&plant, &data, &opts, None)?;
        let hist = write_mm_history(&args.out.join("outer.csv"), &rep.history)?;
        println!("wrote {}", hist.display());
        let g_norm = data.g.norm();
        let normalized = if g_norm > 0.0 { rep.delta_p / g_norm } else { rep.delta_p };
        println!(
            "status={} outer_iters={} delta_p/||G||={:.6e} delta_d={:.6e}",
            rep.status.as_str(),
            rep.history.len(),
            normalized,
            rep.delta_d
        );
        for (name, m) in [("K", &rep.k), ("X", &rep.x), ("Y", &rep.y)] {
            solution.insert(name.into(), matrix_value(m));
        }
        solution.insert("delta_p_normalized".into(), json!(normalized));
        solution.insert("delta_d".into(), json!(rep.delta_d));
        solution.insert("status".into(), json!(rep.status.as_str()));
        rep.status == MmStatus::Converged
    };
    let path = args.out.join("solution.json");
    write_atomic(&path, &to_canonical_json(&solution)?)?;
    println!("wrote {}", path.display());
    if converged {
        Ok(())
    } else {
        Err(CliError::NonConvergence(anyhow::anyhow!("completion stopped before meeting its tolerances")))
    }
}

pub fn cmd_greedy(args: &GreedyArgs) -> Result<(), CliError> {
    let file = load_problem(&args.problem)?;
    let model = match file.kind {
        Kind::Sensor => {
            let (a_s, c, v_d, v_eta) = file.sensor()?;
            sensor_dual(&a_s, &c, &v_d, &v_eta)?
        }
        _ => file.model()?,
    };
    // Fail on bad input here rather than with an empty trace.
    solve_are(&model)?;
    let trace = pool(args.jobs)?.install(|| greedy_select(&model, args.stop_at));
    let path = write_greedy(&args.out.join("greedy.csv"), &trace)?;
    println!("removal order: {:?}", trace.removed);
    println!("wrote {}", path.display());
    Ok(())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    if args.iters == 0 {
        return Err(CliError::input("--iters must be at least 1"));
    }
    let mut rows = String::from("n,median_iter_seconds,iters,setup_seconds\n");
    for &n in &args.sizes {
        let start = Instant::now();
        let model = swift_hohenberg::<f64>(&ShParams::with_n(n))?;
        let plant = Plant::new(model)?;
        let y0 = solve_are(plant.model())?.y();
        let setup = start.elapsed().as_secs_f64();
        let opts = PgOptions { gamma: args.gamma, eps: 1e-300, max_iters: args.iters, ..PgOptions::default() };
        let rep = pg_solve(&plant, &opts, Some(&y0))?;
        let mut times: Vec<f64> = rep.history.iter().map(|r| r.seconds).collect();
        times.sort_by(f64::total_cmp);
        let median = times.get(times.len() / 2).copied().unwrap_or(f64::NAN);
        info!("n={n}: {} iterations, status {}", rep.iters, rep.status.as_str());
        println!("n={n:<5} median_iter={median:.4e}s iters={} setup={setup:.3}s", rep.history.len());
        rows.push_str(&format!("{n},{median:e},{},{setup:e}\n", rep.history.len()));
    }
    let path = args.out.join("bench.csv");
    write_atomic(&path, rows.as_bytes())?;
    println!("wrote {}", path.display());
    Ok(())
}
