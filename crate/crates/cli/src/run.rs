use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use rdl_core::amplitude::{index_point, FamilySpec, TargetSet};
use rdl_core::caps::set_dense_cap;
use rdl_core::isis_solver::{
    abort_probability, block_deficiency_exhaustive, random_matrix, random_vector, recover, uniformity_audit,
    wilson_interval, AlwaysAbortSolver, RecoverableSolver, RecursiveSolver, SolverOutput, SolverParams,
    SolverTape,
};
use rdl_core::lattice_states::LatticeContext;
use rdl_core::modq::{mat_vec_mul, Instance, ModMatrix, ModVector};
use rdl_core::reductions::{
    end_to_end, forward_isis, forward_report, iclwe_oracle_from_solver, instance_digest, profile,
    reverse_report, symmetrize, theorem3_report, Check, ConstantAnswerOracle, EndToEndSolver, IclweOracle,
    PgmOracle, ReductionReport, SlweOracle,
};
use rdl_core::rng::{fork, sha256_hex};
use rdl_core::{Error, Result};

use crate::config::{Command, EndToEndOracle, ExperimentConfig, ForwardOracle, ReverseOracle};

/// Wall-clock data, kept apart from the deterministic part of the report.
#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub started_unix_ms: u128,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: String,
    pub config: Value,
    pub body: Value,
    pub checks: Vec<Check>,
    pub passed: bool,
    pub exit_code: u8,
    pub timing: Timing,
}

impl RunReport {
    /// Everything except `timing`; identical for identical config and seed.
    pub fn deterministic_json(&self) -> String {
        let mut v = serde_json::to_value(self).expect("report serializes");
        v.as_object_mut().expect("object").remove("timing");
        serde_json::to_string(&v).expect("report serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Process exit code for an error: 3 cap, 4 malformed input, 5 failed precheck, 1 otherwise.
pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::CapExceeded { .. } => 3,
        Error::Malformed(_)
        | Error::EntryOutOfRange { .. }
        | Error::Dimension(_)
        | Error::Modulus(_)
        | Error::NotNormalized(_)
        | Error::DuplicateElement
        | Error::EmptyTarget
        | Error::TapeLength { .. } => 4,
        Error::RecoveryFailed(_) => 5,
        _ => 1,
    }
}

pub fn run(config: &ExperimentConfig) -> Result<RunReport> {
    if let Some(cap) = config.cap {
        set_dense_cap(cap);
    }
    let started_unix_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0);
    let clock = Instant::now();
    let (body, checks) = dispatch(&config.command)?;
    let passed = checks.iter().all(|c| c.passed);
    let report = RunReport {
        version: format!("rdl {}", env!("CARGO_PKG_VERSION")),
        config: serde_json::to_value(config).expect("config serializes"),
        body,
        checks,
        passed,
        exit_code: if passed { 0 } else { 1 },
        timing: Timing {
            started_unix_ms,
            elapsed_ms: clock.elapsed().as_secs_f64() * 1e3,
        },
    };
    if let Some(path) = &config.json {
        fs::write(path, report.to_json_pretty()).map_err(|e| io_error(path, e))?;
    }
    if let Some(path) = &config.csv {
        append_csv(path, &config.command, &report)?;
    }
    Ok(report)
}

/// Uniform `A` and `y` from the seeded stream `gen-instance`.
pub fn gen_instance(q: u32, n: usize, m: usize, seed: u64) -> Result<Instance> {
    let mut rng = fork(seed, "gen-instance");
    let a = random_matrix(n, m, q, &mut rng)?;
    let y = random_vector(n, q, &mut rng)?;
    Ok(Instance { a, y: Some(y) })
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Malformed(format!("{}: {e}", path.display()))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

/// Inline JSON when the argument starts with `{`, a file path otherwise.
fn json_arg(arg: &str) -> Result<String> {
    if arg.trim_start().starts_with('{') {
        Ok(arg.to_string())
    } else {
        read_text(Path::new(arg))
    }
}

fn load_instance(path: &Path) -> Result<Instance> {
    Instance::from_json(&read_text(path)?)
}

fn load_target(arg: &str) -> Result<TargetSet> {
    serde_json::from_str(&json_arg(arg)?).map_err(|e| Error::Malformed(e.to_string()))
}

fn load_family(arg: &str, q: u32, m: usize) -> Result<rdl_core::amplitude::AmplitudeTable> {
    FamilySpec::from_json(&json_arg(arg)?)?.build(q, m)
}

/// `(n, l)` for an instance with `q = 2^l` and `m = (2n+1)^l`.
fn solver_params(a: &ModMatrix) -> Result<SolverParams> {
    let q = a.modulus();
    if !q.is_power_of_two() || q < 2 {
        return Err(Error::Modulus(format!("solver needs q = 2^l, got {q}")));
    }
    let params = SolverParams::new(a.rows(), q.trailing_zeros())?;
    if params.m() != a.cols() {
        return Err(Error::Dimension(format!(
            "solver needs m = (2n+1)^l = {}, got {}",
            params.m(),
            a.cols()
        )));
    }
    Ok(params)
}

fn required_y(inst: &Instance) -> Result<ModVector> {
    inst.y
        .clone()
        .ok_or_else(|| Error::Malformed("instance has no syndrome y".into()))
}

fn is_valid_solution(a: &ModMatrix, y: &ModVector, x: &ModVector) -> Result<bool> {
    Ok(x.entries().iter().all(|&e| e <= 1) && mat_vec_mul(a, x)? == *y)
}

fn split_report(rep: ReductionReport) -> (Value, Vec<Check>) {
    let checks = rep.checks.clone();
    let mut body = serde_json::to_value(&rep).expect("report serializes");
    body.as_object_mut().expect("object").remove("checks");
    (body, checks)
}

fn dispatch(cmd: &Command) -> Result<(Value, Vec<Check>)> {
    match cmd {
        Command::Identities {
            q,
            n,
            m,
            f,
            seed,
            trials,
        } => identities(*q, *n, *m, f, *seed, *trials),
        Command::Pgm { instance, f } => {
            let inst = load_instance(instance)?;
            let fam = load_family(f, inst.q(), inst.a.cols())?;
            let ctx = LatticeContext::new(inst.a.clone(), fam)?;
            let formula = ctx.pmax_formula();
            let direct = ctx.pgm_success_direct()?;
            let unitary = profile(&PgmOracle::new(&ctx)?, &ctx)?.p;
            let checks = vec![
                Check::eq("direct_equals_formula", direct, formula, 1e-9),
                Check::eq("unitary_equals_formula", unitary, formula, 1e-9),
            ];
            let body = json!({
                "instance_digest": instance_digest(&inst.a),
                "p_max": formula,
                "pgm_direct": direct,
                "pgm_unitary": unitary,
            });
            Ok((body, checks))
        }
        Command::Solve { instance, tape, seed } => {
            let inst = load_instance(instance)?;
            let y = required_y(&inst)?;
            let params = solver_params(&inst.a)?;
            let len = params.tape_length();
            let tape = match tape {
                Some(hex) => SolverTape::from_hex(hex, len)?,
                None => SolverTape::random(len, &mut fork(*seed, "solve/tape")),
            };
            let (out, trace) = RecursiveSolver::new(params).solve_traced(&inst.a, &y, &tape)?;
            let mut checks = vec![Check::eq(
                "tape_consumed",
                trace.consumed_bits as f64,
                len as f64,
                0.0,
            )];
            let outcome = match &out {
                SolverOutput::Solution(x) => {
                    let ok = is_valid_solution(&inst.a, &y, x)?;
                    checks.push(Check::eq("solution_valid", ok as u8 as f64, 1.0, 0.0));
                    json!({"result": "solution", "x": x.entries()})
                }
                SolverOutput::Abort(t) => json!({"result": "abort", "tape": t.to_hex()}),
            };
            let body = json!({
                "instance_digest": instance_digest(&inst.a),
                "tape": tape.to_hex(),
                "outcome": outcome,
                "trace": trace,
            });
            Ok((body, checks))
        }
        Command::Recover { instance, solution } => {
            let inst = load_instance(instance)?;
            let y = required_y(&inst)?;
            let params = solver_params(&inst.a)?;
            let raw: Vec<i64> = serde_json::from_str(solution).map_err(|e| Error::Malformed(e.to_string()))?;
            let x = ModVector::from_i64(inst.q(), &raw)?;
            let tape = recover(&params, &inst.a, &y, &x)?;
            let again = RecursiveSolver::new(params).solve(&inst.a, &y, &tape)?;
            let round_trip = again.solution() == Some(&x);
            let body = json!({
                "instance_digest": instance_digest(&inst.a),
                "tape": tape.to_hex(),
            });
            Ok((body, vec![Check::eq("solve_reproduces_solution", round_trip as u8 as f64, 1.0, 0.0)]))
        }
        Command::AuditUniformity { instance, exhaustive } => {
            let inst = load_instance(instance)?;
            let params = solver_params(&inst.a)?;
            let solver = RecursiveSolver::new(params);
            let ys: Vec<ModVector> = if *exhaustive || inst.y.is_none() {
                let count = (inst.q() as usize).pow(inst.a.rows() as u32);
                (0..count)
                    .map(|i| ModVector::new(inst.q(), index_point(inst.q(), inst.a.rows(), i)))
                    .collect::<Result<_>>()?
            } else {
                vec![required_y(&inst)?]
            };
            let mut audits = Vec::with_capacity(ys.len());
            let mut checks = Vec::new();
            for y in &ys {
                let au = uniformity_audit(&solver, &inst.a, y)?;
                checks.push(Check::ge(
                    format!("fuchs_van_de_graaf{:?}", au.y),
                    au.fidelity,
                    1.0 - au.epsilon,
                    1e-12,
                ));
                audits.push(au);
            }
            let body = json!({
                "instance_digest": instance_digest(&inst.a),
                "tape_length": params.tape_length(),
                "audits": audits,
            });
            Ok((body, checks))
        }
        Command::AbortRate {
            n,
            l,
            trials,
            seed,
            exhaustive,
        } => {
            let params = SolverParams::new(*n, *l)?;
            let est = abort_probability(&params, *trials, *seed)?;
            let mut predicted = est.predicted;
            let mut body = json!({ "estimate": est });
            if *exhaustive {
                let b = block_deficiency_exhaustive(*n)?;
                let blocks: i32 = (0..*l).map(|k| (2 * *n as i32 + 1).pow(k)).sum();
                predicted = 1.0 - (1.0 - b).powi(blocks);
                body["block_deficiency_exhaustive"] = json!(b);
                body["predicted_exhaustive"] = json!(predicted);
            }
            let (lo, hi) = wilson_interval(est.aborts, est.trials, 3.0);
            body["ci_z3"] = json!([lo, hi]);
            let tol = if predicted >= est.rate { hi - est.rate } else { est.rate - lo };
            Ok((body, vec![Check::eq("prediction_within_wilson_z3", predicted, est.rate, tol)]))
        }
        Command::Forward {
            instance,
            f,
            t,
            oracle,
            seed,
        } => {
            let inst = load_instance(instance)?;
            let fam = load_family(f, inst.q(), inst.a.cols())?;
            let target = load_target(t)?;
            let ctx = LatticeContext::new(inst.a.clone(), fam)?;
            let o: Box<dyn SlweOracle + '_> = match oracle {
                ForwardOracle::Pgm => Box::new(PgmOracle::new(&ctx)?),
                ForwardOracle::Biased => Box::new(ConstantAnswerOracle::new(&ctx, 0)?),
                ForwardOracle::SymmetrizedPgm => Box::new(symmetrize(Box::new(PgmOracle::new(&ctx)?), &ctx)?),
                ForwardOracle::SymmetrizedBiased => {
                    Box::new(symmetrize(Box::new(ConstantAnswerOracle::new(&ctx, 0)?), &ctx)?)
                }
            };
            let rep = forward_report(&ctx, &target, o.as_ref())?;
            let (mut body, checks) = split_report(rep);
            if let Some(seed) = seed {
                let samples = (0..ctx.num_syndromes())
                    .map(|y| {
                        let mut rng = fork(*seed, &format!("forward/sample/{y}"));
                        forward_isis(&ctx, &target, o.as_ref(), y, Some(&mut rng))
                    })
                    .collect::<Result<Vec<_>>>()?;
                body["samples"] = serde_json::to_value(samples).expect("samples serialize");
            }
            Ok((body, checks))
        }
        Command::Reverse { instance, f, oracle } => {
            let inst = load_instance(instance)?;
            let (q, m) = (inst.q(), inst.a.cols());
            if *oracle != ReverseOracle::Perfect && f.is_some() {
                return Err(Error::Malformed(
                    "solver-derived oracles use the binary indicator family; drop --f".into(),
                ));
            }
            let fam = load_family(f.as_deref().unwrap_or(r#"{"kind":"indicator_fourier","T":{"kind":"binary"}}"#), q, m)?;
            let ctx = LatticeContext::new(inst.a.clone(), fam)?;
            match oracle {
                ReverseOracle::Perfect => {
                    let o = IclweOracle::perfect(&ctx)?;
                    Ok(split_report(reverse_report(&ctx, &o)?))
                }
                ReverseOracle::Solver | ReverseOracle::Stub => {
                    let params = solver_params(&inst.a)?;
                    let solver: Box<dyn RecoverableSolver> = if *oracle == ReverseOracle::Solver {
                        Box::new(RecursiveSolver::new(params))
                    } else {
                        Box::new(AlwaysAbortSolver { params })
                    };
                    let so = iclwe_oracle_from_solver(&ctx, solver.as_ref())?;
                    let t3 = theorem3_report(&ctx, &so);
                    let mut rep = reverse_report(&ctx, &so.oracle)?;
                    rep.solver_epsilon = t3.solver_epsilon;
                    rep.per_y_success = t3.per_y_success;
                    rep.checks.extend(t3.checks);
                    Ok(split_report(rep))
                }
            }
        }
        Command::EndToEnd { n, l, seed, oracle } => {
            let which = match oracle {
                EndToEndOracle::Solver => EndToEndSolver::Recursive,
                EndToEndOracle::Stub => EndToEndSolver::AlwaysAbort,
            };
            Ok(split_report(end_to_end(SolverParams::new(*n, *l)?, *seed, which)?))
        }
        Command::GenInstance { q, n, m, seed, out } => {
            let inst = gen_instance(*q, *n, *m, *seed)?;
            let text = inst.to_json();
            if let Some(path) = out {
                fs::write(path, &text).map_err(|e| io_error(path, e))?;
            }
            let body = json!({
                "instance": inst.to_file(),
                "digest": sha256_hex(text.as_bytes()),
            });
            Ok((body, vec![]))
        }
    }
}

fn identities(q: u32, n: usize, m: usize, f: &str, seed: u64, trials: usize) -> Result<(Value, Vec<Check>)> {
    let spec = FamilySpec::from_json(&json_arg(f)?)?;
    let mut runs = Vec::with_capacity(trials);
    let mut checks = Vec::new();
    for i in 0..trials {
        let mut rng = fork(seed, &format!("identities/{i}"));
        let a = random_matrix(n, m, q, &mut rng)?;
        let ctx = LatticeContext::new(a, spec.build(q, m)?)?;
        let ids = ctx.check_identities()?;
        let formula = ctx.pmax_formula();
        let direct = ctx.pgm_success_direct()?;
        let residuals = serde_json::to_value(ids).expect("identities serialize");
        for (name, v) in residuals.as_object().expect("object") {
            let v = v.as_f64().unwrap_or(f64::INFINITY);
            checks.push(Check::le(format!("trial{i}/{name}"), v, 0.0, 1e-9));
        }
        checks.push(Check::eq(format!("trial{i}/pgm_direct_equals_formula"), direct, formula, 1e-9));
        runs.push(json!({
            "instance_digest": instance_digest(ctx.matrix()),
            "residuals": residuals,
            "p_max": formula,
            "pgm_direct": direct,
        }));
    }
    Ok((json!({ "q": q, "n": n, "m": m, "trials": runs }), checks))
}

fn append_csv(path: &Path, cmd: &Command, report: &RunReport) -> Result<()> {
    let fresh = fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| io_error(path, e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    let csv_err = |e: csv::Error| Error::Malformed(format!("{}: {e}", path.display()));
    if fresh {
        w.write_record([
            "subcommand",
            "instance_digest",
            "seed",
            "check",
            "relation",
            "measured",
            "bound",
            "tolerance",
            "passed",
        ])
        .map_err(csv_err)?;
    }
    let digest = report
        .body
        .get("instance_digest")
        .and_then(Value::as_str)
        .unwrap_or("");
    let seed = cmd.seed().map(|s| s.to_string()).unwrap_or_default();
    for c in &report.checks {
        w.write_record([
            cmd.name(),
            digest,
            &seed,
            &c.name,
            c.relation,
            &c.measured.to_string(),
            &c.bound.to_string(),
            &c.tolerance.to_string(),
            &c.passed.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| io_error(path, e))?;
    let mut inner = w.into_inner().map_err(|e| Error::Malformed(e.to_string()))?;
    inner.flush().map_err(|e| io_error(path, e))
}
