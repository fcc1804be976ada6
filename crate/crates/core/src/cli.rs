//! Command-line front end. Every command writes one JSON document (or CSV
//! for orbit point clouds) that echoes its inputs.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde_json::{json, Map, Value};

use crate::conic::{build_invariant_body, ellipsoid_witness, gauge, BodyConfig, ConicBody};
use crate::error::{Error, Result};
use crate::group_model::{builtin_spec, orbit, sample_group, GroupSample, GroupSpec};
use crate::orbit_optim::{solve_maximin, solve_minimax, ExtremalResult, SolverConfig};
use crate::structure::{
    infinitesimal_flat_check, irreducibility_test_with, lazy_busy_on_sample, probe_vectors, rank_on_sample,
    LazySearchConfig,
};
use crate::tolerances::{DEFAULT_SEED, SOLVER_TOL};
use crate::verify::{render_table, run_all, VerifyConfig};

#[derive(Parser, Debug)]
#[command(name = "orbitforge", version, about = "Orbit geometry of closed subgroups of O(n)")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample the group and write the orbit of a base vector.
    Orbit(RunArgs),
    /// Minimax point and value of an orbit.
    Minimax(RunArgs),
    /// Maximin point and value (Hausdorff distance to the sphere).
    Maximin(RunArgs),
    /// Search for lazy and busy orbits and report r/R.
    Lazy(RunArgs),
    /// Lower bound on the rank from flat subspaces of probe orbits.
    Rank(RunArgs),
    /// Irreducibility test.
    Reduce(RunArgs),
    /// Invariant generalized conics.
    #[command(subcommand)]
    Conic(ConicCommand),
    /// Run the acceptance suite; exit status 0 iff every row passes.
    Verify(VerifyArgs),
}

#[derive(Subcommand, Debug)]
pub enum ConicCommand {
    /// Build the invariant body anchored at the minimax point of an orbit.
    Build(ConicBuildArgs),
    /// Evaluate a saved body at a point.
    Eval(ConicEvalArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Args, Debug, Clone)]
pub struct GroupArgs {
    /// Group spec file (JSON).
    #[arg(long, conflicts_with = "builtin")]
    pub spec: Option<PathBuf>,
    /// Builtin group name.
    #[arg(long)]
    pub builtin: Option<String>,
    /// Order parameter for `cyclic` and `dihedral`.
    #[arg(long)]
    pub k: Option<u64>,
    /// Frequencies for the torus builtins, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub omega: Option<Vec<f64>>,
    /// Further builtin parameters as a JSON object.
    #[arg(long)]
    pub params: Option<String>,
    /// Sampling resolution for continuous groups.
    #[arg(long, default_value_t = 0.05)]
    pub resolution: f64,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    #[command(flatten)]
    pub group: GroupArgs,
    /// Base vector, comma separated; normalised before use. For the
    /// axis-fix builtins a single value is the latitude `v3`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub v: Option<Vec<f64>>,
    /// Solver step tolerance.
    #[arg(long, default_value_t = SOLVER_TOL)]
    pub tol: f64,
    /// Probe count for lazy, rank and reduce.
    #[arg(long)]
    pub probes: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Args, Debug, Clone)]
pub struct ConicBuildArgs {
    #[command(flatten)]
    pub run: RunArgs,
    #[arg(long, default_value_t = 0.05)]
    pub margin: f64,
    /// Monte Carlo hull samples before symmetrisation.
    #[arg(long, default_value_t = 4000)]
    pub mc: usize,
    /// Boundary samples for the ellipsoid test (0 skips it).
    #[arg(long, default_value_t = 0)]
    pub witness: usize,
}

#[derive(Args, Debug, Clone)]
pub struct ConicEvalArgs {
    /// Body file written by `conic build`.
    #[arg(long)]
    pub body: PathBuf,
    /// Point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Multiplies every sampling resolution of continuous groups.
    #[arg(long, default_value_t = 1.0)]
    pub coarsen: f64,
    /// Instances per randomized property.
    #[arg(long, default_value_t = 1000)]
    pub instances: usize,
    /// Run only these criteria (comma separated ids).
    #[arg(long, value_delimiter = ',')]
    pub only: Option<Vec<u8>>,
    /// Also write the report as JSON.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Runs a parsed command and returns the process exit code.
pub fn run(cli: Cli) -> Result<i32> {
    let argv: Vec<String> = std::env::args().collect();
    match cli.command {
        Command::Orbit(a) => cmd_orbit(&a, &argv),
        Command::Minimax(a) => cmd_extremal(&a, &argv, true),
        Command::Maximin(a) => cmd_extremal(&a, &argv, false),
        Command::Lazy(a) => cmd_lazy(&a, &argv),
        Command::Rank(a) => cmd_rank(&a, &argv),
        Command::Reduce(a) => cmd_reduce(&a, &argv),
        Command::Conic(ConicCommand::Build(a)) => cmd_conic_build(&a, &argv),
        Command::Conic(ConicCommand::Eval(a)) => cmd_conic_eval(&a, &argv),
        Command::Verify(a) => cmd_verify(&a),
    }
}

/// Sets the global thread pool size from `ORBITFORGE_THREADS`, if given.
pub fn configure_threads() -> Result<()> {
    if let Ok(s) = std::env::var("ORBITFORGE_THREADS") {
        let n: usize = s.trim().parse().map_err(|_| Error::BadParams(format!("ORBITFORGE_THREADS={s}")))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::BadParams(e.to_string()))?;
    }
    Ok(())
}

pub fn load_spec(g: &GroupArgs) -> Result<GroupSpec> {
    if let Some(path) = &g.spec {
        return GroupSpec::from_json_file(path);
    }
    let name = g.builtin.as_deref().ok_or_else(|| Error::BadParams("one of --spec or --builtin is required".into()))?;
    let mut params = match &g.params {
        Some(text) => match serde_json::from_str::<Value>(text)? {
            Value::Object(m) => m,
            _ => return Err(Error::BadParams("--params must be a JSON object".into())),
        },
        None => Map::new(),
    };
    if let Some(k) = g.k {
        params.insert("k".into(), json!(k));
    }
    if let Some(omega) = &g.omega {
        params.insert("omega".into(), json!(omega));
    }
    builtin_spec(name, &Value::Object(params))
}

fn base_vector(a: &RunArgs, spec: &GroupSpec) -> Result<DVector<f64>> {
    let n = spec.n;
    let raw = match &a.v {
        None => {
            let mut e = DVector::zeros(n);
            e[0] = 1.0;
            return Ok(e);
        }
        Some(v) => v.clone(),
    };
    let axis_fix = matches!(a.group.builtin.as_deref(), Some("so3_axis_fix" | "o3_axis_fix"));
    let x = if raw.len() == 1 && axis_fix && n == 3 {
        let v3 = raw[0];
        if v3.abs() > 1.0 {
            return Err(Error::BadParams(format!("latitude {v3} outside [-1, 1]")));
        }
        DVector::from_column_slice(&[(1.0 - v3 * v3).sqrt(), 0.0, v3])
    } else {
        DVector::from_vec(raw)
    };
    if x.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.len() });
    }
    if x.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite);
    }
    let norm = x.norm();
    if norm == 0.0 {
        return Err(Error::NotUnitVector { norm });
    }
    Ok(x / norm)
}

fn solver(a: &RunArgs, n: usize) -> Result<SolverConfig> {
    if !(a.tol > 0.0) {
        return Err(Error::BadParams("--tol must be positive".into()));
    }
    Ok(SolverConfig { tol: a.tol, ..SolverConfig::for_dim(n) })
}

fn inputs(g: &GroupArgs, spec: &GroupSpec, extra: Value, argv: &[String]) -> Value {
    let mut m = Map::new();
    m.insert("argv".into(), json!(argv.get(1..).unwrap_or_default()));
    m.insert("spec".into(), spec.to_json());
    m.insert("resolution".into(), json!(g.resolution));
    m.insert("seed".into(), json!(g.seed));
    if let Value::Object(e) = extra {
        m.extend(e);
    }
    Value::Object(m)
}

fn emit(command: &str, inputs: Value, result: Value, started: Instant, out: Option<&PathBuf>) -> Result<()> {
    let doc = json!({
        "command": command,
        "inputs": inputs,
        "result": result,
        "wall_time_s": started.elapsed().as_secs_f64(),
    });
    write_text(&(serde_json::to_string_pretty(&doc)? + "\n"), out)
}

fn write_text(text: &str, out: Option<&PathBuf>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn json_only(a: &RunArgs) -> Result<()> {
    if a.format == Format::Csv {
        return Err(Error::BadParams("csv output is only available for `orbit`".into()));
    }
    Ok(())
}

fn sample(g: &GroupArgs, spec: &GroupSpec) -> Result<GroupSample> {
    sample_group(spec, g.resolution, g.seed)
}

fn cmd_orbit(a: &RunArgs, argv: &[String]) -> Result<i32> {
    let started = Instant::now();
    let spec = load_spec(&a.group)?;
    let v = base_vector(a, &spec)?;
    let s = sample(&a.group, &spec)?;
    let o = orbit(&s, &v)?;
    match a.format {
        Format::Csv => {
            let header: Vec<String> = (1..=spec.n).map(|i| format!("x{i}")).collect();
            let mut text = header.join(",") + "\n";
            for p in &o.points {
                let row: Vec<String> = p.iter().map(|c| format!("{c:e}")).collect();
                text.push_str(&(row.join(",") + "\n"));
            }
            write_text(&text, a.out.as_ref())?;
        }
        Format::Json => {
            let result = json!({
                "count": o.len(),
                "sample_size": s.len(),
                "covering_resolution": s.covering_resolution,
                "exact": s.exact,
                "points": arrs(&o.points),
            });
            emit("orbit", inputs(&a.group, &spec, json!({"v": v.as_slice()}), argv), result, started, a.out.as_ref())?;
        }
    }
    Ok(0)
}

fn arrs(vs: &[DVector<f64>]) -> Vec<&[f64]> {
    vs.iter().map(|v| v.as_slice()).collect()
}

fn extremal_json(r: &ExtremalResult) -> Value {
    json!({
        "value": r.value,
        "value_squared": r.value * r.value,
        "w": r.w.as_slice(),
        "active_set_size": r.active.len(),
        "eps_active": r.active.eps_active,
        "witnesses": arrs(&r.active.witness_points),
        "converged_starts": r.converged_starts,
        "starts": r.multistart_values.len(),
        "antipodal_gap": r.antipodal_gap,
    })
}

fn cmd_extremal(a: &RunArgs, argv: &[String], minimax: bool) -> Result<i32> {
    json_only(a)?;
    let started = Instant::now();
    let spec = load_spec(&a.group)?;
    let v = base_vector(a, &spec)?;
    let cfg = solver(a, spec.n)?;
    let s = sample(&a.group, &spec)?;
    let o = orbit(&s, &v)?;
    let r = if minimax { solve_minimax(&o, &cfg)? } else { solve_maximin(&o, &cfg)? };
    let mut result = extremal_json(&r);
    result["covering_resolution"] = json!(s.covering_resolution);
    result["orbit_size"] = json!(o.len());
    let name = if minimax { "minimax" } else { "maximin" };
    emit(name, inputs(&a.group, &spec, json!({"v": v.as_slice(), "tol": a.tol}), argv), result, started, a.out.as_ref())?;
    Ok(0)
}

fn cmd_lazy(a: &RunArgs, argv: &[String]) -> Result<i32> {
    json_only(a)?;
    let started = Instant::now();
    let spec = load_spec(&a.group)?;
    let cfg = solver(a, spec.n)?;
    let mut search = LazySearchConfig::for_dim(spec.n);
    if let Some(p) = a.probes {
        search.probes = p;
    }
    let s = sample(&a.group, &spec)?;
    let rep = lazy_busy_on_sample(&s, a.group.seed, &cfg, &search)?;
    let extra = json!({"tol": a.tol, "probes": search.probes});
    emit("lazy", inputs(&a.group, &spec, extra, argv), serde_json::to_value(&rep)?, started, a.out.as_ref())?;
    Ok(0)
}

fn cmd_rank(a: &RunArgs, argv: &[String]) -> Result<i32> {
    json_only(a)?;
    let started = Instant::now();
    let spec = load_spec(&a.group)?;
    let cfg = solver(a, spec.n)?;
    let count = a.probes.unwrap_or(12);
    let mut probes = probe_vectors(spec.n, count, a.group.seed);
    if a.v.is_some() {
        probes.insert(0, base_vector(a, &spec)?);
    }
    let s = sample(&a.group, &spec)?;
    let rep = rank_on_sample(&s, &spec.lie_generators, &probes, &cfg)?;
    let flat = &rep.flat_star;
    let result = json!({
        "rank": rep.rank,
        "v_star": rep.v_star.as_slice(),
        "maximin_w": flat.maximin_w.as_slice(),
        "maximin_value": flat.value,
        "flat_dim": flat.dim,
        "witnesses": arrs(&flat.witnesses),
        "active_set_size": flat.witnesses.len(),
        "infinitesimal_check": infinitesimal_flat_check(&spec.lie_generators, &flat.maximin_w, &flat.basis),
        "per_v": rep.per_v,
    });
    emit("rank", inputs(&a.group, &spec, json!({"tol": a.tol, "probes": probes.len()}), argv), result, started, a.out.as_ref())?;
    Ok(0)
}

fn cmd_reduce(a: &RunArgs, argv: &[String]) -> Result<i32> {
    json_only(a)?;
    let started = Instant::now();
    let spec = load_spec(&a.group)?;
    let cfg = solver(a, spec.n)?;
    let probes = a.probes.unwrap_or(24);
    let s = sample(&a.group, &spec)?;
    let rep = irreducibility_test_with(&s, probes, a.group.seed, &cfg)?;
    emit("reduce", inputs(&a.group, &spec, json!({"tol": a.tol, "probes": probes}), argv), serde_json::to_value(&rep)?, started, a.out.as_ref())?;
    Ok(0)
}

fn cmd_conic_build(a: &ConicBuildArgs, argv: &[String]) -> Result<i32> {
    json_only(&a.run)?;
    let started = Instant::now();
    let g = &a.run.group;
    let spec = load_spec(g)?;
    let v = base_vector(&a.run, &spec)?;
    let cfg = BodyConfig { mc_samples: a.mc, solver: solver(&a.run, spec.n)?, ..BodyConfig::new(spec.n, g.resolution, g.seed) };
    let body = build_invariant_body(&spec, &v, a.margin, &cfg)?;
    let witness = if a.witness > 0 { Some(ellipsoid_witness(&body, a.witness, g.seed)?) } else { None };
    let result = json!({
        "body": body,
        "focal_points": body.focal.points.len(),
        "ellipsoid_witness": witness,
    });
    let extra = json!({"v": v.as_slice(), "margin": a.margin, "mc": a.mc, "tol": a.run.tol});
    emit("conic build", inputs(g, &spec, extra, argv), result, started, a.run.out.as_ref())?;
    Ok(0)
}

fn cmd_conic_eval(a: &ConicEvalArgs, argv: &[String]) -> Result<i32> {
    let started = Instant::now();
    let text = std::fs::read_to_string(&a.body)?;
    let doc: Value = serde_json::from_str(&text)?;
    let body_value = doc.pointer("/result/body").cloned().unwrap_or(doc);
    let body: ConicBody = serde_json::from_value(body_value)?;
    let x = DVector::from_vec(a.x.clone());
    let result = json!({
        "x": x.as_slice(),
        "value": body.value(&x)?,
        "level": body.level,
        "gauge": gauge(&body, &x)?,
    });
    let inputs = json!({"argv": argv.get(1..).unwrap_or_default(), "body": a.body, "provenance": body.provenance});
    emit("conic eval", inputs, result, started, a.out.as_ref())?;
    Ok(0)
}

fn cmd_verify(a: &VerifyArgs) -> Result<i32> {
    if !(a.coarsen > 0.0) {
        return Err(Error::BadParams("--coarsen must be positive".into()));
    }
    let cfg = VerifyConfig { seed: a.seed, resolution_scale: a.coarsen, property_instances: a.instances };
    let mut report = run_all_selected(&cfg, a.only.as_deref());
    report.pass = report.criteria.iter().all(|c| c.pass);
    print!("{}", render_table(&report));
    if let Some(path) = &a.out {
        std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(if report.pass { 0 } else { 1 })
}

fn run_all_selected(cfg: &VerifyConfig, only: Option<&[u8]>) -> crate::verify::VerifyReport {
    match only {
        None => run_all(cfg),
        Some(ids) => {
            let criteria: Vec<_> = ids.iter().map(|&id| crate::verify::run_criterion(id, cfg)).collect();
            crate::verify::VerifyReport {
                seed: cfg.seed,
                resolution_scale: cfg.resolution_scale,
                property_instances: cfg.property_instances,
                pass: criteria.iter().all(|c| c.pass),
                criteria,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("orbitforge").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn latitude_shorthand() {
        let Command::Minimax(a) = parse(&["minimax", "--builtin", "so3_axis_fix", "--v", "0.6"]).command else {
            panic!("wrong command")
        };
        let spec = load_spec(&a.group).unwrap();
        let v = base_vector(&a, &spec).unwrap();
        assert!((v[2] - 0.6).abs() < 1e-15 && (v.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn k_and_omega_flags_become_params() {
        let Command::Orbit(a) = parse(&["orbit", "--builtin", "torus_swap_4d", "--omega", "1,2,3,-1"]).command else {
            panic!("wrong command")
        };
        let spec = load_spec(&a.group).unwrap();
        assert_eq!(spec.to_json()["builtin"]["params"]["omega"], json!([1.0, 2.0, 3.0, -1.0]));
        let Command::Orbit(a) = parse(&["orbit", "--builtin", "cyclic", "--k", "4"]).command else {
            panic!("wrong command")
        };
        assert_eq!(sample(&a.group, &load_spec(&a.group).unwrap()).unwrap().len(), 4);
    }

    #[test]
    fn spec_and_builtin_conflict() {
        let r = Cli::try_parse_from(["orbitforge", "orbit", "--spec", "g.json", "--builtin", "cyclic"]);
        assert!(r.is_err());
    }

    #[test]
    fn missing_group_is_an_error() {
        let Command::Orbit(a) = parse(&["orbit"]).command else { panic!("wrong command") };
        assert!(matches!(load_spec(&a.group), Err(Error::BadParams(_))));
    }
}
