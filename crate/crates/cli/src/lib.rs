//! Command-line front end. `cli_main` returns the process exit code:
//! 0 on success, 1 for bad arguments or specs, 2 when a run fails.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use dynfit::diagnostics::TailMethod;
use dynfit::fitness::MSchedule;
use dynfit::graph::ModelKind;
use dynfit::harness::{
    self, AggregateReport, BSeeding, CriterionMethod, ExperimentKind, ExperimentSpec, RunOptions, SimulateSpec,
    OUTPUT_ROOT_ENV,
};
use dynfit::increments::IncrementDistribution;
use dynfit::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "dynfit", version, about = "Preferential attachment with dynamical fitness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Grow one tree and export it.
    Simulate(SimulateArgs),
    /// Total variation between two models' degree distributions.
    TvCurve(GraphArgs),
    /// Survival curves and tail exponents.
    Tail(GraphArgs),
    /// Fitness landscapes and condensate profiles.
    Landscape(GraphArgs),
    /// Condensation criterion over a range of m.
    Criterion(CriterionArgs),
    /// Smallest condensing m per increment law.
    Mstar(CriterionArgs),
    /// Landscape scans across R3 window schedules.
    R3Sweep(GraphArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// JSON file with the simulate parameters; flags override it.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// e.g. `ba`, `bbm:2:uniform`, `r1:1:beta:1,3`, `r3:sqrt:gumbel`.
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trial: Option<u64>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    no_verify: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct Common {
    /// JSON experiment spec; flags override its fields.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory; defaults to the spec's, then `$DYNFIT_OUTPUT_ROOT/<kind>-seed<seed>`.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Args, Debug)]
struct GraphArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    model_a: Option<ModelKind>,
    #[arg(long)]
    model_b: Option<ModelKind>,
    #[arg(long, value_parser = parse_b_seeding)]
    b_seeding: Option<BSeeding>,
    /// Comma-separated, strictly increasing.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    trials: Option<usize>,
    /// R3 sweep schedules, comma-separated (`log2,sqrt,linear`).
    #[arg(long, value_delimiter = ',')]
    schedules: Option<Vec<MSchedule>>,
    /// Increment law of the R3 sweep.
    #[arg(long)]
    dist: Option<IncrementDistribution>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    k_min: Option<u64>,
    #[arg(long)]
    k_max: Option<u64>,
    #[arg(long, value_parser = parse_tail_method)]
    tail_method: Option<TailMethod>,
    #[arg(long)]
    h_grid_points: Option<usize>,
    #[arg(long)]
    export_trials: Option<usize>,
    #[arg(long)]
    tv_floor: Option<f64>,
    /// Skip the per-checkpoint invariant checks.
    #[arg(long)]
    no_verify: bool,
}

#[derive(Args, Debug)]
struct CriterionArgs {
    #[command(flatten)]
    common: Common,
    /// Increment law; repeat for several.
    #[arg(long = "dist")]
    dists: Vec<IncrementDistribution>,
    /// `A..B` (inclusive) or a single value.
    #[arg(long, value_parser = parse_m_range)]
    m: Option<(usize, usize)>,
    #[arg(long)]
    m_max: Option<usize>,
    #[arg(long, value_parser = parse_method)]
    method: Option<CriterionMethod>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    precision: Option<f64>,
    /// Beta verdict matrix at m = 1, e.g. `1,3;2,1.5`.
    #[arg(long, value_parser = parse_beta_grid)]
    beta_grid: Option<Vec<(f64, f64)>>,
}

fn parse_m_range(s: &str) -> std::result::Result<(usize, usize), String> {
    let num = |x: &str| x.trim().parse::<usize>().map_err(|_| format!("`{x}` is not a non-negative integer"));
    let (lo, hi) = match s.split_once("..") {
        Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
        None => (num(s)?, num(s)?),
    };
    if lo < 1 || hi < lo {
        return Err(format!("expected 1 <= A <= B in `{s}`"));
    }
    Ok((lo, hi))
}

fn parse_beta_grid(s: &str) -> std::result::Result<Vec<(f64, f64)>, String> {
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (a, b) = pair.split_once(',').ok_or_else(|| format!("expected ALPHA,BETA, got `{pair}`"))?;
            let f = |x: &str| x.trim().parse::<f64>().map_err(|_| format!("`{x}` is not a number"));
            Ok((f(a)?, f(b)?))
        })
        .collect()
}

fn parse_enum<T: serde::de::DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_b_seeding(s: &str) -> std::result::Result<BSeeding, String> {
    parse_enum(s)
}

fn parse_tail_method(s: &str) -> std::result::Result<TailMethod, String> {
    parse_enum(s)
}

fn parse_method(s: &str) -> std::result::Result<CriterionMethod, String> {
    parse_enum(s)
}

fn read_json(path: &Path) -> Result<serde_json::Value> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| Error::config("spec", format!("{}: {e}", path.display())))
}

/// Loads `--spec` (if any) as a spec of `kind`; a missing `kind` field is filled in.
fn load_spec(path: Option<&Path>, kind: ExperimentKind) -> Result<ExperimentSpec> {
    let Some(path) = path else { return Ok(ExperimentSpec::new(kind)) };
    let mut value = read_json(path)?;
    let obj = value.as_object_mut().ok_or_else(|| Error::config("spec", "expected a JSON object"))?;
    let kind_value = serde_json::to_value(kind)?;
    match obj.get("kind") {
        None => {
            obj.insert("kind".into(), kind_value);
        }
        Some(k) => {
            let given: ExperimentKind = serde_json::from_value(k.clone())?;
            if given != kind {
                return Err(Error::config("kind", format!("spec is {given}, but the subcommand runs {kind}")));
            }
        }
    }
    Ok(serde_json::from_value(value)?)
}

fn apply_common(spec: &mut ExperimentSpec, c: &Common) -> RunOptions {
    if let Some(seed) = c.seed {
        spec.master_seed = seed;
    }
    if let Some(out) = &c.out {
        spec.output_dir = Some(out.clone());
    }
    RunOptions { workers: c.workers }
}

fn graph_spec(kind: ExperimentKind, a: &GraphArgs) -> Result<(ExperimentSpec, RunOptions)> {
    let mut spec = load_spec(a.common.spec.as_deref(), kind)?;
    let options = apply_common(&mut spec, &a.common);
    macro_rules! set {
        ($flag:expr => $($field:tt)+) => {
            if let Some(v) = $flag.clone() {
                spec.$($field)+ = v;
            }
        };
    }
    if a.model_a.is_some() {
        spec.model_a = a.model_a;
    }
    if a.model_b.is_some() {
        spec.model_b = a.model_b;
    }
    if a.dist.is_some() {
        spec.dist = a.dist;
    }
    if a.k_max.is_some() {
        spec.diagnostics.k_max = a.k_max;
    }
    set!(a.b_seeding => b_seeding);
    set!(a.sizes => sizes);
    set!(a.trials => trials);
    set!(a.schedules => schedules);
    set!(a.bins => diagnostics.bins);
    set!(a.k_min => diagnostics.k_min);
    set!(a.tail_method => diagnostics.tail_method);
    set!(a.h_grid_points => diagnostics.h_grid_points);
    set!(a.export_trials => diagnostics.export_trials);
    set!(a.tv_floor => diagnostics.tv_floor);
    if a.no_verify {
        spec.diagnostics.verify = false;
    }
    if kind == ExperimentKind::R3Sweep && spec.schedules.is_empty() {
        spec.schedules = vec![MSchedule::Log2Floor, MSchedule::SqrtFloor, MSchedule::Linear];
    }
    Ok((spec, options))
}

fn criterion_spec(kind: ExperimentKind, a: &CriterionArgs) -> Result<(ExperimentSpec, RunOptions)> {
    let mut spec = load_spec(a.common.spec.as_deref(), kind)?;
    let options = apply_common(&mut spec, &a.common);
    let c = &mut spec.criterion;
    if !a.dists.is_empty() {
        c.dists = a.dists.clone();
    }
    if let Some((lo, hi)) = a.m {
        c.m_min = lo;
        c.m_max = Some(hi);
    }
    if a.m_max.is_some() {
        c.m_max = a.m_max;
    }
    if let Some(v) = a.method {
        c.method = v;
    }
    if a.grid_points.is_some() {
        c.grid_points = a.grid_points;
    }
    if let Some(v) = a.samples {
        c.n_samples = v;
    }
    if let Some(v) = a.precision {
        c.precision = v;
    }
    if let Some(v) = &a.beta_grid {
        c.beta_grid = v.clone();
    }
    if c.dists.is_empty() && c.beta_grid.is_empty() {
        return Err(Error::config("criterion.dists", "give at least one --dist"));
    }
    Ok((spec, options))
}

fn simulate_spec(a: &SimulateArgs) -> Result<SimulateSpec> {
    let mut value = match &a.spec {
        Some(path) => read_json(path)?,
        None => serde_json::json!({}),
    };
    let obj = value.as_object_mut().ok_or_else(|| Error::config("spec", "expected a JSON object"))?;
    if let Some(model) = &a.model {
        obj.insert("model".into(), serde_json::to_value(model)?);
    }
    for (key, v) in [("n", a.n.map(|x| x as u64)), ("seed", a.seed), ("trial", a.trial), ("bins", a.bins.map(|x| x as u64))] {
        if let Some(v) = v {
            obj.insert(key.into(), v.into());
        }
    }
    if a.no_verify {
        obj.insert("verify".into(), false.into());
    }
    for required in ["model", "n"] {
        if !obj.contains_key(required) {
            return Err(Error::config(required, format!("missing; pass --{required}")));
        }
    }
    Ok(serde_json::from_value(value)?)
}

/// Writes the report under `dir`, or prints its main table when there is no
/// output directory.
fn emit(report: &AggregateReport, dir: Option<PathBuf>, main_table: &str) -> Result<()> {
    for w in &report.manifest.warnings {
        eprintln!("warning: {w}");
    }
    match dir {
        Some(dir) => {
            report.write_to(&dir)?;
            println!("wrote {} files to {}", report.manifest.artifacts.len(), dir.display());
        }
        None => {
            let bytes = match report.artifacts.iter().find(|a| a.path == main_table) {
                Some(a) => a.contents.clone(),
                None => report.summary_csv()?,
            };
            print!("{}", String::from_utf8_lossy(&bytes));
        }
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<()> {
    let (kind, (spec, options)) = match &cli.command {
        Command::Simulate(a) => {
            let spec = simulate_spec(a)?;
            let dir = a.out.clone().or_else(|| {
                std::env::var_os(OUTPUT_ROOT_ENV).map(|r| PathBuf::from(r).join(format!("simulate-seed{}", spec.seed)))
            });
            let report = harness::run_simulate(&spec)?;
            return emit(&report, dir, "summary.csv");
        }
        Command::TvCurve(a) => (ExperimentKind::TvCurve, graph_spec(ExperimentKind::TvCurve, a)?),
        Command::Tail(a) => (ExperimentKind::TailCompare, graph_spec(ExperimentKind::TailCompare, a)?),
        Command::Landscape(a) => (ExperimentKind::LandscapeScan, graph_spec(ExperimentKind::LandscapeScan, a)?),
        Command::R3Sweep(a) => (ExperimentKind::R3Sweep, graph_spec(ExperimentKind::R3Sweep, a)?),
        Command::Criterion(a) => (ExperimentKind::CriterionScan, criterion_spec(ExperimentKind::CriterionScan, a)?),
        Command::Mstar(a) => (ExperimentKind::MStar, criterion_spec(ExperimentKind::MStar, a)?),
    };
    spec.validate()?;
    let report = harness::run(&spec, &options)?;
    let main_table = match kind {
        ExperimentKind::CriterionScan => "criterion.csv",
        ExperimentKind::MStar => "mstar.json",
        _ => "summary.csv",
    };
    emit(&report, spec.resolve_output_dir(), main_table)
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e) if e.is_config() => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}
