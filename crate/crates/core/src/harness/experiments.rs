use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::report::{into_bytes, to_json, AggregateReport, Artifact, RawRecord};
use super::{upper_endpoint, CriterionMethod, ExperimentKind, ExperimentSpec, RunOptions};
use crate::condensation::{
    beta_bb1_closed_form, criterion_bracket, criterion_mc, criterion_quadrature, find_mstar, scan_grid_points,
    CriterionEstimate, Method, Verdict, DEFAULT_GRID_POINTS,
};
use crate::diagnostics::{
    condensate_profile, default_fit_window, degree_histogram, fitness_landscape, hill_exponent, survival,
    tail_exponent, top_decile_degree_share, tv_distance, uniform_h_grid, DegreeHistogram, Normalization, TailMethod,
};
use crate::error::{Error, Result};
use crate::graph::{partition_function, ModelKind, Simulation};
use crate::increments::{IncrementDistribution, SeedPlan, StreamRole};

/// One trial's histogram, keyed by (series, size), awaiting pooling.
type Pooled = ((String, usize), DegreeHistogram);

#[derive(Default)]
struct TrialOutput {
    raw: Vec<RawRecord>,
    artifacts: Vec<Artifact>,
    histograms: Vec<Pooled>,
}

impl TrialOutput {
    fn record(&mut self, series: &str, size: usize, statistic: &str, trial: u64, value: f64) {
        self.raw.push(RawRecord { series: series.into(), size, statistic: statistic.into(), trial, value });
    }
}

fn in_pool<T: Send>(options: &RunOptions, f: impl FnOnce() -> T + Send) -> Result<T> {
    match options.workers {
        None => Ok(f()),
        Some(0) => Err(Error::config("workers", "must be at least 1")),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::config("workers", e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

/// Runs every trial in parallel and concatenates outputs in trial order.
fn run_trials<F>(trials: usize, f: F) -> Result<Vec<TrialOutput>>
where
    F: Fn(u64) -> Result<TrialOutput> + Sync + Send,
{
    (0..trials as u64).into_par_iter().map(f).collect()
}

fn csv_artifact(path: String, write: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Artifact> {
    let mut contents = Vec::new();
    write(&mut contents)?;
    Ok(Artifact { path, contents })
}

fn spec_json(spec: &ExperimentSpec) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(spec)?)
}

fn grow(sim: &mut Simulation, size: usize, verify: bool) -> Result<()> {
    sim.grow_to(size)?;
    if verify {
        sim.check_invariants()?;
    }
    Ok(())
}

/// Dispatches on `spec.kind`.
pub fn run(spec: &ExperimentSpec, options: &RunOptions) -> Result<AggregateReport> {
    match spec.kind {
        ExperimentKind::TvCurve => run_tv_curve(spec, options),
        ExperimentKind::TailCompare => run_tail_compare(spec, options),
        ExperimentKind::LandscapeScan => run_landscape_scan(spec, options),
        ExperimentKind::CriterionScan => run_criterion_scan(spec, options),
        ExperimentKind::MStar => run_mstar(spec, options),
        ExperimentKind::R3Sweep => run_r3_sweep(spec, options),
    }
}

fn expect_kind(spec: &ExperimentSpec, kind: ExperimentKind) -> Result<Vec<String>> {
    if spec.kind != kind {
        return Err(Error::config("kind", format!("expected {kind}, got {}", spec.kind)));
    }
    spec.validate()
}

fn flatten(outputs: Vec<TrialOutput>) -> (Vec<RawRecord>, Vec<Artifact>, Vec<Pooled>) {
    let mut raw = Vec::new();
    let mut artifacts = Vec::new();
    let mut hists = Vec::new();
    for o in outputs {
        raw.extend(o.raw);
        artifacts.extend(o.artifacts);
        hists.extend(o.histograms);
    }
    (raw, artifacts, hists)
}

/// Quenched TV curve: model A keeps its fitness realization across trials
/// while attachment is re-drawn; model B is rebuilt per trial.
pub fn run_tv_curve(spec: &ExperimentSpec, options: &RunOptions) -> Result<AggregateReport> {
    let warnings = expect_kind(spec, ExperimentKind::TvCurve)?;
    let (model_a, model_b) = (spec.model_a.expect("validated"), spec.model_b.expect("validated"));
    let series = format!("{model_a} vs {model_b}");
    let max = *spec.sizes.last().expect("validated");
    let verify = spec.diagnostics.verify;
    let outputs = in_pool(options, || {
        run_trials(spec.trials, |trial| {
            let (pa, pb) = spec.seed_plans(trial);
            let mut a = Simulation::with_capacity(model_a, pa, max)?;
            let mut b = Simulation::with_capacity(model_b, pb, max)?;
            let mut out = TrialOutput::default();
            for &size in &spec.sizes {
                grow(&mut a, size, verify)?;
                grow(&mut b, size, verify)?;
                let tv = tv_distance(&degree_histogram(a.tree()), &degree_histogram(b.tree()))?;
                out.record(&series, size, "tv", trial, tv);
            }
            Ok(out)
        })
    })??;
    let (raw, artifacts, _) = flatten(outputs);
    let mut report = AggregateReport::new(spec_json(spec)?, warnings.clone(), raw, serde_json::Value::Null, artifacts);
    let curve: Vec<serde_json::Value> = report
        .summary
        .iter()
        .map(|r| json!({"size": r.size, "mean_tv": r.mean, "std_error": r.std_error}))
        .collect();
    let means: Vec<f64> = report.summary.iter().map(|r| r.mean).collect();
    let floor = spec.diagnostics.tv_floor;
    report.details = json!({
        "pair": series,
        "negative_control": !warnings.is_empty() && warnings.iter().any(|w| w.contains("negative control")),
        "tv_floor": floor,
        "curve": curve,
        "decreasing_first_to_last": means.len() > 1 && means.last() < means.first(),
        "above_floor_at_all_sizes": means.iter().all(|&m| m > floor),
    });
    Ok(report)
}

fn fit_tail(h: &DegreeHistogram, spec: &ExperimentSpec) -> Result<crate::diagnostics::TailFit> {
    let k_min = spec.diagnostics.k_min;
    let k_max = spec.diagnostics.k_max.unwrap_or_else(|| default_fit_window(h).1);
    match spec.diagnostics.tail_method {
        TailMethod::Ols => tail_exponent(&survival(h), k_min, k_max),
        TailMethod::Hill => hill_exponent(h, k_min, k_max),
    }
}

/// Survival curves and tail exponents per model and size.
pub fn run_tail_compare(spec: &ExperimentSpec, options: &RunOptions) -> Result<AggregateReport> {
    let warnings = expect_kind(spec, ExperimentKind::TailCompare)?;
    let models = spec.graph_models();
    let max = *spec.sizes.last().expect("validated");
    let verify = spec.diagnostics.verify;
    let outputs = in_pool(options, || {
        run_trials(spec.trials, |trial| {
            let (pa, pb) = spec.seed_plans(trial);
            let mut out = TrialOutput::default();
            for (name, model) in &models {
                let plan = if name == "model_a" { pa } else { pb };
                let mut sim = Simulation::with_capacity(*model, plan, max)?;
                for &size in &spec.sizes {
                    grow(&mut sim, size, verify)?;
                    let h = degree_histogram(sim.tree());
                    let fit = fit_tail(&h, spec)?;
                    out.record(name, size, "tau", trial, fit.tau);
                    out.record(name, size, "r_squared", trial, fit.r_squared);
                    out.record(name, size, "fit_points", trial, fit.points as f64);
                    out.record(name, size, "k_max", trial, fit.k_max as f64);
                    out.record(name, size, "max_degree", trial, h.max_degree() as f64);
                    out.histograms.push(((name.clone(), size), h));
                }
            }
            Ok(out)
        })
    })??;
    let (raw, mut artifacts, hists) = flatten(outputs);
    // pooled over trials, in (model, size) order
    let mut pooled: Vec<((String, usize), DegreeHistogram)> = Vec::new();
    for (key, h) in hists {
        match pooled.iter_mut().find(|(k, _)| *k == key) {
            Some((_, acc)) => {
                for (&k, &c) in &h.counts {
                    *acc.counts.entry(k).or_insert(0) += c;
                }
                acc.n += h.n;
            }
            None => pooled.push((key, h)),
        }
    }
    for ((name, size), h) in &pooled {
        artifacts.push(csv_artifact(format!("histogram_{name}_t{size}.csv"), |w| h.write_csv(w))?);
        artifacts.push(csv_artifact(format!("survival_{name}_t{size}.csv"), |w| survival(h).write_csv(w))?);
    }
    let mut report = AggregateReport::new(spec_json(spec)?, warnings, raw, serde_json::Value::Null, artifacts);
    let fits: Vec<serde_json::Value> = models
        .iter()
        .flat_map(|(name, model)| {
            let report = &report;
            spec.sizes.iter().map(move |&size| {
                let tau = report.summary_row(name, size, "tau");
                json!({
                    "series": name, "model": model.to_string(), "size": size,
                    "tau_mean": tau.map(|r| r.mean), "tau_std_error": tau.map(|r| r.std_error),
                })
            })
        })
        .collect();
    report.details = json!({ "method": spec.diagnostics.tail_method, "fits": fits });
    Ok(report)
}

#[derive(Clone, Copy)]
struct LandscapeSeries<'a> {
    name: &'a str,
    model: ModelKind,
    plan: SeedPlan,
}

fn landscape_trial(series: &[LandscapeSeries<'_>], spec: &ExperimentSpec, trial: u64) -> Result<TrialOutput> {
    let max = *spec.sizes.last().expect("validated");
    let d = &spec.diagnostics;
    let mut out = TrialOutput::default();
    for s in series {
        let mut sim = Simulation::with_capacity(s.model, s.plan, max)?;
        for &size in &spec.sizes {
            grow(&mut sim, size, d.verify)?;
            let (tree, fitness) = (sim.tree(), sim.fitness_values());
            let raw = fitness_landscape(tree, fitness, d.bins, Normalization::Raw, None)?;
            let max_f = fitness.iter().copied().fold(0.0, f64::max);
            out.record(s.name, size, "max_fitness", trial, max_f);
            out.record(s.name, size, "top_decile_share", trial, top_decile_degree_share(tree, fitness)?);
            out.record(s.name, size, "spike_bin", trial, raw.spike_bin() as f64);
            out.record(s.name, size, "spike_ratio", trial, raw.spike_ratio());
            out.record(s.name, size, "spike_enrichment", trial, raw.spike_enrichment());
            if (trial as usize) < d.export_trials {
                let h = upper_endpoint(&s.model, size);
                let profile = condensate_profile(tree, fitness, &uniform_h_grid(h, d.h_grid_points), h)?;
                let xi = fitness_landscape(tree, fitness, d.bins, Normalization::Xi, None)?;
                let dir = format!("landscape/{}/t{size}/trial{trial}", s.name);
                out.artifacts.push(csv_artifact(format!("{dir}/landscape_raw.csv"), |w| raw.write_csv(w))?);
                out.artifacts.push(csv_artifact(format!("{dir}/landscape_xi.csv"), |w| xi.write_csv(w))?);
                out.artifacts.push(csv_artifact(format!("{dir}/fitness_nodes.csv"), |w| raw.write_node_counts_csv(w))?);
                out.artifacts.push(csv_artifact(format!("{dir}/profile.csv"), |w| profile.write_csv(w))?);
            }
        }
    }
    Ok(out)
}

/// Fitness landscapes, condensate profiles and summary statistics at every
/// checkpoint size.
pub fn run_landscape_scan(spec: &ExperimentSpec, options: &RunOptions) -> Result<AggregateReport> {
    let warnings = expect_kind(spec, ExperimentKind::LandscapeScan)?;
    let models = spec.graph_models();
    let outputs = in_pool(options, || {
        run_trials(spec.trials, |trial| {
            let (pa, pb) = spec.seed_plans(trial);
            let series: Vec<LandscapeSeries> = models
                .iter()
                .map(|(name, model)| LandscapeSeries { name, model: *model, plan: if name == "model_a" { pa } else { pb } })
                .collect();
            landscape_trial(&series, spec, trial)
        })
    })??;
    let (raw, artifacts, _) = flatten(outputs);
    let mut report = AggregateReport::new(spec_json(spec)?, warnings, raw, serde_json::Value::Null, artifacts);
    report.details = landscape_details(&report, &models, &spec.sizes);
    Ok(report)
}

fn landscape_details(report: &AggregateReport, series: &[(String, ModelKind)], sizes: &[usize]) -> serde_json::Value {
    let rows: Vec<serde_json::Value> = series
        .iter()
        .flat_map(|(name, model)| {
            sizes.iter().map(move |&size| {
                let stat = |s: &str| report.summary_row(name, size, s).map(|r| r.mean);
                json!({
                    "series": name, "model": model.to_string(), "size": size,
                    "max_fitness": stat("max_fitness"), "top_decile_share": stat("top_decile_share"),
                    "spike_ratio": stat("spike_ratio"), "spike_enrichment": stat("spike_enrichment"),
                })
            })
        })
        .collect();
    json!({ "summaries": rows })
}

/// Landscape scans across R3 schedules sharing one increment realization.
pub fn run_r3_sweep(spec: &ExperimentSpec, options: &RunOptions) -> Result<AggregateReport> {
    let warnings = expect_kind(spec, ExperimentKind::R3Sweep)?;
    let models = spec.graph_models();
    let outputs = in_pool(options, || {
        run_trials(spec.trials, |trial| {
            let plan = spec.seed_plans(trial).0;
            let series: Vec<LandscapeSeries> =
                models.iter().map(|(name, model)| LandscapeSeries { name, model: *model, plan }).collect();
            landscape_trial(&series, spec, trial)
        })
    })??;
    let (raw, artifacts, _) = flatten(outputs);
    let mut report = AggregateReport::new(spec_json(spec)?, warnings, raw, serde_json::Value::Null, artifacts);
    let mut details = landscape_details(&report, &models, &spec.sizes);
    let last = *spec.sizes.last().expect("validated");
    let mut ranking: Vec<(String, f64, f64)> = models
        .iter()
        .map(|(name, _)| {
            let stat = |s: &str| report.summary_row(name, last, s).map_or(f64::NAN, |r| r.mean);
            (name.clone(), stat("spike_ratio"), stat("spike_enrichment"))
        })
        .collect();
    ranking.sort_by(|a, b| b.1.total_cmp(&a.1));
    details["ranking_by_spike_ratio"] = json!(ranking.iter().map(|r| &r.0).collect::<Vec<_>>());
    ranking.sort_by(|a, b| b.2.total_cmp(&a.2));
    details["ranking_by_spike_enrichment"] = json!(ranking.iter().map(|r| &r.0).collect::<Vec<_>>());
    details["size"] = json!(last);
    report.details = details;
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CriterionRow {
    dist: String,
    estimate: CriterionEstimate,
    verdict: Verdict,
    resolved: bool,
}

fn criterion_row(spec: &ExperimentSpec, dist: &IncrementDistribution, m: usize) -> Result<CriterionRow> {
    let c = &spec.criterion;
    let (estimate, resolved) = match c.method {
        CriterionMethod::Mc => {
            let plan = SeedPlan::new(spec.master_seed, m as u64, StreamRole::Analysis);
            (criterion_mc(dist, m, c.n_samples, plan)?, true)
        }
        CriterionMethod::Quadrature => {
            let grid = c.grid_points.unwrap_or_else(|| scan_grid_points(m));
            match criterion_quadrature(dist, m, grid) {
                Ok(est) => (est, true),
                Err(Error::ResolutionInsufficient { .. }) => {
                    let bracket = criterion_bracket(dist, m, grid)?;
                    let est = CriterionEstimate {
                        m,
                        value: bracket.midpoint(),
                        std_error: 0.0,
                        method: Method::GridConvolution,
                        bracket: Some(bracket),
                    };
                    (est, false)
                }
                Err(e) => return Err(e),
            }
        }
    };
    Ok(CriterionRow { dist: dist.to_string(), verdict: estimate.verdict(c.precision), estimate, resolved })
}

fn criterion_csv(rows: &[CriterionRow]) -> Result<Vec<u8>> {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["m", "value", "error", "method", "lower", "upper", "verdict", "resolved", "dist"])?;
    for r in rows {
        let e = &r.estimate;
        let (lo, hi) = e.interval();
        out.write_record([
            e.m.to_string(),
            e.value.to_string(),
            e.error().to_string(),
            e.method.to_string(),
            lo.to_string(),
            hi.to_string(),
            format!("{:?}", r.verdict),
            r.resolved.to_string(),
            r.dist.clone(),
        ])?;
    }
    into_bytes(out)
}

/// Criterion values over `m_min..=m_max` for each law, plus an optional
/// Beta verdict matrix at `m = 1`.
pub fn run_criterion_scan(spec: &ExperimentSpec, options: &RunOptions) -> Result<AggregateReport> {
    let warnings = expect_kind(spec, ExperimentKind::CriterionScan)?;
    let c = &spec.criterion;
    let m_max = c.m_max.unwrap_or(10.max(c.m_min));
    let jobs: Vec<(IncrementDistribution, usize)> =
        c.dists.iter().flat_map(|d| (c.m_min..=m_max).map(move |m| (*d, m))).collect();
    let (rows, matrix) = in_pool(options, || -> Result<_> {
        let rows: Vec<CriterionRow> = jobs.par_iter().map(|(d, m)| criterion_row(spec, d, *m)).collect::<Result<_>>()?;
        let matrix: Vec<serde_json::Value> = c
            .beta_grid
            .par_iter()
            .map(|&(a, b)| -> Result<serde_json::Value> {
                let dist = IncrementDistribution::beta(a, b)?;
                let bracket = criterion_bracket(&dist, 1, c.grid_points.unwrap_or(DEFAULT_GRID_POINTS))?;
                let est = CriterionEstimate {
                    m: 1,
                    value: bracket.midpoint(),
                    std_error: 0.0,
                    method: Method::GridConvolution,
                    bracket: Some(bracket),
                };
                let verdict = est.verdict(c.precision);
                let expected = b > a + 1.0;
                Ok(json!({
                    "alpha": a, "beta": b, "closed_form": beta_bb1_closed_form(a, b)?,
                    "lower": bracket.lower, "upper": bracket.upper, "verdict": verdict,
                    "expected_condensing": expected,
                    "matches": (verdict == Verdict::Condensing) == expected && verdict != Verdict::Boundary,
                }))
            })
            .collect::<Result<_>>()?;
        Ok((rows, matrix))
    })??;
    let mut artifacts = vec![Artifact { path: "criterion.csv".into(), contents: criterion_csv(&rows)? }];
    if !matrix.is_empty() {
        let mut out = csv::Writer::from_writer(Vec::new());
        out.write_record(["alpha", "beta", "closed_form", "lower", "upper", "verdict", "expected_condensing", "matches"])?;
        for v in &matrix {
            let f = |k: &str| match &v[k] {
                serde_json::Value::String(s) => s.clone(),
                serde_json::Value::Null => "inf".into(),
                other => other.to_string(),
            };
            out.write_record(
                ["alpha", "beta", "closed_form", "lower", "upper", "verdict", "expected_condensing", "matches"].map(f),
            )?;
        }
        artifacts.push(Artifact { path: "beta_verdicts.csv".into(), contents: into_bytes(out)? });
    }
    let verdicts = json!({ "rows": rows, "beta_matrix": matrix });
    artifacts.push(Artifact { path: "verdicts.json".into(), contents: to_json(&verdicts)? });
    Ok(AggregateReport::new(spec_json(spec)?, warnings, Vec::new(), verdicts, artifacts))
}

/// `find_mstar` per law.
pub fn run_mstar(spec: &ExperimentSpec, options: &RunOptions) -> Result<AggregateReport> {
    let warnings = expect_kind(spec, ExperimentKind::MStar)?;
    let c = &spec.criterion;
    let m_max = c.m_max.unwrap_or(50);
    let results = in_pool(options, || -> Result<Vec<_>> {
        c.dists
            .par_iter()
            .map(|d| find_mstar(d, m_max, c.precision).map(|r| (d.to_string(), r)))
            .collect()
    })??;
    let mut scan_rows = Vec::new();
    for (dist, r) in &results {
        for est in &r.scan {
            scan_rows.push(CriterionRow { dist: dist.clone(), estimate: *est, verdict: est.verdict(c.precision), resolved: true });
        }
    }
    let records: Vec<serde_json::Value> =
        results.iter().map(|(dist, r)| json!({ "dist": dist, "verdict": r.verdict, "scan": r.scan })).collect();
    let details = json!({ "precision": c.precision, "m_max": m_max, "results": records });
    let artifacts = vec![
        Artifact { path: "mstar.json".into(), contents: to_json(&details)? },
        Artifact { path: "mstar_scan.csv".into(), contents: criterion_csv(&scan_rows)? },
    ];
    Ok(AggregateReport::new(spec_json(spec)?, warnings, Vec::new(), details, artifacts))
}

/// One build with its exports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimulateSpec {
    pub model: ModelKind,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub trial: u64,
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_verify")]
    pub verify: bool,
}

fn default_bins() -> usize {
    crate::diagnostics::DEFAULT_BINS
}
fn default_verify() -> bool {
    true
}

/// Grows one tree and exports `tree.csv` (node, parent, degree, fitness),
/// its histogram, survival curve and raw landscape.
pub fn run_simulate(spec: &SimulateSpec) -> Result<AggregateReport> {
    if spec.n < 2 {
        return Err(Error::config("n", format!("must be at least 2, got {}", spec.n)));
    }
    let mut warnings = Vec::new();
    if spec.model.is_quadratic() && spec.n > super::QUADRATIC_SIZE_WARNING {
        warnings.push(format!("{} costs Θ(t²); n = {} is slow", spec.model, spec.n));
    }
    let plan = SeedPlan::new(spec.seed, spec.trial, StreamRole::Attachment);
    let mut sim = Simulation::with_capacity(spec.model, plan, spec.n)?;
    grow(&mut sim, spec.n, spec.verify)?;
    let (tree, fitness) = (sim.tree(), sim.fitness_values());
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(["node", "parent", "degree", "fitness"])?;
    for (v, f) in fitness.iter().enumerate().take(tree.t()) {
        out.write_record([
            (v + 1).to_string(),
            tree.parents()[v].to_string(),
            tree.degrees()[v].to_string(),
            f.to_string(),
        ])?;
    }
    let h = degree_histogram(tree);
    let landscape = fitness_landscape(tree, fitness, spec.bins, Normalization::Raw, None)?;
    let artifacts = vec![
        Artifact { path: "tree.csv".into(), contents: into_bytes(out)? },
        csv_artifact("histogram.csv".into(), |w| h.write_csv(w))?,
        csv_artifact("survival.csv".into(), |w| survival(&h).write_csv(w))?,
        csv_artifact("landscape.csv".into(), |w| landscape.write_csv(w))?,
    ];
    let name = spec.model.to_string();
    let z = partition_function(tree, fitness)?;
    let mut raw = Vec::new();
    let mut rec = |stat: &str, value: f64| {
        raw.push(RawRecord { series: name.clone(), size: spec.n, statistic: stat.into(), trial: spec.trial, value })
    };
    rec("max_degree", h.max_degree() as f64);
    rec("max_fitness", fitness.iter().copied().fold(0.0, f64::max));
    rec("partition_function", z);
    rec("top_decile_share", top_decile_degree_share(tree, fitness)?);
    let details = json!({ "model": name, "n": spec.n, "seed": spec.seed, "trial": spec.trial });
    Ok(AggregateReport::new(serde_json::to_value(spec)?, warnings, raw, details, artifacts))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::MSchedule;

    fn base(kind: ExperimentKind) -> ExperimentSpec {
        let mut s = ExperimentSpec::new(kind);
        s.master_seed = 11;
        s.trials = 4;
        s
    }

    #[test]
    fn identical_models_with_shared_seeds_have_zero_tv() {
        let mut s = base(ExperimentKind::TvCurve);
        s.model_a = Some(ModelKind::BarabasiAlbert);
        s.model_b = Some(ModelKind::BarabasiAlbert);
        s.b_seeding = super::super::BSeeding::Shared;
        s.sizes = vec![50, 500];
        let r = run_tv_curve(&s, &RunOptions::default()).unwrap();
        assert!(r.raw.iter().all(|x| x.value == 0.0));
        assert_eq!(r.raw.len(), 8);
        s.b_seeding = super::super::BSeeding::Independent;
        let r = run_tv_curve(&s, &RunOptions::default()).unwrap();
        assert!(r.raw.iter().any(|x| x.value > 0.0));
    }

    #[test]
    fn worker_count_does_not_change_outputs() {
        let mut s = base(ExperimentKind::R3Sweep);
        s.sizes = vec![200, 800];
        s.schedules = vec![MSchedule::Log2Floor, MSchedule::Linear];
        s.dist = Some(IncrementDistribution::Uniform01);
        s.diagnostics.export_trials = 2;
        let one = run(&s, &RunOptions { workers: Some(1) }).unwrap();
        let four = run(&s, &RunOptions { workers: Some(4) }).unwrap();
        assert_eq!(one.raw_csv().unwrap(), four.raw_csv().unwrap());
        assert_eq!(one.artifacts, four.artifacts);
    }

    #[test]
    fn criterion_scan_rows() {
        let mut s = base(ExperimentKind::CriterionScan);
        s.criterion.dists = vec![IncrementDistribution::beta(1.0, 3.0).unwrap(), IncrementDistribution::Uniform01];
        s.criterion.m_max = Some(3);
        s.criterion.beta_grid = vec![(1.0, 3.0), (3.0, 1.0)];
        let r = run_criterion_scan(&s, &RunOptions::default()).unwrap();
        let csv = String::from_utf8(r.artifacts[0].contents.clone()).unwrap();
        assert_eq!(csv.lines().count(), 7);
        // Uniform at m = 1 diverges
        assert!(csv.lines().any(|l| l.starts_with("1,inf,") && l.ends_with("false,uniform")), "{csv}");
        let matrix = r.details["beta_matrix"].as_array().unwrap();
        assert!(matrix.iter().all(|v| v["matches"] == json!(true)));
    }

    #[test]
    fn simulate_exports() {
        let spec = SimulateSpec { model: ModelKind::BarabasiAlbert, n: 100, seed: 7, trial: 0, bins: 10, verify: true };
        let r = run_simulate(&spec).unwrap();
        let tree = String::from_utf8(r.artifacts[0].contents.clone()).unwrap();
        assert_eq!(tree.lines().count(), 101);
        assert!(tree.starts_with("node,parent,degree,fitness\n1,0,"));
        assert!(r.manifest.artifacts.contains(&"tree.csv".to_string()));
        assert!(run_simulate(&SimulateSpec { n: 1, ..spec }).unwrap_err().is_config());
    }
}
