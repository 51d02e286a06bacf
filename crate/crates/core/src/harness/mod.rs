//! Experiment orchestration: JSON experiment specs, parallel trials with
//! scheduler-independent seeding, aggregate reports and flat-file exports.

mod experiments;
mod report;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::condensation::DEFAULT_PRECISION;
use crate::diagnostics::{TailMethod, DEFAULT_BINS, DEFAULT_K_MIN};
use crate::error::{Error, Result};
use crate::fitness::{MSchedule, Regime};
use crate::graph::ModelKind;
use crate::increments::{mix64, IncrementDistribution, SeedPlan, StreamRole};

pub use experiments::{
    run, run_criterion_scan, run_landscape_scan, run_mstar, run_r3_sweep, run_simulate, run_tail_compare,
    run_tv_curve, SimulateSpec,
};
pub use report::{AggregateReport, Artifact, Manifest, RawRecord, SummaryRow};

/// Environment variable naming the default root for experiment outputs.
pub const OUTPUT_ROOT_ENV: &str = "DYNFIT_OUTPUT_ROOT";
/// R1 and dense R3 cost `Θ(t²)`; sizes beyond this draw a warning.
pub const QUADRATIC_SIZE_WARNING: usize = 50_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[serde(alias = "TvCurve")]
    TvCurve,
    #[serde(alias = "TailCompare")]
    TailCompare,
    #[serde(alias = "LandscapeScan")]
    LandscapeScan,
    #[serde(alias = "CriterionScan")]
    CriterionScan,
    #[serde(rename = "mstar", alias = "MStar")]
    MStar,
    #[serde(alias = "R3Sweep")]
    R3Sweep,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ExperimentKind::TvCurve => "tv_curve",
            ExperimentKind::TailCompare => "tail_compare",
            ExperimentKind::LandscapeScan => "landscape_scan",
            ExperimentKind::CriterionScan => "criterion_scan",
            ExperimentKind::MStar => "mstar",
            ExperimentKind::R3Sweep => "r3_sweep",
        })
    }
}

/// How the comparison model of a TV curve is seeded.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BSeeding {
    /// Fresh fitness and attachment streams for every trial.
    #[default]
    Independent,
    /// Exactly the streams of model A (identical models give identical trees).
    Shared,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnosticsOptions {
    #[serde(default = "default_bins")]
    pub bins: usize,
    #[serde(default = "default_k_min")]
    pub k_min: u64,
    /// Defaults to max degree / 10.
    #[serde(default)]
    pub k_max: Option<u64>,
    #[serde(default = "default_tail_method")]
    pub tail_method: TailMethod,
    #[serde(default = "default_h_grid_points")]
    pub h_grid_points: usize,
    /// Trials whose per-trial landscape files are written.
    #[serde(default = "default_export_trials")]
    pub export_trials: usize,
    /// Floor for the "TV does not approach zero" negative control.
    #[serde(default = "default_tv_floor")]
    pub tv_floor: f64,
    /// Check structural invariants at every checkpoint.
    #[serde(default = "default_true")]
    pub verify: bool,
}

fn default_bins() -> usize {
    DEFAULT_BINS
}
fn default_k_min() -> u64 {
    DEFAULT_K_MIN
}
fn default_tail_method() -> TailMethod {
    TailMethod::Ols
}
fn default_h_grid_points() -> usize {
    20
}
fn default_export_trials() -> usize {
    1
}
fn default_tv_floor() -> f64 {
    0.05
}
fn default_true() -> bool {
    true
}
fn default_trials() -> usize {
    100
}

impl Default for DiagnosticsOptions {
    fn default() -> Self {
        DiagnosticsOptions {
            bins: DEFAULT_BINS,
            k_min: DEFAULT_K_MIN,
            k_max: None,
            tail_method: TailMethod::Ols,
            h_grid_points: 20,
            export_trials: 1,
            tv_floor: 0.05,
            verify: true,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriterionMethod {
    #[default]
    Quadrature,
    Mc,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriterionOptions {
    #[serde(default)]
    pub dists: Vec<IncrementDistribution>,
    #[serde(default = "default_m_min")]
    pub m_min: usize,
    /// Defaults to 10 for scans and 50 for m* searches.
    #[serde(default)]
    pub m_max: Option<usize>,
    #[serde(default)]
    pub method: CriterionMethod,
    /// Grid size for quadrature; defaults per `m` as in the m* scan.
    #[serde(default)]
    pub grid_points: Option<usize>,
    #[serde(default = "default_n_samples")]
    pub n_samples: usize,
    #[serde(default = "default_precision")]
    pub precision: f64,
    /// `(α, β)` pairs for a Beta verdict matrix at `m = 1`.
    #[serde(default)]
    pub beta_grid: Vec<(f64, f64)>,
}

fn default_m_min() -> usize {
    1
}
fn default_n_samples() -> usize {
    1_000_000
}
fn default_precision() -> f64 {
    DEFAULT_PRECISION
}

impl Default for CriterionOptions {
    fn default() -> Self {
        CriterionOptions {
            dists: Vec::new(),
            m_min: 1,
            m_max: None,
            method: CriterionMethod::Quadrature,
            grid_points: None,
            n_samples: default_n_samples(),
            precision: DEFAULT_PRECISION,
            beta_grid: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_a: Option<ModelKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_b: Option<ModelKind>,
    #[serde(default)]
    pub b_seeding: BSeeding,
    #[serde(default)]
    pub sizes: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub diagnostics: DiagnosticsOptions,
    #[serde(default)]
    pub criterion: CriterionOptions,
    /// R3 sweep schedules.
    #[serde(default)]
    pub schedules: Vec<MSchedule>,
    /// Increment law of the R3 sweep.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<IncrementDistribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentSpec {
            kind,
            model_a: None,
            model_b: None,
            b_seeding: BSeeding::Independent,
            sizes: Vec::new(),
            trials: default_trials(),
            master_seed: 0,
            diagnostics: DiagnosticsOptions::default(),
            criterion: CriterionOptions::default(),
            schedules: Vec::new(),
            dist: None,
            output_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: ExperimentSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    /// Checks the spec and returns warnings for permitted but suspicious
    /// settings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        let needs_graphs = matches!(
            self.kind,
            ExperimentKind::TvCurve | ExperimentKind::TailCompare | ExperimentKind::LandscapeScan | ExperimentKind::R3Sweep
        );
        if needs_graphs {
            if self.sizes.is_empty() {
                return Err(Error::config("sizes", "at least one size is required"));
            }
            if self.sizes[0] < 2 {
                return Err(Error::config("sizes", "sizes must be at least 2"));
            }
            if self.sizes.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::config("sizes", "must be strictly increasing"));
            }
        }
        let d = &self.diagnostics;
        if d.bins == 0 {
            return Err(Error::config("diagnostics.bins", "must be at least 1"));
        }
        if let Some(k_max) = d.k_max {
            if k_max < d.k_min {
                return Err(Error::config("diagnostics.k_max", "must be at least k_min"));
            }
        }
        if !(d.tv_floor >= 0.0 && d.tv_floor <= 1.0) {
            return Err(Error::config("diagnostics.tv_floor", "must lie in [0, 1]"));
        }
        for (name, model) in [("model_a", &self.model_a), ("model_b", &self.model_b)] {
            if let Some(m) = model {
                m.validate().map_err(|e| prefix(name, e))?;
            }
        }
        match self.kind {
            ExperimentKind::TvCurve => {
                let (a, b) = match (&self.model_a, &self.model_b) {
                    (Some(a), Some(b)) => (a, b),
                    (None, _) => return Err(Error::config("model_a", "required for tv_curve")),
                    (_, None) => return Err(Error::config("model_b", "required for tv_curve")),
                };
                if let (ModelKind::DynFit { regime: Regime::R2 { m: ma }, .. }, ModelKind::BBm { m: mb, .. }) = (a, b) {
                    if ma != mb {
                        warnings.push(format!(
                            "model_a is R2 with m = {ma} but model_b is BB({mb}); treated as a negative control"
                        ));
                    }
                }
            }
            ExperimentKind::TailCompare | ExperimentKind::LandscapeScan => {
                if self.model_a.is_none() {
                    return Err(Error::config("model_a", format!("required for {}", self.kind)));
                }
            }
            ExperimentKind::CriterionScan | ExperimentKind::MStar => {
                let c = &self.criterion;
                if c.dists.is_empty() && c.beta_grid.is_empty() {
                    return Err(Error::config("criterion.dists", "at least one increment law is required"));
                }
                for dist in &c.dists {
                    dist.validate().map_err(|e| prefix("criterion.dists", e))?;
                }
                for &(a, b) in &c.beta_grid {
                    IncrementDistribution::beta(a, b).map_err(|e| prefix("criterion.beta_grid", e))?;
                }
                if c.m_min == 0 {
                    return Err(Error::config("criterion.m_min", "must be at least 1"));
                }
                if let Some(m_max) = c.m_max {
                    if m_max < c.m_min {
                        return Err(Error::config("criterion.m_max", "must be at least m_min"));
                    }
                }
                if !(c.precision > 0.0 && c.precision < 1.0) {
                    return Err(Error::config("criterion.precision", "must lie in (0, 1)"));
                }
            }
            ExperimentKind::R3Sweep => {
                if self.schedules.is_empty() {
                    return Err(Error::config("schedules", "at least one schedule is required"));
                }
                if let Some(s) = self.schedules.iter().find(|s| matches!(s, MSchedule::ConstantTimesT(_))) {
                    return Err(Error::config("schedules", format!("`{s}` is not one of log2, sqrt, linear")));
                }
                match self.dist {
                    Some(d) => d.validate().map_err(|e| prefix("dist", e))?,
                    None => return Err(Error::config("dist", "required for r3_sweep")),
                }
            }
        }
        let max_size = self.sizes.last().copied().unwrap_or(0);
        if max_size > QUADRATIC_SIZE_WARNING {
            let quadratic: Vec<String> = self
                .graph_models()
                .into_iter()
                .filter(|(_, m)| m.is_quadratic())
                .map(|(name, m)| format!("{name} ({m})"))
                .collect();
            if !quadratic.is_empty() {
                warnings.push(format!(
                    "{} cost Θ(t²) per build; sizes above {QUADRATIC_SIZE_WARNING} are slow",
                    quadratic.join(", ")
                ));
            }
        }
        Ok(warnings)
    }

    /// Every model built by this spec, labelled.
    pub fn graph_models(&self) -> Vec<(String, ModelKind)> {
        match self.kind {
            ExperimentKind::R3Sweep => match self.dist {
                Some(dist) => self
                    .schedules
                    .iter()
                    .map(|&s| (s.to_string(), ModelKind::DynFit { regime: Regime::r3(s), dist }))
                    .collect(),
                None => Vec::new(),
            },
            ExperimentKind::CriterionScan | ExperimentKind::MStar => Vec::new(),
            _ => [("model_a", self.model_a), ("model_b", self.model_b)]
                .into_iter()
                .filter_map(|(n, m)| m.map(|m| (n.to_string(), m)))
                .collect(),
        }
    }

    /// Seeds of trial `trial` for model A (quenched fitness) and model B.
    pub fn seed_plans(&self, trial: u64) -> (SeedPlan, SeedPlan) {
        let a = SeedPlan::new(self.master_seed, trial, StreamRole::Attachment);
        let b = match self.b_seeding {
            BSeeding::Shared => a,
            BSeeding::Independent => SeedPlan::new(model_b_master(self.master_seed, trial), trial, StreamRole::Attachment),
        };
        (a, b)
    }

    /// Output directory: the spec's own, else `$DYNFIT_OUTPUT_ROOT/<kind>-seed<seed>`.
    pub fn resolve_output_dir(&self) -> Option<PathBuf> {
        self.output_dir.clone().or_else(|| {
            std::env::var_os(OUTPUT_ROOT_ENV)
                .map(|root| PathBuf::from(root).join(format!("{}-seed{}", self.kind, self.master_seed)))
        })
    }
}

/// Master seed of model B's streams in trial `trial` (independent seeding).
pub fn model_b_master(master_seed: u64, trial: u64) -> u64 {
    mix64(mix64(master_seed ^ 0x006d_6f64_656c_5f62) ^ trial)
}

fn prefix(field: &str, e: Error) -> Error {
    match e {
        Error::Config { field: inner, message } => Error::config(format!("{field}.{inner}"), message),
        other => other,
    }
}

/// Fitness-law upper endpoint `h` at size `t`: the largest value `F_t` can take.
pub fn upper_endpoint(model: &ModelKind, t: usize) -> f64 {
    let hi = |d: &IncrementDistribution| match d {
        IncrementDistribution::Constant { value } => *value,
        _ => 1.0,
    };
    match model {
        ModelKind::BarabasiAlbert => 1.0,
        ModelKind::BBm { m, dist } => *m as f64 * hi(dist),
        ModelKind::DynFit { regime, dist } => regime.window(t).min(t.saturating_sub(1)).max(1) as f64 * hi(dist),
    }
}

/// Runtime knobs that do not affect results.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
}
