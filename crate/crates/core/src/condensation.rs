//! The static-fitness condensation criterion `E[X̄_m / (1 − X̄_m)] < 1`,
//! where `X̄_m` is the mean of `m` i.i.d. increments.
//!
//! Quadrature works on the law of `X̄_m` directly. Each increment is binned
//! into `N` uniform cells of `[0, 1]`; the cell-index sum `K` of `m` draws
//! pins `X̄_m` to `[K/(mN), (K+m)/(mN)]`. The joint law of `K` and the
//! partial first moment `E[X̄_m; K]` follow from FFT convolution of the cell
//! masses and first moments. With `g(x) = x/(1−x)` convex, Jensen gives a
//! lower bound per cell and the chord gives an upper bound. The single cell
//! touching 1 gets its upper bound from AM-GM:
//! `1/(1 − X̄) ≤ ∏ (1 − ε_i)^{−1/m}`.

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increments::{derive_substream, IncrementDistribution, SeedPlan};

pub const MIN_GRID_POINTS: usize = 1 << 10;
pub const DEFAULT_GRID_POINTS: usize = 1 << 14;
/// Largest half-gap accepted by [`criterion_quadrature`].
pub const DEFAULT_MAX_HALF_GAP: f64 = 5e-4;
pub const DEFAULT_PRECISION: f64 = 1e-3;
const MIN_MC_SAMPLES: usize = 1000;
const MC_CHUNK: usize = 1 << 16;
const MSTAR_FALLBACK_SAMPLES: usize = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "MC")]
    MonteCarlo,
    GridConvolution,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::MonteCarlo => "MC",
            Method::GridConvolution => "GridConvolution",
        })
    }
}

/// Rigorous enclosure of the criterion at one grid resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bracket {
    pub lower: f64,
    /// `+∞` when the top cell's tail moment diverges.
    pub upper: f64,
    pub grid_points: usize,
}

impl Bracket {
    pub fn half_gap(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.upper + self.lower)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionEstimate {
    pub m: usize,
    /// May be `+∞`.
    pub value: f64,
    /// Monte Carlo standard error; 0 for quadrature.
    pub std_error: f64,
    pub method: Method,
    pub bracket: Option<Bracket>,
}

impl CriterionEstimate {
    /// Standard error for MC, bracket half-gap for quadrature.
    pub fn error(&self) -> f64 {
        match self.bracket {
            Some(b) => b.half_gap(),
            None => self.std_error,
        }
    }

    /// Interval the criterion is taken to lie in: the bracket, or ±3 SE.
    pub fn interval(&self) -> (f64, f64) {
        match self.bracket {
            Some(b) => (b.lower, b.upper),
            None => (self.value - 3.0 * self.std_error, self.value + 3.0 * self.std_error),
        }
    }

    pub fn verdict(&self, precision: f64) -> Verdict {
        let (lo, hi) = self.interval();
        if hi < 1.0 - precision {
            Verdict::Condensing
        } else if lo > 1.0 + precision {
            Verdict::NonCondensing
        } else {
            Verdict::Boundary
        }
    }
}

/// Per-estimate call against the threshold 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Condensing,
    NonCondensing,
    /// Within `precision` of 1 (or not separable from it at the current
    /// error level); excluded from verdicts.
    Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NonCondensingReason {
    MeanAtLeastHalf,
    SearchExhausted { m_max: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MStarVerdict {
    Condensing { m_star: usize },
    NonCondensing { reason: NonCondensingReason },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MStarResult {
    pub verdict: MStarVerdict,
    /// Every estimate evaluated during the scan, in order of `m`.
    pub scan: Vec<CriterionEstimate>,
}

/// `g(x) = x / (1 − x)`.
fn g(x: f64) -> f64 {
    if x >= 1.0 {
        f64::INFINITY
    } else {
        x / (1.0 - x)
    }
}

/// Monte Carlo estimate over `n_samples` draws of `X̄_m`. Draws are split
/// into fixed chunks with their own substreams, so the result does not depend
/// on the thread count.
pub fn criterion_mc(dist: &IncrementDistribution, m: usize, n_samples: usize, plan: SeedPlan) -> Result<CriterionEstimate> {
    dist.validate()?;
    if m == 0 {
        return Err(Error::config("m", "must be at least 1"));
    }
    if n_samples < MIN_MC_SAMPLES {
        return Err(Error::config("n_samples", format!("must be at least {MIN_MC_SAMPLES}, got {n_samples}")));
    }
    let sampler = dist.sampler();
    let chunks = n_samples.div_ceil(MC_CHUNK);
    // (count, mean, M2) per chunk, merged in chunk order
    let parts: Vec<(f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = MC_CHUNK.min(n_samples - c * MC_CHUNK);
            let mut rng = derive_substream(plan, c as u64);
            let (mut mean, mut m2) = (0.0, 0.0);
            for k in 0..len {
                let mut s = 0.0;
                for _ in 0..m {
                    s += sampler.sample(&mut rng);
                }
                let y = g(s / m as f64);
                let d = y - mean;
                mean += d / (k + 1) as f64;
                m2 += d * (y - mean);
            }
            (len as f64, mean, m2)
        })
        .collect();
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for (nb, mb, m2b) in parts {
        let total = n + nb;
        let d = mb - mean;
        mean += d * nb / total;
        m2 += m2b + d * d * n * nb / total;
        n = total;
    }
    let std_error = if mean.is_finite() { (m2 / (n - 1.0) / n).sqrt() } else { f64::INFINITY };
    Ok(CriterionEstimate { m, value: mean, std_error, method: Method::MonteCarlo, bracket: None })
}

/// Lower and upper bounds on the criterion from an `N`-cell grid.
pub fn criterion_bracket(dist: &IncrementDistribution, m: usize, grid_points: usize) -> Result<Bracket> {
    dist.validate()?;
    if m == 0 {
        return Err(Error::config("m", "must be at least 1"));
    }
    if grid_points < MIN_GRID_POINTS {
        return Err(Error::config("grid_points", format!("must be at least {MIN_GRID_POINTS}, got {grid_points}")));
    }
    let n = grid_points;
    let h = 1.0 / n as f64;
    let mass: Vec<f64> = (0..n).map(|j| dist.cell_mass(j as f64 * h, (j + 1) as f64 * h)).collect();
    let moment: Vec<f64> = (0..n).map(|j| dist.cell_first_moment(j as f64 * h, (j + 1) as f64 * h)).collect();

    let top = m * (n - 1);
    let (p, r) = if m == 1 { (mass.clone(), moment.clone()) } else { convolve_powers(&mass, &moment, m, top + 1) };

    let scale = 1.0 / (m * n) as f64;
    let (mut lower, mut upper) = (0.0, 0.0);
    for k in 0..top {
        let pk = p[k];
        if !(pk > 0.0) {
            continue;
        }
        let a = k as f64 * scale;
        let b = (k + m) as f64 * scale;
        let mk = r[k].clamp(pk * a, pk * b);
        lower += pk * g(mk / pk);
        let slope = (g(b) - g(a)) / (b - a);
        upper += pk * g(a) + slope * (mk - pk * a);
    }
    // top cell: every increment in [1 − 1/N, 1]
    let a = (n - 1) as f64 * h;
    let p_top = mass[n - 1].powi(m as i32);
    if p_top > 0.0 {
        let mean_top = (moment[n - 1] / mass[n - 1]).clamp(a, 1.0);
        lower += p_top * g(mean_top);
        let tail = dist.upper_tail_moment(a, 1.0 / m as f64);
        upper += (tail.powi(m as i32) - p_top).max(0.0);
    }
    Ok(Bracket { lower, upper: upper.max(lower), grid_points })
}

/// `p^{*m}` and `p^{*(m−1)} * r`, truncated to `len` entries, via one FFT
/// of each input.
fn convolve_powers(p: &[f64], r: &[f64], m: usize, len: usize) -> (Vec<f64>, Vec<f64>) {
    let size = len.next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut fp: Vec<Complex64> = p.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fp.resize(size, Complex64::new(0.0, 0.0));
    let mut fr: Vec<Complex64> = r.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    fr.resize(size, Complex64::new(0.0, 0.0));
    fwd.process(&mut fp);
    fwd.process(&mut fr);
    for (a, b) in fp.iter_mut().zip(fr.iter_mut()) {
        let lower_power = a.powu((m - 1) as u32);
        *b *= lower_power;
        *a *= lower_power;
    }
    inv.process(&mut fp);
    inv.process(&mut fr);
    let norm = 1.0 / size as f64;
    // round-off leaves tiny negative values where the true mass is zero
    let out = |v: Vec<Complex64>| v[..len].iter().map(|c| (c.re * norm).max(0.0)).collect::<Vec<f64>>();
    (out(fp), out(fr))
}

/// Grid quadrature estimate: midpoint of the bracket, error = half-gap.
/// Fails with `ResolutionInsufficient` when the half-gap exceeds
/// [`DEFAULT_MAX_HALF_GAP`] (relative to `max(1, value)`), which includes
/// every case with a divergent upper bound.
pub fn criterion_quadrature(dist: &IncrementDistribution, m: usize, grid_points: usize) -> Result<CriterionEstimate> {
    criterion_quadrature_with(dist, m, grid_points, DEFAULT_MAX_HALF_GAP)
}

pub fn criterion_quadrature_with(
    dist: &IncrementDistribution,
    m: usize,
    grid_points: usize,
    max_half_gap: f64,
) -> Result<CriterionEstimate> {
    let bracket = criterion_bracket(dist, m, grid_points)?;
    let half_gap = bracket.half_gap();
    if !(half_gap.is_finite() && half_gap <= max_half_gap * bracket.midpoint().max(1.0)) {
        return Err(Error::ResolutionInsufficient {
            grid_points,
            half_gap,
            suggested_grid_points: grid_points.saturating_mul(4),
        });
    }
    Ok(CriterionEstimate {
        m,
        value: bracket.midpoint(),
        std_error: 0.0,
        method: Method::GridConvolution,
        bracket: Some(bracket),
    })
}

/// `E[ε/(1−ε)]` for `ε ~ Beta(α, β)`: `α/(β−1)` for `β > 1`, else `+∞`.
pub fn beta_bb1_closed_form(alpha: f64, beta: f64) -> Result<f64> {
    IncrementDistribution::beta(alpha, beta)?;
    Ok(if beta > 1.0 { alpha / (beta - 1.0) } else { f64::INFINITY })
}

/// `μ/(1 − μ)`, the `m → ∞` limit of the criterion.
pub fn limit_value(dist: &IncrementDistribution) -> f64 {
    g(dist.mean())
}

/// Grid size used by the m* scan: finer for small `m`, keeping `m·N` bounded.
pub fn scan_grid_points(m: usize) -> usize {
    ((1usize << 20) / m.max(1)).next_power_of_two().clamp(MIN_GRID_POINTS, DEFAULT_GRID_POINTS)
}

/// One criterion evaluation for a scan: quadrature at the scan grid, refined
/// up to 16× on a too-wide bracket, then Monte Carlo if the bracket still
/// cannot separate the value from 1.
pub fn scan_estimate(dist: &IncrementDistribution, m: usize, precision: f64, plan: SeedPlan) -> Result<CriterionEstimate> {
    let mut grid = scan_grid_points(m);
    let mut last = None;
    for _ in 0..3 {
        match criterion_quadrature(dist, m, grid) {
            Ok(est) => return Ok(est),
            Err(Error::ResolutionInsufficient { suggested_grid_points, .. }) => {
                let bracket = criterion_bracket(dist, m, grid)?;
                // a separated bracket already settles the verdict
                if bracket.lower > 1.0 + precision || bracket.upper < 1.0 - precision {
                    let est = CriterionEstimate {
                        m,
                        value: bracket.midpoint(),
                        std_error: 0.0,
                        method: Method::GridConvolution,
                        bracket: Some(bracket),
                    };
                    return Ok(est);
                }
                last = Some(bracket);
                grid = suggested_grid_points;
            }
            Err(e) => return Err(e),
        }
    }
    log::warn!("quadrature bracket {last:?} too wide at m = {m}; using Monte Carlo");
    criterion_mc(dist, m, MSTAR_FALLBACK_SAMPLES, plan)
}

/// Smallest `m ≤ m_max` whose criterion is certified below `1 − precision`.
/// The scan is linear and upward; values at the boundary do not stop it.
pub fn find_mstar(dist: &IncrementDistribution, m_max: usize, precision: f64) -> Result<MStarResult> {
    dist.validate()?;
    if m_max == 0 {
        return Err(Error::config("m_max", "must be at least 1"));
    }
    if !(precision > 0.0 && precision < 1.0) {
        return Err(Error::config("precision", format!("must lie in (0, 1), got {precision}")));
    }
    if limit_value(dist) >= 1.0 {
        return Ok(MStarResult {
            verdict: MStarVerdict::NonCondensing { reason: NonCondensingReason::MeanAtLeastHalf },
            scan: Vec::new(),
        });
    }
    let plan = SeedPlan::new(0x006d_7374_6172, 0, crate::increments::StreamRole::Analysis);
    let mut scan = Vec::new();
    for m in 1..=m_max {
        let est = scan_estimate(dist, m, precision, plan)?;
        scan.push(est);
        if est.verdict(precision) == Verdict::Condensing {
            return Ok(MStarResult { verdict: MStarVerdict::Condensing { m_star: m }, scan });
        }
    }
    Ok(MStarResult { verdict: MStarVerdict::NonCondensing { reason: NonCondensingReason::SearchExhausted { m_max } }, scan })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::increments::StreamRole;

    fn beta(a: f64, b: f64) -> IncrementDistribution {
        IncrementDistribution::beta(a, b).unwrap()
    }

    fn plan(seed: u64) -> SeedPlan {
        SeedPlan::new(seed, 0, StreamRole::Analysis)
    }

    #[test]
    fn degenerate_half_gives_one() {
        let half = IncrementDistribution::constant(0.5).unwrap();
        for m in [1, 3, 8] {
            let est = criterion_mc(&half, m, 2000, plan(1)).unwrap();
            assert_eq!(est.value, 1.0);
            assert_eq!(est.std_error, 0.0);
        }
    }

    #[test]
    fn mc_matches_closed_form() {
        let est = criterion_mc(&beta(1.0, 3.0), 1, 1_000_000, plan(2)).unwrap();
        assert!((est.value - 0.5).abs() < 4.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn mc_is_deterministic_and_validates() {
        let d = beta(1.0, 3.0);
        let a = criterion_mc(&d, 3, 100_000, plan(3)).unwrap();
        let b = criterion_mc(&d, 3, 100_000, plan(3)).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert!(criterion_mc(&d, 3, 999, plan(3)).is_err());
        assert!(criterion_mc(&d, 0, 1000, plan(3)).is_err());
    }

    #[test]
    fn quadrature_matches_closed_forms() {
        for (a, b) in [(1.0, 3.0), (1.0, 1.9), (2.0, 3.5), (1.0, 2.0)] {
            let est = criterion_quadrature(&beta(a, b), 1, DEFAULT_GRID_POINTS).unwrap();
            let exact = beta_bb1_closed_form(a, b).unwrap();
            let br = est.bracket.unwrap();
            assert!(br.lower <= exact + 1e-12 && exact <= br.upper + 1e-12, "{a},{b}: {br:?} vs {exact}");
            assert!((est.value - exact).abs() <= 1e-3, "{a},{b}: {} vs {exact}", est.value);
        }
    }

    #[test]
    fn quadrature_m2_matches_independent_double_integral() {
        // reference values from an independent 2-D adaptive integration
        let est = criterion_quadrature(&beta(1.0, 1.9), 2, DEFAULT_GRID_POINTS).unwrap();
        assert!((est.value - 0.679_406_020_688_669_3).abs() < 1e-3, "{est:?}");
        let est = criterion_quadrature(&beta(1.0, 3.0), 2, DEFAULT_GRID_POINTS).unwrap();
        assert!((est.value - 0.390_659_700_034_087_07).abs() < 1e-3, "{est:?}");
    }

    #[test]
    fn quadrature_agrees_with_mc() {
        let d = beta(1.0, 3.0);
        for m in [1, 2, 5] {
            let q = criterion_quadrature(&d, m, DEFAULT_GRID_POINTS).unwrap();
            let mc = criterion_mc(&d, m, 400_000, plan(10 + m as u64)).unwrap();
            assert!((q.value - mc.value).abs() <= 3.0 * (q.error() + mc.std_error), "m={m}: {q:?} {mc:?}");
        }
    }

    #[test]
    fn divergent_criterion_is_reported_as_insufficient_resolution() {
        for d in [IncrementDistribution::Uniform01, beta(3.0, 1.0), beta(1.0, 0.8)] {
            match criterion_quadrature(&d, 1, MIN_GRID_POINTS) {
                Err(Error::ResolutionInsufficient { half_gap, suggested_grid_points, .. }) => {
                    assert!(half_gap.is_infinite());
                    assert_eq!(suggested_grid_points, 4 * MIN_GRID_POINTS);
                }
                other => panic!("{d}: {other:?}"),
            }
        }
        assert!(criterion_quadrature(&beta(1.0, 3.0), 1, 512).is_err());
    }

    #[test]
    fn closed_form_and_limit_examples() {
        assert_eq!(beta_bb1_closed_form(1.0, 3.0).unwrap(), 0.5);
        assert!((beta_bb1_closed_form(1.0, 1.9).unwrap() - 1.0 / 0.9).abs() < 1e-15);
        assert_eq!(beta_bb1_closed_form(2.5, 3.5).unwrap(), 1.0);
        assert!(beta_bb1_closed_form(1.0, 0.5).unwrap().is_infinite());
        assert!(beta_bb1_closed_form(0.0, 2.0).is_err());
        assert_eq!(limit_value(&IncrementDistribution::Uniform01), 1.0);
        assert!((limit_value(&beta(1.0, 3.0)) - 1.0 / 3.0).abs() < 1e-15);
        assert!((limit_value(&beta(3.0, 1.0)) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn monotone_in_m_and_above_the_limit() {
        for d in [beta(1.0, 3.0), beta(1.0, 1.9), IncrementDistribution::GumbelClass, IncrementDistribution::Uniform01] {
            let limit = limit_value(&d);
            let mut prev = f64::INFINITY;
            let mut prev_err = 0.0;
            for m in 1..=30 {
                let b = criterion_bracket(&d, m, scan_grid_points(m)).unwrap();
                assert!(b.upper >= limit - 1e-9, "{d} m={m}: {b:?} below {limit}");
                if b.upper.is_finite() {
                    assert!(b.midpoint() <= prev + b.half_gap() + prev_err + 1e-9, "{d} m={m}");
                    prev = b.midpoint();
                    prev_err = b.half_gap();
                }
            }
        }
    }

    #[test]
    fn mstar_examples() {
        let r = find_mstar(&beta(3.0, 1.0), 50, DEFAULT_PRECISION).unwrap();
        assert_eq!(r.verdict, MStarVerdict::NonCondensing { reason: NonCondensingReason::MeanAtLeastHalf });
        assert!(r.scan.is_empty());
        let r = find_mstar(&beta(1.0, 3.0), 50, DEFAULT_PRECISION).unwrap();
        assert_eq!(r.verdict, MStarVerdict::Condensing { m_star: 1 });
        let r = find_mstar(&beta(1.0, 1.9), 50, DEFAULT_PRECISION).unwrap();
        assert_eq!(r.verdict, MStarVerdict::Condensing { m_star: 2 });
        assert_eq!(r.scan[0].verdict(DEFAULT_PRECISION), Verdict::NonCondensing);
        let r = find_mstar(&IncrementDistribution::Uniform01, 50, DEFAULT_PRECISION).unwrap();
        assert_eq!(r.verdict, MStarVerdict::NonCondensing { reason: NonCondensingReason::MeanAtLeastHalf });
        let r = find_mstar(&beta(1.0, 1.9), 1, DEFAULT_PRECISION).unwrap();
        assert_eq!(r.verdict, MStarVerdict::NonCondensing { reason: NonCondensingReason::SearchExhausted { m_max: 1 } });
    }
}
