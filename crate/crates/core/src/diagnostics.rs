//! Observables of a grown tree: degree histograms, total variation distance,
//! survival curves and tail exponents, fitness landscapes and the condensate
//! mass `M_h̃ / t`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::AttachmentTree;

/// Fewest survival points accepted by a tail fit.
pub const MIN_TAIL_POINTS: usize = 10;
pub const DEFAULT_K_MIN: u64 = 5;
pub const DEFAULT_BINS: usize = 50;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DegreeHistogram {
    pub counts: BTreeMap<u32, u64>,
    pub n: u64,
}

impl DegreeHistogram {
    pub fn from_counts(counts: impl IntoIterator<Item = (u32, u64)>) -> Self {
        let mut h = DegreeHistogram::default();
        for (k, c) in counts {
            if c > 0 {
                *h.counts.entry(k).or_insert(0) += c;
                h.n += c;
            }
        }
        h
    }

    pub fn from_degrees(degrees: &[u32]) -> Self {
        let mut counts = BTreeMap::new();
        for &d in degrees {
            *counts.entry(d).or_insert(0u64) += 1;
        }
        DegreeHistogram { counts, n: degrees.len() as u64 }
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn max_degree(&self) -> u32 {
        self.counts.keys().next_back().copied().unwrap_or(0)
    }

    pub fn pmf(&self, k: u32) -> f64 {
        self.counts.get(&k).map_or(0.0, |&c| c as f64 / self.n as f64)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["degree", "count"])?;
        for (k, c) in &self.counts {
            out.write_record([k.to_string(), c.to_string()])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn degree_histogram(tree: &AttachmentTree) -> DegreeHistogram {
    DegreeHistogram::from_degrees(tree.degrees())
}

/// `½ Σ_k |p_k − q_k|` over the union of supports.
pub fn tv_distance(h1: &DegreeHistogram, h2: &DegreeHistogram) -> Result<f64> {
    if h1.is_empty() || h2.is_empty() {
        return Err(Error::config("histogram", "total variation needs two nonempty histograms"));
    }
    let mut sum = 0.0;
    for k in h1.counts.keys().chain(h2.counts.keys().filter(|k| !h1.counts.contains_key(k))) {
        sum += (h1.pmf(*k) - h2.pmf(*k)).abs();
    }
    Ok((0.5 * sum).min(1.0))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SurvivalCurve {
    /// `(k, fraction of nodes with degree ≥ k)`, increasing in `k`.
    pub points: Vec<(u64, f64)>,
}

impl SurvivalCurve {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["k", "s"])?;
        for (k, s) in &self.points {
            out.write_record([k.to_string(), s.to_string()])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn survival(h: &DegreeHistogram) -> SurvivalCurve {
    let mut remaining = h.n;
    let mut points = Vec::with_capacity(h.counts.len());
    for (&k, &c) in &h.counts {
        points.push((k as u64, remaining as f64 / h.n as f64));
        remaining -= c;
    }
    SurvivalCurve { points }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TailMethod {
    Ols,
    Hill,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub tau: f64,
    /// Coefficient of determination of the log-log fit (NaN for Hill).
    pub r_squared: f64,
    pub points: usize,
    pub k_min: u64,
    pub k_max: u64,
    pub method: TailMethod,
}

/// Default fit window `[5, max degree / 10]`.
pub fn default_fit_window(h: &DegreeHistogram) -> (u64, u64) {
    (DEFAULT_K_MIN, h.max_degree() as u64 / 10)
}

/// Negated OLS slope of `ln s` against `ln k` over `k ∈ [k_min, k_max]`.
pub fn tail_exponent(curve: &SurvivalCurve, k_min: u64, k_max: u64) -> Result<TailFit> {
    let pts: Vec<(f64, f64)> = curve
        .points
        .iter()
        .filter(|&&(k, s)| k >= k_min && k <= k_max && k > 0 && s > 0.0)
        .map(|&(k, s)| ((k as f64).ln(), s.ln()))
        .collect();
    if pts.len() < MIN_TAIL_POINTS {
        return Err(Error::InsufficientTail { needed: MIN_TAIL_POINTS, found: pts.len(), k_min, k_max });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in &pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Ok(TailFit { tau: -slope, r_squared, points: pts.len(), k_min, k_max, method: TailMethod::Ols })
}

/// Discrete Hill estimator on degrees in `[k_min, k_max]`, with the usual
/// half-unit continuity shift: `τ̂ = n / Σ ln(k_i / (k_min − ½))`.
pub fn hill_exponent(h: &DegreeHistogram, k_min: u64, k_max: u64) -> Result<TailFit> {
    let base = k_min as f64 - 0.5;
    if base <= 0.0 {
        return Err(Error::config("k_min", "Hill estimator needs k_min ≥ 1"));
    }
    let (mut n, mut s, mut distinct) = (0u64, 0.0, 0usize);
    for (&k, &c) in h.counts.range(k_min as u32..=k_max.min(u32::MAX as u64) as u32) {
        n += c;
        s += c as f64 * (k as f64 / base).ln();
        distinct += 1;
    }
    if distinct < MIN_TAIL_POINTS {
        return Err(Error::InsufficientTail { needed: MIN_TAIL_POINTS, found: distinct, k_min, k_max });
    }
    Ok(TailFit { tau: n as f64 / s, r_squared: f64::NAN, points: distinct, k_min, k_max, method: TailMethod::Hill })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Normalization {
    Raw,
    /// Divide by `2t`: the weighted empirical fitness measure `Ξ_t`.
    Xi,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessLandscape {
    /// `n_bins + 1` uniform edges over `[0, range]`.
    pub bin_edges: Vec<f64>,
    /// Summed degree per bin, scaled by the normalization.
    pub bin_mass: Vec<f64>,
    /// Nodes per bin (the empirical fitness distribution).
    pub node_counts: Vec<u64>,
    pub normalization: Normalization,
    pub t: usize,
}

impl FitnessLandscape {
    pub fn total_mass(&self) -> f64 {
        self.bin_mass.iter().sum()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["bin_lo", "bin_hi", "mass"])?;
        for (j, m) in self.bin_mass.iter().enumerate() {
            out.write_record([self.bin_edges[j].to_string(), self.bin_edges[j + 1].to_string(), m.to_string()])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn write_node_counts_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["bin_lo", "bin_hi", "nodes"])?;
        for (j, c) in self.node_counts.iter().enumerate() {
            out.write_record([self.bin_edges[j].to_string(), self.bin_edges[j + 1].to_string(), c.to_string()])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Index of the heaviest bin (first one on ties).
    pub fn spike_bin(&self) -> usize {
        let mut best = 0;
        for (j, &m) in self.bin_mass.iter().enumerate() {
            if m > self.bin_mass[best] {
                best = j;
            }
        }
        best
    }

    /// Heaviest bin mass over mean bin mass.
    pub fn spike_ratio(&self) -> f64 {
        let mean = self.total_mass() / self.bin_mass.len() as f64;
        self.bin_mass[self.spike_bin()] / mean
    }

    /// Share of degree mass in the heaviest bin over its share of nodes.
    /// Near 1 when the peak only mirrors where fitness values sit.
    pub fn spike_enrichment(&self) -> f64 {
        let j = self.spike_bin();
        let nodes: u64 = self.node_counts.iter().sum();
        let mass_share = self.bin_mass[j] / self.total_mass();
        let node_share = self.node_counts[j] as f64 / nodes as f64;
        mass_share / node_share
    }
}

fn check_lengths(tree: &AttachmentTree, fitness: &[f64]) -> Result<()> {
    if fitness.len() != tree.t() {
        return Err(Error::config("fitness", format!("{} values for {} nodes", fitness.len(), tree.t())));
    }
    Ok(())
}

/// Degree mass per fitness bin over `[0, range]`; `range` defaults to the
/// observed maximum fitness (1 if every fitness is 0).
pub fn fitness_landscape(
    tree: &AttachmentTree,
    fitness: &[f64],
    n_bins: usize,
    normalization: Normalization,
    range: Option<f64>,
) -> Result<FitnessLandscape> {
    check_lengths(tree, fitness)?;
    if n_bins == 0 {
        return Err(Error::config("bins", "must be at least 1"));
    }
    let range = match range {
        Some(r) if r > 0.0 && r.is_finite() => r,
        Some(r) => return Err(Error::config("range", format!("must be positive, got {r}"))),
        None => {
            let max = fitness.iter().copied().fold(0.0, f64::max);
            if max > 0.0 {
                max
            } else {
                1.0
            }
        }
    };
    let width = range / n_bins as f64;
    let bin_edges: Vec<f64> = (0..=n_bins).map(|j| if j == n_bins { range } else { j as f64 * width }).collect();
    let mut degree_sum = vec![0u64; n_bins];
    let mut node_counts = vec![0u64; n_bins];
    for (&f, &d) in fitness.iter().zip(tree.degrees()) {
        let j = ((f / width) as usize).min(n_bins - 1);
        degree_sum[j] += d as u64;
        node_counts[j] += 1;
    }
    let t = tree.t();
    let scale = match normalization {
        Normalization::Raw => 1.0,
        Normalization::Xi => 1.0 / (2 * t) as f64,
    };
    Ok(FitnessLandscape {
        bin_edges,
        bin_mass: degree_sum.iter().map(|&s| s as f64 * scale).collect(),
        node_counts,
        normalization,
        t,
    })
}

/// `M_h̃ / t = Σ_v deg(v)·1{F(v) ≥ h̃} / t`.
pub fn condensate_mass(tree: &AttachmentTree, fitness: &[f64], h_tilde: f64) -> Result<f64> {
    check_lengths(tree, fitness)?;
    if !(h_tilde >= 0.0) {
        return Err(Error::config("h_tilde", format!("must be non-negative, got {h_tilde}")));
    }
    let mass: u64 = fitness
        .iter()
        .zip(tree.degrees())
        .filter(|(&f, _)| f >= h_tilde)
        .map(|(_, &d)| d as u64)
        .sum();
    Ok(mass as f64 / tree.t() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CondensateProfile {
    pub h_grid: Vec<f64>,
    pub mass: Vec<f64>,
    /// Upper endpoint `h` of the fitness law at this size (may be `+∞`).
    pub upper_endpoint: f64,
}

impl CondensateProfile {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["h_tilde", "mass"])?;
        for (h, m) in self.h_grid.iter().zip(&self.mass) {
            out.write_record([h.to_string(), m.to_string()])?;
        }
        out.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// `M_h̃ / t` on a threshold grid, sorting once instead of rescanning.
pub fn condensate_profile(
    tree: &AttachmentTree,
    fitness: &[f64],
    h_grid: &[f64],
    upper_endpoint: f64,
) -> Result<CondensateProfile> {
    check_lengths(tree, fitness)?;
    if let Some(bad) = h_grid.iter().find(|h| !(**h >= 0.0)) {
        return Err(Error::config("h_grid", format!("thresholds must be non-negative, got {bad}")));
    }
    let mut by_fitness: Vec<(f64, u32)> = fitness.iter().copied().zip(tree.degrees().iter().copied()).collect();
    by_fitness.sort_by(|a, b| a.0.total_cmp(&b.0));
    // suffix[i] = degree mass of nodes i.. in fitness order
    let mut suffix = vec![0u64; by_fitness.len() + 1];
    for i in (0..by_fitness.len()).rev() {
        suffix[i] = suffix[i + 1] + by_fitness[i].1 as u64;
    }
    let t = tree.t() as f64;
    let mass = h_grid
        .iter()
        .map(|&h| suffix[by_fitness.partition_point(|&(f, _)| f < h)] as f64 / t)
        .collect();
    Ok(CondensateProfile { h_grid: h_grid.to_vec(), mass, upper_endpoint })
}

/// Uniform grid of `points` thresholds over `[0, h]`.
pub fn uniform_h_grid(h: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..points).map(|i| h * i as f64 / (points - 1) as f64).collect(),
    }
}

/// Share of total degree held by the top 10% of nodes ranked by fitness
/// (`⌈t/10⌉` nodes; ties broken towards older nodes).
pub fn top_decile_degree_share(tree: &AttachmentTree, fitness: &[f64]) -> Result<f64> {
    check_lengths(tree, fitness)?;
    let mut order: Vec<usize> = (0..fitness.len()).collect();
    order.sort_by(|&a, &b| fitness[b].total_cmp(&fitness[a]).then(a.cmp(&b)));
    let k = fitness.len().div_ceil(10);
    let top: u64 = order[..k].iter().map(|&i| tree.degrees()[i] as u64).sum();
    Ok(top as f64 / tree.degree_sum() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn star(n: usize) -> AttachmentTree {
        let mut parents = vec![0u32];
        parents.extend(std::iter::repeat_n(1, n - 1));
        AttachmentTree::from_parents(&parents).unwrap()
    }

    #[test]
    fn histogram_examples() {
        let h = degree_histogram(&AttachmentTree::new());
        assert_eq!(h.counts, BTreeMap::from([(1, 2)]));
        let h = degree_histogram(&star(5));
        assert_eq!(h.counts, BTreeMap::from([(1, 4), (4, 1)]));
        let sum: u64 = h.counts.iter().map(|(&k, &c)| k as u64 * c).sum();
        assert_eq!(sum, 2 * (h.n - 1));
    }

    #[test]
    fn tv_examples() {
        let a = DegreeHistogram::from_counts([(1, 2), (2, 2)]);
        let b = DegreeHistogram::from_counts([(1, 1), (2, 3)]);
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(tv_distance(&a, &b).unwrap(), 0.25);
        let c = DegreeHistogram::from_counts([(7, 3)]);
        assert_eq!(tv_distance(&a, &c).unwrap(), 1.0);
        assert!(tv_distance(&a, &DegreeHistogram::default()).is_err());
    }

    #[test]
    fn survival_examples() {
        let s = survival(&DegreeHistogram::from_counts([(1, 2)]));
        assert_eq!(s.points, vec![(1, 1.0)]);
        let s = survival(&DegreeHistogram::from_counts([(1, 3), (4, 1)]));
        assert_eq!(s.points, vec![(1, 1.0), (4, 0.25)]);
    }

    #[test]
    fn planted_exponents_are_recovered() {
        for tau in [2.0, 2.5, 1.3] {
            let curve = SurvivalCurve { points: (1..=1000u64).map(|k| (k, (k as f64).powf(-tau))).collect() };
            let fit = tail_exponent(&curve, 1, 1000).unwrap();
            assert!((fit.tau - tau).abs() < 1e-6, "{tau}: {fit:?}");
            assert!((fit.r_squared - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn short_tail_is_rejected() {
        let curve = SurvivalCurve { points: (1..=9u64).map(|k| (k, 1.0 / k as f64)).collect() };
        assert!(matches!(tail_exponent(&curve, 1, 100), Err(Error::InsufficientTail { found: 9, .. })));
    }

    #[test]
    fn hill_on_exact_zeta_like_counts() {
        // counts ∝ k^{−3} for k ≥ 5: density exponent 3 ↔ survival exponent 2
        let h = DegreeHistogram::from_counts((5..20_000u32).map(|k| (k, (1e15 * (k as f64).powi(-3)) as u64)));
        let fit = hill_exponent(&h, 5, 20_000).unwrap();
        assert!((fit.tau - 2.0).abs() < 0.05, "{fit:?}");
    }

    #[test]
    fn landscape_examples() {
        let tree = star(6);
        let f = vec![0.3; 6];
        let l = fitness_landscape(&tree, &f, 1, Normalization::Raw, None).unwrap();
        assert_eq!(l.bin_mass, vec![10.0]);
        let l = fitness_landscape(&tree, &f, 7, Normalization::Xi, None).unwrap();
        assert!((l.total_mass() - 5.0 / 6.0).abs() < 1e-15);
        let two = AttachmentTree::new();
        let l = fitness_landscape(&two, &[0.1, 0.9], 2, Normalization::Raw, Some(1.0)).unwrap();
        assert_eq!(l.bin_mass, vec![1.0, 1.0]);
        assert_eq!(l.node_counts, vec![1, 1]);
        assert_eq!(l.spike_ratio(), 1.0);
        assert_eq!(l.spike_enrichment(), 1.0);
        let l = fitness_landscape(&tree, &[0.9, 0.1, 0.1, 0.1, 0.1, 0.1], 2, Normalization::Raw, Some(1.0)).unwrap();
        assert_eq!((l.spike_bin(), l.spike_ratio()), (0, 1.0));
        assert_eq!(l.spike_enrichment(), 0.5 / (5.0 / 6.0));
        let l = fitness_landscape(&two, &[0.0, 0.0], 4, Normalization::Raw, None).unwrap();
        assert_eq!(l.bin_edges.last(), Some(&1.0));
        assert!(fitness_landscape(&two, &[0.1, 0.9], 0, Normalization::Raw, None).is_err());
    }

    #[test]
    fn condensate_examples() {
        let tree = star(5);
        let f = [0.9, 0.1, 0.2, 0.3, 0.4];
        assert_eq!(condensate_mass(&tree, &f, 0.0).unwrap(), 8.0 / 5.0);
        assert_eq!(condensate_mass(&tree, &f, 0.95).unwrap(), 0.0);
        assert_eq!(condensate_mass(&tree, &f, 0.5).unwrap(), 4.0 / 5.0);
        assert!(condensate_mass(&tree, &f, -1.0).is_err());
        let p = condensate_profile(&tree, &f, &[0.0, 0.25, 0.5, 1.0], 1.0).unwrap();
        assert_eq!(p.mass, vec![1.6, 1.2, 0.8, 0.0]);
    }

    #[test]
    fn top_decile_share() {
        let tree = star(10);
        let mut f = vec![0.1; 10];
        f[0] = 1.0;
        assert_eq!(top_decile_degree_share(&tree, &f).unwrap(), 0.5);
        f[0] = 0.0;
        // all others tie at 0.1: rank goes to node 2, degree 1
        assert_eq!(top_decile_degree_share(&tree, &f).unwrap(), 1.0 / 18.0);
    }

    fn arb_tree() -> impl Strategy<Value = (AttachmentTree, Vec<f64>)> {
        (2usize..120).prop_flat_map(|n| {
            let parents = (3..=n).map(|v| 1u32..v as u32).collect::<Vec<_>>();
            (parents, prop::collection::vec(0.0f64..5.0, n)).prop_map(|(ps, f)| {
                let mut all = vec![0u32, 1];
                all.extend(ps);
                (AttachmentTree::from_parents(&all).unwrap(), f)
            })
        })
    }

    proptest! {
        #[test]
        fn landscape_mass_is_binning_invariant((tree, f) in arb_tree(), bins in 1usize..80) {
            let l = fitness_landscape(&tree, &f, bins, Normalization::Raw, None).unwrap();
            prop_assert_eq!(l.total_mass(), 2.0 * (tree.t() - 1) as f64);
            prop_assert_eq!(l.node_counts.iter().sum::<u64>(), tree.t() as u64);
        }

        #[test]
        fn profile_is_monotone_and_matches_direct((tree, f) in arb_tree()) {
            let grid = uniform_h_grid(5.0, 20);
            let p = condensate_profile(&tree, &f, &grid, 5.0).unwrap();
            prop_assert_eq!(p.mass[0], 2.0 * (tree.t() - 1) as f64 / tree.t() as f64);
            for w in p.mass.windows(2) {
                prop_assert!(w[1] <= w[0]);
            }
            for (h, m) in grid.iter().zip(&p.mass) {
                prop_assert_eq!(*m, condensate_mass(&tree, &f, *h).unwrap());
            }
        }

        #[test]
        fn survival_is_monotone((tree, _f) in arb_tree()) {
            let s = survival(&degree_histogram(&tree));
            prop_assert_eq!(s.points[0].1, 1.0);
            for w in s.points.windows(2) {
                prop_assert!(w[1].1 <= w[0].1 && w[1].0 > w[0].0);
            }
        }

        #[test]
        fn tv_is_a_metric(
            a in prop::collection::vec(0u64..20, 12),
            b in prop::collection::vec(0u64..20, 12),
            c in prop::collection::vec(0u64..20, 12),
        ) {
            let h = |v: &Vec<u64>| DegreeHistogram::from_counts(v.iter().enumerate().map(|(k, &c)| (k as u32 + 1, c)));
            let (ha, hb, hc) = (h(&a), h(&b), h(&c));
            prop_assume!(!ha.is_empty() && !hb.is_empty() && !hc.is_empty());
            let ab = tv_distance(&ha, &hb).unwrap();
            prop_assert!((ab - tv_distance(&hb, &ha).unwrap()).abs() < 1e-15);
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert!(ab <= tv_distance(&ha, &hc).unwrap() + tv_distance(&hc, &hb).unwrap() + 1e-12);
        }
    }
}
