use dynfit::condensation::{MStarVerdict, NonCondensingReason};
use dynfit::diagnostics::{fitness_landscape, Normalization};
use dynfit::fitness::MSchedule;
use dynfit::graph::{ModelKind, Simulation};
use dynfit::harness::{self, ExperimentKind, ExperimentSpec, RunOptions};
use dynfit::increments::{gumbel_class_mean, IncrementDistribution, SeedPlan, StreamRole};

fn spec(kind: ExperimentKind, seed: u64, trials: usize, sizes: &[usize]) -> ExperimentSpec {
    let mut s = ExperimentSpec::new(kind);
    s.master_seed = seed;
    s.trials = trials;
    s.sizes = sizes.to_vec();
    s
}

fn tail_pair(t: usize) -> (f64, f64) {
    let mut s = spec(ExperimentKind::TailCompare, 21, 1, &[t]);
    s.model_a = Some(ModelKind::BarabasiAlbert);
    s.model_b = Some("r1:1:beta:1,3".parse().unwrap());
    s.diagnostics.verify = false;
    let r = harness::run(&s, &RunOptions::default()).unwrap();
    assert!(r.artifacts.iter().any(|a| a.path == format!("survival_model_b_t{t}.csv")));
    (r.summary_row("model_a", t, "tau").unwrap().mean, r.summary_row("model_b", t, "tau").unwrap().mean)
}

#[test]
fn r1_tail_matches_ba_tail() {
    let (ba, r1) = tail_pair(30_000);
    assert!((1.7..=2.3).contains(&ba), "{ba}");
    assert!((r1 - ba).abs() <= 0.3, "ba {ba} r1 {r1}");
}

#[test]
#[ignore = "R1 costs Θ(t²); several minutes at t = 1e5"]
fn r1_tail_matches_ba_tail_at_full_size() {
    let (ba, r1) = tail_pair(100_000);
    assert!((1.7..=2.3).contains(&ba), "{ba}");
    assert!((r1 - ba).abs() <= 0.3, "ba {ba} r1 {r1}");
}

#[test]
fn condensing_r2_concentrates_degree_on_fit_nodes() {
    let mut s = spec(ExperimentKind::LandscapeScan, 22, 4, &[50_000]);
    s.model_a = Some("r2:2:beta:1,1.9".parse().unwrap());
    s.model_b = Some("r2:1:uniform".parse().unwrap());
    s.diagnostics.export_trials = 1;
    let r = harness::run(&s, &RunOptions::default()).unwrap();
    let a = r.summary_row("model_a", 50_000, "top_decile_share").unwrap().mean;
    let b = r.summary_row("model_b", 50_000, "top_decile_share").unwrap().mean;
    assert!(a > b, "beta(1,1.9) m=2 {a} vs uniform m=1 {b}");
    let profile = r.artifacts.iter().find(|a| a.path == "landscape/model_a/t50000/trial0/profile.csv").unwrap();
    assert!(String::from_utf8_lossy(&profile.contents).starts_with("h_tilde,mass\n0,"));
}

#[test]
fn single_bin_landscape_holds_all_degree_mass() {
    let mut sim = Simulation::new("r2:3:gumbel".parse().unwrap(), SeedPlan::new(5, 0, StreamRole::Attachment)).unwrap();
    sim.grow_to(5000).unwrap();
    let l = fitness_landscape(sim.tree(), sim.fitness_values(), 1, Normalization::Raw, None).unwrap();
    assert_eq!(l.bin_mass, vec![2.0 * 4999.0]);
}

#[test]
fn constant_increments_under_linear_window() {
    let mut s = spec(ExperimentKind::R3Sweep, 23, 1, &[500, 2000]);
    s.dist = Some(IncrementDistribution::constant(0.25).unwrap());
    s.schedules = vec![MSchedule::Linear];
    let r = harness::run(&s, &RunOptions::default()).unwrap();
    for t in [500, 2000] {
        assert_eq!(r.summary_row("linear", t, "max_fitness").unwrap().mean, 0.25 * (t - 1) as f64);
    }
}

#[test]
fn gumbel_linear_spike_sits_near_mean_times_t() {
    let t = 20_000;
    let mut s = spec(ExperimentKind::R3Sweep, 24, 1, &[t]);
    s.dist = Some(IncrementDistribution::GumbelClass);
    s.schedules = vec![MSchedule::Linear, MSchedule::SqrtFloor];
    s.diagnostics.verify = false;
    let r = harness::run(&s, &RunOptions::default()).unwrap();
    let target = gumbel_class_mean() * t as f64;
    let max_f = r.summary_row("linear", t, "max_fitness").unwrap().mean;
    assert!((max_f - target).abs() / target < 0.05, "max F {max_f} vs μt {target}");
    // same qualitative picture as uniform increments: the degree mass piles
    // into the top bins far beyond their share of nodes
    let enrichment = r.summary_row("linear", t, "spike_enrichment").unwrap().mean;
    let sqrt = r.summary_row("sqrt", t, "spike_enrichment").unwrap().mean;
    assert!(enrichment > 5.0 && enrichment > 3.0 * sqrt, "linear {enrichment} sqrt {sqrt}");
    let spike_bin = r.summary_row("linear", t, "spike_bin").unwrap().mean;
    assert!(spike_bin >= 40.0, "{spike_bin}");
}

#[test]
fn mstar_verdicts_through_the_harness() {
    let mut s = ExperimentSpec::new(ExperimentKind::MStar);
    s.criterion.dists = ["beta:3,1", "uniform", "beta:1,3"].iter().map(|d| d.parse().unwrap()).collect();
    let r = harness::run(&s, &RunOptions::default()).unwrap();
    let verdicts: Vec<MStarVerdict> = r.details["results"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| serde_json::from_value(v["verdict"].clone()).unwrap())
        .collect();
    let non = MStarVerdict::NonCondensing { reason: NonCondensingReason::MeanAtLeastHalf };
    assert_eq!(verdicts, vec![non, non, MStarVerdict::Condensing { m_star: 1 }]);
}
