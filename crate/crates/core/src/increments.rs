//! Fitness increment laws and reproducible, stream-structured randomness.
//!
//! Every increment `ε_i(v)` is a pure function of `(master_seed, v, i)`: it is
//! produced by hashing the triple into a private counter-based substream. The
//! attachment process draws from a separate sequential stream, so the same
//! fitness realization can be replayed under any number of attachment
//! histories.

use std::sync::OnceLock;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::{gamma, gamma_ur};

use crate::error::{Error, Result};
use crate::quad;

/// Sequential random stream used for attachment choices and Monte Carlo work.
pub type Stream = ChaCha8Rng;

/// Law `ν` of a single fitness increment. Support is always inside `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "serde_json::Value", into = "RawDistribution")]
pub enum IncrementDistribution {
    Uniform01,
    Beta { alpha: f64, beta: f64 },
    /// Law on `[0, 1]` with survival function `exp(−x / (1 − x))`.
    GumbelClass,
    /// Degenerate law `ε ≡ value`; used for deterministic checks.
    Constant { value: f64 },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDistribution {
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
}

/// Accepts the object form or the compact string form (`beta:1,3`).
impl TryFrom<serde_json::Value> for IncrementDistribution {
    type Error = Error;

    fn try_from(value: serde_json::Value) -> Result<Self> {
        match value {
            serde_json::Value::String(s) => s.parse(),
            other => serde_json::from_value::<RawDistribution>(other)?.try_into(),
        }
    }
}

impl TryFrom<RawDistribution> for IncrementDistribution {
    type Error = Error;

    fn try_from(raw: RawDistribution) -> Result<Self> {
        match raw.kind.as_str() {
            "uniform" => Ok(Self::Uniform01),
            "gumbel_class" => Ok(Self::GumbelClass),
            "beta" => {
                let alpha = raw.alpha.ok_or_else(|| Error::config("alpha", "required for beta"))?;
                let beta = raw.beta.ok_or_else(|| Error::config("beta", "required for beta"))?;
                Self::beta(alpha, beta)
            }
            "constant" => {
                let value = raw.value.ok_or_else(|| Error::config("value", "required for constant"))?;
                Self::constant(value)
            }
            other => Err(Error::config(
                "kind",
                format!("unknown distribution `{other}` (expected uniform, beta, gumbel_class or constant)"),
            )),
        }
    }
}

impl From<IncrementDistribution> for RawDistribution {
    fn from(d: IncrementDistribution) -> Self {
        let mut raw = RawDistribution {
            kind: String::new(),
            alpha: None,
            beta: None,
            value: None,
        };
        match d {
            IncrementDistribution::Uniform01 => raw.kind = "uniform".into(),
            IncrementDistribution::GumbelClass => raw.kind = "gumbel_class".into(),
            IncrementDistribution::Beta { alpha, beta } => {
                raw.kind = "beta".into();
                raw.alpha = Some(alpha);
                raw.beta = Some(beta);
            }
            IncrementDistribution::Constant { value } => {
                raw.kind = "constant".into();
                raw.value = Some(value);
            }
        }
        raw
    }
}

impl std::fmt::Display for IncrementDistribution {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Uniform01 => write!(f, "uniform"),
            Self::GumbelClass => write!(f, "gumbel"),
            Self::Beta { alpha, beta } => write!(f, "beta:{alpha},{beta}"),
            Self::Constant { value } => write!(f, "const:{value}"),
        }
    }
}

impl std::str::FromStr for IncrementDistribution {
    type Err = Error;

    /// Compact form used on the command line: `uniform`, `gumbel`,
    /// `beta:A,B`, `const:C`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: &str| Error::config("dist", format!("`{s}`: {msg}"));
        let (head, tail) = match s.split_once(':') {
            Some((h, t)) => (h, Some(t)),
            None => (s, None),
        };
        match (head.trim().to_ascii_lowercase().as_str(), tail) {
            ("uniform" | "u", None) => Ok(Self::Uniform01),
            ("gumbel" | "gumbel_class", None) => Ok(Self::GumbelClass),
            ("beta", Some(params)) => {
                let (a, b) = params.split_once(',').ok_or_else(|| bad("expected beta:ALPHA,BETA"))?;
                let a: f64 = a.trim().parse().map_err(|_| bad("alpha is not a number"))?;
                let b: f64 = b.trim().parse().map_err(|_| bad("beta is not a number"))?;
                Self::beta(a, b)
            }
            ("const" | "constant", Some(v)) => {
                let v: f64 = v.trim().parse().map_err(|_| bad("value is not a number"))?;
                Self::constant(v)
            }
            _ => Err(bad("expected uniform, gumbel, beta:A,B or const:C")),
        }
    }
}

impl IncrementDistribution {
    pub fn beta(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::config("alpha", format!("must be positive, got {alpha}")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::config("beta", format!("must be positive, got {beta}")));
        }
        Ok(Self::Beta { alpha, beta })
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&value) {
            return Err(Error::config("value", format!("constant increment must lie in [0, 1), got {value}")));
        }
        Ok(Self::Constant { value })
    }

    /// Re-checks parameter ranges; needed for values built without the
    /// validating constructors.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Self::Beta { alpha, beta } => Self::beta(alpha, beta).map(|_| ()),
            Self::Constant { value } => Self::constant(value).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Exact mean `μ_ε`.
    pub fn mean(&self) -> f64 {
        match *self {
            Self::Uniform01 => 0.5,
            Self::Beta { alpha, beta } => alpha / (alpha + beta),
            Self::GumbelClass => gumbel_class_mean(),
            Self::Constant { value } => value,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            Self::Uniform01 => 1.0 / 12.0,
            Self::Beta { alpha, beta } => {
                let s = alpha + beta;
                alpha * beta / (s * s * (s + 1.0))
            }
            Self::GumbelClass => {
                // E[X²] = ∫ 2x S(x) dx
                let (second, _) = quad::integrate(|x| 2.0 * x * gumbel_class_survival(x), 0.0, 1.0, 1e-13);
                let mu = gumbel_class_mean();
                second - mu * mu
            }
            Self::Constant { .. } => 0.0,
        }
    }

    /// `P(ε > x)`.
    pub fn survival(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        if x >= 1.0 {
            return 0.0;
        }
        match *self {
            Self::Uniform01 => 1.0 - x,
            Self::Beta { alpha, beta } => beta_reg(beta, alpha, 1.0 - x),
            Self::GumbelClass => gumbel_class_survival(x),
            Self::Constant { value } => {
                if x < value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Self::Beta { alpha, beta } if (0.0..1.0).contains(&x) => beta_reg(alpha, beta, x),
            _ => 1.0 - self.survival(x),
        }
    }

    /// `ν([a, b))` for `0 ≤ a < b ≤ 1`, with the last cell closed at 1.
    /// Evaluated on whichever tail keeps the subtraction well conditioned.
    pub fn cell_mass(&self, a: f64, b: f64) -> f64 {
        match *self {
            Self::Constant { value } => {
                if value >= a && (value < b || b >= 1.0) {
                    1.0
                } else {
                    0.0
                }
            }
            _ if a >= 0.5 => (self.survival(a) - self.survival(b)).max(0.0),
            _ => (self.cdf(b) - self.cdf(a)).max(0.0),
        }
    }

    /// `∫_{[a,b)} x dν(x)`.
    pub fn cell_first_moment(&self, a: f64, b: f64) -> f64 {
        match *self {
            Self::Uniform01 => 0.5 * (b * b - a * a),
            Self::Beta { alpha, beta } => {
                // x·Beta(α,β) density = μ · Beta(α+1,β) density
                let shifted = Self::Beta { alpha: alpha + 1.0, beta };
                self.mean() * shifted.cell_mass(a, b)
            }
            Self::GumbelClass => {
                // ∫ x dν = a S(a) − b S(b) + ∫ S
                let (area, _) = quad::gk15(&gumbel_class_survival, a, b);
                (a * gumbel_class_survival(a) - b * gumbel_class_survival(b) + area).max(0.0)
            }
            Self::Constant { value } => value * self.cell_mass(a, b),
        }
    }

    /// `∫_{[a,1]} (1 − x)^{−s} dν(x)`, possibly `+∞`.
    pub fn upper_tail_moment(&self, a: f64, s: f64) -> f64 {
        match *self {
            Self::Uniform01 => {
                if s >= 1.0 {
                    f64::INFINITY
                } else {
                    (1.0 - a).powf(1.0 - s) / (1.0 - s)
                }
            }
            Self::Beta { alpha, beta } => {
                if beta <= s {
                    f64::INFINITY
                } else {
                    let ratio = (ln_beta(alpha, beta - s) - ln_beta(alpha, beta)).exp();
                    ratio * beta_reg(beta - s, alpha, 1.0 - a)
                }
            }
            Self::GumbelClass => {
                // y = x/(1−x):  ∫_Y^∞ (1+y)^s e^{−y} dy = e·Γ(s+1, 1+Y)
                let y = a / (1.0 - a);
                std::f64::consts::E * gamma(s + 1.0) * gamma_ur(s + 1.0, 1.0 + y)
            }
            Self::Constant { value } => {
                if value >= a {
                    (1.0 - value).powf(-s)
                } else {
                    0.0
                }
            }
        }
    }

    /// Prepared sampler (parameter set-up hoisted out of the draw loop).
    pub fn sampler(&self) -> IncrementSampler {
        IncrementSampler::new(*self)
    }
}

fn gumbel_class_survival(x: f64) -> f64 {
    if x >= 1.0 {
        0.0
    } else {
        (-x / (1.0 - x)).exp()
    }
}

/// `∫₀¹ exp(−x/(1−x)) dx`, by adaptive quadrature.
pub fn gumbel_class_mean() -> f64 {
    static MEAN: OnceLock<f64> = OnceLock::new();
    *MEAN.get_or_init(|| quad::integrate(gumbel_class_survival, 0.0, 1.0, 1e-13).0)
}

/// Inverse-survival transform for the Gumbel-class law: `u ∈ (0, 1]` maps to
/// the `x` with `exp(−x/(1−x)) = u`.
pub fn gumbel_class_from_uniform(u: f64) -> f64 {
    let y = -u.ln();
    y / (1.0 + y)
}

#[derive(Clone, Debug)]
pub enum IncrementSampler {
    Uniform01,
    Beta(rand_distr::Beta<f64>),
    /// Beta(α, 1): `U^(1/α)`.
    PowerUp(f64),
    /// Beta(1, β): `1 − U^(1/β)`.
    PowerDown(f64),
    GumbelClass,
    Constant(f64),
}

impl IncrementSampler {
    pub fn new(dist: IncrementDistribution) -> Self {
        match dist {
            IncrementDistribution::Uniform01 => Self::Uniform01,
            IncrementDistribution::Beta { alpha, beta: 1.0 } => Self::PowerUp(1.0 / alpha),
            IncrementDistribution::Beta { alpha: 1.0, beta } => Self::PowerDown(1.0 / beta),
            IncrementDistribution::Beta { alpha, beta } => {
                Self::Beta(rand_distr::Beta::new(alpha, beta).expect("validated parameters"))
            }
            IncrementDistribution::GumbelClass => Self::GumbelClass,
            IncrementDistribution::Constant { value } => Self::Constant(value),
        }
    }

    #[inline]
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Uniform01 => unit_open_right(rng.next_u64()),
            Self::Beta(b) => rand_distr::Distribution::sample(b, rng),
            Self::PowerUp(e) => root(unit_open_right(rng.next_u64()), *e),
            Self::PowerDown(e) => 1.0 - root(unit_open_left(rng.next_u64()), *e),
            Self::GumbelClass => gumbel_class_from_uniform(unit_open_left(rng.next_u64())),
            Self::Constant(c) => *c,
        }
    }

    /// Draw keyed by a single 64-bit hash; cheap paths avoid building an RNG.
    #[inline]
    fn sample_from_hash(&self, h: u64) -> f64 {
        match self {
            Self::Uniform01 => unit_open_right(h),
            Self::GumbelClass => gumbel_class_from_uniform(unit_open_left(h)),
            Self::Constant(c) => *c,
            Self::PowerUp(e) => root(unit_open_right(h), *e),
            Self::PowerDown(e) => 1.0 - root(unit_open_left(h), *e),
            Self::Beta(b) => {
                let mut rng = SplitMix64(h);
                rand_distr::Distribution::sample(b, &mut rng)
            }
        }
    }
}

/// One exact draw from `ν`.
pub fn sample_increment<R: RngCore + ?Sized>(dist: &IncrementDistribution, rng: &mut R) -> f64 {
    dist.sampler().sample(rng)
}

/// `u^e`, with the common square and cube roots on their faster paths.
#[inline]
fn root(u: f64, e: f64) -> f64 {
    if e == 0.5 {
        u.sqrt()
    } else if e == 1.0 / 3.0 {
        u.cbrt()
    } else {
        u.powf(e)
    }
}

#[inline]
fn unit_open_right(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[inline]
fn unit_open_left(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

#[inline]
fn hash_pair(key: u64, a: u64, b: u64) -> u64 {
    mix64(mix64(key ^ a.wrapping_mul(GOLDEN)) ^ b.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// Small counter-based generator seeding the per-increment substreams.
#[derive(Clone, Debug)]
pub struct SplitMix64(pub u64);

impl RngCore for SplitMix64 {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.0 = self.0.wrapping_add(GOLDEN);
        mix64(self.0)
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        rand::rand_core::impls::fill_bytes_via_next(self, dst)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamRole {
    Fitness,
    Attachment,
    Analysis,
}

impl StreamRole {
    fn tag(self) -> u64 {
        match self {
            StreamRole::Fitness => 0x4649_544e,
            StreamRole::Attachment => 0x4154_5443,
            StreamRole::Analysis => 0x414e_4c59,
        }
    }
}

/// Identifies one random stream of one trial of an experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedPlan {
    pub master_seed: u64,
    pub trial_index: u64,
    pub stream_role: StreamRole,
}

impl SeedPlan {
    pub fn new(master_seed: u64, trial_index: u64, stream_role: StreamRole) -> Self {
        SeedPlan {
            master_seed,
            trial_index,
            stream_role,
        }
    }

    pub fn with_role(self, stream_role: StreamRole) -> Self {
        SeedPlan { stream_role, ..self }
    }

    /// 64-bit key of the stream. The fitness key ignores `trial_index`, which
    /// is what makes fitness realizations quenched across trials.
    pub fn key(&self) -> u64 {
        let trial = match self.stream_role {
            StreamRole::Fitness => 0,
            _ => self.trial_index,
        };
        hash_pair(self.master_seed ^ self.stream_role.tag().wrapping_mul(GOLDEN), trial, self.stream_role.tag())
    }
}

/// Deterministic sequential stream for a plan.
pub fn derive_stream(plan: SeedPlan) -> Stream {
    let mut seeder = SplitMix64(plan.key());
    let mut seed = [0u8; 32];
    seeder.fill_bytes(&mut seed);
    Stream::from_seed(seed)
}

/// Sub-stream `index` of `plan`, used to split Monte Carlo work into chunks
/// whose results do not depend on scheduling.
pub fn derive_substream(plan: SeedPlan, index: u64) -> Stream {
    let mut rng = derive_stream(plan);
    rng.set_stream(index);
    rng
}

/// Keyed source of the increments `ε_i(v)`.
#[derive(Clone, Debug)]
pub struct IncrementSource {
    key: u64,
    sampler: IncrementSampler,
    dist: IncrementDistribution,
}

impl IncrementSource {
    pub fn new(dist: IncrementDistribution, plan: SeedPlan) -> Self {
        IncrementSource {
            key: plan.with_role(StreamRole::Fitness).key(),
            sampler: dist.sampler(),
            dist,
        }
    }

    pub fn distribution(&self) -> &IncrementDistribution {
        &self.dist
    }

    /// `ε_index(node)`; a pure function of the master seed, `node` and `index`.
    #[inline]
    pub fn increment(&self, node: usize, index: usize) -> f64 {
        self.sampler.sample_from_hash(hash_pair(self.key, node as u64, index as u64))
    }
}

/// Draws `n` increments from a sequential stream (used by Monte Carlo code).
pub fn sample_many<R: Rng + ?Sized>(dist: &IncrementDistribution, rng: &mut R, n: usize) -> Vec<f64> {
    let sampler = dist.sampler();
    (0..n).map(|_| sampler.sample(rng)).collect()
}
