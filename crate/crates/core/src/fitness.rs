//! Time-varying fitness `F_t(v)` under the three window regimes.
//!
//! Window convention: at time `t` (nodes `1..=t` present) node `v` carries
//! exactly `min(W(t), t − v)` increments, where `W` is the regime's window
//! length. A node receives its first increment at `t = v + 1`, so it has zero
//! fitness only during its own birth step, when it cannot be a target.
//!
//! * R1: the last `m` increments, refreshed every step (moving window).
//! * R2: the first `m` increments, then frozen.
//! * R3: the first `m(t)` increments, with `m(t)` growing without bound.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::increments::{IncrementDistribution, IncrementSource};

/// Growth law `m(t)` of the R3 window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSchedule", into = "RawSchedule")]
pub enum MSchedule {
    Log2Floor,
    SqrtFloor,
    Linear,
    ConstantTimesT(f64),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RawSchedule {
    Name(String),
    Fraction { c: f64 },
}

impl TryFrom<RawSchedule> for MSchedule {
    type Error = Error;

    fn try_from(raw: RawSchedule) -> Result<Self> {
        match raw {
            RawSchedule::Name(name) => name.parse(),
            RawSchedule::Fraction { c } => MSchedule::constant_times_t(c),
        }
    }
}

impl From<MSchedule> for RawSchedule {
    fn from(s: MSchedule) -> Self {
        match s {
            MSchedule::Log2Floor => RawSchedule::Name("log2".into()),
            MSchedule::SqrtFloor => RawSchedule::Name("sqrt".into()),
            MSchedule::Linear => RawSchedule::Name("linear".into()),
            MSchedule::ConstantTimesT(c) => RawSchedule::Fraction { c },
        }
    }
}

impl std::str::FromStr for MSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "log2" | "log" => Ok(MSchedule::Log2Floor),
            "sqrt" => Ok(MSchedule::SqrtFloor),
            "linear" | "t" => Ok(MSchedule::Linear),
            other => match other.strip_prefix("c=").or_else(|| other.strip_prefix("c:")) {
                Some(c) => {
                    let c: f64 = c
                        .parse()
                        .map_err(|_| Error::config("schedule", format!("`{other}`: fraction is not a number")))?;
                    MSchedule::constant_times_t(c)
                }
                None => Err(Error::config(
                    "schedule",
                    format!("unknown schedule `{other}` (expected log2, sqrt, linear or c=<fraction>)"),
                )),
            },
        }
    }
}

impl std::fmt::Display for MSchedule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            MSchedule::Log2Floor => write!(f, "log2"),
            MSchedule::SqrtFloor => write!(f, "sqrt"),
            MSchedule::Linear => write!(f, "linear"),
            MSchedule::ConstantTimesT(c) => write!(f, "c={c}"),
        }
    }
}

impl MSchedule {
    pub fn constant_times_t(c: f64) -> Result<Self> {
        if !(c > 0.0 && c <= 1.0) {
            return Err(Error::config("schedule.c", format!("must lie in (0, 1], got {c}")));
        }
        Ok(MSchedule::ConstantTimesT(c))
    }

    /// `m(t)`; at least 1 and at most `t` for `t ≥ 2`.
    pub fn eval(&self, t: usize) -> usize {
        let t = t.max(1);
        let m = match *self {
            MSchedule::Log2Floor => (usize::BITS - 1 - t.leading_zeros()) as usize,
            MSchedule::SqrtFloor => t.isqrt(),
            MSchedule::Linear => t,
            MSchedule::ConstantTimesT(c) => (c * t as f64).floor() as usize,
        };
        m.clamp(1, t)
    }

    /// True when most nodes gain an increment at every step.
    pub fn is_dense(&self) -> bool {
        matches!(self, MSchedule::Linear | MSchedule::ConstantTimesT(_))
    }
}

/// Placement of the block of ones in the summation vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRegime", into = "RawRegime")]
pub enum Regime {
    R1 { m: usize },
    R2 { m: usize },
    R3 { schedule: MSchedule },
}

#[derive(Serialize, Deserialize)]
struct RawRegime {
    regime: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    schedule: Option<MSchedule>,
}

impl TryFrom<RawRegime> for Regime {
    type Error = Error;

    fn try_from(raw: RawRegime) -> Result<Self> {
        match raw.regime.as_str() {
            "R1" | "r1" => Regime::r1(raw.m.ok_or_else(|| Error::config("m", "required for R1"))?),
            "R2" | "r2" => Regime::r2(raw.m.ok_or_else(|| Error::config("m", "required for R2"))?),
            "R3" | "r3" => Ok(Regime::R3 {
                schedule: raw.schedule.ok_or_else(|| Error::config("schedule", "required for R3"))?,
            }),
            other => Err(Error::config("regime", format!("unknown regime `{other}` (expected R1, R2 or R3)"))),
        }
    }
}

impl From<Regime> for RawRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::R1 { m } => RawRegime { regime: "R1".into(), m: Some(m), schedule: None },
            Regime::R2 { m } => RawRegime { regime: "R2".into(), m: Some(m), schedule: None },
            Regime::R3 { schedule } => RawRegime { regime: "R3".into(), m: None, schedule: Some(schedule) },
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Regime::R1 { m } => write!(f, "R1(m={m})"),
            Regime::R2 { m } => write!(f, "R2(m={m})"),
            Regime::R3 { schedule } => write!(f, "R3({schedule})"),
        }
    }
}

impl Regime {
    pub fn r1(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("m", "must be at least 1"));
        }
        Ok(Regime::R1 { m })
    }

    pub fn r2(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::config("m", "must be at least 1"));
        }
        Ok(Regime::R2 { m })
    }

    pub fn r3(schedule: MSchedule) -> Self {
        Regime::R3 { schedule }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Regime::R1 { m } | Regime::R2 { m } if m == 0 => Err(Error::config("m", "must be at least 1")),
            Regime::R3 { schedule: MSchedule::ConstantTimesT(c) } => MSchedule::constant_times_t(c).map(|_| ()),
            _ => Ok(()),
        }
    }

    /// Window length `W(t)`.
    pub fn window(&self, t: usize) -> usize {
        match *self {
            Regime::R1 { m } | Regime::R2 { m } => m,
            Regime::R3 { schedule } => schedule.eval(t),
        }
    }

    /// True when `Θ(t)` fitness values change at every step.
    pub fn is_dense(&self) -> bool {
        match self {
            Regime::R1 { .. } => true,
            Regime::R2 { .. } => false,
            Regime::R3 { schedule } => schedule.is_dense(),
        }
    }
}

/// `E[F_t(v)] = μ_ε · min(W(t), t − v)` under the window convention above.
pub fn expected_fitness(regime: &Regime, dist: &IncrementDistribution, v: usize, t: usize) -> Result<f64> {
    if v == 0 || v > t {
        return Err(Error::UnknownNode { node: v, t });
    }
    Ok(dist.mean() * regime.window(t).min(t - v) as f64)
}

/// Which fitness values moved during one `advance`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Changed {
    All,
    /// Node ids (1-based), each listed once.
    Nodes(Vec<usize>),
}

/// Per-node fitness values and increment bookkeeping.
#[derive(Clone, Debug)]
pub struct FitnessState {
    regime: Regime,
    t: usize,
    values: Vec<f64>,
    counts: Vec<usize>,
    /// R1 only: `m` slots per node; increment `i` of node `v` sits in slot `i mod m`.
    ring: Vec<f64>,
}

impl FitnessState {
    /// State at `t = 2`: node 1 holds its first increment, node 2 none.
    pub fn init(regime: Regime, source: &IncrementSource) -> Self {
        let mut state = FitnessState {
            regime,
            t: 1,
            values: vec![0.0],
            counts: vec![0],
            ring: Vec::new(),
        };
        if let Regime::R1 { m } = regime {
            state.ring = vec![0.0; m];
        }
        state.advance(source);
        state
    }

    pub fn regime(&self) -> &Regime {
        &self.regime
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// `F_t(v)` for nodes `1..=t`, indexed by `v − 1`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn fitness_of(&self, v: usize) -> Result<f64> {
        if v == 0 || v > self.t {
            return Err(Error::UnknownNode { node: v, t: self.t });
        }
        Ok(self.values[v - 1])
    }

    pub fn increment_count(&self, v: usize) -> Result<usize> {
        if v == 0 || v > self.t {
            return Err(Error::UnknownNode { node: v, t: self.t });
        }
        Ok(self.counts[v - 1])
    }

    /// Increments currently summed into `F_t(v)`, oldest first, as
    /// `(time index, value)`.
    pub fn window_contents(&self, v: usize, source: &IncrementSource) -> Result<Vec<(usize, f64)>> {
        let count = self.increment_count(v)?;
        let first = match self.regime {
            Regime::R1 { .. } => self.t + 1 - count,
            _ => v + 1,
        };
        Ok((first..first + count).map(|i| (i, source.increment(v, i))).collect())
    }

    /// Moves the state from `t` to `t + 1` and appends node `t + 1` with no
    /// increments. Returns the set of existing nodes whose fitness changed.
    pub fn advance(&mut self, source: &IncrementSource) -> Changed {
        let next = self.t + 1;
        let changed = match self.regime {
            Regime::R1 { m } => {
                let slot = next % m;
                let full_first = (next + 1) % m;
                for v in 1..next {
                    let idx = v - 1;
                    let ring = &mut self.ring[idx * m..(idx + 1) * m];
                    ring[slot] = source.increment(v, next);
                    let count = m.min(next - v);
                    self.counts[idx] = count;
                    // sum oldest → newest so the value is a canonical function of the window
                    let first = if count == m { full_first } else { (next + 1 - count) % m };
                    let mut sum = 0.0;
                    for k in first..first + count {
                        sum += ring[if k >= m { k - m } else { k }];
                    }
                    self.values[idx] = sum;
                }
                Changed::All
            }
            Regime::R2 { m } => {
                let lo = next.saturating_sub(m).max(1);
                let mut nodes = Vec::with_capacity(next - lo);
                for v in lo..next {
                    let idx = v - 1;
                    if self.counts[idx] < m {
                        let c = self.counts[idx] + 1;
                        self.values[idx] += source.increment(v, v + c);
                        self.counts[idx] = c;
                        nodes.push(v);
                    }
                }
                Changed::Nodes(nodes)
            }
            Regime::R3 { schedule } => {
                let w_now = schedule.eval(self.t);
                let w_next = schedule.eval(next);
                let lo = if w_next > w_now { 1 } else { next.saturating_sub(w_next).max(1) };
                let dense = schedule.is_dense();
                let mut nodes = Vec::new();
                let values = &mut self.values[lo - 1..next - 1];
                let counts = &mut self.counts[lo - 1..next - 1];
                for ((v, f), c) in (lo..next).zip(values.iter_mut()).zip(counts.iter_mut()) {
                    let target = w_next.min(next - v);
                    if *c < target {
                        while *c < target {
                            *c += 1;
                            *f += source.increment(v, v + *c);
                        }
                        if !dense {
                            nodes.push(v);
                        }
                    }
                }
                if dense || nodes.len() + 1 >= next {
                    Changed::All
                } else {
                    Changed::Nodes(nodes)
                }
            }
        };
        self.values.push(0.0);
        self.counts.push(0);
        if let Regime::R1 { m } = self.regime {
            self.ring.extend(std::iter::repeat_n(0.0, m));
        }
        self.t = next;
        changed
    }

    /// Window counts and fitness bounds for every node. `O(t)`.
    pub fn check_invariants(&self) -> Result<()> {
        let t = self.t;
        let window = self.regime.window(t);
        for v in 1..=t {
            let count = self.counts[v - 1];
            let expected = window.min(t - v);
            if count != expected {
                return Err(Error::InvariantViolation {
                    t,
                    message: format!("node {v} holds {count} increments, expected {expected}"),
                });
            }
            let f = self.values[v - 1];
            if !(f >= 0.0 && f <= count as f64) {
                return Err(Error::InvariantViolation {
                    t,
                    message: format!("node {v} fitness {f} outside [0, {count}]"),
                });
            }
        }
        Ok(())
    }

    /// Recomputes every `F_t(v)` from the increment source and compares.
    /// Costs one increment evaluation per increment in use.
    pub fn check_window_sums(&self, source: &IncrementSource) -> Result<()> {
        self.check_invariants()?;
        for v in 1..=self.t {
            let f = self.values[v - 1];
            let count = self.counts[v - 1];
            let recomputed: f64 = self.window_contents(v, source)?.iter().map(|(_, e)| e).sum();
            if (recomputed - f).abs() > 1e-9 * (1.0 + count as f64) {
                return Err(Error::InvariantViolation {
                    t: self.t,
                    message: format!("node {v} fitness {f} differs from its window sum {recomputed}"),
                });
            }
        }
        Ok(())
    }
}
