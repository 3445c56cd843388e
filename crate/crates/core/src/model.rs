//! Population and query mechanisms.
//!
//! A [`ModelConfig`] fixes one hidden population together with the way it
//! is queried; the `simulate_*` functions produce one [`Observation`] from
//! it. Every simulator is a pure function of its inputs.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::distributions::{
    draw_binomial, draw_exponential, draw_hypergeometric, draw_poisson, draw_without_replacement, inverse_cdf_boundary,
    uniform_open01, BoundaryFamily,
};
use crate::error::{Error, Result};

/// Model family identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Tank,
    Interval,
    Binomial,
    Ztp,
    Waiting,
    Multiplier,
    Crc2,
    Crck,
    NsumGeneral,
    NsumHidden,
    HtCluster,
}

impl Family {
    pub const ALL: [Family; 11] = [
        Family::Tank,
        Family::Interval,
        Family::Binomial,
        Family::Ztp,
        Family::Waiting,
        Family::Multiplier,
        Family::Crc2,
        Family::Crck,
        Family::NsumGeneral,
        Family::NsumHidden,
        Family::HtCluster,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Tank => "tank",
            Family::Interval => "interval",
            Family::Binomial => "binomial",
            Family::Ztp => "ztp",
            Family::Waiting => "waiting",
            Family::Multiplier => "multiplier",
            Family::Crc2 => "crc2",
            Family::Crck => "crck",
            Family::NsumGeneral => "nsum_general",
            Family::NsumHidden => "nsum_hidden",
            Family::HtCluster => "ht_cluster",
        }
    }

    pub fn parse(s: &str) -> Option<Family> {
        Family::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Observation horizon for the waiting-time model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Horizon {
    Finite(f64),
    /// Every failure is eventually observed.
    Infinite,
}

impl Horizon {
    pub fn from_f64(t: f64) -> Horizon {
        if t.is_infinite() && t > 0.0 {
            Horizon::Infinite
        } else {
            Horizon::Finite(t)
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Horizon::Finite(t) => t,
            Horizon::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Horizon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            Horizon::Finite(t) => s.serialize_f64(t),
            Horizon::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Horizon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(t) => Ok(Horizon::from_f64(t)),
            Raw::Int(t) => Ok(Horizon::Finite(t as f64)),
            Raw::Text(s) => match s.as_str() {
                "inf" | "infinite" | "infinity" => Ok(Horizon::Infinite),
                other => Err(serde::de::Error::custom(format!("horizon must be a number or \"inf\", got {other:?}"))),
            },
        }
    }
}

fn default_prior() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TankConfig {
    pub population: u64,
    pub sample: u64,
    /// Labels run over `offset + 1 ..= offset + population`.
    #[serde(default)]
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntervalConfig {
    pub theta: f64,
    pub sample: u64,
    #[serde(default)]
    pub boundary: BoundaryFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinomialConfig {
    pub population: u64,
    pub p: f64,
    /// Independent counts per observation.
    pub repetitions: u64,
    /// Beta prior on `p` used by the posterior-mode estimator.
    #[serde(default = "default_prior")]
    pub prior_a: f64,
    #[serde(default = "default_prior")]
    pub prior_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZtpConfig {
    pub population: u64,
    pub lambda: f64,
    #[serde(default)]
    pub known_lambda: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaitingConfig {
    pub population: u64,
    pub lambda: f64,
    pub horizon: Horizon,
}

impl WaitingConfig {
    /// Probability that a unit fails before the horizon.
    pub fn detection_probability(&self) -> f64 {
        match self.horizon {
            Horizon::Infinite => 1.0,
            Horizon::Finite(t) => -(-self.lambda * t).exp_m1(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierConfig {
    pub population: u64,
    /// Trait prevalence; the benchmark is Binomial(population, prevalence)
    /// unless `benchmark` pins it.
    pub prevalence: f64,
    /// Size of the second, uniformly drawn sample.
    pub sample: u64,
    /// Redraw the trait-carrier set for every sample pair (otherwise it is
    /// held fixed across pairs, as traits do not change).
    #[serde(default)]
    pub redraw_first: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Crc2Config {
    pub population: u64,
    pub n1: u64,
    pub n2: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrckConfig {
    pub population: u64,
    pub sizes: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NsumGeneralConfig {
    /// Size of the whole population `V`.
    pub total: u64,
    /// Size of the hidden sub-population `U`.
    pub hidden: u64,
    pub edge_prob: f64,
    /// Respondents drawn from `V \ U`.
    pub sample: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NsumHiddenConfig {
    pub hidden: u64,
    pub edge_prob: f64,
    pub sample: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HtClusterConfig {
    pub cluster_sizes: Vec<u64>,
    pub sample: u64,
}

impl HtClusterConfig {
    pub fn total(&self) -> u64 {
        self.cluster_sizes.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelConfig {
    Tank(TankConfig),
    Interval(IntervalConfig),
    Binomial(BinomialConfig),
    Ztp(ZtpConfig),
    Waiting(WaitingConfig),
    Multiplier(MultiplierConfig),
    Crc2(Crc2Config),
    Crck(CrckConfig),
    NsumGeneral(NsumGeneralConfig),
    NsumHidden(NsumHiddenConfig),
    HtCluster(HtClusterConfig),
}

fn unit_open_closed(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x <= 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!("{what} = {x} outside (0, 1]")))
    }
}

fn positive(x: f64, what: &str) -> Result<()> {
    if x > 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(Error::param(format!("{what} = {x} must be finite and > 0")))
    }
}

fn at_most(a: u64, b: u64, what: &str) -> Result<()> {
    if a <= b {
        Ok(())
    } else {
        Err(Error::param(format!("{what}: {a} exceeds {b}")))
    }
}

/// Largest number of capture occasions a capture history key can hold.
pub const MAX_OCCASIONS: usize = 128;

impl ModelConfig {
    pub fn family(&self) -> Family {
        match self {
            ModelConfig::Tank(_) => Family::Tank,
            ModelConfig::Interval(_) => Family::Interval,
            ModelConfig::Binomial(_) => Family::Binomial,
            ModelConfig::Ztp(_) => Family::Ztp,
            ModelConfig::Waiting(_) => Family::Waiting,
            ModelConfig::Multiplier(_) => Family::Multiplier,
            ModelConfig::Crc2(_) => Family::Crc2,
            ModelConfig::Crck(_) => Family::Crck,
            ModelConfig::NsumGeneral(_) => Family::NsumGeneral,
            ModelConfig::NsumHidden(_) => Family::NsumHidden,
            ModelConfig::HtCluster(_) => Family::HtCluster,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::Tank(c) => {
                if c.population == 0 {
                    return Err(Error::param("tank population must be >= 1"));
                }
                at_most(c.sample, c.population, "tank sample size")?;
                if c.sample == 0 {
                    return Err(Error::param("tank sample size must be >= 1"));
                }
                Ok(())
            }
            ModelConfig::Interval(c) => {
                positive(c.theta, "interval length")?;
                if c.sample == 0 {
                    return Err(Error::param("interval sample size must be >= 1"));
                }
                c.boundary.validate()
            }
            ModelConfig::Binomial(c) => {
                unit_open_closed(c.p, "binomial p")?;
                if c.repetitions == 0 {
                    return Err(Error::param("binomial repetitions must be >= 1"));
                }
                if !(c.prior_a > 1.0) {
                    return Err(Error::param(format!(
                        "beta prior a = {} must exceed 1 for a proper posterior",
                        c.prior_a
                    )));
                }
                positive(c.prior_b, "beta prior b")
            }
            ModelConfig::Ztp(c) => positive(c.lambda, "poisson rate"),
            ModelConfig::Waiting(c) => {
                positive(c.lambda, "failure rate")?;
                match c.horizon {
                    Horizon::Infinite => Ok(()),
                    Horizon::Finite(t) => positive(t, "observation horizon"),
                }
            }
            ModelConfig::Multiplier(c) => {
                unit_open_closed(c.prevalence, "trait prevalence")?;
                at_most(c.sample, c.population, "multiplier second sample")?;
                if let Some(x) = c.benchmark {
                    at_most(x, c.population, "multiplier benchmark")?;
                }
                Ok(())
            }
            ModelConfig::Crc2(c) => {
                at_most(c.n1, c.population, "first capture size")?;
                at_most(c.n2, c.population, "second capture size")?;
                if c.n1 == 0 || c.n2 == 0 {
                    return Err(Error::param("capture sizes must be >= 1"));
                }
                Ok(())
            }
            ModelConfig::Crck(c) => {
                if c.sizes.len() < 2 {
                    return Err(Error::param("k-sample capture-recapture needs k >= 2"));
                }
                if c.sizes.len() > MAX_OCCASIONS {
                    return Err(Error::param(format!("at most {MAX_OCCASIONS} capture occasions are supported")));
                }
                for (i, &n) in c.sizes.iter().enumerate() {
                    at_most(n, c.population, &format!("capture size {}", i + 1))?;
                }
                Ok(())
            }
            ModelConfig::NsumGeneral(c) => {
                unit_open_closed(c.edge_prob, "edge probability")?;
                at_most(c.hidden, c.total, "hidden population")?;
                at_most(c.sample, c.total - c.hidden, "respondent sample")?;
                if c.total < 2 {
                    return Err(Error::param("total population must be >= 2"));
                }
                Ok(())
            }
            ModelConfig::NsumHidden(c) => {
                unit_open_closed(c.edge_prob, "edge probability")?;
                at_most(c.sample, c.hidden, "hidden-population sample")
            }
            ModelConfig::HtCluster(c) => {
                if c.cluster_sizes.is_empty() || c.cluster_sizes.contains(&0) {
                    return Err(Error::param("every cluster needs at least one unit"));
                }
                if c.sample == 0 {
                    return Err(Error::param("cluster design sample size must be >= 1"));
                }
                at_most(c.sample, c.total(), "cluster design sample size")
            }
        }
    }

    /// Size of the hidden set being estimated.
    pub fn target(&self) -> f64 {
        match self {
            ModelConfig::Tank(c) => c.population as f64,
            ModelConfig::Interval(c) => c.theta,
            ModelConfig::Binomial(c) => c.population as f64,
            ModelConfig::Ztp(c) => c.population as f64,
            ModelConfig::Waiting(c) => c.population as f64,
            ModelConfig::Multiplier(c) => c.population as f64,
            ModelConfig::Crc2(c) => c.population as f64,
            ModelConfig::Crck(c) => c.population as f64,
            ModelConfig::NsumGeneral(c) => c.hidden as f64,
            ModelConfig::NsumHidden(c) => c.hidden as f64,
            ModelConfig::HtCluster(c) => c.total() as f64,
        }
    }

    /// Sample sizes as reported in result tables.
    pub fn sample_sizes(&self) -> Vec<u64> {
        match self {
            ModelConfig::Tank(c) => vec![c.sample],
            ModelConfig::Interval(c) => vec![c.sample],
            ModelConfig::Binomial(c) => vec![c.repetitions],
            ModelConfig::Ztp(_) | ModelConfig::Waiting(_) => vec![],
            ModelConfig::Multiplier(c) => match c.benchmark {
                Some(x) => vec![x, c.sample],
                None => vec![c.sample],
            },
            ModelConfig::Crc2(c) => vec![c.n1, c.n2],
            ModelConfig::Crck(c) => c.sizes.clone(),
            ModelConfig::NsumGeneral(c) => vec![c.sample],
            ModelConfig::NsumHidden(c) => vec![c.sample],
            ModelConfig::HtCluster(c) => vec![c.sample],
        }
    }
}

/// Outcome of a capture-recapture sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaptureSummary {
    /// `n_i`.
    pub sizes: Vec<u64>,
    /// `M_i`: units marked before occasion `i` (`M_1 = 0`).
    pub marked_before: Vec<u64>,
    /// `m_i`: already-marked units caught on occasion `i` (`m_1 = 0`).
    pub recaptured: Vec<u64>,
    /// `r`: distinct units ever caught.
    pub distinct: u64,
    /// Known cells of the contingency table, keyed by capture history
    /// (bit `i` set when caught on occasion `i + 1`). The all-zero cell is
    /// never present. `None` when only the summary was simulated.
    pub table: Option<BTreeMap<u128, u64>>,
}

impl CaptureSummary {
    pub fn occasions(&self) -> usize {
        self.sizes.len()
    }

    /// Builds the summary from explicit per-unit capture histories.
    pub fn from_histories(sizes: &[u64], histories: &[u128]) -> CaptureSummary {
        let k = sizes.len();
        let mut table: BTreeMap<u128, u64> = BTreeMap::new();
        let mut marked_before = vec![0u64; k];
        let mut recaptured = vec![0u64; k];
        for &h in histories {
            if h == 0 {
                continue;
            }
            *table.entry(h).or_insert(0) += 1;
            let first = h.trailing_zeros() as usize;
            for (i, (mb, rc)) in marked_before.iter_mut().zip(recaptured.iter_mut()).enumerate() {
                if i > first {
                    *mb += 1;
                    if h >> i & 1 == 1 {
                        *rc += 1;
                    }
                }
            }
        }
        let distinct = table.values().sum();
        CaptureSummary { sizes: sizes.to_vec(), marked_before, recaptured, distinct, table: Some(table) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HtUnit {
    pub cluster: u32,
    pub cluster_size: u64,
    /// Design inclusion probability `n / (H · N_h)`.
    pub inclusion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Observation {
    /// Sorted sampled labels.
    Tank {
        labels: Vec<u64>,
    },
    /// Sorted draws.
    Interval {
        draws: Vec<f64>,
    },
    Binomial {
        counts: Vec<u64>,
    },
    /// Positive counts of the units that were seen; `|s|` is the length.
    Ztp {
        counts: Vec<u64>,
    },
    /// Ordered failure times before the horizon.
    Waiting {
        times: Vec<f64>,
    },
    Multiplier {
        benchmark: u64,
        overlap: u64,
        sample: u64,
    },
    Crc2 {
        n1: u64,
        n2: u64,
        overlap: u64,
    },
    Crck(CaptureSummary),
    /// `(d_i^V, d_i^U)` per respondent.
    NsumGeneral {
        degrees: Vec<(u64, u64)>,
    },
    /// `(d_i^U, d_i^s)` per sampled hidden unit.
    NsumHidden {
        degrees: Vec<(u64, u64)>,
    },
    HtCluster {
        units: Vec<HtUnit>,
    },
}

impl Observation {
    pub fn family(&self) -> Family {
        match self {
            Observation::Tank { .. } => Family::Tank,
            Observation::Interval { .. } => Family::Interval,
            Observation::Binomial { .. } => Family::Binomial,
            Observation::Ztp { .. } => Family::Ztp,
            Observation::Waiting { .. } => Family::Waiting,
            Observation::Multiplier { .. } => Family::Multiplier,
            Observation::Crc2 { .. } => Family::Crc2,
            Observation::Crck(_) => Family::Crck,
            Observation::NsumGeneral { .. } => Family::NsumGeneral,
            Observation::NsumHidden { .. } => Family::NsumHidden,
            Observation::HtCluster { .. } => Family::HtCluster,
        }
    }
}

/// The trait-carrier set of the multiplier model. Only its size enters the
/// law of the overlap, so that is all that is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FirstSample {
    pub size: u64,
}

fn wrong_family(expected: &str, cfg: &ModelConfig) -> Error {
    Error::param(format!("expected {expected} configuration, got {}", cfg.family()))
}

pub fn simulate_ordered<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Observation> {
    cfg.validate()?;
    match cfg {
        ModelConfig::Tank(c) => {
            let mut labels = draw_without_replacement(c.population, c.sample, rng)?;
            if c.offset != 0 {
                for x in &mut labels {
                    *x += c.offset;
                }
            }
            Ok(Observation::Tank { labels })
        }
        ModelConfig::Interval(c) => {
            let mut draws = (0..c.sample)
                .map(|_| inverse_cdf_boundary(uniform_open01(rng), c.theta, c.boundary))
                .collect::<Result<Vec<_>>>()?;
            draws.sort_by(f64::total_cmp);
            Ok(Observation::Interval { draws })
        }
        other => Err(wrong_family("tank or interval", other)),
    }
}

pub fn simulate_counts<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Observation> {
    cfg.validate()?;
    match cfg {
        ModelConfig::Binomial(c) => {
            let counts =
                (0..c.repetitions).map(|_| draw_binomial(c.population, c.p, rng)).collect::<Result<Vec<_>>>()?;
            Ok(Observation::Binomial { counts })
        }
        ModelConfig::Ztp(c) => {
            let mut counts = Vec::new();
            for _ in 0..c.population {
                let x = draw_poisson(c.lambda, rng)?;
                if x > 0 {
                    counts.push(x);
                }
            }
            Ok(Observation::Ztp { counts })
        }
        ModelConfig::Waiting(c) => {
            let horizon = c.horizon.as_f64();
            let mut times = Vec::new();
            for _ in 0..c.population {
                let t = draw_exponential(c.lambda, rng)?;
                if t < horizon {
                    times.push(t);
                }
            }
            times.sort_by(f64::total_cmp);
            Ok(Observation::Waiting { times })
        }
        other => Err(wrong_family("binomial, ztp or waiting", other)),
    }
}

/// Draws the trait-carrier set for a multiplier configuration.
pub fn draw_first_sample<R: Rng + ?Sized>(c: &MultiplierConfig, rng: &mut R) -> Result<FirstSample> {
    let size = match c.benchmark {
        Some(x) => x,
        None => draw_binomial(c.population, c.prevalence, rng)?,
    };
    Ok(FirstSample { size })
}

/// Multiplier and two-sample capture-recapture. For the multiplier a
/// supplied `fixed_first` is reused as the trait-carrier set; without it a
/// new one is drawn. Capture-recapture always redraws both samples.
pub fn simulate_two_sample<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    rng: &mut R,
    fixed_first: Option<&FirstSample>,
) -> Result<Observation> {
    cfg.validate()?;
    match cfg {
        ModelConfig::Multiplier(c) => {
            let first = match fixed_first {
                Some(f) => {
                    at_most(f.size, c.population, "fixed benchmark set")?;
                    *f
                }
                None => draw_first_sample(c, rng)?,
            };
            let overlap = draw_hypergeometric(c.population, first.size, c.sample, rng)?;
            Ok(Observation::Multiplier { benchmark: first.size, overlap, sample: c.sample })
        }
        ModelConfig::Crc2(c) => {
            let overlap = draw_hypergeometric(c.population, c.n1, c.n2, rng)?;
            Ok(Observation::Crc2 { n1: c.n1, n2: c.n2, overlap })
        }
        other => Err(wrong_family("multiplier or crc2", other)),
    }
}

/// k sequential uniform samples with full capture histories.
pub fn simulate_crck<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Observation> {
    cfg.validate()?;
    let ModelConfig::Crck(c) = cfg else {
        return Err(wrong_family("crck", cfg));
    };
    let mut histories = vec![0u128; c.population as usize + 1];
    for (i, &n) in c.sizes.iter().enumerate() {
        for unit in draw_without_replacement(c.population, n, rng)? {
            histories[unit as usize] |= 1u128 << i;
        }
    }
    Ok(Observation::Crck(CaptureSummary::from_histories(&c.sizes, &histories)))
}

/// Same law for `(M_i, m_i, r)` as [`simulate_crck`], drawn occasion by
/// occasion as `m_i ~ Hypergeometric(N, M_i, n_i)` without materialising
/// unit histories.
pub fn simulate_crck_summary<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Observation> {
    cfg.validate()?;
    let ModelConfig::Crck(c) = cfg else {
        return Err(wrong_family("crck", cfg));
    };
    let k = c.sizes.len();
    let mut marked_before = Vec::with_capacity(k);
    let mut recaptured = Vec::with_capacity(k);
    let mut marked = 0u64;
    for &n in &c.sizes {
        let m = draw_hypergeometric(c.population, marked, n, rng)?;
        marked_before.push(marked);
        recaptured.push(m);
        marked += n - m;
    }
    Ok(Observation::Crck(CaptureSummary {
        sizes: c.sizes.clone(),
        marked_before,
        recaptured,
        distinct: marked,
        table: None,
    }))
}

/// Calls `edge(i, j)` for every pair `j < i < n` that is joined in an
/// Erdős–Rényi graph with edge probability `p`, skipping geometric gaps.
fn for_each_er_edge<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R, mut edge: impl FnMut(u64, u64)) {
    if n < 2 || p <= 0.0 {
        return;
    }
    if p >= 1.0 {
        for i in 1..n {
            for j in 0..i {
                edge(i, j);
            }
        }
        return;
    }
    let log_q = (-p).ln_1p();
    let mut v: u64 = 1;
    let mut w: i64 = -1;
    while v < n {
        let skip = (uniform_open01(rng).ln() / log_q).floor();
        w += 1 + skip.min(i64::MAX as f64 / 2.0) as i64;
        while w >= v as i64 && v < n {
            w -= v as i64;
            v += 1;
        }
        if v < n {
            edge(v, w as u64);
        }
    }
}

/// Degree data for the two network scale-up scenarios. Only edges incident
/// to sampled units are generated.
pub fn simulate_nsum<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Observation> {
    cfg.validate()?;
    match cfg {
        ModelConfig::NsumGeneral(c) => {
            let n = c.sample;
            let mut within = vec![0u64; n as usize];
            for_each_er_edge(n, c.edge_prob, rng, |i, j| {
                within[i as usize] += 1;
                within[j as usize] += 1;
            });
            let outside = c.total - c.hidden - n;
            let mut degrees = Vec::with_capacity(n as usize);
            for w in within {
                let d_u = draw_binomial(c.hidden, c.edge_prob, rng)?;
                let d_rest = draw_binomial(outside, c.edge_prob, rng)?;
                degrees.push((d_u + d_rest + w, d_u));
            }
            Ok(Observation::NsumGeneral { degrees })
        }
        ModelConfig::NsumHidden(c) => {
            let n = c.sample;
            let mut within = vec![0u64; n as usize];
            for_each_er_edge(n, c.edge_prob, rng, |i, j| {
                within[i as usize] += 1;
                within[j as usize] += 1;
            });
            let outside = c.hidden - n;
            let mut degrees = Vec::with_capacity(n as usize);
            for w in within {
                let d_out = draw_binomial(outside, c.edge_prob, rng)?;
                degrees.push((w + d_out, w));
            }
            Ok(Observation::NsumHidden { degrees })
        }
        other => Err(wrong_family("nsum_general or nsum_hidden", other)),
    }
}

/// Two-stage cluster design: a uniform cluster, then a not-yet-sampled unit
/// inside it. A draw that lands on an exhausted cluster is repeated.
pub fn simulate_ht_cluster<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Observation> {
    cfg.validate()?;
    let ModelConfig::HtCluster(c) = cfg else {
        return Err(wrong_family("ht_cluster", cfg));
    };
    let h = c.cluster_sizes.len() as u64;
    let n = c.sample as f64;
    let mut taken = vec![0u64; c.cluster_sizes.len()];
    let mut units = Vec::with_capacity(c.sample as usize);
    for _ in 0..c.sample {
        let cluster = loop {
            let j = rng.random_range(0..h) as usize;
            if taken[j] < c.cluster_sizes[j] {
                break j;
            }
        };
        taken[cluster] += 1;
        let size = c.cluster_sizes[cluster];
        units.push(HtUnit { cluster: cluster as u32, cluster_size: size, inclusion: n / (h as f64 * size as f64) });
    }
    Ok(Observation::HtCluster { units })
}

/// Dispatches to the simulator for `cfg`'s family.
pub fn simulate<R: Rng + ?Sized>(
    cfg: &ModelConfig,
    rng: &mut R,
    fixed_first: Option<&FirstSample>,
) -> Result<Observation> {
    match cfg.family() {
        Family::Tank | Family::Interval => simulate_ordered(cfg, rng),
        Family::Binomial | Family::Ztp | Family::Waiting => simulate_counts(cfg, rng),
        Family::Multiplier | Family::Crc2 => simulate_two_sample(cfg, rng, fixed_first),
        Family::Crck => simulate_crck_summary(cfg, rng),
        Family::NsumGeneral | Family::NsumHidden => simulate_nsum(cfg, rng),
        Family::HtCluster => simulate_ht_cluster(cfg, rng),
    }
}
