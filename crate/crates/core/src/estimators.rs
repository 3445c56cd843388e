//! Point estimators of the hidden-set size and closed-form moment
//! approximations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CaptureSummary, Family, HtUnit, ModelConfig, Observation};
use crate::solver::{bisect, bracket_up, last_true, REL_TOL};
use crate::special::{digamma, ln_beta, ln_factorial, ln_gamma};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// A denominator vanished or an existence condition failed.
    Undefined,
    /// A search hit its bound.
    Boundary,
}

/// Stable estimator identifiers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EstimatorId {
    TankMle,
    TankGoodman,
    TankGap,
    TankUnknownOrigin,
    TankBayesMean,
    IntervalMle,
    IntervalUmvue,
    BinomMme,
    BinomMleDiscrete,
    BinomMleContinuous,
    BinomBayesMode,
    Ztp,
    WaitingMle,
    Mbm,
    NsumGeneral,
    NsumHidden,
    NsumHiddenMme,
    Ht,
    CrcLp,
    CrcChapman,
    CrcKMle,
    CrcSeberMean,
}

impl EstimatorId {
    pub const ALL: [EstimatorId; 22] = [
        EstimatorId::TankMle,
        EstimatorId::TankGoodman,
        EstimatorId::TankGap,
        EstimatorId::TankUnknownOrigin,
        EstimatorId::TankBayesMean,
        EstimatorId::IntervalMle,
        EstimatorId::IntervalUmvue,
        EstimatorId::BinomMme,
        EstimatorId::BinomMleDiscrete,
        EstimatorId::BinomMleContinuous,
        EstimatorId::BinomBayesMode,
        EstimatorId::Ztp,
        EstimatorId::WaitingMle,
        EstimatorId::Mbm,
        EstimatorId::NsumGeneral,
        EstimatorId::NsumHidden,
        EstimatorId::NsumHiddenMme,
        EstimatorId::Ht,
        EstimatorId::CrcLp,
        EstimatorId::CrcChapman,
        EstimatorId::CrcKMle,
        EstimatorId::CrcSeberMean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimatorId::TankMle => "tank.mle",
            EstimatorId::TankGoodman => "tank.goodman",
            EstimatorId::TankGap => "tank.gap",
            EstimatorId::TankUnknownOrigin => "tank.unknown_origin",
            EstimatorId::TankBayesMean => "tank.bayes_mean",
            EstimatorId::IntervalMle => "interval.mle",
            EstimatorId::IntervalUmvue => "interval.umvue",
            EstimatorId::BinomMme => "binom.mme",
            EstimatorId::BinomMleDiscrete => "binom.mle_discrete",
            EstimatorId::BinomMleContinuous => "binom.mle_continuous",
            EstimatorId::BinomBayesMode => "binom.bayes_mode",
            EstimatorId::Ztp => "ztp",
            EstimatorId::WaitingMle => "waiting.mle",
            EstimatorId::Mbm => "mbm",
            EstimatorId::NsumGeneral => "nsum.general",
            EstimatorId::NsumHidden => "nsum.hidden",
            EstimatorId::NsumHiddenMme => "nsum.hidden_mme",
            EstimatorId::Ht => "ht",
            EstimatorId::CrcLp => "crc.lp",
            EstimatorId::CrcChapman => "crc.chapman",
            EstimatorId::CrcKMle => "crc.k_mle",
            EstimatorId::CrcSeberMean => "crc.seber_mean",
        }
    }

    pub fn parse(s: &str) -> Option<EstimatorId> {
        EstimatorId::ALL.into_iter().find(|id| id.as_str() == s)
    }

    /// The model family whose observations this estimator consumes.
    pub fn family(self) -> Family {
        use EstimatorId::*;
        match self {
            TankMle | TankGoodman | TankGap | TankUnknownOrigin | TankBayesMean => Family::Tank,
            IntervalMle | IntervalUmvue => Family::Interval,
            BinomMme | BinomMleDiscrete | BinomMleContinuous | BinomBayesMode => Family::Binomial,
            Ztp => Family::Ztp,
            WaitingMle => Family::Waiting,
            Mbm => Family::Multiplier,
            NsumGeneral => Family::NsumGeneral,
            NsumHidden | NsumHiddenMme => Family::NsumHidden,
            Ht => Family::HtCluster,
            CrcLp | CrcChapman => Family::Crc2,
            CrcKMle | CrcSeberMean => Family::Crck,
        }
    }

    pub fn compatible_with(self, family: Family) -> bool {
        self.family() == family
    }

    /// Estimators combined across repeated samples by taking the maximum
    /// rather than the average.
    pub fn combines_by_max(self) -> bool {
        matches!(self, EstimatorId::TankMle | EstimatorId::IntervalMle)
    }
}

impl fmt::Display for EstimatorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for EstimatorId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EstimatorId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        EstimatorId::parse(&s).ok_or_else(|| serde::de::Error::custom(format!("unknown estimator {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimator_id: EstimatorId,
    pub value: f64,
    pub status: Status,
}

impl Estimate {
    pub fn ok(id: EstimatorId, value: f64) -> Estimate {
        Estimate { estimator_id: id, value, status: Status::Ok }
    }

    pub fn undefined(id: EstimatorId) -> Estimate {
        Estimate { estimator_id: id, value: f64::NAN, status: Status::Undefined }
    }

    pub fn boundary(id: EstimatorId, value: f64) -> Estimate {
        Estimate { estimator_id: id, value, status: Status::Boundary }
    }

    pub fn is_defined(&self) -> bool {
        self.status != Status::Undefined
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankEstimates {
    pub mle: Estimate,
    pub goodman: Estimate,
    pub gap: Estimate,
    pub unknown_origin: Estimate,
    pub bayes_mean: Estimate,
}

/// Estimators from a sorted sample of serial numbers.
pub fn est_german_tank(labels: &[u64]) -> TankEstimates {
    use EstimatorId::*;
    let n = labels.len();
    if n == 0 {
        return TankEstimates {
            mle: Estimate::undefined(TankMle),
            goodman: Estimate::undefined(TankGoodman),
            gap: Estimate::undefined(TankGap),
            unknown_origin: Estimate::undefined(TankUnknownOrigin),
            bayes_mean: Estimate::undefined(TankBayesMean),
        };
    }
    let nf = n as f64;
    let max = labels[n - 1] as f64;
    let min = labels[0] as f64;
    let gap =
        if n >= 2 { Estimate::ok(TankGap, max + (max - min) / (nf - 1.0) - 1.0) } else { Estimate::undefined(TankGap) };
    let unknown_origin = if n >= 2 {
        Estimate::ok(TankUnknownOrigin, (nf + 1.0) * (max - min) / (nf - 1.0) - 1.0)
    } else {
        Estimate::undefined(TankUnknownOrigin)
    };
    let bayes_mean = if n > 2 {
        Estimate::ok(TankBayesMean, (nf - 1.0) * (max - 1.0) / (nf - 2.0))
    } else {
        Estimate::undefined(TankBayesMean)
    };
    TankEstimates {
        mle: Estimate::ok(TankMle, max),
        goodman: Estimate::ok(TankGoodman, max + (max - nf) / nf),
        gap,
        unknown_origin,
        bayes_mean,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalEstimates {
    pub mle: Estimate,
    pub umvue: Estimate,
}

pub fn est_interval(draws: &[f64]) -> IntervalEstimates {
    let Some(max) = draws.iter().copied().reduce(f64::max) else {
        return IntervalEstimates {
            mle: Estimate::undefined(EstimatorId::IntervalMle),
            umvue: Estimate::undefined(EstimatorId::IntervalUmvue),
        };
    };
    let n = draws.len() as f64;
    IntervalEstimates {
        mle: Estimate::ok(EstimatorId::IntervalMle, max),
        umvue: Estimate::ok(EstimatorId::IntervalUmvue, (n + 1.0) / n * max),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinomialEstimates {
    pub mme: Estimate,
    pub mle_discrete: Estimate,
    pub mle_continuous: Estimate,
}

fn binomial_search_cap(max_count: u64, p: f64) -> u64 {
    let cap = 10.0 * (max_count as f64 + 1.0) / p + 100.0;
    if cap >= u64::MAX as f64 / 2.0 {
        u64::MAX / 2
    } else {
        cap.ceil() as u64
    }
}

/// Discrete binomial-N MLE: the largest `N >= X_(n)` with `L(N) >= L(N-1)`.
pub fn binomial_mle_discrete(counts: &[u64], p: f64) -> Estimate {
    let id = EstimatorId::BinomMleDiscrete;
    let Some(&max) = counts.iter().max() else {
        return Estimate::undefined(id);
    };
    if max == 0 {
        return Estimate::boundary(id, 0.0);
    }
    if p >= 1.0 {
        return Estimate::ok(id, max as f64);
    }
    let n_ln_q = counts.len() as f64 * (-p).ln_1p();
    // ln L(N) - ln L(N-1) = Σ ln(N / (N - x_i)) + n ln(1 - p), decreasing in N.
    let keep = |big_n: u64| {
        if big_n <= max {
            return true;
        }
        let nf = big_n as f64;
        let s: f64 = counts.iter().map(|&x| -(-(x as f64) / nf).ln_1p()).sum();
        s + n_ln_q >= -1e-12
    };
    let cap = binomial_search_cap(max, p);
    let (n, hit_cap) = last_true(keep, max, cap);
    if hit_cap {
        Estimate::boundary(id, n as f64)
    } else {
        Estimate::ok(id, n as f64)
    }
}

/// Continuous binomial-N MLE from the digamma score.
pub fn binomial_mle_continuous(counts: &[u64], p: f64) -> Estimate {
    let id = EstimatorId::BinomMleContinuous;
    let Some(&max) = counts.iter().max() else {
        return Estimate::undefined(id);
    };
    if max == 0 {
        return Estimate::boundary(id, 0.0);
    }
    let maxf = max as f64;
    if p >= 1.0 {
        return Estimate::ok(id, maxf);
    }
    let n_ln_q = counts.len() as f64 * (-p).ln_1p();
    let score = |big_n: f64| {
        let psi = digamma(big_n + 1.0);
        counts.iter().map(|&x| psi - digamma(big_n - x as f64 + 1.0)).sum::<f64>() + n_ln_q
    };
    if score(maxf) <= 0.0 {
        return Estimate::ok(id, maxf);
    }
    let cap = binomial_search_cap(max, p) as f64;
    match bracket_up(score, maxf, cap) {
        Some((lo, hi)) => match bisect(score, lo, hi, REL_TOL) {
            Ok(root) => Estimate::ok(id, root),
            Err(_) => Estimate::undefined(id),
        },
        None => Estimate::boundary(id, cap),
    }
}

/// `x̄ / p`.
pub fn binomial_mme(counts: &[u64], p: f64) -> Estimate {
    if counts.is_empty() || !(p > 0.0) {
        return Estimate::undefined(EstimatorId::BinomMme);
    }
    let mean = counts.iter().sum::<u64>() as f64 / counts.len() as f64;
    Estimate::ok(EstimatorId::BinomMme, mean / p)
}

/// Known-`p` binomial estimators.
pub fn est_binomial_known_p(counts: &[u64], p: f64) -> BinomialEstimates {
    BinomialEstimates {
        mme: binomial_mme(counts, p),
        mle_discrete: binomial_mle_discrete(counts, p),
        mle_continuous: binomial_mle_continuous(counts, p),
    }
}

/// Default upper end of the posterior grid.
pub fn default_bayes_cap(counts: &[u64]) -> u64 {
    50 * counts.iter().copied().max().unwrap_or(0) + 100
}

/// Posterior mode of `N` under a Beta(a, b) prior on `p` and a flat prior
/// on `N`, searched over `[X_(n), n_max]`.
pub fn est_binomial_unknown_p(counts: &[u64], prior_a: f64, prior_b: f64, n_max: u64) -> Result<Estimate> {
    let id = EstimatorId::BinomBayesMode;
    if !(prior_a > 1.0) {
        return Err(Error::param(format!("beta prior a = {prior_a} gives an improper posterior; need a > 1")));
    }
    if !(prior_b > 0.0) {
        return Err(Error::param(format!("beta prior b = {prior_b} must be > 0")));
    }
    let Some(&max) = counts.iter().max() else {
        return Ok(Estimate::undefined(id));
    };
    if n_max < max {
        return Err(Error::param(format!("posterior grid cap {n_max} below largest count {max}")));
    }
    let n = counts.len() as f64;
    let total = counts.iter().sum::<u64>() as f64;
    let ln_fact_x: f64 = counts.iter().map(|&x| ln_factorial(x)).sum();
    let log_post = |big_n: u64| {
        let nf = big_n as f64;
        let choose: f64 =
            counts.iter().map(|&x| ln_gamma(nf + 1.0) - ln_gamma(nf - x as f64 + 1.0)).sum::<f64>() - ln_fact_x;
        choose + ln_beta(prior_a + total, prior_b + n * nf - total)
    };
    let mut best = max;
    let mut best_val = log_post(max);
    for big_n in max + 1..=n_max {
        let v = log_post(big_n);
        if v > best_val {
            best_val = v;
            best = big_n;
        }
    }
    Ok(if best == n_max { Estimate::boundary(id, best as f64) } else { Estimate::ok(id, best as f64) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZtpEstimates {
    pub lambda_hat: f64,
    pub n_hat: Estimate,
}

/// Root of `λ / (1 - e^{-λ}) = mean` for `mean > 1`.
pub fn ztp_rate_from_mean(mean: f64) -> Option<f64> {
    if !(mean > 1.0) || !mean.is_finite() {
        return None;
    }
    let h = |l: f64| l / -(-l).exp_m1() - mean;
    bisect(h, 1e-12, mean, REL_TOL).ok()
}

pub fn est_ztp(counts: &[u64], lambda_known: Option<f64>) -> ZtpEstimates {
    let id = EstimatorId::Ztp;
    let seen = counts.len();
    if seen == 0 {
        return ZtpEstimates { lambda_hat: f64::NAN, n_hat: Estimate::undefined(id) };
    }
    let lambda = match lambda_known {
        Some(l) => Some(l),
        None => ztp_rate_from_mean(counts.iter().sum::<u64>() as f64 / seen as f64),
    };
    match lambda {
        Some(l) if l > 0.0 => ZtpEstimates { lambda_hat: l, n_hat: Estimate::ok(id, seen as f64 / -(-l).exp_m1()) },
        _ => ZtpEstimates { lambda_hat: f64::NAN, n_hat: Estimate::undefined(id) },
    }
}

/// Waiting-time MLE; the likelihood reduces to a binomial count with
/// `p = 1 - e^{-λT}`.
pub fn est_waiting_time(failures: u64, detection_probability: f64) -> Estimate {
    let e = binomial_mle_discrete(&[failures], detection_probability);
    Estimate { estimator_id: EstimatorId::WaitingMle, ..e }
}

/// `x · n / m`.
pub fn est_multiplier(benchmark: u64, overlap: u64, sample: u64) -> Estimate {
    if overlap == 0 {
        return Estimate::undefined(EstimatorId::Mbm);
    }
    Estimate::ok(EstimatorId::Mbm, benchmark as f64 * sample as f64 / overlap as f64)
}

/// `M · Σd^U / Σd^V` over `(d^V, d^U)` pairs.
pub fn est_nsum_general(degrees: &[(u64, u64)], total: u64) -> Estimate {
    let dv: u64 = degrees.iter().map(|d| d.0).sum();
    let du: u64 = degrees.iter().map(|d| d.1).sum();
    if dv == 0 {
        return Estimate::undefined(EstimatorId::NsumGeneral);
    }
    Estimate::ok(EstimatorId::NsumGeneral, total as f64 * du as f64 / dv as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NsumHiddenEstimates {
    pub simplified: Estimate,
    pub mme: Estimate,
}

/// Ratio estimators over `(d^U, d^s)` pairs.
pub fn est_nsum_hidden(degrees: &[(u64, u64)]) -> NsumHiddenEstimates {
    let du: u64 = degrees.iter().map(|d| d.0).sum();
    let ds: u64 = degrees.iter().map(|d| d.1).sum();
    if ds == 0 {
        return NsumHiddenEstimates {
            simplified: Estimate::undefined(EstimatorId::NsumHidden),
            mme: Estimate::undefined(EstimatorId::NsumHiddenMme),
        };
    }
    let n = degrees.len() as f64;
    let ratio = du as f64 / ds as f64;
    NsumHiddenEstimates {
        simplified: Estimate::ok(EstimatorId::NsumHidden, n * ratio),
        mme: Estimate::ok(EstimatorId::NsumHiddenMme, (n - 1.0) * ratio + 1.0),
    }
}

/// Horvitz-Thompson total `Σ 1/p_i`.
pub fn est_ht_from_probabilities(inclusion: &[f64]) -> Estimate {
    if inclusion.is_empty() || inclusion.iter().any(|&p| !(p > 0.0)) {
        return Estimate::undefined(EstimatorId::Ht);
    }
    Estimate::ok(EstimatorId::Ht, inclusion.iter().map(|p| 1.0 / p).sum())
}

pub fn est_ht(units: &[HtUnit]) -> Estimate {
    let probs: Vec<f64> = units.iter().map(|u| u.inclusion).collect();
    est_ht_from_probabilities(&probs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crc2Estimates {
    pub lincoln_petersen: Estimate,
    pub chapman: Estimate,
}

pub fn est_crc2(n1: u64, n2: u64, overlap: u64) -> Crc2Estimates {
    let (a, b, m) = (n1 as f64, n2 as f64, overlap as f64);
    let lincoln_petersen = if overlap == 0 {
        Estimate::undefined(EstimatorId::CrcLp)
    } else {
        Estimate::ok(EstimatorId::CrcLp, a * b / m)
    };
    Crc2Estimates {
        lincoln_petersen,
        chapman: Estimate::ok(EstimatorId::CrcChapman, ((a + 1.0) * (b + 1.0) - (m + 1.0)) / (m + 1.0)),
    }
}

/// Sign of `(1 - r/N) - Π(1 - n_i/N)` in log form, with sizes grouped as
/// `(size, multiplicity)`.
fn darroch_log_gap(big_n: f64, distinct: f64, groups: &[(f64, f64)]) -> f64 {
    (-distinct / big_n).ln_1p() - groups.iter().map(|&(n, c)| c * (-n / big_n).ln_1p()).sum::<f64>()
}

fn group_sizes(sizes: &[u64]) -> Vec<(f64, f64)> {
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    let mut groups: Vec<(f64, f64)> = Vec::new();
    for n in sorted {
        match groups.last_mut() {
            Some(g) if g.0 == n as f64 => g.1 += 1.0,
            _ => groups.push((n as f64, 1.0)),
        }
    }
    groups
}

/// Darroch k-sample MLE from the distinct count `r` and sample sizes.
///
/// A finite solution exists iff some unit was caught twice (`Σ n_i > r`).
/// When the largest sample already holds all `r` units the root sits at `r`.
pub fn darroch_mle(distinct: u64, sizes: &[u64]) -> Estimate {
    let id = EstimatorId::CrcKMle;
    let max = sizes.iter().copied().max().unwrap_or(0);
    let sum: u64 = sizes.iter().sum();
    if sizes.len() < 2 || distinct == 0 || max > distinct || sum <= distinct {
        return Estimate::undefined(id);
    }
    if max == distinct {
        return Estimate::ok(id, distinct as f64);
    }
    let r = distinct as f64;
    let groups = group_sizes(sizes);
    let f = |n: f64| darroch_log_gap(n, r, &groups);
    let cap = 1e300;
    match bracket_up(f, r * (1.0 + 1e-12), cap) {
        Some((lo, hi)) => match bisect(f, lo, hi, REL_TOL) {
            Ok(root) => Estimate::ok(id, root.max(r)),
            Err(_) => Estimate::undefined(id),
        },
        None => Estimate::boundary(id, cap),
    }
}

pub fn est_crck(summary: &CaptureSummary) -> Estimate {
    darroch_mle(summary.distinct, &summary.sizes)
}

/// Mean of the per-occasion Chapman estimates `(M_i+1)(n_i+1)/(m_i+1) - 1`.
pub fn est_seber_mean(summary: &CaptureSummary) -> Estimate {
    let id = EstimatorId::CrcSeberMean;
    let k = summary.occasions();
    if k < 2 {
        return Estimate::undefined(id);
    }
    // Double-double accumulation keeps the mean correctly rounded.
    let (mut hi, mut lo) = (0.0f64, 0.0f64);
    for i in 1..k {
        let big_m = summary.marked_before[i] as i128;
        let n = summary.sizes[i] as i128;
        let m = summary.recaptured[i] as i128;
        let num = ((big_m + 1) * (n + 1) - (m + 1)) as f64;
        let den = (m + 1) as f64;
        let q = num / den;
        let r = (-q).mul_add(den, num) / den;
        let s = hi + q;
        let bv = s - hi;
        lo += (hi - (s - bv)) + (q - bv) + r;
        hi = s;
    }
    let d = (k - 1) as f64;
    let t = hi / d;
    Estimate::ok(id, t + ((-t).mul_add(d, hi) + lo) / d)
}

/// Closed-form moment approximations for the capture-recapture estimators.
/// `None` marks an entry whose formula is outside its domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrcMoments {
    pub chapman_bias_exact: Option<f64>,
    pub chapman_var_outfill: Option<f64>,
    pub darroch_bias: Option<f64>,
    pub darroch_var: Option<f64>,
}

/// `N(1 - Π(1 - n_i/N))`.
pub fn expected_distinct(population: u64, sizes: &[u64]) -> f64 {
    let nf = population as f64;
    nf * (1.0 - sizes.iter().map(|&n| 1.0 - n as f64 / nf).product::<f64>())
}

pub fn chapman_bias_exact(population: u64, n1: u64, n2: u64) -> Option<f64> {
    if n1 + n2 + 1 > population {
        return None;
    }
    let ln = ln_factorial(population - n1) + ln_factorial(population - n2)
        - ln_factorial(population)
        - ln_factorial(population - n1 - n2 - 1);
    Some(-ln.exp())
}

pub fn chapman_var_outfill(population: u64, n1: u64, n2: u64) -> Option<f64> {
    if n1 == 0 || n2 == 0 {
        return None;
    }
    let nf = population as f64;
    let q = nf / (n1 as f64 * n2 as f64);
    Some(nf * nf * (q + 2.0 * q * q + 6.0 * q * q * q))
}

pub fn approx_crc_moments(population: u64, sizes: &[u64], r_plugin: f64) -> CrcMoments {
    let (chapman_bias_exact, chapman_var_outfill) = match sizes {
        [n1, n2] => (chapman_bias_exact(population, *n1, *n2), chapman_var_outfill(population, *n1, *n2)),
        _ => (None, None),
    };
    let nf = population as f64;
    let k = sizes.len() as f64;
    let max = sizes.iter().copied().max().unwrap_or(0) as f64;
    let darroch_ok = sizes.len() >= 2 && r_plugin > max && r_plugin < nf;
    let (darroch_bias, darroch_var) = if darroch_ok {
        let s1: f64 = sizes.iter().map(|&n| 1.0 / (nf - n as f64)).sum();
        let s2: f64 = sizes.iter().map(|&n| (nf - n as f64).powi(-2)).sum();
        let a = (k - 1.0) / nf - s1;
        let b = (k - 1.0) / (nf * nf) - s2;
        let d = 1.0 / (nf - r_plugin) + a;
        (Some((a * a + b) / (2.0 * d * d)), Some(1.0 / d))
    } else {
        (None, None)
    };
    CrcMoments { chapman_bias_exact, chapman_var_outfill, darroch_bias, darroch_var }
}

fn mismatch(id: EstimatorId, obs: &Observation) -> Error {
    Error::Unsupported(format!("estimator {id} cannot use a {} observation", obs.family()))
}

/// Evaluates the requested estimators on one observation.
pub fn evaluate(cfg: &ModelConfig, obs: &Observation, ids: &[EstimatorId]) -> Result<Vec<Estimate>> {
    for &id in ids {
        if !id.compatible_with(obs.family()) {
            return Err(mismatch(id, obs));
        }
    }
    let mut out = Vec::with_capacity(ids.len());
    match (obs, cfg) {
        (Observation::Tank { labels }, _) => {
            let e = est_german_tank(labels);
            for &id in ids {
                out.push(match id {
                    EstimatorId::TankMle => e.mle,
                    EstimatorId::TankGoodman => e.goodman,
                    EstimatorId::TankGap => e.gap,
                    EstimatorId::TankUnknownOrigin => e.unknown_origin,
                    _ => e.bayes_mean,
                });
            }
        }
        (Observation::Interval { draws }, _) => {
            let e = est_interval(draws);
            for &id in ids {
                out.push(if id == EstimatorId::IntervalMle { e.mle } else { e.umvue });
            }
        }
        (Observation::Binomial { counts }, ModelConfig::Binomial(c)) => {
            for &id in ids {
                out.push(match id {
                    EstimatorId::BinomMme => binomial_mme(counts, c.p),
                    EstimatorId::BinomMleDiscrete => binomial_mle_discrete(counts, c.p),
                    EstimatorId::BinomMleContinuous => binomial_mle_continuous(counts, c.p),
                    _ => est_binomial_unknown_p(counts, c.prior_a, c.prior_b, default_bayes_cap(counts))?,
                });
            }
        }
        (Observation::Ztp { counts }, ModelConfig::Ztp(c)) => {
            let known = c.known_lambda.then_some(c.lambda);
            let e = est_ztp(counts, known);
            out.extend(ids.iter().map(|_| e.n_hat));
        }
        (Observation::Waiting { times }, ModelConfig::Waiting(c)) => {
            let e = est_waiting_time(times.len() as u64, c.detection_probability());
            out.extend(ids.iter().map(|_| e));
        }
        (Observation::Multiplier { benchmark, overlap, sample }, _) => {
            let e = est_multiplier(*benchmark, *overlap, *sample);
            out.extend(ids.iter().map(|_| e));
        }
        (Observation::Crc2 { n1, n2, overlap }, _) => {
            let e = est_crc2(*n1, *n2, *overlap);
            for &id in ids {
                out.push(if id == EstimatorId::CrcLp { e.lincoln_petersen } else { e.chapman });
            }
        }
        (Observation::Crck(s), _) => {
            for &id in ids {
                out.push(if id == EstimatorId::CrcKMle { est_crck(s) } else { est_seber_mean(s) });
            }
        }
        (Observation::NsumGeneral { degrees }, ModelConfig::NsumGeneral(c)) => {
            let e = est_nsum_general(degrees, c.total);
            out.extend(ids.iter().map(|_| e));
        }
        (Observation::NsumHidden { degrees }, _) => {
            let e = est_nsum_hidden(degrees);
            for &id in ids {
                out.push(if id == EstimatorId::NsumHidden { e.simplified } else { e.mme });
            }
        }
        (Observation::HtCluster { units }, _) => {
            let e = est_ht(units);
            out.extend(ids.iter().map(|_| e));
        }
        (obs, cfg) => {
            return Err(Error::param(format!(
                "observation family {} does not match configuration family {}",
                obs.family(),
                cfg.family()
            )))
        }
    }
    Ok(out)
}

/// Merges repeated i.i.d. samples of the pooled families into one
/// observation: interval draws and binomial counts.
fn pooled(samples: &[Observation]) -> Option<Observation> {
    match samples.first()? {
        Observation::Interval { .. } => {
            let mut draws = Vec::new();
            for s in samples {
                if let Observation::Interval { draws: d } = s {
                    draws.extend_from_slice(d);
                }
            }
            draws.sort_by(f64::total_cmp);
            Some(Observation::Interval { draws })
        }
        Observation::Binomial { .. } => {
            let mut counts = Vec::new();
            for s in samples {
                if let Observation::Binomial { counts: c } = s {
                    counts.extend_from_slice(c);
                }
            }
            Some(Observation::Binomial { counts })
        }
        _ => None,
    }
}

/// Combines one estimator's values across repeated samples.
///
/// Maximum for the order-statistic MLEs, mean otherwise. Undefined
/// components are skipped; the result is undefined only when every
/// component is, and carries `boundary` if any used component did.
pub fn combine(id: EstimatorId, parts: &[Estimate]) -> Estimate {
    let defined: Vec<&Estimate> = parts.iter().filter(|e| e.is_defined()).collect();
    if defined.is_empty() {
        return Estimate::undefined(id);
    }
    let value = if id.combines_by_max() {
        defined.iter().map(|e| e.value).fold(f64::NEG_INFINITY, f64::max)
    } else {
        defined.iter().map(|e| e.value).sum::<f64>() / defined.len() as f64
    };
    let status = if defined.iter().any(|e| e.status == Status::Boundary) { Status::Boundary } else { Status::Ok };
    Estimate { estimator_id: id, value, status }
}

/// Estimates from `k_t` repeated samples of one replication.
pub fn evaluate_repeated(cfg: &ModelConfig, samples: &[Observation], ids: &[EstimatorId]) -> Result<Vec<Estimate>> {
    match samples {
        [] => Err(Error::param("no samples to evaluate")),
        [one] => evaluate(cfg, one, ids),
        many => {
            if let Some(p) = pooled(many) {
                return evaluate(cfg, &p, ids);
            }
            let per: Vec<Vec<Estimate>> = many.iter().map(|s| evaluate(cfg, s, ids)).collect::<Result<_>>()?;
            Ok(ids
                .iter()
                .enumerate()
                .map(|(j, &id)| {
                    let parts: Vec<Estimate> = per.iter().map(|v| v[j]).collect();
                    combine(id, &parts)
                })
                .collect())
        }
    }
}
