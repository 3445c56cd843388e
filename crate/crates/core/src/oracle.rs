//! Exact small-instance results, computed without the Monte Carlo path or
//! the production estimator code.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::special::ln_choose;

/// Exact rational or, past the rational size limit, double precision.
#[derive(Debug, Clone, PartialEq)]
pub enum Exact {
    Rational(BigRational),
    Float(f64),
}

impl Exact {
    pub fn to_f64(&self) -> f64 {
        match self {
            Exact::Rational(r) => r.to_f64().unwrap_or(f64::NAN),
            Exact::Float(x) => *x,
        }
    }

    /// `self - n`, keeping exactness.
    pub fn minus(&self, n: u64) -> Exact {
        match self {
            Exact::Rational(r) => Exact::Rational(r - BigRational::from_integer(BigInt::from(n))),
            Exact::Float(x) => Exact::Float(x - n as f64),
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Exact::Rational(r) => Some(r),
            Exact::Float(_) => None,
        }
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let x = self.to_f64();
        if let Exact::Rational(r) = self {
            if r.is_integer() {
                return write!(f, "{}", r.numer());
            }
        }
        // Shortest representation that survives an f64 round trip.
        write!(f, "{x}")
    }
}

impl Serialize for Exact {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_f64(self.to_f64())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactMoments {
    pub expectation: Exact,
    pub variance: Exact,
    /// Number of equally weighted or weighted outcomes summed over.
    pub support_size: u64,
    /// Probability of the event the moments are conditioned on (1 when
    /// unconditional).
    pub defined_probability: Exact,
}

fn rat(n: i128, d: i128) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn big_choose(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

/// Largest population for which tank subsets are enumerated.
pub const TANK_MAX_POPULATION: u64 = 20;

/// Exact mean and variance of a serial-number estimator over every
/// `n`-subset of `{1, ..., N}`.
pub fn exact_tank_moments(population: u64, sample: u64, estimator: &str) -> Result<ExactMoments> {
    if population > TANK_MAX_POPULATION {
        return Err(Error::TooLarge(format!(
            "tank enumeration limited to N <= {TANK_MAX_POPULATION}, got {population}"
        )));
    }
    if sample == 0 || sample > population {
        return Err(Error::param(format!("need 1 <= n <= N, got n = {sample}, N = {population}")));
    }
    let n = sample as i128;
    // Each estimator is num / den with an integer numerator.
    let (den, min_n): (i128, i128) = match estimator {
        "mle" | "tank.mle" => (1, 1),
        "goodman" | "tank.goodman" => (n, 1),
        "gap" | "tank.gap" => (n - 1, 2),
        "unknown_origin" | "tank.unknown_origin" => (n - 1, 2),
        "bayes_mean" | "tank.bayes_mean" => (n - 2, 3),
        other => return Err(Error::param(format!("unknown tank estimator {other:?}"))),
    };
    if n < min_n {
        return Err(Error::param(format!("{estimator} needs n >= {min_n}")));
    }
    let numerator = |lo: i128, hi: i128| -> i128 {
        match estimator.trim_start_matches("tank.") {
            "mle" => hi,
            "goodman" => (n + 1) * hi - n,
            "gap" => (n - 1) * hi + (hi - lo) - (n - 1),
            "unknown_origin" => (n + 1) * (hi - lo) - (n - 1),
            _ => (n - 1) * (hi - 1),
        }
    };
    let k = sample as usize;
    let big_n = population as usize;
    let mut idx: Vec<usize> = (1..=k).collect();
    let mut count: i128 = 0;
    let mut sum: i128 = 0;
    let mut sum_sq: i128 = 0;
    loop {
        let v = numerator(idx[0] as i128, idx[k - 1] as i128);
        count += 1;
        sum += v;
        sum_sq += v * v;
        // Next combination in lexicographic order.
        let mut i = k;
        while i > 0 && idx[i - 1] == big_n - k + i {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    let mean = rat(sum, den * count);
    let second = rat(sum_sq, den * den * count);
    let variance = &second - &mean * &mean;
    Ok(ExactMoments {
        expectation: Exact::Rational(mean),
        variance: Exact::Rational(variance),
        support_size: count as u64,
        defined_probability: Exact::Rational(BigRational::one()),
    })
}

/// Closed-form tank variances: goodman `(N-n)(N+1)/(n(n+2))`, unknown
/// origin `2(N-n)(N+1)/((n-1)(n+2))`.
pub fn tank_variance_formula(population: u64, sample: u64, estimator: &str) -> Option<BigRational> {
    let (big_n, n) = (population as i128, sample as i128);
    match estimator.trim_start_matches("tank.") {
        "goodman" => Some(rat((big_n - n) * (big_n + 1), n * (n + 2))),
        "unknown_origin" if n >= 2 => Some(rat(2 * (big_n - n) * (big_n + 1), (n - 1) * (n + 2))),
        _ => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwoSampleEstimator {
    LincolnPetersen,
    Chapman,
    /// Multiplier estimate given the benchmark count, conditioned on a
    /// positive overlap.
    MultiplierConditional,
}

impl TwoSampleEstimator {
    pub fn parse(s: &str) -> Option<TwoSampleEstimator> {
        match s {
            "lp" | "crc.lp" => Some(TwoSampleEstimator::LincolnPetersen),
            "chapman" | "crc.chapman" => Some(TwoSampleEstimator::Chapman),
            "mbm-conditional" | "mbm" => Some(TwoSampleEstimator::MultiplierConditional),
            _ => None,
        }
    }

    fn conditional(self) -> bool {
        !matches!(self, TwoSampleEstimator::Chapman)
    }
}

/// Populations up to this size are summed in exact rationals.
pub const TWO_SAMPLE_RATIONAL_LIMIT: u64 = 2000;
pub const TWO_SAMPLE_MAX_POPULATION: u64 = 10_000;

/// Exact moments of a two-sample estimator by summing over the
/// hypergeometric support of the overlap.
pub fn exact_two_sample_moments(
    population: u64,
    n1: u64,
    n2: u64,
    estimator: TwoSampleEstimator,
) -> Result<ExactMoments> {
    if population > TWO_SAMPLE_MAX_POPULATION {
        return Err(Error::TooLarge(format!("two-sample oracle limited to N <= {TWO_SAMPLE_MAX_POPULATION}")));
    }
    if n1 == 0 || n2 == 0 || n1 > population || n2 > population {
        return Err(Error::param(format!("need 1 <= n1, n2 <= N (N={population}, n1={n1}, n2={n2})")));
    }
    let lo = (n1 + n2).saturating_sub(population);
    let hi = n1.min(n2);
    let support = hi - lo + 1;
    let first = if estimator.conditional() { lo.max(1) } else { lo };
    if first > hi {
        return Err(Error::Degenerate("overlap is zero with probability one".into()));
    }
    if population <= TWO_SAMPLE_RATIONAL_LIMIT {
        let total = big_choose(population, n2);
        let value = |m: u64| -> BigRational {
            let (a, b, m) = (BigInt::from(n1), BigInt::from(n2), BigInt::from(m));
            match estimator {
                TwoSampleEstimator::Chapman => BigRational::new((a + 1u32) * (b + 1u32), m + 1u32) - BigRational::one(),
                _ => BigRational::new(a * b, m),
            }
        };
        let mut mass = BigRational::zero();
        let mut s1 = BigRational::zero();
        let mut s2 = BigRational::zero();
        for m in first..=hi {
            let w = BigRational::new(big_choose(n1, m) * big_choose(population - n1, n2 - m), total.clone());
            let v = value(m);
            s1 += &w * &v;
            s2 += &w * &v * &v;
            mass += w;
        }
        let mean = &s1 / &mass;
        let variance = &s2 / &mass - &mean * &mean;
        Ok(ExactMoments {
            expectation: Exact::Rational(mean),
            variance: Exact::Rational(variance),
            support_size: support,
            defined_probability: Exact::Rational(mass),
        })
    } else {
        let ln_total = ln_choose(population, n2);
        let (mut mass, mut s1, mut s2) = (0.0f64, 0.0f64, 0.0f64);
        for m in first..=hi {
            let w = (ln_choose(n1, m) + ln_choose(population - n1, n2 - m) - ln_total).exp();
            let v = match estimator {
                TwoSampleEstimator::Chapman => (n1 as f64 + 1.0) * (n2 as f64 + 1.0) / (m as f64 + 1.0) - 1.0,
                _ => n1 as f64 * n2 as f64 / m as f64,
            };
            mass += w;
            s1 += w * v;
            s2 += w * v * v;
        }
        let mean = s1 / mass;
        Ok(ExactMoments {
            expectation: Exact::Float(mean),
            variance: Exact::Float((s2 / mass - mean * mean).max(0.0)),
            support_size: support,
            defined_probability: Exact::Float(mass),
        })
    }
}

/// `-(N-n1)!(N-n2)! / (N!(N-n1-n2-1)!)` in exact arithmetic; `None` when
/// `n1 + n2 + 1 > N`.
pub fn chapman_bias_closed_form(population: u64, n1: u64, n2: u64) -> Option<BigRational> {
    if n1 + n2 + 1 > population {
        return None;
    }
    let fact = |k: u64| -> BigInt { (1..=k).fold(BigInt::one(), |acc, i| acc * BigInt::from(i)) };
    Some(-BigRational::new(
        fact(population - n1) * fact(population - n2),
        fact(population) * fact(population - n1 - n2 - 1),
    ))
}

/// Upper limit on enumerated cluster sequences.
pub const HT_MAX_OUTCOMES: u128 = 1_000_000;

/// Exact moments of the Horvitz-Thompson total for the two-stage cluster
/// design. The estimate depends only on the sequence of drawn clusters, so
/// the enumeration runs over cluster sequences with their probabilities
/// (unit choices within a cluster do not change the value).
pub fn exact_ht_moments(cluster_sizes: &[u64], sample: u64) -> Result<ExactMoments> {
    let h = cluster_sizes.len();
    if h == 0 || cluster_sizes.contains(&0) {
        return Err(Error::param("every cluster needs at least one unit"));
    }
    let total: u64 = cluster_sizes.iter().sum();
    if sample == 0 || sample > total {
        return Err(Error::param(format!("need 1 <= n <= {total}")));
    }
    let outcomes = (h as u128).checked_pow(sample as u32).unwrap_or(u128::MAX);
    if outcomes > HT_MAX_OUTCOMES {
        return Err(Error::TooLarge(format!("{outcomes} cluster sequences exceed {HT_MAX_OUTCOMES}")));
    }
    struct Acc {
        s1: BigRational,
        s2: BigRational,
        leaves: u64,
    }
    fn walk(sizes: &[u64], taken: &mut [u64], left: u64, n: u64, prob: BigRational, value: BigRational, acc: &mut Acc) {
        if left == 0 {
            acc.s1 += &prob * &value;
            acc.s2 += &prob * &value * &value;
            acc.leaves += 1;
            return;
        }
        let open: Vec<usize> = (0..sizes.len()).filter(|&j| taken[j] < sizes[j]).collect();
        let p = &prob / BigInt::from(open.len());
        for j in open {
            taken[j] += 1;
            // 1 / p_i = H N_h / n
            let w = BigRational::new(BigInt::from(sizes.len() as u64 * sizes[j]), BigInt::from(n));
            walk(sizes, taken, left - 1, n, p.clone(), &value + w, acc);
            taken[j] -= 1;
        }
    }
    let mut acc = Acc { s1: BigRational::zero(), s2: BigRational::zero(), leaves: 0 };
    let mut taken = vec![0u64; h];
    walk(cluster_sizes, &mut taken, sample, sample, BigRational::one(), BigRational::zero(), &mut acc);
    let variance = &acc.s2 - &acc.s1 * &acc.s1;
    Ok(ExactMoments {
        expectation: Exact::Rational(acc.s1),
        variance: Exact::Rational(variance),
        support_size: acc.leaves,
        defined_probability: Exact::Rational(BigRational::one()),
    })
}

/// `Σ_{h<l} (N_h - N_l)^2 / n`.
pub fn ht_variance_formula(cluster_sizes: &[u64], sample: u64) -> BigRational {
    let mut s = BigInt::zero();
    for (i, &a) in cluster_sizes.iter().enumerate() {
        for &b in &cluster_sizes[i + 1..] {
            let d = BigInt::from(a as i128 - b as i128);
            s += &d * &d;
        }
    }
    BigRational::new(s, BigInt::from(sample))
}

/// Scalar equations with a known monotone shape.
#[derive(Debug, Clone, PartialEq)]
pub enum RootProblem {
    /// `(1 - r/N) - Π(1 - n_i/N) = 0` in `N`.
    Darroch { distinct: u64, sizes: Vec<u64> },
    /// `λ / (1 - e^{-λ}) = mean` in `λ`.
    ZtpMean { mean: f64 },
}

impl RootProblem {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            RootProblem::Darroch { distinct, sizes } => {
                let prod: f64 = sizes.iter().map(|&n| 1.0 - n as f64 / x).product();
                1.0 - *distinct as f64 / x - prod
            }
            RootProblem::ZtpMean { mean } => x / (1.0 - (-x).exp()) - mean,
        }
    }

    /// A bracket with a sign change, found by doubling.
    pub fn default_bracket(&self) -> Result<(f64, f64)> {
        let lo = match self {
            RootProblem::Darroch { distinct, .. } => *distinct as f64 + 1e-9,
            RootProblem::ZtpMean { .. } => 1e-9,
        };
        let s = self.eval(lo).signum();
        let mut hi = lo.max(1.0) * 2.0;
        for _ in 0..2000 {
            if self.eval(hi).signum() != s {
                return Ok((lo, hi));
            }
            hi *= 2.0;
        }
        Err(Error::NoBracket { lo, hi })
    }
}

/// Plain bisection to an absolute width of `1e-12` (or until the midpoint
/// stops moving).
pub fn reference_root_solve(problem: &RootProblem, lo: f64, hi: f64) -> Result<f64> {
    let (mut a, mut b) = (lo, hi);
    let fa = problem.eval(a);
    let fb = problem.eval(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if !(fa * fb < 0.0) {
        return Err(Error::NoBracket { lo, hi });
    }
    let neg_at_a = fa < 0.0;
    while b - a > 1e-12 {
        let mid = a + (b - a) / 2.0;
        if mid <= a || mid >= b {
            break;
        }
        if (problem.eval(mid) < 0.0) == neg_at_a {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(a + (b - a) / 2.0)
}

/// Exact law of the distinct count and the resulting MLE moments for
/// k-sample capture-recapture, by dynamic programming over the number of
/// marked units.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CrckExact {
    pub mean: f64,
    pub variance: f64,
    pub mse: f64,
    /// Probability that the MLE does not exist (no recaptures).
    pub undefined_probability: f64,
}

/// Probability mass dropped from the DP per state.
const DP_FLOOR: f64 = 1e-20;

fn hypergeometric_pmf(total: u64, marked: u64, draws: u64) -> (u64, Vec<f64>) {
    let lo = (marked + draws).saturating_sub(total);
    let hi = marked.min(draws);
    let ln_den = ln_choose(total, draws);
    let pmf = (lo..=hi).map(|m| (ln_choose(marked, m) + ln_choose(total - marked, draws - m) - ln_den).exp()).collect();
    (lo, pmf)
}

/// Distribution of the distinct count `r` after all occasions.
pub fn crck_distinct_distribution(population: u64, sizes: &[u64]) -> Result<Vec<f64>> {
    if sizes.iter().any(|&n| n > population) {
        return Err(Error::param("capture size exceeds population"));
    }
    let len = population as usize + 1;
    let mut dist = vec![0.0f64; len];
    dist[0] = 1.0;
    for &n in sizes {
        let mut next = vec![0.0f64; len];
        for (marked, &p) in dist.iter().enumerate() {
            if p < DP_FLOOR {
                continue;
            }
            let (lo, pmf) = hypergeometric_pmf(population, marked as u64, n);
            for (j, q) in pmf.iter().enumerate() {
                let m = lo + j as u64;
                next[marked + (n - m) as usize] += p * q;
            }
        }
        dist = next;
    }
    Ok(dist)
}

/// Exact moments of the Darroch MLE using the reference bisection for each
/// reachable distinct count.
pub fn exact_crck_moments(population: u64, sizes: &[u64]) -> Result<CrckExact> {
    let dist = crck_distinct_distribution(population, sizes)?;
    let sum: u64 = sizes.iter().sum();
    let max = sizes.iter().copied().max().unwrap_or(0);
    let target = population as f64;
    let (mut mass, mut s1, mut s2, mut undefined) = (0.0, 0.0, 0.0, 0.0);
    for (r, &p) in dist.iter().enumerate() {
        if p < DP_FLOOR {
            continue;
        }
        let r = r as u64;
        let value = if r == 0 || sum <= r {
            None
        } else if r == max {
            Some(r as f64)
        } else {
            let problem = RootProblem::Darroch { distinct: r, sizes: sizes.to_vec() };
            let (lo, hi) = problem.default_bracket()?;
            Some(reference_root_solve(&problem, lo, hi)?)
        };
        match value {
            Some(v) => {
                mass += p;
                s1 += p * v;
                s2 += p * (v - target) * (v - target);
            }
            None => undefined += p,
        }
    }
    let mean = s1 / mass;
    let mse = s2 / mass;
    Ok(CrckExact { mean, variance: mse - (mean - target) * (mean - target), mse, undefined_probability: undefined })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> BigRational {
        rat(n, d)
    }

    #[test]
    fn tank_examples() {
        let g = exact_tank_moments(6, 3, "goodman").unwrap();
        assert_eq!(g.expectation, Exact::Rational(r(6, 1)));
        assert_eq!(g.variance, Exact::Rational(r(7, 5)));
        assert_eq!(g.support_size, 20);
        let u = exact_tank_moments(6, 3, "unknown_origin").unwrap();
        assert_eq!(u.expectation, Exact::Rational(r(6, 1)));
        assert_eq!(u.variance, Exact::Rational(r(21, 5)));
        let c = exact_tank_moments(5, 5, "goodman").unwrap();
        assert_eq!((c.expectation.to_f64(), c.variance.to_f64()), (5.0, 0.0));
        assert_eq!(exact_tank_moments(6, 3, "mle").unwrap().expectation, Exact::Rational(r(21, 4)));
        assert!(matches!(exact_tank_moments(21, 3, "goodman"), Err(Error::TooLarge(_))));
        assert!(exact_tank_moments(6, 1, "gap").is_err());
    }

    #[test]
    fn tank_unbiased_grid() {
        for big_n in 2..=12u64 {
            for n in 2..=big_n {
                for est in ["goodman", "gap", "unknown_origin"] {
                    let m = exact_tank_moments(big_n, n, est).unwrap();
                    assert_eq!(m.expectation, Exact::Rational(r(big_n as i128, 1)), "{est} N={big_n} n={n}");
                    if let Some(v) = tank_variance_formula(big_n, n, est) {
                        assert_eq!(m.variance, Exact::Rational(v), "{est} N={big_n} n={n}");
                    }
                }
            }
        }
    }

    #[test]
    fn two_sample_examples() {
        let c = exact_two_sample_moments(5, 2, 2, TwoSampleEstimator::Chapman).unwrap();
        assert_eq!(c.expectation, Exact::Rational(r(47, 10)));
        assert_eq!(c.expectation.to_string(), "4.7");
        let lp = exact_two_sample_moments(5, 5, 2, TwoSampleEstimator::LincolnPetersen).unwrap();
        assert_eq!((lp.expectation.to_f64(), lp.variance.to_f64()), (5.0, 0.0));
        let mbm = exact_two_sample_moments(100, 30, 50, TwoSampleEstimator::MultiplierConditional).unwrap();
        assert!(mbm.expectation.to_f64() > 100.0);
        assert!((mbm.expectation.to_f64() - 102.54).abs() < 0.01);
    }

    #[test]
    fn chapman_bias_formula_grid() {
        assert_eq!(chapman_bias_closed_form(5, 2, 2), Some(r(-3, 10)));
        for big_n in 2..=12u64 {
            for n1 in 1..=big_n {
                for n2 in 1..=big_n {
                    let Some(b) = chapman_bias_closed_form(big_n, n1, n2) else { continue };
                    let m = exact_two_sample_moments(big_n, n1, n2, TwoSampleEstimator::Chapman).unwrap();
                    let bias = m.expectation.as_rational().unwrap() - r(big_n as i128, 1);
                    assert_eq!(bias, b, "N={big_n} n1={n1} n2={n2}");
                }
            }
        }
    }

    #[test]
    fn float_path_matches_rational_path() {
        let a = exact_two_sample_moments(2000, 1000, 1000, TwoSampleEstimator::Chapman).unwrap();
        let b = exact_two_sample_moments(2001, 1000, 1000, TwoSampleEstimator::Chapman).unwrap();
        assert!(a.expectation.as_rational().is_some());
        assert!(b.expectation.as_rational().is_none());
        assert!((a.expectation.to_f64() - 2000.0).abs() < 1e-6);
        assert!((b.expectation.to_f64() - 2001.0).abs() < 1e-3);
        assert!((a.variance.to_f64() - b.variance.to_f64()).abs() / a.variance.to_f64() < 0.01);
    }

    #[test]
    fn ht_examples() {
        let m = exact_ht_moments(&[2, 3], 1).unwrap();
        assert_eq!(m.expectation, Exact::Rational(r(5, 1)));
        assert_eq!(m.variance, Exact::Rational(r(1, 1)));
        assert_eq!(ht_variance_formula(&[2, 3], 1), r(1, 1));
        let m = exact_ht_moments(&[5], 2).unwrap();
        assert_eq!((m.expectation.to_f64(), m.variance.to_f64()), (5.0, 0.0));
        let m = exact_ht_moments(&[3, 3], 2).unwrap();
        assert_eq!(m.variance.to_f64(), 0.0);
        assert!(matches!(exact_ht_moments(&[1; 10], 7), Err(Error::TooLarge(_))));
    }

    #[test]
    fn ht_formula_matches_enumeration() {
        for sizes in [vec![2u64, 3], vec![4, 7, 5], vec![3, 9, 6, 4]] {
            let min = *sizes.iter().min().unwrap();
            for n in 1..=min.min(4) {
                let m = exact_ht_moments(&sizes, n).unwrap();
                let total: u64 = sizes.iter().sum();
                assert_eq!(m.expectation, Exact::Rational(r(total as i128, 1)));
                assert_eq!(m.variance, Exact::Rational(ht_variance_formula(&sizes, n)));
            }
        }
    }

    #[test]
    fn root_examples() {
        let p = RootProblem::Darroch { distinct: 4, sizes: vec![2, 2, 2] };
        let (lo, hi) = p.default_bracket().unwrap();
        assert!((reference_root_solve(&p, lo, hi).unwrap() - (3.0 + 5f64.sqrt())).abs() < 1e-9);
        let p = RootProblem::ZtpMean { mean: 2.0 };
        let (lo, hi) = p.default_bracket().unwrap();
        assert!((reference_root_solve(&p, lo, hi).unwrap() - 1.5936).abs() < 1e-4);
        let p = RootProblem::Darroch { distinct: 3, sizes: vec![2, 2] };
        let (lo, hi) = p.default_bracket().unwrap();
        assert!((reference_root_solve(&p, lo, hi).unwrap() - 4.0).abs() < 1e-9);
        assert!(reference_root_solve(&RootProblem::ZtpMean { mean: 2.0 }, 3.0, 4.0).is_err());
    }

    #[test]
    fn crck_dp_small_case() {
        // N=5, two samples of 2: r = 4 - m with m ~ (0.3, 0.6, 0.1).
        let d = crck_distinct_distribution(5, &[2, 2]).unwrap();
        assert!((d[4] - 0.3).abs() < 1e-12 && (d[3] - 0.6).abs() < 1e-12 && (d[2] - 0.1).abs() < 1e-12);
        let e = exact_crck_moments(5, &[2, 2]).unwrap();
        assert!((e.undefined_probability - 0.3).abs() < 1e-12);
        // Conditional on m >= 1 the MLE is LP: (0.6*4 + 0.1*2)/0.7.
        assert!((e.mean - 2.6 / 0.7).abs() < 1e-9);
        let d = crck_distinct_distribution(6, &[2, 2, 2]).unwrap();
        let mean: f64 = d.iter().enumerate().map(|(r, p)| r as f64 * p).sum();
        assert!((mean - 6.0 * (1.0 - (2.0f64 / 3.0).powi(3))).abs() < 1e-12);
    }
}
