//! Exact samplers for the laws the population mechanisms need.
//!
//! All samplers take any [`rand::Rng`]; with a [`crate::rng::SimRng`] built
//! from an [`crate::rng::RngState`] the draw sequence is reproducible.

use std::collections::HashSet;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Open01, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::ln_choose;

fn check_prob(p: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::param(format!("{what} = {p} outside [0, 1]")))
    }
}

/// Uniform draw on the open interval (0, 1).
#[inline]
pub fn uniform_open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Open01.sample(rng)
}

pub fn draw_binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> Result<u64> {
    check_prob(p, "binomial probability")?;
    if n == 0 || p == 0.0 {
        return Ok(0);
    }
    if p == 1.0 {
        return Ok(n);
    }
    let dist = Binomial::new(n, p).map_err(|e| Error::param(e.to_string()))?;
    Ok(dist.sample(rng))
}

/// Number of marked units among `draws` taken without replacement from
/// `total` units of which `marked` are marked.
///
/// Inversion over the support, visiting atoms in the fixed order
/// mode, mode-1, mode+1, mode-2, ... so the expected walk length is
/// proportional to the standard deviation rather than the support width.
pub fn draw_hypergeometric<R: Rng + ?Sized>(total: u64, marked: u64, draws: u64, rng: &mut R) -> Result<u64> {
    if marked > total || draws > total {
        return Err(Error::param(format!(
            "hypergeometric requires marked <= total and draws <= total (total={total}, marked={marked}, draws={draws})"
        )));
    }
    let lo = (draws + marked).saturating_sub(total);
    let hi = draws.min(marked);
    if lo == hi {
        return Ok(lo);
    }
    let mode = (((draws as u128 + 1) * (marked as u128 + 1)) / (total as u128 + 2)) as u64;
    let mode = mode.clamp(lo, hi);

    let (nf, kf, df) = (total as f64, marked as f64, draws as f64);
    let p_mode = (ln_choose(marked, mode) + ln_choose(total - marked, draws - mode) - ln_choose(total, draws)).exp();

    let mut u: f64 = rng.random();
    u -= p_mode;
    if u < 0.0 {
        return Ok(mode);
    }
    let (mut down, mut up) = (mode, mode);
    let (mut p_down, mut p_up) = (p_mode, p_mode);
    loop {
        let mut moved = false;
        if down > lo {
            let x = down as f64;
            // pmf(x-1) / pmf(x)
            p_down *= x * (nf - kf - df + x) / ((kf - x + 1.0) * (df - x + 1.0));
            down -= 1;
            u -= p_down;
            if u < 0.0 {
                return Ok(down);
            }
            moved = true;
        }
        if up < hi {
            let x = up as f64;
            // pmf(x+1) / pmf(x)
            p_up *= (kf - x) * (df - x) / ((x + 1.0) * (nf - kf - df + x + 1.0));
            up += 1;
            u -= p_up;
            if u < 0.0 {
                return Ok(up);
            }
            moved = true;
        }
        if !moved {
            // Rounding left a sliver of mass unassigned.
            return Ok(mode);
        }
    }
}

pub fn draw_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::param(format!("poisson rate {lambda} must be finite and >= 0")));
    }
    if lambda == 0.0 {
        return Ok(0);
    }
    let dist = Poisson::new(lambda).map_err(|e| Error::param(e.to_string()))?;
    Ok(dist.sample(rng) as u64)
}

/// Poisson(λ) conditioned on being positive.
pub fn draw_zt_poisson<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::param(format!("zero-truncated poisson rate {lambda} must be > 0")));
    }
    if lambda >= 0.1 {
        let dist = Poisson::new(lambda).map_err(|e| Error::param(e.to_string()))?;
        loop {
            let x = dist.sample(rng) as u64;
            if x > 0 {
                return Ok(x);
            }
        }
    }
    // Inversion on the truncated pmf λ^x / ((e^λ - 1) x!).
    let mut u: f64 = rng.random();
    let mut x = 1u64;
    let mut p = lambda / lambda.exp_m1();
    loop {
        u -= p;
        if u < 0.0 || p == 0.0 {
            return Ok(x);
        }
        x += 1;
        p *= lambda / x as f64;
    }
}

pub fn draw_exponential<R: Rng + ?Sized>(rate: f64, rng: &mut R) -> Result<f64> {
    if !(rate > 0.0) || !rate.is_finite() {
        return Err(Error::param(format!("exponential rate {rate} must be > 0")));
    }
    Ok(-uniform_open01(rng).ln() / rate)
}

/// Uniform `size`-subset of `{1, ..., population}`, returned sorted.
pub fn draw_without_replacement<R: Rng + ?Sized>(population: u64, size: u64, rng: &mut R) -> Result<Vec<u64>> {
    if size > population {
        return Err(Error::param(format!("cannot draw {size} distinct units from {population}")));
    }
    if size == 0 {
        return Ok(Vec::new());
    }
    if size == population {
        return Ok((1..=population).collect());
    }
    if size.saturating_mul(8) <= population {
        // Floyd's algorithm.
        let mut chosen: HashSet<u64> = HashSet::with_capacity(size as usize);
        for j in (population - size + 1)..=population {
            let t = rng.random_range(1..=j);
            if !chosen.insert(t) {
                chosen.insert(j);
            }
        }
        let mut out: Vec<u64> = chosen.into_iter().collect();
        out.sort_unstable();
        Ok(out)
    } else {
        // Selection sampling; emits units in increasing order.
        let mut out = Vec::with_capacity(size as usize);
        let mut needed = size;
        for i in 1..=population {
            let left = population - i + 1;
            if rng.random_range(0..left) < needed {
                out.push(i);
                needed -= 1;
                if needed == 0 {
                    break;
                }
            }
        }
        Ok(out)
    }
}

/// Shape of the sampling density on `(0, θ)` for the continuous interval
/// model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryFamily {
    #[default]
    Uniform,
    /// Density proportional to `x^degree`.
    Polynomial { degree: f64 },
    /// Density proportional to `e^x`.
    Exponential,
}

impl BoundaryFamily {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BoundaryFamily::Polynomial { degree } if !(degree >= 0.0) || !degree.is_finite() => {
                Err(Error::param(format!("polynomial degree {degree} must be finite and >= 0")))
            }
            _ => Ok(()),
        }
    }

    /// `P(X <= x)` for `x` in `[0, θ]`.
    pub fn cdf(&self, x: f64, theta: f64) -> f64 {
        let x = x.clamp(0.0, theta);
        match *self {
            BoundaryFamily::Uniform => x / theta,
            BoundaryFamily::Polynomial { degree } => (x / theta).powf(degree + 1.0),
            BoundaryFamily::Exponential => x.exp_m1() / theta.exp_m1(),
        }
    }
}

/// Maps `u ∈ (0, 1)` through the inverse CDF of the boundary density.
pub fn inverse_cdf_boundary(u: f64, theta: f64, family: BoundaryFamily) -> Result<f64> {
    if !(u > 0.0 && u < 1.0) {
        return Err(Error::param(format!("uniform variate {u} outside (0, 1)")));
    }
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::param(format!("interval bound {theta} must be > 0")));
    }
    family.validate()?;
    Ok(match family {
        BoundaryFamily::Uniform => theta * u,
        BoundaryFamily::Polynomial { degree } => {
            if degree == 0.0 {
                theta * u
            } else {
                theta * u.powf(1.0 / (degree + 1.0))
            }
        }
        // ln(1 + u(e^θ - 1)) rewritten so large θ does not overflow.
        BoundaryFamily::Exponential => theta + (u + (1.0 - u) * (-theta).exp()).ln(),
    })
}
