//! Asymptotic regimes as explicit schedules of simulation cells.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Family, Horizon, ModelConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeKind {
    /// Fixed population, sample grows to a census.
    FinitePopulation,
    /// Fixed population and sample sizes, growing number of repeated samples.
    Infill,
    /// Population and sample sizes grow at fixed ratios.
    Outfill,
    /// k-sample capture-recapture with fixed capture fraction and a number of
    /// occasions that grows with the population.
    OutfillGrowingK,
}

impl RegimeKind {
    pub const ALL: [RegimeKind; 4] =
        [RegimeKind::FinitePopulation, RegimeKind::Infill, RegimeKind::Outfill, RegimeKind::OutfillGrowingK];

    pub fn as_str(self) -> &'static str {
        match self {
            RegimeKind::FinitePopulation => "finite_population",
            RegimeKind::Infill => "infill",
            RegimeKind::Outfill => "outfill",
            RegimeKind::OutfillGrowingK => "outfill_growing_k",
        }
    }

    pub fn parse(s: &str) -> Option<RegimeKind> {
        RegimeKind::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

impl std::fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Whether `family` can be run under `kind`.
pub fn supports(family: Family, kind: RegimeKind) -> bool {
    use Family::*;
    match kind {
        RegimeKind::Infill => true,
        RegimeKind::Outfill => true,
        RegimeKind::FinitePopulation => {
            matches!(family, Tank | Binomial | Waiting | Multiplier | Crc2 | NsumGeneral | NsumHidden | HtCluster)
        }
        RegimeKind::OutfillGrowingK => family == Crck,
    }
}

/// Meaning of the grid values for a family under a regime.
pub fn grid_meaning(family: Family, kind: RegimeKind) -> &'static str {
    use Family::*;
    match (kind, family) {
        (RegimeKind::Infill, _) => "number of repeated samples k_t",
        (RegimeKind::FinitePopulation, Binomial) => "success probability p (ends at 1)",
        (RegimeKind::FinitePopulation, Waiting) => "observation horizon T (ends at inf)",
        (RegimeKind::FinitePopulation, Crc2) => "second capture size n2",
        (RegimeKind::FinitePopulation, _) => "sample size",
        (RegimeKind::Outfill, Interval) => "interval length theta",
        (RegimeKind::Outfill, NsumGeneral) => "total population M",
        (RegimeKind::Outfill, HtCluster) => "cluster replication factor t",
        _ => "population size N",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// 1-based position along the schedule.
    pub t: usize,
    /// The grid value that produced this cell.
    #[serde(with = "inf_as_string")]
    pub grid_value: f64,
    pub cfg: ModelConfig,
    /// Repeated samples per replication.
    pub k_t: u64,
}

impl Cell {
    /// Abscissa for plots: `k_t` under infill, otherwise the grid value for
    /// the finite-population regime and the target size for outfill.
    pub fn x_value(&self, kind: RegimeKind) -> f64 {
        match kind {
            RegimeKind::Infill => self.k_t as f64,
            RegimeKind::FinitePopulation => self.grid_value,
            RegimeKind::Outfill | RegimeKind::OutfillGrowingK => self.cfg.target(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeSchedule {
    pub kind: RegimeKind,
    pub family: Family,
    pub ratios: Vec<f64>,
    pub cells: Vec<Cell>,
}

/// Writes infinite values as `"inf"` so JSON can carry them.
mod inf_as_string {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() {
            s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(*v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(v),
            Raw::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(serde::de::Error::custom(format!("expected a number, got {other:?}"))),
            },
        }
    }
}

/// Default residual `N Π(1 - p)^k` targeted by the growing-k schedule.
pub const DEFAULT_RESIDUAL: f64 = 0.1;

/// `round(c · size)` clamped to `[1, size - 1]`.
pub fn ratio_size(c: f64, size: u64) -> u64 {
    let upper = size.saturating_sub(1).max(1);
    ((c * size as f64).round() as u64).clamp(1, upper)
}

/// Occasions needed so that `N (1 - p)^k <= residual`.
pub fn growing_k_occasions(population: u64, p: f64, residual: f64) -> u64 {
    ((population as f64 / residual).ln() / -(-p).ln_1p()).ceil().max(2.0) as u64
}

fn ratio_bounds_ok(family: Family, kind: RegimeKind, c: f64) -> bool {
    match (kind, family) {
        // Expected draws per unit length; any positive value is meaningful.
        (RegimeKind::Outfill, Family::Interval) => c > 0.0 && c.is_finite(),
        _ => c > 0.0 && c < 1.0,
    }
}

/// Number of ratios a family needs under outfill: `(min, max)`.
fn ratio_arity(family: Family, base: &ModelConfig) -> (usize, usize) {
    match (family, base) {
        (Family::Ztp | Family::Waiting, _) => (0, 0),
        (Family::Multiplier, _) => (1, 2),
        (Family::Crc2, _) => (1, 2),
        (Family::Crck, ModelConfig::Crck(c)) => (1, c.sizes.len()),
        (Family::NsumGeneral, _) => (2, 2),
        _ => (1, 1),
    }
}

fn as_count(v: f64, what: &str) -> Result<u64> {
    if v >= 0.0 && v.fract() == 0.0 && v < 9.0e15 {
        Ok(v as u64)
    } else {
        Err(Error::param(format!("{what} grid value {v} must be a non-negative integer")))
    }
}

fn check_grid(grid: &[f64], kind: RegimeKind) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::param("grid must not be empty"));
    }
    if grid.iter().any(|v| v.is_nan()) {
        return Err(Error::param("grid contains NaN"));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::param(format!("{kind} grid must be strictly increasing")));
    }
    Ok(())
}

/// Checks ratio count and range for `family` under `kind`.
pub fn check_ratios(family: Family, kind: RegimeKind, base: &ModelConfig, ratios: &[f64]) -> Result<()> {
    match kind {
        RegimeKind::Outfill => {
            let (lo, hi) = ratio_arity(family, base);
            if ratios.len() < lo || ratios.len() > hi {
                return Err(Error::param(format!(
                    "{family} outfill takes between {lo} and {hi} ratios, got {}",
                    ratios.len()
                )));
            }
        }
        RegimeKind::OutfillGrowingK => {
            if !(1..=2).contains(&ratios.len()) {
                return Err(Error::param("growing-k outfill takes a capture fraction and an optional residual"));
            }
            if let Some(&res) = ratios.get(1) {
                if !(res > 0.0 && res.is_finite()) {
                    return Err(Error::param(format!("residual {res} must be > 0")));
                }
            }
            if !ratio_bounds_ok(family, kind, ratios[0]) {
                return Err(Error::param(format!("ratio {} outside (0,1)", ratios[0])));
            }
            return Ok(());
        }
        _ => return Ok(()),
    }
    for &c in ratios {
        if !ratio_bounds_ok(family, kind, c) {
            return Err(Error::param(format!("ratio {c} outside (0,1)")));
        }
    }
    Ok(())
}

fn finite_cells(base: &ModelConfig, grid: &[f64]) -> Result<Vec<(f64, ModelConfig)>> {
    let mut grid = grid.to_vec();
    let census = match base {
        ModelConfig::Tank(c) => c.population as f64,
        ModelConfig::Binomial(_) => 1.0,
        ModelConfig::Waiting(_) => f64::INFINITY,
        ModelConfig::Multiplier(c) => c.population as f64,
        ModelConfig::Crc2(c) => c.population as f64,
        ModelConfig::NsumGeneral(c) => (c.total - c.hidden) as f64,
        ModelConfig::NsumHidden(c) => c.hidden as f64,
        ModelConfig::HtCluster(c) => c.total() as f64,
        other => return Err(Error::Unsupported(format!("{} has no finite-population regime", other.family()))),
    };
    let last = *grid.last().expect("grid checked non-empty");
    if last > census {
        return Err(Error::param(format!("grid value {last} exceeds the census value {census}")));
    }
    if last < census {
        grid.push(census);
    }
    grid.into_iter()
        .map(|g| {
            let cfg = match base {
                ModelConfig::Tank(c) => {
                    let mut c = c.clone();
                    c.sample = as_count(g, "sample size")?;
                    ModelConfig::Tank(c)
                }
                ModelConfig::Binomial(c) => {
                    let mut c = c.clone();
                    c.p = g;
                    ModelConfig::Binomial(c)
                }
                ModelConfig::Waiting(c) => {
                    let mut c = c.clone();
                    c.horizon = Horizon::from_f64(g);
                    ModelConfig::Waiting(c)
                }
                ModelConfig::Multiplier(c) => {
                    let mut c = c.clone();
                    c.sample = as_count(g, "sample size")?;
                    ModelConfig::Multiplier(c)
                }
                ModelConfig::Crc2(c) => {
                    let mut c = c.clone();
                    c.n2 = as_count(g, "second capture size")?;
                    ModelConfig::Crc2(c)
                }
                ModelConfig::NsumGeneral(c) => {
                    let mut c = c.clone();
                    c.sample = as_count(g, "sample size")?;
                    ModelConfig::NsumGeneral(c)
                }
                ModelConfig::NsumHidden(c) => {
                    let mut c = c.clone();
                    c.sample = as_count(g, "sample size")?;
                    ModelConfig::NsumHidden(c)
                }
                ModelConfig::HtCluster(c) => {
                    let mut c = c.clone();
                    c.sample = as_count(g, "sample size")?;
                    ModelConfig::HtCluster(c)
                }
                _ => unreachable!(),
            };
            Ok((g, cfg))
        })
        .collect()
}

fn outfill_cfg(base: &ModelConfig, g: f64, ratios: &[f64]) -> Result<ModelConfig> {
    let c0 = ratios.first().copied().unwrap_or(0.0);
    Ok(match base {
        ModelConfig::Tank(b) => {
            let n = as_count(g, "population")?;
            ModelConfig::Tank(crate::model::TankConfig { population: n, sample: ratio_size(c0, n), ..b.clone() })
        }
        ModelConfig::Interval(b) => {
            let sample = ((c0 * g).round() as u64).max(1);
            ModelConfig::Interval(crate::model::IntervalConfig { theta: g, sample, ..b.clone() })
        }
        ModelConfig::Binomial(b) => {
            let n = as_count(g, "population")?;
            ModelConfig::Binomial(crate::model::BinomialConfig {
                population: n,
                repetitions: ratio_size(c0, n),
                ..b.clone()
            })
        }
        ModelConfig::Ztp(b) => {
            ModelConfig::Ztp(crate::model::ZtpConfig { population: as_count(g, "population")?, ..b.clone() })
        }
        ModelConfig::Waiting(b) => {
            ModelConfig::Waiting(crate::model::WaitingConfig { population: as_count(g, "population")?, ..b.clone() })
        }
        ModelConfig::Multiplier(b) => {
            let n = as_count(g, "population")?;
            let benchmark = match ratios.get(1) {
                Some(&cx) => Some(ratio_size(cx, n)),
                None => b
                    .benchmark
                    .map(|_| Err(Error::param("a fixed benchmark under outfill needs a second ratio")))
                    .transpose()?,
            };
            ModelConfig::Multiplier(crate::model::MultiplierConfig {
                population: n,
                sample: ratio_size(c0, n),
                benchmark,
                ..b.clone()
            })
        }
        ModelConfig::Crc2(_) => {
            let n = as_count(g, "population")?;
            let c1 = ratios.get(1).copied().unwrap_or(c0);
            ModelConfig::Crc2(crate::model::Crc2Config { population: n, n1: ratio_size(c0, n), n2: ratio_size(c1, n) })
        }
        ModelConfig::Crck(b) => {
            let n = as_count(g, "population")?;
            let sizes =
                (0..b.sizes.len()).map(|i| ratio_size(if ratios.len() == 1 { c0 } else { ratios[i] }, n)).collect();
            ModelConfig::Crck(crate::model::CrckConfig { population: n, sizes })
        }
        ModelConfig::NsumGeneral(b) => {
            let m = as_count(g, "total population")?;
            let hidden = ratio_size(ratios[0], m);
            let sample = ratio_size(ratios[1], m).min(m - hidden);
            ModelConfig::NsumGeneral(crate::model::NsumGeneralConfig { total: m, hidden, sample, ..b.clone() })
        }
        ModelConfig::NsumHidden(b) => {
            let n = as_count(g, "hidden population")?;
            ModelConfig::NsumHidden(crate::model::NsumHiddenConfig {
                hidden: n,
                sample: ratio_size(c0, n),
                ..b.clone()
            })
        }
        ModelConfig::HtCluster(b) => {
            let t = as_count(g, "replication factor")?;
            if t == 0 {
                return Err(Error::param("replication factor must be >= 1"));
            }
            let cluster_sizes: Vec<u64> = (0..t).flat_map(|_| b.cluster_sizes.iter().copied()).collect();
            let total: u64 = cluster_sizes.iter().sum();
            ModelConfig::HtCluster(crate::model::HtClusterConfig { cluster_sizes, sample: ratio_size(c0, total) })
        }
    })
}

/// Materialises the cells of a regime for `base`.
pub fn build_schedule(kind: RegimeKind, base: &ModelConfig, grid: &[f64], ratios: &[f64]) -> Result<RegimeSchedule> {
    let family = base.family();
    if !supports(family, kind) {
        return Err(Error::Unsupported(format!("{family} does not support the {kind} regime")));
    }
    base.validate()?;
    check_grid(grid, kind)?;
    check_ratios(family, kind, base, ratios)?;
    let cells: Vec<(f64, ModelConfig, u64)> = match kind {
        RegimeKind::FinitePopulation => finite_cells(base, grid)?.into_iter().map(|(g, c)| (g, c, 1)).collect(),
        RegimeKind::Infill => grid
            .iter()
            .map(|&g| {
                let k = as_count(g, "repeated sample count")?;
                if k == 0 {
                    return Err(Error::param("repeated sample count must be >= 1"));
                }
                Ok((g, base.clone(), k))
            })
            .collect::<Result<_>>()?,
        RegimeKind::Outfill => {
            grid.iter().map(|&g| Ok((g, outfill_cfg(base, g, ratios)?, 1))).collect::<Result<_>>()?
        }
        RegimeKind::OutfillGrowingK => {
            let p = ratios[0];
            let residual = ratios.get(1).copied().unwrap_or(DEFAULT_RESIDUAL);
            grid.iter()
                .map(|&g| {
                    let n = as_count(g, "population")?;
                    let k = growing_k_occasions(n, p, residual);
                    if k as usize > crate::model::MAX_OCCASIONS {
                        return Err(Error::param(format!(
                            "{k} capture occasions needed at N = {n}; at most {} are supported",
                            crate::model::MAX_OCCASIONS
                        )));
                    }
                    let cfg = ModelConfig::Crck(crate::model::CrckConfig {
                        population: n,
                        sizes: vec![ratio_size(p, n); k as usize],
                    });
                    Ok((g, cfg, 1))
                })
                .collect::<Result<_>>()?
        }
    };
    let cells = cells
        .into_iter()
        .enumerate()
        .map(|(i, (grid_value, cfg, k_t))| {
            cfg.validate()?;
            Ok(Cell { t: i + 1, grid_value, cfg, k_t })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RegimeSchedule { kind, family, ratios: ratios.to_vec(), cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::*;
    use proptest::prelude::*;

    fn tank(population: u64, sample: u64) -> ModelConfig {
        ModelConfig::Tank(TankConfig { population, sample, offset: 0 })
    }

    fn tank_sizes(s: &RegimeSchedule) -> Vec<(u64, u64, u64)> {
        s.cells
            .iter()
            .map(|c| match &c.cfg {
                ModelConfig::Tank(t) => (t.sample, t.population, c.k_t),
                _ => unreachable!(),
            })
            .collect()
    }

    #[test]
    fn tank_outfill_example() {
        let s = build_schedule(RegimeKind::Outfill, &tank(10, 5), &[100.0, 200.0, 400.0], &[0.5]).unwrap();
        assert_eq!(tank_sizes(&s), vec![(50, 100, 1), (100, 200, 1), (200, 400, 1)]);
    }

    #[test]
    fn tank_infill_example() {
        let s = build_schedule(RegimeKind::Infill, &tank(20, 5), &[10.0, 100.0, 1000.0], &[]).unwrap();
        assert_eq!(tank_sizes(&s), vec![(5, 20, 10), (5, 20, 100), (5, 20, 1000)]);
    }

    #[test]
    fn tank_finite_ends_in_census() {
        let s = build_schedule(RegimeKind::FinitePopulation, &tank(20, 5), &[5.0, 10.0], &[]).unwrap();
        assert_eq!(tank_sizes(&s), vec![(5, 20, 1), (10, 20, 1), (20, 20, 1)]);
        assert!(build_schedule(RegimeKind::FinitePopulation, &tank(20, 5), &[5.0, 25.0], &[]).is_err());
    }

    #[test]
    fn ht_outfill_tiles_clusters() {
        let base = ModelConfig::HtCluster(HtClusterConfig { cluster_sizes: vec![2, 3], sample: 1 });
        let s = build_schedule(RegimeKind::Outfill, &base, &[1.0, 2.0, 4.0], &[0.4]).unwrap();
        let got: Vec<(Vec<u64>, u64)> = s
            .cells
            .iter()
            .map(|c| match &c.cfg {
                ModelConfig::HtCluster(h) => (h.cluster_sizes.clone(), h.sample),
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(got[0], (vec![2, 3], 2));
        assert_eq!(got[1], (vec![2, 3, 2, 3], 4));
        assert_eq!(got[2].0.len(), 8);
        assert_eq!(got[2].1, 8);
        assert_eq!(s.cells[2].cfg.target(), 20.0);
    }

    #[test]
    fn waiting_and_binomial_finite() {
        let w = ModelConfig::Waiting(WaitingConfig { population: 30, lambda: 1.0, horizon: Horizon::Finite(1.0) });
        let s = build_schedule(RegimeKind::FinitePopulation, &w, &[0.5, 2.0], &[]).unwrap();
        assert_eq!(s.cells.len(), 3);
        match &s.cells[2].cfg {
            ModelConfig::Waiting(c) => assert_eq!(c.horizon, Horizon::Infinite),
            _ => unreachable!(),
        }
        let b = ModelConfig::Binomial(BinomialConfig {
            population: 30,
            p: 0.5,
            repetitions: 3,
            prior_a: 2.0,
            prior_b: 2.0,
        });
        let s = build_schedule(RegimeKind::FinitePopulation, &b, &[0.2, 0.6, 1.0], &[]).unwrap();
        assert_eq!(s.cells.len(), 3);
    }

    #[test]
    fn growing_k_schedule() {
        let base = ModelConfig::Crck(CrckConfig { population: 100, sizes: vec![10, 10] });
        let s = build_schedule(RegimeKind::OutfillGrowingK, &base, &[1000.0, 10000.0], &[0.1]).unwrap();
        let ks: Vec<usize> = s
            .cells
            .iter()
            .map(|c| match &c.cfg {
                ModelConfig::Crck(k) => {
                    assert!(k.sizes.iter().all(|&n| n as f64 == 0.1 * k.population as f64));
                    k.sizes.len()
                }
                _ => unreachable!(),
            })
            .collect();
        let expect = |n: f64| ((n * 10.0).ln() / -(0.9f64).ln()).ceil() as usize;
        assert_eq!(ks, vec![expect(1000.0), expect(10000.0)]);
        assert_eq!(ks, vec![88, 110]);
    }

    #[test]
    fn rejections() {
        assert!(matches!(
            build_schedule(RegimeKind::Outfill, &tank(10, 5), &[100.0], &[1.5]),
            Err(Error::Parameter(m)) if m.contains("outside (0,1)")
        ));
        assert!(build_schedule(RegimeKind::Outfill, &tank(10, 5), &[200.0, 100.0], &[0.5]).is_err());
        let ztp = ModelConfig::Ztp(ZtpConfig { population: 10, lambda: 1.0, known_lambda: false });
        assert!(matches!(build_schedule(RegimeKind::FinitePopulation, &ztp, &[1.0], &[]), Err(Error::Unsupported(_))));
        assert!(matches!(
            build_schedule(RegimeKind::OutfillGrowingK, &tank(10, 5), &[100.0], &[0.1]),
            Err(Error::Unsupported(_))
        ));
        assert!(build_schedule(RegimeKind::Infill, &tank(10, 5), &[1.5], &[]).is_err());
    }

    #[test]
    fn interval_outfill_allows_unit_ratio() {
        let base = ModelConfig::Interval(IntervalConfig { theta: 1.0, sample: 1, boundary: Default::default() });
        let s = build_schedule(RegimeKind::Outfill, &base, &[100.0, 500.0], &[1.0]).unwrap();
        match &s.cells[1].cfg {
            ModelConfig::Interval(c) => assert_eq!((c.theta, c.sample), (500.0, 500)),
            _ => unreachable!(),
        }
    }

    #[test]
    fn schedule_json_round_trip() {
        let base = ModelConfig::Waiting(WaitingConfig { population: 30, lambda: 1.0, horizon: Horizon::Finite(1.0) });
        let s = build_schedule(RegimeKind::FinitePopulation, &base, &[0.5], &[]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: RegimeSchedule = serde_json::from_str(&json).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn outfill_ratio_within_rounding(c in 0.001f64..0.999, grid in proptest::collection::btree_set(2u64..100_000, 1..8)) {
            let grid: Vec<f64> = grid.into_iter().map(|g| g as f64).collect();
            let s = build_schedule(RegimeKind::Outfill, &tank(10, 5), &grid, &[c]).unwrap();
            for cell in &s.cells {
                let ModelConfig::Tank(t) = &cell.cfg else { unreachable!() };
                let n = t.population as f64;
                prop_assert!((t.sample as f64 / n - c).abs() <= 1.0 / n + 1e-15);
                prop_assert_eq!(cell.k_t, 1);
            }
        }

        #[test]
        fn infill_keeps_population(ks in proptest::collection::btree_set(1u64..10_000, 1..8)) {
            let grid: Vec<f64> = ks.iter().map(|&k| k as f64).collect();
            let base = ModelConfig::Crc2(Crc2Config { population: 50, n1: 10, n2: 20 });
            let s = build_schedule(RegimeKind::Infill, &base, &grid, &[]).unwrap();
            prop_assert!(s.cells.iter().all(|c| c.cfg == base));
            prop_assert!(s.cells.windows(2).all(|w| w[0].k_t < w[1].k_t));
        }
    }
}
