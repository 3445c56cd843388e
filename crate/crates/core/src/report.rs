//! Output files for a finished experiment: `cells.csv`, `summary.json` and
//! one small CSV per plot.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::config::ExperimentConfig;
use crate::engine::{fit_loglog_rate, CellStats, RateFit};
use crate::error::{Error, Result};
use crate::estimators::EstimatorId;
use crate::regime::RegimeSchedule;

pub const FORMAT_VERSION: u32 = 1;

/// Fixed leading columns of `cells.csv`; one `p_outside_<eps>` column per
/// eps and `seed` follow.
pub const CELL_COLUMNS: &[&str] = &[
    "experiment_id",
    "family",
    "regime",
    "estimator",
    "t",
    "population_size",
    "sample_sizes",
    "k_t",
    "replications",
    "valid",
    "mean",
    "bias",
    "variance",
    "mse",
    "mc_se",
    "ks_stat",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum RateEntry {
    Fit(RateFit),
    Unavailable { error: String },
}

#[derive(Debug, Clone)]
pub struct OutputPaths {
    pub cells: PathBuf,
    pub summary: PathBuf,
    pub plots: Vec<PathBuf>,
}

pub fn cells_header(eps: &[f64]) -> Vec<String> {
    let mut h: Vec<String> = CELL_COLUMNS.iter().map(|s| s.to_string()).collect();
    h.extend(eps.iter().map(|e| format!("p_outside_{e}")));
    h.push("seed".into());
    h
}

fn num(x: f64) -> String {
    if x.is_finite() && x == x.trunc() && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

fn cell_rows(cfg: &ExperimentConfig, schedule: &RegimeSchedule, cells: &[CellStats]) -> Result<Vec<Vec<String>>> {
    cells
        .iter()
        .map(|c| {
            let cell = schedule
                .cells
                .get(c.t.wrapping_sub(1))
                .ok_or_else(|| Error::param(format!("no schedule cell for t={}", c.t)))?;
            let sizes = cell.cfg.sample_sizes().iter().map(|s| s.to_string()).collect::<Vec<_>>().join(";");
            let mut row = vec![
                cfg.id.clone(),
                cfg.family.as_str().to_string(),
                cfg.regime.as_str().to_string(),
                c.estimator.as_str().to_string(),
                c.t.to_string(),
                num(c.target),
                sizes,
                c.k_t.to_string(),
                c.replications.to_string(),
                c.valid.to_string(),
                format!("{}", c.mean),
                format!("{}", c.bias),
                format!("{}", c.variance),
                format!("{}", c.mse),
                format!("{}", c.mc_se),
                format!("{}", c.ks_stat),
            ];
            for &e in &cfg.eps {
                row.push(c.p_outside_at(e).map(|p| format!("{p}")).unwrap_or_default());
            }
            row.push(c.seed.to_string());
            Ok(row)
        })
        .collect()
}

fn write_csv(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Serialization(format!("{}: {other:?}", path.display())),
    }
}

/// Log-log MSE fit per estimator over cells with a finite, positive MSE.
pub fn rate_fits(schedule: &RegimeSchedule, ids: &[EstimatorId], cells: &[CellStats]) -> BTreeMap<String, RateEntry> {
    ids.iter()
        .map(|&id| {
            let pts: Vec<(f64, f64)> = cells
                .iter()
                .filter(|c| c.estimator == id && c.mse.is_finite() && c.mse > 0.0)
                .filter_map(|c| schedule.cells.get(c.t - 1).map(|cell| (cell.x_value(schedule.kind), c.mse)))
                .filter(|p| p.0.is_finite())
                .collect();
            let entry = match fit_loglog_rate(&pts) {
                Ok(f) => RateEntry::Fit(f),
                Err(e) => RateEntry::Unavailable { error: e.to_string() },
            };
            (id.as_str().to_string(), entry)
        })
        .collect()
}

#[derive(Serialize)]
struct Summary<'a> {
    version: u32,
    config: &'a ExperimentConfig,
    schedule: &'a RegimeSchedule,
    rates: BTreeMap<String, RateEntry>,
    degenerate_cells: Vec<(usize, String)>,
    timestamp: String,
}

/// Writes every output file into `dir`, creating it if needed.
pub fn write_outputs(
    dir: &Path,
    cfg: &ExperimentConfig,
    schedule: &RegimeSchedule,
    cells: &[CellStats],
) -> Result<OutputPaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let cells_path = dir.join("cells.csv");
    write_csv(&cells_path, &cells_header(&cfg.eps), &cell_rows(cfg, schedule, cells)?)?;

    let summary = Summary {
        version: FORMAT_VERSION,
        config: cfg,
        schedule,
        rates: rate_fits(schedule, &cfg.estimators, cells),
        degenerate_cells: cells
            .iter()
            .filter(|c| c.degenerate)
            .map(|c| (c.t, c.estimator.as_str().to_string()))
            .collect(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    let summary_path = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&summary).map_err(|e| Error::Serialization(e.to_string()))?;
    std::fs::write(&summary_path, json).map_err(|e| Error::io(&summary_path, e))?;

    let mut plots = Vec::new();
    for &id in &cfg.estimators {
        let mine: Vec<&CellStats> = cells.iter().filter(|c| c.estimator == id).collect();
        let x = |c: &CellStats| schedule.cells[c.t - 1].x_value(schedule.kind);

        let path = dir.join(format!("plot_mse_{id}.csv"));
        let rows: Vec<Vec<String>> =
            mine.iter().map(|c| vec![c.t.to_string(), format!("{}", x(c)), format!("{}", c.mse)]).collect();
        write_csv(&path, &["t".into(), "x".into(), "mse".into()], &rows)?;
        plots.push(path);

        let path = dir.join(format!("plot_p_outside_{id}.csv"));
        let mut header = vec!["t".to_string(), "x".to_string()];
        header.extend(cfg.eps.iter().map(|e| format!("p_outside_{e}")));
        let rows: Vec<Vec<String>> = mine
            .iter()
            .map(|c| {
                let mut r = vec![c.t.to_string(), format!("{}", x(c))];
                r.extend(cfg.eps.iter().map(|&e| c.p_outside_at(e).map(|p| format!("{p}")).unwrap_or_default()));
                r
            })
            .collect();
        write_csv(&path, &header, &rows)?;
        plots.push(path);

        let path = dir.join(format!("plot_ks_{id}.csv"));
        let rows: Vec<Vec<String>> =
            mine.iter().map(|c| vec![c.t.to_string(), format!("{}", x(c)), format!("{}", c.ks_stat)]).collect();
        write_csv(&path, &["t".into(), "x".into(), "ks_stat".into()], &rows)?;
        plots.push(path);
    }

    Ok(OutputPaths { cells: cells_path, summary: summary_path, plots })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::run_schedule;

    fn experiment() -> ExperimentConfig {
        ExperimentConfig::from_toml_str(
            r#"
id = "t1"
family = "tank"
regime = "outfill"
estimators = ["tank.goodman"]
grid = [20, 40, 80]
ratios = [0.5]
replications = 200
eps = [0.5, 3]
seed = 5
enumeration_threshold = 0

[model]
population = 20
sample = 10
"#,
        )
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let h = cells_header(&[0.5, 3.0]);
        assert_eq!(
            h.join(","),
            "experiment_id,family,regime,estimator,t,population_size,sample_sizes,k_t,replications,valid,\
             mean,bias,variance,mse,mc_se,ks_stat,p_outside_0.5,p_outside_3,seed"
        );
    }

    #[test]
    fn writes_all_files() {
        let cfg = experiment();
        let s = cfg.schedule().unwrap();
        let cells = run_schedule(&s, &cfg.estimators, &cfg.run_options(Some(1))).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = write_outputs(dir.path(), &cfg, &s, &cells).unwrap();
        let text = std::fs::read_to_string(&out.cells).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.lines().nth(1).unwrap().starts_with("t1,tank,outfill,tank.goodman,1,20,10,1,200,200,"));
        let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out.summary).unwrap()).unwrap();
        for k in ["version", "config", "schedule", "rates", "timestamp"] {
            assert!(json.get(k).is_some(), "{k}");
        }
        assert!(json["rates"]["tank.goodman"]["slope"].is_number());
        assert_eq!(out.plots.len(), 3);
        assert!(out.plots[0].ends_with("plot_mse_tank.goodman.csv"));
    }

    #[test]
    fn unwritable_target_is_io_error() {
        let cfg = experiment();
        let s = cfg.schedule().unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        std::fs::write(&file, "x").unwrap();
        assert!(matches!(write_outputs(&file, &cfg, &s, &[]), Err(Error::Io { .. })));
    }
}
