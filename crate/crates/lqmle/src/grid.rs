//! TOML scenario grids and their parallel execution.
//!
//! ```toml
//! seed = 7
//! reps = 500
//!
//! [[scenario]]
//! name = "dar"
//! model = "dar"
//! order = [1, 1]
//! theta0 = [1.0, 0.5, 0.3, 0.5]
//! dist = [{ family = "logistic" }, { family = "normal", scale = 1.75 }]
//! n = 400
//! alternatives = [1.0, 1.1, 1.3, 1.5]
//! restriction = { rows = [[1.0, 1.0, 1.0, 1.0]] }
//! ```
//!
//! Every list-valued axis (`n`, `dist`, `estimator`, `alternatives`) is
//! crossed; all cells of one entry share its seed.

use std::collections::BTreeMap;

use lqmle_core::distribution::InnovationDist;
use lqmle_core::estimation::LinearConstraint;
use lqmle_core::models::ConditionalModel;
use lqmle_core::montecarlo::{run_replication, summarize, Estimator, McSummary, Replication, Scenario, StartPolicy};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::cli::{build_model, default_scale, innovation, DistKind, ModelKind};
use crate::error::{CliError, Result};
use crate::report::num;

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub seed: Option<u64>,
    pub reps: Option<usize>,
    pub n: Option<OneOrMany<usize>>,
    #[serde(default)]
    pub scenario: Vec<ScenarioConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Lqmle,
    Gqmle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartKind {
    Multistart,
    Truth,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistConfig {
    pub family: DistKind,
    /// Defaults as in `simulate`: psi = 1 calibration, 1 for the stable law.
    pub scale: Option<f64>,
    pub nu: Option<f64>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RestrictionConfig {
    pub rows: Vec<Vec<f64>>,
    /// Defaults to `rows * theta0`, so the null holds at `theta0`.
    pub rhs: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub model: ModelKind,
    #[serde(default)]
    pub order: Vec<usize>,
    #[serde(default)]
    pub no_intercept: bool,
    pub theta0: Vec<f64>,
    pub dist: OneOrMany<DistConfig>,
    pub estimator: Option<OneOrMany<EstimatorKind>>,
    pub n: Option<OneOrMany<usize>>,
    pub reps: Option<usize>,
    pub seed: Option<u64>,
    pub alternatives: Option<Vec<f64>>,
    pub restriction: Option<RestrictionConfig>,
    pub burn_in: Option<usize>,
    pub start: Option<StartKind>,
    pub drop_boundary: Option<bool>,
    pub level: Option<f64>,
}

/// One fully specified grid point.
#[derive(Debug, Clone)]
pub struct Cell {
    pub group: String,
    pub dist_label: String,
    pub scenario: Scenario,
}

pub fn parse_config(text: &str) -> Result<GridConfig> {
    toml::from_str(text).map_err(|e| CliError::Config(format!("scenario grid: {e}")))
}

fn resolve_dist(d: &DistConfig, cache: &mut BTreeMap<String, f64>) -> Result<(InnovationDist, String)> {
    let shape = d.family.shape(d.nu, d.alpha);
    let family = d.family.family();
    let scale = match d.scale {
        Some(s) => s,
        None => {
            let key = format!("{}:{shape}", family.name());
            match cache.get(&key) {
                Some(s) => *s,
                None => {
                    let s = default_scale(d.family, shape)?;
                    cache.insert(key, s);
                    s
                }
            }
        }
    };
    let label = match d.family {
        DistKind::T => format!("t{shape}*{scale}"),
        DistKind::Stable => format!("stable{shape}*{scale}"),
        _ => format!("{}*{scale}", family.name()),
    };
    Ok((innovation(d.family, scale, shape), label))
}

/// Expands the grid into validated cells; nothing is simulated here.
pub fn expand(cfg: &GridConfig, seed: u64) -> Result<Vec<Cell>> {
    if cfg.scenario.is_empty() {
        return Err(CliError::Config(
            "scenario grid is empty: add at least one [[scenario]]".into(),
        ));
    }
    let mut cache = BTreeMap::new();
    let mut cells = Vec::new();
    for sc in &cfg.scenario {
        let model = build_model(sc.model, &sc.order, sc.no_intercept)
            .map_err(|e| CliError::Config(format!("scenario {:?}: {e}", sc.name)))?;
        let ns =
            sc.n.as_ref()
                .or(cfg.n.as_ref())
                .map(|n| n.to_vec())
                .unwrap_or_else(|| vec![400]);
        let dists = sc.dist.to_vec();
        let estimators = sc
            .estimator
            .as_ref()
            .map(|e| e.to_vec())
            .unwrap_or_else(|| vec![EstimatorKind::Lqmle]);
        let alternatives: Vec<Option<f64>> = match &sc.alternatives {
            None => vec![None],
            Some(a) => a.iter().map(|v| Some(*v)).collect(),
        };
        if ns.is_empty() || dists.is_empty() || estimators.is_empty() || alternatives.is_empty() {
            return Err(CliError::Config(format!("scenario {:?} has an empty axis", sc.name)));
        }
        let constraint = match &sc.restriction {
            None => None,
            Some(r) => Some(
                restriction(r, &sc.theta0)
                    .map_err(|e| CliError::Config(format!("scenario {:?}: restriction: {e}", sc.name)))?,
            ),
        };
        for &n in &ns {
            for d in &dists {
                let (dist, dist_label) = resolve_dist(d, &mut cache)?;
                for &est in &estimators {
                    for &alt in &alternatives {
                        let mut s = Scenario::new(sc.name.clone(), model, sc.theta0.clone(), dist.clone());
                        s.n = n;
                        s.reps = sc.reps.or(cfg.reps).unwrap_or(s.reps);
                        s.seed = sc.seed.unwrap_or(seed);
                        s.estimator = match est {
                            EstimatorKind::Lqmle => Estimator::Lqmle,
                            EstimatorKind::Gqmle => Estimator::Gqmle,
                        };
                        s.constraint = constraint.clone();
                        s.alternative_scale = alt;
                        s.burn_in = sc.burn_in.unwrap_or(s.burn_in);
                        s.start = match sc.start.unwrap_or(StartKind::Multistart) {
                            StartKind::Multistart => StartPolicy::Multistart,
                            StartKind::Truth => StartPolicy::Truth,
                        };
                        s.drop_boundary = sc.drop_boundary.unwrap_or(s.drop_boundary);
                        s.level = sc.level.unwrap_or(s.level);
                        s.validate().map_err(|e| {
                            CliError::Config(format!("scenario {:?} (n = {n}, {dist_label}): {e}", sc.name))
                        })?;
                        cells.push(Cell {
                            group: sc.name.clone(),
                            dist_label: dist_label.clone(),
                            scenario: s,
                        });
                    }
                }
            }
        }
    }
    Ok(cells)
}

fn restriction(r: &RestrictionConfig, theta0: &[f64]) -> lqmle_core::Result<LinearConstraint> {
    let d = theta0.len();
    if r.rows.is_empty() || r.rows.iter().any(|row| row.len() != d) {
        return Err(lqmle_core::Error::ShapeMismatch {
            expected: d,
            got: r.rows.iter().map(|row| row.len()).find(|l| *l != d).unwrap_or(0),
        });
    }
    let flat: Vec<f64> = r.rows.iter().flatten().copied().collect();
    let rm = DMatrix::from_row_slice(r.rows.len(), d, &flat);
    let rhs = match &r.rhs {
        Some(v) => DVector::from_column_slice(v),
        None => &rm * DVector::from_column_slice(theta0),
    };
    LinearConstraint::new(rm, rhs)
}

/// Runs every replication of every cell on `workers` threads. The result
/// depends only on the cells, never on scheduling.
pub fn run_cells(cells: &[Cell], workers: usize) -> Result<Vec<lqmle_core::Result<McSummary>>> {
    let tasks: Vec<(usize, usize)> = cells
        .iter()
        .enumerate()
        .flat_map(|(c, cell)| (0..cell.scenario.reps).map(move |i| (c, i)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start {workers} workers: {e}")))?;
    let done: Vec<(usize, Replication)> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(c, i)| (c, run_replication(&cells[c].scenario, i)))
            .collect()
    });
    let mut per_cell: Vec<Vec<Replication>> = cells.iter().map(|_| Vec::new()).collect();
    for (c, r) in done {
        per_cell[c].push(r);
    }
    Ok(cells
        .iter()
        .zip(per_cell)
        .map(|(cell, reps)| summarize(&cell.scenario, reps))
        .collect())
}

/// JSON record of one cell.
pub fn cell_json(cell: &Cell, summary: &lqmle_core::Result<McSummary>) -> Value {
    let s = &cell.scenario;
    let mut v = json!({
        "scenario": cell.group,
        "model": s.model.label(),
        "n": s.n,
        "dist": {
            "family": s.dist.family.name(),
            "scale": num(s.dist.scale),
            "shape": num(s.dist.shape),
            "label": cell.dist_label,
        },
        "estimator": s.estimator.name(),
        "alternative_scale": s.alternative_scale.map(num),
        "seed": s.seed,
        "reps": s.reps,
        "level": s.level,
        "theta0": crate::report::nums(&s.theta0),
    });
    let obj = v.as_object_mut().unwrap();
    match summary {
        Ok(m) => {
            obj.insert("completed".into(), json!(m.completed));
            obj.insert("failures".into(), json!(m.failures));
            obj.insert("failure_kinds".into(), json!(m.failure_kinds));
            obj.insert(
                "coefficients".into(),
                Value::Array(
                    m.coefficients
                        .iter()
                        .map(|c| {
                            json!({
                                "name": c.name,
                                "truth": num(c.truth),
                                "mean": num(c.mean),
                                "bias": num(c.bias),
                                "sd": num(c.sd),
                                "mc_se": num(c.mc_se),
                            })
                        })
                        .collect(),
                ),
            );
            let rej = |r: &Option<lqmle_core::montecarlo::RejectionSummary>| {
                r.as_ref()
                    .map(|r| json!({"rejections": r.rejections, "total": r.total, "rate": num(r.rate)}))
            };
            obj.insert("wald".into(), rej(&m.wald).into());
            obj.insert("lm".into(), rej(&m.lm).into());
            obj.insert("test_agreement".into(), m.test_agreement.map(num).into());
            obj.insert("mean_iterations".into(), num(m.mean_iterations));
            obj.insert("error".into(), Value::Null);
        }
        Err(e) => {
            obj.insert("error".into(), json!({"kind": e.kind(), "message": e.to_string()}));
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    const GRID: &str = r#"
        seed = 3
        reps = 4
        [[scenario]]
        name = "g"
        model = "garch"
        theta0 = [0.2, 0.1, 0.3]
        dist = [{ family = "logistic" }, { family = "normal", scale = 1.75 }]
        n = [100, 200]
        estimator = ["lqmle", "gqmle"]
    "#;

    #[test]
    fn axes_are_crossed() {
        let cfg = parse_config(GRID).unwrap();
        let cells = expand(&cfg, 3).unwrap();
        assert_eq!(cells.len(), 8);
        assert!(cells.iter().all(|c| c.scenario.reps == 4 && c.scenario.seed == 3));
    }

    #[test]
    fn empty_and_invalid_grids() {
        let cfg = parse_config("seed = 1\n").unwrap();
        assert!(matches!(expand(&cfg, 1), Err(CliError::Config(_))));
        assert!(parse_config("bogus = 1\n").is_err());
        let bad = GRID.replace("[0.2, 0.1, 0.3]", "[0.2, 0.1]");
        assert!(matches!(
            expand(&parse_config(&bad).unwrap(), 1),
            Err(CliError::Config(_))
        ));
    }

    #[test]
    fn restriction_defaults_to_null_at_theta0() {
        let r = RestrictionConfig {
            rows: vec![vec![1.0, 1.0, 1.0]],
            rhs: None,
        };
        let c = restriction(&r, &[0.2, 0.1, 0.3]).unwrap();
        assert!((c.r[0] - 0.6).abs() < 1e-15);
        assert!(c.residual(&[0.2, 0.1, 0.3])[0].abs() < 1e-15);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let cells = expand(&parse_config(GRID).unwrap(), 3).unwrap();
        let a: Vec<Value> = run_cells(&cells, 1)
            .unwrap()
            .iter()
            .zip(&cells)
            .map(|(s, c)| cell_json(c, s))
            .collect();
        let b: Vec<Value> = run_cells(&cells, 4)
            .unwrap()
            .iter()
            .zip(&cells)
            .map(|(s, c)| cell_json(c, s))
            .collect();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}
