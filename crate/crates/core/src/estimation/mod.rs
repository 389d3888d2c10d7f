//! Logistic quasi-maximum likelihood estimation.

mod covariance;
mod objective;
mod optimizer;

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use covariance::{
    population_information, sandwich, sandwich_cov, scale_only_cov, structured_information, PopulationInformation,
    ScaleOnlyCov, StructuredInformation,
};
pub use objective::{evaluate, evaluate_filtered, hessian, loglik, score, Assembly, Evaluation, Objective};

use crate::error::{Error, Result};
use crate::linalg;
use crate::models::{ConditionalModel, Order, ParamVector};
use optimizer::{ascend, ascend_affine, AscentSettings, Local};

/// Tolerance used to flag estimates sitting on the edge of the box.
pub const BOUNDARY_TOL: f64 = 1e-6;

/// Optimizer settings.
#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub objective: Objective,
    pub max_iter: usize,
    /// Projected score tolerance, relative to `1 + |L|`.
    pub score_tol: f64,
    pub step_tol: f64,
    /// Uniform draws over the box added to the multistart set.
    pub random_starts: usize,
    pub seed: u64,
    /// Overrides the model's default box.
    pub bounds: Option<(Vec<f64>, Vec<f64>)>,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            objective: Objective::Logistic,
            max_iter: 500,
            score_tol: 1e-6,
            step_tol: 1e-8,
            random_starts: 3,
            seed: 0,
            bounds: None,
        }
    }
}

impl FitOptions {
    pub fn gaussian() -> Self {
        Self {
            objective: Objective::Gaussian,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub theta_hat: ParamVector,
    pub loglik: f64,
    pub n: usize,
    /// `n^-1 sum H_t` at the estimate.
    pub a_hat: DMatrix<f64>,
    /// `n^-1 sum s_t s_t'` at the estimate.
    pub b_hat: DMatrix<f64>,
    /// `A^-1 B A^-1 / n`; `None` when `A` is numerically singular.
    pub cov: Option<DMatrix<f64>>,
    pub se: Option<Vec<f64>>,
    /// Reciprocal condition number of `A`.
    pub rcond: f64,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub clamp_count: usize,
    pub boundary_active: Vec<bool>,
    /// Objective after each accepted step of the winning start.
    pub trace: Vec<f64>,
    /// Infinity norm of the projected score at the estimate.
    pub score_norm: f64,
    pub objective: Objective,
}

/// `H0: R theta = r`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearConstraint {
    pub r_mat: DMatrix<f64>,
    pub r: DVector<f64>,
}

impl LinearConstraint {
    pub fn new(r_mat: DMatrix<f64>, r: DVector<f64>) -> Result<Self> {
        if r.len() != r_mat.nrows() {
            return Err(Error::ShapeMismatch {
                expected: r_mat.nrows(),
                got: r.len(),
            });
        }
        if r_mat.nrows() == 0 || r_mat.nrows() > r_mat.ncols() {
            return Err(Error::RankDeficientR {
                rank: linalg::rank(&r_mat),
                rows: r_mat.nrows(),
            });
        }
        let rank = linalg::rank(&r_mat);
        if rank < r_mat.nrows() {
            return Err(Error::RankDeficientR {
                rank,
                rows: r_mat.nrows(),
            });
        }
        Ok(Self { r_mat, r })
    }

    /// `R = I_d`, `r = theta`.
    pub fn pin(theta: &[f64]) -> Self {
        let d = theta.len();
        Self {
            r_mat: DMatrix::identity(d, d),
            r: DVector::from_column_slice(theta),
        }
    }

    pub fn rows(&self) -> usize {
        self.r_mat.nrows()
    }

    pub fn dim(&self) -> usize {
        self.r_mat.ncols()
    }

    pub fn residual(&self, theta: &[f64]) -> DVector<f64> {
        &self.r_mat * DVector::from_column_slice(theta) - &self.r
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if self.dim() != d {
            return Err(Error::ShapeMismatch {
                expected: d,
                got: self.dim(),
            });
        }
        Ok(())
    }

    /// `R'(RR')^-1`, used for the particular solution and projections.
    fn pseudo_inverse(&self) -> Result<DMatrix<f64>> {
        let rrt = &self.r_mat * self.r_mat.transpose();
        let inv = rrt.try_inverse().ok_or(Error::RankDeficientR {
            rank: linalg::rank(&self.r_mat),
            rows: self.rows(),
        })?;
        Ok(self.r_mat.transpose() * inv)
    }
}

fn bounds_for<M: ConditionalModel + ?Sized>(model: &M, options: &FitOptions) -> Result<(Vec<f64>, Vec<f64>)> {
    let b = options.bounds.clone().unwrap_or_else(|| model.default_bounds());
    let d = model.dim();
    for len in [b.0.len(), b.1.len()] {
        if len != d {
            return Err(Error::ShapeMismatch { expected: d, got: len });
        }
    }
    if (0..d).any(|i| !(b.0[i] <= b.1[i])) {
        return Err(Error::InvalidParameter("empty bound interval".into()));
    }
    Ok(b)
}

fn check_data<M: ConditionalModel + ?Sized>(model: &M, y: &[f64]) -> Result<()> {
    let required = 10 * model.dim();
    if y.len() < required {
        return Err(Error::InsufficientData { required, got: y.len() });
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("data contain non-finite values".into()));
    }
    Ok(())
}

fn local_at<M: ConditionalModel + ?Sized>(
    model: &M,
    y: &[f64],
    theta: &[f64],
    objective: Objective,
    second: bool,
) -> Result<Local> {
    model.check_admissible(theta)?;
    let order = if second { Order::Second } else { Order::Value };
    let e = evaluate(model, y, theta, objective, order, Assembly::ClosedForm)?;
    Ok(Local {
        value: e.loglik,
        grad: e.score,
        curv: e.neg_hessian,
    })
}

fn usable<M: ConditionalModel + ?Sized>(model: &M, y: &[f64], theta: &[f64], objective: Objective) -> bool {
    local_at(model, y, theta, objective, false).is_ok()
}

/// Multistart candidates: the supplied point, or heuristic, box centre and
/// seeded uniform draws.
fn start_points<M: ConditionalModel + ?Sized>(
    model: &M,
    y: &[f64],
    init: Option<&[f64]>,
    bounds: &(Vec<f64>, Vec<f64>),
    options: &FitOptions,
) -> Result<Vec<Vec<f64>>> {
    let clamp = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(i, x)| x.clamp(bounds.0[i], bounds.1[i]))
            .collect()
    };
    if let Some(t) = init {
        model.check_len(t)?;
        return Ok(vec![clamp(t)]);
    }
    let mut starts = vec![clamp(&model.heuristic_start(y))];
    let center: Vec<f64> = (0..model.dim()).map(|i| 0.5 * (bounds.0[i] + bounds.1[i])).collect();
    starts.push(center);
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    for _ in 0..options.random_starts {
        for _attempt in 0..20 {
            let draw: Vec<f64> = (0..model.dim())
                .map(|i| {
                    let (lo, hi) = (bounds.0[i], bounds.1[i]);
                    if lo == hi {
                        lo
                    } else {
                        lo + (hi - lo) * rng.random::<f64>()
                    }
                })
                .collect();
            if usable(model, y, &draw, options.objective) {
                starts.push(draw);
                break;
            }
        }
    }
    Ok(starts)
}

fn settings(options: &FitOptions) -> AscentSettings {
    AscentSettings {
        max_iter: options.max_iter,
        score_tol: options.score_tol,
        step_tol: options.step_tol,
    }
}

fn better(a: &(bool, f64), b: &(bool, f64)) -> bool {
    // prefer converged runs, then higher objective
    (a.0 && !b.0) || (a.0 == b.0 && a.1 > b.1)
}

/// Maximises the quasi-likelihood over the parameter box.
///
/// Without `theta_init` every multistart candidate is run and the best
/// converged optimum is kept. Reaching the iteration limit is reported
/// through `converged = false` rather than an error.
pub fn fit<M: ConditionalModel + ?Sized>(
    model: &M,
    y: &[f64],
    theta_init: Option<&[f64]>,
    options: &FitOptions,
) -> Result<FitResult> {
    check_data(model, y)?;
    let bounds = bounds_for(model, options)?;
    let starts = start_points(model, y, theta_init, &bounds, options)?;
    let mut best: Option<optimizer::Ascent> = None;
    for s in &starts {
        let run = ascend(
            |x: &[f64], second| local_at(model, y, x, options.objective, second),
            s,
            &bounds.0,
            &bounds.1,
            settings(options),
        );
        if let Ok(run) = run {
            let replace = match &best {
                None => true,
                Some(b) => better(&(run.converged, run.value), &(b.converged, b.value)),
            };
            if replace {
                best = Some(run);
            }
        }
    }
    let best = best.ok_or(Error::NonFiniteObjective)?;
    finish(
        model,
        y,
        &best.x,
        &bounds,
        options.objective,
        best.converged,
        best.iterations,
        best.trace,
    )
}

#[allow(clippy::too_many_arguments)]
fn finish<M: ConditionalModel + ?Sized>(
    model: &M,
    y: &[f64],
    theta: &[f64],
    bounds: &(Vec<f64>, Vec<f64>),
    objective: Objective,
    converged: bool,
    iterations: usize,
    trace: Vec<f64>,
) -> Result<FitResult> {
    let e = evaluate(model, y, theta, objective, Order::Second, Assembly::ClosedForm)?;
    let n = e.n;
    let a_hat = e.neg_hessian / n as f64;
    let b_hat = e.outer / n as f64;
    let (cov, rcond) = match sandwich(&a_hat, &b_hat, n) {
        Ok((c, rc)) => (Some(c), rc),
        Err(Error::SingularInformation(rc)) => (None, rc),
        Err(err) => return Err(err),
    };
    let se = cov
        .as_ref()
        .map(|c| (0..c.nrows()).map(|i| c[(i, i)].max(0.0).sqrt()).collect());
    let theta_hat = ParamVector {
        values: theta.to_vec(),
        names: model.param_names(),
        lower: bounds.0.clone(),
        upper: bounds.1.clone(),
    };
    let score_norm = (0..theta.len())
        .map(|i| (theta[i] - (theta[i] + e.score[i]).clamp(bounds.0[i], bounds.1[i])).abs())
        .fold(0.0, f64::max);
    Ok(FitResult {
        boundary_active: theta_hat.boundary_active(theta, BOUNDARY_TOL),
        theta_hat,
        loglik: e.loglik,
        n,
        a_hat,
        b_hat,
        cov,
        se,
        rcond,
        residuals: e.residuals,
        converged,
        iterations,
        clamp_count: e.clamp_count,
        trace,
        score_norm,
        objective,
    })
}

/// Finds a point of `{R theta = r}` strictly inside the box by alternating
/// projections, or `None`.
fn feasible_point(
    c: &LinearConstraint,
    pinv: &DMatrix<f64>,
    start: &[f64],
    bounds: &(Vec<f64>, Vec<f64>),
) -> Option<Vec<f64>> {
    let d = start.len();
    // shrink the box slightly so the last affine projection stays inside
    let lo: Vec<f64> = (0..d)
        .map(|i| bounds.0[i] + 1e-9 * (1.0 + (bounds.1[i] - bounds.0[i])).min(1.0) * 0.5)
        .collect();
    let hi: Vec<f64> = (0..d)
        .map(|i| bounds.1[i] - 1e-9 * (1.0 + (bounds.1[i] - bounds.0[i])).min(1.0) * 0.5)
        .collect();
    let mut x = DVector::from_column_slice(start);
    for _ in 0..2000 {
        x -= pinv * (&c.r_mat * &x - &c.r);
        let inside = (0..d).all(|i| x[i] >= bounds.0[i] && x[i] <= bounds.1[i]);
        if inside {
            return Some(x.as_slice().to_vec());
        }
        for i in 0..d {
            x[i] = x[i].clamp(lo[i], hi[i]);
        }
    }
    None
}

/// Maximises the quasi-likelihood on `{theta in box : R theta = r}` and returns the multiplier
/// `lambda = -(R R')^-1 R score / n`.
pub fn fit_constrained<M: ConditionalModel + ?Sized>(
    model: &M,
    y: &[f64],
    constraint: &LinearConstraint,
    theta_init: Option<&[f64]>,
    options: &FitOptions,
) -> Result<(FitResult, DVector<f64>)> {
    check_data(model, y)?;
    let d = model.dim();
    constraint.check_dim(d)?;
    let rank = linalg::rank(&constraint.r_mat);
    if rank < constraint.rows() {
        return Err(Error::RankDeficientR {
            rank,
            rows: constraint.rows(),
        });
    }
    let bounds = bounds_for(model, options)?;
    let pinv = constraint.pseudo_inverse()?;
    let theta_p = &pinv * &constraint.r;
    let obj = options.objective;

    let (theta, converged, iterations, trace) = if constraint.rows() == d {
        let t = theta_p.as_slice().to_vec();
        if (0..d).any(|i| t[i] < bounds.0[i] || t[i] > bounds.1[i]) {
            return Err(Error::InfeasibleConstraint);
        }
        let v = local_at(model, y, &t, obj, false)?.value;
        (t, true, 0, vec![v])
    } else {
        let mut candidates: Vec<Vec<f64>> = Vec::new();
        match theta_init {
            Some(t) => {
                model.check_len(t)?;
                candidates.push(t.to_vec());
            }
            None => {
                candidates.push(model.heuristic_start(y));
                candidates.push((0..d).map(|i| 0.5 * (bounds.0[i] + bounds.1[i])).collect());
            }
        }
        let mut feasible_any = false;
        let mut best: Option<optimizer::Ascent> = None;
        for c in &candidates {
            let Some(x0) = feasible_point(constraint, &pinv, c, &bounds) else {
                continue;
            };
            feasible_any = true;
            let run = ascend_affine(
                |x: &[f64], second| local_at(model, y, x, obj, second),
                &x0,
                &constraint.r_mat,
                &bounds.0,
                &bounds.1,
                settings(options),
            );
            if let Ok(run) = run {
                let replace = match &best {
                    None => true,
                    Some(b) => better(&(run.converged, run.value), &(b.converged, b.value)),
                };
                if replace {
                    best = Some(run);
                }
            }
        }
        if !feasible_any {
            return Err(Error::InfeasibleConstraint);
        }
        let run = best.ok_or(Error::NonFiniteObjective)?;
        (run.x, run.converged, run.iterations, run.trace)
    };
    let result = finish(model, y, &theta, &bounds, obj, converged, iterations, trace)?;
    let s = evaluate(model, y, &theta, obj, Order::First, Assembly::ClosedForm)?.score;
    let rrt = &constraint.r_mat * constraint.r_mat.transpose();
    let rhs = -(&constraint.r_mat * s) / result.n as f64;
    let lambda = rrt.cholesky().map(|ch| ch.solve(&rhs)).ok_or(Error::RankDeficientR {
        rank,
        rows: constraint.rows(),
    })?;
    Ok((result, lambda))
}
