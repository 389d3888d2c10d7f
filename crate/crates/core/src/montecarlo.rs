//! Seeded replication engine.
//!
//! Replication `i` draws everything from a ChaCha8 stream keyed by
//! `(seed, i)`, so each record depends only on the scenario and its index.
//! [`summarize`] sorts records by index before aggregating, which makes the
//! summary independent of execution order and worker count.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::distribution::InnovationDist;
use crate::error::{Error, Result};
use crate::estimation::{
    fit, fit_constrained, population_information, sandwich, FitOptions, FitResult, LinearConstraint, Objective,
};
use crate::inference::{lm_statistic, wald_test};
use crate::math;
use crate::models::{simulate_rng, ConditionalModel, ModelSpec};
use crate::stats::mean_sd;

/// Fraction of failed replications above which a run is rejected.
pub const MAX_FAILURE_RATE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Estimator {
    Lqmle,
    Gqmle,
}

impl Estimator {
    pub fn objective(self) -> Objective {
        match self {
            Estimator::Lqmle => Objective::Logistic,
            Estimator::Gqmle => Objective::Gaussian,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Lqmle => "lqmle",
            Estimator::Gqmle => "gqmle",
        }
    }
}

/// Where each replication's optimizer starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StartPolicy {
    /// Heuristic, box centre and seeded uniform draws.
    Multistart,
    /// The data-generating parameter.
    Truth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub model: ModelSpec,
    /// Null parameter; data come from `alternative_scale * theta0` when set.
    pub theta0: Vec<f64>,
    pub dist: InnovationDist,
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub estimator: Estimator,
    /// Runs Wald and LM tests of this restriction in every replication.
    pub constraint: Option<LinearConstraint>,
    pub alternative_scale: Option<f64>,
    pub burn_in: usize,
    pub start: StartPolicy,
    /// Count estimates on the edge of the box as failures.
    pub drop_boundary: bool,
    pub level: f64,
    pub fit: FitOptions,
}

impl Scenario {
    pub fn new(name: impl Into<String>, model: ModelSpec, theta0: Vec<f64>, dist: InnovationDist) -> Self {
        Self {
            name: name.into(),
            model,
            theta0,
            dist,
            n: 400,
            reps: 200,
            seed: 0,
            estimator: Estimator::Lqmle,
            constraint: None,
            alternative_scale: None,
            burn_in: 0,
            start: StartPolicy::Multistart,
            drop_boundary: true,
            level: 0.05,
            fit: FitOptions::default(),
        }
    }

    /// Parameter generating the data.
    pub fn theta_true(&self) -> Vec<f64> {
        let s = self.alternative_scale.unwrap_or(1.0);
        self.theta0.iter().map(|v| v * s).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.model.dim();
        let bad = |m: &str| Err(Error::InvalidScenario(m.into()));
        if self.theta0.len() != d {
            return Err(Error::ShapeMismatch {
                expected: d,
                got: self.theta0.len(),
            });
        }
        if self.reps == 0 {
            return bad("reps must be at least 1");
        }
        if self.n < 10 * d {
            return bad("n must be at least 10 times the parameter dimension");
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return bad("level must lie in (0, 1)");
        }
        if let Some(s) = self.alternative_scale {
            if !(s.is_finite() && s > 0.0) {
                return bad("alternative_scale must be positive");
            }
        }
        if let Some(c) = &self.constraint {
            if c.dim() != d {
                return Err(Error::ShapeMismatch {
                    expected: d,
                    got: c.dim(),
                });
            }
        }
        self.dist.validate()?;
        self.model.check_admissible(&self.theta_true())?;
        Ok(())
    }

    fn child_rng(&self, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index as u64);
        rng
    }
}

/// Test outcome inside a replication.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestDraw {
    pub statistic: f64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub theta_hat: Vec<f64>,
    pub iterations: usize,
    pub wald: Option<TestDraw>,
    pub lm: Option<TestDraw>,
}

/// Outcome of one replication.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub index: usize,
    /// Failure label (error kind, `not_converged` or `boundary`) on failure.
    pub outcome: core::result::Result<RepRecord, &'static str>,
}

fn simulate_and_fit(s: &Scenario, rng: &mut ChaCha8Rng) -> Result<(Vec<f64>, FitResult, u64)> {
    let truth = s.theta_true();
    let y = simulate_rng(&s.model, &truth, s.n, &s.dist, rng, s.burn_in)?;
    let fit_seed = rng.next_u64();
    let mut opts = s.fit.clone();
    opts.objective = s.estimator.objective();
    opts.seed = fit_seed;
    let init = match s.start {
        StartPolicy::Multistart => None,
        StartPolicy::Truth => Some(truth.as_slice()),
    };
    let f = fit(&s.model, &y, init, &opts)?;
    Ok((y, f, fit_seed))
}

/// Runs replication `index` of `s`.
pub fn run_replication(s: &Scenario, index: usize) -> Replication {
    let mut rng = s.child_rng(index);
    let outcome = (|| -> core::result::Result<RepRecord, &'static str> {
        let (y, f, fit_seed) = simulate_and_fit(s, &mut rng).map_err(|e| e.kind())?;
        if !f.converged {
            return Err("not_converged");
        }
        if s.drop_boundary && f.boundary_active.iter().any(|b| *b) {
            return Err("boundary");
        }
        let (wald, lm) = match &s.constraint {
            None => (None, None),
            Some(c) => {
                let w = wald_test(&f, c).map_err(|e| e.kind())?;
                let mut opts = s.fit.clone();
                opts.objective = s.estimator.objective();
                opts.seed = fit_seed;
                // the unconstrained estimate, projected onto the restriction
                let (cf, lambda) =
                    fit_constrained(&s.model, &y, c, Some(&f.theta_hat.values), &opts).map_err(|e| e.kind())?;
                if !cf.converged {
                    return Err("not_converged");
                }
                let l = lm_statistic(&cf, &lambda, c).map_err(|e| e.kind())?;
                (
                    Some(TestDraw {
                        statistic: w.statistic,
                        p_value: w.p_value,
                    }),
                    Some(TestDraw {
                        statistic: l.statistic,
                        p_value: l.p_value,
                    }),
                )
            }
        };
        Ok(RepRecord {
            theta_hat: f.theta_hat.values,
            iterations: f.iterations,
            wald,
            lm,
        })
    })();
    Replication { index, outcome }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefSummary {
    pub name: String,
    pub truth: f64,
    pub mean: f64,
    /// `mean - truth`.
    pub bias: f64,
    pub abs_bias: f64,
    pub sd: f64,
    /// Monte Carlo standard error of the mean, `sd / sqrt(completed)`.
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionSummary {
    pub rejections: usize,
    pub total: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary {
    pub scenario: String,
    pub estimator: Estimator,
    pub n: usize,
    pub reps: usize,
    pub completed: usize,
    pub failures: usize,
    /// Failure counts by label, in label order.
    pub failure_kinds: BTreeMap<String, usize>,
    pub coefficients: Vec<CoefSummary>,
    pub wald: Option<RejectionSummary>,
    pub lm: Option<RejectionSummary>,
    /// Share of replications where Wald and LM reach the same decision.
    pub test_agreement: Option<f64>,
    pub mean_iterations: f64,
}

/// Aggregates replication records; errors when more than
/// [`MAX_FAILURE_RATE`] of them failed.
pub fn summarize(s: &Scenario, mut reps: Vec<Replication>) -> Result<McSummary> {
    reps.sort_by_key(|r| r.index);
    let total = reps.len();
    let mut failure_kinds: BTreeMap<String, usize> = BTreeMap::new();
    let mut ok: Vec<&RepRecord> = Vec::new();
    for r in &reps {
        match &r.outcome {
            Ok(rec) => ok.push(rec),
            Err(kind) => *failure_kinds.entry(String::from(*kind)).or_default() += 1,
        }
    }
    let failures = total - ok.len();
    if total == 0 || failures as f64 > MAX_FAILURE_RATE * total as f64 {
        return Err(Error::TooManyFailures {
            failed: failures,
            total,
        });
    }
    let truth = s.theta_true();
    let names = s.model.param_names();
    let coefficients = (0..truth.len())
        .map(|j| {
            let v: Vec<f64> = ok.iter().map(|r| r.theta_hat[j]).collect();
            let (mean, sd) = mean_sd(&v);
            CoefSummary {
                name: names[j].clone(),
                truth: truth[j],
                mean,
                bias: mean - truth[j],
                abs_bias: (mean - truth[j]).abs(),
                sd,
                mc_se: sd / math::sqrt(v.len() as f64),
            }
        })
        .collect();
    let rejection = |pick: fn(&RepRecord) -> Option<TestDraw>| -> Option<RejectionSummary> {
        let draws: Vec<TestDraw> = ok.iter().filter_map(|r| pick(r)).collect();
        if draws.is_empty() {
            return None;
        }
        let rejections = draws.iter().filter(|d| d.p_value < s.level).count();
        Some(RejectionSummary {
            rejections,
            total: draws.len(),
            rate: rejections as f64 / draws.len() as f64,
        })
    };
    let wald = rejection(|r| r.wald);
    let lm = rejection(|r| r.lm);
    let agree: Vec<bool> = ok
        .iter()
        .filter_map(|r| match (r.wald, r.lm) {
            (Some(w), Some(l)) => Some((w.p_value < s.level) == (l.p_value < s.level)),
            _ => None,
        })
        .collect();
    let test_agreement = (!agree.is_empty()).then(|| agree.iter().filter(|a| **a).count() as f64 / agree.len() as f64);
    let mean_iterations = if ok.is_empty() {
        0.0
    } else {
        ok.iter().map(|r| r.iterations as f64).sum::<f64>() / ok.len() as f64
    };
    Ok(McSummary {
        scenario: s.name.clone(),
        estimator: s.estimator,
        n: s.n,
        reps: total,
        completed: ok.len(),
        failures,
        failure_kinds,
        coefficients,
        wald,
        lm,
        test_agreement,
        mean_iterations,
    })
}

/// Runs every replication in index order on the calling thread.
pub fn run_scenario(s: &Scenario) -> Result<McSummary> {
    s.validate()?;
    let reps = (0..s.reps).map(|i| run_replication(s, i)).collect();
    summarize(s, reps)
}

/// Maximises the Gaussian quasi-likelihood with the same optimizer harness.
pub fn gqmle_fit<M: ConditionalModel + ?Sized>(
    model: &M,
    y: &[f64],
    theta_init: Option<&[f64]>,
    options: &FitOptions,
) -> Result<FitResult> {
    let mut opts = options.clone();
    opts.objective = Objective::Gaussian;
    fit(model, y, theta_init, &opts)
}

/// Scaled errors `sqrt(n) (theta_hat - theta0)` and the asymptotic SDs
/// from the population information.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalitySample {
    /// `completed x d`.
    pub draws: DMatrix<f64>,
    pub asymptotic_sd: Vec<f64>,
    pub failures: usize,
}

impl NormalitySample {
    /// Column `j` divided by its asymptotic SD.
    pub fn standardized(&self, j: usize) -> Vec<f64> {
        self.draws.column(j).iter().map(|v| v / self.asymptotic_sd[j]).collect()
    }
}

/// Replications of `s` reshaped into scaled estimation errors.
/// `population_draws` sizes the simulated path behind the asymptotic SDs.
pub fn normality_sample_with(s: &Scenario, reps: Vec<Replication>, population_draws: usize) -> Result<NormalitySample> {
    let summary = summarize(s, reps.clone())?;
    let truth = s.theta_true();
    let d = truth.len();
    let mut sorted = reps;
    sorted.sort_by_key(|r| r.index);
    let rows: Vec<Vec<f64>> = sorted
        .iter()
        .filter_map(|r| r.outcome.as_ref().ok())
        .map(|r| {
            (0..d)
                .map(|j| math::sqrt(s.n as f64) * (r.theta_hat[j] - truth[j]))
                .collect()
        })
        .collect();
    let draws = DMatrix::from_fn(rows.len(), d, |i, j| rows[i][j]);
    let pop = population_information(
        &s.model,
        &truth,
        &s.dist,
        population_draws,
        s.seed ^ 0x9e37_79b9_7f4a_7c15,
        1000,
    )?;
    let (cov, _) = sandwich(&pop.a0, &pop.b0, 1)?;
    let asymptotic_sd = (0..d).map(|j| math::sqrt(cov[(j, j)].max(0.0))).collect();
    Ok(NormalitySample {
        draws,
        asymptotic_sd,
        failures: summary.failures,
    })
}

/// Sequential [`normality_sample_with`] using `10^6` population draws.
pub fn normality_sample(s: &Scenario) -> Result<NormalitySample> {
    s.validate()?;
    let reps = (0..s.reps).map(|i| run_replication(s, i)).collect();
    normality_sample_with(s, reps, 1_000_000)
}
