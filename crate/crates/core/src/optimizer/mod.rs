//! Objective assembly over the decision vector and the quasi-Newton solver,
//! plus a decoupled space-then-time baseline for comparisons.

mod lbfgs;
mod objective;

pub use lbfgs::{minimize, SolveResult, REJECT_COST};
pub use objective::{CostBreakdown, FrozenObstacles, ScenarioObjective};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::evaluate_metrics;
use crate::scenario::{initial_guess, Scenario};
use crate::spline::{HermiteSpline, KnotState};
use crate::transform::{pack, DerivativeScaling};

/// A differentiable objective over a flat decision vector.
pub trait CostFunction {
    /// Value and gradient at `z`.
    fn evaluate(&self, z: &[f64]) -> (f64, Vec<f64>);

    fn value(&self, z: &[f64]) -> f64 {
        self.evaluate(z).0
    }
}

/// Adapter for closure objectives.
pub struct FnObjective<F: Fn(&[f64]) -> (f64, Vec<f64>)> {
    f: F,
}

impl<F: Fn(&[f64]) -> (f64, Vec<f64>)> FnObjective<F> {
    pub fn new(f: F) -> Self {
        FnObjective { f }
    }
}

impl<F: Fn(&[f64]) -> (f64, Vec<f64>)> CostFunction for FnObjective<F> {
    fn evaluate(&self, z: &[f64]) -> (f64, Vec<f64>) {
        (self.f)(z)
    }
}

/// Solver hyperparameters. Defaults are the common strong-Wolfe
/// configuration; everything is overridable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Curvature-pair history size.
    pub history: usize,
    /// Gradient infinity-norm tolerance.
    pub tol_gradient: f64,
    /// Relative cost-change tolerance.
    pub tol_cost: f64,
    /// Consecutive small cost changes required to stop.
    pub cost_streak: usize,
    pub max_iterations: usize,
    /// Sufficient-decrease constant.
    pub ls_c1: f64,
    /// Curvature constant.
    pub ls_c2: f64,
    /// Objective-evaluation budget per line search.
    pub ls_max_trials: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            history: 8,
            tol_gradient: 1e-6,
            tol_cost: 1e-9,
            cost_streak: 5,
            max_iterations: 3000,
            ls_c1: 1e-4,
            ls_c2: 0.9,
            ls_max_trials: 40,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.ls_c1 && self.ls_c1 < self.ls_c2 && self.ls_c2 < 1.0) {
            return Err(Error::Config(
                "line search requires 0 < c1 < c2 < 1".into(),
            ));
        }
        if self.history == 0 {
            return Err(Error::Config("history size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Why a solve stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TerminationReason {
    Gradient,
    CostChange,
    MaxIterations,
    LineSearchFailure,
}

impl std::fmt::Display for TerminationReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            TerminationReason::Gradient => "gradient",
            TerminationReason::CostChange => "cost-change",
            TerminationReason::MaxIterations => "max-iterations",
            TerminationReason::LineSearchFailure => "line-search-failure",
        };
        f.write_str(s)
    }
}

/// A solved scenario: optimal spline, solver diagnostics, and the cost
/// breakdown at the optimum.
#[derive(Debug, Clone)]
pub struct ScenarioSolve {
    pub spline: HermiteSpline,
    /// Diagnostics of the (last) solve; `iterations`, `evaluations`, and
    /// `wall_ms` aggregate over obstacle-refresh rounds.
    pub result: SolveResult,
    pub breakdown: CostBreakdown,
    /// Obstacle-refresh rounds performed (1 for static scenarios).
    pub refresh_rounds: usize,
}

/// Solve a scenario end to end from its default initial guess.
pub fn solve_scenario(
    scenario: &Scenario,
    scaling: DerivativeScaling,
    cfg: &SolverConfig,
) -> Result<ScenarioSolve> {
    let guess = initial_guess(scenario)?;
    solve_scenario_from(scenario, &guess, scaling, cfg)
}

/// Solve a scenario from an explicit initial trajectory.
///
/// Static scenarios are a single quasi-Newton solve. With moving obstacles,
/// obstacle positions are frozen on the current iterate's sample-time grid
/// and refreshed between solves: every inner solve then minimizes a
/// consistent objective with exact gradients, and the refresh loop runs
/// until the iterate stops moving.
pub fn solve_scenario_from(
    scenario: &Scenario,
    guess: &HermiteSpline,
    scaling: DerivativeScaling,
    cfg: &SolverConfig,
) -> Result<ScenarioSolve> {
    const MAX_REFRESH_ROUNDS: usize = 25;
    const REFRESH_FIXED_POINT_TOL: f64 = 1e-6;
    const REFRESH_COST_TOL: f64 = 1e-7;
    const LATER_ROUND_ITERATIONS: usize = 300;

    let objective = ScenarioObjective::new(scenario)?.with_scaling(scaling);
    let mut z = pack(guess, scaling);

    if scenario.obstacles.is_empty() || scenario.weights.w_dyn == 0.0 {
        let result = minimize(&objective, &z, cfg)?;
        let spline = objective.unpack_solution(&result.z)?;
        let breakdown = objective.breakdown(&result.z)?;
        return Ok(ScenarioSolve {
            spline,
            result,
            breakdown,
            refresh_rounds: 1,
        });
    }

    let mut total_iterations = 0;
    let mut total_evaluations = 0;
    let mut total_wall = 0.0;
    let mut rounds = 0;
    let mut previous_final = f64::INFINITY;
    let mut last: Option<SolveResult> = None;
    for round in 0..MAX_REFRESH_ROUNDS {
        rounds += 1;
        let frozen = objective.freeze_obstacles_at(&z)?;
        let frozen_objective = objective.with_frozen_obstacles(frozen);
        // The first round carries the full budget; refreshes only re-settle
        // the optimum after the obstacle grid shifts.
        let round_cfg = if round == 0 {
            *cfg
        } else {
            SolverConfig {
                max_iterations: cfg.max_iterations.min(LATER_ROUND_ITERATIONS),
                ..*cfg
            }
        };
        let result = minimize(&frozen_objective, &z, &round_cfg)?;
        total_iterations += result.iterations;
        total_evaluations += result.evaluations;
        total_wall += result.wall_ms;
        let moved = result
            .z
            .iter()
            .zip(&z)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        z = result.z.clone();
        let final_cost = result.final_cost();
        let cost_settled =
            (previous_final - final_cost).abs() <= REFRESH_COST_TOL * final_cost.abs().max(1.0);
        previous_final = final_cost;
        let stalled =
            result.iterations <= 2 || moved <= REFRESH_FIXED_POINT_TOL || cost_settled;
        last = Some(result);
        if stalled {
            break;
        }
    }
    let mut result = last.expect("at least one refresh round");
    result.iterations = total_iterations;
    result.evaluations = total_evaluations;
    result.wall_ms = total_wall;

    let spline = objective.unpack_solution(&result.z)?;
    let breakdown = objective.breakdown(&result.z)?;
    Ok(ScenarioSolve {
        spline,
        result,
        breakdown,
        refresh_rounds: rounds,
    })
}

/// Outcome of the decoupled space-then-time baseline.
#[derive(Debug, Clone)]
pub struct DecoupledBaseline {
    pub spline: HermiteSpline,
    /// Uniform time-dilation factor applied after the spatial stage.
    pub gamma: f64,
    pub stage1: SolveResult,
}

/// Two-stage baseline: optimize spatial variables with durations frozen at
/// the initial guess, then uniformly dilate time by the smallest factor
/// `gamma >= 1` that removes all sampled limit violations.
pub fn decoupled_baseline(scenario: &Scenario, cfg: &SolverConfig) -> Result<DecoupledBaseline> {
    let guess = initial_guess(scenario)?;
    let scaling = DerivativeScaling::Scaled;
    let objective = ScenarioObjective::new(scenario)?.with_scaling(scaling);
    let z0 = pack(&guess, scaling);
    let m = scenario.segment_count();
    let spatial_dim = 9 * (m - 1);
    let sigmas: Vec<f64> = z0[spatial_dim..].to_vec();

    let stage1 = if spatial_dim == 0 {
        minimize(&objective, &[], cfg)?
    } else {
        let frozen = FrozenDurations {
            inner: &objective,
            sigmas: sigmas.clone(),
        };
        minimize(&frozen, &z0[..spatial_dim], cfg)?
    };

    let mut full = stage1.z.clone();
    full.extend_from_slice(&sigmas);
    let shaped = objective.unpack_solution(&full)?;

    let gamma = feasibility_dilation(&shaped, scenario)?;
    let spline = dilate_time(&shaped, gamma);
    Ok(DecoupledBaseline {
        spline,
        gamma,
        stage1,
    })
}

struct FrozenDurations<'a> {
    inner: &'a ScenarioObjective<'a>,
    sigmas: Vec<f64>,
}

impl CostFunction for FrozenDurations<'_> {
    fn evaluate(&self, z_spatial: &[f64]) -> (f64, Vec<f64>) {
        let mut z = Vec::with_capacity(z_spatial.len() + self.sigmas.len());
        z.extend_from_slice(z_spatial);
        z.extend_from_slice(&self.sigmas);
        let (f, g) = self.inner.evaluate(&z);
        (f, g[..z_spatial.len()].to_vec())
    }
}

/// Uniform time dilation: durations scale by `gamma`, every knot velocity by
/// `1/gamma`, every knot acceleration by `1/gamma^2`. The geometric path is
/// unchanged.
pub fn dilate_time(spline: &HermiteSpline, gamma: f64) -> HermiteSpline {
    let knots: Vec<KnotState> = spline
        .knots()
        .iter()
        .map(|k| KnotState::new(k.p, k.v / gamma, k.a / (gamma * gamma)))
        .collect();
    let durations: Vec<f64> = spline.durations().iter().map(|t| t * gamma).collect();
    HermiteSpline::new(knots, durations).expect("dilated spline is valid")
}

/// Smallest `gamma >= 1` (bisection to 1e-3) such that the dilated spline has
/// zero sampled velocity/acceleration/jerk violations. Errors above 100.
pub fn feasibility_dilation(spline: &HermiteSpline, scenario: &Scenario) -> Result<f64> {
    let feasible = |gamma: f64| -> bool {
        let candidate = dilate_time(spline, gamma);
        let m = evaluate_metrics(&candidate, scenario, 1e-3);
        m.rho_vel == 0.0 && m.rho_acc == 0.0 && m.rho_jerk == 0.0
    };
    if feasible(1.0) {
        return Ok(1.0);
    }
    let mut lo = 1.0;
    let mut hi = 2.0;
    while !feasible(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 100.0 {
            return Err(Error::Infeasible(
                "no dilation factor up to 100 satisfies the dynamic limits".into(),
            ));
        }
    }
    while hi - lo > 1e-3 {
        let mid = 0.5 * (lo + hi);
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
