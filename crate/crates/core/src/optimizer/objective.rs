//! Total objective over the decision vector: unpack, per-segment Bézier
//! conversion, cost terms, and gradient pullbacks.

use serde::{Deserialize, Serialize};

use crate::costs::{
    accumulate_sampled, dyn_obstacle_penalty, dyn_obstacle_sample_cost, jerk_surrogate,
    norm_limit_penalty, sfc_sample_cost, SampleJacobians, SegmentCostResult, Weights,
    SURROGATE_WEIGHTS,
};
use crate::error::{Error, Result};
use crate::gradients::{ctrl_points_wrt_duration, pullback_to_endpoints, segment_duration_gradient};
use crate::scenario::Scenario;
use crate::spline::{BasisTable, HermiteSpline};
use crate::transform::{
    pullback_gradient, segment_count_for_dim, unpack, DerivativeScaling, RawGradient,
    ScalingContext,
};
use crate::vec3::Vec3;

use super::{CostFunction, REJECT_COST};

/// Log-duration guard: beyond this the exp map is not evaluated and the
/// objective reports a large finite cost so the line search backtracks.
const SIGMA_GUARD: f64 = 50.0;

/// Weighted value of each objective term at one point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub time: f64,
    pub smooth: f64,
    pub sfc: f64,
    pub vel: f64,
    pub acc: f64,
    pub jerk: f64,
    pub dyn_obstacle: f64,
    pub total: f64,
}

/// Obstacle positions captured on a fixed per-segment sample-time grid.
/// Probing the objective with these held fixed makes the analytic gradient
/// (which does not differentiate obstacle motion through the time grid)
/// exact, which is what the finite-difference audit checks.
#[derive(Debug, Clone)]
pub struct FrozenObstacles {
    /// `positions[s][j]` holds every obstacle's position at sample `j` of
    /// segment `s`.
    positions: Vec<Vec<Vec<Vec3>>>,
}

/// The assembled scenario objective. Immutable and cheap to share; one
/// instance can serve many solves.
pub struct ScenarioObjective<'a> {
    scenario: &'a Scenario,
    scaling: DerivativeScaling,
    weights: Weights,
    table: BasisTable,
    frozen: Option<FrozenObstacles>,
}

struct Evaluation {
    cost: f64,
    gradient: Vec<f64>,
    breakdown: CostBreakdown,
}

impl<'a> ScenarioObjective<'a> {
    pub fn new(scenario: &'a Scenario) -> Result<Self> {
        let table = BasisTable::uniform(scenario.kappa)?;
        Ok(ScenarioObjective {
            scenario,
            scaling: DerivativeScaling::Scaled,
            weights: scenario.weights,
            table,
            frozen: None,
        })
    }

    pub fn with_scaling(mut self, scaling: DerivativeScaling) -> Self {
        self.scaling = scaling;
        self
    }

    /// Override the term weights (used for per-term gradient audits).
    pub fn with_weights(mut self, weights: Weights) -> Self {
        self.weights = weights;
        self
    }

    pub fn scaling(&self) -> DerivativeScaling {
        self.scaling
    }

    pub fn dim(&self) -> usize {
        crate::transform::decision_dim(self.scenario.segment_count())
    }

    /// Capture obstacle positions on the sample-time grid implied by `z`.
    pub fn freeze_obstacles_at(&self, z: &[f64]) -> Result<FrozenObstacles> {
        let spline = self.unpack_solution(z)?;
        let starts = spline.segment_start_times();
        let mut positions = Vec::with_capacity(spline.segment_count());
        for s in 0..spline.segment_count() {
            let t_s = spline.durations()[s];
            let per_sample = self
                .table
                .taus
                .iter()
                .map(|&tau| {
                    let t = starts[s] + tau * t_s;
                    self.scenario
                        .obstacles
                        .iter()
                        .map(|o| o.position(t))
                        .collect()
                })
                .collect();
            positions.push(per_sample);
        }
        Ok(FrozenObstacles { positions })
    }

    /// A copy of this objective that evaluates the dynamic-obstacle term
    /// against the given frozen positions instead of the moving tracks.
    pub fn with_frozen_obstacles(&self, frozen: FrozenObstacles) -> ScenarioObjective<'a> {
        ScenarioObjective {
            scenario: self.scenario,
            scaling: self.scaling,
            weights: self.weights,
            table: self.table.clone(),
            frozen: Some(frozen),
        }
    }

    pub fn unpack_solution(&self, z: &[f64]) -> Result<HermiteSpline> {
        let m = segment_count_for_dim(z.len())?;
        if m != self.scenario.segment_count() {
            return Err(Error::domain(format!(
                "decision vector implies {m} segments, scenario has {}",
                self.scenario.segment_count()
            )));
        }
        unpack(
            z,
            &self.scenario.boundary.start,
            &self.scenario.boundary.goal,
            self.scaling,
        )
    }

    /// Weighted per-term costs at `z`.
    pub fn breakdown(&self, z: &[f64]) -> Result<CostBreakdown> {
        self.eval_inner(z).map(|e| e.breakdown)
    }

    fn eval_inner(&self, z: &[f64]) -> Result<Evaluation> {
        let m = self.scenario.segment_count();
        let sigmas = &z[9 * (m - 1)..];
        if sigmas.iter().any(|s| s.abs() > SIGMA_GUARD) {
            return Ok(Evaluation {
                cost: REJECT_COST * 10.0,
                gradient: vec![0.0; z.len()],
                breakdown: CostBreakdown::default(),
            });
        }
        let spline = self.unpack_solution(z)?;
        let w = &self.weights;
        let starts = spline.segment_start_times();
        let ctx = ScalingContext::new(&spline);
        let mut raw = RawGradient::zeros(m);
        let mut breakdown = CostBreakdown::default();

        for s in 0..m {
            let duration = spline.durations()[s];
            let start_knot = &spline.knots()[s];
            let end_knot = &spline.knots()[s + 1];
            let seg = spline.bezier_segment(s);
            let mut combined = SegmentCostResult::ZERO;

            let smooth = jerk_surrogate(&seg, SURROGATE_WEIGHTS).scaled(w.w_smooth);
            breakdown.smooth += smooth.value;
            combined.accumulate(&smooth);

            if w.w_sfc > 0.0 {
                let corridor = &self.scenario.corridors[s];
                let sfc = accumulate_sampled(&seg, starts[s], &self.table, |_, _, st| {
                    sfc_sample_cost(st.pos, corridor, w.c_sfc, w.mu)
                })
                .scaled(w.w_sfc);
                breakdown.sfc += sfc.value;
                combined.accumulate(&sfc);
            }

            if w.w_vel > 0.0 {
                let vel = accumulate_sampled(&seg, starts[s], &self.table, |_, _, st| {
                    let (value, lv) = norm_limit_penalty(st.vel, self.scenario.limits.v_max, w.mu);
                    SampleJacobians {
                        value,
                        lv,
                        ..SampleJacobians::ZERO
                    }
                })
                .scaled(w.w_vel);
                breakdown.vel += vel.value;
                combined.accumulate(&vel);
            }

            if w.w_acc > 0.0 {
                let acc = accumulate_sampled(&seg, starts[s], &self.table, |_, _, st| {
                    let (value, la) = norm_limit_penalty(st.acc, self.scenario.limits.a_max, w.mu);
                    SampleJacobians {
                        value,
                        la,
                        ..SampleJacobians::ZERO
                    }
                })
                .scaled(w.w_acc);
                breakdown.acc += acc.value;
                combined.accumulate(&acc);
            }

            if w.w_jerk > 0.0 {
                let jerk = accumulate_sampled(&seg, starts[s], &self.table, |_, _, st| {
                    let (value, lj) = norm_limit_penalty(st.jerk, self.scenario.limits.j_max, w.mu);
                    SampleJacobians {
                        value,
                        lj,
                        ..SampleJacobians::ZERO
                    }
                })
                .scaled(w.w_jerk);
                breakdown.jerk += jerk.value;
                combined.accumulate(&jerk);
            }

            if w.w_dyn > 0.0 && !self.scenario.obstacles.is_empty() {
                let dyn_term = accumulate_sampled(&seg, starts[s], &self.table, |j, t, st| {
                    match &self.frozen {
                        Some(frozen) => {
                            dyn_obstacle_penalty(st.pos, &frozen.positions[s][j], w.c_dyn)
                        }
                        None => {
                            dyn_obstacle_sample_cost(st.pos, t, &self.scenario.obstacles, w.c_dyn)
                        }
                    }
                })
                .scaled(w.w_dyn);
                breakdown.dyn_obstacle += dyn_term.value;
                combined.accumulate(&dyn_term);
            }

            let endpoint = pullback_to_endpoints(&combined.grad_c, duration);
            raw.knots[s].p += endpoint.p_start;
            raw.knots[s].v += endpoint.v_start;
            raw.knots[s].a += endpoint.a_start;
            raw.knots[s + 1].p += endpoint.p_end;
            raw.knots[s + 1].v += endpoint.v_end;
            raw.knots[s + 1].a += endpoint.a_end;

            let dcdt = ctrl_points_wrt_duration(start_knot, end_knot, duration);
            raw.durations[s] =
                segment_duration_gradient(0.0, &combined.grad_c, &dcdt, combined.grad_duration)
                    + w.w_time;
        }

        breakdown.time = w.w_time * spline.total_duration();
        breakdown.total = breakdown.time
            + breakdown.smooth
            + breakdown.sfc
            + breakdown.vel
            + breakdown.acc
            + breakdown.jerk
            + breakdown.dyn_obstacle;

        let gradient = pullback_gradient(&raw, &ctx, self.scaling);
        Ok(Evaluation {
            cost: breakdown.total,
            gradient,
            breakdown,
        })
    }
}

impl CostFunction for ScenarioObjective<'_> {
    fn evaluate(&self, z: &[f64]) -> (f64, Vec<f64>) {
        match self.eval_inner(z) {
            Ok(eval) if eval.cost.is_finite() => (eval.cost, eval.gradient),
            Ok(eval) => (eval.cost, vec![0.0; z.len()]),
            Err(_) => (f64::INFINITY, vec![0.0; z.len()]),
        }
    }
}
