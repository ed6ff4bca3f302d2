//! Joint spatiotemporal trajectory optimization on quintic Hermite splines.
//!
//! Trajectories are piecewise quintic Hermite splines over 3D positions.
//! Knot states (position, velocity, acceleration) and per-segment durations
//! are optimized together by an unconstrained quasi-Newton solve: durations
//! through an exp map, interior derivatives through an averaged-local-time
//! scaling. Costs are evaluated in Bézier form — a closed-form integrated
//! jerk term plus sampled soft penalties for corridor membership, dynamic
//! limits, and moving obstacles — with analytic gradients pulled back to the
//! decision vector and audited against finite differences.

pub mod costs;
pub mod error;
pub mod gradients;
pub mod metrics;
pub mod optimizer;
pub mod scenario;
pub mod spline;
pub mod transform;
pub mod vec3;

pub use error::{Error, Result};
pub use vec3::Vec3;

pub use costs::{Halfspace, Limits, Polytope, Weights};
pub use metrics::{evaluate_metrics, Metrics, ObstacleDistanceStats};
pub use optimizer::{
    decoupled_baseline, minimize, solve_scenario, CostBreakdown, CostFunction, ScenarioObjective,
    ScenarioSolve, SolveResult, SolverConfig, TerminationReason,
};
pub use scenario::{
    box_corridor_helper, initial_guess, load_scenario, save_scenario, Boundary, ObstacleTrack,
    Scenario,
};
pub use spline::{
    bernstein_basis, continuity_report, hermite_to_bezier, BasisTable, BezierSegment,
    HermiteSpline, KnotState, TrajectoryState,
};
pub use transform::{pack, unpack, DerivativeScaling};
