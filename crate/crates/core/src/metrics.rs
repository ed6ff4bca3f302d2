//! Benchmark metrics: travel time, path length, jerk integrals, limit
//! violation fractions, and nearest-obstacle distance statistics.

use serde::{Deserialize, Serialize};

use crate::scenario::Scenario;
use crate::spline::HermiteSpline;

/// Percentiles of the per-sample nearest-obstacle distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleDistanceStats {
    pub min: f64,
    pub p5: f64,
    pub p50: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Total trajectory duration (s).
    pub travel_time: f64,
    /// Arc length from dense sampling (m).
    pub path_length: f64,
    /// Integral of the jerk magnitude.
    pub jerk_integral: f64,
    /// Time-normalized RMS jerk: sqrt((1/T) ∫ |j|² dt).
    pub jerk_rms: f64,
    /// Percentage of sampled time above each dynamic bound.
    pub rho_vel: f64,
    pub rho_acc: f64,
    pub rho_jerk: f64,
    pub obstacle_distance: Option<ObstacleDistanceStats>,
}

/// Relative slack applied before counting a sample as violating a bound.
const VIOLATION_SLACK: f64 = 1e-9;

/// Evaluate benchmark metrics on a dense uniform grid with step `dt`
/// (the final time is appended when the grid does not land on it).
pub fn evaluate_metrics(spline: &HermiteSpline, scenario: &Scenario, dt: f64) -> Metrics {
    assert!(dt > 0.0, "sampling step must be positive");
    let total = spline.total_duration();
    let mut times: Vec<f64> = Vec::with_capacity((total / dt) as usize + 2);
    let n = (total / dt).floor() as usize;
    for i in 0..=n {
        times.push(i as f64 * dt);
    }
    if *times.last().unwrap() < total - 1e-12 * total.max(1.0) {
        times.push(total);
    }

    let states: Vec<_> = times
        .iter()
        .map(|&t| spline.eval_state(t).expect("time inside span"))
        .collect();

    let mut path_length = 0.0;
    let mut jerk_l1 = 0.0;
    let mut jerk_l2 = 0.0;
    for i in 0..times.len() - 1 {
        let h = times[i + 1] - times[i];
        path_length += (states[i + 1].pos - states[i].pos).norm();
        jerk_l1 += 0.5 * h * (states[i].jerk.norm() + states[i + 1].jerk.norm());
        jerk_l2 += 0.5 * h * (states[i].jerk.norm_squared() + states[i + 1].jerk.norm_squared());
    }

    let count = states.len() as f64;
    let violations = |limit: f64, values: &dyn Fn(usize) -> f64| -> f64 {
        let bound = limit * (1.0 + VIOLATION_SLACK);
        let violating = (0..states.len()).filter(|&i| values(i) > bound).count();
        100.0 * violating as f64 / count
    };
    let rho_vel = violations(scenario.limits.v_max, &|i| states[i].vel.norm());
    let rho_acc = violations(scenario.limits.a_max, &|i| states[i].acc.norm());
    let rho_jerk = violations(scenario.limits.j_max, &|i| states[i].jerk.norm());

    let obstacle_distance = if scenario.obstacles.is_empty() {
        None
    } else {
        let mut distances: Vec<f64> = times
            .iter()
            .zip(&states)
            .map(|(&t, st)| {
                scenario
                    .obstacles
                    .iter()
                    .map(|o| (st.pos - o.position(t)).norm())
                    .fold(f64::INFINITY, f64::min)
            })
            .collect();
        distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(ObstacleDistanceStats {
            min: distances[0],
            p5: percentile(&distances, 5.0),
            p50: percentile(&distances, 50.0),
            p95: percentile(&distances, 95.0),
        })
    };

    Metrics {
        travel_time: total,
        path_length,
        jerk_integral: jerk_l1,
        jerk_rms: (jerk_l2 / total).sqrt(),
        rho_vel,
        rho_acc,
        rho_jerk,
        obstacle_distance,
    }
}

/// Linear-interpolation percentile of a sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = idx.floor() as usize;
    let hi = idx.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        let frac = idx - lo as f64;
        sorted[lo] * (1.0 - frac) + sorted[hi] * frac
    }
}
