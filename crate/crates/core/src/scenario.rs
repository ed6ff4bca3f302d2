//! Scenario definition, validation, persistence, and initial-guess
//! construction, plus obstacle motion models and synthetic scene builders.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::costs::{Halfspace, Limits, Polytope, Weights};
use crate::error::{Error, Result};
use crate::spline::{HermiteSpline, KnotState};
use crate::vec3::Vec3;

pub const SCHEMA_VERSION: u32 = 1;

/// Fixed start and goal states of a planning problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Boundary {
    pub start: KnotState,
    pub goal: KnotState,
}

/// A moving obstacle on a trefoil-knot track.
///
/// Position at time `t` is
/// `center + scale * (sin θ + 2 sin 2θ, cos θ - 2 cos 2θ, -sin 3θ)`
/// with `θ = omega * t + phase`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObstacleTrack {
    pub center: Vec3,
    pub scale: f64,
    pub omega: f64,
    #[serde(default)]
    pub phase: f64,
}

impl ObstacleTrack {
    pub fn position(&self, t: f64) -> Vec3 {
        trefoil_position(t, self)
    }
}

/// Trefoil-knot position for the given track parameters at time `t`.
pub fn trefoil_position(t: f64, params: &ObstacleTrack) -> Vec3 {
    let theta = params.omega * t + params.phase;
    let offset = Vec3::new(
        theta.sin() + 2.0 * (2.0 * theta).sin(),
        theta.cos() - 2.0 * (2.0 * theta).cos(),
        -(3.0 * theta).sin(),
    );
    params.center + offset * params.scale
}

/// A complete planning problem: boundary states, one corridor polytope per
/// segment, dynamic limits, objective weights, obstacle tracks, and sampling
/// configuration. See the repository README for the JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub version: u32,
    pub boundary: Boundary,
    pub corridors: Vec<Polytope>,
    pub limits: Limits,
    #[serde(default)]
    pub weights: Weights,
    #[serde(default)]
    pub obstacles: Vec<ObstacleTrack>,
    #[serde(default = "default_collision_radius")]
    pub collision_radius: f64,
    #[serde(default = "default_kappa")]
    pub kappa: usize,
    #[serde(default)]
    pub seed: u64,
    /// Optional explicit initial durations, one per segment. When absent the
    /// initial guess derives durations from chord lengths.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_durations: Option<Vec<f64>>,
}

fn default_collision_radius() -> f64 {
    0.1
}

fn default_kappa() -> usize {
    16
}

impl Scenario {
    /// Number of spline segments (one corridor each).
    pub fn segment_count(&self) -> usize {
        self.corridors.len()
    }

    /// Validate all fields and normalize corridor halfspaces to unit normals.
    /// Every scenario object handed out by [`load_scenario`] has passed this.
    pub fn validate(&mut self) -> Result<()> {
        if self.version != SCHEMA_VERSION {
            return Err(Error::invalid(
                "version",
                format!("expected schema version {SCHEMA_VERSION}, got {}", self.version),
            ));
        }
        if !self.boundary.start.is_finite() || !self.boundary.goal.is_finite() {
            return Err(Error::invalid("boundary", "states must be finite"));
        }
        if self.corridors.is_empty() {
            return Err(Error::invalid("corridors", "need at least one corridor"));
        }
        for (i, poly) in self.corridors.iter_mut().enumerate() {
            if poly.halfspaces.is_empty() {
                return Err(Error::invalid(
                    format!("corridors[{i}]"),
                    "polytope needs at least one halfspace",
                ));
            }
            for (h_idx, h) in poly.halfspaces.iter_mut().enumerate() {
                if h.a.norm() <= 1e-12 || !h.a.is_finite() || !h.b.is_finite() {
                    return Err(Error::invalid(
                        format!("corridors[{i}].halfspaces[{h_idx}]"),
                        "normal must be nonzero and finite",
                    ));
                }
                *h = h.normalized();
            }
        }
        for (i, poly) in self.corridors.iter().enumerate() {
            let (_, margin) = deepest_point(std::slice::from_ref(poly))?;
            if margin <= 1e-9 {
                return Err(Error::invalid(
                    format!("corridors[{i}]"),
                    "polytope has empty interior",
                ));
            }
        }
        for i in 0..self.corridors.len() - 1 {
            let pair = [self.corridors[i].clone(), self.corridors[i + 1].clone()];
            let (_, margin) = deepest_point(&pair)?;
            if margin <= 1e-9 {
                return Err(Error::invalid(
                    format!("corridors[{i}]"),
                    format!("no feasible overlap with corridors[{}]", i + 1),
                ));
            }
        }
        self.limits.validate()?;
        self.weights.validate()?;
        if !self.corridors[0].contains(self.boundary.start.p, 1e-9) {
            return Err(Error::invalid(
                "boundary.start",
                "start position lies outside the first corridor",
            ));
        }
        if !self
            .corridors
            .last()
            .unwrap()
            .contains(self.boundary.goal.p, 1e-9)
        {
            return Err(Error::invalid(
                "boundary.goal",
                "goal position lies outside the last corridor",
            ));
        }
        for (i, o) in self.obstacles.iter().enumerate() {
            if !(o.scale > 0.0) || !o.scale.is_finite() {
                return Err(Error::invalid(
                    format!("obstacles[{i}].scale"),
                    format!("must be positive, got {}", o.scale),
                ));
            }
        }
        if !(self.collision_radius >= 0.0) {
            return Err(Error::invalid("collision_radius", "must be nonnegative"));
        }
        if self.kappa < 2 {
            return Err(Error::invalid(
                "kappa",
                format!("need at least 2 samples per segment, got {}", self.kappa),
            ));
        }
        if let Some(durations) = &self.initial_durations {
            if durations.len() != self.corridors.len() {
                return Err(Error::invalid(
                    "initial_durations",
                    format!(
                        "expected {} entries (one per corridor), got {}",
                        self.corridors.len(),
                        durations.len()
                    ),
                ));
            }
            for (i, &t) in durations.iter().enumerate() {
                if !(t > 0.0) || !t.is_finite() {
                    return Err(Error::invalid(
                        format!("initial_durations[{i}]"),
                        format!("segment duration must be positive, got {t}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Load and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)?;
    let mut scenario: Scenario = serde_json::from_str(&text)?;
    scenario.validate()?;
    Ok(scenario)
}

/// Save a scenario as pretty-printed JSON. `load(save(s)) == s` for any
/// validated scenario.
pub fn save_scenario(scenario: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(scenario)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Deepest point of the intersection of the given polytopes: approximately
/// the Chebyshev center, found by minimizing a log-sum-exp smoothing of the
/// worst constraint excess. Returns the point and its hard margin
/// (distance to the nearest constraint plane; positive means strictly
/// inside). Assumes unit normals.
pub fn deepest_point(polys: &[Polytope]) -> Result<(Vec3, f64)> {
    let halfspaces: Vec<Halfspace> = polys
        .iter()
        .flat_map(|p| p.halfspaces.iter().map(|h| h.normalized()))
        .collect();
    if halfspaces.is_empty() {
        return Err(Error::domain("deepest point of an empty halfspace set"));
    }
    // Seed: least-squares-ish point from averaging boundary projections.
    let mut x = Vec3::ZERO;
    for h in &halfspaces {
        x += h.a * h.b;
    }
    x = x / halfspaces.len() as f64;

    // Smoothed max of the excesses is convex; a few gradient-descent rounds
    // with backtracking and increasing sharpness converge reliably.
    for &beta in &[1.0, 4.0, 16.0, 64.0, 256.0] {
        x = minimize_softmax_excess(&halfspaces, x, beta);
    }
    let margin = -halfspaces
        .iter()
        .map(|h| h.excess(x))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((x, margin))
}

fn softmax_excess(halfspaces: &[Halfspace], x: Vec3, beta: f64) -> (f64, Vec3) {
    let excesses: Vec<f64> = halfspaces.iter().map(|h| h.excess(x)).collect();
    let m = excesses.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    let mut grad = Vec3::ZERO;
    for (h, &e) in halfspaces.iter().zip(&excesses) {
        let w = ((e - m) * beta).exp();
        z += w;
        grad += h.a * w;
    }
    (m + z.ln() / beta, grad / z)
}

fn minimize_softmax_excess(halfspaces: &[Halfspace], mut x: Vec3, beta: f64) -> Vec3 {
    let (mut f, mut g) = softmax_excess(halfspaces, x, beta);
    for _ in 0..200 {
        let gn = g.norm();
        if gn < 1e-12 {
            break;
        }
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand = x - g * step;
            let (fc, gc) = softmax_excess(halfspaces, cand, beta);
            if fc < f - 1e-12 * f.abs().max(1.0) {
                x = cand;
                f = fc;
                g = gc;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    x
}

/// Initial trajectory for a scenario: interior knots at the deepest points of
/// consecutive corridor overlaps, velocities along the local chord at half
/// the speed limit, zero accelerations, and durations from chord length at
/// that cruise speed (floored at 0.1 s) unless the scenario pins them.
pub fn initial_guess(scenario: &Scenario) -> Result<HermiteSpline> {
    let m = scenario.segment_count();
    let mut positions = Vec::with_capacity(m + 1);
    positions.push(scenario.boundary.start.p);
    for i in 1..m {
        let pair = [scenario.corridors[i - 1].clone(), scenario.corridors[i].clone()];
        let (x, margin) = deepest_point(&pair)?;
        if margin <= 0.0 {
            return Err(Error::Infeasible(format!(
                "corridors {} and {} have empty overlap",
                i - 1,
                i
            )));
        }
        positions.push(x);
    }
    positions.push(scenario.boundary.goal.p);

    let cruise = 0.5 * scenario.limits.v_max;
    let durations: Vec<f64> = match &scenario.initial_durations {
        Some(d) => d.clone(),
        None => (0..m)
            .map(|s| ((positions[s + 1] - positions[s]).norm() / cruise).max(0.1))
            .collect(),
    };

    let mut knots = Vec::with_capacity(m + 1);
    knots.push(scenario.boundary.start);
    for i in 1..m {
        let chord = positions[i + 1] - positions[i - 1];
        let v = chord.normalized().map_or(Vec3::ZERO, |dir| dir * cruise);
        knots.push(KnotState::new(positions[i], v, Vec3::ZERO));
    }
    knots.push(scenario.boundary.goal);
    HermiteSpline::new(knots, durations)
}

/// Axis-aligned box corridors around a guide polyline, one per polyline
/// segment, inflated by the given half-widths. Consecutive boxes must
/// overlap.
pub fn box_corridor_helper(polyline: &[Vec3], half_widths: Vec3) -> Result<Vec<Polytope>> {
    if polyline.len() < 2 {
        return Err(Error::domain(
            "corridor polyline needs at least two points",
        ));
    }
    if !(half_widths.x > 0.0 && half_widths.y > 0.0 && half_widths.z > 0.0) {
        return Err(Error::domain("corridor half-widths must be positive"));
    }
    let mut corridors = Vec::with_capacity(polyline.len() - 1);
    for pair in polyline.windows(2) {
        let lo = pair[0].component_min(pair[1]) - half_widths;
        let hi = pair[0].component_max(pair[1]) + half_widths;
        corridors.push(Polytope::axis_box(lo, hi)?);
    }
    for i in 0..corridors.len() - 1 {
        let pair = [corridors[i].clone(), corridors[i + 1].clone()];
        let (_, margin) = deepest_point(&pair)?;
        if margin <= 1e-9 {
            return Err(Error::Infeasible(format!(
                "consecutive corridor boxes {} and {} do not overlap; increase half-widths",
                i,
                i + 1
            )));
        }
    }
    Ok(corridors)
}

/// Synthetic scene builders used by the benchmark harness and tests.
pub mod synth {
    use super::*;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Randomized multi-segment scenario: a wandering corridor of axis boxes,
    /// moderate limits, and obstacles seeded near the guide path. All cost
    /// terms are active for typical initial guesses.
    pub fn random_scenario(seed: u64, segments: usize) -> Scenario {
        assert!(segments >= 1);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut polyline = vec![Vec3::new(0.0, 0.0, 2.0)];
        let mut heading: f64 = 0.0;
        for _ in 0..segments {
            heading += rng.gen_range(-0.7..0.7);
            let step = rng.gen_range(2.5..4.5);
            let last = *polyline.last().unwrap();
            polyline.push(
                last + Vec3::new(
                    heading.cos() * step,
                    heading.sin() * step,
                    rng.gen_range(-0.4..0.4),
                ),
            );
        }
        let half_widths = Vec3::new(1.6, 1.6, 1.4);
        let corridors = box_corridor_helper(&polyline, half_widths).expect("boxes overlap");

        let obstacles = (0..rng.gen_range(1..=3))
            .map(|_| {
                let along = rng.gen_range(1..polyline.len());
                let base = polyline[along];
                ObstacleTrack {
                    center: base
                        + Vec3::new(
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-1.0..1.0),
                            rng.gen_range(-0.5..0.5),
                        ),
                    scale: rng.gen_range(0.3..0.8),
                    omega: rng.gen_range(0.2..0.6),
                    phase: rng.gen_range(0.0..std::f64::consts::TAU),
                }
            })
            .collect();

        let mut scenario = Scenario {
            version: SCHEMA_VERSION,
            boundary: Boundary {
                start: KnotState::stationary(polyline[0]),
                goal: KnotState::stationary(*polyline.last().unwrap()),
            },
            corridors,
            limits: Limits {
                v_max: rng.gen_range(1.0..3.0),
                a_max: rng.gen_range(4.0..10.0),
                j_max: rng.gen_range(15.0..30.0),
            },
            weights: Weights::default(),
            obstacles,
            collision_radius: 0.1,
            kappa: 16,
            seed,
            initial_durations: None,
        };
        scenario.validate().expect("synthetic scenario is valid");
        scenario
    }

    /// Scaled-down dynamic scene: a straight 20 m corridor with five trefoil
    /// obstacles wandering around the flight path.
    pub fn dynamic_scene(seed: u64) -> Scenario {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let polyline: Vec<Vec3> = (0..=4).map(|i| Vec3::new(5.0 * i as f64, 0.0, 3.0)).collect();
        let corridors = box_corridor_helper(&polyline, Vec3::new(1.5, 4.0, 2.4)).unwrap();
        let obstacles = (0..5)
            .map(|_| ObstacleTrack {
                center: Vec3::new(
                    rng.gen_range(3.0..17.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(2.2..3.8),
                ),
                scale: rng.gen_range(0.8..1.4),
                omega: rng.gen_range(0.25..0.5),
                phase: rng.gen_range(0.0..std::f64::consts::TAU),
            })
            .collect();
        let mut scenario = Scenario {
            version: SCHEMA_VERSION,
            boundary: Boundary {
                start: KnotState::stationary(Vec3::new(0.0, 0.0, 3.0)),
                goal: KnotState::stationary(Vec3::new(20.0, 0.0, 3.0)),
            },
            corridors,
            limits: Limits {
                v_max: 2.0,
                a_max: 5.0,
                j_max: 30.0,
            },
            weights: Weights::default(),
            obstacles,
            collision_radius: 0.1,
            kappa: 24,
            seed,
            initial_durations: None,
        };
        scenario.validate().expect("dynamic scene is valid");
        scenario
    }
}
