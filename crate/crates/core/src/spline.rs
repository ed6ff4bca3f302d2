//! Quintic Hermite splines and their Bézier form.
//!
//! A trajectory is a chain of quintic segments, each pinned by position,
//! velocity, and acceleration at both knots plus a positive duration. Sharing
//! knot values across segments gives C² continuity by construction. All
//! runtime evaluation converts a segment to its six Bézier control points and
//! takes small dot products with precomputed Bernstein weight tables;
//! derivatives use the degree-reduced difference control points.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec3::Vec3;

/// Position, velocity, and acceleration at one knot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnotState {
    pub p: Vec3,
    pub v: Vec3,
    pub a: Vec3,
}

impl KnotState {
    pub const fn new(p: Vec3, v: Vec3, a: Vec3) -> Self {
        KnotState { p, v, a }
    }

    pub fn stationary(p: Vec3) -> Self {
        KnotState::new(p, Vec3::ZERO, Vec3::ZERO)
    }

    pub fn is_finite(&self) -> bool {
        self.p.is_finite() && self.v.is_finite() && self.a.is_finite()
    }
}

/// Sampled trajectory state: position and its first three time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryState {
    pub pos: Vec3,
    pub vel: Vec3,
    pub acc: Vec3,
    pub jerk: Vec3,
}

/// Piecewise quintic Hermite trajectory: M+1 knot states and M durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteSpline {
    knots: Vec<KnotState>,
    durations: Vec<f64>,
}

impl HermiteSpline {
    pub fn new(knots: Vec<KnotState>, durations: Vec<f64>) -> Result<Self> {
        if durations.is_empty() {
            return Err(Error::domain("spline needs at least one segment"));
        }
        if knots.len() != durations.len() + 1 {
            return Err(Error::domain(format!(
                "knot count {} does not match segment count {} + 1",
                knots.len(),
                durations.len()
            )));
        }
        for (s, &t) in durations.iter().enumerate() {
            if !(t > 0.0) || !t.is_finite() {
                return Err(Error::domain(format!(
                    "segment {s} duration must be positive and finite, got {t}"
                )));
            }
        }
        if let Some(i) = knots.iter().position(|k| !k.is_finite()) {
            return Err(Error::domain(format!("knot {i} has non-finite components")));
        }
        Ok(HermiteSpline { knots, durations })
    }

    pub fn segment_count(&self) -> usize {
        self.durations.len()
    }

    pub fn knots(&self) -> &[KnotState] {
        &self.knots
    }

    pub fn durations(&self) -> &[f64] {
        &self.durations
    }

    pub fn total_duration(&self) -> f64 {
        self.durations.iter().sum()
    }

    /// Start time of each segment (cumulative duration prefix).
    pub fn segment_start_times(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.durations.len());
        let mut acc = 0.0;
        for &t in &self.durations {
            out.push(acc);
            acc += t;
        }
        out
    }

    /// Map a global time to `(segment index, normalized time in [0, 1])`.
    ///
    /// Interior knot times resolve to the following segment at τ = 0; the
    /// final endpoint resolves to the last segment at τ = 1.
    pub fn locate(&self, t: f64) -> Result<(usize, f64)> {
        let total = self.total_duration();
        let slack = 1e-9 * total.max(1.0);
        if !t.is_finite() || t < -slack || t > total + slack {
            return Err(Error::domain(format!(
                "time {t} outside trajectory span [0, {total}]"
            )));
        }
        let t = t.clamp(0.0, total);
        let mut start = 0.0;
        for (s, &dur) in self.durations.iter().enumerate() {
            if t < start + dur {
                return Ok((s, (t - start) / dur));
            }
            start += dur;
        }
        Ok((self.segment_count() - 1, 1.0))
    }

    /// Bézier form of segment `s`.
    pub fn bezier_segment(&self, s: usize) -> BezierSegment {
        hermite_to_bezier(&self.knots[s], &self.knots[s + 1], self.durations[s])
            .expect("valid spline segment")
    }

    pub fn bezier_segments(&self) -> Vec<BezierSegment> {
        (0..self.segment_count())
            .map(|s| self.bezier_segment(s))
            .collect()
    }

    /// Evaluate position, velocity, acceleration, and jerk at global time `t`.
    pub fn eval_state(&self, t: f64) -> Result<TrajectoryState> {
        let (s, tau) = self.locate(t)?;
        Ok(self.bezier_segment(s).state(tau))
    }
}

/// One quintic segment in Bézier form: six control points and a duration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BezierSegment {
    pub ctrl: [Vec3; 6],
    pub duration: f64,
}

impl BezierSegment {
    pub fn new(ctrl: [Vec3; 6], duration: f64) -> Result<Self> {
        if !(duration > 0.0) || !duration.is_finite() {
            return Err(Error::domain(format!(
                "segment duration must be positive, got {duration}"
            )));
        }
        Ok(BezierSegment { ctrl, duration })
    }

    /// Control points of the velocity curve (degree 4), factors 5/T folded in.
    pub fn velocity_control_points(&self) -> [Vec3; 5] {
        let c = &self.ctrl;
        let k = 5.0 / self.duration;
        [
            (c[1] - c[0]) * k,
            (c[2] - c[1]) * k,
            (c[3] - c[2]) * k,
            (c[4] - c[3]) * k,
            (c[5] - c[4]) * k,
        ]
    }

    /// Control points of the acceleration curve (degree 3), 20/T² folded in.
    pub fn acceleration_control_points(&self) -> [Vec3; 4] {
        let c = &self.ctrl;
        let k = 20.0 / (self.duration * self.duration);
        [
            (c[2] - c[1] * 2.0 + c[0]) * k,
            (c[3] - c[2] * 2.0 + c[1]) * k,
            (c[4] - c[3] * 2.0 + c[2]) * k,
            (c[5] - c[4] * 2.0 + c[3]) * k,
        ]
    }

    /// Control points of the jerk curve (degree 2), 60/T³ folded in.
    pub fn jerk_control_points(&self) -> [Vec3; 3] {
        let c = &self.ctrl;
        let k = 60.0 / (self.duration * self.duration * self.duration);
        [
            (c[3] - c[2] * 3.0 + c[1] * 3.0 - c[0]) * k,
            (c[4] - c[3] * 3.0 + c[2] * 3.0 - c[1]) * k,
            (c[5] - c[4] * 3.0 + c[3] * 3.0 - c[2]) * k,
        ]
    }

    /// Control points of the `order`-th time derivative (orders 1 to 3).
    pub fn derivative_control_points(&self, order: usize) -> Result<Vec<Vec3>> {
        match order {
            1 => Ok(self.velocity_control_points().to_vec()),
            2 => Ok(self.acceleration_control_points().to_vec()),
            3 => Ok(self.jerk_control_points().to_vec()),
            _ => Err(Error::domain(format!(
                "derivative order must be 1..=3, got {order}"
            ))),
        }
    }

    /// Position at normalized time `u` in [0, 1].
    pub fn position(&self, u: f64) -> Vec3 {
        weighted_sum(&bernstein5(u), &self.ctrl)
    }

    /// Full state at normalized time `u` in [0, 1].
    pub fn state(&self, u: f64) -> TrajectoryState {
        TrajectoryState {
            pos: weighted_sum(&bernstein5(u), &self.ctrl),
            vel: weighted_sum(&bernstein4(u), &self.velocity_control_points()),
            acc: weighted_sum(&bernstein3(u), &self.acceleration_control_points()),
            jerk: weighted_sum(&bernstein2(u), &self.jerk_control_points()),
        }
    }

    /// State at the segment start (exact, no basis evaluation).
    pub fn start_state(&self) -> TrajectoryState {
        self.state(0.0)
    }

    /// State at the segment end.
    pub fn end_state(&self) -> TrajectoryState {
        self.state(1.0)
    }
}

fn weighted_sum(weights: &[f64], points: &[Vec3]) -> Vec3 {
    let mut out = Vec3::ZERO;
    for (w, p) in weights.iter().zip(points) {
        out += *p * *w;
    }
    out
}

pub(crate) fn bernstein5(u: f64) -> [f64; 6] {
    let v = 1.0 - u;
    let u2 = u * u;
    let v2 = v * v;
    let u3 = u2 * u;
    let v3 = v2 * v;
    [
        v3 * v2,
        5.0 * u * v2 * v2,
        10.0 * u2 * v3,
        10.0 * u3 * v2,
        5.0 * u2 * u2 * v,
        u3 * u2,
    ]
}

pub(crate) fn bernstein4(u: f64) -> [f64; 5] {
    let v = 1.0 - u;
    let u2 = u * u;
    let v2 = v * v;
    [
        v2 * v2,
        4.0 * u * v2 * v,
        6.0 * u2 * v2,
        4.0 * u2 * u * v,
        u2 * u2,
    ]
}

pub(crate) fn bernstein3(u: f64) -> [f64; 4] {
    let v = 1.0 - u;
    [v * v * v, 3.0 * u * v * v, 3.0 * u * u * v, u * u * u]
}

pub(crate) fn bernstein2(u: f64) -> [f64; 3] {
    let v = 1.0 - u;
    [v * v, 2.0 * u * v, u * u]
}

/// Bernstein basis weights `binom(n,i) u^i (1-u)^(n-i)` for degree `n` in 2..=5.
pub fn bernstein_basis(degree: usize, u: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::domain(format!(
            "basis parameter must lie in [0, 1], got {u}"
        )));
    }
    match degree {
        2 => Ok(bernstein2(u).to_vec()),
        3 => Ok(bernstein3(u).to_vec()),
        4 => Ok(bernstein4(u).to_vec()),
        5 => Ok(bernstein5(u).to_vec()),
        _ => Err(Error::domain(format!(
            "basis degree must be 2..=5, got {degree}"
        ))),
    }
}

/// Convert Hermite endpoint states and a duration to Bézier control points.
///
/// The resulting curve interpolates both endpoint states up to the second
/// derivative.
pub fn hermite_to_bezier(start: &KnotState, end: &KnotState, duration: f64) -> Result<BezierSegment> {
    if !(duration > 0.0) || !duration.is_finite() {
        return Err(Error::domain(format!(
            "segment duration must be positive, got {duration}"
        )));
    }
    let t = duration;
    let t2 = t * t;
    let ctrl = [
        start.p,
        start.p + start.v * (t / 5.0),
        start.p + start.v * (2.0 * t / 5.0) + start.a * (t2 / 20.0),
        end.p - end.v * (2.0 * t / 5.0) + end.a * (t2 / 20.0),
        end.p - end.v * (t / 5.0),
        end.p,
    ];
    Ok(BezierSegment { ctrl, duration })
}

/// Mismatch of position/velocity/acceleration across one interior junction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnotMismatch {
    pub position: f64,
    pub velocity: f64,
    pub acceleration: f64,
}

/// Left-limit vs right-limit agreement at every interior knot.
#[derive(Debug, Clone, Default)]
pub struct ContinuityReport {
    pub per_knot: Vec<KnotMismatch>,
}

impl ContinuityReport {
    pub fn max_position(&self) -> f64 {
        self.per_knot.iter().map(|m| m.position).fold(0.0, f64::max)
    }

    pub fn max_velocity(&self) -> f64 {
        self.per_knot.iter().map(|m| m.velocity).fold(0.0, f64::max)
    }

    pub fn max_acceleration(&self) -> f64 {
        self.per_knot
            .iter()
            .map(|m| m.acceleration)
            .fold(0.0, f64::max)
    }
}

/// Continuity of a spline through its Bézier form. Empty for M = 1.
pub fn continuity_report(spline: &HermiteSpline) -> ContinuityReport {
    continuity_report_segments(&spline.bezier_segments())
}

/// Continuity across consecutive Bézier segments (left end vs right start).
pub fn continuity_report_segments(segments: &[BezierSegment]) -> ContinuityReport {
    let mut per_knot = Vec::new();
    for pair in segments.windows(2) {
        let left = pair[0].end_state();
        let right = pair[1].start_state();
        per_knot.push(KnotMismatch {
            position: (left.pos - right.pos).norm(),
            velocity: (left.vel - right.vel).norm(),
            acceleration: (left.acc - right.acc).norm(),
        });
    }
    ContinuityReport { per_knot }
}

/// Precomputed Bernstein weights and trapezoid quadrature weights on a
/// uniform normalized-time grid. Built once per sample count and shared
/// across segments and solver iterations.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub taus: Vec<f64>,
    pub w5: Vec<[f64; 6]>,
    pub w4: Vec<[f64; 5]>,
    pub w3: Vec<[f64; 4]>,
    pub w2: Vec<[f64; 3]>,
    /// Trapezoid weights in τ; they sum to 1.
    pub quad: Vec<f64>,
}

impl BasisTable {
    /// Uniform grid with `kappa` samples (τ = 0 and τ = 1 included).
    pub fn uniform(kappa: usize) -> Result<Self> {
        if kappa < 2 {
            return Err(Error::Config(format!(
                "quadrature needs at least 2 samples per segment, got {kappa}"
            )));
        }
        let h = 1.0 / (kappa - 1) as f64;
        let mut table = BasisTable {
            taus: Vec::with_capacity(kappa),
            w5: Vec::with_capacity(kappa),
            w4: Vec::with_capacity(kappa),
            w3: Vec::with_capacity(kappa),
            w2: Vec::with_capacity(kappa),
            quad: Vec::with_capacity(kappa),
        };
        for j in 0..kappa {
            let tau = if j + 1 == kappa { 1.0 } else { j as f64 * h };
            table.taus.push(tau);
            table.w5.push(bernstein5(tau));
            table.w4.push(bernstein4(tau));
            table.w3.push(bernstein3(tau));
            table.w2.push(bernstein2(tau));
            let edge = j == 0 || j + 1 == kappa;
            table.quad.push(if edge { 0.5 * h } else { h });
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.taus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taus.is_empty()
    }
}
