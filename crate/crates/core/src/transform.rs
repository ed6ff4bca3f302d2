//! Maps between the unconstrained decision vector and the spline.
//!
//! Durations enter the decision vector as log-durations (`T = exp(σ)`), which
//! keeps positivity without constraints. Interior knot derivatives are stored
//! scaled by the averaged local time of the knot (`v̂ = T̄ v`, `â = T̄² a`),
//! which removes the explicit 1/T factors from the gradients and balances
//! sensitivity between short and long segments. Both maps are smooth
//! bijections, so the optimum is unchanged; only chain-rule factors appear in
//! the gradient.
//!
//! Decision vector layout for M segments:
//! `[p_1, v̂_1, â_1, ..., p_{M-1}, v̂_{M-1}, â_{M-1}, σ_0, ..., σ_{M-1}]`
//! (length `9(M-1) + M`).

use crate::error::{Error, Result};
use crate::spline::{HermiteSpline, KnotState};
use crate::vec3::Vec3;

/// Whether interior knot derivatives are stored scaled by averaged local time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeScaling {
    Scaled,
    Unscaled,
}

/// Decision-vector length for a spline with `segments` segments.
pub fn decision_dim(segments: usize) -> usize {
    9 * (segments - 1) + segments
}

/// Segment count implied by a decision-vector length, if consistent.
pub fn segment_count_for_dim(dim: usize) -> Result<usize> {
    if dim >= 1 && (dim + 9) % 10 == 0 {
        Ok((dim + 9) / 10)
    } else {
        Err(Error::domain(format!(
            "decision vector length {dim} does not match 9(M-1)+M for any M >= 1"
        )))
    }
}

/// Log-duration to duration.
pub fn duration_forward(sigma: f64) -> f64 {
    sigma.exp()
}

/// Duration to log-duration.
pub fn duration_backward(duration: f64) -> Result<f64> {
    if duration > 0.0 && duration.is_finite() {
        Ok(duration.ln())
    } else {
        Err(Error::domain(format!(
            "duration must be positive to invert the exp map, got {duration}"
        )))
    }
}

/// Averaged local time per knot: the boundary knots take the adjacent
/// segment's duration, interior knots the mean of the two adjacent durations.
pub fn averaged_local_time(durations: &[f64]) -> Result<Vec<f64>> {
    if durations.is_empty() {
        return Err(Error::domain("need at least one duration"));
    }
    if let Some(&bad) = durations.iter().find(|&&t| !(t > 0.0) || !t.is_finite()) {
        return Err(Error::domain(format!(
            "averaged local time needs positive durations, got {bad}"
        )));
    }
    let m = durations.len();
    let mut out = Vec::with_capacity(m + 1);
    out.push(durations[0]);
    for i in 1..m {
        out.push(0.5 * (durations[i - 1] + durations[i]));
    }
    out.push(durations[m - 1]);
    Ok(out)
}

/// Pack a spline into the decision vector. Boundary knots are not encoded;
/// they are fixed problem data supplied again at unpack time.
pub fn pack(spline: &HermiteSpline, scaling: DerivativeScaling) -> Vec<f64> {
    let m = spline.segment_count();
    let avg = averaged_local_time(spline.durations()).expect("valid spline durations");
    let mut z = Vec::with_capacity(decision_dim(m));
    for i in 1..m {
        let k = &spline.knots()[i];
        let (v, a) = match scaling {
            DerivativeScaling::Scaled => (k.v * avg[i], k.a * (avg[i] * avg[i])),
            DerivativeScaling::Unscaled => (k.v, k.a),
        };
        push_vec3(&mut z, k.p);
        push_vec3(&mut z, v);
        push_vec3(&mut z, a);
    }
    for &t in spline.durations() {
        z.push(t.ln());
    }
    z
}

/// Rebuild a spline from a decision vector and the fixed boundary states.
pub fn unpack(
    z: &[f64],
    start: &KnotState,
    goal: &KnotState,
    scaling: DerivativeScaling,
) -> Result<HermiteSpline> {
    let m = segment_count_for_dim(z.len())?;
    if let Some(&bad) = z.iter().find(|v| !v.is_finite()) {
        return Err(Error::domain(format!(
            "decision vector has non-finite entry {bad}"
        )));
    }
    let sigmas = &z[9 * (m - 1)..];
    let durations: Vec<f64> = sigmas.iter().map(|&s| s.exp()).collect();
    if durations.iter().any(|t| !t.is_finite() || *t <= 0.0) {
        return Err(Error::Solver(
            "duration exp map overflowed; solver diverged".into(),
        ));
    }
    let avg = averaged_local_time(&durations)?;
    let mut knots = Vec::with_capacity(m + 1);
    knots.push(*start);
    for i in 1..m {
        let base = 9 * (i - 1);
        let p = read_vec3(z, base);
        let vhat = read_vec3(z, base + 3);
        let ahat = read_vec3(z, base + 6);
        let (v, a) = match scaling {
            DerivativeScaling::Scaled => (vhat / avg[i], ahat / (avg[i] * avg[i])),
            DerivativeScaling::Unscaled => (vhat, ahat),
        };
        knots.push(KnotState::new(p, v, a));
    }
    knots.push(*goal);
    HermiteSpline::new(knots, durations)
}

fn push_vec3(z: &mut Vec<f64>, v: Vec3) {
    z.push(v.x);
    z.push(v.y);
    z.push(v.z);
}

fn read_vec3(z: &[f64], base: usize) -> Vec3 {
    Vec3::new(z[base], z[base + 1], z[base + 2])
}

/// Quantities needed to pull spline-space gradients back through both maps:
/// durations, averaged local times, and the scaled derivative values.
#[derive(Debug, Clone)]
pub struct ScalingContext {
    pub durations: Vec<f64>,
    pub avg_times: Vec<f64>,
    scaled_vel: Vec<Vec3>,
    scaled_acc: Vec<Vec3>,
}

impl ScalingContext {
    pub fn new(spline: &HermiteSpline) -> Self {
        let durations = spline.durations().to_vec();
        let avg_times = averaged_local_time(&durations).expect("valid spline durations");
        let scaled_vel = spline
            .knots()
            .iter()
            .enumerate()
            .map(|(i, k)| k.v * avg_times[i])
            .collect();
        let scaled_acc = spline
            .knots()
            .iter()
            .enumerate()
            .map(|(i, k)| k.a * (avg_times[i] * avg_times[i]))
            .collect();
        ScalingContext {
            durations,
            avg_times,
            scaled_vel,
            scaled_acc,
        }
    }

    pub fn segment_count(&self) -> usize {
        self.durations.len()
    }
}

/// Gradient of an objective with respect to the raw spline variables:
/// one entry per knot (boundary entries are ignored) and one per duration.
#[derive(Debug, Clone)]
pub struct RawGradient {
    pub knots: Vec<KnotGradient>,
    pub durations: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct KnotGradient {
    pub p: Vec3,
    pub v: Vec3,
    pub a: Vec3,
}

impl RawGradient {
    pub fn zeros(segments: usize) -> Self {
        RawGradient {
            knots: vec![
                KnotGradient {
                    p: Vec3::ZERO,
                    v: Vec3::ZERO,
                    a: Vec3::ZERO,
                };
                segments + 1
            ],
            durations: vec![0.0; segments],
        }
    }
}

/// Pull a raw spline gradient back to the decision vector.
///
/// Applies, in order: the 1/T̄ factors on scaled derivatives, the dependence
/// of interior knot derivatives on the adjacent durations through T̄, and the
/// exp-map factor T on every duration entry.
pub fn pullback_gradient(
    raw: &RawGradient,
    ctx: &ScalingContext,
    scaling: DerivativeScaling,
) -> Vec<f64> {
    let m = ctx.segment_count();
    assert_eq!(raw.knots.len(), m + 1, "knot gradient count mismatch");
    assert_eq!(raw.durations.len(), m, "duration gradient count mismatch");
    let mut z = Vec::with_capacity(decision_dim(m));
    for i in 1..m {
        let g = &raw.knots[i];
        let (gv, ga) = match scaling {
            DerivativeScaling::Scaled => {
                let tb = ctx.avg_times[i];
                (g.v / tb, g.a / (tb * tb))
            }
            DerivativeScaling::Unscaled => (g.v, g.a),
        };
        push_vec3(&mut z, g.p);
        push_vec3(&mut z, gv);
        push_vec3(&mut z, ga);
    }
    for s in 0..m {
        let mut dt = raw.durations[s];
        if scaling == DerivativeScaling::Scaled {
            // v_i = v̂_i / T̄_i and a_i = â_i / T̄_i² depend on T_s through the
            // averaged local time of the adjacent interior knots.
            for i in [s, s + 1] {
                if i == 0 || i >= m {
                    continue;
                }
                let tb = ctx.avg_times[i];
                let dv_dtbar = -ctx.scaled_vel[i] / (tb * tb);
                let da_dtbar = ctx.scaled_acc[i] * (-2.0 / (tb * tb * tb));
                let dtbar_dts = 0.5;
                dt += (raw.knots[i].v.dot(dv_dtbar) + raw.knots[i].a.dot(da_dtbar)) * dtbar_dts;
            }
        }
        z.push(dt * ctx.durations[s]);
    }
    z
}
