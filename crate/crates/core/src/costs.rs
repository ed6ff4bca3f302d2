//! Objective terms: closed-form jerk smoothness, time cost, and sampled soft
//! penalties (dynamic limits, corridor membership, dynamic obstacles).
//!
//! Sampled penalties use a smooth one-sided hinge and trapezoidal quadrature
//! on the shared per-segment Bernstein table. Every term reports its value,
//! its gradient with respect to the six Bézier control points, and its
//! duration gradient with the control points held fixed; the control points'
//! own dependence on the duration is added later during gradient assembly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::ObstacleTrack;
use crate::spline::{BasisTable, BezierSegment, TrajectoryState};
use crate::vec3::Vec3;

/// Halfspace `a·x <= b`. Corridor loaders normalize `a` to unit length so
/// that offsets and margins are in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Halfspace {
    pub a: Vec3,
    pub b: f64,
}

impl Halfspace {
    pub fn new(a: Vec3, b: f64) -> Result<Self> {
        if a.norm() <= 1e-12 || !a.is_finite() || !b.is_finite() {
            return Err(Error::domain("halfspace normal must be nonzero and finite"));
        }
        Ok(Halfspace { a, b })
    }

    /// Same halfspace with `|a| = 1`.
    pub fn normalized(&self) -> Halfspace {
        let n = self.a.norm();
        Halfspace {
            a: self.a / n,
            b: self.b / n,
        }
    }

    /// Signed constraint excess `a·x - b` (positive outside).
    pub fn excess(&self, x: Vec3) -> f64 {
        self.a.dot(x) - self.b
    }
}

/// Convex region given by the intersection of halfspaces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polytope {
    pub halfspaces: Vec<Halfspace>,
}

impl Polytope {
    pub fn new(halfspaces: Vec<Halfspace>) -> Result<Self> {
        if halfspaces.is_empty() {
            return Err(Error::domain("polytope needs at least one halfspace"));
        }
        Ok(Polytope { halfspaces })
    }

    /// Axis-aligned box `[lo, hi]` as six halfspaces with unit normals.
    pub fn axis_box(lo: Vec3, hi: Vec3) -> Result<Self> {
        if !(lo.x < hi.x && lo.y < hi.y && lo.z < hi.z) {
            return Err(Error::domain("box bounds must satisfy lo < hi per axis"));
        }
        Polytope::new(vec![
            Halfspace::new(Vec3::new(1.0, 0.0, 0.0), hi.x)?,
            Halfspace::new(Vec3::new(-1.0, 0.0, 0.0), -lo.x)?,
            Halfspace::new(Vec3::new(0.0, 1.0, 0.0), hi.y)?,
            Halfspace::new(Vec3::new(0.0, -1.0, 0.0), -lo.y)?,
            Halfspace::new(Vec3::new(0.0, 0.0, 1.0), hi.z)?,
            Halfspace::new(Vec3::new(0.0, 0.0, -1.0), -lo.z)?,
        ])
    }

    pub fn contains(&self, x: Vec3, tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.excess(x) <= tol)
    }

    /// Worst constraint excess (negative strictly inside). Assumes unit
    /// normals for a metric interpretation.
    pub fn max_excess(&self, x: Vec3) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| h.excess(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Dynamic bounds on velocity, acceleration, and jerk magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Limits {
    pub v_max: f64,
    pub a_max: f64,
    pub j_max: f64,
}

impl Limits {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("v_max", self.v_max), ("a_max", self.a_max), ("j_max", self.j_max)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(
                    format!("limits.{name}"),
                    format!("must be positive and finite, got {v}"),
                ));
            }
        }
        Ok(())
    }
}

/// Objective weights, hinge width, and penalty margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub w_time: f64,
    pub w_smooth: f64,
    pub w_sfc: f64,
    pub w_vel: f64,
    pub w_acc: f64,
    pub w_jerk: f64,
    pub w_dyn: f64,
    /// Smooth-hinge blend width.
    pub mu: f64,
    /// Corridor shrink margin (m).
    pub c_sfc: f64,
    /// Dynamic-obstacle soft barrier radius (m).
    pub c_dyn: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            w_time: 5e2,
            w_smooth: 1e-1,
            w_sfc: 1e3,
            w_vel: 1e3,
            w_acc: 1e3,
            w_jerk: 1e3,
            w_dyn: 1e1,
            mu: 1e-2,
            c_sfc: 0.2,
            c_dyn: 3.0,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w_time", self.w_time),
            ("w_smooth", self.w_smooth),
            ("w_sfc", self.w_sfc),
            ("w_vel", self.w_vel),
            ("w_acc", self.w_acc),
            ("w_jerk", self.w_jerk),
            ("w_dyn", self.w_dyn),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(
                    format!("weights.{name}"),
                    format!("must be nonnegative and finite, got {v}"),
                ));
            }
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::invalid("weights.mu", "hinge width must be positive"));
        }
        if !(self.c_sfc >= 0.0) || !self.c_sfc.is_finite() {
            return Err(Error::invalid("weights.c_sfc", "margin must be nonnegative"));
        }
        if !(self.c_dyn > 0.0) || !self.c_dyn.is_finite() {
            return Err(Error::invalid("weights.c_dyn", "barrier radius must be positive"));
        }
        Ok(())
    }
}

/// Per-sample cost value and its partials with respect to the sampled state.
#[derive(Debug, Clone, Copy, Default)]
pub struct SampleJacobians {
    pub value: f64,
    pub lx: Vec3,
    pub lv: Vec3,
    pub la: Vec3,
    pub lj: Vec3,
}

impl SampleJacobians {
    pub const ZERO: SampleJacobians = SampleJacobians {
        value: 0.0,
        lx: Vec3::ZERO,
        lv: Vec3::ZERO,
        la: Vec3::ZERO,
        lj: Vec3::ZERO,
    };

    fn accumulate(&mut self, other: SampleJacobians) {
        self.value += other.value;
        self.lx += other.lx;
        self.lv += other.lv;
        self.la += other.la;
        self.lj += other.lj;
    }
}

/// One cost term evaluated on one segment: value, control-point gradient, and
/// the duration gradient with control points held fixed.
#[derive(Debug, Clone, Copy)]
pub struct SegmentCostResult {
    pub value: f64,
    pub grad_c: [Vec3; 6],
    /// ∂J/∂T holding the control points fixed. The coefficient path
    /// `g_c · ∂c/∂T` is added during gradient assembly.
    pub grad_duration: f64,
}

impl SegmentCostResult {
    pub const ZERO: SegmentCostResult = SegmentCostResult {
        value: 0.0,
        grad_c: [Vec3::ZERO; 6],
        grad_duration: 0.0,
    };

    pub fn scaled(mut self, w: f64) -> SegmentCostResult {
        self.value *= w;
        self.grad_duration *= w;
        for g in &mut self.grad_c {
            *g *= w;
        }
        self
    }

    pub fn accumulate(&mut self, other: &SegmentCostResult) {
        self.value += other.value;
        self.grad_duration += other.grad_duration;
        for (g, o) in self.grad_c.iter_mut().zip(&other.grad_c) {
            *g += *o;
        }
    }
}

/// One-sided C¹ hinge: zero for `x <= 0`, quadratic blend on `(0, mu]`,
/// linear `x - mu/2` beyond. Returns `(value, derivative)`.
pub fn smooth_hinge(x: f64, mu: f64) -> Result<(f64, f64)> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::domain(format!("hinge width must be positive, got {mu}")));
    }
    Ok(hinge_unchecked(x, mu))
}

#[inline]
pub(crate) fn hinge_unchecked(x: f64, mu: f64) -> (f64, f64) {
    if x <= 0.0 {
        (0.0, 0.0)
    } else if x <= mu {
        (x * x / (2.0 * mu), x / mu)
    } else {
        (x - 0.5 * mu, 1.0)
    }
}

/// Gram matrix of the degree-2 Bernstein basis; the closed-form kernel of the
/// integrated squared-jerk cost.
pub const JERK_GRAM: [[f64; 3]; 3] = [
    [1.0 / 5.0, 1.0 / 10.0, 1.0 / 30.0],
    [1.0 / 10.0, 2.0 / 15.0, 1.0 / 10.0],
    [1.0 / 30.0, 1.0 / 10.0, 1.0 / 5.0],
];

/// Eigenvalues of [`JERK_GRAM`], ascending.
pub const JERK_GRAM_EIGENVALUES: [f64; 3] = [1.0 / 30.0, 1.0 / 6.0, 1.0 / 3.0];

/// Default diagonal weights of the smoothness surrogate: diag of the Gram.
pub const SURROGATE_WEIGHTS: [f64; 3] = [1.0 / 5.0, 2.0 / 15.0, 1.0 / 5.0];

/// Coefficient of control point `c_{m+k}` in the third forward difference
/// `Δ_m = c_{m+3} - 3 c_{m+2} + 3 c_{m+1} - c_m`.
const THIRD_DIFF_STENCIL: [f64; 4] = [-1.0, 3.0, -3.0, 1.0];

fn third_differences(c: &[Vec3; 6]) -> [Vec3; 3] {
    [
        c[3] - c[2] * 3.0 + c[1] * 3.0 - c[0],
        c[4] - c[3] * 3.0 + c[2] * 3.0 - c[1],
        c[5] - c[4] * 3.0 + c[3] * 3.0 - c[2],
    ]
}

fn jerk_cost_from_kernel(seg: &BezierSegment, kernel: impl Fn(&[Vec3; 3], usize) -> Vec3) -> SegmentCostResult {
    let t = seg.duration;
    let cs = 3600.0 * t.powi(-5);
    let delta = third_differences(&seg.ctrl);
    // kernel(delta, m) = (QΔ)_m for the active quadratic form.
    let q_delta = [kernel(&delta, 0), kernel(&delta, 1), kernel(&delta, 2)];
    let value = cs * (delta[0].dot(q_delta[0]) + delta[1].dot(q_delta[1]) + delta[2].dot(q_delta[2]));
    let mut grad_c = [Vec3::ZERO; 6];
    for (m, qd) in q_delta.iter().enumerate() {
        for (k, &alpha) in THIRD_DIFF_STENCIL.iter().enumerate() {
            grad_c[m + k] += *qd * (2.0 * cs * alpha);
        }
    }
    SegmentCostResult {
        value,
        grad_c,
        grad_duration: -5.0 * value / t,
    }
}

/// Exact integrated squared jerk of a segment, via the Bernstein Gram matrix.
///
/// `grad_duration` is the explicit part `-5 J / T`; see [`SegmentCostResult`].
pub fn jerk_closed_form(seg: &BezierSegment) -> SegmentCostResult {
    jerk_cost_from_kernel(seg, |delta, m| {
        delta[0] * JERK_GRAM[m][0] + delta[1] * JERK_GRAM[m][1] + delta[2] * JERK_GRAM[m][2]
    })
}

/// Diagonally weighted smoothness surrogate; sandwiched between the exact
/// cost scaled by the extreme Gram eigenvalues when `w` is a probability-like
/// weighting of the diagonal.
pub fn jerk_surrogate(seg: &BezierSegment, w: [f64; 3]) -> SegmentCostResult {
    jerk_cost_from_kernel(seg, |delta, m| delta[m] * w[m])
}

/// Total duration and its (unweighted) per-duration gradient.
pub fn time_cost(durations: &[f64]) -> (f64, Vec<f64>) {
    (durations.iter().sum(), vec![1.0; durations.len()])
}

/// Hinge on a squared-norm bound: `phi_mu(|q|^2 - q_max^2)`.
/// Returns the value and the partial with respect to `q`.
pub fn norm_limit_penalty(q: Vec3, q_max: f64, mu: f64) -> (f64, Vec3) {
    let (value, slope) = hinge_unchecked(q.norm_squared() - q_max * q_max, mu);
    (value, q * (2.0 * slope))
}

/// Combined velocity/acceleration/jerk limit penalty at one sampled state.
pub fn limit_sample_cost(state: &TrajectoryState, limits: &Limits, mu: f64) -> SampleJacobians {
    let (fv, lv) = norm_limit_penalty(state.vel, limits.v_max, mu);
    let (fa, la) = norm_limit_penalty(state.acc, limits.a_max, mu);
    let (fj, lj) = norm_limit_penalty(state.jerk, limits.j_max, mu);
    SampleJacobians {
        value: fv + fa + fj,
        lx: Vec3::ZERO,
        lv,
        la,
        lj,
    }
}

/// Corridor-exit penalty at one sampled position: a hinge on
/// `a·x - b + c_sfc` per halfspace.
pub fn sfc_sample_cost(x: Vec3, poly: &Polytope, c_sfc: f64, mu: f64) -> SampleJacobians {
    let mut out = SampleJacobians::ZERO;
    for h in &poly.halfspaces {
        let (value, slope) = hinge_unchecked(h.excess(x) + c_sfc, mu);
        out.value += value;
        out.lx += h.a * slope;
    }
    out
}

/// Dynamic-obstacle barrier against a set of known obstacle positions:
/// `(c_dyn^2 - |x - k|^2)_+^3` summed over obstacles.
pub fn dyn_obstacle_penalty(
    x: Vec3,
    obstacle_positions: &[Vec3],
    c_dyn: f64,
) -> SampleJacobians {
    let mut out = SampleJacobians::ZERO;
    let c2 = c_dyn * c_dyn;
    for &k in obstacle_positions {
        let d = x - k;
        let gap = c2 - d.norm_squared();
        if gap > 0.0 {
            out.value += gap * gap * gap;
            out.lx += d * (-6.0 * gap * gap);
        }
    }
    out
}

/// Dynamic-obstacle barrier with obstacle positions sampled from their
/// tracks at global time `t`.
pub fn dyn_obstacle_sample_cost(
    x: Vec3,
    t: f64,
    tracks: &[ObstacleTrack],
    c_dyn: f64,
) -> SampleJacobians {
    let mut out = SampleJacobians::ZERO;
    let c2 = c_dyn * c_dyn;
    for track in tracks {
        let d = x - track.position(t);
        let gap = c2 - d.norm_squared();
        if gap > 0.0 {
            out.value += gap * gap * gap;
            out.lx += d * (-6.0 * gap * gap);
        }
    }
    out
}

/// Trapezoidal accumulation of a per-sample cost over one segment.
///
/// The evaluator receives the sample index, the global sample time, and the
/// sampled state. The result folds the quadrature weights into both the value
/// and the control-point gradient, and its `grad_duration` carries the
/// quadrature Jacobian (`value/T`) plus the state-scaling terms from the
/// physical derivatives' dependence on the duration.
pub fn accumulate_sampled(
    seg: &BezierSegment,
    segment_start_time: f64,
    table: &BasisTable,
    mut sample_cost: impl FnMut(usize, f64, &TrajectoryState) -> SampleJacobians,
) -> SegmentCostResult {
    let t = seg.duration;
    let vel_cp = seg.velocity_control_points();
    let acc_cp = seg.acceleration_control_points();
    let jerk_cp = seg.jerk_control_points();
    let kv = 5.0 / t;
    let ka = 20.0 / (t * t);
    let kj = 60.0 / (t * t * t);

    let mut value = 0.0;
    let mut grad_c = [Vec3::ZERO; 6];
    let mut state_duration_term = 0.0;

    for (j, &tau) in table.taus.iter().enumerate() {
        let w5 = &table.w5[j];
        let w4 = &table.w4[j];
        let w3 = &table.w3[j];
        let w2 = &table.w2[j];
        let state = TrajectoryState {
            pos: dot6(w5, &seg.ctrl),
            vel: dot5(w4, &vel_cp),
            acc: dot4(w3, &acc_cp),
            jerk: dot3(w2, &jerk_cp),
        };
        let l = sample_cost(j, segment_start_time + tau * t, &state);
        let q = table.quad[j];
        let wq = q * t;
        value += wq * l.value;
        state_duration_term += q
            * (-l.lv.dot(state.vel) - 2.0 * l.la.dot(state.acc) - 3.0 * l.lj.dot(state.jerk));
        for k in 0..6 {
            let bv = get(w4, k as isize - 1) - get(w4, k as isize);
            let ba = get(w3, k as isize - 2) - 2.0 * get(w3, k as isize - 1) + get(w3, k as isize);
            let bj = get(w2, k as isize - 3) - 3.0 * get(w2, k as isize - 2)
                + 3.0 * get(w2, k as isize - 1)
                - get(w2, k as isize);
            grad_c[k] +=
                (l.lx * w5[k] + l.lv * (kv * bv) + l.la * (ka * ba) + l.lj * (kj * bj)) * wq;
        }
    }

    SegmentCostResult {
        value,
        grad_c,
        grad_duration: value / t + state_duration_term,
    }
}

#[inline]
fn get(w: &[f64], i: isize) -> f64 {
    if i < 0 || i as usize >= w.len() {
        0.0
    } else {
        w[i as usize]
    }
}

fn dot6(w: &[f64; 6], p: &[Vec3; 6]) -> Vec3 {
    let mut out = Vec3::ZERO;
    for i in 0..6 {
        out += p[i] * w[i];
    }
    out
}

fn dot5(w: &[f64; 5], p: &[Vec3; 5]) -> Vec3 {
    let mut out = Vec3::ZERO;
    for i in 0..5 {
        out += p[i] * w[i];
    }
    out
}

fn dot4(w: &[f64; 4], p: &[Vec3; 4]) -> Vec3 {
    let mut out = Vec3::ZERO;
    for i in 0..4 {
        out += p[i] * w[i];
    }
    out
}

fn dot3(w: &[f64; 3], p: &[Vec3; 3]) -> Vec3 {
    let mut out = Vec3::ZERO;
    for i in 0..3 {
        out += p[i] * w[i];
    }
    out
}

/// Sum a set of per-sample costs. Used by the objective to evaluate several
/// penalty families in one sampling pass while keeping their values apart.
pub fn combine_jacobians(parts: &[SampleJacobians]) -> SampleJacobians {
    let mut out = SampleJacobians::ZERO;
    for p in parts {
        out.accumulate(*p);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spline::{hermite_to_bezier, KnotState};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn cubic_fixture() -> BezierSegment {
        let start = KnotState::stationary(Vec3::ZERO);
        let end = KnotState::new(
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(3.0, 0.0, 0.0),
            Vec3::new(6.0, 0.0, 0.0),
        );
        hermite_to_bezier(&start, &end, 1.0).unwrap()
    }

    fn random_segment(rng: &mut StdRng) -> BezierSegment {
        let mut v = || {
            Vec3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            )
        };
        let start = KnotState::new(v(), v(), v());
        let end = KnotState::new(v(), v(), v());
        hermite_to_bezier(&start, &end, rng.gen_range(0.4..2.5)).unwrap()
    }

    #[test]
    fn hinge_branches() {
        assert_eq!(smooth_hinge(-1.0, 0.01).unwrap(), (0.0, 0.0));
        let (v, d) = smooth_hinge(0.01, 0.01).unwrap();
        assert_relative_eq!(v, 0.005);
        assert_relative_eq!(d, 1.0);
        let (v, d) = smooth_hinge(1.0, 0.01).unwrap();
        assert_relative_eq!(v, 0.995);
        assert_relative_eq!(d, 1.0);
        assert!(smooth_hinge(1.0, 0.0).is_err());
        assert!(smooth_hinge(1.0, -1.0).is_err());
    }

    #[test]
    fn hinge_is_c1_at_breakpoints() {
        let mu = 0.01;
        let eps = 1e-9;
        for x0 in [0.0, mu] {
            let (vm, dm) = smooth_hinge(x0 - eps, mu).unwrap();
            let (vp, dp) = smooth_hinge(x0 + eps, mu).unwrap();
            assert!((vp - vm).abs() <= 2e-9);
            assert!((dp - dm).abs() <= 2e-7 / mu);
        }
    }

    proptest! {
        #[test]
        fn hinge_zero_iff_nonpositive(x in -10f64..10.0) {
            let (v, d) = smooth_hinge(x, 0.01).unwrap();
            prop_assert_eq!(v == 0.0, x <= 0.0);
            prop_assert!(v >= 0.0 && d >= 0.0 && d <= 1.0);
        }
    }

    #[test]
    fn gram_matrix_row_sums_and_symmetry() {
        // Entries of G sum to 1 (integral of (sum of B^2)_i^2 = integral of 1).
        let total: f64 = JERK_GRAM.iter().flatten().sum();
        assert_relative_eq!(total, 1.0, max_relative = 1e-15);
        for m in 0..3 {
            for n in 0..3 {
                assert_eq!(JERK_GRAM[m][n], JERK_GRAM[n][m]);
            }
        }
    }

    #[test]
    fn jerk_closed_form_cubic_value() {
        let seg = cubic_fixture();
        let r = jerk_closed_form(&seg);
        assert_relative_eq!(r.value, 36.0, max_relative = 1e-12);
        assert_relative_eq!(r.grad_duration, -180.0, max_relative = 1e-12);
    }

    #[test]
    fn jerk_of_constant_velocity_segment_is_zero() {
        let p = Vec3::new(1.0, 0.0, -1.0);
        let dir = Vec3::new(0.5, 1.0, 0.0);
        let ctrl: [Vec3; 6] = std::array::from_fn(|i| p + dir * (i as f64));
        let seg = BezierSegment::new(ctrl, 1.7).unwrap();
        let r = jerk_closed_form(&seg);
        assert!(r.value.abs() < 1e-14);
        assert!(r.grad_duration.abs() < 1e-13);
        for g in r.grad_c {
            assert!(g.norm() < 1e-13);
        }
    }

    #[test]
    fn jerk_closed_form_matches_dense_quadrature() {
        let mut rng = StdRng::seed_from_u64(61);
        for _ in 0..25 {
            let seg = random_segment(&mut rng);
            let r = jerk_closed_form(&seg);
            // Trapezoid over |j(t)|^2. Truncation is ~10/n^2 relative when
            // the jerk curve crosses zero, so the grid is sized to push that
            // well below the tolerance.
            let n = 16384;
            let mut acc = 0.0;
            for i in 0..=n {
                let tau = i as f64 / n as f64;
                let j = seg.state(tau).jerk.norm_squared();
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                acc += w * j;
            }
            acc *= seg.duration / n as f64;
            assert_relative_eq!(r.value, acc, max_relative = 1e-6);
        }
    }

    #[test]
    fn jerk_gradients_match_finite_differences() {
        let mut rng = StdRng::seed_from_u64(67);
        let h = 1e-6;
        for _ in 0..10 {
            let seg = random_segment(&mut rng);
            let r = jerk_closed_form(&seg);
            // Control-point gradient.
            for k in 0..6 {
                for axis in 0..3 {
                    let mut plus = seg;
                    let mut minus = seg;
                    bump(&mut plus.ctrl[k], axis, h);
                    bump(&mut minus.ctrl[k], axis, -h);
                    let fd =
                        (jerk_closed_form(&plus).value - jerk_closed_form(&minus).value) / (2.0 * h);
                    let got = pick(r.grad_c[k], axis);
                    assert!(
                        (fd - got).abs() <= 1e-5 * got.abs().max(1.0),
                        "c[{k}].{axis}: fd {fd} vs {got}"
                    );
                }
            }
            // Explicit duration gradient (control points held fixed).
            let mut plus = seg;
            plus.duration += h;
            let mut minus = seg;
            minus.duration -= h;
            let fd = (jerk_closed_form(&plus).value - jerk_closed_form(&minus).value) / (2.0 * h);
            assert!((fd - r.grad_duration).abs() <= 1e-4 * r.grad_duration.abs().max(1.0));
        }
    }

    fn bump(v: &mut Vec3, axis: usize, h: f64) {
        match axis {
            0 => v.x += h,
            1 => v.y += h,
            _ => v.z += h,
        }
    }

    fn pick(v: Vec3, axis: usize) -> f64 {
        match axis {
            0 => v.x,
            1 => v.y,
            _ => v.z,
        }
    }

    #[test]
    fn surrogate_cubic_value() {
        let seg = cubic_fixture();
        let r = jerk_surrogate(&seg, SURROGATE_WEIGHTS);
        assert_relative_eq!(r.value, 19.2, max_relative = 1e-12);
        let zero = jerk_surrogate(
            &BezierSegment::new([Vec3::ZERO; 6], 1.0).unwrap(),
            SURROGATE_WEIGHTS,
        );
        assert_eq!(zero.value, 0.0);
    }

    #[test]
    fn gram_eigenvalue_sandwich() {
        let mut rng = StdRng::seed_from_u64(71);
        for _ in 0..1000 {
            let d: Vec<f64> = (0..9).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let mut quad = 0.0;
            let mut nrm = 0.0;
            for axis in 0..3 {
                let dm = [d[axis], d[3 + axis], d[6 + axis]];
                for m in 0..3 {
                    nrm += dm[m] * dm[m];
                    for n in 0..3 {
                        quad += dm[m] * JERK_GRAM[m][n] * dm[n];
                    }
                }
            }
            let lo = JERK_GRAM_EIGENVALUES[0] * nrm;
            let hi = JERK_GRAM_EIGENVALUES[2] * nrm;
            assert!(quad >= lo - 1e-12 && quad <= hi + 1e-12);
        }
    }

    #[test]
    fn gram_eigenvectors() {
        // (1,0,-1), (1,1,1), (1,-2,1) are eigenvectors with the advertised
        // eigenvalues.
        let cases = [
            ([1.0, 0.0, -1.0], JERK_GRAM_EIGENVALUES[1]),
            ([1.0, 1.0, 1.0], JERK_GRAM_EIGENVALUES[2]),
            ([1.0, -2.0, 1.0], JERK_GRAM_EIGENVALUES[0]),
        ];
        for (v, lambda) in cases {
            for m in 0..3 {
                let gv: f64 = (0..3).map(|n| JERK_GRAM[m][n] * v[n]).sum();
                assert_relative_eq!(gv, lambda * v[m], max_relative = 1e-12, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn time_cost_examples() {
        let (v, g) = time_cost(&[1.0, 3.0]);
        assert_eq!(v, 4.0);
        assert_eq!(g, vec![1.0, 1.0]);
        let (v, _) = time_cost(&[2.0]);
        assert_eq!(v, 2.0);
    }

    #[test]
    fn limit_cost_cases() {
        let limits = Limits {
            v_max: 2.0,
            a_max: 10.0,
            j_max: 30.0,
        };
        let calm = TrajectoryState {
            pos: Vec3::ZERO,
            vel: Vec3::new(0.5, 0.0, 0.0),
            acc: Vec3::new(1.0, 0.0, 0.0),
            jerk: Vec3::new(2.0, 0.0, 0.0),
        };
        let r = limit_sample_cost(&calm, &limits, 0.01);
        assert_eq!(r.value, 0.0);
        assert_eq!(r.lv, Vec3::ZERO);

        let fast = TrajectoryState {
            vel: Vec3::new(3.0, 0.0, 0.0),
            ..calm
        };
        let r = limit_sample_cost(&fast, &limits, 0.01);
        assert_relative_eq!(r.value, 4.995);
        assert_relative_eq!(r.lv.x, 6.0);
        assert_eq!(r.lx, Vec3::ZERO);

        let at_limit = TrajectoryState {
            vel: Vec3::new(2.0, 0.0, 0.0),
            ..calm
        };
        let r = limit_sample_cost(&at_limit, &limits, 0.01);
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn sfc_cost_cases() {
        let poly = Polytope::new(vec![Halfspace::new(Vec3::new(1.0, 0.0, 0.0), 0.0).unwrap()])
            .unwrap();
        let deep = sfc_sample_cost(Vec3::new(-5.0, 0.0, 0.0), &poly, 0.2, 0.01);
        assert_eq!(deep.value, 0.0);
        let out = sfc_sample_cost(Vec3::new(0.8, 0.0, 0.0), &poly, 0.2, 0.01);
        assert_relative_eq!(out.value, 0.995);
        assert_relative_eq!(out.lx.x, 1.0);
        let boundary = sfc_sample_cost(Vec3::new(-0.2, 0.0, 0.0), &poly, 0.2, 0.01);
        assert_eq!(boundary.value, 0.0);
    }

    #[test]
    fn dyn_obstacle_cases() {
        let k = Vec3::new(1.0, 2.0, 3.0);
        let far = dyn_obstacle_penalty(k + Vec3::new(10.0, 0.0, 0.0), &[k], 3.0);
        assert_eq!(far.value, 0.0);
        let center = dyn_obstacle_penalty(k, &[k], 3.0);
        assert_relative_eq!(center.value, 729.0);
        assert_eq!(center.lx, Vec3::ZERO);
        // |x - k|^2 = c^2 - 1 gives exactly 1.
        let c: f64 = 3.0;
        let d = (c * c - 1.0).sqrt();
        let near = dyn_obstacle_penalty(k + Vec3::new(d, 0.0, 0.0), &[k], c);
        assert_relative_eq!(near.value, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn accumulate_trivial_evaluators() {
        let mut rng = StdRng::seed_from_u64(73);
        let seg = random_segment(&mut rng);
        let table = BasisTable::uniform(16).unwrap();
        let zero = accumulate_sampled(&seg, 0.0, &table, |_, _, _| SampleJacobians::ZERO);
        assert_eq!(zero.value, 0.0);
        assert_eq!(zero.grad_duration, 0.0);
        let one = accumulate_sampled(&seg, 0.0, &table, |_, _, _| SampleJacobians {
            value: 1.0,
            ..SampleJacobians::ZERO
        });
        assert_relative_eq!(one.value, seg.duration, max_relative = 1e-12);
        assert_relative_eq!(one.grad_duration, 1.0, max_relative = 1e-12);
        for g in one.grad_c {
            assert_eq!(g, Vec3::ZERO);
        }
    }

    /// Duration gradient of a sampled velocity hinge, including the
    /// coefficient path, vs a finite difference through the Hermite map.
    #[test]
    fn accumulate_duration_gradient_matches_fd() {
        let mut rng = StdRng::seed_from_u64(79);
        let table = BasisTable::uniform(16).unwrap();
        let limits = Limits {
            v_max: 0.5,
            a_max: 1e6,
            j_max: 1e6,
        };
        for _ in 0..10 {
            let mut v = || {
                Vec3::new(
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                    rng.gen_range(-2.0..2.0),
                )
            };
            let start = KnotState::new(v(), v(), v());
            let end = KnotState::new(v(), v(), v());
            let t0 = rng.gen_range(0.5..2.0);

            let cost_at = |t: f64| -> f64 {
                let seg = hermite_to_bezier(&start, &end, t).unwrap();
                accumulate_sampled(&seg, 0.0, &table, |_, _, st| {
                    limit_sample_cost(st, &limits, 0.01)
                })
                .value
            };

            let seg = hermite_to_bezier(&start, &end, t0).unwrap();
            let r = accumulate_sampled(&seg, 0.0, &table, |_, _, st| {
                limit_sample_cost(st, &limits, 0.01)
            });
            let dcdt = crate::gradients::ctrl_points_wrt_duration(&start, &end, t0);
            let total = crate::gradients::segment_duration_gradient(0.0, &r.grad_c, &dcdt, r.grad_duration);

            let h = 1e-6;
            let fd = (cost_at(t0 + h) - cost_at(t0 - h)) / (2.0 * h);
            assert!(
                (fd - total).abs() <= 1e-5 * total.abs().max(1.0),
                "fd {fd} vs analytic {total}"
            );
        }
    }
}
