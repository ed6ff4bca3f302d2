//! Chain-rule assembly from control-point gradients to Hermite variables,
//! plus the finite-difference audit used to verify every gradient path.

use crate::spline::KnotState;
use crate::vec3::Vec3;

/// Gradient of one segment's cost with respect to its Hermite endpoint
/// states and duration.
#[derive(Debug, Clone, Copy, Default)]
pub struct EndpointGradient {
    pub p_start: Vec3,
    pub v_start: Vec3,
    pub a_start: Vec3,
    pub p_end: Vec3,
    pub v_end: Vec3,
    pub a_end: Vec3,
    pub duration: f64,
}

/// Pull a control-point gradient back to the endpoint states. This is the
/// transpose of the Hermite-to-Bézier map; the duration component is left
/// zero and assembled separately.
pub fn pullback_to_endpoints(grad_c: &[Vec3; 6], duration: f64) -> EndpointGradient {
    let t = duration;
    let t2 = t * t;
    EndpointGradient {
        p_start: grad_c[0] + grad_c[1] + grad_c[2],
        v_start: grad_c[1] * (t / 5.0) + grad_c[2] * (2.0 * t / 5.0),
        a_start: grad_c[2] * (t2 / 20.0),
        p_end: grad_c[3] + grad_c[4] + grad_c[5],
        v_end: grad_c[3] * (-2.0 * t / 5.0) + grad_c[4] * (-t / 5.0),
        a_end: grad_c[3] * (t2 / 20.0),
        duration: 0.0,
    }
}

/// Partial derivative of each Bézier control point with respect to the
/// segment duration, at fixed endpoint states.
pub fn ctrl_points_wrt_duration(start: &KnotState, end: &KnotState, duration: f64) -> [Vec3; 6] {
    let t = duration;
    [
        Vec3::ZERO,
        start.v * (1.0 / 5.0),
        start.v * (2.0 / 5.0) + start.a * (t / 10.0),
        end.v * (-2.0 / 5.0) + end.a * (t / 10.0),
        end.v * (-1.0 / 5.0),
        Vec3::ZERO,
    ]
}

/// Total duration gradient of one segment's cost:
/// explicit term + state-scaling term + coefficient path `g_c · ∂c/∂T`.
pub fn segment_duration_gradient(
    explicit: f64,
    grad_c: &[Vec3; 6],
    dc_dt: &[Vec3; 6],
    state_term: f64,
) -> f64 {
    let mut total = explicit + state_term;
    for (g, d) in grad_c.iter().zip(dc_dt) {
        total += g.dot(*d);
    }
    total
}

/// Result of a finite-difference gradient audit.
#[derive(Debug, Clone)]
pub struct FdAuditReport {
    pub max_rel_error: f64,
    pub worst_coordinate: Option<usize>,
    /// Coordinates skipped because the objective was non-finite at a probe.
    pub skipped: Vec<usize>,
    pub per_coordinate: Vec<f64>,
}

impl FdAuditReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_rel_error <= tol && self.skipped.is_empty()
    }
}

/// Compare an analytic gradient against central finite differences of the
/// objective value. Relative error per coordinate uses a `max(1, |analytic|)`
/// denominator so near-zero gradients do not blow up the ratio.
pub fn fd_audit(
    value: impl Fn(&[f64]) -> f64,
    analytic: &[f64],
    z: &[f64],
    h: f64,
) -> FdAuditReport {
    assert!(h > 0.0, "finite-difference step must be positive");
    assert_eq!(analytic.len(), z.len(), "gradient/point length mismatch");
    let mut report = FdAuditReport {
        max_rel_error: 0.0,
        worst_coordinate: None,
        skipped: Vec::new(),
        per_coordinate: vec![0.0; z.len()],
    };
    let mut probe = z.to_vec();
    for i in 0..z.len() {
        probe[i] = z[i] + h;
        let fp = value(&probe);
        probe[i] = z[i] - h;
        let fm = value(&probe);
        probe[i] = z[i];
        if !fp.is_finite() || !fm.is_finite() {
            report.skipped.push(i);
            continue;
        }
        let fd = (fp - fm) / (2.0 * h);
        let err = (fd - analytic[i]).abs() / analytic[i].abs().max(1.0);
        report.per_coordinate[i] = err;
        if err > report.max_rel_error {
            report.max_rel_error = err;
            report.worst_coordinate = Some(i);
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::costs::jerk_closed_form;
    use crate::spline::hermite_to_bezier;
    use approx::assert_relative_eq;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_vec(rng: &mut StdRng, s: f64) -> Vec3 {
        Vec3::new(
            rng.gen_range(-s..s),
            rng.gen_range(-s..s),
            rng.gen_range(-s..s),
        )
    }

    fn random_knot(rng: &mut StdRng) -> KnotState {
        KnotState::new(random_vec(rng, 2.0), random_vec(rng, 2.0), random_vec(rng, 2.0))
    }

    #[test]
    fn pullback_zero() {
        let g = pullback_to_endpoints(&[Vec3::ZERO; 6], 1.3);
        assert_eq!(g.p_start, Vec3::ZERO);
        assert_eq!(g.v_end, Vec3::ZERO);
    }

    #[test]
    fn pullback_single_block() {
        let mut grad_c = [Vec3::ZERO; 6];
        grad_c[1] = Vec3::new(1.0, 0.0, 0.0);
        let g = pullback_to_endpoints(&grad_c, 5.0);
        assert_eq!(g.p_start, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(g.v_start, Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(g.a_start, Vec3::ZERO);
        assert_eq!(g.p_end, Vec3::ZERO);
        assert_eq!(g.v_end, Vec3::ZERO);
    }

    /// The pullback is the transpose of the scalar 6x6 coefficient matrix of
    /// the Hermite-to-Bézier map, applied per axis.
    #[test]
    fn pullback_matches_matrix_transpose() {
        let mut rng = StdRng::seed_from_u64(83);
        for _ in 0..50 {
            let t: f64 = rng.gen_range(0.2..3.0);
            // Rows: control points c0..c5; columns: p_s, v_s, a_s, p_e, v_e, a_e.
            let c = [
                [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
                [1.0, t / 5.0, 0.0, 0.0, 0.0, 0.0],
                [1.0, 2.0 * t / 5.0, t * t / 20.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 1.0, -2.0 * t / 5.0, t * t / 20.0],
                [0.0, 0.0, 0.0, 1.0, -t / 5.0, 0.0],
                [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
            ];
            let grad_c: [Vec3; 6] = std::array::from_fn(|_| random_vec(&mut rng, 3.0));
            let got = pullback_to_endpoints(&grad_c, t);
            let got_blocks = [
                got.p_start,
                got.v_start,
                got.a_start,
                got.p_end,
                got.v_end,
                got.a_end,
            ];
            for col in 0..6 {
                let mut want = Vec3::ZERO;
                for row in 0..6 {
                    want += grad_c[row] * c[row][col];
                }
                assert!(
                    (got_blocks[col] - want).norm() <= 1e-12 * want.norm().max(1.0),
                    "block {col}"
                );
            }
        }
    }

    #[test]
    fn pullback_velocity_blocks_scale_with_duration() {
        let mut grad_c = [Vec3::ZERO; 6];
        grad_c[1] = Vec3::new(0.3, -1.0, 2.0);
        grad_c[2] = Vec3::new(1.0, 0.5, 0.0);
        let g1 = pullback_to_endpoints(&grad_c, 1.0);
        let g2 = pullback_to_endpoints(&grad_c, 2.0);
        assert!((g2.v_start - g1.v_start * 2.0).norm() < 1e-15);
    }

    #[test]
    fn dc_dt_cases() {
        let zero = KnotState::stationary(Vec3::ZERO);
        for d in ctrl_points_wrt_duration(&zero, &zero, 1.0) {
            assert_eq!(d, Vec3::ZERO);
        }
        let start = KnotState::new(Vec3::ZERO, Vec3::new(5.0, 0.0, 0.0), Vec3::ZERO);
        let d = ctrl_points_wrt_duration(&start, &zero, 2.0);
        assert_eq!(d[0], Vec3::ZERO);
        assert_eq!(d[1], Vec3::new(1.0, 0.0, 0.0));
        assert_eq!(d[2], Vec3::new(2.0, 0.0, 0.0));
        assert_eq!(d[3], Vec3::ZERO);
        assert_eq!(d[4], Vec3::ZERO);
        assert_eq!(d[5], Vec3::ZERO);
    }

    #[test]
    fn dc_dt_matches_finite_differences() {
        let mut rng = StdRng::seed_from_u64(89);
        for _ in 0..20 {
            let start = random_knot(&mut rng);
            let end = random_knot(&mut rng);
            let t0: f64 = rng.gen_range(0.3..2.5);
            let h = 1e-6;
            let plus = hermite_to_bezier(&start, &end, t0 + h).unwrap();
            let minus = hermite_to_bezier(&start, &end, t0 - h).unwrap();
            let analytic = ctrl_points_wrt_duration(&start, &end, t0);
            for k in 0..6 {
                let fd = (plus.ctrl[k] - minus.ctrl[k]) / (2.0 * h);
                assert!(
                    (fd - analytic[k]).norm() <= 1e-7 * analytic[k].norm().max(1.0),
                    "control point {k}"
                );
            }
        }
    }

    #[test]
    fn segment_duration_gradient_zero_inputs() {
        let z = [Vec3::ZERO; 6];
        assert_eq!(segment_duration_gradient(0.0, &z, &z, 0.0), 0.0);
    }

    #[test]
    fn jerk_total_duration_gradient_matches_fd() {
        let start = KnotState::stationary(Vec3::ZERO);
        let end = KnotState::new(
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(3.0, 0.0, 0.0),
            Vec3::new(6.0, 0.0, 0.0),
        );
        let t0 = 1.0;
        let seg = hermite_to_bezier(&start, &end, t0).unwrap();
        let r = jerk_closed_form(&seg);
        let dcdt = ctrl_points_wrt_duration(&start, &end, t0);
        let total = segment_duration_gradient(r.grad_duration, &r.grad_c, &dcdt, 0.0);
        let h = 1e-6;
        let jp = jerk_closed_form(&hermite_to_bezier(&start, &end, t0 + h).unwrap()).value;
        let jm = jerk_closed_form(&hermite_to_bezier(&start, &end, t0 - h).unwrap()).value;
        let fd = (jp - jm) / (2.0 * h);
        assert_relative_eq!(total, fd, max_relative = 1e-6);
    }

    #[test]
    fn fd_audit_quadratic_is_exact() {
        let z: Vec<f64> = vec![0.3, -1.2, 2.0, 0.0];
        let analytic: Vec<f64> = z.iter().map(|x| 2.0 * x).collect();
        let report = fd_audit(|v| v.iter().map(|x| x * x).sum(), &analytic, &z, 1e-6);
        assert!(report.max_rel_error <= 1e-9, "{}", report.max_rel_error);
        assert!(report.skipped.is_empty());
    }

    #[test]
    fn fd_audit_flags_corrupted_coordinate() {
        let z: Vec<f64> = vec![0.5, 1.5, -0.7];
        let mut analytic: Vec<f64> = z.iter().map(|x| 2.0 * x).collect();
        analytic[1] = -analytic[1];
        let report = fd_audit(|v| v.iter().map(|x| x * x).sum(), &analytic, &z, 1e-6);
        assert_eq!(report.worst_coordinate, Some(1));
        assert!(report.max_rel_error > 1.0);
    }

    #[test]
    fn fd_audit_skips_non_finite_probes() {
        let z = vec![0.0, 0.9999999];
        let value = |v: &[f64]| {
            if v[1] > 1.0 {
                f64::NAN
            } else {
                v[0] * v[0] + v[1]
            }
        };
        let analytic = vec![0.0, 1.0];
        let report = fd_audit(value, &analytic, &z, 1e-6);
        assert_eq!(report.skipped, vec![1]);
        assert!(report.max_rel_error <= 1e-9);
    }
}
