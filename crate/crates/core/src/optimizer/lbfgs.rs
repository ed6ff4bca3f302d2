//! Limited-memory quasi-Newton minimizer with a strong-Wolfe line search.

use std::collections::VecDeque;
use std::time::Instant;

use crate::error::{Error, Result};

use super::{CostFunction, SolverConfig, TerminationReason};

/// Costs at or above this are treated as rejected trial points by the line
/// search (the objective wrapper returns such values instead of evaluating
/// outside its guard region).
pub const REJECT_COST: f64 = 1e29;

/// Outcome of a solve.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub z: Vec<f64>,
    /// Cost at the initial point followed by every accepted iterate.
    pub cost_history: Vec<f64>,
    pub iterations: usize,
    pub evaluations: usize,
    pub termination: TerminationReason,
    pub wall_ms: f64,
    pub grad_inf_norm: f64,
}

impl SolveResult {
    pub fn final_cost(&self) -> f64 {
        *self.cost_history.last().expect("non-empty history")
    }
}

struct LinePoint {
    alpha: f64,
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
    dphi: f64,
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Minimize an objective from `z0`.
///
/// Search directions come from the two-loop recursion over the last `m`
/// curvature pairs with the standard `s·y / y·y` initial scaling; steps
/// satisfy the strong Wolfe conditions, so accepted costs strictly decrease.
/// Terminates on a small gradient infinity norm, on five consecutive
/// relative cost changes below tolerance, on the iteration cap, or when the
/// line search fails (in which case the best iterate found is returned).
pub fn minimize(f: &dyn CostFunction, z0: &[f64], cfg: &SolverConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let start_time = Instant::now();
    let mut evaluations = 0usize;

    if z0.is_empty() {
        return Ok(SolveResult {
            z: Vec::new(),
            cost_history: vec![0.0],
            iterations: 0,
            evaluations,
            termination: TerminationReason::Gradient,
            wall_ms: start_time.elapsed().as_secs_f64() * 1e3,
            grad_inf_norm: 0.0,
        });
    }

    let (mut fx, mut grad) = f.evaluate(z0);
    evaluations += 1;
    if !fx.is_finite() || fx >= REJECT_COST {
        return Err(Error::Solver(format!(
            "objective is not finite at the initial point (J = {fx})"
        )));
    }

    let mut x = z0.to_vec();
    let mut history: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.history);
    let mut gamma = 1.0;
    let mut cost_history = vec![fx];
    let mut small_change_streak = 0usize;
    let mut iterations = 0usize;
    let mut termination = TerminationReason::MaxIterations;

    for _ in 0..cfg.max_iterations {
        if inf_norm(&grad) <= cfg.tol_gradient {
            termination = TerminationReason::Gradient;
            break;
        }

        let mut direction = two_loop_direction(&history, &grad, gamma);
        let mut slope = dot(&direction, &grad);
        if !(slope < 0.0) {
            // Not a descent direction: restart from steepest descent.
            history.clear();
            direction = grad.iter().map(|g| -g).collect();
            slope = -dot(&grad, &grad);
            if slope == 0.0 {
                termination = TerminationReason::Gradient;
                break;
            }
        }

        match strong_wolfe(f, &x, fx, &grad, &direction, slope, cfg, &mut evaluations) {
            Some(accepted) => {
                let s: Vec<f64> = accepted
                    .x
                    .iter()
                    .zip(&x)
                    .map(|(new, old)| new - old)
                    .collect();
                let y: Vec<f64> = accepted
                    .g
                    .iter()
                    .zip(&grad)
                    .map(|(new, old)| new - old)
                    .collect();
                let sy = dot(&s, &y);
                if sy > 1e-12 * norm(&y) * norm(&s) {
                    gamma = sy / dot(&y, &y);
                    history.push_back((s, y, 1.0 / sy));
                    if history.len() > cfg.history {
                        history.pop_front();
                    }
                }

                let rel_change = (fx - accepted.f).abs() / fx.abs().max(1.0);
                x = accepted.x;
                fx = accepted.f;
                grad = accepted.g;
                cost_history.push(fx);
                iterations += 1;

                if rel_change <= cfg.tol_cost {
                    small_change_streak += 1;
                    if small_change_streak >= cfg.cost_streak {
                        termination = TerminationReason::CostChange;
                        break;
                    }
                } else {
                    small_change_streak = 0;
                }
            }
            None => {
                termination = TerminationReason::LineSearchFailure;
                break;
            }
        }
    }

    debug_assert!(
        cost_history.windows(2).all(|w| w[1] <= w[0]),
        "accepted costs must be non-increasing"
    );

    Ok(SolveResult {
        z: x,
        cost_history,
        iterations,
        evaluations,
        termination,
        wall_ms: start_time.elapsed().as_secs_f64() * 1e3,
        grad_inf_norm: inf_norm(&grad),
    })
}

fn two_loop_direction(
    history: &VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    grad: &[f64],
    gamma: f64,
) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = Vec::with_capacity(history.len());
    for (s, y, rho) in history.iter().rev() {
        let alpha = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= alpha * yi;
        }
        alphas.push(alpha);
    }
    for qi in q.iter_mut() {
        *qi *= gamma;
    }
    for ((s, y, rho), alpha) in history.iter().zip(alphas.iter().rev()) {
        let beta = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alpha - beta) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

#[allow(clippy::too_many_arguments)]
fn strong_wolfe(
    f: &dyn CostFunction,
    x: &[f64],
    phi0: f64,
    _g0: &[f64],
    direction: &[f64],
    dphi0: f64,
    cfg: &SolverConfig,
    evaluations: &mut usize,
) -> Option<LinePoint> {
    let eval_at = |alpha: f64, evaluations: &mut usize| -> LinePoint {
        let xt: Vec<f64> = x
            .iter()
            .zip(direction)
            .map(|(xi, di)| xi + alpha * di)
            .collect();
        let (ft, gt) = f.evaluate(&xt);
        *evaluations += 1;
        let dphi = dot(&gt, direction);
        LinePoint {
            alpha,
            x: xt,
            f: ft,
            g: gt,
            dphi,
        }
    };

    let mut budget = cfg.ls_max_trials;
    let armijo = |alpha: f64, ft: f64| ft <= phi0 + cfg.ls_c1 * alpha * dphi0;
    let curvature_ok = |dphi: f64| dphi.abs() <= -cfg.ls_c2 * dphi0;

    let mut prev = LinePoint {
        alpha: 0.0,
        x: x.to_vec(),
        f: phi0,
        g: Vec::new(),
        dphi: dphi0,
    };
    let mut alpha = 1.0;
    let mut first = true;

    while budget > 0 {
        budget -= 1;
        let cand = eval_at(alpha, evaluations);
        let rejected = !cand.f.is_finite() || cand.f >= REJECT_COST;
        if rejected || !armijo(alpha, cand.f) || (!first && cand.f >= prev.f) {
            return zoom(prev, cand, phi0, dphi0, cfg, &mut budget, &eval_at, evaluations);
        }
        if curvature_ok(cand.dphi) {
            return Some(cand);
        }
        if cand.dphi >= 0.0 {
            return zoom(cand, prev, phi0, dphi0, cfg, &mut budget, &eval_at, evaluations);
        }
        prev = cand;
        alpha *= 2.0;
        first = false;
        if alpha > 1e12 {
            return None;
        }
    }
    None
}

/// Narrow a bracketing interval until the strong Wolfe conditions hold.
/// `lo` always satisfies the sufficient-decrease condition (or is the
/// origin) and has the lowest accepted value seen so far.
#[allow(clippy::too_many_arguments)]
fn zoom(
    mut lo: LinePoint,
    mut hi: LinePoint,
    phi0: f64,
    dphi0: f64,
    cfg: &SolverConfig,
    budget: &mut usize,
    eval_at: &impl Fn(f64, &mut usize) -> LinePoint,
    evaluations: &mut usize,
) -> Option<LinePoint> {
    let armijo = |alpha: f64, ft: f64| ft <= phi0 + cfg.ls_c1 * alpha * dphi0;
    let curvature_ok = |dphi: f64| dphi.abs() <= -cfg.ls_c2 * dphi0;

    while *budget > 0 {
        *budget -= 1;
        let width = (hi.alpha - lo.alpha).abs();
        if width <= 1e-16 * lo.alpha.abs().max(1.0) {
            break;
        }
        // Quadratic interpolation using lo's value/slope and hi's value,
        // safeguarded into the middle of the interval.
        let mut alpha = {
            let d = hi.alpha - lo.alpha;
            let denom = hi.f - lo.f - lo.dphi * d;
            if denom.abs() > 1e-300 && hi.f.is_finite() {
                lo.alpha - 0.5 * lo.dphi * d * d / denom
            } else {
                f64::NAN
            }
        };
        let a_min = lo.alpha.min(hi.alpha) + 0.1 * width;
        let a_max = lo.alpha.max(hi.alpha) - 0.1 * width;
        if !alpha.is_finite() || alpha < a_min || alpha > a_max {
            alpha = 0.5 * (lo.alpha + hi.alpha);
        }

        let cand = eval_at(alpha, evaluations);
        let rejected = !cand.f.is_finite() || cand.f >= REJECT_COST;
        if rejected || !armijo(alpha, cand.f) || cand.f >= lo.f {
            hi = cand;
        } else {
            if curvature_ok(cand.dphi) {
                return Some(cand);
            }
            if cand.dphi * (hi.alpha - lo.alpha) >= 0.0 {
                hi = LinePoint {
                    alpha: lo.alpha,
                    x: std::mem::take(&mut lo.x),
                    f: lo.f,
                    g: std::mem::take(&mut lo.g),
                    dphi: lo.dphi,
                };
            }
            lo = cand;
        }
    }

    // Fall back to the best sufficient-decrease point if the curvature
    // condition never landed within budget.
    if lo.alpha > 0.0 && lo.f < phi0 && !lo.g.is_empty() {
        Some(lo)
    } else {
        None
    }
}
