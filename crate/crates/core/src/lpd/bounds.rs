//! Closed-form convergence guarantees evaluated with measured constants.

use super::schedule::StepParams;
use crate::error::Result;
use crate::problem::BilinearProblem;

/// `(1/η_x + (L_x-μ_x)/η_u)‖x*-x₀‖² + (1/η_y + (L_y-μ_y)/η_v)‖y*-y₀‖²`;
/// infinite steps contribute nothing.
pub fn scsc_initial_constant(
    p: &BilinearProblem,
    s: &StepParams,
    dist_x0_sq: f64,
    dist_y0_sq: f64,
) -> f64 {
    let cx = s.eta_x.inverse() + (p.l_x() - p.mu_x()) * s.eta_u.inverse();
    let cy = s.eta_y.inverse() + (p.l_y() - p.mu_y()) * s.eta_v.inverse();
    cx * dist_x0_sq + cy * dist_y0_sq
}

/// Bound on `ε(x_k, y_k)` under the constant schedule.
pub fn scsc_eps_bound(p: &BilinearProblem, k: usize, initial_constant: f64) -> Result<f64> {
    let kappa = p.condition_numbers()?.kappa;
    Ok((-(k as f64 - 1.0) / (kappa + 1.0)).exp() * initial_constant)
}

fn kk1(k: usize) -> f64 {
    let k = k as f64;
    k * (k + 1.0)
}

/// Gap bound at the averaged point after `k` growing-schedule steps on
/// bounded sets with radii `d_x`, `d_y` around the start.
pub fn csc_gap_bound(p: &BilinearProblem, k: usize, d_x: f64, d_y: f64) -> f64 {
    let a2 = p.op_norm().powi(2);
    (2.0 * p.l_x() * d_x * d_x
        + 16.0 * a2 * d_x * d_x / p.mu_y()
        + 2.0 * (p.l_y() - p.mu_y()) * d_y * d_y)
        / kk1(k)
}

/// Right-hand side bounding `(μ_y/4)‖y* - y_k‖²` without bounded sets.
pub fn csc_dual_distance_bound(
    p: &BilinearProblem,
    k: usize,
    dist_x0_sq: f64,
    dist_y0_sq: f64,
) -> f64 {
    let a2 = p.op_norm().powi(2);
    (4.0 * p.l_x() * dist_x0_sq
        + 16.0 * a2 * dist_x0_sq / p.mu_y()
        + 4.0 * (p.l_y() - p.mu_y()) * dist_y0_sq)
        / kk1(k)
}

/// Bound on the primal suboptimality after a warm restart of `y`.
pub fn csc_restart_primal_bound(p: &BilinearProblem, k: usize, dist_x0_sq: f64) -> f64 {
    let (a2, my) = (p.op_norm().powi(2), p.mu_y());
    (4.0 * p.l_x() + 32.0 * a2 / my + (p.l_y() - my) / my * 8.0 * a2 / my) * dist_x0_sq / kk1(k)
}

/// Bound on the dual suboptimality after a warm restart of `y`.
pub fn csc_restart_dual_bound(p: &BilinearProblem, k: usize, d_x: f64) -> f64 {
    let (a2, my) = (p.op_norm().powi(2), p.mu_y());
    (4.0 * p.l_x() + 32.0 * a2 / my) * d_x * d_x / kk1(k)
}

fn restart_common(p: &BilinearProblem, dist_x0_sq: f64, dist_y0_sq: f64) -> f64 {
    let (a2, my) = (p.op_norm().powi(2), p.mu_y());
    let spread = p.l_y() - my;
    (4.0 * spread / my).sqrt()
        * ((2.0 * p.l_x() + 16.0 * a2 / my) * dist_x0_sq + 2.0 * spread * dist_y0_sq).sqrt()
}

/// Warm-up length (up to an absolute constant) before the primal restart bound applies.
pub fn warm_restart_k0_primal(p: &BilinearProblem, dist_x0_sq: f64, dist_y0_sq: f64) -> f64 {
    let (a2, my) = (p.op_norm().powi(2), p.mu_y());
    let denom = (p.l_x() / 2.0 + 4.0 * a2 / my + (p.l_y() - my) / my * a2 / my) * dist_x0_sq;
    restart_common(p, dist_x0_sq, dist_y0_sq) * (1.0 / denom).sqrt()
}

/// Warm-up length (up to an absolute constant) before the dual restart bound applies.
pub fn warm_restart_k0_dual(
    p: &BilinearProblem,
    dist_x0_sq: f64,
    dist_y0_sq: f64,
    d_x: f64,
) -> f64 {
    let (a2, my) = (p.op_norm().powi(2), p.mu_y());
    let denom = (p.l_x() + 8.0 * a2 / my) * d_x * d_x;
    restart_common(p, dist_x0_sq, dist_y0_sq) * (1.0 / denom).sqrt()
}
