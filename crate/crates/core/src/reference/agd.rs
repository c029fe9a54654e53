//! Strongly convex minimization through the primal-dual method on the
//! lifted problem `min_x max_u (μ/2)‖x‖² + <x, u> - f̲*(u)`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::conjugate::ConjugatePair;
use crate::error::{Error, Result};
use crate::lpd::Step;
use crate::problem::{subtract_strong_convexity, SmoothFunction};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgdParams {
    pub eta_x: f64,
    pub eta_u: f64,
    pub theta: f64,
}

/// `η_x = 1/√(μ(L-μ))`, `η_u = √(μ/(L-μ))`, `θ = 1/(1 + √(μ/(L-μ)))`.
pub fn agd_params(l: f64, mu: f64) -> Result<AgdParams> {
    if !(mu > 0.0) {
        return Err(Error::NotStronglyConvex(mu));
    }
    if !(l > mu) {
        return Err(Error::InvalidArgument(format!(
            "need L > μ, got L = {l}, μ = {mu}"
        )));
    }
    let r = (mu / (l - mu)).sqrt();
    Ok(AgdParams {
        eta_x: 1.0 / (mu * (l - mu)).sqrt(),
        eta_u: r,
        theta: 1.0 / (1.0 + r),
    })
}

/// Gradient form: extrapolated shifted gradient, proximal `x` step, then an
/// averaging step for the gradient anchor. Returns `x₀, …, x_K`.
pub fn pd_agd_min(
    f: &SmoothFunction,
    x0: &DVector<f64>,
    iters: usize,
) -> Result<Vec<DVector<f64>>> {
    let (l, mu) = (f.smoothness(), f.strong_convexity());
    let fl = subtract_strong_convexity(f);
    let mut trace = Vec::with_capacity(iters + 1);
    trace.push(x0.clone());
    if l <= mu {
        // f̲ is affine: one exact step solves the problem
        if !(mu > 0.0) {
            return Err(Error::NotStronglyConvex(mu));
        }
        let star = -fl.gradient(x0) / mu;
        trace.extend(std::iter::repeat_n(star, iters));
        return Ok(trace);
    }
    let prm = agd_params(l, mu)?;
    let mut x = x0.clone();
    let mut anchor = x0.clone();
    let mut g = fl.gradient(&anchor);
    let mut g_prev = g.clone();
    for _ in 0..iters {
        let g_t = &g + (&g - &g_prev) * prm.theta;
        x = (&x - g_t * prm.eta_x) / (1.0 + prm.eta_x * mu);
        anchor = (&anchor + &x * prm.eta_u) / (1.0 + prm.eta_u);
        g_prev = std::mem::replace(&mut g, fl.gradient(&anchor));
        trace.push(x.clone());
    }
    Ok(trace)
}

/// Dual form with explicit `u` and a Bregman step on `f̲*`; needs a
/// quadratic `f`. Returns `x₀, …, x_K`.
pub fn pd_agd_min_dual(
    f: &SmoothFunction,
    x0: &DVector<f64>,
    iters: usize,
) -> Result<Vec<DVector<f64>>> {
    let pair = ConjugatePair::from_block(f)?;
    let prm = agd_params(f.smoothness(), f.strong_convexity())?;
    let mu = f.strong_convexity();
    let inv_x = 1.0 / prm.eta_x;
    let eta_u = Step::finite(prm.eta_u)?;
    let mut x = x0.clone();
    let mut w = x0.clone();
    let mut u = pair.dual_point(&w);
    let mut u_prev = u.clone();
    let mut trace = vec![x.clone()];
    for _ in 0..iters {
        let u_t = &u * (1.0 + prm.theta) - &u_prev * prm.theta;
        // argmin <ũ, x> + μ‖x‖²/2 + ‖x - x_k‖²/(2η_x)
        x = (&x * inv_x - u_t) / (inv_x + mu);
        w = pair.bregman_prox(&w, &x, eta_u);
        u_prev = std::mem::replace(&mut u, pair.dual_point(&w));
        trace.push(x.clone());
    }
    Ok(trace)
}

/// `κ exp(-K/(1 + 2√(κ-1))) ‖x* - x₀‖²` with `κ = L/μ`.
pub fn agd_distance_bound(l: f64, mu: f64, k: usize, dist0_sq: f64) -> f64 {
    let kappa = l / mu;
    kappa * (-(k as f64) / (1.0 + 2.0 * (kappa - 1.0).sqrt())).exp() * dist0_sq
}
