use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::prox::{ProxOperator, QuadraticProx};
use crate::error::{Error, Result};
use crate::linalg::all_finite;
use crate::metrics::{Flow, IterateView, Observer};
use crate::problem::BilinearProblem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PdParams {
    pub eta_x: f64,
    pub eta_y: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PdState {
    pub k: usize,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub y_prev: DVector<f64>,
}

impl PdState {
    pub fn new(x: DVector<f64>, y: DVector<f64>) -> Self {
        PdState {
            k: 0,
            y_prev: y.clone(),
            x,
            y,
        }
    }
}

/// Balanced steps `√(μ_x/μ_y) η_x = √(μ_y/μ_x) η_y = 1/(2‖A‖)` and
/// `θ = κ/(κ+1)` with `κ = 2‖A‖/√(μ_x μ_y)`.
pub fn pd_certified_params(p: &BilinearProblem) -> Result<PdParams> {
    let (mx, my, a) = (p.mu_x(), p.mu_y(), p.op_norm());
    if !(mx > 0.0) {
        return Err(Error::NotStronglyConvex(mx));
    }
    if !(my > 0.0) {
        return Err(Error::NotStronglyConcave(my));
    }
    if !(a > 0.0) {
        return Err(Error::InvalidArgument("coupling must be nonzero".into()));
    }
    let kappa = pd_kappa(p);
    Ok(PdParams {
        eta_x: (my / mx).sqrt() / (2.0 * a),
        eta_y: (mx / my).sqrt() / (2.0 * a),
        theta: kappa / (kappa + 1.0),
    })
}

/// `2‖A‖/√(μ_x μ_y)`
pub fn pd_kappa(p: &BilinearProblem) -> f64 {
    2.0 * p.op_norm() / (p.mu_x() * p.mu_y()).sqrt()
}

pub fn pd_step(
    s: &PdState,
    params: &PdParams,
    prox_f: &dyn ProxOperator,
    prox_h: &dyn ProxOperator,
    a: &DMatrix<f64>,
) -> Result<PdState> {
    if s.x.len() != a.ncols() || s.y.len() != a.nrows() {
        return Err(Error::DimensionMismatch {
            context: "primal-dual step",
            expected: a.ncols(),
            got: s.x.len(),
        });
    }
    let y_t = &s.y + (&s.y - &s.y_prev) * params.theta;
    let x = prox_f.apply(&(&s.x - a.tr_mul(&y_t) * params.eta_x), params.eta_x)?;
    let y = prox_h.apply(&(&s.y + a * &x * params.eta_y), params.eta_y)?;
    let k = s.k + 1;
    if !(all_finite(&x) && all_finite(&y)) {
        return Err(Error::NumericalDivergence { iteration: k });
    }
    Ok(PdState {
        k,
        x,
        y,
        y_prev: s.y.clone(),
    })
}

/// Runs with caller-supplied proximal operators; feasible sets of `p` are
/// ignored, so constraints must be folded into the operators.
#[allow(clippy::too_many_arguments)]
pub fn run_pd_with(
    p: &BilinearProblem,
    params: &PdParams,
    prox_f: &dyn ProxOperator,
    prox_h: &dyn ProxOperator,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    iters: usize,
    observer: &mut dyn Observer,
) -> Result<PdState> {
    let mut s = PdState::new(x0.clone(), y0.clone());
    fn view(s: &PdState, is_final: bool) -> IterateView<'_> {
        IterateView {
            k: s.k,
            x: &s.x,
            y: &s.y,
            x_avg: None,
            y_avg: None,
            grad_calls_f: s.k,
            grad_calls_h: s.k,
            is_final,
        }
    }
    if observer.observe(&view(&s, iters == 0)) == Flow::Stop {
        return Ok(s);
    }
    for _ in 0..iters {
        s = pd_step(&s, params, prox_f, prox_h, p.coupling.matrix())?;
        if observer.observe(&view(&s, s.k == iters)) == Flow::Stop {
            break;
        }
    }
    Ok(s)
}

/// Runs on an unconstrained quadratic problem using closed-form proxes.
pub fn run_pd(
    p: &BilinearProblem,
    params: &PdParams,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    iters: usize,
    observer: &mut dyn Observer,
) -> Result<PdState> {
    let f = p.f.as_quadratic().ok_or(Error::NonQuadratic)?;
    let h = p.h.as_quadratic().ok_or(Error::NonQuadratic)?;
    if !p.is_unconstrained() {
        return Err(Error::Constrained);
    }
    let (pf, ph) = (QuadraticProx(f.clone()), QuadraticProx(h.clone()));
    run_pd_with(p, params, &pf, &ph, x0, y0, iters, observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_quadratic_instance, GeneratorConfig};
    use crate::metrics::solve_saddle_exact;
    use crate::problem::QuadraticFunction;
    use crate::reference::ppm::proximal_distance_bound;

    fn half_square() -> QuadraticProx {
        QuadraticProx(QuadraticFunction::isotropic(1, 1.0).unwrap())
    }

    #[test]
    fn scalar_step_by_hand() {
        let s = PdState::new(DVector::from_element(1, 1.0), DVector::from_element(1, 1.0));
        let params = PdParams {
            eta_x: 0.5,
            eta_y: 0.5,
            theta: 2.0 / 3.0,
        };
        let a = DMatrix::identity(1, 1);
        let t = pd_step(&s, &params, &half_square(), &half_square(), &a).unwrap();
        assert!((t.x[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((t.y[0] - 7.0 / 9.0).abs() < 1e-15);
    }

    #[test]
    fn decoupled_without_coupling() {
        let mut s = PdState::new(
            DVector::from_element(1, 2.0),
            DVector::from_element(1, -4.0),
        );
        s.y_prev = DVector::from_element(1, 10.0);
        let params = PdParams {
            eta_x: 1.0,
            eta_y: 3.0,
            theta: 0.0,
        };
        let t = pd_step(
            &s,
            &params,
            &half_square(),
            &half_square(),
            &DMatrix::zeros(1, 1),
        )
        .unwrap();
        assert!((t.x[0] - 1.0).abs() < 1e-15);
        assert!((t.y[0] + 1.0).abs() < 1e-15);
    }

    #[test]
    fn certified_configuration_obeys_bound() {
        let p = gen_quadratic_instance(&GeneratorConfig {
            d: 4,
            r: 1.3,
            seed: 21,
        })
        .unwrap();
        let c = solve_saddle_exact(&p).unwrap();
        let params = pd_certified_params(&p).unwrap();
        let kappa = pd_kappa(&p);
        let x0 = DVector::from_element(4, 1.0);
        let y0 = DVector::from_fn(4, |i, _| -(i as f64));
        let (dx, dy) = ((&x0 - &c.x).norm_squared(), (&y0 - &c.y).norm_squared());
        let mut worst: f64 = 0.0;
        let mut obs = |v: &IterateView<'_>| {
            let lhs = (v.x - &c.x).norm_squared() / params.eta_x
                + (v.y - &c.y).norm_squared() / params.eta_y;
            let rhs = proximal_distance_bound(params.eta_x, params.eta_y, kappa, v.k, dx, dy);
            worst = worst.max(lhs / rhs);
            Flow::Continue
        };
        run_pd(&p, &params, &x0, &y0, 500, &mut obs).unwrap();
        assert!(worst <= 1.0 + 1e-9, "{worst}");
    }
}
