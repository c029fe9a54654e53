use nalgebra::DVector;

use super::schedule::schedule_scsc;
use super::solver::{lpd_step, LpdState};
use crate::error::{Error, Result};
use crate::metrics::{primal_dual_gap, Flow, GapEstimate, Observer};
use crate::problem::BilinearProblem;

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothingOptions {
    /// Weight of the added term; defaults to `1/(2R²)`.
    pub lambda: Option<f64>,
    /// Radius `R` of the region around `x0` that matters; defaults to the
    /// largest distance from `x0` to the feasible set.
    pub radius: Option<f64>,
    pub check_every: usize,
    pub max_iters: usize,
}

impl Default for SmoothingOptions {
    fn default() -> Self {
        SmoothingOptions {
            lambda: None,
            radius: None,
            check_every: 10,
            max_iters: 10_000_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SmoothedSolution {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub iterations: usize,
    pub lambda: f64,
    pub radius: f64,
    /// Certified gap of the smoothed problem at the returned point.
    pub smoothed_gap: GapEstimate,
    pub grad_calls: usize,
}

/// `φ + λε‖x - x0‖²`.
pub fn smoothed_problem(
    p: &BilinearProblem,
    eps: f64,
    lambda: f64,
    x0: &DVector<f64>,
) -> Result<BilinearProblem> {
    let f = p.f.with_proximity(2.0 * lambda * eps, x0)?;
    BilinearProblem::new(
        f,
        p.h.clone(),
        p.coupling.clone(),
        p.set_x.clone(),
        p.set_y.clone(),
    )
}

/// `(√(L_x/ε) + ‖A‖/√(μ_y ε) + √(L_y/μ_y)) ln(1/ε)`.
pub fn smoothing_iteration_estimate(p: &BilinearProblem, eps: f64) -> f64 {
    ((p.l_x() / eps).sqrt() + p.op_norm() / (p.mu_y() * eps).sqrt() + (p.l_y() / p.mu_y()).sqrt())
        * (1.0 / eps).ln()
}

/// Solves a convex-strongly-concave problem to gap `eps` by adding a small
/// strongly convex term in `x` and running the constant schedule until the
/// smoothed problem's certified gap is at most `eps/2`.
pub fn smooth_then_solve(
    p: &BilinearProblem,
    eps: f64,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    opts: &SmoothingOptions,
    observer: &mut dyn Observer,
) -> Result<SmoothedSolution> {
    if !(eps > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "eps must be positive, got {eps}"
        )));
    }
    if !(p.mu_y() > 0.0) {
        return Err(Error::NotStronglyConcave(p.mu_y()));
    }
    let radius = match opts.radius {
        Some(r) if r > 0.0 => r,
        Some(r) => {
            return Err(Error::InvalidArgument(format!(
                "radius must be positive, got {r}"
            )))
        }
        None => {
            let r = p.set_x.max_distance_from(&p.set_x.project(x0));
            if !r.is_finite() {
                return Err(Error::UnboundedDomain);
            }
            r.max(f64::MIN_POSITIVE)
        }
    };
    let lambda = opts.lambda.unwrap_or(1.0 / (2.0 * radius * radius));
    let x0 = p.set_x.project(x0);
    let sp = smoothed_problem(p, eps, lambda, &x0)?;
    let schedule = schedule_scsc(&sp)?;
    let check = opts.check_every.max(1);
    let target = eps / 2.0;
    let inner_tol = eps * 1e-3;
    let mut s = LpdState::new(&sp, &x0, y0)?;
    let mut stop = observer.observe(&s.view(false)) == Flow::Stop;
    let mut last_gap = None;
    while !stop && s.k < opts.max_iters {
        s = lpd_step(&s, &schedule, &sp)?;
        let mut done = false;
        if s.k % check == 0 {
            let g = primal_dual_gap(&sp, &s.x, &s.y, inner_tol)?;
            done = g.upper() <= target;
            last_gap = Some(g);
        }
        stop = observer.observe(&s.view(done || s.k == opts.max_iters)) == Flow::Stop || done;
    }
    let smoothed_gap = match last_gap {
        Some(g) if stop => g,
        _ => primal_dual_gap(&sp, &s.x, &s.y, inner_tol)?,
    };
    Ok(SmoothedSolution {
        x: s.x,
        y: s.y,
        iterations: s.k,
        lambda,
        radius,
        smoothed_gap,
        grad_calls: s.grad_calls_f,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::build_robust_least_squares;
    use crate::metrics::Silent;
    use crate::problem::{FeasibleSet, QuadraticFunction};
    use nalgebra::DMatrix;

    #[test]
    fn unbounded_domain_needs_radius() {
        let p =
            build_robust_least_squares(&DMatrix::identity(2, 2), &DVector::zeros(2), 2.0).unwrap();
        let z = DVector::zeros(2);
        let r = smooth_then_solve(&p, 1e-3, &z, &z, &SmoothingOptions::default(), &mut Silent);
        assert!(matches!(r, Err(Error::UnboundedDomain)));
    }

    #[test]
    fn default_lambda_and_kappa_growth() {
        let f = QuadraticFunction::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            DVector::zeros(2),
            0.0,
        )
        .unwrap();
        let h = QuadraticFunction::isotropic(2, 1.0).unwrap();
        let p = BilinearProblem::new(
            f.into(),
            h.into(),
            crate::problem::Coupling::new(DMatrix::identity(2, 2)).unwrap(),
            FeasibleSet::cube(2, 1.0),
            FeasibleSet::unconstrained(2),
        )
        .unwrap();
        let x0 = DVector::zeros(2);
        let lam = 1.0 / (2.0 * 2.0); // R² = 2
        let a = smoothed_problem(&p, 1e-3, lam, &x0).unwrap();
        let b = smoothed_problem(&p, 0.5e-3, lam, &x0).unwrap();
        assert!((a.mu_x() - 2.0 * lam * 1e-3).abs() < 1e-18);
        let (ka, kb) = (
            a.condition_numbers().unwrap().kappa_xy,
            b.condition_numbers().unwrap().kappa_xy,
        );
        assert!((kb / ka - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn robust_ls_rank_deficient_reaches_gap() {
        let a = DMatrix::from_row_slice(3, 2, &[1.0, 1.0, 2.0, 2.0, 0.5, 0.5]);
        let y0 = DVector::from_vec(vec![1.0, -0.5, 0.25]);
        let p = build_robust_least_squares(&a, &y0, 3.0).unwrap();
        assert_eq!(p.mu_x(), 0.0);
        let opts = SmoothingOptions {
            radius: Some(5.0),
            ..Default::default()
        };
        let z2 = DVector::zeros(2);
        let z3 = DVector::zeros(3);
        let sol = smooth_then_solve(&p, 1e-4, &z2, &z3, &opts, &mut Silent).unwrap();
        let g = primal_dual_gap(&p, &sol.x, &sol.y, 1e-12).unwrap();
        assert!(g.upper() <= 1e-4, "{g:?}");
    }
}
