use nalgebra::{DMatrix, DVector};

use super::conjugate::ConjugatePair;
use crate::error::{Error, Result};
use crate::linalg::all_finite;
use crate::lpd::{Schedule, Step};
use crate::metrics::{Flow, IterateView, Observer};
use crate::problem::{BilinearProblem, FeasibleSet};

/// Four-block iterate of the lifted method written with explicit dual
/// variables `u ∈ ∂f̲(·)`, `v ∈ ∂h̲(·)`. Each dual variable is stored
/// together with a primal preimage (`u = P̲ w_u + q̲`).
#[derive(Clone, Debug, PartialEq)]
pub struct OlpdState {
    pub k: usize,
    pub x: DVector<f64>,
    pub x_prev: DVector<f64>,
    pub y: DVector<f64>,
    pub y_prev: DVector<f64>,
    pub u: DVector<f64>,
    pub u_prev: DVector<f64>,
    pub v: DVector<f64>,
    pub v_prev: DVector<f64>,
    pub w_u: DVector<f64>,
    pub w_v: DVector<f64>,
}

impl OlpdState {
    /// Duals start at the shifted gradients of the start point.
    pub fn new(
        p: &BilinearProblem,
        fpair: &ConjugatePair,
        hpair: &ConjugatePair,
        x0: &DVector<f64>,
        y0: &DVector<f64>,
    ) -> Self {
        let x = p.set_x.project(x0);
        let y = p.set_y.project(y0);
        let u = fpair.dual_point(&x);
        let v = hpair.dual_point(&y);
        OlpdState {
            k: 0,
            x_prev: x.clone(),
            y_prev: y.clone(),
            u_prev: u.clone(),
            v_prev: v.clone(),
            w_u: x.clone(),
            w_v: y.clone(),
            x,
            y,
            u,
            v,
        }
    }

    /// Starts from explicit primal points and dual preimages.
    pub fn with_duals(
        fpair: &ConjugatePair,
        hpair: &ConjugatePair,
        x: DVector<f64>,
        y: DVector<f64>,
        w_u: DVector<f64>,
        w_v: DVector<f64>,
    ) -> Self {
        let u = fpair.dual_point(&w_u);
        let v = hpair.dual_point(&w_v);
        OlpdState {
            k: 0,
            x_prev: x.clone(),
            y_prev: y.clone(),
            u_prev: u.clone(),
            v_prev: v.clone(),
            x,
            y,
            u,
            v,
            w_u,
            w_v,
        }
    }
}

/// `argmin_{z∈Z} <g, z> + ‖z - z_k‖²/(2η) + μ‖z‖²/2`.
fn prox_quadratic(
    set: &FeasibleSet,
    z: &DVector<f64>,
    g: &DVector<f64>,
    eta: Step,
    mu: f64,
) -> DVector<f64> {
    let c = if eta.is_infinite() {
        -g / mu
    } else {
        let e = eta.eta();
        (z - g * e) / (1.0 + e * mu)
    };
    set.project(&c)
}

pub fn olpd_step(
    s: &OlpdState,
    schedule: &Schedule,
    p: &BilinearProblem,
    fpair: &ConjugatePair,
    hpair: &ConjugatePair,
) -> Result<OlpdState> {
    let sp = schedule.at(s.k);
    let th = sp.theta;
    let ext = |a: &DVector<f64>, b: &DVector<f64>| a * (1.0 + th) - b * th;
    let x_t = ext(&s.x, &s.x_prev);
    let y_t = ext(&s.y, &s.y_prev);
    let u_t = ext(&s.u, &s.u_prev);
    let v_t = ext(&s.v, &s.v_prev);
    if (sp.eta_x.is_infinite() && p.mu_x() <= 0.0) || (sp.eta_y.is_infinite() && p.mu_y() <= 0.0) {
        return Err(Error::InvalidArgument(
            "infinite step without strong convexity".into(),
        ));
    }
    let a: &DMatrix<f64> = p.coupling.matrix();
    let x = prox_quadratic(&p.set_x, &s.x, &(a.tr_mul(&y_t) + u_t), sp.eta_x, p.mu_x());
    let y = prox_quadratic(&p.set_y, &s.y, &(v_t - a * &x_t), sp.eta_y, p.mu_y());
    let w_u = fpair.bregman_prox(&s.w_u, &x, sp.eta_u);
    let w_v = hpair.bregman_prox(&s.w_v, &y, sp.eta_v);
    let u = fpair.dual_point(&w_u);
    let v = hpair.dual_point(&w_v);
    let k = s.k + 1;
    if !(all_finite(&x) && all_finite(&y) && all_finite(&u) && all_finite(&v)) {
        return Err(Error::NumericalDivergence { iteration: k });
    }
    Ok(OlpdState {
        k,
        x_prev: s.x.clone(),
        y_prev: s.y.clone(),
        u_prev: s.u.clone(),
        v_prev: s.v.clone(),
        x,
        y,
        u,
        v,
        w_u,
        w_v,
    })
}

/// Runs the explicit-dual form; needs quadratic blocks.
pub fn run_olpd(
    p: &BilinearProblem,
    schedule: &Schedule,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    iters: usize,
    observer: &mut dyn Observer,
) -> Result<OlpdState> {
    let fpair = ConjugatePair::from_block(&p.f)?;
    let hpair = ConjugatePair::from_block(&p.h)?;
    let mut s = OlpdState::new(p, &fpair, &hpair, x0, y0);
    fn view(s: &OlpdState, is_final: bool) -> IterateView<'_> {
        IterateView {
            k: s.k,
            x: &s.x,
            y: &s.y,
            x_avg: Some(&s.w_u),
            y_avg: Some(&s.w_v),
            grad_calls_f: s.k,
            grad_calls_h: s.k,
            is_final,
        }
    }
    if observer.observe(&view(&s, false)) == Flow::Stop {
        return Ok(s);
    }
    for _ in 0..iters {
        s = olpd_step(&s, schedule, p, &fpair, &hpair)?;
        if observer.observe(&view(&s, s.k == iters)) == Flow::Stop {
            break;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpd::{lpd_step, schedule_scsc, LpdState, StepParams};
    use crate::problem::QuadraticFunction;

    fn kappa3() -> BilinearProblem {
        let f = QuadraticFunction::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])),
            DVector::from_vec(vec![0.5, -1.0]),
            0.0,
        )
        .unwrap();
        let h = QuadraticFunction::new(
            DMatrix::identity(2, 2),
            DVector::from_vec(vec![0.2, 0.0]),
            0.0,
        )
        .unwrap();
        BilinearProblem::quadratic(f, h, DMatrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn matches_lifted_iterates() {
        let p = kappa3();
        let sched = schedule_scsc(&p).unwrap();
        let fpair = ConjugatePair::from_block(&p.f).unwrap();
        let hpair = ConjugatePair::from_block(&p.h).unwrap();
        let x0 = DVector::from_vec(vec![1.0, -2.0]);
        let y0 = DVector::from_vec(vec![0.5, 3.0]);
        let mut a = LpdState::new(&p, &x0, &y0).unwrap();
        let mut b = OlpdState::new(&p, &fpair, &hpair, &x0, &y0);
        for _ in 0..100 {
            a = lpd_step(&a, &sched, &p).unwrap();
            b = olpd_step(&b, &sched, &p, &fpair, &hpair).unwrap();
            let scale = a.x.norm().max(a.y.norm()).max(1e-300);
            assert!((&a.x - &b.x).norm() / scale <= 1e-8);
            assert!((&a.y - &b.y).norm() / scale <= 1e-8);
        }
    }

    #[test]
    fn saddle_with_matching_duals_is_stationary() {
        let p = kappa3();
        let cert = crate::metrics::solve_saddle_exact(&p).unwrap();
        let sched = schedule_scsc(&p).unwrap();
        let fpair = ConjugatePair::from_block(&p.f).unwrap();
        let hpair = ConjugatePair::from_block(&p.h).unwrap();
        let mut s = OlpdState::with_duals(
            &fpair,
            &hpair,
            cert.x.clone(),
            cert.y.clone(),
            cert.x.clone(),
            cert.y.clone(),
        );
        for _ in 0..10 {
            s = olpd_step(&s, &sched, &p, &fpair, &hpair).unwrap();
        }
        assert!((&s.x - &cert.x).norm() < 1e-12 && (&s.y - &cert.y).norm() < 1e-12);
    }

    #[test]
    fn scalar_dual_update_by_hand() {
        // second coordinate: f̲ = ½x², f̲* = ½u², so η_u = 1 gives u₁ = (u₀ + x₁)/2
        let f = QuadraticFunction::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])),
            DVector::zeros(2),
            0.0,
        )
        .unwrap();
        let h = QuadraticFunction::isotropic(2, 1.0).unwrap();
        let p = BilinearProblem::quadratic(f, h, DMatrix::identity(2, 2) * 0.5).unwrap();
        let sched = Schedule::Constant(StepParams {
            eta_x: Step::finite(0.3).unwrap(),
            eta_y: Step::finite(0.3).unwrap(),
            eta_u: Step::finite(1.0).unwrap(),
            eta_v: Step::INFINITE,
            theta: 0.5,
        });
        let fpair = ConjugatePair::from_block(&p.f).unwrap();
        let hpair = ConjugatePair::from_block(&p.h).unwrap();
        let s0 = OlpdState::new(
            &p,
            &fpair,
            &hpair,
            &DVector::from_vec(vec![0.8, -0.6]),
            &DVector::from_vec(vec![-0.4, 0.1]),
        );
        let s1 = olpd_step(&s0, &sched, &p, &fpair, &hpair).unwrap();
        assert!((s1.u[1] - (s0.u[1] + s1.x[1]) / 2.0).abs() < 1e-15);
        assert_eq!(s1.u[0], 0.0);
    }

    #[test]
    fn rejects_non_quadratic() {
        struct Sq;
        impl crate::problem::Oracle for Sq {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &DVector<f64>) -> f64 {
                0.5 * x.norm_squared()
            }
            fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
                x.clone()
            }
        }
        let f =
            crate::problem::SmoothFunction::from_oracle(std::sync::Arc::new(Sq), 1.0, 1.0).unwrap();
        assert!(matches!(
            ConjugatePair::from_block(&f),
            Err(Error::NonQuadratic)
        ));
    }
}
