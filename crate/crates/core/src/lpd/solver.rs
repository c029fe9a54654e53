use nalgebra::DVector;

use super::schedule::{schedule_csc, schedule_scsc, Schedule, StepParams};
use crate::error::{Error, Result};
use crate::linalg::all_finite;
use crate::metrics::{primal_dual_gap, Flow, IterateView, Observer, SaddleCertificate};
use crate::problem::{BilinearProblem, SmoothFunction};
use crate::reference::ProxOperator;

/// Iterates of the lifted primal-dual method after `k` steps.
///
/// `x_avg`/`y_avg` are the averaged points at which the shifted gradients
/// are taken; `grad_x` caches `∇f̲(x_avg)` and `grad_x_prev` the previous one.
#[derive(Clone, Debug, PartialEq)]
pub struct LpdState {
    pub k: usize,
    pub x: DVector<f64>,
    pub x_prev: DVector<f64>,
    pub y: DVector<f64>,
    pub y_prev: DVector<f64>,
    pub x_avg: DVector<f64>,
    pub y_avg: DVector<f64>,
    pub grad_x: DVector<f64>,
    pub grad_x_prev: DVector<f64>,
    pub grad_y: DVector<f64>,
    pub grad_y_prev: DVector<f64>,
    pub grad_calls_f: usize,
    pub grad_calls_h: usize,
}

/// `∇g(z) - μz` with a single oracle call.
fn shifted_grad(g: &SmoothFunction, z: &DVector<f64>) -> DVector<f64> {
    g.gradient(z) - z * g.strong_convexity()
}

impl LpdState {
    /// Starts at `(x0, y0)` projected onto the feasible sets. The two cached
    /// gradients at the initial averaged point are evaluated separately.
    pub fn new(p: &BilinearProblem, x0: &DVector<f64>, y0: &DVector<f64>) -> Result<Self> {
        if x0.len() != p.dim_x() {
            return Err(Error::DimensionMismatch {
                context: "x0",
                expected: p.dim_x(),
                got: x0.len(),
            });
        }
        if y0.len() != p.dim_y() {
            return Err(Error::DimensionMismatch {
                context: "y0",
                expected: p.dim_y(),
                got: y0.len(),
            });
        }
        let x = p.set_x.project(x0);
        let y = p.set_y.project(y0);
        let grad_x_prev = shifted_grad(&p.f, &x);
        let grad_x = shifted_grad(&p.f, &x);
        let grad_y_prev = shifted_grad(&p.h, &y);
        let grad_y = shifted_grad(&p.h, &y);
        Ok(LpdState {
            k: 0,
            x_prev: x.clone(),
            y_prev: y.clone(),
            x_avg: x.clone(),
            y_avg: y.clone(),
            x,
            y,
            grad_x,
            grad_x_prev,
            grad_y,
            grad_y_prev,
            grad_calls_f: 2,
            grad_calls_h: 2,
        })
    }

    pub fn view(&self, is_final: bool) -> IterateView<'_> {
        IterateView {
            k: self.k,
            x: &self.x,
            y: &self.y,
            x_avg: Some(&self.x_avg),
            y_avg: Some(&self.y_avg),
            grad_calls_f: self.grad_calls_f,
            grad_calls_h: self.grad_calls_h,
            is_final,
        }
    }
}

fn extrapolate(cur: &DVector<f64>, prev: &DVector<f64>, theta: f64) -> DVector<f64> {
    if theta == 0.0 {
        cur.clone()
    } else {
        cur + (cur - prev) * theta
    }
}

/// Minimiser centre of `<g, z> + ‖z - z_k‖²/(2η) + μ‖z‖²/2`, i.e.
/// `(z_k/η - g)/(1/η + μ)`, together with the curvature `1/η + μ`.
fn prox_centre(
    z: &DVector<f64>,
    g: &DVector<f64>,
    inv: f64,
    mu: f64,
) -> Result<(DVector<f64>, f64)> {
    let curv = inv + mu;
    if !(curv > 0.0) {
        return Err(Error::InvalidArgument(
            "infinite step with zero strong convexity leaves the update undefined".into(),
        ));
    }
    Ok(((z * inv - g) / curv, curv))
}

fn advance<FX, FY>(
    s: &LpdState,
    sp: &StepParams,
    p: &BilinearProblem,
    resolve_x: FX,
    resolve_y: FY,
) -> Result<LpdState>
where
    FX: Fn(&DVector<f64>, f64) -> Result<DVector<f64>>,
    FY: Fn(&DVector<f64>, f64) -> Result<DVector<f64>>,
{
    let th = sp.theta;
    let x_tilde = extrapolate(&s.x, &s.x_prev, th);
    let y_tilde = extrapolate(&s.y, &s.y_prev, th);
    let gx_tilde = extrapolate(&s.grad_x, &s.grad_x_prev, th);
    let gy_tilde = extrapolate(&s.grad_y, &s.grad_y_prev, th);

    let lin_x = p.coupling.apply_transpose(&y_tilde) + gx_tilde;
    let (cx, curv_x) = prox_centre(&s.x, &lin_x, sp.eta_x.inverse(), p.mu_x())?;
    let x = resolve_x(&cx, 1.0 / curv_x)?;

    let lin_y = gy_tilde - p.coupling.apply(&x_tilde);
    let (cy, curv_y) = prox_centre(&s.y, &lin_y, sp.eta_y.inverse(), p.mu_y())?;
    let y = resolve_y(&cy, 1.0 / curv_y)?;

    let (iu, iv) = (sp.eta_u.inverse(), sp.eta_v.inverse());
    let x_avg = (&s.x_avg * iu + &x) / (iu + 1.0);
    let y_avg = (&s.y_avg * iv + &y) / (iv + 1.0);
    let grad_x = shifted_grad(&p.f, &x_avg);
    let grad_y = shifted_grad(&p.h, &y_avg);

    let k = s.k + 1;
    if !(all_finite(&x) && all_finite(&y) && all_finite(&grad_x) && all_finite(&grad_y)) {
        return Err(Error::NumericalDivergence { iteration: k });
    }
    Ok(LpdState {
        k,
        x_prev: s.x.clone(),
        y_prev: s.y.clone(),
        x,
        y,
        x_avg,
        y_avg,
        grad_x_prev: s.grad_x.clone(),
        grad_y_prev: s.grad_y.clone(),
        grad_x,
        grad_y,
        grad_calls_f: s.grad_calls_f + 1,
        grad_calls_h: s.grad_calls_h + 1,
    })
}

/// One iteration with projections onto the feasible sets.
pub fn lpd_step(s: &LpdState, schedule: &Schedule, p: &BilinearProblem) -> Result<LpdState> {
    advance(
        s,
        &schedule.at(s.k),
        p,
        |c, _| Ok(p.set_x.project(c)),
        |c, _| Ok(p.set_y.project(c)),
    )
}

/// One iteration with extra convex terms `F(x)` and `H(y)` handled by their
/// proximal maps. The feasible-set projection is applied after the prox, which
/// is exact when the sets are unconstrained or when the terms are separable and
/// the sets are boxes.
pub fn lpd_prox_step(
    s: &LpdState,
    schedule: &Schedule,
    p: &BilinearProblem,
    prox_f: &dyn ProxOperator,
    prox_h: &dyn ProxOperator,
) -> Result<LpdState> {
    advance(
        s,
        &schedule.at(s.k),
        p,
        |c, step| Ok(p.set_x.project(&prox_f.apply(c, step)?)),
        |c, step| Ok(p.set_y.project(&prox_h.apply(c, step)?)),
    )
}

/// Runs `iters` iterations, reporting the start and every iterate.
pub fn run_lpd(
    p: &BilinearProblem,
    schedule: &Schedule,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    iters: usize,
    observer: &mut dyn Observer,
) -> Result<LpdState> {
    if iters == 0 {
        return Err(Error::InvalidArgument(
            "iteration budget must be positive".into(),
        ));
    }
    let mut s = LpdState::new(p, x0, y0)?;
    if observer.observe(&s.view(false)) == Flow::Stop {
        return Ok(s);
    }
    for _ in 0..iters {
        s = lpd_step(&s, schedule, p)?;
        if observer.observe(&s.view(s.k == iters)) == Flow::Stop {
            break;
        }
    }
    Ok(s)
}

/// `Σ_{k=1}^{K} 2k/(K(K+1)) (x_k, y_k)` from stored iterates `1..=K`.
pub fn averaged_iterates(
    iterates: &[(DVector<f64>, DVector<f64>)],
    k: usize,
) -> Result<(DVector<f64>, DVector<f64>)> {
    if k == 0 || iterates.len() < k {
        return Err(Error::InvalidArgument(format!(
            "need iterates 1..={k}, have {}",
            iterates.len()
        )));
    }
    let norm = 2.0 / (k as f64 * (k as f64 + 1.0));
    let mut xs = DVector::zeros(iterates[0].0.len());
    let mut ys = DVector::zeros(iterates[0].1.len());
    for (i, (x, y)) in iterates[..k].iter().enumerate() {
        let w = (i + 1) as f64 * norm;
        xs += x * w;
        ys += y * w;
    }
    Ok((xs, ys))
}

/// Runs LPD until the certified gap drops to `tol` or `cap` iterations pass.
/// Uses the constant schedule when both blocks are strongly convex, the growing
/// schedule with averaged output otherwise (transposing when only `x` is).
pub fn solve_to_tolerance(p: &BilinearProblem, tol: f64, cap: usize) -> Result<SaddleCertificate> {
    if p.mu_y() <= 0.0 && p.mu_x() > 0.0 {
        let c = solve_to_tolerance(&p.transposed()?, tol, cap)?;
        return Ok(SaddleCertificate {
            x: c.y,
            y: c.x,
            ..c
        });
    }
    let (schedule, averaged) = match schedule_scsc(p) {
        Ok(s) => (s, false),
        Err(_) => (schedule_csc(p)?, true),
    };
    let x0 = p.set_x.project(&DVector::zeros(p.dim_x()));
    let y0 = p.set_y.project(&DVector::zeros(p.dim_y()));
    let mut s = LpdState::new(p, &x0, &y0)?;
    let inner = (tol * 0.1).max(1e-15);
    let mut best: Option<SaddleCertificate> = None;
    while s.k < cap {
        s = lpd_step(&s, &schedule, p)?;
        if s.k % 100 == 0 || s.k == cap {
            let (x, y) = if averaged {
                (&s.x_avg, &s.y_avg)
            } else {
                (&s.x, &s.y)
            };
            if let Ok(g) = primal_dual_gap(p, x, y, inner) {
                let upper = g.upper().max(0.0);
                if best.as_ref().is_none_or(|b| upper < b.residual) {
                    best = Some(SaddleCertificate {
                        x: x.clone(),
                        y: y.clone(),
                        residual: upper,
                        exact: false,
                    });
                }
                if upper <= tol {
                    break;
                }
            }
        }
    }
    best.ok_or(Error::InnerUnbounded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lpd::schedule::{schedule_csc, Step};
    use crate::metrics::Silent;
    use crate::problem::{FeasibleSet, QuadraticFunction};
    use crate::reference::{BoxIndicator, L1Norm, ZeroProx};
    use nalgebra::DMatrix;

    fn unit_1d() -> BilinearProblem {
        BilinearProblem::quadratic(
            QuadraticFunction::isotropic(1, 1.0).unwrap(),
            QuadraticFunction::isotropic(1, 1.0).unwrap(),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap()
    }

    fn fixed(eta_x: f64, eta_y: f64, theta: f64) -> Schedule {
        Schedule::Constant(StepParams {
            eta_x: Step::finite(eta_x).unwrap(),
            eta_y: Step::finite(eta_y).unwrap(),
            eta_u: Step::INFINITE,
            eta_v: Step::INFINITE,
            theta,
        })
    }

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_vec(xs.to_vec())
    }

    #[test]
    fn hand_evaluated_first_step() {
        let p = unit_1d();
        let s0 = LpdState::new(&p, &v(&[1.0]), &v(&[1.0])).unwrap();
        let s1 = lpd_step(&s0, &fixed(0.5, 0.5, 0.0), &p).unwrap();
        assert!((s1.x[0] - 1.0 / 3.0).abs() < 1e-15);
        assert!((s1.y[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn saddle_is_a_fixed_point() {
        let p = unit_1d();
        let s0 = LpdState::new(&p, &v(&[0.0]), &v(&[0.0])).unwrap();
        let s1 = lpd_step(&s0, &schedule_scsc(&p).unwrap(), &p).unwrap();
        assert_eq!((s1.x[0], s1.y[0]), (0.0, 0.0));
    }

    #[test]
    fn oracle_counts() {
        let p = unit_1d();
        let s = run_lpd(
            &p,
            &schedule_scsc(&p).unwrap(),
            &v(&[1.0]),
            &v(&[-1.0]),
            37,
            &mut Silent,
        )
        .unwrap();
        assert_eq!((s.grad_calls_f, s.grad_calls_h), (39, 39));
    }

    #[test]
    fn zero_budget_rejected() {
        let p = unit_1d();
        let r = run_lpd(
            &p,
            &schedule_scsc(&p).unwrap(),
            &v(&[1.0]),
            &v(&[1.0]),
            0,
            &mut Silent,
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn runs_are_bitwise_deterministic() {
        let p = crate::instances::gen_quadratic_instance(&crate::instances::GeneratorConfig {
            d: 4,
            r: 1.7,
            seed: 5,
        })
        .unwrap();
        let sched = schedule_scsc(&p).unwrap();
        let x0 = DVector::from_fn(4, |i, _| i as f64 - 1.0);
        let a = run_lpd(&p, &sched, &x0, &x0, 50, &mut Silent).unwrap();
        let b = run_lpd(&p, &sched, &x0, &x0, 50, &mut Silent).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn divergence_is_reported() {
        let p = unit_1d();
        let huge = Schedule::Constant(StepParams {
            eta_x: Step::finite(1e300).unwrap(),
            eta_y: Step::finite(1e300).unwrap(),
            eta_u: Step::INFINITE,
            eta_v: Step::INFINITE,
            theta: 1e300,
        });
        let r = run_lpd(&p, &huge, &v(&[1.0]), &v(&[1.0]), 10, &mut Silent);
        assert!(matches!(r, Err(Error::NumericalDivergence { .. })));
    }

    #[test]
    fn first_csc_step_sets_average_to_iterate() {
        let p = unit_1d();
        let s0 = LpdState::new(&p, &v(&[0.4]), &v(&[-0.3])).unwrap();
        let s1 = lpd_step(&s0, &schedule_csc(&p).unwrap(), &p).unwrap();
        assert_eq!(s1.x_avg, s1.x);
        assert_eq!(s1.y_avg, s1.y);
    }

    #[test]
    fn csc_average_recursion_matches_weighted_sum() {
        let f = QuadraticFunction::new(
            DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]),
            v(&[0.2, -0.1]),
            0.0,
        )
        .unwrap();
        let h =
            QuadraticFunction::new(DMatrix::from_diagonal(&v(&[1.0, 3.0])), v(&[0.0, 0.5]), 0.0)
                .unwrap();
        let p =
            BilinearProblem::quadratic(f, h, DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]))
                .unwrap();
        let sched = schedule_csc(&p).unwrap();
        let mut iterates = Vec::new();
        let mut s = LpdState::new(&p, &v(&[1.0, -1.0]), &v(&[0.5, 0.5])).unwrap();
        for _ in 0..50 {
            s = lpd_step(&s, &sched, &p).unwrap();
            iterates.push((s.x.clone(), s.y.clone()));
        }
        let (xb, yb) = averaged_iterates(&iterates, 50).unwrap();
        assert!((xb - &s.x_avg).norm() <= 1e-10);
        assert!((yb - &s.y_avg).norm() <= 1e-10);
        let (x2, _) = averaged_iterates(&iterates, 2).unwrap();
        assert!((x2 - (&iterates[0].0 + &iterates[1].0 * 2.0) / 3.0).norm() < 1e-15);
        let (x1, _) = averaged_iterates(&iterates, 1).unwrap();
        assert_eq!(x1, iterates[0].0);
    }

    #[test]
    fn prox_step_with_zero_terms_is_bitwise_identical() {
        let p = unit_1d();
        let sched = schedule_scsc(&p).unwrap();
        let mut a = LpdState::new(&p, &v(&[1.0]), &v(&[0.3])).unwrap();
        let mut b = a.clone();
        for _ in 0..20 {
            a = lpd_step(&a, &sched, &p).unwrap();
            b = lpd_prox_step(&b, &sched, &p, &ZeroProx, &ZeroProx).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn prox_step_with_box_indicator_matches_projection() {
        let p = unit_1d();
        let lo = v(&[-0.2]);
        let hi = v(&[0.25]);
        let boxed = BilinearProblem::new(
            p.f.clone(),
            p.h.clone(),
            p.coupling.clone(),
            FeasibleSet::new_box(lo.clone(), hi.clone()).unwrap(),
            FeasibleSet::unconstrained(1),
        )
        .unwrap();
        let sched = schedule_scsc(&p).unwrap();
        let ind = BoxIndicator::new(lo, hi).unwrap();
        let mut a = LpdState::new(&boxed, &v(&[0.1]), &v(&[2.0])).unwrap();
        let mut b = a.clone();
        for _ in 0..20 {
            a = lpd_step(&a, &sched, &boxed).unwrap();
            b = lpd_prox_step(&b, &sched, &p, &ind, &ZeroProx).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn l1_prox_step_matches_grid_search() {
        let p = unit_1d();
        let nu = 0.3;
        let sched = fixed(0.5, 0.5, 0.0);
        let s0 = LpdState::new(&p, &v(&[0.8]), &v(&[0.1])).unwrap();
        let s1 = lpd_prox_step(&s0, &sched, &p, &L1Norm::new(nu), &ZeroProx).unwrap();
        // x-subproblem: <A y + ∇f̲, x> + (x - x₀)²/(2η) + μx²/2 + ν|x|
        let g = 0.1 + 0.0;
        let obj = |x: f64| g * x + (x - 0.8).powi(2) + 0.5 * x * x + nu * x.abs();
        let mut best = (f64::INFINITY, 0.0);
        let (lo, hi) = (-2.0f64, 2.0f64);
        let n = 4_000_001;
        for i in 0..n {
            let x = lo + (hi - lo) * i as f64 / (n - 1) as f64;
            let val = obj(x);
            if val < best.0 {
                best = (val, x);
            }
        }
        assert!(
            (s1.x[0] - best.1).abs() <= 1e-6,
            "{} vs {}",
            s1.x[0],
            best.1
        );
        assert!(obj(s1.x[0]) <= best.0 + 1e-8);
    }
}
