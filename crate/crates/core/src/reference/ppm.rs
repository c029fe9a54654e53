use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::all_finite;
use crate::metrics::{Flow, IterateView, Observer};
use crate::problem::BilinearProblem;

/// One exact proximal-point step on an unconstrained quadratic problem:
/// `x₁` and `y₁` solve the coupled implicit system jointly.
pub fn ppm_step_quadratic(
    x: &DVector<f64>,
    y: &DVector<f64>,
    eta_x: f64,
    eta_y: f64,
    p: &BilinearProblem,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let f = p.f.as_quadratic().ok_or(Error::NonQuadratic)?;
    let h = p.h.as_quadratic().ok_or(Error::NonQuadratic)?;
    if !p.is_unconstrained() {
        return Err(Error::Constrained);
    }
    if !(eta_x > 0.0 && eta_y > 0.0) {
        return Err(Error::InvalidArgument(
            "proximal steps must be positive".into(),
        ));
    }
    let (n, m) = (p.dim_x(), p.dim_y());
    let a = p.coupling.matrix();
    let mut sys = DMatrix::zeros(n + m, n + m);
    sys.view_mut((0, 0), (n, n))
        .copy_from(&(f.hessian() + DMatrix::identity(n, n) / eta_x));
    sys.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    sys.view_mut((n, 0), (m, n)).copy_from(&(-a));
    sys.view_mut((n, n), (m, m))
        .copy_from(&(h.hessian() + DMatrix::identity(m, m) / eta_y));
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(x / eta_x - f.linear()));
    rhs.rows_mut(n, m).copy_from(&(y / eta_y - h.linear()));
    let z = sys
        .lu()
        .solve(&rhs)
        .ok_or(Error::SingularSystem(f64::INFINITY))?;
    let (x1, y1) = (z.rows(0, n).into_owned(), z.rows(n, m).into_owned());
    if !(all_finite(&x1) && all_finite(&y1)) {
        return Err(Error::NumericalDivergence { iteration: 1 });
    }
    Ok((x1, y1))
}

pub fn run_ppm(
    p: &BilinearProblem,
    eta_x: f64,
    eta_y: f64,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    iters: usize,
    observer: &mut dyn Observer,
) -> Result<(DVector<f64>, DVector<f64>)> {
    let (mut x, mut y) = (x0.clone(), y0.clone());
    fn view<'a>(
        k: usize,
        x: &'a DVector<f64>,
        y: &'a DVector<f64>,
        is_final: bool,
    ) -> IterateView<'a> {
        IterateView {
            k,
            x,
            y,
            x_avg: None,
            y_avg: None,
            grad_calls_f: 0,
            grad_calls_h: 0,
            is_final,
        }
    }
    if observer.observe(&view(0, &x, &y, iters == 0)) == Flow::Stop {
        return Ok((x, y));
    }
    for k in 1..=iters {
        (x, y) = ppm_step_quadratic(&x, &y, eta_x, eta_y, p)?;
        if observer.observe(&view(k, &x, &y, k == iters)) == Flow::Stop {
            break;
        }
    }
    Ok((x, y))
}

/// `2 exp(-K/(1+κ)) (½‖x*-x₀‖²/η_x + ½‖y*-y₀‖²/η_y)`, bounding
/// `‖x*-x_K‖²/η_x + ‖y*-y_K‖²/η_y`.
pub fn proximal_distance_bound(
    eta_x: f64,
    eta_y: f64,
    kappa: f64,
    k: usize,
    dist_x0_sq: f64,
    dist_y0_sq: f64,
) -> f64 {
    2.0 * (-(k as f64) / (1.0 + kappa)).exp()
        * (0.5 * dist_x0_sq / eta_x + 0.5 * dist_y0_sq / eta_y)
}

/// `1/min(μ_x η_x, μ_y η_y)`
pub fn ppm_kappa(p: &BilinearProblem, eta_x: f64, eta_y: f64) -> f64 {
    1.0 / (p.mu_x() * eta_x).min(p.mu_y() * eta_y)
}
