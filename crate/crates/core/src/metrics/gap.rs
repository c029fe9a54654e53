use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::{BilinearProblem, FeasibleSet};

const INNER_MAX_ITERS: usize = 2_000_000;

/// Approximate minimiser of a convex inner problem with a certified bound
/// on its suboptimality.
#[derive(Clone, Debug)]
pub struct InnerSolution {
    pub point: DVector<f64>,
    pub value: f64,
    /// Upper bound on `value - min`.
    pub bound: f64,
}

/// Projected accelerated gradient with adaptive restart.
///
/// The certificate at a trial point `x⁺ = P(y - ∇g(y)/L)` with gradient map
/// `G = L(y - x⁺)` is `‖G‖²/(2μ)` when `μ > 0`, otherwise
/// `‖G‖(‖G‖/L + diam)`.
pub fn minimize_convex<V, G>(
    value: V,
    grad: G,
    set: &FeasibleSet,
    smoothness: f64,
    strong_convexity: f64,
    start: &DVector<f64>,
    tol: f64,
) -> Result<InnerSolution>
where
    V: Fn(&DVector<f64>) -> f64,
    G: Fn(&DVector<f64>) -> DVector<f64>,
{
    let diam = set.diameter();
    if strong_convexity <= 0.0 && !diam.is_finite() {
        return Err(Error::InnerUnbounded);
    }
    if smoothness <= 0.0 {
        return minimize_linear(&value, &grad(start), set);
    }
    let l = smoothness;
    let certify = |gm: f64| -> f64 {
        let mut b = f64::INFINITY;
        if strong_convexity > 0.0 {
            b = gm * gm / (2.0 * strong_convexity);
        }
        if diam.is_finite() {
            b = b.min(gm * (gm / l + diam));
        }
        b
    };
    let mut x = set.project(start);
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut best: Option<InnerSolution> = None;
    for _ in 0..INNER_MAX_ITERS {
        let g = grad(&y);
        let x_new = set.project(&(&y - &g / l));
        let gmap = (&y - &x_new) * l;
        let bound = certify(gmap.norm());
        if best.as_ref().is_none_or(|b| bound < b.bound) {
            best = Some(InnerSolution {
                value: value(&x_new),
                point: x_new.clone(),
                bound,
            });
        }
        if bound <= tol {
            break;
        }
        if (&y - &x_new).dot(&(&x_new - &x)) > 0.0 {
            t = 1.0;
            y = x_new.clone();
        } else {
            let t_new = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
            y = &x_new + (&x_new - &x) * ((t - 1.0) / t_new);
            t = t_new;
        }
        x = x_new;
    }
    let sol = best.expect("at least one iteration");
    if !sol.value.is_finite() {
        return Err(Error::InnerUnbounded);
    }
    Ok(sol)
}

fn minimize_linear<V: Fn(&DVector<f64>) -> f64>(
    value: &V,
    g: &DVector<f64>,
    set: &FeasibleSet,
) -> Result<InnerSolution> {
    let point = match set {
        FeasibleSet::Unconstrained { .. } => {
            if g.norm() > 0.0 {
                return Err(Error::InnerUnbounded);
            }
            g.clone()
        }
        FeasibleSet::Box { lower, upper } => {
            DVector::from_fn(g.len(), |i, _| if g[i] > 0.0 { lower[i] } else { upper[i] })
        }
        FeasibleSet::Ball { center, radius } => {
            let n = g.norm();
            if n > 0.0 {
                center - g * (*radius / n)
            } else {
                center.clone()
            }
        }
    };
    Ok(InnerSolution {
        value: value(&point),
        point,
        bound: 0.0,
    })
}

/// Duality gap estimate: the true gap lies in `[value, value + band]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapEstimate {
    pub value: f64,
    pub band: f64,
}

impl GapEstimate {
    pub fn upper(&self) -> f64 {
        self.value + self.band
    }
}

/// Minimises `g(z) + <c, z>` over `set` for a block `g` of the problem.
fn inner_block(
    g: &crate::problem::SmoothFunction,
    c: &DVector<f64>,
    set: &FeasibleSet,
    start: &DVector<f64>,
    tol: f64,
) -> Result<InnerSolution> {
    if let (Some(q), true) = (g.as_quadratic(), set.is_unconstrained()) {
        if q.strong_convexity() > 0.0 {
            let rhs = -(q.linear() + c);
            let ch = q
                .hessian()
                .clone()
                .cholesky()
                .ok_or(Error::SingularSystem(f64::NAN))?;
            let z = ch.solve(&rhs);
            let value = q.value(&z) + c.dot(&z);
            return Ok(InnerSolution {
                point: z,
                value,
                bound: 0.0,
            });
        }
        // flat directions: bounded below only if the tilt lies in the range
        let rhs = -(q.linear() + c);
        let z = q.pinv() * &rhs;
        let resid = (q.hessian() * &z - &rhs).norm();
        if resid > 1e-9 * (1.0 + rhs.norm() + q.smoothness() * z.norm()) {
            return Err(Error::InnerUnbounded);
        }
        let value = q.value(&z) + c.dot(&z);
        return Ok(InnerSolution {
            point: z,
            value,
            bound: 0.0,
        });
    }
    minimize_convex(
        |z| g.value(z) + c.dot(z),
        |z| g.gradient(z) + c,
        set,
        g.smoothness(),
        g.strong_convexity(),
        start,
        tol,
    )
}

/// `max_{y∈Y} φ(x, y) - min_{x'∈X} φ(x', y)` with a certified error band.
pub fn primal_dual_gap(
    p: &BilinearProblem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    inner_tol: f64,
) -> Result<GapEstimate> {
    let ax = p.coupling.apply(x);
    let aty = p.coupling.apply_transpose(y);
    let over_y = inner_block(&p.h, &(-ax), &p.set_y, y, inner_tol)?;
    let over_x = inner_block(&p.f, &aty, &p.set_x, x, inner_tol)?;
    let value = p.f.value(x) - over_y.value - over_x.value + p.h.value(y);
    Ok(GapEstimate {
        value,
        band: over_x.bound + over_y.bound,
    })
}

/// Saddle point with the method and residual that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct SaddleCertificate {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub residual: f64,
    pub exact: bool,
}

/// Solves the stationarity system of an unconstrained quadratic problem.
pub fn solve_saddle_exact(p: &BilinearProblem) -> Result<SaddleCertificate> {
    let f = p.f.as_quadratic().ok_or(Error::NonQuadratic)?;
    let h = p.h.as_quadratic().ok_or(Error::NonQuadratic)?;
    if !p.is_unconstrained() {
        return Err(Error::Constrained);
    }
    let (n, m) = (p.dim_x(), p.dim_y());
    let a = p.coupling.matrix();
    let mut kkt = DMatrix::zeros(n + m, n + m);
    kkt.view_mut((0, 0), (n, n)).copy_from(f.hessian());
    kkt.view_mut((0, n), (n, m)).copy_from(&a.transpose());
    kkt.view_mut((n, 0), (m, n)).copy_from(&(-a));
    kkt.view_mut((n, n), (m, m)).copy_from(h.hessian());
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(&(-f.linear()));
    rhs.rows_mut(n, m).copy_from(&(-h.linear()));
    let lu = kkt.clone().lu();
    let mut z = lu.solve(&rhs).ok_or(Error::SingularSystem(f64::INFINITY))?;
    // one step of iterative refinement
    let r = &rhs - &kkt * &z;
    if let Some(dz) = lu.solve(&r) {
        z += dz;
    }
    let residual = (&rhs - &kkt * &z).norm();
    let scale = 1.0 + kkt.norm() * z.norm() + rhs.norm();
    if !residual.is_finite() || residual > 1e-10 * scale {
        return Err(Error::SingularSystem(residual));
    }
    Ok(SaddleCertificate {
        x: z.rows(0, n).into_owned(),
        y: z.rows(n, m).into_owned(),
        residual,
        exact: true,
    })
}

/// Exact solve when possible, otherwise a long high-accuracy LPD run.
pub fn solve_saddle(p: &BilinearProblem) -> Result<SaddleCertificate> {
    match solve_saddle_exact(p) {
        Ok(c) => Ok(c),
        Err(Error::NonQuadratic) | Err(Error::Constrained) => {
            crate::lpd::solve_to_tolerance(p, 1e-12, 1_000_000)
        }
        Err(e) => Err(e),
    }
}
