use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::lpd::Step;
use crate::problem::{QuadraticFunction, SmoothFunction};

/// A quadratic `g̲ = g - (μ/2)‖·‖²` with its conjugate.
///
/// `P̲` is singular whenever `μ` is the smallest curvature, so dual points are
/// carried through primal preimages: `u = ∇g̲(w) = P̲w + q`.
#[derive(Clone, Debug)]
pub struct ConjugatePair {
    base: QuadraticFunction,
    hessian: DMatrix<f64>,
    linear: DVector<f64>,
}

impl ConjugatePair {
    pub fn from_block(g: &SmoothFunction) -> Result<Self> {
        let q = g.as_quadratic().ok_or(Error::NonQuadratic)?;
        let d = q.dim();
        let hessian = q.hessian() - DMatrix::identity(d, d) * g.strong_convexity();
        let hessian = (&hessian + hessian.transpose()) * 0.5;
        let base = QuadraticFunction::new(hessian.clone(), q.linear().clone(), q.constant())?;
        Ok(ConjugatePair {
            base,
            linear: q.linear().clone(),
            hessian,
        })
    }

    pub fn base(&self) -> &QuadraticFunction {
        &self.base
    }

    pub fn conjugate_value(&self, u: &DVector<f64>) -> f64 {
        self.base.conjugate_value(u)
    }

    pub fn conjugate_gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        self.base.conjugate_gradient(u)
    }

    /// `P̲w + q`
    pub fn dual_point(&self, w: &DVector<f64>) -> DVector<f64> {
        &self.hessian * w + &self.linear
    }

    /// Preimage of `argmin_u -<x, u> + g̲*(u) + V(u_k, u)/η` where `V` is the
    /// Bregman divergence of `g̲*` and `u_k = P̲ anchor + q`.
    ///
    /// Stationarity reads `P̲((1 + 1/η)w - x - anchor/η) = 0`, solved by
    /// `w = (anchor + η x)/(1 + η)`.
    pub fn bregman_prox(&self, anchor: &DVector<f64>, x: &DVector<f64>, eta: Step) -> DVector<f64> {
        if eta.is_infinite() {
            x.clone()
        } else {
            let e = eta.eta();
            (anchor + x * e) / (1.0 + e)
        }
    }
}
