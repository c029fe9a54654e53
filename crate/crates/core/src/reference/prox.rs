use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::QuadraticFunction;

/// `apply(v, t) = argmin_u F(u) + ‖u - v‖²/(2t)`.
pub trait ProxOperator: Send + Sync {
    fn apply(&self, point: &DVector<f64>, step: f64) -> Result<DVector<f64>>;
}

/// `F = 0`.
pub struct ZeroProx;

impl ProxOperator for ZeroProx {
    fn apply(&self, point: &DVector<f64>, _step: f64) -> Result<DVector<f64>> {
        Ok(point.clone())
    }
}

/// Indicator of a box.
pub struct BoxIndicator {
    lower: DVector<f64>,
    upper: DVector<f64>,
}

impl BoxIndicator {
    pub fn new(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                context: "box bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        Ok(BoxIndicator { lower, upper })
    }
}

impl ProxOperator for BoxIndicator {
    fn apply(&self, point: &DVector<f64>, _step: f64) -> Result<DVector<f64>> {
        Ok(DVector::from_fn(point.len(), |i, _| {
            point[i].max(self.lower[i]).min(self.upper[i])
        }))
    }
}

/// `ν‖u‖₁`, soft thresholding.
pub struct L1Norm {
    nu: f64,
}

impl L1Norm {
    pub fn new(nu: f64) -> Self {
        L1Norm { nu }
    }
}

impl ProxOperator for L1Norm {
    fn apply(&self, point: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
        let t = self.nu * step;
        Ok(point.map(|v| v.signum() * (v.abs() - t).max(0.0)))
    }
}

/// Quadratic `F`, prox by a Cholesky solve.
pub struct QuadraticProx(pub QuadraticFunction);

impl ProxOperator for QuadraticProx {
    fn apply(&self, point: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
        self.0.prox(point, step)
    }
}

/// `F = s·g*` for a quadratic `g` with positive definite Hessian, via Moreau:
/// `prox_{t s g*}(v) = v - t s · prox_{g/(t s)}(v/(t s))`.
pub struct ScaledConjugateProx {
    g: QuadraticFunction,
    scale: f64,
}

impl ScaledConjugateProx {
    pub fn new(g: QuadraticFunction, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::InvalidArgument(
                "conjugate scale must be positive".into(),
            ));
        }
        Ok(ScaledConjugateProx { g, scale })
    }
}

impl ProxOperator for ScaledConjugateProx {
    fn apply(&self, point: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
        // prox of s g* with step t equals prox of g* with step t s
        let ts = step * self.scale;
        let inner = self.g.prox(&(point / ts), 1.0 / ts)?;
        Ok(point - inner * ts)
    }
}
