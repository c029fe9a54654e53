//! Problem description: smooth convex blocks, feasible sets and the
//! bilinear coupling of `min_x max_y f(x) + <y, A x> - h(y)`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg;

/// Relative threshold under which a smallest Hessian eigenvalue is read as zero.
const ZERO_CURVATURE_REL: f64 = 1e-12;

/// User-supplied first-order oracle.
pub trait Oracle: Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, x: &DVector<f64>) -> f64;
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;
}

/// `½ xᵀPx + qᵀx + c` with symmetric positive semidefinite `P`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadraticFunction {
    p: DMatrix<f64>,
    q: DVector<f64>,
    c: f64,
    lo: f64,
    hi: f64,
}

impl QuadraticFunction {
    pub fn new(p: DMatrix<f64>, q: DVector<f64>, c: f64) -> Result<Self> {
        if !p.is_square() {
            return Err(Error::DimensionMismatch {
                context: "quadratic matrix columns",
                expected: p.nrows(),
                got: p.ncols(),
            });
        }
        if q.len() != p.nrows() {
            return Err(Error::DimensionMismatch {
                context: "quadratic linear term",
                expected: p.nrows(),
                got: q.len(),
            });
        }
        let scale = p.amax().max(1.0);
        let asym = linalg::asymmetry(&p);
        if asym > 1e-10 * scale {
            return Err(Error::NotSymmetric(asym));
        }
        let p = (&p + p.transpose()) * 0.5;
        let (mut lo, hi) = linalg::symmetric_extremes(&p);
        let hi = hi.max(0.0);
        if lo < -1e-10 * scale {
            return Err(Error::NotPositiveSemidefinite(lo));
        }
        if lo <= ZERO_CURVATURE_REL * hi.max(f64::MIN_POSITIVE) {
            lo = 0.0;
        }
        Ok(QuadraticFunction { p, q, c, lo, hi })
    }

    /// `(ρ/2)‖x‖²` in dimension `d`.
    pub fn isotropic(d: usize, rho: f64) -> Result<Self> {
        Self::new(DMatrix::identity(d, d) * rho, DVector::zeros(d), 0.0)
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }
    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.p
    }
    pub fn linear(&self) -> &DVector<f64> {
        &self.q
    }
    pub fn constant(&self) -> f64 {
        self.c
    }
    /// Largest Hessian eigenvalue.
    pub fn smoothness(&self) -> f64 {
        self.hi
    }
    /// Smallest Hessian eigenvalue, clamped at zero.
    pub fn strong_convexity(&self) -> f64 {
        self.lo
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.p * x)) + self.q.dot(x) + self.c
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.p * x + &self.q
    }

    /// Adds `(weight/2)‖x - center‖²`.
    pub fn with_proximity(&self, weight: f64, center: &DVector<f64>) -> Result<Self> {
        let d = self.dim();
        let p = &self.p + DMatrix::identity(d, d) * weight;
        let q = &self.q - center * weight;
        let c = self.c + 0.5 * weight * center.norm_squared();
        Self::new(p, q, c)
    }

    /// `argmin_u  g(u) + ‖u - point‖² / (2 step)`.
    pub fn prox(&self, point: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
        let d = self.dim();
        let m = DMatrix::identity(d, d) + &self.p * step;
        let rhs = point - &self.q * step;
        m.cholesky()
            .map(|ch| ch.solve(&rhs))
            .ok_or(Error::SingularSystem(f64::NAN))
    }

    /// Conjugate value `sup_x <u, x> - g(x)` through the pseudo-inverse.
    /// Only meaningful when `u - q` lies in the range of `P`.
    pub fn conjugate_value(&self, u: &DVector<f64>) -> f64 {
        let s = u - &self.q;
        let w = self.pinv() * &s;
        0.5 * s.dot(&w) - self.c
    }

    /// A point of the conjugate subdifferential at `u`.
    pub fn conjugate_gradient(&self, u: &DVector<f64>) -> DVector<f64> {
        self.pinv() * (u - &self.q)
    }

    pub(crate) fn pinv(&self) -> DMatrix<f64> {
        // symmetric eigendecomposition; the SVD route loses accuracy on
        // rank-deficient input
        let tol = 1e-12 * self.hi.max(1e-300);
        let eig = SymmetricEigen::new(self.p.clone());
        let inv = eig
            .eigenvalues
            .map(|l| if l.abs() > tol { 1.0 / l } else { 0.0 });
        &eig.eigenvectors * DMatrix::from_diagonal(&inv) * eig.eigenvectors.transpose()
    }
}

/// Oracle-backed function plus `(weight/2)‖x - center‖²`.
struct WithProximity {
    base: Arc<dyn Oracle>,
    weight: f64,
    center: DVector<f64>,
}

impl Oracle for WithProximity {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn value(&self, x: &DVector<f64>) -> f64 {
        self.base.value(x) + 0.5 * self.weight * (x - &self.center).norm_squared()
    }
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        self.base.gradient(x) + (x - &self.center) * self.weight
    }
}

#[derive(Clone)]
enum Repr {
    Quadratic(Arc<QuadraticFunction>),
    Oracle(Arc<dyn Oracle>),
}

/// A convex, `L`-smooth, `μ`-strongly convex function (`μ` may be 0).
#[derive(Clone)]
pub struct SmoothFunction {
    repr: Repr,
    smoothness: f64,
    strong_convexity: f64,
}

impl fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFunction")
            .field("dim", &self.dim())
            .field("quadratic", &self.as_quadratic().is_some())
            .field("smoothness", &self.smoothness)
            .field("strong_convexity", &self.strong_convexity)
            .finish()
    }
}

impl From<QuadraticFunction> for SmoothFunction {
    fn from(q: QuadraticFunction) -> Self {
        SmoothFunction {
            smoothness: q.smoothness(),
            strong_convexity: q.strong_convexity(),
            repr: Repr::Quadratic(Arc::new(q)),
        }
    }
}

impl SmoothFunction {
    /// Wraps an oracle with caller-certified constants.
    pub fn from_oracle(
        oracle: Arc<dyn Oracle>,
        smoothness: f64,
        strong_convexity: f64,
    ) -> Result<Self> {
        if !(smoothness.is_finite() && strong_convexity.is_finite())
            || strong_convexity < 0.0
            || smoothness < strong_convexity
        {
            return Err(Error::InvalidArgument(format!(
                "need 0 <= mu <= L, got mu = {strong_convexity}, L = {smoothness}"
            )));
        }
        Ok(SmoothFunction {
            repr: Repr::Oracle(oracle),
            smoothness,
            strong_convexity,
        })
    }

    pub fn dim(&self) -> usize {
        match &self.repr {
            Repr::Quadratic(q) => q.dim(),
            Repr::Oracle(o) => o.dim(),
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match &self.repr {
            Repr::Quadratic(q) => q.value(x),
            Repr::Oracle(o) => o.value(x),
        }
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        match &self.repr {
            Repr::Quadratic(q) => q.gradient(x),
            Repr::Oracle(o) => o.gradient(x),
        }
    }

    pub fn smoothness(&self) -> f64 {
        self.smoothness
    }

    pub fn strong_convexity(&self) -> f64 {
        self.strong_convexity
    }

    pub fn as_quadratic(&self) -> Option<&QuadraticFunction> {
        match &self.repr {
            Repr::Quadratic(q) => Some(q),
            Repr::Oracle(_) => None,
        }
    }

    /// Adds `(weight/2)‖x - center‖²`, shifting both constants by `weight`.
    pub fn with_proximity(&self, weight: f64, center: &DVector<f64>) -> Result<Self> {
        if center.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                context: "proximity center",
                expected: self.dim(),
                got: center.len(),
            });
        }
        match &self.repr {
            Repr::Quadratic(q) => {
                let shifted = q.with_proximity(weight, center)?;
                let mut out = SmoothFunction::from(shifted);
                // keep the exact shift rather than re-derived eigenvalues
                out.smoothness = (self.smoothness + weight).max(0.0);
                out.strong_convexity = (self.strong_convexity + weight).max(0.0);
                Ok(out)
            }
            Repr::Oracle(o) => Ok(SmoothFunction {
                repr: Repr::Oracle(Arc::new(WithProximity {
                    base: o.clone(),
                    weight,
                    center: center.clone(),
                })),
                smoothness: (self.smoothness + weight).max(0.0),
                strong_convexity: (self.strong_convexity + weight).max(0.0),
            }),
        }
    }
}

/// `g - (μ/2)‖·‖²`: convex and `(L - μ)`-smooth, gradient `∇g(x) - μx`.
pub fn subtract_strong_convexity(g: &SmoothFunction) -> SmoothFunction {
    let mu = g.strong_convexity();
    let zero = DVector::zeros(g.dim());
    let mut out = g
        .with_proximity(-mu, &zero)
        .expect("center has the function's dimension");
    out.smoothness = g.smoothness() - mu;
    out.strong_convexity = 0.0;
    out
}

/// Closed convex feasible set with a cheap Euclidean projection.
#[derive(Clone, Debug, PartialEq)]
pub enum FeasibleSet {
    Unconstrained {
        dim: usize,
    },
    Box {
        lower: DVector<f64>,
        upper: DVector<f64>,
    },
    Ball {
        center: DVector<f64>,
        radius: f64,
    },
}

impl FeasibleSet {
    pub fn unconstrained(dim: usize) -> Self {
        FeasibleSet::Unconstrained { dim }
    }

    pub fn cube(dim: usize, half_width: f64) -> Self {
        FeasibleSet::Box {
            lower: DVector::from_element(dim, -half_width),
            upper: DVector::from_element(dim, half_width),
        }
    }

    pub fn new_box(lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                context: "box bounds",
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(upper.iter()).any(|(l, u)| !(l <= u)) {
            return Err(Error::InvalidArgument("box needs lower <= upper".into()));
        }
        Ok(FeasibleSet::Box { lower, upper })
    }

    pub fn new_ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || !radius.is_finite() {
            return Err(Error::InvalidArgument(format!("bad ball radius {radius}")));
        }
        Ok(FeasibleSet::Ball { center, radius })
    }

    pub fn dim(&self) -> usize {
        match self {
            FeasibleSet::Unconstrained { dim } => *dim,
            FeasibleSet::Box { lower, .. } => lower.len(),
            FeasibleSet::Ball { center, .. } => center.len(),
        }
    }

    pub fn is_unconstrained(&self) -> bool {
        matches!(self, FeasibleSet::Unconstrained { .. })
    }

    pub fn project(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            FeasibleSet::Unconstrained { .. } => x.clone(),
            FeasibleSet::Box { lower, upper } => {
                DVector::from_fn(x.len(), |i, _| x[i].max(lower[i]).min(upper[i]))
            }
            FeasibleSet::Ball { center, radius } => {
                let d = x - center;
                let n = d.norm();
                if n <= *radius {
                    x.clone()
                } else {
                    center + d * (*radius / n)
                }
            }
        }
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        match self {
            FeasibleSet::Unconstrained { dim } => x.len() == *dim,
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol),
            FeasibleSet::Ball { center, radius } => (x - center).norm() <= radius + tol,
        }
    }

    /// Largest distance between two feasible points.
    pub fn diameter(&self) -> f64 {
        match self {
            FeasibleSet::Unconstrained { .. } => f64::INFINITY,
            FeasibleSet::Box { lower, upper } => (upper - lower).norm(),
            FeasibleSet::Ball { radius, .. } => 2.0 * radius,
        }
    }

    /// Largest distance from `x` to a feasible point.
    pub fn max_distance_from(&self, x: &DVector<f64>) -> f64 {
        match self {
            FeasibleSet::Unconstrained { .. } => f64::INFINITY,
            FeasibleSet::Box { lower, upper } => x
                .iter()
                .zip(lower.iter().zip(upper.iter()))
                .map(|(v, (l, u))| {
                    let far = (v - l).abs().max((u - v).abs());
                    far * far
                })
                .sum::<f64>()
                .sqrt(),
            FeasibleSet::Ball { center, radius } => (x - center).norm() + radius,
        }
    }

    fn scaled(&self, s: f64) -> Self {
        match self {
            FeasibleSet::Unconstrained { dim } => FeasibleSet::Unconstrained { dim: *dim },
            FeasibleSet::Box { lower, upper } => FeasibleSet::Box {
                lower: lower * s,
                upper: upper * s,
            },
            FeasibleSet::Ball { center, radius } => FeasibleSet::Ball {
                center: center * s,
                radius: radius * s,
            },
        }
    }
}

/// Coupling matrix with its spectral norm cached at construction.
#[derive(Clone, Debug, PartialEq)]
pub struct Coupling {
    matrix: DMatrix<f64>,
    norm: f64,
}

impl Coupling {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "coupling has non-finite entries".into(),
            ));
        }
        let norm = linalg::operator_norm(&matrix);
        Ok(Coupling { matrix, norm })
    }
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
    pub fn norm(&self) -> f64 {
        self.norm
    }
    /// `A x`
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.matrix * x
    }
    /// `Aᵀ y`
    pub fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        self.matrix.tr_mul(y)
    }
}

/// Condition numbers of a bilinearly coupled problem.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConditionNumbers {
    pub kappa_x: f64,
    pub kappa_y: f64,
    pub kappa_xy: f64,
    /// `√(κ_x-1) + 2κ_xy + √(κ_y-1)`
    pub kappa: f64,
}

impl ConditionNumbers {
    pub fn from_constants(l_x: f64, mu_x: f64, l_y: f64, mu_y: f64, op_norm: f64) -> Result<Self> {
        if !(mu_x > 0.0) {
            return Err(Error::NotStronglyConvex(mu_x));
        }
        if !(mu_y > 0.0) {
            return Err(Error::NotStronglyConcave(mu_y));
        }
        let kappa_x = (l_x / mu_x).max(1.0);
        let kappa_y = (l_y / mu_y).max(1.0);
        let kappa_xy = op_norm / (mu_x * mu_y).sqrt();
        let all = [kappa_x, kappa_y, kappa_xy];
        if all.iter().any(|k| !k.is_finite()) {
            return Err(Error::IllConditioned(format!(
                "non-finite condition numbers {all:?}"
            )));
        }
        let kappa = (kappa_x - 1.0).sqrt() + 2.0 * kappa_xy + (kappa_y - 1.0).sqrt();
        Ok(ConditionNumbers {
            kappa_x,
            kappa_y,
            kappa_xy,
            kappa,
        })
    }
}

/// `min_{x∈X} max_{y∈Y} f(x) + <y, A x> - h(y)`.
#[derive(Clone, Debug)]
pub struct BilinearProblem {
    pub f: SmoothFunction,
    pub h: SmoothFunction,
    pub coupling: Coupling,
    pub set_x: FeasibleSet,
    pub set_y: FeasibleSet,
}

impl BilinearProblem {
    pub fn new(
        f: SmoothFunction,
        h: SmoothFunction,
        coupling: Coupling,
        set_x: FeasibleSet,
        set_y: FeasibleSet,
    ) -> Result<Self> {
        let (m, n) = coupling.matrix().shape();
        let checks = [
            ("f dimension", n, f.dim()),
            ("h dimension", m, h.dim()),
            ("X dimension", n, set_x.dim()),
            ("Y dimension", m, set_y.dim()),
        ];
        for (context, expected, got) in checks {
            if expected != got {
                return Err(Error::DimensionMismatch {
                    context,
                    expected,
                    got,
                });
            }
        }
        Ok(BilinearProblem {
            f,
            h,
            coupling,
            set_x,
            set_y,
        })
    }

    /// Unconstrained problem from two quadratics and a matrix.
    pub fn quadratic(f: QuadraticFunction, h: QuadraticFunction, a: DMatrix<f64>) -> Result<Self> {
        let (nx, ny) = (f.dim(), h.dim());
        Self::new(
            f.into(),
            h.into(),
            Coupling::new(a)?,
            FeasibleSet::unconstrained(nx),
            FeasibleSet::unconstrained(ny),
        )
    }

    pub fn dim_x(&self) -> usize {
        self.set_x.dim()
    }
    pub fn dim_y(&self) -> usize {
        self.set_y.dim()
    }
    pub fn op_norm(&self) -> f64 {
        self.coupling.norm()
    }
    pub fn l_x(&self) -> f64 {
        self.f.smoothness()
    }
    pub fn mu_x(&self) -> f64 {
        self.f.strong_convexity()
    }
    pub fn l_y(&self) -> f64 {
        self.h.smoothness()
    }
    pub fn mu_y(&self) -> f64 {
        self.h.strong_convexity()
    }

    pub fn is_unconstrained(&self) -> bool {
        self.set_x.is_unconstrained() && self.set_y.is_unconstrained()
    }

    /// `φ(x, y)`
    pub fn objective(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        self.f.value(x) + y.dot(&self.coupling.apply(x)) - self.h.value(y)
    }

    pub fn condition_numbers(&self) -> Result<ConditionNumbers> {
        ConditionNumbers::from_constants(
            self.l_x(),
            self.mu_x(),
            self.l_y(),
            self.mu_y(),
            self.op_norm(),
        )
    }

    /// Swaps the roles of the blocks: `min_y max_x h(y) + <x, -Aᵀ y> - f(x)`.
    /// Saddle points and duality gaps carry over with coordinates swapped.
    pub fn transposed(&self) -> Result<Self> {
        Self::new(
            self.h.clone(),
            self.f.clone(),
            Coupling::new(-self.coupling.matrix().transpose())?,
            self.set_y.clone(),
            self.set_x.clone(),
        )
    }

    /// Same problem in coordinates `x' = sx·x`, `y' = sy·y`.
    /// Only quadratic blocks are supported.
    pub fn rescaled(&self, sx: f64, sy: f64) -> Result<Self> {
        let f = self.f.as_quadratic().ok_or(Error::NonQuadratic)?;
        let h = self.h.as_quadratic().ok_or(Error::NonQuadratic)?;
        let f2 = QuadraticFunction::new(f.hessian() / (sx * sx), f.linear() / sx, f.constant())?;
        let h2 = QuadraticFunction::new(h.hessian() / (sy * sy), h.linear() / sy, h.constant())?;
        Self::new(
            f2.into(),
            h2.into(),
            Coupling::new(self.coupling.matrix() / (sx * sy))?,
            self.set_x.scaled(sx),
            self.set_y.scaled(sy),
        )
    }
}
