//! Single-loop competitors driven by the monotone saddle operator.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::all_finite;
use crate::metrics::{Flow, IterateView, Observer};
use crate::problem::BilinearProblem;

/// `F(x, y) = (∇f(x) + Aᵀy, ∇h(y) - Ax)` with the certificate
/// `max(L_x, L_y) + ‖A‖`.
#[derive(Clone, Copy, Debug)]
pub struct VectorField<'a> {
    p: &'a BilinearProblem,
}

impl<'a> VectorField<'a> {
    pub fn new(p: &'a BilinearProblem) -> Self {
        VectorField { p }
    }

    pub fn apply(&self, x: &DVector<f64>, y: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let gx = self.p.f.gradient(x) + self.p.coupling.apply_transpose(y);
        let gy = self.p.h.gradient(y) - self.p.coupling.apply(x);
        (gx, gy)
    }

    pub fn lipschitz(&self) -> f64 {
        self.p.l_x().max(self.p.l_y()) + self.p.op_norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    Gda,
    Mp,
    MpBalanced,
    Ogda,
}

/// Per-block step sizes recorded alongside every run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub kind: BaselineKind,
    pub eta_x: f64,
    pub eta_y: f64,
}

impl BaselineConfig {
    pub fn uniform(kind: BaselineKind, eta: f64) -> Self {
        BaselineConfig {
            kind,
            eta_x: eta,
            eta_y: eta,
        }
    }
}

/// Conservative default steps: GDA `min(μ)/L_F²`, MP `1/L_F`, OGDA
/// `1/(4 L_F)`, balanced MP `1/(μ_x κ_bal)` and `1/(μ_y κ_bal)`.
pub fn default_config(kind: BaselineKind, p: &BilinearProblem) -> Result<BaselineConfig> {
    let lf = VectorField::new(p).lipschitz();
    if !(lf > 0.0) {
        return Err(Error::InvalidArgument("zero operator".into()));
    }
    Ok(match kind {
        BaselineKind::Gda => {
            let mu = p.mu_x().min(p.mu_y());
            if !(mu > 0.0) {
                return Err(if p.mu_x() <= 0.0 {
                    Error::NotStronglyConvex(p.mu_x())
                } else {
                    Error::NotStronglyConcave(p.mu_y())
                });
            }
            BaselineConfig::uniform(kind, mu / (lf * lf))
        }
        BaselineKind::Mp => BaselineConfig::uniform(kind, 1.0 / lf),
        BaselineKind::Ogda => BaselineConfig::uniform(kind, 1.0 / (4.0 * lf)),
        BaselineKind::MpBalanced => mp_balanced(p)?,
    })
}

/// `max(L_x/μ_x, ‖A‖/√(μ_x μ_y), L_y/μ_y)`
pub fn balanced_kappa(p: &BilinearProblem) -> Result<f64> {
    let (mx, my) = (p.mu_x(), p.mu_y());
    if !(mx > 0.0) {
        return Err(Error::NotStronglyConvex(mx));
    }
    if !(my > 0.0) {
        return Err(Error::NotStronglyConcave(my));
    }
    Ok((p.l_x() / mx)
        .max(p.op_norm() / (mx * my).sqrt())
        .max(p.l_y() / my))
}

/// Extragradient in the coordinates `√μ_x x`, `√μ_y y` with step `1/κ_bal`,
/// written as per-block steps in the original coordinates.
pub fn mp_balanced(p: &BilinearProblem) -> Result<BaselineConfig> {
    let kb = balanced_kappa(p)?;
    Ok(BaselineConfig {
        kind: BaselineKind::MpBalanced,
        eta_x: 1.0 / (p.mu_x() * kb),
        eta_y: 1.0 / (p.mu_y() * kb),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaselineState {
    pub k: usize,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    /// Operator at the current point (OGDA only).
    pub field: Option<(DVector<f64>, DVector<f64>)>,
    /// Operator at the previous point (OGDA only).
    pub field_prev: Option<(DVector<f64>, DVector<f64>)>,
    /// Operator evaluations; each costs one gradient of `f` and one of `h`.
    pub evaluations: usize,
}

impl BaselineState {
    pub fn new(p: &BilinearProblem, x0: &DVector<f64>, y0: &DVector<f64>) -> Self {
        BaselineState {
            k: 0,
            x: p.set_x.project(x0),
            y: p.set_y.project(y0),
            field: None,
            field_prev: None,
            evaluations: 0,
        }
    }
}

fn descend(
    p: &BilinearProblem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    g: &(DVector<f64>, DVector<f64>),
    cfg: &BaselineConfig,
) -> (DVector<f64>, DVector<f64>) {
    (
        p.set_x.project(&(x - &g.0 * cfg.eta_x)),
        p.set_y.project(&(y - &g.1 * cfg.eta_y)),
    )
}

fn finish(
    s: &BaselineState,
    x: DVector<f64>,
    y: DVector<f64>,
    evals: usize,
) -> Result<BaselineState> {
    let k = s.k + 1;
    if !(all_finite(&x) && all_finite(&y)) {
        return Err(Error::NumericalDivergence { iteration: k });
    }
    Ok(BaselineState {
        k,
        x,
        y,
        field: None,
        field_prev: None,
        evaluations: s.evaluations + evals,
    })
}

/// `z⁺ = P(z - ηF(z))`
pub fn gda_step(
    s: &BaselineState,
    cfg: &BaselineConfig,
    p: &BilinearProblem,
) -> Result<BaselineState> {
    let g = VectorField::new(p).apply(&s.x, &s.y);
    let (x, y) = descend(p, &s.x, &s.y, &g, cfg);
    finish(s, x, y, 1)
}

/// Extragradient: a projected half step, then a full step from `z` using
/// the operator at the half point.
pub fn mp_step(
    s: &BaselineState,
    cfg: &BaselineConfig,
    p: &BilinearProblem,
) -> Result<BaselineState> {
    let field = VectorField::new(p);
    let g = field.apply(&s.x, &s.y);
    let (xh, yh) = descend(p, &s.x, &s.y, &g, cfg);
    let gh = field.apply(&xh, &yh);
    let (x, y) = descend(p, &s.x, &s.y, &gh, cfg);
    finish(s, x, y, 2)
}

/// `z⁺ = P(z - 2ηF(z) + ηF_prev)`; the first call seeds `F_prev = F(z₀)`.
pub fn ogda_step(
    s: &BaselineState,
    cfg: &BaselineConfig,
    p: &BilinearProblem,
) -> Result<BaselineState> {
    let field = VectorField::new(p);
    let mut evals = 0;
    let cur = match &s.field {
        Some(g) => g.clone(),
        None => {
            evals += 1;
            field.apply(&s.x, &s.y)
        }
    };
    let prev = s.field_prev.clone().unwrap_or_else(|| cur.clone());
    let comb = (&cur.0 * 2.0 - &prev.0, &cur.1 * 2.0 - &prev.1);
    let (x, y) = descend(p, &s.x, &s.y, &comb, cfg);
    let next = field.apply(&x, &y);
    let mut out = finish(s, x, y, evals + 1)?;
    out.field = Some(next);
    out.field_prev = Some(cur);
    Ok(out)
}

pub fn baseline_step(
    s: &BaselineState,
    cfg: &BaselineConfig,
    p: &BilinearProblem,
) -> Result<BaselineState> {
    match cfg.kind {
        BaselineKind::Gda => gda_step(s, cfg, p),
        BaselineKind::Mp | BaselineKind::MpBalanced => mp_step(s, cfg, p),
        BaselineKind::Ogda => ogda_step(s, cfg, p),
    }
}

pub fn run_baseline(
    p: &BilinearProblem,
    cfg: &BaselineConfig,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    iters: usize,
    observer: &mut dyn Observer,
) -> Result<BaselineState> {
    let mut s = BaselineState::new(p, x0, y0);
    if cfg.kind == BaselineKind::Ogda {
        s.field = Some(VectorField::new(p).apply(&s.x, &s.y));
        s.evaluations = 1;
    }
    fn view(s: &BaselineState, is_final: bool) -> IterateView<'_> {
        IterateView {
            k: s.k,
            x: &s.x,
            y: &s.y,
            x_avg: None,
            y_avg: None,
            grad_calls_f: s.evaluations,
            grad_calls_h: s.evaluations,
            is_final,
        }
    }
    if observer.observe(&view(&s, iters == 0)) == Flow::Stop {
        return Ok(s);
    }
    for _ in 0..iters {
        s = baseline_step(&s, cfg, p)?;
        if observer.observe(&view(&s, s.k == iters)) == Flow::Stop {
            break;
        }
    }
    Ok(s)
}
