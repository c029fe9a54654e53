use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::problem::BilinearProblem;

/// Step size stored by its inverse; an inverse of zero is the `η = +∞` limit.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "Option<f64>", try_from = "Option<f64>")]
pub struct Step {
    inv: f64,
}

impl Step {
    pub const INFINITE: Step = Step { inv: 0.0 };

    pub fn finite(eta: f64) -> Result<Step> {
        if !(eta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {eta}"
            )));
        }
        Ok(Step { inv: 1.0 / eta })
    }

    /// From `1/η`; zero gives the infinite step.
    pub fn from_inverse(inv: f64) -> Step {
        debug_assert!(inv >= 0.0 && inv.is_finite());
        Step { inv }
    }

    pub fn inverse(&self) -> f64 {
        self.inv
    }

    pub fn eta(&self) -> f64 {
        if self.inv == 0.0 {
            f64::INFINITY
        } else {
            1.0 / self.inv
        }
    }

    pub fn is_infinite(&self) -> bool {
        self.inv == 0.0
    }

    pub fn scaled(&self, factor: f64) -> Step {
        Step {
            inv: self.inv / factor,
        }
    }
}

impl From<Step> for Option<f64> {
    fn from(s: Step) -> Self {
        (!s.is_infinite()).then(|| s.eta())
    }
}

impl TryFrom<Option<f64>> for Step {
    type Error = Error;
    fn try_from(v: Option<f64>) -> Result<Step> {
        match v {
            None => Ok(Step::INFINITE),
            Some(eta) if eta.is_infinite() && eta > 0.0 => Ok(Step::INFINITE),
            Some(eta) => Step::finite(eta),
        }
    }
}

/// Step sizes and extrapolation weight for one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub eta_x: Step,
    pub eta_y: Step,
    pub eta_u: Step,
    pub eta_v: Step,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Strongly convex in `x`, strongly concave in `y`.
    StronglyConvex,
    /// Merely convex in `x`, strongly concave in `y`.
    ConvexStronglyConcave,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Schedule {
    /// Iteration-invariant steps.
    Constant(StepParams),
    /// `1/η_x = (2L_x + 16‖A‖²/μ_y)/(k+1)`, `1/η_y = 2(L_y-μ_y)/(k+1) + kμ_y/2`,
    /// `η_u = η_v = 2/k`, `θ = k/(k+1)`.
    Growing {
        l_x: f64,
        l_y: f64,
        mu_y: f64,
        op_norm: f64,
    },
}

impl Schedule {
    pub fn at(&self, k: usize) -> StepParams {
        match *self {
            Schedule::Constant(p) => p,
            Schedule::Growing {
                l_x,
                l_y,
                mu_y,
                op_norm,
            } => {
                let kf = k as f64;
                let inv_x = (2.0 * l_x + 16.0 * op_norm * op_norm / mu_y) / (kf + 1.0);
                let inv_y = 2.0 * (l_y - mu_y).max(0.0) / (kf + 1.0) + kf * mu_y / 2.0;
                let inv_avg = kf / 2.0;
                StepParams {
                    eta_x: Step::from_inverse(inv_x),
                    eta_y: Step::from_inverse(inv_y),
                    eta_u: Step::from_inverse(inv_avg),
                    eta_v: Step::from_inverse(inv_avg),
                    theta: kf / (kf + 1.0),
                }
            }
        }
    }

    pub fn regime(&self) -> Regime {
        match self {
            Schedule::Constant(_) => Regime::StronglyConvex,
            Schedule::Growing { .. } => Regime::ConvexStronglyConcave,
        }
    }
}

/// Constant steps for the strongly-convex-strongly-concave case.
pub fn schedule_scsc(p: &BilinearProblem) -> Result<Schedule> {
    let c = p.condition_numbers()?;
    let (sx, sy) = ((c.kappa_x - 1.0).sqrt(), (c.kappa_y - 1.0).sqrt());
    Ok(Schedule::Constant(StepParams {
        eta_x: Step::from_inverse(p.mu_x() * (sx + 2.0 * c.kappa_xy)),
        eta_y: Step::from_inverse(p.mu_y() * (sy + 2.0 * c.kappa_xy)),
        eta_u: Step::from_inverse(sx),
        eta_v: Step::from_inverse(sy),
        theta: c.kappa / (c.kappa + 1.0),
    }))
}

/// Growing steps for the convex-strongly-concave case (`μ_x` may be zero).
pub fn schedule_csc(p: &BilinearProblem) -> Result<Schedule> {
    if !(p.mu_y() > 0.0) {
        return Err(Error::NotStronglyConcave(p.mu_y()));
    }
    Ok(Schedule::Growing {
        l_x: p.l_x(),
        l_y: p.l_y(),
        mu_y: p.mu_y(),
        op_norm: p.op_norm(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_quadratic_instance, GeneratorConfig};
    use crate::problem::QuadraticFunction;
    use nalgebra::{DMatrix, DVector};

    pub(crate) fn kappa3_problem() -> BilinearProblem {
        let f = QuadraticFunction::new(
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0])),
            DVector::zeros(2),
            0.0,
        )
        .unwrap();
        let h = QuadraticFunction::isotropic(2, 1.0).unwrap();
        BilinearProblem::quadratic(f, h, DMatrix::identity(2, 2)).unwrap()
    }

    #[test]
    fn scsc_hand_example() {
        let s = schedule_scsc(&kappa3_problem()).unwrap().at(0);
        assert!((s.eta_x.eta() - 1.0 / 3.0).abs() < 1e-15);
        assert!((s.eta_y.eta() - 0.5).abs() < 1e-15);
        assert!((s.eta_u.eta() - 1.0).abs() < 1e-15);
        assert!(s.eta_v.is_infinite());
        assert!((s.theta - 0.75).abs() < 1e-15);
    }

    #[test]
    fn scsc_reduces_to_pd_steps_at_unit_kappa() {
        let f = QuadraticFunction::isotropic(2, 2.0).unwrap();
        let h = QuadraticFunction::isotropic(3, 0.5).unwrap();
        let a = DMatrix::from_fn(3, 2, |i, j| (i as f64) - (j as f64) + 0.5);
        let p = BilinearProblem::quadratic(f, h, a).unwrap();
        let s = schedule_scsc(&p).unwrap().at(0);
        let expect = (0.5f64 / 2.0).sqrt() / (2.0 * p.op_norm());
        assert!((s.eta_x.eta() - expect).abs() < 1e-14 * expect);
        assert!(s.eta_u.is_infinite() && s.eta_v.is_infinite());
    }

    #[test]
    fn scsc_generated_theta() {
        let p = gen_quadratic_instance(&GeneratorConfig {
            d: 5,
            r: 2.0,
            seed: 1,
        })
        .unwrap();
        let c = p.condition_numbers().unwrap();
        let kappa = 2.0 * 255f64.sqrt() + 16.0;
        assert!((c.kappa - kappa).abs() < 1e-7);
        assert!(((c.kappa * 100.0).round() / 100.0 - 47.94).abs() < 1e-12);
        let s = schedule_scsc(&p).unwrap().at(7);
        assert!((s.theta - kappa / (kappa + 1.0)).abs() < 1e-10);
    }

    #[test]
    fn scsc_rejects_zero_curvature() {
        let f = QuadraticFunction::isotropic(1, 0.0).unwrap();
        let h = QuadraticFunction::isotropic(1, 1.0).unwrap();
        let p = BilinearProblem::quadratic(f, h, DMatrix::identity(1, 1)).unwrap();
        assert!(matches!(
            schedule_scsc(&p),
            Err(Error::NotStronglyConvex(_))
        ));
    }

    #[test]
    fn csc_examples() {
        let f = QuadraticFunction::isotropic(1, 1.0).unwrap();
        let h = QuadraticFunction::isotropic(1, 1.0).unwrap();
        let p = BilinearProblem::quadratic(f, h, DMatrix::identity(1, 1)).unwrap();
        let s = schedule_csc(&p).unwrap();
        let s0 = s.at(0);
        assert_eq!(s0.theta, 0.0);
        assert!(s0.eta_u.is_infinite() && s0.eta_y.is_infinite());
        for k in 0..5 {
            assert!((s.at(k).eta_x.inverse() - 18.0 / (k as f64 + 1.0)).abs() < 1e-14);
            assert!((s.at(k).eta_y.inverse() - k as f64 / 2.0).abs() < 1e-14);
        }
        assert!((s.at(3).eta_u.eta() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn csc_needs_strong_concavity() {
        let f = QuadraticFunction::isotropic(1, 1.0).unwrap();
        let h = QuadraticFunction::isotropic(1, 0.0).unwrap();
        let p = BilinearProblem::quadratic(f, h, DMatrix::identity(1, 1)).unwrap();
        assert!(matches!(
            schedule_csc(&p),
            Err(Error::NotStronglyConcave(_))
        ));
    }

    #[test]
    fn step_serde_uses_null_for_infinite() {
        let s = serde_json::to_string(&Step::INFINITE).unwrap();
        assert_eq!(s, "null");
        let back: Step = serde_json::from_str("0.25").unwrap();
        assert_eq!(back.inverse(), 4.0);
    }
}
