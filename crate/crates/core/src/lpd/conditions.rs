use std::fmt;

use super::schedule::Schedule;
use crate::problem::BilinearProblem;

type Seq = Box<dyn Fn(usize) -> f64 + Send + Sync>;

/// Auxiliary sequences certifying that a schedule meets the sufficient
/// conditions of the convergence analysis. `alpha_*` may be `0` or `+∞`;
/// `lambda` is indexed from `-1`.
pub struct ScheduleWitness {
    pub alpha_x: Seq,
    pub alpha_y: Seq,
    pub alpha_u: Seq,
    pub alpha_v: Seq,
    pub lambda: Box<dyn Fn(i64) -> f64 + Send + Sync>,
}

impl fmt::Debug for ScheduleWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScheduleWitness { .. }")
    }
}

impl ScheduleWitness {
    /// Constant sequences with geometric weights `λ_k = ratio^k`.
    pub fn constant(alpha_x: f64, alpha_y: f64, alpha_u: f64, alpha_v: f64, ratio: f64) -> Self {
        ScheduleWitness {
            alpha_x: Box::new(move |_| alpha_x),
            alpha_y: Box::new(move |_| alpha_y),
            alpha_u: Box::new(move |_| alpha_u),
            alpha_v: Box::new(move |_| alpha_v),
            lambda: Box::new(move |k| ratio.powi(k as i32)),
        }
    }

    /// Witness for the constant strongly-convex schedule.
    pub fn scsc_canonical(p: &BilinearProblem) -> Self {
        let (mx, my) = (p.mu_x(), p.mu_y());
        let gamma = p
            .condition_numbers()
            .map(|c| 1.0 + 1.0 / c.kappa)
            .unwrap_or(f64::NAN);
        Self::constant(
            (mx / my).sqrt(),
            (my / mx).sqrt(),
            1.0 / ((p.l_x() - mx) * mx).sqrt(),
            1.0 / ((p.l_y() - my) * my).sqrt(),
            gamma,
        )
    }

    /// Witness written out alongside the growing schedule.
    pub fn csc_printed(p: &BilinearProblem) -> Self {
        let (a, my, lx, ly) = (p.op_norm(), p.mu_y(), p.l_x(), p.l_y());
        ScheduleWitness {
            alpha_x: Box::new(move |k| 4.0 * a / ((k as f64 + 1.0) * my)),
            alpha_y: Box::new(move |k| k as f64 * my / (4.0 * a)),
            alpha_u: Box::new(move |k| k as f64 / (2.0 * lx)),
            alpha_v: Box::new(move |k| k as f64 / (2.0 * (ly - my))),
            lambda: Box::new(|k| (k + 1) as f64),
        }
    }

    /// The growing-schedule witness with `α_{y,k}` halved, which closes the
    /// `y`-side inequality for `k ≥ 1`.
    pub fn csc_halved_alpha_y(p: &BilinearProblem) -> Self {
        let (a, my) = (p.op_norm(), p.mu_y());
        ScheduleWitness {
            alpha_y: Box::new(move |k| k as f64 * my / (8.0 * a)),
            ..Self::csc_printed(p)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Condition {
    /// `θ_k(‖A‖/α_{y,k} + 1/α_{u,k}) + ‖A‖α_{x,k+1} ≤ 1/η_{x,k}`
    XCoupling,
    /// `α_{u,k}(L_x - μ_x) ≤ 1/η_{u,k}`
    UAverage,
    /// `θ_k(‖A‖/α_{x,k} + 1/α_{v,k}) + ‖A‖α_{y,k+1} ≤ 1/η_{y,k}`
    YCoupling,
    /// `α_{v,k}(L_y - μ_y) ≤ 1/η_{v,k}`
    VAverage,
    /// `λ_{k+1}/η_{·,k+1} ≤ λ_k(1/η_{·,k} + μ_·)` for `x`, `y` (with `μ_x`, `μ_y`)
    /// and `u`, `v` (with 1).
    WeightGrowth,
    /// `λ_{k-1} = θ_k λ_k`
    WeightRatio,
}

impl Condition {
    pub const ALL: [Condition; 6] = [
        Condition::XCoupling,
        Condition::UAverage,
        Condition::YCoupling,
        Condition::VAverage,
        Condition::WeightGrowth,
        Condition::WeightRatio,
    ];
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub first_violation: Option<usize>,
    /// Largest `lhs - rhs` seen (positive means violated).
    pub worst_excess: f64,
}

impl ConditionCheck {
    pub fn passed(&self) -> bool {
        self.first_violation.is_none()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScheduleReport {
    pub checks: Vec<ConditionCheck>,
}

impl ScheduleReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(ConditionCheck::passed)
    }

    pub fn get(&self, c: Condition) -> &ConditionCheck {
        self.checks
            .iter()
            .find(|x| x.condition == c)
            .expect("every condition is checked")
    }

    pub fn first_failure(&self) -> Option<(Condition, usize)> {
        self.checks
            .iter()
            .filter_map(|c| c.first_violation.map(|k| (c.condition, k)))
            .min_by_key(|&(_, k)| k)
    }
}

/// `a·b` with `0·∞ = 0`.
fn mul0(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

/// `c/α` with `c/∞ = 0` and `0/0 = 0`.
fn div0(c: f64, alpha: f64) -> f64 {
    if c == 0.0 || alpha.is_infinite() {
        0.0
    } else {
        c / alpha
    }
}

const REL_TOL: f64 = 1e-12;

fn excess(lhs: f64, rhs: f64) -> f64 {
    lhs - rhs - REL_TOL * lhs.abs().max(rhs.abs())
}

/// Checks every condition for `k = 0..=horizon`.
pub fn verify_schedule_conditions(
    schedule: &Schedule,
    w: &ScheduleWitness,
    p: &BilinearProblem,
    horizon: usize,
) -> ScheduleReport {
    let a = p.op_norm();
    let (lx, mx, ly, my) = (p.l_x(), p.mu_x(), p.l_y(), p.mu_y());
    let mut checks: Vec<ConditionCheck> = Condition::ALL
        .iter()
        .map(|&condition| ConditionCheck {
            condition,
            first_violation: None,
            worst_excess: f64::NEG_INFINITY,
        })
        .collect();
    let mut record = |c: Condition, k: usize, e: f64| {
        let check = checks.iter_mut().find(|x| x.condition == c).unwrap();
        let bad = e > 0.0 || e.is_nan();
        if bad && check.first_violation.is_none() {
            check.first_violation = Some(k);
        }
        if e > check.worst_excess || e.is_nan() {
            check.worst_excess = e;
        }
    };
    for k in 0..=horizon {
        let s = schedule.at(k);
        let s_next = schedule.at(k + 1);
        let th = s.theta;
        let (ax, ay, au, av) = (
            (w.alpha_x)(k),
            (w.alpha_y)(k),
            (w.alpha_u)(k),
            (w.alpha_v)(k),
        );
        let (ax1, ay1) = ((w.alpha_x)(k + 1), (w.alpha_y)(k + 1));

        let lhs_x = mul0(th, div0(a, ay) + div0(1.0, au)) + mul0(a, ax1);
        record(Condition::XCoupling, k, excess(lhs_x, s.eta_x.inverse()));
        record(
            Condition::UAverage,
            k,
            excess(mul0(au, lx - mx), s.eta_u.inverse()),
        );

        let lhs_y = mul0(th, div0(a, ax) + div0(1.0, av)) + mul0(a, ay1);
        record(Condition::YCoupling, k, excess(lhs_y, s.eta_y.inverse()));
        record(
            Condition::VAverage,
            k,
            excess(mul0(av, ly - my), s.eta_v.inverse()),
        );

        let (lam, lam1, lam_prev) = (
            (w.lambda)(k as i64),
            (w.lambda)(k as i64 + 1),
            (w.lambda)(k as i64 - 1),
        );
        let growth = [
            (s_next.eta_x.inverse(), s.eta_x.inverse() + mx),
            (s_next.eta_y.inverse(), s.eta_y.inverse() + my),
            (s_next.eta_u.inverse(), s.eta_u.inverse() + 1.0),
            (s_next.eta_v.inverse(), s.eta_v.inverse() + 1.0),
        ];
        let worst = growth
            .iter()
            .map(|&(next, cur)| excess(lam1 * next, lam * cur))
            .fold(f64::NEG_INFINITY, f64::max);
        record(Condition::WeightGrowth, k, worst);

        let ratio = (lam_prev - th * lam).abs() - REL_TOL * lam_prev.abs().max((th * lam).abs());
        record(Condition::WeightRatio, k, ratio);
    }
    ScheduleReport { checks }
}
