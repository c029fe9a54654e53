//! The lifted primal-dual method: one gradient call per block per
//! iteration, two step-size schedules, schedule verification, smoothing for
//! merely convex `x` blocks and warm restarts.

mod bounds;
mod conditions;
mod schedule;
mod smoothing;
mod solver;

pub use bounds::{
    csc_dual_distance_bound, csc_gap_bound, csc_restart_dual_bound, csc_restart_primal_bound,
    scsc_eps_bound, scsc_initial_constant, warm_restart_k0_dual, warm_restart_k0_primal,
};
pub use conditions::{
    verify_schedule_conditions, Condition, ConditionCheck, ScheduleReport, ScheduleWitness,
};
pub use schedule::{schedule_csc, schedule_scsc, Regime, Schedule, Step, StepParams};
pub use smoothing::{
    smooth_then_solve, smoothed_problem, smoothing_iteration_estimate, SmoothedSolution,
    SmoothingOptions,
};
pub use solver::{
    averaged_iterates, lpd_prox_step, lpd_step, run_lpd, solve_to_tolerance, LpdState,
};

use nalgebra::DVector;

use crate::error::Result;
use crate::metrics::{Observer, Silent};
use crate::problem::BilinearProblem;

/// Growing-schedule run preceded by `warmup` iterations whose final `y`
/// replaces `y0`; `x` restarts from `x0`.
pub fn warm_restart_csc(
    p: &BilinearProblem,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    warmup: usize,
    iters: usize,
    observer: &mut dyn Observer,
) -> Result<LpdState> {
    let schedule = schedule_csc(p)?;
    let (y_start, spent) = if warmup > 0 {
        let w = run_lpd(p, &schedule, x0, y0, warmup, &mut Silent)?;
        (w.y, w.grad_calls_f)
    } else {
        (y0.clone(), 0)
    };
    let mut out = run_lpd(p, &schedule, x0, &y_start, iters, observer)?;
    out.grad_calls_f += spent;
    out.grad_calls_h += spent;
    Ok(out)
}
