use lpd_core::harness::Algorithm;
use lpd_core::lpd::{schedule_scsc, verify_schedule_conditions, Schedule, ScheduleWitness};
use lpd_core::problem::BilinearProblem;
use lpd_core::Error;
use serde::Serialize;

use crate::config::{ExperimentConfig, InstanceSpec, WitnessSpec};
use crate::instance::build_instance;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub errors: Vec<String>,
    pub notes: Vec<String>,
}

impl ValidationReport {
    pub fn ok(&self) -> bool {
        self.errors.is_empty()
    }
}

/// Longest prefix of an overridden schedule checked against the witness.
const WITNESS_HORIZON: usize = 1000;

/// Short error name plus what to do about it.
fn regime_message(e: &Error) -> String {
    match e {
        Error::NotStronglyConvex(_) => "NotStronglyConvex: use lpd_csc or lpd_smoothed".into(),
        Error::NotStronglyConcave(_) => {
            "NotStronglyConcave: solve the transposed problem or add a regularizer".into()
        }
        Error::UnboundedDomain => {
            "UnboundedDomain: lpd_smoothed needs a bounded x set or a radius".into()
        }
        Error::Constrained => "Constrained: needs an unconstrained problem".into(),
        Error::NonQuadratic => "NonQuadratic: needs quadratic blocks".into(),
        other => other.to_string(),
    }
}

pub fn validate_config(cfg: &ExperimentConfig) -> ValidationReport {
    let mut r = ValidationReport::default();
    if cfg.algorithms.is_empty() {
        r.errors
            .push("algorithms: at least one algorithm is required".into());
    }
    if cfg.iters == 0 {
        r.errors.push("iters: must be at least 1".into());
    }
    if cfg.metrics_every == 0 {
        r.errors.push("metrics_every: must be at least 1".into());
    }
    if !(cfg.inner_tol > 0.0) {
        r.errors.push("inner_tol: must be positive".into());
    }
    let ov = cfg.overrides();
    for (name, v) in [
        ("eta_x", ov.eta_x),
        ("eta_y", ov.eta_y),
        ("eta_u", ov.eta_u),
        ("eta_v", ov.eta_v),
    ] {
        if let Some(v) = v {
            if !(v > 0.0 && v.is_finite()) {
                r.errors
                    .push(format!("overrides.{name}: must be positive and finite"));
            }
        }
    }
    if let Some(t) = ov.theta {
        if !(0.0..=1.0).contains(&t) {
            r.errors.push("overrides.theta: must lie in [0, 1]".into());
        }
    }
    if let Some(s) = &cfg.sweep {
        if s.r_values.is_empty() {
            r.errors.push("sweep.r_values: must be nonempty".into());
        }
        if s.r_values.iter().any(|&v| !(v >= 1.0)) {
            r.errors.push("sweep.r_values: values must be >= 1".into());
        }
        if !matches!(cfg.instance, InstanceSpec::GradedQuadratic { .. }) {
            r.errors
                .push("sweep: the instance must be appendix_f".into());
        }
    }
    let p = match build_instance(&cfg.instance) {
        Ok(b) => b.problem,
        Err(e) => {
            r.errors.push(format!("instance: {e:#}"));
            return r;
        }
    };
    r.notes.push(format!(
        "instance: dim_x {}, dim_y {}, L_x {:.6e}, mu_x {:.6e}, L_y {:.6e}, mu_y {:.6e}, norm(A) {:.6e}",
        p.dim_x(),
        p.dim_y(),
        p.l_x(),
        p.mu_x(),
        p.l_y(),
        p.mu_y(),
        p.op_norm()
    ));
    for alg in &cfg.algorithms {
        if let Err(e) = alg.check_problem(&p) {
            r.errors
                .push(format!("algorithms.{}: {}", alg.name(), regime_message(&e)));
        }
        if !ov.is_empty() && matches!(alg, Algorithm::LpdCsc | Algorithm::LpdSmoothed { .. }) {
            r.errors.push(format!(
                "algorithms.{}: overrides apply to constant schedules only",
                alg.name()
            ));
        }
    }
    if let Some(w) = &cfg.witness {
        check_witness(cfg, &p, w, &mut r);
    }
    r
}

fn check_witness(
    cfg: &ExperimentConfig,
    p: &BilinearProblem,
    w: &WitnessSpec,
    r: &mut ValidationReport,
) {
    let uses_constant = cfg
        .algorithms
        .iter()
        .any(|a| matches!(a, Algorithm::LpdScsc | Algorithm::Olpd));
    if !uses_constant {
        r.notes
            .push("witness: no constant-schedule algorithm requested; not checked".into());
        return;
    }
    let sp = match schedule_scsc(p).and_then(|s| cfg.overrides().apply(s.at(0))) {
        Ok(sp) => sp,
        Err(e) => {
            r.errors.push(format!("witness: {}", regime_message(&e)));
            return;
        }
    };
    let witness = match w {
        WitnessSpec::Canonical => ScheduleWitness::scsc_canonical(p),
        WitnessSpec::Constant {
            alpha_x,
            alpha_y,
            alpha_u,
            alpha_v,
            ratio,
        } => ScheduleWitness::constant(*alpha_x, *alpha_y, *alpha_u, *alpha_v, *ratio),
    };
    let horizon = cfg.iters.clamp(1, WITNESS_HORIZON);
    let report = verify_schedule_conditions(&Schedule::Constant(sp), &witness, p, horizon);
    match report.first_failure() {
        None => r
            .notes
            .push(format!("witness: all conditions hold for k < {horizon}")),
        Some((c, k)) => r.errors.push(format!(
            "witness: condition {c:?} fails at k = {k} (excess {:.3e})",
            report.get(c).worst_excess
        )),
    }
}
