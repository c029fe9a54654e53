use anyhow::{anyhow, bail, Context};
use lpd_core::harness::default_start;
use lpd_core::instances::{
    build_policy_eval, build_policy_eval_semidefinite, build_robust_least_squares,
    gen_quadratic_instance, gen_synthetic_mdp_trace, GeneratorConfig, MdpTrace,
};
use lpd_core::problem::{BilinearProblem, Coupling, FeasibleSet, QuadraticFunction};
use nalgebra::{DMatrix, DVector};

use crate::config::{
    matrix_from_rows, rows_from_matrix, CustomInstance, CustomSource, InstanceSpec, QuadraticSpec,
    RobustLsSpec, SetSpec,
};

pub struct BuiltInstance {
    pub problem: BilinearProblem,
    /// Transition samples behind a policy-evaluation instance.
    pub trace: Option<MdpTrace>,
}

pub fn build_instance(spec: &InstanceSpec) -> anyhow::Result<BuiltInstance> {
    let (problem, trace) = match spec {
        InstanceSpec::GradedQuadratic { d, r, seed } => (
            gen_quadratic_instance(&GeneratorConfig {
                d: *d,
                r: *r,
                seed: *seed,
            })?,
            None,
        ),
        InstanceSpec::PolicyEval {
            trace_path,
            gamma,
            synthetic,
            rho,
            semidefinite,
        } => {
            let trace = match (trace_path, synthetic) {
                (Some(path), None) => {
                    let gamma = gamma
                        .ok_or_else(|| anyhow!("policy_eval.gamma is required with trace_path"))?;
                    MdpTrace::load(path, gamma)
                        .with_context(|| format!("loading trace {}", path.display()))?
                }
                (None, Some(s)) => gen_synthetic_mdp_trace(s.n, s.d, s.gamma, s.seed)?,
                _ => bail!("policy_eval needs exactly one of trace_path and synthetic"),
            };
            let p = if *semidefinite {
                build_policy_eval_semidefinite(&trace, *rho)?
            } else {
                build_policy_eval(&trace, *rho)?
            };
            (p, Some(trace))
        }
        InstanceSpec::RobustLs(s) => (robust_ls(s)?, None),
        InstanceSpec::Custom(CustomSource::Inline(c)) => (custom(c)?, None),
        InstanceSpec::Custom(CustomSource::File { path }) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let c: CustomInstance = serde_json::from_str(&text)
                .with_context(|| format!("parsing {}", path.display()))?;
            (custom(&c)?, None)
        }
    };
    Ok(BuiltInstance { problem, trace })
}

fn robust_ls(s: &RobustLsSpec) -> anyhow::Result<BilinearProblem> {
    let a = match (&s.a, s.rows, s.cols) {
        (Some(rows), None, None) => matrix_from_rows(rows, "robust_ls.a")?,
        (None, Some(m), Some(n)) if m > 0 && n > 0 => {
            let v = default_start(m * n, s.seed);
            DMatrix::from_column_slice(m, n, v.as_slice())
        }
        _ => bail!("robust_ls needs either a or positive rows and cols"),
    };
    let y0 = match &s.y0 {
        Some(v) => DVector::from_vec(v.clone()),
        None => default_start(a.nrows(), s.seed.wrapping_add(1)),
    };
    Ok(build_robust_least_squares(&a, &y0, s.lambda)?)
}

fn quadratic(q: &QuadraticSpec, what: &str) -> anyhow::Result<QuadraticFunction> {
    let p = matrix_from_rows(&q.hessian, what)?;
    let lin = match &q.linear {
        Some(v) => DVector::from_vec(v.clone()),
        None => DVector::zeros(p.nrows()),
    };
    QuadraticFunction::new(p, lin, q.constant).with_context(|| what.to_string())
}

fn set(s: &Option<SetSpec>, dim: usize) -> anyhow::Result<FeasibleSet> {
    Ok(match s {
        None => FeasibleSet::unconstrained(dim),
        Some(SetSpec::Box { lower, upper }) => FeasibleSet::new_box(
            DVector::from_vec(lower.clone()),
            DVector::from_vec(upper.clone()),
        )?,
        Some(SetSpec::Ball { center, radius }) => {
            FeasibleSet::new_ball(DVector::from_vec(center.clone()), *radius)?
        }
    })
}

fn custom(c: &CustomInstance) -> anyhow::Result<BilinearProblem> {
    let f = quadratic(&c.f, "f")?;
    let h = quadratic(&c.h, "h")?;
    let a = matrix_from_rows(&c.a, "a")?;
    let (n, m) = (f.dim(), h.dim());
    Ok(BilinearProblem::new(
        f.into(),
        h.into(),
        Coupling::new(a)?,
        set(&c.set_x, n)?,
        set(&c.set_y, m)?,
    )?)
}

fn set_spec(s: &FeasibleSet) -> Option<SetSpec> {
    match s {
        FeasibleSet::Unconstrained { .. } => None,
        FeasibleSet::Box { lower, upper } => Some(SetSpec::Box {
            lower: lower.iter().copied().collect(),
            upper: upper.iter().copied().collect(),
        }),
        FeasibleSet::Ball { center, radius } => Some(SetSpec::Ball {
            center: center.iter().copied().collect(),
            radius: *radius,
        }),
    }
}

/// Inline description of a built problem; fails for oracle-only blocks.
pub fn to_custom(p: &BilinearProblem) -> anyhow::Result<CustomInstance> {
    let spec = |q: Option<&QuadraticFunction>, what: &str| -> anyhow::Result<QuadraticSpec> {
        let q = q.ok_or_else(|| anyhow!("{what} is not quadratic"))?;
        Ok(QuadraticSpec {
            hessian: rows_from_matrix(q.hessian()),
            linear: Some(q.linear().iter().copied().collect()),
            constant: q.constant(),
        })
    };
    Ok(CustomInstance {
        f: spec(p.f.as_quadratic(), "f")?,
        h: spec(p.h.as_quadratic(), "h")?,
        a: rows_from_matrix(p.coupling.matrix()),
        set_x: set_spec(&p.set_x),
        set_y: set_spec(&p.set_y),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::SyntheticTrace;

    #[test]
    fn graded_round_trips_through_custom() {
        let spec = InstanceSpec::GradedQuadratic {
            d: 3,
            r: 1.5,
            seed: 2,
        };
        let p = build_instance(&spec).unwrap().problem;
        let c = to_custom(&p).unwrap();
        let text = serde_json::to_string(&c).unwrap();
        let back = build_instance(&InstanceSpec::Custom(CustomSource::Inline(
            serde_json::from_str(&text).unwrap(),
        )))
        .unwrap()
        .problem;
        assert_eq!(back.coupling.matrix(), p.coupling.matrix());
        assert!((back.l_x() - p.l_x()).abs() < 1e-12 * p.l_x());
    }

    #[test]
    fn policy_eval_needs_one_source() {
        let both = InstanceSpec::PolicyEval {
            trace_path: Some("t.csv".into()),
            gamma: Some(0.9),
            synthetic: Some(SyntheticTrace {
                n: 10,
                d: 2,
                gamma: 0.9,
                seed: 0,
            }),
            rho: 1.0,
            semidefinite: false,
        };
        assert!(build_instance(&both).is_err());
    }

    #[test]
    fn synthetic_policy_eval_keeps_trace() {
        let spec = InstanceSpec::PolicyEval {
            trace_path: None,
            gamma: None,
            synthetic: Some(SyntheticTrace {
                n: 200,
                d: 4,
                gamma: 0.9,
                seed: 1,
            }),
            rho: 1.0,
            semidefinite: false,
        };
        let b = build_instance(&spec).unwrap();
        assert_eq!(b.trace.unwrap().len(), 200);
        assert_eq!(b.problem.l_x() / b.problem.mu_x(), 1.0);
    }

    #[test]
    fn boxed_custom_keeps_sets() {
        let c = CustomInstance {
            f: QuadraticSpec {
                hessian: vec![vec![0.0]],
                linear: None,
                constant: 0.0,
            },
            h: QuadraticSpec {
                hessian: vec![vec![1.0]],
                linear: Some(vec![0.5]),
                constant: 0.0,
            },
            a: vec![vec![1.0]],
            set_x: Some(SetSpec::Box {
                lower: vec![-1.0],
                upper: vec![1.0],
            }),
            set_y: None,
        };
        let p = custom(&c).unwrap();
        assert_eq!(p.set_x.diameter(), 2.0);
        let back = to_custom(&p).unwrap();
        assert_eq!(back.f.linear, Some(vec![0.0]));
        assert_eq!((back.h, back.set_x), (c.h, c.set_x));
    }

    #[test]
    fn random_robust_ls_is_seeded() {
        let s = RobustLsSpec {
            lambda: 2.0,
            a: None,
            y0: None,
            rows: Some(6),
            cols: Some(3),
            seed: 4,
        };
        let (p, q) = (robust_ls(&s).unwrap(), robust_ls(&s).unwrap());
        assert_eq!(p.coupling.matrix(), q.coupling.matrix());
        assert_eq!(p.dim_x(), 3);
        assert_eq!(p.dim_y(), 6);
    }
}
