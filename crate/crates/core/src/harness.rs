//! Algorithm dispatch shared by the command-line runner and the
//! acceptance suite: theory step sizes, optional overrides, trace
//! recording and rate measurement.

use std::collections::BTreeMap;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instances::{gen_quadratic_instance, GeneratorConfig};
use crate::lpd::{
    run_lpd, schedule_csc, schedule_scsc, smooth_then_solve, Schedule, SmoothingOptions, Step,
    StepParams,
};
use crate::metrics::{
    fit_loglog_slope, rate_constant, solve_saddle_exact, LogLogFit, OutputPoint, RecorderOptions,
    SaddleCertificate, TraceRecord, TraceRecorder,
};
use crate::problem::BilinearProblem;
use crate::reference::{
    default_config, pd_certified_params, run_baseline, run_olpd, run_pd, run_ppm, BaselineKind,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    LpdScsc,
    LpdCsc,
    LpdSmoothed {
        eps: f64,
        #[serde(default)]
        lambda: Option<f64>,
        #[serde(default)]
        radius: Option<f64>,
    },
    Olpd,
    Ppm,
    Pd,
    Mp,
    MpBal,
    Ogda,
    Gda,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::LpdScsc => "lpd_scsc",
            Algorithm::LpdCsc => "lpd_csc",
            Algorithm::LpdSmoothed { .. } => "lpd_smoothed",
            Algorithm::Olpd => "olpd",
            Algorithm::Ppm => "ppm",
            Algorithm::Pd => "pd",
            Algorithm::Mp => "mp",
            Algorithm::MpBal => "mp_bal",
            Algorithm::Ogda => "ogda",
            Algorithm::Gda => "gda",
        }
    }

    /// Checks the regime assumptions of the theory step sizes.
    pub fn check_problem(&self, p: &BilinearProblem) -> Result<()> {
        let (mx, my) = (p.mu_x(), p.mu_y());
        match self {
            Algorithm::LpdScsc
            | Algorithm::Olpd
            | Algorithm::Pd
            | Algorithm::MpBal
            | Algorithm::Gda => {
                if !(mx > 0.0) {
                    return Err(Error::NotStronglyConvex(mx));
                }
                if !(my > 0.0) {
                    return Err(Error::NotStronglyConcave(my));
                }
            }
            Algorithm::Ppm => {
                if !(mx > 0.0 && my > 0.0) {
                    return Err(Error::NotStronglyConvex(mx.min(my)));
                }
                if !p.is_unconstrained() {
                    return Err(Error::Constrained);
                }
            }
            Algorithm::LpdCsc => {
                if !(my > 0.0 || mx > 0.0) {
                    return Err(Error::NotStronglyConcave(my));
                }
            }
            Algorithm::LpdSmoothed { eps, radius, .. } => {
                if !(*eps > 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "eps must be positive, got {eps}"
                    )));
                }
                if !(my > 0.0) {
                    return Err(Error::NotStronglyConcave(my));
                }
                if radius.is_none() && !p.set_x.diameter().is_finite() {
                    return Err(Error::UnboundedDomain);
                }
            }
            Algorithm::Mp | Algorithm::Ogda => {}
        }
        if matches!(self, Algorithm::Olpd | Algorithm::Ppm | Algorithm::Pd)
            && (p.f.as_quadratic().is_none() || p.h.as_quadratic().is_none())
        {
            return Err(Error::NonQuadratic);
        }
        if matches!(self, Algorithm::Pd) && !p.is_unconstrained() {
            return Err(Error::Constrained);
        }
        Ok(())
    }
}

/// Replaces individual theory step sizes; absent fields keep their value.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepOverride {
    #[serde(default)]
    pub eta_x: Option<f64>,
    #[serde(default)]
    pub eta_y: Option<f64>,
    #[serde(default)]
    pub eta_u: Option<f64>,
    #[serde(default)]
    pub eta_v: Option<f64>,
    #[serde(default)]
    pub theta: Option<f64>,
}

impl StepOverride {
    pub fn is_empty(&self) -> bool {
        *self == StepOverride::default()
    }

    pub fn apply(&self, s: StepParams) -> Result<StepParams> {
        let step = |o: Option<f64>, d: Step| o.map(Step::finite).unwrap_or(Ok(d));
        Ok(StepParams {
            eta_x: step(self.eta_x, s.eta_x)?,
            eta_y: step(self.eta_y, s.eta_y)?,
            eta_u: step(self.eta_u, s.eta_u)?,
            eta_v: step(self.eta_v, s.eta_v)?,
            theta: self.theta.unwrap_or(s.theta),
        })
    }
}

/// Constants a run used; `None` marks an infinite step.
pub type Constants = BTreeMap<String, Option<f64>>;

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub algorithm: String,
    pub records: Vec<TraceRecord>,
    pub constants: Constants,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub iterations: usize,
    /// Solved as the transposed problem (roles of the blocks swapped).
    pub transposed: bool,
}

fn step_constants(s: &StepParams) -> Constants {
    [
        ("eta_x", s.eta_x),
        ("eta_y", s.eta_y),
        ("eta_u", s.eta_u),
        ("eta_v", s.eta_v),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), (!v.is_infinite()).then(|| v.eta())))
    .chain(std::iter::once(("theta".to_string(), Some(s.theta))))
    .collect()
}

fn two_steps(ex: f64, ey: f64) -> Constants {
    [
        ("eta_x".to_string(), Some(ex)),
        ("eta_y".to_string(), Some(ey)),
    ]
    .into()
}

fn no_growing_override(o: &StepOverride, name: &str) -> Result<()> {
    if o.is_empty() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "{name}: overrides apply to constant schedules only"
        )))
    }
}

/// Seeded standard normal start point.
pub fn default_start(dim: usize, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng))
}

/// Runs one algorithm with theory step sizes (or overrides), recording a
/// trace on `p`. A growing-schedule run on a problem that is strongly convex
/// in `x` only is carried out on the transposed problem.
#[allow(clippy::too_many_arguments)]
pub fn run_algorithm(
    p: &BilinearProblem,
    saddle: Option<&SaddleCertificate>,
    alg: &Algorithm,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    iters: usize,
    rec: RecorderOptions,
    overrides: &StepOverride,
) -> Result<RunOutcome> {
    if iters == 0 {
        return Err(Error::InvalidArgument(
            "iteration budget must be positive".into(),
        ));
    }
    alg.check_problem(p)?;
    let name = alg.name().to_string();
    let done = |records, constants, x, y, iterations, transposed| RunOutcome {
        algorithm: name.clone(),
        records,
        constants,
        x,
        y,
        iterations,
        transposed,
    };
    match alg {
        Algorithm::LpdScsc | Algorithm::Olpd => {
            let sp = overrides.apply(schedule_scsc(p)?.at(0))?;
            let sched = Schedule::Constant(sp);
            let mut r = TraceRecorder::new(p, saddle, rec);
            let (x, y, k) = if *alg == Algorithm::LpdScsc {
                let s = run_lpd(p, &sched, x0, y0, iters, &mut r)?;
                (s.x, s.y, s.k)
            } else {
                let s = run_olpd(p, &sched, x0, y0, iters, &mut r)?;
                (s.x, s.y, s.k)
            };
            Ok(done(r.into_records(), step_constants(&sp), x, y, k, false))
        }
        Algorithm::LpdCsc => {
            no_growing_override(overrides, &name)?;
            let transposed = !(p.mu_y() > 0.0) && p.mu_x() > 0.0;
            let rec = RecorderOptions {
                point: OutputPoint::Averaged,
                ..rec
            };
            let (q, swapped);
            let (prob, cert, xs, ys) = if transposed {
                q = p.transposed()?;
                swapped = saddle.map(|c| SaddleCertificate {
                    x: c.y.clone(),
                    y: c.x.clone(),
                    ..c.clone()
                });
                (&q, swapped.as_ref(), y0, x0)
            } else {
                (p, saddle, x0, y0)
            };
            let sched = schedule_csc(prob)?;
            let mut r = TraceRecorder::new(prob, cert, rec);
            let s = run_lpd(prob, &sched, xs, ys, iters, &mut r)?;
            let mut c: Constants = [
                ("l_x", prob.l_x()),
                ("l_y", prob.l_y()),
                ("mu_y", prob.mu_y()),
                ("op_norm", prob.op_norm()),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), Some(v)))
            .collect();
            c.insert(
                "transposed".into(),
                Some(if transposed { 1.0 } else { 0.0 }),
            );
            let (x, y) = if transposed {
                (s.y_avg, s.x_avg)
            } else {
                (s.x_avg, s.y_avg)
            };
            Ok(done(r.into_records(), c, x, y, s.k, transposed))
        }
        Algorithm::LpdSmoothed {
            eps,
            lambda,
            radius,
        } => {
            no_growing_override(overrides, &name)?;
            let opts = SmoothingOptions {
                lambda: *lambda,
                radius: *radius,
                max_iters: iters,
                ..Default::default()
            };
            let mut r = TraceRecorder::new(p, saddle, rec);
            let sol = smooth_then_solve(p, *eps, x0, y0, &opts, &mut r)?;
            let c: Constants = [
                ("eps", *eps),
                ("lambda", sol.lambda),
                ("radius", sol.radius),
                ("smoothed_gap", sol.smoothed_gap.upper()),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_string(), Some(v)))
            .collect();
            Ok(done(
                r.into_records(),
                c,
                sol.x,
                sol.y,
                sol.iterations,
                false,
            ))
        }
        Algorithm::Ppm | Algorithm::Pd => {
            let base = pd_certified_params(p)?;
            let (ex, ey) = (
                overrides.eta_x.unwrap_or(base.eta_x),
                overrides.eta_y.unwrap_or(base.eta_y),
            );
            let mut r = TraceRecorder::new(p, saddle, rec);
            if *alg == Algorithm::Ppm {
                let (x, y) = run_ppm(p, ex, ey, x0, y0, iters, &mut r)?;
                let k = r.records().last().map_or(0, |t| t.k);
                Ok(done(r.into_records(), two_steps(ex, ey), x, y, k, false))
            } else {
                let params = crate::reference::PdParams {
                    eta_x: ex,
                    eta_y: ey,
                    theta: overrides.theta.unwrap_or(base.theta),
                };
                let s = run_pd(p, &params, x0, y0, iters, &mut r)?;
                let mut c = two_steps(ex, ey);
                c.insert("theta".into(), Some(params.theta));
                Ok(done(r.into_records(), c, s.x, s.y, s.k, false))
            }
        }
        Algorithm::Mp | Algorithm::MpBal | Algorithm::Ogda | Algorithm::Gda => {
            let kind = match alg {
                Algorithm::Mp => BaselineKind::Mp,
                Algorithm::MpBal => BaselineKind::MpBalanced,
                Algorithm::Ogda => BaselineKind::Ogda,
                _ => BaselineKind::Gda,
            };
            let mut cfg = default_config(kind, p)?;
            cfg.eta_x = overrides.eta_x.unwrap_or(cfg.eta_x);
            cfg.eta_y = overrides.eta_y.unwrap_or(cfg.eta_y);
            let mut r = TraceRecorder::new(p, saddle, rec);
            let s = run_baseline(p, &cfg, x0, y0, iters, &mut r)?;
            Ok(done(
                r.into_records(),
                two_steps(cfg.eta_x, cfg.eta_y),
                s.x,
                s.y,
                s.k,
                false,
            ))
        }
    }
}

/// Relative levels of `Δ` that open and close the window used for the
/// rate constant.
pub const RATE_WINDOW: (f64, f64) = (1e-4, 1e-16);

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateMeasurement {
    pub k0: usize,
    pub k: usize,
    pub rate: f64,
}

/// Rate constant between the first iterations at which `Δ` falls below
/// the two window levels.
pub fn measure_rate(records: &[TraceRecord]) -> Result<RateMeasurement> {
    let d0 = records
        .first()
        .and_then(|r| r.dist_sq)
        .ok_or_else(|| Error::InvalidArgument("trace has no distance column".into()))?;
    let first_below = |level: f64| {
        records
            .iter()
            .find(|r| r.dist_sq.is_some_and(|d| d <= level * d0))
            .map(|r| r.k)
    };
    let k0 = first_below(RATE_WINDOW.0).ok_or(Error::NonDecreasing)?;
    let k = first_below(RATE_WINDOW.1).ok_or(Error::NonDecreasing)?;
    Ok(RateMeasurement {
        k0,
        k,
        rate: rate_constant(records, k0, k)?,
    })
}

/// Runs until `Δ` reaches the lower window level and measures the rate.
pub fn rate_run(
    p: &BilinearProblem,
    saddle: &SaddleCertificate,
    alg: &Algorithm,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    max_iters: usize,
) -> Result<RateMeasurement> {
    let d0 = (x0 - &saddle.x).norm_squared() + (y0 - &saddle.y).norm_squared();
    let rec = RecorderOptions {
        record_gap: false,
        stop_dist_sq: Some(RATE_WINDOW.1 * d0),
        ..Default::default()
    };
    let out = run_algorithm(
        p,
        Some(saddle),
        alg,
        x0,
        y0,
        max_iters,
        rec,
        &StepOverride::default(),
    )?;
    measure_rate(&out.records)
}

/// Iteration and gradient-call counts at the first check with gap at most
/// `target`, or `None` if the budget ran out.
#[allow(clippy::too_many_arguments)]
pub fn effort_to_gap(
    p: &BilinearProblem,
    saddle: Option<&SaddleCertificate>,
    alg: &Algorithm,
    x0: &DVector<f64>,
    y0: &DVector<f64>,
    target: f64,
    check_every: usize,
    max_iters: usize,
) -> Result<Option<(usize, usize)>> {
    let rec = RecorderOptions {
        every: max_iters,
        stop_gap: Some(target),
        check_every,
        inner_tol: target * 1e-3,
        ..Default::default()
    };
    let out = run_algorithm(
        p,
        saddle,
        alg,
        x0,
        y0,
        max_iters,
        rec,
        &StepOverride::default(),
    )?;
    Ok(out
        .records
        .last()
        .filter(|r| r.gap.is_some_and(|g| g <= target))
        .map(|r| (r.k, r.grad_calls)))
}

/// One row of a condition-number sweep; `rate` is absent when the cell
/// failed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub r: f64,
    pub kappa_x: f64,
    pub algorithm: String,
    pub rate: Option<f64>,
}

/// Start points used by every sweep cell of a given seed.
pub fn sweep_start(d: usize, seed: u64) -> (DVector<f64>, DVector<f64>) {
    (
        default_start(d, seed ^ 0x5eed_0001),
        default_start(d, seed ^ 0x5eed_0002),
    )
}

pub fn sweep_cell(d: usize, r: f64, seed: u64, alg: &Algorithm, max_iters: usize) -> SweepRow {
    let cell = || -> Result<(f64, f64)> {
        let p = gen_quadratic_instance(&GeneratorConfig { d, r, seed })?;
        let kx = p.l_x() / p.mu_x();
        let cert = solve_saddle_exact(&p)?;
        let (x0, y0) = sweep_start(d, seed);
        Ok((kx, rate_run(&p, &cert, alg, &x0, &y0, max_iters)?.rate))
    };
    let (kappa_x, rate) = match cell() {
        Ok((k, rate)) => (k, Some(rate)),
        Err(_) => (r.powi(2 * (d as i32 - 1)), None),
    };
    SweepRow {
        r,
        kappa_x,
        algorithm: alg.name().to_string(),
        rate,
    }
}

/// Log-log slope of rate against `κ_x` per algorithm, skipping failed cells.
pub fn fit_sweep(rows: &[SweepRow]) -> BTreeMap<String, Result<LogLogFit>> {
    let mut by_alg: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for row in rows {
        let pts = by_alg.entry(row.algorithm.clone()).or_default();
        if let Some(rate) = row.rate {
            pts.push((row.kappa_x, rate));
        }
    }
    by_alg
        .into_iter()
        .map(|(k, pts)| (k, fit_loglog_slope(&pts)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn algorithm_names_round_trip() {
        let a: Algorithm = serde_json::from_str(r#""mp_bal""#).unwrap();
        assert_eq!(a, Algorithm::MpBal);
        let b: Algorithm = serde_json::from_str(r#"{"lpd_smoothed": {"eps": 0.001}}"#).unwrap();
        assert_eq!(b.name(), "lpd_smoothed");
        assert_eq!(
            serde_json::to_string(&Algorithm::LpdCsc).unwrap(),
            r#""lpd_csc""#
        );
    }

    #[test]
    fn override_keeps_unset_fields() {
        let p = gen_quadratic_instance(&GeneratorConfig {
            d: 2,
            r: 1.5,
            seed: 0,
        })
        .unwrap();
        let base = schedule_scsc(&p).unwrap().at(0);
        let o = StepOverride {
            theta: Some(0.5),
            ..Default::default()
        };
        let s = o.apply(base).unwrap();
        assert_eq!(s.theta, 0.5);
        assert_eq!(s.eta_x, base.eta_x);
    }

    #[test]
    fn lpd_reports_oracle_calls() {
        let p = gen_quadratic_instance(&GeneratorConfig {
            d: 3,
            r: 1.5,
            seed: 3,
        })
        .unwrap();
        let x0 = default_start(3, 1);
        let out = run_algorithm(
            &p,
            None,
            &Algorithm::LpdScsc,
            &x0,
            &x0,
            25,
            RecorderOptions::default(),
            &StepOverride::default(),
        )
        .unwrap();
        assert_eq!(out.records.last().unwrap().grad_calls, 27);
        assert_eq!(out.records.len(), 26);
    }

    #[test]
    fn growing_schedule_rejects_overrides() {
        let p = gen_quadratic_instance(&GeneratorConfig {
            d: 2,
            r: 1.5,
            seed: 0,
        })
        .unwrap();
        let z = DVector::zeros(2);
        let o = StepOverride {
            eta_x: Some(0.1),
            ..Default::default()
        };
        let r = run_algorithm(
            &p,
            None,
            &Algorithm::LpdCsc,
            &z,
            &z,
            3,
            RecorderOptions::default(),
            &o,
        );
        assert!(matches!(r, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn failed_cell_keeps_kappa() {
        let row = sweep_cell(5, 2.0, 0, &Algorithm::Mp, 3);
        assert_eq!(row.rate, None);
        assert_eq!(row.kappa_x, 256.0);
    }
}
