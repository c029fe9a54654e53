//! Convergence measurement: saddle certificates, duality gaps, the
//! weighted distance metric, trace recording and rate fitting.

mod gap;
mod trace;

pub use gap::{
    minimize_convex, primal_dual_gap, solve_saddle, solve_saddle_exact, GapEstimate, InnerSolution,
    SaddleCertificate,
};
pub use trace::{
    read_trace_csv, write_trace_csv, Flow, IterateView, Observer, OutputPoint, RecorderOptions,
    Silent, TraceRecord, TraceRecorder, TRACE_HEADER,
};

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::problem::BilinearProblem;

/// `κ_xy (μ_x‖x - x*‖² + μ_y‖y - y*‖²)`.
pub fn eps_suboptimality(
    p: &BilinearProblem,
    x: &DVector<f64>,
    y: &DVector<f64>,
    saddle: &SaddleCertificate,
) -> Result<f64> {
    let c = p.condition_numbers()?;
    Ok(c.kappa_xy
        * (p.mu_x() * (x - &saddle.x).norm_squared() + p.mu_y() * (y - &saddle.y).norm_squared()))
}

/// `(K - k₀) / ln(Δ²_{k₀} / Δ²_K)` where `Δ` is the recorded `dist_sq`.
///
/// Both indices must be present in the trace with a distance value.
pub fn rate_constant(trace: &[TraceRecord], k0: usize, k: usize) -> Result<f64> {
    if k <= k0 {
        return Err(Error::InvalidArgument(format!(
            "need K > k0, got {k} <= {k0}"
        )));
    }
    let dist = |idx: usize| -> Result<f64> {
        trace
            .iter()
            .find(|r| r.k == idx)
            .and_then(|r| r.dist_sq)
            .ok_or_else(|| Error::InvalidArgument(format!("no distance recorded at k = {idx}")))
    };
    let (d0, dk) = (dist(k0)?, dist(k)?);
    if !(dk < d0) || dk <= 0.0 {
        return Err(Error::NonDecreasing);
    }
    let log_ratio = (d0 * d0).ln() - (dk * dk).ln();
    Ok((k - k0) as f64 / log_ratio)
}

/// Least-squares line through `(ln κ, ln rate)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<LogLogFit> {
    if points.len() < 3 {
        return Err(Error::DegenerateFit(format!(
            "need >= 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|&(a, b)| !(a > 0.0) || !(b > 0.0)) {
        return Err(Error::DegenerateFit("coordinates must be positive".into()));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(a, b)| (a.ln(), b.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 1e-300 {
        return Err(Error::DegenerateFit("all abscissae are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy > 0.0 {
        sxy * sxy / (sxx * syy)
    } else {
        1.0
    };
    Ok(LogLogFit {
        slope,
        intercept,
        r_squared,
    })
}
