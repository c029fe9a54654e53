use std::io::{Read, Write};
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{eps_suboptimality, primal_dual_gap, SaddleCertificate};
use crate::error::{Error, Result};
use crate::problem::BilinearProblem;

/// One row of a convergence trace. Absent metrics are empty in CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: usize,
    pub gap: Option<f64>,
    pub dist_sq: Option<f64>,
    pub eps_metric: Option<f64>,
    /// Calls made to each of the two gradient oracles so far.
    pub grad_calls: usize,
    pub elapsed_s: f64,
}

pub const TRACE_HEADER: [&str; 6] = [
    "k",
    "gap",
    "dist_sq",
    "eps_metric",
    "grad_calls",
    "elapsed_s",
];

pub fn write_trace_csv<W: Write>(records: &[TraceRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRACE_HEADER)?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x:e}")).unwrap_or_default();
    for r in records {
        out.write_record([
            r.k.to_string(),
            opt(r.gap),
            opt(r.dist_sq),
            opt(r.eps_metric),
            r.grad_calls.to_string(),
            format!("{:e}", r.elapsed_s),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(r: R) -> Result<Vec<TraceRecord>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header != TRACE_HEADER {
        return Err(Error::Format(format!("unexpected trace header {header:?}")));
    }
    let mut out: Vec<TraceRecord> = Vec::new();
    for rec in rdr.deserialize() {
        let rec: TraceRecord = rec?;
        if let Some(prev) = out.last() {
            if rec.k <= prev.k {
                return Err(Error::Format("iteration index must increase".into()));
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// What a solver exposes to observers after each iteration.
#[derive(Clone, Copy, Debug)]
pub struct IterateView<'a> {
    pub k: usize,
    pub x: &'a DVector<f64>,
    pub y: &'a DVector<f64>,
    /// Weighted-average output, when the method defines one.
    pub x_avg: Option<&'a DVector<f64>>,
    pub y_avg: Option<&'a DVector<f64>>,
    pub grad_calls_f: usize,
    pub grad_calls_h: usize,
    pub is_final: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

pub trait Observer {
    fn observe(&mut self, view: &IterateView<'_>) -> Flow;
}

impl<F: FnMut(&IterateView<'_>) -> Flow> Observer for F {
    fn observe(&mut self, view: &IterateView<'_>) -> Flow {
        self(view)
    }
}

/// Observer that never stops and records nothing.
pub struct Silent;

impl Observer for Silent {
    fn observe(&mut self, _: &IterateView<'_>) -> Flow {
        Flow::Continue
    }
}

/// Which point of the iterate view is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OutputPoint {
    #[default]
    Last,
    Averaged,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecorderOptions {
    /// Record every `every` iterations (plus the last one).
    pub every: usize,
    pub record_gap: bool,
    pub inner_tol: f64,
    /// Stop once the measured gap falls to this level.
    pub stop_gap: Option<f64>,
    pub check_every: usize,
    /// Stop once the squared distance to the saddle falls to this level.
    pub stop_dist_sq: Option<f64>,
    pub point: OutputPoint,
}

impl Default for RecorderOptions {
    fn default() -> Self {
        RecorderOptions {
            every: 1,
            record_gap: true,
            inner_tol: 1e-10,
            stop_gap: None,
            check_every: 10,
            stop_dist_sq: None,
            point: OutputPoint::Last,
        }
    }
}

/// Turns iterate views into [`TraceRecord`]s and applies stopping rules.
pub struct TraceRecorder<'a> {
    problem: &'a BilinearProblem,
    saddle: Option<&'a SaddleCertificate>,
    opts: RecorderOptions,
    records: Vec<TraceRecord>,
    start: Instant,
}

impl<'a> TraceRecorder<'a> {
    pub fn new(
        problem: &'a BilinearProblem,
        saddle: Option<&'a SaddleCertificate>,
        opts: RecorderOptions,
    ) -> Self {
        TraceRecorder {
            problem,
            saddle,
            opts,
            records: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn records(&self) -> &[TraceRecord] {
        &self.records
    }

    pub fn into_records(self) -> Vec<TraceRecord> {
        self.records
    }

    fn gap(&self, x: &DVector<f64>, y: &DVector<f64>) -> Option<f64> {
        primal_dual_gap(self.problem, x, y, self.opts.inner_tol)
            .ok()
            .map(|g| g.value)
    }
}

impl Observer for TraceRecorder<'_> {
    fn observe(&mut self, v: &IterateView<'_>) -> Flow {
        let (x, y) = match (self.opts.point, v.x_avg, v.y_avg) {
            (OutputPoint::Averaged, Some(xa), Some(ya)) => (xa, ya),
            _ => (v.x, v.y),
        };
        let every = self.opts.every.max(1);
        let check = self.opts.check_every.max(1);
        let dist_sq = self
            .saddle
            .map(|s| (x - &s.x).norm_squared() + (y - &s.y).norm_squared());
        let mut gap = None;
        let mut flow = Flow::Continue;
        if let (Some(limit), Some(d)) = (self.opts.stop_dist_sq, dist_sq) {
            if d <= limit {
                flow = Flow::Stop;
            }
        }
        if let Some(limit) = self.opts.stop_gap {
            if v.k.is_multiple_of(check) {
                gap = self.gap(x, y);
                if gap.is_some_and(|g| g <= limit) {
                    flow = Flow::Stop;
                }
            }
        }
        if v.k.is_multiple_of(every) || v.is_final || flow == Flow::Stop {
            if gap.is_none() && self.opts.record_gap {
                gap = self.gap(x, y);
            }
            let eps_metric = self
                .saddle
                .and_then(|s| eps_suboptimality(self.problem, x, y, s).ok());
            self.records.push(TraceRecord {
                k: v.k,
                gap,
                dist_sq,
                eps_metric,
                grad_calls: v.grad_calls_f,
                elapsed_s: self.start.elapsed().as_secs_f64(),
            });
        }
        flow
    }
}
