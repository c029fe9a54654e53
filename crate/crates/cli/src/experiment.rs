use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use lpd_core::harness::{default_start, run_algorithm, Constants};
use lpd_core::metrics::{solve_saddle, write_trace_csv, RecorderOptions, SaddleCertificate};
use lpd_core::problem::BilinearProblem;
use lpd_core::Error;
use serde::Serialize;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::instance::build_instance;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    Diverged,
    Failed,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlgorithmRun {
    pub algorithm: String,
    pub file: Option<String>,
    pub status: RunStatus,
    pub error: Option<String>,
    pub iterations: usize,
    pub transposed: bool,
    /// Step sizes and other constants; `null` marks an infinite step.
    pub constants: Constants,
    pub final_gap: Option<f64>,
    pub final_dist_sq: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub out_dir: PathBuf,
    pub runs: Vec<AlgorithmRun>,
    pub manifest: PathBuf,
}

impl ExperimentReport {
    pub fn trace_paths(&self) -> Vec<PathBuf> {
        self.runs
            .iter()
            .filter_map(|r| r.file.as_ref().map(|f| self.out_dir.join(f)))
            .collect()
    }

    pub fn all_diverged(&self) -> bool {
        !self.runs.is_empty() && self.runs.iter().all(|r| r.status == RunStatus::Diverged)
    }
}

/// Start points shared by every algorithm of an experiment.
pub fn start_points(
    p: &BilinearProblem,
    seed: u64,
) -> (nalgebra::DVector<f64>, nalgebra::DVector<f64>) {
    (
        default_start(p.dim_x(), seed),
        default_start(p.dim_y(), seed.wrapping_add(1)),
    )
}

fn file_names(cfg: &ExperimentConfig) -> Vec<String> {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for a in &cfg.algorithms {
        *seen.entry(a.name()).or_default() += 1;
    }
    cfg.algorithms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            if seen[a.name()] > 1 {
                format!("{}_{i}.csv", a.name())
            } else {
                format!("{}.csv", a.name())
            }
        })
        .collect()
}

fn instance_constants(p: &BilinearProblem) -> serde_json::Value {
    let cn = p.condition_numbers().ok();
    json!({
        "dim_x": p.dim_x(),
        "dim_y": p.dim_y(),
        "l_x": p.l_x(),
        "mu_x": p.mu_x(),
        "l_y": p.l_y(),
        "mu_y": p.mu_y(),
        "op_norm": p.op_norm(),
        "kappa_x": cn.map(|c| c.kappa_x),
        "kappa_y": cn.map(|c| c.kappa_y),
        "kappa_xy": cn.map(|c| c.kappa_xy),
        "kappa": cn.map(|c| c.kappa),
        "unconstrained": p.is_unconstrained(),
    })
}

/// Builds the instance, runs every algorithm from the same start point and
/// writes one trace CSV per algorithm plus `manifest.json`. A failing
/// algorithm is recorded in the manifest and does not stop the others.
pub fn run_experiment(cfg: &ExperimentConfig) -> anyhow::Result<ExperimentReport> {
    let built = build_instance(&cfg.instance)?;
    let p = &built.problem;
    let saddle: Result<SaddleCertificate, Error> = solve_saddle(p);
    let (x0, y0) = start_points(p, cfg.start_seed);
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let rec = RecorderOptions {
        every: cfg.metrics_every,
        record_gap: cfg.record_gap,
        inner_tol: cfg.inner_tol,
        ..Default::default()
    };
    let overrides = cfg.overrides();
    let mut runs = Vec::new();
    for (alg, file) in cfg.algorithms.iter().zip(file_names(cfg)) {
        let out = run_algorithm(
            p,
            saddle.as_ref().ok(),
            alg,
            &x0,
            &y0,
            cfg.iters,
            rec.clone(),
            &overrides,
        );
        let run = match out {
            Ok(o) => {
                let path = cfg.out_dir.join(&file);
                let w = fs::File::create(&path)
                    .with_context(|| format!("creating {}", path.display()))?;
                write_trace_csv(&o.records, std::io::BufWriter::new(w))?;
                let last = o.records.last();
                AlgorithmRun {
                    algorithm: o.algorithm,
                    file: Some(file),
                    status: RunStatus::Ok,
                    error: None,
                    iterations: o.iterations,
                    transposed: o.transposed,
                    constants: o.constants,
                    final_gap: last.and_then(|r| r.gap),
                    final_dist_sq: last.and_then(|r| r.dist_sq),
                }
            }
            Err(e) => AlgorithmRun {
                algorithm: alg.name().to_string(),
                file: None,
                status: match e {
                    Error::NumericalDivergence { .. } => RunStatus::Diverged,
                    _ => RunStatus::Failed,
                },
                error: Some(e.to_string()),
                iterations: match e {
                    Error::NumericalDivergence { iteration } => iteration,
                    _ => 0,
                },
                transposed: false,
                constants: Constants::new(),
                final_gap: None,
                final_dist_sq: None,
            },
        };
        runs.push(run);
    }
    let manifest = json!({
        "manifest_version": MANIFEST_VERSION,
        "tool": {"name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION")},
        "core_version": lpd_core::VERSION,
        "config": cfg,
        "instance": instance_constants(p),
        "saddle": match &saddle {
            Ok(c) => json!({"available": true, "exact": c.exact, "residual": c.residual}),
            Err(e) => json!({"available": false, "error": e.to_string()}),
        },
        "start": {"x_seed": cfg.start_seed, "y_seed": cfg.start_seed.wrapping_add(1)},
        "runs": runs,
    });
    let manifest_path = cfg.out_dir.join("manifest.json");
    write_json(&manifest_path, &manifest)?;
    Ok(ExperimentReport {
        out_dir: cfg.out_dir.clone(),
        runs,
        manifest: manifest_path,
    })
}

pub(crate) fn write_json(path: &Path, v: &serde_json::Value) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}
