use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use lpd_core::harness::{fit_sweep, sweep_cell, SweepRow};
use lpd_core::metrics::LogLogFit;
use rayon::prelude::*;
use serde_json::json;

use crate::config::{ExperimentConfig, InstanceSpec};
use crate::experiment::write_json;

pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub fits: BTreeMap<String, lpd_core::Result<LogLogFit>>,
    pub summary: PathBuf,
    pub slopes: PathBuf,
}

/// Runs every (r, algorithm) cell of the condition-number sweep on at most
/// `jobs` threads, then writes `summary.csv` (one row per cell, `NA` for a
/// failed cell) and `slopes.csv` (log-log fit per algorithm).
pub fn sweep_kappa(cfg: &ExperimentConfig, jobs: usize) -> anyhow::Result<SweepOutput> {
    let Some(sweep) = &cfg.sweep else {
        bail!("config has no sweep section");
    };
    let InstanceSpec::GradedQuadratic { d, seed, .. } = cfg.instance else {
        bail!("sweep needs an appendix_f instance");
    };
    if sweep.r_values.is_empty() {
        bail!("sweep.r_values must be nonempty");
    }
    let cells: Vec<_> = sweep
        .r_values
        .iter()
        .flat_map(|&r| cfg.algorithms.iter().map(move |a| (r, a)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?;
    let rows: Vec<SweepRow> = pool.install(|| {
        cells
            .par_iter()
            .map(|(r, a)| sweep_cell(d, *r, seed, a, sweep.max_iters))
            .collect()
    });
    let fits = fit_sweep(&rows);
    fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;

    let summary = cfg.out_dir.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary)?;
    w.write_record(["r", "kappa_x", "algorithm", "rate_constant"])?;
    for row in &rows {
        w.write_record([
            format!("{}", row.r),
            format!("{:e}", row.kappa_x),
            row.algorithm.clone(),
            row.rate.map_or("NA".into(), |v| format!("{v:e}")),
        ])?;
    }
    w.flush()?;

    let slopes = cfg.out_dir.join("slopes.csv");
    let mut w = csv::Writer::from_path(&slopes)?;
    w.write_record(["algorithm", "slope", "intercept", "r_squared", "note"])?;
    for (alg, fit) in &fits {
        match fit {
            Ok(f) => w.write_record([
                alg.clone(),
                format!("{:e}", f.slope),
                format!("{:e}", f.intercept),
                format!("{:e}", f.r_squared),
                String::new(),
            ])?,
            Err(e) => w.write_record([
                alg.clone(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
                e.to_string(),
            ])?,
        }
    }
    w.flush()?;

    write_json(
        &cfg.out_dir.join("manifest.json"),
        &json!({
            "manifest_version": crate::experiment::MANIFEST_VERSION,
            "tool": {"name": env!("CARGO_PKG_NAME"), "version": env!("CARGO_PKG_VERSION")},
            "core_version": lpd_core::VERSION,
            "config": cfg,
            "rate_window": lpd_core::harness::RATE_WINDOW,
        }),
    )?;
    Ok(SweepOutput {
        rows,
        fits,
        summary,
        slopes,
    })
}
