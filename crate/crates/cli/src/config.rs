use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use lpd_core::harness::{Algorithm, StepOverride};
use serde::{Deserialize, Serialize};

/// One experiment: an instance, the algorithms to run on it and output
/// settings. Read from a single JSON document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub instance: InstanceSpec,
    pub algorithms: Vec<Algorithm>,
    pub iters: usize,
    #[serde(default = "one")]
    pub metrics_every: usize,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub overrides: Option<StepOverride>,
    /// Certificate for overridden constant schedules; checked by `validate`.
    #[serde(default)]
    pub witness: Option<WitnessSpec>,
    /// Seed of the normal start points.
    #[serde(default)]
    pub start_seed: u64,
    #[serde(default = "yes")]
    pub record_gap: bool,
    #[serde(default = "default_inner_tol")]
    pub inner_tol: f64,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn default_inner_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InstanceSpec {
    /// Generator family with geometrically spread spectra.
    #[serde(rename = "appendix_f")]
    GradedQuadratic {
        d: usize,
        r: f64,
        #[serde(default)]
        seed: u64,
    },
    PolicyEval {
        #[serde(default)]
        trace_path: Option<PathBuf>,
        /// Discount used when reading `trace_path`.
        #[serde(default)]
        gamma: Option<f64>,
        #[serde(default)]
        synthetic: Option<SyntheticTrace>,
        rho: f64,
        /// Accept a singular feature covariance (max block only concave).
        #[serde(default)]
        semidefinite: bool,
    },
    RobustLs(RobustLsSpec),
    Custom(CustomSource),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTrace {
    pub n: usize,
    pub d: usize,
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
}

/// `min_x max_y ‖Ax - y‖² - λ‖y - y₀‖²`, with `A` and `y₀` given or drawn
/// from a seeded normal distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustLsSpec {
    pub lambda: f64,
    #[serde(default)]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    #[serde(default)]
    pub rows: Option<usize>,
    #[serde(default)]
    pub cols: Option<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CustomSource {
    File { path: PathBuf },
    Inline(Box<CustomInstance>),
}

/// Quadratic blocks `½xᵀPx + qᵀx + c`, coupling matrix (rows index `y`) and
/// optional feasible sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CustomInstance {
    pub f: QuadraticSpec,
    pub h: QuadraticSpec,
    pub a: Vec<Vec<f64>>,
    #[serde(default)]
    pub set_x: Option<SetSpec>,
    #[serde(default)]
    pub set_y: Option<SetSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticSpec {
    pub hessian: Vec<Vec<f64>>,
    #[serde(default)]
    pub linear: Option<Vec<f64>>,
    #[serde(default)]
    pub constant: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SetSpec {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WitnessSpec {
    /// The witness paired with the theory schedule.
    Canonical,
    Constant {
        alpha_x: f64,
        alpha_y: f64,
        alpha_u: f64,
        alpha_v: f64,
        ratio: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub r_values: Vec<f64>,
    #[serde(default = "default_sweep_iters")]
    pub max_iters: usize,
}

fn default_sweep_iters() -> usize {
    2_000_000
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> anyhow::Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).context("config is not JSON")?;
        // a manifest carries the config that produced it
        let value = match value.get("config") {
            Some(c) if value.get("manifest_version").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(value).context("config does not match the schema")
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        Ok(cfg)
    }

    /// Makes relative input paths relative to the config's directory.
    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.instance {
            InstanceSpec::PolicyEval {
                trace_path: Some(p),
                ..
            } => fix(p),
            InstanceSpec::Custom(CustomSource::File { path }) => fix(path),
            _ => {}
        }
    }

    pub fn overrides(&self) -> StepOverride {
        self.overrides.unwrap_or_default()
    }
}

pub(crate) fn matrix_from_rows(
    rows: &[Vec<f64>],
    what: &str,
) -> anyhow::Result<nalgebra::DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if n == 0 || m == 0 {
        bail!("{what}: matrix must be nonempty");
    }
    if rows.iter().any(|r| r.len() != m) {
        bail!("{what}: rows have different lengths");
    }
    Ok(nalgebra::DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub(crate) fn rows_from_matrix(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
