//! Problem generators and builders: controlled-spectrum quadratic games,
//! policy evaluation from transition traces, robust least squares.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::problem::{BilinearProblem, Coupling, FeasibleSet, QuadraticFunction};

/// Threshold on `λ_min(C)` below which policy evaluation is not strongly concave.
pub const SINGULAR_C_TOL: f64 = 1e-12;

/// Haar-distributed orthogonal matrix from a seed (QR with sign fix).
pub fn gen_random_orthonormal(d: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(&mut rng));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Controlled-spectrum quadratic game settings.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub d: usize,
    pub r: f64,
    pub seed: u64,
}

/// Builds `f(x) = xᵀBx`, `h(y) = yᵀCy` and coupling `A`, where `A`, `B̃`, `C̃`
/// share singular values `1, r, …, r^{d-1}` and `B = B̃ᵀB̃`, `C = C̃ᵀC̃`.
///
/// Resulting constants: `μ = 2`, `κ_x = κ_y = r^{2(d-1)}`, `‖A‖ = r^{d-1}`.
pub fn gen_quadratic_instance(cfg: &GeneratorConfig) -> Result<BilinearProblem> {
    let GeneratorConfig { d, r, seed } = *cfg;
    if d == 0 {
        return Err(Error::InvalidArgument("dimension must be positive".into()));
    }
    if !(r >= 1.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "spectrum ratio must be >= 1, got {r}"
        )));
    }
    let top = r.powi(2 * (d as i32 - 1));
    if !(top < 1e14) {
        return Err(Error::IllConditioned(format!("r^(2(d-1)) = {top:e}")));
    }
    let lambda = DMatrix::from_diagonal(&DVector::from_fn(d, |i, _| r.powi(i as i32)));
    let q = |k: u64| gen_random_orthonormal(d, seed.wrapping_add(k));
    let a = q(2) * &lambda * q(1).transpose();
    let bt = q(3) * &lambda * q(4).transpose();
    let ct = q(5) * &lambda * q(6).transpose();
    let b = bt.transpose() * bt;
    let c = ct.transpose() * ct;
    let f = QuadraticFunction::new(b * 2.0, DVector::zeros(d), 0.0)?;
    let h = QuadraticFunction::new(c * 2.0, DVector::zeros(d), 0.0)?;
    BilinearProblem::quadratic(f, h, a)
}

/// Transition samples `(φ_t, φ'_t, r_t)` with discount `γ`.
#[derive(Clone, Debug, PartialEq)]
pub struct MdpTrace {
    /// Row `t` holds `φ_t`.
    pub features: DMatrix<f64>,
    /// Row `t` holds `φ'_t`.
    pub next_features: DMatrix<f64>,
    pub rewards: DVector<f64>,
    pub gamma: f64,
}

impl MdpTrace {
    pub fn new(
        features: DMatrix<f64>,
        next_features: DMatrix<f64>,
        rewards: DVector<f64>,
        gamma: f64,
    ) -> Result<Self> {
        if next_features.shape() != features.shape() {
            return Err(Error::DimensionMismatch {
                context: "next-feature rows",
                expected: features.nrows(),
                got: next_features.nrows(),
            });
        }
        if rewards.len() != features.nrows() {
            return Err(Error::DimensionMismatch {
                context: "reward count",
                expected: features.nrows(),
                got: rewards.len(),
            });
        }
        if !(0.0..1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "discount must lie in [0,1), got {gamma}"
            )));
        }
        if features.nrows() == 0 {
            return Err(Error::InvalidArgument("empty trace".into()));
        }
        Ok(MdpTrace {
            features,
            next_features,
            rewards,
            gamma,
        })
    }

    pub fn len(&self) -> usize {
        self.features.nrows()
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    /// Writes `phi_*, phi_next_*, reward` columns with a header row.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let d = self.dim();
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..d).map(|i| format!("phi_{i}")).collect();
        header.extend((0..d).map(|i| format!("phi_next_{i}")));
        header.push("reward".into());
        out.write_record(&header)?;
        for t in 0..self.len() {
            let mut row: Vec<String> = Vec::with_capacity(2 * d + 1);
            row.extend(self.features.row(t).iter().map(|v| format!("{v:e}")));
            row.extend(self.next_features.row(t).iter().map(|v| format!("{v:e}")));
            row.push(format!("{:e}", self.rewards[t]));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, gamma: f64) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        let cols = header.len();
        if cols < 3 || cols % 2 == 0 {
            return Err(Error::Format(format!("expected 2d+1 columns, got {cols}")));
        }
        let d = (cols - 1) / 2;
        for i in 0..d {
            if header[i] != format!("phi_{i}") || header[d + i] != format!("phi_next_{i}") {
                return Err(Error::Format(format!("unexpected header {:?}", header)));
            }
        }
        if &header[2 * d] != "reward" {
            return Err(Error::Format("last column must be reward".into()));
        }
        let mut phi = Vec::new();
        let mut next = Vec::new();
        let mut rewards = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let vals: Vec<f64> = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Format(e.to_string()))?;
            phi.extend_from_slice(&vals[..d]);
            next.extend_from_slice(&vals[d..2 * d]);
            rewards.push(vals[2 * d]);
        }
        let n = rewards.len();
        MdpTrace::new(
            DMatrix::from_row_slice(n, d, &phi),
            DMatrix::from_row_slice(n, d, &next),
            DVector::from_vec(rewards),
            gamma,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path, gamma: f64) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?, gamma)
    }

    /// `(A, b, C)` with `A = (1/n)Σ φ(φ - γφ')ᵀ`, `b = (1/n)Σ r φ`, `C = (1/n)Σ φφᵀ`.
    pub fn moments(&self) -> (DMatrix<f64>, DVector<f64>, DMatrix<f64>) {
        let n = self.len() as f64;
        let phi = &self.features;
        let td = &self.features - &self.next_features * self.gamma;
        let a = phi.transpose() * td / n;
        let b = phi.transpose() * &self.rewards / n;
        let c = phi.transpose() * phi / n;
        (a, b, c)
    }
}

/// Synthetic trace: an anisotropic AR(1) walk whose states are centred,
/// rotated onto principal axes and scaled to unit top variance.
///
/// Axis noise scales decay geometrically by a factor 10 across the
/// dimensions, which leaves a spread spectrum in the feature covariance.
/// If the covariance is numerically singular the walk is perturbed with
/// seeded isotropic jitter of size `1e-3·2^(attempt-1)` and rebuilt.
pub fn gen_synthetic_mdp_trace(n: usize, d: usize, gamma: f64, seed: u64) -> Result<MdpTrace> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidArgument("need n > 0 and d > 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let decay = if d > 1 {
        10f64.powf(-1.0 / (d as f64 - 1.0))
    } else {
        1.0
    };
    let mut states = DMatrix::zeros(n + 1, d);
    let mut s = DVector::<f64>::zeros(d);
    for t in 0..=n {
        for i in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            s[i] = 0.95 * s[i] + decay.powi(i as i32) * z;
        }
        states.set_row(t, &s.transpose());
    }
    let rewards = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    let mut last = 0.0;
    for attempt in 0..12u32 {
        let mut walk = states.clone();
        if attempt > 0 {
            let mut jr = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1000 + attempt as u64));
            let delta = 1e-3 * 2f64.powi(attempt as i32 - 1);
            walk += DMatrix::from_fn(n + 1, d, |_, _| {
                delta * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut jr)
            });
        }
        let feats = normalize_features(&walk);
        let trace = MdpTrace::new(
            feats.rows(0, n).into_owned(),
            feats.rows(1, n).into_owned(),
            rewards.clone(),
            gamma,
        )?;
        let (_, _, c) = trace.moments();
        let (lo, _) = linalg::symmetric_extremes(&c);
        if lo > SINGULAR_C_TOL {
            return Ok(trace);
        }
        last = lo;
    }
    Err(Error::SingularC(last))
}

fn normalize_features(states: &DMatrix<f64>) -> DMatrix<f64> {
    let rows = states.nrows() as f64;
    let mean = states.row_mean();
    let mut centred = states.clone();
    for mut row in centred.row_iter_mut() {
        row -= &mean;
    }
    let cov = centred.transpose() * &centred / rows;
    let eig = SymmetricEigen::new(cov);
    let top = eig.eigenvalues.max();
    let scale = if top > 0.0 { 1.0 / top.sqrt() } else { 1.0 };
    centred * eig.eigenvectors * scale
}

fn policy_eval_parts(
    trace: &MdpTrace,
    rho: f64,
) -> Result<(QuadraticFunction, QuadraticFunction, DMatrix<f64>, f64)> {
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "rho must be positive, got {rho}"
        )));
    }
    let (a, b, c) = trace.moments();
    let d = trace.dim();
    let (lo, _) = linalg::symmetric_extremes(&c);
    let f = QuadraticFunction::isotropic(d, rho)?;
    let h = QuadraticFunction::new(c, -b, 0.0)?;
    Ok((f, h, -a, lo))
}

/// `min_θ max_w (ρ/2)‖θ‖² - wᵀAθ - (½wᵀCw - wᵀb)`, stored with coupling `-A`.
pub fn build_policy_eval(trace: &MdpTrace, rho: f64) -> Result<BilinearProblem> {
    let (f, h, coupling, lo) = policy_eval_parts(trace, rho)?;
    if lo <= SINGULAR_C_TOL {
        return Err(Error::SingularC(lo));
    }
    BilinearProblem::quadratic(f, h, coupling)
}

/// As [`build_policy_eval`] but accepts a singular `C`; the max block is then
/// only concave and the problem should be solved through its transpose.
pub fn build_policy_eval_semidefinite(trace: &MdpTrace, rho: f64) -> Result<BilinearProblem> {
    let (f, h, coupling, _) = policy_eval_parts(trace, rho)?;
    BilinearProblem::quadratic(f, h, coupling)
}

/// `min_x max_y ‖Ax - y‖² - λ‖y - y₀‖²` for `λ > 1`.
pub fn build_robust_least_squares(
    a: &DMatrix<f64>,
    y0: &DVector<f64>,
    lambda: f64,
) -> Result<BilinearProblem> {
    if !(lambda > 1.0) {
        return Err(Error::LambdaTooSmall(lambda));
    }
    let (m, n) = a.shape();
    if y0.len() != m {
        return Err(Error::DimensionMismatch {
            context: "robust LS anchor",
            expected: m,
            got: y0.len(),
        });
    }
    let f = QuadraticFunction::new(a.transpose() * a * 2.0, DVector::zeros(n), 0.0)?;
    let h = QuadraticFunction::new(
        DMatrix::identity(m, m) * (2.0 * (lambda - 1.0)),
        y0 * (-2.0 * lambda),
        lambda * y0.norm_squared(),
    )?;
    BilinearProblem::new(
        f.into(),
        h.into(),
        Coupling::new(a * -2.0)?,
        FeasibleSet::unconstrained(n),
        FeasibleSet::unconstrained(m),
    )
}
