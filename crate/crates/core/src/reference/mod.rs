//! Independent solvers used as oracles and as competitors.

mod agd;
mod baselines;
mod conjugate;
mod olpd;
mod pd;
mod ppm;
mod prox;

pub use agd::{agd_distance_bound, agd_params, pd_agd_min, pd_agd_min_dual, AgdParams};
pub use baselines::{
    balanced_kappa, baseline_step, default_config, gda_step, mp_balanced, mp_step, ogda_step,
    run_baseline, BaselineConfig, BaselineKind, BaselineState, VectorField,
};
pub use conjugate::ConjugatePair;
pub use olpd::{olpd_step, run_olpd, OlpdState};
pub use pd::{pd_certified_params, pd_kappa, pd_step, run_pd, run_pd_with, PdParams, PdState};
pub use ppm::{ppm_kappa, ppm_step_quadratic, proximal_distance_bound, run_ppm};
pub use prox::{BoxIndicator, L1Norm, ProxOperator, QuadraticProx, ScaledConjugateProx, ZeroProx};
