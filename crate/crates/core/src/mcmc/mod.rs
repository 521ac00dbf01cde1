//! Gibbs sampler with embedded Metropolis–Hastings steps.
//!
//! One sweep updates, in order: local labels `L`, adherence `alpha`, global
//! labels `C`, proportions `pi`, then per-cluster fixed effects `gamma`,
//! random-effect covariances `Sigma`, random effects `beta` and Gaussian
//! dispersions `sigma2`.

mod chain;
mod laplace;
mod state;
mod steps;

use nalgebra::DMatrix;

pub use chain::{run_chain, run_chains, AcceptanceSummary, Draw, DrawLayout, PosteriorDraws};
pub use state::{init_state, rank_bin_labels, AcceptCounter, ChainState};
pub use steps::{
    adapt_tuning, normalize_log_weights, sample_from_log_weights, step_update_alpha, step_update_beta,
    step_update_c, step_update_gamma, step_update_l, step_update_pi, step_update_sigma, step_update_sigma2,
    sweep, MhOutcome,
};

use crate::config::{ModelConfig, PriorHyperparams, SigmaStructure};
use crate::error::{BccError, Result};
use crate::family::Family;
use crate::linalg::{chol_inverse, cholesky_jittered};
use crate::longdata::{Dataset, DesignMatrices};

/// Dependence of a local label on the global label: `alpha` on a match,
/// `(1 - alpha) / (K - 1)` otherwise. Labels are 0-based.
pub fn vartheta(local: usize, global: usize, alpha: f64, k: usize) -> Result<f64> {
    let lower = 1.0 / k as f64;
    if !(alpha >= lower - 1e-12 && alpha <= 1.0) {
        return Err(BccError::Invalid(format!("adherence {alpha} outside [1/K, 1] for K = {k}")));
    }
    if local >= k || global >= k {
        return Err(BccError::Invalid(format!("label out of range for K = {k}")));
    }
    Ok(vartheta_unchecked(local, global, alpha, k))
}

#[inline]
pub(crate) fn vartheta_unchecked(local: usize, global: usize, alpha: f64, k: usize) -> f64 {
    if local == global {
        alpha
    } else {
        (1.0 - alpha) / (k as f64 - 1.0)
    }
}

/// Everything a sweep reads but never writes.
#[derive(Debug, Clone)]
pub struct ModelContext<'a> {
    pub data: &'a Dataset,
    pub designs: &'a DesignMatrices,
    pub config: &'a ModelConfig,
    pub priors: &'a PriorHyperparams,
    /// `V0^{-1}` per `[cluster][marker]`.
    pub v0_inv: Vec<Vec<DMatrix<f64>>>,
    /// `lambda0 * Lambda0` per `[cluster][marker]` (full covariance structure only).
    pub wishart_prior: Vec<Vec<DMatrix<f64>>>,
}

impl<'a> ModelContext<'a> {
    pub fn new(
        data: &'a Dataset,
        designs: &'a DesignMatrices,
        config: &'a ModelConfig,
        priors: &'a PriorHyperparams,
    ) -> Result<Self> {
        crate::config::validate_config(config, priors, Some(data)).map_err(BccError::Validation)?;
        let mut v0_inv = Vec::with_capacity(config.k);
        let mut wishart_prior = Vec::with_capacity(config.k);
        for row in &priors.cluster {
            let mut inv_row = Vec::new();
            let mut w_row = Vec::new();
            for cp in row {
                let l = cholesky_jittered(&cp.v0).ok_or_else(|| BccError::numerical("prior", "V0 not positive definite"))?;
                inv_row.push(chol_inverse(&l));
                w_row.push(if config.sigma_structure == SigmaStructure::Full {
                    &cp.lambda0_scale * cp.lambda0
                } else {
                    DMatrix::zeros(0, 0)
                });
            }
            v0_inv.push(inv_row);
            wishart_prior.push(w_row);
        }
        Ok(Self {
            data,
            designs,
            config,
            priors,
            v0_inv,
            wishart_prior,
        })
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn n(&self) -> usize {
        self.data.n_subjects()
    }

    pub fn r(&self) -> usize {
        self.data.n_markers()
    }

    pub fn family(&self, r: usize) -> Family {
        self.data.family(r)
    }
}
