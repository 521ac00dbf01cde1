//! End-to-end fit: sample, relabel, summarise.

use crate::config::{default_vague_priors, validate_config, ModelConfig, PriorHyperparams};
use crate::error::{BccError, Result};
use crate::metrics::{select_k, KSelection};
use crate::longdata::{build_designs, Dataset, DesignMatrices};
use crate::mcmc::{run_chains, ModelContext, PosteriorDraws};
use crate::postprocess::{posterior_predictive_check, relabel_stephens, summarize, ClusteringResult, PpcResult, RelabeledDraws};
use crate::rng::derive_seed;

#[derive(Debug, Clone)]
pub struct FitOutput {
    pub designs: DesignMatrices,
    pub raw: PosteriorDraws,
    pub relabeled: RelabeledDraws,
    pub ppc: Option<PpcResult>,
    pub result: ClusteringResult,
}

/// Runs every configured chain, relabels the pooled draws and summarises them.
/// The posterior predictive check, when requested, uses the relabelled draws
/// and a seed derived from the master seed.
pub fn fit(data: &Dataset, config: &ModelConfig, priors: &PriorHyperparams, with_ppc: bool) -> Result<FitOutput> {
    let designs = build_designs(data, &config.design_spec())?;
    let raw = {
        let ctx = ModelContext::new(data, &designs, config, priors)?;
        run_chains(&ctx)?
    };
    let relabeled = relabel_stephens(&raw)?;
    let ppc = if with_ppc {
        Some(posterior_predictive_check(&relabeled.draws, data, &designs, ppc_seed(config))?)
    } else {
        None
    };
    let result = summarize(&relabeled, ppc.as_ref())?;
    Ok(FitOutput { designs, raw, relabeled, ppc, result })
}

pub fn ppc_seed(config: &ModelConfig) -> u64 {
    derive_seed(config.mcmc.seed, "ppc", 0)
}

/// Fits every `K` in `ks` with default priors and picks the one with the
/// largest posterior mean adjusted adherence. Results follow the order of `ks`.
pub fn select_k_fits(data: &Dataset, config: &ModelConfig, ks: &[usize]) -> Result<(KSelection, Vec<ClusteringResult>)> {
    let mut results = Vec::with_capacity(ks.len());
    for &k in ks {
        let at_k = |e: BccError| BccError::AtK { k, source: Box::new(e) };
        let cfg = config.with_k(k);
        let priors = default_vague_priors(&cfg, Some(data));
        validate_config(&cfg, &priors, Some(data)).map_err(|v| at_k(BccError::Validation(v)))?;
        results.push(fit(data, &cfg, &priors, false).map_err(at_k)?.result);
    }
    let scores: Vec<(usize, f64)> = results.iter().map(|r| (r.k, r.mean_adjusted_adherence)).collect();
    Ok((select_k(&scores)?, results))
}
