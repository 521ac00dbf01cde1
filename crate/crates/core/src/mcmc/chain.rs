use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{init_state, sweep, ChainState, ModelContext};
use crate::error::{BccError, Result};
use crate::family::Family;
use crate::rng::{derive_seed, stream_rng, ChainRngs, Stream};

/// Dimensions needed to interpret the flat per-subject arrays of a [`Draw`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawLayout {
    pub n: usize,
    pub r: usize,
    pub k: usize,
    /// Fixed-effect length per marker.
    pub p: Vec<usize>,
    /// Random-effect length per marker.
    pub q: Vec<usize>,
    pub families: Vec<Family>,
}

impl DrawLayout {
    pub fn from_context(ctx: &ModelContext<'_>) -> Self {
        Self {
            n: ctx.n(),
            r: ctx.r(),
            k: ctx.k(),
            p: (0..ctx.r()).map(|r| ctx.designs.p(r)).collect(),
            q: (0..ctx.r()).map(|r| ctx.designs.q(r)).collect(),
            families: (0..ctx.r()).map(|r| ctx.family(r)).collect(),
        }
    }

    /// Offset of `beta[i][r]` inside [`Draw::beta`].
    pub fn beta_offset(&self, i: usize, r: usize) -> usize {
        let per_subject: usize = self.q.iter().sum();
        i * per_subject + self.q[..r].iter().sum::<usize>()
    }

    pub fn beta_len(&self) -> usize {
        self.n * self.q.iter().sum::<usize>()
    }
}

/// One retained snapshot. Labels are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub chain: usize,
    /// Index among the chain's retained draws.
    pub index: usize,
    pub alpha: Vec<f64>,
    pub pi: Vec<f64>,
    /// `[cluster][marker][coef]`.
    pub gamma: Vec<Vec<Vec<f64>>>,
    /// `[cluster][marker]`, row-major `q x q`.
    pub sigma: Vec<Vec<Vec<f64>>>,
    /// `[cluster][marker]`.
    pub sigma2: Vec<Vec<f64>>,
    pub global: Vec<usize>,
    /// Row-major `n x r`.
    pub local: Vec<usize>,
    /// Concatenated per subject, then per marker; see [`DrawLayout::beta_offset`].
    pub beta: Vec<f64>,
    /// Row-major `n x k`; empty when probabilities were not recorded.
    pub prob_global: Vec<f64>,
}

impl Draw {
    pub fn from_state(state: &ChainState, chain: usize, index: usize) -> Self {
        Self {
            chain,
            index,
            alpha: state.alpha.clone(),
            pi: state.pi.clone(),
            gamma: state
                .gamma
                .iter()
                .map(|row| row.iter().map(|g| g.as_slice().to_vec()).collect())
                .collect(),
            sigma: state
                .sigma
                .iter()
                .map(|row| row.iter().map(|s| s.transpose().as_slice().to_vec()).collect())
                .collect(),
            sigma2: state.sigma2.clone(),
            global: state.global.clone(),
            local: state.local.iter().flatten().copied().collect(),
            beta: state.beta.iter().flatten().flat_map(|b| b.iter().copied()).collect(),
            prob_global: state.prob_global.iter().flatten().copied().collect(),
        }
    }

    pub fn local(&self, layout: &DrawLayout, i: usize, r: usize) -> usize {
        self.local[i * layout.r + r]
    }

    pub fn prob(&self, layout: &DrawLayout, i: usize, k: usize) -> f64 {
        self.prob_global[i * layout.k + k]
    }

    pub fn beta_of(&self, layout: &DrawLayout, i: usize, r: usize) -> &[f64] {
        let o = layout.beta_offset(i, r);
        &self.beta[o..o + layout.q[r]]
    }
}

/// Post-burn-in acceptance rates and frozen step sizes of one chain, `[cluster][marker]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceSummary {
    pub chain: usize,
    pub gamma_rate: Vec<Vec<Option<f64>>>,
    pub beta_rate: Vec<Vec<Option<f64>>>,
    pub tau_gamma: Vec<Vec<f64>>,
    pub tau_beta: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    pub layout: DrawLayout,
    /// Chain-major, then by retained index.
    pub draws: Vec<Draw>,
    pub acceptance: Vec<AcceptanceSummary>,
    pub chain_seeds: Vec<u64>,
}

impl PosteriorDraws {
    pub fn n_chains(&self) -> usize {
        self.chain_seeds.len().max(self.draws.iter().map(|d| d.chain + 1).max().unwrap_or(0))
    }

    pub fn chain(&self, c: usize) -> impl Iterator<Item = &Draw> {
        self.draws.iter().filter(move |d| d.chain == c)
    }

    pub fn has_probabilities(&self) -> bool {
        !self.draws.is_empty() && self.draws.iter().all(|d| d.prob_global.len() == self.layout.n * self.layout.k)
    }
}

/// Runs one chain from `seed`. Retains every `thin`-th post-burn-in state, so
/// the draw count is `(iterations - burnin) / thin`.
pub fn run_chain(ctx: &ModelContext<'_>, chain: usize, seed: u64) -> Result<(Vec<Draw>, AcceptanceSummary, ChainState)> {
    let m = &ctx.config.mcmc;
    let wrap = |iteration: usize, e: BccError| BccError::Chain {
        chain: chain + 1,
        iteration,
        source: Box::new(e),
    };
    let mut init_rng = stream_rng(seed, Stream::Init);
    let mut state = init_state(ctx, &mut init_rng).map_err(|e| wrap(0, e))?;
    let mut rngs = ChainRngs::new(seed);
    let mut draws = Vec::with_capacity(m.retained());
    for it in 0..m.iterations {
        if it == m.burnin {
            state.accept_gamma.iter_mut().flatten().for_each(|c| c.reset_all());
            state.accept_beta.iter_mut().flatten().for_each(|c| c.reset_all());
        }
        sweep(&mut state, ctx, &mut rngs, it).map_err(|e| wrap(it + 1, e))?;
        if it >= m.burnin && (it + 1 - m.burnin) % m.thin == 0 {
            draws.push(Draw::from_state(&state, chain, draws.len()));
        }
    }
    let rates = |c: &Vec<Vec<super::AcceptCounter>>| c.iter().map(|row| row.iter().map(|a| a.rate()).collect()).collect();
    let summary = AcceptanceSummary {
        chain,
        gamma_rate: rates(&state.accept_gamma),
        beta_rate: rates(&state.accept_beta),
        tau_gamma: state.tau_gamma.clone(),
        tau_beta: state.tau_beta.clone(),
    };
    Ok((draws, summary, state))
}

/// Runs `mcmc.chains` independent chains in parallel, seeded from
/// `derive_seed(mcmc.seed, "chain", c)`, and merges them in chain order.
pub fn run_chains(ctx: &ModelContext<'_>) -> Result<PosteriorDraws> {
    let m = &ctx.config.mcmc;
    let seeds: Vec<u64> = (0..m.chains).map(|c| derive_seed(m.seed, "chain", c as u64)).collect();
    let results: Vec<Result<(Vec<Draw>, AcceptanceSummary, ChainState)>> =
        seeds.par_iter().enumerate().map(|(c, &s)| run_chain(ctx, c, s)).collect();
    let mut draws = Vec::with_capacity(m.retained() * m.chains);
    let mut acceptance = Vec::with_capacity(m.chains);
    for r in results {
        let (d, a, _) = r?;
        draws.extend(d);
        acceptance.push(a);
    }
    Ok(PosteriorDraws {
        layout: DrawLayout::from_context(ctx),
        draws,
        acceptance,
        chain_seeds: seeds,
    })
}
