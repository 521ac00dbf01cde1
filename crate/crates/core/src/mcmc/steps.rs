use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::laplace::{gaussian_base, LaplaceWork};
use super::{vartheta_unchecked, ChainState, ModelContext};
use crate::config::{McmcControls, SigmaStructure};
use crate::dist::{
    mvn_log_density_precision, sample_dirichlet, sample_inv_gamma, sample_mvn_from_precision, sample_wishart,
    TruncatedBeta,
};
use crate::error::{BccError, Result};
use crate::family::Family;
use crate::linalg::{chol_inverse, chol_log_det, chol_solve, cholesky_jittered, symmetrize};
use crate::rng::ChainRngs;

/// Variance draws are clamped into this range so a vague inverse-gamma draw
/// for an empty cluster cannot produce 0 or infinity.
const VAR_MIN: f64 = 1e-10;
const VAR_MAX: f64 = 1e10;

/// Sampled adherence is kept strictly below 1 so every label stays reachable.
const ALPHA_MAX: f64 = 1.0 - 1e-12;

/// Result of one Metropolis–Hastings proposal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MhOutcome {
    pub accepted: bool,
    /// Full log acceptance ratio, including the proposal-density correction.
    pub log_ratio: f64,
}

/// Exponentiates and normalises log-weights with the max-shift trick.
pub fn normalize_log_weights(log_weights: &[f64]) -> Result<Vec<f64>> {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return Err(BccError::numerical("label update", "likelihood underflow"));
    }
    let mut w: Vec<f64> = log_weights.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    Ok(w)
}

/// Inverse-CDF pick from normalised probabilities given `u` in [0, 1).
fn pick(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    // u landed in the rounding gap at the top: last label with positive mass
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

pub fn sample_from_log_weights<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> Result<usize> {
    let probs = normalize_log_weights(log_weights)?;
    Ok(pick(&probs, rng.random::<f64>()))
}

fn series_log_lik(family: Family, y: &[f64], eta: &[f64], phi: f64) -> f64 {
    y.iter().zip(eta).map(|(&yj, &ej)| family.log_density(yj, ej, phi)).sum()
}

/// Prior precision and its log-determinant for every `(cluster, marker)`.
fn sigma_precisions(state: &ChainState) -> Result<Vec<Vec<(DMatrix<f64>, f64)>>> {
    let mut out = Vec::with_capacity(state.k);
    for (k, row) in state.sigma.iter().enumerate() {
        let mut per = Vec::with_capacity(row.len());
        for (r, s) in row.iter().enumerate() {
            let l = cholesky_jittered(s)
                .ok_or_else(|| BccError::numerical(format!("Sigma[k={},r={}]", k + 1, r + 1), "not positive definite"))?;
            per.push((chol_inverse(&l), -chol_log_det(&l)));
        }
        out.push(per);
    }
    Ok(out)
}

/// Local labels: `P(L_ir = k) ∝ vartheta(k, C_i, alpha_r) f_kr(y_ir)`, with
/// `f_kr` the likelihood marginalised over `beta_ir ~ N(0, Sigma_kr)` by a
/// Laplace approximation (exact for Gaussian markers). Every cluster is scored
/// the same way, so the incumbent gets no advantage from its fitted random
/// effect. On a label change the random effect is drawn from the Gaussian
/// approximation to its conditional under the new cluster.
pub fn step_update_l<R: Rng + ?Sized>(state: &mut ChainState, ctx: &ModelContext<'_>, rng: &mut R) -> Result<()> {
    let k_count = state.k;
    let prec = sigma_precisions(state)?;
    let mut lw = vec![0.0; k_count];
    let mut work: Vec<LaplaceWork> = vec![LaplaceWork::default(); k_count];
    for i in 0..ctx.n() {
        for r in 0..ctx.r() {
            let family = ctx.family(r);
            let d = ctx.designs.get(i, r);
            let y = &ctx.data.series(i, r).values;
            let incumbent = state.local[i][r];
            for k in 0..k_count {
                let prior = vartheta_unchecked(k, state.global[i], state.alpha[r], k_count);
                if prior <= 0.0 {
                    lw[k] = f64::NEG_INFINITY;
                    continue;
                }
                let slot = state.re_slot(i, r, k);
                let start = if k == incumbent { state.beta[i][r].as_slice() } else { state.re_cache[slot].as_slice() };
                let (si, logdet) = &prec[k][r];
                let phi = state.sigma2[k][r];
                let w = &mut work[k];
                let lm = w.fit(family, y, &d.x, &d.z, state.gamma[k][r].as_slice(), si, *logdet, phi, start).ok_or_else(|| {
                    BccError::numerical(format!("label update (subject {}, marker {})", i + 1, r + 1), "singular curvature")
                })?;
                state.re_cache[slot].copy_from_slice(&w.mode);
                let base = if family == Family::Gaussian { gaussian_base(y, phi) } else { 0.0 };
                lw[k] = prior.ln() + lm + base;
            }
            let next = sample_from_log_weights(rng, &lw)?;
            if next != incumbent {
                state.local[i][r] = next;
                state.beta[i][r] = DVector::from_vec(work[next].sample(rng));
            }
        }
    }
    Ok(())
}

/// Adherence: `TBeta(delta1 + tau_r, delta2 + N - tau_r, 1/K)` with `tau_r` the
/// number of subjects whose marker-`r` label matches the global label, or the
/// pooled version when adherence is shared.
pub fn step_update_alpha<R: Rng + ?Sized>(state: &mut ChainState, ctx: &ModelContext<'_>, rng: &mut R) -> Result<()> {
    let n = ctx.n() as f64;
    let lower = 1.0 / state.k as f64;
    let matches: Vec<f64> = (0..ctx.r())
        .map(|r| (0..ctx.n()).filter(|&i| state.local[i][r] == state.global[i]).count() as f64)
        .collect();
    if ctx.config.alpha_shared {
        let (d1, d2) = ctx.priors.delta[0];
        let tau: f64 = matches.iter().sum();
        let total = n * ctx.r() as f64;
        let a = TruncatedBeta::new(d1 + tau, d2 + total - tau, lower).sample(rng).min(ALPHA_MAX);
        state.alpha.iter_mut().for_each(|x| *x = a);
    } else {
        for (r, &tau) in matches.iter().enumerate() {
            let (d1, d2) = ctx.priors.delta[r];
            state.alpha[r] = TruncatedBeta::new(d1 + tau, d2 + n - tau, lower).sample(rng).min(ALPHA_MAX);
        }
    }
    Ok(())
}

/// Global labels: `P(C_i = k) ∝ pi_k prod_r vartheta(L_ir, k, alpha_r)`.
/// The normalised vector is kept for relabelling.
pub fn step_update_c<R: Rng + ?Sized>(state: &mut ChainState, ctx: &ModelContext<'_>, rng: &mut R) -> Result<()> {
    let k_count = state.k;
    let mut lw = vec![0.0; k_count];
    for i in 0..ctx.n() {
        for (k, w) in lw.iter_mut().enumerate() {
            let mut total = state.pi[k].ln();
            for r in 0..ctx.r() {
                total += vartheta_unchecked(state.local[i][r], k, state.alpha[r], k_count).ln();
            }
            *w = total;
        }
        let probs = normalize_log_weights(&lw)?;
        state.global[i] = pick(&probs, rng.random::<f64>());
        state.prob_global[i] = probs;
    }
    Ok(())
}

/// Proportions: `Dirichlet(phi0 + counts)`.
pub fn step_update_pi<R: Rng + ?Sized>(state: &mut ChainState, ctx: &ModelContext<'_>, rng: &mut R) -> Result<()> {
    let mut conc = ctx.priors.phi0.clone();
    for &c in &state.global {
        conc[c] += 1.0;
    }
    state.pi = sample_dirichlet(rng, &conc);
    Ok(())
}

/// Log target, its gradient and the proposal precision (prior precision plus
/// the likelihood's negative Hessian) at one point.
struct Evaluation {
    log_target: f64,
    grad: DVector<f64>,
    precision: DMatrix<f64>,
}

/// One Newton-centred MH move: propose from `N(b + P^{-1} G, tau P^{-1})`
/// and accept with the full ratio including the reverse-proposal density.
fn newton_mh<R: Rng + ?Sized>(
    rng: &mut R,
    current: &DVector<f64>,
    tau: f64,
    eval: impl Fn(&DVector<f64>) -> Evaluation,
    context: impl Fn() -> String,
) -> Result<(DVector<f64>, MhOutcome)> {
    let here = eval(current);
    let l_here = cholesky_jittered(&here.precision)
        .ok_or_else(|| BccError::numerical(context(), "proposal precision not positive definite"))?;
    let mean_fwd = current + chol_solve(&l_here, &here.grad);
    let proposal = sample_mvn_from_precision(rng, &mean_fwd, &l_here, tau);
    let there = eval(&proposal);
    let reject = |rng: &mut R| {
        let _ = rng.random::<f64>();
        Ok((current.clone(), MhOutcome { accepted: false, log_ratio: f64::NEG_INFINITY }))
    };
    if !there.log_target.is_finite() {
        return reject(rng);
    }
    let Some(l_there) = cholesky_jittered(&there.precision) else {
        return reject(rng);
    };
    let mean_rev = &proposal + chol_solve(&l_there, &there.grad);
    let log_q_fwd = mvn_log_density_precision(&proposal, &mean_fwd, &l_here, tau);
    let log_q_rev = mvn_log_density_precision(current, &mean_rev, &l_there, tau);
    let log_ratio = there.log_target - here.log_target + log_q_rev - log_q_fwd;
    let u: f64 = rng.random();
    if log_ratio.is_finite() && u.ln() < log_ratio {
        Ok((proposal, MhOutcome { accepted: true, log_ratio }))
    } else {
        Ok((current.clone(), MhOutcome { accepted: false, log_ratio }))
    }
}

fn members_of(state: &ChainState, ctx: &ModelContext<'_>, k: usize, r: usize) -> Vec<usize> {
    (0..ctx.n()).filter(|&i| state.local[i][r] == k).collect()
}

fn eval_gamma(state: &ChainState, ctx: &ModelContext<'_>, k: usize, r: usize, members: &[usize], g: &DVector<f64>) -> Evaluation {
    let family = ctx.family(r);
    let phi = state.sigma2[k][r];
    let v0_inv = &ctx.v0_inv[k][r];
    let prior_grad = v0_inv * g;
    let mut log_target = -0.5 * g.dot(&prior_grad);
    let mut grad = -prior_grad;
    let mut precision = v0_inv.clone();
    let mut eta = Vec::new();
    for &i in members {
        let d = ctx.designs.get(i, r);
        let b = &state.beta[i][r];
        eta.clear();
        for j in 0..d.x.nrows() {
            let mut e = 0.0;
            for c in 0..d.x.ncols() {
                e += d.x[(j, c)] * g[c];
            }
            for c in 0..d.z.ncols() {
                e += d.z[(j, c)] * b[c];
            }
            eta.push(e);
        }
        let y = &ctx.data.series(i, r).values;
        log_target += series_log_lik(family, y, &eta, phi);
        family.accumulate_score(y, &d.x, &eta, phi, &mut grad, &mut precision);
    }
    Evaluation { log_target, grad, precision }
}

/// Fixed effects, one Newton-centred MH move per (cluster, marker). For
/// Gaussian markers the proposal (with step size 1) is the exact conditional.
pub fn step_update_gamma<R: Rng + ?Sized>(state: &mut ChainState, ctx: &ModelContext<'_>, rng: &mut R) -> Result<Vec<MhOutcome>> {
    let mut outcomes = Vec::with_capacity(state.k * ctx.r());
    for k in 0..state.k {
        for r in 0..ctx.r() {
            let members = members_of(state, ctx, k, r);
            let tau = if ctx.family(r) == Family::Gaussian { 1.0 } else { state.tau_gamma[k][r] };
            let current = state.gamma[k][r].clone();
            let (next, outcome) = {
                let st: &ChainState = state;
                newton_mh(rng, &current, tau, |g| eval_gamma(st, ctx, k, r, &members, g), || format!("gamma[k={},r={}]", k + 1, r + 1))?
            };
            state.gamma[k][r] = next;
            state.accept_gamma[k][r].record(outcome.accepted);
            outcomes.push(outcome);
        }
    }
    Ok(outcomes)
}

fn eval_beta(
    state: &ChainState,
    ctx: &ModelContext<'_>,
    i: usize,
    r: usize,
    k: usize,
    sigma_inv: &DMatrix<f64>,
    b: &DVector<f64>,
) -> Evaluation {
    let family = ctx.family(r);
    let phi = state.sigma2[k][r];
    let d = ctx.designs.get(i, r);
    let g = &state.gamma[k][r];
    let prior_grad = sigma_inv * b;
    let mut log_target = -0.5 * b.dot(&prior_grad);
    let mut grad = -prior_grad;
    let mut precision = sigma_inv.clone();
    let eta: Vec<f64> = (0..d.x.nrows())
        .map(|j| {
            let mut e = 0.0;
            for c in 0..d.x.ncols() {
                e += d.x[(j, c)] * g[c];
            }
            for c in 0..d.z.ncols() {
                e += d.z[(j, c)] * b[c];
            }
            e
        })
        .collect();
    let y = &ctx.data.series(i, r).values;
    log_target += series_log_lik(family, y, &eta, phi);
    family.accumulate_score(y, &d.z, &eta, phi, &mut grad, &mut precision);
    Evaluation { log_target, grad, precision }
}

/// Random effects, one Newton-centred MH move per (subject, marker) under the
/// subject's current local cluster.
pub fn step_update_beta<R: Rng + ?Sized>(state: &mut ChainState, ctx: &ModelContext<'_>, rng: &mut R) -> Result<Vec<MhOutcome>> {
    let mut sigma_inv = vec![Vec::with_capacity(ctx.r()); state.k];
    for (k, row) in state.sigma.iter().enumerate() {
        for (r, s) in row.iter().enumerate() {
            let l = cholesky_jittered(s)
                .ok_or_else(|| BccError::numerical(format!("Sigma[k={},r={}]", k + 1, r + 1), "not positive definite"))?;
            sigma_inv[k].push(chol_inverse(&l));
        }
    }
    let mut outcomes = Vec::with_capacity(ctx.n() * ctx.r());
    for i in 0..ctx.n() {
        for r in 0..ctx.r() {
            let k = state.local[i][r];
            let tau = if ctx.family(r) == Family::Gaussian { 1.0 } else { state.tau_beta[k][r] };
            let current = state.beta[i][r].clone();
            let (next, outcome) = {
                let st: &ChainState = state;
                let si = &sigma_inv[k][r];
                newton_mh(rng, &current, tau, |b| eval_beta(st, ctx, i, r, k, si, b), || format!("beta[i={},r={}]", i + 1, r + 1))?
            };
            state.beta[i][r] = next;
            state.accept_beta[k][r].record(outcome.accepted);
            outcomes.push(outcome);
        }
    }
    Ok(outcomes)
}

/// Random-effect covariances. Diagonal: each variance from
/// `IG(c0 + n_k/2, d0 + sum beta_j^2 / 2)`. Full: the precision from
/// `Wishart(lambda0 + n_k, (lambda0 Lambda0 + sum beta beta')^{-1})`.
pub fn step_update_sigma<R: Rng + ?Sized>(state: &mut ChainState, ctx: &ModelContext<'_>, rng: &mut R) -> Result<()> {
    for k in 0..state.k {
        for r in 0..ctx.r() {
            let q = ctx.designs.q(r);
            let cp = &ctx.priors.cluster[k][r];
            let members = members_of(state, ctx, k, r);
            let n_k = members.len() as f64;
            let mut scatter = DMatrix::zeros(q, q);
            for &i in &members {
                let b = &state.beta[i][r];
                scatter += b * b.transpose();
            }
            state.sigma[k][r] = match ctx.config.sigma_structure {
                SigmaStructure::Diagonal => {
                    let diag = DVector::from_fn(q, |j, _| {
                        sample_inv_gamma(rng, cp.c0 + 0.5 * n_k, cp.d0 + 0.5 * scatter[(j, j)]).clamp(VAR_MIN, VAR_MAX)
                    });
                    DMatrix::from_diagonal(&diag)
                }
                SigmaStructure::Full => {
                    let mut post = &ctx.wishart_prior[k][r] + scatter;
                    symmetrize(&mut post);
                    let l = cholesky_jittered(&post)
                        .ok_or_else(|| BccError::numerical(format!("Sigma[k={},r={}]", k + 1, r + 1), "Wishart scale not positive definite"))?;
                    let scale = chol_inverse(&l);
                    let precision = sample_wishart(rng, cp.lambda0 + n_k, &scale);
                    let lp = cholesky_jittered(&precision)
                        .ok_or_else(|| BccError::numerical(format!("Sigma[k={},r={}]", k + 1, r + 1), "sampled precision singular"))?;
                    let mut cov = chol_inverse(&lp);
                    symmetrize(&mut cov);
                    cov
                }
            };
        }
    }
    Ok(())
}

/// Gaussian dispersions: `IG(a0 + n/2, b0 + SSR/2)` per (cluster, marker), or
/// one draw per marker from the cluster-summed parameters when shared.
pub fn step_update_sigma2<R: Rng + ?Sized>(state: &mut ChainState, ctx: &ModelContext<'_>, rng: &mut R) -> Result<()> {
    let mut eta = Vec::new();
    for r in 0..ctx.r() {
        if ctx.family(r) != Family::Gaussian {
            continue;
        }
        let mut shape = vec![0.0; state.k];
        let mut scale = vec![0.0; state.k];
        for k in 0..state.k {
            let cp = &ctx.priors.cluster[k][r];
            shape[k] = cp.a0;
            scale[k] = cp.b0;
        }
        for i in 0..ctx.n() {
            let k = state.local[i][r];
            state.eta_into(ctx, i, r, k, true, &mut eta);
            let y = &ctx.data.series(i, r).values;
            shape[k] += 0.5 * y.len() as f64;
            scale[k] += 0.5 * y.iter().zip(&eta).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
        if ctx.config.sigma_common {
            let a: f64 = shape.iter().sum();
            let b: f64 = scale.iter().sum();
            let draw = sample_inv_gamma(rng, a, b).clamp(VAR_MIN, VAR_MAX);
            for k in 0..state.k {
                state.sigma2[k][r] = draw;
            }
        } else {
            for k in 0..state.k {
                state.sigma2[k][r] = sample_inv_gamma(rng, shape[k], scale[k]).clamp(VAR_MIN, VAR_MAX);
            }
        }
    }
    Ok(())
}

fn adapt_one(tau: &mut f64, rate: f64, band: [f64; 2]) {
    if rate < band[0] {
        *tau *= 0.5f64.exp();
    } else if rate > band[1] {
        *tau *= (-0.5f64).exp();
    }
}

/// Step-size adaptation at the end of each window during burn-in:
/// `tau *= e^{0.5}` below the band, `tau *= e^{-0.5}` above it. Gaussian
/// markers keep `tau = 1`.
pub fn adapt_tuning(state: &mut ChainState, families: &[Family], controls: &McmcControls, iteration: usize) {
    if iteration >= controls.burnin || (iteration + 1) % controls.adapt_window != 0 {
        return;
    }
    for k in 0..state.k {
        for (r, &family) in families.iter().enumerate() {
            for (tau, counter) in [
                (&mut state.tau_gamma[k][r], &mut state.accept_gamma[k][r]),
                (&mut state.tau_beta[k][r], &mut state.accept_beta[k][r]),
            ] {
                if family != Family::Gaussian && counter.window_total > 0 {
                    let rate = counter.window_accepted as f64 / counter.window_total as f64;
                    adapt_one(tau, rate, controls.target_accept);
                }
                counter.reset_window();
            }
        }
    }
}

/// One full sweep in the fixed update order, followed by adaptation when in burn-in.
pub fn sweep(state: &mut ChainState, ctx: &ModelContext<'_>, rngs: &mut ChainRngs, iteration: usize) -> Result<()> {
    step_update_l(state, ctx, &mut rngs.local)?;
    step_update_alpha(state, ctx, &mut rngs.alpha)?;
    step_update_c(state, ctx, &mut rngs.global)?;
    step_update_pi(state, ctx, &mut rngs.proportions)?;
    step_update_gamma(state, ctx, &mut rngs.fixed)?;
    step_update_sigma(state, ctx, &mut rngs.covariance)?;
    step_update_beta(state, ctx, &mut rngs.random)?;
    step_update_sigma2(state, ctx, &mut rngs.dispersion)?;
    let families: Vec<Family> = (0..ctx.r()).map(|r| ctx.family(r)).collect();
    adapt_tuning(state, &families, &ctx.config.mcmc, iteration);
    Ok(())
}


#[cfg(test)]
mod kernel_tests {
    use super::*;
    use crate::config::{default_vague_priors, MarkerConfig, ModelConfig};
    use crate::longdata::{build_designs, Dataset, DesignTerm, LongRecord, MarkerSpec};
    use crate::mcmc::init_state;
    use crate::rng::{stream_rng, Stream};

    fn poisson_context_parts() -> (Dataset, ModelConfig) {
        let ys = [[3.0, 5.0, 2.0, 4.0], [1.0, 0.0, 2.0, 1.0]];
        let mut records = Vec::new();
        for (i, row) in ys.iter().enumerate() {
            for (j, &y) in row.iter().enumerate() {
                records.push(LongRecord { subject_id: format!("s{i}"), marker_id: "m".into(), time: j as f64, value: y });
            }
        }
        let data = Dataset::from_records(&records, vec![MarkerSpec::new("m", Family::Poisson)]).unwrap();
        let config = ModelConfig {
            markers: vec![MarkerConfig {
                name: "m".into(),
                family: Family::Poisson,
                fixed: vec![DesignTerm::Intercept, DesignTerm::TimePow(1)],
                random: vec![DesignTerm::Intercept],
            }],
            k: 2,
            alpha_shared: false,
            sigma_common: true,
            sigma_structure: SigmaStructure::Diagonal,
            priors: None,
            mcmc: McmcControls::new(10, 20, 1),
        };
        (data, config)
    }

    /// Posterior mean and variance of a scalar random intercept by quadrature.
    fn quadrature(y: &[f64], offset: &[f64], var: f64) -> (f64, f64) {
        let grid: Vec<f64> = (0..20_001).map(|j| -3.0 + 6.0 * j as f64 / 20_000.0).collect();
        let logs: Vec<f64> = grid
            .iter()
            .map(|&b| {
                let ll: f64 = y.iter().zip(offset).map(|(&yy, &o)| yy * (o + b) - (o + b).exp()).sum();
                ll - 0.5 * b * b / var
            })
            .collect();
        let m = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = logs.iter().map(|l| (l - m).exp()).collect();
        let z: f64 = w.iter().sum();
        let mean: f64 = grid.iter().zip(&w).map(|(b, w)| b * w).sum::<f64>() / z;
        let second: f64 = grid.iter().zip(&w).map(|(b, w)| b * b * w).sum::<f64>() / z;
        (mean, second - mean * mean)
    }

    #[test]
    fn poisson_random_effect_kernel_targets_its_conditional() {
        let (data, config) = poisson_context_parts();
        let priors = default_vague_priors(&config, None);
        let designs = build_designs(&data, &config.design_spec()).unwrap();
        let ctx = ModelContext::new(&data, &designs, &config, &priors).unwrap();
        let mut state = init_state(&ctx, &mut stream_rng(1, Stream::Init)).unwrap();
        for k in 0..2 {
            state.gamma[k][0] = DVector::from_vec(vec![0.8, 0.1]);
            state.sigma[k][0] = DMatrix::from_element(1, 1, 0.3);
            state.tau_beta[k][0] = 0.5;
        }
        let offset: Vec<f64> = (0..4).map(|t| 0.8 + 0.1 * t as f64).collect();
        let (qm, qv) = quadrature(&data.series(0, 0).values, &offset, 0.3);
        let mut rng = stream_rng(2, Stream::RandomEffects);
        let n = 100_000;
        let mut draws = Vec::with_capacity(n);
        for _ in 0..n {
            step_update_beta(&mut state, &ctx, &mut rng).unwrap();
            draws.push(state.beta[0][0][0]);
        }
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / n as f64;
        assert!((mean - qm).abs() < 0.01, "mean {mean} vs {qm}");
        assert!((var / qv - 1.0).abs() < 0.05, "var {var} vs {qv}");
    }
}
