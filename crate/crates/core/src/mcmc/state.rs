use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::ModelContext;
use crate::assignment::best_assignment;
use crate::error::{BccError, Result};
use crate::family::Family;
use super::laplace::LaplaceWork;
use crate::linalg::{chol_solve, cholesky_jittered};

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct AcceptCounter {
    pub window_accepted: u64,
    pub window_total: u64,
    pub accepted: u64,
    pub total: u64,
}

impl AcceptCounter {
    pub fn record(&mut self, accepted: bool) {
        self.window_total += 1;
        self.total += 1;
        if accepted {
            self.window_accepted += 1;
            self.accepted += 1;
        }
    }

    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.accepted as f64 / self.total as f64)
    }

    pub fn reset_window(&mut self) {
        self.window_accepted = 0;
        self.window_total = 0;
    }

    pub fn reset_all(&mut self) {
        *self = Self::default();
    }
}

/// Current values of one chain. Labels are 0-based.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub k: usize,
    /// `[subject][marker]`.
    pub local: Vec<Vec<usize>>,
    pub global: Vec<usize>,
    /// One entry per marker; all equal when adherence is shared.
    pub alpha: Vec<f64>,
    pub pi: Vec<f64>,
    /// `[cluster][marker]`.
    pub gamma: Vec<Vec<DVector<f64>>>,
    /// Random-effect covariance, `[cluster][marker]`.
    pub sigma: Vec<Vec<DMatrix<f64>>>,
    /// Gaussian dispersion, `[cluster][marker]`; exactly 1 for other families.
    pub sigma2: Vec<Vec<f64>>,
    /// Random effects tied to the current local cluster, `[subject][marker]`.
    pub beta: Vec<Vec<DVector<f64>>>,
    pub tau_gamma: Vec<Vec<f64>>,
    pub tau_beta: Vec<Vec<f64>>,
    pub accept_gamma: Vec<Vec<AcceptCounter>>,
    pub accept_beta: Vec<Vec<AcceptCounter>>,
    /// Normalised global-label probabilities from the latest `C` update, `[subject][cluster]`.
    pub prob_global: Vec<Vec<f64>>,
    /// Last random-effect mode found by the label update for every
    /// (subject, marker, cluster); warm starts only, see [`ChainState::re_slot`].
    pub re_cache: Vec<Vec<f64>>,
}

impl ChainState {
    pub(crate) fn re_slot(&self, i: usize, r: usize, k: usize) -> usize {
        (i * self.alpha.len() + r) * self.k + k
    }

    /// Checks the sweep invariants; returns a description of the first violation.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        let k = self.k;
        let lower = 1.0 / k as f64;
        let pi_sum: f64 = self.pi.iter().sum();
        if (pi_sum - 1.0).abs() > 1e-12 || self.pi.iter().any(|&p| !(p >= 0.0)) {
            return Err(format!("pi not on the simplex (sum {pi_sum})"));
        }
        for (r, &a) in self.alpha.iter().enumerate() {
            if !(a >= lower - 1e-12 && a <= 1.0) {
                return Err(format!("alpha[{r}] = {a} outside [1/K, 1]"));
            }
        }
        if self.global.iter().any(|&c| c >= k) || self.local.iter().flatten().any(|&l| l >= k) {
            return Err("label out of range".into());
        }
        for (c, row) in self.sigma.iter().enumerate() {
            for (r, s) in row.iter().enumerate() {
                if (s - s.transpose()).amax() > 1e-9 * s.amax().max(1.0) || nalgebra::Cholesky::new(s.clone()).is_none() {
                    return Err(format!("Sigma[{c}][{r}] not symmetric positive definite"));
                }
            }
        }
        Ok(())
    }

    /// Marker-`r` linear predictor for subject `i` under cluster `k`, with the
    /// subject's random effect included only when `k` is its incumbent local cluster.
    pub(crate) fn eta_into(&self, ctx: &ModelContext<'_>, i: usize, r: usize, k: usize, with_beta: bool, out: &mut Vec<f64>) {
        let d = ctx.designs.get(i, r);
        let n = d.x.nrows();
        out.clear();
        let g = &self.gamma[k][r];
        let b = &self.beta[i][r];
        for j in 0..n {
            let mut e = 0.0;
            for c in 0..d.x.ncols() {
                e += d.x[(j, c)] * g[c];
            }
            if with_beta {
                for c in 0..d.z.ncols() {
                    e += d.z[(j, c)] * b[c];
                }
            }
            out.push(e);
        }
    }
}

/// Equal-frequency rank binning of `values` into `k` labels (0-based),
/// ties broken by index. Returns `None` when every value is identical.
pub fn rank_bin_labels(values: &[f64], k: usize) -> Option<Vec<usize>> {
    let n = values.len();
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if !(hi - lo > 1e-12) {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut labels = vec![0; n];
    for (rank, &i) in order.iter().enumerate() {
        labels[i] = (rank * k / n).min(k - 1);
    }
    Some(labels)
}

/// Renames the labels of `labels` to agree as much as possible with `reference`.
fn align_to(labels: &mut [usize], reference: &[usize], k: usize) {
    // cost[a][b]: disagreement when local label a is renamed to b
    let mut agree = vec![vec![0.0; k]; k];
    for (&l, &c) in labels.iter().zip(reference) {
        agree[l][c] += 1.0;
    }
    let cost: Vec<Vec<f64>> = agree.iter().map(|row| row.iter().map(|&v| -v).collect()).collect();
    let rename = best_assignment(&cost);
    for l in labels.iter_mut() {
        *l = rename[*l];
    }
}

/// Penalised Newton fit of a GLM with `N(0, V0)` prior on the coefficients, used
/// only to seed `gamma`.
fn glm_fit(ctx: &ModelContext<'_>, members: &[usize], r: usize, v0_inv: &DMatrix<f64>, phi: f64) -> DVector<f64> {
    let family = ctx.family(r);
    let p = ctx.designs.p(r);
    let mut gamma = DVector::zeros(p);
    if members.is_empty() {
        return gamma;
    }
    let objective = |g: &DVector<f64>| -> f64 {
        let mut total = -0.5 * (g.transpose() * v0_inv * g)[(0, 0)];
        for &i in members {
            let d = ctx.designs.get(i, r);
            let eta = &d.x * g;
            for (&y, &e) in ctx.data.series(i, r).values.iter().zip(eta.iter()) {
                total += family.log_density(y, e, phi);
            }
        }
        total
    };
    let mut current = objective(&gamma);
    for _ in 0..50 {
        let mut grad = -(v0_inv * &gamma);
        let mut hess = v0_inv.clone();
        for &i in members {
            let d = ctx.designs.get(i, r);
            let eta = &d.x * &gamma;
            family.accumulate_score(&ctx.data.series(i, r).values, &d.x, eta.as_slice(), phi, &mut grad, &mut hess);
        }
        let Some(l) = cholesky_jittered(&hess) else { break };
        let step = chol_solve(&l, &grad);
        let mut scale = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let cand = &gamma + &step * scale;
            let val = objective(&cand);
            if val.is_finite() && val >= current {
                gamma = cand;
                improved = (val - current).abs() > 1e-10 * current.abs().max(1.0);
                current = val;
                break;
            }
            scale *= 0.5;
        }
        if !improved {
            break;
        }
    }
    gamma
}

/// Conditional mode of one subject's random effect under prior precision `sigma_inv`.
fn beta_mode(ctx: &ModelContext<'_>, i: usize, r: usize, gamma: &DVector<f64>, sigma_inv: &DMatrix<f64>, phi: f64) -> DVector<f64> {
    let d = ctx.designs.get(i, r);
    let q = d.z.ncols();
    let y = &ctx.data.series(i, r).values;
    let mut w = LaplaceWork::default();
    match w.fit(ctx.family(r), y, &d.x, &d.z, gamma.as_slice(), sigma_inv, 0.0, phi, &vec![0.0; q]) {
        Some(_) => DVector::from_vec(w.mode),
        None => DVector::zeros(q),
    }
}

/// Builds the starting state: rank-binned labels (marker 1 seeds `C`, other
/// markers renamed to agree with it), `alpha = (1 + 1/K)/2`, uniform `pi`,
/// per-cluster GLM fits for `gamma`, `Sigma = 0.1 I`, residual-variance `sigma2`,
/// random effects at their conditional modes under that `Sigma`, and unit step sizes.
pub fn init_state<R: Rng + ?Sized>(ctx: &ModelContext<'_>, rng: &mut R) -> Result<ChainState> {
    let (n, r_count, k) = (ctx.n(), ctx.r(), ctx.k());
    let mut per_marker: Vec<Vec<usize>> = Vec::with_capacity(r_count);
    for r in 0..r_count {
        let means: Vec<f64> = (0..n).map(|i| ctx.data.series(i, r).mean()).collect();
        let labels = rank_bin_labels(&means, k).unwrap_or_else(|| (0..n).map(|_| rng.random_range(0..k)).collect());
        per_marker.push(labels);
    }
    let global = per_marker[0].clone();
    for labels in per_marker.iter_mut().skip(1) {
        align_to(labels, &global, k);
    }
    let local: Vec<Vec<usize>> = (0..n).map(|i| (0..r_count).map(|r| per_marker[r][i]).collect()).collect();

    let mut gamma = vec![Vec::with_capacity(r_count); k];
    let mut sigma2 = vec![vec![1.0; r_count]; k];
    for r in 0..r_count {
        let family = ctx.family(r);
        let mut ssr_total = 0.0;
        let mut n_total = 0usize;
        let mut cluster_var = vec![None; k];
        for c in 0..k {
            let members: Vec<usize> = (0..n).filter(|&i| local[i][r] == c).collect();
            let g = glm_fit(ctx, &members, r, &ctx.v0_inv[c][r], 1.0);
            if family == Family::Gaussian && !members.is_empty() {
                let mut ssr = 0.0;
                let mut cnt = 0;
                for &i in &members {
                    let eta = &ctx.designs.get(i, r).x * &g;
                    for (&y, &e) in ctx.data.series(i, r).values.iter().zip(eta.iter()) {
                        ssr += (y - e) * (y - e);
                        cnt += 1;
                    }
                }
                ssr_total += ssr;
                n_total += cnt;
                cluster_var[c] = Some((ssr / cnt as f64).max(1e-6));
            }
            gamma[c].push(g);
        }
        if family == Family::Gaussian {
            let pooled = if n_total > 0 { (ssr_total / n_total as f64).max(1e-6) } else { 1.0 };
            for c in 0..k {
                sigma2[c][r] = if ctx.config.sigma_common { pooled } else { cluster_var[c].unwrap_or(pooled) };
            }
        }
    }

    let sigma = (0..k)
        .map(|_| (0..r_count).map(|r| DMatrix::identity(ctx.designs.q(r), ctx.designs.q(r)) * 0.1).collect())
        .collect();
    let sigma_inv0: Vec<DMatrix<f64>> = (0..r_count).map(|r| DMatrix::identity(ctx.designs.q(r), ctx.designs.q(r)) * 10.0).collect();
    let beta = (0..n)
        .map(|i| {
            (0..r_count)
                .map(|r| {
                    let c = local[i][r];
                    beta_mode(ctx, i, r, &gamma[c][r], &sigma_inv0[r], sigma2[c][r])
                })
                .collect()
        })
        .collect();
    let alpha0 = 0.5 * (1.0 + 1.0 / k as f64);
    let state = ChainState {
        k,
        local,
        global,
        alpha: vec![alpha0; r_count],
        pi: vec![1.0 / k as f64; k],
        gamma,
        sigma,
        sigma2,
        beta,
        tau_gamma: vec![vec![1.0; r_count]; k],
        tau_beta: vec![vec![1.0; r_count]; k],
        accept_gamma: vec![vec![AcceptCounter::default(); r_count]; k],
        accept_beta: vec![vec![AcceptCounter::default(); r_count]; k],
        prob_global: vec![vec![1.0 / k as f64; k]; n],
        re_cache: (0..n * r_count * k).map(|s| vec![0.0; ctx.designs.q((s / k) % r_count)]).collect(),
    };
    state
        .check_invariants()
        .map_err(|m| BccError::numerical("init_state", m))?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_binning() {
        assert_eq!(rank_bin_labels(&[1.0, 2.0, 3.0, 4.0], 2).unwrap(), vec![0, 0, 1, 1]);
        assert_eq!(rank_bin_labels(&[4.0, 1.0, 3.0, 2.0], 2).unwrap(), vec![1, 0, 1, 0]);
        assert_eq!(rank_bin_labels(&[0.1, 0.5, 0.2, 0.9, 0.7, 0.3], 3).unwrap(), vec![0, 1, 0, 2, 2, 1]);
        assert!(rank_bin_labels(&[2.0; 5], 2).is_none());
    }

    #[test]
    fn alignment_renames() {
        let mut l = vec![1, 1, 0, 0, 2];
        align_to(&mut l, &[0, 0, 1, 1, 2], 3);
        assert_eq!(l, vec![0, 0, 1, 1, 2]);
    }
}
