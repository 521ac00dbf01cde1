use crate::assignment::best_assignment;
use crate::error::{BccError, Result};
use crate::mcmc::{Draw, DrawLayout, PosteriorDraws};

const MAX_ROUNDS: usize = 100;
const LOG_FLOOR: f64 = 1e-300;

/// Draws after label-switching correction. `permutations[s][old] = new` was
/// applied to every cluster-indexed quantity of draw `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelabeledDraws {
    pub draws: PosteriorDraws,
    pub permutations: Vec<Vec<usize>>,
    pub rounds: usize,
    /// Total KL objective after each round; non-increasing.
    pub objective: Vec<f64>,
}

/// Rewrites every cluster-indexed field of `draw` under `perm[old] = new`.
pub fn permute_draw(draw: &Draw, perm: &[usize]) -> Draw {
    let k = perm.len();
    let mut out = draw.clone();
    for (old, &new) in perm.iter().enumerate() {
        out.pi[new] = draw.pi[old];
        out.gamma[new] = draw.gamma[old].clone();
        out.sigma[new] = draw.sigma[old].clone();
        out.sigma2[new] = draw.sigma2[old].clone();
    }
    out.global.iter_mut().for_each(|c| *c = perm[*c]);
    out.local.iter_mut().for_each(|l| *l = perm[*l]);
    if !draw.prob_global.is_empty() {
        for (row_in, row_out) in draw.prob_global.chunks(k).zip(out.prob_global.chunks_mut(k)) {
            for (old, &new) in perm.iter().enumerate() {
                row_out[new] = row_in[old];
            }
        }
    }
    out
}

/// Element-wise mean of the permuted probability matrices.
fn reference_matrix(draws: &[Draw], perms: &[Vec<usize>], layout: &DrawLayout) -> Vec<f64> {
    let (n, k) = (layout.n, layout.k);
    let mut q = vec![0.0; n * k];
    for (d, perm) in draws.iter().zip(perms) {
        for i in 0..n {
            for (old, &new) in perm.iter().enumerate() {
                q[i * k + new] += d.prob_global[i * k + old];
            }
        }
    }
    let s = draws.len() as f64;
    q.iter_mut().for_each(|x| *x /= s);
    q
}

/// `cost[old][new] = sum_i P[i][old] log(P[i][old] / Q[i][new])`.
fn kl_cost(prob: &[f64], q: &[f64], layout: &DrawLayout) -> Vec<Vec<f64>> {
    let (n, k) = (layout.n, layout.k);
    let mut cost = vec![vec![0.0; k]; k];
    for i in 0..n {
        for old in 0..k {
            let p = prob[i * k + old];
            if p <= 0.0 {
                continue;
            }
            let lp = p.ln();
            for new in 0..k {
                cost[old][new] += p * (lp - q[i * k + new].max(LOG_FLOOR).ln());
            }
        }
    }
    cost
}

/// Stephens' KL relabelling: alternate between the mean probability matrix
/// and per-draw optimal column permutations until no permutation changes
/// (at most 100 rounds). Exhaustive search for `K <= 6`, Hungarian beyond.
/// The objective is non-increasing from the second round on.
pub fn relabel_stephens(draws: &PosteriorDraws) -> Result<RelabeledDraws> {
    if !draws.has_probabilities() {
        return Err(BccError::MissingProbabilities);
    }
    let layout = &draws.layout;
    let k = layout.k;
    let raw = &draws.draws;
    let mut perms: Vec<Vec<usize>> = vec![(0..k).collect(); raw.len()];
    let mut objective = Vec::new();
    let mut rounds = 0;
    // the first round uses draw 0 as the reference so a half-switched chain
    // cannot start from a flat average
    let mut q = raw[0].prob_global.clone();
    while rounds < MAX_ROUNDS {
        rounds += 1;
        if rounds > 1 {
            q = reference_matrix(raw, &perms, layout);
        }
        let mut changed = false;
        let mut total = 0.0;
        for (d, perm) in raw.iter().zip(perms.iter_mut()) {
            let cost = kl_cost(&d.prob_global, &q, layout);
            let current: f64 = perm.iter().enumerate().map(|(o, &n)| cost[o][n]).sum();
            let best = best_assignment(&cost);
            let best_cost: f64 = best.iter().enumerate().map(|(o, &n)| cost[o][n]).sum();
            // keep the incumbent on ties so the loop reaches a fixed point
            if best_cost < current - 1e-12 * current.abs().max(1.0) {
                *perm = best;
                changed = true;
                total += best_cost;
            } else {
                total += current;
            }
        }
        objective.push(total);
        if !changed && rounds > 1 {
            break;
        }
    }
    let relabeled = raw.iter().zip(&perms).map(|(d, p)| permute_draw(d, p)).collect();
    Ok(RelabeledDraws {
        draws: PosteriorDraws {
            layout: layout.clone(),
            draws: relabeled,
            acceptance: draws.acceptance.clone(),
            chain_seeds: draws.chain_seeds.clone(),
        },
        permutations: perms,
        rounds,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(n: usize, k: usize) -> DrawLayout {
        DrawLayout { n, r: 1, k, p: vec![1], q: vec![1], families: vec![crate::family::Family::Gaussian] }
    }

    fn draw(probs: &[f64], global: Vec<usize>, k: usize) -> Draw {
        let n = global.len();
        Draw {
            chain: 0,
            index: 0,
            alpha: vec![0.9],
            pi: (0..k).map(|j| (j + 1) as f64).collect(),
            gamma: (0..k).map(|j| vec![vec![j as f64]]).collect(),
            sigma: vec![vec![vec![1.0]]; k],
            sigma2: vec![vec![1.0]; k],
            local: global.clone(),
            global,
            beta: vec![0.0; n],
            prob_global: probs.to_vec(),
        }
    }

    #[test]
    fn two_draw_transposition() {
        // second draw has its probability columns swapped
        let a = draw(&[0.9, 0.1, 0.2, 0.8, 0.95, 0.05], vec![0, 1, 0], 2);
        let b = draw(&[0.1, 0.9, 0.8, 0.2, 0.05, 0.95], vec![1, 0, 1], 2);
        let pd = PosteriorDraws { layout: layout(3, 2), draws: vec![a.clone(), b], acceptance: vec![], chain_seeds: vec![0] };
        let out = relabel_stephens(&pd).unwrap();
        assert_ne!(out.permutations[0], out.permutations[1]);
        assert_eq!(out.draws.draws[0].global, out.draws.draws[1].global);
        for w in out.objective[1..].windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
    }

    #[test]
    fn missing_probabilities() {
        let mut a = draw(&[0.5, 0.5], vec![0], 2);
        a.prob_global.clear();
        let pd = PosteriorDraws { layout: layout(1, 2), draws: vec![a], acceptance: vec![], chain_seeds: vec![0] };
        assert!(matches!(relabel_stephens(&pd), Err(BccError::MissingProbabilities)));
    }

    #[test]
    fn permute_moves_cluster_fields() {
        let d = draw(&[0.7, 0.2, 0.1], vec![0], 3);
        let p = permute_draw(&d, &[2, 0, 1]);
        assert_eq!(p.global, vec![2]);
        assert_eq!(p.pi, vec![2.0, 3.0, 1.0]);
        assert_eq!(p.prob_global, vec![0.2, 0.1, 0.7]);
        assert_eq!(p.gamma[2], vec![vec![0.0]]);
    }
}
