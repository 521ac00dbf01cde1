use rand::Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dist::std_normal;
use crate::error::{BccError, Result};
use crate::family::Family;
use crate::longdata::{Dataset, DesignMatrices};
use crate::mcmc::{Draw, DrawLayout, PosteriorDraws};
use crate::rng::{derive_seed, stream_rng, Stream};

/// Variance floor in the discrepancy denominator, for saturated Binomial means.
const VAR_FLOOR: f64 = 1e-12;

/// Linear predictor of subject `i`, marker `r` under its local cluster in `draw`.
pub fn fitted_eta(draw: &Draw, layout: &DrawLayout, designs: &DesignMatrices, i: usize, r: usize) -> Vec<f64> {
    let k = draw.local(layout, i, r);
    let d = designs.get(i, r);
    let g = &draw.gamma[k][r];
    let b = draw.beta_of(layout, i, r);
    (0..d.x.nrows())
        .map(|j| {
            let fixed: f64 = (0..d.x.ncols()).map(|c| d.x[(j, c)] * g[c]).sum();
            let random: f64 = (0..d.z.ncols()).map(|c| d.z[(j, c)] * b[c]).sum();
            fixed + random
        })
        .collect()
}

pub fn sample_response<R: Rng + ?Sized>(rng: &mut R, family: Family, eta: f64, phi: f64) -> f64 {
    match family {
        Family::Gaussian => eta + phi.sqrt() * std_normal(rng),
        Family::Poisson => {
            let lambda = family.inverse_link(eta);
            if lambda <= 0.0 {
                0.0
            } else {
                Poisson::new(lambda).map(|p| p.sample(rng)).unwrap_or(0.0)
            }
        }
        Family::Binomial => f64::from(u8::from(rng.random::<f64>() < family.inverse_link(eta))),
    }
}

/// Replicated dataset from one posterior draw, with labels and random effects held fixed.
pub fn ppc_replicate<R: Rng + ?Sized>(
    draw: &Draw,
    layout: &DrawLayout,
    data: &Dataset,
    designs: &DesignMatrices,
    rng: &mut R,
) -> Dataset {
    let mut values = Vec::with_capacity(layout.n);
    for i in 0..layout.n {
        let mut per_marker = Vec::with_capacity(layout.r);
        for r in 0..layout.r {
            let family = data.family(r);
            let phi = draw.sigma2[draw.local(layout, i, r)][r];
            let y: Vec<f64> = fitted_eta(draw, layout, designs, i, r)
                .into_iter()
                .map(|e| sample_response(rng, family, e, phi))
                .collect();
            per_marker.push(y);
        }
        values.push(per_marker);
    }
    data.with_values(|i, r| values[i][r].clone())
}

/// Chi-square discrepancy: squared residuals from the fitted mean scaled by
/// the family variance (the dispersion for Gaussian markers). Always `>= 0`.
pub fn chi2_discrepancy(draw: &Draw, layout: &DrawLayout, data: &Dataset, designs: &DesignMatrices) -> f64 {
    let mut total = 0.0;
    for i in 0..layout.n {
        for r in 0..layout.r {
            let family = data.family(r);
            let phi = draw.sigma2[draw.local(layout, i, r)][r];
            let y = &data.series(i, r).values;
            for (&yj, e) in y.iter().zip(fitted_eta(draw, layout, designs, i, r)) {
                let mu = family.inverse_link(e);
                let v = family.variance_function(e, phi).max(VAR_FLOOR);
                total += (yj - mu) * (yj - mu) / v;
            }
        }
    }
    total
}

/// Fraction of draws with `T_rep > T_obs` (strict).
pub fn bayes_pvalue(t_obs: &[f64], t_rep: &[f64]) -> Result<f64> {
    if t_obs.is_empty() || t_obs.len() != t_rep.len() {
        return Err(BccError::Invalid(format!(
            "discrepancy sequences must be non-empty and of equal length ({} vs {})",
            t_obs.len(),
            t_rep.len()
        )));
    }
    let exceed = t_obs.iter().zip(t_rep).filter(|(o, r)| r > o).count();
    Ok(exceed as f64 / t_obs.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PpcResult {
    pub t_obs: Vec<f64>,
    pub t_rep: Vec<f64>,
    pub p_value: f64,
}

/// Posterior predictive check over every draw. Draw `s` replicates with the
/// seed `derive_seed(seed, "ppc", s)`, so results do not depend on thread count.
pub fn posterior_predictive_check(draws: &PosteriorDraws, data: &Dataset, designs: &DesignMatrices, seed: u64) -> Result<PpcResult> {
    let layout = &draws.layout;
    let pairs: Vec<(f64, f64)> = draws
        .draws
        .par_iter()
        .enumerate()
        .map(|(s, d)| {
            let mut rng = stream_rng(derive_seed(seed, "ppc", s as u64), Stream::Predictive);
            let rep = ppc_replicate(d, layout, data, designs, &mut rng);
            (chi2_discrepancy(d, layout, data, designs), chi2_discrepancy(d, layout, &rep, designs))
        })
        .collect();
    let (t_obs, t_rep): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let p_value = bayes_pvalue(&t_obs, &t_rep)?;
    Ok(PpcResult { t_obs, t_rep, p_value })
}
