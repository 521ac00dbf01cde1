//! Replicated simulation studies: simulate, fit, and score against the truth.

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{default_vague_priors, McmcControls};
use crate::error::Result;
use crate::metrics::arand_report;
use crate::pipeline::fit;
use crate::rng::derive_seed;
use crate::simgen::{fit_config_for, rmse, simulate_dataset, ParamEstimate, RandomEffectLaw, RmseTable, ScenarioSpec};

/// Sample mean and standard deviation (denominator `n - 1`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

/// `mean (sd)` to two decimals with trailing zeros dropped, e.g. `1 (0)` or `0.95 (0.02)`.
impl fmt::Display for MeanSd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let short = |x: f64| {
            let s = format!("{:.2}", x + 0.0);
            let s = s.trim_end_matches('0').trim_end_matches('.').to_string();
            if s == "-0" { "0".to_string() } else { s }
        };
        write!(f, "{} ({})", short(self.mean), short(self.sd))
    }
}

/// Seed of replicate `j` of a study with master seed `master`.
pub fn replicate_seed(master: u64, j: usize) -> u64 {
    derive_seed(master, "replicate", j as u64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub arand_g: f64,
    pub arand_i: f64,
    pub mean_adjusted_adherence: f64,
    pub truth: ParamEstimate,
    pub estimate: ParamEstimate,
}

/// Simulates `spec`, fits the generating model with `mcmc` (its seed is
/// replaced by one derived from the scenario seed) and scores the modal labels.
pub fn run_replicate(spec: &ScenarioSpec, mcmc: &McmcControls, replicate: usize) -> Result<ReplicateOutcome> {
    let truth = simulate_dataset(spec)?;
    let mut m = mcmc.clone();
    m.seed = derive_seed(spec.seed, "fit", 0);
    let config = fit_config_for(&truth.params, m);
    let priors = default_vague_priors(&config, Some(&truth.data));
    let out = fit(&truth.data, &config, &priors, false)?;
    let modes = &out.result.modes;
    let report = arand_report(&truth.global, &truth.local, &modes.c_hat, &modes.l_hat)?;
    Ok(ReplicateOutcome {
        replicate,
        seed: spec.seed,
        arand_g: report.global,
        arand_i: report.individual,
        mean_adjusted_adherence: out.result.mean_adjusted_adherence,
        truth: ParamEstimate::from_truth(&truth),
        estimate: ParamEstimate::posterior_mean(&out.relabeled),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySummary {
    pub k: usize,
    pub alpha: Vec<f64>,
    pub re_law: RandomEffectLaw,
    pub replicates: Vec<ReplicateOutcome>,
    pub arand_g: MeanSd,
    pub arand_i: MeanSd,
    pub rmse: RmseTable,
}

/// Runs `replicates` independent copies of `template`, the `j`-th seeded by
/// [`replicate_seed`]`(master_seed, j)`, in parallel.
pub fn run_study(template: &ScenarioSpec, mcmc: &McmcControls, replicates: usize, master_seed: u64) -> Result<StudySummary> {
    let outcomes: Vec<Result<ReplicateOutcome>> = (0..replicates)
        .into_par_iter()
        .map(|j| {
            let mut spec = template.clone();
            spec.seed = replicate_seed(master_seed, j);
            run_replicate(&spec, mcmc, j)
        })
        .collect();
    let replicates: Vec<ReplicateOutcome> = outcomes.into_iter().collect::<Result<_>>()?;
    let families: Vec<_> = template.resolved_params()?.markers.iter().map(|m| m.family).collect();
    let pairs: Vec<(ParamEstimate, ParamEstimate)> = replicates.iter().map(|o| (o.truth.clone(), o.estimate.clone())).collect();
    let table = rmse(&pairs, &families)?;
    let g: Vec<f64> = replicates.iter().map(|o| o.arand_g).collect();
    let i: Vec<f64> = replicates.iter().map(|o| o.arand_i).collect();
    Ok(StudySummary {
        k: template.k,
        alpha: template.alpha.clone(),
        re_law: template.re_law,
        arand_g: MeanSd::of(&g),
        arand_i: MeanSd::of(&i),
        replicates,
        rmse: table,
    })
}

/// Rows `K | alpha | RE law | aRand.G | aRand.I` in the `mean (sd)` format.
pub fn format_study_table(studies: &[StudySummary]) -> String {
    let mut out = String::from("K\talpha\tRE\taRand.G\taRand.I\n");
    for s in studies {
        let alpha: Vec<String> = s.alpha.iter().map(|a| format!("{a:.2}")).collect();
        let law = match s.re_law {
            RandomEffectLaw::Normal => "normal",
            RandomEffectLaw::StudentT => "t5",
        };
        out.push_str(&format!("{}\t({})\t{}\t{}\t{}\n", s.k, alpha.join(", "), law, s.arand_g, s.arand_i));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_sd_format() {
        assert_eq!(MeanSd::of(&[1.0, 1.0, 1.0]).to_string(), "1 (0)");
        assert_eq!(MeanSd { mean: 0.951, sd: 0.0249 }.to_string(), "0.95 (0.02)");
        assert_eq!(MeanSd { mean: -0.001, sd: 0.01 }.to_string(), "0 (0.01)");
        let m = MeanSd::of(&[1.0, 2.0, 3.0]);
        assert_eq!((m.mean, m.sd), (2.0, 1.0));
    }

    #[test]
    fn replicate_seeds_differ() {
        assert_ne!(replicate_seed(7, 0), replicate_seed(7, 1));
        assert_eq!(replicate_seed(7, 3), replicate_seed(7, 3));
    }
}
