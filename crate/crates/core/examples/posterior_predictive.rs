//! Posterior predictive check on data generated by the model itself.
//!
//! Each replicate simulates a small two-cluster dataset, fits it and reports
//! the Bayesian p-value of the chi-square discrepancy; well-specified fits
//! should give p-values away from 0 and 1.
//!
//! `cargo run --release --example posterior_predictive -- [replicates] [iterations] [seed]`

use bcc::config::{default_vague_priors, McmcControls};
use bcc::harness::replicate_seed;
use bcc::pipeline::fit;
use bcc::simgen::{fit_config_for, simulate_dataset, RandomEffectLaw, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let replicates: usize = args.first().map_or(Ok(5), |s| s.parse())?;
    let iterations: usize = args.get(1).map_or(Ok(1500), |s| s.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(7), |s| s.parse())?;

    let mut inside = 0;
    for j in 0..replicates {
        let mut spec = ScenarioSpec::new(2, vec![0.9; 3], RandomEffectLaw::Normal, replicate_seed(seed, j));
        spec.cluster_sizes = vec![50];
        let truth = simulate_dataset(&spec)?;
        let mut mcmc = McmcControls::new(iterations / 2, iterations, 1);
        mcmc.seed = spec.seed;
        let config = fit_config_for(&truth.params, mcmc);
        let priors = default_vague_priors(&config, Some(&truth.data));
        let out = fit(&truth.data, &config, &priors, true)?;
        let p = out.result.ppc_p_value.expect("ppc requested");
        inside += usize::from((0.05..=0.95).contains(&p));
        println!("replicate {j}: p = {p:.3}");
    }
    println!("{inside} of {replicates} p-values in [0.05, 0.95]");
    Ok(())
}
