//! Simulates a two-cluster dataset, fits the model and reports recovery.
//!
//! `cargo run --release --example fit_simulated -- [alpha] [iterations] [seed]`

use bcc::config::{default_vague_priors, McmcControls};
use bcc::metrics::arand_report;
use bcc::pipeline::fit;
use bcc::simgen::{fit_config_for, simulate_dataset, RandomEffectLaw, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let alpha: f64 = args.first().map_or(Ok(1.0), |s| s.parse())?;
    let iterations: usize = args.get(1).map_or(Ok(2000), |s| s.parse())?;
    let seed: u64 = args.get(2).map_or(Ok(1), |s| s.parse())?;

    let truth = simulate_dataset(&ScenarioSpec::new(2, vec![alpha; 3], RandomEffectLaw::Normal, seed))?;
    let mut mcmc = McmcControls::new(iterations / 2, iterations, 1);
    mcmc.seed = seed;
    let config = fit_config_for(&truth.params, mcmc);
    let priors = default_vague_priors(&config, Some(&truth.data));

    let start = std::time::Instant::now();
    let out = fit(&truth.data, &config, &priors, false)?;
    let m = &out.result.modes;
    let report = arand_report(&truth.global, &truth.local, &m.c_hat, &m.l_hat)?;
    println!("fit took {:.1?} for {} draws", start.elapsed(), out.result.n_draws);
    println!("aRand.G = {:.3}, aRand.I = {:.3}", report.global, report.individual);
    for p in out.result.parameters.iter().take(24) {
        println!("{:<16} {:>9.4} ({:.4}, {:.4})", p.name, p.mean, p.lower, p.upper);
    }
    for a in &out.result.acceptance {
        println!("gamma acceptance {:?}", a.gamma_rate);
        println!("beta acceptance  {:?}", a.beta_rate);
        println!("tau_beta {:?}", a.tau_beta);
    }
    Ok(())
}
