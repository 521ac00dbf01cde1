//! Chooses the number of clusters by the mean adjusted adherence.
//!
//! Simulates a three-cluster dataset, fits every candidate K and prints the
//! adherence score of each; the true K should score highest.
//!
//! `cargo run --release --example select_k -- [seed] [iterations] [subjects_per_cluster]`

use bcc::config::McmcControls;
use bcc::pipeline::select_k_fits;
use bcc::simgen::{fit_config_for, simulate_dataset, RandomEffectLaw, ScenarioSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed: u64 = args.first().map_or(Ok(3), |s| s.parse())?;
    let iterations: usize = args.get(1).map_or(Ok(2000), |s| s.parse())?;
    let per_cluster: usize = args.get(2).map_or(Ok(100), |s| s.parse())?;

    let mut spec = ScenarioSpec::new(3, vec![0.9; 3], RandomEffectLaw::Normal, seed);
    spec.cluster_sizes = vec![per_cluster];
    let truth = simulate_dataset(&spec)?;
    let mut mcmc = McmcControls::new(iterations / 2, iterations, 1);
    mcmc.seed = seed;
    let config = fit_config_for(&truth.params, mcmc);

    let start = std::time::Instant::now();
    let (selection, fits) = select_k_fits(&truth.data, &config, &[2, 3, 4])?;
    println!("{} subjects, {:.1?}", truth.data.n_subjects(), start.elapsed());
    for ((k, score), fit) in selection.scores.iter().zip(&fits) {
        let alpha: Vec<String> = fit.adherence.iter().map(|a| format!("{:.3}", a.mean)).collect();
        println!("K={k}  mean adjusted adherence {score:.4}  alpha [{}]", alpha.join(", "));
    }
    println!("selected K = {}{}", selection.k_hat, if selection.tie { " (tie)" } else { "" });
    Ok(())
}
