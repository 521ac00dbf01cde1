//! Label switching and its repair.
//!
//! Builds a synthetic three-cluster chain, swaps the labels of a random half
//! of its draws, and shows that the KL relabelling restores the clustering.
//!
//! `cargo run --release --example relabel_switched_chain -- [draws] [seed]`

use bcc::family::Family;
use bcc::mcmc::{Draw, DrawLayout, PosteriorDraws};
use bcc::metrics::{adjusted_rand, Partition};
use bcc::postprocess::{permute_draw, point_estimate_mode, relabel_stephens, RelabeledDraws};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let n_draws: usize = args.first().map_or(Ok(400), |s| s.parse())?;
    let seed: u64 = args.get(1).map_or(Ok(5), |s| s.parse())?;
    let (n, k) = (60, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<usize> = (0..n).map(|i| i % k).collect();
    let layout = DrawLayout { n, r: 1, k, p: vec![1], q: vec![1], families: vec![Family::Gaussian] };

    let mut draws = Vec::with_capacity(n_draws);
    let mut switched = 0;
    for s in 0..n_draws {
        let mut prob = Vec::with_capacity(n * k);
        let mut global = Vec::with_capacity(n);
        for &t in &truth {
            let w: Vec<f64> = (0..k).map(|j| if j == t { 6.0 } else { 1.0 } * rng.random_range(0.5..1.5)).collect();
            let total: f64 = w.iter().sum();
            prob.extend(w.iter().map(|x| x / total));
            global.push(if rng.random::<f64>() < 0.9 { t } else { rng.random_range(0..k) });
        }
        let d = Draw {
            chain: 0,
            index: s,
            alpha: vec![0.9],
            pi: vec![1.0 / k as f64; k],
            gamma: (0..k).map(|j| vec![vec![j as f64]]).collect(),
            sigma: vec![vec![vec![1.0]]; k],
            sigma2: vec![vec![1.0]; k],
            local: global.clone(),
            global,
            beta: vec![0.0; n],
            prob_global: prob,
        };
        if rng.random::<bool>() {
            switched += 1;
            draws.push(permute_draw(&d, &[1, 2, 0]));
        } else {
            draws.push(d);
        }
    }
    let chain = PosteriorDraws { layout, draws, acceptance: vec![], chain_seeds: vec![seed] };
    let reference = Partition::from_usize(&truth)?;

    let raw = RelabeledDraws { permutations: vec![(0..k).collect(); n_draws], draws: chain.clone(), rounds: 0, objective: vec![] };
    let before = point_estimate_mode(&raw)?;
    let relabeled = relabel_stephens(&chain)?;
    let after = point_estimate_mode(&relabeled)?;
    println!("{switched} of {n_draws} draws switched");
    println!("aRand of modal labels before relabelling: {:.3}", adjusted_rand(&reference, &Partition::from_usize(&before.c_hat)?)?.value);
    println!("aRand of modal labels after relabelling:  {:.3}", adjusted_rand(&reference, &Partition::from_usize(&after.c_hat)?)?.value);
    println!("relabelling rounds {}, objective {:?}", relabeled.rounds, relabeled.objective);
    Ok(())
}
