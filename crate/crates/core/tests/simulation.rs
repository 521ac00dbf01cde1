//! Generator self-tests: the shipped truth table is separable and the
//! simulator honours its scenario.

use bcc::family::Family;
use bcc::mcmc::rank_bin_labels;
use bcc::metrics::{adjusted_rand, Partition};
use bcc::simgen::{default_true_params, simulate_dataset, RandomEffectLaw, ScenarioSpec};

fn min_gap(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

#[test]
fn intercept_spacing_for_every_k() {
    for k in 2..=4 {
        let params = default_true_params(k).unwrap();
        assert!(params.validate().is_empty());
        for m in &params.markers {
            let intercepts: Vec<f64> = m.gamma.iter().map(|g| g[0]).collect();
            let gap = min_gap(&intercepts);
            match m.family {
                Family::Gaussian => {
                    let sd = m.sigma2.iter().cloned().fold(0.0, f64::max).sqrt();
                    assert!(gap >= 2.0 * sd, "K={k} gaussian gap {gap}");
                }
                Family::Poisson => assert!(gap >= 0.7 - 1e-12, "K={k} poisson gap {gap}"),
                Family::Binomial => assert!(gap >= 2.0 - 1e-12, "K={k} binomial gap {gap}"),
            }
        }
    }
    assert!(default_true_params(5).is_err());
}

/// Least-squares intercept of `y` on `(1, t)`.
fn ols_intercept(t: &[f64], y: &[f64]) -> f64 {
    let n = t.len() as f64;
    let tm = t.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxy: f64 = t.iter().zip(y).map(|(a, b)| (a - tm) * (b - ym)).sum();
    let sxx: f64 = t.iter().map(|a| (a - tm) * (a - tm)).sum();
    ym - sxy / sxx * tm
}

#[test]
fn gaussian_marker_alone_separates_two_clusters() {
    for seed in [1, 2, 3] {
        let truth = simulate_dataset(&ScenarioSpec::new(2, vec![1.0; 3], RandomEffectLaw::Normal, seed)).unwrap();
        assert_eq!(truth.data.n_subjects(), 200);
        let r = (0..truth.data.n_markers()).find(|&r| truth.data.family(r) == Family::Gaussian).unwrap();
        let intercepts: Vec<f64> = (0..truth.data.n_subjects()).map(|i| {
            let s = truth.data.series(i, r);
            ols_intercept(&s.times, &s.values)
        }).collect();
        let labels = rank_bin_labels(&intercepts, 2).unwrap();
        let local: Vec<usize> = truth.local.iter().map(|l| l[r]).collect();
        let ari = adjusted_rand(&Partition::from_usize(&labels).unwrap(), &Partition::from_usize(&local).unwrap()).unwrap();
        assert!(ari.value > 0.9, "seed {seed}: aRand {}", ari.value);
    }
}

#[test]
fn local_labels_follow_adherence() {
    let spec = ScenarioSpec::new(2, vec![0.8, 1.0, 0.5], RandomEffectLaw::StudentT, 17);
    let mut big = spec.clone();
    big.cluster_sizes = vec![2000];
    let truth = simulate_dataset(&big).unwrap();
    let n = truth.global.len() as f64;
    for (r, &alpha) in spec.alpha.iter().enumerate() {
        let agree = truth.global.iter().zip(&truth.local).filter(|(c, l)| **c == l[r]).count() as f64 / n;
        let se = (alpha * (1.0 - alpha) / n).sqrt();
        assert!((agree - alpha).abs() <= 4.0 * se + 1e-12, "marker {r}: {agree} vs {alpha}");
    }
    // global labels arrive in contiguous blocks
    assert!(truth.global[..2000].iter().all(|&c| c == 0));
    assert!(truth.global[2000..].iter().all(|&c| c == 1));
}

#[test]
fn same_seed_same_dataset() {
    let spec = ScenarioSpec::new(3, vec![0.9; 3], RandomEffectLaw::Normal, 99);
    let a = simulate_dataset(&spec).unwrap();
    let b = simulate_dataset(&spec).unwrap();
    assert_eq!(a, b);
    let mut other = spec.clone();
    other.seed = 100;
    assert_ne!(simulate_dataset(&other).unwrap().data, a.data);
}
