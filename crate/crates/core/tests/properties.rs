//! Property suites: serialisation round trips, metric oracles, relabelling invariants.

use bcc::family::Family;
use bcc::longdata::{ingest_csv, Dataset, LongRecord, MarkerSpec};
use bcc::mcmc::{Draw, DrawLayout, PosteriorDraws};
use bcc::metrics::{adjusted_rand, jaccard_pair, Partition};
use bcc::postprocess::{permute_draw, point_estimate_mode, read_draws, relabel_stephens, write_draws};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FAMILIES: [Family; 3] = [Family::Gaussian, Family::Poisson, Family::Binomial];

fn value_for<R: Rng>(rng: &mut R, family: Family) -> f64 {
    match family {
        Family::Gaussian => rng.random_range(-50.0..50.0),
        Family::Poisson => rng.random_range(0..40) as f64,
        Family::Binomial => rng.random_range(0..2) as f64,
    }
}

fn random_dataset(seed: u64, n: usize, r: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let markers: Vec<MarkerSpec> = (0..r).map(|m| MarkerSpec::new(format!("m{m}"), FAMILIES[rng.random_range(0..3)])).collect();
    let mut records = Vec::new();
    for i in 0..n {
        for m in &markers {
            for _ in 0..rng.random_range(1..5) {
                records.push(LongRecord {
                    subject_id: format!("id{i}"),
                    marker_id: m.name.clone(),
                    time: rng.random_range(0.0..30.0),
                    value: value_for(&mut rng, m.family),
                });
            }
        }
    }
    Dataset::from_records(&records, markers).unwrap()
}

fn random_draws(seed: u64, n: usize, k: usize, r: usize, chains: usize, per_chain: usize) -> PosteriorDraws {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let families: Vec<Family> = (0..r).map(|_| FAMILIES[rng.random_range(0..3)]).collect();
    let p: Vec<usize> = (0..r).map(|_| rng.random_range(1..4)).collect();
    let q: Vec<usize> = p.iter().map(|&p| rng.random_range(1..=p)).collect();
    let layout = DrawLayout { n, r, k, p: p.clone(), q: q.clone(), families: families.clone() };
    let mut draws = Vec::new();
    for chain in 0..chains {
        for index in 0..per_chain {
            let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = w.iter().sum();
            let sigma = (0..k)
                .map(|_| {
                    q.iter()
                        .map(|&q| {
                            let mut s = vec![0.0; q * q];
                            for a in 0..q {
                                for b in a..q {
                                    let v = if a == b { rng.random_range(0.01..2.0) } else { rng.random_range(-0.1..0.1) };
                                    s[a * q + b] = v;
                                    s[b * q + a] = v;
                                }
                            }
                            s
                        })
                        .collect()
                })
                .collect();
            let mut prob = Vec::with_capacity(n * k);
            for _ in 0..n {
                let w: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
                let t: f64 = w.iter().sum();
                prob.extend(w.iter().map(|x| x / t));
            }
            draws.push(Draw {
                chain,
                index,
                alpha: (0..r).map(|_| rng.random_range(1.0 / k as f64..1.0)).collect(),
                pi: w.iter().map(|x| x / total).collect(),
                gamma: (0..k).map(|_| p.iter().map(|&p| (0..p).map(|_| rng.random_range(-5.0..5.0)).collect()).collect()).collect(),
                sigma,
                sigma2: (0..k)
                    .map(|_| families.iter().map(|f| if *f == Family::Gaussian { rng.random_range(0.1..3.0) } else { 1.0 }).collect())
                    .collect(),
                global: (0..n).map(|_| rng.random_range(0..k)).collect(),
                local: (0..n * r).map(|_| rng.random_range(0..k)).collect(),
                beta: (0..layout.beta_len()).map(|_| rng.random_range(-3.0..3.0)).collect(),
                prob_global: prob,
            });
        }
    }
    PosteriorDraws { layout, draws, acceptance: vec![], chain_seeds: (0..chains as u64).collect() }
}

/// A chain whose draws all agree with `truth` up to a random per-draw relabelling.
fn switched_chain(seed: u64, n: usize, k: usize, n_draws: usize) -> (PosteriorDraws, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let truth: Vec<usize> = (0..n).map(|i| i % k).collect();
    let mut base = random_draws(seed, n, k, 1, 1, n_draws);
    let perms = bcc::assignment::permutations(k);
    for d in &mut base.draws {
        for (i, &t) in truth.iter().enumerate() {
            let w: Vec<f64> = (0..k).map(|j| if j == t { 5.0 } else { 1.0 } * rng.random_range(0.5..1.5)).collect();
            let total: f64 = w.iter().sum();
            for j in 0..k {
                d.prob_global[i * k + j] = w[j] / total;
            }
            d.global[i] = t;
        }
        *d = permute_draw(d, &perms[rng.random_range(0..perms.len())]);
    }
    (base, truth)
}

/// Pair counts `(same in both, same in a only, same in b only, different in both)`.
fn pair_counts(a: &[i64], b: &[i64]) -> (u64, u64, u64, u64) {
    let mut c = (0, 0, 0, 0);
    for i in 0..a.len() {
        for j in i + 1..a.len() {
            match (a[i] == a[j], b[i] == b[j]) {
                (true, true) => c.0 += 1,
                (true, false) => c.1 += 1,
                (false, true) => c.2 += 1,
                (false, false) => c.3 += 1,
            }
        }
    }
    c
}

fn oracle_ari(a: &[i64], b: &[i64]) -> f64 {
    let (n11, n10, n01, n00) = pair_counts(a, b);
    let (n11, n10, n01, n00) = (n11 as f64, n10 as f64, n01 as f64, n00 as f64);
    let denom = (n11 + n10) * (n10 + n00) + (n11 + n01) * (n01 + n00);
    if denom == 0.0 {
        1.0
    } else {
        2.0 * (n11 * n00 - n10 * n01) / denom
    }
}

fn partition_pair() -> impl Strategy<Value = (Vec<i64>, Vec<i64>)> {
    (2usize..=12, 1i64..=5, 1i64..=5).prop_flat_map(|(n, ka, kb)| (prop::collection::vec(0..ka, n), prop::collection::vec(0..kb, n)))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn long_csv_round_trip(seed in any::<u64>(), n in 2usize..8, r in 1usize..4) {
        let data = random_dataset(seed, n, r);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        data.write_csv(&path).unwrap();
        let back = ingest_csv(&path, data.markers().to_vec()).unwrap();
        prop_assert_eq!(back, data);
    }

    #[test]
    fn draws_round_trip(seed in any::<u64>(), n in 1usize..6, k in 2usize..4, r in 1usize..4, chains in 1usize..3, per_chain in 1usize..4) {
        let draws = random_draws(seed, n, k, r, chains, per_chain);
        let dir = tempfile::tempdir().unwrap();
        write_draws(&draws, dir.path()).unwrap();
        let back = read_draws(dir.path()).unwrap();
        prop_assert_eq!(back, draws);
    }

    #[test]
    fn metrics_match_pair_enumeration((a, b) in partition_pair()) {
        let pa = Partition::new(a.clone()).unwrap();
        let pb = Partition::new(b.clone()).unwrap();
        let ari = adjusted_rand(&pa, &pb).unwrap().value;
        prop_assert!((ari - oracle_ari(&a, &b)).abs() <= 1e-12, "ari {} oracle {}", ari, oracle_ari(&a, &b));
        let (n11, n10, n01, _) = pair_counts(&a, &b);
        let jac = if n11 + n10 + n01 == 0 { 1.0 } else { n11 as f64 / (n11 + n10 + n01) as f64 };
        prop_assert_eq!(jaccard_pair(&pa, &pb).unwrap().value, jac);
        prop_assert_eq!(adjusted_rand(&pb, &pa).unwrap().value, ari);
    }

    #[test]
    fn ari_ignores_label_names(a in prop::collection::vec(0i64..4, 2..12), shift in 1i64..100) {
        let pa = Partition::new(a.clone()).unwrap();
        let renamed = Partition::new(a.iter().map(|x| 3 * x + shift).collect()).unwrap();
        prop_assert_eq!(adjusted_rand(&pa, &renamed).unwrap().value, 1.0);
    }

    #[test]
    fn relabelling_is_invariant_to_a_global_permutation(seed in any::<u64>(), perm_index in 0usize..6) {
        let (draws, truth) = switched_chain(seed, 12, 3, 40);
        let perm = bcc::assignment::permutations(3)[perm_index].clone();
        let mut shuffled = draws.clone();
        shuffled.draws = draws.draws.iter().map(|d| permute_draw(d, &perm)).collect();
        let a = relabel_stephens(&draws).unwrap();
        let b = relabel_stephens(&shuffled).unwrap();
        // KL objective non-increasing across rounds
        for w in a.objective.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-9);
        }
        let pa = Partition::from_usize(&point_estimate_mode(&a).unwrap().c_hat).unwrap();
        let pb = Partition::from_usize(&point_estimate_mode(&b).unwrap().c_hat).unwrap();
        let pt = Partition::from_usize(&truth).unwrap();
        prop_assert_eq!(adjusted_rand(&pa, &pt).unwrap().value, 1.0);
        prop_assert_eq!(adjusted_rand(&pb, &pt).unwrap().value, 1.0);
        for p in &a.permutations {
            let mut sorted = p.clone();
            sorted.sort_unstable();
            prop_assert_eq!(sorted, vec![0, 1, 2]);
        }
    }
}
