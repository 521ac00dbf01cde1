//! The three exponential-family markers side by side.
//!
//! Prints mean, variance and log density on a grid of linear predictors, then
//! checks the analytic score of a small random-intercept-and-slope design
//! against central finite differences.
//!
//! `cargo run --example glm_family`

use bcc::family::Family;
use nalgebra::{DMatrix, DVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let families = [(Family::Gaussian, 0.7, 1.3), (Family::Poisson, 3.0, 1.0), (Family::Binomial, 1.0, 1.0)];
    for (family, y, phi) in families {
        println!("{} (y = {y}, phi = {phi})", family.name());
        println!("  {:>6} {:>10} {:>10} {:>12}", "eta", "mean", "variance", "log f(y)");
        for eta in [-2.0, -0.5, 0.0, 0.5, 2.0] {
            println!(
                "  {eta:>6.2} {:>10.4} {:>10.4} {:>12.5}",
                family.inverse_link(eta),
                family.variance_function(eta, phi),
                family.log_density(y, eta, phi)
            );
        }
    }

    let times = [0.0, 7.0, 18.0, 27.0];
    let design = DMatrix::from_fn(times.len(), 2, |j, c| if c == 0 { 1.0 } else { times[j] / 10.0 });
    let b = DVector::from_vec(vec![0.3, -0.2]);
    println!("\nscore check at b = {:?}", b.as_slice());
    let ys = [
        (Family::Gaussian, vec![0.1, 0.4, -0.6, 1.2], 0.8),
        (Family::Poisson, vec![1.0, 0.0, 2.0, 1.0], 1.0),
        (Family::Binomial, vec![1.0, 0.0, 0.0, 1.0], 1.0),
    ];
    for (family, y, phi) in ys {
        let loglik = |b: &DVector<f64>| {
            let eta: Vec<f64> = (&design * b).iter().copied().collect();
            family.log_likelihood(&y, &eta, phi).unwrap()
        };
        let eta: Vec<f64> = (&design * &b).iter().copied().collect();
        let (grad, hess) = family.score_and_curvature(&y, &design, &eta, phi);
        let h = 1e-5;
        let fd: Vec<f64> = (0..2)
            .map(|j| {
                let mut up = b.clone();
                let mut dn = b.clone();
                up[j] += h;
                dn[j] -= h;
                (loglik(&up) - loglik(&dn)) / (2.0 * h)
            })
            .collect();
        println!(
            "  {:<9} analytic {:>9.5} {:>9.5}  finite-diff {:>9.5} {:>9.5}  -Hessian diag {:>8.4} {:>8.4}",
            family.name(),
            grad[0],
            grad[1],
            fd[0],
            fd[1],
            hess[(0, 0)],
            hess[(1, 1)]
        );
    }
    Ok(())
}
