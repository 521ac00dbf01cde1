//! Exponential-family pieces for the three supported marker types.
//!
//! Every marker density is written in canonical form
//!
//! ```text
//! log f(y | eta, phi) = (y * eta - g(eta)) / phi + w(y, phi)
//! ```
//!
//! with identity (Gaussian), log (Poisson) and logit (Binomial) links. The
//! gradient and negative Hessian with respect to the coefficients of a linear
//! predictor `eta = D b + offset` are what the Newton-type Metropolis–Hastings
//! proposals are built from.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{BccError, Result};

/// Linear predictors are clamped to this magnitude before any exp/log-sum evaluation.
pub const ETA_CLAMP: f64 = 35.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Poisson,
    #[serde(alias = "bernoulli")]
    Binomial,
}

#[inline]
fn clamp_eta(eta: f64) -> f64 {
    eta.clamp(-ETA_CLAMP, ETA_CLAMP)
}

#[inline]
pub fn logistic(eta: f64) -> f64 {
    let eta = clamp_eta(eta);
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Gaussian => "gaussian",
            Family::Poisson => "poisson",
            Family::Binomial => "binomial",
        }
    }

    /// Whether the family carries a free dispersion parameter.
    pub fn has_dispersion(self) -> bool {
        matches!(self, Family::Gaussian)
    }

    /// Response-scale mean `mu(eta)`.
    #[inline]
    pub fn inverse_link(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => eta,
            Family::Poisson => clamp_eta(eta).exp(),
            Family::Binomial => logistic(eta),
        }
    }

    /// Cumulant function `g(eta)`.
    #[inline]
    pub fn cumulant(self, eta: f64) -> f64 {
        match self {
            Family::Gaussian => 0.5 * eta * eta,
            Family::Poisson => clamp_eta(eta).exp(),
            Family::Binomial => {
                let eta = clamp_eta(eta);
                eta.max(0.0) + (-eta.abs()).exp().ln_1p()
            }
        }
    }

    /// Variance of a single observation. For the Gaussian this is `phi` itself.
    #[inline]
    pub fn variance_function(self, eta: f64, phi: f64) -> f64 {
        match self {
            Family::Gaussian => phi,
            Family::Poisson => clamp_eta(eta).exp(),
            Family::Binomial => {
                let p = logistic(eta);
                p * (1.0 - p)
            }
        }
    }

    /// Checks that `y` is a legal observation for this family.
    pub fn check_value(self, y: f64) -> std::result::Result<(), &'static str> {
        if !y.is_finite() {
            return Err("non-finite value");
        }
        match self {
            Family::Gaussian => Ok(()),
            Family::Poisson => {
                if y < 0.0 || y.fract() != 0.0 {
                    Err("non-count value")
                } else {
                    Ok(())
                }
            }
            Family::Binomial => {
                if y == 0.0 || y == 1.0 {
                    Ok(())
                } else {
                    Err("non-binary value")
                }
            }
        }
    }

    /// The `w(y, phi)` normalising term.
    #[inline]
    pub fn base_measure(self, y: f64, phi: f64) -> f64 {
        match self {
            Family::Gaussian => -0.5 * (2.0 * std::f64::consts::PI * phi).ln() - y * y / (2.0 * phi),
            Family::Poisson => -ln_gamma(y + 1.0),
            Family::Binomial => 0.0,
        }
    }

    /// Log-density of one observation; assumes `y` already passed [`Family::check_value`].
    #[inline]
    pub fn log_density(self, y: f64, eta: f64, phi: f64) -> f64 {
        (y * eta - self.cumulant(eta)) / phi + self.base_measure(y, phi)
    }

    /// Sum of log-densities over a series. Validates inputs.
    pub fn log_likelihood(self, y: &[f64], eta: &[f64], phi: f64) -> Result<f64> {
        if y.len() != eta.len() {
            return Err(BccError::Invalid(format!(
                "length mismatch: {} responses, {} linear predictors",
                y.len(),
                eta.len()
            )));
        }
        self.check_phi(phi)?;
        let mut total = 0.0;
        for (&yj, &ej) in y.iter().zip(eta) {
            self.check_value(yj)
                .map_err(|m| BccError::Invalid(format!("{} family: {m} {yj}", self.name())))?;
            if !ej.is_finite() {
                return Err(BccError::Invalid("non-finite linear predictor".into()));
            }
            total += self.log_density(yj, ej, phi);
        }
        Ok(total)
    }

    pub fn check_phi(self, phi: f64) -> Result<()> {
        let ok = match self {
            Family::Gaussian => phi.is_finite() && phi > 0.0,
            Family::Poisson | Family::Binomial => phi == 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(BccError::Invalid(format!(
                "invalid dispersion {phi} for {} family",
                self.name()
            )))
        }
    }

    /// Gradient and negative Hessian of the log-likelihood with respect to
    /// `b` where `eta = design * b + offset`:
    ///
    /// ```text
    /// G = phi^-1 D'(y - mu),   H = phi^-2 D' kappa D
    /// ```
    ///
    /// Since `kappa = phi` for the Gaussian, `H` reduces to `D'D / phi` there.
    pub fn score_and_curvature(
        self,
        y: &[f64],
        design: &DMatrix<f64>,
        eta: &[f64],
        phi: f64,
    ) -> (DVector<f64>, DMatrix<f64>) {
        let dim = design.ncols();
        let mut grad = DVector::zeros(dim);
        let mut hess = DMatrix::zeros(dim, dim);
        self.accumulate_score(y, design, eta, phi, &mut grad, &mut hess);
        (grad, hess)
    }

    /// In-place accumulation form of [`Family::score_and_curvature`], for summing over subjects.
    pub fn accumulate_score(
        self,
        y: &[f64],
        design: &DMatrix<f64>,
        eta: &[f64],
        phi: f64,
        grad: &mut DVector<f64>,
        hess: &mut DMatrix<f64>,
    ) {
        let dim = design.ncols();
        let inv_phi = 1.0 / phi;
        for (j, (&yj, &ej)) in y.iter().zip(eta).enumerate() {
            let resid = (yj - self.inverse_link(ej)) * inv_phi;
            let w = self.variance_function(ej, phi) * inv_phi * inv_phi;
            for a in 0..dim {
                let da = design[(j, a)];
                grad[a] += da * resid;
                let wa = w * da;
                for b in a..dim {
                    hess[(a, b)] += wa * design[(j, b)];
                }
            }
        }
        for a in 0..dim {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Family {
    type Err = BccError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Family::Gaussian),
            "poisson" | "count" => Ok(Family::Poisson),
            "binomial" | "bernoulli" | "binary" => Ok(Family::Binomial),
            other => Err(BccError::Invalid(format!("unknown family '{other}'"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const ALL: [Family; 3] = [Family::Gaussian, Family::Poisson, Family::Binomial];

    #[test]
    fn inverse_link_values() {
        assert_eq!(Family::Binomial.inverse_link(0.0), 0.5);
        assert_eq!(Family::Poisson.inverse_link(0.0), 1.0);
        assert_eq!(Family::Gaussian.inverse_link(1.5), 1.5);
        let p = Family::Binomial.inverse_link(1e4);
        assert!(p > 0.0 && p <= 1.0 && p.is_finite());
    }

    #[test]
    fn cumulant_values() {
        assert_eq!(Family::Gaussian.cumulant(2.0), 2.0);
        assert_relative_eq!(Family::Binomial.cumulant(0.0), 2f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(Family::Poisson.cumulant(1.0), std::f64::consts::E, epsilon = 1e-15);
    }

    #[test]
    fn log_likelihood_values() {
        assert_relative_eq!(
            Family::Poisson.log_likelihood(&[0.0], &[0.0], 1.0).unwrap(),
            -1.0,
            epsilon = 1e-15
        );
        assert_relative_eq!(
            Family::Binomial.log_likelihood(&[1.0], &[0.0], 1.0).unwrap(),
            0.5f64.ln(),
            epsilon = 1e-15
        );
        // direct normal density of N(0.1, 0.5) at 0.3
        let (y, mu, var) = (0.3f64, 0.1f64, 0.5f64);
        let direct = (-(y - mu).powi(2) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
        assert_relative_eq!(
            Family::Gaussian.log_likelihood(&[y], &[mu], var).unwrap(),
            direct.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn log_likelihood_rejects_bad_values() {
        assert!(Family::Poisson.log_likelihood(&[1.5], &[0.0], 1.0).is_err());
        assert!(Family::Binomial.log_likelihood(&[2.0], &[0.0], 1.0).is_err());
        assert!(Family::Gaussian.log_likelihood(&[1.0], &[0.0], 0.0).is_err());
        assert!(Family::Poisson.log_likelihood(&[1.0], &[0.0], 2.0).is_err());
        assert!(Family::Gaussian.log_likelihood(&[1.0, 2.0], &[0.0], 1.0).is_err());
    }

    #[test]
    fn variance_function_values() {
        assert_eq!(Family::Binomial.variance_function(0.0, 1.0), 0.25);
        assert_eq!(Family::Poisson.variance_function(0.0, 1.0), 1.0);
        assert_eq!(Family::Gaussian.variance_function(3.0, 0.69), 0.69);
    }

    #[test]
    fn score_zero_residual_and_scalar_case() {
        let d = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 12.0, 1.0, 24.0]);
        let eta = [0.2, -0.4, 1.1];
        for fam in ALL {
            let y: Vec<f64> = eta.iter().map(|&e| fam.inverse_link(e)).collect();
            let (g, _) = fam.score_and_curvature(&y, &d, &eta, 1.0);
            assert!(g.norm() < 1e-12, "{fam}: {g}");
        }
        let one = DMatrix::from_element(1, 1, 1.0);
        let (g, h) = Family::Gaussian.score_and_curvature(&[0.5], &one, &[0.1], 1.0);
        assert_relative_eq!(g[0], 0.4, epsilon = 1e-15);
        assert_relative_eq!(h[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn gaussian_curvature_is_design_gram_over_phi() {
        let d = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 1.0, 12.0, 1.0, 24.0]);
        let (_, h) = Family::Gaussian.score_and_curvature(&[0.0; 3], &d, &[0.0; 3], 0.4);
        let expect = d.transpose() * &d / 0.4;
        assert!((h - expect).norm() < 1e-10);
    }

    fn central_diff(f: impl Fn(f64) -> f64, x: f64) -> f64 {
        let h = 1e-5 * (1.0 + x.abs());
        (f(x + h) - f(x - h)) / (2.0 * h)
    }

    #[test]
    fn cumulant_derivatives_match_mean_and_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let eta: f64 = rng.random_range(-6.0..6.0);
            for fam in ALL {
                let d1 = central_diff(|e| fam.cumulant(e), eta);
                assert_relative_eq!(d1, fam.inverse_link(eta), max_relative = 1e-7, epsilon = 1e-9);
                if fam != Family::Gaussian {
                    let d2 = central_diff(|e| fam.inverse_link(e), eta);
                    assert_relative_eq!(d2, fam.variance_function(eta, 1.0), max_relative = 1e-6, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn binomial_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = DMatrix::from_fn(4, 2, |j, c| if c == 0 { 1.0 } else { [0.0, 7.0, 18.0, 27.0][j] });
        let y = [0.0, 1.0, 1.0, 0.0];
        let b = DVector::from_vec(vec![rng.random_range(-1.0..1.0), rng.random_range(-0.1..0.1)]);
        let ll = |b: &DVector<f64>| {
            let eta = &d * b;
            Family::Binomial.log_likelihood(&y, eta.as_slice(), 1.0).unwrap()
        };
        let eta = &d * &b;
        let (g, _) = Family::Binomial.score_and_curvature(&y, &d, eta.as_slice(), 1.0);
        for a in 0..2 {
            let h = 1e-6;
            let mut bp = b.clone();
            bp[a] += h;
            let mut bm = b.clone();
            bm[a] -= h;
            let fd = (ll(&bp) - ll(&bm)) / (2.0 * h);
            assert!(((fd - g[a]) / g[a].abs().max(1e-8)).abs() < 1e-5);
        }
    }

    #[test]
    fn extreme_eta_stays_finite() {
        for fam in ALL {
            for eta in [-1e6, -40.0, 40.0, 1e6] {
                assert!(fam.cumulant(eta).is_finite());
                assert!(fam.inverse_link(eta).is_finite());
                assert!(fam.variance_function(eta, 1.0) > 0.0 || fam == Family::Gaussian);
            }
        }
    }

    #[test]
    fn family_parses() {
        assert_eq!("Gaussian".parse::<Family>().unwrap(), Family::Gaussian);
        assert_eq!("bernoulli".parse::<Family>().unwrap(), Family::Binomial);
        assert!("gamma".parse::<Family>().is_err());
    }
}
