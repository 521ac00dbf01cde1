//! Random variate generators for the conjugate full conditionals.
//!
//! Inverse-gamma convention throughout: `IG(a, b)` has density proportional to
//! `x^(-a-1) exp(-b / x)`, so its mean is `b / (a - 1)` for `a > 1`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Gamma, StandardNormal};
use statrs::function::beta::{beta_reg, ln_beta};

use crate::linalg::cholesky_jittered;

#[inline]
pub fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Uniform on the half-open interval (0, 1].
#[inline]
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("gamma parameters must be positive")
        .sample(rng)
}

pub fn sample_inv_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    1.0 / sample_gamma(rng, shape, scale)
}

pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, concentration: &[f64]) -> Vec<f64> {
    let mut draws: Vec<f64> = concentration
        .iter()
        .map(|&c| sample_gamma(rng, c, 1.0))
        .collect();
    let total: f64 = draws.iter().sum();
    if total > 0.0 {
        draws.iter_mut().for_each(|d| *d /= total);
    } else {
        // every gamma underflowed; fall back to the normalised concentration
        let c: f64 = concentration.iter().sum();
        draws = concentration.iter().map(|&x| x / c).collect();
    }
    draws
}

/// Beta(a, b) restricted to `[lower, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncatedBeta {
    pub a: f64,
    pub b: f64,
    pub lower: f64,
}

impl TruncatedBeta {
    pub fn new(a: f64, b: f64, lower: f64) -> Self {
        assert!(a > 0.0 && b > 0.0, "beta shapes must be positive");
        assert!((0.0..1.0).contains(&lower), "truncation point must lie in [0, 1)");
        Self { a, b, lower }
    }

    fn ln_pdf(&self, x: f64) -> f64 {
        (self.a - 1.0) * x.ln() + (self.b - 1.0) * (1.0 - x).ln() - ln_beta(self.a, self.b)
    }

    /// Inverse-CDF draw over the truncated region. Whichever tail is smaller
    /// is inverted so that tiny probabilities keep their relative precision.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (a, b, l) = (self.a, self.b, self.lower);
        let below = if l > 0.0 { beta_reg(a, b, l) } else { 0.0 };
        let survival = beta_reg(b, a, 1.0 - l);
        let u = open_unit(rng);
        let v = survival * u;
        let x = if survival < f64::MIN_POSITIVE {
            // all mass piled against the truncation point: exponential tail approximation
            let slope = (a - 1.0) / l - (b - 1.0) / (1.0 - l);
            let rate = (-slope).max(1.0);
            l - open_unit(rng).ln() / rate
        } else if v <= 0.5 {
            1.0 - inverse_beta_reg(v, b, a, 0.0, 1.0 - l)
        } else {
            let c = below + survival * (1.0 - u);
            inverse_beta_reg(c, a, b, l, 1.0)
        };
        x.clamp(l, 1.0)
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= 1.0
    }
}

/// Solves `I_x(a, b) = p` for `x` in `[lo, hi]` by safeguarded Newton iteration.
fn inverse_beta_reg(p: f64, a: f64, b: f64, lo: f64, hi: f64) -> f64 {
    let (mut lo, mut hi) = (lo, hi);
    let lnb = ln_beta(a, b);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..300 {
        let f = beta_reg(a, b, x) - p;
        if f == 0.0 {
            return x;
        }
        if f > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let ln_pdf = (a - 1.0) * x.ln() + (b - 1.0) * (1.0 - x).ln() - lnb;
        let step = f / ln_pdf.exp();
        let mut next = x - step;
        if !next.is_finite() || next <= lo || next >= hi {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 1e-15 * x.abs().max(1e-300) || hi - lo <= 1e-16 * hi.max(1e-300) {
            return next;
        }
        x = next;
    }
    x
}

/// Wishart(df, scale) via the Bartlett decomposition: the mean is `df * scale`.
pub fn sample_wishart<R: Rng + ?Sized>(rng: &mut R, df: f64, scale: &DMatrix<f64>) -> DMatrix<f64> {
    let q = scale.nrows();
    let l = cholesky_jittered(scale).expect("Wishart scale must be positive definite");
    let mut a = DMatrix::zeros(q, q);
    for i in 0..q {
        let chi = ChiSquared::new(df - i as f64).expect("Wishart df too small");
        a[(i, i)] = chi.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = std_normal(rng);
        }
    }
    let la = l * a;
    let mut w = &la * la.transpose();
    crate::linalg::symmetrize(&mut w);
    w
}

/// Draws `mean + sqrt(tau) * L^{-T} z`, i.e. a normal with covariance `tau * P^{-1}`
/// where `P = L L'` is a precision matrix.
pub fn sample_mvn_from_precision<R: Rng + ?Sized>(
    rng: &mut R,
    mean: &DVector<f64>,
    precision_chol: &DMatrix<f64>,
    tau: f64,
) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| std_normal(rng));
    let w = precision_chol
        .transpose()
        .solve_upper_triangular(&z)
        .expect("triangular solve");
    mean + w * tau.sqrt()
}

/// Draws from a normal with the given covariance Cholesky factor.
pub fn sample_mvn_from_cov_chol<R: Rng + ?Sized>(rng: &mut R, mean: &DVector<f64>, cov_chol: &DMatrix<f64>) -> DVector<f64> {
    let z = DVector::from_fn(mean.len(), |_, _| std_normal(rng));
    mean + cov_chol * z
}

/// Log density of `N(mean, tau * P^{-1})` at `x`, with `P = L L'`.
pub fn mvn_log_density_precision(x: &DVector<f64>, mean: &DVector<f64>, precision_chol: &DMatrix<f64>, tau: f64) -> f64 {
    let d = x - mean;
    let u = precision_chol.transpose() * d;
    let dim = x.len() as f64;
    let log_det_p = crate::linalg::chol_log_det(precision_chol);
    -0.5 * u.norm_squared() / tau + 0.5 * log_det_p - 0.5 * dim * (2.0 * std::f64::consts::PI * tau).ln()
}

impl TruncatedBeta {
    /// Log-density on the truncated support (normalised).
    pub fn ln_density(&self, x: f64) -> f64 {
        if !self.contains(x) {
            return f64::NEG_INFINITY;
        }
        let mass = beta_reg(self.b, self.a, 1.0 - self.lower);
        self.ln_pdf(x) - mass.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn tbeta_respects_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (a, b, l) in [(8.0, 4.0, 0.5), (1.0, 201.0, 0.5), (201.0, 1.0, 0.5), (1.0, 1.0, 1.0 / 3.0), (0.5, 0.5, 0.25), (1.0, 5000.0, 0.5)] {
            let d = TruncatedBeta::new(a, b, l);
            for _ in 0..2000 {
                let x = d.sample(&mut rng);
                assert!(d.contains(x), "{a} {b} {l}: {x}");
            }
        }
    }

    #[test]
    fn tbeta_uniform_prior_mean() {
        // TBeta(1,1,1/3) is U(1/3, 1)
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = TruncatedBeta::new(1.0, 1.0, 1.0 / 3.0);
        let n = 20000;
        let m: f64 = (0..n).map(|_| d.sample(&mut rng)).sum::<f64>() / n as f64;
        assert!((m - 2.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn inverse_matches_cdf() {
        for p in [1e-12, 0.01, 0.3, 0.5, 0.9] {
            let x = inverse_beta_reg(p, 3.0, 5.0, 0.0, 1.0);
            assert!((beta_reg(3.0, 5.0, x) - p).abs() < 1e-12 * p.max(1e-3));
        }
    }

    #[test]
    fn inverse_gamma_small_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = sample_inv_gamma(&mut rng, 0.001 + 0.5, 0.001 + 0.01);
            assert!(x > 0.0);
        }
    }

    #[test]
    fn dirichlet_on_simplex() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let p = sample_dirichlet(&mut rng, &[1.0, 1e-3, 50.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(p.iter().all(|&x| x >= 0.0));
    }

    #[test]
    fn mvn_density_integrates_to_known_value() {
        let l = crate::linalg::cholesky_lower(&DMatrix::from_row_slice(1, 1, &[4.0])).unwrap();
        // N(0, tau/4) at 0 with tau = 1: density sqrt(4 / 2pi)
        let v = mvn_log_density_precision(&DVector::zeros(1), &DVector::zeros(1), &l, 1.0);
        assert!((v - (4.0 / (2.0 * std::f64::consts::PI)).sqrt().ln()).abs() < 1e-12);
    }
}
